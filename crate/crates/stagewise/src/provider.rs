//! Chat providers: a live chat-completions client, a scripted transcript
//! player and a recorder that turns live sessions into transcripts.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use stagewise_core::{ChatProvider, ProviderError};

use crate::redact::Redactor;

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. The key itself
    /// is read at call time and never stored.
    pub credential_env_var: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_backoff() -> u64 {
    500
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4".into(),
            credential_env_var: "STAGEWISE_API_KEY".into(),
            timeout_secs: 120,
            max_retries: 2,
            temperature: None,
            backoff_ms: default_backoff(),
        }
    }
}

/// Blocking chat-completions client.
pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn request_body(&self, prompt: &str) -> Value {
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [{ "role": "user", "content": prompt }],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        body
    }

    fn attempt(&self, key: &str, body: &Value) -> Result<String, ProviderError> {
        let mut resp = self
            .agent
            .post(&self.config.endpoint_url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ProviderError::Timeout,
                other => ProviderError::TransportFailure(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(ProviderError::AuthFailure(format!("endpoint rejected the credential (HTTP {status})")));
        }
        if !(200..300).contains(&status) {
            return Err(ProviderError::NonSuccessStatus(status));
        }
        let value: Value = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => ProviderError::Timeout,
            other => ProviderError::TransportFailure(format!("unreadable response body: {other}")),
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::TransportFailure("response has no choices[0].message.content".into()))
    }
}

fn retryable(e: &ProviderError) -> bool {
    match e {
        ProviderError::Timeout | ProviderError::TransportFailure(_) => true,
        ProviderError::NonSuccessStatus(s) => *s == 429 || *s >= 500,
        ProviderError::AuthFailure(_) => false,
    }
}

impl ChatProvider for HttpProvider {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        let var = &self.config.credential_env_var;
        let key = match std::env::var(var) {
            Ok(k) if !k.trim().is_empty() => k,
            _ => return Err(ProviderError::AuthFailure(format!("environment variable {var} is not set"))),
        };
        let body = self.request_body(prompt);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut tries = 0;
        loop {
            match self.attempt(&key, &body) {
                Err(e) if tries < self.config.max_retries && retryable(&e) => {
                    tries += 1;
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                other => return other,
            }
        }
    }
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub response: String,
}

impl TranscriptEntry {
    pub fn any_prompt(response: impl Into<String>) -> Self {
        Self { prompt_sha256: None, response: response.into() }
    }

    pub fn for_prompt(prompt: &str, response: impl Into<String>) -> Self {
        Self { prompt_sha256: Some(prompt_sha256(prompt)), response: response.into() }
    }
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptEntry>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut buf = String::new();
    for e in entries {
        buf.push_str(&serde_json::to_string(e).expect("entry serializes"));
        buf.push('\n');
    }
    std::fs::write(path, buf)
}

/// Plays back canned responses in order, one per call.
pub struct ScriptedProvider {
    state: Mutex<(usize, Vec<TranscriptEntry>)>,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        Self { state: Mutex::new((0, entries)) }
    }

    pub fn from_responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(responses.into_iter().map(TranscriptEntry::any_prompt).collect())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(read_transcript(path)?))
    }

    /// Entries consumed so far.
    pub fn position(&self) -> usize {
        self.state.lock().expect("transcript lock poisoned").0
    }

    pub fn remaining(&self) -> usize {
        let s = self.state.lock().expect("transcript lock poisoned");
        s.1.len() - s.0
    }
}

impl ChatProvider for ScriptedProvider {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut state = self.state.lock().expect("transcript lock poisoned");
        let (pos, entries) = &mut *state;
        let Some(entry) = entries.get(*pos) else {
            return Err(ProviderError::TransportFailure("transcript exhausted".into()));
        };
        let at = *pos;
        *pos += 1;
        if let Some(expected) = &entry.prompt_sha256 {
            let actual = prompt_sha256(prompt);
            if &actual != expected {
                return Err(ProviderError::TransportFailure(format!(
                    "transcript entry {} expects prompt {expected}, got {actual}",
                    at + 1
                )));
            }
        }
        Ok(entry.response.clone())
    }
}

/// Wraps a provider and appends every successful exchange to a transcript
/// file, with secrets removed from the response.
pub struct RecordingProvider<P> {
    inner: P,
    file: Mutex<File>,
    redactor: Redactor,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P, path: &Path, redactor: Redactor) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, file: Mutex::new(file), redactor })
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn chat(&self, prompt: &str) -> Result<String, ProviderError> {
        let response = self.inner.chat(prompt)?;
        let entry = TranscriptEntry::for_prompt(prompt, self.redactor.redact_str(&response));
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("recorder lock poisoned");
        file.write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| ProviderError::TransportFailure(format!("cannot record transcript: {e}")))?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;
    use std::net::TcpListener;

    #[test]
    fn scripted_order_and_exhaustion() {
        let p = ScriptedProvider::from_responses(["A", "B"]);
        assert_eq!(p.chat("x").unwrap(), "A");
        assert_eq!(p.chat("y").unwrap(), "B");
        assert_eq!(p.chat("z"), Err(ProviderError::TransportFailure("transcript exhausted".into())));
        assert_eq!(p.position(), 2);
    }

    #[test]
    fn scripted_hash_check() {
        let p = ScriptedProvider::new(vec![TranscriptEntry::for_prompt("right", "ok")]);
        assert!(matches!(p.chat("wrong"), Err(ProviderError::TransportFailure(_))));
        let p = ScriptedProvider::new(vec![TranscriptEntry::for_prompt("right", "ok")]);
        assert_eq!(p.chat("right").unwrap(), "ok");
    }

    #[test]
    fn recording_redacts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let rec = RecordingProvider::new(
            ScriptedProvider::from_responses(["echo sk-test-9999 A"]),
            &path,
            Redactor::new(["sk-test-9999".to_string()]),
        )
        .unwrap();
        assert_eq!(rec.chat("prompt with sk-test-9999").unwrap(), "echo sk-test-9999 A");
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("sk-test-9999"));
        let entries = read_transcript(&path).unwrap();
        assert_eq!(entries.len(), 1);
        assert!(entries[0].response.ends_with(" A"));
        assert_eq!(entries[0].prompt_sha256.as_deref(), Some(prompt_sha256("prompt with sk-test-9999").as_str()));
    }

    /// Serves the given raw HTTP responses, one per connection.
    fn serve(responses: Vec<String>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut requests = Vec::new();
            for resp in responses {
                let (mut sock, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut got = Vec::new();
                loop {
                    let n = sock.read(&mut buf).unwrap();
                    got.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&got);
                    if let Some(end) = text.find("\r\n\r\n") {
                        let len = text
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if got.len() >= end + 4 + len {
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                requests.push(String::from_utf8_lossy(&got).to_string());
                sock.write_all(resp.as_bytes()).unwrap();
            }
            requests
        });
        (url, handle)
    }

    fn http(status: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn config(url: String, var: &str) -> ProviderConfig {
        ProviderConfig {
            endpoint_url: url,
            model_name: "m".into(),
            credential_env_var: var.into(),
            timeout_secs: 5,
            max_retries: 2,
            temperature: Some(0.2),
            backoff_ms: 1,
        }
    }

    #[test]
    fn live_provider_retries_then_succeeds() {
        std::env::set_var("STAGEWISE_TEST_KEY_A", "sk-live-abcdef");
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;
        let (url, handle) = serve(vec![http("503 Service Unavailable", "{}"), http("200 OK", ok)]);
        let p = HttpProvider::new(config(url, "STAGEWISE_TEST_KEY_A"));
        assert_eq!(p.chat("hi").unwrap(), "hello");
        let reqs = handle.join().unwrap();
        assert_eq!(reqs.len(), 2);
        assert!(reqs[1].contains("Bearer sk-live-abcdef"));
        let body = &reqs[1][reqs[1].find("\r\n\r\n").unwrap() + 4..];
        let body: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["temperature"], 0.2);
    }

    #[test]
    fn live_provider_status_errors() {
        std::env::set_var("STAGEWISE_TEST_KEY_B", "sk-live-abcdef");
        let (url, handle) = serve(vec![http("400 Bad Request", "{}")]);
        let p = HttpProvider::new(config(url, "STAGEWISE_TEST_KEY_B"));
        assert_eq!(p.chat("hi"), Err(ProviderError::NonSuccessStatus(400)));
        handle.join().unwrap();
    }

    #[test]
    fn missing_credential_fails_before_network() {
        // Nothing listens on port 9; a network attempt would be a transport error.
        let p = HttpProvider::new(config("http://127.0.0.1:9/".into(), "STAGEWISE_TEST_KEY_UNSET"));
        assert!(matches!(p.chat("hi"), Err(ProviderError::AuthFailure(_))));
    }
}
