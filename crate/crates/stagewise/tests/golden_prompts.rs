//! Rendered prompts compared byte for byte with checked-in fixtures.
//! Run with `STAGEWISE_BLESS=1` to rewrite the fixtures after an intended
//! template change.

use stagewise::corpus::{golden_prompts, Corpus, GOLDEN_DIR};
use stagewise_core::scope::render_scope_prompt;

#[test]
fn scope_prompt_matches_reference() {
    let corpus = Corpus::locate().unwrap();
    let rendered = render_scope_prompt(&corpus.scope_request().unwrap()).unwrap();
    assert_eq!(rendered, corpus.read("scope/S37_prompt.txt").unwrap());
}

#[test]
fn session_prompts_match_fixtures() {
    let corpus = Corpus::locate().unwrap();
    let a = golden_prompts(&corpus, tempfile::tempdir().unwrap().path()).unwrap();
    let b = golden_prompts(&corpus, tempfile::tempdir().unwrap().path()).unwrap();
    assert_eq!(a, b, "two runs rendered different bytes");
    assert_eq!(a.len(), 5);

    if std::env::var_os("STAGEWISE_BLESS").is_some() {
        for (name, text) in &a {
            std::fs::write(corpus.path(GOLDEN_DIR).join(name), text).unwrap();
        }
    }
    for (name, text) in &a {
        let fixture = corpus.read(&format!("{GOLDEN_DIR}/{name}")).unwrap();
        assert!(fixture == *text, "{name} differs from its fixture");
    }
    let scope = &a.iter().find(|(n, _)| n == "scope_H.txt").unwrap().1;
    assert_eq!(scope, &corpus.read("scope/S37_prompt.txt").unwrap());
}
