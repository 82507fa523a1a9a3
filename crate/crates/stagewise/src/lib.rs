//! File-backed storage, HTTP providers, the HTTP gateway and the command
//! line for stagewise campaigns.

pub mod cli;
pub mod corpus;
pub mod engine;
pub mod gateway;
pub mod provider;
pub mod redact;
pub mod store;
pub mod tables;
