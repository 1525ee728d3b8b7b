//! Operational shell around the engine: configuration, snapshots, ingest,
//! remote clients, the HTTP API and the CLI.

pub mod app;
pub mod cli;
pub mod clients;
pub mod config;
pub mod http;
pub mod ingest;
pub mod store;
