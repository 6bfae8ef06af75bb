pub mod jsonl;
pub mod mining;
pub mod net;
pub mod prompts;
pub mod text;
pub mod types;
pub mod filter;
pub mod bench;
pub mod scorer;
pub mod train;
pub mod metrics;
pub mod config;
pub mod app;
