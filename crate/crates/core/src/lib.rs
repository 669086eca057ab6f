pub mod cli;
pub mod config;
pub mod consistency;
pub mod dataset;
pub mod genclient;
pub mod hashing;
pub mod humaneval;
pub mod lora;
pub mod metrics;
pub mod pipeline;
pub mod prompting;
pub mod types;
