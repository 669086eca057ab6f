//! Sends one prompt to an OpenAI-compatible chat endpoint. Without
//! `AVKIT_ENDPOINT` set, prints the request configuration and uses the mock.
//!
//! AVKIT_ENDPOINT=http://localhost:8000/v1/chat/completions AVKIT_MODEL=my-model \
//!     cargo run --example http_backend

use avkit::genclient::{generate, BackendConfig, GenerationRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = match std::env::var("AVKIT_ENDPOINT") {
        Ok(url) => {
            let model = std::env::var("AVKIT_MODEL").unwrap_or_else(|_| "gpt-3.5-turbo".into());
            let mut c = BackendConfig::http(url, model);
            c.api_key_env_var = std::env::var("AVKIT_KEY_VAR").ok().or(Some("OPENAI_API_KEY".into()));
            c
        }
        Err(_) => BackendConfig::mock(0, 0.0),
    };
    println!("{}", serde_json::to_string_pretty(&config)?);
    let request = GenerationRequest::new(
        "Text1 and Text2 are written by the same author. Please analyze their writing styles.\nText1: Hi.\nText2: Hello.",
    );
    let result = generate(&request, &config)?;
    println!("[{} after {} attempt(s)]\n{}", result.backend_name, result.attempt_count, result.text);
    Ok(())
}
