//! Experiment harness for `tyler-core`: sample complexity, convergence, expansion
//! surveys and derivative diagnostics, each emitting CSV and JSON.

pub mod config;
pub mod experiments;
pub mod stats;

use std::path::Path;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] tyler_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
