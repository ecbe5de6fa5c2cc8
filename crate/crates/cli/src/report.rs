//! Versioned JSON reports: every command emits one document carrying the
//! resolved config, the payload, and a content hash over the serialized
//! bytes for reproducibility checks.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    config: &'a RunConfig,
    payload: &'a T,
    content_hash: String,
}

/// Serialize a report with its content hash: the hash field is computed over
/// the document serialized with an empty hash, then filled in.
pub fn render<T: Serialize>(command: &str, config: &RunConfig, payload: &T) -> String {
    let mut report = Report {
        schema: SCHEMA_VERSION,
        command,
        config,
        payload,
        content_hash: String::new(),
    };
    let unhashed = serde_json::to_string_pretty(&report).expect("reports serialize");
    let mut hasher = Sha256::new();
    hasher.update(unhashed.as_bytes());
    report.content_hash = format!("sha256:{:x}", hasher.finalize());
    serde_json::to_string_pretty(&report).expect("reports serialize")
}

/// Write the report into the output directory and echo it to stdout.
pub fn emit<T: Serialize>(
    command: &str,
    config: &RunConfig,
    payload: &T,
    file_name: &str,
) -> std::io::Result<String> {
    let json = render(command, config, payload);
    std::fs::create_dir_all(&config.out)?;
    std::fs::write(config.out.join(file_name), &json)?;
    println!("{json}");
    Ok(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_self_describing() {
        let cfg = RunConfig::default();
        let a = render("demo", &cfg, &serde_json::json!({"x": 1}));
        let b = render("demo", &cfg, &serde_json::json!({"x": 1}));
        assert_eq!(a, b);
        assert!(a.contains("\"schema\": 1"));
        assert!(a.contains("sha256:"));
        let c = render("demo", &cfg, &serde_json::json!({"x": 2}));
        assert_ne!(a, c);
    }
}
