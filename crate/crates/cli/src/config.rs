//! Training config files. Validation is exhaustive: every schema problem in
//! the file is reported at once, not just the first.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::Value;

use kanchor::train::TrainConfig;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "arch",
    "channels",
    "dims",
    "max_lens",
    "batch_size",
    "lr",
    "epochs",
    "seed",
    "verbose",
];

/// Parse and validate a train config, collecting every violation.
pub fn load_train_config(path: &Path) -> Result<TrainConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: invalid JSON: {e}", path.display())))?;

    let mut problems = Vec::new();
    let Some(object) = value.as_object() else {
        return Err(CliError::data(format!(
            "{}: config must be a JSON object",
            path.display()
        )));
    };

    let known: BTreeSet<&str> = KNOWN_KEYS.iter().copied().collect();
    for key in object.keys() {
        if !known.contains(key.as_str()) {
            problems.push(format!("unknown field \"{key}\""));
        }
    }
    for required in ["arch", "channels", "dims", "batch_size", "lr", "epochs"] {
        if !object.contains_key(required) {
            problems.push(format!("missing field \"{required}\""));
        }
    }
    if let Some(arch) = object.get("arch") {
        match arch.as_str() {
            Some(s) if s.parse::<kanchor::matchers::ArchKind>().is_ok() => {}
            Some(s) => problems.push(format!(
                "arch: unknown architecture \"{s}\" (arc1|matchpyramid|iwan)"
            )),
            None => problems.push("arch: must be a string".to_string()),
        }
    }
    if let Some(channels) = object.get("channels") {
        match channels.as_array() {
            Some(list) => {
                let names: Vec<String> = list
                    .iter()
                    .map(|v| v.as_str().unwrap_or("<non-string>").to_string())
                    .collect();
                match kanchor::matchers::ChannelSet::from_names(&names) {
                    Ok(set) if set.any() => {}
                    Ok(_) => problems.push("channels: at least one channel required".to_string()),
                    Err(e) => problems.push(format!("channels: {e}")),
                }
            }
            None => problems.push("channels: must be a list of channel names".to_string()),
        }
    }
    if let Some(dims) = object.get("dims") {
        match dims.as_object() {
            Some(map) => {
                for key in ["embed", "filters", "hidden"] {
                    match map.get(key).and_then(Value::as_u64) {
                        Some(v) if v > 0 => {}
                        Some(_) => problems.push(format!("dims.{key}: must be positive")),
                        None => problems.push(format!("dims.{key}: missing or not a positive integer")),
                    }
                }
                for key in map.keys() {
                    if !["embed", "filters", "hidden"].contains(&key.as_str()) {
                        problems.push(format!("dims: unknown field \"{key}\""));
                    }
                }
            }
            None => problems.push("dims: must be an object".to_string()),
        }
    }
    for (key, min) in [("batch_size", 1u64), ("epochs", 1u64)] {
        if let Some(v) = object.get(key) {
            match v.as_u64() {
                Some(n) if n >= min => {}
                _ => problems.push(format!("{key}: must be an integer >= {min}")),
            }
        }
    }
    if let Some(lr) = object.get("lr") {
        match lr.as_f64() {
            Some(v) if v > 0.0 && v.is_finite() => {}
            _ => problems.push("lr: must be a positive number".to_string()),
        }
    }

    if !problems.is_empty() {
        return Err(CliError::data(format!(
            "{}: invalid config:\n  - {}",
            path.display(),
            problems.join("\n  - ")
        )));
    }
    let config: TrainConfig = serde_json::from_value(value)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(body: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("kanchor-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("cfg-{}.json", fnv_tag(body)));
        fs::write(&path, body).unwrap();
        path
    }

    fn fnv_tag(s: &str) -> u64 {
        kanchor_tensor::fnv1a64(s.as_bytes())
    }

    #[test]
    fn valid_config_parses() {
        let path = write_tmp(
            r#"{"arch": "arc1", "channels": ["token","entity","triple"],
                "dims": {"embed": 16, "filters": 8, "hidden": 8},
                "batch_size": 32, "lr": 0.01, "epochs": 3, "seed": 7}"#,
        );
        let config = load_train_config(&path).unwrap();
        assert_eq!(config.arch, kanchor::matchers::ArchKind::Arc1);
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn all_violations_reported_together() {
        let path = write_tmp(
            r#"{"arch": "bert", "channels": [], "batch_size": 0,
                "lr": -1, "epochs": 0, "mystery": true}"#,
        );
        let err = load_train_config(&path).unwrap_err().to_string();
        for needle in [
            "unknown field \"mystery\"",
            "missing field \"dims\"",
            "unknown architecture \"bert\"",
            "at least one channel",
            "batch_size",
            "lr",
            "epochs",
        ] {
            assert!(err.contains(needle), "missing {needle} in: {err}");
        }
    }
}
