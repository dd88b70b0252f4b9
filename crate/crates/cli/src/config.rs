//! `--config FILE`: a JSON object whose keys are long flag names. Its values
//! become flags placed right after the subcommand, so anything given on the
//! command line (parsed later, overriding) takes precedence.

use std::ffi::OsString;
use std::fs;

use serde_json::Value;

use crate::UsageError;

const GLOBAL_WITH_VALUE: [&str; 2] = ["--workers", "--config"];

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if GLOBAL_WITH_VALUE.contains(&s.as_ref()) {
            i += 2;
        } else if s.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

fn scalar(v: &Value) -> Result<String, UsageError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(UsageError(format!("unsupported config value {other}"))),
    }
}

/// Flags equivalent to a config object, sorted by key.
pub fn config_flags(json: &str) -> Result<Vec<OsString>, UsageError> {
    let value: Value = serde_json::from_str(json).map_err(|e| UsageError(format!("config: {e}")))?;
    let Value::Object(map) = value else {
        return Err(UsageError("config must be a JSON object".into()));
    };
    let mut out = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            other => {
                out.push(flag.into());
                out.push(scalar(&other)?.into());
            }
        }
    }
    Ok(out)
}

/// Splices the flags from `--config` into `argv`.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, UsageError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| UsageError(format!("config {}: {e}", path.to_string_lossy())))?;
    let flags = config_flags(&text)?;
    let Some(at) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let mut out = argv;
    out.splice(at + 1..at + 1, flags);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn flags_from_object() {
        let f = config_flags(r#"{"epochs": 30, "no_early_stop": true, "nondeterministic": false, "fractions": [0.5, 0.7]}"#)
            .unwrap();
        assert_eq!(f, os(&["--epochs", "30", "--fractions", "0.5,0.7", "--no-early-stop"]));
        assert!(config_flags("[1]").is_err());
        assert!(config_flags(r#"{"a": {"b": 1}}"#).is_err());
    }

    #[test]
    fn inserted_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"epochs": 5}"#).unwrap();
        let argv = vec![
            OsString::from("addlab"),
            "--workers".into(),
            "2".into(),
            "--config".into(),
            p.clone().into_os_string(),
            "train".into(),
            "--epochs".into(),
            "9".into(),
        ];
        let out = expand(argv).unwrap();
        let tail: Vec<_> = out[5..].iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(tail, ["train", "--epochs", "5", "--epochs", "9"]);
    }
}
