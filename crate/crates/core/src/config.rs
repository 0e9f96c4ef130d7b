//! Parameter files.
//!
//! Two formats are accepted. A file whose first non-blank character is `{`
//! is read as a JSON object; anything else as `key = value` lines with `#`
//! comments:
//!
//! ```text
//! lambda1 = 2
//! lambda2 = 0.5
//! alpha1 = 10
//! alpha2 = 2.7
//! service1 = exp(4)
//! service2 = exp(2)
//! # optional
//! balk1 = 1
//! init1 = 0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::params::{ParamError, SystemParams};
use crate::service::ServiceDist;

pub const FIELDS: [&str; 10] =
    ["lambda1", "lambda2", "alpha1", "alpha2", "service1", "service2", "balk1", "balk2", "init1", "init2"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

pub fn load(path: &Path) -> Result<SystemParams, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse(&text)
}

/// Parses and validates a parameter file.
pub fn parse(text: &str) -> Result<SystemParams, ConfigError> {
    let params = if text.trim_start().starts_with('{') {
        serde_json::from_str::<SystemParams>(text)?
    } else {
        parse_key_values(text)?
    };
    Ok(params.validate()?)
}

fn parse_key_values(text: &str) -> Result<SystemParams, ConfigError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Line { line, message: format!("expected key = value, got {content:?}") });
        };
        let key = key.trim();
        if !FIELDS.contains(&key) {
            return Err(ConfigError::Line { line, message: format!("unknown field {key:?}") });
        }
        if entries.insert(key, (line, value.trim())).is_some() {
            return Err(ConfigError::Line { line, message: format!("duplicate field {key:?}") });
        }
    }

    let real = |key: &str, default: Option<f64>| -> Result<f64, ConfigError> {
        match entries.get(key) {
            Some(&(line, v)) => v
                .parse::<f64>()
                .map_err(|_| ConfigError::Line { line, message: format!("{key}: expected a number, got {v:?}") }),
            None => default.ok_or_else(|| ConfigError::Field { field: key.into(), message: "missing".into() }),
        }
    };
    let count = |key: &str| -> Result<u64, ConfigError> {
        match entries.get(key) {
            Some(&(line, v)) => v.parse::<u64>().map_err(|_| ConfigError::Line {
                line,
                message: format!("{key}: expected a non-negative integer, got {v:?}"),
            }),
            None => Ok(0),
        }
    };
    let service = |key: &str| -> Result<ServiceDist, ConfigError> {
        match entries.get(key) {
            Some(&(line, v)) => {
                v.parse().map_err(|e: crate::service::ServiceError| ConfigError::Line { line, message: format!("{key}: {e}") })
            }
            None => Err(ConfigError::Field { field: key.into(), message: "missing".into() }),
        }
    };

    Ok(SystemParams {
        lambda1: real("lambda1", None)?,
        lambda2: real("lambda2", None)?,
        alpha1: real("alpha1", None)?,
        alpha2: real("alpha2", None)?,
        service1: service("service1")?,
        service2: service("service2")?,
        balk1: real("balk1", Some(1.0))?,
        balk2: real("balk2", Some(1.0))?,
        init_orbit1: count("init1")?,
        init_orbit2: count("init2")?,
    })
}

/// Renders parameters in the key-value format accepted by [`parse`].
pub fn to_key_values(p: &SystemParams) -> String {
    format!(
        "lambda1 = {}\nlambda2 = {}\nalpha1 = {}\nalpha2 = {}\nservice1 = {}\nservice2 = {}\nbalk1 = {}\nbalk2 = {}\ninit1 = {}\ninit2 = {}\n",
        p.lambda1, p.lambda2, p.alpha1, p.alpha2, p.service1, p.service2, p.balk1, p.balk2, p.init_orbit1, p.init_orbit2
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW1: &str = "\
# row 1
lambda1 = 2
lambda2 = 0.5
alpha1 = 10     # retrial
alpha2 = 2.7
service1 = exp(4)
service2 = exp(2)
";

    #[test]
    fn key_values_with_defaults() {
        let p = parse(ROW1).unwrap();
        assert_eq!(p.alpha2, 2.7);
        assert_eq!(p.service1, ServiceDist::Exponential { rate: 4.0 });
        assert_eq!((p.balk1, p.balk2, p.init_orbit1), (1.0, 1.0, 0));
    }

    #[test]
    fn json_form() {
        let p = parse(r#"{"lambda1": 2, "lambda2": 0.5, "alpha1": 10, "alpha2": 2.7,
            "service1": "pareto(0.125, 2)", "service2": "pareto(0.4,5)", "init1": 1000, "init2": 1000}"#)
        .unwrap();
        assert_eq!(p.service2, ServiceDist::Pareto { scale: 0.4, shape: 5.0 });
        assert_eq!(p.init_orbit2, 1000);
    }

    #[test]
    fn round_trip() {
        let p = parse(ROW1).unwrap().with_balking(0.25, 0.5).with_init(3, 4);
        assert_eq!(parse(&to_key_values(&p)).unwrap(), p);
    }

    #[test]
    fn errors_name_line_or_field() {
        let bad_number = ROW1.replace("alpha1 = 10", "alpha1 = ten");
        assert_eq!(parse(&bad_number).unwrap_err().to_string(), "line 4: alpha1: expected a number, got \"ten\"");
        let unknown = format!("{ROW1}mu1 = 4\n");
        assert!(parse(&unknown).unwrap_err().to_string().starts_with("line 8: unknown field"));
        let missing = ROW1.replace("service2 = exp(2)", "");
        assert_eq!(parse(&missing).unwrap_err().to_string(), "field service2: missing");
        let invalid = ROW1.replace("lambda1 = 2", "lambda1 = 0");
        assert!(parse(&invalid).unwrap_err().to_string().contains("lambda1: arrival rate must be positive"));
        let json = parse(r#"{"lambda1": 2}"#).unwrap_err().to_string();
        assert!(json.contains("missing field"), "{json}");
    }
}
