use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// SHA-256 of the canonical description of an experiment.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Serialises `record` as a JSON object with `config_hash` added.
pub fn json_record<T: Serialize>(hash: &str, record: &T) -> String {
    let mut value = serde_json::to_value(record).expect("records serialise");
    match value {
        Value::Object(ref mut map) => {
            map.insert("config_hash".into(), json!(hash));
        }
        other => value = json!({ "config_hash": hash, "data": other }),
    }
    let mut text = serde_json::to_string_pretty(&value).expect("records serialise");
    text.push('\n');
    text
}

/// Minimal CSV writer; fields never contain separators or quotes.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Plain decimal for ordinary magnitudes, exponent form for tiny or huge ones.
pub fn number(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn yes_no(flag: bool) -> String {
    if flag { "yes" } else { "no" }.to_string()
}
