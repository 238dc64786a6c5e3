//! Headers and file emission. Everything is built in memory and written once,
//! so a run's bytes depend only on its configuration.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::Failure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
}

impl Meta {
    pub fn new<A: Serialize>(command: &'static str, args: &A, seed: Option<u64>) -> Self {
        Self {
            version: VERSION,
            command,
            config: serde_json::to_value(args).expect("arguments serialize"),
            seed,
        }
    }

    /// `#` comment lines for CSV output.
    pub fn csv_header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# bfbm {}\n# command: {}\n# config: {}\n# seed: {}\n",
            self.version, self.command, self.config, seed
        )
    }

    /// `body` with a `meta` field added; `body` must be an object.
    pub fn wrap(&self, mut body: Value) -> Value {
        body.as_object_mut().expect("object body").insert("meta".into(), json!(self));
        body
    }
}

pub fn write(out: Option<&str>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {path}: {e}"))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
            Ok(())
        }
    }
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

/// Path of the JSON summary written next to a CSV file.
pub fn sidecar(out: &str) -> String {
    format!("{out}.json")
}
