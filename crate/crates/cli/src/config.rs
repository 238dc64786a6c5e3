//! `--config FILE`: a TOML file of `key = value` pairs, one per flag.
//!
//! Keys are flag names without the leading dashes (`H`, `steps-per-unit` or
//! `steps_per_unit`, `t-list`). Values are strings, numbers, booleans (a
//! `true` switch is passed bare, `false` is dropped) or arrays (joined with
//! commas). The pairs are spliced in right after the subcommand, so any flag
//! also given on the command line takes precedence.

use std::ffi::OsString;

pub fn expand(mut argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= argv.len() {
                return Err("--config needs a file".into());
            }
            path = Some(argv[i + 1].to_string_lossy().into_owned());
            argv.drain(i..i + 2);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
            argv.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let flags = to_flags(&text).map_err(|e| format!("config {path}: {e}"))?;
    let at = argv.len().min(2);
    argv.splice(at..at, flags.into_iter().map(OsString::from));
    Ok(argv)
}

fn scalar(v: &toml::Value) -> Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(n) => Ok(n.to_string()),
        toml::Value::Float(x) => Ok(x.to_string()),
        other => Err(format!("unsupported value {other}")),
    }
}

pub fn to_flags(text: &str) -> Result<Vec<String>, String> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
    let mut out = Vec::new();
    for (key, value) in &table {
        let flag = if key.chars().count() == 1 {
            format!("--{key}")
        } else {
            format!("--{}", key.replace('_', "-"))
        };
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                out.push(flag);
                out.push(parts.join(","));
            }
            v => {
                out.push(flag);
                out.push(scalar(v)?);
            }
        }
    }
    Ok(out)
}
