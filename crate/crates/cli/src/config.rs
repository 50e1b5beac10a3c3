//! Run configuration plumbing. Flags build a complete config; a JSON file
//! passed with `--config` is merged over it key by key, so the file wins.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub const ECHO_FILE: &str = "config.json";

/// Flag-built config overridden by the optional config file.
pub fn resolve<T: Serialize + DeserializeOwned>(from_flags: T, file: Option<&Path>) -> Result<T> {
    let mut base = serde_json::to_value(&from_flags)?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let overlay: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        check_keys(&base, &overlay, "")?;
        merge(&mut base, overlay);
    }
    serde_json::from_value(base).context("invalid configuration")
}

fn check_keys(base: &Value, overlay: &Value, at: &str) -> Result<()> {
    if let (Value::Object(b), Value::Object(o)) = (base, overlay) {
        for (k, v) in o {
            let here = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
            match b.get(k) {
                None => bail!("unknown config key '{here}'"),
                Some(bv) => check_keys(bv, v, &here)?,
            }
        }
    }
    Ok(())
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k.as_str()) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Writes the resolved config next to the artifacts it produced.
pub fn echo<T: Serialize>(dir: &Path, cfg: &T) -> Result<()> {
    corona_core::io::write_json(&dir.join(ECHO_FILE), cfg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        a: f64,
        b: usize,
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Outer {
        name: String,
        inner: Inner,
        opt: Option<Inner>,
    }

    fn flags() -> Outer {
        Outer {
            name: "x".into(),
            inner: Inner { a: 1.0, b: 2 },
            opt: None,
        }
    }

    fn with_file(json: &str) -> Result<Outer> {
        let dir = tempfile::tempdir()?;
        let p = dir.path().join("c.json");
        std::fs::write(&p, json)?;
        resolve(flags(), Some(&p))
    }

    #[test]
    fn partial_nested_override() {
        let got = with_file(r#"{"inner": {"b": 7}}"#).unwrap();
        assert_eq!(got.inner, Inner { a: 1.0, b: 7 });
        assert_eq!(got.name, "x");
        let got = with_file(r#"{"opt": {"a": 3.0, "b": 4}}"#).unwrap();
        assert_eq!(got.opt, Some(Inner { a: 3.0, b: 4 }));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = with_file(r#"{"inner": {"c": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("inner.c"), "{e}");
        assert!(with_file(r#"{"nmae": "y"}"#).is_err());
        assert!(with_file(r#"{"opt": {"a": 3.0, "b": 4, "z": 0}}"#).is_err());
    }

    #[test]
    fn no_file_keeps_flags() {
        assert_eq!(resolve(flags(), None).unwrap(), flags());
    }
}
