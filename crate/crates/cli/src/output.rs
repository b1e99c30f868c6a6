use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fnn_core::analysis::fmt12;
use serde_json::Value;

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Pretty JSON with every float cut to 12 significant digits.
    pub fn write_json(&self, name: &str, mut value: Value) -> Result<PathBuf> {
        round_floats(&mut value);
        self.write_text(name, &(serde_json::to_string_pretty(&value)? + "\n"))
    }
}

pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = fmt12(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Short form for summaries.
pub fn num(x: f64) -> String {
    fmt12(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_are_rounded_recursively() {
        let mut v = json!({"a": 0.123456789012345678, "b": [1.0000000000001, 7], "c": {"d": -2.5e-30}});
        round_floats(&mut v);
        assert_eq!(v.to_string(), r#"{"a":0.123456789012,"b":[1.0,7],"c":{"d":-2.5e-30}}"#);
    }
}
