use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::args::Format;
use crate::error::CliError;
use crate::manifest::RunManifest;

/// Where and how reports go: always stdout, plus files when an output directory is set.
pub struct Output {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

impl Output {
    pub fn write_file(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
    }

    /// Prints the summary and mirrors it to `<stem>.<ext>`. CSV summaries get
    /// their manifest in a sidecar file.
    pub fn emit(
        &self,
        stem: &str,
        manifest: &RunManifest,
        json: &impl Serialize,
        csv: impl FnOnce() -> String,
    ) -> Result<(), CliError> {
        let text = match self.format {
            Format::Json => to_json(json),
            Format::Csv => {
                self.write_file(&format!("{stem}.manifest.json"), &to_json(manifest))?;
                csv()
            }
        };
        print!("{text}");
        self.write_file(&format!("{stem}.{}", self.format.extension()), &text)
    }
}

pub fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            // scalar lists collapse into one cell; tables belong in their own CSV
            if items.iter().all(|v| !v.is_object() && !v.is_array()) {
                let cells: Vec<String> = items.iter().map(scalar).collect();
                out.push((prefix.to_string(), cells.join("; ")));
            }
        }
        v => out.push((prefix.to_string(), scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        v => v.to_string(),
    }
}

/// `key,value` rows with dotted keys for nested fields.
pub fn key_value_csv(value: &impl Serialize) -> String {
    let value = serde_json::to_value(value).expect("reports serialize");
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
    }
    out
}
