//! Output plumbing shared by every subcommand: an output directory handle,
//! the machine-readable `summary.json` document, and small table helpers.
//!
//! The JSON document always carries the keys `command`, `settings` (the
//! resolved overrides), and `files` (logical name -> path written), plus
//! command-specific keys documented in the README. Key names are stable.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ctmc_hums_core::decision::ConfusionMatrix;
use ctmc_hums_core::markov_chain::GeneratorMatrix;
use serde_json::{json, Map, Value};

use crate::config::Settings;

/// Where a command writes its artifacts; creates the directory eagerly.
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write bytes to `<out>/<name>`, creating parent subdirectories.
    pub fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.file(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Accumulates the summary document for one command run.
pub struct Summary {
    command: &'static str,
    fields: Map<String, Value>,
    files: Map<String, Value>,
}

impl Summary {
    pub fn new(command: &'static str, settings: &Settings) -> Self {
        let mut fields = Map::new();
        let resolved: Map<String, Value> = settings
            .resolved()
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        fields.insert("settings".into(), Value::Object(resolved));
        Self { command, fields, files: Map::new() }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.to_string(), value);
    }

    pub fn add_file(&mut self, name: &str, path: &Path) {
        self.files.insert(name.to_string(), Value::String(path.display().to_string()));
    }

    /// Serialize to `<out>/summary.json` and echo the path to the log.
    pub fn write(mut self, out: &OutputDir) -> Result<Value> {
        self.fields.insert("command".into(), Value::String(self.command.to_string()));
        self.fields.insert("files".into(), Value::Object(self.files));
        let doc = Value::Object(self.fields);
        let path = out.file("summary.json");
        let mut f = fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        f.write_all(b"\n")?;
        log::info!("summary written to {}", path.display());
        Ok(doc)
    }
}

/// JSON view of a generator matrix: row-major array of arrays.
pub fn matrix_json(a: &GeneratorMatrix<f64>) -> Value {
    let n = a.n_states();
    Value::Array(
        (0..n)
            .map(|i| Value::Array(a.row(i).iter().map(|&v| json!(v)).collect()))
            .collect(),
    )
}

/// JSON view of a confusion matrix with fixed key names.
pub fn confusion_json(m: &ConfusionMatrix) -> Value {
    json!({
        "true_positive": m.true_positive,
        "false_positive": m.false_positive,
        "false_negative": m.false_negative,
        "true_negative": m.true_negative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_has_fixed_top_level_keys() {
        let tmp = tempfile::tempdir().unwrap();
        let out = OutputDir::create(tmp.path()).unwrap();
        let mut settings = Settings::new();
        settings.set("sim.dt", "0.5").unwrap();
        let mut s = Summary::new("simulate", &settings);
        s.set("seed", json!(7));
        let written = out.write("posterior.csv", b"t,p\n").unwrap();
        s.add_file("posterior", &written);
        let doc = s.write(&out).unwrap();
        assert_eq!(doc["command"], "simulate");
        assert_eq!(doc["seed"], 7);
        assert_eq!(doc["settings"]["sim.dt"], "0.5");
        assert!(doc["files"]["posterior"].as_str().unwrap().ends_with("posterior.csv"));
        let text = std::fs::read_to_string(tmp.path().join("summary.json")).unwrap();
        assert!(text.contains("\"command\""));
    }

    #[test]
    fn matrix_json_is_row_major() {
        let a = GeneratorMatrix::two_state(0.1, 0.05).unwrap();
        let v = matrix_json(&a);
        assert_eq!(v[0][1], json!(0.1));
        assert_eq!(v[1][0], json!(0.05));
    }
}
