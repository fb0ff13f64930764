//! Deterministic CSV and manifest output. Floats are written with Rust's
//! shortest round-trip formatting, so identical inputs produce byte-identical
//! files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> std::io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 32 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // keep integral values compact but unambiguous
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// One named check performed during a run.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Metadata emitted alongside every data file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: serde_json::Value,
    pub n_max_used: Vec<usize>,
    pub seed: u64,
    pub wall_time_ms: u128,
    pub library_version: String,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(experiment: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            n_max_used: Vec::new(),
            seed,
            wall_time_ms: 0,
            library_version: cavity_entropy::VERSION.into(),
            checks: Vec::new(),
            extra: None,
        }
    }

    pub fn record_n_max(&mut self, n_max: usize) {
        if !self.n_max_used.contains(&n_max) {
            self.n_max_used.push(n_max);
            self.n_max_used.sort_unstable();
        }
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.wall_time_ms = elapsed.as_millis();
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
    }
}

/// Manifest path next to a data file: `runs/qfunc.csv` ->
/// `runs/qfunc.manifest.json`.
pub fn manifest_path(data_path: &Path) -> PathBuf {
    let stem = data_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    data_path.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for &v in &[0.5, 1.0, -3.25, 1e-7, 99.0, 0.1 + 0.2] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(99.0), "99.0");
    }

    #[test]
    fn manifest_paths() {
        assert_eq!(
            manifest_path(Path::new("runs/qfunc.csv")),
            PathBuf::from("runs/qfunc.manifest.json")
        );
    }
}
