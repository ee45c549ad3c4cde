//! CSV and JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::field::GridField;

/// Numbers are written with 17 significant digits so they round-trip exactly.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
        let mut out = String::new();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let path = self.path(name);
        fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        let path = self.path(name);
        fs::write(path, text + "\n")?;
        Ok(())
    }

    /// One row per node: coordinates then every component.
    pub fn field_csv(&mut self, name: &str, field: &GridField, label: &str) -> Result<()> {
        let d = field.grid.dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        if field.components == 1 {
            header.push(label.to_string());
        } else {
            header.extend((0..field.components).map(|c| format!("{label}{c}")));
        }
        let rows: Vec<Vec<f64>> = (0..field.grid.len())
            .map(|k| {
                let mut r = field.grid.point(k);
                r.extend_from_slice(field.node_value(k));
                r
            })
            .collect();
        self.csv(name, &header, &rows)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub derived_seeds: Vec<(String, u64)>,
    pub version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}
