//! CSV artifacts and the JSON manifest.

use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    b.to_string()
}

pub fn opt_flag(b: Option<bool>) -> String {
    b.map(flag).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub enabled: bool,
    pub passed: bool,
    pub value: f64,
    /// Human-readable comparison, e.g. `<= 1e-3`.
    pub criterion: String,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check::new(name, value <= bound, value, format!("<= {}", num(bound)))
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check::new(name, value >= bound, value, format!(">= {}", num(bound)))
    }

    pub fn new(name: &str, passed: bool, value: f64, criterion: String) -> Self {
        Check { name: name.into(), enabled: true, passed, value, criterion, detail: String::new() }
    }

    pub fn skipped(name: &str, detail: &str) -> Self {
        Check {
            name: name.into(),
            enabled: false,
            passed: true,
            value: f64::NAN,
            criterion: String::new(),
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "enabled": self.enabled,
            "passed": self.passed,
            "value": self.value.is_finite().then_some(self.value),
            "criterion": self.criterion,
            "detail": self.detail,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshInfo {
    pub role: String,
    pub h: f64,
    pub nodes: Option<usize>,
    pub triangles: Option<usize>,
}

impl MeshInfo {
    pub fn of(role: &str, mesh: &cone_torsion::mesh::TriMesh) -> Self {
        MeshInfo { role: role.into(), h: mesh.mesh_size(), nodes: Some(mesh.p2.len()), triangles: Some(mesh.triangles.len()) }
    }
}

/// Writes artifacts into one directory and remembers their names.
pub struct Artifacts {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"")?;
        fs::remove_file(&probe)?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len(), "{name}");
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.into());
        Ok(())
    }
}
