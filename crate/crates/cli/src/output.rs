//! CSV emission and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// One CSV cell.
pub enum Cell {
    F(f64),
    I(u64),
    B(bool),
    S(&'static str),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.8e}"),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => u8::from(*v).to_string(),
            Cell::S(v) => v.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as u64)
    }
}

impl From<&'static str> for Cell {
    fn from(v: &'static str) -> Self {
        Cell::S(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

/// Output directory that remembers every file written to it.
pub struct OutDir {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Other(format!("{name}: {e}"));
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Other(format!("{name}: {e}")))?;
        self.write_bytes(name, &bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to rerun a subcommand and check its outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PathBuf,
    pub subcommand: String,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn build(config: &Path, subcommand: &str, out: &OutDir, seed: u64) -> Result<Self, CliError> {
        let files = out
            .files
            .iter()
            .map(|name| {
                Ok(FileEntry {
                    name: name.clone(),
                    sha256: sha256_file(&out.dir.join(name))?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Self {
            config: config.to_path_buf(),
            subcommand: subcommand.to_string(),
            out_dir: out.dir.clone(),
            seed,
            files,
        })
    }

    pub fn write(&self) -> Result<(), CliError> {
        let path = self.out_dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_use_nine_significant_digits() {
        assert_eq!(Cell::from(0.1).render(), "1.00000000e-1");
        assert_eq!(Cell::from(-2e-6).render(), "-2.00000000e-6");
        assert_eq!(Cell::from(12usize).render(), "12");
        assert_eq!(Cell::from(true).render(), "1");
    }

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest {
            config: "a.cfg".into(),
            subcommand: "stats".into(),
            out_dir: "out".into(),
            seed: 7,
            files: vec![FileEntry {
                name: "gamma.csv".into(),
                sha256: "00".into(),
            }],
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }
}
