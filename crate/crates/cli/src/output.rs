//! Output directory, result tables and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};
use crate::presets::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A result rendered in both encodings; the run picks one.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    csv: String,
    json: String,
}

impl Table {
    pub fn from_rows<R: Serialize>(name: &str, rows: &[R]) -> CliResult<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(|e| CliError::Invalid(format!("cannot encode {name} as CSV: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            csv: String::from_utf8(bytes).expect("csv is utf-8"),
            json: serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
        })
    }

    /// Replaces the JSON rendering with a richer document.
    pub fn with_json<V: Serialize>(mut self, doc: &V) -> Self {
        self.json = serde_json::to_string_pretty(doc).expect("document serializes") + "\n";
        self
    }

    pub fn render(&self, format: Format) -> &str {
        match format {
            Format::Csv => &self.csv,
            Format::Json => &self.json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// The only place results are written. File names are plain names, so nothing
/// escapes the directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(CliError::io(format!("creating {}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn path_for(&self, name: &str) -> CliResult<PathBuf> {
        let plain = Path::new(name).file_name().is_some_and(|f| f == name) && name != "..";
        if !plain {
            return Err(CliError::Invalid(format!("output name `{name}` is not a plain file name")));
        }
        Ok(self.root.join(name))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.path_for(name)?;
        fs::write(&path, contents).map_err(CliError::io(format!("writing {}", path.display())))?;
        self.register(name)?;
        Ok(path)
    }

    /// Buffered writer for a streamed file; call [`register`](Self::register) once it is closed.
    pub fn stream(&self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path_for(name)?;
        let f = File::create(&path).map_err(CliError::io(format!("creating {}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    pub fn register(&mut self, name: &str) -> CliResult<()> {
        let path = self.path_for(name)?;
        let data = fs::read(&path).map_err(CliError::io(format!("reading back {}", path.display())))?;
        self.written.push(OutputRecord { file: name.to_string(), sha256: hex(&Sha256::digest(&data)), bytes: data.len() as u64 });
        Ok(())
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.written
    }
}

/// What produced a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Invocation {
    Mode { mode: Mode, config: Box<ExperimentConfig> },
    Preset { name: Preset },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub cli_version: String,
    pub core_version: String,
    pub invocation: Invocation,
    pub seed: u64,
    pub format: Format,
    pub trace: bool,
    /// SHA-256 of the canonical resolved configuration (or preset name).
    pub config_hash: String,
    pub outputs: Vec<OutputRecord>,
}

pub const MANIFEST: &str = "manifest.json";

impl Manifest {
    pub fn new(invocation: Invocation, seed: u64, format: Format, trace: bool, outputs: Vec<OutputRecord>) -> Self {
        let config_hash = match &invocation {
            Invocation::Mode { config, .. } => config.hash(),
            Invocation::Preset { name } => hex(&Sha256::digest(format!("preset:{}:{seed}", name.name()).as_bytes())),
        };
        Self {
            tool: "weaklink".into(),
            cli_version: env!("CARGO_PKG_VERSION").into(),
            core_version: weaklink::VERSION.into(),
            invocation,
            seed,
            format,
            trace,
            config_hash,
            outputs,
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })
    }

    pub fn save(&self, dir: &OutputDir) -> CliResult<PathBuf> {
        let path = dir.path_for(MANIFEST)?;
        let mut w = dir.stream(MANIFEST)?;
        serde_json::to_writer_pretty(&mut w, self).expect("manifest serializes");
        writeln!(w).and_then(|_| w.flush()).map_err(CliError::io(format!("writing {}", path.display())))?;
        Ok(path)
    }
}
