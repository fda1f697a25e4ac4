//! Run configuration and the manifest written by every run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::Encoding;
use super::table::{read_json, write_json};
use super::FORMAT_VERSION;
use crate::adapt::Hub;
use crate::datagen::{MultiDomainConfig, ToyConfig};
use crate::error::{Error, Result};
use crate::eval::{ClassifierKind, EvalConfig, Method};
use crate::mean::MeanConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubChoice {
    #[default]
    MeanOfMeans,
    Identity,
}

impl HubChoice {
    pub fn to_hub(self) -> Hub {
        match self {
            HubChoice::MeanOfMeans => Hub::MeanOfMeans,
            HubChoice::Identity => Hub::Identity,
        }
    }
}

/// Settings shared by all subcommands. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed of every random draw. Overrides the generator seeds.
    pub seed: u64,
    pub mean: MeanConfig,
    pub hub: HubChoice,
    pub methods: Vec<Method>,
    pub classifier: ClassifierKind,
    pub encoding: Encoding,
    /// Treat a mean that hits its iteration cap as an error.
    pub strict: bool,
    /// Worker threads, all cores when absent. Does not affect results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Root under which run directories are created.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub toy: ToyConfig,
    pub multidomain: MultiDomainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mean: MeanConfig::default(),
            hub: HubChoice::default(),
            methods: Method::ALL.to_vec(),
            classifier: ClassifierKind::default(),
            encoding: Encoding::default(),
            strict: false,
            workers: None,
            output_dir: None,
            toy: ToyConfig::default(),
            multidomain: MultiDomainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.mean.validate()?;
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad(format!("method `{}` listed twice", m.name()));
            }
        }
        if let ClassifierKind::Lda { shrinkage } = self.classifier {
            if !(0.0..=1.0).contains(&shrinkage) {
                return bad(format!("shrinkage {shrinkage} outside [0, 1]"));
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.normalized().toy.validate()?;
        self.normalized().multidomain.validate()
    }

    /// The configuration that determines the outputs: generator seeds set
    /// from `seed`, worker count and output root dropped.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        c.toy.seed = self.seed;
        c.multidomain.seed = self.seed;
        c.workers = None;
        c.output_dir = None;
        c
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            mean: self.mean,
            hub: self.hub.to_hub(),
            classifier: self.classifier,
        }
    }
}

/// SHA-256 of the normalized configuration serialized with `invocation`.
pub fn config_hash(cfg: &RunConfig, invocation: &serde_json::Value) -> String {
    let body = serde_json::json!({ "invocation": invocation, "config": cfg.normalized() });
    let bytes = serde_json::to_vec(&body).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// SHA-256 of a file, or of every file below a directory in path order
/// (relative path and contents).
pub fn file_digest(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(std::fs::read(&f).map_err(|e| Error::io(&f, e))?);
        }
    } else {
        h.update(std::fs::read(path).map_err(|e| Error::io(path, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Written next to every run's outputs. Holds what is needed to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub format_version: u32,
    /// Subcommand and its arguments, as understood by the front end.
    pub invocation: serde_json::Value,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the run directory.
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    /// `outputs` are absolute or relative to the working directory; they are
    /// stored relative to `run_dir`.
    pub fn new(
        invocation: serde_json::Value,
        cfg: &RunConfig,
        inputs: &[PathBuf],
        run_dir: &Path,
        outputs: &[PathBuf],
    ) -> Result<Self> {
        let digest = |p: &PathBuf, rel: PathBuf| {
            Ok(FileDigest {
                path: rel,
                sha256: file_digest(p)?,
            })
        };
        let mut outs = outputs
            .iter()
            .map(|p| digest(p, p.strip_prefix(run_dir).unwrap_or(p).to_path_buf()))
            .collect::<Result<Vec<_>>>()?;
        outs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            format_version: FORMAT_VERSION,
            config_hash: config_hash(cfg, &invocation),
            invocation,
            config: cfg.normalized(),
            seed: cfg.seed,
            inputs: inputs.iter().map(|p| digest(p, p.clone())).collect::<Result<_>>()?,
            outputs: outs,
        })
    }

    pub fn write(&self, run_dir: &Path) -> Result<PathBuf> {
        let path = run_dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let m: Manifest = read_json(&path)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::format(&path, format!("unsupported version {}", m.format_version)));
        }
        Ok(m)
    }

    /// Fails if an input file changed since the manifest was written.
    pub fn check_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = file_digest(&f.path)?;
            if now != f.sha256 {
                return Err(Error::InvalidInput(format!(
                    "input {} changed since the manifest was written",
                    f.path.display()
                )));
            }
        }
        Ok(())
    }
}
