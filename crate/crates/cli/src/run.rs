//! The pipelines behind each subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spd_transport::adapt::{
    adapt, baseline_no_transport, domain_centroids, mean_transport, AdaptConfig, LabeledCovarianceSet,
};
use spd_transport::datagen::{generate_multidomain, generate_toy};
use spd_transport::eval::{embed_domains, evaluate_cross_domain, Method};
use spd_transport::io::{
    config_hash, read_artifacts, read_dataset, verify_artifacts, write_artifacts, write_confusion_csv,
    write_dataset, write_embedding_csv, write_json, Artifacts, Manifest, RunConfig, MANIFEST_FILE,
};
use spd_transport::{Error, Result};

/// Default root of run directories.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// A subcommand with its positional inputs, as recorded in manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Invocation {
    SimulateToy,
    SimulateMultidomain,
    Adapt {
        dataset: PathBuf,
    },
    Evaluate {
        dataset: PathBuf,
    },
    Verify {
        artifacts: PathBuf,
        dataset: Option<PathBuf>,
        compare: Option<PathBuf>,
    },
    Embed {
        dataset: PathBuf,
        method: Method,
    },
    Replay {
        manifest: PathBuf,
    },
}

impl Invocation {
    fn name(&self) -> &'static str {
        match self {
            Invocation::SimulateToy => "simulate-toy",
            Invocation::SimulateMultidomain => "simulate-multidomain",
            Invocation::Adapt { .. } => "adapt",
            Invocation::Evaluate { .. } => "evaluate",
            Invocation::Verify { .. } => "verify",
            Invocation::Embed { .. } => "embed",
            Invocation::Replay { .. } => "replay",
        }
    }
}

fn to_json(inv: &Invocation) -> serde_json::Value {
    serde_json::to_value(inv).expect("invocation serializes")
}

/// Runs `inv` and returns the run directory. Every run writes a manifest,
/// including a verification whose checks fail.
pub fn execute(inv: Invocation, cfg: RunConfig) -> Result<PathBuf> {
    if let Invocation::Replay { manifest } = &inv {
        return replay(manifest, cfg.output_dir.clone());
    }
    let root = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
    let inv_json = to_json(&inv);
    let hash = config_hash(&cfg, &inv_json);
    let run_dir = root.join(format!("{}-{}", inv.name(), &hash[..12]));
    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    log::info!("run directory {}", run_dir.display());

    let norm = cfg.normalized();
    let mut inputs = Vec::new();
    let mut deferred = None;
    let outputs = match &inv {
        Invocation::SimulateToy => write_dataset(&run_dir, &generate_toy(&norm.toy)?, cfg.encoding)?,
        Invocation::SimulateMultidomain => {
            write_dataset(&run_dir, &generate_multidomain(&norm.multidomain)?, cfg.encoding)?
        }
        Invocation::Adapt { dataset } => {
            inputs.push(dataset.clone());
            run_adapt(dataset, &cfg, &run_dir)?
        }
        Invocation::Evaluate { dataset } => {
            inputs.push(dataset.clone());
            run_evaluate(dataset, &cfg, &run_dir)?
        }
        Invocation::Embed { dataset, method } => {
            inputs.push(dataset.clone());
            run_embed(dataset, *method, &cfg, &run_dir)?
        }
        Invocation::Verify {
            artifacts,
            dataset,
            compare,
        } => {
            let dataset = match dataset {
                Some(d) => d.clone(),
                None => dataset_of(artifacts)?,
            };
            inputs.push(artifacts.clone());
            inputs.push(dataset.clone());
            inputs.extend(compare.clone());
            let (written, failure) = run_verify(artifacts, &dataset, compare.as_deref(), &run_dir)?;
            deferred = failure;
            written
        }
        Invocation::Replay { .. } => unreachable!("handled above"),
    };
    Manifest::new(inv_json, &cfg, &inputs, &run_dir, &outputs)?.write(&run_dir)?;
    match deferred {
        Some(e) => Err(e),
        None => Ok(run_dir),
    }
}

fn load(dataset: &Path, cfg: &RunConfig) -> Result<Vec<LabeledCovarianceSet>> {
    let sets = read_dataset(dataset)?;
    if cfg.strict {
        let unlabeled: Vec<_> = sets.iter().map(LabeledCovarianceSet::unlabeled).collect();
        let (_, warnings) = domain_centroids(&unlabeled, &cfg.mean)?;
        if let Some(w) = warnings.into_iter().next() {
            return Err(Error::DidNotConverge {
                last: Box::new(w.result),
            });
        }
    }
    Ok(sets)
}

fn run_adapt(dataset: &Path, cfg: &RunConfig, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let sets = read_dataset(dataset)?;
    let acfg = AdaptConfig {
        mean: cfg.mean,
        hub: cfg.hub.to_hub(),
    };
    let mut result = adapt(&sets, &acfg)?;
    if cfg.strict {
        result = result.ensure_converged()?;
    }
    let artifacts = Artifacts::from_result(&result, &sets, cfg.hub)?;
    write_artifacts(run_dir, &artifacts, cfg.encoding)
}

fn run_evaluate(dataset: &Path, cfg: &RunConfig, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let sets = load(dataset, cfg)?;
    let report = evaluate_cross_domain(&sets, &cfg.methods, &cfg.eval_config())?;
    let mut written = vec![run_dir.join("report.json")];
    write_json(&written[0], &report)?;
    for r in &report.per_method {
        let path = run_dir.join(format!("confusion_{}.csv", r.method.name()));
        write_confusion_csv(&path, &r.confusion)?;
        written.push(path);
        eprintln!("{:<20} accuracy {:.4}", r.method.name(), r.accuracy);
    }
    Ok(written)
}

fn run_embed(dataset: &Path, method: Method, cfg: &RunConfig, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let sets = load(dataset, cfg)?;
    let features = match method {
        Method::Baseline => baseline_no_transport(&sets, &cfg.mean)?,
        Method::MeanTransport => mean_transport(&sets, &cfg.mean)?,
        Method::ParallelTransport => adapt(
            &sets,
            &AdaptConfig {
                mean: cfg.mean,
                hub: cfg.hub.to_hub(),
            },
        )?
        .features(),
    };
    let path = run_dir.join(format!("embedding_{}.csv", method.name()));
    write_embedding_csv(&path, &embed_domains(&features, &sets)?)?;
    Ok(vec![path])
}

/// Dataset recorded in the manifest of an `adapt` run.
fn dataset_of(artifacts: &Path) -> Result<PathBuf> {
    let m = Manifest::load(&artifacts.join(MANIFEST_FILE))?;
    match serde_json::from_value(m.invocation) {
        Ok(Invocation::Adapt { dataset }) => Ok(dataset),
        _ => Err(Error::InvalidInput(format!(
            "{} was not written by `adapt`; pass --dataset",
            artifacts.display()
        ))),
    }
}

fn run_verify(
    artifacts: &Path,
    dataset: &Path,
    compare: Option<&Path>,
    run_dir: &Path,
) -> Result<(Vec<PathBuf>, Option<Error>)> {
    let a = read_artifacts(artifacts)?;
    let sets = read_dataset(dataset)?;
    let b = compare.map(read_artifacts).transpose()?;
    let report = verify_artifacts(&a, &sets, b.as_ref())?;
    let path = run_dir.join("verify.json");
    write_json(&path, &report)?;
    for c in &report.checks {
        eprintln!(
            "{:<18} {} max error {:.3e} (tolerance {:.0e}) {}",
            c.name,
            if c.passed { "ok  " } else { "FAIL" },
            c.max_error,
            c.tolerance,
            c.detail
        );
    }
    let failure = (!report.passed()).then(|| Error::VerificationFailed(report.failed().join(", ")));
    Ok((vec![path], failure))
}

/// Reruns a manifest under `root` (default: the standard root) and checks
/// that the new outputs hash to the recorded ones.
fn replay(manifest: &Path, root: Option<PathBuf>) -> Result<PathBuf> {
    let old = Manifest::load(manifest)?;
    old.check_inputs()?;
    let inv: Invocation = serde_json::from_value(old.invocation.clone())
        .map_err(|e| Error::format(manifest, format!("invocation: {e}")))?;
    if matches!(inv, Invocation::Replay { .. }) {
        return Err(Error::format(manifest, "cannot replay a replay"));
    }
    let mut cfg = old.config.clone();
    cfg.output_dir = root;
    if config_hash(&cfg, &old.invocation) != old.config_hash {
        return Err(Error::format(manifest, "config hash does not match its contents"));
    }
    let run_dir = execute(inv, cfg)?;
    let new = Manifest::load(&run_dir)?;
    let mut changed: Vec<String> = old
        .outputs
        .iter()
        .filter(|o| !new.outputs.contains(o))
        .map(|o| o.path.display().to_string())
        .collect();
    changed.extend(
        new.outputs
            .iter()
            .filter(|o| !old.outputs.iter().any(|p| p.path == o.path))
            .map(|o| format!("{} (new)", o.path.display())),
    );
    if !changed.is_empty() {
        return Err(Error::VerificationFailed(format!("outputs differ: {}", changed.join(", "))));
    }
    Ok(run_dir)
}
