//! Adaptation artifacts: hub, centroids, transport matrices, tangent
//! features and the transported matrices.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::HubChoice;
use super::dataset::{read_dataset, to_spd, write_dataset, Encoding};
use super::table::{fmt_f64, matrix_columns, parse_f64, read_csv, read_json, write_csv, write_json};
use super::FORMAT_VERSION;
use crate::adapt::{AdaptationResult, FeatureVector, LabeledCovarianceSet};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

pub const ARTIFACTS_HEADER: &str = "artifacts.json";
const ARTIFACTS_FORMAT: &str = "spd-artifacts";
const HUB_FILE: &str = "hub.csv";
const CENTROIDS_FILE: &str = "centroids.csv";
const TRANSPORT_FILE: &str = "transport.csv";
const FEATURES_FILE: &str = "features.csv";
const TRANSPORTED_DIR: &str = "transported";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnconvergedMean {
    pub stage: String,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactsHeader {
    format: String,
    version: u32,
    dim: usize,
    hub: HubChoice,
    domains: Vec<String>,
    unconverged: Vec<UnconvergedMean>,
}

#[derive(Clone, Debug)]
pub struct ArtifactDomain {
    pub domain_id: String,
    pub centroid: SpdMatrix,
    /// `E` with `E C Eᵀ = hub`.
    pub transport: DMatrix<f64>,
    pub features: Vec<FeatureVector>,
}

/// Everything `adapt` leaves on disk.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub hub_choice: HubChoice,
    pub hub: SpdMatrix,
    pub domains: Vec<ArtifactDomain>,
    /// Transported matrices with the input labels.
    pub transported: Vec<LabeledCovarianceSet>,
    pub unconverged: Vec<UnconvergedMean>,
}

impl Artifacts {
    pub fn from_result(
        result: &AdaptationResult,
        inputs: &[LabeledCovarianceSet],
        hub_choice: HubChoice,
    ) -> Result<Self> {
        let transported = result
            .domains
            .iter()
            .zip(inputs)
            .map(|(d, input)| {
                let mut set = LabeledCovarianceSet::new(
                    d.domain_id.clone(),
                    d.transported.clone(),
                    input.labels().cloned(),
                )?;
                set.metadata = input.metadata.clone();
                Ok(set)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            hub_choice,
            hub: result.grand_mean.clone(),
            domains: result
                .domains
                .iter()
                .map(|d| ArtifactDomain {
                    domain_id: d.domain_id.clone(),
                    centroid: d.centroid.clone(),
                    transport: d.transport.clone(),
                    features: d.features.clone(),
                })
                .collect(),
            transported,
            unconverged: result
                .warnings
                .iter()
                .map(|w| UnconvergedMean {
                    stage: w.stage.clone(),
                    iterations: w.result.iterations,
                    final_gradient_norm: w.result.final_gradient_norm,
                })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.hub.dim()
    }

    /// `E_to⁻¹ E_from`: domain `from` carried into the frame of domain `to`.
    pub fn cross_domain_map(&self, from: usize, to: usize) -> Result<DMatrix<f64>> {
        let get = |k: usize| {
            self.domains
                .get(k)
                .ok_or_else(|| Error::invalid(format!("no domain with index {k}")))
        };
        let back = get(to)?
            .transport
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("transport matrix is singular"))?;
        Ok(back * &get(from)?.transport)
    }
}

/// Writes the artifacts under `dir` and returns the paths written.
pub fn write_artifacts(dir: &Path, a: &Artifacts, encoding: Encoding) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = a.dim();
    let header = ArtifactsHeader {
        format: ARTIFACTS_FORMAT.into(),
        version: FORMAT_VERSION,
        dim: n,
        hub: a.hub_choice,
        domains: a.domains.iter().map(|d| d.domain_id.clone()).collect(),
        unconverged: a.unconverged.clone(),
    };
    let mut written = vec![dir.join(ARTIFACTS_HEADER)];
    write_json(&written[0], &header)?;

    let row = |id: Option<&str>, values: Vec<f64>| {
        id.map(str::to_string)
            .into_iter()
            .chain(values.into_iter().map(fmt_f64))
            .collect::<Vec<_>>()
    };
    let keyed = |prefix: &str| {
        std::iter::once("domain_id".to_string())
            .chain(matrix_columns(prefix, n))
            .collect::<Vec<_>>()
    };

    let path = dir.join(HUB_FILE);
    write_csv(&path, &matrix_columns("m", n), [row(None, a.hub.as_sym().to_row_major())])?;
    written.push(path);

    let path = dir.join(CENTROIDS_FILE);
    write_csv(
        &path,
        &keyed("m"),
        a.domains
            .iter()
            .map(|d| row(Some(&d.domain_id), d.centroid.as_sym().to_row_major())),
    )?;
    written.push(path);

    let path = dir.join(TRANSPORT_FILE);
    write_csv(
        &path,
        &keyed("e"),
        a.domains
            .iter()
            .map(|d| row(Some(&d.domain_id), d.transport.transpose().iter().copied().collect())),
    )?;
    written.push(path);

    let d_feat = n * (n + 1) / 2;
    let path = dir.join(FEATURES_FILE);
    let mut header = vec!["domain_id".to_string(), "item".to_string()];
    header.extend((0..d_feat).map(|k| format!("f{k}")));
    let rows = a.domains.iter().flat_map(|d| {
        d.features.iter().enumerate().map(move |(i, f)| {
            let mut r = vec![d.domain_id.clone(), i.to_string()];
            r.extend(f.values().iter().copied().map(fmt_f64));
            r
        })
    });
    write_csv(&path, &header, rows)?;
    written.push(path);

    written.extend(write_dataset(&dir.join(TRANSPORTED_DIR), &a.transported, encoding)?);
    Ok(written)
}

pub fn read_artifacts(dir: &Path) -> Result<Artifacts> {
    let header_path = if dir.is_dir() { dir.join(ARTIFACTS_HEADER) } else { dir.to_path_buf() };
    let dir = header_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let header: ArtifactsHeader = read_json(&header_path)?;
    if header.format != ARTIFACTS_FORMAT {
        return Err(Error::format(&header_path, format!("not an artifacts header (format `{}`)", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::format(&header_path, format!("unsupported version {}", header.version)));
    }
    let n = header.dim;
    let k = header.domains.len();

    let path = dir.join(HUB_FILE);
    let (_, rows) = read_csv(&path)?;
    if rows.len() != 1 {
        return Err(Error::format(&path, format!("expected one row, found {}", rows.len())));
    }
    let hub = to_spd("hub", 0, n, &numbers(&path, &rows[0], 0, n * n, 0)?)?;

    let keyed_rows = |file: &str| -> Result<Vec<Vec<f64>>> {
        let path = dir.join(file);
        let (_, rows) = read_csv(&path)?;
        if rows.len() != k {
            return Err(Error::format(&path, format!("expected {k} rows, found {}", rows.len())));
        }
        rows.iter()
            .enumerate()
            .map(|(r, rec)| {
                if rec[0] != header.domains[r] {
                    return Err(Error::format(&path, format!("row {r}: domain `{}` out of order", &rec[0])));
                }
                numbers(&path, rec, 1, n * n, r)
            })
            .collect()
    };
    let centroids = keyed_rows(CENTROIDS_FILE)?;
    let transports = keyed_rows(TRANSPORT_FILE)?;

    let path = dir.join(FEATURES_FILE);
    let (_, rows) = read_csv(&path)?;
    let d_feat = n * (n + 1) / 2;
    let mut features: Vec<Vec<FeatureVector>> = vec![Vec::new(); k];
    for (r, rec) in rows.iter().enumerate() {
        let kd = header
            .domains
            .iter()
            .position(|id| id == &rec[0])
            .ok_or_else(|| Error::format(&path, format!("row {r}: unknown domain `{}`", &rec[0])))?;
        features[kd].push(FeatureVector::new(numbers(&path, rec, 2, d_feat, r)?));
    }

    let transported = read_dataset(&dir.join(TRANSPORTED_DIR))?;
    if transported.len() != k {
        return Err(Error::format(&dir, format!("{} transported domains for {k} domains", transported.len())));
    }
    let domains = header
        .domains
        .iter()
        .zip(centroids)
        .zip(transports)
        .zip(features)
        .map(|(((id, c), e), f)| {
            Ok(ArtifactDomain {
                domain_id: id.clone(),
                centroid: to_spd(id, 0, n, &c)?,
                transport: DMatrix::from_row_slice(n, n, &e),
                features: f,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Artifacts {
        hub_choice: header.hub,
        hub,
        domains,
        transported,
        unconverged: header.unconverged,
    })
}

fn numbers(path: &Path, rec: &csv::StringRecord, skip: usize, len: usize, row: usize) -> Result<Vec<f64>> {
    if rec.len() != skip + len {
        return Err(Error::format(path, format!("row {row}: expected {} fields, found {}", skip + len, rec.len())));
    }
    rec.iter().skip(skip).map(|f| parse_f64(path, f, row)).collect()
}
