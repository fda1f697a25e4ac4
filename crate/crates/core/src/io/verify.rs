//! Re-checks saved adaptation artifacts against the input dataset.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifacts::Artifacts;
use super::config::HubChoice;
use crate::adapt::{half_vectorize, LabeledCovarianceSet};
use crate::error::{Error, Result};
use crate::spd::{congruence, distance, inner_product, log_map, whitened_tangent, SpdMatrix};
use crate::transport::{adapt_map_three_step, relative_error, transport_matrix};

/// Relative tolerance of the reconstruction and isometry checks.
pub const VERIFY_TOLERANCE: f64 = 1e-8;
/// Whitened mean tangent norm accepted at a stored mean.
const STATIONARITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Worst error over items, with the item that produced it.
#[derive(Default)]
struct Worst {
    error: f64,
    at: String,
}

impl Worst {
    fn record(&mut self, error: f64, at: impl FnOnce() -> String) {
        // NaN counts as a failure
        if error > self.error || error.is_nan() && !self.error.is_nan() {
            self.error = error;
            self.at = at();
        }
    }

    fn merge(mut self, other: Worst) -> Worst {
        self.record(other.error, || other.at);
        self
    }

    fn into_check(self, name: &str, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            passed: self.error <= tolerance,
            max_error: self.error,
            tolerance,
            detail: self.at,
        }
    }
}

fn rel(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (x - reference).norm() / reference.norm().max(f64::MIN_POSITIVE)
}

fn whitened_mean_norm(mean: &SpdMatrix, set: &[SpdMatrix]) -> Result<f64> {
    let n = mean.dim();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for p in set {
        acc += whitened_tangent(mean, p)?.as_matrix();
    }
    Ok(acc.norm() / set.len().max(1) as f64)
}

/// Runs every invariant check on `a`, computed from `inputs`. With
/// `compare`, also checks that both runs induce the same congruence between
/// every pair of domains.
pub fn verify_artifacts(
    a: &Artifacts,
    inputs: &[LabeledCovarianceSet],
    compare: Option<&Artifacts>,
) -> Result<VerifyReport> {
    check_shapes(a, inputs)?;
    let mut checks = Vec::new();
    let tol = VERIFY_TOLERANCE;

    let mut w = Worst::default();
    for d in &a.domains {
        let e = transport_matrix(&d.centroid, &a.hub)?;
        w.record(rel(&d.transport, &e), || d.domain_id.clone());
    }
    checks.push(w.into_check("transport_matrix", tol));

    let mut w = Worst::default();
    for d in &a.domains {
        let moved = congruence(&d.transport, d.centroid.as_sym())?;
        w.record(relative_error(&moved, a.hub.as_sym()), || d.domain_id.clone());
    }
    checks.push(w.into_check("centroid_to_hub", tol));

    let per_domain: Vec<[Worst; 4]> = a
        .domains
        .iter()
        .zip(&a.transported)
        .zip(inputs)
        .map(|((d, t), input)| domain_checks(a, d, t.matrices(), input.matrices()))
        .collect::<Result<_>>()?;
    let names = ["direct_transport", "isometry", "features", "features_centred"];
    let mut merged: [Worst; 4] = Default::default();
    for row in per_domain {
        for (m, w) in merged.iter_mut().zip(row) {
            *m = std::mem::take(m).merge(w);
        }
    }
    for (name, w) in names.iter().zip(merged) {
        let t = if *name == "features_centred" { STATIONARITY_TOLERANCE } else { tol };
        checks.push(w.into_check(name, t));
    }

    let unconverged: Vec<&str> = a.unconverged.iter().map(|u| u.stage.as_str()).collect();
    let mut w = Worst::default();
    for (d, input) in a.domains.iter().zip(inputs) {
        if !unconverged.contains(&d.domain_id.as_str()) {
            w.record(whitened_mean_norm(&d.centroid, input.matrices())?, || d.domain_id.clone());
        }
    }
    let mut c = w.into_check("centroid_is_mean", STATIONARITY_TOLERANCE);
    if !unconverged.is_empty() {
        c.detail = format!("{} (skipped unconverged: {})", c.detail, unconverged.join(", "));
    }
    checks.push(c);

    let mut w = Worst::default();
    match a.hub_choice {
        HubChoice::Identity => {
            let id = SpdMatrix::identity(a.dim());
            w.record(relative_error(a.hub.as_sym(), id.as_sym()), || "hub".into());
        }
        HubChoice::MeanOfMeans if !unconverged.contains(&"hub") => {
            let cs: Vec<SpdMatrix> = a.domains.iter().map(|d| d.centroid.clone()).collect();
            w.record(whitened_mean_norm(&a.hub, &cs)?, || "hub".into());
        }
        HubChoice::MeanOfMeans => {}
    }
    checks.push(w.into_check("hub", STATIONARITY_TOLERANCE));

    if let Some(b) = compare {
        checks.push(coincidence(a, b)?);
    }
    Ok(VerifyReport { checks })
}

fn check_shapes(a: &Artifacts, inputs: &[LabeledCovarianceSet]) -> Result<()> {
    if a.domains.len() != inputs.len() || a.transported.len() != inputs.len() {
        return Err(Error::invalid(format!(
            "artifacts cover {} domains, dataset has {}",
            a.domains.len(),
            inputs.len()
        )));
    }
    for ((d, t), input) in a.domains.iter().zip(&a.transported).zip(inputs) {
        if d.domain_id != input.domain_id() || t.domain_id() != input.domain_id() {
            return Err(Error::invalid(format!(
                "artifact domain `{}` does not match dataset domain `{}`",
                d.domain_id,
                input.domain_id()
            )));
        }
        if d.features.len() != input.len() || t.len() != input.len() {
            return Err(Error::invalid(format!(
                "domain `{}`: artifacts hold {} features and {} matrices for {} inputs",
                d.domain_id,
                d.features.len(),
                t.len(),
                input.len()
            )));
        }
        if let Some(n) = input.dim() {
            if n != a.dim() {
                return Err(Error::DimensionMismatch { expected: a.dim(), found: n });
            }
        }
    }
    Ok(())
}

fn domain_checks(
    a: &Artifacts,
    d: &super::artifacts::ArtifactDomain,
    transported: &[SpdMatrix],
    inputs: &[SpdMatrix],
) -> Result<[Worst; 4]> {
    let c = &d.centroid;
    let at = |i: usize| move || format!("{} item {i}", d.domain_id);
    let items: Vec<[f64; 3]> = (0..inputs.len())
        .into_par_iter()
        .map(|i| {
            let (p, t) = (&inputs[i], &transported[i]);
            let direct = relative_error(t.as_sym(), adapt_map_three_step(c, &a.hub, p)?.as_sym());
            let d_in = distance(c, p)?;
            let mut iso = (distance(&a.hub, t)? - d_in).abs() / d_in.max(1.0);
            if i + 1 < inputs.len() {
                let q = &inputs[i + 1];
                let d_pq = distance(p, q)?;
                iso = iso.max((distance(t, &transported[i + 1])? - d_pq).abs() / d_pq.max(1.0));
                let (lp, lq) = (log_map(c, p)?, log_map(c, q)?);
                let g = inner_product(&lp, &lq)?;
                let f = d.features[i].values().iter().zip(d.features[i + 1].values()).map(|(x, y)| x * y).sum::<f64>();
                iso = iso.max((f - g).abs() / (lp.norm() * lq.norm()).max(1.0));
            }
            let expected = half_vectorize(&whitened_tangent(&a.hub, t)?);
            let diff = expected
                .values()
                .iter()
                .zip(d.features[i].values())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok([direct, iso, diff / expected.norm().max(1.0)])
        })
        .collect::<Result<_>>()?;
    let mut out: [Worst; 4] = Default::default();
    for (i, e) in items.iter().enumerate() {
        for k in 0..3 {
            out[k].record(e[k], at(i));
        }
    }
    let len = d.features.first().map_or(0, |f| f.len());
    let mut mean = vec![0.0; len];
    for f in &d.features {
        for (m, x) in mean.iter_mut().zip(f.values()) {
            *m += x;
        }
    }
    let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt() / d.features.len().max(1) as f64;
    out[3].record(norm, || d.domain_id.clone());
    Ok(out)
}

/// Two runs on the same data agree on the congruence `E_l⁻¹ E_k` between
/// every pair of domains, whatever their hubs.
fn coincidence(a: &Artifacts, b: &Artifacts) -> Result<Check> {
    if a.domains.len() != b.domains.len()
        || a.domains.iter().zip(&b.domains).any(|(x, y)| x.domain_id != y.domain_id)
    {
        return Err(Error::invalid("compared artifacts cover different domains"));
    }
    let mut w = Worst::default();
    for k in 0..a.domains.len() {
        for l in 0..a.domains.len() {
            if k != l {
                let err = rel(&a.cross_domain_map(k, l)?, &b.cross_domain_map(k, l)?);
                w.record(err, || format!("{} -> {}", a.domains[k].domain_id, a.domains[l].domain_id));
            }
        }
    }
    Ok(w.into_check("coincidence", VERIFY_TOLERANCE))
}
