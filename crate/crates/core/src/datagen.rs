//! Synthetic covariance data: the two-batch oscillator toy problem and a
//! multi-domain, multi-class generator built from per-domain congruences.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{LabeledCovarianceSet, Labels};
use crate::error::{Error, Result};
use crate::random::{self, derive_seed, Rng};
use crate::spd::{congruence, SpdMatrix, SymMatrix};
use crate::transport::transport_matrix;

/// Phases closer than this to a zero of `cos φ` (where the source
/// covariance becomes singular) are redrawn.
pub const PHASE_EXCLUSION: f64 = 1e-3;

/// A `channels × samples` real signal.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries(DMatrix<f64>);

impl TimeSeries {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::EmptyInput("time series with no samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sample in time series"));
        }
        Ok(Self(values))
    }

    pub fn channels(&self) -> usize {
        self.0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `(1/T) Σₙ (x[n] − μ)(x[n] − μ)ᵀ`, with `μ = 0` when `center` is false.
pub fn sample_covariance(x: &TimeSeries, center: bool) -> Result<SpdMatrix> {
    let t = x.samples() as f64;
    let mut centred = x.0.clone();
    if center {
        for mut row in centred.row_iter_mut() {
            let mu = row.sum() / t;
            row.add_scalar_mut(-mu);
        }
    }
    let cov = &centred * centred.transpose() / t;
    SpdMatrix::new(SymMatrix::symmetrize(&cov)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub n_series: usize,
    pub f0: f64,
    /// Samples per series.
    pub samples: usize,
    pub phase_range: (f64, f64),
    /// Mixing matrix of the first batch, row-major. Drawn from the seed when absent.
    pub mixing: Option<[f64; 4]>,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_series: 100,
            f0: 10.0,
            samples: 500,
            phase_range: (-FRAC_PI_2, 0.0),
            mixing: None,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_series == 0 {
            return bad("n_series must be at least 1".into());
        }
        if self.samples < 2 {
            return bad(format!("need at least 2 samples, got {}", self.samples));
        }
        if !(self.f0 > 0.0 && self.f0 < self.samples as f64 / 2.0) {
            return bad(format!("f0 = {} must lie in (0, T/2)", self.f0));
        }
        let (lo, hi) = self.phase_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("empty phase range [{lo}, {hi}]"));
        }
        if let Some(m) = self.mixing {
            if m.iter().any(|v| !v.is_finite()) || det2(&m).abs() <= 1e-12 {
                return bad("mixing matrix must be finite and invertible".into());
            }
        }
        Ok(())
    }
}

fn det2(m: &[f64; 4]) -> f64 {
    m[0] * m[3] - m[1] * m[2]
}

/// Entries uniform in [−1, 1], redrawn until `|det| > 0.1`.
pub fn random_mixing(rng: &mut Rng) -> [f64; 4] {
    loop {
        let m = [(); 4].map(|_| random::uniform(rng, -1.0, 1.0));
        if det2(&m).abs() > 0.1 {
            return m;
        }
    }
}

fn near_singular_phase(phi: f64) -> bool {
    // distance to the nearest π/2 + kπ
    let r = (phi - FRAC_PI_2).rem_euclid(PI);
    r.min(PI - r) < PHASE_EXCLUSION
}

/// Two-channel source `s[n] = (sin(2π f₀ n/T), cos(2π f₀ n/T + φ))`.
pub fn toy_source(phase: f64, f0: f64, samples: usize) -> TimeSeries {
    let t = samples as f64;
    let values = DMatrix::from_fn(2, samples, |c, n| {
        let w = 2.0 * PI * f0 * n as f64 / t;
        if c == 0 {
            w.sin()
        } else {
            (w + phase).cos()
        }
    });
    TimeSeries(values)
}

/// Phases and the two mixing matrices of a toy draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDraw {
    pub phases: Vec<f64>,
    pub mixing: [DMatrix<f64>; 2],
}

pub fn draw_toy(cfg: &ToyConfig) -> Result<ToyDraw> {
    cfg.validate()?;
    let mut rng = random::rng(cfg.seed);
    let m1 = match cfg.mixing {
        Some(m) => m,
        None => random_mixing(&mut rng),
    };
    let (lo, hi) = cfg.phase_range;
    let mut phases = Vec::with_capacity(cfg.n_series);
    while phases.len() < cfg.n_series {
        let phi = random::uniform(&mut rng, lo, hi);
        if !near_singular_phase(phi) {
            phases.push(phi);
        }
    }
    let m1 = DMatrix::from_row_slice(2, 2, &m1);
    let m2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.5, 1.5])) * &m1;
    Ok(ToyDraw {
        phases,
        mixing: [m1, m2],
    })
}

/// The toy problem: one set of phase-shifted oscillators observed through
/// two mixing matrices, `M₂ = 1.5 diag(−1, 1) M₁`. Both batches carry the
/// same phase labels in the same order. Covariances are uncentred.
pub fn generate_toy(cfg: &ToyConfig) -> Result<[LabeledCovarianceSet; 2]> {
    let draw = draw_toy(cfg)?;
    let batch = |k: usize| -> Result<LabeledCovarianceSet> {
        let m = &draw.mixing[k];
        let matrices = draw
            .phases
            .par_iter()
            .map(|&phi| {
                let s = toy_source(phi, cfg.f0, cfg.samples);
                sample_covariance(&TimeSeries(m * s.values()), false)
            })
            .collect::<Result<_>>()?;
        let mut set = LabeledCovarianceSet::new(
            format!("batch-{}", k + 1),
            matrices,
            Some(Labels::Real(draw.phases.clone())),
        )?;
        set.metadata.insert("generator".into(), "toy".into());
        set.metadata.insert("seed".into(), cfg.seed.to_string());
        Ok(set)
    };
    Ok([batch(0)?, batch(1)?])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiDomainConfig {
    pub n_domains: usize,
    pub n_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Riemannian distance of each class prototype from the common base point.
    pub class_spread: f64,
    /// Riemannian distance of each item from its class prototype.
    pub noise_level: f64,
    /// RMS Riemannian distance of the domain centres from the base point.
    pub domain_shift: f64,
    /// Condition number of the common base point.
    pub base_condition: f64,
    /// Explicit per-domain congruences. When absent each domain is the base
    /// population moved along a geodesic from the base point.
    #[serde(skip)]
    pub congruences: Option<Vec<DMatrix<f64>>>,
    pub seed: u64,
}

impl Default for MultiDomainConfig {
    fn default() -> Self {
        Self {
            n_domains: 5,
            n_classes: 4,
            dim: 22,
            per_class: 72,
            class_spread: 0.25,
            noise_level: 1.2,
            domain_shift: 6.0,
            base_condition: 1e4,
            congruences: None,
            seed: 0,
        }
    }
}

impl MultiDomainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n_domains == 0 || self.n_classes == 0 || self.per_class == 0 {
            return bad("domains, classes and items per class must be at least 1");
        }
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        for (name, v) in [
            ("class_spread", self.class_spread),
            ("noise_level", self.noise_level),
            ("domain_shift", self.domain_shift),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.base_condition.is_finite() && self.base_condition >= 1.0) {
            return bad("base_condition must be at least 1");
        }
        if let Some(es) = &self.congruences {
            if es.len() != self.n_domains {
                return Err(Error::InvalidParameter(format!(
                    "{} congruences for {} domains",
                    es.len(),
                    self.n_domains
                )));
            }
        }
        Ok(())
    }
}

/// Everything behind a multi-domain draw.
#[derive(Clone, Debug)]
pub struct MultiDomainData {
    pub domains: Vec<LabeledCovarianceSet>,
    pub congruences: Vec<DMatrix<f64>>,
    /// Items before the domain congruence, per domain.
    pub base_items: Vec<Vec<SpdMatrix>>,
    pub base_point: SpdMatrix,
    pub prototypes: Vec<SpdMatrix>,
}

/// Symmetric direction with unit Frobenius norm.
fn unit_direction(rng: &mut Rng, n: usize) -> SymMatrix {
    let s = random::symmetric(rng, n);
    let norm = s.frobenius_norm();
    s.scale(1.0 / norm)
}

/// `P^{1/2} exp(W) P^{1/2}`.
fn exp_whitened(p: &SpdMatrix, w: &SymMatrix) -> Result<SpdMatrix> {
    crate::spd::from_whitened_tangent(p, w)
}

fn check_invertible(e: &DMatrix<f64>, n: usize, k: usize) -> Result<()> {
    if e.nrows() != n || e.ncols() != n {
        return Err(Error::invalid(format!("congruence {k} is not {n}×{n}")));
    }
    let sv = e.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 1e-12 * hi) || !hi.is_finite() {
        return Err(Error::invalid(format!("congruence {k} is singular")));
    }
    Ok(())
}

pub fn generate_multidomain(cfg: &MultiDomainConfig) -> Result<Vec<LabeledCovarianceSet>> {
    generate_multidomain_data(cfg).map(|d| d.domains)
}

/// Multi-class SPD data observed in several domains.
///
/// A base point `X̄` with condition number `base_condition` anchors the
/// construction. Class prototypes sit at distance `class_spread` from `X̄` in
/// random directions; items sit at distance `noise_level` from their
/// prototype. Domain `k` applies a congruence `E_k` to all of its items.
/// By default `E_k` is the parallel transport from `X̄` to a domain centre
/// at RMS distance `domain_shift`, with the centre offsets summing to zero.
/// Items are listed with classes interleaved (`label = i mod C`).
pub fn generate_multidomain_data(cfg: &MultiDomainConfig) -> Result<MultiDomainData> {
    cfg.validate()?;
    let n = cfg.dim;
    let mut rng = random::rng(derive_seed(cfg.seed, &[0]));
    let base_point = random::spd_with_condition(&mut rng, n, cfg.base_condition, 1.0);

    let prototypes: Vec<SpdMatrix> = (0..cfg.n_classes)
        .map(|_| exp_whitened(&base_point, &unit_direction(&mut rng, n).scale(cfg.class_spread)))
        .collect::<Result<_>>()?;

    let congruences = match &cfg.congruences {
        Some(es) => {
            for (k, e) in es.iter().enumerate() {
                check_invertible(e, n, k)?;
            }
            es.clone()
        }
        None => default_congruences(&mut rng, &base_point, cfg)?,
    };

    let total = cfg.n_classes * cfg.per_class;
    let mut domains = Vec::with_capacity(cfg.n_domains);
    let mut base_items = Vec::with_capacity(cfg.n_domains);
    for (k, e) in congruences.iter().enumerate() {
        let base: Vec<SpdMatrix> = (0..total)
            .into_par_iter()
            .map(|i| {
                let mut r = random::rng(derive_seed(cfg.seed, &[1, k as u64, i as u64]));
                let step = unit_direction(&mut r, n).scale(cfg.noise_level);
                exp_whitened(&prototypes[i % cfg.n_classes], &step)
            })
            .collect::<Result<_>>()?;
        let items = base
            .par_iter()
            .map(|p| SpdMatrix::new(congruence(e, p.as_sym())?))
            .collect::<Result<_>>()?;
        let labels = (0..total).map(|i| i % cfg.n_classes).collect();
        let mut set = LabeledCovarianceSet::new(format!("domain-{k}"), items, Some(Labels::Class(labels)))?;
        set.metadata.insert("generator".into(), "multidomain".into());
        set.metadata.insert("seed".into(), cfg.seed.to_string());
        domains.push(set);
        base_items.push(base);
    }
    Ok(MultiDomainData {
        domains,
        congruences,
        base_items,
        base_point,
        prototypes,
    })
}

fn default_congruences(
    rng: &mut Rng,
    base_point: &SpdMatrix,
    cfg: &MultiDomainConfig,
) -> Result<Vec<DMatrix<f64>>> {
    let n = cfg.dim;
    let k = cfg.n_domains;
    let raw: Vec<SymMatrix> = (0..k).map(|_| random::symmetric(rng, n)).collect();
    let mut mean = DMatrix::zeros(n, n);
    for d in &raw {
        mean += d.as_matrix();
    }
    mean /= k as f64;
    let centred: Vec<DMatrix<f64>> = raw.iter().map(|d| d.as_matrix() - &mean).collect();
    let rms = (centred.iter().map(|d| d.norm_squared()).sum::<f64>() / k as f64).sqrt();
    centred
        .iter()
        .map(|d| {
            if rms == 0.0 {
                return Ok(DMatrix::identity(n, n));
            }
            let w = SymMatrix::symmetrize(&(d * (cfg.domain_shift / rms)))?;
            let centre = exp_whitened(base_point, &w)?;
            transport_matrix(base_point, &centre)
        })
        .collect()
}

/// Analytic covariance of the toy source: `½ [[1, −sin φ], [−sin φ, 1]]`.
pub fn toy_population_covariance(phase: f64) -> SymMatrix {
    let s = -phase.sin() / 2.0;
    SymMatrix::from_row_slice(2, &[0.5, s, s, 0.5]).expect("finite")
}
