//! Riemannian (Fréchet/Karcher) mean by fixed-point iteration in the
//! tangent space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{check_same_dim, color_sym, whitened_log_spectrum, EigenDecomposition, SpdMatrix, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanConfig {
    /// Stop once the Frobenius norm of the mean tangent vector is at most this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Scale the step to the curvature of the cost and halve it whenever it
    /// would increase the cost. Off: the plain fixed-point step.
    pub adaptive_step: bool,
}

impl Default for MeanConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            max_iterations: 100,
            adaptive_step: true,
        }
    }
}

impl MeanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mean epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "mean max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MeanResult {
    pub mean: SpdMatrix,
    pub iterations: usize,
    /// `‖S̄‖_F` of the last update step.
    pub final_gradient_norm: f64,
}

/// Riemannian mean of `set`.
///
/// Starts from the arithmetic mean and repeats
/// `P̄ ← Exp_P̄(τ (1/N) Σ Log_P̄(Pᵢ))` until `‖(1/N) Σ Log_P̄(Pᵢ)‖_F ≤ ε`,
/// with `τ = 1`. With `adaptive_step`, `τ` is the Newton step along the mean
/// log: the inverse curvature of the mean squared distance in that
/// direction. It is 1 for commuting and concentrated sets and shrinks as
/// the set spreads out, where the full step overshoots. A step that would
/// still increase the mean squared distance is retried with `τ` halved. When the iteration cap is hit first, the last
/// iterate is returned inside [`Error::DidNotConverge`].
pub fn riemannian_mean(set: &[SpdMatrix], cfg: &MeanConfig) -> Result<MeanResult> {
    cfg.validate()?;
    let first = set
        .first()
        .ok_or_else(|| Error::EmptyInput("Riemannian mean of an empty set".into()))?;
    let n = first.dim();
    for p in set {
        check_same_dim(n, p.dim())?;
    }
    let count = set.len() as f64;

    let mut sum = first.as_matrix().clone();
    for p in &set[1..] {
        sum += p.as_matrix();
    }
    let mut mean = SpdMatrix::from_matrix(&(sum / count))?;

    // whitened mean log, mean squared distance and the curvature of the cost
    // along the mean log; summed in input order so the result is independent
    // of thread count
    let gradient = |at: &SpdMatrix| -> Result<(SymMatrix, f64, f64)> {
        let logs: Vec<EigenDecomposition> = set
            .par_iter()
            .map(|p| whitened_log_spectrum(at, p))
            .collect::<Result<_>>()?;
        let mut acc = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut cost = 0.0;
        for l in &logs {
            acc += l.map(|v| v).as_matrix();
            cost += l.eigenvalues.norm_squared();
        }
        let g = SymMatrix::symmetrize(&(acc / count))?;
        let curvature = if cfg.adaptive_step {
            let q: Vec<f64> = logs.par_iter().map(|l| directional_curvature(l, &g)).collect();
            q.iter().sum::<f64>() / count
        } else {
            1.0
        };
        Ok((g, cost / count, curvature))
    };

    let (mut step, mut cost, mut curvature) = gradient(&mean)?;
    let mut iterations = 1;
    let mut tau = initial_step(cfg, curvature);
    loop {
        let gradient_norm = color_sym(&mean, &step).frobenius_norm();
        if gradient_norm <= cfg.epsilon || iterations >= cfg.max_iterations {
            let result = MeanResult {
                mean,
                iterations,
                final_gradient_norm: gradient_norm,
            };
            if gradient_norm <= cfg.epsilon {
                return Ok(result);
            }
            return Err(Error::DidNotConverge { last: Box::new(result) });
        }
        let candidate = SpdMatrix::new(color_sym(&mean, &step.scale(tau).map_eigenvalues(f64::exp)?))?;
        let (next_step, next_cost, next_curvature) = gradient(&candidate)?;
        iterations += 1;
        // rounding noise in the cost must not stall the final iterations
        if cfg.adaptive_step && next_cost > cost * (1.0 + COST_SLACK) && tau > MIN_STEP {
            tau *= 0.5;
            continue;
        }
        mean = candidate;
        step = next_step;
        cost = next_cost;
        curvature = next_curvature;
        tau = initial_step(cfg, curvature);
    }
}

/// `ξᵀ H ξ / ‖ξ‖²` for the Hessian `H` of `½ d²(·, P)` in whitened
/// coordinates, where `log` is the whitened log of `P`. In its eigenbasis `H`
/// is diagonal with entries `(δ/2) coth(δ/2)` for the log-eigenvalue gaps
/// `δ`, so it is 1 along directions that commute with the log.
fn directional_curvature(log: &EigenDecomposition, xi: &SymMatrix) -> f64 {
    let v = &log.eigenvectors;
    let x = v.transpose() * xi.as_matrix() * v;
    let norm = x.norm_squared();
    if norm == 0.0 {
        return 1.0;
    }
    let l = &log.eigenvalues;
    let mut q = 0.0;
    for j in 0..l.len() {
        for k in 0..l.len() {
            q += x[(j, k)] * x[(j, k)] * gap_weight(l[j] - l[k]);
        }
    }
    q / norm
}

fn gap_weight(delta: f64) -> f64 {
    let h = 0.5 * delta.abs();
    if h < 1e-4 {
        1.0 + h * h / 3.0
    } else {
        h / h.tanh()
    }
}

/// Newton step `1 / c` along the mean log for curvature `c ≥ 1`; the full
/// step when adaptation is off.
fn initial_step(cfg: &MeanConfig, curvature: f64) -> f64 {
    if cfg.adaptive_step {
        1.0 / curvature.max(1.0)
    } else {
        1.0
    }
}

const COST_SLACK: f64 = 1e-12;

/// Smallest step factor tried before a step is taken regardless.
const MIN_STEP: f64 = 1.0 / 1024.0;

/// Like [`riemannian_mean`] but hands back the last iterate on
/// non-convergence, together with a flag.
pub fn riemannian_mean_lenient(set: &[SpdMatrix], cfg: &MeanConfig) -> Result<(MeanResult, bool)> {
    match riemannian_mean(set, cfg) {
        Ok(r) => Ok((r, true)),
        Err(Error::DidNotConverge { last }) => Ok((*last, false)),
        Err(e) => Err(e),
    }
}

/// Riemannian mean of per-domain centroids (each centroid weighs the same).
pub fn mean_of_means(centroids: &[SpdMatrix], cfg: &MeanConfig) -> Result<SpdMatrix> {
    riemannian_mean(centroids, cfg).map(|r| r.mean)
}

/// `‖Σᵢ Log_P̄(Pᵢ)‖_F`, the stationarity residual of a candidate mean.
pub fn stationarity_residual(mean: &SpdMatrix, set: &[SpdMatrix]) -> Result<f64> {
    let n = mean.dim();
    let mut acc = nalgebra::DMatrix::<f64>::zeros(n, n);
    for p in set {
        acc += crate::spd::log_map(mean, p)?.value().as_matrix();
    }
    Ok(acc.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::spd::{geodesic, spd_exp, SpdMatrix};

    fn rel(a: &SpdMatrix, b: &SpdMatrix) -> f64 {
        (a.as_matrix() - b.as_matrix()).norm() / b.frobenius_norm()
    }

    #[test]
    fn constant_set_converges_in_one_iteration() {
        let p = random::spd(&mut random::rng(3), 3, 50.0);
        let r = riemannian_mean(&[p.clone(), p.clone(), p.clone()], &MeanConfig::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.final_gradient_norm < 1e-12);
        assert!(rel(&r.mean, &p) < 1e-12);
    }

    #[test]
    fn two_points_give_the_geodesic_midpoint() {
        let mut rng = random::rng(11);
        for _ in 0..20 {
            let a = random::spd(&mut rng, 4, 1e3);
            let b = random::spd(&mut rng, 4, 1e3);
            let r = riemannian_mean(&[a.clone(), b.clone()], &MeanConfig::default()).unwrap();
            let mid = geodesic(&a, &b, 0.5).unwrap();
            assert!(rel(&r.mean, &mid) < 1e-8);
        }
    }

    #[test]
    fn commuting_set_gives_geometric_mean() {
        // 1 · 4 · 16 = 4³
        let set: Vec<_> = [1.0, 4.0, 16.0]
            .iter()
            .map(|&d| SpdMatrix::from_diagonal(&[d, 1.0]).unwrap())
            .collect();
        let r = riemannian_mean(&set, &MeanConfig::default()).unwrap();
        assert!(rel(&r.mean, &SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap()) < 1e-12);
        assert!(r.final_gradient_norm <= 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            riemannian_mean(&[], &MeanConfig::default()),
            Err(Error::EmptyInput(_))
        ));
        let set = [SpdMatrix::identity(2), SpdMatrix::identity(3)];
        assert!(matches!(
            riemannian_mean(&set, &MeanConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = MeanConfig { epsilon: 0.0, max_iterations: 10, ..MeanConfig::default() };
        assert!(riemannian_mean(&set[..1], &bad).is_err());
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let mut rng = random::rng(4);
        let set: Vec<_> = (0..5).map(|_| random::spd(&mut rng, 3, 1e3)).collect();
        let cfg = MeanConfig { epsilon: 1e-300, max_iterations: 2, ..MeanConfig::default() };
        match riemannian_mean(&set, &cfg) {
            Err(Error::DidNotConverge { last }) => {
                assert_eq!(last.iterations, 2);
                assert!(last.final_gradient_norm > 0.0);
            }
            other => panic!("expected DidNotConverge, got {other:?}"),
        }
        let (r, converged) = riemannian_mean_lenient(&set, &cfg).unwrap();
        assert!(!converged && r.iterations == 2);
    }

    fn dispersed(seed: u64, n: usize, k: usize, radius: f64) -> Vec<SpdMatrix> {
        let mut rng = random::rng(seed);
        (0..k)
            .map(|_| {
                let s = random::symmetric(&mut rng, n);
                spd_exp(&s.scale(radius / s.frobenius_norm())).unwrap()
            })
            .collect()
    }

    #[test]
    fn adaptive_step_converges_on_dispersed_sets() {
        let set = dispersed(2, 6, 5, 6.0);
        let plain = MeanConfig { adaptive_step: false, ..MeanConfig::default() };
        assert!(matches!(riemannian_mean(&set, &plain), Err(Error::DidNotConverge { .. })));
        let r = riemannian_mean(&set, &MeanConfig::default()).unwrap();
        assert!(r.final_gradient_norm <= 1e-9);
        assert!(stationarity_residual(&r.mean, &set).unwrap() < 1e-8);
    }

    #[test]
    fn adaptive_step_agrees_with_fixed_step_when_that_converges() {
        let set = dispersed(5, 4, 6, 1.0);
        let plain = MeanConfig { adaptive_step: false, ..MeanConfig::default() };
        let a = riemannian_mean(&set, &plain).unwrap();
        let b = riemannian_mean(&set, &MeanConfig::default()).unwrap();
        assert!(rel(&a.mean, &b.mean) < 1e-9);
    }

    #[test]
    fn curvature_is_one_along_commuting_directions() {
        assert_eq!(gap_weight(0.0), 1.0);
        assert!((gap_weight(-1e-5) - 1.0).abs() < 1e-10);
        assert!((gap_weight(2.0) - 1.0 / 1f64.tanh()).abs() < 1e-15);
        let log = crate::spd::sym_eig(&SymMatrix::from_diagonal(&[3.0, -1.0]).unwrap()).unwrap();
        let along = SymMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        assert!((directional_curvature(&log, &along) - 1.0).abs() < 1e-15);
        let across = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((directional_curvature(&log, &across) - gap_weight(4.0)).abs() < 1e-12);
        let cfg = MeanConfig::default();
        assert_eq!(initial_step(&cfg, 1.0), 1.0);
        assert_eq!(initial_step(&cfg, 4.0), 0.25);
        assert_eq!(initial_step(&MeanConfig { adaptive_step: false, ..cfg }, 4.0), 1.0);
    }

    #[test]
    fn mean_of_means_examples() {
        let mut rng = random::rng(8);
        let a = random::spd(&mut rng, 3, 10.0);
        let b = random::spd(&mut rng, 3, 10.0);
        let one = mean_of_means(std::slice::from_ref(&a), &MeanConfig::default()).unwrap();
        assert!(rel(&one, &a) < 1e-14);
        let two = mean_of_means(&[a.clone(), b.clone()], &MeanConfig::default()).unwrap();
        assert!(rel(&two, &geodesic(&a, &b, 0.5).unwrap()) < 1e-8);

        let diags = [[2.0, 1.0, 5.0], [8.0, 3.0, 0.5], [1.0, 9.0, 2.0], [0.25, 1.0, 4.0]];
        let cents: Vec<_> = diags.iter().map(|d| SpdMatrix::from_diagonal(d).unwrap()).collect();
        let m = mean_of_means(&cents, &MeanConfig::default()).unwrap();
        for k in 0..3 {
            let g = diags.iter().map(|d| d[k]).product::<f64>().powf(0.25);
            assert!((m.as_matrix()[(k, k)] - g).abs() < 1e-8 * g);
        }
    }
}
