//! Seeded random matrices. All sampling goes through [`Rng`], a ChaCha8
//! stream, so a seed reproduces the same values on every platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::spd::{SpdMatrix, SymMatrix};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for a sub-stream identified by `(seed, parts...)`, so items can be
/// generated independently (and in parallel) without changing the output.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    let mut x = seed;
    for &p in parts {
        x ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

pub fn standard_normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| standard_normal(rng))
}

/// Symmetric matrix with i.i.d. N(0,1) upper triangle.
pub fn symmetric(rng: &mut Rng, n: usize) -> SymMatrix {
    let g = gaussian_matrix(rng, n, n);
    SymMatrix::from_upper(g).expect("finite square")
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal folded into `Q`).
pub fn orthogonal(rng: &mut Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix `Q diag(λ) Qᵀ` with log-uniform eigenvalues spanning exactly
/// the requested condition number, scaled so the geometric mean of the
/// spectrum is `scale`.
pub fn spd_with_condition(rng: &mut Rng, n: usize, condition: f64, scale: f64) -> SpdMatrix {
    assert!(condition >= 1.0 && scale > 0.0);
    let log_c = condition.ln();
    let mut logs: Vec<f64> = (0..n).map(|_| uniform(rng, 0.0, 1.0) * log_c).collect();
    if n >= 2 {
        logs[0] = 0.0;
        logs[1] = log_c;
    }
    let centre = logs.iter().sum::<f64>() / n as f64;
    let eig = DVector::from_iterator(n, logs.iter().map(|l| scale * (l - centre).exp()));
    let q = orthogonal(rng, n);
    SpdMatrix::from_matrix(&(&q * DMatrix::from_diagonal(&eig) * q.transpose()))
        .expect("well-conditioned by construction")
}

/// SPD matrix with condition number drawn log-uniformly from `[1, max_condition]`.
pub fn spd(rng: &mut Rng, n: usize, max_condition: f64) -> SpdMatrix {
    let c = uniform(rng, 0.0, 1.0) * max_condition.ln();
    let scale = uniform(rng, -1.0, 1.0).exp();
    spd_with_condition(rng, n, c.exp(), scale)
}

/// Invertible matrix `Q₁ diag(σ) Q₂` with singular values log-uniform in
/// `[1/sqrt(c), sqrt(c)]`.
pub fn invertible(rng: &mut Rng, n: usize, max_condition: f64) -> DMatrix<f64> {
    let half = 0.5 * max_condition.ln();
    let sigma = DVector::from_fn(n, |_, _| uniform(rng, -half, half).exp());
    let q1 = orthogonal(rng, n);
    let q2 = orthogonal(rng, n);
    q1 * DMatrix::from_diagonal(&sigma) * q2
}
