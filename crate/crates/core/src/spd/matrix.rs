use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative floor on the smallest eigenvalue of an SPD matrix:
/// `λ_min > SPD_TOLERANCE · max(1, λ_max)`.
pub const SPD_TOLERANCE: f64 = 1e-10;

/// Tolerance on reconstruction and orthogonality of an eigendecomposition,
/// relative to the Frobenius norm of the input.
pub const EIG_TOLERANCE: f64 = 1e-8;

/// Dense real symmetric matrix. Symmetry is exact: every constructor
/// either mirrors the upper triangle or averages `A` with `Aᵀ`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Takes the upper triangle of `m` as authoritative and mirrors it.
    pub fn from_upper(mut m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        mirror_upper(&mut m);
        Ok(Self(m))
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        check_square_finite(m)?;
        Ok(Self::symmetrized_unchecked(m))
    }

    /// Row-major `n × n` entries; the upper triangle is authoritative.
    pub fn from_row_slice(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                values.len()
            )));
        }
        Self::from_upper(DMatrix::from_row_slice(n, n, values))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_upper(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub(crate) fn symmetrized_unchecked(m: &DMatrix<f64>) -> Self {
        let mut s = (m + m.transpose()) * 0.5;
        mirror_upper(&mut s);
        Self(s)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Frobenius inner product `tr(AᵀB)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        Self(&self.0 * factor)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }

    /// Row-major copy of all `n²` entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Matrix function through the spectral decomposition: `V f(Λ) Vᵀ`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        Ok(sym_eig(self)?.map(f))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.0)
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let n = m.nrows();
        // column-major storage
        return Err(Error::invalid(format!(
            "non-finite entry at ({}, {})",
            pos % n,
            pos / n
        )));
    }
    Ok(())
}

pub(crate) fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Spectral decomposition `A = V Λ Vᵀ` with eigenvalues in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(Λ) Vᵀ`, symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fl = f(lambda);
            scaled.column_mut(j).scale_mut(fl);
        }
        SymMatrix::symmetrized_unchecked(&(scaled * self.eigenvectors.transpose()))
    }

    pub fn reconstruction_error(&self, a: &SymMatrix) -> f64 {
        (self.map(|l| l).as_matrix() - a.as_matrix()).norm()
    }

    pub fn orthogonality_error(&self) -> f64 {
        let n = self.dim();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::identity(n, n)).norm()
    }
}

/// Symmetric eigendecomposition, eigenvalues sorted in descending order.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::invalid("non-finite entries in symmetric matrix"));
    }
    let (eigenvalues, eigenvectors) = super::decomp::symmetric_eigen(a.as_matrix())?;
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

struct SpdInner {
    sym: SymMatrix,
    eig: EigenDecomposition,
    sqrt: OnceLock<SymMatrix>,
    inv_sqrt: OnceLock<SymMatrix>,
}

/// A point on the cone of symmetric positive-definite matrices.
///
/// Validated on construction and immutable afterwards. The spectral
/// decomposition is computed once; square root, inverse square root,
/// logarithm and powers are all derived from it. Cloning is cheap.
#[derive(Clone)]
pub struct SpdMatrix(Arc<SpdInner>);

impl SpdMatrix {
    pub fn new(sym: SymMatrix) -> Result<Self> {
        let eig = sym_eig(&sym)?;
        let lambda_max = eig.eigenvalues[0];
        let lambda_min = eig.eigenvalues[eig.dim() - 1];
        let tolerance = SPD_TOLERANCE * lambda_max.max(1.0);
        if lambda_min <= tolerance {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: lambda_min,
                tolerance,
            });
        }
        Ok(Self(Arc::new(SpdInner {
            sym,
            eig,
            sqrt: OnceLock::new(),
            inv_sqrt: OnceLock::new(),
        })))
    }

    /// Symmetrizes `m` and validates it.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrix::symmetrize(m)?)
    }

    pub fn from_row_slice(n: usize, values: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_row_slice(n, values)?)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(diag)?)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(SymMatrix::identity(n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.0.sym.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0.sym
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.0.sym.as_matrix()
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.0.eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.eig.eigenvalues[self.dim() - 1]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.0.eig.eigenvalues[0]
    }

    pub fn condition_number(&self) -> f64 {
        self.max_eigenvalue() / self.min_eigenvalue()
    }

    pub fn sqrt(&self) -> &SymMatrix {
        self.0.sqrt.get_or_init(|| self.0.eig.map(f64::sqrt))
    }

    pub fn inv_sqrt(&self) -> &SymMatrix {
        self.0
            .inv_sqrt
            .get_or_init(|| self.0.eig.map(|l| 1.0 / l.sqrt()))
    }

    pub fn inverse(&self) -> SymMatrix {
        self.0.eig.map(|l| 1.0 / l)
    }

    pub fn log(&self) -> SymMatrix {
        self.0.eig.map(f64::ln)
    }

    pub fn power(&self, t: f64) -> Result<SpdMatrix> {
        SpdMatrix::new(self.0.eig.map(|l| l.powf(t)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.sym.frobenius_norm()
    }

    pub fn ptr_eq(&self, other: &SpdMatrix) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other) || self.0.sym == other.0.sym
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpdMatrix{}", self.0.sym.as_matrix())
    }
}

impl TryFrom<SymMatrix> for SpdMatrix {
    type Error = Error;

    fn try_from(sym: SymMatrix) -> Result<Self> {
        SpdMatrix::new(sym)
    }
}

pub fn spd_power(p: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    p.power(t)
}

pub fn spd_sqrt(p: &SpdMatrix) -> SymMatrix {
    p.sqrt().clone()
}

pub fn spd_inv_sqrt(p: &SpdMatrix) -> SymMatrix {
    p.inv_sqrt().clone()
}

pub fn spd_log(p: &SpdMatrix) -> SymMatrix {
    p.log()
}

/// Matrix exponential of a symmetric matrix; always SPD in exact arithmetic,
/// rejected only if the spread of `exp(λ)` exceeds the SPD tolerance.
pub fn spd_exp(s: &SymMatrix) -> Result<SpdMatrix> {
    SpdMatrix::new(s.map_eigenvalues(f64::exp)?)
}

/// Adds `epsilon · I` to a symmetric matrix. Never applied implicitly.
pub fn regularize(p: &SymMatrix, epsilon: f64) -> Result<SpdMatrix> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularization must be finite and non-negative, got {epsilon}"
        )));
    }
    let n = p.dim();
    SpdMatrix::new(SymMatrix(p.as_matrix() + DMatrix::identity(n, n) * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn eig_of_diagonal_is_sorted_identity_basis() {
        let a = SymMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[3.0, 1.0]);
        assert!((e.eigenvectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((e.eigenvectors[(0, 1)].abs() - 1.0).abs() < 1e-15);

        let d = SymMatrix::from_diagonal(&[3.0, 1.0]).unwrap();
        let e = sym_eig(&d).unwrap();
        assert!(close(&e.eigenvectors.abs(), &DMatrix::identity(2, 2), 1e-15));
    }

    #[test]
    fn eig_of_identity() {
        let e = sym_eig(&SymMatrix::identity(4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn eig_two_by_two() {
        // (2 - λ)² - 1 = 0  =>  λ ∈ {3, 1}
        let a = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(e.reconstruction_error(&a) <= EIG_TOLERANCE * a.frobenius_norm());
        assert!(e.orthogonality_error() <= EIG_TOLERANCE);
    }

    #[test]
    fn eig_rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(
            SymMatrix::from_upper(m),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn upper_triangle_is_authoritative() {
        let s = SymMatrix::from_row_slice(2, &[1.0, 2.0, 99.0, 3.0]).unwrap();
        assert_eq!(s.get(1, 0), 2.0);
    }

    #[test]
    fn power_examples() {
        let p = SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap();
        let h = p.power(0.5).unwrap();
        assert!(close(h.as_matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])), 1e-14));
        assert!(close(p.power(0.0).unwrap().as_matrix(), &DMatrix::identity(2, 2), 1e-15));

        let q = SpdMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let direct = q.as_matrix() * q.as_matrix();
        assert_eq!(direct, DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 4.0, 5.0]));
        assert!(close(q.power(2.0).unwrap().as_matrix(), &direct, 1e-14));
        assert!(close(q.power(1.0).unwrap().as_matrix(), q.as_matrix(), 1e-14));
    }

    #[test]
    fn log_exp_sqrt_examples() {
        let e2 = std::f64::consts::E.powi(2);
        let p = SpdMatrix::from_diagonal(&[e2, 1.0]).unwrap();
        let l = spd_log(&p);
        assert!((l.get(0, 0) - 2.0).abs() < 1e-14 && l.get(1, 1).abs() < 1e-15);

        let i3 = spd_exp(&SymMatrix::zeros(3)).unwrap();
        assert!(close(i3.as_matrix(), &DMatrix::identity(3, 3), 0.0));

        let p = SpdMatrix::from_row_slice(2, &[5.0, 4.0, 4.0, 5.0]).unwrap();
        let r = spd_sqrt(&p);
        let candidate = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(&candidate * &candidate, *p.as_matrix());
        assert!(close(r.as_matrix(), &candidate, 1e-14));
        assert!(close(&(r.as_matrix() * r.as_matrix()), p.as_matrix(), 1e-14));
        let ri = spd_inv_sqrt(&p);
        assert!(close(&(ri.as_matrix() * r.as_matrix()), &DMatrix::identity(2, 2), 1e-14));
        assert!(spd_log(&SpdMatrix::identity(3)).frobenius_norm() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_definite() {
        let err = SpdMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        let err = SpdMatrix::from_diagonal(&[1.0, 1e-12]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        // relative criterion: a tiny but well-conditioned matrix is fine
        assert!(SpdMatrix::from_diagonal(&[1e-9, 2e-9]).is_ok());
    }

    #[test]
    fn regularize_is_explicit() {
        let singular = SymMatrix::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(SpdMatrix::new(singular.clone()).is_err());
        let p = regularize(&singular, 1e-3).unwrap();
        assert!((p.min_eigenvalue() - 1e-3).abs() < 1e-12);
        assert!(regularize(&singular, -1.0).is_err());
    }
}
