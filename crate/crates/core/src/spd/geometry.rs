//! Affine-invariant geometry of the SPD cone.

use nalgebra::{DMatrix, DVector};

use super::matrix::{check_same_dim, spd_exp, sym_eig, EigenDecomposition, SpdMatrix, SymMatrix};
use crate::error::{Error, Result};

/// A symmetric matrix in the tangent space at `base`.
///
/// Keeps both the ambient value `S` and its whitened coordinates
/// `base^{-1/2} S base^{-1/2}`. Metric computations and transport work on
/// the whitened form, which does not inherit the conditioning of `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: SpdMatrix,
    value: SymMatrix,
    whitened: SymMatrix,
}

impl TangentVector {
    pub fn new(base: SpdMatrix, value: SymMatrix) -> Result<Self> {
        check_same_dim(base.dim(), value.dim())?;
        let whitened = whiten_sym(&base, &value);
        Ok(Self {
            base,
            value,
            whitened,
        })
    }

    /// The tangent vector whose whitened coordinates are `w`.
    pub fn from_whitened(base: SpdMatrix, w: SymMatrix) -> Result<Self> {
        check_same_dim(base.dim(), w.dim())?;
        let value = color_sym(&base, &w);
        Ok(Self {
            base,
            value,
            whitened: w,
        })
    }

    pub fn zero(base: SpdMatrix) -> Self {
        let n = base.dim();
        Self {
            base,
            value: SymMatrix::zeros(n),
            whitened: SymMatrix::zeros(n),
        }
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn value(&self) -> &SymMatrix {
        &self.value
    }

    /// `base^{-1/2} S base^{-1/2}`.
    pub fn whitened(&self) -> &SymMatrix {
        &self.whitened
    }

    pub fn into_value(self) -> SymMatrix {
        self.value
    }

    pub fn dim(&self) -> usize {
        self.value.dim()
    }

    /// Riemannian norm at the base point.
    pub fn norm(&self) -> f64 {
        self.whitened.frobenius_norm()
    }

    pub fn scale(&self, factor: f64) -> TangentVector {
        Self {
            base: self.base.clone(),
            value: self.value.scale(factor),
            whitened: self.whitened.scale(factor),
        }
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        self.check_same_base(other)?;
        Ok(Self {
            base: self.base.clone(),
            value: self.value.add(&other.value)?,
            whitened: self.whitened.add(&other.whitened)?,
        })
    }

    pub fn neg(&self) -> TangentVector {
        self.scale(-1.0)
    }

    pub(crate) fn check_same_base(&self, other: &TangentVector) -> Result<()> {
        if self.base != other.base {
            return Err(Error::BasePointMismatch);
        }
        Ok(())
    }
}

/// `E S Eᵀ` for a square `E`, symmetrized.
pub fn congruence(e: &DMatrix<f64>, s: &SymMatrix) -> Result<SymMatrix> {
    if e.nrows() != e.ncols() {
        return Err(Error::invalid("congruence matrix must be square"));
    }
    check_same_dim(s.dim(), e.nrows())?;
    Ok(SymMatrix::symmetrized_unchecked(
        &(e * s.as_matrix() * e.transpose()),
    ))
}

/// `W X Wᵀ` for a symmetric `W`; the inner step of every whitening.
fn sandwich(w: &SymMatrix, x: &SymMatrix) -> SymMatrix {
    let w = w.as_matrix();
    SymMatrix::symmetrized_unchecked(&(w * x.as_matrix() * w))
}

/// `P^{-1/2} X P^{-1/2}`.
pub(crate) fn whiten_sym(base: &SpdMatrix, x: &SymMatrix) -> SymMatrix {
    sandwich(base.inv_sqrt(), x)
}

/// `P^{1/2} X P^{1/2}`.
pub(crate) fn color_sym(base: &SpdMatrix, x: &SymMatrix) -> SymMatrix {
    sandwich(base.sqrt(), x)
}

/// Affine-invariant inner product `⟨P^{-1/2}S₁P^{-1/2}, P^{-1/2}S₂P^{-1/2}⟩_F`.
pub fn inner_product(s1: &TangentVector, s2: &TangentVector) -> Result<f64> {
    s1.check_same_base(s2)?;
    Ok(s1.whitened.dot(&s2.whitened))
}

/// Point at parameter `t ∈ [0, 1]` on the geodesic from `p1` to `p2`:
/// `P₁^{1/2} (P₁^{-1/2} P₂ P₁^{-1/2})^t P₁^{1/2}`.
pub fn geodesic(p1: &SpdMatrix, p2: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "geodesic parameter must lie in [0, 1], got {t}"
        )));
    }
    geodesic_unbounded(p1, p2, t)
}

/// Geodesic evaluated at any real `t` (the curve extends past both ends).
pub(crate) fn geodesic_unbounded(p1: &SpdMatrix, p2: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    let inner = whitened_log_spectrum(p1, p2)?.map(|l| (t * l).exp());
    SpdMatrix::new(color_sym(p1, &inner))
}

/// Largest spectral spread of `W = base^{-1/2} P base^{-1/2}` for which `W`
/// is formed explicitly.
const SANDWICH_MAX_CONDITION: f64 = 1e4;

/// Eigenvectors of `W = base^{-1/2} P base^{-1/2}` with the logarithms of
/// its eigenvalues, descending.
///
/// A well-conditioned `W` is formed and diagonalized directly. Otherwise the
/// spectrum comes from the SVD `base^{-1/2} P^{1/2} = X Σ Yᵀ`, `W = X Σ² Xᵀ`,
/// which only carries the square root of `κ(W)`.
pub(crate) fn whitened_log_spectrum(base: &SpdMatrix, p: &SpdMatrix) -> Result<EigenDecomposition> {
    check_same_dim(base.dim(), p.dim())?;
    if let Ok(e) = sym_eig(&whiten_sym(base, p.as_sym())) {
        let (hi, lo) = (e.eigenvalues[0], e.eigenvalues[e.eigenvalues.len() - 1]);
        if lo > 0.0 && hi <= SANDWICH_MAX_CONDITION * lo {
            return Ok(EigenDecomposition {
                eigenvalues: e.eigenvalues.map(f64::ln),
                eigenvectors: e.eigenvectors,
            });
        }
    }
    let (x, sigma, _) = half_svd(base, p)?;
    Ok(EigenDecomposition {
        eigenvalues: sigma.map(|s| 2.0 * s.ln()),
        eigenvectors: x,
    })
}

/// SVD of `base^{-1/2} P^{1/2}`, singular values descending.
pub(crate) fn half_svd(
    base: &SpdMatrix,
    p: &SpdMatrix,
) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let m = base.inv_sqrt().as_matrix() * p.sqrt().as_matrix();
    let (x, sigma, y_t) = super::decomp::svd(&m)?;
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid("degenerate whitened spectrum"));
    }
    Ok((x, sigma, y_t))
}

/// Riemannian distance `sqrt(Σ log² λᵢ(P₂^{-1/2} P₁ P₂^{-1/2}))`.
pub fn distance(p1: &SpdMatrix, p2: &SpdMatrix) -> Result<f64> {
    let logs = whitened_log_spectrum(p2, p1)?.eigenvalues;
    Ok(logs.iter().map(|l| l * l).sum::<f64>().sqrt())
}

/// Logarithm map `P^{1/2} log(P^{-1/2} Pᵢ P^{-1/2}) P^{1/2}` at `base`.
pub fn log_map(base: &SpdMatrix, p: &SpdMatrix) -> Result<TangentVector> {
    TangentVector::from_whitened(base.clone(), whitened_tangent(base, p)?)
}

/// Exponential map `P^{1/2} exp(P^{-1/2} S P^{-1/2}) P^{1/2}`.
pub fn exp_map(base: &SpdMatrix, s: &TangentVector) -> Result<SpdMatrix> {
    if *s.base() != *base {
        return Err(Error::BasePointMismatch);
    }
    let inner = s.whitened().map_eigenvalues(f64::exp)?;
    SpdMatrix::new(color_sym(base, &inner))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Start,
    End,
}

/// Velocity of the geodesic from `p1` to `p2` at one of its endpoints:
/// `Log_{P₁}(P₂)` at the start, `−Log_{P₂}(P₁)` at the end.
pub fn geodesic_velocity(p1: &SpdMatrix, p2: &SpdMatrix, endpoint: Endpoint) -> Result<TangentVector> {
    match endpoint {
        Endpoint::Start => log_map(p1, p2),
        Endpoint::End => Ok(log_map(p2, p1)?.neg()),
    }
}

/// `log(base^{-1/2} P base^{-1/2})`: the tangent vector at `base` expressed
/// in whitened coordinates, where Frobenius distances approximate `d_R`.
pub fn whitened_tangent(base: &SpdMatrix, p: &SpdMatrix) -> Result<SymMatrix> {
    Ok(whitened_log_spectrum(base, p)?.map(|l| l))
}

/// Inverse of [`whitened_tangent`]: `base^{1/2} exp(S) base^{1/2}`.
pub fn from_whitened_tangent(base: &SpdMatrix, s: &SymMatrix) -> Result<SpdMatrix> {
    check_same_dim(base.dim(), s.dim())?;
    let inner = spd_exp(s)?;
    SpdMatrix::new(color_sym(base, inner.as_sym()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn diag(d: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(d).unwrap()
    }

    fn rel(a: &SymMatrix, b: &SymMatrix) -> f64 {
        (a.as_matrix() - b.as_matrix()).norm() / b.frobenius_norm().max(1e-300)
    }

    #[test]
    fn inner_product_examples() {
        let i2 = SpdMatrix::identity(2);
        let one = TangentVector::new(i2.clone(), SymMatrix::identity(2)).unwrap();
        assert!((inner_product(&one, &one).unwrap() - 2.0).abs() < 1e-15);

        let a = TangentVector::new(i2.clone(), SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        let b = TangentVector::new(i2, SymMatrix::from_diagonal(&[1.0, -1.0]).unwrap()).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), 0.0);

        // whitening by diag(1/2, 1/2): diag(1/4, 1/4), squared norm 2/16
        let p = diag(&[4.0, 4.0]);
        let s = TangentVector::new(p, SymMatrix::identity(2)).unwrap();
        assert!((inner_product(&s, &s).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn inner_product_rejects_mismatched_bases() {
        let a = TangentVector::zero(SpdMatrix::identity(2));
        let b = TangentVector::zero(diag(&[2.0, 1.0]));
        assert!(matches!(inner_product(&a, &b), Err(Error::BasePointMismatch)));
    }

    #[test]
    fn geodesic_examples() {
        let mid = geodesic(&SpdMatrix::identity(2), &diag(&[4.0, 1.0]), 0.5).unwrap();
        assert!(rel(mid.as_sym(), &SymMatrix::from_diagonal(&[2.0, 1.0]).unwrap()) < 1e-15);

        let p1 = diag(&[3.0, 0.5]);
        let p2 = diag(&[1.0, 8.0]);
        assert!(rel(geodesic(&p1, &p2, 0.0).unwrap().as_sym(), p1.as_sym()) < 1e-15);
        let t = 0.3;
        let g = geodesic(&p1, &p2, t).unwrap();
        assert!((g.as_matrix()[(0, 0)] - 3f64.powf(1.0 - t)).abs() < 1e-14);
        assert!((g.as_matrix()[(1, 1)] - 0.5f64.powf(1.0 - t) * 8f64.powf(t)).abs() < 1e-14);

        assert!(matches!(geodesic(&p1, &p2, 1.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(geodesic(&p1, &p2, -0.1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn distance_examples() {
        let d = distance(&diag(&[E, 1.0]), &SpdMatrix::identity(2)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let p = diag(&[2.0, 5.0]);
        assert!(distance(&p, &p).unwrap() < 1e-15);
        assert!(matches!(
            distance(&p, &SpdMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_exp_examples() {
        let i2 = SpdMatrix::identity(2);
        let s = log_map(&i2, &diag(&[E * E, 1.0])).unwrap();
        assert!(rel(s.value(), &SymMatrix::from_diagonal(&[2.0, 0.0]).unwrap()) < 1e-15);

        let p = diag(&[3.0, 0.25]);
        assert!(log_map(&p, &p).unwrap().value().frobenius_norm() < 1e-15);

        let s = TangentVector::new(i2.clone(), SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap()).unwrap();
        let q = exp_map(&i2, &s).unwrap();
        assert!(rel(q.as_sym(), &SymMatrix::from_diagonal(&[E, 1.0]).unwrap()) < 1e-15);

        let z = TangentVector::zero(p.clone());
        assert!(rel(exp_map(&p, &z).unwrap().as_sym(), p.as_sym()) < 1e-15);
        assert!(matches!(exp_map(&i2, &z), Err(Error::BasePointMismatch)));
    }

    #[test]
    fn velocity_examples() {
        let i2 = SpdMatrix::identity(2);
        let v = geodesic_velocity(&i2, &diag(&[E, 1.0]), Endpoint::Start).unwrap();
        assert!(rel(v.value(), &SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap()) < 1e-15);
        let p = diag(&[2.0, 7.0]);
        for end in [Endpoint::Start, Endpoint::End] {
            assert!(geodesic_velocity(&p, &p, end).unwrap().value().frobenius_norm() < 1e-14);
        }
        let w = geodesic_velocity(&i2, &diag(&[E, 1.0]), Endpoint::End).unwrap();
        assert_eq!(*w.base(), diag(&[E, 1.0]));
        // −Log_{diag(e,1)}(I) = diag(e, 0)
        assert!((w.value().get(0, 0) - E).abs() < 1e-14);
    }

    #[test]
    fn whitened_tangent_examples() {
        let p = diag(&[2.0, 0.3]);
        let at_identity = whitened_tangent(&SpdMatrix::identity(2), &p).unwrap();
        assert!(rel(&at_identity, &p.log()) < 1e-15);
        assert!(whitened_tangent(&p, &p).unwrap().frobenius_norm() < 1e-15);
        let back = from_whitened_tangent(&p, &whitened_tangent(&p, &diag(&[1.0, 1.0])).unwrap()).unwrap();
        assert!(rel(back.as_sym(), &SymMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn tangent_vector_dims_must_match() {
        assert!(TangentVector::new(SpdMatrix::identity(2), SymMatrix::zeros(3)).is_err());
    }
}
