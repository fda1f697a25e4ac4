//! Parallel transport along geodesics of the SPD cone.
//!
//! For `B → A` the transport acts on tangent vectors and on SPD matrices by
//! the same congruence `X ↦ E X Eᵀ` with `E = (A B⁻¹)^{1/2}`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::random;
use crate::spd::{
    check_same_dim, congruence, half_svd, exp_map, log_map, spd_exp, sym_eig, whiten_sym, SpdMatrix,
    SymMatrix, TangentVector,
};

/// Default relative tolerance for [`are_equivalent_pairs`].
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;

/// Parallel transport from `source` (B) to `target` (A). `E` is computed
/// once and reused for every matrix moved between the two points.
#[derive(Clone, Debug)]
pub struct Transporter {
    source: SpdMatrix,
    target: SpdMatrix,
    e: DMatrix<f64>,
    rotation: DMatrix<f64>,
}

impl Transporter {
    pub fn new(source: &SpdMatrix, target: &SpdMatrix) -> Result<Self> {
        check_same_dim(source.dim(), target.dim())?;
        if source == target {
            let id = DMatrix::identity(source.dim(), source.dim());
            return Ok(Self {
                e: id.clone(),
                rotation: id,
                source: source.clone(),
                target: target.clone(),
            });
        }
        let rotation = polar_rotation(source, target)?;
        Ok(Self {
            e: polar_assemble(source, target, &rotation),
            rotation,
            source: source.clone(),
            target: target.clone(),
        })
    }

    pub fn source(&self) -> &SpdMatrix {
        &self.source
    }

    pub fn target(&self) -> &SpdMatrix {
        &self.target
    }

    pub fn e_matrix(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// `E S Eᵀ`, re-based at the target. In whitened coordinates this is
    /// the orthogonal conjugation `Rᵀ W R`.
    pub fn transport_tangent(&self, s: &TangentVector) -> Result<TangentVector> {
        if *s.base() != self.source {
            return Err(Error::BasePointMismatch);
        }
        let w = self.transport_whitened(s.whitened())?;
        TangentVector::from_whitened(self.target.clone(), w)
    }

    /// Transport in whitened coordinates: `W ↦ Rᵀ W R`.
    pub fn transport_whitened(&self, w: &SymMatrix) -> Result<SymMatrix> {
        congruence(&self.rotation.transpose(), w)
    }

    /// `E P Eᵀ`.
    pub fn transport_spd(&self, p: &SpdMatrix) -> Result<SpdMatrix> {
        SpdMatrix::new(congruence(&self.e, p.as_sym())?)
    }

    /// `‖E B Eᵀ − A‖_F / ‖A‖_F`.
    pub fn congruence_error(&self) -> f64 {
        let mapped = &self.e * self.source.as_matrix() * self.e.transpose();
        (mapped - self.target.as_matrix()).norm() / self.target.frobenius_norm()
    }

    /// Relative asymmetry of `A⁻¹E`, which is symmetric in exact arithmetic.
    pub fn symmetry_error(&self) -> f64 {
        let m = self.target.inverse().as_matrix() * &self.e;
        (&m - m.transpose()).norm() / m.norm()
    }
}

/// `E = (A B⁻¹)^{1/2} = A^{1/2} Rᵀ B^{-1/2}`, where `R` is the orthogonal
/// polar factor of `B^{-1/2} A^{1/2}`.
///
/// Equal in exact arithmetic to [`transport_matrix_symmetric_form`], but the
/// SVD only has to resolve `sqrt(κ(A) κ(B))` instead of the `κ(A) κ(B)`
/// spread of `B^{-1/2} A B^{-1/2}`.
pub fn transport_matrix(b: &SpdMatrix, a: &SpdMatrix) -> Result<DMatrix<f64>> {
    let r = polar_rotation(b, a)?;
    Ok(polar_assemble(b, a, &r))
}

/// Orthogonal polar factor `R` of `B^{-1/2} A^{1/2}`.
fn polar_rotation(b: &SpdMatrix, a: &SpdMatrix) -> Result<DMatrix<f64>> {
    check_same_dim(b.dim(), a.dim())?;
    let (x, _, y_t) = half_svd(b, a)?;
    Ok(x * y_t)
}

fn polar_assemble(b: &SpdMatrix, a: &SpdMatrix, r: &DMatrix<f64>) -> DMatrix<f64> {
    a.sqrt().as_matrix() * r.transpose() * b.inv_sqrt().as_matrix()
}

/// `B^{1/2} (B^{-1/2} A B^{-1/2})^{1/2} B^{-1/2}`: the same matrix as
/// [`transport_matrix`] through symmetric square roots only. Kept as an
/// independent route for cross-checks.
pub fn transport_matrix_symmetric_form(b: &SpdMatrix, a: &SpdMatrix) -> Result<DMatrix<f64>> {
    check_same_dim(b.dim(), a.dim())?;
    let inner = sym_eig(&whiten_sym(b, a.as_sym()))?.map(f64::sqrt);
    Ok(b.sqrt().as_matrix() * inner.as_matrix() * b.inv_sqrt().as_matrix())
}

pub fn make_transporter(b: &SpdMatrix, a: &SpdMatrix) -> Result<Transporter> {
    Transporter::new(b, a)
}

pub fn transport_tangent(t: &Transporter, s: &TangentVector) -> Result<TangentVector> {
    t.transport_tangent(s)
}

pub fn transport_spd(t: &Transporter, p: &SpdMatrix) -> Result<SpdMatrix> {
    t.transport_spd(p)
}

/// `Exp_A(Γ_{B→A}(Log_B(P)))`, the tangent-space route to [`transport_spd`].
pub fn adapt_map_three_step(b: &SpdMatrix, a: &SpdMatrix, p: &SpdMatrix) -> Result<SpdMatrix> {
    let t = Transporter::new(b, a)?;
    let s = log_map(b, p)?;
    exp_map(a, &t.transport_tangent(&s)?)
}

fn rel_frobenius(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (x - reference).norm() / reference.norm()
}

/// Looks for an invertible `E` with `A₂ = E A₁ Eᵀ` and `B₂ = E B₁ Eᵀ`.
///
/// Every solution of the second equation is `E = B₂^{1/2} K B₁^{-1/2}` with
/// `K` orthogonal; the first then requires `K W₁ Kᵀ = W₂` for the whitened
/// `Wⱼ = Bⱼ^{-1/2} Aⱼ Bⱼ^{-1/2}`. So the pairs are equivalent iff `W₁` and
/// `W₂` share a spectrum, and `K = V₂ V₁ᵀ` aligns their eigenbases. Returns
/// one witness; witnesses are not unique.
pub fn are_equivalent_pairs(
    a1: &SpdMatrix,
    b1: &SpdMatrix,
    a2: &SpdMatrix,
    b2: &SpdMatrix,
    tol: f64,
) -> Result<Option<DMatrix<f64>>> {
    let n = a1.dim();
    for m in [b1, a2, b2] {
        check_same_dim(n, m.dim())?;
    }
    let w1 = sym_eig(&whiten_sym(b1, a1.as_sym()))?;
    let w2 = sym_eig(&whiten_sym(b2, a2.as_sym()))?;
    let scale = w1.eigenvalues[0].max(w2.eigenvalues[0]);
    let spectra_match = w1
        .eigenvalues
        .iter()
        .zip(w2.eigenvalues.iter())
        .all(|(l1, l2)| (l1 - l2).abs() <= tol * scale);
    if !spectra_match {
        return Ok(None);
    }
    let k = &w2.eigenvectors * w1.eigenvectors.transpose();
    let e = b2.sqrt().as_matrix() * k * b1.inv_sqrt().as_matrix();
    let a_err = rel_frobenius(&(&e * a1.as_matrix() * e.transpose()), a2.as_matrix());
    let b_err = rel_frobenius(&(&e * b1.as_matrix() * e.transpose()), b2.as_matrix());
    Ok((a_err <= tol && b_err <= tol).then_some(e))
}

fn check_invertible(e: &DMatrix<f64>, n: usize) -> Result<()> {
    if e.nrows() != n || e.ncols() != n {
        return Err(Error::invalid(format!(
            "congruence must be {n}x{n}, got {}x{}",
            e.nrows(),
            e.ncols()
        )));
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("congruence has non-finite entries"));
    }
    let sv = e.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::invalid(format!(
            "congruence is not invertible (singular values {min:e} .. {max:e})"
        )));
    }
    Ok(())
}

/// Largest relative discrepancy between `Γ_E ∘ Γ_{B₁→A₁}` and
/// `Γ_{B₂→A₂} ∘ Γ_E` over `samples` random SPD matrices, with
/// `Γ_E(P) = E P Eᵀ`. Near round-off for equivalent pairs witnessed by `E`.
pub fn check_commutation(
    a1: &SpdMatrix,
    b1: &SpdMatrix,
    a2: &SpdMatrix,
    b2: &SpdMatrix,
    e: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = a1.dim();
    for m in [b1, a2, b2] {
        check_same_dim(n, m.dim())?;
    }
    check_invertible(e, n)?;
    let first = Transporter::new(b1, a1)?;
    let second = Transporter::new(b2, a2)?;
    let e1 = first.e_matrix();
    let e2 = second.e_matrix();
    let mut rng = random::rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let p = random::spd(&mut rng, n, 1e3);
        let p = p.as_matrix();
        let lhs = e * e1 * p * e1.transpose() * e.transpose();
        let rhs = e2 * e * p * e.transpose() * e2.transpose();
        worst = worst.max(rel_frobenius(&lhs, &rhs));
    }
    Ok(worst)
}

/// Moves `b` off its congruence class: `B^{1/2} exp(m · X/‖X‖_F) B^{1/2}` for
/// a random symmetric `X`, a relative change of about `m`.
pub fn perturb_non_congruent(b: &SpdMatrix, magnitude: f64, rng: &mut random::Rng) -> Result<SpdMatrix> {
    let x = random::symmetric(rng, b.dim());
    let x = x.scale(magnitude / x.frobenius_norm());
    let inner = spd_exp(&x)?;
    SpdMatrix::new(crate::spd::color_sym(b, inner.as_sym()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicDiagnostic {
    /// `I = φ(t₀)` for some `t₀ ∈ (0, 1)` on the geodesic `φ` from `A` to `B`.
    pub on_geodesic: bool,
    pub t0: Option<f64>,
    /// `‖AB − BA‖_F / (‖A‖_F ‖B‖_F)`.
    pub commutator_norm: f64,
}

/// Tests whether the identity lies strictly inside the geodesic from `a`
/// to `b`. That happens iff `B = A^{1−1/t₀}`, i.e. `log B = c · log A` with
/// `c = 1 − 1/t₀ < 0`; `tol` is relative to the larger of the two logs.
pub fn identity_on_geodesic_diagnostic(a: &SpdMatrix, b: &SpdMatrix, tol: f64) -> GeodesicDiagnostic {
    let am = a.as_matrix();
    let bm = b.as_matrix();
    let commutator_norm = if am.nrows() == bm.nrows() {
        (am * bm - bm * am).norm() / (am.norm() * bm.norm())
    } else {
        f64::INFINITY
    };
    if !commutator_norm.is_finite() {
        return GeodesicDiagnostic { on_geodesic: false, t0: None, commutator_norm };
    }
    let la = a.log();
    let lb = b.log();
    let na = la.frobenius_norm();
    let nb = lb.frobenius_norm();
    let scale = na.max(nb);
    if scale <= tol {
        // A = B = I: the curve is constant at I
        return GeodesicDiagnostic { on_geodesic: true, t0: None, commutator_norm };
    }
    if na <= tol * scale {
        // A = I is an endpoint, not an interior point
        return GeodesicDiagnostic { on_geodesic: false, t0: None, commutator_norm };
    }
    let c = la.dot(&lb) / (na * na);
    let residual = (lb.as_matrix() - la.as_matrix() * c).norm();
    let on = c < 0.0 && residual <= tol * scale;
    GeodesicDiagnostic {
        on_geodesic: on,
        t0: on.then(|| 1.0 / (1.0 - c)),
        commutator_norm,
    }
}

/// Symmetric matrix helper for tests and diagnostics: `‖X − Y‖_F / ‖Y‖_F`.
pub fn relative_error(x: &SymMatrix, reference: &SymMatrix) -> f64 {
    rel_frobenius(x.as_matrix(), reference.as_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::{geodesic_velocity, inner_product, Endpoint};

    fn diag(d: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(d).unwrap()
    }

    #[test]
    fn transporter_examples() {
        let a = random::spd(&mut random::rng(1), 3, 100.0);
        let t = Transporter::new(&a, &a).unwrap();
        assert!((t.e_matrix() - DMatrix::identity(3, 3)).norm() < 1e-13);

        let t = Transporter::new(&SpdMatrix::identity(2), &diag(&[4.0, 1.0])).unwrap();
        assert!((t.e_matrix() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).norm() < 1e-15);

        let mut rng = random::rng(2);
        for _ in 0..20 {
            let b = random::spd(&mut rng, 5, 1e4);
            let a = random::spd(&mut rng, 5, 1e4);
            let t = Transporter::new(&b, &a).unwrap();
            assert!(t.congruence_error() < 1e-10);
            assert!(t.symmetry_error() < 1e-10);
        }
        assert!(matches!(
            Transporter::new(&SpdMatrix::identity(2), &SpdMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transport_tangent_examples() {
        let t = Transporter::new(&SpdMatrix::identity(2), &diag(&[4.0, 1.0])).unwrap();
        let s = TangentVector::new(
            SpdMatrix::identity(2),
            SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let out = t.transport_tangent(&s).unwrap();
        assert_eq!(out.value(), &SymMatrix::from_row_slice(2, &[0.0, 2.0, 2.0, 0.0]).unwrap());
        assert_eq!(out.base(), t.target());
        let z = t.transport_tangent(&TangentVector::zero(SpdMatrix::identity(2))).unwrap();
        assert_eq!(z.value().frobenius_norm(), 0.0);
        assert!(matches!(
            t.transport_tangent(&TangentVector::zero(diag(&[2.0, 2.0]))),
            Err(Error::BasePointMismatch)
        ));
    }

    #[test]
    fn transport_preserves_inner_products_and_velocity() {
        let mut rng = random::rng(3);
        for _ in 0..20 {
            let b = random::spd(&mut rng, 4, 1e3);
            let a = random::spd(&mut rng, 4, 1e3);
            let t = Transporter::new(&b, &a).unwrap();
            let s1 = TangentVector::new(b.clone(), random::symmetric(&mut rng, 4)).unwrap();
            let s2 = TangentVector::new(b.clone(), random::symmetric(&mut rng, 4)).unwrap();
            let before = inner_product(&s1, &s2).unwrap();
            let after = inner_product(&t.transport_tangent(&s1).unwrap(), &t.transport_tangent(&s2).unwrap()).unwrap();
            assert!((before - after).abs() <= 1e-9 * s1.norm() * s2.norm());

            let v0 = geodesic_velocity(&b, &a, Endpoint::Start).unwrap();
            let v1 = geodesic_velocity(&b, &a, Endpoint::End).unwrap();
            let moved = t.transport_tangent(&v0).unwrap();
            assert!(relative_error(moved.value(), v1.value()) < 1e-9);
        }
    }

    #[test]
    fn transport_spd_examples() {
        let mut rng = random::rng(4);
        let b = random::spd(&mut rng, 3, 50.0);
        let a = random::spd(&mut rng, 3, 50.0);
        let p = random::spd(&mut rng, 3, 50.0);
        let t = Transporter::new(&b, &a).unwrap();
        assert!(relative_error(t.transport_spd(&b).unwrap().as_sym(), a.as_sym()) < 1e-12);
        let same = Transporter::new(&a, &a).unwrap();
        assert!(relative_error(same.transport_spd(&p).unwrap().as_sym(), p.as_sym()) < 1e-12);
        let direct = t.transport_spd(&p).unwrap();
        let three = adapt_map_three_step(&b, &a, &p).unwrap();
        assert!(relative_error(direct.as_sym(), three.as_sym()) < 1e-10);
        assert!(relative_error(adapt_map_three_step(&b, &a, &b).unwrap().as_sym(), a.as_sym()) < 1e-12);
        assert!(relative_error(adapt_map_three_step(&a, &a, &p).unwrap().as_sym(), p.as_sym()) < 1e-12);
    }

    #[test]
    fn equivalent_pairs_examples() {
        let mut rng = random::rng(5);
        let a = random::spd(&mut rng, 3, 100.0);
        let b = random::spd(&mut rng, 3, 100.0);
        let e = are_equivalent_pairs(&a, &b, &a, &b, EQUIVALENCE_TOLERANCE).unwrap().unwrap();
        assert!((e - DMatrix::identity(3, 3)).norm() < 1e-12);

        let g = random::invertible(&mut rng, 3, 100.0);
        let a2 = SpdMatrix::new(congruence(&g, a.as_sym()).unwrap()).unwrap();
        let b2 = SpdMatrix::new(congruence(&g, b.as_sym()).unwrap()).unwrap();
        let w = are_equivalent_pairs(&a, &b, &a2, &b2, EQUIVALENCE_TOLERANCE).unwrap().unwrap();
        assert!(rel_frobenius(&(&w * a.as_matrix() * w.transpose()), a2.as_matrix()) < 1e-8);

        let i2 = SpdMatrix::identity(2);
        assert!(are_equivalent_pairs(&i2, &i2, &diag(&[1.0, 2.0]), &i2, EQUIVALENCE_TOLERANCE)
            .unwrap()
            .is_none());
    }

    #[test]
    fn commutation_examples() {
        let mut rng = random::rng(6);
        let a = random::spd(&mut rng, 3, 100.0);
        let b = random::spd(&mut rng, 3, 100.0);
        let err = check_commutation(&a, &b, &a, &b, &DMatrix::identity(3, 3), 10, 1).unwrap();
        assert!(err < 1e-13);

        let g = random::invertible(&mut rng, 3, 100.0);
        let a2 = SpdMatrix::new(congruence(&g, a.as_sym()).unwrap()).unwrap();
        let b2 = SpdMatrix::new(congruence(&g, b.as_sym()).unwrap()).unwrap();
        assert!(check_commutation(&a, &b, &a2, &b2, &g, 50, 2).unwrap() < 1e-9);

        let b2_bad = perturb_non_congruent(&b2, 0.1, &mut rng).unwrap();
        assert!(check_commutation(&a, &b, &a2, &b2_bad, &g, 50, 2).unwrap() > 1e-4);

        let singular = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            check_commutation(&a, &b, &a2, &b2, &singular, 1, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn identity_on_geodesic_examples() {
        let d = identity_on_geodesic_diagnostic(&diag(&[4.0, 9.0]), &diag(&[0.25, 1.0 / 9.0]), 1e-10);
        assert!(d.on_geodesic);
        assert!((d.t0.unwrap() - 0.5).abs() < 1e-12);
        assert!(d.commutator_norm < 1e-15);

        let a = diag(&[2.0, 3.0]);
        let same = identity_on_geodesic_diagnostic(&a, &a, 1e-10);
        assert!(!same.on_geodesic && same.commutator_norm < 1e-15);
        let i2 = SpdMatrix::identity(2);
        assert!(identity_on_geodesic_diagnostic(&i2, &i2, 1e-10).on_geodesic);

        let mut rng = random::rng(7);
        let x = random::spd(&mut rng, 3, 100.0);
        let y = random::spd(&mut rng, 3, 100.0);
        let d = identity_on_geodesic_diagnostic(&x, &y, 1e-10);
        assert!(!d.on_geodesic);
        assert!(d.commutator_norm > 1e-3);
    }
}
