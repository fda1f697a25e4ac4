//! Multi-domain adaptation: per-domain Riemannian means, a common hub,
//! parallel transport of every domain to the hub and whitened tangent
//! features. Also the two reference pipelines that skip the transport.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean::{riemannian_mean_lenient, MeanConfig, MeanResult};
use crate::spd::{check_same_dim, whitened_tangent, SpdMatrix, SymMatrix};
use crate::transport::Transporter;

/// Per-item labels of one domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum Labels {
    /// Class indices `0..C`.
    Class(Vec<usize>),
    /// Continuous targets, e.g. a phase.
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Class(v) => v.len(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_classes(&self) -> Option<&[usize]> {
        match self {
            Labels::Class(v) => Some(v),
            Labels::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Labels::Real(v) => Some(v),
            Labels::Class(_) => None,
        }
    }
}

/// The covariance matrices of one domain, with optional labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCovarianceSet {
    domain_id: String,
    matrices: Vec<SpdMatrix>,
    labels: Option<Labels>,
    pub metadata: BTreeMap<String, String>,
}

impl LabeledCovarianceSet {
    pub fn new(
        domain_id: impl Into<String>,
        matrices: Vec<SpdMatrix>,
        labels: Option<Labels>,
    ) -> Result<Self> {
        let domain_id = domain_id.into();
        if let Some(first) = matrices.first() {
            for p in &matrices[1..] {
                check_same_dim(first.dim(), p.dim())?;
            }
        }
        if let Some(l) = &labels {
            if l.len() != matrices.len() {
                return Err(Error::invalid(format!(
                    "domain `{domain_id}`: {} labels for {} matrices",
                    l.len(),
                    matrices.len()
                )));
            }
        }
        Ok(Self {
            domain_id,
            matrices,
            labels,
            metadata: BTreeMap::new(),
        })
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn matrices(&self) -> &[SpdMatrix] {
        &self.matrices
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// Class labels, or [`Error::MissingLabels`].
    pub fn class_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_ref()
            .and_then(Labels::as_classes)
            .ok_or_else(|| Error::MissingLabels {
                domain: self.domain_id.clone(),
            })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Matrix dimension, `None` for an empty set.
    pub fn dim(&self) -> Option<usize> {
        self.matrices.first().map(SpdMatrix::dim)
    }

    /// The same matrices with labels removed.
    pub fn unlabeled(&self) -> Self {
        Self {
            domain_id: self.domain_id.clone(),
            matrices: self.matrices.clone(),
            labels: None,
            metadata: self.metadata.clone(),
        }
    }
}

/// Upper triangle of a symmetric matrix, row by row, with off-diagonal
/// entries scaled by √2 so that `‖v‖₂ = ‖S‖_F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn half_vectorize(s: &SymMatrix) -> FeatureVector {
    let n = s.dim();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        v.push(s.get(i, i));
        for j in i + 1..n {
            v.push(std::f64::consts::SQRT_2 * s.get(i, j));
        }
    }
    FeatureVector(v)
}

/// Inverse of [`half_vectorize`].
pub fn unvectorize(v: &[f64]) -> Result<SymMatrix> {
    let n = triangular_side(v.len())
        .ok_or_else(|| Error::invalid(format!("length {} is not a triangular number", v.len())))?;
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..n {
            m[(i, j)] = v[k] / std::f64::consts::SQRT_2;
            k += 1;
        }
    }
    SymMatrix::from_upper(m)
}

fn triangular_side(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (n >= 1 && n * (n + 1) / 2 == len).then_some(n)
}

/// Where all domains are transported to.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Hub {
    /// Riemannian mean of the per-domain means.
    #[default]
    MeanOfMeans,
    Identity,
    Explicit(SpdMatrix),
}

#[derive(Clone, Debug, Default)]
pub struct AdaptConfig {
    pub mean: MeanConfig,
    pub hub: Hub,
}

/// A mean computation that hit its iteration cap. The last iterate is used.
#[derive(Clone, Debug)]
pub struct MeanWarning {
    /// Domain id, or `hub` for the mean of means.
    pub stage: String,
    pub result: MeanResult,
}

/// Output of [`adapt`] for one domain, items in input order.
#[derive(Clone, Debug)]
pub struct DomainAdaptation {
    pub domain_id: String,
    pub centroid: SpdMatrix,
    /// `E` of the transport from the centroid to the hub.
    pub transport: DMatrix<f64>,
    pub transported: Vec<SpdMatrix>,
    pub whitened_tangents: Vec<SymMatrix>,
    pub features: Vec<FeatureVector>,
}

#[derive(Clone, Debug)]
pub struct AdaptationResult {
    pub grand_mean: SpdMatrix,
    pub domains: Vec<DomainAdaptation>,
    pub warnings: Vec<MeanWarning>,
}

impl AdaptationResult {
    pub fn domain(&self, id: &str) -> Option<&DomainAdaptation> {
        self.domains.iter().find(|d| d.domain_id == id)
    }

    /// Fails with [`Error::DidNotConverge`] if any mean hit its iteration cap.
    pub fn ensure_converged(self) -> Result<Self> {
        match self.warnings.into_iter().next() {
            Some(w) => Err(Error::DidNotConverge {
                last: Box::new(w.result),
            }),
            None => Ok(Self {
                warnings: Vec::new(),
                ..self
            }),
        }
    }

    /// Congruence taking domain `from` into the frame of domain `to` through
    /// the hub: `E_to⁻¹ E_from`.
    pub fn cross_domain_map(&self, from: usize, to: usize) -> Result<DMatrix<f64>> {
        let get = |k: usize| {
            self.domains
                .get(k)
                .ok_or_else(|| Error::invalid(format!("no domain with index {k}")))
        };
        let (src, dst) = (get(from)?, get(to)?);
        let back = dst
            .transport
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("transport matrix is singular"))?;
        Ok(back * &src.transport)
    }

    pub fn features(&self) -> Vec<DomainFeatures> {
        self.domains
            .iter()
            .map(|d| DomainFeatures {
                domain_id: d.domain_id.clone(),
                reference: self.grand_mean.clone(),
                features: d.features.clone(),
            })
            .collect()
    }
}

/// Tangent features of one domain and the point they were taken at.
#[derive(Clone, Debug)]
pub struct DomainFeatures {
    pub domain_id: String,
    pub reference: SpdMatrix,
    pub features: Vec<FeatureVector>,
}

fn check_domains(domains: &[LabeledCovarianceSet]) -> Result<usize> {
    if domains.is_empty() {
        return Err(Error::EmptyInput("no domains".into()));
    }
    let mut dim = None;
    for d in domains {
        let n = d
            .dim()
            .ok_or_else(|| Error::EmptyInput(format!("domain `{}` has no matrices", d.domain_id)))?;
        match dim {
            None => dim = Some(n),
            Some(m) => check_same_dim(m, n)?,
        }
    }
    Ok(dim.unwrap_or_default())
}

fn lenient_mean(set: &[SpdMatrix], cfg: &MeanConfig, stage: &str) -> Result<(SpdMatrix, Option<MeanWarning>)> {
    let (result, converged) = riemannian_mean_lenient(set, cfg)?;
    let mean = result.mean.clone();
    let warning = (!converged).then(|| MeanWarning {
        stage: stage.to_string(),
        result,
    });
    Ok((mean, warning))
}

/// Riemannian mean of every domain, in input order.
pub fn domain_centroids(
    domains: &[LabeledCovarianceSet],
    cfg: &MeanConfig,
) -> Result<(Vec<SpdMatrix>, Vec<MeanWarning>)> {
    cfg.validate()?;
    check_domains(domains)?;
    let means: Vec<_> = domains
        .par_iter()
        .map(|d| lenient_mean(&d.matrices, cfg, &d.domain_id))
        .collect::<Result<_>>()?;
    let mut centroids = Vec::with_capacity(means.len());
    let mut warnings = Vec::new();
    for (c, w) in means {
        centroids.push(c);
        warnings.extend(w);
    }
    Ok((centroids, warnings))
}

/// The hub point for a set of centroids.
pub fn resolve_hub(
    hub: &Hub,
    centroids: &[SpdMatrix],
    cfg: &MeanConfig,
) -> Result<(SpdMatrix, Option<MeanWarning>)> {
    let n = centroids
        .first()
        .ok_or_else(|| Error::EmptyInput("no centroids".into()))?
        .dim();
    match hub {
        Hub::MeanOfMeans if centroids.len() == 1 => Ok((centroids[0].clone(), None)),
        Hub::MeanOfMeans => lenient_mean(centroids, cfg, "hub"),
        Hub::Identity => Ok((SpdMatrix::identity(n), None)),
        Hub::Explicit(p) => {
            check_same_dim(n, p.dim())?;
            Ok((p.clone(), None))
        }
    }
}

/// Transports each domain from its centroid to `hub` and projects the
/// result onto the tangent space at `hub` in whitened coordinates.
pub fn adapt_to_hub(
    domains: &[LabeledCovarianceSet],
    centroids: &[SpdMatrix],
    hub: &SpdMatrix,
) -> Result<Vec<DomainAdaptation>> {
    let n = check_domains(domains)?;
    if centroids.len() != domains.len() {
        return Err(Error::invalid(format!(
            "{} centroids for {} domains",
            centroids.len(),
            domains.len()
        )));
    }
    check_same_dim(n, hub.dim())?;
    domains
        .iter()
        .zip(centroids)
        .map(|(d, c)| {
            let t = Transporter::new(c, hub)?;
            let items: Vec<(SpdMatrix, SymMatrix)> = d
                .matrices
                .par_iter()
                .map(|p| {
                    let w = t.transport_whitened(&whitened_tangent(c, p)?)?;
                    Ok((t.transport_spd(p)?, w))
                })
                .collect::<Result<_>>()?;
            let (transported, whitened_tangents): (Vec<_>, Vec<_>) = items.into_iter().unzip();
            let features = whitened_tangents.iter().map(half_vectorize).collect();
            Ok(DomainAdaptation {
                domain_id: d.domain_id.clone(),
                centroid: c.clone(),
                transport: t.e_matrix().clone(),
                transported,
                whitened_tangents,
                features,
            })
        })
        .collect()
}

/// Unsupervised adaptation of all domains to a common reference.
///
/// Labels are never read. Means that fail to converge do not abort the run;
/// they are listed in [`AdaptationResult::warnings`].
pub fn adapt(domains: &[LabeledCovarianceSet], cfg: &AdaptConfig) -> Result<AdaptationResult> {
    let (centroids, mut warnings) = domain_centroids(domains, &cfg.mean)?;
    let (grand_mean, w) = resolve_hub(&cfg.hub, &centroids, &cfg.mean)?;
    warnings.extend(w);
    let per_domain = adapt_to_hub(domains, &centroids, &grand_mean)?;
    for w in &warnings {
        log::warn!(
            "mean for `{}` stopped after {} iterations (gradient norm {:e})",
            w.stage,
            w.result.iterations,
            w.result.final_gradient_norm
        );
    }
    Ok(AdaptationResult {
        grand_mean,
        domains: per_domain,
        warnings,
    })
}

fn project_at(
    domains: &[LabeledCovarianceSet],
    references: &[SpdMatrix],
) -> Result<Vec<DomainFeatures>> {
    domains
        .iter()
        .zip(references)
        .map(|(d, r)| {
            let features = d
                .matrices
                .par_iter()
                .map(|p| whitened_tangent(r, p).map(|s| half_vectorize(&s)))
                .collect::<Result<_>>()?;
            Ok(DomainFeatures {
                domain_id: d.domain_id.clone(),
                reference: r.clone(),
                features,
            })
        })
        .collect()
}

/// Every domain projected at one point, with no per-domain transport.
pub fn project_at_reference(
    domains: &[LabeledCovarianceSet],
    reference: &SpdMatrix,
) -> Result<Vec<DomainFeatures>> {
    let n = check_domains(domains)?;
    check_same_dim(n, reference.dim())?;
    project_at(domains, &vec![reference.clone(); domains.len()])
}

/// Riemannian mean of all matrices of all domains taken together.
pub fn pooled_mean(domains: &[LabeledCovarianceSet], cfg: &MeanConfig) -> Result<(SpdMatrix, Option<MeanWarning>)> {
    check_domains(domains)?;
    let all: Vec<SpdMatrix> = domains.iter().flat_map(|d| d.matrices.iter().cloned()).collect();
    lenient_mean(&all, cfg, "pooled")
}

/// Baseline without transport: every matrix projected at the pooled mean.
pub fn baseline_no_transport(
    domains: &[LabeledCovarianceSet],
    cfg: &MeanConfig,
) -> Result<Vec<DomainFeatures>> {
    let (reference, _) = pooled_mean(domains, cfg)?;
    project_at_reference(domains, &reference)
}

/// Each domain projected at its own mean: re-centred, not rotated.
pub fn mean_transport(
    domains: &[LabeledCovarianceSet],
    cfg: &MeanConfig,
) -> Result<Vec<DomainFeatures>> {
    let (centroids, _) = domain_centroids(domains, cfg)?;
    project_at(domains, &centroids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use crate::spd::{congruence, distance, spd_log};

    fn set(id: &str, m: Vec<SpdMatrix>) -> LabeledCovarianceSet {
        LabeledCovarianceSet::new(id, m, None).unwrap()
    }

    fn random_set(rng: &mut random::Rng, n: usize, count: usize) -> Vec<SpdMatrix> {
        (0..count).map(|_| random::spd(rng, n, 50.0)).collect()
    }

    #[test]
    fn half_vectorize_example() {
        let s = SymMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 3.0]).unwrap();
        let v = half_vectorize(&s);
        assert_eq!(v.values()[0], 1.0);
        assert_eq!(v.values()[1], 2.0 * std::f64::consts::SQRT_2);
        assert_eq!(v.values()[2], 3.0);
        assert!((v.norm().powi(2) - 18.0).abs() < 1e-12);
        assert!(half_vectorize(&SymMatrix::zeros(3)).values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn half_vectorize_preserves_norm_and_inverts() {
        let mut rng = random::rng(3);
        for n in 1..7 {
            let s = random::symmetric(&mut rng, n);
            let v = half_vectorize(&s);
            assert_eq!(v.len(), n * (n + 1) / 2);
            assert!((v.norm() - s.frobenius_norm()).abs() < 1e-12);
            let back = unvectorize(v.values()).unwrap();
            assert!((back.as_matrix() - s.as_matrix()).amax() < 1e-15);
        }
    }

    #[test]
    fn unvectorize_rejects_non_triangular_length() {
        assert!(matches!(unvectorize(&[1.0, 2.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(unvectorize(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn labels_must_match_matrix_count() {
        let m = vec![SpdMatrix::identity(2)];
        assert!(LabeledCovarianceSet::new("a", m.clone(), Some(Labels::Class(vec![0, 1]))).is_err());
        let s = LabeledCovarianceSet::new("a", m, Some(Labels::Real(vec![0.5]))).unwrap();
        assert!(matches!(s.class_labels(), Err(Error::MissingLabels { .. })));
        assert!(s.unlabeled().labels().is_none());
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let r = LabeledCovarianceSet::new("a", vec![SpdMatrix::identity(2), SpdMatrix::identity(3)], None);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let domains = [set("a", vec![SpdMatrix::identity(2)]), set("b", vec![SpdMatrix::identity(3)])];
        assert!(matches!(adapt(&domains, &AdaptConfig::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(adapt(&[], &AdaptConfig::default()), Err(Error::EmptyInput(_))));
        assert!(matches!(baseline_no_transport(&[], &MeanConfig::default()), Err(Error::EmptyInput(_))));
        let domains = [set("a", vec![])];
        assert!(matches!(adapt(&domains, &AdaptConfig::default()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn single_domain_centred_at_identity() {
        let a = SpdMatrix::from_diagonal(&[2.0, 0.5]).unwrap();
        let b = SpdMatrix::from_diagonal(&[0.5, 2.0]).unwrap();
        let r = adapt(&[set("k", vec![a.clone(), b.clone()])], &AdaptConfig::default()).unwrap();
        assert!((r.grand_mean.as_matrix() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        let d = &r.domains[0];
        for (p, (g, s)) in [a, b].iter().zip(d.transported.iter().zip(&d.whitened_tangents)) {
            assert!((g.as_matrix() - p.as_matrix()).amax() < 1e-12);
            assert!((s.as_matrix() - spd_log(p).as_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn single_domain_methods_agree() {
        let mut rng = random::rng(8);
        let domains = [set("k", random_set(&mut rng, 3, 12))];
        let cfg = AdaptConfig::default();
        let pt = adapt(&domains, &cfg).unwrap().features();
        let bl = baseline_no_transport(&domains, &cfg.mean).unwrap();
        let mt = mean_transport(&domains, &cfg.mean).unwrap();
        assert_eq!(pt[0].features, bl[0].features);
        assert_eq!(pt[0].features, mt[0].features);
    }

    #[test]
    fn congruent_domains_are_aligned() {
        let mut rng = random::rng(21);
        let base = random_set(&mut rng, 4, 15);
        // domain 2 is domain 1 moved along a geodesic from its own centroid
        let centroid = crate::mean::riemannian_mean(&base, &MeanConfig::default()).unwrap().mean;
        let target = random::spd(&mut rng, 4, 20.0);
        let e = crate::transport::transport_matrix(&centroid, &target).unwrap();
        let moved: Vec<SpdMatrix> = base
            .iter()
            .map(|p| SpdMatrix::new(congruence(&e, p.as_sym()).unwrap()).unwrap())
            .collect();
        let r = adapt(&[set("a", base), set("b", moved)], &AdaptConfig::default()).unwrap();
        for (g1, g2) in r.domains[0].transported.iter().zip(&r.domains[1].transported) {
            assert!(distance(g1, g2).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn transport_preserves_pairwise_distances_and_maps_centroid_to_hub() {
        let mut rng = random::rng(5);
        let domains = [
            set("a", random_set(&mut rng, 3, 10)),
            set("b", random_set(&mut rng, 3, 7)),
            set("c", random_set(&mut rng, 3, 12)),
        ];
        let cfg = AdaptConfig::default();
        let r = adapt(&domains, &cfg).unwrap();
        assert!(r.warnings.is_empty());
        for (d, out) in domains.iter().zip(&r.domains) {
            let p = d.matrices();
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    let before = distance(&p[i], &p[j]).unwrap();
                    let after = distance(&out.transported[i], &out.transported[j]).unwrap();
                    assert!((before - after).abs() <= 1e-10 * before);
                }
            }
            let m = crate::mean::riemannian_mean(&out.transported, &cfg.mean).unwrap().mean;
            assert!(distance(&m, &r.grand_mean).unwrap() <= 10.0 * cfg.mean.epsilon);
            // features of a domain average to zero at the hub
            let mut acc = vec![0.0; out.features[0].len()];
            for f in &out.features {
                for (a, x) in acc.iter_mut().zip(f.values()) {
                    *a += x;
                }
            }
            let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt() / p.len() as f64;
            assert!(norm <= 1e-8, "{norm}");
        }
    }

    #[test]
    fn feature_distance_equals_whitened_frobenius_distance() {
        let mut rng = random::rng(6);
        let domains = [set("a", random_set(&mut rng, 3, 5)), set("b", random_set(&mut rng, 3, 5))];
        let r = adapt(&domains, &AdaptConfig::default()).unwrap();
        let d = &r.domains[1];
        for i in 0..5 {
            for j in 0..5 {
                let fv: f64 = d.features[i]
                    .values()
                    .iter()
                    .zip(d.features[j].values())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let fm = (d.whitened_tangents[i].as_matrix() - d.whitened_tangents[j].as_matrix()).norm();
                assert!((fv - fm).abs() <= 1e-12 * fm.max(1.0));
            }
        }
    }

    #[test]
    fn two_domain_composite_matches_direct_transport() {
        let mut rng = random::rng(12);
        let domains = [set("a", random_set(&mut rng, 3, 9)), set("b", random_set(&mut rng, 3, 9))];
        let r = adapt(&domains, &AdaptConfig::default()).unwrap();
        let via_hub = r.cross_domain_map(1, 0).unwrap();
        let direct = crate::transport::transport_matrix(&r.domains[1].centroid, &r.domains[0].centroid).unwrap();
        assert!((&via_hub - &direct).norm() <= 1e-8 * direct.norm());
    }

    #[test]
    fn mean_transport_features_are_centred() {
        let mut rng = random::rng(9);
        let domains = [set("a", random_set(&mut rng, 3, 20))];
        let f = &mean_transport(&domains, &MeanConfig::default()).unwrap()[0];
        let len = f.features[0].len();
        let sum: Vec<f64> = (0..len).map(|k| f.features.iter().map(|v| v.values()[k]).sum()).collect();
        assert!(sum.iter().map(|x| x * x).sum::<f64>().sqrt() <= 20.0 * 1e-9);
    }

    #[test]
    fn non_convergence_is_reported_not_fatal() {
        let mut rng = random::rng(2);
        let domains = [set("a", random_set(&mut rng, 3, 10)), set("b", random_set(&mut rng, 3, 10))];
        let cfg = AdaptConfig {
            mean: MeanConfig {
                epsilon: 1e-300,
                max_iterations: 1,
                ..MeanConfig::default()
            },
            hub: Hub::MeanOfMeans,
        };
        let r = adapt(&domains, &cfg).unwrap();
        assert!(!r.warnings.is_empty());
        assert!(matches!(r.ensure_converged(), Err(Error::DidNotConverge { .. })));
    }

    #[test]
    fn hub_choices() {
        let mut rng = random::rng(4);
        let domains = [set("a", random_set(&mut rng, 2, 6)), set("b", random_set(&mut rng, 2, 6))];
        let id = adapt(
            &domains,
            &AdaptConfig {
                hub: Hub::Identity,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(id.grand_mean, SpdMatrix::identity(2));
        let p = SpdMatrix::from_diagonal(&[3.0, 1.0]).unwrap();
        let ex = adapt(
            &domains,
            &AdaptConfig {
                hub: Hub::Explicit(p.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ex.grand_mean, p);
        let bad = Hub::Explicit(SpdMatrix::identity(3));
        assert!(adapt(&domains, &AdaptConfig { hub: bad, ..Default::default() }).is_err());
    }
}
