//! Classification harness: nearest-centroid and shrinkage LDA classifiers,
//! leave-one-domain-out evaluation of the three feature pipelines, the
//! toy-problem alignment score and a PCA embedding.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{
    adapt_to_hub, domain_centroids, half_vectorize, pooled_mean, project_at_reference, resolve_hub,
    DomainFeatures, FeatureVector, Hub, LabeledCovarianceSet,
};
use crate::error::{Error, Result};
use crate::mean::MeanConfig;
use crate::spd::{sym_eig, whitened_tangent, SpdMatrix, SymMatrix};

/// Half-width of the phase window counted as a correct toy match.
pub const PHASE_MATCH_WINDOW: f64 = PI / 36.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClassifierKind {
    #[default]
    NearestCentroid,
    /// Linear discriminant with the pooled covariance shrunk towards a
    /// multiple of the identity by `shrinkage ∈ [0, 1]`.
    Lda { shrinkage: f64 },
}

#[derive(Clone, Debug)]
pub enum Classifier {
    NearestCentroid {
        /// `None` for class indices absent from training.
        centroids: Vec<Option<DVector<f64>>>,
    },
    Lda {
        weights: Vec<Option<(DVector<f64>, f64)>>,
    },
}

impl Classifier {
    pub fn n_classes(&self) -> usize {
        match self {
            Classifier::NearestCentroid { centroids } => centroids.len(),
            Classifier::Lda { weights } => weights.len(),
        }
    }

    /// Predicted class. Ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let x = DVector::from_column_slice(x);
        let mut best = (0, f64::NEG_INFINITY);
        let mut consider = |c: usize, score: f64| {
            if score > best.1 {
                best = (c, score);
            }
        };
        match self {
            Classifier::NearestCentroid { centroids } => {
                for (c, m) in centroids.iter().enumerate() {
                    if let Some(m) = m {
                        consider(c, -(&x - m).norm_squared());
                    }
                }
            }
            Classifier::Lda { weights } => {
                for (c, w) in weights.iter().enumerate() {
                    if let Some((w, b)) = w {
                        consider(c, w.dot(&x) + b);
                    }
                }
            }
        }
        best.0
    }
}

fn feature_matrix(features: &[FeatureVector]) -> Result<DMatrix<f64>> {
    let d = features
        .first()
        .ok_or_else(|| Error::EmptyInput("no training features".into()))?
        .len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::invalid("feature vectors of different lengths"));
    }
    Ok(DMatrix::from_fn(features.len(), d, |i, j| features[i].values()[j]))
}

pub fn train_classifier(
    features: &[FeatureVector],
    labels: &[usize],
    kind: ClassifierKind,
) -> Result<Classifier> {
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature vectors for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let x = feature_matrix(features)?;
    let d = x.ncols();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![DVector::zeros(d); n_classes];
    let mut counts = vec![0usize; n_classes];
    for (i, &c) in labels.iter().enumerate() {
        sums[c] += x.row(i).transpose();
        counts[c] += 1;
    }
    if counts.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::DegenerateLabels(
            "need at least two classes with samples".into(),
        ));
    }
    let means: Vec<Option<DVector<f64>>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    match kind {
        ClassifierKind::NearestCentroid => Ok(Classifier::NearestCentroid { centroids: means }),
        ClassifierKind::Lda { shrinkage } => {
            if !(0.0..=1.0).contains(&shrinkage) {
                return Err(Error::InvalidParameter(format!(
                    "LDA shrinkage must lie in [0, 1], got {shrinkage}"
                )));
            }
            let mut within = DMatrix::zeros(d, d);
            for (i, &c) in labels.iter().enumerate() {
                let r = x.row(i).transpose() - means[c].as_ref().expect("class seen");
                within += &r * r.transpose();
            }
            within /= labels.len() as f64;
            let mu = within.trace() / d as f64;
            let mut cov = within * (1.0 - shrinkage);
            for k in 0..d {
                cov[(k, k)] += shrinkage * mu;
            }
            let chol = cov.cholesky().ok_or_else(|| {
                Error::InvalidParameter("LDA covariance is singular; increase shrinkage".into())
            })?;
            let total = labels.len() as f64;
            let weights = means
                .iter()
                .zip(&counts)
                .map(|(m, &n)| {
                    m.as_ref().map(|m| {
                        let w = chol.solve(m);
                        let b = -0.5 * w.dot(m) + (n as f64 / total).ln();
                        (w, b)
                    })
                })
                .collect();
            Ok(Classifier::Lda { weights })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    MeanTransport,
    ParallelTransport,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Baseline, Method::MeanTransport, Method::ParallelTransport];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::MeanTransport => "mean_transport",
            Method::ParallelTransport => "parallel_transport",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvalConfig {
    pub mean: MeanConfig,
    pub hub: Hub,
    pub classifier: ClassifierKind,
}

/// Row `i`, column `j`: items of true class `i` predicted as `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Confusion(pub Vec<Vec<usize>>);

impl Confusion {
    pub fn zeros(n_classes: usize) -> Self {
        Self(vec![vec![0; n_classes]; n_classes])
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.0[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.0.len()).map(|i| self.0[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn add(&mut self, other: &Confusion) {
        for (r, o) in self.0.iter_mut().zip(&other.0) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub accuracy: f64,
    pub confusion: Confusion,
    /// Accuracy on each held-out domain.
    pub per_domain_accuracy: BTreeMap<String, f64>,
    pub per_domain_confusion: BTreeMap<String, Confusion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub fold: usize,
    pub test_domain: String,
    pub train_domains: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub kind: String,
    pub folds: Vec<Fold>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub n_classes: usize,
    pub per_method: Vec<MethodReport>,
    /// Domains whose mean hit the iteration cap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unconverged: Vec<String>,
}

impl EvaluationReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.per_method.iter().find(|r| r.method == m)
    }
}

/// Features of the held-out domain and of the training domains under one
/// method. Test labels are not visible here.
fn fold_features(
    method: Method,
    train: &[LabeledCovarianceSet],
    test: &LabeledCovarianceSet,
    train_centroids: &[SpdMatrix],
    test_centroid: &SpdMatrix,
    cfg: &EvalConfig,
) -> Result<(Vec<DomainFeatures>, DomainFeatures)> {
    let mut all: Vec<LabeledCovarianceSet> = train.to_vec();
    all.push(test.clone());
    let mut features = match method {
        Method::Baseline => {
            let (reference, _) = pooled_mean(train, &cfg.mean)?;
            project_at_reference(&all, &reference)?
        }
        Method::MeanTransport => {
            let mut centroids = train_centroids.to_vec();
            centroids.push(test_centroid.clone());
            all.iter()
                .zip(&centroids)
                .map(|(d, c)| {
                    Ok(DomainFeatures {
                        domain_id: d.domain_id().to_string(),
                        reference: c.clone(),
                        features: tangent_features(c, d.matrices())?,
                    })
                })
                .collect::<Result<_>>()?
        }
        Method::ParallelTransport => {
            let (hub, _) = resolve_hub(&cfg.hub, train_centroids, &cfg.mean)?;
            let mut centroids = train_centroids.to_vec();
            centroids.push(test_centroid.clone());
            adapt_to_hub(&all, &centroids, &hub)?
                .into_iter()
                .map(|d| DomainFeatures {
                    domain_id: d.domain_id,
                    reference: hub.clone(),
                    features: d.features,
                })
                .collect()
        }
    };
    let test_features = features.pop().expect("test domain appended");
    Ok((features, test_features))
}

fn tangent_features(reference: &SpdMatrix, matrices: &[SpdMatrix]) -> Result<Vec<FeatureVector>> {
    matrices
        .par_iter()
        .map(|p| whitened_tangent(reference, p).map(|s| half_vectorize(&s)))
        .collect()
}

/// Leave-one-domain-out evaluation of each method.
///
/// For every fold the classifier is fitted on the training domains only.
/// The held-out domain enters the feature pipeline as an unlabeled set
/// (its own mean for the transport methods); its labels are read only to
/// score the predictions. For parallel transport the hub is computed from
/// the training centroids.
pub fn evaluate_cross_domain(
    domains: &[LabeledCovarianceSet],
    methods: &[Method],
    cfg: &EvalConfig,
) -> Result<EvaluationReport> {
    if domains.len() < 2 {
        return Err(Error::invalid(format!(
            "leave-one-domain-out needs at least 2 domains, got {}",
            domains.len()
        )));
    }
    let mut n_classes = 0;
    for d in domains {
        let labels = d.class_labels()?;
        n_classes = n_classes.max(labels.iter().max().map_or(0, |m| m + 1));
    }
    let unlabeled: Vec<LabeledCovarianceSet> = domains.iter().map(|d| d.unlabeled()).collect();
    // each centroid depends on its own domain only
    let (centroids, warnings) = domain_centroids(&unlabeled, &cfg.mean)?;

    let folds: Vec<Fold> = (0..domains.len())
        .map(|k| Fold {
            fold: k,
            test_domain: domains[k].domain_id().to_string(),
            train_domains: domains
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, d)| d.domain_id().to_string())
                .collect(),
        })
        .collect();

    let per_fold: Vec<Vec<Confusion>> = (0..domains.len())
        .into_par_iter()
        .map(|k| {
            let train: Vec<LabeledCovarianceSet> = unlabeled
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, d)| d.clone())
                .collect();
            let train_centroids: Vec<SpdMatrix> = centroids
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, c)| c.clone())
                .collect();
            let train_labels: Vec<usize> = domains
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, d)| d.class_labels().expect("checked").iter().copied())
                .collect();
            methods
                .iter()
                .map(|&m| {
                    let (train_f, test_f) =
                        fold_features(m, &train, &unlabeled[k], &train_centroids, &centroids[k], cfg)?;
                    let xs: Vec<FeatureVector> = train_f.into_iter().flat_map(|d| d.features).collect();
                    let model = train_classifier(&xs, &train_labels, cfg.classifier)?;
                    let mut confusion = Confusion::zeros(n_classes);
                    let truth = domains[k].class_labels()?;
                    for (f, &y) in test_f.features.iter().zip(truth) {
                        confusion.record(y, model.predict(f.values()));
                    }
                    Ok(confusion)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let per_method = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let mut confusion = Confusion::zeros(n_classes);
            let mut per_domain_accuracy = BTreeMap::new();
            let mut per_domain_confusion = BTreeMap::new();
            for (fold, results) in folds.iter().zip(&per_fold) {
                let c = &results[mi];
                confusion.add(c);
                per_domain_accuracy.insert(fold.test_domain.clone(), c.accuracy());
                per_domain_confusion.insert(fold.test_domain.clone(), c.clone());
            }
            MethodReport {
                method,
                accuracy: confusion.accuracy(),
                confusion,
                per_domain_accuracy,
                per_domain_confusion,
            }
        })
        .collect();

    Ok(EvaluationReport {
        protocol: Protocol {
            kind: "leave-one-domain-out".into(),
            folds,
        },
        n_classes,
        per_method,
        unconverged: warnings.into_iter().map(|w| w.stage).collect(),
    })
}

/// `k`-fold cross-validated accuracy within one labelled feature set.
/// Fold `f` holds out the items with `index % k == f`.
pub fn cross_validate(
    features: &[FeatureVector],
    labels: &[usize],
    k: usize,
    kind: ClassifierKind,
) -> Result<f64> {
    if k < 2 || k > features.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot split {} items into {k} folds",
            features.len()
        )));
    }
    let mut correct = 0;
    for f in 0..k {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (i, (x, &y)) in features.iter().zip(labels).enumerate() {
            if i % k != f {
                xs.push(x.clone());
                ys.push(y);
            }
        }
        let model = train_classifier(&xs, &ys, kind)?;
        correct += features
            .iter()
            .zip(labels)
            .enumerate()
            .filter(|(i, (x, &y))| i % k == f && model.predict(x.values()) == y)
            .count();
    }
    Ok(correct as f64 / features.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyAlignment {
    pub mean_abs_phase_error: f64,
    /// Fraction of queries whose nearest neighbour has a phase within
    /// [`PHASE_MATCH_WINDOW`] of their own.
    pub cross_nn_top1: f64,
}

/// Cross-domain 1-nearest-neighbour phase matching: every query item is
/// matched to its Euclidean nearest neighbour among the reference items.
pub fn toy_alignment_score(
    reference: &[FeatureVector],
    reference_phases: &[f64],
    query: &[FeatureVector],
    query_phases: &[f64],
) -> Result<ToyAlignment> {
    if reference.len() != reference_phases.len() || query.len() != query_phases.len() {
        return Err(Error::invalid("phase labels do not match feature count"));
    }
    if reference.is_empty() || query.is_empty() {
        return Err(Error::EmptyInput("toy alignment needs items in both domains".into()));
    }
    let mut total_error = 0.0;
    let mut hits = 0;
    for (q, &phi) in query.iter().zip(query_phases) {
        let mut best = (0, f64::INFINITY);
        for (j, r) in reference.iter().enumerate() {
            let d: f64 = q.values().iter().zip(r.values()).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (j, d);
            }
        }
        let err = (reference_phases[best.0] - phi).abs();
        total_error += err;
        if err <= PHASE_MATCH_WINDOW {
            hits += 1;
        }
    }
    let n = query.len() as f64;
    Ok(ToyAlignment {
        mean_abs_phase_error: total_error / n,
        cross_nn_top1: hits as f64 / n,
    })
}

/// [`toy_alignment_score`] with domain 2 queried against domain 1, phases
/// taken from the input sets.
pub fn toy_alignment_for(features: &[DomainFeatures], domains: &[LabeledCovarianceSet]) -> Result<ToyAlignment> {
    if features.len() != 2 || domains.len() != 2 {
        return Err(Error::invalid("toy alignment compares exactly two domains"));
    }
    fn phases(d: &LabeledCovarianceSet) -> Result<&[f64]> {
        d.labels()
            .and_then(|l| l.as_real())
            .ok_or_else(|| Error::invalid(format!("domain `{}` has no phase labels", d.domain_id())))
    }
    toy_alignment_score(
        &features[0].features,
        phases(&domains[0])?,
        &features[1].features,
        phases(&domains[1])?,
    )
}

/// Principal-component projection of a feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// `N × k` scores.
    pub coords: DMatrix<f64>,
    /// `d × k` unit loadings, largest-magnitude entry of each positive.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
}

/// Centred PCA through the eigendecomposition of the feature covariance.
pub fn pca_embed(features: &[FeatureVector], k: usize) -> Result<Pca> {
    if features.len() < 2 {
        return Err(Error::invalid("PCA needs at least 2 samples"));
    }
    let x = feature_matrix(features)?;
    let (n, d) = x.shape();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!("cannot keep {k} of {d} components")));
    }
    let mean = x.row_mean();
    let mut centred = x;
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = SymMatrix::symmetrize(&(centred.transpose() * &centred / n as f64))?;
    let eig = sym_eig(&cov)?;
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let mut components = eig.eigenvectors.columns(0, k).into_owned();
    for mut col in components.column_iter_mut() {
        let lead = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if lead < 0.0 {
            col.neg_mut();
        }
    }
    let explained_variance: Vec<f64> = (0..k).map(|i| eig.eigenvalues[i].max(0.0)).collect();
    let explained_ratio = explained_variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(Pca {
        coords: centred * &components,
        components,
        explained_variance,
        explained_ratio,
    })
}

/// Two-dimensional embedding with per-point labels and domain ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingExport {
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<String>,
    pub domains: Vec<String>,
}

/// PCA to two dimensions of all items of all domains, in input order.
pub fn embed_domains(features: &[DomainFeatures], sets: &[LabeledCovarianceSet]) -> Result<EmbeddingExport> {
    let all: Vec<FeatureVector> = features.iter().flat_map(|d| d.features.iter().cloned()).collect();
    let pca = pca_embed(&all, 2)?;
    let mut labels = Vec::with_capacity(all.len());
    let mut domains = Vec::with_capacity(all.len());
    for (f, s) in features.iter().zip(sets) {
        for i in 0..f.features.len() {
            labels.push(match s.labels() {
                Some(crate::adapt::Labels::Class(v)) => v[i].to_string(),
                Some(crate::adapt::Labels::Real(v)) => format!("{:?}", v[i]),
                None => String::new(),
            });
            domains.push(f.domain_id.clone());
        }
    }
    let coords = (0..all.len()).map(|i| [pca.coords[(i, 0)], pca.coords[(i, 1)]]).collect();
    Ok(EmbeddingExport { coords, labels, domains })
}
