//! Partially labeled datasets, normalization and instance-dependent
//! candidate noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{Classifier, Predictor};
use crate::optim::AdamConfig;
use crate::pll::train::{train_impl, TrainConfig, UpdateRule};
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// Features with a candidate label set per instance and, optionally, the
/// hidden true labels (used for evaluation only).
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDataset {
    features: DenseMatrix,
    candidates: Vec<bool>,
    num_classes: usize,
    true_labels: Option<Vec<usize>>,
}

impl PartialDataset {
    /// `candidates` is a flat row-major `n × k` mask.
    pub fn new(
        features: DenseMatrix,
        candidates: Vec<bool>,
        num_classes: usize,
        true_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = features.rows();
        if num_classes == 0 {
            return Err(Error::Config("need at least one class".into()));
        }
        if candidates.len() != n * num_classes {
            return Err(Error::Shape {
                context: "PartialDataset candidates",
                expected: (n, num_classes),
                found: (candidates.len() / num_classes, candidates.len() % num_classes),
            });
        }
        if let Some(i) = candidates
            .chunks_exact(num_classes)
            .position(|row| !row.contains(&true))
        {
            return Err(Error::data(i, "empty candidate set"));
        }
        if let Some(labels) = &true_labels {
            if labels.len() != n {
                return Err(Error::Shape {
                    context: "PartialDataset labels",
                    expected: (n, 1),
                    found: (labels.len(), 1),
                });
            }
            for (i, &y) in labels.iter().enumerate() {
                if y >= num_classes {
                    return Err(Error::data(i, format!("label {y} out of range")));
                }
                if !candidates[i * num_classes + y] {
                    return Err(Error::data(i, "true label not in candidate set"));
                }
            }
        }
        Ok(Self {
            features,
            candidates,
            num_classes,
            true_labels,
        })
    }

    /// Fully supervised data: every candidate set is the true label alone.
    pub fn supervised(features: DenseMatrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let mut mask = vec![false; labels.len() * num_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::data(i, format!("label {y} out of range")));
            }
            mask[i * num_classes + y] = true;
        }
        Self::new(features, mask, num_classes, Some(labels))
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    /// Flat `n × k` candidate mask.
    pub fn candidates(&self) -> &[bool] {
        &self.candidates
    }

    pub fn candidate_mask(&self, i: usize) -> &[bool] {
        &self.candidates[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    /// Average candidate set size.
    pub fn mean_candidate_count(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.candidates.iter().filter(|&&c| c).count() as f64 / self.len() as f64
    }

    /// The listed instances, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let k = self.num_classes;
        let mut candidates = Vec::with_capacity(indices.len() * k);
        for &i in indices {
            candidates.extend_from_slice(self.candidate_mask(i));
        }
        Self {
            features: self.features.select_rows(indices),
            candidates,
            num_classes: k,
            true_labels: self
                .true_labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Same candidates and labels over replacement features.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::Shape {
                context: "PartialDataset::with_features",
                expected: (self.len(), features.cols()),
                found: features.shape(),
            });
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Seeded shuffle, then the first `first` instances and the rest.
    pub fn split(&self, first: usize, seed: u64) -> Result<(Self, Self)> {
        if first > self.len() {
            return Err(Error::Config(format!(
                "cannot take {first} of {} instances",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok((self.subset(&order[..first]), self.subset(&order[first..])))
    }
}

/// Per-column affine map onto `[0, 1]`, fitted on one matrix and reusable on
/// others. Constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMax {
    pub fn fit(features: &DenseMatrix) -> Self {
        let d = features.cols();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in features.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    pub fn apply(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        if features.cols() != self.min.len() {
            return Err(Error::Shape {
                context: "MinMax::apply",
                expected: (features.rows(), self.min.len()),
                found: features.shape(),
            });
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                let range = self.max[j] - self.min[j];
                *v = if range > 0.0 { (*v - self.min[j]) / range } else { 0.0 };
            }
        }
        Ok(out)
    }
}

pub fn minmax_normalize(features: &DenseMatrix) -> DenseMatrix {
    MinMax::fit(features)
        .apply(features)
        .expect("fitted on the same matrix")
}

/// Settings for the instance-dependent candidate generator.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub seed: u64,
    pub probe_hidden: Vec<usize>,
    pub probe_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            probe_hidden: vec![300, 300, 300],
            probe_epochs: 20,
            batch_size: 256,
            adam: AdamConfig::default(),
        }
    }
}

/// Inclusion probability of every label given probe probabilities `probs`
/// and true label `y`.
///
/// Incorrect labels get `ξ_j = g_j / max_{j′≠y} g_{j′}`, divided by the mean
/// of `ξ` over incorrect labels and clamped to `[0, 1]`. The true label gets 1.
pub fn flip_probabilities(probs: &[f64], y: usize) -> Result<Vec<f64>> {
    let k = probs.len();
    if y >= k {
        return Err(Error::domain(format!("label {y} out of range for {k} classes")));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::domain("probe probabilities must be finite and non-negative"));
    }
    let mut out = vec![0.0; k];
    out[y] = 1.0;
    if k == 1 {
        return Ok(out);
    }
    let max = (0..k).filter(|&j| j != y).map(|j| probs[j]).fold(0.0, f64::max);
    if max > 0.0 {
        let mean = (0..k).filter(|&j| j != y).map(|j| probs[j] / max).sum::<f64>() / (k - 1) as f64;
        for j in (0..k).filter(|&j| j != y) {
            out[j] = (probs[j] / max / mean).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Softmax classifier trained on clean labels, used only to shape the noise.
pub fn train_probe(
    features: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    config: &NoiseConfig,
) -> Result<Classifier> {
    let data = PartialDataset::supervised(features.clone(), labels.to_vec(), num_classes)?;
    let train = TrainConfig {
        epochs: config.probe_epochs,
        batch_size: config.batch_size,
        hidden: config.probe_hidden.clone(),
        adam: config.adam,
        seed: config.seed,
        rule: UpdateRule::Proden,
    };
    // Singleton candidates pin the label weights, so the refresh pass is skipped.
    Ok(train_impl(&data, &train, false)?.classifier)
}

/// Draws candidate sets: label `j` joins `S_i` independently with its flip
/// probability under `probs` row `i`.
pub fn sample_candidates(
    features: DenseMatrix,
    labels: &[usize],
    probs: &DenseMatrix,
    seed: u64,
) -> Result<PartialDataset> {
    let (n, k) = probs.shape();
    if labels.len() != n || features.rows() != n {
        return Err(Error::Shape {
            context: "sample_candidates",
            expected: (n, k),
            found: (labels.len(), features.rows()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = Vec::with_capacity(n * k);
    for (i, &y) in labels.iter().enumerate() {
        let flip = flip_probabilities(probs.row(i), y).map_err(|e| Error::data(i, format!("{e}")))?;
        for (j, &q) in flip.iter().enumerate() {
            let draw: f64 = rng.random();
            mask.push(j == y || draw < q);
        }
    }
    PartialDataset::new(features, mask, k, Some(labels.to_vec()))
}

/// Trains a probe on clean labels and samples instance-dependent candidate
/// sets from its predictions on the same instances.
pub fn generate_candidates(
    features: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    config: &NoiseConfig,
) -> Result<PartialDataset> {
    let probe = train_probe(features, labels, num_classes, config)?;
    let mut probs = DenseMatrix::zeros(features.rows(), num_classes);
    for start in (0..features.rows()).step_by(4096) {
        let end = (start + 4096).min(features.rows());
        let p = probe.predict_proba(&features.slice_rows(start, end))?;
        for r in 0..end - start {
            probs.row_mut(start + r).copy_from_slice(p.row(r));
        }
    }
    sample_candidates(features.clone(), labels, &probs, config.seed.wrapping_add(0x5eed))
}

/// Applies one seeded permutation to the columns of every row. On image data
/// this keeps per-pixel intensity statistics while destroying spatial
/// structure, giving a cheap out-of-distribution set.
pub fn permute_columns(features: &DenseMatrix, seed: u64) -> DenseMatrix {
    let mut perm: Vec<usize> = (0..features.cols()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = DenseMatrix::zeros(features.rows(), features.cols());
    for r in 0..features.rows() {
        let src = features.row(r);
        for (o, &j) in out.row_mut(r).iter_mut().zip(&perm) {
            *o = src[j];
        }
    }
    out
}

/// Gaussian class clusters with uniform candidate noise: every incorrect
/// label joins a candidate set with probability `ambiguity`. Class centres
/// are standard normal vectors scaled by `separation`.
pub fn synthetic_blobs(
    n: usize,
    d: usize,
    k: usize,
    ambiguity: f64,
    separation: f64,
    seed: u64,
) -> Result<PartialDataset> {
    if !(0.0..=1.0).contains(&ambiguity) {
        return Err(Error::Config(format!("ambiguity {ambiguity} outside [0, 1]")));
    }
    if k == 0 || d == 0 {
        return Err(Error::Config("need at least one class and one feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<f64> = (0..k * d)
        .map(|_| separation * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n * k);
    for i in 0..n {
        let y = i % k;
        labels.push(y);
        for j in 0..d {
            features.push(centres[y * d + j] + rng.sample::<f64, _>(StandardNormal));
        }
        for j in 0..k {
            mask.push(j == y || rng.random::<f64>() < ambiguity);
        }
    }
    PartialDataset::new(DenseMatrix::from_vec(n, d, features)?, mask, k, Some(labels))
}
