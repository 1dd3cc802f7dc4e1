//! The training loop.
//!
//! Each epoch runs shuffled mini-batches of Adam on the current label weights,
//! then re-sets every label weight from one fresh pass over the full dataset.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::PartialDataset;
use crate::model::{Classifier, Head};
use crate::nn::{Activation, Mlp};
use crate::optim::{Adam, AdamConfig};
use crate::pll::loss::{batch_objective, Objective};
use crate::pll::update::{ce_update_into, mse_update_into, proden_update_into};
use crate::pll::weights::LabelWeights;
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// Rows per forward pass when refreshing label weights.
const REFRESH_CHUNK: usize = 2048;

/// Slack on the per-instance bound `‖Δλ‖² ≤ ‖Δp̄‖²`.
pub const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Squared-error loss with the closed-form weight update.
    SquaredError,
    /// Expected cross-entropy with the one-hot weight update.
    CrossEntropy,
    /// Softmax network, weighted cross-entropy, renormalized-probability update.
    Proden,
}

impl UpdateRule {
    pub fn head(self) -> Head {
        match self {
            UpdateRule::Proden => Head::Softmax,
            _ => Head::Evidential,
        }
    }

    fn objective(self) -> Objective {
        match self {
            UpdateRule::SquaredError => Objective::Squared,
            UpdateRule::CrossEntropy => Objective::CrossEntropy,
            UpdateRule::Proden => Objective::Softmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub seed: u64,
    pub rule: UpdateRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            hidden: vec![300, 300, 300],
            adam: AdamConfig::default(),
            seed: 0,
            rule: UpdateRule::SquaredError,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                a.learning_rate
            )));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::Config(
                "Adam moments must lie in [0, 1) and epsilon be positive".into(),
            ));
        }
        Ok(())
    }

    /// Layer widths for inputs of dimension `d` and `k` classes.
    pub fn layer_dims(&self, d: usize, k: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(d);
        dims.extend_from_slice(&self.hidden);
        dims.push(k);
        dims
    }
}

/// KL annealing coefficient `min(2t/T, 1)` for epoch `t ∈ [1, T]`.
pub fn anneal(t: usize, total: usize) -> Result<f64> {
    if total == 0 || t == 0 || t > total {
        return Err(Error::domain(format!("epoch {t} outside [1, {total}]")));
    }
    Ok((2.0 * t as f64 / total as f64).min(1.0))
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub kl_weight: f64,
    pub mean_err: f64,
    pub mean_var: f64,
    pub mean_kl: f64,
    /// Mean over instances of `‖λ⁽ᵗ⁾ − λ⁽ᵗ⁻¹⁾‖²`.
    pub mean_weight_change: f64,
    /// Mean over instances of `‖p̄⁽ᵗ⁾ − p̄⁽ᵗ⁻¹⁾‖²`.
    pub mean_prob_change: f64,
    /// Agreement of the weight argmax with the true labels, when known.
    pub train_accuracy: Option<f64>,
    /// Instances whose weight change exceeded their probability change.
    pub bound_violations: usize,
    /// Updates that needed the non-negativity repair.
    pub clamped_updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    pub weights: LabelWeights,
    pub trace: Vec<EpochRecord>,
}

/// Trains a classifier on `dataset`.
///
/// Before the first epoch `p̄` is taken to be uniform, which is what an
/// evidence-free network predicts and what the initial label weights are the
/// update of.
pub fn train(dataset: &PartialDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_impl(dataset, config, true)
}

pub(crate) fn train_impl(dataset: &PartialDataset, config: &TrainConfig, refresh: bool) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    let (n, k) = (dataset.len(), dataset.num_classes());
    let head = config.rule.head();
    let output = match head {
        Head::Evidential => Activation::Relu,
        Head::Softmax => Activation::Identity,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mlp = Mlp::new(&config.layer_dims(dataset.dim(), k), output, &mut rng)?;
    let mut classifier = Classifier::new(mlp, head)?;
    let mut adam = Adam::new(config.adam, classifier.mlp());
    let mut weights = LabelWeights::init(dataset)?;
    let mut prev_probs = vec![1.0 / k as f64; n * k];
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let objective = config.rule.objective();

    for epoch in 1..=config.epochs {
        let kl_weight = match head {
            Head::Evidential => anneal(epoch, config.epochs)?,
            Head::Softmax => 0.0,
        };
        let fail = |batch: usize, reason: String, trace: &Vec<EpochRecord>| Error::Training {
            epoch,
            batch,
            reason,
            trace: trace.clone(),
        };
        order.shuffle(&mut rng);
        let (mut err, mut var, mut kl) = (0.0, 0.0, 0.0);
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let x = dataset.features().select_rows(rows);
            let cache = classifier.mlp().forward_cached(&x)?;
            let mut grad = DenseMatrix::zeros(rows.len(), k);
            let risk = batch_objective(
                objective,
                cache.output(),
                dataset,
                &weights,
                rows,
                kl_weight,
                Some(&mut grad),
            );
            if !risk.total.is_finite() {
                return Err(fail(b, format!("risk is {}", risk.total), &trace));
            }
            let w = rows.len() as f64 / n as f64;
            err += risk.err * w;
            var += risk.var * w;
            kl += risk.kl * w;
            let grads = classifier.mlp().parameter_gradients(&cache, &grad)?;
            adam.step(classifier.mlp_mut(), &grads)
                .map_err(|e| fail(b, format!("{e}"), &trace))?;
        }

        let mut record = EpochRecord {
            epoch,
            kl_weight,
            mean_err: err,
            mean_var: var,
            mean_kl: kl,
            mean_weight_change: 0.0,
            mean_prob_change: 0.0,
            train_accuracy: None,
            bound_violations: 0,
            clamped_updates: 0,
        };
        if refresh {
            refresh_weights(
                &classifier,
                dataset,
                config.rule,
                &mut weights,
                &mut prev_probs,
                &mut record,
            )
            .map_err(|e| fail(n.div_ceil(config.batch_size), format!("{e}"), &trace))?;
        }
        if let Some(labels) = dataset.true_labels() {
            let hits = labels
                .iter()
                .enumerate()
                .filter(|&(i, &y)| weights.argmax(i) == y)
                .count();
            record.train_accuracy = Some(hits as f64 / n as f64);
        }
        trace.push(record);
    }
    Ok(TrainOutcome {
        classifier,
        weights,
        trace,
    })
}

fn refresh_weights(
    classifier: &Classifier,
    dataset: &PartialDataset,
    rule: UpdateRule,
    weights: &mut LabelWeights,
    prev_probs: &mut [f64],
    record: &mut EpochRecord,
) -> Result<()> {
    let (n, k) = (dataset.len(), dataset.num_classes());
    let mut old = vec![0.0; k];
    let (mut dw_total, mut dp_total) = (0.0, 0.0);
    for start in (0..n).step_by(REFRESH_CHUNK) {
        let end = (start + REFRESH_CHUNK).min(n);
        let outputs = classifier.outputs(&dataset.features().slice_rows(start, end))?;
        let mut probs = outputs.clone();
        classifier.outputs_to_proba(&mut probs);
        if probs.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "predicted probabilities",
            });
        }
        for r in 0..end - start {
            let i = start + r;
            let cand = dataset.candidate_mask(i);
            let p = probs.row(r);
            old.copy_from_slice(weights.row(i));
            let row = weights.row_mut(i);
            match rule {
                UpdateRule::SquaredError => {
                    if mse_update_into(p, cand, row) {
                        record.clamped_updates += 1;
                    }
                }
                UpdateRule::CrossEntropy => ce_update_into(outputs.row(r), cand, row),
                UpdateRule::Proden => proden_update_into(p, cand, row),
            }
            let dw: f64 = row.iter().zip(&old).map(|(a, b)| (a - b) * (a - b)).sum();
            let prev = &mut prev_probs[i * k..(i + 1) * k];
            let dp: f64 = p.iter().zip(prev.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            prev.copy_from_slice(p);
            if rule == UpdateRule::SquaredError && dw > dp + BOUND_TOLERANCE {
                record.bound_violations += 1;
            }
            dw_total += dw;
            dp_total += dp;
        }
    }
    record.mean_weight_change = dw_total / n as f64;
    record.mean_prob_change = dp_total / n as f64;
    Ok(())
}
