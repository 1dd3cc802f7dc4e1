//! Per-instance objectives and their gradients with respect to network outputs.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::PartialDataset;
use crate::model::{Classifier, Head};
use crate::opinion::check_evidence;
use crate::pll::weights::{check_simplex, LabelWeights};
use crate::special::{digamma, ln_gamma, trigamma};
use crate::{Error, Result};

/// Risk components averaged over a set of instances.
///
/// For the squared-error objective `err` and `var` are the bias and variance
/// parts of `E‖λ − p‖²`; for the cross-entropy and softmax objectives `err`
/// holds the cross-entropy and `var` is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub err: f64,
    pub var: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `total = err + var + kl_weight · kl`.
    pub fn new(err: f64, var: f64, kl: f64, kl_weight: f64) -> Self {
        Self {
            err,
            var,
            kl,
            total: err + var + kl_weight * kl,
        }
    }
}

/// Writes `softmax(logits)` into `out`.
pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = libm::exp(z - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// Bias and variance terms of `E_{p∼Dir(e+1)} ‖λ − p‖²`; optionally writes
/// the gradient with respect to the evidence into `grad`.
pub(crate) fn squared_terms(evidence: &[f64], weights: &[f64], grad: Option<&mut [f64]>) -> (f64, f64) {
    let strength: f64 = evidence.iter().map(|e| e + 1.0).sum();
    let mut err = 0.0;
    let mut var = 0.0;
    let mut sq = 0.0;
    let mut cross = 0.0;
    for (e, l) in evidence.iter().zip(weights) {
        let p = (e + 1.0) / strength;
        err += (l - p) * (l - p);
        var += p * (1.0 - p);
        sq += p * p;
        cross += (p - l) * p;
    }
    var /= strength + 1.0;
    if let Some(grad) = grad {
        let s1 = strength + 1.0;
        for ((g, e), l) in grad.iter_mut().zip(evidence).zip(weights) {
            let p = (e + 1.0) / strength;
            let d_err = 2.0 / strength * ((p - l) - cross);
            let d_var = -2.0 * (p - sq) / (strength * s1) - (1.0 - sq) / (s1 * s1);
            *g = d_err + d_var;
        }
    }
    (err, var)
}

/// `KL(Dir(α̃) ‖ Dir(1))` where `α̃` keeps `α = e + 1` on non-candidates and is
/// 1 on candidates. Optionally writes `∂KL/∂e` into `grad`.
pub(crate) fn kl_terms(evidence: &[f64], candidates: &[bool], grad: Option<&mut [f64]>) -> f64 {
    let k = evidence.len() as f64;
    let tilde = |j: usize| if candidates[j] { 1.0 } else { evidence[j] + 1.0 };
    let has_mass = (0..evidence.len()).any(|j| tilde(j) != 1.0);
    if !has_mass {
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        return 0.0;
    }
    let strength: f64 = (0..evidence.len()).map(tilde).sum();
    let psi_s = digamma(strength);
    let mut kl = ln_gamma(strength) - ln_gamma(k);
    for j in 0..evidence.len() {
        let a = tilde(j);
        if a != 1.0 {
            kl += -ln_gamma(a) + (a - 1.0) * (digamma(a) - psi_s);
        }
    }
    if let Some(grad) = grad {
        let shared = (strength - k) * trigamma(strength);
        for (j, g) in grad.iter_mut().enumerate() {
            *g = if candidates[j] {
                0.0
            } else {
                let a = tilde(j);
                (a - 1.0) * trigamma(a) - shared
            };
        }
    }
    kl.max(0.0)
}

/// Expected cross-entropy `λ · Ψ` with `Ψ_j = ψ(‖α‖₁) − ψ(α_j)`; optionally
/// writes the evidence gradient into `grad`.
pub(crate) fn cross_entropy_terms(evidence: &[f64], weights: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let strength: f64 = evidence.iter().map(|e| e + 1.0).sum();
    let psi_s = digamma(strength);
    let loss = evidence
        .iter()
        .zip(weights)
        .map(|(e, l)| if *l == 0.0 { 0.0 } else { l * (psi_s - digamma(e + 1.0)) })
        .sum();
    if let Some(grad) = grad {
        let mass: f64 = weights.iter().sum();
        let shared = mass * trigamma(strength);
        for ((g, e), l) in grad.iter_mut().zip(evidence).zip(weights) {
            *g = shared - l * trigamma(e + 1.0);
        }
    }
    loss
}

/// `−Σ λ_j ln softmax(z)_j`, writing `∂/∂z` into `grad` when given.
pub(crate) fn softmax_cross_entropy_terms(logits: &[f64], weights: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
    let loss = logits
        .iter()
        .zip(weights)
        .map(|(z, l)| if *l == 0.0 { 0.0 } else { -l * (z - log_norm) })
        .sum();
    if let Some(grad) = grad {
        let mass: f64 = weights.iter().sum();
        for ((g, z), l) in grad.iter_mut().zip(logits).zip(weights) {
            *g = mass * libm::exp(z - log_norm) - l;
        }
    }
    loss
}

fn check_pair(evidence: &[f64], weights: &[f64]) -> Result<()> {
    check_evidence(evidence)?;
    if weights.len() != evidence.len() {
        return Err(Error::domain("evidence and weights differ in length"));
    }
    check_simplex(weights)
}

/// Expected squared error between label weights and a Dirichlet draw, split
/// into bias (`err`) and variance (`var`). `kl` is zero.
pub fn squared_loss(evidence: &[f64], weights: &[f64]) -> Result<LossBreakdown> {
    check_pair(evidence, weights)?;
    let (err, var) = squared_terms(evidence, weights, None);
    Ok(LossBreakdown::new(err, var, 0.0, 0.0))
}

/// KL divergence from the Dirichlet on non-candidate evidence to the uniform
/// Dirichlet. Zero exactly when no non-candidate class has evidence.
pub fn kl_regularizer(evidence: &[f64], candidates: &[bool]) -> Result<f64> {
    check_evidence(evidence)?;
    if candidates.len() != evidence.len() {
        return Err(Error::domain("evidence and candidate mask differ in length"));
    }
    if !candidates.iter().any(|&c| c) {
        return Err(Error::domain("candidate set is empty"));
    }
    Ok(kl_terms(evidence, candidates, None))
}

/// `E[−Σ λ_j ln p_j]` under `Dir(e + 1)`.
pub fn expected_cross_entropy(evidence: &[f64], weights: &[f64]) -> Result<f64> {
    check_pair(evidence, weights)?;
    Ok(cross_entropy_terms(evidence, weights, None))
}

/// Which objective a network is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    Squared,
    CrossEntropy,
    Softmax,
}

/// Batch mean of the objective over `rows` given network `outputs` (one row
/// per entry of `rows`). Writes `∂(mean)/∂outputs` into `grad` when given.
pub(crate) fn batch_objective(
    objective: Objective,
    outputs: &crate::DenseMatrix,
    dataset: &PartialDataset,
    weights: &LabelWeights,
    rows: &[usize],
    kl_weight: f64,
    mut grad: Option<&mut crate::DenseMatrix>,
) -> LossBreakdown {
    let k = outputs.cols();
    let scale = 1.0 / rows.len() as f64;
    let mut kl_grad = vec![0.0; k];
    let (mut err, mut var, mut kl) = (0.0, 0.0, 0.0);
    for (r, &i) in rows.iter().enumerate() {
        let out = outputs.row(r);
        let lam = weights.row(i);
        let mut g = grad.as_deref_mut().map(|m| m.row_mut(r));
        match objective {
            Objective::Squared | Objective::CrossEntropy => {
                if objective == Objective::Squared {
                    let (e, v) = squared_terms(out, lam, g.as_deref_mut());
                    err += e;
                    var += v;
                } else {
                    err += cross_entropy_terms(out, lam, g.as_deref_mut());
                }
                let want = g.is_some() && kl_weight != 0.0;
                kl += kl_terms(out, dataset.candidate_mask(i), want.then_some(&mut kl_grad[..]));
                if let Some(g) = g {
                    for (gj, kj) in g.iter_mut().zip(&kl_grad) {
                        *gj = (*gj + if want { kl_weight * kj } else { 0.0 }) * scale;
                    }
                }
            }
            Objective::Softmax => {
                err += softmax_cross_entropy_terms(out, lam, g.as_deref_mut());
                if let Some(g) = g {
                    g.iter_mut().for_each(|v| *v *= scale);
                }
            }
        }
    }
    LossBreakdown::new(err * scale, var * scale, kl * scale, kl_weight)
}

/// Mean over the dataset of `squared_loss + kl_weight · kl_regularizer` for an
/// evidential classifier.
pub fn empirical_risk(
    classifier: &Classifier,
    dataset: &PartialDataset,
    weights: &LabelWeights,
    kl_weight: f64,
) -> Result<LossBreakdown> {
    Ok(risk_with_gradient(classifier, dataset, weights, kl_weight, false)?.0)
}

/// Empirical risk together with its gradient with respect to every network
/// parameter (declaration order, see [`crate::nn::Mlp::tensors`]).
pub fn empirical_risk_gradient(
    classifier: &Classifier,
    dataset: &PartialDataset,
    weights: &LabelWeights,
    kl_weight: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let (risk, grad) = risk_with_gradient(classifier, dataset, weights, kl_weight, true)?;
    Ok((risk, grad.unwrap_or_default()))
}

fn risk_with_gradient(
    classifier: &Classifier,
    dataset: &PartialDataset,
    weights: &LabelWeights,
    kl_weight: f64,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<Vec<f64>>)> {
    if classifier.head() != Head::Evidential {
        return Err(Error::Config(
            "the squared-error risk needs an evidential classifier".into(),
        ));
    }
    if !(0.0..=1.0).contains(&kl_weight) {
        return Err(Error::domain(alloc::format!("KL weight {kl_weight} outside [0, 1]")));
    }
    if weights.len() != dataset.len() || weights.num_classes() != dataset.num_classes() {
        return Err(Error::Shape {
            context: "empirical_risk label weights",
            expected: (dataset.len(), dataset.num_classes()),
            found: (weights.len(), weights.num_classes()),
        });
    }
    let rows: Vec<usize> = (0..dataset.len()).collect();
    let cache = classifier.mlp().forward_cached(dataset.features())?;
    let out = cache.output();
    let mut grad = want_grad.then(|| crate::DenseMatrix::zeros(out.rows(), out.cols()));
    let risk = batch_objective(
        Objective::Squared,
        out,
        dataset,
        weights,
        &rows,
        kl_weight,
        grad.as_mut(),
    );
    if !risk.total.is_finite() {
        return Err(Error::NonFinite { what: "risk" });
    }
    let params = match grad {
        Some(g) => Some(classifier.mlp().parameter_gradients(&cache, &g)?.flatten()),
        None => None,
    };
    Ok((risk, params))
}
