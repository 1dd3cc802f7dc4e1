//! Label-weight update rules.
//!
//! For the squared-error objective the optimal weights keep the predicted
//! mean on the candidate set and spread the mass that fell on non-candidates
//! uniformly across it:
//!
//! `λ*_j = p̄_j + (1 − Σ_{j′∈S} p̄_{j′}) / |S|` for `j ∈ S`, else 0.
//!
//! Because `Σ_{j∈S} p̄_j ≤ 1` the shift is non-negative, so `λ*` is feasible
//! for every simplex input. A clamp-and-renormalize fallback still guards
//! against rounding on inputs whose candidate entries are exactly zero; it
//! reports whether it fired so the trainer can count it.

use alloc::vec;
use alloc::vec::Vec;

use crate::opinion::{check_evidence, MultinomialOpinion};
use crate::pll::weights::check_simplex;
use crate::special::digamma;
use crate::{Error, Result};

fn check_mask(k: usize, candidates: &[bool]) -> Result<usize> {
    if candidates.len() != k {
        return Err(Error::domain("candidate mask length differs from class count"));
    }
    match candidates.iter().filter(|&&c| c).count() {
        0 => Err(Error::domain("candidate set is empty")),
        n => Ok(n),
    }
}

/// Writes the squared-error optimum into `out`; returns `true` if a negative
/// entry had to be clamped.
pub(crate) fn mse_update_into(probs: &[f64], candidates: &[bool], out: &mut [f64]) -> bool {
    let size = candidates.iter().filter(|&&c| c).count() as f64;
    let inside: f64 = probs.iter().zip(candidates).filter(|(_, &c)| c).map(|(p, _)| p).sum();
    let shift = (1.0 - inside) / size;
    let mut clamped = false;
    for ((o, p), &c) in out.iter_mut().zip(probs).zip(candidates) {
        *o = if c { p + shift } else { 0.0 };
        if *o < 0.0 {
            *o = 0.0;
            clamped = true;
        }
    }
    if clamped {
        let s: f64 = out.iter().sum();
        if s > 0.0 {
            out.iter_mut().for_each(|v| *v /= s);
        } else {
            for (o, &c) in out.iter_mut().zip(candidates) {
                *o = if c { 1.0 / size } else { 0.0 };
            }
        }
    }
    clamped
}

/// Optimal label weights under the expected squared error, given the model's
/// projected probabilities `probs`.
pub fn update_weights_mse(probs: &[f64], candidates: &[bool]) -> Result<Vec<f64>> {
    check_mask(probs.len(), candidates)?;
    check_simplex(probs)?;
    let mut out = vec![0.0; probs.len()];
    mse_update_into(probs, candidates, &mut out);
    Ok(out)
}

pub(crate) fn ce_update_into(evidence: &[f64], candidates: &[bool], out: &mut [f64]) {
    let strength: f64 = evidence.iter().map(|e| e + 1.0).sum();
    let psi_s = digamma(strength);
    let mut best: Option<(usize, f64)> = None;
    for (j, (&e, &c)) in evidence.iter().zip(candidates).enumerate() {
        if !c {
            continue;
        }
        let psi = psi_s - digamma(e + 1.0);
        if best.is_none_or(|(_, b)| psi < b) {
            best = Some((j, psi));
        }
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    if let Some((j, _)) = best {
        out[j] = 1.0;
    }
}

/// Optimal label weights under the expected cross-entropy: all mass on the
/// candidate minimizing `Ψ_j = ψ(‖α‖₁) − ψ(α_j)`, lowest index on ties.
pub fn update_weights_ce(evidence: &[f64], candidates: &[bool]) -> Result<Vec<f64>> {
    check_evidence(evidence)?;
    check_mask(evidence.len(), candidates)?;
    let mut out = vec![0.0; evidence.len()];
    ce_update_into(evidence, candidates, &mut out);
    Ok(out)
}

/// The squared-error update written as an opinion: belief `e_j/‖α‖₁` on
/// candidates, uncertainty `1 − Σ_{j∈S} b_j`, prior uniform over `S`.
pub fn decompose_opinion(evidence: &[f64], candidates: &[bool]) -> Result<MultinomialOpinion> {
    check_evidence(evidence)?;
    let size = check_mask(evidence.len(), candidates)? as f64;
    let strength: f64 = evidence.iter().map(|e| e + 1.0).sum();
    let belief: Vec<f64> = evidence
        .iter()
        .zip(candidates)
        .map(|(e, &c)| if c { e / strength } else { 0.0 })
        .collect();
    let uncertainty = 1.0 - belief.iter().sum::<f64>();
    let prior = candidates.iter().map(|&c| if c { 1.0 / size } else { 0.0 }).collect();
    MultinomialOpinion::new(belief, prior, uncertainty)
}

pub(crate) fn proden_update_into(probs: &[f64], candidates: &[bool], out: &mut [f64]) {
    let mass: f64 = probs.iter().zip(candidates).filter(|(_, &c)| c).map(|(p, _)| p).sum();
    if mass > 0.0 {
        for ((o, p), &c) in out.iter_mut().zip(probs).zip(candidates) {
            *o = if c { p / mass } else { 0.0 };
        }
    } else {
        let size = candidates.iter().filter(|&&c| c).count() as f64;
        for (o, &c) in out.iter_mut().zip(candidates) {
            *o = if c { 1.0 / size } else { 0.0 };
        }
    }
}

/// Baseline update: model probabilities restricted to the candidate set and
/// renormalized.
pub fn proden_baseline_update(probs: &[f64], candidates: &[bool]) -> Result<Vec<f64>> {
    check_mask(probs.len(), candidates)?;
    check_simplex(probs)?;
    let mut out = vec![0.0; probs.len()];
    proden_update_into(probs, candidates, &mut out);
    Ok(out)
}
