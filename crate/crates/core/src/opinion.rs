//! Multinomial opinions and their Dirichlet counterparts.
//!
//! An opinion `(b, a, u)` over `k` classes carries belief masses `b`, a prior
//! `a` and an uncertainty mass `u` with `u + ‖b‖₁ = 1`. Non-negative evidence
//! `e` induces both the opinion `b = e/(k + ‖e‖₁)`, `u = k/(k + ‖e‖₁)` and the
//! Dirichlet `α = e + 1`; under a uniform prior the projected probability of
//! the former is the mean of the latter.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Absolute tolerance for the simplex and additivity checks.
pub const TOLERANCE: f64 = 1e-12;

pub fn uniform_prior(k: usize) -> Vec<f64> {
    alloc::vec![1.0 / k as f64; k]
}

pub(crate) fn check_evidence(evidence: &[f64]) -> Result<()> {
    if evidence.is_empty() {
        return Err(Error::domain("evidence vector is empty"));
    }
    if let Some((j, v)) = evidence
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
    {
        return Err(Error::domain(alloc::format!(
            "evidence must be finite and non-negative (class {j} has {v})"
        )));
    }
    Ok(())
}

fn check_unit_interval(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v >= -TOLERANCE && **v <= 1.0 + TOLERANCE)) {
        Some(v) => Err(Error::domain(alloc::format!("{name} entry {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialOpinion {
    belief: Vec<f64>,
    prior: Vec<f64>,
    uncertainty: f64,
}

impl MultinomialOpinion {
    pub fn new(belief: Vec<f64>, prior: Vec<f64>, uncertainty: f64) -> Result<Self> {
        if belief.len() != prior.len() || belief.is_empty() {
            return Err(Error::domain("belief and prior must be non-empty and of equal length"));
        }
        check_unit_interval("belief", &belief)?;
        check_unit_interval("prior", &prior)?;
        check_unit_interval("uncertainty", &[uncertainty])?;
        let prior_mass: f64 = prior.iter().sum();
        if libm::fabs(prior_mass - 1.0) > TOLERANCE {
            return Err(Error::domain(alloc::format!("prior sums to {prior_mass}, not 1")));
        }
        let total = uncertainty + belief.iter().sum::<f64>();
        if libm::fabs(total - 1.0) > TOLERANCE {
            return Err(Error::domain(alloc::format!("additivity violated: u + ‖b‖₁ = {total}")));
        }
        Ok(Self {
            belief,
            prior,
            uncertainty,
        })
    }

    /// The vacuous opinion: no belief, full uncertainty.
    pub fn vacuous(prior: Vec<f64>) -> Result<Self> {
        let belief = alloc::vec![0.0; prior.len()];
        Self::new(belief, prior, 1.0)
    }

    pub fn from_evidence(evidence: &[f64], prior: Vec<f64>) -> Result<Self> {
        check_evidence(evidence)?;
        let k = evidence.len() as f64;
        let denom = k + evidence.iter().sum::<f64>();
        let belief = evidence.iter().map(|e| e / denom).collect();
        Self::new(belief, prior, k / denom)
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn num_classes(&self) -> usize {
        self.belief.len()
    }

    /// Projected probability `b + a·u`.
    pub fn project(&self) -> Vec<f64> {
        self.belief
            .iter()
            .zip(&self.prior)
            .map(|(b, a)| b + a * self.uncertainty)
            .collect()
    }
}

/// Dirichlet parameters with every `α_j ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    alpha: Vec<f64>,
}

impl Dirichlet {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::domain("Dirichlet needs at least one class"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a >= 1.0) || !a.is_finite()) {
            return Err(Error::domain(alloc::format!("Dirichlet parameter {a} is below 1")));
        }
        Ok(Self { alpha })
    }

    /// `α = evidence + 1`.
    pub fn from_evidence(evidence: &[f64]) -> Result<Self> {
        check_evidence(evidence)?;
        Ok(Self {
            alpha: evidence.iter().map(|e| e + 1.0).collect(),
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `‖α‖₁`.
    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let s = self.strength();
        self.alpha.iter().map(|a| a / s).collect()
    }

    /// Marginal variances `p̄_j (1 − p̄_j) / (1 + ‖α‖₁)`.
    pub fn variance(&self) -> Vec<f64> {
        let s = self.strength();
        self.alpha
            .iter()
            .map(|a| {
                let p = a / s;
                p * (1.0 - p) / (1.0 + s)
            })
            .collect()
    }
}
