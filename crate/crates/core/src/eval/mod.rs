//! Accuracy, entropy-based out-of-distribution statistics and PGD attacks.

pub mod attack;
pub mod metrics;

pub use attack::{attack_sweep, pgd_attack, AttackConfig, SweepPoint};
pub use metrics::{
    accuracy, cdf_area, cdf_breakpoints, entropies, ks_statistic, mmd_rbf, normalized_entropy, ood_report,
    EntropySample, OodReport, MMD_CAP,
};
