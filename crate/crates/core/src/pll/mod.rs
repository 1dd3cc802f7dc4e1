//! Partial-label learning: label weights, objectives, updates and training.

pub mod loss;
pub mod train;
pub mod update;
pub mod weights;

pub use loss::{
    empirical_risk, empirical_risk_gradient, expected_cross_entropy, kl_regularizer, softmax, squared_loss,
    LossBreakdown,
};
pub use train::{anneal, train, EpochRecord, TrainConfig, TrainOutcome, UpdateRule, BOUND_TOLERANCE};
pub use update::{decompose_opinion, proden_baseline_update, update_weights_ce, update_weights_mse};
pub use weights::{LabelWeights, SIMPLEX_TOLERANCE};
