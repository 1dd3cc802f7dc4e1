//! Projected gradient ascent on the model's own loss against the true label.

use alloc::format;
use alloc::vec::Vec;

use crate::data::PartialDataset;
use crate::eval::metrics::accuracy;
use crate::model::Predictor;
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

const ATTACK_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl AttackConfig {
    /// Ten steps of size `ε/10`.
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            steps: 10,
            step_size: epsilon / 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon {} must be finite and non-negative",
                self.epsilon
            )));
        }
        if !(self.step_size >= 0.0) || self.step_size * (self.steps as f64) < self.epsilon * (1.0 - 1e-12) {
            return Err(Error::Config("step size times steps must reach epsilon".into()));
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Perturbs `features` within the `ε`-ball (sup norm) intersected with
/// `[0, 1]^d`, ascending the loss returned by
/// [`Predictor::loss_input_gradient`].
pub fn pgd_attack<P: Predictor + ?Sized>(
    model: &P,
    features: &DenseMatrix,
    labels: &[usize],
    config: &AttackConfig,
) -> Result<DenseMatrix> {
    config.validate()?;
    if labels.len() != features.rows() {
        return Err(Error::Shape {
            context: "pgd_attack labels",
            expected: (features.rows(), 1),
            found: (labels.len(), 1),
        });
    }
    if let Some(pos) = features.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::data(pos / features.cols().max(1), "features must lie in [0, 1]"));
    }
    let mut out = features.clone();
    if config.epsilon == 0.0 || config.steps == 0 {
        return Ok(out);
    }
    let d = features.cols();
    for start in (0..features.rows()).step_by(ATTACK_CHUNK) {
        let end = (start + ATTACK_CHUNK).min(features.rows());
        let x0 = &features.as_slice()[start * d..end * d];
        let mut x = features.slice_rows(start, end);
        for _ in 0..config.steps {
            let (_, grad) = model.loss_input_gradient(&x, &labels[start..end])?;
            for ((v, g), v0) in x.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(x0) {
                let stepped = *v + config.step_size * sign(*g);
                *v = stepped.clamp(v0 - config.epsilon, v0 + config.epsilon).clamp(0.0, 1.0);
            }
        }
        out.as_mut_slice()[start * d..end * d].copy_from_slice(x.as_slice());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub accuracy: f64,
}

/// Accuracy under attack for each `ε`, using the dataset's true labels.
pub fn attack_sweep<P: Predictor + ?Sized>(
    model: &P,
    dataset: &PartialDataset,
    eps: &[f64],
) -> Result<Vec<SweepPoint>> {
    let labels = dataset
        .true_labels()
        .ok_or_else(|| Error::domain("an attack sweep needs true labels"))?;
    eps.iter()
        .map(|&epsilon| {
            let x = pgd_attack(model, dataset.features(), labels, &AttackConfig::new(epsilon))?;
            Ok(SweepPoint {
                epsilon,
                accuracy: accuracy(model, &x, labels)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Classifier, Head};
    use crate::nn::{Activation, Dense, Mlp};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64, head: Head) -> Classifier {
        let act = if head == Head::Evidential {
            Activation::Relu
        } else {
            Activation::Identity
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Classifier::new(Mlp::new(&[5, 8, 3], act, &mut rng).unwrap(), head).unwrap()
    }

    fn inputs(n: usize, seed: u64) -> DenseMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_vec(n, 5, (0..n * 5).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let m = random_model(1, Head::Softmax);
        let x = inputs(4, 2);
        assert_eq!(pgd_attack(&m, &x, &[0, 1, 2, 0], &AttackConfig::new(0.0)).unwrap(), x);
    }

    #[test]
    fn linear_one_step_moves_by_sign() {
        // Two-class softmax on logits (x₀, −x₀): the loss against class 1
        // grows with x₀ and does not depend on x₁.
        let mlp = Mlp::from_layers(vec![Dense {
            weights: DenseMatrix::from_rows(&[[1.0, -1.0], [0.0, 0.0]]).unwrap(),
            bias: vec![0.0; 2],
            activation: Activation::Identity,
        }])
        .unwrap();
        let m = Classifier::new(mlp, Head::Softmax).unwrap();
        let x = DenseMatrix::from_rows(&[[0.5, 0.5], [0.98, 0.2]]).unwrap();
        let cfg = AttackConfig {
            epsilon: 0.1,
            steps: 1,
            step_size: 0.1,
        };
        let adv = pgd_attack(&m, &x, &[1, 1], &cfg).unwrap();
        assert!((adv.get(0, 0) - 0.6).abs() < 1e-15);
        assert_eq!(adv.get(0, 1), 0.5);
        assert_eq!(adv.get(1, 0), 1.0);
    }

    #[test]
    fn outputs_stay_in_the_feasible_box() {
        for (seed, head) in [(3, Head::Softmax), (4, Head::Evidential)] {
            let m = random_model(seed, head);
            let x = inputs(50, seed + 10);
            let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
            for eps in [0.05, 0.2, 0.4] {
                let adv = pgd_attack(&m, &x, &labels, &AttackConfig::new(eps)).unwrap();
                for (a, b) in adv.as_slice().iter().zip(x.as_slice()) {
                    assert!((a - b).abs() <= eps + 1e-15 && (0.0..=1.0).contains(a));
                }
            }
        }
    }

    #[test]
    fn constant_model_is_unaffected() {
        let m = Classifier::new(Mlp::zeros(&[5, 3], Activation::Relu).unwrap(), Head::Evidential).unwrap();
        let x = inputs(6, 1);
        let data = PartialDataset::supervised(x.clone(), vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        let sweep = attack_sweep(&m, &data, &[0.0, 0.2]).unwrap();
        assert_eq!(sweep[0].accuracy, sweep[1].accuracy);
        let unlabeled = PartialDataset::new(x, vec![true; 18], 3, None).unwrap();
        assert!(attack_sweep(&m, &unlabeled, &[0.1]).is_err());
    }

    #[test]
    fn sweep_at_zero_equals_clean_accuracy() {
        let m = random_model(7, Head::Evidential);
        let x = inputs(30, 8);
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let data = PartialDataset::supervised(x.clone(), labels.clone(), 3).unwrap();
        let sweep = attack_sweep(&m, &data, &[0.0]).unwrap();
        assert_eq!(sweep[0].accuracy, accuracy(&m, &x, &labels).unwrap());
    }
}
