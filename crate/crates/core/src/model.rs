//! Trained predictors: a single network with its output head, and ensembles.

use alloc::vec;
use alloc::vec::Vec;

use crate::nn::{Activation, Mlp};
use crate::pll::loss::{softmax_into, squared_terms};
use crate::tensor::DenseMatrix;
use crate::{Error, Result};

/// How network outputs turn into class probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Outputs are evidence; probabilities are the Dirichlet mean `(e+1)/‖e+1‖₁`.
    Evidential,
    /// Outputs are logits; probabilities are their softmax.
    Softmax,
}

/// Anything that maps features to class probabilities and can supply the
/// input gradient of its training-loss form against hard labels.
pub trait Predictor {
    fn num_classes(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn predict_proba(&self, features: &DenseMatrix) -> Result<DenseMatrix>;
    /// Sum over rows of the loss against one-hot `labels`, and its gradient
    /// with respect to `features`.
    fn loss_input_gradient(&self, features: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    mlp: Mlp,
    head: Head,
}

impl Classifier {
    pub fn new(mlp: Mlp, head: Head) -> Result<Self> {
        if head == Head::Evidential && mlp.output_activation() != Activation::Relu {
            return Err(Error::Config(
                "an evidential head needs a rectified output layer".into(),
            ));
        }
        Ok(Self { mlp, head })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn into_mlp(self) -> Mlp {
        self.mlp
    }

    pub fn head(&self) -> Head {
        self.head
    }

    /// Raw network outputs (evidence or logits).
    pub fn outputs(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        self.mlp.forward(features)
    }

    /// Converts raw outputs into probabilities in place.
    pub fn outputs_to_proba(&self, outputs: &mut DenseMatrix) {
        let k = outputs.cols();
        let mut tmp = vec![0.0; k];
        for r in 0..outputs.rows() {
            let row = outputs.row_mut(r);
            match self.head {
                Head::Evidential => {
                    let s: f64 = row.iter().map(|e| e + 1.0).sum();
                    for v in row.iter_mut() {
                        *v = (*v + 1.0) / s;
                    }
                }
                Head::Softmax => {
                    softmax_into(row, &mut tmp);
                    row.copy_from_slice(&tmp);
                }
            }
        }
    }
}

fn check_labels(k: usize, rows: usize, labels: &[usize]) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Shape {
            context: "labels",
            expected: (rows, 1),
            found: (labels.len(), 1),
        });
    }
    if let Some(i) = labels.iter().position(|&y| y >= k) {
        return Err(Error::data(i, alloc::format!("label {} out of range", labels[i])));
    }
    Ok(())
}

impl Predictor for Classifier {
    fn num_classes(&self) -> usize {
        self.mlp.output_dim()
    }

    fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    fn predict_proba(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.mlp.forward(features)?;
        self.outputs_to_proba(&mut out);
        Ok(out)
    }

    fn loss_input_gradient(&self, features: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
        let k = self.num_classes();
        check_labels(k, features.rows(), labels)?;
        let cache = self.mlp.forward_cached(features)?;
        let out = cache.output();
        let mut grad = DenseMatrix::zeros(out.rows(), k);
        let mut target = vec![0.0; k];
        let mut probs = vec![0.0; k];
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            target.iter_mut().for_each(|t| *t = 0.0);
            target[y] = 1.0;
            let g = grad.row_mut(r);
            match self.head {
                Head::Evidential => {
                    let (err, var) = squared_terms(out.row(r), &target, Some(g));
                    total += err + var;
                }
                Head::Softmax => {
                    softmax_into(out.row(r), &mut probs);
                    total -= libm::log(probs[y].max(f64::MIN_POSITIVE));
                    for (gj, pj) in g.iter_mut().zip(&probs) {
                        *gj = *pj;
                    }
                    g[y] -= 1.0;
                }
            }
        }
        let grads = self.mlp.backward_cached(&cache, &grad)?;
        Ok((total, grads.input))
    }
}

/// Equal-weight ensemble; probabilities are averaged across members.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Classifier>,
}

impl Ensemble {
    pub fn new(members: Vec<Classifier>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Config("an ensemble needs at least one member".into()))?;
        let (d, k) = (first.input_dim(), first.num_classes());
        if members.iter().any(|m| m.input_dim() != d || m.num_classes() != k) {
            return Err(Error::Config(
                "ensemble members disagree on input or class count".into(),
            ));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Classifier] {
        &self.members
    }
}

impl Predictor for Ensemble {
    fn num_classes(&self) -> usize {
        self.members[0].num_classes()
    }

    fn input_dim(&self) -> usize {
        self.members[0].input_dim()
    }

    fn predict_proba(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        let mut acc = self.members[0].predict_proba(features)?;
        for m in &self.members[1..] {
            let p = m.predict_proba(features)?;
            for (a, b) in acc.as_mut_slice().iter_mut().zip(p.as_slice()) {
                *a += b;
            }
        }
        let scale = 1.0 / self.members.len() as f64;
        acc.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
        Ok(acc)
    }

    /// Gradient of the mean member loss.
    fn loss_input_gradient(&self, features: &DenseMatrix, labels: &[usize]) -> Result<(f64, DenseMatrix)> {
        let scale = 1.0 / self.members.len() as f64;
        let mut total = 0.0;
        let mut acc = DenseMatrix::zeros(features.rows(), features.cols());
        for m in &self.members {
            let (l, g) = m.loss_input_gradient(features, labels)?;
            total += l * scale;
            for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += b * scale;
            }
        }
        Ok((total, acc))
    }
}
