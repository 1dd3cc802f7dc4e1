use alloc::vec::Vec;

use crate::data::PartialDataset;
use crate::{Error, Result};

/// Tolerance on row sums of label weights.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_simplex(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(*x >= 0.0) || *x > 1.0 + SIMPLEX_TOLERANCE) {
        return Err(Error::domain("vector has entries outside [0, 1]"));
    }
    let s: f64 = v.iter().sum();
    if libm::fabs(s - 1.0) > SIMPLEX_TOLERANCE {
        return Err(Error::domain(alloc::format!("vector sums to {s}, not 1")));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = j;
        }
    }
    best
}

/// Row-stochastic `n × k` matrix supported on each row's candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWeights {
    num_classes: usize,
    data: Vec<f64>,
}

impl LabelWeights {
    /// Uniform weight over each candidate set.
    pub fn init(dataset: &PartialDataset) -> Result<Self> {
        Self::uniform_over(dataset.num_classes(), dataset.candidates())
    }

    /// Uniform weight over each row of a flat `n × k` candidate mask.
    pub fn uniform_over(num_classes: usize, mask: &[bool]) -> Result<Self> {
        if num_classes == 0 || mask.len() % num_classes != 0 {
            return Err(Error::Shape {
                context: "LabelWeights::uniform_over",
                expected: (mask.len() / num_classes.max(1), num_classes),
                found: (mask.len(), 1),
            });
        }
        let mut data = Vec::with_capacity(mask.len());
        for (i, row) in mask.chunks_exact(num_classes).enumerate() {
            let count = row.iter().filter(|&&c| c).count();
            if count == 0 {
                return Err(Error::data(i, "empty candidate set"));
            }
            let w = 1.0 / count as f64;
            data.extend(row.iter().map(|&c| if c { w } else { 0.0 }));
        }
        Ok(Self { num_classes, data })
    }

    /// Row-major `n × k` weights for `dataset`, checked with [`Self::validate`].
    pub fn from_vec(dataset: &PartialDataset, data: Vec<f64>) -> Result<Self> {
        let k = dataset.num_classes();
        if data.len() != dataset.len() * k {
            return Err(Error::Shape {
                context: "LabelWeights::from_vec",
                expected: (dataset.len(), k),
                found: (data.len() / k.max(1), k),
            });
        }
        let w = Self { num_classes: k, data };
        w.validate(dataset)?;
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.num_classes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Most-weighted class of instance `i` (lowest index on ties).
    pub fn argmax(&self, i: usize) -> usize {
        argmax(self.row(i))
    }

    /// Checks every row: on the simplex and zero outside its candidate set.
    pub fn validate(&self, dataset: &PartialDataset) -> Result<()> {
        if self.len() != dataset.len() || self.num_classes != dataset.num_classes() {
            return Err(Error::Shape {
                context: "LabelWeights::validate",
                expected: (dataset.len(), dataset.num_classes()),
                found: (self.len(), self.num_classes),
            });
        }
        for i in 0..self.len() {
            let row = self.row(i);
            check_simplex(row).map_err(|e| Error::data(i, alloc::format!("{e}")))?;
            if row.iter().zip(dataset.candidate_mask(i)).any(|(w, c)| !c && *w != 0.0) {
                return Err(Error::data(i, "weight outside candidate set"));
            }
        }
        Ok(())
    }
}
