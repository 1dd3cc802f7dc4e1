//! Evidential partial-label learning.
//!
//! A feed-forward network emits non-negative class evidence, which is read as
//! a Dirichlet distribution / multinomial opinion. Label weights over each
//! instance's candidate set are fitted by an expected squared error and then
//! re-set to their closed-form optimum after every epoch.
//!
//! The crate is `no_std` (with `alloc`). Disable the default `std` feature to
//! build for targets without an operating system; enabling it only turns on
//! runtime CPU feature detection in the matrix kernels.
//!
//! Layout:
//!
//! - [`tensor`], [`nn`], [`optim`]: dense matrices, the MLP and Adam.
//! - [`opinion`]: multinomial opinions and Dirichlet moments.
//! - [`pll`]: label weights, losses, update rules and the training loop.
//! - [`data`]: partially labeled datasets and instance-dependent noise.
//! - [`eval`]: accuracy, entropy-based OOD statistics and PGD attacks.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod opinion;
pub mod optim;
pub mod pll;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Classifier, Ensemble, Head, Predictor};
pub use tensor::DenseMatrix;
