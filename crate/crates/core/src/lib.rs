//! Texture-feature extraction and classification benchmark.
//!
//! Extractors ([`lbp`], [`hog`]) turn grayscale images into fixed-length
//! vectors; [`classifiers`] holds an RBF SVM, a CART tree and an MLP; [`eval`]
//! runs k-fold cross-validation and renders result tables. Feature vectors
//! cross process and language boundaries through the [`featstore`] text format.

pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod featstore;
pub mod features;
pub mod hog;
pub mod lbp;
pub mod synth;

pub use classifiers::{Classifier, ClassifierSpec, Model, TrainedModel};
pub use dataset::{GrayImage, LabeledImageSet, Layout};
pub use error::{Error, Result};
pub use eval::{EvalReport, FoldPlan, cross_validate, kfold_split};
pub use featstore::{FeatureMatrix, FeatureMeta};
pub use features::Extractor;
