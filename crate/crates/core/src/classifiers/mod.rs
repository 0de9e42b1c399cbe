//! The three classifiers of the benchmark behind one training interface.

pub mod mlp;
pub mod svm;
pub mod tree;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mlp::{MlpModel, MlpParams};
pub use svm::{Kernel, SvmModel, SvmParams};
pub use tree::{TreeModel, TreeParams};

/// A trained model that maps one feature vector to a class index.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize>;

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        check_dim(self.dim(), x.ncols())?;
        x.rows().into_iter().map(|r| self.predict_one(r)).collect()
    }
}

/// Something that can be fitted to labelled samples.
pub trait Classifier: Send + Sync {
    /// Short name used in reports (`svm`, `tree`, `mlp`, ...).
    fn name(&self) -> String;

    /// Hyperparameters as a single line, used in reports.
    fn describe(&self) -> String;

    /// Serialised specification, when the classifier can be rebuilt from one.
    fn spec_json(&self) -> Option<serde_json::Value> {
        None
    }

    /// Fits on rows of `x` with labels `y`, each `< n_classes`.
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<Box<dyn Model>>;
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

pub(crate) fn check_training_data(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::param("no training samples"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("training features must be finite"));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::param(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: impl IntoIterator<Item = T>) -> usize {
    let mut best = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

/// Classifier choice plus hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierSpec {
    Svm(SvmParams),
    Tree(TreeParams),
    Mlp(MlpParams),
}

impl ClassifierSpec {
    pub fn train(&self, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<TrainedModel> {
        Ok(match self {
            ClassifierSpec::Svm(p) => TrainedModel::Svm(svm::train_svm(x, y, n_classes, p)?),
            ClassifierSpec::Tree(p) => TrainedModel::Tree(tree::train_tree(x, y, n_classes, p)?),
            ClassifierSpec::Mlp(p) => TrainedModel::Mlp(mlp::train_mlp(x, y, n_classes, p)?),
        })
    }
}

impl Classifier for ClassifierSpec {
    fn name(&self) -> String {
        match self {
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Tree(_) => "tree",
            ClassifierSpec::Mlp(_) => "mlp",
        }
        .to_string()
    }

    fn describe(&self) -> String {
        match self {
            ClassifierSpec::Svm(p) => p.describe(),
            ClassifierSpec::Tree(p) => p.describe(),
            ClassifierSpec::Mlp(p) => p.describe(),
        }
    }

    fn spec_json(&self) -> Option<serde_json::Value> {
        serde_json::to_value(self).ok()
    }

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<Box<dyn Model>> {
        Ok(Box::new(self.train(x, y, n_classes)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Svm(SvmModel),
    Tree(TreeModel),
    Mlp(MlpModel),
}

impl Model for TrainedModel {
    fn dim(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.dim(),
            TrainedModel::Tree(m) => m.dim(),
            TrainedModel::Mlp(m) => m.dim(),
        }
    }

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        match self {
            TrainedModel::Svm(m) => m.predict_one(x),
            TrainedModel::Tree(m) => m.predict_one(x),
            TrainedModel::Mlp(m) => m.predict_one(x),
        }
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        match self {
            TrainedModel::Svm(m) => m.predict(x),
            TrainedModel::Tree(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        }
    }
}

/// Per-feature z-scoring fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 0.0 { sd } else { 1.0 }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.mean.len(), x.ncols())?;
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

/// A classifier with optional standardisation in front of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub standardize: bool,
    pub classifier: ClassifierSpec,
}

impl From<ClassifierSpec> for Pipeline {
    fn from(classifier: ClassifierSpec) -> Self {
        Pipeline {
            standardize: false,
            classifier,
        }
    }
}

impl Pipeline {
    pub fn train(&self, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<TrainedPipeline> {
        if self.standardize {
            let scaler = Scaler::fit(x);
            let xs = scaler.transform(x)?;
            Ok(TrainedPipeline {
                model: self.classifier.train(xs.view(), y, n_classes)?,
                scaler: Some(scaler),
            })
        } else {
            Ok(TrainedPipeline {
                scaler: None,
                model: self.classifier.train(x, y, n_classes)?,
            })
        }
    }
}

impl Classifier for Pipeline {
    fn name(&self) -> String {
        self.classifier.name()
    }

    fn describe(&self) -> String {
        if self.standardize {
            format!("{};standardize=true", self.classifier.describe())
        } else {
            self.classifier.describe()
        }
    }

    fn spec_json(&self) -> Option<serde_json::Value> {
        serde_json::to_value(self).ok()
    }

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<Box<dyn Model>> {
        Ok(Box::new(self.train(x, y, n_classes)?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub scaler: Option<Scaler>,
    pub model: TrainedModel,
}

impl Model for TrainedPipeline {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        match &self.scaler {
            Some(s) => {
                let xs = s.transform(x.insert_axis(ndarray::Axis(0)))?;
                self.model.predict_one(xs.row(0))
            }
            None => self.model.predict_one(x),
        }
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        check_dim(self.dim(), x.ncols())?;
        match &self.scaler {
            Some(s) => self.model.predict(s.transform(x)?.view()),
            None => self.model.predict(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax([1, 3, 3, 2]), 1);
        assert_eq!(argmax([0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(Vec::<f64>::new()), 0);
    }

    #[test]
    fn spec_serde_is_tagged() {
        let spec = ClassifierSpec::Tree(TreeParams::default());
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"tree\""));
        let back: ClassifierSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn scaler_zero_mean_unit_variance() {
        let x = ndarray::array![[1.0, 5.0], [3.0, 5.0]];
        let s = Scaler::fit(x.view());
        let t = s.transform(x.view()).unwrap();
        assert_eq!(t, ndarray::array![[-1.0, 0.0], [1.0, 0.0]]);
        assert!(s.transform(ndarray::array![[1.0]].view()).is_err());
    }
}
