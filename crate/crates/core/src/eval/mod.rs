//! k-fold cross-validation, learning curves and result reports.

mod folds;
pub mod report;

use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, Model};
use crate::error::{Error, Result};
use crate::featstore::FeatureMatrix;

pub use folds::{FoldPlan, kfold_split};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_ms: f64,
    pub predict_ms: f64,
}

/// Everything needed to re-run an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub extractor: String,
    pub extractor_params: String,
    pub source: Option<String>,
    pub classifier: String,
    pub classifier_params: String,
    /// Full classifier specification when the classifier is serialisable.
    pub classifier_spec: Option<serde_json::Value>,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunEcho,
    pub dim: usize,
    pub n_samples: usize,
    pub class_names: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    /// Sample (n − 1) standard deviation of the fold accuracies.
    pub std: f64,
    /// `confusion[true][predicted]`, summed over all test folds.
    pub confusion: Vec<Vec<usize>>,
    pub wall_ms: f64,
}

impl EvalReport {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }

    /// `mean ± std` to two decimals.
    pub fn summary(&self) -> String {
        format!("{:.2} ± {:.2}%", self.mean, self.std)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    let correct = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    100.0 * correct as f64 / truth.len().max(1) as f64
}

struct FoldOutcome {
    result: FoldResult,
    model: Box<dyn Model>,
    truth: Vec<usize>,
    predicted: Vec<usize>,
}

fn run_fold(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    clf: &dyn Classifier,
    train: &[usize],
    test: &[usize],
    fold: usize,
) -> Result<FoldOutcome> {
    let wrap = |e: Error| Error::Fold {
        fold,
        source: Box::new(e),
    };
    if test.is_empty() {
        return Err(wrap(Error::param("empty test fold")));
    }
    let tx = x.select(Axis(0), train);
    let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let t0 = Instant::now();
    let model = clf.fit(tx.view(), &ty, n_classes).map_err(wrap)?;
    let train_ms = t0.elapsed().as_secs_f64() * 1e3;

    let vx = x.select(Axis(0), test);
    let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let t1 = Instant::now();
    let predicted = model.predict(vx.view()).map_err(wrap)?;
    let predict_ms = t1.elapsed().as_secs_f64() * 1e3;

    Ok(FoldOutcome {
        result: FoldResult {
            fold,
            accuracy: accuracy(&truth, &predicted),
            n_train: train.len(),
            n_test: test.len(),
            train_ms,
            predict_ms,
        },
        model,
        truth,
        predicted,
    })
}

/// Trains on all folds but one and tests on the held-out fold, for every fold.
/// Folds run in parallel; results are reported in fold order.
pub fn cross_validate(features: &FeatureMatrix, clf: &dyn Classifier, plan: &FoldPlan) -> Result<EvalReport> {
    if plan.n_samples() != features.n_samples() {
        return Err(Error::Dimension {
            expected: features.n_samples(),
            got: plan.n_samples(),
        });
    }
    let (y, class_names) = features.encode_labels();
    let n_classes = class_names.len();
    let x = features.data();
    let start = Instant::now();
    let outcomes = (0..plan.k)
        .into_par_iter()
        .map(|f| run_fold(x, &y, n_classes, clf, &plan.train_indices(f), &plan.test_indices(f), f))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut confusion = vec![vec![0; n_classes]; n_classes];
    for o in &outcomes {
        for (&t, &p) in o.truth.iter().zip(&o.predicted) {
            confusion[t][p] += 1;
        }
    }
    let folds: Vec<FoldResult> = outcomes.into_iter().map(|o| o.result).collect();
    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    Ok(EvalReport {
        config: RunEcho {
            extractor: features.meta.extractor.clone(),
            extractor_params: features.meta.params.clone(),
            source: features.meta.source.clone(),
            classifier: clf.name(),
            classifier_params: clf.describe(),
            classifier_spec: clf.spec_json(),
            k: plan.k,
            seed: plan.seed,
            stratified: plan.stratified,
        },
        dim: features.dim(),
        n_samples: features.n_samples(),
        class_names,
        mean: mean(&accs),
        std: sample_std(&accs),
        folds,
        confusion,
        wall_ms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    /// Mean training-subset size across folds.
    pub train_size: usize,
    pub train_scores: Vec<f64>,
    pub test_scores: Vec<f64>,
}

impl CurvePoint {
    pub fn train_mean(&self) -> f64 {
        mean(&self.train_scores)
    }

    pub fn train_std(&self) -> f64 {
        sample_std(&self.train_scores)
    }

    pub fn test_mean(&self) -> f64 {
        mean(&self.test_scores)
    }

    pub fn test_std(&self) -> f64 {
        sample_std(&self.test_scores)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub extractor: String,
    pub classifier: String,
    pub points: Vec<CurvePoint>,
}

/// Class-stratified subset of `train`: `round(fraction · n_c)` samples of each
/// class, drawn by a seeded shuffle and returned in ascending index order.
pub fn stratified_subset(train: &[usize], y: &[usize], fraction: f64, seed: u64) -> Vec<usize> {
    if fraction >= 1.0 {
        return train.to_vec();
    }
    let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &i in train {
        by_class.entry(y[i]).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let take = (fraction * members.len() as f64).round() as usize;
        out.extend_from_slice(&members[..take.min(members.len())]);
    }
    out.sort_unstable();
    out
}

/// Train/test accuracy as a function of the training-set fraction, over the
/// folds of `plan`.
pub fn learning_curve(
    features: &FeatureMatrix,
    clf: &dyn Classifier,
    plan: &FoldPlan,
    fractions: &[f64],
) -> Result<LearningCurve> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::param(format!("training fraction {f} outside (0, 1]")));
    }
    if plan.n_samples() != features.n_samples() {
        return Err(Error::Dimension {
            expected: features.n_samples(),
            got: plan.n_samples(),
        });
    }
    let (y, class_names) = features.encode_labels();
    let n_classes = class_names.len();
    let x = features.data();

    let mut points = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        let per_fold = (0..plan.k)
            .into_par_iter()
            .map(|fold| {
                let train = plan.train_indices(fold);
                let seed = plan.seed ^ ((fi as u64) << 32) ^ fold as u64;
                let subset = stratified_subset(&train, &y, fraction, seed);
                if subset.len() < n_classes {
                    return Err(Error::param(format!(
                        "fraction {fraction} leaves {} training samples for {n_classes} classes",
                        subset.len()
                    )));
                }
                let test = plan.test_indices(fold);
                let outcome = run_fold(x, &y, n_classes, clf, &subset, &test, fold)?;
                let tx = x.select(Axis(0), &subset);
                let ty: Vec<usize> = subset.iter().map(|&i| y[i]).collect();
                let train_acc = accuracy(&ty, &outcome.model.predict(tx.view())?);
                Ok((subset.len(), train_acc, outcome.result.accuracy))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        points.push(CurvePoint {
            fraction,
            train_size: per_fold.iter().map(|p| p.0).sum::<usize>() / plan.k,
            train_scores: per_fold.iter().map(|p| p.1).collect(),
            test_scores: per_fold.iter().map(|p| p.2).collect(),
        });
    }
    Ok(LearningCurve {
        extractor: features.meta.extractor.clone(),
        classifier: clf.name(),
        points,
    })
}
