//! Soft-margin kernel SVM trained with SMO, one-vs-one for multiclass.
//!
//! Each binary problem solves the dual
//!
//! ```text
//! min ½ αᵀQα − eᵀα   s.t.  yᵀα = 0,  0 ≤ α ≤ C,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! using maximal-violating-pair selection with second-order information for
//! the second index. Iteration stops once the KKT gap falls below `tol`.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Model, argmax, check_dim, check_training_data};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(−γ‖x−z‖²)`
    Rbf,
    /// `x·z`
    Linear,
    /// `(γ x·z + coef0)^degree`
    Polynomial { degree: u32, coef0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub kernel: Kernel,
    pub tol: f64,
    /// Iteration cap per binary problem, in multiples of its sample count.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 2.5,
            gamma: 1.5e-6,
            kernel: Kernel::Rbf,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param(format!("SVM C must be > 0, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("SVM gamma must be > 0, got {}", self.gamma)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::param("SVM tol must be > 0"));
        }
        if self.max_passes == 0 {
            return Err(Error::param("SVM max_passes must be >= 1"));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let kernel = match self.kernel {
            Kernel::Rbf => "rbf".to_string(),
            Kernel::Linear => "linear".to_string(),
            Kernel::Polynomial { degree, coef0 } => format!("poly(degree={degree};coef0={coef0})"),
        };
        format!(
            "kernel={kernel};C={};gamma={};tol={};max_passes={}",
            self.c, self.gamma, self.tol, self.max_passes
        )
    }

    pub fn kernel_value(&self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> f64 {
        match self.kernel {
            Kernel::Rbf => (-self.gamma * squared_distance(x, z)).exp(),
            Kernel::Linear => x.dot(&z),
            Kernel::Polynomial { degree, coef0 } => (self.gamma * x.dot(&z) + coef0).powi(degree as i32),
        }
    }
}

fn squared_distance(x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> f64 {
    x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Gaussian RBF kernel `exp(−γ‖x−z‖²)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    check_dim(x.len(), z.len())?;
    let d: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d).exp())
}

/// Kernel matrix between every row of `a` and every row of `b`.
pub fn kernel_matrix(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, params: &SvmParams) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(a.axis_iter(Axis(0)).into_par_iter())
        .for_each(|(mut row, x)| {
            for (o, z) in row.iter_mut().zip(b.rows()) {
                *o = params.kernel_value(x, z);
            }
        });
    out
}

/// Dual solution of one binary problem.
#[derive(Clone, Debug)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) − rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO on a precomputed kernel. `kernel(i, j)` must be symmetric; `y` is ±1.
pub fn solve_binary(
    n: usize,
    kernel: impl Fn(usize, usize) -> f64,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
) -> BinarySolution {
    let diag: Vec<f64> = (0..n).map(|i| kernel(i, i)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let yg = y[t] * grad[t];
                if yg > gmax2 {
                    gmax2 = yg;
                }
                let b = gmax + yg;
                if b > 0.0 {
                    let mut a = diag[i] + diag[t] - 2.0 * kernel(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let kij = kernel(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kernel(t, i) * di + y[j] * kernel(t, j) * dj);
        }
    }

    let rho = compute_rho(&alpha, &grad, y, c);
    BinarySolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// One pairwise machine: positive class `pos` (the lower index), negative `neg`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairModel {
    pub pos: usize,
    pub neg: usize,
    /// Row indices into [`SvmModel::support`].
    pub support: Vec<usize>,
    /// `α_i y_i` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub n_classes: usize,
    pub support: Array2<f64>,
    pub pairs: Vec<PairModel>,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support.ncols()
    }

    pub fn n_support(&self) -> usize {
        self.support.nrows()
    }

    fn kernel_row(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        self.support
            .rows()
            .into_iter()
            .map(|s| self.params.kernel_value(s, x))
            .collect()
    }

    /// Decision value of every pair machine for `x`.
    pub fn decision_values(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let k = self.kernel_row(x);
        Ok(self.pairs.iter().map(|p| pair_decision(p, &k)).collect())
    }

    fn vote(&self, decisions: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for (p, &f) in self.pairs.iter().zip(decisions) {
            if f >= 0.0 {
                votes[p.pos] += 1;
            } else {
                votes[p.neg] += 1;
            }
        }
        argmax(votes)
    }

    pub fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let d = self.decision_values(x)?;
        Ok(self.vote(&d))
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        check_dim(self.dim(), x.ncols())?;
        let k = kernel_matrix(x, self.support.view(), &self.params);
        Ok(k.rows()
            .into_iter()
            .map(|row| {
                let row = row.to_vec();
                let d: Vec<f64> = self.pairs.iter().map(|p| pair_decision(p, &row)).collect();
                self.vote(&d)
            })
            .collect())
    }
}

fn pair_decision(p: &PairModel, kernel_row: &[f64]) -> f64 {
    p.support
        .iter()
        .zip(&p.coef)
        .map(|(&s, &c)| c * kernel_row[s])
        .sum::<f64>()
        - p.rho
}

impl Model for SvmModel {
    fn dim(&self) -> usize {
        SvmModel::dim(self)
    }

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        SvmModel::predict_one(self, x)
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        SvmModel::predict(self, x)
    }
}

/// Trains `K(K−1)/2` pairwise machines over the classes present in `y`.
/// Classes (p, q), support vector rows, their signed coefficients and rho.
type PairSolution = (usize, usize, Vec<usize>, Vec<f64>, f64);

pub fn train_svm(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    check_training_data(x, y, n_classes)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in y.iter().enumerate() {
        members[l].push(i);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| !members[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::param("SVM training needs at least two classes"));
    }

    let gram = kernel_matrix(x, x, params);
    let pairs: Vec<(usize, usize)> = present
        .iter()
        .enumerate()
        .flat_map(|(a, &p)| present[a + 1..].iter().map(move |&q| (p, q)))
        .collect();

    let solved: Vec<PairSolution> = pairs
        .par_iter()
        .map(|&(p, q)| {
            let mut idx: Vec<usize> = members[p].iter().chain(&members[q]).copied().collect();
            idx.sort_unstable();
            let labels: Vec<f64> = idx.iter().map(|&i| if y[i] == p { 1.0 } else { -1.0 }).collect();
            let n = idx.len();
            let sol = solve_binary(
                n,
                |a, b| gram[[idx[a], idx[b]]],
                &labels,
                params.c,
                params.tol,
                params.max_passes.saturating_mul(n.max(1)),
            );
            if !sol.converged {
                log::warn!("SMO for classes ({p}, {q}) stopped after {} iterations", sol.iterations);
            }
            let (sv, coef): (Vec<usize>, Vec<f64>) = idx
                .iter()
                .zip(&sol.alpha)
                .zip(&labels)
                .filter(|((_, a), _)| **a > 0.0)
                .map(|((&i, &a), &l)| (i, a * l))
                .unzip();
            (p, q, sv, coef, sol.rho)
        })
        .collect();

    let mut used: Vec<usize> = solved.iter().flat_map(|s| s.2.iter().copied()).collect();
    used.sort_unstable();
    used.dedup();
    let support = x.select(Axis(0), &used);
    let pairs = solved
        .into_iter()
        .map(|(pos, neg, sv, coef, rho)| PairModel {
            pos,
            neg,
            support: sv
                .iter()
                .map(|i| used.binary_search(i).expect("support index"))
                .collect(),
            coef,
            rho,
        })
        .collect();
    Ok(SvmModel {
        params: params.clone(),
        n_classes,
        support,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rbf_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.5).unwrap(), 1.0);
        // |x − z|² = 4 = 1/γ
        let v = rbf_kernel(&[0.0, 0.0], &[2.0, 0.0], 0.25).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.3678794).abs() < 1e-7);
        assert!((rbf_kernel(&[0.0], &[100.0], 1e-12).unwrap() - 1.0).abs() < 1e-7);
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn linear_separable_toy() {
        let x = array![[0.0, 0.0], [1.0, 0.5], [0.5, 1.0], [3.0, 3.0], [4.0, 3.5], [3.5, 4.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let params = SvmParams {
            c: 10.0,
            gamma: 1.0,
            kernel: Kernel::Linear,
            ..Default::default()
        };
        let m = train_svm(x.view(), &y, 2, &params).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn xor_with_rbf() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [0, 0, 1, 1];
        let params = SvmParams {
            c: 10.0,
            gamma: 1.0,
            ..Default::default()
        };
        let m = train_svm(x.view(), &y, 2, &params).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), y);
        assert!(m.n_support() <= 4);
    }

    #[test]
    fn binary_prediction_is_sign_of_decision() {
        let x = array![[0.0], [0.2], [0.9], [1.1]];
        let y = [0, 0, 1, 1];
        let params = SvmParams {
            c: 1.0,
            gamma: 2.0,
            ..Default::default()
        };
        let m = train_svm(x.view(), &y, 2, &params).unwrap();
        for v in [-1.0, 0.1, 0.5, 0.6, 2.0] {
            let xv = array![v];
            let d = m.decision_values(xv.view()).unwrap()[0];
            let expected = if d >= 0.0 { 0 } else { 1 };
            assert_eq!(m.predict_one(xv.view()).unwrap(), expected);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(train_svm(x.view(), &[1, 1], 3, &SvmParams::default()).is_err());
        let bad = array![[f64::NAN], [1.0]];
        assert!(train_svm(bad.view(), &[0, 1], 2, &SvmParams::default()).is_err());
    }

    #[test]
    fn predict_checks_dimension() {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let m = train_svm(
            x.view(),
            &[0, 1],
            2,
            &SvmParams {
                gamma: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.predict_one(array![1.0].view()).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(
            SvmParams {
                c: 0.0,
                ..Default::default()
            }
            .validate()
            .is_err()
        );
        assert!(
            SvmParams {
                gamma: -1.0,
                ..Default::default()
            }
            .validate()
            .is_err()
        );
        assert!(
            SvmParams {
                tol: 0.0,
                ..Default::default()
            }
            .validate()
            .is_err()
        );
    }
}
