//! Multinomial logistic regression with an L1 penalty on non-intercept
//! coefficients, fitted by proximal gradient (ISTA) with backtracking line
//! search. The last class is the reference (its score is fixed at 0).
//! Categorical inputs are one-hot encoded; continuous inputs are z-scored
//! with the scaling constants kept in the model.
//!
//! Also hosts the unpenalized binary IRLS fit used by risk attribution.

use serde::{Deserialize, Serialize};

use super::features::{FeatureColumn, FeatureFrame};
use crate::stats::cholesky_solve;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticParams {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            lambda: 0.01,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

/// Layout of the dense design row built from a feature frame: one-hot blocks
/// for categorical columns, a single z-scored entry for continuous ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignLayout {
    pub blocks: Vec<DesignBlock>,
    pub width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DesignBlock {
    OneHot { offset: usize, width: usize },
    Scaled { offset: usize, mean: f64, sd: f64 },
}

impl DesignLayout {
    pub fn fit(frame: &FeatureFrame) -> DesignLayout {
        let mut blocks = Vec::with_capacity(frame.cols.len());
        let mut offset = 0;
        for col in &frame.cols {
            match col {
                FeatureColumn::Cat { n_levels, .. } => {
                    blocks.push(DesignBlock::OneHot {
                        offset,
                        width: *n_levels,
                    });
                    offset += n_levels;
                }
                FeatureColumn::Num(vals) => {
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let var =
                        vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
                    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                    blocks.push(DesignBlock::Scaled { offset, mean, sd });
                    offset += 1;
                }
            }
        }
        DesignLayout {
            blocks,
            width: offset,
        }
    }

    /// Dense design matrix (row-major, n x width). Levels outside the one-hot
    /// width (unseen at training time) contribute an all-zero block.
    pub fn build(&self, frame: &FeatureFrame) -> Vec<f64> {
        let n = frame.n;
        let mut x = vec![0.0_f64; n * self.width];
        for (col, block) in frame.cols.iter().zip(&self.blocks) {
            match (col, block) {
                (FeatureColumn::Cat { values, .. }, DesignBlock::OneHot { offset, width }) => {
                    for (i, &v) in values.iter().enumerate() {
                        if (v as usize) < *width {
                            x[i * self.width + offset + v as usize] = 1.0;
                        }
                    }
                }
                (FeatureColumn::Num(vals), DesignBlock::Scaled { offset, mean, sd }) => {
                    for (i, &v) in vals.iter().enumerate() {
                        x[i * self.width + offset] = (v - mean) / sd;
                    }
                }
                _ => unreachable!("layout built from a frame of the same shape"),
            }
        }
        x
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub layout: DesignLayout,
    pub n_classes: usize,
    /// (n_classes - 1) x (width + 1) coefficients, intercept first.
    pub coef: Vec<f64>,
    /// Training objective per accepted iteration (diagnostic).
    pub objective_trace: Vec<f64>,
}

/// Mean multinomial negative log-likelihood and its gradient with respect to
/// the coefficient matrix `w` ((k-1) x (d+1), intercept first, last class as
/// reference). `x` is row-major n x d.
pub fn multinomial_nll_grad(
    x: &[f64],
    d: usize,
    y: &[u32],
    n_classes: usize,
    w: &[f64],
) -> (f64, Vec<f64>) {
    let n = y.len();
    let km1 = n_classes - 1;
    let stride = d + 1;
    assert_eq!(w.len(), km1 * stride);
    let mut nll = 0.0;
    let mut grad = vec![0.0_f64; km1 * stride];
    let mut scores = vec![0.0_f64; n_classes];
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        for c in 0..km1 {
            let wc = &w[c * stride..(c + 1) * stride];
            scores[c] = wc[0] + xi.iter().zip(&wc[1..]).map(|(a, b)| a * b).sum::<f64>();
        }
        scores[km1] = 0.0;
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            z += *s;
        }
        let yi = y[i] as usize;
        nll += -(scores[yi] / z).ln();
        for c in 0..km1 {
            let p = scores[c] / z;
            let resid = p - if yi == c { 1.0 } else { 0.0 };
            let gc = &mut grad[c * stride..(c + 1) * stride];
            gc[0] += resid;
            for (g, &xv) in gc[1..].iter_mut().zip(xi) {
                *g += resid * xv;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= inv_n);
    (nll * inv_n, grad)
}

fn l1_penalty(w: &[f64], stride: usize, lambda: f64) -> f64 {
    w.iter()
        .enumerate()
        .filter(|(i, _)| i % stride != 0)
        .map(|(_, v)| v.abs())
        .sum::<f64>()
        * lambda
}

impl LogisticModel {
    pub fn fit(frame: &FeatureFrame, y: &[u32], n_classes: usize, params: &LogisticParams) -> LogisticModel {
        let layout = DesignLayout::fit(frame);
        let d = layout.width;
        let x = layout.build(frame);
        let km1 = n_classes - 1;
        let stride = d + 1;
        let mut w = vec![0.0_f64; km1 * stride];
        let mut trace = Vec::new();
        let (mut f, mut grad) = multinomial_nll_grad(&x, d, y, n_classes, &w);
        trace.push(f + l1_penalty(&w, stride, params.lambda));
        let mut step = 1.0_f64;
        for _ in 0..params.max_iter {
            // backtracking line search on the smooth part
            let (w_next, f_next) = loop {
                let mut cand = vec![0.0_f64; w.len()];
                for (i, c) in cand.iter_mut().enumerate() {
                    let raw = w[i] - step * grad[i];
                    *c = if i % stride == 0 {
                        raw // intercepts unpenalized
                    } else {
                        soft_threshold(raw, step * params.lambda)
                    };
                }
                let (f_cand, _) = multinomial_nll_grad(&x, d, y, n_classes, &cand);
                let mut quad = 0.0;
                let mut lin = 0.0;
                for i in 0..w.len() {
                    let delta = cand[i] - w[i];
                    lin += grad[i] * delta;
                    quad += delta * delta;
                }
                if f_cand <= f + lin + quad / (2.0 * step) + 1e-12 {
                    break (cand, f_cand);
                }
                step *= 0.5;
                if step < 1e-12 {
                    break (w.clone(), f);
                }
            };
            let max_change = w
                .iter()
                .zip(&w_next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            w = w_next;
            f = f_next;
            trace.push(f + l1_penalty(&w, stride, params.lambda));
            if max_change < params.tol {
                break;
            }
            let g = multinomial_nll_grad(&x, d, y, n_classes, &w).1;
            grad = g;
            step = (step * 2.0).min(1.0); // allow recovery after backtracks
        }
        LogisticModel {
            layout,
            n_classes,
            coef: w,
            objective_trace: trace,
        }
    }

    pub fn predict_proba(&self, frame: &FeatureFrame) -> Vec<Vec<f64>> {
        let d = self.layout.width;
        let x = self.layout.build(frame);
        let km1 = self.n_classes - 1;
        let stride = d + 1;
        (0..frame.n)
            .map(|i| {
                let xi = &x[i * d..(i + 1) * d];
                let mut scores = vec![0.0_f64; self.n_classes];
                for c in 0..km1 {
                    let wc = &self.coef[c * stride..(c + 1) * stride];
                    scores[c] =
                        wc[0] + xi.iter().zip(&wc[1..]).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax(&mut scores);
                scores
            })
            .collect()
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn softmax(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        z += *s;
    }
    scores.iter_mut().for_each(|s| *s /= z);
}

/// Result of the unpenalized binary logistic IRLS fit.
#[derive(Debug, Clone)]
pub struct IrlsFit {
    /// Coefficients including the leading intercept.
    pub coef: Vec<f64>,
    /// Standard errors from the inverse observed information.
    pub se: Vec<f64>,
    pub converged: bool,
    /// Set when the ridge fallback was engaged (separation or rank trouble).
    pub ridge_applied: bool,
}

/// Iteratively reweighted least squares for binary logistic regression.
/// `x` is row-major n x d (no intercept column; one is prepended).
/// Falls back to a small ridge when the weighted normal equations are not
/// positive definite or the fit diverges (perfect separation).
pub fn logistic_irls(x: &[f64], d: usize, y: &[f64], ridge: f64) -> IrlsFit {
    let n = y.len();
    let dd = d + 1;
    let mut beta = vec![0.0_f64; dd];
    let mut ridge_applied = false;
    let mut converged = false;
    let row = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x[i * d + (j - 1)]
        }
    };
    let mut info = vec![0.0_f64; dd * dd];
    for iter in 0..100 {
        // score and information at current beta
        let mut score = vec![0.0_f64; dd];
        info.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let eta: f64 = (0..dd).map(|j| beta[j] * row(i, j)).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            let wgt = (p * (1.0 - p)).max(1e-10);
            for j in 0..dd {
                score[j] += (y[i] - p) * row(i, j);
                for l in 0..=j {
                    info[j * dd + l] += wgt * row(i, j) * row(i, l);
                }
            }
        }
        for j in 0..dd {
            for l in j + 1..dd {
                info[j * dd + l] = info[l * dd + j];
            }
        }
        let mut lhs = info.clone();
        if ridge_applied {
            for j in 0..dd {
                lhs[j * dd + j] += ridge;
                score[j] -= ridge * beta[j];
            }
        }
        let mut delta = match cholesky_solve(&lhs, &score) {
            Some(delta) => delta,
            None => {
                if ridge_applied {
                    break;
                }
                ridge_applied = true;
                continue;
            }
        };
        // damp outsized Newton steps so separation cannot overflow
        let raw_max = delta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if raw_max > 10.0 {
            let scale = 10.0 / raw_max;
            delta.iter_mut().for_each(|v| *v *= scale);
        }
        let max_delta = delta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for j in 0..dd {
            beta[j] += delta[j];
        }
        if max_delta < 1e-8 {
            converged = true;
            break;
        }
        // diverging coefficients signal separation; restart with ridge
        if !ridge_applied && (iter > 30 || beta.iter().any(|b| b.abs() > 50.0)) {
            ridge_applied = true;
            beta.iter_mut().for_each(|b| *b = 0.0);
        }
    }
    // standard errors from the (possibly ridged) information matrix
    let mut lhs = info.clone();
    if ridge_applied {
        for j in 0..dd {
            lhs[j * dd + j] += ridge;
        }
    }
    let mut se = vec![f64::NAN; dd];
    for j in 0..dd {
        let mut e = vec![0.0_f64; dd];
        e[j] = 1.0;
        if let Some(col) = cholesky_solve(&lhs, &e) {
            if col[j] > 0.0 {
                se[j] = col[j].sqrt();
            }
        }
    }
    IrlsFit {
        coef: beta,
        se,
        converged,
        ridge_applied,
    }
}
