//! L2-regularised binary logistic regression.
//!
//! Minimises `(1/M) Σ log(1 + exp(-yᵢ(w·xᵢ + b))) + (λ/2)‖w‖²` with labels
//! mapped from {0, 1} to {-1, +1}. The intercept is not penalised. Training
//! is deterministic: gradient sums use fixed row chunks combined in a fixed
//! order, so the result does not depend on the number of threads.
//!
//! The solver is limited-memory BFGS with Armijo backtracking. Internally
//! features are centred (the shift is folded into the intercept on return),
//! which leaves the minimiser unchanged and keeps the problem well
//! conditioned for 0/1 features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::matrix::Matrix;

/// Row access shared by dense and bit-packed feature matrices.
pub trait Design: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// `x_i · w`, accumulated left to right over columns.
    fn row_dot(&self, i: usize, w: &[f64]) -> f64;
    /// `acc += scale * x_i`.
    fn row_add(&self, i: usize, scale: f64, acc: &mut [f64]);
    fn all_finite(&self) -> bool;
}

impl Design for Matrix {
    fn n_rows(&self) -> usize {
        self.rows()
    }

    fn n_cols(&self) -> usize {
        self.cols()
    }

    #[inline]
    fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (x, wj) in self.row(i).iter().zip(w) {
            if *x != 0.0 {
                acc += x * wj;
            }
        }
        acc
    }

    #[inline]
    fn row_add(&self, i: usize, scale: f64, acc: &mut [f64]) {
        for (a, x) in acc.iter_mut().zip(self.row(i)) {
            if *x != 0.0 {
                *a += scale * x;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl Design for FeatureMatrix {
    fn n_rows(&self) -> usize {
        self.rows()
    }

    fn n_cols(&self) -> usize {
        self.cols()
    }

    #[inline]
    fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, &word) in self.row_words(i).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                acc += w[k * 64 + bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
        }
        acc
    }

    #[inline]
    fn row_add(&self, i: usize, scale: f64, acc: &mut [f64]) {
        for (k, &word) in self.row_words(i).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                acc[k * 64 + bits.trailing_zeros() as usize] += scale;
                bits &= bits - 1;
            }
        }
    }

    fn all_finite(&self) -> bool {
        true
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("need at least two examples, got {0}")]
    TooFewExamples(usize),
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("{rows} feature rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("features contain a non-finite value")]
    NonFinite,
    #[error("regularisation strength must be finite and non-negative, got {0}")]
    Lambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Defaults to 1/M when unset.
    pub lambda: Option<f64>,
    /// Stop once the gradient's infinity norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// L-BFGS memory.
    pub memory: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lambda: None,
            tol: 1e-8,
            max_iter: 10_000,
            memory: 10,
        }
    }
}

impl TrainOptions {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    /// Objective after each accepted step, starting from w = 0.
    pub losses: Vec<f64>,
}

impl LinearClassifier {
    #[inline]
    pub fn decision<D: Design + ?Sized>(&self, x: &D, i: usize) -> f64 {
        x.row_dot(i, &self.weights) + self.intercept
    }

    /// Predicted labels in {0, 1}; a zero margin goes to class 0.
    pub fn predict<D: Design + ?Sized>(&self, x: &D) -> Vec<u8> {
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| u8::from(self.decision(x, i) > 0.0))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Fraction of misclassified rows.
pub fn evaluate<D: Design + ?Sized>(model: &LinearClassifier, x: &D, y: &[u8]) -> f64 {
    assert_eq!(x.n_rows(), y.len(), "row/label count mismatch");
    if y.is_empty() {
        return 0.0;
    }
    let wrong = model.predict(x).iter().zip(y).filter(|(p, t)| p != t).count();
    wrong as f64 / y.len() as f64
}

const ROW_CHUNK: usize = 256;

#[inline]
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Objective evaluation over an optionally centred design.
struct Problem<'a, D: Design + ?Sized> {
    x: &'a D,
    y: Vec<f64>,
    center: Vec<f64>,
    lambda: f64,
}

struct Eval {
    loss: f64,
    /// Gradient with respect to (w, b) of the centred parameterisation.
    grad: Vec<f64>,
    /// Σ residuals; used to recover the uncentred gradient.
    resid_sum: f64,
}

impl<'a, D: Design + ?Sized> Problem<'a, D> {
    fn dim(&self) -> usize {
        self.x.n_cols() + 1
    }

    /// `params = [w, b]`, margin `w·(x - c) + b`.
    fn eval(&self, params: &[f64]) -> Eval {
        let d = self.x.n_cols();
        let m = self.x.n_rows();
        let (w, b) = params.split_at(d);
        let b = b[0];
        let shift = dot_seq(&self.center, w);
        let inv_m = 1.0 / m as f64;

        let partials: Vec<(f64, f64, Vec<f64>)> = (0..m.div_ceil(ROW_CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut g = vec![0.0; d];
                let mut loss = 0.0;
                let mut rsum = 0.0;
                for i in c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(m) {
                    let z = self.x.row_dot(i, w) - shift + b;
                    let yi = self.y[i];
                    loss += softplus(-yi * z);
                    let r = -yi * sigmoid(-yi * z);
                    rsum += r;
                    self.x.row_add(i, r, &mut g);
                }
                (loss, rsum, g)
            })
            .collect();
        let (loss, rsum, xt_r) = tree_sum(partials);

        let mut grad = Vec::with_capacity(d + 1);
        for j in 0..d {
            grad.push((xt_r[j] - self.center[j] * rsum) * inv_m + self.lambda * w[j]);
        }
        grad.push(rsum * inv_m);
        let reg = 0.5 * self.lambda * dot_seq(w, w);
        Eval {
            loss: loss * inv_m + reg,
            grad,
            resid_sum: rsum * inv_m,
        }
    }

    /// Infinity norm of the gradient in the caller's (uncentred) parameters.
    fn plain_grad_norm(&self, ev: &Eval) -> f64 {
        let d = self.x.n_cols();
        let mut norm = ev.resid_sum.abs();
        for j in 0..d {
            norm = norm.max((ev.grad[j] + self.center[j] * ev.resid_sum).abs());
        }
        norm
    }
}

fn tree_sum(mut parts: Vec<(f64, f64, Vec<f64>)>) -> (f64, f64, Vec<f64>) {
    if parts.is_empty() {
        return (0.0, 0.0, Vec::new());
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.0 += b.0;
                a.1 += b.1;
                for (x, y) in a.2.iter_mut().zip(&b.2) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn column_means<D: Design + ?Sized>(x: &D) -> Vec<f64> {
    let (m, d) = (x.n_rows(), x.n_cols());
    let partials: Vec<(f64, f64, Vec<f64>)> = (0..m.div_ceil(ROW_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = vec![0.0; d];
            for i in c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(m) {
                x.row_add(i, 1.0, &mut s);
            }
            (0.0, 0.0, s)
        })
        .collect();
    let (_, _, mut s) = tree_sum(partials);
    s.iter_mut().for_each(|v| *v /= m as f64);
    s
}

fn to_signed(y: &[u8]) -> Result<Vec<f64>, TrainError> {
    y.iter()
        .map(|&l| match l {
            0 => Ok(-1.0),
            1 => Ok(1.0),
            other => Err(TrainError::BadLabel(other)),
        })
        .collect()
}

/// Objective and gradient at `(w, b)` in the plain parameterisation, with
/// labels in {0, 1}. Exposed for gradient checks.
pub fn loss_and_gradient<D: Design + ?Sized>(
    x: &D,
    y: &[u8],
    weights: &[f64],
    intercept: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let problem = Problem {
        x,
        y: to_signed(y)?,
        center: vec![0.0; x.n_cols()],
        lambda,
    };
    let mut params = weights.to_vec();
    params.push(intercept);
    let ev = problem.eval(&params);
    Ok((ev.loss, ev.grad))
}

pub fn train<D: Design + ?Sized>(
    x: &D,
    y: &[u8],
    options: &TrainOptions,
) -> Result<(LinearClassifier, TrainReport), TrainError> {
    let m = x.n_rows();
    if m != y.len() {
        return Err(TrainError::LabelCount {
            rows: m,
            labels: y.len(),
        });
    }
    if m < 2 {
        return Err(TrainError::TooFewExamples(m));
    }
    let signed = to_signed(y)?;
    if signed.iter().all(|&s| s == signed[0]) {
        return Err(TrainError::SingleClass);
    }
    if !x.all_finite() {
        return Err(TrainError::NonFinite);
    }
    let lambda = options.lambda.unwrap_or(1.0 / m as f64);
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(TrainError::Lambda(lambda));
    }

    let problem = Problem {
        x,
        y: signed,
        center: column_means(x),
        lambda,
    };
    let (params, report) = lbfgs(&problem, options);
    let d = x.n_cols();
    let weights = params[..d].to_vec();
    let intercept = params[d] - dot_seq(&problem.center, &weights);
    Ok((
        LinearClassifier {
            weights,
            intercept,
            lambda,
        },
        report,
    ))
}

fn lbfgs<D: Design + ?Sized>(problem: &Problem<'_, D>, options: &TrainOptions) -> (Vec<f64>, TrainReport) {
    let n = problem.dim();
    let mut x = vec![0.0; n];
    let mut ev = problem.eval(&x);
    let mut losses = vec![ev.loss];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut gnorm = problem.plain_grad_norm(&ev);
    let mut iterations = 0;

    while gnorm > options.tol && iterations < options.max_iter {
        iterations += 1;
        let mut dir = two_loop(&ev.grad, &s_hist, &y_hist, &rho_hist);
        let mut slope = dot_seq(&dir, &ev.grad);
        if slope.is_nan() || slope >= 0.0 {
            // not a descent direction; fall back to steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = ev.grad.iter().map(|g| -g).collect();
            slope = dot_seq(&dir, &ev.grad);
        }
        let mut step = if s_hist.is_empty() {
            1.0 / ev.grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let tev = problem.eval(&trial);
            if tev.loss <= ev.loss + 1e-4 * step * slope {
                accepted = Some((trial, tev));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, tev)) = accepted else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            continue;
        };
        if tev.loss > ev.loss {
            break;
        }

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = tev.grad.iter().zip(&ev.grad).map(|(a, b)| a - b).collect();
        let sy = dot_seq(&s, &yv);
        if sy > 1e-300 {
            if s_hist.len() == options.memory.max(1) {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(yv);
            rho_hist.push(1.0 / sy);
        }
        let stalled = tev.loss == ev.loss && trial == x;
        x = trial;
        ev = tev;
        losses.push(ev.loss);
        gnorm = problem.plain_grad_norm(&ev);
        if stalled {
            break;
        }
    }
    (
        x,
        TrainReport {
            iterations,
            converged: gnorm <= options.tol,
            grad_inf_norm: gnorm,
            losses,
        },
    )
}

fn two_loop(grad: &[f64], s: &[Vec<f64>], y: &[Vec<f64>], rho: &[f64]) -> Vec<f64> {
    let mut q = grad.to_vec();
    let k = s.len();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        alpha[i] = rho[i] * dot_seq(&s[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if k > 0 {
        let gamma = dot_seq(&s[k - 1], &y[k - 1]) / dot_seq(&y[k - 1], &y[k - 1]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..k {
        let beta = rho[i] * dot_seq(&y[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
