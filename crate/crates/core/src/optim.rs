//! The l2-regularised empirical Logitron risk over linear predictors and a
//! limited-memory BFGS solver for it.
//!
//! The objective is the *unnormalised* sum
//! `sum_i L(y_i (w . x_i + b)) + lambda * |w|^2`; the bias is not penalised.
//! Because the loss sum is not divided by `N`, the effective strength of a
//! given `lambda` shrinks as the training set grows.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::loss::LossSpec;
use crate::ErrorKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("labels must be -1 or +1, found {0}")]
    Labels(f64),
    #[error("invalid setting: {0}")]
    Settings(String),
    #[error("objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize, last: LinearModel },
}

impl OptimError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            OptimError::NonFinite { .. } => ErrorKind::Numeric,
            OptimError::Settings(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

/// `f(x) = w . x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: Array1<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Array1<f64>, b: f64) -> Self {
        LinearModel { w, b }
    }

    pub fn zeros(n: usize) -> Self {
        LinearModel { w: Array1::zeros(n), b: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn decision(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.w.dot(&x) + self.b
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|v| v.is_finite())
    }

    fn to_params(&self) -> Array1<f64> {
        let mut p = Array1::zeros(self.w.len() + 1);
        p.slice_mut(ndarray::s![..self.w.len()]).assign(&self.w);
        p[self.w.len()] = self.b;
        p
    }

    fn from_params(p: &Array1<f64>) -> Self {
        let n = p.len() - 1;
        LinearModel { w: p.slice(ndarray::s![..n]).to_owned(), b: p[n] }
    }
}

/// Value and gradient of the objective at one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub grad_w: Array1<f64>,
    pub grad_b: f64,
}

/// `sum_i L(y_i f(x_i)) + lambda |w|^2` over a borrowed design matrix.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    spec: LossSpec,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        x: ArrayView2<'a, f64>,
        y: ArrayView1<'a, f64>,
        spec: LossSpec,
        lambda: f64,
    ) -> Result<Self, OptimError> {
        if x.nrows() != y.len() {
            return Err(OptimError::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if let Some(&v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(OptimError::Labels(v));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(OptimError::Settings(format!("lambda = {lambda} must be finite and nonnegative")));
        }
        Ok(Objective { x, y, spec, lambda })
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eval(&self, m: &LinearModel) -> Result<ObjectiveValue, OptimError> {
        if m.dim() != self.n_features() {
            return Err(OptimError::Shape(format!(
                "model has {} weights, data has {} features",
                m.dim(),
                self.n_features()
            )));
        }
        let (value, g) = self.eval_params(&m.to_params());
        let n = m.dim();
        Ok(ObjectiveValue { value, grad_w: g.slice(ndarray::s![..n]).to_owned(), grad_b: g[n] })
    }

    /// Objective over the stacked parameter vector `(w, b)`.
    fn eval_params(&self, p: &Array1<f64>) -> (f64, Array1<f64>) {
        let n = self.n_features();
        let w = p.slice(ndarray::s![..n]);
        let b = p[n];
        let f = self.x.dot(&w);
        let mut value = 0.0;
        let mut coef = Array1::<f64>::zeros(self.n_samples());
        for ((ci, &fi), &yi) in coef.iter_mut().zip(f.iter()).zip(self.y.iter()) {
            let z = yi * (fi + b);
            if !z.is_finite() {
                return (f64::INFINITY, Array1::zeros(n + 1));
            }
            let (l, dl) = self.spec.value_grad(z);
            value += l;
            *ci = dl * yi;
        }
        let mut g = Array1::<f64>::zeros(n + 1);
        let gw = self.x.t().dot(&coef) + &(&w * (2.0 * self.lambda));
        g.slice_mut(ndarray::s![..n]).assign(&gw);
        g[n] = coef.sum();
        value += self.lambda * w.dot(&w);
        (value, g)
    }
}

pub fn objective_eval(obj: &Objective<'_>, m: &LinearModel) -> Result<ObjectiveValue, OptimError> {
    obj.eval(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Stop once the gradient infinity-norm is at or below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of curvature pairs kept.
    pub memory: usize,
    /// Objective evaluations allowed per line search.
    pub max_linesearch: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-6, max_iter: 500, memory: 10, max_linesearch: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    x: Array1<f64>,
    f: f64,
    g: Array1<f64>,
}

enum Search {
    Accepted(Point),
    Failed,
    NonFinite,
}

/// Minimises the objective from `init` with L-BFGS and a Wolfe line search.
///
/// Curvature pairs with too little positive curvature are dropped, and a
/// non-descent direction resets the memory to steepest descent; this keeps
/// the method usable where the loss is only once differentiable (and at the
/// hinge kink of `alpha = 0`, where it degrades to a subgradient-like scheme).
pub fn minimize(
    obj: &Objective<'_>,
    init: &LinearModel,
    settings: &SolverSettings,
) -> Result<(LinearModel, SolveReport), OptimError> {
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(OptimError::Settings(format!("tol = {} must be positive", settings.tol)));
    }
    if init.dim() != obj.n_features() {
        return Err(OptimError::Shape(format!(
            "initial model has {} weights, data has {} features",
            init.dim(),
            obj.n_features()
        )));
    }
    let x0 = init.to_params();
    let (f0, g0) = obj.eval_params(&x0);
    let mut evaluations = 1;
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::NonFinite { iteration: 0, last: init.clone() });
    }
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut history = vec![cur.f];
    let mut pairs: VecDeque<(Array1<f64>, Array1<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;
    let mut converged = false;

    loop {
        if inf_norm(&cur.g) <= settings.tol {
            converged = true;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        let mut d = two_loop(&cur.g, &pairs);
        let mut slope = d.dot(&cur.g);
        if slope.is_nan() || slope >= 0.0 {
            pairs.clear();
            d = -&cur.g;
            slope = d.dot(&cur.g);
        }
        let step0 = if pairs.is_empty() { (1.0 / inf_norm(&cur.g)).min(1.0) } else { 1.0 };
        let (outcome, used) = line_search(obj, &cur, &d, slope, step0, settings.max_linesearch);
        evaluations += used;
        let next = match outcome {
            Search::Accepted(p) => p,
            Search::NonFinite => {
                return Err(OptimError::NonFinite {
                    iteration: iterations,
                    last: LinearModel::from_params(&cur.x),
                })
            }
            Search::Failed if !pairs.is_empty() => {
                // retry once along steepest descent with fresh memory
                pairs.clear();
                continue;
            }
            Search::Failed => break,
        };
        iterations += 1;
        let s = &next.x - &cur.x;
        let y = &next.g - &cur.g;
        let sy = s.dot(&y);
        if sy > 1e-12 * (s.dot(&s) * y.dot(&y)).sqrt() && sy > 0.0 {
            if pairs.len() == settings.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        history.push(next.f);
        cur = next;
    }

    let report = SolveReport {
        iterations,
        objective: cur.f,
        grad_norm: inf_norm(&cur.g),
        converged,
        history,
        evaluations,
    };
    Ok((LinearModel::from_params(&cur.x), report))
}

fn two_loop(g: &Array1<f64>, pairs: &VecDeque<(Array1<f64>, Array1<f64>, f64)>) -> Array1<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * s.dot(&q);
        q.scaled_add(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.scaled_add(a - b, s);
    }
    -q
}

/// Strong-Wolfe bracketing and zoom with safeguarded quadratic interpolation.
/// Falls back to the best Armijo point seen when the curvature condition
/// cannot be met within the budget.
fn line_search(
    obj: &Objective<'_>,
    cur: &Point,
    d: &Array1<f64>,
    slope0: f64,
    step0: f64,
    budget: usize,
) -> (Search, usize) {
    let mut evals = 0;
    let mut any_finite = false;
    let mut best: Option<Point> = None;
    let try_step = |a: f64, evals: &mut usize| -> Option<(Point, f64)> {
        *evals += 1;
        let mut x = cur.x.clone();
        x.scaled_add(a, d);
        let (f, g) = obj.eval_params(&x);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let slope = g.dot(d);
        Some((Point { x, f, g }, slope))
    };
    let armijo = |a: f64, f: f64| f <= cur.f + C1 * a * slope0 && f < cur.f;

    // bracketing phase
    let (mut lo, mut f_lo, mut d_lo) = (0.0, cur.f, slope0);
    let mut hi: Option<(f64, f64)> = None;
    let mut a = step0;
    while evals < budget {
        let Some((p, slope)) = try_step(a, &mut evals) else {
            hi = Some((a, f64::INFINITY));
            break;
        };
        any_finite = true;
        if !armijo(a, p.f) || p.f >= f_lo {
            hi = Some((a, p.f));
            break;
        }
        if slope.abs() <= -C2 * slope0 {
            return (Search::Accepted(p), evals);
        }
        if slope >= 0.0 {
            hi = Some((lo, f_lo));
            lo = a;
            f_lo = p.f;
            d_lo = slope;
            best = Some(p);
            break;
        }
        lo = a;
        f_lo = p.f;
        d_lo = slope;
        best = Some(p);
        a *= 2.0;
    }

    // zoom phase
    if let Some((mut a_hi, mut f_hi)) = hi {
        while evals < budget {
            let width = a_hi - lo;
            if width.abs() <= 1e-16 * lo.abs().max(1e-300) || width.abs() < 1e-20 {
                break;
            }
            let mut t = if f_hi.is_finite() {
                // minimiser of the quadratic through (lo, f_lo, d_lo) and (a_hi, f_hi)
                let denom = 2.0 * (f_hi - f_lo - d_lo * width);
                if denom > 0.0 {
                    lo - d_lo * width * width / denom
                } else {
                    lo + 0.5 * width
                }
            } else {
                lo + 0.5 * width
            };
            let (l, h) = if lo < a_hi { (lo, a_hi) } else { (a_hi, lo) };
            let margin = 0.1 * (h - l);
            if !(t > l + margin && t < h - margin) {
                t = lo + 0.5 * width;
            }
            let Some((p, slope)) = try_step(t, &mut evals) else {
                a_hi = t;
                f_hi = f64::INFINITY;
                continue;
            };
            any_finite = true;
            if !armijo(t, p.f) || p.f >= f_lo {
                a_hi = t;
                f_hi = p.f;
                continue;
            }
            if slope.abs() <= -C2 * slope0 {
                return (Search::Accepted(p), evals);
            }
            if slope * (a_hi - lo) >= 0.0 {
                a_hi = lo;
                f_hi = f_lo;
            }
            lo = t;
            f_lo = p.f;
            d_lo = slope;
            best = Some(p);
        }
    }

    match best {
        Some(p) => (Search::Accepted(p), evals),
        None if any_finite => (Search::Failed, evals),
        None => (Search::NonFinite, evals),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{Family, LossSpec};
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    #[test]
    fn empty_dataset_is_pure_regulariser() {
        let x = Array2::<f64>::zeros((0, 2));
        let y = Array1::<f64>::zeros(0);
        let obj = Objective::new(x.view(), y.view(), LossSpec::logistic(), 1.0).unwrap();
        let m = LinearModel::new(array![2.0, 0.0], 3.0);
        let v = obj.eval(&m).unwrap();
        assert_eq!(v.value, 4.0);
        assert_eq!(v.grad_w, array![4.0, 0.0]);
        assert_eq!(v.grad_b, 0.0);
    }

    #[test]
    fn single_point_logistic() {
        let x = array![[0.0]];
        let y = array![1.0];
        let obj = Objective::new(x.view(), y.view(), LossSpec::logistic(), 0.0).unwrap();
        let v = obj.eval(&LinearModel::zeros(1)).unwrap();
        assert_relative_eq!(v.value, 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(v.grad_b, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn calibration_value_in_gradient() {
        let x = array![[1.0]];
        let y = array![1.0];
        let spec = LossSpec::new(Family::HPlus, 2.0, 1.0).unwrap();
        let obj = Objective::new(x.view(), y.view(), spec, 0.0).unwrap();
        let v = obj.eval(&LinearModel::zeros(1)).unwrap();
        assert_relative_eq!(v.grad_w[0], -0.25, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[1.0]];
        let y = array![0.5];
        assert!(matches!(
            Objective::new(x.view(), y.view(), LossSpec::logistic(), 0.0),
            Err(OptimError::Labels(_))
        ));
        let y = array![1.0];
        assert!(Objective::new(x.view(), y.view(), LossSpec::logistic(), -1.0).is_err());
        let obj = Objective::new(x.view(), y.view(), LossSpec::logistic(), 0.0).unwrap();
        assert!(matches!(obj.eval(&LinearModel::zeros(2)), Err(OptimError::Shape(_))));
    }

    #[test]
    fn quadratic_minimum_at_zero() {
        let x = Array2::<f64>::zeros((0, 3));
        let y = Array1::<f64>::zeros(0);
        let obj = Objective::new(x.view(), y.view(), LossSpec::logistic(), 1.0).unwrap();
        let init = LinearModel::new(array![1.0, -2.0, 0.5], 0.7);
        let (m, r) = minimize(&obj, &init, &SolverSettings::default()).unwrap();
        assert!(r.converged);
        assert!(m.w.iter().all(|v| v.abs() <= 1e-6));
        assert_eq!(m.b, 0.7);
    }

    #[test]
    fn separable_pair_is_classified() {
        let x = array![[1.0], [-1.0]];
        let y = array![1.0, -1.0];
        let obj = Objective::new(x.view(), y.view(), LossSpec::logistic(), 0.1).unwrap();
        let (m, r) = minimize(&obj, &LinearModel::zeros(1), &SolverSettings::default()).unwrap();
        assert!(r.converged);
        for i in 0..2 {
            assert!(y[i] * m.decision(x.row(i)) > 0.0);
        }
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bad_tolerance_rejected() {
        let x = array![[1.0]];
        let y = array![1.0];
        let obj = Objective::new(x.view(), y.view(), LossSpec::logistic(), 0.0).unwrap();
        let s = SolverSettings { tol: 0.0, ..SolverSettings::default() };
        assert!(matches!(minimize(&obj, &LinearModel::zeros(1), &s), Err(OptimError::Settings(_))));
    }
}
