//! The Logitron loss family and its baselines.
//!
//! The Logitron loss stitches the extended logistic loss
//! `l(z) = ln_{a,c}(c + exp_{a,c}(-z))` to the Perceptron loss `max(0, -z)`
//! at the point where `-z` leaves `dom(exp_{a,c})`. The stitch point
//! `-c_a` is the *margin*: positive for `a < 1`, negative for `a > 1`, absent
//! for the logistic case `a = 1`.
//!
//! Two evaluation paths are provided. [`logitron_value`] works from the
//! branch definition with an overflow-safe rewriting; [`logitron_value_reformulated`]
//! composes the clipped exponential directly through [`crate::extmath`]. They are
//! kept independent so one can check the other.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::extmath::{self, ExtMathError, ExtParams, ExtReal};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("non-finite margin value {0}")]
    NonFinite(f64),
    #[error("invalid loss parameters: {0}")]
    Parameter(String),
    #[error("the reformulated path is not defined for alpha = 1")]
    UnsupportedBranch,
    #[error(transparent)]
    ExtMath(#[from] ExtMathError),
}

/// Loss category. `HMinus`/`HPlus` are the hinge-like members (fixed `|c_a|`),
/// `LMinus`/`LPlus` the logistic-like ones (fixed `c`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    HMinus,
    HPlus,
    LMinus,
    LPlus,
    HingeZero,
    LogisticOne,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::HMinus => "HMinus",
            Family::HPlus => "HPlus",
            Family::LMinus => "LMinus",
            Family::LPlus => "LPlus",
            Family::HingeZero => "HingeZero",
            Family::LogisticOne => "LogisticOne",
        }
    }

    /// Whether the grid margin of this family is `c_alpha` (hinge-like) or `c`.
    pub fn margin_is_boundary(&self) -> bool {
        matches!(self, Family::HMinus | Family::HPlus | Family::HingeZero)
    }

    fn admits(&self, alpha: f64) -> bool {
        match self {
            Family::HMinus | Family::LMinus => alpha > 0.0 && alpha < 1.0,
            Family::HPlus | Family::LPlus => alpha > 1.0,
            Family::HingeZero => alpha == 0.0,
            Family::LogisticOne => alpha == 1.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "HMinus" => Family::HMinus,
            "HPlus" => Family::HPlus,
            "LMinus" => Family::LMinus,
            "LPlus" => Family::LPlus,
            "HingeZero" => Family::HingeZero,
            "LogisticOne" => Family::LogisticOne,
            other => return Err(LossError::Parameter(format!("unknown family {other:?}"))),
        })
    }
}

/// A fully resolved Logitron loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    family: Family,
    params: ExtParams,
    q: Option<f64>,
    k: Option<i32>,
}

impl LossSpec {
    /// Builds a spec from `alpha` and the scale `c` directly.
    pub fn new(family: Family, alpha: f64, c: f64) -> Result<Self, LossError> {
        if !family.admits(alpha) {
            return Err(LossError::Parameter(format!(
                "alpha = {alpha} is not admissible for family {family}"
            )));
        }
        let params = ExtParams::new(alpha, c)?;
        let (q, k) = if alpha == 1.0 {
            (None, None)
        } else {
            let q = 1.0 / (1.0 - alpha);
            let r = q.round();
            let k = ((q - r).abs() < 1e-9 && r != 0.0).then_some(r as i32);
            (Some(q), k)
        };
        Ok(LossSpec { family, params, q, k })
    }

    /// Resolves a spec from a grid margin: `c_alpha` for the hinge families,
    /// `c` for the logistic ones.
    pub fn resolve(family: Family, alpha: f64, margin: f64) -> Result<Self, LossError> {
        if !margin.is_finite() {
            return Err(LossError::NonFinite(margin));
        }
        if !family.margin_is_boundary() {
            if margin <= 0.0 {
                return Err(LossError::Parameter(format!(
                    "family {family} takes c > 0 as its margin, got {margin}"
                )));
            }
            return LossSpec::new(family, alpha, margin);
        }
        if !family.admits(alpha) {
            return Err(LossError::Parameter(format!(
                "alpha = {alpha} is not admissible for family {family}"
            )));
        }
        // sign(c_alpha) = sign(alpha - 1)
        let scaled = (alpha - 1.0) * margin;
        if scaled <= 0.0 {
            return Err(LossError::Parameter(format!(
                "margin {margin} has the wrong sign for alpha = {alpha} ({family})"
            )));
        }
        let c = scaled.powf(1.0 / (1.0 - alpha));
        LossSpec::new(family, alpha, c)
    }

    /// Hinge-style spec from `(alpha, c_alpha)` with the family inferred from `alpha`.
    pub fn from_alpha_margin(alpha: f64, margin: f64) -> Result<Self, LossError> {
        let family = if alpha == 0.0 {
            Family::HingeZero
        } else if alpha == 1.0 {
            Family::LogisticOne
        } else if alpha < 1.0 {
            Family::HMinus
        } else {
            Family::HPlus
        };
        if family == Family::LogisticOne {
            // c is immaterial for the logistic loss
            return LossSpec::new(family, 1.0, if margin > 0.0 { margin } else { 1.0 });
        }
        LossSpec::resolve(family, alpha, margin)
    }

    pub fn logistic() -> Self {
        LossSpec::new(Family::LogisticOne, 1.0, 1.0).expect("valid")
    }

    /// `max(0, 1 - z)`.
    pub fn hinge() -> Self {
        LossSpec::new(Family::HingeZero, 0.0, 1.0).expect("valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &ExtParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha()
    }

    pub fn c(&self) -> f64 {
        self.params.c()
    }

    /// `c_alpha`, the (signed) stitch point is `-c_alpha`.
    pub fn boundary(&self) -> Option<f64> {
        self.params.boundary()
    }

    /// The grid-facing margin: `c_alpha` for hinge families, `c` otherwise.
    pub fn margin(&self) -> f64 {
        if self.family.margin_is_boundary() {
            self.boundary().expect("hinge families have a boundary")
        } else {
            self.c()
        }
    }

    pub fn q(&self) -> Option<f64> {
        self.q
    }

    pub fn k(&self) -> Option<i32> {
        self.k
    }

    /// `c_k = -k c^(1/k)`; coincides with `c_alpha` when `k` is set.
    pub fn c_k(&self) -> Option<f64> {
        self.k.map(|k| -(k as f64) * self.c().powf(1.0 / k as f64))
    }

    /// The `z` at which the loss meets the Perceptron line.
    pub fn stitch_point(&self) -> Option<f64> {
        self.boundary().map(|b| -b)
    }

    /// Loss value and derivative in one pass.
    pub(crate) fn value_grad(&self, z: f64) -> (f64, f64) {
        let alpha = self.alpha();
        let c = self.c();
        if alpha == 1.0 {
            return logistic_value_grad(z);
        }
        let cb = self.boundary().expect("alpha != 1");
        if alpha < 1.0 {
            let d = -cb - z;
            if d < 0.0 || (d == 0.0 && alpha > 0.0) {
                return (0.0, 0.0);
            }
            if alpha == 0.0 {
                return (d, -1.0);
            }
            let one_m = 1.0 - alpha;
            // t = exp_{a,c}(-z) / c, kept in log form
            let ln_t = (one_m * d).ln() / one_m - c.ln();
            if ln_t > 0.0 {
                // e^(1-a) = (1-a) d, so L = -z + d ((1 + 1/t)^(1-a) - 1)
                let inv = (-ln_t).exp();
                let value = -z + d * (one_m * inv.ln_1p()).exp_m1();
                (value, -(1.0 / (1.0 + inv)).powf(alpha))
            } else {
                let t = ln_t.exp();
                let value = c.powf(one_m) * (one_m * t.ln_1p()).exp_m1() / one_m;
                (value, -ratio(t).powf(alpha))
            }
        } else {
            if z <= -cb {
                return (-z, -1.0);
            }
            let am1 = alpha - 1.0;
            let s = am1 * (z + cb);
            let sp = s.powf(1.0 / am1);
            let t = 1.0 / (c * sp);
            let value = if t <= 1.0 {
                c.powf(-am1) * (-am1 * t.ln_1p()).exp_m1() / -am1
            } else {
                cb - (z + cb) / (1.0 + c * sp).powf(am1)
            };
            (value, -(1.0 / (1.0 + c * sp)).powf(alpha))
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(alpha={}, c={})", self.family, self.alpha(), self.c())
    }
}

/// `t / (1 + t)` for `t >= 0`, including `t = +inf`.
fn ratio(t: f64) -> f64 {
    if t > 1.0 {
        1.0 / (1.0 + 1.0 / t)
    } else {
        t / (1.0 + t)
    }
}

fn logistic_value_grad(z: f64) -> (f64, f64) {
    let e = (-z.abs()).exp();
    let value = (-z).max(0.0) + e.ln_1p();
    let grad = if z >= 0.0 { -e / (1.0 + e) } else { -1.0 / (1.0 + e) };
    (value, grad)
}

/// Value, first and (where it exists) second derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: f64,
    pub second: Option<f64>,
}

fn check_z(z: f64) -> Result<(), LossError> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(LossError::NonFinite(z))
    }
}

pub fn evaluate(spec: &LossSpec, z: f64) -> Result<LossEval, LossError> {
    check_z(z)?;
    let (value, grad) = spec.value_grad(z);
    Ok(LossEval { value, grad, second: logitron_second(spec, z) })
}

/// `L_{alpha,c}(z)`.
pub fn logitron_value(spec: &LossSpec, z: f64) -> Result<f64, LossError> {
    check_z(z)?;
    Ok(spec.value_grad(z).0)
}

/// `L'_{alpha,c}(z)`, always in `[-1, 0]`.
///
/// At `alpha = 0` the loss is the hinge `max(0, c - z)`; the left derivative
/// `-1` is returned at the kink.
pub fn logitron_grad(spec: &LossSpec, z: f64) -> Result<f64, LossError> {
    check_z(z)?;
    Ok(spec.value_grad(z).1)
}

/// `L''_{alpha,c}(z)`; only reported for `alpha` in `(0.5, 2)` where the loss is C².
pub fn logitron_second(spec: &LossSpec, z: f64) -> Option<f64> {
    let alpha = spec.alpha();
    if !(alpha > 0.5 && alpha < 2.0) {
        return None;
    }
    if alpha == 1.0 {
        let e = (-z.abs()).exp();
        return Some(e / ((1.0 + e) * (1.0 + e)));
    }
    let c = spec.c();
    let cb = spec.boundary().expect("alpha != 1");
    // ln(e / c), with e = exp_{alpha,c}(-z) on the interior
    let ln_t = if alpha < 1.0 {
        let d = -cb - z;
        if d <= 0.0 {
            return Some(0.0);
        }
        ((1.0 - alpha) * d).ln() / (1.0 - alpha) - c.ln()
    } else {
        if z <= -cb {
            return Some(0.0);
        }
        -((alpha - 1.0) * (z + cb)).ln() / (alpha - 1.0) - c.ln()
    };
    let ln_1pt = if ln_t > 0.0 { ln_t + (-ln_t).exp().ln_1p() } else { ln_t.exp().ln_1p() };
    let log_second = (2.0 * alpha - 1.0) * ln_t - (alpha + 1.0) * ln_1pt;
    Some(alpha * c.powf(alpha - 1.0) * log_second.exp())
}

/// The same loss through the clipped exponential:
/// `ln_{a,c}(c + Exp_{a,c}(-z))` for `a < 1`, and `max(-z, ·)` of it for `a > 1`.
pub fn logitron_value_reformulated(spec: &LossSpec, z: f64) -> Result<f64, LossError> {
    check_z(z)?;
    let p = spec.params();
    if p.is_log_branch() {
        return Err(LossError::UnsupportedBranch);
    }
    let c = p.c();
    if p.alpha() < 1.0 {
        let e = extmath::ext_exp_clipped(p, -z)?.to_f64();
        return Ok(extmath::ext_log(p, c + e)?);
    }
    let cb = p.boundary().expect("alpha != 1");
    // the clipped exponential is +inf here; max(-z, c_alpha) = -z
    if z <= -cb {
        return Ok(-z);
    }
    let inner = match extmath::ext_exp_clipped(p, -z)? {
        ExtReal::Finite(e) if e.is_finite() => extmath::ext_log(p, c + e)?,
        _ => cb,
    };
    Ok((-z).max(inner))
}

/// Generalised hinge `(max(0, 1 - z))^q` for `q` outside `[0, 1)`; `0^q = +inf` when `q < 0`.
pub fn hinge_q(q: f64, z: f64) -> Result<ExtReal, LossError> {
    check_z(z)?;
    if !q.is_finite() || (0.0..1.0).contains(&q) {
        return Err(LossError::Parameter(format!("hinge order q = {q} must lie outside [0, 1)")));
    }
    let base = (1.0 - z).max(0.0);
    if base == 0.0 && q < 0.0 {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite(base.powf(q)))
}

/// Derivative of [`hinge_q`] (left derivative at the kink for `q = 1`).
pub fn hinge_q_grad(q: f64, z: f64) -> Result<ExtReal, LossError> {
    check_z(z)?;
    if !q.is_finite() || (0.0..1.0).contains(&q) {
        return Err(LossError::Parameter(format!("hinge order q = {q} must lie outside [0, 1)")));
    }
    let base = (1.0 - z).max(0.0);
    if base == 0.0 {
        return Ok(match q {
            q if q < 0.0 => ExtReal::PosInf,
            q if q == 1.0 && z == 1.0 => ExtReal::Finite(-1.0),
            _ => ExtReal::Finite(0.0),
        });
    }
    Ok(ExtReal::Finite(-q * base.powf(q - 1.0)))
}

/// Perceptron loss `max(0, -z)`.
pub fn perceptron(z: f64) -> f64 {
    (-z).max(0.0)
}

/// `ln_{alpha,c}(c + exp_{beta,c}(-z))`. Nonconvex when `beta < alpha`; meant
/// for evaluation only.
pub fn extended_logistic(alpha: f64, beta: f64, c: f64, z: f64) -> Result<ExtReal, LossError> {
    check_z(z)?;
    let outer = ExtParams::new(alpha, c)?;
    let inner = ExtParams::new(beta, c)?;
    match extmath::ext_exp(&inner, -z)? {
        ExtReal::Finite(e) if e.is_finite() => Ok(ExtReal::Finite(extmath::ext_log(&outer, c + e)?)),
        // ln(c + inf): finite limit c_alpha when alpha > 1
        _ => Ok(match outer.boundary() {
            Some(b) if alpha > 1.0 => ExtReal::Finite(b),
            _ => ExtReal::PosInf,
        }),
    }
}
