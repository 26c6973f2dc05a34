//! Extended logarithm and extended exponential on restricted real domains.
//!
//! For `alpha >= 0` and `c > 0`,
//!
//! ```text
//! ln_{a,c}(u)  = ln(u / c)                                  a = 1
//!              = (u^(1-a) - c^(1-a)) / (1 - a)              otherwise
//! exp_{a,c}(v) = c * e^v                                    a = 1
//!              = (c^(1-a) + (1-a) v)^(1 / (1-a))            otherwise
//! ```
//!
//! The two are mutually inverse once their domains are cut down to the
//! convex pieces used for classification. Those domains hinge on the boundary
//! `c_a = c^(1-a) / (a - 1)`:
//!
//! | alpha      | dom(ln)  | dom(exp)     |
//! |------------|----------|--------------|
//! | `a = 1`    | `u > 0`  | all reals    |
//! | `0 <= a < 1` | `u >= 0` | `v >= c_a` |
//! | `a > 1`    | `u > 0`  | `v < c_a`    |
//!
//! For `a > 1` the exponential blows up as `v` approaches `c_a` from below;
//! that point evaluates to [`ExtReal::PosInf`] rather than an error.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtMathError {
    #[error("invalid parameters: alpha = {alpha}, c = {c} (need alpha >= 0, c > 0)")]
    InvalidParams { alpha: f64, c: f64 },
    #[error("non-finite input {0}")]
    NonFinite(f64),
    #[error("{value} lies outside {domain}")]
    Domain { value: f64, domain: Domain },
    #[error("operation is not defined for alpha = 1")]
    UnsupportedAlpha,
}

/// A value on the extended half line `R ∪ {+inf}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInf => None,
        }
    }

    /// Maps the sentinel onto `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

/// A convex subset of the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    AllReals,
    AtLeast(f64),
    /// Open half line `(-inf, bound)`.
    Below(f64),
    Positive,
    NonNegative,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Domain::AllReals => x.is_finite(),
            Domain::AtLeast(b) => x >= b,
            Domain::Below(b) => x < b,
            Domain::Positive => x > 0.0,
            Domain::NonNegative => x >= 0.0,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::AllReals => f.write_str("R"),
            Domain::AtLeast(b) => write!(f, "[{b}, +inf)"),
            Domain::Below(b) => write!(f, "(-inf, {b})"),
            Domain::Positive => f.write_str("(0, +inf)"),
            Domain::NonNegative => f.write_str("[0, +inf)"),
        }
    }
}

/// The `(alpha, c)` pair shared by the extended log/exp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtParams {
    alpha: f64,
    c: f64,
}

impl ExtParams {
    pub fn new(alpha: f64, c: f64) -> Result<Self, ExtMathError> {
        if !(alpha.is_finite() && c.is_finite() && alpha >= 0.0 && c > 0.0) {
            return Err(ExtMathError::InvalidParams { alpha, c });
        }
        Ok(ExtParams { alpha, c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_log_branch(&self) -> bool {
        self.alpha == 1.0
    }

    /// `c_alpha = c^(1-alpha) / (alpha - 1)`, or `None` for `alpha = 1`.
    pub fn boundary(&self) -> Option<f64> {
        if self.is_log_branch() {
            None
        } else {
            Some(self.c.powf(1.0 - self.alpha) / (self.alpha - 1.0))
        }
    }

    pub fn ln_domain(&self) -> Domain {
        if self.alpha < 1.0 {
            Domain::NonNegative
        } else {
            Domain::Positive
        }
    }

    pub fn exp_domain(&self) -> Domain {
        match self.boundary() {
            None => Domain::AllReals,
            Some(b) if self.alpha < 1.0 => Domain::AtLeast(b),
            Some(b) => Domain::Below(b),
        }
    }

    /// `c^(1-alpha) + (1-alpha) v`, the base that gets raised to `1/(1-alpha)`.
    fn exp_base(&self, v: f64) -> f64 {
        self.c.powf(1.0 - self.alpha) + (1.0 - self.alpha) * v
    }
}

/// Free-function form of [`ExtParams::boundary`].
pub fn boundary(p: &ExtParams) -> Option<f64> {
    p.boundary()
}

fn check_finite(x: f64) -> Result<(), ExtMathError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(ExtMathError::NonFinite(x))
    }
}

/// Extended logarithm `ln_{alpha,c}(u)`.
pub fn ext_log(p: &ExtParams, u: f64) -> Result<f64, ExtMathError> {
    check_finite(u)?;
    let domain = p.ln_domain();
    if !domain.contains(u) {
        return Err(ExtMathError::Domain { value: u, domain });
    }
    if p.is_log_branch() {
        return Ok((u / p.c).ln());
    }
    let e = 1.0 - p.alpha;
    Ok((u.powf(e) - p.c.powf(e)) / e)
}

/// Extended exponential `exp_{alpha,c}(v)`.
///
/// For `alpha > 1`, `v == c_alpha` is accepted and yields [`ExtReal::PosInf`].
pub fn ext_exp(p: &ExtParams, v: f64) -> Result<ExtReal, ExtMathError> {
    check_finite(v)?;
    if p.is_log_branch() {
        return Ok(ExtReal::from_f64(p.c * v.exp()));
    }
    let bound = p.boundary().expect("alpha != 1");
    let base = p.exp_base(v);
    let q = 1.0 / (1.0 - p.alpha);
    if p.alpha < 1.0 {
        if v < bound {
            return Err(ExtMathError::Domain { value: v, domain: p.exp_domain() });
        }
        Ok(ExtReal::from_f64(base.max(0.0).powf(q)))
    } else {
        if v > bound {
            return Err(ExtMathError::Domain { value: v, domain: p.exp_domain() });
        }
        if base <= 0.0 {
            return Ok(ExtReal::PosInf);
        }
        Ok(ExtReal::from_f64(base.powf(q)))
    }
}

/// Clipped extended exponential `(max(0, c^(1-alpha) + (1-alpha) v))^(1/(1-alpha))`.
///
/// Defined on all of `R`: it is zero below the boundary when `alpha < 1` and
/// `+inf` at or beyond it when `alpha > 1` (by `1/0 = +inf`).
pub fn ext_exp_clipped(p: &ExtParams, v: f64) -> Result<ExtReal, ExtMathError> {
    check_finite(v)?;
    if p.is_log_branch() {
        return Err(ExtMathError::UnsupportedAlpha);
    }
    let base = p.exp_base(v).max(0.0);
    let q = 1.0 / (1.0 - p.alpha);
    if p.alpha > 1.0 && base == 0.0 {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::from_f64(base.powf(q)))
}
