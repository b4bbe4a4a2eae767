//! Closed-form solutions of affine ODEs `x' = a*x + b` and the slope-sign
//! analysis built on them.

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::expr::{rational_to_f64, sign_region, AffineExpr, Expr, Interval, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessKind {
    /// `x(t) = C1`
    Constant,
    /// `x(t) = C1 + slope*t`
    Linear { slope: Rational },
    /// `x(t) = equilibrium + C1*e^(rate*t)`
    Exponential { rate: Rational, equilibrium: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessFunction {
    pub var: String,
    pub kind: WitnessKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no closed form in the supported class for {var}' = {rhs}: {reason}")]
pub struct UnsupportedOde {
    pub var: String,
    pub rhs: String,
    pub reason: String,
}

/// Solves `var' = rhs` when `rhs` is affine in `var` alone.
pub fn solve_ode(var: &str, rhs: &Expr) -> Result<WitnessFunction, UnsupportedOde> {
    let unsupported = |reason: String| UnsupportedOde { var: var.to_string(), rhs: rhs.to_string(), reason };
    let lf = rhs.linearize().map_err(|e| unsupported(e.to_string()))?;
    if let Some(other) = lf.coeffs.keys().find(|v| v.as_str() != var) {
        return Err(unsupported(format!("right-hand side depends on `{other}`")));
    }
    let a = lf.coeffs.get(var).cloned().unwrap_or_else(Rational::zero);
    Ok(solve_affine(var, &AffineExpr::new(a, Some(var), lf.constant)))
}

/// Solves `var' = e` for an affine `e` already known to be in `var` alone.
pub fn solve_affine(var: &str, e: &AffineExpr) -> WitnessFunction {
    let (a, b) = (&e.coeff, &e.constant);
    let kind = if !a.is_zero() {
        WitnessKind::Exponential { rate: a.clone(), equilibrium: -(b / a) }
    } else if !b.is_zero() {
        WitnessKind::Linear { slope: b.clone() }
    } else {
        WitnessKind::Constant
    };
    WitnessFunction { var: var.to_string(), kind }
}

impl WitnessFunction {
    pub fn constant(var: &str) -> Self {
        WitnessFunction { var: var.to_string(), kind: WitnessKind::Constant }
    }

    pub fn law(&self) -> Law {
        match &self.kind {
            WitnessKind::Constant => Law::Constant,
            WitnessKind::Linear { slope } => Law::Linear { slope: rational_to_f64(slope) },
            WitnessKind::Exponential { rate, equilibrium } => {
                Law::Exponential { rate: rational_to_f64(rate), equilibrium: rational_to_f64(equilibrium) }
            }
        }
    }

    /// The right-hand side `a*x + b` this witness solves.
    pub fn rhs(&self) -> AffineExpr {
        let var = Some(self.var.as_str());
        match &self.kind {
            WitnessKind::Constant => AffineExpr::new(Rational::zero(), var, Rational::zero()),
            WitnessKind::Linear { slope } => AffineExpr::new(Rational::zero(), var, slope.clone()),
            WitnessKind::Exponential { rate, equilibrium } => AffineExpr::new(rate.clone(), var, -(rate * equilibrium)),
        }
    }

    pub fn eval(&self, c1: f64, t: f64) -> f64 {
        self.law().eval(c1, t)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            WitnessKind::Constant => "CONSTANT",
            WitnessKind::Linear { .. } => "LINEAR",
            WitnessKind::Exponential { .. } => "EXPONENTIAL",
        }
    }
}

/// Constant of integration giving `x(0) = x0`.
pub fn resolve_c1(w: &WitnessFunction, x0: f64) -> f64 {
    w.law().c1_for(x0)
}

/// Floating-point form of a witness used at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Constant,
    Linear { slope: f64 },
    Exponential { rate: f64, equilibrium: f64 },
}

impl Law {
    #[inline]
    pub fn eval(self, c1: f64, t: f64) -> f64 {
        match self {
            Law::Constant => c1,
            Law::Linear { slope } => c1 + slope * t,
            Law::Exponential { rate, equilibrium } => equilibrium + c1 * (rate * t).exp(),
        }
    }

    /// Value at tick `k` of step `delta`; the operation order is shared with
    /// the emitted C so both produce identical bits.
    #[inline]
    pub fn at_tick(self, c1: f64, delta: f64, k: u64) -> f64 {
        let k = k as f64;
        match self {
            Law::Constant => c1,
            Law::Linear { slope } => c1 + slope * delta * k,
            Law::Exponential { rate, equilibrium } if equilibrium == 0.0 => c1 * (rate * delta * k).exp(),
            Law::Exponential { rate, equilibrium } => equilibrium + c1 * (rate * delta * k).exp(),
        }
    }

    #[inline]
    pub fn c1_for(self, x0: f64) -> f64 {
        match self {
            Law::Exponential { equilibrium, .. } if equilibrium != 0.0 => x0 - equilibrium,
            _ => x0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    NonMonotone,
}

/// Direction of motion of `x' = rhs` over `invariant_bounds ∩ boundary`.
pub fn classify_monotonicity(rhs: &AffineExpr, invariant_bounds: &Interval, boundary: &Interval) -> Monotonicity {
    let region = invariant_bounds.intersect(boundary);
    let up = !sign_region(rhs, true).intersect(&region).is_empty();
    let down = !sign_region(rhs, false).intersect(&region).is_empty();
    match (up, down) {
        (true, true) => Monotonicity::NonMonotone,
        (true, false) => Monotonicity::Increasing,
        (false, true) => Monotonicity::Decreasing,
        (false, false) => Monotonicity::Constant,
    }
}

/// Sign of the slope of `rhs` at `x`, computed exactly.
pub fn slope_sign(rhs: &AffineExpr, x: &Rational) -> i8 {
    let v = &rhs.coeff * x + &rhs.constant;
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reach {
    At(f64),
    Infinite,
    Unreachable,
}

/// Smallest `t >= 0` at which the witness started at `x0` equals `target`.
pub fn time_to_reach(w: &WitnessFunction, x0: f64, target: f64) -> Reach {
    law_time_to_reach(w.law(), x0, target)
}

pub fn law_time_to_reach(law: Law, x0: f64, target: f64) -> Reach {
    if target == x0 {
        return Reach::At(0.0);
    }
    let t = match law {
        Law::Constant => return Reach::Unreachable,
        Law::Linear { slope } => (target - x0) / slope,
        Law::Exponential { rate, equilibrium } => {
            if x0 == equilibrium {
                return Reach::Unreachable;
            }
            if target == equilibrium {
                return if rate < 0.0 { Reach::Infinite } else { Reach::Unreachable };
            }
            let ratio = (target - equilibrium) / (x0 - equilibrium);
            if ratio <= 0.0 {
                return Reach::Unreachable;
            }
            ratio.ln() / rate
        }
    };
    if t >= 0.0 && t.is_finite() {
        Reach::At(t)
    } else {
        Reach::Unreachable
    }
}
