//! Expressions, single-variable comparisons and real intervals.
//!
//! Static analysis works on exact rationals. Runtime valuations are `f64`
//! and only meet the rational world through [`rational_to_f64`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Nearest `f64` to `r`.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses an unsigned decimal literal such as `0.075` or `150`.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(Rational::new(numer, denom))
}

/// Formats a rational as a decimal literal when the expansion terminates,
/// and as `(n/d)` otherwise.
pub fn fmt_rational(r: &Rational) -> String {
    let mut d = r.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut twos, mut fives) = (0usize, 0usize);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("({}/{})", r.numer(), r.denom());
    }
    let scale = twos.max(fives);
    let scaled = r * Rational::from_integer(num_traits::pow(BigInt::from(10), scale));
    let digits = scaled.to_integer().abs().to_string();
    let sign = if r.is_negative() { "-" } else { "" };
    if scale == 0 {
        return format!("{sign}{digits}");
    }
    let padded = format!("{digits:0>width$}", width = scale + 1);
    let (i, f) = padded.split_at(padded.len() - scale);
    format!("{sign}{i}.{f}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("variable `{0}` has no value in the valuation")]
    MissingVariable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }

    #[inline]
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }

    pub fn holds_exact(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }

    /// The operator `op'` with `a op b <=> b op' a`.
    pub fn mirrored(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Gt)
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `var op bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub var: String,
    pub op: CmpOp,
    pub bound: Rational,
}

impl Comparison {
    pub fn new(var: impl Into<String>, op: CmpOp, bound: Rational) -> Self {
        Comparison { var: var.into(), op, bound }
    }

    pub fn holds(&self, value: f64) -> bool {
        self.op.holds(value, rational_to_f64(&self.bound))
    }

    /// Values of the variable satisfying this comparison.
    pub fn to_interval(&self) -> Interval {
        let b = self.bound.clone();
        match self.op {
            CmpOp::Lt => Interval::new(Bound::Unbounded, Bound::Open(b)),
            CmpOp::Le => Interval::new(Bound::Unbounded, Bound::Closed(b)),
            CmpOp::Gt => Interval::new(Bound::Open(b), Bound::Unbounded),
            CmpOp::Ge => Interval::new(Bound::Closed(b), Bound::Unbounded),
            CmpOp::Eq => Interval::point(b),
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.var, self.op, fmt_rational(&self.bound))
    }
}

/// Conjunction of comparisons; the empty conjunction is TRUE.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Constraint {
    pub conjuncts: Vec<Comparison>,
}

impl Constraint {
    pub fn new(conjuncts: Vec<Comparison>) -> Self {
        Constraint { conjuncts }
    }

    pub fn truth() -> Self {
        Constraint::default()
    }

    pub fn is_true(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.conjuncts.iter().map(|c| c.var.as_str()).collect()
    }

    pub fn and(mut self, other: &Constraint) -> Constraint {
        self.conjuncts.extend(other.conjuncts.iter().cloned());
        self
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conjuncts.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.conjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

pub fn eval_constraint(c: &Constraint, v: &BTreeMap<String, f64>) -> Result<bool, ExprError> {
    let mut all = true;
    for cmp in &c.conjuncts {
        let value = v.get(&cmp.var).ok_or_else(|| ExprError::MissingVariable(cmp.var.clone()))?;
        all &= cmp.holds(*value);
    }
    Ok(all)
}

/// Tightest interval of `x` satisfying the conjuncts of `c` over `x`.
/// Conjuncts over other variables are ignored.
pub fn constraint_to_interval(c: &Constraint, x: &str) -> Interval {
    c.conjuncts
        .iter()
        .filter(|cmp| cmp.var == x)
        .fold(Interval::real_line(), |acc, cmp| acc.intersect(&cmp.to_interval()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Unbounded,
    Open(Rational),
    Closed(Rational),
}

impl Bound {
    fn value(&self) -> Option<&Rational> {
        match self {
            Bound::Unbounded => None,
            Bound::Open(v) | Bound::Closed(v) => Some(v),
        }
    }

    fn is_closed(&self) -> bool {
        matches!(self, Bound::Closed(_))
    }
}

/// A real interval with independently open or closed endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Interval {
    Empty,
    Span { lo: Bound, hi: Bound },
}

impl Interval {
    /// Builds `lo..hi`, collapsing to [`Interval::Empty`] when no real lies between.
    pub fn new(lo: Bound, hi: Bound) -> Interval {
        if let (Some(l), Some(h)) = (lo.value(), hi.value()) {
            if l > h || (l == h && !(lo.is_closed() && hi.is_closed())) {
                return Interval::Empty;
            }
        }
        Interval::Span { lo, hi }
    }

    pub fn real_line() -> Interval {
        Interval::Span { lo: Bound::Unbounded, hi: Bound::Unbounded }
    }

    pub fn closed(lo: Rational, hi: Rational) -> Interval {
        Interval::new(Bound::Closed(lo), Bound::Closed(hi))
    }

    pub fn open(lo: Rational, hi: Rational) -> Interval {
        Interval::new(Bound::Open(lo), Bound::Open(hi))
    }

    pub fn point(v: Rational) -> Interval {
        Interval::closed(v.clone(), v)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Interval::Empty)
    }

    pub fn lo(&self) -> Option<&Bound> {
        match self {
            Interval::Empty => None,
            Interval::Span { lo, .. } => Some(lo),
        }
    }

    pub fn hi(&self) -> Option<&Bound> {
        match self {
            Interval::Empty => None,
            Interval::Span { hi, .. } => Some(hi),
        }
    }

    /// Finite infimum, if any.
    pub fn inf(&self) -> Option<&Rational> {
        self.lo().and_then(Bound::value)
    }

    /// Finite supremum, if any.
    pub fn sup(&self) -> Option<&Rational> {
        self.hi().and_then(Bound::value)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        match self {
            Interval::Empty => false,
            Interval::Span { lo, hi } => {
                let above = match lo {
                    Bound::Unbounded => true,
                    Bound::Open(l) => x > l,
                    Bound::Closed(l) => x >= l,
                };
                let below = match hi {
                    Bound::Unbounded => true,
                    Bound::Open(h) => x < h,
                    Bound::Closed(h) => x <= h,
                };
                above && below
            }
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (Interval::Span { lo: l1, hi: h1 }, Interval::Span { lo: l2, hi: h2 }) = (self, other) else {
            return Interval::Empty;
        };
        let lo = match (l1.value(), l2.value()) {
            (None, _) => l2.clone(),
            (_, None) => l1.clone(),
            (Some(a), Some(b)) if a > b => l1.clone(),
            (Some(a), Some(b)) if a < b => l2.clone(),
            _ if l1.is_closed() => l2.clone(),
            _ => l1.clone(),
        };
        let hi = match (h1.value(), h2.value()) {
            (None, _) => h2.clone(),
            (_, None) => h1.clone(),
            (Some(a), Some(b)) if a < b => h1.clone(),
            (Some(a), Some(b)) if a > b => h2.clone(),
            _ if h1.is_closed() => h2.clone(),
            _ => h1.clone(),
        };
        Interval::new(lo, hi)
    }
}

pub fn interval_intersect(p: &Interval, q: &Interval) -> Interval {
    p.intersect(q)
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Empty => f.write_str("EMPTY"),
            Interval::Span { lo, hi } => {
                match lo {
                    Bound::Unbounded => f.write_str("(-inf")?,
                    Bound::Open(v) => write!(f, "({}", fmt_rational(v))?,
                    Bound::Closed(v) => write!(f, "[{}", fmt_rational(v))?,
                }
                match hi {
                    Bound::Unbounded => f.write_str(", inf)"),
                    Bound::Open(v) => write!(f, ", {})", fmt_rational(v)),
                    Bound::Closed(v) => write!(f, ", {}]", fmt_rational(v)),
                }
            }
        }
    }
}

/// Arithmetic expression tree as written in a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Rational),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NonAffine {
    #[error("product of two non-constant terms")]
    Product,
    #[error("division by a non-constant term")]
    NonConstantDivisor,
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-constant base raised to power {0}")]
    Power(u32),
}

/// `sum(coeffs[v] * v) + constant`, with zero coefficients dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearForm {
    pub coeffs: BTreeMap<String, Rational>,
    pub constant: Rational,
}

impl LinearForm {
    fn constant(c: Rational) -> Self {
        LinearForm { coeffs: BTreeMap::new(), constant: c }
    }

    fn as_constant(&self) -> Option<&Rational> {
        self.coeffs.is_empty().then_some(&self.constant)
    }

    fn scale(mut self, k: &Rational) -> Self {
        if k.is_zero() {
            return LinearForm::constant(Rational::zero());
        }
        for c in self.coeffs.values_mut() {
            *c = &*c * k;
        }
        self.constant = &self.constant * k;
        self
    }

    fn add(mut self, other: LinearForm) -> Self {
        for (v, c) in other.coeffs {
            let sum = self.coeffs.remove(&v).unwrap_or_else(Rational::zero) + c;
            if !sum.is_zero() {
                self.coeffs.insert(v, sum);
            }
        }
        self.constant += other.constant;
        self
    }
}

impl Expr {
    pub fn num(n: i64) -> Expr {
        Expr::Num(int(n))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) | Expr::Pow(e, _) => e.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Normalizes to a linear form, failing on any non-affine construct.
    pub fn linearize(&self) -> Result<LinearForm, NonAffine> {
        Ok(match self {
            Expr::Num(n) => LinearForm::constant(n.clone()),
            Expr::Var(v) => LinearForm { coeffs: BTreeMap::from([(v.clone(), Rational::one())]), constant: Rational::zero() },
            Expr::Neg(e) => e.linearize()?.scale(&int(-1)),
            Expr::Add(a, b) => a.linearize()?.add(b.linearize()?),
            Expr::Sub(a, b) => a.linearize()?.add(b.linearize()?.scale(&int(-1))),
            Expr::Mul(a, b) => {
                let (la, lb) = (a.linearize()?, b.linearize()?);
                match (la.as_constant(), lb.as_constant()) {
                    (Some(k), _) => lb.scale(&k.clone()),
                    (_, Some(k)) => la.scale(&k.clone()),
                    _ => return Err(NonAffine::Product),
                }
            }
            Expr::Div(a, b) => {
                let lb = b.linearize()?;
                let k = lb.as_constant().ok_or(NonAffine::NonConstantDivisor)?;
                if k.is_zero() {
                    return Err(NonAffine::DivisionByZero);
                }
                a.linearize()?.scale(&k.recip())
            }
            Expr::Pow(base, n) => {
                let lb = base.linearize()?;
                match (lb.as_constant(), n) {
                    (Some(k), _) => LinearForm::constant(num_traits::pow(k.clone(), *n as usize)),
                    (None, 0) => LinearForm::constant(Rational::one()),
                    (None, 1) => lb,
                    (None, _) => return Err(NonAffine::Power(*n)),
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(n) if n.is_negative() => 3,
            Expr::Num(_) | Expr::Var(_) => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(n) => f.write_str(&fmt_rational(n))?,
            Expr::Var(v) => f.write_str(v)?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write_prec(f, 3)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                b.write_prec(f, 2)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { " * " } else { " / " })?;
                b.write_prec(f, 3)?;
            }
            Expr::Pow(base, n) => {
                base.write_prec(f, 5)?;
                write!(f, "^{n}")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

/// `coeff * var + constant`; `var` is `None` for constant expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineExpr {
    pub coeff: Rational,
    pub constant: Rational,
    pub var: Option<String>,
}

impl AffineExpr {
    pub fn new(coeff: Rational, var: Option<&str>, constant: Rational) -> Self {
        AffineExpr { coeff, constant, var: var.map(str::to_string) }
    }

    /// Single-variable view of a linear form; `None` if it mentions two or more variables.
    pub fn from_linear(lf: &LinearForm) -> Option<AffineExpr> {
        match lf.coeffs.len() {
            0 => Some(AffineExpr { coeff: Rational::zero(), constant: lf.constant.clone(), var: None }),
            1 => {
                let (v, c) = lf.coeffs.iter().next()?;
                Some(AffineExpr { coeff: c.clone(), constant: lf.constant.clone(), var: Some(v.clone()) })
            }
            _ => None,
        }
    }

    pub fn from_expr(e: &Expr) -> Option<AffineExpr> {
        AffineExpr::from_linear(&e.linearize().ok()?)
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.var {
            Some(v) if !self.coeff.is_zero() => {
                write!(f, "{} * {}", fmt_rational(&self.coeff), v)?;
                if !self.constant.is_zero() {
                    write!(f, " + {}", fmt_rational(&self.constant))?;
                }
                Ok(())
            }
            _ => f.write_str(&fmt_rational(&self.constant)),
        }
    }
}

/// Region of the variable where `a*x + b > 0` (`positive`) or `< 0`.
pub fn sign_region(e: &AffineExpr, positive: bool) -> Interval {
    let (a, b) = (&e.coeff, &e.constant);
    if a.is_zero() {
        let holds = if positive { b.is_positive() } else { b.is_negative() };
        return if holds { Interval::real_line() } else { Interval::Empty };
    }
    let root = -(b / a);
    // a*x + b > 0 <=> x > root when a > 0.
    if a.is_positive() == positive {
        Interval::new(Bound::Open(root), Bound::Unbounded)
    } else {
        Interval::new(Bound::Unbounded, Bound::Open(root))
    }
}

/// `lhs op rhs` as written; becomes a [`Comparison`] only when it
/// normalizes to a single variable against a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

impl Relation {
    pub fn to_comparison(&self) -> Option<Comparison> {
        let diff = Expr::Sub(Box::new(self.lhs.clone()), Box::new(self.rhs.clone())).linearize().ok()?;
        if diff.coeffs.len() != 1 {
            return None;
        }
        let (var, c) = diff.coeffs.iter().next()?;
        // c*var + k op 0  <=>  var op' -k/c
        let bound = -(&diff.constant / c);
        let op = if c.is_negative() { self.op.mirrored() } else { self.op };
        Some(Comparison { var: var.clone(), op, bound })
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut v = self.lhs.variables();
        v.extend(self.rhs.variables());
        v
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op, self.rhs)
    }
}
