//! Synchronous abstraction of a well-formed automaton: witness functions,
//! worst-case dwell per location and the matching tick bound.

use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::{rational_to_f64, Interval};
use crate::model::{DiagCode, Diagnostic, HybridAutomaton, Location, Span};
use crate::odesolve::{classify_monotonicity, solve_ode, time_to_reach, Monotonicity, Reach, WitnessFunction, WitnessKind};
use crate::whacheck::check_wha;

#[derive(Debug, Clone, PartialEq)]
pub struct LocationAnalysis {
    pub location: String,
    /// One witness per automaton variable, in declaration order.
    pub witnesses: Vec<WitnessFunction>,
    pub monotonicity: Vec<Monotonicity>,
    /// Seconds; `f64::INFINITY` when no bound exists.
    pub worst_case_time: f64,
    pub nsteps: Option<u64>,
    pub fairness_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sha {
    pub automaton: HybridAutomaton,
    pub delta: f64,
    pub analyses: Vec<LocationAnalysis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShaWarning {
    pub automaton: String,
    pub location: String,
    pub span: Span,
}

impl ShaWarning {
    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::warning(
            DiagCode::FairnessRequired,
            self.span,
            format!("location `{}` has no bounded dwell; an egress event is required to make progress", self.location),
        )
        .in_automaton(&self.automaton)
        .at_site(self.location.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShaError {
    #[error("step size must be a positive number of seconds, got {0}")]
    NonPositiveDelta(f64),
    #[error("automaton `{automaton}` is not well formed ({count} violation(s))")]
    NotWellFormed { automaton: String, count: usize },
}

/// Ticks needed to cover `time` seconds, rounded up.
pub fn nsteps_for(time: f64, delta: f64) -> Option<u64> {
    time.is_finite().then(|| (time / delta).ceil() as u64)
}

/// Worst-case time for one monotone witness to leave the invariant when
/// entered anywhere in `boundary`.
pub fn worst_case_dwell(w: &WitnessFunction, mono: Monotonicity, boundary: &Interval, invariant: &Interval) -> f64 {
    let (from, to) = match mono {
        Monotonicity::Increasing => (boundary.inf(), invariant.sup()),
        Monotonicity::Decreasing => (boundary.sup(), invariant.inf()),
        Monotonicity::Constant | Monotonicity::NonMonotone => return f64::INFINITY,
    };
    let (Some(from), Some(to)) = (from, to) else {
        return f64::INFINITY;
    };
    let x0 = rational_to_f64(from);
    match time_to_reach(w, x0, rational_to_f64(to)) {
        Reach::At(t) => t,
        Reach::Infinite => f64::INFINITY,
        Reach::Unreachable => 0.0,
    }
}

fn analyse_location(ha: &HybridAutomaton, loc: &Location, delta: f64) -> LocationAnalysis {
    let mut witnesses = Vec::new();
    let mut monotonicity = Vec::new();
    let mut worst = f64::INFINITY;
    for var in ha.var_names() {
        let w = match loc.flow(var) {
            Some(f) => solve_ode(var, &f.rhs).expect("well-formed flows have closed forms"),
            None => WitnessFunction::constant(var),
        };
        let invariant = loc.invariant_bounds(var);
        let boundary = loc.boundary_of(var).intersect(&invariant);
        let mono = match w.kind {
            WitnessKind::Constant => Monotonicity::Constant,
            _ => classify_monotonicity(&w.rhs(), &invariant, &boundary),
        };
        worst = worst.min(worst_case_dwell(&w, mono, &boundary, &invariant));
        witnesses.push(w);
        monotonicity.push(mono);
    }
    LocationAnalysis {
        location: loc.name.clone(),
        witnesses,
        monotonicity,
        worst_case_time: worst,
        nsteps: nsteps_for(worst, delta),
        fairness_warning: worst.is_infinite(),
    }
}

pub fn generate_sha(ha: &HybridAutomaton, delta: f64) -> Result<(Sha, Vec<ShaWarning>), ShaError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ShaError::NonPositiveDelta(delta));
    }
    let report = check_wha(ha);
    if !report.passed() {
        return Err(ShaError::NotWellFormed { automaton: ha.name.clone(), count: report.violations.len() });
    }
    let analyses: Vec<LocationAnalysis> = ha.locations.iter().map(|l| analyse_location(ha, l, delta)).collect();
    let warnings = analyses
        .iter()
        .zip(&ha.locations)
        .filter(|(a, _)| a.fairness_warning)
        .map(|(a, l)| ShaWarning { automaton: ha.name.clone(), location: a.location.clone(), span: l.span })
        .collect();
    Ok((Sha { automaton: ha.clone(), delta, analyses }, warnings))
}

impl Sha {
    pub fn analysis(&self, location: &str) -> Option<&LocationAnalysis> {
        self.analyses.iter().find(|a| a.location == location)
    }

    pub fn to_ir(&self) -> Value {
        let locations: Vec<Value> = self
            .analyses
            .iter()
            .map(|a| {
                let witnesses: Vec<Value> = a.witnesses.iter().zip(&a.monotonicity).map(|(w, m)| witness_ir(w, *m)).collect();
                json!({
                    "location": a.location,
                    "witnesses": witnesses,
                    "worst_case_time": if a.worst_case_time.is_finite() { json!(a.worst_case_time) } else { json!("inf") },
                    "nsteps": a.nsteps,
                    "fairness_warning": a.fairness_warning,
                })
            })
            .collect();
        json!({ "automaton": self.automaton.name, "delta": self.delta, "locations": locations })
    }
}

fn witness_ir(w: &WitnessFunction, m: Monotonicity) -> Value {
    let mut v = json!({ "var": w.var, "kind": w.kind_name(), "monotonicity": m });
    match &w.kind {
        WitnessKind::Constant => {}
        WitnessKind::Linear { slope } => v["slope"] = json!(rational_to_f64(slope)),
        WitnessKind::Exponential { rate, equilibrium } => {
            v["rate"] = json!(rational_to_f64(rate));
            v["equilibrium"] = json!(rational_to_f64(equilibrium));
        }
    }
    v
}

/// Entry value at which a location's dwell is longest for `var`.
pub fn worst_entry(loc: &Location, var: &str, mono: Monotonicity) -> Option<f64> {
    let boundary = loc.boundary_of(var).intersect(&loc.invariant_bounds(var));
    let end = match mono {
        Monotonicity::Increasing => boundary.inf(),
        Monotonicity::Decreasing => boundary.sup(),
        _ => None,
    };
    end.map(rational_to_f64)
}
