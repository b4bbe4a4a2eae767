//! Well-formedness check: constraint grammar, closed-form flows and
//! monotonicity within invariant bounds.

use serde::Serialize;

use crate::expr::Interval;
use crate::model::{Atom, DiagCode, Diagnostic, HybridAutomaton, Network, Span};
use crate::odesolve::{classify_monotonicity, solve_ode, Monotonicity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    NonCvxConstraint,
    NoClosedForm,
    NonMonotone,
}

impl ViolationKind {
    pub fn code(self) -> DiagCode {
        match self {
            ViolationKind::NonCvxConstraint => DiagCode::NonCvxConstraint,
            ViolationKind::NoClosedForm => DiagCode::NoClosedForm,
            ViolationKind::NonMonotone => DiagCode::NonMonotone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Location name or `src -> dst` edge description.
    pub site: String,
    pub detail: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhaReport {
    pub automaton: String,
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
}

impl WhaReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn kinds(&self) -> Vec<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        self.violations
            .iter()
            .map(|v| {
                Diagnostic::error(v.kind.code(), v.span, v.detail.clone()).in_automaton(&self.automaton).at_site(v.site.clone())
            })
            .collect()
    }
}

fn check_atoms(atoms: &[Atom], site: &str, out: &mut Vec<Violation>) {
    for atom in atoms {
        if atom.rel.to_comparison().is_none() {
            out.push(Violation {
                kind: ViolationKind::NonCvxConstraint,
                site: site.to_string(),
                detail: format!("`{}` is not a comparison of one variable against a constant", atom.rel),
                span: atom.span,
            });
        }
    }
}

/// Checks every well-formedness criterion and reports all violations.
pub fn check_wha(ha: &HybridAutomaton) -> WhaReport {
    let mut violations = Vec::new();
    for loc in &ha.locations {
        check_atoms(&loc.invariant, &loc.name, &mut violations);
        for flow in &loc.flows {
            let witness = match solve_ode(&flow.var, &flow.rhs) {
                Ok(w) => w,
                Err(e) => {
                    violations.push(Violation {
                        kind: ViolationKind::NoClosedForm,
                        site: loc.name.clone(),
                        detail: e.to_string(),
                        span: flow.span,
                    });
                    continue;
                }
            };
            let bounds = loc.invariant_bounds(&flow.var);
            if classify_monotonicity(&witness.rhs(), &bounds, &Interval::real_line()) == Monotonicity::NonMonotone {
                violations.push(Violation {
                    kind: ViolationKind::NonMonotone,
                    site: loc.name.clone(),
                    detail: format!("slope of {}' = {} changes sign within {}", flow.var, flow.rhs, bounds),
                    span: flow.span,
                });
            }
        }
    }
    for edge in &ha.edges {
        check_atoms(&edge.guard, &edge.describe(), &mut violations);
    }
    let verdict = if violations.is_empty() { Verdict::Pass } else { Verdict::Fail };
    WhaReport { automaton: ha.name.clone(), verdict, violations }
}

pub fn check_network(n: &Network) -> Vec<WhaReport> {
    n.automata.iter().map(check_wha).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn single(text: &str) -> HybridAutomaton {
        parse_model(text).unwrap().automata.remove(0)
    }

    #[test]
    fn water_tank_is_well_formed() {
        let ha = single(include_str!("../models/watertank.pha"));
        let report = check_wha(&ha);
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn squared_flow_has_no_closed_form() {
        let ha = single("network n\nautomaton a\n  var x init 1\n  initial location p\n    flow x' = x^2\n");
        assert_eq!(check_wha(&ha).kinds(), vec![ViolationKind::NoClosedForm]);
        let ha = single("network n\nautomaton a\n  var x init 1\n  initial location p\n    flow x' = x * x\n");
        assert_eq!(check_wha(&ha).kinds(), vec![ViolationKind::NoClosedForm]);
    }

    #[test]
    fn wide_invariant_is_non_monotone() {
        let ha = single(
            "network n\nautomaton a\n  var x init 20\n  initial location p\n    invariant 0 <= x <= 300\n    flow x' = 0.075 * (150 - x)\n",
        );
        let report = check_wha(&ha);
        assert_eq!(report.verdict, Verdict::Fail);
        assert_eq!(report.kinds(), vec![ViolationKind::NonMonotone]);
    }

    #[test]
    fn all_violations_are_reported_in_order() {
        let ha = single(
            "network n\nautomaton a\n  var x init 0\n  var y init 0\n\
             initial location p\n    invariant x <= y\n    flow x' = y\n    flow y' = 0.1 * (5 - y)\n    invariant 0 <= y <= 10\n\
             location q\n    flow x' = x^3\n\
             edge p -> q guard x + y >= 1\n",
        );
        let report = check_wha(&ha);
        assert_eq!(
            report.kinds(),
            vec![
                ViolationKind::NonCvxConstraint,
                ViolationKind::NoClosedForm,
                ViolationKind::NonMonotone,
                ViolationKind::NoClosedForm,
                ViolationKind::NonCvxConstraint,
            ]
        );
        assert_eq!(report.violations[0].site, "p");
        assert_eq!(report.violations[4].site, "p -> q");
    }

    #[test]
    fn check_is_deterministic_and_pure() {
        let ha = single(include_str!("../models/thermostat.pha"));
        let before = ha.clone();
        assert_eq!(check_wha(&ha), check_wha(&ha));
        assert_eq!(ha, before);
    }
}
