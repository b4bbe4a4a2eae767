//! Hybrid-automaton networks: data model, reference validation and the
//! textual model format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{fmt_rational, AffineExpr, Comparison, Constraint, Expr, Interval, Rational, Relation};

mod parse;

pub use parse::parse_syntax;

/// Source position. Positions never take part in equality so that a
/// re-serialized model compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub fn new(line: usize, column: usize) -> Self {
        Span { line, column }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

/// One relation of a guard or invariant, exactly as written.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub rel: Relation,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub var: String,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDecl {
    pub var: String,
    pub interval: Interval,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub name: String,
    pub initial: bool,
    pub invariant: Vec<Atom>,
    pub flows: Vec<Flow>,
    pub boundary: Vec<BoundaryDecl>,
    pub span: Span,
}

impl Location {
    /// The invariant as a constraint, or `None` if some relation lies outside the grammar.
    pub fn invariant_constraint(&self) -> Option<Constraint> {
        atoms_to_constraint(&self.invariant)
    }

    /// Projection of the well-formed invariant conjuncts onto `var`.
    pub fn invariant_bounds(&self, var: &str) -> Interval {
        let c = Constraint::new(self.invariant.iter().filter_map(|a| a.rel.to_comparison()).collect());
        crate::expr::constraint_to_interval(&c, var)
    }

    /// Declared flow of `var`; `None` means the variable is held constant.
    pub fn flow(&self, var: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.var == var)
    }

    /// Entry interval of `var`; defaults to the invariant projection.
    pub fn boundary_of(&self, var: &str) -> Interval {
        self.boundary
            .iter()
            .find(|b| b.var == var)
            .map(|b| b.interval.clone())
            .unwrap_or_else(|| self.invariant_bounds(var))
    }
}

pub fn atoms_to_constraint(atoms: &[Atom]) -> Option<Constraint> {
    atoms.iter().map(|a| a.rel.to_comparison()).collect::<Option<Vec<Comparison>>>().map(Constraint::new)
}

/// Conjunction of required-present and required-absent events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLiteral {
    pub present: Vec<String>,
    pub absent: Vec<String>,
}

impl EventLiteral {
    pub fn is_empty(&self) -> bool {
        self.present.is_empty() && self.absent.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = &String> {
        self.present.iter().chain(self.absent.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub var: String,
    pub rhs: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub event: EventLiteral,
    pub guard: Vec<Atom>,
    pub updates: Vec<Update>,
    pub emits: Vec<String>,
    pub span: Span,
}

impl Edge {
    pub fn guard_constraint(&self) -> Option<Constraint> {
        atoms_to_constraint(&self.guard)
    }

    pub fn describe(&self) -> String {
        format!("{} -> {}", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub init: Option<Rational>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventDecl {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridAutomaton {
    pub name: String,
    pub variables: Vec<VarDecl>,
    pub inputs: Vec<EventDecl>,
    pub outputs: Vec<EventDecl>,
    pub locations: Vec<Location>,
    pub edges: Vec<Edge>,
    pub span: Span,
}

impl HybridAutomaton {
    pub fn var_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.name == name)
    }

    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.name == name)
    }

    pub fn initial_location(&self) -> Option<&Location> {
        self.locations.iter().find(|l| l.initial)
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|e| e.name.as_str()).collect()
    }

    /// Events that trigger at least one edge, in first-use order.
    pub fn triggering_events(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for e in &self.edges {
            for ev in e.event.events() {
                if !seen.contains(&ev.as_str()) {
                    seen.push(ev.as_str());
                }
            }
        }
        seen
    }

    pub fn init_value(&self, var: &str) -> Option<&Rational> {
        self.variables.iter().find(|v| v.name == var).and_then(|v| v.init.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub automata: Vec<HybridAutomaton>,
    pub span: Span,
}

impl Network {
    pub fn automaton(&self, name: &str) -> Option<&HybridAutomaton> {
        self.automata.iter().find(|a| a.name == name)
    }

    /// Events in first-declaration order: each automaton's inputs, then its outputs.
    pub fn event_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.automata {
            for e in a.inputs.iter().chain(a.outputs.iter()) {
                if !out.contains(&e.name) {
                    out.push(e.name.clone());
                }
            }
        }
        out
    }

    /// Outputs of one automaton that another automaton consumes.
    pub fn internal_events(&self) -> BTreeSet<String> {
        let outputs: BTreeSet<&str> = self.automata.iter().flat_map(|a| a.output_names()).collect();
        self.automata
            .iter()
            .flat_map(|a| a.input_names())
            .filter(|e| outputs.contains(e))
            .map(str::to_string)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagCode {
    Syntax,
    UnknownLocation,
    UnknownVariable,
    UnknownEvent,
    EventDirection,
    DuplicateFlow,
    DuplicateLocation,
    DuplicateDeclaration,
    MissingInit,
    MissingInitialLocation,
    MultipleInitialLocations,
    SharedWriteConflict,
    NonAffineUpdate,
    NonCvxConstraint,
    NoClosedForm,
    NonMonotone,
    FairnessRequired,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Syntax => "SYNTAX",
            DiagCode::UnknownLocation => "UNKNOWN_LOCATION",
            DiagCode::UnknownVariable => "UNKNOWN_VARIABLE",
            DiagCode::UnknownEvent => "UNKNOWN_EVENT",
            DiagCode::EventDirection => "EVENT_DIRECTION",
            DiagCode::DuplicateFlow => "DUPLICATE_FLOW",
            DiagCode::DuplicateLocation => "DUPLICATE_LOCATION",
            DiagCode::DuplicateDeclaration => "DUPLICATE_DECLARATION",
            DiagCode::MissingInit => "MISSING_INIT",
            DiagCode::MissingInitialLocation => "MISSING_INITIAL_LOCATION",
            DiagCode::MultipleInitialLocations => "MULTIPLE_INITIAL_LOCATIONS",
            DiagCode::SharedWriteConflict => "SHARED_WRITE_CONFLICT",
            DiagCode::NonAffineUpdate => "NON_AFFINE_UPDATE",
            DiagCode::NonCvxConstraint => "NON_CVX_CONSTRAINT",
            DiagCode::NoClosedForm => "NO_CLOSED_FORM",
            DiagCode::NonMonotone => "NON_MONOTONE",
            DiagCode::FairnessRequired => "FAIRNESS_REQUIRED",
        }
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub severity: Severity,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub automaton: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    pub line: usize,
    pub column: usize,
}

impl Diagnostic {
    pub fn error(code: DiagCode, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            severity: Severity::Error,
            message: message.into(),
            automaton: None,
            site: None,
            line: span.line,
            column: span.column,
        }
    }

    pub fn warning(code: DiagCode, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, ..Diagnostic::error(code, span, message) }
    }

    pub fn in_automaton(mut self, name: &str) -> Self {
        self.automaton = Some(name.to_string());
        self
    }

    pub fn at_site(mut self, site: impl Into<String>) -> Self {
        self.site = Some(site.into());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {} {}", self.line, self.column, self.code, self.message)
    }
}

/// Renders diagnostics as the `{"diagnostics": [...]}` document.
pub fn diagnostics_json(diags: &[Diagnostic]) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "diagnostics": diags })).expect("diagnostics serialize")
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", summarize(.diagnostics))]
pub struct ModelError {
    pub diagnostics: Vec<Diagnostic>,
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    pub fn codes(&self) -> Vec<DiagCode> {
        self.diagnostics.iter().map(|d| d.code).collect()
    }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<Network, ModelError> {
    let network = parse_syntax(text).map_err(|d| ModelError { diagnostics: vec![d] })?;
    let diagnostics = validate_references(&network);
    if diagnostics.is_empty() {
        Ok(network)
    } else {
        Err(ModelError { diagnostics })
    }
}

/// All reference and well-definedness violations, ordered by source position.
pub fn validate_references(n: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut automaton_names: BTreeMap<&str, Span> = BTreeMap::new();
    let mut var_owner: BTreeMap<&str, &str> = BTreeMap::new();
    let mut output_owner: BTreeMap<&str, &str> = BTreeMap::new();
    for a in &n.automata {
        if automaton_names.insert(&a.name, a.span).is_some() {
            out.push(Diagnostic::error(DiagCode::DuplicateDeclaration, a.span, format!("automaton `{}` declared twice", a.name)));
        }
        for v in &a.variables {
            match var_owner.get(v.name.as_str()) {
                Some(owner) if *owner != a.name => out.push(
                    Diagnostic::error(
                        DiagCode::SharedWriteConflict,
                        v.span,
                        format!("variable `{}` is already owned by automaton `{owner}`", v.name),
                    )
                    .in_automaton(&a.name),
                ),
                _ => {
                    var_owner.insert(&v.name, &a.name);
                }
            }
        }
        for e in &a.outputs {
            match output_owner.get(e.name.as_str()) {
                Some(owner) if *owner != a.name => out.push(
                    Diagnostic::error(
                        DiagCode::SharedWriteConflict,
                        e.span,
                        format!("event `{}` is already emitted by automaton `{owner}`", e.name),
                    )
                    .in_automaton(&a.name),
                ),
                _ => {
                    output_owner.insert(&e.name, &a.name);
                }
            }
        }
        validate_automaton(a, &mut out);
    }
    out.sort_by_key(|d| (d.line, d.column));
    out
}

fn validate_automaton(a: &HybridAutomaton, out: &mut Vec<Diagnostic>) {
    let mut push = |d: Diagnostic| out.push(d.in_automaton(&a.name));
    let mut vars = BTreeSet::new();
    for v in &a.variables {
        if !vars.insert(v.name.as_str()) {
            push(Diagnostic::error(DiagCode::DuplicateDeclaration, v.span, format!("variable `{}` declared twice", v.name)));
        }
        if v.init.is_none() {
            push(Diagnostic::error(DiagCode::MissingInit, v.span, format!("variable `{}` has no initial value", v.name)));
        }
    }
    let mut inputs = BTreeSet::new();
    let mut outputs = BTreeSet::new();
    for e in &a.inputs {
        if !inputs.insert(e.name.as_str()) {
            push(Diagnostic::error(DiagCode::DuplicateDeclaration, e.span, format!("input `{}` declared twice", e.name)));
        }
    }
    for e in &a.outputs {
        if !outputs.insert(e.name.as_str()) || inputs.contains(e.name.as_str()) {
            push(Diagnostic::error(DiagCode::DuplicateDeclaration, e.span, format!("event `{}` declared twice", e.name)));
        }
    }

    let mut locs = BTreeSet::new();
    let mut initials = Vec::new();
    for l in &a.locations {
        if !locs.insert(l.name.as_str()) {
            push(Diagnostic::error(DiagCode::DuplicateLocation, l.span, format!("location `{}` declared twice", l.name)));
        }
        if l.initial {
            initials.push(l);
        }
        for atom in &l.invariant {
            check_vars(&atom.rel.variables(), &vars, atom.span, &l.name, &mut push);
        }
        let mut flowed = BTreeSet::new();
        for f in &l.flows {
            if !vars.contains(f.var.as_str()) {
                push(unknown_var(&f.var, f.span, &l.name));
            } else if !flowed.insert(f.var.as_str()) {
                push(
                    Diagnostic::error(DiagCode::DuplicateFlow, f.span, format!("second flow for `{}`", f.var))
                        .at_site(l.name.clone()),
                );
            }
            check_vars(&f.rhs.variables(), &vars, f.span, &l.name, &mut push);
        }
        let mut bounded = BTreeSet::new();
        for b in &l.boundary {
            if !vars.contains(b.var.as_str()) {
                push(unknown_var(&b.var, b.span, &l.name));
            } else if !bounded.insert(b.var.as_str()) {
                push(
                    Diagnostic::error(DiagCode::DuplicateDeclaration, b.span, format!("second boundary for `{}`", b.var))
                        .at_site(l.name.clone()),
                );
            }
        }
    }
    match initials.as_slice() {
        [] => push(Diagnostic::error(DiagCode::MissingInitialLocation, a.span, format!("automaton `{}` has no initial location", a.name))),
        [_] => {}
        [_, rest @ ..] => {
            for l in rest {
                push(Diagnostic::error(DiagCode::MultipleInitialLocations, l.span, format!("`{}` is a second initial location", l.name)));
            }
        }
    }

    for e in &a.edges {
        let site = e.describe();
        for end in [&e.src, &e.dst] {
            if !locs.contains(end.as_str()) {
                push(
                    Diagnostic::error(DiagCode::UnknownLocation, e.span, format!("unknown location `{end}`")).at_site(site.clone()),
                );
            }
        }
        for ev in e.event.events() {
            if outputs.contains(ev.as_str()) {
                push(
                    Diagnostic::error(DiagCode::EventDirection, e.span, format!("edge is triggered by output event `{ev}`"))
                        .at_site(site.clone()),
                );
            } else if !inputs.contains(ev.as_str()) {
                push(Diagnostic::error(DiagCode::UnknownEvent, e.span, format!("unknown event `{ev}`")).at_site(site.clone()));
            }
        }
        for ev in &e.emits {
            if inputs.contains(ev.as_str()) {
                push(
                    Diagnostic::error(DiagCode::EventDirection, e.span, format!("edge emits input event `{ev}`"))
                        .at_site(site.clone()),
                );
            } else if !outputs.contains(ev.as_str()) {
                push(Diagnostic::error(DiagCode::UnknownEvent, e.span, format!("unknown event `{ev}`")).at_site(site.clone()));
            }
        }
        for atom in &e.guard {
            check_vars(&atom.rel.variables(), &vars, atom.span, &site, &mut push);
        }
        let mut assigned = BTreeSet::new();
        for u in &e.updates {
            if !vars.contains(u.var.as_str()) {
                push(unknown_var(&u.var, u.span, &site));
            } else if !assigned.insert(u.var.as_str()) {
                push(
                    Diagnostic::error(DiagCode::DuplicateDeclaration, u.span, format!("`{}` assigned twice", u.var))
                        .at_site(site.clone()),
                );
            }
            check_vars(&u.rhs.variables(), &vars, u.span, &site, &mut push);
            if let Err(why) = u.rhs.linearize() {
                push(
                    Diagnostic::error(DiagCode::NonAffineUpdate, u.span, format!("update of `{}` is not affine: {why}", u.var))
                        .at_site(site.clone()),
                );
            }
        }
    }
}

fn unknown_var(var: &str, span: Span, site: &str) -> Diagnostic {
    Diagnostic::error(DiagCode::UnknownVariable, span, format!("unknown variable `{var}`")).at_site(site)
}

fn check_vars(used: &BTreeSet<String>, declared: &BTreeSet<&str>, span: Span, site: &str, push: &mut impl FnMut(Diagnostic)) {
    for v in used {
        if !declared.contains(v.as_str()) {
            push(unknown_var(v, span, site));
        }
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "network {}", self.name)?;
        for a in &self.automata {
            writeln!(f)?;
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

fn join_atoms(atoms: &[Atom]) -> String {
    atoms.iter().map(|a| a.rel.to_string()).collect::<Vec<_>>().join(" && ")
}

impl fmt::Display for HybridAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "automaton {}", self.name)?;
        for v in &self.variables {
            match &v.init {
                Some(init) => writeln!(f, "  var {} init {}", v.name, fmt_rational(init))?,
                None => writeln!(f, "  var {}", v.name)?,
            }
        }
        if !self.inputs.is_empty() {
            writeln!(f, "  input {}", self.input_names().join(" "))?;
        }
        if !self.outputs.is_empty() {
            writeln!(f, "  output {}", self.output_names().join(" "))?;
        }
        for l in &self.locations {
            writeln!(f, "  {}location {}", if l.initial { "initial " } else { "" }, l.name)?;
            if !l.invariant.is_empty() {
                writeln!(f, "    invariant {}", join_atoms(&l.invariant))?;
            }
            for fl in &l.flows {
                writeln!(f, "    flow {}' = {}", fl.var, fl.rhs)?;
            }
            for b in &l.boundary {
                let (lo, hi) = (b.interval.inf(), b.interval.sup());
                if let (Some(lo), Some(hi)) = (lo, hi) {
                    writeln!(f, "    boundary {} in [{}, {}]", b.var, fmt_rational(lo), fmt_rational(hi))?;
                }
            }
        }
        for e in &self.edges {
            write!(f, "  edge {} -> {}", e.src, e.dst)?;
            if !e.event.is_empty() {
                let lits: Vec<String> =
                    e.event.present.iter().cloned().chain(e.event.absent.iter().map(|a| format!("!{a}"))).collect();
                write!(f, " on {}", lits.join(" && "))?;
            }
            if !e.guard.is_empty() {
                write!(f, " guard {}", join_atoms(&e.guard))?;
            }
            if !e.updates.is_empty() {
                let ups: Vec<String> = e.updates.iter().map(|u| format!("{}' := {}", u.var, u.rhs)).collect();
                write!(f, " do {}", ups.join(", "))?;
            }
            if !e.emits.is_empty() {
                write!(f, " emit {}", e.emits.join(" "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Affine view of a flow right-hand side, if it is affine in at most one variable.
pub fn flow_affine(flow: &Flow) -> Option<AffineExpr> {
    AffineExpr::from_expr(&flow.rhs)
}
