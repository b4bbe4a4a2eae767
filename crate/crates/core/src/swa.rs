//! Synchronous witness automata: construction from an SHA, the tick
//! interpreter with saturation, parallel composition and lock-step
//! co-simulation, plus the trace and stimulus CSV formats.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::{rational_to_f64, CmpOp, Comparison, Expr};
use crate::model::{HybridAutomaton, Network};
use crate::odesolve::Law;
use crate::shagen::{generate_sha, Sha, ShaError, ShaWarning};

/// Set of events as bits over an [`EventTable`].
pub type EventMask = u128;

pub const MAX_EVENTS: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventTable {
    names: Vec<String>,
}

impl EventTable {
    pub fn new(names: Vec<String>) -> Result<Self, SwaError> {
        if names.len() > MAX_EVENTS {
            return Err(SwaError::TooManyEvents(names.len()));
        }
        Ok(EventTable { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn bit(&self, name: &str) -> Option<EventMask> {
        self.index(name).map(|i| 1u128 << i)
    }

    /// Mask of the named events; unknown names are ignored.
    pub fn mask<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> EventMask {
        names.into_iter().filter_map(|n| self.bit(n)).fold(0, |m, b| m | b)
    }

    /// Names present in `mask`, in table order.
    pub fn names_in(&self, mask: EventMask) -> Vec<&str> {
        self.names.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, n)| n.as_str()).collect()
    }

    /// Appends the events of `other` not yet present; returns the merged
    /// table and the bit remapping for masks over `other`.
    fn merge(&self, other: &EventTable) -> Result<(EventTable, Vec<usize>), SwaError> {
        let mut names = self.names.clone();
        let mut remap = Vec::with_capacity(other.len());
        for n in &other.names {
            match names.iter().position(|m| m == n) {
                Some(i) => remap.push(i),
                None => {
                    remap.push(names.len());
                    names.push(n.clone());
                }
            }
        }
        Ok((EventTable::new(names)?, remap))
    }
}

fn remap_mask(mask: EventMask, remap: &[usize]) -> EventMask {
    remap.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).fold(0, |m, (_, j)| m | 1u128 << j)
}

/// `v[var] op bound` over a runtime valuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cond {
    pub var: usize,
    pub op: CmpOp,
    pub bound: f64,
}

impl Cond {
    #[inline]
    pub fn holds(&self, vals: &[f64]) -> bool {
        self.op.holds(vals[self.var], self.bound)
    }
}

#[inline]
fn all_hold(conds: &[Cond], vals: &[f64]) -> bool {
    conds.iter().all(|c| c.holds(vals))
}

/// `sum(coeff * v[var]) + constant`, evaluated left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineF64 {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineF64 {
    #[inline]
    pub fn eval(&self, vals: &[f64]) -> f64 {
        let term = |&(var, coeff): &(usize, f64)| if coeff == 1.0 { vals[var] } else { coeff * vals[var] };
        let mut it = self.terms.iter();
        let Some(first) = it.next() else {
            return self.constant;
        };
        let mut acc = term(first);
        for t in it {
            acc = acc + term(t);
        }
        if self.constant != 0.0 {
            acc = acc + self.constant;
        }
        acc
    }

    fn shifted(&self, offset: usize) -> AffineF64 {
        AffineF64 { terms: self.terms.iter().map(|&(v, c)| (v + offset, c)).collect(), constant: self.constant }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Update {
    /// `x := expr`, evaluated on the saturated pre-jump valuation.
    Assign { var: usize, expr: AffineF64 },
    /// `x[0] := x[k]`: carry the (saturated) current value.
    Capture { var: usize },
    /// Recompute the constant of integration from the new value.
    ResolveC1 { var: usize },
    ResetK,
    Emit { event: usize },
}

impl Update {
    fn shifted(&self, offset: usize, remap: &[usize]) -> Update {
        match self {
            Update::Assign { var, expr } => Update::Assign { var: var + offset, expr: expr.shifted(offset) },
            Update::Capture { var } => Update::Capture { var: var + offset },
            Update::ResolveC1 { var } => Update::ResolveC1 { var: var + offset },
            Update::ResetK => Update::ResetK,
            Update::Emit { event } => Update::Emit { event: remap[*event] },
        }
    }
}

/// Composition rule that produced a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    Edge,
    IntraInter,
    InterIntra,
    InterInter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwaTransition {
    pub dst: usize,
    pub present: EventMask,
    pub absent: EventMask,
    /// Conditions on the current valuation `v`.
    pub hold: Vec<Cond>,
    /// Conditions on the witnessed next valuation.
    pub next: Vec<Cond>,
    /// Jump guard; failing non-strict conjuncts may be saturated.
    pub jump: Vec<Cond>,
    pub updates: Vec<Update>,
    pub rule: Rule,
    /// Per base automaton: index of the edge taken, or `None` if it stays.
    pub origin: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTransition {
    pub absent: EventMask,
    pub invariant: Vec<Cond>,
    /// One law per variable.
    pub witnesses: Vec<Law>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwaState {
    pub name: String,
    /// Location of each base automaton.
    pub components: Vec<String>,
    pub self_transition: SelfTransition,
    pub egress: Vec<SwaTransition>,
    pub nsteps: Option<u64>,
    /// Set on product states, where the bound is the minimum of the parts.
    pub nsteps_heuristic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swa {
    pub name: String,
    pub components: Vec<String>,
    pub vars: Vec<String>,
    pub init: Vec<f64>,
    pub events: EventTable,
    pub inputs: EventMask,
    pub outputs: EventMask,
    /// Outputs consumed inside the machine; delivered one tick late.
    pub internal: EventMask,
    pub states: Vec<SwaState>,
    pub initial: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwaError {
    #[error("{0} distinct events exceed the supported maximum of 128")]
    TooManyEvents(usize),
    #[error("step sizes differ: {0} vs {1}")]
    DeltaMismatch(f64, f64),
    #[error("variable `{0}` belongs to both operands")]
    SharedVariable(String),
    #[error("event `{0}` is emitted by both operands")]
    OutputConflict(String),
    #[error("product state name `{0}` is ambiguous")]
    NameCollision(String),
    #[error(transparent)]
    Sha(#[from] ShaError),
}

fn compile_cond(c: &Comparison, vars: &[String]) -> Cond {
    let var = vars.iter().position(|v| *v == c.var).expect("validated variable");
    Cond { var, op: c.op, bound: rational_to_f64(&c.bound) }
}

fn compile_affine(e: &Expr, vars: &[String]) -> AffineF64 {
    let lf = e.linearize().expect("validated affine update");
    let mut terms: Vec<(usize, f64)> = lf
        .coeffs
        .iter()
        .map(|(v, c)| (vars.iter().position(|x| x == v).expect("validated variable"), rational_to_f64(c)))
        .collect();
    terms.sort_by_key(|t| t.0);
    AffineF64 { terms, constant: rational_to_f64(&lf.constant) }
}

/// Value writes first (assignments, then captures), then C1 resolution,
/// tick reset and emissions.
fn canonical_updates(writes: Vec<Update>, nvars: usize, emits: Vec<usize>) -> Vec<Update> {
    let mut out: Vec<Update> = writes.iter().filter(|u| matches!(u, Update::Assign { .. })).cloned().collect();
    out.extend(writes.into_iter().filter(|u| matches!(u, Update::Capture { .. })));
    out.extend((0..nvars).map(|var| Update::ResolveC1 { var }));
    out.push(Update::ResetK);
    out.extend(emits.into_iter().map(|event| Update::Emit { event }));
    out
}

fn writes_of(t: &SwaTransition) -> impl Iterator<Item = &Update> {
    t.updates.iter().filter(|u| matches!(u, Update::Assign { .. } | Update::Capture { .. }))
}

fn emits_of(t: &SwaTransition) -> impl Iterator<Item = usize> + '_ {
    t.updates.iter().filter_map(|u| match u {
        Update::Emit { event } => Some(*event),
        _ => None,
    })
}

/// One state per location; witnesses move onto the self-transition and
/// each edge becomes an egress transition carrying its guard and updates.
pub fn build_swa(sha: &Sha) -> Swa {
    let ha = &sha.automaton;
    let vars: Vec<String> = ha.var_names().into_iter().map(str::to_string).collect();
    let mut names: Vec<String> = ha.input_names().into_iter().map(str::to_string).collect();
    names.extend(ha.output_names().into_iter().map(str::to_string));
    let events = EventTable::new(names).expect("a single automaton has few events");
    let self_absent = events.mask(ha.triggering_events());
    let states = ha
        .locations
        .iter()
        .zip(&sha.analyses)
        .map(|(loc, analysis)| {
            let invariant =
                loc.invariant_constraint().expect("well-formed").conjuncts.iter().map(|c| compile_cond(c, &vars)).collect();
            let egress = ha
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.src == loc.name)
                .map(|(idx, e)| {
                    let mut writes: Vec<Update> = e
                        .updates
                        .iter()
                        .map(|u| Update::Assign {
                            var: vars.iter().position(|v| *v == u.var).expect("validated"),
                            expr: compile_affine(&u.rhs, &vars),
                        })
                        .collect();
                    for (var, name) in vars.iter().enumerate() {
                        if !e.updates.iter().any(|u| u.var == *name) {
                            writes.push(Update::Capture { var });
                        }
                    }
                    let emits = e.emits.iter().map(|n| events.index(n).expect("declared output")).collect();
                    SwaTransition {
                        dst: ha.location_index(&e.dst).expect("validated"),
                        present: events.mask(e.event.present.iter().map(String::as_str)),
                        absent: events.mask(e.event.absent.iter().map(String::as_str)),
                        hold: Vec::new(),
                        next: Vec::new(),
                        jump: e.guard_constraint().expect("well-formed").conjuncts.iter().map(|c| compile_cond(c, &vars)).collect(),
                        updates: canonical_updates(writes, vars.len(), emits),
                        rule: Rule::Edge,
                        origin: vec![Some(idx)],
                    }
                })
                .collect();
            SwaState {
                name: loc.name.clone(),
                components: vec![loc.name.clone()],
                self_transition: SelfTransition {
                    absent: self_absent,
                    invariant,
                    witnesses: analysis.witnesses.iter().map(|w| w.law()).collect(),
                },
                egress,
                nsteps: analysis.nsteps,
                nsteps_heuristic: false,
            }
        })
        .collect();
    Swa {
        name: ha.name.clone(),
        components: vec![ha.name.clone()],
        init: ha.variables.iter().map(|v| rational_to_f64(v.init.as_ref().expect("validated init"))).collect(),
        vars,
        inputs: events.mask(ha.input_names()),
        outputs: events.mask(ha.output_names()),
        internal: 0,
        events,
        states,
        initial: ha.locations.iter().position(|l| l.initial).expect("validated initial location"),
        delta: sha.delta,
    }
}

fn min_nsteps(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Synchronous product of two machines.
pub fn compose(q1: &Swa, q2: &Swa) -> Result<Swa, SwaError> {
    if q1.delta != q2.delta {
        return Err(SwaError::DeltaMismatch(q1.delta, q2.delta));
    }
    if let Some(v) = q2.vars.iter().find(|v| q1.vars.contains(v)) {
        return Err(SwaError::SharedVariable(v.clone()));
    }
    let (events, remap) = q1.events.merge(&q2.events)?;
    let m2 = |mask: EventMask| remap_mask(mask, &remap);
    let (i1, o1, i2, o2) = (q1.inputs, q1.outputs, m2(q2.inputs), m2(q2.outputs));
    if o1 & o2 != 0 {
        return Err(SwaError::OutputConflict(events.names_in(o1 & o2)[0].to_string()));
    }
    let internal = q1.internal | m2(q2.internal) | (o1 & i2) | (o2 & i1);
    let off = q1.vars.len();
    let nvars = off + q2.vars.len();
    let shift = |c: &Cond| Cond { var: c.var + off, ..*c };
    let shift_all = |cs: &[Cond]| cs.iter().map(shift).collect::<Vec<_>>();
    let n2 = q2.states.len();
    let idx = |a: usize, b: usize| a * n2 + b;
    let none1 = vec![None; q1.components.len()];
    let none2 = vec![None; q2.components.len()];

    let mut states = Vec::with_capacity(q1.states.len() * n2);
    let mut seen = HashSet::new();
    for (src1, s1) in q1.states.iter().enumerate() {
        let self1 = &s1.self_transition;
        for (src2, s2) in q2.states.iter().enumerate() {
            let self2 = &s2.self_transition;
            let name = format!("{}{}", s1.name, s2.name);
            if !seen.insert(name.clone()) {
                return Err(SwaError::NameCollision(name));
            }
            let inv2 = shift_all(&self2.invariant);
            let capture1 = (0..off).map(|var| Update::Capture { var });
            let capture2 = (off..nvars).map(|var| Update::Capture { var });
            let mut egress = Vec::new();
            for e2 in &s2.egress {
                let mut writes: Vec<Update> = capture1.clone().collect();
                writes.extend(writes_of(e2).map(|u| u.shifted(off, &remap)));
                egress.push(SwaTransition {
                    dst: idx(src1, e2.dst),
                    present: m2(e2.present),
                    absent: self1.absent | m2(e2.absent),
                    hold: [self1.invariant.clone(), shift_all(&e2.hold)].concat(),
                    next: [self1.invariant.clone(), shift_all(&e2.next)].concat(),
                    jump: shift_all(&e2.jump),
                    updates: canonical_updates(writes, nvars, emits_of(e2).map(|e| remap[e]).collect()),
                    rule: Rule::IntraInter,
                    origin: [none1.clone(), e2.origin.clone()].concat(),
                });
            }
            for e1 in &s1.egress {
                let mut writes: Vec<Update> = writes_of(e1).cloned().collect();
                writes.extend(capture2.clone());
                egress.push(SwaTransition {
                    dst: idx(e1.dst, src2),
                    present: e1.present,
                    absent: e1.absent | m2(self2.absent),
                    hold: [e1.hold.clone(), inv2.clone()].concat(),
                    next: [e1.next.clone(), inv2.clone()].concat(),
                    jump: e1.jump.clone(),
                    updates: canonical_updates(writes, nvars, emits_of(e1).collect()),
                    rule: Rule::InterIntra,
                    origin: [e1.origin.clone(), none2.clone()].concat(),
                });
            }
            for e1 in &s1.egress {
                for e2 in &s2.egress {
                    let mut writes: Vec<Update> = writes_of(e1).cloned().collect();
                    writes.extend(writes_of(e2).map(|u| u.shifted(off, &remap)));
                    let emits = emits_of(e1).chain(emits_of(e2).map(|e| remap[e])).collect();
                    egress.push(SwaTransition {
                        dst: idx(e1.dst, e2.dst),
                        present: e1.present | m2(e2.present),
                        absent: e1.absent | m2(e2.absent),
                        hold: [e1.hold.clone(), shift_all(&e2.hold)].concat(),
                        next: [e1.next.clone(), shift_all(&e2.next)].concat(),
                        jump: [e1.jump.clone(), shift_all(&e2.jump)].concat(),
                        updates: canonical_updates(writes, nvars, emits),
                        rule: Rule::InterInter,
                        origin: [e1.origin.clone(), e2.origin.clone()].concat(),
                    });
                }
            }
            states.push(SwaState {
                name,
                components: [s1.components.clone(), s2.components.clone()].concat(),
                self_transition: SelfTransition {
                    absent: self1.absent | m2(self2.absent),
                    invariant: [self1.invariant.clone(), inv2].concat(),
                    witnesses: [self1.witnesses.clone(), self2.witnesses.clone()].concat(),
                },
                egress,
                nsteps: min_nsteps(s1.nsteps, s2.nsteps),
                nsteps_heuristic: true,
            });
        }
    }
    Ok(Swa {
        name: format!("{}_{}", q1.name, q2.name),
        components: [q1.components.clone(), q2.components.clone()].concat(),
        vars: [q1.vars.clone(), q2.vars.clone()].concat(),
        init: [q1.init.clone(), q2.init.clone()].concat(),
        events,
        inputs: i1 | i2,
        outputs: o1 | o2,
        internal,
        states,
        initial: idx(q1.initial, q2.initial),
        delta: q1.delta,
    })
}

/// Left-to-right product of all machines.
pub fn compose_all(parts: &[Swa]) -> Result<Swa, SwaError> {
    let (first, rest) = parts.split_first().expect("at least one machine");
    rest.iter().try_fold(first.clone(), |acc, q| compose(&acc, q))
}

/// SHA generation and SWA construction for every automaton of a network.
pub fn network_swas(n: &Network, delta: f64) -> Result<(Vec<Swa>, Vec<ShaWarning>), SwaError> {
    let mut parts = Vec::new();
    let mut warnings = Vec::new();
    for a in &n.automata {
        let (sha, w) = generate_sha(a, delta)?;
        parts.push(build_swa(&sha));
        warnings.extend(w);
    }
    Ok((parts, warnings))
}

/// The whole network as one product machine named after the network.
pub fn compose_network(n: &Network, delta: f64) -> Result<(Swa, Vec<ShaWarning>), SwaError> {
    let (parts, warnings) = network_swas(n, delta)?;
    let mut swa = compose_all(&parts)?;
    swa.name = n.name.clone();
    Ok((swa, warnings))
}

pub fn automaton_swa(ha: &HybridAutomaton, delta: f64) -> Result<(Swa, Vec<ShaWarning>), SwaError> {
    let (sha, w) = generate_sha(ha, delta)?;
    Ok((build_swa(&sha), w))
}

impl Swa {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Inputs the environment may drive.
    pub fn external_inputs(&self) -> EventMask {
        self.inputs & !self.internal
    }

    pub fn initial_state(&self) -> ExecState {
        let laws = &self.states[self.initial].self_transition.witnesses;
        ExecState {
            location: self.initial,
            prev_location: None,
            v: self.init.clone(),
            i: self.init.clone(),
            c1: laws.iter().zip(&self.init).map(|(l, x)| l.c1_for(*x)).collect(),
            k: 0,
            pending_pre: 0,
            tick: 0,
        }
    }

    pub fn describe_conds(&self, conds: &[Cond], index: &str) -> Vec<String> {
        conds.iter().map(|c| format!("{}[{index}] {} {:?}", self.vars[c.var], c.op, c.bound)).collect()
    }

    /// Readable self-loop guard, e.g. `!ON && !OFF && x[k] >= 20.0 && x[k] <= 100.0`.
    pub fn describe_self(&self, state: usize) -> String {
        let st = &self.states[state].self_transition;
        let mut parts: Vec<String> = self.events.names_in(st.absent).into_iter().map(|e| format!("!{e}")).collect();
        parts.extend(self.describe_conds(&st.invariant, "k"));
        if parts.is_empty() {
            "true".into()
        } else {
            parts.join(" && ")
        }
    }

    pub fn to_ir(&self) -> Value {
        let states: Vec<Value> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "name": s.name,
                    "components": s.components,
                    "self": self.describe_self(i),
                    "egress": s.egress.iter().map(|t| json!({
                        "dst": self.states[t.dst].name,
                        "rule": format!("{:?}", t.rule),
                        "present": self.events.names_in(t.present),
                        "absent": self.events.names_in(t.absent),
                        "guard": self.describe_conds(&t.jump, "k"),
                    })).collect::<Vec<_>>(),
                    "nsteps": s.nsteps,
                    "nsteps_heuristic": s.nsteps_heuristic,
                })
            })
            .collect();
        json!({
            "name": self.name,
            "delta": self.delta,
            "vars": self.vars,
            "events": self.events.names(),
            "internal": self.events.names_in(self.internal),
            "initial": self.states[self.initial].name,
            "states": states,
        })
    }
}

/// A DTTS state `(location, v, i, k)` plus the bookkeeping a reaction needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecState {
    pub location: usize,
    pub prev_location: Option<usize>,
    pub v: Vec<f64>,
    /// Entry valuation of the current location.
    pub i: Vec<f64>,
    pub c1: Vec<f64>,
    pub k: u64,
    /// Events emitted by the previous reaction.
    pub pending_pre: EventMask,
    /// Global tick counter.
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct UnreachableState {
    pub location: String,
    pub tick: u64,
    pub k: u64,
    pub values: Vec<(String, f64)>,
    pub next: Vec<(String, f64)>,
    pub inputs: Vec<String>,
}

impl fmt::Display for UnreachableState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no transition enabled in `{}` at tick {} (k = {}); v = {{", self.location, self.tick, self.k)?;
        let pairs = |xs: &[(String, f64)]| xs.iter().map(|(n, x)| format!("{n}: {x:?}")).collect::<Vec<_>>().join(", ");
        write!(f, "{}}}, next = {{{}}}, inputs = [{}]", pairs(&self.values), pairs(&self.next), self.inputs.join(", "))
    }
}

/// Returns `bound` when it lies in the closed range spanned by `a` and `b`
/// and the comparison admits equality.
#[inline]
pub fn saturate_between(a: f64, b: f64, op: CmpOp, bound: f64) -> Option<f64> {
    if op.is_strict() {
        return None;
    }
    (a.min(b) <= bound && bound <= a.max(b)).then_some(bound)
}

/// Saturated value for `law` at tick `k`, if the guard boundary was crossed
/// within `[(k-1)*delta, k*delta]`.
pub fn saturate(law: Law, c1: f64, k: u64, delta: f64, op: CmpOp, bound: f64) -> Option<f64> {
    let cur = law.at_tick(c1, delta, k);
    let prev = law.at_tick(c1, delta, k.saturating_sub(1));
    saturate_between(prev, cur, op, bound)
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    next: Vec<f64>,
    sat: Vec<f64>,
    newv: Vec<f64>,
}

impl Scratch {
    fn for_vars(n: usize) -> Self {
        Scratch { next: vec![0.0; n], sat: vec![0.0; n], newv: vec![0.0; n] }
    }
}

#[inline]
fn effective_inputs(swa: &Swa, pending_pre: EventMask, env: EventMask) -> EventMask {
    (env & !swa.internal) | (pending_pre & swa.internal)
}

#[inline]
fn witness_next(state: &SwaState, st: &ExecState, delta: f64, next: &mut [f64]) {
    for (j, law) in state.self_transition.witnesses.iter().enumerate() {
        next[j] = law.at_tick(st.c1[j], delta, st.k + 1);
    }
}

#[inline]
fn intra_enabled(state: &SwaState, inputs: EventMask, v: &[f64], next: &[f64]) -> bool {
    let s = &state.self_transition;
    inputs & s.absent == 0 && all_hold(&s.invariant, v) && all_hold(&s.invariant, next)
}

/// First enabled egress transition; leaves the saturated valuation in `sat`.
fn find_egress(state: &SwaState, inputs: EventMask, v: &[f64], next: &[f64], sat: &mut [f64]) -> Option<usize> {
    'outer: for (idx, t) in state.egress.iter().enumerate() {
        if inputs & t.present != t.present || inputs & t.absent != 0 {
            continue;
        }
        if !all_hold(&t.hold, v) || !all_hold(&t.next, next) {
            continue;
        }
        sat.copy_from_slice(v);
        for c in &t.jump {
            if !c.holds(sat) {
                match saturate_between(v[c.var], next[c.var], c.op, c.bound) {
                    Some(b) => sat[c.var] = b,
                    None => continue 'outer,
                }
            }
        }
        if all_hold(&t.jump, sat) {
            return Some(idx);
        }
    }
    None
}

/// Applies a transition's updates; returns the emitted events.
fn fire(t: &SwaTransition, dst: &SwaState, st: &mut ExecState, sat: &[f64], newv: &mut [f64]) -> EventMask {
    let mut emitted = 0;
    for u in &t.updates {
        match u {
            Update::Assign { var, expr } => newv[*var] = expr.eval(sat),
            Update::Capture { var } => newv[*var] = sat[*var],
            Update::ResolveC1 { var } => st.c1[*var] = dst.self_transition.witnesses[*var].c1_for(newv[*var]),
            Update::ResetK => st.k = 0,
            Update::Emit { event } => emitted |= 1u128 << event,
        }
    }
    st.v.copy_from_slice(newv);
    st.i.copy_from_slice(newv);
    st.location = t.dst;
    emitted
}

fn unreachable_state(swa: &Swa, st: &ExecState, next: &[f64], inputs: EventMask) -> UnreachableState {
    let named = |xs: &[f64]| swa.vars.iter().cloned().zip(xs.iter().copied()).collect();
    UnreachableState {
        location: swa.states[st.location].name.clone(),
        tick: st.tick,
        k: st.k,
        values: named(&st.v),
        next: named(next),
        inputs: swa.events.names_in(inputs).into_iter().map(str::to_string).collect(),
    }
}

fn react(swa: &Swa, st: &mut ExecState, env: EventMask, scratch: &mut Scratch) -> Result<EventMask, UnreachableState> {
    let inputs = effective_inputs(swa, st.pending_pre, env);
    let state = &swa.states[st.location];
    witness_next(state, st, swa.delta, &mut scratch.next);
    let mut emitted = 0;
    let here = st.location;
    if intra_enabled(state, inputs, &st.v, &scratch.next) {
        st.v.copy_from_slice(&scratch.next);
        st.k += 1;
    } else {
        match find_egress(state, inputs, &st.v, &scratch.next, &mut scratch.sat) {
            Some(idx) => {
                let t = &state.egress[idx];
                emitted = fire(t, &swa.states[t.dst], st, &scratch.sat, &mut scratch.newv);
            }
            None => return Err(unreachable_state(swa, st, &scratch.next, inputs)),
        }
    }
    st.prev_location = Some(here);
    st.pending_pre = emitted;
    st.tick += 1;
    Ok(emitted)
}

/// One synchronous reaction as a pure function of machine, state and inputs.
pub fn tick(swa: &Swa, st: &ExecState, env: EventMask) -> Result<(ExecState, EventMask), UnreachableState> {
    let mut next = st.clone();
    let mut scratch = Scratch::for_vars(swa.vars.len());
    let out = react(swa, &mut next, env, &mut scratch)?;
    Ok((next, out))
}

/// Anything that can be stepped tick by tick and traced.
pub trait Machine {
    fn var_names(&self) -> &[String];
    fn events(&self) -> &EventTable;
    fn external_inputs(&self) -> EventMask;
    fn delta(&self) -> f64;
    fn location_name(&self) -> String;
    fn values(&self) -> &[f64];
    fn step(&mut self, env: EventMask) -> Result<EventMask, UnreachableState>;
}

/// Interpreter for a single (possibly composed) machine.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub swa: &'a Swa,
    pub state: ExecState,
    scratch: Scratch,
}

impl<'a> Simulator<'a> {
    pub fn new(swa: &'a Swa) -> Self {
        Simulator { swa, state: swa.initial_state(), scratch: Scratch::for_vars(swa.vars.len()) }
    }

    /// Reacts once and also reports which egress transition fired.
    pub fn step_traced(&mut self, env: EventMask) -> Result<(EventMask, Option<usize>), UnreachableState> {
        let inputs = effective_inputs(self.swa, self.state.pending_pre, env);
        let state = &self.swa.states[self.state.location];
        witness_next(state, &self.state, self.swa.delta, &mut self.scratch.next);
        let fired = if intra_enabled(state, inputs, &self.state.v, &self.scratch.next) {
            None
        } else {
            find_egress(state, inputs, &self.state.v, &self.scratch.next, &mut self.scratch.sat)
        };
        let out = react(self.swa, &mut self.state, env, &mut self.scratch)?;
        Ok((out, fired))
    }

    /// Saturated valuation used by the most recent egress check.
    pub fn last_saturated(&self) -> &[f64] {
        &self.scratch.sat
    }
}

impl Machine for Simulator<'_> {
    fn var_names(&self) -> &[String] {
        &self.swa.vars
    }

    fn events(&self) -> &EventTable {
        &self.swa.events
    }

    fn external_inputs(&self) -> EventMask {
        self.swa.external_inputs()
    }

    fn delta(&self) -> f64 {
        self.swa.delta
    }

    fn location_name(&self) -> String {
        self.swa.states[self.state.location].name.clone()
    }

    fn values(&self) -> &[f64] {
        &self.state.v
    }

    #[inline]
    fn step(&mut self, env: EventMask) -> Result<EventMask, UnreachableState> {
        react(self.swa, &mut self.state, env, &mut self.scratch)
    }
}

/// Lock-step execution of separate machines with one-tick-delayed
/// delivery of internally produced events. Whenever any part jumps, every
/// other part re-anchors its witness at its current value.
#[derive(Debug, Clone)]
pub struct CoSimulator {
    parts: Vec<Swa>,
    states: Vec<ExecState>,
    scratch: Vec<Scratch>,
    events: EventTable,
    vars: Vec<String>,
    values: Vec<f64>,
    internal: EventMask,
    inputs: EventMask,
    pending_pre: EventMask,
    tick: u64,
    delta: f64,
}

impl CoSimulator {
    pub fn new(parts: &[Swa]) -> Result<Self, SwaError> {
        let mut events = EventTable::default();
        let mut remapped = Vec::new();
        for p in parts {
            if p.delta != parts[0].delta {
                return Err(SwaError::DeltaMismatch(parts[0].delta, p.delta));
            }
            let (merged, remap) = events.merge(&p.events)?;
            events = merged;
            remapped.push((p.clone(), remap));
        }
        let mut out = Vec::new();
        let (mut inputs, mut outputs, mut internal) = (0u128, 0u128, 0u128);
        for (mut p, remap) in remapped {
            let m = |mask: EventMask| remap_mask(mask, &remap);
            p.inputs = m(p.inputs);
            p.outputs = m(p.outputs);
            p.internal = m(p.internal);
            for s in &mut p.states {
                s.self_transition.absent = m(s.self_transition.absent);
                for t in &mut s.egress {
                    t.present = m(t.present);
                    t.absent = m(t.absent);
                    for u in &mut t.updates {
                        if let Update::Emit { event } = u {
                            *event = remap[*event];
                        }
                    }
                }
            }
            p.events = events.clone();
            if outputs & p.outputs != 0 {
                return Err(SwaError::OutputConflict(events.names_in(outputs & p.outputs)[0].to_string()));
            }
            internal |= p.internal | (outputs & p.inputs) | (p.outputs & inputs);
            inputs |= p.inputs;
            outputs |= p.outputs;
            out.push(p);
        }
        for p in &mut out {
            p.internal = internal;
        }
        let states: Vec<ExecState> = out.iter().map(Swa::initial_state).collect();
        let vars = out.iter().flat_map(|p| p.vars.iter().cloned()).collect::<Vec<_>>();
        let mut seen = HashSet::new();
        for v in &vars {
            if !seen.insert(v) {
                return Err(SwaError::SharedVariable(v.clone()));
            }
        }
        let values = states.iter().flat_map(|s| s.v.iter().copied()).collect();
        Ok(CoSimulator {
            scratch: out.iter().map(|p| Scratch::for_vars(p.vars.len())).collect(),
            delta: parts[0].delta,
            parts: out,
            states,
            events,
            vars,
            values,
            internal,
            inputs,
            pending_pre: 0,
            tick: 0,
        })
    }

    pub fn parts(&self) -> &[Swa] {
        &self.parts
    }

    pub fn states(&self) -> &[ExecState] {
        &self.states
    }

    fn refresh_values(&mut self) {
        self.values.clear();
        for s in &self.states {
            self.values.extend_from_slice(&s.v);
        }
    }
}

impl Machine for CoSimulator {
    fn var_names(&self) -> &[String] {
        &self.vars
    }

    fn events(&self) -> &EventTable {
        &self.events
    }

    fn external_inputs(&self) -> EventMask {
        self.inputs & !self.internal
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn location_name(&self) -> String {
        self.parts.iter().zip(&self.states).map(|(p, s)| p.states[s.location].name.as_str()).collect()
    }

    fn values(&self) -> &[f64] {
        &self.values
    }

    fn step(&mut self, env: EventMask) -> Result<EventMask, UnreachableState> {
        let inputs = (env & !self.internal) | (self.pending_pre & self.internal);
        let mut decisions = Vec::with_capacity(self.parts.len());
        for ((p, st), sc) in self.parts.iter().zip(&self.states).zip(&mut self.scratch) {
            let state = &p.states[st.location];
            witness_next(state, st, self.delta, &mut sc.next);
            if intra_enabled(state, inputs, &st.v, &sc.next) {
                decisions.push(None);
            } else {
                match find_egress(state, inputs, &st.v, &sc.next, &mut sc.sat) {
                    Some(idx) => decisions.push(Some(idx)),
                    None => {
                        let mut err = unreachable_state(p, st, &sc.next, inputs);
                        err.location = self.location_name();
                        err.tick = self.tick;
                        return Err(err);
                    }
                }
            }
        }
        let mut emitted = 0;
        let any_jump = decisions.iter().any(Option::is_some);
        for (((p, st), sc), d) in self.parts.iter().zip(&mut self.states).zip(&mut self.scratch).zip(decisions) {
            let here = st.location;
            match d {
                None if !any_jump => {
                    st.v.copy_from_slice(&sc.next);
                    st.k += 1;
                }
                None => {
                    let laws = &p.states[st.location].self_transition.witnesses;
                    for (j, law) in laws.iter().enumerate() {
                        st.c1[j] = law.c1_for(st.v[j]);
                    }
                    st.i.copy_from_slice(&st.v);
                    st.k = 0;
                }
                Some(idx) => {
                    let t = &p.states[st.location].egress[idx];
                    emitted |= fire(t, &p.states[t.dst], st, &sc.sat, &mut sc.newv);
                }
            }
            st.prev_location = Some(here);
            st.tick += 1;
        }
        for st in &mut self.states {
            st.pending_pre = emitted;
        }
        self.pending_pre = emitted;
        self.tick += 1;
        self.refresh_values();
        Ok(emitted)
    }
}

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown event `{event}`")]
    UnknownEvent { line: usize, event: String },
    #[error("line {line}: event `{event}` is not an external input")]
    NotAnInput { line: usize, event: String },
}

/// Environment events per tick; ticks without an entry have no inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stimulus {
    entries: BTreeMap<u64, EventMask>,
}

impl Stimulus {
    pub fn empty() -> Self {
        Stimulus::default()
    }

    pub fn parse(text: &str, events: &EventTable, allowed: EventMask) -> Result<Self, StimulusError> {
        let mut entries: BTreeMap<u64, EventMask> = BTreeMap::new();
        let mut first = true;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let was_first = std::mem::replace(&mut first, false);
            let (tick_text, ev_text) = content.split_once(',').unwrap_or((content, ""));
            if was_first && tick_text.trim().eq_ignore_ascii_case("tick") {
                continue;
            }
            let tick: u64 = tick_text
                .trim()
                .parse()
                .map_err(|_| StimulusError::Malformed { line, message: format!("`{}` is not a tick number", tick_text.trim()) })?;
            let mut mask = 0;
            for ev in ev_text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
                let bit = events.bit(ev).ok_or_else(|| StimulusError::UnknownEvent { line, event: ev.to_string() })?;
                if bit & allowed == 0 {
                    return Err(StimulusError::NotAnInput { line, event: ev.to_string() });
                }
                mask |= bit;
            }
            *entries.entry(tick).or_default() |= mask;
        }
        Ok(Stimulus { entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (u64, EventMask)>) -> Self {
        let mut s = Stimulus::default();
        for (t, m) in entries {
            *s.entries.entry(t).or_default() |= m;
        }
        s
    }

    #[inline]
    pub fn at(&self, tick: u64) -> EventMask {
        self.entries.get(&tick).copied().unwrap_or(0)
    }

    pub fn to_csv(&self, events: &EventTable) -> String {
        let mut out = String::from("tick,events\n");
        for (t, m) in &self.entries {
            out.push_str(&format!("{t},{}\n", events.names_in(*m).join(";")));
        }
        out
    }
}

/// C `printf("%.15g", v)`.
pub fn fmt_g15(v: f64) -> String {
    const P: i32 = 15;
    if v.is_nan() {
        return if v.is_sign_negative() { "-nan".into() } else { "nan".into() };
    }
    if v.is_infinite() {
        return if v < 0.0 { "-inf".into() } else { "inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= P {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim(&format!("{:.*}", (P - 1 - exp) as usize, v))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Unreachable(#[from] UnreachableState),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn trace_header(m: &impl Machine) -> String {
    let mut h = String::from("tick,time,location");
    for v in m.var_names() {
        h.push(',');
        h.push_str(v);
    }
    h.push_str(",inputs,outputs");
    h
}

/// Runs `ticks` reactions, writing one CSV row per tick with the
/// pre-reaction state, the environment inputs and the emitted outputs.
pub fn write_trace<M: Machine, W: Write>(m: &mut M, ticks: u64, stim: &Stimulus, out: &mut W) -> Result<(), SimError> {
    writeln!(out, "{}", trace_header(m))?;
    let allowed = m.external_inputs();
    let mut row = String::new();
    for n in 0..ticks {
        let env = stim.at(n) & allowed;
        row.clear();
        row.push_str(&format!("{n},{},{}", fmt_g15(n as f64 * m.delta()), m.location_name()));
        for x in m.values() {
            row.push(',');
            row.push_str(&fmt_g15(*x));
        }
        row.push(',');
        row.push_str(&m.events().names_in(env).join(";"));
        let emitted = match m.step(env) {
            Ok(e) => e,
            Err(e) => {
                out.flush()?;
                return Err(e.into());
            }
        };
        row.push(',');
        row.push_str(&m.events().names_in(emitted).join(";"));
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

/// Runs without producing a trace; returns the number of inter-location jumps.
pub fn run_silent<M: Machine>(m: &mut M, ticks: u64, stim: &Stimulus) -> Result<u64, UnreachableState> {
    let allowed = m.external_inputs();
    let mut emitted_total = 0;
    for n in 0..ticks {
        if m.step(stim.at(n) & allowed)? != 0 {
            emitted_total += 1;
        }
    }
    Ok(emitted_total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::models;

    fn tank_swa(delta: f64) -> Swa {
        let n = parse_model(models::WATERTANK).unwrap();
        automaton_swa(&n.automata[0], delta).unwrap().0
    }

    fn at(swa: &Swa, name: &str, x: f64) -> ExecState {
        let mut st = swa.initial_state();
        st.location = swa.state_index(name).unwrap();
        st.v = vec![x];
        st.i = vec![x];
        st.c1 = vec![swa.states[st.location].self_transition.witnesses[0].c1_for(x)];
        st
    }

    #[test]
    fn heating_self_loop_guard() {
        let swa = tank_swa(0.01);
        assert_eq!(swa.states.len(), 4);
        let t2 = swa.state_index("t2").unwrap();
        assert_eq!(swa.describe_self(t2), "!ON && !OFF && x[k] >= 20.0 && x[k] <= 100.0");
    }

    #[test]
    fn lone_location_has_only_a_self_loop() {
        let n = parse_model("network n\nautomaton a\n  var x init 1\n  initial location p\n    flow x' = 0\n").unwrap();
        let swa = automaton_swa(&n.automata[0], 0.1).unwrap().0;
        assert_eq!(swa.states.len(), 1);
        assert!(swa.states[0].egress.is_empty());
        assert_eq!(swa.describe_self(0), "true");
    }

    #[test]
    fn intra_step_advances_witness() {
        let swa = tank_swa(0.01);
        let st = at(&swa, "t2", 50.0);
        let (next, out) = tick(&swa, &st, 0).unwrap();
        assert_eq!(next.location, st.location);
        assert_eq!(next.k, 1);
        assert_eq!(out, 0);
        let expected = 150.0 + (50.0 - 150.0) * (-0.075f64 * 0.01 * 1.0).exp();
        assert_eq!(next.v[0], expected);
    }

    #[test]
    fn on_event_leaves_idle_location() {
        let swa = tank_swa(0.01);
        let st = swa.initial_state();
        let on = swa.events.bit("ON").unwrap();
        let (next, _) = tick(&swa, &st, on).unwrap();
        assert_eq!(swa.states[next.location].name, "t2");
        assert_eq!(next.k, 0);
        assert_eq!(next.c1, vec![-130.0]);
        assert_eq!(next.i, vec![20.0]);
    }

    #[test]
    fn tick_is_pure() {
        let swa = tank_swa(0.01);
        let st = at(&swa, "t4", 63.0);
        assert_eq!(tick(&swa, &st, 0).unwrap(), tick(&swa, &st, 0).unwrap());
    }

    #[test]
    fn unexpected_event_is_unreachable() {
        let swa = tank_swa(0.01);
        let st = at(&swa, "t2", 50.0);
        let err = tick(&swa, &st, swa.events.bit("ON").unwrap()).unwrap_err();
        assert_eq!(err.location, "t2");
        assert!(err.to_string().contains("no transition enabled"));
    }

    #[test]
    fn saturation_examples() {
        let rise = Law::Linear { slope: 12.0 };
        assert_eq!(saturate(rise, 0.0, 5, 1.0, CmpOp::Eq, 50.0), Some(50.0));
        assert_eq!(saturate(rise, 0.0, 4, 1.0, CmpOp::Eq, 50.0), None);
        assert_eq!(saturate(Law::Constant, 50.0, 3, 1.0, CmpOp::Eq, 50.0), Some(50.0));
        assert_eq!(saturate(rise, 0.0, 5, 1.0, CmpOp::Gt, 50.0), None);
        let cool = Law::Exponential { rate: -0.075, equilibrium: 0.0 };
        let k = (1..).find(|&k| cool.at_tick(100.0, 0.01, k) < 20.0).unwrap();
        assert_eq!(k, 2146);
        assert_eq!(saturate(cool, 100.0, k, 0.01, CmpOp::Eq, 20.0), Some(20.0));
        let t_star = 0.2f64.ln() / -0.075;
        assert!((k - 1) as f64 * 0.01 < t_star && t_star <= k as f64 * 0.01);
    }

    #[test]
    fn cooling_reaches_idle_exactly() {
        let swa = tank_swa(0.01);
        let mut sim = Simulator::new(&swa);
        sim.state = at(&swa, "t4", 100.0);
        let mut ticks = 0;
        while sim.location_name() == "t4" {
            sim.step(0).unwrap();
            ticks += 1;
        }
        assert_eq!(sim.location_name(), "t1");
        assert_eq!(sim.values(), &[20.0]);
        assert_eq!(ticks, 2146);
    }

    #[test]
    fn product_of_tank_and_burner() {
        let n = parse_model(models::WATERTANK_BURNER).unwrap();
        let (parts, _) = network_swas(&n, 0.01).unwrap();
        let p = compose(&parts[0], &parts[1]).unwrap();
        assert_eq!(p.states.len(), 16);
        assert_eq!(p.states[p.initial].name, "t1b1");
        assert!(p.state_index("t2b4").is_some());
        assert_eq!(p.events.names_in(p.internal), vec!["ON", "OFF"]);
        assert_eq!(p.events.names_in(p.external_inputs()), vec!["IGNITE", "EXTINGUISH"]);
        assert!(p.states.iter().all(|s| s.nsteps_heuristic));
    }

    #[test]
    fn trivial_machine_is_a_unit() {
        let tank = tank_swa(0.01);
        let n = parse_model("network n\nautomaton u\n  var z init 0\n  initial location s\n").unwrap();
        let unit = automaton_swa(&n.automata[0], 0.01).unwrap().0;
        let p = compose(&tank, &unit).unwrap();
        assert_eq!(p.states.len(), tank.states.len());
        for (a, b) in tank.states.iter().zip(&p.states) {
            assert_eq!(b.name, format!("{}s", a.name));
            assert_eq!(a.egress.len(), b.egress.len());
            for (x, y) in a.egress.iter().zip(&b.egress) {
                assert_eq!(x.dst, y.dst);
                assert_eq!(x.jump, y.jump);
                assert_eq!(y.rule, Rule::InterIntra);
            }
        }
    }

    #[test]
    fn g15_formatting() {
        assert_eq!(fmt_g15(0.0), "0");
        assert_eq!(fmt_g15(20.0), "20");
        assert_eq!(fmt_g15(0.01), "0.01");
        assert_eq!(fmt_g15(21.459172165788004), "21.459172165788");
        assert_eq!(fmt_g15(1e-5), "1e-05");
        assert_eq!(fmt_g15(123456789012345678.0), "1.23456789012346e+17");
        assert_eq!(fmt_g15(-0.1), "-0.1");
        assert_eq!(fmt_g15(0.0001), "0.0001");
        assert_eq!(fmt_g15(999999999999999.9), "1e+15");
        assert_eq!(fmt_g15(100000.0), "100000");
    }

    #[test]
    fn stimulus_parsing() {
        let swa = tank_swa(0.01);
        let s = Stimulus::parse("tick,events\n5,ON\n7,OFF;ON\n\n9,\n", &swa.events, swa.external_inputs()).unwrap();
        assert_eq!(s.at(5), swa.events.bit("ON").unwrap());
        assert_eq!(swa.events.names_in(s.at(7)), vec!["ON", "OFF"]);
        assert_eq!(s.at(9), 0);
        assert!(matches!(Stimulus::parse("1,BOGUS\n", &swa.events, swa.external_inputs()), Err(StimulusError::UnknownEvent { .. })));
        assert!(matches!(Stimulus::parse("x,ON\n", &swa.events, swa.external_inputs()), Err(StimulusError::Malformed { .. })));
    }

    #[test]
    fn trace_shape() {
        let swa = tank_swa(0.01);
        let stim = Stimulus::from_entries([(5, swa.events.bit("ON").unwrap())]);
        let mut out = Vec::new();
        write_trace(&mut Simulator::new(&swa), 10, &stim, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tick,time,location,x,inputs,outputs");
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[6], "5,0.05,t1,20,ON,");
        assert!(lines[7].starts_with("6,0.06,t2,20,"));
        let mut empty = Vec::new();
        write_trace(&mut Simulator::new(&swa), 0, &stim, &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }
}
