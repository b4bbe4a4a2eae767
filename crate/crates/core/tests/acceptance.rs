//! Acceptance suite. Prints one PASS/FAIL line per check and exits non-zero
//! if any check fails.

mod common;

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hasc::cli::bench_events;
use hasc::expr::{int, parse_decimal, rational_to_f64, sign_region, AffineExpr, Interval, Rational};
use hasc::model::{parse_model, DiagCode, HybridAutomaton};
use hasc::models;
use hasc::odesolve::{classify_monotonicity, solve_affine, Monotonicity};
use hasc::shagen::generate_sha;
use hasc::swa::{compose, compose_network, network_swas, CoSimulator, Machine, Rule, Simulator, Stimulus, Swa};
use hasc::whacheck::{check_wha, ViolationKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: impl std::fmt::Display) {
        println!("{} [{id}] {what}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }

    fn skip(&mut self, id: &str, what: &str, why: &str) {
        println!("SKIP [{id}] {what}: {why}");
    }
}

fn tank() -> HybridAutomaton {
    parse_model(models::WATERTANK).unwrap().automata.remove(0)
}

fn dec(s: &str) -> Rational {
    parse_decimal(s).unwrap()
}

fn worst_case_dwell(r: &mut Report) {
    let start = Instant::now();
    let (sha, _) = generate_sha(&tank(), 0.01).unwrap();
    let t4 = sha.analysis("t4").unwrap().worst_case_time;
    let elapsed = start.elapsed();
    let formula = 0.2f64.ln() / -0.075;
    r.check("1", "t4 dwell equals ln(0.2)/(-0.075)", (t4 - formula).abs() < 1e-6, format!("{t4} vs {formula}"));
    r.check("1", "t4 dwell equals the quoted 214.6007 literal", (t4 - 214.6007).abs() < 1e-6, format!("{t4} vs 214.6007"));
    r.check("1", "runtime under 1 s", elapsed < Duration::from_secs(1), format!("{elapsed:?}"));
}

fn sample_sign(rhs: &AffineExpr, lo: f64, hi: f64) -> Monotonicity {
    let (mut pos, mut neg, mut zero) = (false, false, false);
    for i in 0..=10_000 {
        let x = lo + (hi - lo) * i as f64 / 10_000.0;
        let coeff = rational_to_f64(&rhs.coeff);
        let slope = coeff * x + rational_to_f64(&rhs.constant);
        match slope.partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => pos = true,
            std::cmp::Ordering::Less => neg = true,
            std::cmp::Ordering::Equal => zero = true,
        }
    }
    match (pos, neg, zero) {
        (true, true, _) => Monotonicity::NonMonotone,
        (true, false, _) => Monotonicity::Increasing,
        (false, true, _) => Monotonicity::Decreasing,
        _ => Monotonicity::Constant,
    }
}

fn monotonicity(r: &mut Report) {
    // 0.075 * (150 - x) = -0.075 x + 11.25
    let rhs = AffineExpr::new(-dec("0.075"), Some("x"), dec("11.25"));
    let pos = sign_region(&rhs, true);
    let neg = sign_region(&rhs, false);
    r.check("2", "positive sign region", pos.to_string() == "(-inf, 150)", &pos);
    r.check("2", "negative sign region", neg.to_string() == "(150, inf)", &neg);
    let bounds = Interval::closed(int(20), int(100));
    let verdict = classify_monotonicity(&rhs, &bounds, &Interval::real_line());
    r.check("2", "t2 verdict on [20, 100]", verdict == Monotonicity::Increasing, format!("{verdict:?}"));
    let wide = Interval::closed(int(0), int(300));
    let wide_verdict = classify_monotonicity(&rhs, &wide, &Interval::real_line());
    r.check("2", "perturbed bounds [0, 300]", wide_verdict == Monotonicity::NonMonotone, format!("{wide_verdict:?}"));
    let oracle = (sample_sign(&rhs, 20.0, 100.0), sample_sign(&rhs, 0.0, 300.0));
    r.check("2", "sign-sampling oracle agrees", oracle == (verdict, wide_verdict), format!("{oracle:?}"));
    let perturbed = models::WATERTANK.replace("invariant 20 <= x <= 100\n    flow x' = 0.075", "invariant 0 <= x <= 300\n    flow x' = 0.075");
    let report = check_wha(&parse_model(&perturbed).unwrap().automata[0]);
    r.check("2", "perturbed model rejected NON_MONOTONE", report.kinds() == vec![ViolationKind::NonMonotone], format!("{:?}", report.kinds()));
}

fn wha_gate(r: &mut Report) {
    let start = Instant::now();
    let ok = check_wha(&tank());
    r.check("3", "water tank passes", ok.passed(), format!("{:?}", ok.verdict));
    let sq = parse_model("network n\nautomaton a\n  var x init 1\n  initial location p\n    flow x' = x^2\n").unwrap();
    let kinds = check_wha(&sq.automata[0]).kinds();
    r.check("3", "x' = x^2 fails NO_CLOSED_FORM", kinds == vec![ViolationKind::NoClosedForm], format!("{kinds:?}"));
    let disj = parse_model(
        "network n\nautomaton a\n  var x init 1\n  initial location p\n  location q\n  edge p -> q guard x <= 1 || x >= 5\n",
    );
    let codes = disj.as_ref().err().map(|e| e.codes()).unwrap_or_default();
    r.check("3", "disjunctive guard fails to parse", codes == vec![DiagCode::Syntax], format!("{codes:?}"));
    let elapsed = start.elapsed();
    r.check("3", "runtime under 1 s", elapsed < Duration::from_secs(1), format!("{elapsed:?}"));
}

fn saturation(r: &mut Report) {
    let net = parse_model(SATURATION_FIXTURE).unwrap();
    let (swa, _) = compose_network(&net, 1.0).unwrap();
    let mut sim = Simulator::new(&swa);
    let mut max_y = f64::NEG_INFINITY;
    let mut fired = None;
    for n in 0..20u64 {
        let before = sim.location_name();
        sim.step(0).unwrap();
        max_y = max_y.max(sim.values()[0]);
        if fired.is_none() && before == "rise" && sim.location_name() == "done" {
            fired = Some((n + 1, sim.values()[0]));
        }
    }
    r.check("4", "trace never exceeds 50", max_y <= 50.0, format!("max y = {max_y}"));
    let Some((k, value)) = fired else {
        r.check("4", "transition fires", false, "never fired");
        return;
    };
    r.check("4", "fires at exactly 50", value == 50.0, format!("y = {value:?} at tick {k}"));
    let t_star = 50.0 / 12.0;
    let (lo, hi) = ((k - 1) as f64, k as f64);
    r.check(
        "4",
        "crossing time within saturating window",
        t_star >= lo - 1e-9 && t_star <= hi + 1e-9,
        format!("t* = {t_star} in [{lo}, {hi}]"),
    );
    let wha = check_wha(&net.automata[0]);
    r.check("4", "equality-guard model accepted", wha.passed(), format!("{:?}", wha.verdict));
}

fn closed_form_vs_rk4(r: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (ai, bi, xi, ti) = (rng.gen_range(-150..=150), rng.gen_range(-1000..=1000), rng.gen_range(-5000..=5000), rng.gen_range(1..=300));
        let hundredths = |n: i64| int(n) / int(100);
        let (a, b, x0, t) = (ai as f64 / 100.0, bi as f64 / 100.0, xi as f64 / 100.0, ti as f64 / 100.0);
        let rhs = AffineExpr::new(hundredths(ai), Some("x"), hundredths(bi));
        let w = solve_affine("x", &rhs);
        let law = w.law();
        let closed = law.eval(law.c1_for(x0), t);
        let oracle = rk4(a, b, x0, t, 1e-4);
        worst = worst.max((closed - oracle).abs() / oracle.abs().max(1.0));
    }
    let elapsed = start.elapsed();
    r.check("5", "1000 witnesses agree with RK4 (h = 1e-4)", worst <= 1e-8, format!("max relative error {worst:e}"));
    r.check("5", "runtime under 30 s", elapsed < Duration::from_secs(30), format!("{elapsed:?}"));
}

fn differential(r: &mut Report) {
    const TICKS: u64 = 100_000;
    let mut subjects: Vec<(String, Swa)> = Vec::new();
    for (label, text) in [
        ("watertank", models::WATERTANK.to_string()),
        ("watertank_burner", models::WATERTANK_BURNER.to_string()),
        ("thermostat", models::THERMOSTAT.to_string()),
        ("traingate", models::TRAINGATE.to_string()),
        ("fuzz 1", fuzz_network(1)),
        ("fuzz 2", fuzz_network(2)),
        ("fuzz 3", fuzz_pair(3)),
    ] {
        let net = parse_model(&text).unwrap();
        subjects.push((label.to_string(), compose_network(&net, 0.01).unwrap().0));
    }
    let cc = c_compiler();
    let dir = tempfile::tempdir().unwrap();
    for (i, (label, swa)) in subjects.iter().enumerate() {
        let stim = if label == "watertank" {
            Stimulus::from_entries((0..TICKS).map(|n| (n, bench_events(swa, n))).filter(|e| e.1 != 0))
        } else {
            random_stimulus(100 + i as u64, &external_bits(swa), TICKS, 2500)
        };
        let interp = trace_of(&mut Simulator::new(swa), TICKS, &stim);
        let again = trace_of(&mut Simulator::new(swa), TICKS, &stim);
        r.check("6", &format!("{label}: interpreter trace reproducible"), interp == again, format!("{} rows", interp.lines().count() - 1));
        let Some(cc) = cc.as_deref() else {
            r.skip("6", &format!("{label}: emitted C vs interpreter"), "no C compiler found");
            continue;
        };
        match run_emitted(cc, dir.path(), swa, &stim, TICKS).and_then(|c| compare_traces(&interp, &c)) {
            Ok(diff) => r.check("6", &format!("{label}: emitted C vs interpreter"), diff <= 1e-9, format!("max diff {diff:e}")),
            Err(e) => r.check("6", &format!("{label}: emitted C vs interpreter"), false, e),
        }
    }
}

type Key = (String, Vec<String>, Vec<Option<usize>>);

fn composition(r: &mut Report) {
    let net = parse_model(models::WATERTANK_BURNER).unwrap();
    let (parts, _) = network_swas(&net, 0.01).unwrap();
    let (q1, q2) = (&parts[0], &parts[1]);
    let p = compose(q1, q2).unwrap();
    let expected = q1.states.len() * q2.states.len();
    r.check("7", "product has |L1|*|L2| states", p.states.len() == expected, format!("{} = {}", p.states.len(), expected));
    let one_self = p.states.iter().all(|s| {
        let (s1, s2) = (q1.state_index(&s.components[0]).unwrap(), q2.state_index(&s.components[1]).unwrap());
        s.self_transition.invariant.len() == q1.states[s1].self_transition.invariant.len() + q2.states[s2].self_transition.invariant.len()
            && s.self_transition.witnesses.len() == p.vars.len()
    });
    r.check("7", "one Intra-Intra self-loop per state", one_self, format!("{} states", p.states.len()));

    // Independent enumeration of the three rule families over source edges.
    let (a1, a2) = (&net.automata[0], &net.automata[1]);
    let mut brute: BTreeMap<(String, Rule), Vec<Key>> = BTreeMap::new();
    for l1 in &a1.locations {
        for l2 in &a2.locations {
            let name = format!("{}{}", l1.name, l2.name);
            let out1: Vec<(usize, &hasc::model::Edge)> = a1.edges.iter().enumerate().filter(|(_, e)| e.src == l1.name).collect();
            let out2: Vec<(usize, &hasc::model::Edge)> = a2.edges.iter().enumerate().filter(|(_, e)| e.src == l2.name).collect();
            for (j, e2) in &out2 {
                let key = (format!("{}{}", l1.name, e2.dst), e2.event.present.clone(), vec![None, Some(*j)]);
                brute.entry((name.clone(), Rule::IntraInter)).or_default().push(key);
            }
            for (i, e1) in &out1 {
                let key = (format!("{}{}", e1.dst, l2.name), e1.event.present.clone(), vec![Some(*i), None]);
                brute.entry((name.clone(), Rule::InterIntra)).or_default().push(key);
            }
            for (i, e1) in &out1 {
                for (j, e2) in &out2 {
                    let mut present = e1.event.present.clone();
                    present.extend(e2.event.present.iter().cloned());
                    let key = (format!("{}{}", e1.dst, e2.dst), present, vec![Some(*i), Some(*j)]);
                    brute.entry((name.clone(), Rule::InterInter)).or_default().push(key);
                }
            }
        }
    }
    let mut built: BTreeMap<(String, Rule), Vec<Key>> = BTreeMap::new();
    for s in &p.states {
        for t in &s.egress {
            let present = p.events.names_in(t.present).into_iter().map(str::to_string).collect();
            built.entry((s.name.clone(), t.rule)).or_default().push((p.states[t.dst].name.clone(), present, t.origin.clone()));
        }
    }
    let normalize = |m: &mut BTreeMap<(String, Rule), Vec<Key>>| {
        for v in m.values_mut() {
            for k in v.iter_mut() {
                k.1.sort();
            }
        }
    };
    normalize(&mut brute);
    normalize(&mut built);
    let count = |m: &BTreeMap<(String, Rule), Vec<Key>>, rule| m.iter().filter(|(k, _)| k.1 == rule).map(|(_, v)| v.len()).sum::<usize>();
    for rule in [Rule::IntraInter, Rule::InterIntra, Rule::InterInter] {
        let same = brute.iter().filter(|(k, _)| k.1 == rule).all(|(k, v)| built.get(k) == Some(v))
            && count(&brute, rule) == count(&built, rule);
        r.check("7", &format!("{rule:?} transitions match brute-force enumeration"), same, format!("{} transitions", count(&built, rule)));
    }

    let ext = external_bits(&p);
    let mut equal = 0;
    for seed in 0..10 {
        let stim = random_stimulus(seed, &ext, 20_000, 400);
        let composed = trace_of(&mut Simulator::new(&p), 20_000, &stim);
        let lockstep = trace_of(&mut CoSimulator::new(&parts).unwrap(), 20_000, &stim);
        if composed == lockstep {
            equal += 1;
        }
    }
    r.check("7", "composed trace equals lock-step co-simulation", equal == 10, format!("{equal}/10 stimuli"));
}

fn performance(r: &mut Report) {
    let net = parse_model(models::WATERTANK).unwrap();
    let (swa, _) = compose_network(&net, 0.01).unwrap();
    let mut sim = Simulator::new(&swa);
    let start = Instant::now();
    let mut jumps = 0u64;
    for n in 0..10_000_000u64 {
        let before = sim.state.location;
        sim.step(bench_events(&swa, n)).unwrap();
        jumps += u64::from(sim.state.location != before);
    }
    let elapsed = start.elapsed();
    r.check("8", "10,000,000 water-tank ticks under 10 s", elapsed < Duration::from_secs(10), format!("{elapsed:?}, {jumps} jumps"));
}

fn determinism(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let stim = dir.path().join("stim.csv");
    std::fs::write(&stim, "tick,events\n5,IGNITE\n4000,EXTINGUISH\n9000,IGNITE\n").unwrap();
    let model = dir.path().join("watertank_burner.pha");
    std::fs::write(&model, models::WATERTANK_BURNER).unwrap();
    let mut outputs = Vec::new();
    for (i, cmd) in ["simulate", "simulate", "compose-and-simulate"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_hasc"))
            .args([cmd, model.to_str().unwrap(), "--ticks", "12000", "--stimulus", stim.to_str().unwrap(), "--out"])
            .arg(&out)
            .status()
            .unwrap();
        outputs.push((status.code(), std::fs::read(out.join("watertank_burner_trace.csv")).unwrap_or_default()));
    }
    let ok = outputs[0].0 == Some(0) && !outputs[0].1.is_empty() && outputs[0] == outputs[1];
    r.check("9", "repeated simulate runs are byte-identical", ok, format!("{} bytes", outputs[0].1.len()));
    r.check("9", "compose-and-simulate matches simulate", outputs[0] == outputs[2], format!("{} bytes", outputs[2].1.len()));
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    worst_case_dwell(&mut r);
    monotonicity(&mut r);
    wha_gate(&mut r);
    saturation(&mut r);
    closed_form_vs_rk4(&mut r);
    differential(&mut r);
    composition(&mut r);
    performance(&mut r);
    determinism(&mut r);
    println!("acceptance: {} failing check(s)", r.failures);
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
