//! Shared test support: a generator of well-formed random automata, an RK4
//! reference integrator and helpers for building emitted C.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use hasc::codegen::{emit_c, emit_driver, CodegenOptions};
use hasc::swa::{write_trace, EventMask, Machine, Stimulus, Swa};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Increasing `y' = 12` from 0 with an equality guard at 50 and one-second ticks.
pub const SATURATION_FIXTURE: &str = "\
network ramp
automaton ramp
  var y init 0
  initial location rise
    invariant 0 <= y <= 50
    flow y' = 12
  location done
    invariant 0 <= y <= 100
    flow y' = 0
  edge rise -> done guard y == 50 do y' := y
";

/// RK4 for `x' = a*x + b`.
pub fn rk4(a: f64, b: f64, x0: f64, t: f64, h: f64) -> f64 {
    let f = |x: f64| a * x + b;
    let steps = (t / h).round() as u64;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

fn dec(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn num(x: f64) -> String {
    if x < 0.0 {
        format!("({})", dec(x))
    } else {
        dec(x)
    }
}

struct VarBox {
    name: String,
    lo: f64,
    hi: f64,
}

#[derive(Clone, Copy)]
enum Dir {
    Up,
    Down,
    Flat,
}

/// Text of one automaton that is well formed by construction and handles
/// every input event in every location, so it never deadlocks.
pub fn fuzz_automaton(rng: &mut impl Rng, name: &str, prefix: &str, inputs: &[String], outputs: &[String]) -> String {
    let nvars = rng.gen_range(1..=2);
    let nlocs = rng.gen_range(2..=4);
    let vars: Vec<VarBox> = (0..nvars)
        .map(|i| {
            let lo = rng.gen_range(-40..40) as f64;
            let hi = lo + rng.gen_range(5..60) as f64;
            VarBox { name: format!("{prefix}x{i}"), lo, hi }
        })
        .collect();
    let locs: Vec<String> = (0..nlocs).map(|j| format!("{prefix}{j}")).collect();
    let mut out = format!("automaton {name}\n");
    for v in &vars {
        let init = rng.gen_range((v.lo as i64 + 1)..(v.hi as i64));
        let _ = writeln!(out, "  var {} init {}", v.name, dec(init as f64));
    }
    if !inputs.is_empty() {
        let _ = writeln!(out, "  input {}", inputs.join(" "));
    }
    if !outputs.is_empty() {
        let _ = writeln!(out, "  output {}", outputs.join(" "));
    }
    let mut edges = Vec::new();
    for (j, loc) in locs.iter().enumerate() {
        let _ = writeln!(out, "\n  {}location {loc}", if j == 0 { "initial " } else { "" });
        let inv: Vec<String> = vars.iter().map(|v| format!("{} <= {} <= {}", num(v.lo), v.name, num(v.hi))).collect();
        let _ = writeln!(out, "    invariant {}", inv.join(" && "));
        let mut loc_edges = Vec::new();
        for v in &vars {
            let (flow, dir) = random_flow(rng, v);
            if let Some(f) = flow {
                let _ = writeln!(out, "    flow {}' = {f}", v.name);
            }
            let bound = match dir {
                Dir::Up => v.hi,
                Dir::Down => v.lo,
                Dir::Flat => continue,
            };
            let op = match (dir, rng.gen_range(0..3)) {
                (_, 0) => "==",
                (Dir::Up, _) => ">=",
                _ => "<=",
            };
            let reset = rng.gen_range((v.lo as i64 + 1)..(v.hi as i64)) as f64;
            let mut e = format!(
                "  edge {loc} -> {} guard {} {op} {} do {}' := {}",
                locs.choose(rng).unwrap(),
                v.name,
                num(bound),
                v.name,
                num(reset)
            );
            if !outputs.is_empty() && rng.gen_bool(0.5) {
                let _ = write!(e, " emit {}", outputs.choose(rng).unwrap());
            }
            loc_edges.push(e);
        }
        for ev in inputs {
            let mut e = format!("  edge {loc} -> {} on {ev}", locs.choose(rng).unwrap());
            if rng.gen_bool(0.5) {
                let v = vars.choose(rng).unwrap();
                let value = rng.gen_range((v.lo as i64)..=(v.hi as i64)) as f64;
                let _ = write!(e, " do {}' := {}", v.name, num(value));
            }
            if !outputs.is_empty() && rng.gen_bool(0.3) {
                let _ = write!(e, " emit {}", outputs.choose(rng).unwrap());
            }
            loc_edges.push(e);
        }
        loc_edges.shuffle(rng);
        edges.extend(loc_edges);
    }
    out.push('\n');
    for e in edges {
        out.push_str(&e);
        out.push('\n');
    }
    out
}

fn random_flow(rng: &mut impl Rng, v: &VarBox) -> (Option<String>, Dir) {
    let choice = rng.gen_range(0..4);
    let up = rng.gen_bool(0.5);
    let dir = if up { Dir::Up } else { Dir::Down };
    match choice {
        0 => (None, Dir::Flat),
        1 => {
            let mag = rng.gen_range(5..200) as f64 / 10.0;
            (Some(num(if up { mag } else { -mag })), dir)
        }
        2 => {
            let rate = rng.gen_range(5..200) as f64 / 100.0;
            let gap = rng.gen_range(1..40) as f64;
            let eq = if up { v.hi + gap } else { v.lo - gap };
            (Some(format!("{} * ({} - {})", dec(rate), num(eq), v.name)), dir)
        }
        _ if v.lo > 0.0 || v.hi < 0.0 => {
            let rate = rng.gen_range(5..200) as f64 / 100.0;
            let dir = if v.lo > 0.0 { Dir::Down } else { Dir::Up };
            (Some(format!("-{} * {}", dec(rate), v.name)), dir)
        }
        _ => (None, Dir::Flat),
    }
}

/// A one-automaton network driven by two environment events.
pub fn fuzz_network(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = vec!["E0".to_string(), "E1".to_string()];
    format!("network fuzz{seed}\n{}", fuzz_automaton(&mut rng, "a", "p", &inputs, &[]))
}

/// Producer/consumer pair: the first automaton's outputs feed the second.
pub fn fuzz_pair(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env1 = vec!["E0".to_string()];
    let out1 = vec!["M0".to_string(), "M1".to_string()];
    let env2 = vec!["M0".to_string(), "M1".to_string(), "E1".to_string()];
    let out2 = vec!["R0".to_string()];
    format!(
        "network pair{seed}\n{}\n{}",
        fuzz_automaton(&mut rng, "a", "p", &env1, &out1),
        fuzz_automaton(&mut rng, "b", "q", &env2, &out2)
    )
}

/// Random environment events at roughly one tick in `sparsity`.
pub fn random_stimulus(seed: u64, ext: &[EventMask], ticks: u64, sparsity: u64) -> Stimulus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    if !ext.is_empty() {
        for t in 0..ticks {
            if rng.gen_range(0..sparsity) == 0 {
                let mut m = 0;
                for &b in ext {
                    if rng.gen_bool(0.6) {
                        m |= b;
                    }
                }
                entries.push((t, m));
            }
        }
    }
    Stimulus::from_entries(entries)
}

pub fn external_bits(swa: &Swa) -> Vec<EventMask> {
    swa.events.names_in(swa.external_inputs()).iter().map(|e| swa.events.bit(e).unwrap()).collect()
}

pub fn trace_of<M: Machine>(m: &mut M, ticks: u64, stim: &Stimulus) -> String {
    let mut out = Vec::new();
    write_trace(m, ticks, stim, &mut out).expect("simulation succeeds");
    String::from_utf8(out).unwrap()
}

pub fn c_compiler() -> Option<String> {
    std::env::var("CC")
        .into_iter()
        .chain(["cc".to_string(), "gcc".to_string(), "clang".to_string()])
        .find(|c| Command::new(c).arg("--version").output().map(|o| o.status.success()).unwrap_or(false))
}

/// Emits, compiles and runs the C for `swa`; returns the trace it prints.
pub fn run_emitted(cc: &str, dir: &Path, swa: &Swa, stim: &Stimulus, ticks: u64) -> Result<String, String> {
    let unit = emit_c(swa, &CodegenOptions::default());
    let stim_path = dir.join(format!("{}_stim.csv", swa.name));
    std::fs::write(&stim_path, stim.to_csv(&swa.events)).map_err(|e| e.to_string())?;
    let driver = emit_driver(swa, Some(stim_path.to_str().unwrap()), ticks);
    let unit_path = dir.join(format!("{}.c", swa.name));
    let driver_path = dir.join(format!("{}_main.c", swa.name));
    let exe = dir.join(&swa.name);
    std::fs::write(&unit_path, &unit.source_text).map_err(|e| e.to_string())?;
    std::fs::write(&driver_path, driver).map_err(|e| e.to_string())?;
    let build = Command::new(cc)
        .args(["-std=c99", "-O2", "-ffp-contract=off", "-Wall", "-Werror", "-Wno-unused-function"])
        .arg(&unit_path)
        .arg(&driver_path)
        .arg("-o")
        .arg(&exe)
        .arg("-lm")
        .output()
        .map_err(|e| e.to_string())?;
    if !build.status.success() {
        return Err(String::from_utf8_lossy(&build.stderr).into_owned());
    }
    let run = Command::new(&exe).output().map_err(|e| e.to_string())?;
    if !run.status.success() {
        return Err(format!("exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr)));
    }
    Ok(String::from_utf8(run.stdout).unwrap())
}

/// Largest per-value difference between two traces with identical
/// structure, or a description of the first structural mismatch.
pub fn compare_traces(a: &str, b: &str) -> Result<f64, String> {
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    if la.len() != lb.len() {
        return Err(format!("{} rows vs {} rows", la.len(), lb.len()));
    }
    let mut worst = 0.0f64;
    for (i, (ra, rb)) in la.iter().zip(&lb).enumerate() {
        let (fa, fb): (Vec<&str>, Vec<&str>) = (ra.split(',').collect(), rb.split(',').collect());
        if fa.len() != fb.len() {
            return Err(format!("row {i}: column count differs"));
        }
        for (j, (x, y)) in fa.iter().zip(&fb).enumerate() {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) if i > 0 && j >= 3 => worst = worst.max((p - q).abs()),
                _ if x == y => {}
                _ => return Err(format!("row {i} column {j}: `{x}` vs `{y}`")),
            }
        }
    }
    Ok(worst)
}
