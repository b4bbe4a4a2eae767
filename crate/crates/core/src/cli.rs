//! Command-line driver: check, compile, simulate and benchmark models.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::codegen::{emit_c, emit_driver, CodegenOptions};
use crate::model::{diagnostics_json, parse_model, Network};
use crate::models;
use crate::shagen::generate_sha;
use crate::swa::{compose_network, network_swas, write_trace, CoSimulator, EventMask, Machine, SimError, Simulator, Stimulus, Swa};
use crate::whacheck::check_network;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hasc", version, about = "Compiler and simulator for well-formed hybrid automata")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model file
    pub model: PathBuf,
    /// Tick length in seconds
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the intermediate representation as JSON
    #[arg(long)]
    pub emit_ir: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of ticks to run
    #[arg(long, default_value_t = 1000)]
    pub ticks: u64,
    /// Stimulus CSV with `tick,events` rows
    #[arg(long)]
    pub stimulus: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check well-formedness; diagnostics go to stderr
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Emit `<name>.c` and the `<name>_main.c` driver
    Compile(SimArgs),
    /// Simulate, co-simulating the automata of a network in lock step
    Simulate(SimArgs),
    /// Simulate the composed product machine
    ComposeAndSimulate(SimArgs),
    /// Time the bundled benchmarks and report emitted code size
    Bench {
        /// Benchmark only this model
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000_000)]
        ticks: u64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Check,
    Compile,
    Simulate,
    ComposeAndSimulate,
    Bench,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model_path: Option<PathBuf>,
    pub delta: f64,
    pub ticks: u64,
    pub stimulus_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub emit_ir: bool,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let sim = |mode, a: SimArgs| RunConfig {
            mode,
            model_path: Some(a.common.model),
            delta: a.common.delta,
            ticks: a.ticks,
            stimulus_path: a.stimulus,
            output_dir: a.common.out,
            emit_ir: a.common.emit_ir,
        };
        match cli.command {
            Command::Check { common } => RunConfig {
                mode: Mode::Check,
                model_path: Some(common.model),
                delta: common.delta,
                ticks: 0,
                stimulus_path: None,
                output_dir: common.out,
                emit_ir: common.emit_ir,
            },
            Command::Compile(a) => sim(Mode::Compile, a),
            Command::Simulate(a) => sim(Mode::Simulate, a),
            Command::ComposeAndSimulate(a) => sim(Mode::ComposeAndSimulate, a),
            Command::Bench { model, ticks, delta } => RunConfig {
                mode: Mode::Bench,
                model_path: model,
                delta,
                ticks,
                stimulus_path: None,
                output_dir: None,
                emit_ir: false,
            },
        }
    }
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli.into(), stdout, stderr),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            code
        }
    }
}

/// Failure that maps to an exit status; the message is already printed.
struct Exit(i32);

type Outcome = Result<(), Exit>;

fn fail(stderr: &mut dyn Write, code: i32, msg: impl std::fmt::Display) -> Exit {
    let _ = writeln!(stderr, "error: {msg}");
    Exit(code)
}

pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if !(cfg.delta > 0.0 && cfg.delta.is_finite()) {
        let _ = writeln!(stderr, "error: --delta must be a positive number of seconds");
        return EXIT_INPUT;
    }
    let result = match (cfg.mode, cfg.model_path.as_deref()) {
        (Mode::Bench, _) => bench(cfg, stdout, stderr),
        (_, None) => Err(fail(stderr, EXIT_INPUT, "no model file given")),
        (mode, Some(path)) => load(path, stderr).and_then(|net| match mode {
            Mode::Check => check(cfg, &net, stderr),
            Mode::Compile => compile(cfg, &net, stdout, stderr),
            _ => simulate(cfg, &net, mode == Mode::ComposeAndSimulate, stdout, stderr),
        }),
    };
    let _ = stdout.flush();
    match result {
        Ok(()) => EXIT_OK,
        Err(Exit(code)) => code,
    }
}

fn load(path: &Path, stderr: &mut dyn Write) -> Result<Network, Exit> {
    let text = fs::read_to_string(path).map_err(|e| fail(stderr, EXIT_INPUT, format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| {
        let _ = writeln!(stderr, "{}", diagnostics_json(&e.diagnostics));
        Exit(EXIT_INPUT)
    })
}

/// Runs the well-formedness check; prints diagnostics and fails on violations.
fn gate(net: &Network, stderr: &mut dyn Write) -> Outcome {
    let diags: Vec<_> = check_network(net).iter().flat_map(|r| r.diagnostics()).collect();
    if diags.is_empty() {
        Ok(())
    } else {
        let _ = writeln!(stderr, "{}", diagnostics_json(&diags));
        Err(Exit(EXIT_CHECK_FAILED))
    }
}

fn write_ir(cfg: &RunConfig, name: &str, ir: serde_json::Value, stderr: &mut dyn Write) -> Outcome {
    let text = serde_json::to_string_pretty(&ir).expect("IR serializes");
    match &cfg.output_dir {
        Some(dir) => {
            let path = dir.join(format!("{name}.ir.json"));
            fs::create_dir_all(dir)
                .and_then(|_| fs::write(&path, text + "\n"))
                .map_err(|e| fail(stderr, EXIT_INPUT, format!("{}: {e}", path.display())))
        }
        None => {
            let _ = writeln!(stderr, "{text}");
            Ok(())
        }
    }
}

fn check(cfg: &RunConfig, net: &Network, stderr: &mut dyn Write) -> Outcome {
    gate(net, stderr)?;
    if cfg.emit_ir {
        let mut shas = Vec::new();
        for a in &net.automata {
            let (sha, _) = generate_sha(a, cfg.delta).map_err(|e| fail(stderr, EXIT_INPUT, e))?;
            shas.push(sha.to_ir());
        }
        write_ir(cfg, &net.name, json!({ "network": net.name, "automata": shas }), stderr)?;
    }
    Ok(())
}

fn product(cfg: &RunConfig, net: &Network, stderr: &mut dyn Write) -> Result<Swa, Exit> {
    gate(net, stderr)?;
    let (swa, _) = compose_network(net, cfg.delta).map_err(|e| fail(stderr, EXIT_INPUT, e))?;
    Ok(swa)
}

fn compile(cfg: &RunConfig, net: &Network, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let swa = product(cfg, net, stderr)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let unit = emit_c(&swa, &CodegenOptions::default());
    let stim = cfg.stimulus_path.as_ref().map(|p| p.display().to_string());
    let driver = emit_driver(&swa, stim.as_deref(), cfg.ticks);
    let unit_path = dir.join(format!("{}.c", swa.name));
    let driver_path = dir.join(format!("{}_main.c", swa.name));
    fs::create_dir_all(&dir)
        .and_then(|_| fs::write(&unit_path, &unit.source_text))
        .and_then(|_| fs::write(&driver_path, driver))
        .map_err(|e| fail(stderr, EXIT_INPUT, format!("{}: {e}", dir.display())))?;
    let _ = writeln!(stdout, "{}\n{}", unit_path.display(), driver_path.display());
    if cfg.emit_ir {
        write_ir(cfg, &swa.name, swa.to_ir(), stderr)?;
    }
    Ok(())
}

fn load_stimulus(cfg: &RunConfig, events: &crate::swa::EventTable, allowed: EventMask, stderr: &mut dyn Write) -> Result<Stimulus, Exit> {
    let Some(path) = &cfg.stimulus_path else {
        return Ok(Stimulus::empty());
    };
    let text = fs::read_to_string(path).map_err(|e| fail(stderr, EXIT_INPUT, format!("{}: {e}", path.display())))?;
    Stimulus::parse(&text, events, allowed).map_err(|e| fail(stderr, EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn trace_to<M: Machine>(cfg: &RunConfig, name: &str, m: &mut M, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let stim = load_stimulus(cfg, &m.events().clone(), m.external_inputs(), stderr)?;
    let result = match &cfg.output_dir {
        Some(dir) => {
            let path = dir.join(format!("{name}_trace.csv"));
            let file = fs::create_dir_all(dir)
                .and_then(|_| fs::File::create(&path))
                .map_err(|e| fail(stderr, EXIT_INPUT, format!("{}: {e}", path.display())))?;
            let mut w = io::BufWriter::new(file);
            write_trace(m, cfg.ticks, &stim, &mut w)
        }
        None => {
            let mut w = io::BufWriter::new(stdout);
            write_trace(m, cfg.ticks, &stim, &mut w)
        }
    };
    match result {
        Ok(()) => Ok(()),
        Err(SimError::Unreachable(e)) => Err(fail(stderr, EXIT_UNREACHABLE, format!("unreachable state: {e}"))),
        Err(SimError::Io(e)) => Err(fail(stderr, EXIT_INPUT, e)),
    }
}

fn simulate(cfg: &RunConfig, net: &Network, composed: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    if composed || net.automata.len() == 1 {
        let swa = product(cfg, net, stderr)?;
        if cfg.emit_ir {
            write_ir(cfg, &swa.name, swa.to_ir(), stderr)?;
        }
        trace_to(cfg, &net.name, &mut Simulator::new(&swa), stdout, stderr)
    } else {
        gate(net, stderr)?;
        let (parts, _) = network_swas(net, cfg.delta).map_err(|e| fail(stderr, EXIT_INPUT, e))?;
        if cfg.emit_ir {
            let irs: Vec<_> = parts.iter().map(Swa::to_ir).collect();
            write_ir(cfg, &net.name, json!({ "network": net.name, "machines": irs }), stderr)?;
        }
        let mut cosim = CoSimulator::new(&parts).map_err(|e| fail(stderr, EXIT_INPUT, e))?;
        trace_to(cfg, &net.name, &mut cosim, stdout, stderr)
    }
}

/// Period of the synthetic bench stimulus in ticks.
pub const BENCH_PERIOD: u64 = 6000;

/// External inputs spread evenly over each [`BENCH_PERIOD`].
pub fn bench_events(swa: &Swa, tick: u64) -> EventMask {
    let ext = swa.events.names_in(swa.external_inputs());
    if ext.is_empty() {
        return 0;
    }
    let phase = tick % BENCH_PERIOD;
    let spacing = BENCH_PERIOD / ext.len() as u64;
    ext.iter()
        .enumerate()
        .filter(|(i, _)| phase == *i as u64 * spacing)
        .map(|(_, e)| swa.events.bit(e).expect("own event"))
        .fold(0, |m, b| m | b)
}

pub struct BenchRow {
    pub name: String,
    pub states: usize,
    pub ticks: u64,
    pub seconds: f64,
    pub source_bytes: usize,
    pub object_bytes: Option<u64>,
}

fn c_compiler() -> Option<String> {
    let candidates = std::env::var("CC").into_iter().chain(["cc".to_string(), "gcc".to_string(), "clang".to_string()]);
    candidates.into_iter().find(|c| Process::new(c).arg("--version").output().map(|o| o.status.success()).unwrap_or(false))
}

fn object_size(cc: &str, name: &str, source: &str) -> Option<u64> {
    let dir = std::env::temp_dir().join(format!("hasc-bench-{}", std::process::id()));
    fs::create_dir_all(&dir).ok()?;
    let src = dir.join(format!("{name}.c"));
    let obj = dir.join(format!("{name}.o"));
    fs::write(&src, source).ok()?;
    let ok = Process::new(cc)
        .args(["-std=c99", "-O2", "-ffp-contract=off", "-c"])
        .arg(&src)
        .arg("-o")
        .arg(&obj)
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    let size = if ok { fs::metadata(&obj).ok().map(|m| m.len()) } else { None };
    let _ = fs::remove_dir_all(&dir);
    size
}

pub fn bench_model(net: &Network, delta: f64, ticks: u64, cc: Option<&str>) -> Result<BenchRow, String> {
    let (swa, _) = compose_network(net, delta).map_err(|e| e.to_string())?;
    let mut sim = Simulator::new(&swa);
    let start = Instant::now();
    for n in 0..ticks {
        sim.step(bench_events(&swa, n)).map_err(|e| e.to_string())?;
    }
    let seconds = start.elapsed().as_secs_f64();
    let unit = emit_c(&swa, &CodegenOptions::default());
    Ok(BenchRow {
        name: swa.name.clone(),
        states: swa.states.len(),
        ticks,
        seconds,
        source_bytes: unit.source_text.len(),
        object_bytes: cc.and_then(|cc| object_size(cc, &swa.name, &unit.source_text)),
    })
}

fn bench(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let nets: Vec<Network> = match &cfg.model_path {
        Some(p) => vec![load(p, stderr)?],
        None => [models::WATERTANK, models::WATERTANK_BURNER, models::THERMOSTAT, models::TRAINGATE]
            .iter()
            .map(|m| parse_model(m).expect("bundled models parse"))
            .collect(),
    };
    let cc = c_compiler();
    let _ = writeln!(
        stdout,
        "{:<18} {:>6} {:>10} {:>9} {:>12} {:>9} {:>9}",
        "model", "states", "ticks", "wall_s", "ticks_per_s", "c_bytes", "obj_bytes"
    );
    for net in &nets {
        gate(net, stderr)?;
        let row = bench_model(net, cfg.delta, cfg.ticks, cc.as_deref()).map_err(|e| fail(stderr, EXIT_UNREACHABLE, e))?;
        let rate = if row.seconds > 0.0 { row.ticks as f64 / row.seconds } else { f64::INFINITY };
        let obj = row.object_bytes.map_or_else(|| "-".to_string(), |b| b.to_string());
        let _ = writeln!(
            stdout,
            "{:<18} {:>6} {:>10} {:>9.3} {:>12.0} {:>9} {:>9}",
            row.name, row.states, row.ticks, row.seconds, rate, row.source_bytes, obj
        );
    }
    Ok(())
}
