//! Command-line front end. Every subcommand prints one JSON report;
//! trajectories and records go to CSV files next to `--out`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::bounds::{classify_dark_with, max_fidelity_with, partition_signs, spectral, SpectralData};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::linalg::{c, CMat, CVec};
use crate::network::{parse_network, SpinNetwork, Which};
use crate::operators::{excitation_basis, restrict};
use crate::pulses::{
    plan_catalysis, refine, simulate, synthesize_transfer, CatalysisPlan, PulseSchedule, SimOptions, SimulationResult,
    SynthOptions, REFINE_BUDGET,
};
use crate::symmetries::{decompose, find_asos, lie_closure_dimension, restrict_to};
use crate::sysid::{estimate_spectrum, resolve_signs, survival_record, BlackBox, RecordOptions, SignOptions};

pub const SCHEMA: &str = "spinnet.report/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "spinnet", version, about = "Controllability, bounds and pulses for pendant-controlled XX spin networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Symmetries, invariant blocks, Lie closure and spectrum.
    Analyze(NetArgs),
    /// Best single-excitation fidelity for a target.
    Bound(TargetArgs),
    /// Synthesize (or load) a schedule and simulate it.
    Simulate(SimulateArgs),
    /// Plan and simulate a catalytic transfer.
    Catalyze(PulseArgs),
    /// Recover the accessible spectrum from survival records.
    Identify(IdentifyArgs),
    /// Write the bundled fixture networks to a directory.
    Fixtures(FixtureArgs),
}

#[derive(Args, Debug)]
struct NetArgs {
    /// Network JSON file, or the name of a bundled fixture.
    #[arg(long)]
    net: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TargetArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Basis label ("3", "1,4") or amplitude map {"3": [re, im], ...}.
    #[arg(long)]
    target: String,
}

#[derive(Args, Debug)]
struct PulseArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = 0.02)]
    quality: f64,
    /// Simulator step; defaults to 0.01/||H||.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    pulse: PulseArgs,
    /// Replay a schedule JSON instead of synthesizing one.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Polish the schedule by coordinate descent (needs --seed).
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    refine: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct IdentifyArgs {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long = "T", default_value_t = 5000.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Repetitions per measurement (needs --seed).
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    /// Destination directory.
    #[arg(long)]
    out: PathBuf,
}

enum Outcome {
    Done(Value),
    Infeasible(Value),
}

/// Outcome of one CLI invocation, before anything reaches stdout.
#[derive(Debug, Clone)]
pub struct Execution {
    pub code: i32,
    /// Rendered report; `None` when the command failed.
    pub report: Option<String>,
    /// Usage text or error message.
    pub message: Option<String>,
    /// Whether the report was already written to `--out`.
    pub written: bool,
}

/// Parse `argv` (program name first), run the command and write any files
/// it asks for. Nothing is printed.
pub fn execute<I, T>(argv: I) -> Execution
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let fail = |code, message: String| Execution { code, report: None, message: Some(message), written: false };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            return fail(code, e.to_string());
        }
    };
    let (echo, out) = echo(&cli.command);
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Bound(a) => bound(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Catalyze(a) => catalyze(a),
        Command::Identify(a) => identify(a),
        Command::Fixtures(a) => write_fixtures(a),
    };
    let (payload, network, code) = match result {
        Ok((net, Outcome::Done(v))) => (v, net, EXIT_OK),
        Ok((net, Outcome::Infeasible(v))) => (v, net, EXIT_INFEASIBLE),
        Err(e) => return fail(EXIT_INVALID, format!("error: {e}")),
    };
    let report = json!({
        "schema": SCHEMA,
        "command": echo,
        "network": network.as_ref().map(digest),
        "result": payload,
    });
    let text = render(&report);
    let mut written = false;
    if let Some(p) = out.filter(|_| !matches!(cli.command, Command::Fixtures(_))) {
        if let Err(e) = std::fs::write(&p, text.clone() + "\n") {
            return fail(EXIT_INVALID, format!("error: cannot write {}: {e}", p.display()));
        }
        written = true;
    }
    Execution { code, report: Some(text), message: None, written }
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let ex = execute(argv);
    if let Some(m) = &ex.message {
        if ex.code == EXIT_OK {
            print!("{m}");
        } else {
            eprint!("{}", m.trim_end_matches('\n').to_string() + "\n");
        }
    }
    match ex.report {
        Some(text) if !ex.written => {
            let mut stdout = std::io::stdout().lock();
            if writeln!(stdout, "{text}").is_err() {
                return EXIT_INVALID;
            }
            ex.code
        }
        _ => ex.code,
    }
}

fn echo(cmd: &Command) -> (Value, Option<PathBuf>) {
    let (name, args, out) = match cmd {
        Command::Analyze(a) => ("analyze", json!({ "net": a.net }), a.out.clone()),
        Command::Bound(a) => ("bound", json!({ "net": a.net.net, "target": a.target }), a.net.out.clone()),
        Command::Simulate(a) => (
            "simulate",
            json!({
                "net": a.pulse.target.net.net, "target": a.pulse.target.target, "quality": a.pulse.quality,
                "dt": a.pulse.dt, "schedule": a.schedule.as_ref().map(|p| p.display().to_string()),
                "refine": a.refine, "seed": a.seed,
            }),
            a.pulse.target.net.out.clone(),
        ),
        Command::Catalyze(a) => (
            "catalyze",
            json!({ "net": a.target.net.net, "target": a.target.target, "quality": a.quality, "dt": a.dt }),
            a.target.net.out.clone(),
        ),
        Command::Identify(a) => (
            "identify",
            json!({ "net": a.net.net, "epsilon": a.epsilon, "T": a.duration, "dt": a.dt, "shots": a.shots, "seed": a.seed }),
            a.net.out.clone(),
        ),
        Command::Fixtures(a) => ("fixtures", json!({ "out": a.out.display().to_string() }), Some(a.out.clone())),
    };
    (json!({ "name": name, "args": args }), out)
}

fn digest(net: &SpinNetwork) -> Value {
    json!({
        "n": net.n,
        "drift_edges": net.drift_edges.len(),
        "control_edges": net.control_edges.len(),
        "bipartite": matches!(partition_signs(net), Ok(Some(_))),
    })
}

/// Serialize with every float rounded to 12 significant digits; magnitudes
/// below `1e-12` print as zero.
pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(&round_floats(v)).expect("report serializes")
}

fn round_floats(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            let r = if r.abs() < 1e-12 { 0.0 } else { r };
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), round_floats(x))).collect()),
        other => other.clone(),
    }
}

fn load_network(spec: &str) -> Result<SpinNetwork> {
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        return parse_network(&text);
    }
    fixtures::network(spec).ok_or_else(|| Error::Io(format!("network file `{spec}` not found")))
}

fn target_error(reason: impl Into<String>) -> Error {
    Error::Schema { field: "target".into(), reason: reason.into() }
}

fn parse_label(label: &str, n: usize) -> Result<Vec<usize>> {
    let mut spins: Vec<usize> = label
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| target_error(format!("bad basis label `{label}`"))))
        .collect::<Result<_>>()?;
    spins.sort_unstable();
    if spins.windows(2).any(|w| w[0] == w[1]) || spins.iter().any(|&s| s == 0 || s > n) {
        return Err(target_error(format!("label `{label}` names spins outside 1..={n} or repeats one")));
    }
    Ok(spins)
}

/// Parse a target into (excitation number, normalized amplitudes).
pub fn parse_target(text: &str, n: usize) -> Result<(usize, CVec)> {
    let text = text.trim();
    let entries: Vec<(Vec<usize>, (f64, f64))> = if text.starts_with('{') {
        let map: Map<String, Value> = serde_json::from_str(text).map_err(|e| target_error(e.to_string()))?;
        map.iter()
            .map(|(k, v)| {
                let pair = v.as_array().filter(|a| a.len() == 2).and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)));
                let amp = pair.ok_or_else(|| target_error(format!("amplitude of `{k}` must be [re, im]")))?;
                Ok((parse_label(k, n)?, amp))
            })
            .collect::<Result<_>>()?
    } else {
        vec![(parse_label(text, n)?, (1.0, 0.0))]
    };
    let k = entries.first().map(|e| e.0.len()).ok_or_else(|| target_error("empty amplitude map"))?;
    if entries.iter().any(|e| e.0.len() != k) {
        return Err(target_error("labels mix excitation numbers"));
    }
    let basis = excitation_basis(n, k)?;
    let mut v = CVec::zeros(basis.len());
    for (spins, (re, im)) in entries {
        let i = basis.index_of(&spins).ok_or_else(|| target_error("label not in basis"))?;
        v[i] += c(re, im);
    }
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(target_error("amplitudes vanish"));
    }
    Ok((k, v / c(norm, 0.0)))
}

fn single_target(text: &str, n: usize) -> Result<CVec> {
    match parse_target(text, n)? {
        (1, v) => Ok(v),
        (k, _) => Err(target_error(format!("needs a single-excitation target, got {k} excitations"))),
    }
}

fn complex_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

fn matrix_json(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|r| Value::Array((0..m.ncols()).map(|s| json!([m[(r, s)].re, m[(r, s)].im])).collect())).collect())
}

fn spectrum_json(net: &SpinNetwork, spec: &SpectralData) -> Result<Value> {
    let dark = spec
        .dark
        .iter()
        .map(|d| {
            Ok(json!({
                "eigenvalue": d.eigenvalue,
                "symmetric": d.symmetric,
                "vector": complex_json(&d.vector),
                "classification": classify_dark_with(net, spec, &d.vector)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({
        "eigenvalues": spec.eigenvalues[1..],
        "overlaps": spec.overlaps[1..],
        "paired_with": spec.paired_with[1..].iter().map(|p| p.map(|k| k - 1)).collect::<Vec<_>>(),
        "dark": dark,
    }))
}

type Run = Result<(Option<SpinNetwork>, Outcome)>;

fn analyze(a: &NetArgs) -> Run {
    let net = load_network(&a.net)?;
    let hams = vec![restrict(&net, Which::Drift, 1)?.entries, restrict(&net, Which::Control, 1)?.entries];
    let dec = decompose(&hams)?;
    let ha = restrict_to(&hams, &dec.accessible().basis);
    let asos = find_asos(&ha)?;
    let d = dec.accessible().dim();
    let lie = match lie_closure_dimension(&ha, d * d) {
        Ok(v) => json!(v),
        Err(Error::ClosureCap(cap)) => json!(format!(">= {cap}")),
        Err(e) => return Err(e),
    };
    let spec = spectral(&net)?;
    let payload = json!({
        "csos": dec.csos.len(),
        "cso_matrices": dec.csos.iter().map(|s| matrix_json(&s.matrix)).collect::<Vec<_>>(),
        "blocks": dec.blocks.iter().map(|b| b.dim()).collect::<Vec<_>>(),
        "accessible_dim": d,
        "asos_on_accessible": asos.len(),
        "aso_involutory": asos.iter().map(|s| s.involutory).collect::<Vec<_>>(),
        "lie_dim": lie,
        "spectrum": spectrum_json(&net, &spec)?,
    });
    Ok((Some(net), Outcome::Done(payload)))
}

fn bound(a: &TargetArgs) -> Run {
    let net = load_network(&a.net.net)?;
    let target = single_target(&a.target, net.n)?;
    let spec = spectral(&net)?;
    let b = max_fidelity_with(&net, &spec, &target)?;
    let mut classes = Map::new();
    for d in &b.dark_components {
        let v = &spec.dark[d.index].vector;
        classes.insert(d.index.to_string(), serde_json::to_value(classify_dark_with(&net, &spec, v)?).expect("class serializes"));
    }
    let payload = json!({
        "fidelity": b.value,
        "dark": b.dark_components.iter().map(|d| json!({ "eigvec": d.index, "eigenvalue": d.eigenvalue, "weight": d.weight })).collect::<Vec<_>>(),
        "phase_attainable": b.phase_attainable,
        "classification": classes,
        "optimal_output": complex_json(&b.optimal_output),
    });
    Ok((Some(net), Outcome::Done(payload)))
}

fn csv_path(out: &Option<PathBuf>, suffix: &str) -> Option<PathBuf> {
    out.as_ref().map(|p| {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
        p.with_file_name(format!("{stem}.{suffix}.csv"))
    })
}

fn write_csv(path: &Option<PathBuf>, text: Result<String>) -> Result<Value> {
    match path {
        Some(p) => {
            std::fs::write(p, text?).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            Ok(json!(p.display().to_string()))
        }
        None => Ok(Value::Null),
    }
}

fn simulation_json(res: &SimulationResult) -> Value {
    json!({
        "fidelity": res.fidelity,
        "phase_optimized": res.phase_optimized,
        "bound": res.bound.as_ref().map(|b| b.value),
        "final_sectors": res.final_sectors,
        "final_state": complex_json(&res.final_state),
        "extraction_loss": res.extraction_loss,
        "norm_error": res.norm_error,
        "dt": res.dt,
        "duration": res.duration,
    })
}

fn pendant_state(net: &SpinNetwork) -> CVec {
    crate::linalg::basis_vector(net.n, 0)
}

fn simulate_cmd(a: &SimulateArgs) -> Run {
    let p = &a.pulse;
    let net = load_network(&p.target.net.net)?;
    let target = single_target(&p.target.target, net.n)?;
    let (mut schedule, synthesis) = match &a.schedule {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let s = PulseSchedule::from_json(&text)?;
            if s.sectors != [1] || s.segments.iter().any(|x| x.is_marker()) {
                return Err(Error::Schema { field: "schedule.sectors".into(), reason: "simulate replays single-excitation schedules".into() });
            }
            (s, Value::Null)
        }
        None => {
            let syn = synthesize_transfer(&net, &target, &SynthOptions { quality: p.quality, ..Default::default() })?;
            let info = json!({ "epsilon": syn.epsilon, "gap": syn.gap, "bound": syn.bound, "predicted_fidelity": syn.predicted_fidelity });
            (syn.schedule, info)
        }
    };
    let opts = SimOptions { dt: p.dt, target: Some(target.clone()), ..Default::default() };
    let start = pendant_state(&net);
    let mut refinement = Value::Null;
    if a.refine {
        let seed = a.seed.ok_or_else(|| Error::Schema { field: "seed".into(), reason: "--refine needs --seed".into() })?;
        let r = refine(&net, &schedule, &start, &target, &opts, seed, REFINE_BUDGET)?;
        refinement = json!({ "initial_fidelity": r.initial_fidelity, "fidelity": r.fidelity, "evaluations": r.evaluations });
        schedule = r.schedule;
    }
    let res = simulate(&net, &schedule, &start, &opts)?;
    let csv = write_csv(&csv_path(&p.target.net.out, "trajectory"), res.trajectory.to_csv())?;
    let payload = json!({
        "synthesis": synthesis,
        "refinement": refinement,
        "schedule": schedule.to_json(),
        "simulation": simulation_json(&res),
        "trajectory_csv": csv,
    });
    Ok((Some(net), Outcome::Done(payload)))
}

fn catalyze(a: &PulseArgs) -> Run {
    let net = load_network(&a.target.net.net)?;
    let target = single_target(&a.target.target, net.n)?;
    let plan = plan_catalysis(&net, &target, &SynthOptions { quality: a.quality, ..Default::default() })?;
    let plan = match plan {
        CatalysisPlan::Infeasible { blocker, weight } => {
            let payload = json!({ "feasible": false, "blocker": blocker, "dark_weight": weight });
            return Ok((Some(net), Outcome::Infeasible(payload)));
        }
        CatalysisPlan::Feasible(p) => p,
    };
    let opts = SimOptions { dt: a.dt, target: Some(target.clone()), ..Default::default() };
    let res = simulate(&net, &plan.schedule, &pendant_state(&net), &opts)?;
    let csv = write_csv(&csv_path(&a.target.net.out, "trajectory"), res.trajectory.to_csv())?;
    let payload = json!({
        "feasible": true,
        "single_sector_bound": plan.single_sector_bound,
        "predicted_fidelity": plan.predicted_fidelity,
        "intermediate": complex_json(&plan.intermediate),
        "bridges": plan.bridges,
        "schedule": plan.schedule.to_json(),
        "simulation": simulation_json(&res),
        "trajectory_csv": csv,
    });
    Ok((Some(net), Outcome::Done(payload)))
}

fn identify(a: &IdentifyArgs) -> Run {
    let net = load_network(&a.net.net)?;
    let seed = match (a.shots, a.seed) {
        (Some(_), None) => return Err(Error::Schema { field: "seed".into(), reason: "--shots needs --seed".into() }),
        (_, s) => s.unwrap_or(0),
    };
    let bb = BlackBox::new(net.clone());
    let rec = survival_record(&bb, &RecordOptions { epsilon: a.epsilon, duration: a.duration, dt: a.dt, shots: a.shots, seed })?;
    let est = estimate_spectrum(&rec)?;
    let signed = resolve_signs(&bb, &est, &SignOptions { shots: a.shots, seed: seed.wrapping_add(1) })?;
    let csv = write_csv(&csv_path(&a.net.out, "record"), rec.to_csv())?;
    let payload = json!({
        "resolution": est.resolution,
        "unsigned": est.estimates,
        "estimates": signed.estimates,
        "symmetric": signed.symmetric,
        "record_csv": csv,
    });
    Ok((Some(net), Outcome::Done(payload)))
}

fn write_fixtures(a: &FixtureArgs) -> Run {
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io(format!("{}: {e}", a.out.display())))?;
    let mut files = Vec::new();
    for (name, text) in fixtures::ALL {
        let p = a.out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        files.push(p.display().to_string());
    }
    Ok((None, Outcome::Done(json!({ "files": files }))))
}
