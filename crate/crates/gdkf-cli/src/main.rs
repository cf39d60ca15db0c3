//! `gdkf` — simulate the constant-acceleration benchmark, compare the exact
//! and gradient-descent filters, run the online-learning scenarios, and
//! self-check the numerical oracles.

mod params;

use clap::{Args, Parser, Subcommand};
use gdkf_core::experiment::{
    run_experiment, run_tracking_on, summarize, ExperimentResult, Scenario,
};
use gdkf_core::model::{control_schedule, kinematic_model, Trajectory};
use gdkf_core::selftest::{self, SelftestOptions};
use gdkf_core::textio::{kv_block, matrix_block, result_to_csv, trajectory_from_csv, trajectory_to_csv};
use gdkf_core::linalg::Vector;
use params::Params;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "gdkf", version, about = "State-estimation benchmarks: exact Kalman filtering vs gradient-descent inference with Hebbian learning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Run both filters on one trajectory and write traces and metrics.
    Compare(CompareArgs),
    /// Online learning of the model matrices with baselines.
    Learn(LearnArgs),
    /// Run the embedded oracle checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key = value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (all files go here)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    q_std: Option<f64>,
    #[arg(long)]
    r_std: Option<f64>,
    /// 'identity' or 'random'
    #[arg(long)]
    c_mode: Option<String>,
    #[arg(long)]
    u0: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gradient steps per timestep; repeat for multiple runs
    #[arg(long = "n-steps")]
    n_steps: Vec<usize>,
    /// Step size for inference; omitted = automatic (1/curvature)
    #[arg(long)]
    eta_mu: Option<f64>,
    /// Read the trajectory from a CSV instead of simulating
    #[arg(long)]
    traj: Option<PathBuf>,
    /// 'analytic' or 'fixed' dynamical-error precision
    #[arg(long)]
    pi_x_mode: Option<String>,
    /// Run independent comparisons on this many threads
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which matrices to learn: a, b, ab or c
    #[arg(long)]
    scenario: String,
    /// Learning rate for the learned matrices
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "n-steps")]
    n_steps: Option<usize>,
    #[arg(long)]
    eta_mu: Option<f64>,
    #[arg(long)]
    pi_x_mode: Option<String>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Fault injection: flip the sign of the state gradient so the
    /// finite-difference check must fail.
    #[arg(long, hide = true)]
    corrupt_grad_mu: bool,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<params::ParamError> for CliError {
    fn from(e: params::ParamError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<gdkf_core::Error> for CliError {
    fn from(e: gdkf_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Compare(args) => cmd_compare(args),
        Cmd::Learn(args) => cmd_learn(args),
        Cmd::Selftest(args) => cmd_selftest(args),
    };
    match outcome {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<Params, CliError> {
    let mut p = Params::default();
    if let Some(path) = &common.config {
        let map = params::parse_config_file(path)?;
        p.apply_file(&map)?;
    }
    if let Some(v) = common.horizon {
        p.set("horizon", &v.to_string())?;
    }
    if let Some(v) = common.dt {
        p.set("dt", &v.to_string())?;
    }
    if let Some(v) = common.q_std {
        p.set("q_std", &v.to_string())?;
    }
    if let Some(v) = common.r_std {
        p.set("r_std", &v.to_string())?;
    }
    if let Some(v) = &common.c_mode {
        p.set("c_mode", v)?;
    }
    if let Some(v) = common.u0 {
        p.set("u0", &v.to_string())?;
    }
    if let Some(v) = common.decay {
        p.set("decay", &v.to_string())?;
    }
    if let Some(v) = common.seed {
        p.set("seed", &v.to_string())?;
    }
    Ok(p)
}

fn require_out(common: &CommonArgs) -> Result<PathBuf, CliError> {
    common
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out DIRECTORY is required".into()))
}

/// Tracks files written into the output directory so a failed run leaves
/// nothing behind.
struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect()
    }

    fn discard(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

fn write_manifest(
    out: &mut OutputSet,
    command: &str,
    p: &Params,
    extra: &[(String, String)],
    started: Instant,
) -> Result<(), CliError> {
    let mut pairs = vec![
        ("tool_version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("command".to_string(), command.to_string()),
    ];
    pairs.extend(p.manifest_pairs());
    pairs.extend(extra.iter().cloned());
    pairs.push((
        "outputs".to_string(),
        out.names().join(","),
    ));
    pairs.push((
        "duration_ms".to_string(),
        started.elapsed().as_millis().to_string(),
    ));
    out.write("manifest.txt", &kv_block(&pairs))
}

fn with_cleanup(
    out_dir: &Path,
    body: impl FnOnce(&mut OutputSet) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut out = OutputSet::new(out_dir)?;
    match body(&mut out) {
        Ok(()) => Ok(()),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let p = resolve(&args.common)?;
    let out_dir = require_out(&args.common)?;
    with_cleanup(&out_dir, |out| {
        let model = kinematic_model(p.dt, p.q_std, p.r_std, p.c_mode()?)?;
        let controls = control_schedule(p.u0, p.decay, p.horizon)?;
        let traj = model.simulate(&Vector::zeros(3), &controls, p.seed)?;
        out.write("trajectory.csv", &trajectory_to_csv(&traj))?;
        write_manifest(out, "simulate", &p, &[], started)
    })
}

fn run_label(scenario: Scenario, seed: u64, n_steps: usize) -> String {
    format!("{}_seed{}_ns{}", scenario.label(), seed, n_steps)
}

fn write_result_files(
    out: &mut OutputSet,
    result: &ExperimentResult,
    label: &str,
) -> Result<(), CliError> {
    out.write(&format!("results_{label}.csv"), &result_to_csv(result))?;
    out.write(&format!("metrics_{label}.txt"), &summarize(result))?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut p = resolve(&args.common)?;
    if !args.n_steps.is_empty() {
        let list = args
            .n_steps
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        p.set("n_steps", &list)?;
    }
    if let Some(eta) = args.eta_mu {
        p.set("eta_mu", &eta.to_string())?;
    }
    if let Some(mode) = &args.pi_x_mode {
        p.set("pi_x_mode", mode)?;
    }
    if let Some(jobs) = args.jobs {
        p.set("jobs", &jobs.to_string())?;
    }
    if args.traj.is_none() && !p.any_simulation_key_explicit() {
        return Err(CliError::Usage(
            "compare needs either --traj FILE or simulation flags (e.g. --seed)".into(),
        ));
    }
    let out_dir = require_out(&args.common)?;

    let external_traj: Option<Trajectory> = match &args.traj {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(trajectory_from_csv(&text)?)
        }
        None => None,
    };

    let mut step_counts = p.n_steps.clone();
    step_counts.dedup();

    with_cleanup(&out_dir, |out| {
        let run_one = |n_steps: usize| -> Result<(usize, ExperimentResult), CliError> {
            let mut cfg = p.experiment_config(n_steps)?;
            let result = match &external_traj {
                Some(traj) => {
                    cfg.horizon = traj.horizon();
                    run_tracking_on(&cfg, traj)?
                }
                None => run_experiment(&cfg)?,
            };
            Ok((n_steps, result))
        };

        let results: Vec<(usize, ExperimentResult)> = if p.jobs > 1 {
            std::thread::scope(|scope| {
                let handles: Vec<_> = step_counts
                    .iter()
                    .map(|&n| scope.spawn(move || run_one(n)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("comparison thread panicked"))
                    .collect::<Result<Vec<_>, CliError>>()
            })?
        } else {
            step_counts
                .iter()
                .map(|&n| run_one(n))
                .collect::<Result<Vec<_>, CliError>>()?
        };

        for (n_steps, result) in &results {
            let label = run_label(result.config.scenario, p.seed, *n_steps);
            write_result_files(out, result, &label)?;
        }
        let extra: Vec<(String, String)> = args
            .traj
            .iter()
            .map(|t| ("traj".to_string(), t.display().to_string()))
            .collect();
        write_manifest(out, "compare", &p, &extra, started)
    })
}

fn cmd_learn(args: LearnArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let mut p = resolve(&args.common)?;
    p.set("scenario", &args.scenario)?;
    if let Some(lr) = args.lr {
        p.set("lr", &lr.to_string())?;
    }
    if let Some(n) = args.n_steps {
        p.set("n_steps", &n.to_string())?;
    }
    if let Some(eta) = args.eta_mu {
        p.set("eta_mu", &eta.to_string())?;
    }
    if let Some(mode) = &args.pi_x_mode {
        p.set("pi_x_mode", mode)?;
    }
    let scenario = p.scenario()?;
    if scenario == Scenario::None {
        return Err(CliError::Usage(
            "learn needs --scenario a, b, ab or c".into(),
        ));
    }
    let out_dir = require_out(&args.common)?;

    with_cleanup(&out_dir, |out| {
        let cfg = p.experiment_config(p.n_steps[0])?;
        let result = run_experiment(&cfg)?;
        let label = run_label(scenario, p.seed, p.n_steps[0]);
        write_result_files(out, &result, &label)?;
        let mut matrices = String::new();
        for (name, m) in [
            ("A_hat_initial", &result.initial_matrices.a_hat),
            ("B_hat_initial", &result.initial_matrices.b_hat),
            ("C_hat_initial", &result.initial_matrices.c_hat),
            ("A_hat_final", &result.final_matrices.a_hat),
            ("B_hat_final", &result.final_matrices.b_hat),
            ("C_hat_final", &result.final_matrices.c_hat),
        ] {
            matrices.push_str(&matrix_block(name, m));
        }
        out.write(&format!("matrices_{label}.txt"), &matrices)?;
        write_manifest(out, "learn", &p, &[], started)
    })
}

fn cmd_selftest(args: SelftestArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let results = selftest::run(&SelftestOptions {
        corrupt_grad_mu: args.corrupt_grad_mu,
    })?;
    let mut failures = 0;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("check {}: {verdict} — {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    println!(
        "selftest: {}/{} checks passed in {:.1}s",
        results.len() - failures,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} check(s) failed")));
    }
    Ok(())
}
