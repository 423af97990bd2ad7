//! `jmgt` command-line front end.
//!
//! ```text
//! jmgt <verb> --config run.toml --out results/ [--set section.key=value]...
//! ```
//!
//! Exit codes: 0 success, 1 invalid input (usage, config, validation, I/O),
//! 2 solver failure. Failures write `error.json` into the output directory;
//! every run writes `run_info.json` with timestamps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use jmgt_core::config::{load_config, profile_forcing, Config, Profile};
use jmgt_core::diagnostics::{
    choose_multipliers, coefficient_smallness_report, compute_energies, energy_identity_terms,
};
use jmgt_core::output::{
    write_atomic, write_convergence, write_diagnostics, write_energy, write_iterations, write_oracle, write_solution,
    write_tau_sweep, write_taylor,
};
use jmgt_core::studies::{convergence_study, oracle_compare, solve_state, tau_sweep, taylor_test};
use jmgt_core::{Error, HarmonicField, Model};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Solve,
    SweepTau,
    Energy,
    DerivCheck,
    Converge,
    OracleCompare,
    Validate,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::SweepTau => "sweep-tau",
            Verb::Energy => "energy",
            Verb::DerivCheck => "deriv-check",
            Verb::Converge => "converge",
            Verb::OracleCompare => "oracle-compare",
            Verb::Validate => "validate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jmgt", version, about = "Time-periodic JMGT / Westervelt / Kuznetsov solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: RunCommand,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Configuration file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Override a config value, e.g. `--set physics.tau=0.05`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum RunCommand {
    /// Solve the periodic problem; writes solution, energy, iterations and diagnostics.
    Solve(RunArgs),
    /// Distance to the tau = 0 solution over `study.taus`.
    SweepTau(RunArgs),
    /// Energies, identity terms and coefficient norms of the solution.
    Energy(RunArgs),
    /// Taylor test of the source-to-state derivative over `study.eps`.
    DerivCheck(RunArgs),
    /// Manufactured-solution refinement over `study.grids`.
    Converge(RunArgs),
    /// Harmonic balance against time stepping.
    OracleCompare(RunArgs),
    /// Parse and validate the configuration only.
    Validate(RunArgs),
}

impl RunCommand {
    fn split(self) -> (Verb, RunArgs) {
        match self {
            RunCommand::Solve(a) => (Verb::Solve, a),
            RunCommand::SweepTau(a) => (Verb::SweepTau, a),
            RunCommand::Energy(a) => (Verb::Energy, a),
            RunCommand::DerivCheck(a) => (Verb::DerivCheck, a),
            RunCommand::Converge(a) => (Verb::Converge, a),
            RunCommand::OracleCompare(a) => (Verb::OracleCompare, a),
            RunCommand::Validate(a) => (Verb::Validate, a),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_INVALID
    }
}

fn error_record(e: &Error) -> Value {
    let mut rec = json!({
        "kind": e.kind(),
        "message": e.to_string(),
        "exit_code": exit_code(e),
    });
    match e {
        Error::Validation(vs) => {
            rec["violations"] = vs.iter().map(|v| json!({"kind": v.kind(), "message": v.to_string()})).collect();
        }
        Error::Config(c) => rec["kind"] = json!(c.kind()),
        Error::NonContraction { iterations, last_ratio, update_norms } => {
            rec["iterations"] = json!(iterations);
            rec["last_ratio"] = json!(finite_or_null(*last_ratio));
            rec["update_norms"] = update_norms.iter().map(|v| json!(finite_or_null(*v))).collect();
        }
        _ => {}
    }
    rec
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn write_json(path: &Path, value: &Value) -> jmgt_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// What a verb produced: files written and study metadata.
#[derive(Default)]
struct Produced {
    files: Vec<String>,
    metadata: BTreeMap<String, String>,
}

impl Produced {
    fn file(&mut self, out: &Path, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        out.join(name)
    }
}

const DEFAULT_TAUS: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];
const DEFAULT_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn run_verb(verb: Verb, config: &Config, out: &Path) -> jmgt_core::Result<Produced> {
    let validated = config.validate()?;
    let model = validated.model;
    let mut p = Produced::default();
    p.metadata.insert("config_hash".into(), model.config_hash());
    p.metadata.insert("stability_margin".into(), format!("{:.16e}", validated.stability_margin));
    if verb == Verb::Validate {
        return Ok(p);
    }
    let kind = config.equation();
    let fp = config.fixed_point_options();
    match verb {
        Verb::Validate => unreachable!(),
        Verb::Solve | Verb::Energy => {
            let f = config.forcing(&model)?;
            let report = solve_state(&f, &model, kind, &fp)?;
            let energies = compute_energies(&report.u, &model);
            write_energy(&p.file(out, "energy.csv"), &energies)?;
            let mut diag = vec![
                ("iterations".to_string(), report.iterations as f64),
                ("final_residual".to_string(), report.final_residual),
                ("alpha_min".to_string(), report.degeneracy_margin),
                ("alpha_max".to_string(), report.alpha_max),
                ("stability_margin".to_string(), report.stability_margin),
            ];
            if verb == Verb::Solve {
                write_solution(&p.file(out, "solution.csv"), &report.u, model.grid())?;
                write_iterations(&p.file(out, "iterations.csv"), &report)?;
            } else {
                let mult = choose_multipliers(model.params())?;
                let t = energy_identity_terms(&report.u, &report.rtilde(), &mult, &model)?;
                diag.extend([
                    ("sigma".to_string(), mult.sigma),
                    ("rho".to_string(), mult.rho),
                    ("identity_second_derivative".to_string(), t.second_derivative),
                    ("identity_velocity".to_string(), t.velocity),
                    ("identity_source".to_string(), t.source),
                    ("identity_coefficient_gradient".to_string(), t.coefficient_gradient),
                    ("identity_gradient".to_string(), t.gradient),
                    ("identity_boundary".to_string(), t.boundary),
                    ("identity_normal_derivative".to_string(), t.normal_derivative),
                    ("identity_residual".to_string(), t.total().abs()),
                    ("identity_scale".to_string(), t.scale()),
                ]);
                for (name, v) in coefficient_smallness_report(model.params(), model.grid()).rows() {
                    diag.push((name.to_string(), v));
                }
            }
            write_diagnostics(&p.file(out, "diagnostics.csv"), &diag)?;
        }
        Verb::SweepTau => {
            let f = config.forcing(&model)?;
            let taus = config.study.taus.clone().unwrap_or_else(|| DEFAULT_TAUS.to_vec());
            let s = tau_sweep(&f, &model, &taus, kind, &fp)?;
            write_tau_sweep(&p.file(out, "tau_sweep.csv"), &s)?;
            p.metadata.extend(s.metadata);
        }
        Verb::DerivCheck => {
            let f = config.forcing(&model)?;
            let dir = taylor_direction(config, &model, &f)?;
            let eps = config.study.eps.clone().unwrap_or_else(|| DEFAULT_EPS.to_vec());
            let mut opts = fp;
            if config.solver.tol.is_none() {
                opts.tol = 1e-15;
                opts.max_iter = opts.max_iter.max(200);
            }
            let s = taylor_test(&f, &dir, &model, kind, &eps, &opts)?;
            write_taylor(&p.file(out, "taylor.csv"), &s)?;
            p.metadata.extend(s.metadata);
        }
        Verb::Converge => {
            let case = config
                .study
                .case
                .clone()
                .or_else(|| config.forcing.case.clone())
                .unwrap_or_else(|| "linear-dirichlet".to_string());
            let nx = model.grid().nx();
            let grids = config.study.grids.clone().unwrap_or_else(|| vec![nx, 2 * nx - 1, 4 * nx - 3]);
            let amplitude = config.forcing.case_amplitude.unwrap_or(1.0);
            let s = convergence_study(&case, &model, &grids, amplitude, &fp)?;
            write_convergence(&p.file(out, "convergence.csv"), &s)?;
            p.metadata.extend(s.metadata);
        }
        Verb::OracleCompare => {
            let f = config.forcing(&model)?;
            let s = oracle_compare(&f, &model, kind, &fp, &config.oracle_options())?;
            write_oracle(&p.file(out, "oracle.csv"), &s)?;
            p.metadata.extend(s.metadata);
        }
    }
    Ok(p)
}

/// `study.direction` with the forcing amplitudes, or a hat profile on harmonic 1.
fn taylor_direction(config: &Config, model: &Model, f: &HarmonicField) -> jmgt_core::Result<HarmonicField> {
    let profile = config.study.direction.unwrap_or(Profile::Hat);
    let amps = if config.forcing.amplitudes.is_empty() { vec![1.0] } else { config.forcing.amplitudes.clone() };
    let dir = profile_forcing(model, profile, &amps, &[])?;
    if dir.is_zero() {
        return Ok(f.clone());
    }
    Ok(dir)
}

/// Parses `argv` (including the program name), runs the verb and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    let (verb, args) = cli.command.split();
    execute(verb, &args)
}

pub fn execute(verb: Verb, args: &RunArgs) -> i32 {
    let started = unix_seconds();
    let clock = Instant::now();
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return EXIT_INVALID;
    }
    let error_path = args.out.join("error.json");
    let _ = std::fs::remove_file(&error_path);

    let result = load_config(&args.config, &args.overrides)
        .map_err(Error::from)
        .and_then(|config| run_verb(verb, &config, &args.out));

    let (code, produced) = match result {
        Ok(p) => (EXIT_OK, p),
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error[{}]: {e}", e.kind());
            if let Err(io) = write_json(&error_path, &error_record(&e)) {
                eprintln!("error: cannot write {}: {io}", error_path.display());
            }
            let mut p = Produced::default();
            p.files.push("error.json".into());
            (code, p)
        }
    };

    let info = json!({
        "verb": verb.name(),
        "config": args.config.display().to_string(),
        "overrides": args.overrides,
        "exit_code": code,
        "files": produced.files,
        "metadata": produced.metadata,
        "started_unix": started,
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    if let Err(e) = write_json(&args.out.join("run_info.json"), &info) {
        eprintln!("error: cannot write run_info.json: {e}");
        return if code == EXIT_OK { EXIT_INVALID } else { code };
    }
    code
}
