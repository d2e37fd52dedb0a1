//! `phdae`: run scenario files, estimate convergence orders and check model
//! structure from the command line.
//!
//! Exit status is 0 on success, 1 for configuration problems and 2 when an
//! integration fails (partial outputs are still written).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use phdae::diagnostics::{
    estimate_order, table1_from, DiagnosticsError, DiagnosticsReport, OrderEstimate, Reference, Table1,
    TABLE1_SCHEMES,
};
use phdae::hamiltonian::check_discrete_gradient_axioms;
use phdae::integrators::IntegratorError;
use phdae::system::validate_structure;
use phdae::{simulate, DiscreteGradientKind, Scheme, SchemeConfig, Trajectory};

use config::{BuiltModel, ConfigError, Scenario};

#[derive(Parser)]
#[command(name = "phdae", version, about = "Structure-preserving simulation of energy-based DAE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Seed for randomized initial states and axiom sampling.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory, audit and report files.
    Run(Common),
    /// Estimate observed orders over a list of halving step sizes.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Step size; repeat at least three times.
        #[arg(long = "tau", required = true)]
        taus: Vec<f64>,
        /// Run every scheme instead of only the one in the scenario.
        #[arg(long)]
        all_schemes: bool,
    },
    /// Check structure matrices and discrete-gradient axioms without simulating.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Random samples for the axiom check.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Integration(String),
    #[error("validation failed")]
    Invalid,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Integration(_) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => run(&c),
        Command::Converge {
            common,
            taus,
            all_schemes,
        } => converge(&common, &taus, all_schemes),
        Command::Validate { common, samples } => validate(&common, samples),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn describe_failure(e: &IntegratorError) -> String {
    let kind = match e {
        IntegratorError::NewtonFailure { .. } => "NewtonFailure",
        IntegratorError::Domain { .. } => "DomainError",
        IntegratorError::IndexTooHigh { .. } => "IndexTooHigh",
        IntegratorError::NonFinite { .. } => "NonFinite",
        IntegratorError::InvalidConfig(_) => "InvalidConfig",
        IntegratorError::DimensionMismatch(_) => "DimensionMismatch",
    };
    format!("{kind}: {e}")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    output::write(dir, name, contents).map_err(|source| CliError::Write {
        path: dir.join(name),
        source,
    })
}

#[derive(Serialize)]
struct RunReport {
    model: String,
    scheme: &'static str,
    tau: f64,
    epsilon: Option<f64>,
    t0: f64,
    t_end: f64,
    status: &'static str,
    error: Option<String>,
    final_time: f64,
    diagnostics: DiagnosticsReport,
}

fn report(s: &Scenario, cfg: &SchemeConfig, traj: &Trajectory, error: Option<String>, d: DiagnosticsReport) -> RunReport {
    RunReport {
        model: s.model.name.clone(),
        scheme: cfg.scheme.name(),
        tau: cfg.tau,
        epsilon: s.regularization.map(|r| r.epsilon),
        t0: s.time.t0,
        t_end: s.time.t_end,
        status: if error.is_none() { "ok" } else { "failed" },
        error,
        final_time: traj.final_time(),
        diagnostics: d,
    }
}

fn diagnostics(cfg: &SchemeConfig, traj: &Trajectory) -> DiagnosticsReport {
    DiagnosticsReport::from_trajectory(traj, 10.0 * cfg.newton_tol, 1e8)
}

fn to_json(r: &RunReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes") + "\n"
}

fn load(c: &Common) -> Result<(Scenario, BuiltModel), CliError> {
    let s = Scenario::load(&c.scenario)?;
    let built = s.build(c.seed)?;
    Ok((s, built))
}

fn run(c: &Common) -> Result<(), CliError> {
    let (s, built) = load(c)?;
    let cfg = s.scheme_config()?;
    let (traj, failure) = match simulate(&built.spec, &cfg, s.time.t0, s.time.t_end, &built.initial) {
        Ok(t) => (t, None),
        Err(e) => (*e.trajectory, Some(describe_failure(&e.error))),
    };
    let out = s.outputs();
    if let Some(name) = &out.trajectory_csv {
        write_file(&c.out_dir, name, &output::trajectory_csv(&traj))?;
    }
    if let Some(name) = &out.audit_csv {
        write_file(&c.out_dir, name, &output::audit_csv(&traj))?;
    }
    let diag = diagnostics(&cfg, &traj);
    println!(
        "{} with {}: {} steps to t = {}, H {:.6e} -> {:.6e}, max dissipation violation {:.3e}",
        s.model.name,
        cfg.scheme,
        traj.steps(),
        traj.final_time(),
        traj.energies[0],
        traj.energies[traj.energies.len() - 1],
        diag.max_dissipation_violation
    );
    if let Some(name) = &out.report_json {
        write_file(&c.out_dir, name, &to_json(&report(&s, &cfg, &traj, failure.clone(), diag)))?;
    }
    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Integration(msg)),
    }
}

fn check_taus(taus: &[f64]) -> Result<(), CliError> {
    if taus.len() < 3 {
        return Err(CliError::Usage(format!("need ≥ 3 step sizes, got {}", taus.len())));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::Usage(format!("step size {t} must be positive")));
    }
    Ok(())
}

fn converge(c: &Common, taus: &[f64], all_schemes: bool) -> Result<(), CliError> {
    check_taus(taus)?;
    let (s, built) = load(c)?;
    let base = s.scheme_config()?;
    if built.quantum.is_some() {
        return converge_quantum(c, &s, &built, &base, taus);
    }
    let dae = built.spec.partition.n3 > 0;
    let schemes: Vec<Scheme> = if all_schemes {
        Scheme::ALL.into_iter().filter(|sc| !(dae && sc.is_euler())).collect()
    } else {
        vec![base.scheme]
    };
    if all_schemes && dae {
        println!("skipping Euler schemes: the system has algebraic variables");
    }
    let (t0, t_end) = (s.time.t0, s.time.t_end);
    let flow = built.linear_flow(t0);
    let results: Vec<Result<OrderEstimate, DiagnosticsError>> = thread::scope(|scope| {
        let handles: Vec<_> = schemes
            .iter()
            .map(|&scheme| {
                let cfg = SchemeConfig { scheme, ..base };
                let (spec, s0, flow) = (&built.spec, &built.initial, flow.as_ref());
                scope.spawn(move || {
                    let reference = match flow {
                        Some(f) => Reference::ClosedForm(f),
                        None => Reference::Finest { refinement: 8 },
                    };
                    estimate_order(spec, &cfg, taus, t0, t_end, s0, reference)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("order worker panicked")).collect()
    });

    let out = s.outputs();
    let order_name = out.order_csv.clone().unwrap_or_else(|| "orders.csv".into());
    let reference_kind = if flow.is_some() { "closed form" } else { "finest run" };
    println!("reference: {reference_kind}");
    println!("{:<28} {:>12} {:>14} {:>8}", "scheme", "tau", "error", "order");
    let mut orders = std::collections::BTreeMap::new();
    let mut failure = None;
    for (scheme, r) in schemes.iter().zip(results) {
        match r {
            Ok(est) => {
                for (k, (tau, err)) in est.taus.iter().zip(&est.errors).enumerate() {
                    let order = if k == 0 { String::new() } else { format!("{:.3}", est.pairwise[k - 1]) };
                    println!("{:<28} {:>12.4e} {:>14.6e} {:>8}", scheme.name(), tau, err, order);
                }
                println!("{:<28} mean observed order {:.3}", scheme.name(), est.order);
                write_file(&c.out_dir, &output::per_scheme_name(&order_name, scheme.name()), &output::order_csv(&est))?;
                orders.insert(scheme.name().to_string(), est.order);
            }
            Err(e @ (DiagnosticsError::TooFewStepSizes(_) | DiagnosticsError::NotHalving(..))) => {
                return Err(CliError::Usage(e.to_string()));
            }
            Err(e) => {
                println!("{:<28} failed: {e}", scheme.name());
                failure.get_or_insert(format!("{scheme}: {e}"));
            }
        }
    }

    if let Some(name) = &out.report_json {
        let tau = taus.iter().copied().fold(f64::INFINITY, f64::min);
        let cfg = SchemeConfig { tau, ..base };
        let (traj, err) = match simulate(&built.spec, &cfg, t0, t_end, &built.initial) {
            Ok(t) => (t, None),
            Err(e) => (*e.trajectory, Some(describe_failure(&e.error))),
        };
        let mut d = diagnostics(&cfg, &traj);
        d.observed_orders = orders;
        write_file(&c.out_dir, name, &to_json(&report(&s, &cfg, &traj, err.or(failure.clone()), d)))?;
    }
    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Integration(msg)),
    }
}

fn converge_quantum(
    c: &Common,
    s: &Scenario,
    built: &BuiltModel,
    base: &SchemeConfig,
    taus: &[f64],
) -> Result<(), CliError> {
    let p = built.quantum.as_ref().expect("quantum parameters");
    if s.time.t0 != 0.0 {
        return Err(CliError::Usage("the quantum comparison starts at t0 = 0".into()));
    }
    let t_end = s.time.t_end;
    let tables: Vec<Result<Table1, DiagnosticsError>> = thread::scope(|scope| {
        let handles: Vec<_> = taus
            .iter()
            .map(|&tau| scope.spawn(move || table1_from(p, &built.initial, tau, t_end, &TABLE1_SCHEMES)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("table worker panicked")).collect()
    });
    let tables: Vec<Table1> = tables
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Integration(e.to_string()))?;

    println!(
        "{:<28} {:>10} {:>14} {:>14} {:>14} {:>14}",
        "scheme", "tau", "balance_err", "energy_err", "prob_viol", "neg_entropy"
    );
    for t in &tables {
        for r in &t.rows {
            println!(
                "{:<28} {:>10.4e} {:>14.4e} {:>14.4e} {:>14.4e} {:>14.4e}{}",
                r.scheme.name(),
                t.tau,
                r.energy_balance_error,
                r.energy_error_vs_reference,
                r.max_probability_violation,
                r.max_negative_entropy_increment,
                r.failure.as_ref().map_or(String::new(), |f| format!("  ({f})"))
            );
        }
        println!(
            "tau {:.4e}: ordering {}, beta formula {:.4}, fitted {}",
            t.tau,
            if t.ordering_holds() { "holds" } else { "violated" },
            t.beta_formula,
            t.beta_fitted.map_or("n/a".into(), |b| format!("{b:.4}"))
        );
    }

    let out = s.outputs();
    let name = out.order_csv.clone().unwrap_or_else(|| "orders.csv".into());
    write_file(&c.out_dir, &output::per_scheme_name(&name, "table1"), &output::table1_csv(&tables))?;

    if let Some(name) = &out.report_json {
        let mut sorted: Vec<&Table1> = tables.iter().collect();
        sorted.sort_by(|a, b| b.tau.total_cmp(&a.tau));
        let halving = sorted.windows(2).all(|w| ((w[0].tau / w[1].tau) - 2.0).abs() < 1e-9);
        let mut orders = std::collections::BTreeMap::new();
        if halving {
            for scheme in TABLE1_SCHEMES {
                let errs: Vec<f64> = sorted
                    .iter()
                    .filter_map(|t| t.row(scheme).map(|r| r.energy_error_vs_reference))
                    .collect();
                let pairs: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
                if !pairs.is_empty() && pairs.iter().all(|v| v.is_finite()) {
                    orders.insert(scheme.name().to_string(), pairs.iter().sum::<f64>() / pairs.len() as f64);
                }
            }
        }
        let finest = sorted.last().expect("at least three tables");
        let cfg = SchemeConfig {
            tau: finest.tau,
            ..*base
        };
        let (traj, err) = match simulate(&built.spec, &cfg, 0.0, t_end, &built.initial) {
            Ok(t) => (t, None),
            Err(e) => (*e.trajectory, Some(describe_failure(&e.error))),
        };
        let mut d = diagnostics(&cfg, &traj);
        d.observed_orders = orders;
        d.table1 = Some((*finest).clone());
        write_file(&c.out_dir, name, &to_json(&report(s, &cfg, &traj, err, d)))?;
    }
    Ok(())
}

fn validate(c: &Common, samples: usize) -> Result<(), CliError> {
    let s = Scenario::load(&c.scenario)?;
    let built = match s.build(c.seed) {
        Ok(b) => b,
        Err(ConfigError::Model(e)) => {
            match e.report() {
                Some(r) => println!("model parameters: invalid\n{r}"),
                None => println!("model parameters: invalid: {e}"),
            }
            return Err(CliError::Invalid);
        }
        Err(e) => return Err(e.into()),
    };
    let spec = &built.spec;
    let p = spec.partition;
    println!(
        "{}: n = {} (n1 = {}, n2 = {}, n3 = {}), m = {}",
        s.model.name,
        spec.n(),
        p.n1,
        p.n2,
        p.n3,
        spec.m()
    );
    let structure = validate_structure(&spec.structure);
    println!("structure: {structure}");
    let seed = c.seed.unwrap_or(0);
    let mut ok = structure.is_valid();
    for kind in [DiscreteGradientKind::Gonzalez, DiscreteGradientKind::ItohAbe] {
        let r = check_discrete_gradient_axioms(&*spec.hamiltonian, kind, samples, seed);
        let pass = r.passes(1e-8);
        ok &= pass;
        println!(
            "axioms {kind:?}: {} (energy {:.3e}, consistency {:.3e}, {} samples)",
            if pass { "pass" } else { "FAIL" },
            r.max_energy_violation,
            r.max_consistency_violation,
            r.samples
        );
    }
    if ok {
        println!("valid");
        Ok(())
    } else {
        Err(CliError::Invalid)
    }
}
