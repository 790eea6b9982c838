//! Experiment runner for the open-quantum-dynamics engine.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use qme_core::analysis;
use qme_core::error::Error as CoreError;
use qme_core::expansion::{expanded_u, expansion_term_norms, ExpansionMode, ExpansionPolicy};
use qme_core::lindblad::{
    local_lindblad_generator, standard_local_lindblad_generator, LindbladGenerator,
};
use qme_core::models::{pauli, xxz_bond_term, CouplingChannel};
use qme_core::ode::OdeOptions;
use qme_core::operator::{dense_diagonalize, embed_site_operator, SparseOperator};
use qme_core::redfield::{
    evolve, exact_u, steady_state, steady_state_direct, Generator, RedfieldGenerator,
    SteadyStateConfig, NULLSPACE_DIM_CAP,
};
use qme_core::state::{build_initial_state, DensityMatrix, InitialState, StateVector};
use qme_core::trajectories::{mcwf_run, TrajectoryConfig};

use config::{Experiment, ExperimentConfig};
use output::{fmt_f64, standard_metadata, write_table, Table};

#[derive(Parser)]
#[command(name = "qme", version, about = "Open quantum many-body dynamics experiments")]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed for trajectory runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Output format: csv | json (overrides the config).
    #[arg(long, global = true)]
    format: Option<String>,
    /// Escalate numerical warnings (series divergence) to errors.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the master equation and write observable time series.
    Evolve,
    /// Compute the steady state and write site-resolved observables.
    SteadyState,
    /// Sweep a parameter and tabulate steady-state distances to the exact
    /// Redfield oracle.
    ErrorSweep,
    /// Time-averaged relaxation error vs bath-correlation time, with fitted
    /// power-law slopes per expansion order.
    Scaling,
    /// Monte-Carlo wavefunction unraveling of a Lindblad method.
    Trajectories,
    /// Compare two result files (same shape) and print summary statistics.
    Compare { left: PathBuf, right: PathBuf },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized; --threads ignored");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

enum AppError {
    Config(String),
    Numerical(String),
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(_)
            | CoreError::InvalidLattice(_)
            | CoreError::Unsupported(_)
            | CoreError::WrongBathFamily { .. }
            | CoreError::SiteOutOfRange { .. }
            | CoreError::DimensionCap { .. } => AppError::Config(e.to_string()),
            other => AppError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Numerical(format!("i/o: {e}"))
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    if let Command::Compare { left, right } = &cli.command {
        return compare(left, right);
    }
    let cfg_path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(cfg_path)
        .map_err(|e| AppError::Config(format!("{}: {e}", cfg_path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(AppError::Config)?;
    if let Some(f) = &cli.format {
        cfg.output.format = f.clone();
    }
    let seed = cli.seed.unwrap_or(0);

    match cli.command {
        Command::Evolve => cmd_evolve(cli, &cfg, &text),
        Command::SteadyState => cmd_steady_state(cli, &cfg, &text),
        Command::ErrorSweep => cmd_error_sweep(cli, &cfg, &text),
        Command::Scaling => cmd_scaling(cli, &cfg, &text),
        Command::Trajectories => cmd_trajectories(cli, &cfg, &text, seed),
        Command::Compare { .. } => unreachable!(),
    }
}

/// Either master-equation generator, depending on the method.
enum AnyGenerator {
    Redfield(RedfieldGenerator),
    Lindblad(LindbladGenerator),
}

impl Generator for AnyGenerator {
    fn dim(&self) -> usize {
        match self {
            AnyGenerator::Redfield(g) => g.dim(),
            AnyGenerator::Lindblad(g) => g.dim(),
        }
    }

    fn apply(&self, rho: &nalgebra::DMatrix<Complex64>) -> nalgebra::DMatrix<Complex64> {
        match self {
            AnyGenerator::Redfield(g) => g.apply(rho),
            AnyGenerator::Lindblad(g) => g.apply(rho),
        }
    }
}

fn redfield_pairs(
    exp: &Experiment,
    policy: Option<&ExpansionPolicy>,
) -> Result<Vec<(SparseOperator, SparseOperator)>, CoreError> {
    exp.channels
        .iter()
        .map(|ch| {
            let u = match policy {
                None => exact_u(&exp.hamiltonian, &ch.u_source, &ch.bath, ch.channel)?,
                Some(p) => expanded_u(&exp.hamiltonian, ch, p)?,
            };
            Ok((u, ch.v.clone()))
        })
        .collect()
}

fn build_generator(cfg: &ExperimentConfig, exp: &Experiment, strict: bool) -> Result<AnyGenerator, AppError> {
    let policy = cfg.expansion_policy();
    if strict && matches!(policy.mode, ExpansionMode::Local) {
        for ch in &exp.channels {
            let norms = expansion_term_norms(&exp.hamiltonian, ch, policy.order)?;
            if norms.windows(2).skip(1).any(|w| w[1] > w[0] && w[1] > 1e-14) {
                return Err(AppError::Numerical(format!(
                    "expansion terms grow ({norms:?}); refusing under --strict"
                )));
            }
        }
    }
    let gen = match cfg.method.kind.as_str() {
        "exact-redfield" => AnyGenerator::Redfield(RedfieldGenerator::new(
            exp.hamiltonian.clone(),
            redfield_pairs(exp, None)?,
        )?),
        "adhoc-redfield" | "local-redfield" => AnyGenerator::Redfield(RedfieldGenerator::new(
            exp.hamiltonian.clone(),
            redfield_pairs(exp, Some(&policy))?,
        )?),
        "local-lindblad" | "adhoc-lindblad" => AnyGenerator::Lindblad(local_lindblad_generator(
            &exp.hamiltonian,
            &exp.channels,
            &policy,
        )?),
        "standard-local-lindblad" => {
            let spec = exp
                .xxz
                .as_ref()
                .ok_or_else(|| AppError::Config("standard-local-lindblad needs the xxz model".into()))?;
            let find = |site: usize| -> Result<&CouplingChannel, AppError> {
                exp.channels
                    .iter()
                    .find(|c| c.site == site)
                    .ok_or_else(|| AppError::Config(format!("no bath on boundary site {site}")))
            };
            let left = find(0)?;
            let right = find(spec.l - 1)?;
            AnyGenerator::Lindblad(standard_local_lindblad_generator(
                &exp.hamiltonian,
                spec,
                &exp.lattice,
                &left.bath,
                &right.bath,
            )?)
        }
        other => return Err(AppError::Config(format!("unknown method {other}"))),
    };
    Ok(gen)
}

fn initial_density(cfg: &ExperimentConfig, exp: &Experiment) -> Result<DensityMatrix, AppError> {
    match cfg.run.initial_state.as_str() {
        "maximally-mixed" => Ok(DensityMatrix::maximally_mixed(exp.lattice.total_dim())),
        other => Ok(initial_vector_named(other, exp)?.projector()),
    }
}

fn initial_vector_named(name: &str, exp: &Experiment) -> Result<StateVector, AppError> {
    let kind = match name {
        "all-up" => InitialState::AllUp,
        "x-polarized" => InitialState::XPolarized,
        other => {
            if let Some(rest) = other.strip_prefix("fock:") {
                let occ: Result<Vec<usize>, _> = rest.split('-').map(|s| s.parse()).collect();
                InitialState::Fock(occ.map_err(|e| AppError::Config(format!("fock occupations: {e}")))?)
            } else {
                return Err(AppError::Config(format!(
                    "run.initial_state: unknown state `{other}`"
                )));
            }
        }
    };
    Ok(build_initial_state(&exp.lattice, &kind)?)
}

fn t_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = cfg.run.n_points;
    (0..n)
        .map(|k| cfg.run.t_max * k as f64 / (n - 1) as f64)
        .collect()
}

struct ObservableSet {
    names: Vec<String>,
    ops: Vec<SparseOperator>,
    purity: bool,
    populations: bool,
}

fn observable_set(cfg: &ExperimentConfig, exp: &Experiment) -> Result<ObservableSet, AppError> {
    let mut set = ObservableSet {
        names: vec![],
        ops: vec![],
        purity: false,
        populations: false,
    };
    let l = exp.lattice.num_sites();
    for obs in &cfg.run.observables {
        match obs.as_str() {
            "sz" => {
                for site in 0..l {
                    let op = if exp.xxz.is_some() {
                        embed_site_operator(&exp.lattice, site, &pauli::sz())?
                    } else {
                        let d = exp.lattice.local_dim(site);
                        embed_site_operator(&exp.lattice, site, &qme_core::models::boson::number(d))?
                    };
                    set.names.push(if exp.xxz.is_some() {
                        format!("sz_{site}")
                    } else {
                        format!("n_{site}")
                    });
                    set.ops.push(op);
                }
            }
            "purity" => set.purity = true,
            "populations" => set.populations = true,
            other => return Err(AppError::Config(format!("unknown observable `{other}`"))),
        }
    }
    Ok(set)
}

fn cmd_evolve(cli: &Cli, cfg: &ExperimentConfig, text: &str) -> Result<(), AppError> {
    let exp = cfg.build()?;
    let gen = build_generator(cfg, &exp, cli.strict)?;
    let rho0 = initial_density(cfg, &exp)?;
    let grid = t_grid(cfg);
    let snaps = evolve(&gen, &rho0, &grid[1..], OdeOptions::default())?;
    let obs = observable_set(cfg, &exp)?;

    let mut columns = vec!["time".to_string()];
    columns.extend(obs.names.iter().cloned());
    if obs.purity {
        columns.push("purity".into());
    }
    let eig = if obs.populations {
        let e = dense_diagonalize(&exp.hamiltonian)?;
        for k in 0..exp.lattice.total_dim() {
            columns.push(format!("p_{k}"));
        }
        Some(e)
    } else {
        None
    };
    let mut table = Table::new(columns);
    standard_metadata(&mut table, text, None);
    let all: Vec<(f64, &DensityMatrix)> = std::iter::once((grid[0], &rho0))
        .chain(grid[1..].iter().copied().zip(snaps.iter()))
        .collect();
    for (t, rho) in all {
        let mut row = vec![fmt_f64(t)];
        for op in &obs.ops {
            row.push(fmt_f64(rho.expectation(op).re));
        }
        if obs.purity {
            row.push(fmt_f64(rho.purity()));
        }
        if let Some(e) = &eig {
            let rot = e.vectors.adjoint() * &rho.matrix * &e.vectors;
            for k in 0..rho.dim() {
                row.push(fmt_f64(rot[(k, k)].re));
            }
        }
        table.push_row(row);
    }
    let path = write_table(&table, &cli.out, &cfg.output.stem, &cfg.output.format)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn compute_steady_state(gen: &AnyGenerator, cfg: &ExperimentConfig) -> Result<DensityMatrix, AppError> {
    if gen.dim() <= NULLSPACE_DIM_CAP {
        Ok(steady_state_direct(gen)?)
    } else {
        let ss_cfg = SteadyStateConfig {
            residual_tol: cfg.run.ss_residual_tol,
            ..Default::default()
        };
        Ok(steady_state(gen, ss_cfg)?)
    }
}

fn bond_currents(exp: &Experiment, rho: &DensityMatrix) -> Result<Vec<f64>, AppError> {
    let Some(spec) = &exp.xxz else {
        return Ok(vec![]);
    };
    let mut out = Vec::new();
    for bond in 0..spec.l - 1 {
        let term = xxz_bond_term(spec, &exp.lattice, bond)?;
        out.push(analysis::magnetization_current(rho, &term, bond)?);
    }
    Ok(out)
}

fn cmd_steady_state(cli: &Cli, cfg: &ExperimentConfig, text: &str) -> Result<(), AppError> {
    let exp = cfg.build()?;
    let gen = build_generator(cfg, &exp, cli.strict)?;
    let ss = compute_steady_state(&gen, cfg)?;
    let obs = observable_set(cfg, &exp)?;
    let currents = bond_currents(&exp, &ss)?;

    let mut table = Table::new(vec![
        "site".into(),
        "observable".into(),
        "value".into(),
    ]);
    standard_metadata(&mut table, text, None);
    // Distance to the global Gibbs state when all baths share one T.
    let temps: Vec<f64> = cfg.baths.iter().map(|b| b.temperature).collect();
    if !temps.is_empty() && temps.iter().all(|&t| (t - temps[0]).abs() < 1e-12) {
        let gibbs = analysis::gibbs_state(&exp.hamiltonian, temps[0])?;
        table.meta("trace_distance_to_gibbs", fmt_f64(analysis::trace_norm_distance(&ss, &gibbs)?));
    }
    table.meta("min_eigenvalue", fmt_f64(ss.min_eigenvalue()));
    for (name, op) in obs.names.iter().zip(&obs.ops) {
        let site = name.rsplit('_').next().unwrap_or("0");
        table.push_row(vec![site.into(), name.clone(), fmt_f64(ss.expectation(op).re)]);
    }
    for (bond, j) in currents.iter().enumerate() {
        table.push_row(vec![bond.to_string(), format!("current_{bond}"), fmt_f64(*j)]);
    }
    let path = write_table(&table, &cli.out, &cfg.output.stem, &cfg.output.format)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_error_sweep(cli: &Cli, cfg: &ExperimentConfig, text: &str) -> Result<(), AppError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| AppError::Config("error-sweep requires a [sweep] section".into()))?;
    let methods = if sweep.methods.is_empty() {
        vec![cfg.method.kind.clone()]
    } else {
        sweep.methods.clone()
    };
    let orders = if sweep.orders.is_empty() {
        vec![cfg.method.order]
    } else {
        sweep.orders.clone()
    };
    let mut table = Table::new(vec![
        "parameter".into(),
        "value".into(),
        "method".into(),
        "order".into(),
        "distance".into(),
    ]);
    standard_metadata(&mut table, text, None);

    let points: Vec<f64> = match sweep.parameter.as_str() {
        "temperature" | "eps0" => sweep.values.clone(),
        "order" => vec![f64::NAN],
        other => return Err(AppError::Config(format!("unsupported sweep parameter {other}"))),
    };
    for &value in &points {
        let point_cfg = match sweep.parameter.as_str() {
            "temperature" => cfg.with_temperature(value),
            "eps0" => {
                let mut c = cfg.clone();
                c.method.eps0 = value;
                c
            }
            _ => cfg.clone(),
        };
        let exp = point_cfg.build()?;
        let exact = RedfieldGenerator::new(exp.hamiltonian.clone(), redfield_pairs(&exp, None)?)?;
        let ss_exact = compute_steady_state(&AnyGenerator::Redfield(exact), &point_cfg)?;
        for method in &methods {
            for &order in &orders {
                let mut mc = point_cfg.clone();
                mc.method.kind = method.clone();
                mc.method.order = order;
                let gen = build_generator(&mc, &exp, cli.strict)?;
                let ss = compute_steady_state(&gen, &mc)?;
                let d = analysis::trace_norm_distance(&ss, &ss_exact)?;
                table.push_row(vec![
                    sweep.parameter.clone(),
                    fmt_f64(value),
                    method.clone(),
                    order.to_string(),
                    fmt_f64(d),
                ]);
            }
        }
    }
    let path = write_table(&table, &cli.out, &cfg.output.stem, &cfg.output.format)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_scaling(cli: &Cli, cfg: &ExperimentConfig, text: &str) -> Result<(), AppError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| AppError::Config("scaling requires a [sweep] section".into()))?;
    if sweep.parameter != "temperature" {
        return Err(AppError::Config("scaling sweeps over `temperature`".into()));
    }
    if sweep.values.len() < 4 {
        return Err(AppError::Config(
            "scaling fit refused: need at least 4 temperature points".into(),
        ));
    }
    let orders = if sweep.orders.is_empty() {
        vec![cfg.method.order]
    } else {
        sweep.orders.clone()
    };
    let j = match &cfg.model {
        config::ModelSection::Xxz { j, .. } => *j,
        config::ModelSection::BoseHubbard { j, .. } => *j,
    };
    let gamma = cfg
        .baths
        .first()
        .map(|b| b.gamma)
        .ok_or_else(|| AppError::Config("scaling needs at least one bath".into()))?;
    let tau_r = cfg.run.tau_r.unwrap_or(1.0 / gamma);
    let grid = analysis::uniform_grid(tau_r, 200);

    let mut table = Table::new(vec![
        "kind".into(),
        "order".into(),
        "temperature".into(),
        "ratio".into(),
        "value".into(),
    ]);
    standard_metadata(&mut table, text, None);
    for &order in &orders {
        let mut pts = Vec::new();
        for &t in &sweep.values {
            let point_cfg = cfg.with_temperature(t);
            let exp = point_cfg.build()?;
            let exact = RedfieldGenerator::new(exp.hamiltonian.clone(), redfield_pairs(&exp, None)?)?;
            let policy = ExpansionPolicy {
                order,
                ..point_cfg.expansion_policy()
            };
            let local =
                RedfieldGenerator::new(exp.hamiltonian.clone(), redfield_pairs(&exp, Some(&policy))?)?;
            let rho0 = initial_density(&point_cfg, &exp)?;
            let opts = OdeOptions::default();
            let se = evolve(&exact, &rho0, &grid[1..], opts)?;
            let sl = evolve(&local, &rho0, &grid[1..], opts)?;
            let d = analysis::time_averaged_distance(&se, &sl)?;
            let ratio = j / (2.0 * std::f64::consts::PI * t);
            pts.push((ratio.ln(), d.max(1e-300).ln()));
            table.push_row(vec![
                "point".into(),
                order.to_string(),
                fmt_f64(t),
                fmt_f64(ratio),
                fmt_f64(d),
            ]);
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        table.push_row(vec![
            "fit".into(),
            order.to_string(),
            String::new(),
            String::new(),
            fmt_f64(slope),
        ]);
    }
    let path = write_table(&table, &cli.out, &cfg.output.stem, &cfg.output.format)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_trajectories(cli: &Cli, cfg: &ExperimentConfig, text: &str, seed: u64) -> Result<(), AppError> {
    let exp = cfg.build()?;
    let gen = match build_generator(cfg, &exp, cli.strict)? {
        AnyGenerator::Lindblad(g) => g,
        AnyGenerator::Redfield(_) => {
            return Err(AppError::Config(
                "trajectories require a Lindblad method (local-lindblad, adhoc-lindblad, standard-local-lindblad)".into(),
            ))
        }
    };
    let psi0 = initial_vector_named(&cfg.run.initial_state, &exp)?;
    let grid = t_grid(cfg);
    let obs = observable_set(cfg, &exp)?;
    let mut tcfg = TrajectoryConfig::new(cfg.run.n_traj, seed, grid[1..].to_vec());
    tcfg.jump_tol = cfg.run.jump_tol;
    tcfg.record_jumps = cfg.run.record_jumps;
    let res = mcwf_run(&gen, &psi0, &tcfg, &obs.ops)?;

    let mut columns = vec!["time".to_string()];
    for name in &obs.names {
        columns.push(format!("mean_{name}"));
        columns.push(format!("stderr_{name}"));
    }
    let mut table = Table::new(columns);
    standard_metadata(&mut table, text, Some(seed));
    table.meta("n_traj", cfg.run.n_traj);
    for (k, &t) in res.t_grid.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        for o in 0..obs.ops.len() {
            row.push(fmt_f64(res.means[o][k]));
            row.push(fmt_f64(res.stderrs[o][k]));
        }
        table.push_row(row);
    }
    let path = write_table(&table, &cli.out, &cfg.output.stem, &cfg.output.format)?;
    println!("wrote {}", path.display());

    if cfg.run.record_jumps {
        let mut jt = Table::new(vec!["trajectory".into(), "time".into(), "channel".into()]);
        standard_metadata(&mut jt, text, Some(seed));
        for j in &res.jump_log {
            jt.push_row(vec![j.trajectory.to_string(), fmt_f64(j.time), j.channel.to_string()]);
        }
        let stem = format!("{}_jumps", cfg.output.stem);
        let jpath = write_table(&jt, &cli.out, &stem, &cfg.output.format)?;
        println!("wrote {}", jpath.display());
    }
    Ok(())
}

fn compare(left: &PathBuf, right: &PathBuf) -> Result<(), AppError> {
    let (ca, ra) = output::read_csv(left)?;
    let (cb, rb) = output::read_csv(right)?;
    if ca != cb {
        return Err(AppError::Config("column sets differ".into()));
    }
    if ra.len() != rb.len() {
        return Err(AppError::Config(format!(
            "row counts differ: {} vs {}",
            ra.len(),
            rb.len()
        )));
    }
    println!("column,max_abs_diff,rms_diff");
    for (i, name) in ca.iter().enumerate() {
        let mut maxd = 0.0_f64;
        let mut acc = 0.0_f64;
        for (x, y) in ra.iter().zip(&rb) {
            let d = (x[i] - y[i]).abs();
            maxd = maxd.max(d);
            acc += d * d;
        }
        let rms = (acc / ra.len().max(1) as f64).sqrt();
        println!("{name},{},{}", fmt_f64(maxd), fmt_f64(rms));
    }
    Ok(())
}
