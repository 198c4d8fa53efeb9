//! Command-line front end. Each subcommand reads one TOML config, runs the
//! matching study and writes CSV data plus a `summary.json` into `--out`.
//!
//! Exit status: 0 when the study passes, 1 when it fails (including guard
//! failures), 2 on configuration errors.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{parse_config, ConfigFile, ParsedConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    compare_single, ehrenfest_study, envelope_momenta, interaction_study, superposition_study, sweep_epsilon,
    sweep_superposition, uniform_times,
};
use crate::flow::integrate_flow;
use crate::grid::Grid;
use crate::nls::NlsPropagator;
use crate::packet::build_initial;

/// Relative energy drift accepted by the `trajectory` subcommand.
const TRAJECTORY_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ehrenfest-lab", version, about = "Semiclassical wave-packet experiments for cubic-type NLS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical trajectories of every configured packet
    Trajectory(CommonArgs),
    /// Full-equation propagation of the configured initial data
    Propagate(CommonArgs),
    /// Error of the single-packet approximation over time
    Compare(CommonArgs),
    /// ε-sweep of the single-packet error with a log–log slope fit
    Sweep(CommonArgs),
    /// Ehrenfest-time study across ε
    Ehrenfest(CommonArgs),
    /// Two-packet superposition error (one ε, or a sweep)
    Superpose(CommonArgs),
    /// Interaction-term magnitude across ε
    Interaction(CommonArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, env = "EHRENFEST_LAB_THREADS")]
    pub threads: Option<usize>,
    /// Force the (dt/2, 2N) refinement rerun of the smallest ε
    #[arg(long)]
    pub self_check: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Trajectory,
    Propagate,
    Compare,
    Sweep,
    Ehrenfest,
    Superpose,
    Interaction,
}

impl Command {
    fn split(&self) -> (CommandName, &CommonArgs) {
        match self {
            Command::Trajectory(a) => (CommandName::Trajectory, a),
            Command::Propagate(a) => (CommandName::Propagate, a),
            Command::Compare(a) => (CommandName::Compare, a),
            Command::Sweep(a) => (CommandName::Sweep, a),
            Command::Ehrenfest(a) => (CommandName::Ehrenfest, a),
            Command::Superpose(a) => (CommandName::Superpose, a),
            Command::Interaction(a) => (CommandName::Interaction, a),
        }
    }
}

/// One invocation, echoed into `manifest.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: CommandName,
    pub config: PathBuf,
    pub out: PathBuf,
    /// Outputs depend only on the config; there is no randomness.
    pub deterministic: bool,
    pub self_check: bool,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: CommandName, config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunManifest {
            command,
            config: config.into(),
            out: out.into(),
            deterministic: true,
            self_check: false,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Serialize)]
struct Summary<'a, R: Serialize> {
    command: CommandName,
    passed: bool,
    config: &'a ConfigFile,
    report: &'a R,
}

/// Exit status of a finished run.
pub fn exit_code(outcome: &Result<bool>) -> i32 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Error::Diverged { .. } | Error::BoundaryMass { .. }) => 1,
        Err(_) => 2,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_summary<R: Serialize>(dir: &Path, command: CommandName, passed: bool, cfg: &ParsedConfig, report: &R) -> Result<()> {
    let summary = Summary { command, passed, config: &cfg.file, report };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::config(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

fn sweep_epsilons(cfg: &ParsedConfig) -> Result<Vec<f64>> {
    cfg.experiment
        .epsilons
        .clone()
        .ok_or_else(|| Error::config("`experiment.epsilons` is required for this command (≥3 required)"))
}

fn second_packet(cfg: &ParsedConfig) -> Result<&crate::packet::PacketSpec> {
    cfg.packets.get(1).ok_or_else(|| Error::config("this command needs a `[packet.2]` section"))
}

/// Runs one manifest; `Ok(passed)` or the first error.
pub fn run(manifest: &RunManifest) -> Result<bool> {
    let text = fs::read_to_string(&manifest.config)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", manifest.config.display())))?;
    let cfg = parse_config(&text)?;
    let out = &manifest.out;
    fs::create_dir_all(out)?;
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| Error::config(e.to_string()))?;
    text.push('\n');
    fs::write(out.join("manifest.json"), text)?;

    let sim = &cfg.sim;
    let p = &cfg.potential;
    let x = &cfg.experiment;
    let times = uniform_times(sim.horizon, x.samples);
    let sweep_check = manifest.self_check || x.self_check.unwrap_or(true);
    let command = manifest.command;

    match command {
        CommandName::Trajectory => {
            #[derive(Serialize)]
            struct Row {
                energy0: f64,
                max_energy_drift: f64,
                growth_prefactor: f64,
                growth_rate: f64,
            }
            let mut rows = Vec::new();
            for (i, spec) in cfg.packets.iter().enumerate() {
                let tr = integrate_flow(p, &spec.x0, &spec.xi0, sim.horizon, sim.flow_dt())?;
                tr.write_csv(create(out, &format!("trajectory_{}.csv", i + 1))?)?;
                let g = tr.growth_envelope();
                rows.push(Row {
                    energy0: tr.energy0(),
                    max_energy_drift: tr.max_energy_drift(),
                    growth_prefactor: g.prefactor,
                    growth_rate: g.rate,
                });
            }
            let passed =
                rows.iter().all(|r| r.max_energy_drift <= TRAJECTORY_DRIFT_LIMIT * r.energy0.abs().max(1.0));
            write_summary(out, command, passed, &cfg, &rows)?;
            Ok(passed)
        }
        CommandName::Propagate => {
            #[derive(Serialize)]
            struct Report {
                grid_points: Vec<usize>,
                mass0: f64,
                max_mass_drift: f64,
            }
            let mut trajs = Vec::new();
            for spec in &cfg.packets {
                trajs.push(integrate_flow(p, &spec.x0, &spec.xi0, sim.horizon, sim.flow_dt())?);
            }
            let mut extent = vec![(f64::INFINITY, f64::NEG_INFINITY); sim.dim];
            let mut momentum: f64 = 0.0;
            for tr in &trajs {
                for (e, (lo, hi)) in extent.iter_mut().zip(tr.position_extent(sim.horizon)) {
                    *e = (e.0.min(lo), e.1.max(hi));
                }
                momentum = momentum.max(tr.max_momentum(sim.horizon));
            }
            let mut radius: f64 = 0.0;
            for spec in &cfg.packets {
                radius = radius.max(spec.envelope_radius(sim)?);
            }
            let grid = Grid::for_packet(&extent, momentum, sim.epsilon, radius, &sim.grid)?;
            let mut psi = build_initial(&cfg.packets[0], sim, &grid)?;
            for spec in &cfg.packets[1..] {
                psi = psi.add(&build_initial(spec, sim, &grid)?)?;
            }
            psi.check_boundary(0.0)?;
            let mass0 = psi.mass();
            let mut prop = NlsPropagator::new(sim, p, psi)?;
            let mut w = create(out, "mass.csv")?;
            use std::io::Write;
            writeln!(w, "t,mass")?;
            let mut drift: f64 = 0.0;
            for &t in &times {
                prop.advance_to(t)?;
                let m = prop.field().mass();
                drift = drift.max((m - mass0).abs() / mass0.max(f64::MIN_POSITIVE));
                writeln!(w, "{t:.12e},{m:.16e}")?;
            }
            w.flush()?;
            prop.field().write_binary(create(out, "psi_final.bin")?)?;
            if sim.dim == 1 {
                prop.field().write_csv(create(out, "psi_final.csv")?)?;
            }
            let report = Report {
                grid_points: grid.axes().iter().map(|a| a.points).collect(),
                mass0,
                max_mass_drift: drift,
            };
            write_summary(out, command, true, &cfg, &report)?;
            Ok(true)
        }
        CommandName::Compare => {
            let spec = &cfg.packets[0];
            let report = compare_single(sim, p, spec, &times)?;
            report.write_csv(create(out, "error_vs_time.csv")?)?;
            envelope_momenta(sim, p, spec, &times, 2)?.write_csv(create(out, "momenta.csv")?)?;
            let passed = x.tolerance.is_none_or(|tol| report.sup_l2() <= tol);
            write_summary(out, command, passed, &cfg, &report)?;
            Ok(passed)
        }
        CommandName::Sweep => {
            let eps = sweep_epsilons(&cfg)?;
            let report = sweep_epsilon(sim, p, &cfg.packets[0], &eps, &times, sweep_check)?;
            report.write_csv(create(out, "error_vs_epsilon.csv")?)?;
            report.write_time_series(create(out, "error_vs_time.csv")?)?;
            write_summary(out, command, report.passed, &cfg, &report)?;
            Ok(report.passed)
        }
        CommandName::Ehrenfest => {
            let eps = sweep_epsilons(&cfg)?;
            let t_max = x.t_max.unwrap_or(sim.horizon);
            let check = manifest.self_check || x.self_check.unwrap_or(false);
            let report = ehrenfest_study(sim, p, &cfg.packets[0], x.delta, &eps, t_max, x.sample_step, check)?;
            report.write_csv(create(out, "ehrenfest.csv")?)?;
            report.write_time_series(create(out, "error_vs_time.csv")?)?;
            write_summary(out, command, report.passed, &cfg, &report)?;
            Ok(report.passed)
        }
        CommandName::Superpose => {
            let spec2 = second_packet(&cfg)?;
            match &x.epsilons {
                Some(eps) => {
                    let report = sweep_superposition(sim, p, &cfg.packets[0], spec2, eps, &times, sweep_check)?;
                    report.write_csv(create(out, "error_vs_epsilon.csv")?)?;
                    report.write_time_series(create(out, "error_vs_time.csv")?)?;
                    write_summary(out, command, report.passed, &cfg, &report)?;
                    Ok(report.passed)
                }
                None => {
                    let report = superposition_study(sim, p, &cfg.packets[0], spec2, &times)?;
                    report.write_csv(create(out, "error_vs_time.csv")?)?;
                    for w in &report.warnings {
                        eprintln!("warning: {w}");
                    }
                    write_summary(out, command, true, &cfg, &report)?;
                    Ok(true)
                }
            }
        }
        CommandName::Interaction => {
            let eps = sweep_epsilons(&cfg)?;
            let report = interaction_study(sim, p, &cfg.packets[0], second_packet(&cfg)?, &eps, x.gamma)?;
            report.write_csv(create(out, "interaction.csv")?)?;
            report.write_time_series(create(out, "interaction_vs_time.csv")?)?;
            write_summary(out, command, report.passed, &cfg, &report)?;
            Ok(report.passed)
        }
    }
}

/// Parses `args`, runs, prints diagnostics and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (name, common) = cli.command.split();
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return 2;
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut manifest = RunManifest::new(name, &common.config, &common.out);
    manifest.self_check = common.self_check;
    let outcome = run(&manifest);
    match &outcome {
        Ok(true) => {}
        Ok(false) => eprintln!("{name:?}: experiment failed; see {}", common.out.join("summary.json").display()),
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(true)), 0);
        assert_eq!(exit_code(&Ok(false)), 1);
        assert_eq!(exit_code(&Err(Error::BoundaryMass { t: 1.0, fraction: 1.0 })), 1);
        assert_eq!(exit_code(&Err(Error::Parse { line: 3, message: String::new() })), 2);
        assert_eq!(exit_code(&Err(Error::config("x"))), 2);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with(["ehrenfest-lab", "bogus"]), 2);
        assert_eq!(main_with(["ehrenfest-lab", "sweep"]), 2);
    }
}
