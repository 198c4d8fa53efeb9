//! Error studies comparing the full solver against wave-packet approximants:
//! single-packet error series, ε-sweeps with log–log slope fits, Ehrenfest
//! time detection, two-packet superposition and the interaction term.
//!
//! Every study is deterministic. Sweep members run in parallel on the
//! current rayon pool and are reduced in input order.

use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::{
    momenta_monitor, propagate_envelope_linear, propagate_envelope_nonlinear, EnvelopePropagator, EnvelopeRun,
    MomentaSeries,
};
use crate::error::{Error, Result};
use crate::fit::{least_squares, log_log, LineFit};
use crate::flow::{crossing_set, integrate_flow, CrossingSet, Trajectory};
use crate::grid::{Grid, WaveField};
use crate::nls::{check_sample_times, NlsPropagator, SimConfig};
use crate::packet::{build_initial, reconstruct_from, same_phase_point, PacketSpec};
use crate::potential::PotentialSpec;

/// Largest relative change of the smallest-ε result under `(dt/2, 2N)`.
pub const SELF_CHECK_TOLERANCE: f64 = 0.05;
/// Half-width of the accepted slope window around the expected rate.
pub const SLOPE_TOLERANCE: f64 = 0.1;
/// Largest accepted log–log fit residual.
pub const RESIDUAL_LIMIT: f64 = 0.15;
/// Lower slope bound for two-packet sweeps.
pub const SUPERPOSITION_MIN_SLOPE: f64 = 0.33;
/// Largest accepted relative residual of the `T*` against `log(1/ε)` fit.
pub const EHRENFEST_RESIDUAL_LIMIT: f64 = 0.25;

/// `n + 1` equally spaced times on `[0, horizon]`.
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Guard diagnostics gathered during one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Validity {
    /// `max_t |‖ψ(t)‖² - ‖ψ(0)‖²| / ‖ψ(0)‖²`.
    pub mass_drift: f64,
    /// Largest relative energy drift over the trajectories used.
    pub energy_drift: f64,
    /// Largest boundary-mass fraction seen on the physical grid.
    pub boundary_fraction: f64,
}

/// Which envelope equation produced the approximant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeModel {
    Linear,
    Nonlinear,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub config: SimConfig,
    pub potential: PotentialSpec,
    pub packets: Vec<PacketSpec>,
    pub model: EnvelopeModel,
    pub grid_points: Vec<usize>,
    pub grid_bounds: Vec<(f64, f64)>,
    pub envelope_dt: f64,
}

/// Error of the wave-packet approximant at the sample times.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub err_l2: Vec<f64>,
    pub err_sigma_eps: Vec<f64>,
    /// Gauge-operator norm; single-packet runs only.
    pub err_h: Option<Vec<f64>>,
    pub meta: RunMeta,
    pub validity: Validity,
    pub warnings: Vec<String>,
}

impl ErrorReport {
    pub fn sup_l2(&self) -> f64 {
        self.err_l2.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_sigma_eps(&self) -> f64 {
        self.err_sigma_eps.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup(&self, norm: ErrorNorm) -> f64 {
        match norm {
            ErrorNorm::L2 => self.sup_l2(),
            ErrorNorm::SigmaEps => self.sup_sigma_eps(),
        }
    }

    /// Header `t,err_l2,err_sigma_eps,err_h`, or `t,err_l2,err_sigma_eps`
    /// for two-packet runs.
    pub fn csv_header(&self) -> &'static str {
        if self.err_h.is_some() {
            "t,err_l2,err_sigma_eps,err_h"
        } else {
            "t,err_l2,err_sigma_eps"
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        self.write_rows(&mut w, None)
    }

    fn write_rows<W: Write>(&self, w: &mut W, prefix: Option<f64>) -> Result<()> {
        for (i, t) in self.times.iter().enumerate() {
            if let Some(eps) = prefix {
                write!(w, "{eps:.6e},")?;
            }
            write!(w, "{t:.12e},{:.12e},{:.12e}", self.err_l2[i], self.err_sigma_eps[i])?;
            if let Some(h) = &self.err_h {
                write!(w, ",{:.12e}", h[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    L2,
    SigmaEps,
}

/// Smallest-ε rerun at half the step and twice the points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelfCheck {
    pub baseline: f64,
    pub refined: f64,
    pub relative_change: f64,
    pub passed: bool,
}

impl SelfCheck {
    fn new(baseline: f64, refined: f64) -> Self {
        let relative_change = (refined - baseline).abs() / baseline.abs().max(f64::MIN_POSITIVE);
        SelfCheck { baseline, refined, relative_change, passed: relative_change < SELF_CHECK_TOLERANCE }
    }
}

/// Sup-in-time errors across ε with a log–log slope fit.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub norm: ErrorNorm,
    pub epsilons: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub expected_slope: f64,
    /// Accepted slope interval.
    pub window: (f64, f64),
    pub self_check: Option<SelfCheck>,
    pub passed: bool,
    #[serde(skip)]
    pub runs: Vec<ErrorReport>,
}

impl ConvergenceReport {
    fn assemble(
        norm: ErrorNorm,
        epsilons: &[f64],
        runs: Vec<ErrorReport>,
        expected_slope: f64,
        window: (f64, f64),
        self_check: Option<SelfCheck>,
    ) -> Self {
        let errors: Vec<f64> = runs.iter().map(|r| r.sup(norm)).collect();
        let LineFit { slope, intercept, max_residual } = log_log(epsilons, &errors);
        let passed = slope >= window.0
            && slope <= window.1
            && max_residual < RESIDUAL_LIMIT
            && self_check.is_none_or(|s| s.passed);
        ConvergenceReport {
            norm,
            epsilons: epsilons.to_vec(),
            errors,
            slope,
            intercept,
            max_residual,
            expected_slope,
            window,
            self_check,
            passed,
            runs,
        }
    }

    /// Columns `epsilon,error`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,error")?;
        for (e, err) in self.epsilons.iter().zip(&self.errors) {
            writeln!(w, "{e:.6e},{err:.12e}")?;
        }
        Ok(())
    }

    /// Error-vs-time of every member, prefixed by an `epsilon` column.
    pub fn write_time_series<W: Write>(&self, mut w: W) -> Result<()> {
        let header = self.runs.first().map_or("t,err_l2,err_sigma_eps", |r| r.csv_header());
        writeln!(w, "epsilon,{header}")?;
        for (e, r) in self.epsilons.iter().zip(&self.runs) {
            r.write_rows(&mut w, Some(*e))?;
        }
        Ok(())
    }
}

/// `T*(ε)` per ε with a linear fit against `log(1/ε)`.
#[derive(Clone, Debug, Serialize)]
pub struct EhrenfestReport {
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub t_max: f64,
    pub t_star: Vec<f64>,
    pub censored: Vec<bool>,
    pub all_censored: bool,
    pub strictly_increasing: bool,
    pub slope: f64,
    pub intercept: f64,
    /// Largest deviation from the fit divided by the mean `T*`.
    pub relative_residual: f64,
    pub self_check: Option<SelfCheck>,
    pub passed: bool,
    #[serde(skip)]
    pub series: Vec<(Vec<f64>, Vec<f64>)>,
}

impl EhrenfestReport {
    /// Columns `epsilon,log_inv_epsilon,t_star,censored`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,log_inv_epsilon,t_star,censored")?;
        for i in 0..self.epsilons.len() {
            let e = self.epsilons[i];
            writeln!(w, "{e:.6e},{:.12e},{:.12e},{}", -e.ln(), self.t_star[i], self.censored[i])?;
        }
        Ok(())
    }

    /// Columns `epsilon,t,err_l2` (series stop at the first threshold crossing).
    pub fn write_time_series<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,t,err_l2")?;
        for (e, (ts, errs)) in self.epsilons.iter().zip(&self.series) {
            for (t, err) in ts.iter().zip(errs) {
                writeln!(w, "{e:.6e},{t:.12e},{err:.12e}")?;
            }
        }
        Ok(())
    }
}

/// `(1/ε)‖N_I(t)‖` along two envelope runs.
#[derive(Clone, Debug, Serialize)]
pub struct InteractionSeries {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoidal time integral of `values`.
    pub integral: f64,
    pub crossing: CrossingSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingSummary {
    pub gamma: f64,
    pub intervals: Vec<(f64, f64)>,
    pub measure: f64,
}

impl From<CrossingSet> for CrossingSummary {
    fn from(c: CrossingSet) -> Self {
        CrossingSummary { gamma: c.gamma, intervals: c.intervals, measure: c.total_measure }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InteractionReport {
    pub epsilons: Vec<f64>,
    pub integrals: Vec<f64>,
    pub crossing_measures: Vec<f64>,
    pub monotone_decreasing: bool,
    pub passed: bool,
    #[serde(skip)]
    pub series: Vec<InteractionSeries>,
}

impl InteractionReport {
    /// Columns `epsilon,integral,crossing_measure`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,integral,crossing_measure")?;
        for i in 0..self.epsilons.len() {
            writeln!(w, "{:.6e},{:.12e},{:.12e}", self.epsilons[i], self.integrals[i], self.crossing_measures[i])?;
        }
        Ok(())
    }

    /// Columns `epsilon,t,interaction`.
    pub fn write_time_series<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,t,interaction")?;
        for s in &self.series {
            for (t, v) in s.times.iter().zip(&s.values) {
                writeln!(w, "{:.6e},{t:.12e},{v:.12e}", s.epsilon)?;
            }
        }
        Ok(())
    }
}

fn check_sweep(epsilons: &[f64]) -> Result<()> {
    if epsilons.len() < 3 {
        return Err(Error::config(format!("ε-sweep has {} values; ≥3 required", epsilons.len())));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::config("ε values must be positive"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("ε values must be strictly decreasing"));
    }
    Ok(())
}

fn trajectory_for(cfg: &SimConfig, p: &PotentialSpec, spec: &PacketSpec, horizon: f64) -> Result<Trajectory> {
    spec.validate(cfg.dim)?;
    integrate_flow(p, &spec.x0, &spec.xi0, horizon, cfg.flow_dt())
}

/// Physical grid covering every trajectory up to `horizon`.
fn grid_for(cfg: &SimConfig, trajs: &[&Trajectory], radius: f64, horizon: f64) -> Result<Grid> {
    let mut extent = vec![(f64::INFINITY, f64::NEG_INFINITY); cfg.dim];
    let mut momentum: f64 = 0.0;
    for tr in trajs {
        for (e, (lo, hi)) in extent.iter_mut().zip(tr.position_extent(horizon)) {
            e.0 = e.0.min(lo);
            e.1 = e.1.max(hi);
        }
        momentum = momentum.max(tr.max_momentum(horizon));
    }
    Grid::for_packet(&extent, momentum, cfg.epsilon, radius, &cfg.grid)
}

fn envelope_dt(cfg: &SimConfig) -> f64 {
    cfg.envelope_dt.min(cfg.dt)
}

/// Linear envelope when `λ = 0` or `α > α_c`, nonlinear at `α = α_c`.
fn envelope_model(cfg: &SimConfig) -> EnvelopeModel {
    if cfg.lambda == 0.0 || !cfg.is_critical() {
        EnvelopeModel::Linear
    } else {
        EnvelopeModel::Nonlinear
    }
}

fn run_envelope(cfg: &SimConfig, spec: &PacketSpec, traj: &Trajectory, times: &[f64]) -> Result<EnvelopeRun> {
    let a = spec.envelope_field(cfg)?;
    match envelope_model(cfg) {
        EnvelopeModel::Linear => propagate_envelope_linear(&a, traj, times, envelope_dt(cfg)),
        EnvelopeModel::Nonlinear => {
            propagate_envelope_nonlinear(&a, traj, cfg.envelope_coupling(), cfg.sigma, times, envelope_dt(cfg))
        }
    }
}

fn envelope_propagator<'a>(cfg: &SimConfig, spec: &PacketSpec, traj: &'a Trajectory) -> Result<EnvelopePropagator<'a>> {
    let a = spec.envelope_field(cfg)?;
    let lambda = match envelope_model(cfg) {
        EnvelopeModel::Linear => 0.0,
        EnvelopeModel::Nonlinear => cfg.envelope_coupling(),
    };
    EnvelopePropagator::new(&a, traj, lambda, cfg.sigma, envelope_dt(cfg))
}

fn meta(cfg: &SimConfig, p: &PotentialSpec, packets: Vec<PacketSpec>, grid: &Grid) -> RunMeta {
    RunMeta {
        config: cfg.clone(),
        potential: p.clone(),
        packets,
        model: envelope_model(cfg),
        grid_points: grid.axes().iter().map(|a| a.points).collect(),
        grid_bounds: grid.axes().iter().map(|a| (a.left, a.right())).collect(),
        envelope_dt: envelope_dt(cfg),
    }
}

fn relative_energy_drift(tr: &Trajectory) -> f64 {
    tr.max_energy_drift() / tr.energy0().abs().max(1.0)
}

struct Streamed {
    times: Vec<f64>,
    l2: Vec<f64>,
    sigma: Vec<f64>,
    h: Vec<f64>,
    validity: Validity,
}

/// Streams the full solver and the envelope solvers over `times` and
/// compares against the sum of the reconstructed packets. Stops early once
/// `stop(err_l2)` holds.
fn stream_errors(
    cfg: &SimConfig,
    p: &PotentialSpec,
    grid: &Grid,
    packets: &[(&PacketSpec, &Trajectory)],
    times: &[f64],
    with_h: bool,
    stop: impl Fn(f64) -> bool,
) -> Result<Streamed> {
    let mut psi0 = WaveField::zeros(grid.clone(), cfg.epsilon);
    let mut envelopes = Vec::with_capacity(packets.len());
    for (spec, tr) in packets {
        psi0 = psi0.add(&build_initial(spec, cfg, grid)?)?;
        envelopes.push(envelope_propagator(cfg, spec, tr)?);
    }
    psi0.check_boundary(0.0)?;
    let mass0 = psi0.mass();
    let mut prop = NlsPropagator::new(cfg, p, psi0)?;
    let mut out = Streamed {
        times: Vec::new(),
        l2: Vec::new(),
        sigma: Vec::new(),
        h: Vec::new(),
        validity: Validity {
            energy_drift: packets.iter().map(|(_, tr)| relative_energy_drift(tr)).fold(0.0, f64::max),
            ..Validity::default()
        },
    };
    for &t in times {
        prop.advance_to(t)?;
        let psi = prop.field();
        let mut phi = WaveField::zeros(grid.clone(), cfg.epsilon);
        for ((_, tr), env) in packets.iter().zip(envelopes.iter_mut()) {
            env.advance_to(t)?;
            phi = phi.add(&reconstruct_from(env.field(), tr, cfg, t, grid)?)?;
        }
        let w = psi.sub(&phi)?;
        let v = &mut out.validity;
        if mass0 > 0.0 {
            v.mass_drift = v.mass_drift.max((psi.mass() - mass0).abs() / mass0);
        }
        v.boundary_fraction = v.boundary_fraction.max(psi.boundary_mass_fraction());
        out.times.push(t);
        if with_h {
            let n = w.norm_triple(t, packets[0].1)?;
            out.l2.push(n.l2);
            out.sigma.push(n.sigma_eps);
            out.h.push(n.h_norm);
        } else {
            out.l2.push(w.norm_l2());
            out.sigma.push(w.sigma_eps_norm());
        }
        if stop(*out.l2.last().unwrap()) {
            break;
        }
    }
    Ok(out)
}

/// Envelope momenta `M_0 … M_k` along the packet's own trajectory.
pub fn envelope_momenta(
    cfg: &SimConfig,
    p: &PotentialSpec,
    spec: &PacketSpec,
    sample_times: &[f64],
    k: usize,
) -> Result<MomentaSeries> {
    cfg.validate()?;
    let traj = trajectory_for(cfg, p, spec, cfg.horizon)?;
    Ok(momenta_monitor(&run_envelope(cfg, spec, &traj, sample_times)?, k))
}

/// Single packet: full solution against the reconstructed envelope.
pub fn compare_single(
    cfg: &SimConfig,
    p: &PotentialSpec,
    spec: &PacketSpec,
    sample_times: &[f64],
) -> Result<ErrorReport> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    let traj = trajectory_for(cfg, p, spec, horizon)?;
    let grid = grid_for(cfg, &[&traj], spec.envelope_radius(cfg)?, horizon)?;
    check_sample_times(sample_times, horizon)?;
    let s = stream_errors(cfg, p, &grid, &[(spec, &traj)], sample_times, true, |_| false)?;
    Ok(ErrorReport {
        times: s.times,
        err_l2: s.l2,
        err_sigma_eps: s.sigma,
        err_h: Some(s.h),
        meta: meta(cfg, p, vec![spec.clone()], &grid),
        validity: s.validity,
        warnings: Vec::new(),
    })
}

/// Two packets: full solution on superposed data against the sum of two
/// independent envelope reconstructions (`Σ_ε` and `L²` norms).
pub fn superposition_study(
    cfg: &SimConfig,
    p: &PotentialSpec,
    spec1: &PacketSpec,
    spec2: &PacketSpec,
    sample_times: &[f64],
) -> Result<ErrorReport> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    let t1 = trajectory_for(cfg, p, spec1, horizon)?;
    let t2 = trajectory_for(cfg, p, spec2, horizon)?;
    let mut warnings = Vec::new();
    if same_phase_point(spec1, spec2) {
        warnings.push("both packets start at the same phase-space point".to_string());
    }
    if (t1.energy0() - t2.energy0()).abs() <= 1e-12 * t1.energy0().abs().max(1.0) {
        warnings.push("packets have equal classical energies; the large-time regime is not covered".to_string());
    }
    let radius = spec1.envelope_radius(cfg)?.max(spec2.envelope_radius(cfg)?);
    let grid = grid_for(cfg, &[&t1, &t2], radius, horizon)?;
    check_sample_times(sample_times, horizon)?;
    let s = stream_errors(cfg, p, &grid, &[(spec1, &t1), (spec2, &t2)], sample_times, false, |_| false)?;
    Ok(ErrorReport {
        times: s.times,
        err_l2: s.l2,
        err_sigma_eps: s.sigma,
        err_h: None,
        meta: meta(cfg, p, vec![spec1.clone(), spec2.clone()], &grid),
        validity: s.validity,
        warnings,
    })
}

/// Expected rate `min(1/2, α - α_c)`, or `1/2` at `α = α_c`.
pub fn expected_slope(cfg: &SimConfig) -> f64 {
    if cfg.is_critical() || cfg.lambda == 0.0 {
        0.5
    } else {
        (cfg.alpha - cfg.alpha_c()).min(0.5)
    }
}

fn refined(cfg: &SimConfig) -> SimConfig {
    let mut c = cfg.clone().with_dt(cfg.dt / 2.0);
    c.grid.refine = c.grid.refine.max(1) * 2;
    c
}

fn sweep_with(
    base: &SimConfig,
    epsilons: &[f64],
    self_check: bool,
    norm: ErrorNorm,
    run: impl Fn(&SimConfig) -> Result<ErrorReport> + Sync,
) -> Result<(Vec<ErrorReport>, Option<SelfCheck>)> {
    check_sweep(epsilons)?;
    let runs: Vec<ErrorReport> =
        epsilons.par_iter().map(|&e| run(&base.at_epsilon(e))).collect::<Result<Vec<_>>>()?;
    let check = if self_check {
        let smallest = base.at_epsilon(*epsilons.last().unwrap());
        let fine = run(&refined(&smallest))?;
        Some(SelfCheck::new(runs.last().unwrap().sup(norm), fine.sup(norm)))
    } else {
        None
    };
    Ok((runs, check))
}

/// Single-packet ε-sweep of the sup-in-time `L²` error.
pub fn sweep_epsilon(
    base: &SimConfig,
    p: &PotentialSpec,
    spec: &PacketSpec,
    epsilons: &[f64],
    sample_times: &[f64],
    self_check: bool,
) -> Result<ConvergenceReport> {
    let norm = ErrorNorm::L2;
    let (runs, check) = sweep_with(base, epsilons, self_check, norm, |c| compare_single(c, p, spec, sample_times))?;
    let expected = expected_slope(base);
    let window = (expected - SLOPE_TOLERANCE, expected + SLOPE_TOLERANCE);
    Ok(ConvergenceReport::assemble(norm, epsilons, runs, expected, window, check))
}

/// Two-packet ε-sweep of the sup-in-time `Σ_ε` error.
pub fn sweep_superposition(
    base: &SimConfig,
    p: &PotentialSpec,
    spec1: &PacketSpec,
    spec2: &PacketSpec,
    epsilons: &[f64],
    sample_times: &[f64],
    self_check: bool,
) -> Result<ConvergenceReport> {
    let norm = ErrorNorm::SigmaEps;
    let (runs, check) =
        sweep_with(base, epsilons, self_check, norm, |c| superposition_study(c, p, spec1, spec2, sample_times))?;
    Ok(ConvergenceReport::assemble(norm, epsilons, runs, 0.5, (SUPERPOSITION_MIN_SLOPE, f64::INFINITY), check))
}

/// First time the relative `L²` error exceeds `delta`, linearly interpolated
/// between samples; `None` when it never does.
fn first_exceedance(times: &[f64], errs: &[f64], delta: f64) -> Option<f64> {
    let i = errs.iter().position(|e| *e > delta)?;
    if i == 0 {
        return Some(0.0);
    }
    let (t0, t1, e0, e1) = (times[i - 1], times[i], errs[i - 1], errs[i]);
    Some(t0 + (t1 - t0) * (delta - e0) / (e1 - e0))
}

fn ehrenfest_single(
    cfg: &SimConfig,
    p: &PotentialSpec,
    spec: &PacketSpec,
    delta: f64,
    t_max: f64,
    sample_step: f64,
) -> Result<(f64, bool, Vec<f64>, Vec<f64>)> {
    let cfg = cfg.clone().with_horizon(t_max);
    cfg.validate()?;
    let traj = trajectory_for(&cfg, p, spec, t_max)?;
    let grid = grid_for(&cfg, &[&traj], spec.envelope_radius(&cfg)?, t_max)?;
    let times = uniform_times(t_max, (t_max / sample_step).ceil() as usize);
    let norm0 = build_initial(spec, &cfg, &grid)?.norm_l2().max(f64::MIN_POSITIVE);
    let s = stream_errors(&cfg, p, &grid, &[(spec, &traj)], &times, false, |e| e / norm0 > delta)?;
    let rel: Vec<f64> = s.l2.iter().map(|e| e / norm0).collect();
    Ok(match first_exceedance(&s.times, &rel, delta) {
        Some(t) => (t, false, s.times, rel),
        None => (t_max, true, s.times, rel),
    })
}

/// `T*(ε)`: the first time the relative `L²` error exceeds `δ`, capped at
/// `T_max` (censored). Samples are `sample_step` apart.
#[allow(clippy::too_many_arguments)]
pub fn ehrenfest_study(
    cfg: &SimConfig,
    p: &PotentialSpec,
    spec: &PacketSpec,
    delta: f64,
    epsilons: &[f64],
    t_max: f64,
    sample_step: f64,
    self_check: bool,
) -> Result<EhrenfestReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("threshold δ must lie in (0, 1), got {delta}")));
    }
    if !(t_max > 0.0 && sample_step > 0.0) {
        return Err(Error::config("`t_max` and the sample step must be positive"));
    }
    check_sweep(epsilons)?;
    let runs = epsilons
        .par_iter()
        .map(|&e| ehrenfest_single(&cfg.at_epsilon(e), p, spec, delta, t_max, sample_step))
        .collect::<Result<Vec<_>>>()?;
    let t_star: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let censored: Vec<bool> = runs.iter().map(|r| r.1).collect();
    let all_censored = censored.iter().all(|c| *c);
    let strictly_increasing = t_star.windows(2).all(|w| w[1] > w[0]);
    let pts: Vec<(f64, f64)> = epsilons.iter().zip(&t_star).map(|(e, t)| (-e.ln(), *t)).collect();
    let fit = least_squares(&pts);
    let mean = t_star.iter().sum::<f64>() / t_star.len() as f64;
    let relative_residual = if mean > 0.0 { fit.max_residual / mean } else { f64::INFINITY };

    let self_check = if self_check {
        let smallest = cfg.at_epsilon(*epsilons.last().unwrap());
        let fine = ehrenfest_single(&refined(&smallest), p, spec, delta, t_max, sample_step)?;
        Some(SelfCheck::new(*t_star.last().unwrap(), fine.0))
    } else {
        None
    };
    let passed = self_check.is_none_or(|s| s.passed)
        && (all_censored || (strictly_increasing && relative_residual < EHRENFEST_RESIDUAL_LIMIT));
    Ok(EhrenfestReport {
        epsilons: epsilons.to_vec(),
        delta,
        t_max,
        t_star,
        censored,
        all_censored,
        strictly_increasing,
        slope: fit.slope,
        intercept: fit.intercept,
        relative_residual,
        self_check,
        passed,
        series: runs.into_iter().map(|r| (r.2, r.3)).collect(),
    })
}

/// `ε^{α_c}(|φ₁+φ₂|^{2σ}(φ₁+φ₂) - |φ₁|^{2σ}φ₁ - |φ₂|^{2σ}φ₂)`, pointwise.
pub fn interaction_term(phi1: &WaveField, phi2: &WaveField, scale: f64, sigma: u32) -> Result<WaveField> {
    let pow = |z: C64| z * z.norm_sqr().powi(sigma as i32);
    let sum = phi1.add(phi2)?;
    let values = sum
        .values
        .iter()
        .zip(&phi1.values)
        .zip(&phi2.values)
        .map(|((s, a), b)| scale * (pow(*s) - pow(*a) - pow(*b)))
        .collect();
    Ok(WaveField { values, ..sum })
}

/// `(1/ε)‖N_I(t)‖` at the common snapshot times of two envelope runs, with
/// its trapezoidal integral and the trajectories' near-crossing set.
pub fn interaction_magnitude(
    env1: &EnvelopeRun,
    env2: &EnvelopeRun,
    traj1: &Trajectory,
    traj2: &Trajectory,
    cfg: &SimConfig,
    grid: &Grid,
    gamma: f64,
) -> Result<InteractionSeries> {
    if env1.times != env2.times {
        return Err(Error::config("envelope runs must share their sample times"));
    }
    let eps = cfg.epsilon;
    let scale = eps.powf(cfg.alpha_c());
    let mut values = Vec::with_capacity(env1.times.len());
    for (n, &t) in env1.times.iter().enumerate() {
        let p1 = reconstruct_from(&env1.snapshots[n], traj1, cfg, t, grid)?;
        let p2 = reconstruct_from(&env2.snapshots[n], traj2, cfg, t, grid)?;
        values.push(interaction_term(&p1, &p2, scale, cfg.sigma)?.norm_l2() / eps);
    }
    let integral = env1.times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum();
    let horizon = env1.times.last().copied().unwrap_or(0.0);
    let crossing = if horizon > 0.0 {
        crossing_set(traj1, traj2, gamma, eps, horizon)?.into()
    } else {
        CrossingSummary { gamma, intervals: Vec::new(), measure: 0.0 }
    };
    Ok(InteractionSeries { epsilon: eps, times: env1.times.clone(), values, integral, crossing })
}

/// Interaction integral over `[0, T]` for one ε. Samples are at most
/// `min(T/100, √ε/20)` apart so near-crossings are resolved.
pub fn interaction_run(
    cfg: &SimConfig,
    p: &PotentialSpec,
    spec1: &PacketSpec,
    spec2: &PacketSpec,
    gamma: f64,
) -> Result<InteractionSeries> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    let t1 = trajectory_for(cfg, p, spec1, horizon)?;
    let t2 = trajectory_for(cfg, p, spec2, horizon)?;
    let radius = spec1.envelope_radius(cfg)?.max(spec2.envelope_radius(cfg)?);
    let grid = grid_for(cfg, &[&t1, &t2], radius, horizon)?;
    let step = (horizon / 100.0).min(cfg.epsilon.sqrt() / 20.0);
    let times = uniform_times(horizon, (horizon / step).ceil() as usize);
    let e1 = run_envelope(cfg, spec1, &t1, &times)?;
    let e2 = run_envelope(cfg, spec2, &t2, &times)?;
    interaction_magnitude(&e1, &e2, &t1, &t2, cfg, &grid, gamma)
}

/// Interaction integrals across ε; passes when they strictly decrease.
pub fn interaction_study(
    base: &SimConfig,
    p: &PotentialSpec,
    spec1: &PacketSpec,
    spec2: &PacketSpec,
    epsilons: &[f64],
    gamma: f64,
) -> Result<InteractionReport> {
    check_sweep(epsilons)?;
    let series = epsilons
        .par_iter()
        .map(|&e| interaction_run(&base.at_epsilon(e), p, spec1, spec2, gamma))
        .collect::<Result<Vec<_>>>()?;
    let integrals: Vec<f64> = series.iter().map(|s| s.integral).collect();
    let monotone_decreasing = integrals.windows(2).all(|w| w[1] < w[0]);
    Ok(InteractionReport {
        epsilons: epsilons.to_vec(),
        crossing_measures: series.iter().map(|s| s.crossing.measure).collect(),
        integrals,
        monotone_decreasing,
        passed: monotone_decreasing,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(eps: f64, lambda: f64) -> SimConfig {
        SimConfig::new(eps, 1, 1, lambda, None).unwrap().with_horizon(0.5)
    }

    #[test]
    fn zero_amplitude_gives_zero_error() {
        let c = cfg(0.05, 1.0);
        let spec = PacketSpec::gaussian(vec![0.5], vec![0.0]).with_amplitude(C64::new(0.0, 0.0));
        let r = compare_single(&c, &PotentialSpec::harmonic_plus_cosine(), &spec, &uniform_times(0.5, 5)).unwrap();
        assert!(r.err_l2.iter().chain(&r.err_sigma_eps).chain(r.err_h.as_ref().unwrap()).all(|e| *e == 0.0));
    }

    #[test]
    fn l2_error_is_bounded_by_h_error() {
        let c = cfg(0.05, 1.0);
        let spec = PacketSpec::gaussian(vec![0.5], vec![0.2]);
        let r = compare_single(&c, &PotentialSpec::harmonic_plus_cosine(), &spec, &uniform_times(0.5, 5)).unwrap();
        for (l2, h) in r.err_l2.iter().zip(r.err_h.as_ref().unwrap()) {
            assert!(*l2 >= 0.0 && l2 <= h);
        }
        assert!(r.sup_l2() > 1e-6, "a cosine potential must leave a visible error");
        assert!(r.validity.mass_drift < 1e-12);
        assert_eq!(r.meta.model, EnvelopeModel::Nonlinear);
    }

    #[test]
    fn second_packet_of_zero_amplitude_matches_single() {
        let c = cfg(0.05, 1.0);
        let p = PotentialSpec::harmonic_plus_cosine();
        let s1 = PacketSpec::gaussian(vec![0.5], vec![0.2]);
        let s2 = PacketSpec::gaussian(vec![-0.5], vec![0.0]).with_amplitude(C64::new(0.0, 0.0));
        let times = uniform_times(0.5, 5);
        let single = compare_single(&c, &p, &s1, &times).unwrap();
        let double = superposition_study(&c, &p, &s1, &s2, &times).unwrap();
        // grids differ because the second trajectory widens the extent
        for (a, b) in single.err_l2.iter().zip(&double.err_l2) {
            assert!((a - b).abs() < 1e-6 * a.max(1e-12) + 1e-10, "{a} vs {b}");
        }
        assert!(double.err_h.is_none());
    }

    #[test]
    fn linear_quadratic_superposition_is_exact() {
        let c = cfg(0.05, 0.0);
        let p = PotentialSpec::harmonic(1.0);
        let s1 = PacketSpec::gaussian(vec![0.5], vec![0.2]);
        let s2 = PacketSpec::gaussian(vec![-0.5], vec![-0.3]);
        let times = uniform_times(0.5, 5);
        let r = superposition_study(&c, &p, &s1, &s2, &times).unwrap();
        let e1 = compare_single(&c, &p, &s1, &times).unwrap();
        let e2 = compare_single(&c, &p, &s2, &times).unwrap();
        // only splitting error remains, and it adds up across packets
        assert!(r.sup_sigma_eps() < 1e-4);
        for i in 0..times.len() {
            assert!(r.err_sigma_eps[i] <= 1.01 * (e1.err_sigma_eps[i] + e2.err_sigma_eps[i]) + 1e-12);
        }
        let same = superposition_study(&c, &p, &s1, &s1, &[0.0]).unwrap();
        assert_eq!(same.warnings.len(), 2);
    }

    #[test]
    fn sweep_needs_three_decreasing_epsilons() {
        let c = cfg(0.05, 1.0);
        let p = PotentialSpec::harmonic(1.0);
        let s = PacketSpec::gaussian(vec![0.0], vec![0.0]);
        assert!(matches!(sweep_epsilon(&c, &p, &s, &[0.1, 0.01], &[0.0], false), Err(Error::Config(_))));
        assert!(matches!(sweep_epsilon(&c, &p, &s, &[0.01, 0.1, 0.001], &[0.0], false), Err(Error::Config(_))));
    }

    #[test]
    fn expected_slopes() {
        let mut c = SimConfig::new(0.01, 1, 1, 1.0, None).unwrap();
        assert_eq!(expected_slope(&c), 0.5);
        c.alpha = 1.75;
        assert_eq!(expected_slope(&c), 0.25);
        c.alpha = 2.5;
        assert_eq!(expected_slope(&c), 0.5);
    }

    #[test]
    fn exceedance_interpolation() {
        assert_eq!(first_exceedance(&[0.0, 1.0, 2.0], &[0.0, 0.05, 0.15], 0.1), Some(1.5));
        assert_eq!(first_exceedance(&[0.0, 1.0], &[0.0, 0.05], 0.1), None);
    }

    #[test]
    fn quadratic_ehrenfest_is_censored() {
        let c = SimConfig::new(0.1, 1, 1, 1.0, None).unwrap();
        let r = ehrenfest_study(
            &c,
            &PotentialSpec::harmonic(1.0),
            &PacketSpec::gaussian(vec![1.0], vec![0.0]),
            0.1,
            &[0.1, 0.05, 0.025],
            2.0,
            0.25,
            false,
        )
        .unwrap();
        assert!(r.all_censored && r.passed);
        assert!(r.t_star.iter().all(|t| *t == 2.0));
    }

    #[test]
    fn interaction_of_coincident_packets() {
        // identical unit fields: (2³ - 1 - 1) = 6 times the single cubic term
        let c = cfg(0.05, 1.0);
        let g = Grid::line(-2.0, 2.0, 1024).unwrap();
        let s = PacketSpec::gaussian(vec![0.0], vec![0.0]);
        let phi = build_initial(&s, &c, &g).unwrap();
        let zero = WaveField::zeros(g.clone(), c.epsilon);
        let single = interaction_term(&phi, &zero, 1.0, 1).unwrap();
        assert!(single.norm_l2() == 0.0);
        let pair = interaction_term(&phi, &phi, 1.0, 1).unwrap();
        let cubic: f64 = phi.values.iter().map(|v| (v * v.norm_sqr()).norm_sqr()).sum::<f64>() * g.cell_volume();
        assert!((pair.norm_l2() / cubic.sqrt() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_of_separated_packets_is_negligible() {
        // centres 10√ε apart on unit-width Gaussians
        let eps: f64 = 0.01;
        let c = cfg(eps, 1.0);
        let g = Grid::line(-2.0, 2.0, 4096).unwrap();
        let sep = 10.0 * eps.sqrt();
        let a = build_initial(&PacketSpec::gaussian(vec![-sep / 2.0], vec![0.0]), &c, &g).unwrap();
        let b = build_initial(&PacketSpec::gaussian(vec![sep / 2.0], vec![0.0]), &c, &g).unwrap();
        let n = interaction_term(&a, &b, eps.powf(c.alpha_c()), 1).unwrap().norm_l2() / eps;
        // direct quadrature of ε^{α_c-1}‖|a+b|²(a+b) - |a|²a - |b|²b‖ in closed form
        let x = g.axis(0).coords();
        let gauss = |x: f64, x0: f64| (eps * PI).powf(-0.25) * (-(x - x0) * (x - x0) / (2.0 * eps)).exp();
        let direct: f64 = x
            .iter()
            .map(|&x| {
                let (u, v) = (gauss(x, -sep / 2.0), gauss(x, sep / 2.0));
                let s = u + v;
                (s * s * s - u * u * u - v * v * v).powi(2)
            })
            .sum::<f64>();
        let direct = (direct * g.axis(0).spacing()).sqrt() * eps.powf(c.alpha_c()) / eps;
        assert!(n < 1e-6, "{n}");
        assert!((n - direct).abs() <= 1e-12 + 1e-9 * direct);
    }
}
