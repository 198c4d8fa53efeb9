//! Envelope equation along a classical trajectory,
//! `i ∂ₜu + ½Δu = ½⟨Q(t) y, y⟩ u + λ |u|^{2σ} u` with `Q(t) = ∇²V(x(t))`.
//!
//! Same Strang scheme as the full solver at unit scale: kinetic half steps
//! `exp(-i Δt |k|²/4)` around a position phase whose quadratic weight uses
//! `Q` at the substep midpoint. `Q` comes from the Hermite-interpolated
//! trajectory, not from interpolating tabulated Hessians.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::least_squares;
use crate::flow::Trajectory;
use crate::grid::{Spectral, WaveField};
use crate::nls::{apply_position_phase, check_sample_times};

/// Envelope snapshots at the requested sample times.
#[derive(Clone, Debug)]
pub struct EnvelopeRun {
    pub lambda: f64,
    pub sigma: u32,
    pub dt: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<WaveField>,
    /// `(t, Q(t))` at each sample time, `Q` row-major.
    pub q_samples: Vec<(f64, Vec<f64>)>,
}

impl EnvelopeRun {
    /// Snapshot stored for time `t` (matched to a relative 1e-9).
    pub fn snapshot_at(&self, t: f64) -> Result<&WaveField> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| &self.snapshots[i])
            .ok_or(Error::Range {
                t,
                start: self.times.first().copied().unwrap_or(0.0),
                end: self.times.last().copied().unwrap_or(0.0),
            })
    }
}

/// `λ = 0` case of [`propagate_envelope_nonlinear`]; the two share one code path.
pub fn propagate_envelope_linear(
    a: &WaveField,
    traj: &Trajectory,
    sample_times: &[f64],
    dt: f64,
) -> Result<EnvelopeRun> {
    propagate_envelope_nonlinear(a, traj, 0.0, 1, sample_times, dt)
}

pub fn propagate_envelope_nonlinear(
    a: &WaveField,
    traj: &Trajectory,
    lambda: f64,
    sigma: u32,
    sample_times: &[f64],
    dt: f64,
) -> Result<EnvelopeRun> {
    check_sample_times(sample_times, traj.horizon())?;
    let mut prop = EnvelopePropagator::new(a, traj, lambda, sigma, dt)?;
    let mut run = EnvelopeRun {
        lambda,
        sigma,
        dt,
        times: Vec::with_capacity(sample_times.len()),
        snapshots: Vec::with_capacity(sample_times.len()),
        q_samples: Vec::with_capacity(sample_times.len()),
    };
    for &t in sample_times {
        prop.advance_to(t)?;
        run.times.push(t);
        run.snapshots.push(prop.field().clone());
        run.q_samples.push((t, traj.hessian_at(t)?));
    }
    Ok(run)
}

/// Streaming envelope solver; owns the current envelope.
pub struct EnvelopePropagator<'a> {
    traj: &'a Trajectory,
    lambda: f64,
    sigma: u32,
    dt: f64,
    u: WaveField,
    time: f64,
    spectral: Spectral,
    /// `y_i y_j` per point, row-major `2 × 2` (only the first entry in 1-d).
    quad: Vec<[f64; 4]>,
    weights: Vec<f64>,
    last_q: Vec<f64>,
    cache: Option<(f64, Vec<C64>, Vec<C64>)>,
}

impl<'a> EnvelopePropagator<'a> {
    pub fn new(a: &WaveField, traj: &'a Trajectory, lambda: f64, sigma: u32, dt: f64) -> Result<Self> {
        let d = a.grid.dim();
        Error::check_dim(traj.dim(), d)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("envelope step must be positive, got {dt}")));
        }
        if sigma == 0 {
            return Err(Error::config("`sigma` must be a positive integer"));
        }
        if !a.is_finite() {
            return Err(Error::config("initial envelope is not finite"));
        }
        let quad = a
            .grid
            .points()
            .chunks(d)
            .map(|y| match d {
                1 => [y[0] * y[0], 0.0, 0.0, 0.0],
                _ => [y[0] * y[0], y[0] * y[1], y[1] * y[0], y[1] * y[1]],
            })
            .collect();
        Ok(EnvelopePropagator {
            traj,
            lambda,
            sigma,
            dt,
            spectral: Spectral::new(&a.grid),
            u: WaveField { epsilon: 1.0, ..a.clone() },
            time: 0.0,
            quad,
            weights: Vec::new(),
            last_q: Vec::new(),
            cache: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn field(&self) -> &WaveField {
        &self.u
    }

    /// Advances to `t` in equal steps no longer than `dt`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let horizon = self.traj.horizon();
        if t > horizon * (1.0 + 1e-12) {
            return Err(Error::Range { t, start: 0.0, end: horizon });
        }
        let span = t - self.time;
        if span < -1e-12 * t.abs().max(1.0) {
            return Err(Error::Range { t, start: self.time, end: horizon });
        }
        if span <= 0.0 {
            return Ok(());
        }
        let steps = ((span / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        if self.cache.as_ref().is_none_or(|c| c.0 != h) {
            let sp = &self.spectral;
            self.cache = Some((h, sp.kinetic_multiplier(h / 4.0), sp.kinetic_multiplier(h / 2.0)));
        }
        let (_, half, full) = self.cache.take().unwrap();
        let kinetic = |sp: &mut Spectral, values: &mut [C64], mult: &[C64]| {
            sp.forward(values);
            values.iter_mut().zip(mult).for_each(|(v, m)| *v *= m);
            sp.inverse(values);
        };
        kinetic(&mut self.spectral, &mut self.u.values, &half);
        for n in 0..steps {
            let q = self.traj.hessian_at((self.time + (n as f64 + 0.5) * h).min(horizon))?;
            if q != self.last_q {
                self.weights.clear();
                self.weights.extend(
                    self.quad.iter().map(|p| 0.5 * q.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()),
                );
                self.last_q = q;
            }
            apply_position_phase(&mut self.u.values, &self.weights, h, self.lambda, self.sigma);
            kinetic(&mut self.spectral, &mut self.u.values, if n + 1 == steps { &half } else { &full });
        }
        self.cache = Some((h, half, full));
        if !self.u.is_finite() {
            return Err(Error::Diverged { last_valid_t: self.time });
        }
        self.time = t;
        self.u.check_boundary(t)
    }
}

/// `M_0 … M_k` of one field, where `M_j = max_{|α|+|β| ≤ j} ‖y^α ∂^β u‖`.
pub fn momenta(u: &WaveField, k: usize) -> Vec<f64> {
    let d = u.grid.dim();
    let mut spectral = Spectral::new(&u.grid);
    let mut hat = u.values.clone();
    spectral.forward(&mut hat);
    let pts = u.grid.points();
    let shape: Vec<usize> = u.grid.axes().iter().map(|a| a.points).collect();
    let ks: Vec<Vec<f64>> = (0..d)
        .map(|ax| {
            let n = shape[ax];
            spectral.wavenumbers(ax).iter().enumerate().map(|(m, k)| if m == n / 2 { 0.0 } else { *k }).collect()
        })
        .collect();
    let vol = u.grid.cell_volume();

    let multi = |order: usize| -> Vec<Vec<usize>> {
        match d {
            1 => vec![vec![order]],
            _ => (0..=order).map(|i| vec![i, order - i]).collect(),
        }
    };

    let mut by_order = vec![0.0f64; k + 1];
    for db in 0..=k {
        for beta in multi(db) {
            let mut buf: Vec<C64> = hat
                .iter()
                .enumerate()
                .map(|(flat, v)| {
                    let idx = match d {
                        1 => [flat, 0],
                        _ => [flat / shape[1], flat % shape[1]],
                    };
                    let mut f = C64::new(1.0, 0.0);
                    for ax in 0..d {
                        f *= C64::new(0.0, ks[ax][idx[ax]]).powu(beta[ax] as u32);
                    }
                    v * f
                })
                .collect();
            spectral.inverse(&mut buf);
            for da in 0..=(k - db) {
                for alpha in multi(da) {
                    let s: f64 = buf
                        .iter()
                        .zip(pts.chunks(d))
                        .map(|(v, y)| {
                            let w: f64 = (0..d).map(|ax| y[ax].powi(alpha[ax] as i32)).product();
                            (w * v).norm_sqr()
                        })
                        .sum();
                    let norm = (s * vol).sqrt();
                    let o = da + db;
                    by_order[o] = by_order[o].max(norm);
                }
            }
        }
    }
    for j in 1..=k {
        by_order[j] = by_order[j].max(by_order[j - 1]);
    }
    by_order
}

/// Momenta history of an envelope run with a fitted growth rate of `M_k`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentaSeries {
    pub order: usize,
    pub times: Vec<f64>,
    /// `values[n][j] = M_j(times[n])`.
    pub values: Vec<Vec<f64>>,
    /// Least-squares slope of `log M_k` against `t`.
    pub rate: f64,
}

pub fn momenta_monitor(run: &EnvelopeRun, k: usize) -> MomentaSeries {
    let values: Vec<Vec<f64>> = run.snapshots.iter().map(|u| momenta(u, k)).collect();
    let pts: Vec<(f64, f64)> = run.times.iter().zip(&values).map(|(t, m)| (*t, m[k].ln())).collect();
    let rate = if pts.len() >= 2 { least_squares(&pts).slope } else { 0.0 };
    MomentaSeries { order: k, times: run.times.clone(), values, rate }
}

impl MomentaSeries {
    /// Columns `t, M0 … Mk, rate`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let head: Vec<String> = (0..=self.order).map(|j| format!("M{j}")).collect();
        writeln!(w, "t,{},rate", head.join(","))?;
        for (t, m) in self.times.iter().zip(&self.values) {
            let cols: Vec<String> = m.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{t},{},{:.12e}", cols.join(","), self.rate)?;
        }
        Ok(())
    }
}
