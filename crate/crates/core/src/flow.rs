//! Classical trajectories of `|ξ|²/2 + V(x)` and the action along them.
//!
//! Integration is velocity Störmer–Verlet. The action is accumulated with the
//! Verlet discrete Lagrangian (half-step momentum squared, trapezoidal
//! potential), which keeps the whole `(x, ξ, S)` triple second order.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Sampled phase-space curve `(x(t), ξ(t))` with action `S(t)`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    potential: PotentialSpec,
    dim: usize,
    dt: f64,
    times: Vec<f64>,
    x: Vec<f64>,
    xi: Vec<f64>,
    action: Vec<f64>,
    energy0: f64,
}

/// Interpolated state at an arbitrary time.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub action: f64,
}

/// `{t ∈ [0, T] : |x₁(t) - x₂(t)| ≤ ε^γ}` as disjoint ordered intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossingSet {
    pub gamma: f64,
    pub epsilon: f64,
    pub intervals: Vec<(f64, f64)>,
    pub total_measure: f64,
}

/// Fitted `|x(t)| + |ξ(t)| ≤ A e^{C₀ t}` over the sampled horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthEnvelope {
    pub prefactor: f64,
    pub rate: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn kinetic(xi: &[f64]) -> f64 {
    0.5 * xi.iter().map(|c| c * c).sum::<f64>()
}

/// Integrates the Hamiltonian system from `(x0, xi0)` on `[0, horizon]`.
///
/// The step is shrunk so that an integer number of steps lands on the
/// horizon exactly.
pub fn integrate_flow(
    potential: &PotentialSpec,
    x0: &[f64],
    xi0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let d = potential.dim();
    Error::check_dim(d, x0.len())?;
    Error::check_dim(d, xi0.len())?;
    if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config(format!("flow needs dt > 0 and T > 0, got dt={dt}, T={horizon}")));
    }
    if x0.iter().chain(xi0).any(|c| !c.is_finite()) {
        return Err(Error::config("non-finite initial phase-space point"));
    }
    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;

    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity((steps + 1) * d);
    let mut xis = Vec::with_capacity((steps + 1) * d);
    let mut action = Vec::with_capacity(steps + 1);

    let mut x = x0.to_vec();
    let mut xi = xi0.to_vec();
    let mut grad = vec![0.0; d];
    let mut s = 0.0;
    let mut v_old = potential.value(&x);
    potential.gradient_into(&x, &mut grad);

    times.push(0.0);
    xs.extend_from_slice(&x);
    xis.extend_from_slice(&xi);
    action.push(0.0);

    for n in 1..=steps {
        for (p, g) in xi.iter_mut().zip(&grad) {
            *p -= 0.5 * h * g;
        }
        let half_kinetic = kinetic(&xi);
        for (q, p) in x.iter_mut().zip(&xi) {
            *q += h * p;
        }
        potential.gradient_into(&x, &mut grad);
        for (p, g) in xi.iter_mut().zip(&grad) {
            *p -= 0.5 * h * g;
        }
        let v_new = potential.value(&x);
        s += h * (half_kinetic - 0.5 * (v_old + v_new));
        v_old = v_new;

        let t = n as f64 * h;
        if x.iter().chain(&xi).any(|c| !c.is_finite()) || !s.is_finite() || !v_new.is_finite() {
            return Err(Error::Diverged { last_valid_t: times[n - 1] });
        }
        times.push(t);
        xs.extend_from_slice(&x);
        xis.extend_from_slice(&xi);
        action.push(s);
    }

    let energy0 = kinetic(xi0) + potential.value(x0);
    Ok(Trajectory {
        potential: potential.clone(),
        dim: d,
        dt: h,
        times,
        x: xs,
        xi: xis,
        action,
        energy0,
    })
}

impl Trajectory {
    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Actual integration step (may be slightly below the requested one).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn x_at_index(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }

    pub fn xi_at_index(&self, n: usize) -> &[f64] {
        &self.xi[n * self.dim..(n + 1) * self.dim]
    }

    pub fn action_at_index(&self, n: usize) -> f64 {
        self.action[n]
    }

    /// `|ξ₀|²/2 + V(x₀)`.
    pub fn energy0(&self) -> f64 {
        self.energy0
    }

    pub fn energy_at_index(&self, n: usize) -> f64 {
        kinetic(self.xi_at_index(n)) + self.potential.value(self.x_at_index(n))
    }

    /// Largest `|E(tₙ) - E₀|` over the samples.
    pub fn max_energy_drift(&self) -> f64 {
        (0..self.len())
            .map(|n| (self.energy_at_index(n) - self.energy0).abs())
            .fold(0.0, f64::max)
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let end = self.horizon();
        let slack = 1e-12 * end.max(1.0);
        if !(t >= -slack && t <= end + slack) {
            return Err(Error::Range { t, start: 0.0, end });
        }
        let t = t.clamp(0.0, end);
        let n = ((t / self.dt) as usize).min(self.len() - 2);
        let theta = ((t - self.times[n]) / (self.times[n + 1] - self.times[n])).clamp(0.0, 1.0);
        Ok((n, theta))
    }

    /// Cubic Hermite interpolation of `(x, ξ, S)` using the exact vector
    /// field at the bracketing samples.
    pub fn state_at(&self, t: f64) -> Result<PhasePoint> {
        let (n, s) = self.locate(t)?;
        let d = self.dim;
        let h = self.times[n + 1] - self.times[n];
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);

        let (x0, x1) = (self.x_at_index(n), self.x_at_index(n + 1));
        let (p0, p1) = (self.xi_at_index(n), self.xi_at_index(n + 1));
        let mut g0 = vec![0.0; d];
        let mut g1 = vec![0.0; d];
        self.potential.gradient_into(x0, &mut g0);
        self.potential.gradient_into(x1, &mut g1);

        let x = (0..d)
            .map(|i| h00 * x0[i] + h10 * h * p0[i] + h01 * x1[i] + h11 * h * p1[i])
            .collect();
        let xi = (0..d)
            .map(|i| h00 * p0[i] - h10 * h * g0[i] + h01 * p1[i] - h11 * h * g1[i])
            .collect();
        let l0 = kinetic(p0) - self.potential.value(x0);
        let l1 = kinetic(p1) - self.potential.value(x1);
        let action = h00 * self.action[n] + h10 * h * l0 + h01 * self.action[n + 1] + h11 * h * l1;
        Ok(PhasePoint { x, xi, action })
    }

    /// `|ξ(t)|²/2 + V(x(t))` from the interpolated state.
    pub fn energy(&self, t: f64) -> Result<f64> {
        let p = self.state_at(t)?;
        Ok(kinetic(&p.xi) + self.potential.value(&p.x))
    }

    /// `Hess V(x(t))`, row-major.
    pub fn hessian_at(&self, t: f64) -> Result<Vec<f64>> {
        let p = self.state_at(t)?;
        let mut q = vec![0.0; self.dim * self.dim];
        self.potential.hessian_into(&p.x, &mut q);
        Ok(q)
    }

    /// Per-axis `(min, max)` of the sampled positions up to time `t_end`.
    pub fn position_extent(&self, t_end: f64) -> Vec<(f64, f64)> {
        let mut ext = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for n in 0..self.len() {
            if self.times[n] > t_end + self.dt {
                break;
            }
            for (i, e) in ext.iter_mut().enumerate() {
                let v = self.x[n * self.dim + i];
                e.0 = e.0.min(v);
                e.1 = e.1.max(v);
            }
        }
        ext
    }

    /// Largest `|ξ(t)|` up to time `t_end`.
    pub fn max_momentum(&self, t_end: f64) -> f64 {
        (0..self.len())
            .take_while(|&n| self.times[n] <= t_end + self.dt)
            .map(|n| norm(self.xi_at_index(n)))
            .fold(0.0, f64::max)
    }

    /// Exponential envelope of `|x| + |ξ|`. The rate is the least-squares
    /// slope of `log(|x| + |ξ|)` (clamped at zero); the prefactor is then the
    /// smallest one that makes the bound hold at every sample.
    pub fn growth_envelope(&self) -> GrowthEnvelope {
        let size = |n: usize| norm(self.x_at_index(n)) + norm(self.xi_at_index(n));
        let pts: Vec<(f64, f64)> = (0..self.len())
            .filter(|&n| size(n) > 0.0)
            .map(|n| (self.times[n], size(n).ln()))
            .collect();
        let rate = if pts.len() >= 2 {
            crate::fit::least_squares(&pts).slope.max(0.0)
        } else {
            0.0
        };
        let prefactor = (0..self.len())
            .map(|n| size(n) * (-rate * self.times[n]).exp())
            .fold(0.0, f64::max);
        GrowthEnvelope { prefactor, rate }
    }

    /// CSV with header `t,x,xi,S,E` (1-d) or `t,x1,x2,xi1,xi2,S,E` (2-d).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", trajectory_csv_header(self.dim))?;
        for n in 0..self.len() {
            write!(w, "{:.12e}", self.times[n])?;
            for v in self.x_at_index(n).iter().chain(self.xi_at_index(n)) {
                write!(w, ",{v:.12e}")?;
            }
            writeln!(w, ",{:.12e},{:.12e}", self.action[n], self.energy_at_index(n))?;
        }
        Ok(())
    }
}

pub fn trajectory_csv_header(dim: usize) -> String {
    if dim == 1 {
        "t,x,xi,S,E".to_string()
    } else {
        let xs: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        let ps: Vec<String> = (1..=dim).map(|i| format!("xi{i}")).collect();
        format!("t,{},{},S,E", xs.join(","), ps.join(","))
    }
}

/// Near-crossing set of two trajectories sampled on a common grid.
///
/// Sign changes of `|x₁ - x₂| - ε^γ` between samples are refined by one
/// linear interpolation; the horizon `T` is inserted as a final sample.
pub fn crossing_set(
    traj1: &Trajectory,
    traj2: &Trajectory,
    gamma: f64,
    epsilon: f64,
    horizon: f64,
) -> Result<CrossingSet> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::config(format!("crossing exponent γ must lie in (0, 1/2), got {gamma}")));
    }
    if !(epsilon > 0.0) || !(horizon > 0.0) {
        return Err(Error::config("crossing set needs ε > 0 and T > 0"));
    }
    Error::check_dim(traj1.dim, traj2.dim)?;
    let same_grid = traj1.len() == traj2.len()
        && traj1.times.iter().zip(&traj2.times).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !same_grid {
        return Err(Error::config("crossing set needs trajectories on a common time grid"));
    }
    if traj1.horizon() < horizon * (1.0 - 1e-12) {
        return Err(Error::Range { t: horizon, start: 0.0, end: traj1.horizon() });
    }

    let threshold = epsilon.powf(gamma);
    let gap = |n: usize| -> f64 {
        let d: Vec<f64> =
            traj1.x_at_index(n).iter().zip(traj2.x_at_index(n)).map(|(a, b)| a - b).collect();
        norm(&d) - threshold
    };

    let mut samples: Vec<(f64, f64)> = Vec::new();
    for n in 0..traj1.len() {
        let t = traj1.times[n];
        if t >= horizon {
            if t > horizon && n > 0 {
                let (t0, g0) = *samples.last().unwrap();
                let g1 = gap(n);
                let g = g0 + (g1 - g0) * (horizon - t0) / (t - t0);
                samples.push((horizon, g));
            } else {
                samples.push((t, gap(n)));
            }
            break;
        }
        samples.push((t, gap(n)));
    }

    let crossing = |(ta, ga): (f64, f64), (tb, gb): (f64, f64)| ta + (tb - ta) * ga / (ga - gb);
    let mut intervals = Vec::new();
    let mut start = if samples[0].1 <= 0.0 { Some(samples[0].0) } else { None };
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        match start {
            None if b.1 <= 0.0 => start = Some(crossing(a, b)),
            Some(s) if b.1 > 0.0 => {
                intervals.push((s, crossing(a, b)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, samples.last().unwrap().0));
    }
    let total_measure = intervals.iter().map(|(a, b)| b - a).sum::<f64>() + 0.0;
    Ok(CrossingSet { gamma, epsilon, intervals, total_measure })
}
