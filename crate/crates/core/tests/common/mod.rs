//! Oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use ehrenfest_lab::{build_initial, Grid, NlsPropagator, PacketSpec, PotentialSpec, Result, SimConfig, WaveField};
use num_complex::Complex64 as C64;

/// Exact harmonic (ω = 1) path.
pub fn harmonic_x(x0: f64, xi0: f64, t: f64) -> f64 {
    x0 * t.cos() + xi0 * t.sin()
}

/// Intervals of `[0, horizon]` where `dist(t) ≤ threshold`, found on `n`
/// equal cells; endpoints are cell boundaries.
pub fn dense_crossings(dist: impl Fn(f64) -> f64, threshold: f64, horizon: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for i in 0..=n {
        let t = horizon * i as f64 / n as f64;
        let inside = dist(t) <= threshold;
        match (inside, open) {
            (true, None) => open = Some(t),
            (false, Some(s)) => {
                out.push((s, t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, horizon));
    }
    out
}

pub fn conjugate(f: &WaveField) -> WaveField {
    WaveField { values: f.values.iter().map(|v| v.conj()).collect(), ..f.clone() }
}

fn propagate(cfg: &SimConfig, p: &PotentialSpec, psi: WaveField, t: f64) -> Result<WaveField> {
    let mut prop = NlsPropagator::new(cfg, p, psi)?;
    prop.advance_to(t)?;
    Ok(prop.field().clone())
}

/// `(‖ψ₀ - conj P_T conj P_T ψ₀‖, one-way step error at T)`.
///
/// The one-way error is the Richardson estimate `4/3 ‖ψ_dt − ψ_dt/2‖`.
pub fn time_reversal(cfg: &SimConfig, p: &PotentialSpec, psi0: &WaveField, t: f64) -> Result<(f64, f64)> {
    let forward = propagate(cfg, p, psi0.clone(), t)?;
    let back = conjugate(&propagate(cfg, p, conjugate(&forward), t)?);
    let fine = propagate(&cfg.clone().with_dt(cfg.dt / 2.0), p, psi0.clone(), t)?;
    Ok((back.sub(psi0)?.norm_l2(), forward.sub(&fine)?.norm_l2() * 4.0 / 3.0))
}

/// Grid wide enough for a packet resting near `x0` for a short time.
pub fn packet_grid(cfg: &SimConfig, spec: &PacketSpec, reach: f64) -> Result<Grid> {
    let x = spec.x0[0];
    let radius = spec.envelope_radius(cfg)?;
    Grid::for_packet(&[(x - reach, x + reach)], spec.xi0[0].abs() + reach, cfg.epsilon, radius, &cfg.grid)
}

pub fn initial(cfg: &SimConfig, spec: &PacketSpec, reach: f64) -> Result<WaveField> {
    build_initial(spec, cfg, &packet_grid(cfg, spec, reach)?)
}

pub fn unit_gaussian(y: f64) -> f64 {
    (-y * y / 2.0).exp() * std::f64::consts::PI.powf(-0.25)
}

/// Worst pointwise deviation of `A^ε f` from the factorised form
/// `ε^{-1/4} e^{iξ₀x/ε} (u'(y) + i(ξ₀ − ξ_t)/√ε u(y))`, `y = (x − x₀)/√ε`,
/// for a Gaussian packet with momentum `ξ₀` a grid mode.
pub fn gauge_residual(eps: f64, x0: f64, mode: i32, xi_t: f64) -> Result<f64> {
    let length = 8.0;
    let grid = Grid::line(-4.0, 4.0, 2048)?;
    let xi0 = mode as f64 * 2.0 * std::f64::consts::PI / length * eps;
    let se = eps.sqrt();
    let phase = |x: f64| C64::from_polar(eps.powf(-0.25), xi0 * x / eps);
    let f = WaveField::from_fn(grid.clone(), eps, |x| phase(x[0]) * unit_gaussian((x[0] - x0) / se));
    let traj = ehrenfest_lab::integrate_flow(&PotentialSpec::zero(1), &[0.0], &[xi_t], 0.5, 1e-3)?;
    let a = f.apply_a(0.0, &traj)?;
    let mut worst: f64 = 0.0;
    for (i, x) in grid.axis(0).coords().iter().enumerate() {
        let y = (x - x0) / se;
        let du = -y * unit_gaussian(y);
        let expected = phase(*x) * (C64::new(du, 0.0) + C64::new(0.0, (xi0 - xi_t) / se) * unit_gaussian(y));
        worst = worst.max((a[0].values[i] - expected).norm());
    }
    Ok(worst)
}
