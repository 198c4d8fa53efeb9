//! Strang-split Fourier solver for
//! `iε ∂ₜψ + ε²/2 Δψ = V ψ + λ ε^α |ψ|^{2σ} ψ` on a fixed periodic grid.
//!
//! Each step is a kinetic half step `exp(-i ε Δt |k|²/4)` in Fourier space,
//! a position-space phase `exp(-i Δt (V + λ ε^α |ψ|^{2σ}) / ε)`, and another
//! kinetic half step. Consecutive half steps are fused. Every substep is a
//! unimodular multiplier, so the discrete mass is conserved to roundoff.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridPolicy, Spectral, WaveField};
use crate::potential::PotentialSpec;

/// `α_c = 1 + dσ/2`.
pub fn critical_alpha(dim: usize, sigma: u32) -> f64 {
    1.0 + dim as f64 * sigma as f64 / 2.0
}

/// Scalar parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub dim: usize,
    pub sigma: u32,
    pub lambda: f64,
    pub alpha: f64,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Full-solver step; defaults to `ε/20`.
    pub dt: f64,
    /// Envelope-solver step; defaults to `10⁻³`.
    pub envelope_dt: f64,
    /// Envelope grid half-width in units of the profile's 99.99% mass radius.
    pub envelope_extent: f64,
    pub envelope_points: usize,
    pub grid: GridPolicy,
    /// 2/3-rule truncation after each nonlinear phase.
    pub dealias: bool,
}

impl SimConfig {
    /// Config with the default step rules; `alpha = None` means critical.
    pub fn new(epsilon: f64, dim: usize, sigma: u32, lambda: f64, alpha: Option<f64>) -> Result<Self> {
        let alpha_c = critical_alpha(dim, sigma);
        let cfg = SimConfig {
            epsilon,
            dim,
            sigma,
            lambda,
            alpha: alpha.unwrap_or(alpha_c),
            horizon: 1.0,
            dt: epsilon / 20.0,
            envelope_dt: 1e-3,
            envelope_extent: 10.0,
            envelope_points: 1024,
            grid: GridPolicy::default(),
            dealias: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn alpha_c(&self) -> f64 {
        critical_alpha(self.dim, self.sigma)
    }

    /// Copy at a different ε with the step rescaled to keep `dt/ε` fixed.
    pub fn at_epsilon(&self, epsilon: f64) -> SimConfig {
        let mut c = self.clone();
        c.dt = self.dt * epsilon / self.epsilon;
        c.epsilon = epsilon;
        c
    }

    /// `λ ε^α`, the coefficient of the nonlinearity in the full equation.
    pub fn coupling(&self) -> f64 {
        self.lambda * self.epsilon.powf(self.alpha)
    }

    /// `λ ε^{α - α_c}`, the coefficient seen by the envelope.
    pub fn envelope_coupling(&self) -> f64 {
        self.lambda * self.epsilon.powf(self.alpha - self.alpha_c())
    }

    pub fn is_critical(&self) -> bool {
        (self.alpha - self.alpha_c()).abs() < 1e-12
    }

    /// Step used for the classical flow: `min(10⁻³, dt)`.
    pub fn flow_dt(&self) -> f64 {
        self.dt.min(1e-3)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("`{name}` must be positive and finite, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("envelope_dt", self.envelope_dt)?;
        positive("envelope_extent", self.envelope_extent)?;
        if !(1..=2).contains(&self.dim) {
            return Err(Error::config(format!("`dim` must be 1 or 2, got {}", self.dim)));
        }
        if self.sigma < 1 {
            return Err(Error::config("`sigma` must be at least 1"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::config("`lambda` must be finite"));
        }
        let alpha_c = self.alpha_c();
        if !(self.alpha >= alpha_c - 1e-12) || !self.alpha.is_finite() {
            return Err(Error::config(format!(
                "`alpha` = {} is below the critical exponent {alpha_c}",
                self.alpha
            )));
        }
        if self.envelope_points < 16 || !self.envelope_points.is_power_of_two() {
            return Err(Error::config("`envelope_points` must be a power of two ≥ 16"));
        }
        Ok(())
    }
}

/// Position-space phase of one split step: multiplies each sample by
/// `exp(-i h (w + c |ψ|^{2σ}))`, where `w` already includes any `1/ε`.
pub(crate) fn apply_position_phase(values: &mut [C64], weights: &[f64], h: f64, coupling: f64, sigma: u32) {
    for (v, w) in values.iter_mut().zip(weights) {
        let nl = coupling * v.norm_sqr().powi(sigma as i32);
        *v *= C64::from_polar(1.0, -h * (w + nl));
    }
}

/// 2/3-rule mask in FFT order.
pub(crate) fn dealias_mask(spectral_shape: &[usize]) -> Vec<f64> {
    let keep = |m: usize, n: usize| {
        let m = m as i64;
        let n = n as i64;
        let signed = if m < n / 2 { m } else { m - n };
        3 * signed.abs() <= n
    };
    let total: usize = spectral_shape.iter().product();
    (0..total)
        .map(|flat| {
            let ok = match spectral_shape {
                [n] => keep(flat, *n),
                [n0, n1] => keep(flat / n1, *n0) && keep(flat % n1, *n1),
                _ => unreachable!(),
            };
            if ok {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

struct KineticCache {
    h: f64,
    half: Vec<C64>,
    full: Vec<C64>,
}

/// Streaming full-equation propagator; owns the current field.
pub struct NlsPropagator {
    cfg: SimConfig,
    field: WaveField,
    time: f64,
    spectral: Spectral,
    /// `V(x)/ε` at grid points.
    weights: Vec<f64>,
    mask: Option<Vec<f64>>,
    cache: Option<KineticCache>,
}

impl NlsPropagator {
    pub fn new(cfg: &SimConfig, potential: &PotentialSpec, psi0: WaveField) -> Result<Self> {
        cfg.validate()?;
        Error::check_dim(cfg.dim, psi0.grid.dim())?;
        Error::check_dim(cfg.dim, potential.dim())?;
        if !psi0.is_finite() {
            return Err(Error::config("initial field is not finite"));
        }
        let d = cfg.dim;
        let weights = psi0.grid.points().chunks(d).map(|x| potential.value(x) / cfg.epsilon).collect();
        let shape: Vec<usize> = psi0.grid.axes().iter().map(|a| a.points).collect();
        Ok(NlsPropagator {
            spectral: Spectral::new(&psi0.grid),
            mask: cfg.dealias.then(|| dealias_mask(&shape)),
            cfg: cfg.clone(),
            field: WaveField { epsilon: cfg.epsilon, ..psi0 },
            time: 0.0,
            weights,
            cache: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn field(&self) -> &WaveField {
        &self.field
    }

    fn kinetic(&mut self, h: f64) -> &KineticCache {
        let stale = self.cache.as_ref().is_none_or(|c| c.h != h);
        if stale {
            let eps = self.cfg.epsilon;
            let mut half = self.spectral.kinetic_multiplier(eps * h / 4.0);
            let mut full = self.spectral.kinetic_multiplier(eps * h / 2.0);
            if let Some(mask) = &self.mask {
                for ((a, b), m) in half.iter_mut().zip(full.iter_mut()).zip(mask) {
                    *a *= m;
                    *b *= m;
                }
            }
            self.cache = Some(KineticCache { h, half, full });
        }
        self.cache.as_ref().unwrap()
    }

    /// Advances to time `t ≥ self.time()` in equal steps no longer than `dt`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let span = t - self.time;
        if span < -1e-12 * t.abs().max(1.0) {
            return Err(Error::Range { t, start: self.time, end: f64::INFINITY });
        }
        if span <= 0.0 {
            return Ok(());
        }
        let steps = ((span / self.cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let coupling = self.cfg.coupling() / self.cfg.epsilon;
        let sigma = self.cfg.sigma;

        self.kinetic(h);
        let cache = self.cache.take().unwrap();
        let values = &mut self.field.values;
        let apply = |spectral: &mut Spectral, values: &mut [C64], mult: &[C64]| {
            spectral.forward(values);
            for (v, m) in values.iter_mut().zip(mult) {
                *v *= m;
            }
            spectral.inverse(values);
        };
        apply(&mut self.spectral, values, &cache.half);
        for n in 0..steps {
            apply_position_phase(values, &self.weights, h, coupling, sigma);
            let mult = if n + 1 == steps { &cache.half } else { &cache.full };
            apply(&mut self.spectral, values, mult);
        }
        self.cache = Some(cache);

        if !self.field.is_finite() {
            return Err(Error::Diverged { last_valid_t: self.time });
        }
        self.time = t;
        self.field.check_boundary(t)
    }
}

/// Snapshots of the full solution at increasing `sample_times ⊂ [0, T]`.
pub fn propagate_nls(
    cfg: &SimConfig,
    potential: &PotentialSpec,
    psi0: &WaveField,
    sample_times: &[f64],
) -> Result<Vec<WaveField>> {
    check_sample_times(sample_times, cfg.horizon)?;
    psi0.check_boundary(0.0)?;
    let mut prop = NlsPropagator::new(cfg, potential, psi0.clone())?;
    let mut out = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        prop.advance_to(t)?;
        out.push(prop.field().clone());
    }
    Ok(out)
}

pub(crate) fn check_sample_times(times: &[f64], horizon: f64) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && *t <= horizon * (1.0 + 1e-12))) {
        return Err(Error::config(format!("sample times must lie in [0, {horizon}]")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("sample times must be nondecreasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn critical_exponents() {
        assert_eq!(critical_alpha(1, 1), 1.5);
        assert_eq!(critical_alpha(2, 1), 2.0);
        assert_eq!(critical_alpha(1, 2), 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.01, 1, 1, 1.0, Some(1.2)).is_err());
        assert!(SimConfig::new(-0.01, 1, 1, 1.0, None).is_err());
        assert!(SimConfig::new(0.01, 3, 1, 1.0, None).is_err());
        assert!(SimConfig::new(0.01, 1, 0, 1.0, None).is_err());
        let c = SimConfig::new(0.01, 2, 1, 1.0, None).unwrap();
        assert_eq!(c.alpha, 2.0);
        assert!(c.is_critical());
        assert!((c.dt - 5e-4).abs() < 1e-18);
        assert!((c.at_epsilon(0.001).dt - 5e-5).abs() < 1e-18);
    }

    fn gaussian_packet(g: &Grid, eps: f64, x0: f64, xi0: f64) -> WaveField {
        WaveField::from_fn(g.clone(), eps, |x| {
            let y = (x[0] - x0) / eps.sqrt();
            let amp = eps.powf(-0.25) * PI.powf(-0.25) * (-0.5 * y * y).exp();
            C64::from_polar(amp, (x[0] - x0) * xi0 / eps)
        })
    }

    /// Closed-form free Gaussian: u(t,y) = π^{-1/4} (1+it)^{-1/2} e^{-y²/(2(1+it))}.
    fn free_gaussian(g: &Grid, eps: f64, x0: f64, xi0: f64, t: f64) -> WaveField {
        let xt = x0 + xi0 * t;
        let s = 0.5 * xi0 * xi0 * t;
        let w = C64::new(1.0, t);
        WaveField::from_fn(g.clone(), eps, |x| {
            let y = (x[0] - xt) / eps.sqrt();
            let u = PI.powf(-0.25) / w.sqrt() * (-(y * y) / (2.0 * w)).exp();
            eps.powf(-0.25) * u * C64::from_polar(1.0, (s + xi0 * (x[0] - xt)) / eps)
        })
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let eps = 0.01;
        let cfg = SimConfig::new(eps, 1, 1, 0.0, None).unwrap().with_horizon(1.0);
        let g = Grid::line(-3.0, 4.0, 4096).unwrap();
        let psi0 = gaussian_packet(&g, eps, -0.5, 1.0);
        let snaps = propagate_nls(&cfg, &PotentialSpec::zero(1), &psi0, &[0.5, 1.0]).unwrap();
        for (snap, t) in snaps.iter().zip([0.5, 1.0]) {
            let exact = free_gaussian(&g, eps, -0.5, 1.0, t);
            let err = snap.sub(&exact).unwrap().norm_l2();
            assert!(err < 1e-10, "t={t}: {err}");
        }
    }

    #[test]
    fn harmonic_coherent_state_is_exact() {
        let eps = 0.01;
        let cfg = SimConfig::new(eps, 1, 1, 0.0, None).unwrap().with_horizon(2.0 * PI);
        let g = Grid::line(-4.0, 4.0, 4096).unwrap();
        let (x0, xi0) = (1.0, 0.5);
        let psi0 = gaussian_packet(&g, eps, x0, xi0);
        let times: Vec<f64> = (1..=8).map(|i| i as f64 * PI / 4.0).collect();
        let snaps = propagate_nls(&cfg, &PotentialSpec::harmonic(1.0), &psi0, &times).unwrap();
        for (snap, &t) in snaps.iter().zip(&times) {
            let xt = x0 * t.cos() + xi0 * t.sin();
            let pt = -x0 * t.sin() + xi0 * t.cos();
            let st = (xi0 * xi0 - x0 * x0) * (2.0 * t).sin() / 4.0 + x0 * xi0 * ((2.0 * t).cos() - 1.0) / 2.0;
            let exact = WaveField::from_fn(g.clone(), eps, |x| {
                let y = (x[0] - xt) / eps.sqrt();
                let amp = eps.powf(-0.25) * PI.powf(-0.25) * (-0.5 * y * y).exp();
                C64::from_polar(amp, (st + pt * (x[0] - xt)) / eps - t / 2.0)
            });
            let err = snap.sub(&exact).unwrap().norm_l2();
            assert!(err < 1e-5, "t={t}: {err}");
        }
    }

    #[test]
    fn mass_is_conserved() {
        let eps = 0.02;
        let cfg = SimConfig::new(eps, 1, 1, 2.0, None).unwrap().with_horizon(1.0);
        let g = Grid::line(-4.0, 4.0, 2048).unwrap();
        let psi0 = gaussian_packet(&g, eps, 0.3, 0.7);
        let m0 = psi0.mass();
        let snaps =
            propagate_nls(&cfg, &PotentialSpec::harmonic_plus_cosine(), &psi0, &[0.25, 0.5, 1.0]).unwrap();
        for s in snaps {
            assert!((s.mass() - m0).abs() <= 1e-12 * m0, "{}", s.mass() - m0);
        }
    }

    #[test]
    fn constant_shift_is_a_global_phase() {
        let eps = 0.02;
        let cfg = SimConfig::new(eps, 1, 1, 1.0, None).unwrap().with_horizon(0.5);
        let g = Grid::line(-3.0, 3.0, 1024).unwrap();
        let psi0 = gaussian_packet(&g, eps, 0.0, 0.5);
        let p = PotentialSpec::harmonic_plus_cosine();
        let a = propagate_nls(&cfg, &p, &psi0, &[0.5]).unwrap().remove(0);
        let b = propagate_nls(&cfg, &p.shifted(0.3), &psi0, &[0.5]).unwrap().remove(0);
        let phase = C64::from_polar(1.0, -0.3 * 0.5 / eps);
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u.norm() - v.norm()).abs() < 1e-12);
            assert!((u * phase - v).norm() < 1e-9);
        }
    }

    #[test]
    fn boundary_guard_trips() {
        let eps = 0.02;
        let cfg = SimConfig::new(eps, 1, 1, 0.0, None).unwrap().with_horizon(2.0);
        let g = Grid::line(-2.0, 2.0, 1024).unwrap();
        let psi0 = gaussian_packet(&g, eps, 0.0, 1.5);
        let err = propagate_nls(&cfg, &PotentialSpec::zero(1), &psi0, &[2.0]).unwrap_err();
        assert!(matches!(err, Error::BoundaryMass { .. }));
    }

    #[test]
    fn sample_time_checks() {
        let cfg = SimConfig::new(0.05, 1, 1, 0.0, None).unwrap();
        let g = Grid::line(-3.0, 3.0, 256).unwrap();
        let psi0 = gaussian_packet(&g, 0.05, 0.0, 0.0);
        assert!(propagate_nls(&cfg, &PotentialSpec::zero(1), &psi0, &[0.5, 0.2]).is_err());
        assert!(propagate_nls(&cfg, &PotentialSpec::zero(1), &psi0, &[1.5]).is_err());
    }

    #[test]
    fn dealias_mask_keeps_low_modes() {
        let m = dealias_mask(&[12 * 2]);
        assert_eq!(m[0], 1.0);
        assert_eq!(m[8], 1.0);
        assert_eq!(m[9], 0.0);
        assert_eq!(m[24 - 8], 1.0);
    }
}
