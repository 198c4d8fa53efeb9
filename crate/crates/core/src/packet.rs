//! Wave-packet data `ε^{-d/4} a((x - x₀)/√ε) e^{i(x - x₀)·ξ₀/ε}` and the
//! reconstruction of a packet from an envelope snapshot and a trajectory.
//!
//! Envelopes are moved onto the physical grid by band-limited (Fourier)
//! interpolation; the oscillating phase is always evaluated exactly at the
//! physical grid points and never passes through an interpolant.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::envelope::EnvelopeRun;
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::grid::{Axis, Grid, Spectral, WaveField};
use crate::nls::SimConfig;

/// Fraction of the mass used to define the envelope radius.
pub const RADIUS_MASS_FRACTION: f64 = 0.9999;

/// Envelope profile `a(y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// `(π w²)^{-d/4} exp(-|y - c|² / (2w²))`, unit `L²` norm.
    Gaussian {
        width: f64,
        #[serde(default)]
        offset: Vec<f64>,
    },
    /// Samples on an envelope grid (`epsilon` of the field is ignored).
    #[serde(skip)]
    Tabulated(WaveField),
}

impl Envelope {
    pub fn unit_gaussian() -> Self {
        Envelope::Gaussian { width: 1.0, offset: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub envelope: Envelope,
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
    #[serde(default = "unit", serialize_with = "ser_complex", deserialize_with = "de_complex")]
    pub amplitude: C64,
}

fn unit() -> C64 {
    C64::new(1.0, 0.0)
}

fn ser_complex<S: Serializer>(c: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

fn de_complex<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<C64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }
    Ok(match Repr::deserialize(de)? {
        Repr::Real(r) => C64::new(r, 0.0),
        Repr::Pair([re, im]) => C64::new(re, im),
    })
}

impl PacketSpec {
    /// Unit Gaussian packet at `(x0, xi0)`.
    pub fn gaussian(x0: Vec<f64>, xi0: Vec<f64>) -> Self {
        PacketSpec { envelope: Envelope::unit_gaussian(), x0, xi0, amplitude: unit() }
    }

    pub fn with_amplitude(mut self, amplitude: C64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        Error::check_dim(dim, self.x0.len())?;
        Error::check_dim(dim, self.xi0.len())?;
        if self.x0.iter().chain(&self.xi0).any(|c| !c.is_finite()) {
            return Err(Error::config("packet centre must be finite"));
        }
        match &self.envelope {
            Envelope::Gaussian { width, offset } => {
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::config(format!("gaussian width must be positive, got {width}")));
                }
                if !offset.is_empty() {
                    Error::check_dim(dim, offset.len())?;
                }
            }
            Envelope::Tabulated(f) => {
                Error::check_dim(dim, f.grid.dim())?;
                if !f.is_finite() {
                    return Err(Error::config("tabulated envelope is not finite"));
                }
            }
        }
        Ok(())
    }

    /// `a(y)` scaled by the packet amplitude, evaluated at arbitrary points.
    fn profile_at(&self, y: &[f64]) -> C64 {
        self.amplitude * self.shape_at(y)
    }

    /// Unit-amplitude Gaussian profile.
    fn shape_at(&self, y: &[f64]) -> f64 {
        match &self.envelope {
            Envelope::Gaussian { width, offset } => {
                let d = y.len() as f64;
                let r2: f64 = y
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let c = offset.get(i).copied().unwrap_or(0.0);
                        (v - c) * (v - c)
                    })
                    .sum();
                (PI * width * width).powf(-d / 4.0) * (-r2 / (2.0 * width * width)).exp()
            }
            Envelope::Tabulated(_) => unreachable!("tabulated profiles are interpolated"),
        }
    }

    /// `a` sampled on the envelope `y`-grid: the half-width is
    /// `cfg.envelope_extent` times the 99.99%-mass radius about the origin.
    pub fn envelope_field(&self, cfg: &SimConfig) -> Result<WaveField> {
        self.validate(cfg.dim)?;
        match &self.envelope {
            Envelope::Tabulated(f) => Ok(WaveField {
                values: f.values.iter().map(|v| v * self.amplitude).collect(),
                grid: f.grid.clone(),
                epsilon: 1.0,
            }),
            Envelope::Gaussian { width, offset } => {
                let shift = offset.iter().map(|c| c * c).sum::<f64>().sqrt();
                let probe = {
                    let half = shift + 12.0 * width;
                    let axes = (0..cfg.dim)
                        .map(|_| Axis::spanning(-half, half, if cfg.dim == 1 { 8192 } else { 512 }))
                        .collect::<Result<Vec<_>>>()?;
                    WaveField::from_fn(Grid::new(axes)?, 1.0, |y| C64::new(self.shape_at(y), 0.0))
                };
                let half = cfg.envelope_extent * mass_radius(&probe, &vec![0.0; cfg.dim], RADIUS_MASS_FRACTION);
                let axes = (0..cfg.dim)
                    .map(|_| Axis::spanning(-half, half, cfg.envelope_points))
                    .collect::<Result<Vec<_>>>()?;
                Ok(WaveField::from_fn(Grid::new(axes)?, 1.0, |y| self.profile_at(y)))
            }
        }
    }

    /// 99.99%-mass radius of the profile about its own centre of mass,
    /// independent of the amplitude.
    pub fn envelope_radius(&self, cfg: &SimConfig) -> Result<f64> {
        let f = self.clone().with_amplitude(unit()).envelope_field(cfg)?;
        let centre = centre_of_mass(&f);
        Ok(mass_radius(&f, &centre, RADIUS_MASS_FRACTION))
    }
}

fn centre_of_mass(f: &WaveField) -> Vec<f64> {
    let d = f.grid.dim();
    let pts = f.grid.points();
    let total: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
    (0..d)
        .map(|ax| {
            if total == 0.0 {
                return 0.0;
            }
            f.values.iter().zip(pts.chunks(d)).map(|(v, y)| v.norm_sqr() * y[ax]).sum::<f64>() / total
        })
        .collect()
}

/// Smallest radius about `centre` holding `fraction` of the discrete mass.
pub fn mass_radius(f: &WaveField, centre: &[f64], fraction: f64) -> f64 {
    let d = f.grid.dim();
    let pts = f.grid.points();
    let mut pairs: Vec<(f64, f64)> = f
        .values
        .iter()
        .zip(pts.chunks(d))
        .map(|(v, y)| {
            let r = y.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (r, v.norm_sqr())
        })
        .collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (r, m) in pairs {
        acc += m;
        if acc >= fraction * total {
            return r;
        }
    }
    f64::INFINITY
}

/// Samples the initial packet on `grid`.
pub fn build_initial(spec: &PacketSpec, cfg: &SimConfig, grid: &Grid) -> Result<WaveField> {
    spec.validate(cfg.dim)?;
    Error::check_dim(cfg.dim, grid.dim())?;
    let eps = cfg.epsilon;
    for (ax, xi) in grid.axes().iter().zip(&spec.xi0) {
        if xi.abs() > 0.0 && ax.spacing() > eps * PI / (4.0 * xi.abs()) {
            return Err(Error::config(format!(
                "grid spacing {} under-resolves the oscillation ξ₀/ε = {}",
                ax.spacing(),
                xi / eps
            )));
        }
    }
    let scale = eps.powf(-(cfg.dim as f64) / 4.0);
    let se = eps.sqrt();
    let phase_at = |x: &[f64]| -> C64 {
        let arg: f64 = x.iter().zip(&spec.x0).zip(&spec.xi0).map(|((x, x0), p)| (x - x0) * p).sum();
        C64::from_polar(scale, arg / eps)
    };
    match &spec.envelope {
        Envelope::Tabulated(_) => {
            let env = spec.envelope_field(cfg)?;
            let profile = interpolate_onto(&env, grid, &spec.x0, se)?;
            let pts = grid.points();
            let values = profile
                .iter()
                .zip(pts.chunks(cfg.dim))
                .map(|(u, x)| u * phase_at(x))
                .collect();
            Ok(WaveField { grid: grid.clone(), values, epsilon: eps })
        }
        Envelope::Gaussian { .. } => Ok(WaveField::from_fn(grid.clone(), eps, |x| {
            let y: Vec<f64> = x.iter().zip(&spec.x0).map(|(x, x0)| (x - x0) / se).collect();
            spec.profile_at(&y) * phase_at(x)
        })),
    }
}

/// Sum of the two initial packets.
pub fn superpose(spec1: &PacketSpec, spec2: &PacketSpec, cfg: &SimConfig, grid: &Grid) -> Result<WaveField> {
    build_initial(spec1, cfg, grid)?.add(&build_initial(spec2, cfg, grid)?)
}

/// True when two specs sit at the same phase-space point.
pub fn same_phase_point(spec1: &PacketSpec, spec2: &PacketSpec) -> bool {
    spec1.x0 == spec2.x0 && spec1.xi0 == spec2.xi0
}

/// Band-limited interpolation of `env` (on its `y`-grid) at the points
/// `y = (x - centre)/scale` for every `x` of `grid`. Points outside the
/// envelope domain get zero.
pub fn interpolate_onto(env: &WaveField, grid: &Grid, centre: &[f64], scale: f64) -> Result<Vec<C64>> {
    let d = grid.dim();
    Error::check_dim(d, env.grid.dim())?;
    let mut coeffs = env.values.clone();
    let mut sp = Spectral::new(&env.grid);
    sp.forward(&mut coeffs);
    let n_total = coeffs.len() as f64;
    coeffs.iter_mut().for_each(|c| *c /= n_total);
    let cmax = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let cutoff = 1e-17 * cmax;

    // per-axis basis: for target j, coefficient index m → e^{i k_m (y_j - left)}
    let basis = |ax: usize| -> (Vec<Option<usize>>, Vec<usize>, Vec<Vec<C64>>) {
        let ea = env.grid.axis(ax);
        let xa = grid.axis(ax);
        let k = ea.wavenumbers();
        let n = ea.points;
        let inside: Vec<Option<usize>> = {
            let mut next = 0;
            (0..xa.points)
                .map(|j| {
                    let y = (xa.coord(j) - centre[ax]) / scale;
                    if y >= ea.left && y < ea.right() {
                        next += 1;
                        Some(next - 1)
                    } else {
                        None
                    }
                })
                .collect()
        };
        let targets: Vec<usize> = (0..xa.points).filter(|&j| inside[j].is_some()).collect();
        let rows = targets
            .iter()
            .map(|&j| {
                let y = (xa.coord(j) - centre[ax]) / scale - ea.left;
                (0..n)
                    .map(|m| {
                        if m == n / 2 {
                            C64::new((k[m] * y).cos(), 0.0)
                        } else {
                            C64::from_polar(1.0, k[m] * y)
                        }
                    })
                    .collect()
            })
            .collect();
        (inside, targets, rows)
    };

    let mut out = vec![C64::default(); grid.len()];
    match d {
        1 => {
            // recurrence along the uniform target points, mode by mode
            let ea = env.grid.axis(0);
            let xa = grid.axis(0);
            let k = ea.wavenumbers();
            let n = ea.points;
            let targets: Vec<usize> = (0..xa.points)
                .filter(|&j| {
                    let y = (xa.coord(j) - centre[0]) / scale;
                    y >= ea.left && y < ea.right()
                })
                .collect();
            if let (Some(&first), Some(&last)) = (targets.first(), targets.last()) {
                let y0 = (xa.coord(first) - centre[0]) / scale - ea.left;
                let dy = xa.spacing() / scale;
                for m in 0..n {
                    let c = coeffs[m];
                    if c.norm() <= cutoff {
                        continue;
                    }
                    if m == n / 2 {
                        for j in first..=last {
                            let y = y0 + (j - first) as f64 * dy;
                            out[j] += c * (k[m] * y).cos();
                        }
                        continue;
                    }
                    let step = C64::from_polar(1.0, k[m] * dy);
                    let mut z = c * C64::from_polar(1.0, k[m] * y0);
                    for (count, j) in (first..=last).enumerate() {
                        // refresh to cap recurrence drift
                        if count % 256 == 0 {
                            z = c * C64::from_polar(1.0, k[m] * (y0 + count as f64 * dy));
                        }
                        out[j] += z;
                        z *= step;
                    }
                }
            }
        }
        _ => {
            let (_, t0, e0) = basis(0);
            let (_, t1, e1) = basis(1);
            let n0 = env.grid.axis(0).points;
            let n1 = env.grid.axis(1).points;
            // g[m0][j1] = Σ_{m1} c[m0, m1] e1[j1][m1]
            let mut g = vec![C64::default(); n0 * t1.len()];
            for m0 in 0..n0 {
                let row = &coeffs[m0 * n1..(m0 + 1) * n1];
                if row.iter().all(|c| c.norm() <= cutoff) {
                    continue;
                }
                for (jj, e) in e1.iter().enumerate() {
                    g[m0 * t1.len() + jj] = row.iter().zip(e).map(|(c, b)| c * b).sum();
                }
            }
            let nx1 = grid.axis(1).points;
            for (ii, &j0) in t0.iter().enumerate() {
                for (jj, &j1) in t1.iter().enumerate() {
                    let s: C64 = (0..n0).map(|m0| e0[ii][m0] * g[m0 * t1.len() + jj]).sum();
                    out[j0 * nx1 + j1] = s;
                }
            }
        }
    }
    Ok(out)
}

/// Packet `ε^{-d/4} u(t, (x - x(t))/√ε) e^{i(S(t) + ξ(t)·(x - x(t)))/ε}` on
/// `grid`, with `u(t)` the envelope snapshot at time `t`.
pub fn reconstruct(
    env_run: &EnvelopeRun,
    traj: &Trajectory,
    cfg: &SimConfig,
    t: f64,
    grid: &Grid,
) -> Result<WaveField> {
    let u = env_run.snapshot_at(t)?;
    reconstruct_from(u, traj, cfg, t, grid)
}

/// As [`reconstruct`], from an explicit envelope field.
pub fn reconstruct_from(
    u: &WaveField,
    traj: &Trajectory,
    cfg: &SimConfig,
    t: f64,
    grid: &Grid,
) -> Result<WaveField> {
    let d = cfg.dim;
    Error::check_dim(d, grid.dim())?;
    Error::check_dim(d, traj.dim())?;
    let state = traj.state_at(t)?;
    let eps = cfg.epsilon;
    let se = eps.sqrt();

    let support = se * mass_radius(u, &centre_of_mass(u), RADIUS_MASS_FRACTION);
    for (ax, xc) in grid.axes().iter().zip(&state.x) {
        if xc - support < ax.left || xc + support > ax.right() {
            return Err(Error::config(format!(
                "packet centre {xc} at t = {t} is within the envelope support of the grid edge"
            )));
        }
    }

    let profile = interpolate_onto(u, grid, &state.x, se)?;
    let scale = eps.powf(-(d as f64) / 4.0);
    let pts = grid.points();
    let values = profile
        .iter()
        .zip(pts.chunks(d))
        .map(|(v, x)| {
            let arg: f64 =
                x.iter().zip(&state.x).zip(&state.xi).map(|((x, xc), p)| p * (x - xc)).sum();
            v * C64::from_polar(scale, (state.action + arg) / eps)
        })
        .collect();
    Ok(WaveField { grid: grid.clone(), values, epsilon: eps })
}
