//! Uniform periodic grids, Fourier differentiation, discrete norms and the
//! moving-frame operators `A^ε(t) = √ε ∇ - i ξ(t)/√ε` and
//! `B^ε(t) = (x - x(t))/√ε`.
//!
//! Fields are stored row-major: in two dimensions the second axis is the
//! contiguous one.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Trajectory;

/// Points within this many cells of the edge count as boundary mass.
pub const GUARD_CELLS: usize = 5;
/// Largest admissible boundary-mass fraction.
pub const GUARD_FRACTION: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub left: f64,
    pub length: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(left: f64, length: f64, points: usize) -> Result<Self> {
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::config(format!("grid axis needs a power-of-two point count ≥ 16, got {points}")));
        }
        if !(length > 0.0 && length.is_finite() && left.is_finite()) {
            return Err(Error::config(format!("grid axis needs finite extent, got [{left}, +{length}]")));
        }
        Ok(Axis { left, length, points })
    }

    /// Axis spanning `[left, right)`.
    pub fn spanning(left: f64, right: f64, points: usize) -> Result<Self> {
        Axis::new(left, right - left, points)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn right(&self) -> f64 {
        self.left + self.length
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.left + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumbers in FFT order: `0, 1, …, N/2-1, -N/2, …, -1`
    /// times `2π/L`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let scale = 2.0 * PI / self.length;
        (0..n).map(|m| if m < n / 2 { m } else { m - n } as f64 * scale).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if !(1..=2).contains(&axes.len()) {
            return Err(Error::config(format!("grid dimension must be 1 or 2, got {}", axes.len())));
        }
        Ok(Grid { axes })
    }

    pub fn line(left: f64, right: f64, points: usize) -> Result<Self> {
        Grid::new(vec![Axis::spanning(left, right, points)?])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^d`, the rectangle-rule weight.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// Multi-index of a flat row-major index.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        match self.axes.len() {
            1 => [flat, 0],
            _ => [flat / self.axes[1].points, flat % self.axes[1].points],
        }
    }

    /// Coordinates of every point, flat row-major, `d` entries per point.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        let coords: Vec<Vec<f64>> = self.axes.iter().map(|a| a.coords()).collect();
        let mut out = Vec::with_capacity(self.len() * d);
        for flat in 0..self.len() {
            let idx = self.unflatten(flat);
            for (ax, c) in coords.iter().enumerate() {
                out.push(c[idx[ax]]);
            }
        }
        out
    }

    /// Grid sized for a packet whose centre sweeps `extent` (per-axis
    /// `(min, max)`) with momenta up to `max_momentum`.
    ///
    /// The margin is `max(10 √ε r, 2)` for envelope radius `r`; the spacing
    /// satisfies `h ≤ ε π / (4 |ξ|max + p_disp)`, giving at least eight
    /// points per local wavelength.
    pub fn for_packet(
        extent: &[(f64, f64)],
        max_momentum: f64,
        epsilon: f64,
        envelope_radius: f64,
        policy: &GridPolicy,
    ) -> Result<Self> {
        let margin = (policy.margin_factor * epsilon.sqrt() * envelope_radius).max(policy.margin_floor);
        let h_max = epsilon * PI / (4.0 * max_momentum + policy.dispersion_allowance);
        let axes = extent
            .iter()
            .map(|&(lo, hi)| {
                let left = lo - margin;
                let length = hi - lo + 2.0 * margin;
                let n = ((length / h_max).ceil() as usize).max(16).next_power_of_two();
                Axis::new(left, length, n * policy.refine.max(1))
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::new(axes)
    }
}

/// Knobs of the ε-dependent grid sizing rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPolicy {
    /// `p_disp` in `h ≤ ε π / (4 |ξ|max + p_disp)`.
    pub dispersion_allowance: f64,
    pub margin_factor: f64,
    pub margin_floor: f64,
    /// Extra power-of-two refinement factor (2 for self-checks).
    pub refine: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy { dispersion_allowance: 10.0, margin_factor: 10.0, margin_floor: 2.0, refine: 1 }
    }
}

/// FFT plans for one grid. Transforms act in place on row-major data.
pub struct Spectral {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
    scratch: Vec<C64>,
    column: Vec<C64>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let shape: Vec<usize> = grid.axes().iter().map(|a| a.points).collect();
        let fwd: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv: Vec<_> = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = fwd
            .iter()
            .chain(&inv)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Spectral {
            wavenumbers: grid.axes().iter().map(|a| a.wavenumbers()).collect(),
            column: vec![C64::default(); shape[0]],
            scratch: vec![C64::default(); scratch_len],
            shape,
            fwd,
            inv,
        }
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    fn transform(&mut self, data: &mut [C64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        match self.shape.len() {
            1 => plans[0].process_with_scratch(data, &mut self.scratch),
            _ => {
                let (n0, n1) = (self.shape[0], self.shape[1]);
                plans[1].process_with_scratch(data, &mut self.scratch);
                for j in 0..n1 {
                    for i in 0..n0 {
                        self.column[i] = data[i * n1 + j];
                    }
                    plans[0].process_with_scratch(&mut self.column, &mut self.scratch);
                    for i in 0..n0 {
                        data[i * n1 + j] = self.column[i];
                    }
                }
            }
        }
    }

    /// Unnormalised forward DFT.
    pub fn forward(&mut self, data: &mut [C64]) {
        self.transform(data, false);
    }

    /// Inverse DFT including the `1/N` factor.
    pub fn inverse(&mut self, data: &mut [C64]) {
        self.transform(data, true);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// `∂f/∂x_axis` by Fourier multiplication; the Nyquist mode is dropped.
    pub fn derivative(&mut self, values: &[C64], axis: usize) -> Vec<C64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        let n_axis = self.shape[axis];
        let stride_inner = if self.shape.len() == 2 && axis == 0 { self.shape[1] } else { 1 };
        for (flat, v) in buf.iter_mut().enumerate() {
            let m = if self.shape.len() == 2 && axis == 1 {
                flat % self.shape[1]
            } else {
                (flat / stride_inner) % n_axis
            };
            let k = if m == n_axis / 2 { 0.0 } else { self.wavenumbers[axis][m] };
            *v *= C64::new(0.0, k);
        }
        self.inverse(&mut buf);
        buf
    }

    /// Applies `exp(-i · scale · |k|²)` in Fourier space.
    pub fn kinetic_multiplier(&self, scale: f64) -> Vec<C64> {
        let total: usize = self.shape.iter().product();
        (0..total)
            .map(|flat| {
                let k2 = match self.shape.len() {
                    1 => self.wavenumbers[0][flat].powi(2),
                    _ => {
                        let n1 = self.shape[1];
                        self.wavenumbers[0][flat / n1].powi(2) + self.wavenumbers[1][flat % n1].powi(2)
                    }
                };
                C64::from_polar(1.0, -scale * k2)
            })
            .collect()
    }
}

/// Complex samples on a grid together with the semiclassical parameter the
/// field belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub values: Vec<C64>,
    pub epsilon: f64,
}

/// `(‖f‖, ‖f‖_{Σ_ε}, ‖f‖_ℋ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTriple {
    pub l2: f64,
    pub sigma_eps: f64,
    pub h_norm: f64,
}

fn l2(values: &[C64], cell: f64) -> f64 {
    (cell * values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

impl WaveField {
    pub fn zeros(grid: Grid, epsilon: f64) -> Self {
        let n = grid.len();
        WaveField { grid, values: vec![C64::default(); n], epsilon }
    }

    pub fn from_fn(grid: Grid, epsilon: f64, f: impl FnMut(&[f64]) -> C64) -> Self {
        let d = grid.dim();
        let pts = grid.points();
        let values = pts.chunks(d).map(f).collect();
        WaveField { grid, values, epsilon }
    }

    pub fn norm_l2(&self) -> f64 {
        l2(&self.values, self.grid.cell_volume())
    }

    pub fn mass(&self) -> f64 {
        self.norm_l2().powi(2)
    }

    /// `∫ conj(self) · other`.
    pub fn inner(&self, other: &WaveField) -> C64 {
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn check_same_grid(&self, other: &WaveField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::config("fields live on different grids"));
        }
        Ok(())
    }

    pub fn sub(&self, other: &WaveField) -> Result<WaveField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(WaveField { grid: self.grid.clone(), values, epsilon: self.epsilon })
    }

    pub fn add(&self, other: &WaveField) -> Result<WaveField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(WaveField { grid: self.grid.clone(), values, epsilon: self.epsilon })
    }

    pub fn scaled(&self, c: C64) -> WaveField {
        WaveField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            epsilon: self.epsilon,
        }
    }

    fn with_values(&self, values: Vec<C64>) -> WaveField {
        WaveField { grid: self.grid.clone(), values, epsilon: self.epsilon }
    }

    /// Fraction of the mass sitting within [`GUARD_CELLS`] of any edge.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let shape: Vec<usize> = self.grid.axes().iter().map(|a| a.points).collect();
        let near = |i: usize, n: usize| i < GUARD_CELLS || i >= n - GUARD_CELLS;
        let edge: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(flat, _)| {
                let idx = self.grid.unflatten(*flat);
                (0..shape.len()).any(|ax| near(idx[ax], shape[ax]))
            })
            .map(|(_, v)| v.norm_sqr())
            .sum();
        edge / total
    }

    /// Errors with [`Error::BoundaryMass`] when the guard trips.
    pub fn check_boundary(&self, t: f64) -> Result<()> {
        let fraction = self.boundary_mass_fraction();
        if fraction > GUARD_FRACTION {
            return Err(Error::BoundaryMass { t, fraction });
        }
        Ok(())
    }

    /// Spectral gradient, one component per axis.
    pub fn gradient(&self) -> Vec<Vec<C64>> {
        let mut sp = Spectral::new(&self.grid);
        (0..self.grid.dim()).map(|ax| sp.derivative(&self.values, ax)).collect()
    }

    /// `A^ε(t) f`, one component per axis.
    pub fn apply_a(&self, t: f64, traj: &Trajectory) -> Result<Vec<WaveField>> {
        Error::check_dim(traj.dim(), self.grid.dim())?;
        let state = traj.state_at(t)?;
        let se = self.epsilon.sqrt();
        Ok(self
            .gradient()
            .into_iter()
            .zip(&state.xi)
            .map(|(g, xi)| {
                let phase = C64::new(0.0, xi / se);
                let v = g.iter().zip(&self.values).map(|(g, f)| se * g - phase * f).collect();
                self.with_values(v)
            })
            .collect())
    }

    /// `B^ε(t) f`, one component per axis.
    pub fn apply_b(&self, t: f64, traj: &Trajectory) -> Result<Vec<WaveField>> {
        Error::check_dim(traj.dim(), self.grid.dim())?;
        let state = traj.state_at(t)?;
        let se = self.epsilon.sqrt();
        let d = self.grid.dim();
        let pts = self.grid.points();
        Ok((0..d)
            .map(|ax| {
                let v = self
                    .values
                    .iter()
                    .zip(pts.chunks(d))
                    .map(|(f, x)| f * ((x[ax] - state.x[ax]) / se))
                    .collect();
                self.with_values(v)
            })
            .collect())
    }

    /// `‖ε∇f‖` (Euclidean over components).
    pub fn eps_gradient_norm(&self) -> f64 {
        let cell = self.grid.cell_volume();
        self.gradient()
            .iter()
            .map(|g| (self.epsilon * l2(g, cell)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖ |x| f ‖`.
    pub fn position_weighted_norm(&self) -> f64 {
        let d = self.grid.dim();
        let pts = self.grid.points();
        let s: f64 = self
            .values
            .iter()
            .zip(pts.chunks(d))
            .map(|(f, x)| f.norm_sqr() * x.iter().map(|c| c * c).sum::<f64>())
            .sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// `‖f‖ + ‖ε∇f‖ + ‖xf‖`; frame-free, used for two-packet runs.
    pub fn sigma_eps_norm(&self) -> f64 {
        self.norm_l2() + self.eps_gradient_norm() + self.position_weighted_norm()
    }

    pub fn norm_triple(&self, t: f64, traj: &Trajectory) -> Result<NormTriple> {
        let cell = self.grid.cell_volume();
        let stack = |parts: Vec<WaveField>| {
            parts.iter().map(|p| l2(&p.values, cell).powi(2)).sum::<f64>().sqrt()
        };
        let l2n = self.norm_l2();
        let a = stack(self.apply_a(t, traj)?);
        let b = stack(self.apply_b(t, traj)?);
        Ok(NormTriple { l2: l2n, sigma_eps: self.sigma_eps_norm(), h_norm: l2n + a + b })
    }

    /// Binary snapshot: little-endian `u64` d, `u64` N per axis, `f64`
    /// (left, right) per axis, `f64` ε, then interleaved `f64` re/im in
    /// row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.grid.dim() as u64).to_le_bytes())?;
        for a in self.grid.axes() {
            w.write_all(&(a.points as u64).to_le_bytes())?;
        }
        for a in self.grid.axes() {
            w.write_all(&a.left.to_le_bytes())?;
            w.write_all(&a.right().to_le_bytes())?;
        }
        w.write_all(&self.epsilon.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<WaveField> {
        fn u64_le<R: Read>(r: &mut R) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64_le<R: Read>(r: &mut R) -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        }
        let d = u64_le(&mut r)? as usize;
        if !(1..=2).contains(&d) {
            return Err(Error::config(format!("snapshot has unsupported dimension {d}")));
        }
        let counts = (0..d).map(|_| u64_le(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
        let mut axes = Vec::with_capacity(d);
        for n in counts {
            let left = f64_le(&mut r)?;
            let right = f64_le(&mut r)?;
            axes.push(Axis::spanning(left, right, n)?);
        }
        let epsilon = f64_le(&mut r)?;
        let grid = Grid::new(axes)?;
        let values = (0..grid.len())
            .map(|_| Ok(C64::new(f64_le(&mut r)?, f64_le(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(WaveField { grid, values, epsilon })
    }

    /// One-dimensional CSV: `x,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.grid.dim() != 1 {
            return Err(Error::config("CSV snapshots are one-dimensional only"));
        }
        writeln!(w, "x,re,im")?;
        for (x, v) in self.grid.axis(0).coords().iter().zip(&self.values) {
            writeln!(w, "{x:.12e},{:.12e},{:.12e}", v.re, v.im)?;
        }
        Ok(())
    }
}
