//! Smooth subquadratic external potentials with closed-form derivatives.
//!
//! Every potential in the catalog has bounded second derivatives over the
//! whole space, which is what keeps classical trajectories growing at most
//! exponentially. Sums of catalog entries are allowed, so a trapped but
//! non-quadratic case such as `x²/2 + cos x` is one [`PotentialKind::Sum`].

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// One catalog entry. Vector parameters have one component per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialKind {
    Zero,
    /// `V(x) = E·x`
    Linear {
        #[serde(deserialize_with = "scalar_or_vec")]
        slope: Vec<f64>,
    },
    /// `V(x) = sign · Σ ω_j² x_j² / 2`; `sign = -1` is the inverted oscillator.
    Harmonic {
        #[serde(deserialize_with = "scalar_or_vec")]
        omega: Vec<f64>,
        #[serde(default = "positive")]
        sign: f64,
    },
    /// `V(x) = A cos(k·x)`
    Cosine {
        amplitude: f64,
        #[serde(deserialize_with = "scalar_or_vec")]
        wavenumber: Vec<f64>,
    },
    /// `V(x) = A exp(-|x - c|² / (2 w²))`
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(deserialize_with = "scalar_or_vec")]
        center: Vec<f64>,
    },
    Sum {
        terms: Vec<PotentialKind>,
    },
}

fn positive() -> f64 {
    1.0
}

pub(crate) fn scalar_or_vec<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

/// A validated potential of fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    kind: PotentialKind,
    dim: usize,
}

/// Value, gradient and row-major Hessian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config(format!("dimension must be 1 or 2, got {dim}")));
        }
        validate(&kind, dim)?;
        Ok(PotentialSpec { kind, dim })
    }

    pub fn zero(dim: usize) -> Self {
        PotentialSpec { kind: PotentialKind::Zero, dim }
    }

    /// Isotropic `ω² |x|² / 2` in one dimension.
    pub fn harmonic(omega: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::Harmonic { omega: vec![omega], sign: 1.0 },
            dim: 1,
        }
    }

    /// `-ω² x² / 2` in one dimension.
    pub fn inverted_harmonic(omega: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::Harmonic { omega: vec![omega], sign: -1.0 },
            dim: 1,
        }
    }

    pub fn cosine(amplitude: f64, wavenumber: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::Cosine { amplitude, wavenumber: vec![wavenumber] },
            dim: 1,
        }
    }

    /// `x²/2 + cos x`, the workhorse anharmonic trap in one dimension.
    pub fn harmonic_plus_cosine() -> Self {
        PotentialSpec {
            kind: PotentialKind::Sum {
                terms: vec![
                    PotentialKind::Harmonic { omega: vec![1.0], sign: 1.0 },
                    PotentialKind::Cosine { amplitude: 1.0, wavenumber: vec![1.0] },
                ],
            },
            dim: 1,
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `V + c`. The constant is carried as a cosine term of zero wavenumber.
    pub fn shifted(&self, c: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::Sum {
                terms: vec![
                    self.kind.clone(),
                    PotentialKind::Cosine { amplitude: c, wavenumber: vec![0.0; self.dim] },
                ],
            },
            dim: self.dim,
        }
    }

    /// True when the potential is a polynomial of degree at most two, in
    /// which case the third-order Taylor remainder vanishes identically.
    pub fn is_quadratic(&self) -> bool {
        fn quad(k: &PotentialKind) -> bool {
            match k {
                PotentialKind::Zero | PotentialKind::Linear { .. } | PotentialKind::Harmonic { .. } => {
                    true
                }
                PotentialKind::Cosine { amplitude, wavenumber } => {
                    *amplitude == 0.0 || wavenumber.iter().all(|k| *k == 0.0)
                }
                PotentialKind::GaussianBump { amplitude, .. } => *amplitude == 0.0,
                PotentialKind::Sum { terms } => terms.iter().all(quad),
            }
        }
        quad(&self.kind)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        value(&self.kind, x)
    }

    /// Adds `∇V(x)` into `out`, which is zeroed first.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        add_gradient(&self.kind, x, out);
    }

    /// Writes the row-major Hessian into `out` (length `d²`).
    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|h| *h = 0.0);
        add_hessian(&self.kind, x, self.dim, out);
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        Error::check_dim(self.dim, x.len())?;
        let mut gradient = vec![0.0; self.dim];
        let mut hessian = vec![0.0; self.dim * self.dim];
        self.gradient_into(x, &mut gradient);
        self.hessian_into(x, &mut hessian);
        Ok(Evaluation { value: self.value(x), gradient, hessian })
    }

    /// `V(x) - T₂(x, a)` where `T₂` is the second-order Taylor polynomial of
    /// `V` about `a`.
    pub fn taylor_remainder(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, x.len())?;
        Error::check_dim(self.dim, a.len())?;
        let d = self.dim;
        let ev = self.evaluate(a)?;
        let dx: Vec<f64> = x.iter().zip(a).map(|(x, a)| x - a).collect();
        let mut t2 = ev.value;
        for i in 0..d {
            t2 += ev.gradient[i] * dx[i];
            for j in 0..d {
                t2 += 0.5 * ev.hessian[i * d + j] * dx[i] * dx[j];
            }
        }
        Ok(self.value(x) - t2)
    }

    /// Upper bound on the spectral norm of `Hess V` over the whole space.
    pub fn hessian_bound(&self) -> f64 {
        hessian_bound(&self.kind)
    }
}

fn validate(kind: &PotentialKind, dim: usize) -> Result<()> {
    let check = |name: &str, v: &[f64]| -> Result<()> {
        if v.len() != dim {
            return Err(Error::config(format!(
                "potential parameter `{name}` has {} components, dimension is {dim}",
                v.len()
            )));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::config(format!("potential parameter `{name}` is not finite")));
        }
        Ok(())
    };
    match kind {
        PotentialKind::Zero => Ok(()),
        PotentialKind::Linear { slope } => check("slope", slope),
        PotentialKind::Harmonic { omega, sign } => {
            if *sign != 1.0 && *sign != -1.0 {
                return Err(Error::config("harmonic sign must be +1 or -1"));
            }
            check("omega", omega)
        }
        PotentialKind::Cosine { amplitude, wavenumber } => {
            if !amplitude.is_finite() {
                return Err(Error::config("cosine amplitude is not finite"));
            }
            check("wavenumber", wavenumber)
        }
        PotentialKind::GaussianBump { amplitude, width, center } => {
            if !amplitude.is_finite() || !(*width > 0.0 && width.is_finite()) {
                return Err(Error::config("gaussian_bump needs finite amplitude and positive width"));
            }
            check("center", center)
        }
        PotentialKind::Sum { terms } => terms.iter().try_for_each(|t| validate(t, dim)),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn value(kind: &PotentialKind, x: &[f64]) -> f64 {
    match kind {
        PotentialKind::Zero => 0.0,
        PotentialKind::Linear { slope } => dot(slope, x),
        PotentialKind::Harmonic { omega, sign } => {
            0.5 * sign * omega.iter().zip(x).map(|(w, x)| w * w * x * x).sum::<f64>()
        }
        PotentialKind::Cosine { amplitude, wavenumber } => amplitude * dot(wavenumber, x).cos(),
        PotentialKind::GaussianBump { amplitude, width, center } => {
            let r2: f64 = x.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        }
        PotentialKind::Sum { terms } => terms.iter().map(|t| value(t, x)).sum(),
    }
}

fn add_gradient(kind: &PotentialKind, x: &[f64], out: &mut [f64]) {
    match kind {
        PotentialKind::Zero => {}
        PotentialKind::Linear { slope } => {
            for (o, s) in out.iter_mut().zip(slope) {
                *o += s;
            }
        }
        PotentialKind::Harmonic { omega, sign } => {
            for ((o, w), x) in out.iter_mut().zip(omega).zip(x) {
                *o += sign * w * w * x;
            }
        }
        PotentialKind::Cosine { amplitude, wavenumber } => {
            let s = -amplitude * dot(wavenumber, x).sin();
            for (o, k) in out.iter_mut().zip(wavenumber) {
                *o += s * k;
            }
        }
        PotentialKind::GaussianBump { amplitude, width, center } => {
            let w2 = width * width;
            let r2: f64 = x.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
            let g = amplitude * (-r2 / (2.0 * w2)).exp();
            for ((o, x), c) in out.iter_mut().zip(x).zip(center) {
                *o -= g * (x - c) / w2;
            }
        }
        PotentialKind::Sum { terms } => terms.iter().for_each(|t| add_gradient(t, x, out)),
    }
}

fn add_hessian(kind: &PotentialKind, x: &[f64], d: usize, out: &mut [f64]) {
    match kind {
        PotentialKind::Zero | PotentialKind::Linear { .. } => {}
        PotentialKind::Harmonic { omega, sign } => {
            for (i, w) in omega.iter().enumerate() {
                out[i * d + i] += sign * w * w;
            }
        }
        PotentialKind::Cosine { amplitude, wavenumber } => {
            let c = -amplitude * dot(wavenumber, x).cos();
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] += c * wavenumber[i] * wavenumber[j];
                }
            }
        }
        PotentialKind::GaussianBump { amplitude, width, center } => {
            let w2 = width * width;
            let r2: f64 = x.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
            let g = amplitude * (-r2 / (2.0 * w2)).exp();
            for i in 0..d {
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    out[i * d + j] +=
                        g * ((x[i] - center[i]) * (x[j] - center[j]) / (w2 * w2) - delta / w2);
                }
            }
        }
        PotentialKind::Sum { terms } => terms.iter().for_each(|t| add_hessian(t, x, d, out)),
    }
}

fn hessian_bound(kind: &PotentialKind) -> f64 {
    match kind {
        PotentialKind::Zero | PotentialKind::Linear { .. } => 0.0,
        PotentialKind::Harmonic { omega, .. } => omega.iter().map(|w| w * w).fold(0.0, f64::max),
        PotentialKind::Cosine { amplitude, wavenumber } => amplitude.abs() * dot(wavenumber, wavenumber),
        // radial eigenvalue (s² - 1) e^{-s²/2} / w², transverse -e^{-s²/2} / w²; both peak at s = 0
        PotentialKind::GaussianBump { amplitude, width, .. } => amplitude.abs() / (width * width),
        PotentialKind::Sum { terms } => terms.iter().map(hessian_bound).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn catalog() -> Vec<PotentialSpec> {
        vec![
            PotentialSpec::zero(1),
            PotentialSpec::new(PotentialKind::Linear { slope: vec![0.7] }, 1).unwrap(),
            PotentialSpec::harmonic(1.3),
            PotentialSpec::inverted_harmonic(1.0),
            PotentialSpec::cosine(0.8, 1.7),
            PotentialSpec::new(
                PotentialKind::GaussianBump { amplitude: -1.5, width: 0.9, center: vec![0.4] },
                1,
            )
            .unwrap(),
            PotentialSpec::harmonic_plus_cosine(),
            PotentialSpec::new(
                PotentialKind::Sum {
                    terms: vec![
                        PotentialKind::Harmonic { omega: vec![1.0, 0.5], sign: 1.0 },
                        PotentialKind::Cosine { amplitude: 0.5, wavenumber: vec![1.0, -0.7] },
                        PotentialKind::GaussianBump {
                            amplitude: 2.0,
                            width: 1.2,
                            center: vec![0.3, -0.2],
                        },
                    ],
                },
                2,
            )
            .unwrap(),
        ]
    }

    // deterministic scatter over [-10, 10]^d
    fn points(d: usize, n: usize) -> Vec<Vec<f64>> {
        let mut s: u64 = 0x9e37_79b9_7f4a_7c15;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        };
        (0..n).map(|_| (0..d).map(|_| next()).collect()).collect()
    }

    #[test]
    fn closed_form_values() {
        let h = PotentialSpec::harmonic(1.0).evaluate(&[2.0]).unwrap();
        assert_eq!((h.value, h.gradient[0], h.hessian[0]), (2.0, 2.0, 1.0));

        let c = PotentialSpec::cosine(1.0, 1.0).evaluate(&[0.0]).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.gradient[0], 0.0);
        assert_eq!(c.hessian[0], -1.0);

        let z = PotentialSpec::zero(1).evaluate(&[3.7]).unwrap();
        assert_eq!((z.value, z.gradient[0], z.hessian[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = PotentialSpec::harmonic(1.0).evaluate(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 1, got: 2 }));
        assert!(PotentialSpec::new(PotentialKind::Linear { slope: vec![1.0] }, 2).is_err());
        assert!(PotentialSpec::new(PotentialKind::Zero, 3).is_err());
    }

    #[test]
    fn taylor_remainder_examples() {
        let h = PotentialSpec::harmonic(1.0);
        assert!(h.taylor_remainder(&[3.1], &[-0.4]).unwrap().abs() < 1e-12);
        let c = PotentialSpec::cosine(1.0, 1.0);
        let r = c.taylor_remainder(&[PI], &[0.0]).unwrap();
        assert!((r - (-1.0 - (1.0 - PI * PI / 2.0))).abs() < 1e-12);
        assert!((r - 2.93480).abs() < 1e-5);
        assert_eq!(PotentialSpec::zero(1).taylor_remainder(&[1.0], &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_kinds_have_zero_remainder() {
        for p in catalog().into_iter().filter(|p| p.is_quadratic()) {
            for (x, a) in points(p.dim(), 50).iter().zip(points(p.dim(), 51).iter().skip(1)) {
                let r = p.taylor_remainder(x, a).unwrap();
                assert!(r.abs() < 1e-10 * (1.0 + p.value(x).abs()), "{p:?}: {r}");
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        for p in catalog() {
            let d = p.dim();
            for x in points(d, 200) {
                let ev = p.evaluate(&x).unwrap();
                for i in 0..d {
                    let h = 1e-5;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
                    let scale = 1.0 + ev.gradient[i].abs();
                    assert!((fd - ev.gradient[i]).abs() < 1e-6 * scale, "{p:?} grad at {x:?}");

                    let gp = p.evaluate(&xp).unwrap().gradient;
                    let gm = p.evaluate(&xm).unwrap().gradient;
                    for j in 0..d {
                        let fd = (gp[j] - gm[j]) / (2.0 * h);
                        let exact = ev.hessian[j * d + i];
                        assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{p:?} hess");
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_bound_dominates_samples() {
        for p in catalog() {
            let d = p.dim();
            let bound = p.hessian_bound();
            let mut worst: f64 = 0.0;
            let mut pts = points(d, 10_000);
            // include points near the bump center where the curvature peaks
            pts.push(vec![0.4; d]);
            for x in pts {
                let h = p.evaluate(&x).unwrap().hessian;
                let norm = if d == 1 {
                    h[0].abs()
                } else {
                    // symmetric 2x2: largest |eigenvalue|
                    let (a, b, c) = (h[0], h[1], h[3]);
                    let mid = 0.5 * (a + c);
                    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                    (mid + rad).abs().max((mid - rad).abs())
                };
                worst = worst.max(norm);
            }
            assert!(bound >= worst - 1e-12, "{p:?}: bound {bound} < {worst}");
        }
    }

    #[test]
    fn remainder_is_cubically_small() {
        for p in catalog() {
            let d = p.dim();
            // third-derivative bound estimated by differencing the Hessian
            let mut c3: f64 = 0.0;
            for x in points(d, 2000) {
                for i in 0..d {
                    let h = 1e-4;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let hp = p.evaluate(&xp).unwrap().hessian;
                    let hm = p.evaluate(&xm).unwrap().hessian;
                    for k in 0..d * d {
                        c3 = c3.max(((hp[k] - hm[k]) / (2.0 * h)).abs());
                    }
                }
            }
            // the directional third derivative is bounded by d^{3/2} times the entrywise max
            let c3 = c3 * (d as f64).powf(1.5) * 1.05 + 1e-9;
            let xs = points(d, 300);
            for (x, a) in xs.iter().zip(xs.iter().rev()) {
                let r = p.taylor_remainder(x, a).unwrap();
                let dist: f64 = x.iter().zip(a).map(|(x, a)| (x - a) * (x - a)).sum::<f64>().sqrt();
                let scale = 1e-9 * (1.0 + p.value(x).abs() + p.value(a).abs());
                assert!(r.abs() <= c3 / 6.0 * dist.powi(3) + scale, "{p:?}");
            }
        }
    }

    #[test]
    fn tagged_record_round_trip() {
        let p = PotentialSpec::harmonic_plus_cosine();
        let text = toml::to_string(p.kind()).unwrap();
        let back: PotentialKind = toml::from_str(&text).unwrap();
        assert_eq!(&back, p.kind());

        let scalar: PotentialKind = toml::from_str("kind = \"harmonic\"\nomega = 2.0").unwrap();
        assert_eq!(scalar, PotentialKind::Harmonic { omega: vec![2.0], sign: 1.0 });
    }
}
