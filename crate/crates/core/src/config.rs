//! TOML run configuration with sections `[sim]`, `[potential]`,
//! `[packet.1]`, `[packet.2]` and `[experiment]`.
//!
//! ```toml
//! [sim]
//! epsilon = 0.01
//! alpha = "critical"
//! horizon = 6.283185307179586
//!
//! [potential]
//! kind = "harmonic"
//! omega = 1.0
//!
//! [packet.1]
//! x0 = 1.0
//! xi0 = 0.0
//! ```

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridPolicy;
use crate::nls::{critical_alpha, SimConfig};
use crate::packet::{Envelope, PacketSpec};
use crate::potential::{scalar_or_vec, PotentialKind, PotentialSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaName {
    Critical,
}

/// `alpha = "critical"` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Value(f64),
    Named(AlphaName),
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::Named(AlphaName::Critical)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub epsilon: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(default = "one_u32")]
    pub sigma: u32,
    #[serde(default = "one_f64")]
    pub lambda: f64,
    #[serde(default)]
    pub alpha: Alpha,
    #[serde(default = "one_f64")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_extent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_points: Option<usize>,
    #[serde(default)]
    pub dealias: bool,
    #[serde(default)]
    pub grid: GridPolicy,
}

fn one_usize() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    #[serde(default = "gaussian")]
    pub profile: ProfileName,
    #[serde(default = "one_f64")]
    pub width: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offset: Vec<f64>,
    #[serde(deserialize_with = "scalar_or_vec")]
    pub x0: Vec<f64>,
    #[serde(deserialize_with = "scalar_or_vec")]
    pub xi0: Vec<f64>,
    /// Real number or `[re, im]`.
    #[serde(default = "unit_amplitude", deserialize_with = "real_or_pair")]
    pub amplitude: [f64; 2],
}

fn gaussian() -> ProfileName {
    ProfileName::Gaussian
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

fn real_or_pair<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<[f64; 2], D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }
    Ok(match Repr::deserialize(de)? {
        Repr::Real(r) => [r, 0.0],
        Repr::Pair(p) => p,
    })
}

impl PacketSection {
    pub fn to_spec(&self) -> PacketSpec {
        PacketSpec {
            envelope: Envelope::Gaussian { width: self.width, offset: self.offset.clone() },
            x0: self.x0.clone(),
            xi0: self.xi0.clone(),
            amplitude: C64::new(self.amplitude[0], self.amplitude[1]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Strictly decreasing ε values for sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// Number of sample intervals on `[0, horizon]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_sample_step")]
    pub sample_step: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Rerun the smallest ε at `(dt/2, 2N)`; sweeps default to on,
    /// Ehrenfest studies to off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_check: Option<bool>,
    /// Optional pass threshold on the sup-in-time `L²` error of `compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn default_samples() -> usize {
    20
}

fn default_delta() -> f64 {
    0.1
}

fn default_sample_step() -> f64 {
    0.05
}

fn default_gamma() -> f64 {
    0.4
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            epsilons: None,
            samples: default_samples(),
            delta: default_delta(),
            t_max: None,
            sample_step: default_sample_step(),
            gamma: default_gamma(),
            self_check: None,
            tolerance: None,
        }
    }
}

/// The file as written, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sim: SimSection,
    pub potential: PotentialKind,
    pub packet: BTreeMap<String, PacketSection>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

/// Validated objects built from a [`ConfigFile`].
#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub file: ConfigFile,
    pub sim: SimConfig,
    pub potential: PotentialSpec,
    pub packets: Vec<PacketSpec>,
    pub experiment: ExperimentSection,
}

/// 1-based line of `key = …` inside `[section]`, else of the section header.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    header.unwrap_or(1)
}

fn parse_error(text: &str, section: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Parse { line: line_of(text, section, key), message: message.into() }
}

pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { line, message: e.message().to_string() }
    })?;
    validate(text, file)
}

fn validate(text: &str, file: ConfigFile) -> Result<ParsedConfig> {
    let s = &file.sim;
    let err = |key: &str, msg: String| parse_error(text, "sim", key, msg);
    if !(s.epsilon > 0.0 && s.epsilon < 1.0) {
        return Err(err("epsilon", format!("`epsilon` must lie in (0, 1), got {}", s.epsilon)));
    }
    if !(1..=2).contains(&s.dim) {
        return Err(err("dim", format!("`dim` must be 1 or 2, got {}", s.dim)));
    }
    if s.sigma < 1 {
        return Err(err("sigma", "`sigma` must be at least 1".to_string()));
    }
    let alpha_c = critical_alpha(s.dim, s.sigma);
    let alpha = match s.alpha {
        Alpha::Named(AlphaName::Critical) => alpha_c,
        Alpha::Value(a) if a >= alpha_c => a,
        Alpha::Value(a) => {
            return Err(err("alpha", format!("`alpha` = {a} is below the critical exponent {alpha_c}")));
        }
    };
    let mut sim = SimConfig::new(s.epsilon, s.dim, s.sigma, s.lambda, Some(alpha))
        .map_err(|e| parse_error(text, "sim", "", e.to_string()))?
        .with_horizon(s.horizon);
    if let Some(dt) = s.dt {
        sim = sim.with_dt(dt);
    }
    if let Some(v) = s.envelope_dt {
        sim.envelope_dt = v;
    }
    if let Some(v) = s.envelope_extent {
        sim.envelope_extent = v;
    }
    if let Some(v) = s.envelope_points {
        sim.envelope_points = v;
    }
    sim.dealias = s.dealias;
    sim.grid = s.grid;
    sim.validate().map_err(|e| parse_error(text, "sim", "", e.to_string()))?;

    let potential = PotentialSpec::new(file.potential.clone(), s.dim)
        .map_err(|e| parse_error(text, "potential", "", e.to_string()))?;

    if let Some(key) = file.packet.keys().find(|k| *k != "1" && *k != "2") {
        return Err(parse_error(text, &format!("packet.{key}"), "", format!("unknown packet `{key}`; use 1 or 2")));
    }
    if !file.packet.contains_key("1") {
        return Err(Error::Parse { line: 1, message: "missing section `[packet.1]`".to_string() });
    }
    let mut packets = Vec::new();
    for (key, section) in &file.packet {
        let spec = section.to_spec();
        spec.validate(s.dim).map_err(|e| parse_error(text, &format!("packet.{key}"), "", e.to_string()))?;
        packets.push(spec);
    }

    let x = &file.experiment;
    let xerr = |key: &str, msg: &str| parse_error(text, "experiment", key, msg.to_string());
    if !(x.delta > 0.0 && x.delta < 1.0) {
        return Err(xerr("delta", "`delta` must lie in (0, 1)"));
    }
    if !(x.gamma > 0.0 && x.gamma < 0.5) {
        return Err(xerr("gamma", "`gamma` must lie in (0, 1/2)"));
    }
    if x.samples == 0 {
        return Err(xerr("samples", "`samples` must be positive"));
    }
    if x.sample_step <= 0.0 {
        return Err(xerr("sample_step", "`sample_step` must be positive"));
    }
    if x.t_max.is_some_and(|t| t <= 0.0) {
        return Err(xerr("t_max", "`t_max` must be positive"));
    }
    if let Some(eps) = &x.epsilons {
        if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(xerr("epsilons", "`epsilons` must be strictly decreasing values in (0, 1)"));
        }
    }

    let experiment = file.experiment.clone();
    Ok(ParsedConfig { file, sim, potential, packets, experiment })
}

impl ConfigFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[sim]
epsilon = 0.01

[potential]
kind = "harmonic"
omega = 1.0

[packet.1]
x0 = 1.0
xi0 = 0.0
"#;

    #[test]
    fn minimal_config_resolves_critical_alpha() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.sim.alpha, 1.5);
        assert_eq!(c.sim.dim, 1);
        assert_eq!(c.packets.len(), 1);
        assert_eq!(c.packets[0].x0, vec![1.0]);
    }

    #[test]
    fn two_dimensional_critical_alpha() {
        let text = r#"
[sim]
epsilon = 0.05
dim = 2
sigma = 1
alpha = "critical"

[potential]
kind = "harmonic"
omega = [1.0, 1.0]

[packet.1]
x0 = [0.0, 0.0]
xi0 = [1.0, 0.0]
"#;
        assert_eq!(parse_config(text).unwrap().sim.alpha, 2.0);
    }

    #[test]
    fn missing_epsilon_is_named() {
        let text = MINIMAL.replace("epsilon = 0.01", "lambda = 1.0");
        match parse_config(&text) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("epsilon"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = MINIMAL.replace("epsilon = 0.01", "epsilon = 0.01\nsigma = 0");
        match parse_config(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("xi0 = 0.0", "xi0 = 0.0\ncolour = 3");
        match parse_config(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 12);
                assert!(message.contains("colour"));
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("epsilon = 0.01", "epsilon = 0.01\nalpha = 1.2");
        assert!(matches!(parse_config(&text), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn round_trip_is_identity() {
        let text = format!(
            "{MINIMAL}\n[packet.2]\nx0 = -1.0\nxi0 = 1.0\namplitude = [0.5, 0.5]\n\n[experiment]\nepsilons = [0.04, 0.01, 0.0025]\n"
        );
        let first = parse_config(&text).unwrap().file;
        let again = parse_config(&first.to_toml()).unwrap().file;
        assert_eq!(first, again);
        assert_eq!(first.packet["2"].amplitude, [0.5, 0.5]);
    }

    #[test]
    fn amplitude_accepts_real_numbers() {
        let text = MINIMAL.replace("xi0 = 0.0", "xi0 = 0.0\namplitude = 2.0");
        assert_eq!(parse_config(&text).unwrap().packets[0].amplitude, C64::new(2.0, 0.0));
    }
}
