pub mod cli;
pub mod config;
pub mod envelope;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod flow;
pub mod grid;
pub mod nls;
pub mod packet;
pub mod potential;

pub use envelope::{momenta_monitor, propagate_envelope_linear, propagate_envelope_nonlinear, EnvelopeRun, MomentaSeries};
pub use error::{Error, Result};
pub use flow::{crossing_set, integrate_flow, CrossingSet, Trajectory};
pub use grid::{Axis, Grid, GridPolicy, NormTriple, WaveField};
pub use nls::{critical_alpha, propagate_nls, NlsPropagator, SimConfig};
pub use packet::{build_initial, reconstruct, superpose, Envelope, PacketSpec};
pub use potential::{PotentialKind, PotentialSpec};
