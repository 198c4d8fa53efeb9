//! Growth of the envelope momenta `M_k(t)` along a trajectory.
//!
//! cargo run --release --example envelope_momenta

use ehrenfest_lab::experiments::{envelope_momenta, uniform_times};
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let cfg = SimConfig::new(1e-2, 1, 1, 1.0, None)?.with_horizon(8.0);
    let spec = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let series = envelope_momenta(&cfg, &PotentialSpec::harmonic_plus_cosine(), &spec, &uniform_times(8.0, 16), 2)?;
    series.write_csv(std::io::stdout())?;
    println!("fitted growth rate of M_2: {:.4}", series.rate);
    Ok(())
}
