//! Two packets with different energies crossing each other: the sum of two
//! independent envelope approximations still converges in `Σ_ε`.
//!
//! cargo run --release --example superposition

use ehrenfest_lab::experiments::{sweep_superposition, uniform_times};
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let cfg = SimConfig::new(1e-2, 1, 1, 1.0, None)?;
    let v = PotentialSpec::harmonic_plus_cosine();
    let first = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let second = PacketSpec::gaussian(vec![-1.0], vec![2.0]);
    let r = sweep_superposition(&cfg, &v, &first, &second, &[4e-2, 1e-2, 2.5e-3], &uniform_times(1.0, 20), false)?;
    r.write_csv(std::io::stdout())?;
    println!("Σ_ε slope {:.3}, pass {}", r.slope, r.passed);
    Ok(())
}
