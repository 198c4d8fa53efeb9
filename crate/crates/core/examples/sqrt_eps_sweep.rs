//! Bounded-time error at the critical exponent shrinks like √ε.
//!
//! cargo run --release --example sqrt_eps_sweep

use ehrenfest_lab::experiments::{sweep_epsilon, uniform_times};
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let cfg = SimConfig::new(1e-2, 1, 1, 1.0, None)?;
    let spec = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let v = PotentialSpec::harmonic_plus_cosine();
    let report = sweep_epsilon(&cfg, &v, &spec, &[4e-2, 1e-2, 2.5e-3], &uniform_times(1.0, 20), true)?;
    report.write_csv(std::io::stdout())?;
    println!("slope {:.3} (expected {}), residual {:.3}, pass {}", report.slope, report.expected_slope, report.max_residual, report.passed);
    Ok(())
}
