//! Breakdown time of the single-packet approximation on a short ε ladder.
//!
//! cargo run --release --example ehrenfest
//!
//! The full ladder down to ε = 1e-3 is in configs/ehrenfest.toml.

use ehrenfest_lab::experiments::ehrenfest_study;
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let cfg = SimConfig::new(0.1, 1, 1, 1.0, None)?;
    let spec = PacketSpec::gaussian(vec![3.0], vec![0.0]);
    let v = PotentialSpec::harmonic_plus_cosine();
    let report = ehrenfest_study(&cfg, &v, &spec, 0.1, &[0.1, 0.05, 0.025], 20.0, 0.05, false)?;
    report.write_csv(std::io::stdout())?;
    println!(
        "slope {:.3}, relative residual {:.3}, increasing {}",
        report.slope, report.relative_residual, report.strictly_increasing
    );
    Ok(())
}
