//! For a harmonic potential the wave-packet ansatz is exact, so the error
//! against the full solver is pure discretisation.
//!
//! cargo run --release --example quadratic_exactness

use std::f64::consts::PI;

use ehrenfest_lab::experiments::{compare_single, uniform_times};
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let cfg = SimConfig::new(1e-2, 1, 1, 1.0, None)?.with_horizon(2.0 * PI);
    let spec = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let report = compare_single(&cfg, &PotentialSpec::harmonic(1.0), &spec, &uniform_times(cfg.horizon, 16))?;
    report.write_csv(std::io::stdout())?;
    println!("sup_t ||psi - phi|| = {:.3e}", report.sup_l2());
    Ok(())
}
