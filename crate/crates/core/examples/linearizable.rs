//! Above the critical exponent the linear envelope suffices; the error rate
//! is `min(1/2, α - α_c)`.
//!
//! cargo run --release --example linearizable

use ehrenfest_lab::experiments::{sweep_epsilon, uniform_times};
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let spec = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let v = PotentialSpec::harmonic_plus_cosine();
    for alpha in [1.75, 2.5] {
        let cfg = SimConfig::new(1e-2, 1, 1, 1.0, Some(alpha))?;
        let r = sweep_epsilon(&cfg, &v, &spec, &[4e-2, 1e-2, 2.5e-3], &uniform_times(1.0, 20), false)?;
        println!("alpha = {alpha}: errors {:.4?} slope {:.3} (expected {})", r.errors, r.slope, r.expected_slope);
    }
    Ok(())
}
