//! Size of the cross term of the cubic nonlinearity between two packets and
//! the near-crossing set of their trajectories.
//!
//! cargo run --release --example interaction

use ehrenfest_lab::experiments::interaction_run;
use ehrenfest_lab::{PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let v = PotentialSpec::harmonic_plus_cosine();
    let first = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let second = PacketSpec::gaussian(vec![-1.0], vec![2.0]);
    for eps in [4e-2, 1e-2, 2.5e-3] {
        let cfg = SimConfig::new(eps, 1, 1, 1.0, None)?;
        let s = interaction_run(&cfg, &v, &first, &second, 0.4)?;
        let peak = s.values.iter().copied().fold(0.0, f64::max);
        println!(
            "eps = {eps:.1e}: ∫(1/ε)|N_I| = {:.4e}, peak {:.3e}, crossing set {:?}",
            s.integral, peak, s.crossing.intervals
        );
    }
    Ok(())
}
