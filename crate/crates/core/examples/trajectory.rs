//! Classical trajectory in `V(x) = x²/2 + cos x` with action and energy.
//!
//! cargo run --release --example trajectory

use ehrenfest_lab::{integrate_flow, PotentialSpec};

fn main() -> ehrenfest_lab::Result<()> {
    let v = PotentialSpec::harmonic_plus_cosine();
    let traj = integrate_flow(&v, &[1.0], &[0.5], 10.0, 1e-3)?;

    for t in [0.0, 2.5, 5.0, 7.5, 10.0] {
        let s = traj.state_at(t)?;
        println!("t = {t:4.1}  x = {:+.6}  xi = {:+.6}  S = {:+.6}", s.x[0], s.xi[0], s.action);
    }
    println!("energy {:.6}, max drift {:.2e}", traj.energy0(), traj.max_energy_drift());

    let g = traj.growth_envelope();
    println!("|x| + |xi| <= {:.3} exp({:.3} t)", g.prefactor, g.rate);
    Ok(())
}
