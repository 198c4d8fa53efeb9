//! Full-equation propagation of a Gaussian packet; prints mass and the
//! position of the density peak.
//!
//! cargo run --release --example propagate

use ehrenfest_lab::{build_initial, Grid, NlsPropagator, PacketSpec, PotentialSpec, SimConfig};

fn main() -> ehrenfest_lab::Result<()> {
    let cfg = SimConfig::new(0.02, 1, 1, 1.0, None)?.with_horizon(2.0);
    let v = PotentialSpec::harmonic_plus_cosine();
    let spec = PacketSpec::gaussian(vec![1.0], vec![0.0]);
    let radius = spec.envelope_radius(&cfg)?;
    let grid = Grid::for_packet(&[(-1.0, 1.0)], 1.0, cfg.epsilon, radius, &cfg.grid)?;
    println!("grid: {} points on [{:.2}, {:.2}]", grid.len(), grid.axis(0).left, grid.axis(0).right());

    let psi0 = build_initial(&spec, &cfg, &grid)?;
    let mass0 = psi0.mass();
    let mut prop = NlsPropagator::new(&cfg, &v, psi0)?;
    let xs = grid.axis(0).coords();
    for k in 1..=4 {
        let t = 0.5 * k as f64;
        prop.advance_to(t)?;
        let f = prop.field();
        let (peak, _) = f.values.iter().enumerate().fold((0, 0.0), |best, (i, z)| {
            if z.norm_sqr() > best.1 {
                (i, z.norm_sqr())
            } else {
                best
            }
        });
        println!("t = {t:.1}  peak at x = {:+.4}  mass drift {:.1e}", xs[peak], (f.mass() - mass0) / mass0);
    }
    Ok(())
}
