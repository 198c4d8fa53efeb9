mod common;

use common::*;
use ehrenfest_lab::config::parse_config;
use ehrenfest_lab::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn potential(which: u8) -> PotentialSpec {
    match which {
        0 => PotentialSpec::harmonic(1.0),
        1 => PotentialSpec::cosine(1.0, 1.0),
        _ => PotentialSpec::harmonic_plus_cosine(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn short_runs_conserve_mass(
        x0 in -1.0..1.0f64, xi0 in -1.0..1.0f64, eps in 0.02..0.1f64, which in 0u8..3, nonlinear in any::<bool>(),
    ) {
        let cfg = SimConfig::new(eps, 1, 1, if nonlinear { 1.0 } else { 0.0 }, None).unwrap().with_horizon(0.2);
        let spec = PacketSpec::gaussian(vec![x0], vec![xi0]);
        let psi0 = initial(&cfg, &spec, 1.5).unwrap();
        let out = propagate_nls(&cfg, &potential(which), &psi0, &[0.1, 0.2]).unwrap();
        for f in out {
            prop_assert!((f.mass() - psi0.mass()).abs() <= 1e-12 * psi0.mass());
        }
    }

    #[test]
    fn phase_rotation_commutes_with_propagation(theta in 0.0..std::f64::consts::TAU, eps in 0.03..0.1f64) {
        let cfg = SimConfig::new(eps, 1, 1, 1.0, None).unwrap().with_horizon(0.1);
        let spec = PacketSpec::gaussian(vec![0.5], vec![0.5]);
        let rot = C64::from_polar(1.0, theta);
        let psi0 = initial(&cfg, &spec, 1.0).unwrap();
        let rotated = WaveField { values: psi0.values.iter().map(|v| v * rot).collect(), ..psi0.clone() };
        let p = PotentialSpec::harmonic_plus_cosine();
        let a = &propagate_nls(&cfg, &p, &psi0, &[0.1]).unwrap()[0];
        let b = &propagate_nls(&cfg, &p, &rotated, &[0.1]).unwrap()[0];
        prop_assert!(b.sub(&a.scaled(rot)).unwrap().norm_l2() < 1e-12);
    }

    #[test]
    fn trajectory_energy_is_conserved_at_default_step(
        x0 in -3.0..3.0f64, xi0 in -2.0..2.0f64, horizon in 1.0..10.0f64, which in 0u8..3, eps in 0.001..0.1f64,
    ) {
        let cfg = SimConfig::new(eps, 1, 1, 1.0, None).unwrap();
        let traj = integrate_flow(&potential(which), &[x0], &[xi0], horizon, cfg.flow_dt()).unwrap();
        prop_assert!(traj.max_energy_drift() <= 1e-6, "{}", traj.max_energy_drift());
    }

    #[test]
    fn gauge_identity_holds_on_grid_modes(
        x0 in -1.0..1.0f64, mode in -200i32..200, xi_t in -2.0..2.0f64,
    ) {
        let r = gauge_residual(0.01, x0, mode, xi_t).unwrap();
        prop_assert!(r <= 1e-10, "{r}");
    }

    #[test]
    fn zero_coupling_envelope_matches_linear_bitwise(x0 in -2.0..2.0f64, xi0 in -1.0..1.0f64) {
        let cfg = SimConfig::new(0.05, 1, 1, 1.0, None).unwrap();
        let spec = PacketSpec::gaussian(vec![x0], vec![xi0]);
        let a = spec.envelope_field(&cfg).unwrap();
        let traj = integrate_flow(&PotentialSpec::harmonic_plus_cosine(), &[x0], &[xi0], 0.5, 1e-3).unwrap();
        let times = [0.25, 0.5];
        let lin = propagate_envelope_linear(&a, &traj, &times, 1e-3).unwrap();
        let non = propagate_envelope_nonlinear(&a, &traj, 0.0, 1, &times, 1e-3).unwrap();
        for (l, n) in lin.snapshots.iter().zip(&non.snapshots) {
            prop_assert!(l.values == n.values);
        }
    }

    #[test]
    fn time_reversal_recovers_initial_data(x0 in -1.0..1.0f64, xi0 in -1.0..1.0f64, which in 0u8..3) {
        let cfg = SimConfig::new(0.05, 1, 1, 1.0, None).unwrap().with_horizon(0.3).with_dt(0.01);
        let psi0 = initial(&cfg, &PacketSpec::gaussian(vec![x0], vec![xi0]), 1.5).unwrap();
        let (back, one_way) = time_reversal(&cfg, &potential(which), &psi0, 0.3).unwrap();
        prop_assert!(back <= 10.0 * one_way, "{back} vs {one_way}");
    }

    #[test]
    fn crossing_set_matches_dense_sampling(
        a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64, gamma in 0.1..0.45f64,
    ) {
        let (eps, horizon, dt) = (0.01, 6.0, 1e-3);
        let p = PotentialSpec::harmonic(1.0);
        let t1 = integrate_flow(&p, &[a], &[b], horizon, dt).unwrap();
        let t2 = integrate_flow(&p, &[c], &[d], horizon, dt).unwrap();
        let set = crossing_set(&t1, &t2, gamma, eps, horizon).unwrap();
        let dist = |t: f64| (harmonic_x(a, b, t) - harmonic_x(c, d, t)).abs();
        let oracle = dense_crossings(dist, eps.powf(gamma), horizon, 600_000);
        // tangential touches can be seen by one sampler only; skip those
        let robust = oracle.iter().all(|(s, e)| e - s > 4.0 * dt) && set.intervals.iter().all(|(s, e)| e - s > 4.0 * dt);
        if robust {
            prop_assert_eq!(set.intervals.len(), oracle.len());
            for ((s, e), (so, eo)) in set.intervals.iter().zip(&oracle) {
                prop_assert!((s - so).abs() <= dt && (e - eo).abs() <= dt, "{:?} vs {:?}", (s, e), (so, eo));
            }
        }
        let rev = crossing_set(&t2, &t1, gamma, eps, horizon).unwrap();
        prop_assert_eq!(rev.intervals, set.intervals);
    }

    #[test]
    fn config_round_trips(eps in 0.001..0.5f64, x0 in -3.0..3.0f64, xi0 in -3.0..3.0f64, delta in 0.01..0.9f64) {
        let text = format!(
            "[sim]\nepsilon = {eps}\n\n[potential]\nkind = \"harmonic\"\nomega = 1.0\n\n[packet.1]\nx0 = {x0}\nxi0 = {xi0}\n\n[experiment]\ndelta = {delta}\n"
        );
        let parsed = parse_config(&text).unwrap();
        let again = parse_config(&parsed.file.to_toml()).unwrap();
        prop_assert_eq!(again.file, parsed.file);
    }
}
