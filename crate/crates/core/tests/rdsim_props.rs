use std::f64::consts::PI;

use proptest::prelude::*;

use turing_crn::crn::{vector_field, Reaction, ReactionNetwork, Stoich};
use turing_crn::models::{mapk_base, MAPK_BASE_XI};
use turing_crn::param::{linearize, MonomialParam};
use turing_crn::rdsim::{
    growth_rate, make_ic, Grid1D, InitialCondition, SimConfig, SimState, Simulator,
};
use turing_crn::Tolerances;

fn inert(d: f64) -> ReactionNetwork {
    // A → A leaves Γ = 0, so the reaction term vanishes identically.
    ReactionNetwork::new(&["A"], vec![Reaction::new(0, &[(0, 1)], &[(0, 1)])], vec![1.0], vec![d]).unwrap()
}

fn autocatalytic(lambda: f64, d: f64) -> ReactionNetwork {
    ReactionNetwork::new(&["A"], vec![Reaction::new(0, &[(0, 1)], &[(0, 2)])], vec![lambda], vec![d]).unwrap()
}

/// Schnakenberg kinetics `u' = a − u + u²v`, `v' = b − u²v` as a mass-action network.
fn schnakenberg() -> ReactionNetwork {
    let reactions = vec![
        Reaction::new(0, &[], &[(0, 1)]),
        Reaction::new(1, &[(0, 1)], &[]),
        Reaction::new(2, &[], &[(1, 1)]),
        Reaction::new(3, &[(0, 2), (1, 1)], &[(0, 3)]),
    ];
    ReactionNetwork::new(&["U", "V"], reactions, vec![0.1, 1.0, 0.9, 1.0], vec![1.0, 40.0]).unwrap()
}

fn mapk_cbar(k3: f64) -> Vec<f64> {
    linearize(&mapk_base(k3), &MonomialParam::mapk(), &MAPK_BASE_XI, &Tolerances::default())
        .unwrap()
        .steady
        .cbar
}

#[test]
fn pure_diffusion_conserves_means_per_step() {
    let tol = Tolerances::default();
    let mut sim = Simulator::new(inert(0.7), Grid1D::new(3.0, 41).unwrap(), 0.05, &tol).unwrap();
    let c0 = make_ic(&sim, &[1.0], &InitialCondition::Random { amplitude: 0.5, seed: 7 }, false).unwrap();
    let m0 = sim.masses(&c0)[0];
    let mut state = SimState::new(c0);
    for _ in 0..1000 {
        sim.step(&mut state).unwrap();
        assert!((sim.masses(&state.c)[0] - m0).abs() <= 1e-13);
    }
}

#[test]
fn pure_diffusion_mode_decays_at_laplace_rate() {
    let tol = Tolerances::default();
    let d = 0.5;
    let grid = Grid1D::new(10.0, 401).unwrap();
    let mut sim = Simulator::new(inert(d), grid, 0.001, &tol).unwrap();
    let ic = InitialCondition::Cosine { ell: 1, amplitude: 1e-3, species: 0 };
    let mut state = SimState::new(make_ic(&sim, &[1.0], &ic, false).unwrap());
    let cfg = SimConfig { dt: 0.001, t_end: 20.0, log_every: 100 };
    let log = sim.run(&mut state, &cfg, &[1.0]).unwrap();
    let rate = growth_rate(&log.times(), &log.dist_l2(), 1.0).unwrap();
    let expected = -d * (PI / 10.0).powi(2);
    assert!(((rate - expected) / expected).abs() < 0.01, "{rate} vs {expected}");
}

#[test]
fn linear_growth_rate_is_recovered() {
    let tol = Tolerances::default();
    let lambda = 0.2;
    let mut sim = Simulator::new(autocatalytic(lambda, 1.0), Grid1D::new(5.0, 21).unwrap(), 0.001, &tol).unwrap();
    let mut state = SimState::new(vec![1e-4; 21]);
    let cfg = SimConfig { dt: 0.001, t_end: 40.0, log_every: 200 };
    let log = sim.run(&mut state, &cfg, &[0.0]).unwrap();
    let rate = growth_rate(&log.times(), &log.dist_l2(), 1.0).unwrap();
    assert!(((rate - lambda) / lambda).abs() < 0.01, "{rate}");
}

#[test]
fn homogeneous_data_stays_homogeneous_and_tracks_ode() {
    let tol = Tolerances::default();
    let net = mapk_base(4.0);
    let st = Stoich::build(&net);
    let c0: Vec<f64> = mapk_cbar(4.0).iter().enumerate().map(|(i, v)| v * (1.0 + 0.05 * (i as f64 - 4.0))).collect();
    let t_end: f64 = 2.0;

    // RK4 reference with a much finer step.
    let mut y = c0.clone();
    let h: f64 = 1e-4;
    let f = |c: &[f64]| vector_field(&net, &st, c).unwrap();
    for _ in 0..(t_end / h).round() as usize {
        let axpy = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let mut errors = Vec::new();
    for dt in [0.01, 0.005] {
        let grid = Grid1D::new(20.0, 51).unwrap();
        let mut sim = Simulator::new(net.clone(), grid, dt, &tol).unwrap();
        let mut state = SimState::new(c0.iter().flat_map(|&v| std::iter::repeat(v).take(51)).collect());
        for _ in 0..(t_end / dt).round() as usize {
            sim.step(&mut state).unwrap();
            for i in 0..9 {
                let s = state.species(&grid, i);
                let spread = s.iter().fold(0.0_f64, |m, v| m.max((v - s[0]).abs()));
                assert!(spread <= 1e-12 * s[0].abs().max(1.0), "species {i} spread {spread}");
            }
        }
        let err = (0..9).map(|i| (state.c[i * 51] - y[i]).abs()).fold(0.0, f64::max);
        errors.push(err);
    }
    // First order in dt.
    let ratio = errors[0] / errors[1];
    assert!(errors[0] < 1e-2 && (1.7..2.3).contains(&ratio), "{errors:?}");
}

#[test]
fn amplitude_zero_gives_cbar() {
    let tol = Tolerances::default();
    let cbar = mapk_cbar(4.0);
    let sim = Simulator::new(mapk_base(4.0), Grid1D::new(20.0, 21).unwrap(), 0.01, &tol).unwrap();
    for ic in [
        InitialCondition::Eigenmode { ell: 1, amplitude: 0.0, mask: None },
        InitialCondition::Cosine { ell: 1, amplitude: 0.0, species: 0 },
        InitialCondition::Random { amplitude: 0.0, seed: 1 },
    ] {
        let c = make_ic(&sim, &cbar, &ic, false).unwrap();
        for i in 0..9 {
            assert!(c[i * 21..(i + 1) * 21].iter().all(|&v| v == cbar[i]));
        }
    }
}

#[test]
fn cosine_perturbation_on_first_species() {
    let tol = Tolerances::default();
    let cbar = mapk_cbar(4.0);
    let grid = Grid1D::new(20.0, 201).unwrap();
    let sim = Simulator::new(mapk_base(4.0), grid, 0.01, &tol).unwrap();
    let ic = InitialCondition::Cosine { ell: 1, amplitude: 0.1, species: 0 };
    let c = make_ic(&sim, &cbar, &ic, false).unwrap();
    for (node, x) in grid.nodes().into_iter().enumerate() {
        assert!((c[node] - cbar[0] - 0.1 * (PI * x / 20.0).cos()).abs() < 1e-15);
        assert_eq!(c[201 + node], cbar[1]);
    }
}

#[test]
fn positivity_violation_is_reported() {
    let tol = Tolerances::default();
    let cbar = mapk_cbar(4.0);
    let sim = Simulator::new(mapk_base(4.0), Grid1D::new(20.0, 21).unwrap(), 0.01, &tol).unwrap();
    let ic = InitialCondition::Cosine { ell: 1, amplitude: 100.0, species: 0 };
    assert!(make_ic(&sim, &cbar, &ic, false).is_err());
}

#[test]
fn mapk_masses_drift_little_over_1e5_steps() {
    let tol = Tolerances::default();
    let cbar = mapk_cbar(4.0);
    let mut sim = Simulator::new(mapk_base(4.0), Grid1D::new(20.0, 51).unwrap(), 0.01, &tol).unwrap();
    let ic = InitialCondition::Random { amplitude: 1e-2, seed: 3 };
    let mut state = SimState::new(make_ic(&sim, &cbar, &ic, false).unwrap());
    let cfg = SimConfig { dt: 0.01, t_end: 1000.0, log_every: 5000 };
    let log = sim.run(&mut state, &cfg, &cbar).unwrap();
    assert_eq!(state.steps, 100_000);
    let scale = cbar.iter().fold(0.0_f64, |m, v| m.max(*v));
    assert!(log.max_mass_drift() / scale <= 1e-8, "{}", log.max_mass_drift());
}

/// Runs Schnakenberg from a fixed cosine bump to a steady pattern.
fn schnakenberg_pattern(n: usize) -> Vec<f64> {
    let tol = Tolerances::default();
    let grid = Grid1D::new(5.0, n).unwrap();
    let mut sim = Simulator::new(schnakenberg(), grid, 0.01, &tol).unwrap();
    let cbar = [1.0, 0.9];
    let ic = InitialCondition::Cosine { ell: 1, amplitude: 0.05, species: 0 };
    let mut state = SimState::new(make_ic(&sim, &cbar, &ic, false).unwrap());
    for _ in 0..400 {
        for _ in 0..1000 {
            sim.step(&mut state).unwrap();
        }
        if sim.residual(&state.c) < 1e-11 {
            return state.c;
        }
    }
    panic!("no steady pattern at N = {n}");
}

#[test]
fn steady_pattern_converges_at_second_order() {
    let fields: Vec<Vec<f64>> = [41, 81, 161].iter().map(|&n| schnakenberg_pattern(n)).collect();
    let coarse_diff = |a: &[f64], na: usize, b: &[f64], nb: usize| {
        let stride = (nb - 1) / (na - 1);
        (0..2)
            .flat_map(|s| (0..na).map(move |i| (s, i)))
            .map(|(s, i)| (a[s * na + i] - b[s * nb + i * stride]).abs())
            .fold(0.0, f64::max)
    };
    let e1 = coarse_diff(&fields[0], 41, &fields[1], 81);
    let e2 = coarse_diff(&fields[1], 81, &fields[2], 161);
    let amplitude = fields[2][..161].iter().fold(0.0_f64, |m, v| m.max((v - 1.0).abs()));
    assert!(amplitude > 0.1, "no pattern formed: {amplitude}");
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "order {order} (e1 {e1:e}, e2 {e2:e})");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mass_neutral_ic_keeps_masses(seed in any::<u64>(), amplitude in 1e-4..1e-2_f64) {
        let tol = Tolerances::default();
        let cbar = mapk_cbar(4.0);
        let sim = Simulator::new(mapk_base(4.0), Grid1D::new(20.0, 41).unwrap(), 0.01, &tol).unwrap();
        let c = make_ic(&sim, &cbar, &InitialCondition::Random { amplitude, seed }, true).unwrap();
        let flat: Vec<f64> = cbar.iter().flat_map(|&v| std::iter::repeat(v).take(41)).collect();
        let (m, mb) = (sim.masses(&c), sim.masses(&flat));
        for (a, b) in m.iter().zip(&mb) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn random_ic_is_reproducible(seed in any::<u64>()) {
        let tol = Tolerances::default();
        let cbar = mapk_cbar(4.0);
        let sim = Simulator::new(mapk_base(4.0), Grid1D::new(20.0, 21).unwrap(), 0.01, &tol).unwrap();
        let ic = InitialCondition::Random { amplitude: 1e-3, seed };
        prop_assert_eq!(make_ic(&sim, &cbar, &ic, false).unwrap(), make_ic(&sim, &cbar, &ic, false).unwrap());
    }
}
