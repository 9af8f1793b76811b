use proptest::prelude::*;

use turing_crn::crn::{vector_field, Stoich};
use turing_crn::models::{mapk_base, mapk_base_k, mapk_dd, MAPK_BASE_D};
use turing_crn::param::{
    check_instability_condition, linearize, mapk_a6, xi1_threshold, MonomialParam,
};
use turing_crn::{Error, Tolerances};

const MAPK_PSI_JSON: &str = r#"{
  "psi": [
    "1", "1", "k1/(k2+k3)",
    "k1*k3*(k11+k12)/(k10*k12*(k2+k3))",
    "k1*k3*k4*(k11+k12)/(k10*k12*(k2+k3)*(k5+k6))",
    "k1*k3*k4*k6*(k11+k12)*(k8+k9)/(k10*k12*k7*k9*(k2+k3)*(k5+k6))",
    "1",
    "k1*k3*k4*k6*(k11+k12)/(k10*k12*k9*(k2+k3)*(k5+k6))",
    "k1*k3/(k12*(k2+k3))"
  ],
  "A": [
    [1, 0, 1, 1, 1, 1, 0, 1, 1],
    [0, 1, 1, 1, 2, 2, 0, 2, 1],
    [0, 0, 0, -1, -1, -2, 1, -1, 0]
  ]
}"#;

#[test]
fn eval_example_values() {
    let mp = MonomialParam::mapk();
    let c = mp.cbar(&mapk_base_k(4.0), &[1.0, 1.0, 2.0]).unwrap();
    assert_eq!(c[0], 1.0);
    assert_eq!(c[1], 1.0);
    assert_eq!(c[6], 2.0);
    assert!((c[2] - 1.0 / 4.3).abs() < 1e-15);
}

#[test]
fn unit_xi_gives_psi() {
    let mp = MonomialParam::mapk();
    let k = mapk_base_k(3.0);
    assert_eq!(mp.cbar(&k, &[1.0; 3]).unwrap(), mp.psi(&k).unwrap());
}

#[test]
fn doubling_xi1_scales_row_one() {
    let mp = MonomialParam::mapk();
    let k = mapk_base_k(4.0);
    let a = mp.cbar(&k, &[1.3, 0.7, 1.9]).unwrap();
    let b = mp.cbar(&k, &[2.6, 0.7, 1.9]).unwrap();
    for (j, (x, y)) in a.iter().zip(&b).enumerate() {
        let factor = if j == 1 || j == 6 { 1.0 } else { 2.0 };
        assert!((y / x - factor).abs() < 1e-14, "species {j}");
    }
}

#[test]
fn parsed_parametrization_matches_builtin() {
    let parsed = MonomialParam::from_json(MAPK_PSI_JSON).unwrap();
    let builtin = MonomialParam::mapk();
    let k = vec![1.1, 0.3, 4.0, 4.2, 1.6, 1.0, 0.1, 2.2, 0.5, 0.5, 0.8, 1.3];
    let xi = [0.7, 1.4, 2.1];
    let a = parsed.cbar(&k, &xi).unwrap();
    let b = builtin.cbar(&k, &xi).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-14 * y.abs());
    }
}

#[test]
fn inconsistent_parametrization_is_rejected() {
    let broken = MAPK_PSI_JSON.replace("\"k1/(k2+k3)\"", "\"2*k1/(k2+k3)\"");
    let mp = MonomialParam::from_json(&broken).unwrap();
    let net = mapk_base(4.0);
    let st = Stoich::build(&net);
    let err = mp.eval(&net, &st, &[1.0, 1.0, 1.0], &Tolerances::default()).unwrap_err();
    assert!(matches!(err, Error::SteadyStateResidual { .. }), "{err:?}");
}

#[test]
fn xi1_threshold_zeroes_a6() {
    let tol = Tolerances::default();
    let k = mapk_base_k(4.0);
    let xb = xi1_threshold(&k, &MAPK_BASE_D, 1.0, 1.0, &tol).unwrap();

    // Independent bracket: bisection on the sign of a6 alone.
    let (mut lo, mut hi) = (1e-3, 1e3);
    for _ in 0..200 {
        let mid = f64::sqrt(lo * hi);
        if mapk_a6(&k, &MAPK_BASE_D, [mid, 1.0, 1.0], &tol).unwrap() < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((xb - lo).abs() <= 1e-8 * xb, "{xb} vs {lo}");
    // The base point ξ₁ = 2 is long-wave unstable at k₃ = 4.
    assert!(xb < 2.0);
}

#[test]
fn xi1_threshold_requires_condition() {
    let tol = Tolerances::default();
    let err = xi1_threshold(&mapk_base_k(9.0), &MAPK_BASE_D, 1.0, 1.0, &tol).unwrap_err();
    assert!(matches!(err, Error::ConditionNotSatisfied(_)));
}

fn single_sign_change(k: &[f64], d: &[f64], xi2: f64, xi3: f64) -> Result<(), TestCaseError> {
    let tol = Tolerances::default();
    let xb = xi1_threshold(k, d, xi2, xi3, &tol).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let n = 61;
    let signs: Vec<bool> = (0..n)
        .map(|i| {
            let x = xb * 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64);
            mapk_a6(k, d, [x, xi2, xi3], &tol).unwrap() > 0.0
        })
        .collect();
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    prop_assert_eq!(changes, 1);
    prop_assert!(!signs[0] && signs[n - 1]);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steady_state_residual_is_small(
        k in prop::collection::vec(0.05..10.0_f64, 12),
        xi in prop::collection::vec(0.05..10.0_f64, 3),
    ) {
        let net = mapk_dd(&k, &MAPK_BASE_D).unwrap();
        let st = Stoich::build(&net);
        let ss = MonomialParam::mapk().eval(&net, &st, &xi, &Tolerances::default()).unwrap();
        prop_assert!(ss.residual <= 1e-9);
        let f = vector_field(&net, &st, &ss.cbar).unwrap();
        let scale = ss.cbar.iter().fold(0.0_f64, |m, v| m.max(*v)) * k.iter().fold(0.0_f64, |m, v| m.max(*v));
        prop_assert!(f.iter().all(|v| v.abs() <= 1e-9 * scale.max(1.0)));
    }

    #[test]
    fn instability_condition_ignores_d_scale(
        k3 in 0.1..12.0_f64,
        d in prop::collection::vec(0.01..5.0_f64, 9),
        s in 1e-3..1e3_f64,
    ) {
        let k = mapk_base_k(k3);
        let scaled: Vec<f64> = d.iter().map(|v| v * s).collect();
        let a = check_instability_condition(&k, &d).unwrap();
        let b = check_instability_condition(&k, &scaled).unwrap();
        prop_assert_eq!(a.holds, b.holds);
    }

    #[test]
    fn a6_changes_sign_once(k3 in 0.3..7.5_f64, xi2 in 0.3..3.0_f64, xi3 in 0.3..3.0_f64) {
        single_sign_change(&mapk_base_k(k3), &MAPK_BASE_D, xi2, xi3)?;
    }
}

#[test]
fn a6_changes_sign_once_on_base_set() {
    single_sign_change(&mapk_base_k(4.0), &MAPK_BASE_D, 1.0, 1.0).unwrap();
}

#[test]
fn linearization_carries_steady_state() {
    let tol = Tolerances::default();
    let lin = linearize(&mapk_base(4.0), &MonomialParam::mapk(), &[2.0, 1.0, 1.0], &tol).unwrap();
    assert_eq!(lin.jacobian.shape(), (9, 9));
    assert_eq!(lin.stoich.rank, 6);
    assert!(lin.steady.residual <= 1e-9);
}
