use nalgebra::DMatrix;
use proptest::prelude::*;

use turing_crn::crn::{jacobian, vector_field, Reaction, ReactionNetwork, Stoich};
use turing_crn::models::{mapk_base, MAPK_SPECIES};

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..10.0_f64, n)
}

/// Small random networks with stoichiometries up to 2.
fn random_network() -> impl Strategy<Value = ReactionNetwork> {
    (2usize..=5, 1usize..=7).prop_flat_map(|(n, r)| {
        let side = prop::collection::vec((0..n, 0u32..=2), 0..=2);
        (
            Just(n),
            prop::collection::vec((side.clone(), side), r),
            positive_vec(r),
            positive_vec(n),
        )
            .prop_filter_map("empty reaction", |(n, sides, k, d)| {
                let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                let reactions: Vec<Reaction> = sides
                    .iter()
                    .enumerate()
                    .map(|(j, (a, b))| Reaction::new(j, a, b))
                    .collect();
                ReactionNetwork::new(&names, reactions, k, d).ok()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conservation_kills_vector_field(net in random_network(), seed in positive_vec(5)) {
        let st = Stoich::build(&net);
        let c = &seed[..net.n_species()];
        let f = vector_field(&net, &st, c).unwrap();
        let zf = st.conservation.transpose() * nalgebra::DVector::from_column_slice(&f);
        let scale = f.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for v in zf.iter() {
            prop_assert!(v.abs() <= 1e-10 * scale, "Z^T f = {v}");
        }
    }

    #[test]
    fn rank_plus_kernel_is_n(net in random_network()) {
        let st = Stoich::build(&net);
        prop_assert_eq!(st.rank + st.n_conserved(), net.n_species());
        let zg = st.conservation.transpose() * st.gamma_f64();
        prop_assert!(zg.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn jacobian_matches_central_differences(net in random_network(), seed in positive_vec(5)) {
        let st = Stoich::build(&net);
        let n = net.n_species();
        let c = &seed[..n];
        let jac = jacobian(&net, &st, c).unwrap();
        let mut fd = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * c[k].max(1e-3);
            let mut up = c.to_vec();
            let mut dn = c.to_vec();
            up[k] += h;
            dn[k] -= h;
            let fu = vector_field(&net, &st, &up).unwrap();
            let fl = vector_field(&net, &st, &dn).unwrap();
            for i in 0..n {
                fd[(i, k)] = (fu[i] - fl[i]) / (2.0 * h);
            }
        }
        let scale = jac.amax().max(1.0);
        prop_assert!((jac - fd).amax() <= 1e-6 * scale);
    }

    #[test]
    fn mapk_conservation_on_random_states(c in positive_vec(9), k3 in 0.1..10.0_f64) {
        let net = mapk_base(k3);
        let st = Stoich::build(&net);
        let f = vector_field(&net, &st, &c).unwrap();
        let zf = st.conservation.transpose() * nalgebra::DVector::from_column_slice(&f);
        prop_assert!(zf.amax() <= 1e-10);
    }
}

#[test]
fn mapk_stoichiometry_shape() {
    let st = Stoich::build(&mapk_base(4.0));
    assert_eq!(st.gamma.shape(), (9, 12));
    assert_eq!(st.rank, 6);
    assert_eq!(st.n_conserved(), 3);
    let ztz = st.conservation.transpose() * &st.conservation;
    assert!((ztz - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
}

#[test]
fn network_json_round_trip() {
    let net = mapk_base(4.0);
    let back = ReactionNetwork::from_json(&net.to_json()).unwrap();
    assert_eq!(back.k, net.k);
    assert_eq!(back.d, net.d);
    assert_eq!(Stoich::build(&back).gamma, Stoich::build(&net).gamma);
    assert_eq!(back.species_index("S2F"), MAPK_SPECIES.iter().position(|&s| s == "S2F"));
}

#[test]
fn network_json_rejects_missing_diffusion() {
    let doc = r#"{"species": ["A", "B"], "reactions": [{"reactants": {"A": 1}, "products": {"B": 1}, "k": 1.0}], "diffusion": {"A": 1.0}}"#;
    assert!(ReactionNetwork::from_json(doc).is_err());
}

#[test]
fn network_rejects_nonpositive_rates() {
    let r = vec![Reaction::new(0, &[(0, 1)], &[(1, 1)])];
    assert!(ReactionNetwork::new(&["A", "B"], r, vec![0.0], vec![1.0, 1.0]).is_err());
}
