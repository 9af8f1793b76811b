//! Built-in models.
//!
//! `mapk-dd` is the distributive double-phosphorylation network
//!
//! ```text
//! S0 + K ⇌ S0K → S1 + K ⇌ S1K → S2 + K
//! S2 + F ⇌ S2F → S1 + F ⇌ S1F → S0 + F
//! ```
//!
//! with species ordered `(S0, K, S0K, S1, S1K, S2, F, S2F, S1F)` and
//! reactions ordered so that reaction `j` uses rate constant `k_{j+1}`.

use crate::crn::{Reaction, ReactionNetwork};
use crate::error::{Error, Result};
use crate::param::MonomialParam;

pub const MAPK_DD: &str = "mapk-dd";

pub const MAPK_SPECIES: [&str; 9] = ["S0", "K", "S0K", "S1", "S1K", "S2", "F", "S2F", "S1F"];

/// Base diffusion coefficients `d₁ … d₉`.
pub const MAPK_BASE_D: [f64; 9] = [0.1, 0.3, 2.0, 0.4, 0.5, 0.02, 0.8, 0.5, 0.5];

/// Base rate constants `k₁ … k₁₂` with `k₃` left as the bifurcation parameter
/// (stored here as 1.0 and overwritten by [`mapk_base_k`]).
const MAPK_BASE_K_TEMPLATE: [f64; 12] = [1.0, 0.3, 1.0, 4.2, 1.6, 1.0, 0.1, 2.2, 0.5, 0.5, 0.8, 1.0];

/// Free parameters `(ξ₁, ξ₂, ξ₃) = (c₁, c₂, c₇)` of the base homogeneous
/// steady state used throughout the numerical examples.
pub const MAPK_BASE_XI: [f64; 3] = [2.0, 1.0, 1.0];

/// Base rate constants for a given `k₃`.
pub fn mapk_base_k(k3: f64) -> Vec<f64> {
    let mut k = MAPK_BASE_K_TEMPLATE.to_vec();
    k[2] = k3;
    k
}

/// Base rate constants with the `k₉ = 1` variant, where the primary loss of
/// stability is oscillatory.
pub fn mapk_variant_k(k3: f64) -> Vec<f64> {
    let mut k = mapk_base_k(k3);
    k[8] = 1.0;
    k
}

fn mapk_reactions() -> Vec<Reaction> {
    const S0: usize = 0;
    const K: usize = 1;
    const S0K: usize = 2;
    const S1: usize = 3;
    const S1K: usize = 4;
    const S2: usize = 5;
    const F: usize = 6;
    const S2F: usize = 7;
    const S1F: usize = 8;
    let table: [(&[(usize, u32)], &[(usize, u32)]); 12] = [
        (&[(S0, 1), (K, 1)], &[(S0K, 1)]),
        (&[(S0K, 1)], &[(S0, 1), (K, 1)]),
        (&[(S0K, 1)], &[(S1, 1), (K, 1)]),
        (&[(S1, 1), (K, 1)], &[(S1K, 1)]),
        (&[(S1K, 1)], &[(S1, 1), (K, 1)]),
        (&[(S1K, 1)], &[(S2, 1), (K, 1)]),
        (&[(S2, 1), (F, 1)], &[(S2F, 1)]),
        (&[(S2F, 1)], &[(S2, 1), (F, 1)]),
        (&[(S2F, 1)], &[(S1, 1), (F, 1)]),
        (&[(S1, 1), (F, 1)], &[(S1F, 1)]),
        (&[(S1F, 1)], &[(S1, 1), (F, 1)]),
        (&[(S1F, 1)], &[(S0, 1), (F, 1)]),
    ];
    table
        .iter()
        .enumerate()
        .map(|(j, (re, pr))| Reaction::new(j, re, pr))
        .collect()
}

/// The double-phosphorylation network with the given `k` (length 12) and
/// `d` (length 9).
pub fn mapk_dd(k: &[f64], d: &[f64]) -> Result<ReactionNetwork> {
    if k.len() != 12 {
        return Err(Error::Dimension {
            what: "k",
            got: k.len(),
            expected: 12,
        });
    }
    if d.len() != 9 {
        return Err(Error::Dimension {
            what: "d",
            got: d.len(),
            expected: 9,
        });
    }
    ReactionNetwork::new(&MAPK_SPECIES, mapk_reactions(), k.to_vec(), d.to_vec())
}

/// Base-parameter network for a given `k₃`.
pub fn mapk_base(k3: f64) -> ReactionNetwork {
    mapk_dd(&mapk_base_k(k3), &MAPK_BASE_D).expect("base parameters are valid")
}

/// `k₉ = 1` variant network for a given `k₃`.
pub fn mapk_variant(k3: f64) -> ReactionNetwork {
    mapk_dd(&mapk_variant_k(k3), &MAPK_BASE_D).expect("variant parameters are valid")
}

/// A named built-in model: its network and monomial parametrization.
#[derive(Debug, Clone)]
pub struct BuiltinModel {
    pub network: ReactionNetwork,
    pub param: MonomialParam,
}

pub fn builtin_names() -> &'static [&'static str] {
    &[MAPK_DD]
}

/// Looks up a built-in model by name and instantiates it with `k` and `d`.
pub fn builtin(name: &str, k: &[f64], d: &[f64]) -> Result<BuiltinModel> {
    match name {
        MAPK_DD => Ok(BuiltinModel {
            network: mapk_dd(k, d)?,
            param: MonomialParam::mapk(),
        }),
        other => Err(Error::InvalidParameter(format!("unknown built-in model `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_sets() {
        let k = mapk_base_k(4.0);
        assert_eq!(k[2], 4.0);
        assert_eq!(k[8], 0.5);
        assert_eq!(mapk_variant_k(4.0)[8], 1.0);
        assert!(mapk_dd(&k[..11], &MAPK_BASE_D).is_err());
        assert!(mapk_dd(&k, &MAPK_BASE_D[..8]).is_err());
        assert!(builtin("nope", &k, &MAPK_BASE_D).is_err());
        assert!(builtin(MAPK_DD, &k, &MAPK_BASE_D).is_ok());
    }
}
