//! Mass-action reaction networks.
//!
//! A [`ReactionNetwork`] holds species, irreversible reactions, rate constants
//! `k` and diffusion coefficients `d`. [`Stoich`] carries the stoichiometric
//! matrix Γ, its rank and an orthonormal basis of its left null space (the
//! conservation laws). Rates, the vector field `Γ r(k, c)` and its analytic
//! Jacobian are free functions over these.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Species {
    pub index: usize,
    pub name: String,
}

/// An irreversible mass-action reaction. Stoichiometries are stored as
/// `(species index, coefficient)` pairs with nonzero coefficients only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub rate_constant_index: usize,
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
}

impl Reaction {
    pub fn new(rate_constant_index: usize, reactants: &[(usize, u32)], products: &[(usize, u32)]) -> Self {
        let clean = |v: &[(usize, u32)]| {
            let mut m: BTreeMap<usize, u32> = BTreeMap::new();
            for &(i, s) in v {
                *m.entry(i).or_default() += s;
            }
            m.into_iter().filter(|&(_, s)| s > 0).collect::<Vec<_>>()
        };
        Reaction {
            rate_constant_index,
            reactants: clean(reactants),
            products: clean(products),
        }
    }

    pub fn reactant_stoich(&self, species: usize) -> u32 {
        self.reactants
            .iter()
            .find(|&&(i, _)| i == species)
            .map_or(0, |&(_, s)| s)
    }

    pub fn product_stoich(&self, species: usize) -> u32 {
        self.products
            .iter()
            .find(|&&(i, _)| i == species)
            .map_or(0, |&(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    pub k: Vec<f64>,
    pub d: Vec<f64>,
}

impl ReactionNetwork {
    /// Builds and validates a network. Species are indexed in the given order.
    pub fn new(species: &[&str], reactions: Vec<Reaction>, k: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let species = species
            .iter()
            .enumerate()
            .map(|(index, name)| Species {
                index,
                name: name.to_string(),
            })
            .collect();
        let net = ReactionNetwork {
            species,
            reactions,
            k,
            d,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.species.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("no species".into()));
        }
        let mut seen = HashMap::new();
        for (i, s) in self.species.iter().enumerate() {
            if s.index != i {
                return Err(Error::InvalidNetwork(format!(
                    "species `{}` has index {} at position {i}",
                    s.name, s.index
                )));
            }
            if seen.insert(s.name.as_str(), i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate species name `{}`", s.name)));
            }
        }
        if self.d.len() != n {
            return Err(Error::Dimension {
                what: "d",
                got: self.d.len(),
                expected: n,
            });
        }
        if self.k.len() != self.reactions.len() {
            return Err(Error::Dimension {
                what: "k",
                got: self.k.len(),
                expected: self.reactions.len(),
            });
        }
        if let Some((i, v)) = self.k.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidNetwork(format!("k[{i}] = {v} is not positive")));
        }
        if let Some((i, v)) = self.d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidNetwork(format!("d[{i}] = {v} is not positive")));
        }
        for (j, r) in self.reactions.iter().enumerate() {
            if r.reactants.is_empty() && r.products.is_empty() {
                return Err(Error::InvalidNetwork(format!("reaction {j} is empty")));
            }
            if r.rate_constant_index >= self.k.len() {
                return Err(Error::InvalidNetwork(format!(
                    "reaction {j} refers to rate constant {}",
                    r.rate_constant_index
                )));
            }
            if let Some(&(i, _)) = r.reactants.iter().chain(&r.products).find(|&&(i, _)| i >= n) {
                return Err(Error::InvalidNetwork(format!("reaction {j} refers to species {i}")));
            }
        }
        Ok(())
    }

    /// Copy of the network with new rate constants.
    pub fn with_k(&self, k: Vec<f64>) -> Result<Self> {
        let net = ReactionNetwork { k, ..self.clone() };
        net.validate()?;
        Ok(net)
    }

    /// Copy of the network with new diffusion coefficients.
    pub fn with_d(&self, d: Vec<f64>) -> Result<Self> {
        let net = ReactionNetwork { d, ..self.clone() };
        net.validate()?;
        Ok(net)
    }

    pub fn diffusion_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.d.clone()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_network()
    }

    pub fn to_json(&self) -> String {
        let name = |i: usize| self.species[i].name.clone();
        let doc = NetworkDoc {
            format: Some(1),
            species: self.species.iter().map(|s| s.name.clone()).collect(),
            reactions: self
                .reactions
                .iter()
                .map(|r| ReactionDoc {
                    reactants: r.reactants.iter().map(|&(i, s)| (name(i), s)).collect(),
                    products: r.products.iter().map(|&(i, s)| (name(i), s)).collect(),
                    k: self.k[r.rate_constant_index],
                })
                .collect(),
            diffusion: self
                .species
                .iter()
                .map(|s| (s.name.clone(), self.d[s.index]))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("network serializes")
    }
}

/// On-disk network document, `format: 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    #[serde(default)]
    format: Option<u32>,
    species: Vec<String>,
    reactions: Vec<ReactionDoc>,
    diffusion: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionDoc {
    #[serde(default)]
    reactants: BTreeMap<String, u32>,
    #[serde(default)]
    products: BTreeMap<String, u32>,
    k: f64,
}

impl NetworkDoc {
    fn into_network(self) -> Result<ReactionNetwork> {
        if let Some(f) = self.format {
            if f != 1 {
                return Err(Error::Parse(format!("unsupported network format {f}")));
            }
        }
        let names: Vec<&str> = self.species.iter().map(String::as_str).collect();
        let lookup = |name: &str| {
            names
                .iter()
                .position(|&s| s == name)
                .ok_or_else(|| Error::InvalidNetwork(format!("unknown species `{name}`")))
        };
        let mut reactions = Vec::with_capacity(self.reactions.len());
        let mut k = Vec::with_capacity(self.reactions.len());
        for (j, r) in self.reactions.iter().enumerate() {
            let reactants = r
                .reactants
                .iter()
                .map(|(s, &v)| Ok((lookup(s)?, v)))
                .collect::<Result<Vec<_>>>()?;
            let products = r
                .products
                .iter()
                .map(|(s, &v)| Ok((lookup(s)?, v)))
                .collect::<Result<Vec<_>>>()?;
            reactions.push(Reaction::new(j, &reactants, &products));
            k.push(r.k);
        }
        if let Some(extra) = self.diffusion.keys().find(|s| !names.contains(&s.as_str())) {
            return Err(Error::InvalidNetwork(format!("diffusion given for unknown species `{extra}`")));
        }
        let d = names
            .iter()
            .map(|s| {
                self.diffusion
                    .get(*s)
                    .copied()
                    .ok_or_else(|| Error::InvalidNetwork(format!("missing diffusion coefficient for `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        ReactionNetwork::new(&names, reactions, k, d)
    }
}

/// Stoichiometric data derived from a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Stoich {
    /// n×r integer matrix, column j = products − reactants of reaction j.
    pub gamma: DMatrix<i64>,
    pub rank: usize,
    /// n×(n−rank) orthonormal basis of the left null space of Γ.
    pub conservation: DMatrix<f64>,
}

impl Stoich {
    pub fn build(net: &ReactionNetwork) -> Self {
        Self::build_with(net, &Tolerances::default())
    }

    pub fn build_with(net: &ReactionNetwork, tol: &Tolerances) -> Self {
        let n = net.n_species();
        let r = net.n_reactions();
        let gamma = DMatrix::from_fn(n, r, |i, j| {
            let rx = &net.reactions[j];
            i64::from(rx.product_stoich(i)) - i64::from(rx.reactant_stoich(i))
        });

        // Pad with zero columns so the thin SVD returns a square U.
        let cols = r.max(n);
        let padded = DMatrix::from_fn(n, cols, |i, j| if j < r { gamma[(i, j)] as f64 } else { 0.0 });
        let svd = padded.svd(true, false);
        let u = svd.u.expect("U requested");
        let sigma_max = svd.singular_values.max();
        let cut = tol.rank_rel * sigma_max;
        let mut null_cols = Vec::new();
        let mut rank = 0;
        for (idx, &s) in svd.singular_values.iter().enumerate() {
            if sigma_max > 0.0 && s > cut {
                rank += 1;
            } else {
                null_cols.push(u.column(idx).into_owned());
            }
        }
        let conservation = if null_cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        Stoich {
            gamma,
            rank,
            conservation,
        }
    }

    pub fn n_conserved(&self) -> usize {
        self.conservation.ncols()
    }

    pub fn gamma_f64(&self) -> DMatrix<f64> {
        self.gamma.map(|v| v as f64)
    }

    /// Conserved quantities `Zᵀ c`.
    pub fn masses(&self, c: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(c);
        (self.conservation.transpose() * c).iter().copied().collect()
    }
}

fn check_nonnegative(c: &[f64]) -> Result<()> {
    match c.iter().enumerate().find(|(_, v)| **v < 0.0 || v.is_nan()) {
        Some((index, &value)) => Err(Error::NegativeConcentration { index, value }),
        None => Ok(()),
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension { what, got, expected });
    }
    Ok(())
}

/// Mass-action rates `r_j = k_j · Π_i c_i^{ν_ij}`.
pub fn rates(net: &ReactionNetwork, c: &[f64]) -> Result<Vec<f64>> {
    check_len("c", c.len(), net.n_species())?;
    check_nonnegative(c)?;
    Ok(rates_unchecked(net, c))
}

pub(crate) fn rates_unchecked(net: &ReactionNetwork, c: &[f64]) -> Vec<f64> {
    net.reactions
        .iter()
        .map(|rx| {
            rx.reactants
                .iter()
                .fold(net.k[rx.rate_constant_index], |acc, &(i, s)| acc * c[i].powi(s as i32))
        })
        .collect()
}

/// `Γ r(k, c)`.
pub fn vector_field(net: &ReactionNetwork, stoich: &Stoich, c: &[f64]) -> Result<Vec<f64>> {
    let r = rates(net, c)?;
    let mut f = vec![0.0; net.n_species()];
    accumulate_field(stoich, &r, &mut f);
    Ok(f)
}

pub(crate) fn accumulate_field(stoich: &Stoich, r: &[f64], f: &mut [f64]) {
    for (j, rj) in r.iter().enumerate() {
        for (i, fi) in f.iter_mut().enumerate() {
            let g = stoich.gamma[(i, j)];
            if g != 0 {
                *fi += g as f64 * rj;
            }
        }
    }
}

/// Analytic Jacobian `Γ · ∂r/∂c`. A reactant with stoichiometry 1 contributes
/// `∂(c_i)/∂c_i = 1` even at `c_i = 0`.
pub fn jacobian(net: &ReactionNetwork, stoich: &Stoich, c: &[f64]) -> Result<DMatrix<f64>> {
    check_len("c", c.len(), net.n_species())?;
    check_nonnegative(c)?;
    let n = net.n_species();
    let r = net.n_reactions();
    let mut dr = DMatrix::zeros(r, n);
    for (j, rx) in net.reactions.iter().enumerate() {
        let kj = net.k[rx.rate_constant_index];
        for (a, &(i, s)) in rx.reactants.iter().enumerate() {
            let mut v = kj * f64::from(s) * c[i].powi(s as i32 - 1);
            for (b, &(l, sl)) in rx.reactants.iter().enumerate() {
                if a != b {
                    v *= c[l].powi(sl as i32);
                }
            }
            dr[(j, i)] = v;
        }
    }
    Ok(stoich.gamma_f64() * dr)
}
