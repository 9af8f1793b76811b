//! Monomial steady-state parametrizations `c̄ = ψ(k) ∘ ξ^A` and the scalar
//! conditions of the double-phosphorylation model.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::crn::{rates, vector_field, ReactionNetwork, Stoich};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::models::mapk_dd;
use crate::spectral::scaled_coefficients;
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub enum Psi {
    /// Closed-form coefficients of the built-in double-phosphorylation model.
    Mapk,
    Exprs(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialParam {
    pub psi: Psi,
    /// p×n exponent matrix: `(ξ^A)_j = Π_i ξ_i^{A_ij}`.
    pub exp_a: DMatrix<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    psi: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

/// `ψ(k)` of the built-in model, 0-based `k`.
fn mapk_psi(k: &[f64]) -> Vec<f64> {
    let [k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12] = k[..12].try_into().expect("12 rate constants");
    let s1 = k2 + k3;
    let s2 = k5 + k6;
    let s4 = k11 + k12;
    vec![
        1.0,
        1.0,
        k1 / s1,
        k1 * k3 * s4 / (k10 * k12 * s1),
        k1 * k3 * k4 * s4 / (k10 * k12 * s1 * s2),
        k1 * k3 * k4 * k6 * s4 * (k8 + k9) / (k10 * k12 * k7 * k9 * s1 * s2),
        1.0,
        k1 * k3 * k4 * k6 * s4 / (k10 * k12 * k9 * s1 * s2),
        k1 * k3 / (k12 * s1),
    ]
}

const MAPK_A: [[f64; 9]; 3] = [
    [1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0],
    [0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 0.0, 2.0, 1.0],
    [0.0, 0.0, 0.0, -1.0, -1.0, -2.0, 1.0, -1.0, 0.0],
];

impl MonomialParam {
    pub fn mapk() -> Self {
        MonomialParam {
            psi: Psi::Mapk,
            exp_a: DMatrix::from_fn(3, 9, |i, j| MAPK_A[i][j]),
        }
    }

    /// Parses `{"psi": ["k1/(k2+k3)", …], "A": [[…], …]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let psi = file.psi.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        let n = psi.len();
        let p = file.a.len();
        if p == 0 {
            return Err(Error::Parse("A must have at least one row".into()));
        }
        if let Some(row) = file.a.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                what: "A row",
                got: row.len(),
                expected: n,
            });
        }
        if file.a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse("A entries must be finite".into()));
        }
        Ok(MonomialParam {
            psi: Psi::Exprs(psi),
            exp_a: DMatrix::from_fn(p, n, |i, j| file.a[i][j]),
        })
    }

    pub fn n_free(&self) -> usize {
        self.exp_a.nrows()
    }

    pub fn n_species(&self) -> usize {
        self.exp_a.ncols()
    }

    pub fn psi(&self, k: &[f64]) -> Result<Vec<f64>> {
        let values = match &self.psi {
            Psi::Mapk => {
                if k.len() != 12 {
                    return Err(Error::Dimension {
                        what: "k",
                        got: k.len(),
                        expected: 12,
                    });
                }
                mapk_psi(k)
            }
            Psi::Exprs(exprs) => exprs.iter().map(|e| e.eval(k)).collect::<Result<Vec<_>>>()?,
        };
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!("psi[{j}] = {v} is not positive")));
        }
        Ok(values)
    }

    /// `ψ(k) ∘ ξ^A` without the steady-state check.
    pub fn cbar(&self, k: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.n_free() {
            return Err(Error::Dimension {
                what: "xi",
                got: xi.len(),
                expected: self.n_free(),
            });
        }
        if let Some((i, v)) = xi.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!("xi[{i}] = {v} must be positive")));
        }
        if k.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("rate constants must be positive".into()));
        }
        let psi = self.psi(k)?;
        Ok(psi
            .iter()
            .enumerate()
            .map(|(j, p)| {
                xi.iter()
                    .enumerate()
                    .fold(*p, |acc, (i, x)| acc * x.powf(self.exp_a[(i, j)]))
            })
            .collect())
    }

    /// Evaluates the parametrization on `net` and checks that the result is a
    /// steady state.
    pub fn eval(&self, net: &ReactionNetwork, stoich: &Stoich, xi: &[f64], tol: &Tolerances) -> Result<SteadyState> {
        if self.n_species() != net.n_species() {
            return Err(Error::Dimension {
                what: "parametrization species",
                got: self.n_species(),
                expected: net.n_species(),
            });
        }
        let cbar = self.cbar(&net.k, xi)?;
        let residual = steady_residual(net, stoich, &cbar)?;
        if !(residual <= tol.steady_residual_rel) {
            return Err(Error::SteadyStateResidual {
                residual,
                tol: tol.steady_residual_rel,
            });
        }
        Ok(SteadyState {
            cbar,
            k: net.k.clone(),
            xi: xi.to_vec(),
            residual,
        })
    }
}

/// Steady state and Jacobian of a network under a parametrization.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub stoich: Stoich,
    pub steady: SteadyState,
    pub jacobian: DMatrix<f64>,
}

pub fn linearize(net: &ReactionNetwork, mp: &MonomialParam, xi: &[f64], tol: &Tolerances) -> Result<Linearization> {
    let stoich = Stoich::build_with(net, tol);
    let steady = mp.eval(net, &stoich, xi, tol)?;
    let jacobian = crate::crn::jacobian(net, &stoich, &steady.cbar)?;
    Ok(Linearization {
        stoich,
        steady,
        jacobian,
    })
}

/// `‖Γ r(c)‖∞ / max_j r_j(c)`.
pub fn steady_residual(net: &ReactionNetwork, stoich: &Stoich, c: &[f64]) -> Result<f64> {
    let r = rates(net, c)?;
    let scale = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let f = vector_field(net, stoich, c)?;
    let num = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(if scale > 0.0 { num / scale } else { num })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub cbar: Vec<f64>,
    pub k: Vec<f64>,
    pub xi: Vec<f64>,
    /// Relative residual of the vector field at `cbar`.
    pub residual: f64,
}

fn check_mapk_lengths(k: &[f64], d: &[f64]) -> Result<()> {
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
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityCondition {
    pub holds: bool,
    /// `d₃d₈k₁₂k₆ − d₅d₉k₃k₉`.
    pub margin: f64,
}

/// `k₃k₉/(k₆k₁₂) < d₃d₈/(d₅d₉)`, in the sign form of the margin.
pub fn check_instability_condition(k: &[f64], d: &[f64]) -> Result<InstabilityCondition> {
    check_mapk_lengths(k, d)?;
    let margin = d[2] * d[7] * k[11] * k[5] - d[4] * d[8] * k[2] * k[8];
    Ok(InstabilityCondition {
        holds: margin > 0.0,
        margin,
    })
}

/// `k₃k₉ − k₁₂k₆ < 0`.
pub fn check_multistationarity_condition(k: &[f64]) -> Result<bool> {
    if k.len() != 12 {
        return Err(Error::Dimension {
            what: "k",
            got: k.len(),
            expected: 12,
        });
    }
    Ok(k[2] * k[8] - k[11] * k[5] < 0.0)
}

fn exact(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| Error::InvalidParameter(format!("{v} is not finite")))
}

/// Both sides of the instability condition in exact rational arithmetic,
/// built from the exact binary values of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRatios {
    /// `k₃k₉/(k₆k₁₂)`.
    pub rate_ratio: BigRational,
    /// `d₃d₈/(d₅d₉)`.
    pub diffusion_ratio: BigRational,
    /// Bound on `k₃` below which the condition holds: `d₃d₈k₆k₁₂/(d₅d₉k₉)`.
    pub k3_upper: BigRational,
}

impl ExactRatios {
    pub fn holds(&self) -> bool {
        self.rate_ratio < self.diffusion_ratio
    }
}

pub fn instability_ratios_exact(k: &[f64], d: &[f64]) -> Result<ExactRatios> {
    check_mapk_lengths(k, d)?;
    let e = |v: f64| exact(v);
    let (k3, k6, k9, k12) = (e(k[2])?, e(k[5])?, e(k[8])?, e(k[11])?);
    let (d3, d5, d8, d9) = (e(d[2])?, e(d[4])?, e(d[7])?, e(d[8])?);
    let zero = BigRational::from_integer(BigInt::zero());
    if [&k6, &k9, &k12, &d5, &d9].iter().any(|v| !v.is_positive()) || k3 < zero {
        return Err(Error::InvalidParameter("rate and diffusion constants must be positive".into()));
    }
    let diffusion_ratio = &d3 * &d8 / (&d5 * &d9);
    Ok(ExactRatios {
        rate_ratio: &k3 * &k9 / (&k6 * &k12),
        k3_upper: &diffusion_ratio * &k6 * &k12 / &k9,
        diffusion_ratio,
    })
}

/// `a₆` (the constant coefficient of the bracket) of the built-in model at
/// `ξ = (ξ₁, ξ₂, ξ₃)`.
pub fn mapk_a6(k: &[f64], d: &[f64], xi: [f64; 3], tol: &Tolerances) -> Result<f64> {
    let lin = linearize(&mapk_dd(k, d)?, &MonomialParam::mapk(), &xi, tol)?;
    Ok(scaled_coefficients(&lin.jacobian, d)?[lin.stoich.rank])
}

/// Unique positive `ξ̄₁` with `a₆(ξ̄₁) = 0` for fixed `ξ₂, ξ₃`.
pub fn xi1_threshold(k: &[f64], d: &[f64], xi2: f64, xi3: f64, tol: &Tolerances) -> Result<f64> {
    let cond = check_instability_condition(k, d)?;
    if !cond.holds {
        return Err(Error::ConditionNotSatisfied(cond.margin));
    }
    let a6 = |x: f64| mapk_a6(k, d, [x, xi2, xi3], tol);

    let mut centre = 1.0;
    let mut root = f64::NAN;
    let mut slope = f64::NAN;
    // Fit around a first guess, then refit around the estimate for accuracy.
    for _ in 0..2 {
        let xs = [0.5 * centre, centre, 2.0 * centre];
        let ys = [a6(xs[0])?, a6(xs[1])?, a6(xs[2])?];
        let (qa, qb, qc) = quadratic_through(xs, ys);
        if !(qa > 0.0) {
            return Err(Error::ConditionNotSatisfied(qa));
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if !(qc < 0.0) || disc < 0.0 {
            return Err(Error::NoPositiveRoot(format!(
                "fitted a6 = {qa:e} x² + {qb:e} x + {qc:e} has no unique positive root"
            )));
        }
        // Cancellation-free form of the positive root.
        root = if qb >= 0.0 {
            -2.0 * qc / (qb + disc.sqrt())
        } else {
            (-qb + disc.sqrt()) / (2.0 * qa)
        };
        slope = 2.0 * qa * root + qb;
        centre = root;
    }

    let mut x = root;
    let mut fx = a6(x)?;
    for _ in 0..4 {
        let cand = x - fx / slope;
        if !(cand > 0.0) {
            break;
        }
        let fc = a6(cand)?;
        if fc.abs() >= fx.abs() {
            break;
        }
        x = cand;
        fx = fc;
    }
    let scale = a6(0.5 * x)?.abs().max(a6(2.0 * x)?.abs());
    if fx.abs() > 1e-8 * scale {
        return Err(Error::NoPositiveRoot(format!(
            "residual |a6({x})| = {:e} exceeds 1e-8 · {scale:e}",
            fx.abs()
        )));
    }
    Ok(x)
}

/// Coefficients `(a, b, c)` of the parabola through three points.
fn quadratic_through(x: [f64; 3], y: [f64; 3]) -> (f64, f64, f64) {
    let d01 = (y[1] - y[0]) / (x[1] - x[0]);
    let d12 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d12 - d01) / (x[2] - x[0]);
    let b = d01 - a * (x[0] + x[1]);
    let c = y[0] - a * x[0] * x[0] - b * x[0];
    (a, b, c)
}
