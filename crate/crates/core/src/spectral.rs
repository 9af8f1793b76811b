//! Spectral analysis of `A(μ) = J − μD`.
//!
//! `det(J − μD) = det(D) · det(J D⁻¹ − μI)`, so the coefficients of the
//! characteristic polynomial of `M = J D⁻¹` carry the whole story. Conservation
//! laws make the trailing `n − s` coefficients vanish, leaving
//!
//! ```text
//! det(J − μD) = det(D) · μ^(n−s) · (a₀ μ^s + … + a_{s−1} μ + a_s)
//! ```
//!
//! with `a₀ = (−1)ⁿ`. A homogeneous steady state stable for the ODE can lose
//! stability against a Laplace mode with eigenvalue `μ_ℓ` when `a_s` carries
//! the sign `(−1)^(n+1)`: then `det(A(μ))` has that sign on `(0, μ̄)` and
//! `A(μ)` has an odd number of positive eigenvalues there.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Schur};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Bracketed polynomial `a₀ μ^s + … + a_s` of `det(J D⁻¹ − μI) / μ^(n−s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuPolynomial {
    /// `a₀ … a_s`, highest degree first.
    pub coeffs: Vec<f64>,
    pub s: usize,
    pub n: usize,
    pub det_d: f64,
}

impl MuPolynomial {
    pub fn a0(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn a_s(&self) -> f64 {
        self.coeffs[self.s]
    }

    /// Value of the bracket at `mu` (Horner).
    pub fn eval(&self, mu: f64) -> f64 {
        horner(&self.coeffs, mu)
    }

    /// Derivative of the bracket at `mu`.
    pub fn eval_deriv(&self, mu: f64) -> f64 {
        let s = self.s;
        self.coeffs[..s]
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &a)| acc * mu + a * (s - i) as f64)
    }

    /// Full `det(J − μD) = det(D) μ^(n−s) · bracket(μ)`.
    pub fn det_at(&self, mu: f64) -> f64 {
        self.det_d * mu.powi((self.n - self.s) as i32) * self.eval(mu)
    }

    /// `aᵢ / a₀` for `i = 1 … s`; independent of the overall normalization.
    pub fn ratios(&self) -> Vec<f64> {
        self.coeffs[1..].iter().map(|a| a / self.coeffs[0]).collect()
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &a| acc * x + a)
}

/// Faddeev–LeVerrier recurrence. Returns `[1, c₁, …, cₙ]` with
/// `det(λI − M) = λⁿ + c₁ λⁿ⁻¹ + … + cₙ`.
///
/// The recurrence runs in double-double arithmetic: in plain `f64` the
/// structurally zero trailing coefficients of stiff conservative systems come
/// out near `1e-6` relative, which is too coarse for the rank check.
pub fn faddeev_leverrier(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix required");
    let entries: Vec<TwoFloat> = (0..n * n).map(|idx| TwoFloat::from(m[(idx / n, idx % n)])).collect();
    faddeev_leverrier_dd(&entries, n)
}

/// `a / b` to double-double accuracy via one correction step (the crate's own
/// division is only accurate to about `f64` precision).
fn dd_div(a: TwoFloat, b: f64) -> TwoFloat {
    let q1 = a.hi() / b;
    let r = a - TwoFloat::new_mul(q1, b);
    let q2 = r.hi() / b;
    let r2 = r - TwoFloat::new_mul(q2, b);
    TwoFloat::new_add(q1, q2) + TwoFloat::from(r2.hi() / b)
}

/// Row-major `n×n` input in double-double precision.
fn faddeev_leverrier_dd(m: &[TwoFloat], n: usize) -> Vec<f64> {
    let zero = TwoFloat::from(0.0);
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut mk: Vec<TwoFloat> = (0..n * n)
        .map(|idx| TwoFloat::from(if idx / n == idx % n { 1.0 } else { 0.0 }))
        .collect();
    let mut am = vec![zero; n * n];
    for k in 1..=n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = zero;
                for l in 0..n {
                    acc += m[i * n + l] * mk[l * n + j];
                }
                am[i * n + j] = acc;
            }
        }
        let mut trace = zero;
        for i in 0..n {
            trace += am[i * n + i];
        }
        let ck = -dd_div(trace, k as f64);
        coeffs.push(ck.hi() + ck.lo());
        std::mem::swap(&mut mk, &mut am);
        for i in 0..n {
            mk[i * n + i] += ck;
        }
    }
    coeffs
}

/// Numerical rank by singular-value thresholding.
pub fn numerical_rank(m: &DMatrix<f64>, rel: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * smax).count()
}

fn check_diffusion(n: usize, d: &[f64]) -> Result<()> {
    if d.len() != n {
        return Err(Error::Dimension {
            what: "d",
            got: d.len(),
            expected: n,
        });
    }
    if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!("d[{i}] = {v} must be positive")));
    }
    Ok(())
}

fn faddeev_leverrier_exact(m: &[BigRational], n: usize) -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(1.0);
    let mut mk: Vec<BigRational> = (0..n * n)
        .map(|idx| if idx / n == idx % n { BigRational::one() } else { BigRational::zero() })
        .collect();
    for k in 1..=n {
        let mut am = vec![BigRational::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigRational::zero();
                for l in 0..n {
                    if !m[i * n + l].is_zero() && !mk[l * n + j].is_zero() {
                        acc += &m[i * n + l] * &mk[l * n + j];
                    }
                }
                am[i * n + j] = acc;
            }
        }
        let trace = (0..n).fold(BigRational::zero(), |t, i| t + &am[i * n + i]);
        let ck = -trace / BigRational::from_integer(BigInt::from(k));
        coeffs.push(ck.to_f64().unwrap_or(f64::NAN));
        mk = am;
        for i in 0..n {
            mk[i * n + i] += &ck;
        }
    }
    coeffs
}

/// Coefficients of `det(J D⁻¹ − μI)` in exact rational arithmetic on the
/// given `f64` entries, rounded once at the end. Much slower than
/// [`scaled_coefficients`].
pub fn exact_coefficients(j: &DMatrix<f64>, d: &[f64]) -> Result<Vec<f64>> {
    let n = j.nrows();
    check_diffusion(n, d)?;
    let exact = |v: f64| BigRational::from_float(v).ok_or_else(|| Error::InvalidParameter(format!("{v} is not finite")));
    let inv_d = d.iter().map(|&v| exact(v).map(|r| r.recip())).collect::<Result<Vec<_>>>()?;
    let mut m = Vec::with_capacity(n * n);
    for idx in 0..n * n {
        m.push(exact(j[(idx / n, idx % n)])? * &inv_d[idx % n]);
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(faddeev_leverrier_exact(&m, n).into_iter().map(|c| sign * c).collect())
}

/// All `n + 1` coefficients of `det(J D⁻¹ − μI)`, highest degree first, with
/// no trailing-zero detection. Useful when a coefficient is itself near zero.
pub fn scaled_coefficients(j: &DMatrix<f64>, d: &[f64]) -> Result<Vec<f64>> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::Dimension {
            what: "J columns",
            got: j.ncols(),
            expected: n,
        });
    }
    check_diffusion(n, d)?;
    // M = J D⁻¹ formed in double-double so the column scaling adds no rounding.
    let m: Vec<TwoFloat> = (0..n * n)
        .map(|idx| dd_div(TwoFloat::from(j[(idx / n, idx % n)]), d[idx % n]))
        .collect();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(faddeev_leverrier_dd(&m, n).into_iter().map(|c| sign * c).collect())
}

/// Coefficients of `det(J D⁻¹ − μI)` with the structural trailing zeros
/// removed.
pub fn char_poly_scaled(j: &DMatrix<f64>, d: &[f64], tol: &Tolerances) -> Result<MuPolynomial> {
    let n = j.nrows();
    if j.ncols() != n {
        return Err(Error::Dimension {
            what: "J columns",
            got: j.ncols(),
            expected: n,
        });
    }
    let mut coeffs = scaled_coefficients(j, d)?;
    let rank = numerical_rank(j, tol.rank_rel);
    let mut trailing = vanishing_tail(&coeffs, tol);
    if trailing != n - rank {
        // double-double roundoff grows like ‖J D⁻¹‖ᵏ and can swamp the
        // structural zeros of badly scaled systems
        coeffs = exact_coefficients(j, d)?;
        trailing = vanishing_tail(&coeffs, tol);
    }
    if trailing != n - rank {
        return Err(Error::InconsistentRank(format!(
            "{trailing} vanishing trailing coefficients but rank(J) = {rank} with n = {n}"
        )));
    }
    coeffs.truncate(n + 1 - trailing);
    Ok(MuPolynomial {
        coeffs,
        s: rank,
        n,
        det_d: d.iter().product(),
    })
}

fn vanishing_tail(coeffs: &[f64], tol: &Tolerances) -> usize {
    let max = coeffs.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let cut = tol.trailing_coeff_rel * max;
    coeffs.iter().rev().take_while(|c| c.abs() <= cut).count()
}

/// Direct `det(J − μD)` by LU.
pub fn det_direct(j: &DMatrix<f64>, d: &[f64], mu: f64) -> f64 {
    shifted(j, d, mu).determinant()
}

fn shifted(j: &DMatrix<f64>, d: &[f64], mu: f64) -> DMatrix<f64> {
    let mut a = j.clone();
    for (i, &di) in d.iter().enumerate() {
        a[(i, i)] -= mu * di;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignConditions {
    /// `sign(a₀) = (−1)ⁿ`.
    pub cond_a0: bool,
    /// `sign(a_s) = (−1)^(n+1)`.
    pub cond_as: bool,
}

impl SignConditions {
    pub fn both(&self) -> bool {
        self.cond_a0 && self.cond_as
    }
}

pub fn sign_conditions(poly: &MuPolynomial, tol: &Tolerances) -> Result<SignConditions> {
    let deadband = tol.sign_deadband_rel * poly.max_abs();
    let a0 = poly.a0();
    let a_s = poly.a_s();
    if a0.abs() <= deadband {
        return Err(Error::IndeterminateSign {
            which: "a0",
            value: a0.abs(),
            deadband,
        });
    }
    if a_s.abs() <= deadband {
        return Err(Error::IndeterminateSign {
            which: "a_s",
            value: a_s.abs(),
            deadband,
        });
    }
    let parity = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(SignConditions {
        cond_a0: a0.signum() == parity(poly.n),
        cond_as: a_s.signum() == parity(poly.n + 1),
    })
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Simulation("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Descending real part, ties broken by descending `|Im|`, then positive
/// imaginary part first.
pub fn sort_eigenvalues(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(Ordering::Equal)
            .then(b.im.abs().partial_cmp(&a.im.abs()).unwrap_or(Ordering::Equal))
            .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
    });
}

/// All real positive roots of the bracket, ascending.
pub fn positive_roots(poly: &MuPolynomial, tol: &Tolerances) -> Vec<f64> {
    let s = poly.s;
    if s == 0 {
        return Vec::new();
    }
    let lead = poly.a0();
    let mut companion = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        companion[(0, i)] = -poly.coeffs[i + 1] / lead;
    }
    for i in 1..s {
        companion[(i, i - 1)] = 1.0;
    }
    let Ok(ev) = eigenvalues(&companion) else {
        return Vec::new();
    };
    let mut roots: Vec<f64> = ev
        .into_iter()
        .filter(|z| z.im.abs() <= tol.root_imag_rel * (1.0 + z.re.abs()) && z.re > tol.root_min_re)
        .map(|z| polish_root(poly, z.re))
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    roots
}

/// One Newton step, kept only if it stays inside a sign-change bracket around
/// the root (or, lacking one, if it reduces the residual).
fn polish_root(poly: &MuPolynomial, x: f64) -> f64 {
    let fx = poly.eval(x);
    let dfx = poly.eval_deriv(x);
    if fx == 0.0 || dfx == 0.0 || !dfx.is_finite() {
        return x;
    }
    let step = fx / dfx;
    let cand = x - step;
    let width = 4.0 * step.abs().max(1e-14 * x.abs());
    let (lo, hi) = (x - width, x + width);
    let (flo, fhi) = (poly.eval(lo), poly.eval(hi));
    if flo.signum() != fhi.signum() {
        if cand > lo && cand < hi {
            return cand;
        }
        // Fall back to bisection on the bracket.
        let (mut a, mut b, mut fa) = (lo, hi, flo);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let fm = poly.eval(m);
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    }
    if poly.eval(cand).abs() < fx.abs() {
        cand
    } else {
        x
    }
}

/// Smallest positive root `μ̄` of the bracket, if any.
pub fn smallest_positive_root(poly: &MuPolynomial, tol: &Tolerances) -> Option<f64> {
    positive_roots(poly, tol).first().copied()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityCheck {
    /// Real eigenvalues of `J − μD` with positive real part.
    pub n_pos_real: usize,
    /// Conjugate pairs with positive real part (invisible to the determinant).
    pub n_pos_complex_pairs: usize,
    pub det: f64,
    /// `sign(det) = (−1)^(n − n_pos_real)`.
    pub det_sign_consistent: bool,
}

impl ParityCheck {
    pub fn odd(&self) -> bool {
        self.n_pos_real % 2 == 1
    }
}

pub fn eigen_parity_check(j: &DMatrix<f64>, d: &[f64], mu: f64, tol: &Tolerances) -> Result<ParityCheck> {
    let n = j.nrows();
    check_diffusion(n, d)?;
    let a = shifted(j, d, mu);
    parity_of(&a, tol)
}

/// Parity bookkeeping for an arbitrary square matrix.
pub fn parity_of(a: &DMatrix<f64>, tol: &Tolerances) -> Result<ParityCheck> {
    let n = a.nrows();
    let det = a.determinant();
    let sv = a.singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > tol.det_singular_rel * smax) || det == 0.0 {
        // determinant the matrix would have with sigma_min at the cut-off
        let threshold = det.abs() * tol.det_singular_rel * smax / smin.max(f64::MIN_POSITIVE);
        return Err(Error::NearSingular {
            det: det.abs(),
            threshold,
        });
    }
    let ev = eigenvalues(a)?;
    let rho = ev.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let is_real = |z: &Complex64| z.im.abs() <= tol.eig_imag_rel * (1.0 + z.re.abs());
    let positive = |z: &Complex64| z.re > tol.eig_pos_rel * rho;
    let n_pos_real = ev.iter().filter(|z| is_real(z) && positive(z)).count();
    let n_pos_complex = ev.iter().filter(|z| !is_real(z) && positive(z)).count();
    let expected = if (n - n_pos_real) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(ParityCheck {
        n_pos_real,
        n_pos_complex_pairs: n_pos_complex / 2,
        det,
        det_sign_consistent: det.signum() == expected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeStability {
    pub stable: bool,
    pub n_zero: usize,
    /// Nonzero eigenvalues, sorted by descending real part.
    #[serde(skip)]
    pub nonzero: Vec<Complex64>,
}

impl OdeStability {
    pub fn leading(&self) -> Option<Complex64> {
        self.nonzero.first().copied()
    }
}

/// Stability of a steady state with `n − rank` structural zero eigenvalues.
pub fn ode_stability(j: &DMatrix<f64>, rank: usize, tol: &Tolerances) -> Result<OdeStability> {
    let n = j.nrows();
    let mut ev = eigenvalues(j)?;
    let rho = ev.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let zero_cut = tol.zero_eig_rel * (1.0 + rho);
    let n_zero = ev.iter().filter(|z| z.norm() <= zero_cut).count();
    if n_zero != n.saturating_sub(rank) {
        return Err(Error::InconsistentRank(format!(
            "{n_zero} zero eigenvalues but n − rank = {}",
            n.saturating_sub(rank)
        )));
    }
    ev.retain(|z| z.norm() > zero_cut);
    sort_eigenvalues(&mut ev);
    let margin = tol.stable_margin_rel * (1.0 + rho);
    if let Some(z) = ev.iter().find(|z| z.re.abs() <= margin) {
        return Err(Error::MarginalEigenvalue { re: z.re, im: z.im });
    }
    Ok(OdeStability {
        stable: ev.iter().all(|z| z.re < -margin),
        n_zero,
        nonzero: ev,
    })
}

/// Everything the coefficient test says about `J − μD` at one steady state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub poly: MuPolynomial,
    pub cond_a0: bool,
    pub cond_as: bool,
    pub mu_bar: Option<f64>,
    pub all_positive_roots: Vec<f64>,
    pub ode_stable: bool,
    pub n_zero_eigs: usize,
    /// Leading nonzero eigenvalue of `J` as `(re, im)`.
    pub leading_ode_eig: Option<(f64, f64)>,
}

impl StabilityReport {
    pub fn build(j: &DMatrix<f64>, d: &[f64], tol: &Tolerances) -> Result<Self> {
        let poly = char_poly_scaled(j, d, tol)?;
        let cond = sign_conditions(&poly, tol)?;
        let roots = positive_roots(&poly, tol);
        let ode = ode_stability(j, poly.s, tol)?;
        Ok(StabilityReport {
            cond_a0: cond.cond_a0,
            cond_as: cond.cond_as,
            mu_bar: roots.first().copied(),
            all_positive_roots: roots,
            ode_stable: ode.stable,
            n_zero_eigs: ode.n_zero,
            leading_ode_eig: ode.leading().map(|z| (z.re, z.im)),
            poly,
        })
    }

    /// Conditions hold and the ODE steady state is stable: a Turing-like
    /// instability occurs on every domain large enough to fit a Laplace
    /// eigenvalue in `(0, μ̄)`.
    pub fn turing_like(&self) -> bool {
        self.cond_a0 && self.cond_as && self.ode_stable && self.mu_bar.is_some()
    }

    pub const CSV_HEADER: &'static str = "n,s,cond_a0,cond_as,mu_bar,n_positive_roots,ode_stable,n_zero_eigs,coeffs";

    /// One summary row; coefficients are `;`-separated in the last column.
    pub fn to_csv(&self) -> String {
        let coeffs = self
            .poly
            .coeffs
            .iter()
            .map(|a| format!("{a:.17e}"))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{}\n{},{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.poly.n,
            self.poly.s,
            self.cond_a0,
            self.cond_as,
            self.mu_bar.map_or(String::new(), |m| format!("{m:.17e}")),
            self.all_positive_roots.len(),
            self.ode_stable,
            self.n_zero_eigs,
            coeffs
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnsetType {
    SteadyLongWave,
    HopfLongWave,
    Stable,
    FiniteWavenumber,
}

impl OnsetType {
    pub fn as_str(&self) -> &'static str {
        match self {
            OnsetType::SteadyLongWave => "steady-long-wave",
            OnsetType::HopfLongWave => "hopf-long-wave",
            OnsetType::Stable => "stable",
            OnsetType::FiniteWavenumber => "finite-wavenumber",
        }
    }
}

/// Leading eigenvalue curves of `J − κ²D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    pub kappas: Vec<f64>,
    /// `top_eigs[i]` holds the leading `m` eigenvalues at `kappas[i]`.
    pub top_eigs: Vec<Vec<Complex64>>,
    /// Re μ₁″(0) from the two smallest positive grid points.
    pub curvature_at_zero: f64,
    /// |Im μ₁(h)| / h² at the smallest positive grid point.
    pub imag_at_zero: f64,
    pub onset_type: OnsetType,
    /// All real parts negative at the largest wave number.
    pub decays_at_kappa_max: bool,
}

/// Eigenvalues of `J − κ²D`, sorted.
pub fn spectrum_at(j: &DMatrix<f64>, d: &[f64], kappa: f64) -> Result<Vec<Complex64>> {
    let mut ev = eigenvalues(&shifted(j, d, kappa * kappa))?;
    sort_eigenvalues(&mut ev);
    Ok(ev)
}

/// Even-extension Richardson stencil for `f″(0)` from `f(0)`, `f(h)`, `f(2h)`.
fn curvature_stencil(f0: f64, fh: f64, f2h: f64, h: f64) -> f64 {
    (16.0 * fh - f2h - 15.0 * f0) / (6.0 * h * h)
}

/// `(Re μ₁″(0), |Im μ₁(h)| / h²)` probed at wave numbers `h` and `2h`.
pub fn curvature_probe(j: &DMatrix<f64>, d: &[f64], h: f64) -> Result<(f64, f64)> {
    let m0 = spectrum_at(j, d, 0.0)?[0];
    let m1 = spectrum_at(j, d, h)?[0];
    let m2 = spectrum_at(j, d, 2.0 * h)?[0];
    Ok((curvature_stencil(m0.re, m1.re, m2.re, h), m1.im.abs() / (h * h)))
}

pub fn dispersion(
    j: &DMatrix<f64>,
    d: &[f64],
    kappa_max: f64,
    n_pts: usize,
    m_curves: usize,
    tol: &Tolerances,
) -> Result<DispersionTable> {
    let n = j.nrows();
    check_diffusion(n, d)?;
    if !(kappa_max > 0.0) {
        return Err(Error::InvalidParameter("kappa_max must be positive".into()));
    }
    if n_pts < 16 {
        return Err(Error::InvalidParameter("dispersion needs at least 16 grid points".into()));
    }
    let m = m_curves.clamp(1, n);
    let step = kappa_max / (n_pts - 1) as f64;
    let kappas: Vec<f64> = (0..n_pts).map(|i| i as f64 * step).collect();
    let full: Vec<Vec<Complex64>> = kappas
        .par_iter()
        .map(|&kappa| spectrum_at(j, d, kappa))
        .collect::<Result<_>>()?;

    let lead: Vec<Complex64> = full.iter().map(|ev| ev[0]).collect();
    let curvature = curvature_stencil(lead[0].re, lead[1].re, lead[2].re, step);
    let imag = lead[1].im.abs() / (step * step);
    let max_re = lead[1..].iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let onset_type = if curvature > 0.0 {
        if imag <= tol.hopf_imag {
            OnsetType::SteadyLongWave
        } else {
            OnsetType::HopfLongWave
        }
    } else if max_re < 0.0 {
        OnsetType::Stable
    } else {
        OnsetType::FiniteWavenumber
    };
    let decays_at_kappa_max = full.last().is_some_and(|ev| ev.iter().all(|z| z.re < 0.0));
    Ok(DispersionTable {
        kappas,
        top_eigs: full.into_iter().map(|ev| ev.into_iter().take(m).collect()).collect(),
        curvature_at_zero: curvature,
        imag_at_zero: imag,
        onset_type,
        decays_at_kappa_max,
    })
}

impl DispersionTable {
    pub fn n_curves(&self) -> usize {
        self.top_eigs.first().map_or(0, Vec::len)
    }

    /// Header: `kappa,re_mu1,im_mu1,re_mu2,im_mu2,…`.
    pub fn csv_header(&self) -> String {
        let mut h = String::from("kappa");
        for c in 1..=self.n_curves() {
            let _ = write!(h, ",re_mu{c},im_mu{c}");
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for (kappa, ev) in self.kappas.iter().zip(&self.top_eigs) {
            let _ = write!(out, "{kappa:.17e}");
            for z in ev {
                let _ = write!(out, ",{:.17e},{:.17e}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }
}

/// Long-wave onset located by bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Onset {
    pub k3: f64,
    /// |Im μ₁(h)| / h² at the located onset.
    pub imag: f64,
    pub hopf: bool,
}

/// Bisection of `g` on `[lo, hi]` to absolute width `abs_tol`.
fn bisect_sign<F>(mut g: F, lo: f64, hi: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let ga = g(a)?;
    let gb = g(b)?;
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut sa = ga.signum();
    while b - a > abs_tol {
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == sa {
            a = m;
            sa = gm.signum();
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Parameter value where Re μ₁″(0) changes sign. `builder` maps the
/// parameter to `(J, d)` at the corresponding steady state.
pub fn onset_k3<B>(builder: B, lo: f64, hi: f64, tol: &Tolerances) -> Result<Onset>
where
    B: Fn(f64) -> Result<(DMatrix<f64>, Vec<f64>)>,
{
    let h = tol.curvature_h;
    let k3 = bisect_sign(
        |p| {
            let (j, d) = builder(p)?;
            Ok(curvature_probe(&j, &d, h)?.0)
        },
        lo,
        hi,
        tol.onset_k3_abs,
    )?;
    let (j, d) = builder(k3)?;
    let (_, imag) = curvature_probe(&j, &d, h)?;
    Ok(Onset {
        k3,
        imag,
        hopf: imag > tol.hopf_imag,
    })
}

/// Parameter value where Re μ₁(κ) changes sign at a fixed wave number, e.g.
/// the first admissible mode `κ₁ = π/(2l)` of a finite interval.
pub fn onset_k3_at_wavenumber<B>(builder: B, kappa: f64, lo: f64, hi: f64, tol: &Tolerances) -> Result<Onset>
where
    B: Fn(f64) -> Result<(DMatrix<f64>, Vec<f64>)>,
{
    let k3 = bisect_sign(
        |p| {
            let (j, d) = builder(p)?;
            Ok(spectrum_at(&j, &d, kappa)?[0].re)
        },
        lo,
        hi,
        tol.onset_k3_abs,
    )?;
    let (j, d) = builder(k3)?;
    let lead = spectrum_at(&j, &d, kappa)?[0];
    let imag = lead.im.abs() / (kappa * kappa);
    Ok(Onset {
        k3,
        imag,
        hopf: imag > tol.hopf_imag,
    })
}

/// Eigenvector of `a` for the eigenvalue closest to `lambda`, by shifted
/// inverse iteration. Normalized to unit max-modulus.
pub fn eigenvector_near(a: &DMatrix<f64>, lambda: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let scale = 1.0 + lambda.norm() + a.amax();
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut m: DMatrix<Complex64> = a.map(|v| Complex64::new(v, 0.0));
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for _ in 0..4 {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Simulation("inverse iteration hit a singular system".into()))?;
        let norm = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Simulation("inverse iteration diverged".into()));
        }
        v /= Complex64::new(norm, 0.0);
    }
    // Rotate so the largest component is real and positive.
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bm), (i, z)| if z.norm() > bm { (i, z.norm()) } else { (bi, bm) });
    let phase = v[imax] / Complex64::new(v[imax].norm(), 0.0);
    Ok(v.map(|z| z / phase))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn diagonal_char_poly() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let p = char_poly_scaled(&j, &[1.0, 1.0], &tol()).unwrap();
        assert_eq!(p.s, 2);
        assert_eq!(p.coeffs, vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn trailing_zero_structure_is_enforced() {
        // Rank 1, n = 2: one trailing zero.
        let j = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, 0.0]);
        let p = char_poly_scaled(&j, &[1.0, 2.0], &tol()).unwrap();
        assert_eq!(p.s, 1);
        assert_eq!(p.coeffs.len(), 2);
        // Rank tolerance that disagrees with the coefficient structure.
        let strict = Tolerances {
            rank_rel: 1e-30,
            trailing_coeff_rel: 1e-30,
            ..tol()
        };
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-13]);
        let loose = Tolerances {
            trailing_coeff_rel: 1e-6,
            ..strict
        };
        assert!(matches!(
            char_poly_scaled(&j, &[1.0, 1.0], &loose),
            Err(Error::InconsistentRank(_))
        ));
    }

    #[test]
    fn sign_condition_bookkeeping() {
        let p = MuPolynomial {
            coeffs: vec![1.0, 0.5, -2.0],
            s: 2,
            n: 4,
            det_d: 1.0,
        };
        let c = sign_conditions(&p, &tol()).unwrap();
        assert!(c.cond_a0 && c.cond_as);
        let p = MuPolynomial {
            coeffs: vec![1.0, 0.5, 1e-20],
            ..p
        };
        assert!(matches!(sign_conditions(&p, &tol()), Err(Error::IndeterminateSign { .. })));
    }

    #[test]
    fn simple_roots() {
        let p = MuPolynomial {
            coeffs: vec![1.0, -3.0, 2.0],
            s: 2,
            n: 2,
            det_d: 1.0,
        };
        assert_eq!(positive_roots(&p, &tol()), vec![1.0, 2.0]);
        assert_eq!(smallest_positive_root(&p, &tol()), Some(1.0));
        let p = MuPolynomial {
            coeffs: vec![1.0, 3.0, 2.0],
            ..p
        };
        assert_eq!(smallest_positive_root(&p, &tol()), None);
        let p = MuPolynomial {
            coeffs: vec![1.0, 0.0, 1.0],
            ..p
        };
        assert_eq!(smallest_positive_root(&p, &tol()), None);
    }

    #[test]
    fn parity_diag() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, -1.0]));
        let pc = eigen_parity_check(&a, &[1.0; 3], 0.0, &tol()).unwrap();
        assert_eq!(pc.n_pos_real, 1);
        assert!(pc.det_sign_consistent && pc.odd());
        assert_eq!(pc.det, 1.0);
    }

    #[test]
    fn parity_rejects_singular() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(
            eigen_parity_check(&a, &[1.0; 2], 0.0, &tol()),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn parity_counts_complex_pairs_separately() {
        // Rotation-scaling block with Re = 0.5 plus a stable real eigenvalue.
        let a = DMatrix::from_row_slice(3, 3, &[0.5, -2.0, 0.0, 2.0, 0.5, 0.0, 0.0, 0.0, -1.0]);
        let pc = parity_of(&a, &tol()).unwrap();
        assert_eq!(pc.n_pos_real, 0);
        assert_eq!(pc.n_pos_complex_pairs, 1);
        assert!(pc.det_sign_consistent);
    }

    #[test]
    fn ode_stability_cases() {
        let z = DMatrix::zeros(1, 1);
        let s = ode_stability(&z, 0, &tol()).unwrap();
        assert!(s.stable);
        assert_eq!(s.n_zero, 1);
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, -1.0, 0.0]));
        let s = ode_stability(&j, 2, &tol()).unwrap();
        assert!(!s.stable);
        assert!(matches!(ode_stability(&j, 3, &tol()), Err(Error::InconsistentRank(_))));
        let j = DMatrix::from_row_slice(2, 2, &[1e-11, -1.0, 1.0, 1e-11]);
        assert!(matches!(ode_stability(&j, 2, &tol()), Err(Error::MarginalEigenvalue { .. })));
    }

    #[test]
    fn sorting_convention() {
        let mut ev = vec![
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.5, -1.0),
            Complex64::new(0.5, 1.0),
            Complex64::new(0.5, 0.0),
        ];
        sort_eigenvalues(&mut ev);
        assert_eq!(
            ev,
            vec![
                Complex64::new(0.5, 1.0),
                Complex64::new(0.5, -1.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(-1.0, 0.0)
            ]
        );
    }

    #[test]
    fn curvature_stencil_exact_on_quartics() {
        let f = |x: f64| 1.0 + 3.0 * x * x - 7.0 * x.powi(4);
        let h = 0.1;
        let c = curvature_stencil(f(0.0), f(h), f(2.0 * h), h);
        assert!((c - 6.0).abs() < 1e-10);
    }

    #[test]
    fn dispersion_rejects_bad_grids() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        assert!(dispersion(&j, &[1.0, 1.0], 1.0, 8, 2, &tol()).is_err());
        assert!(dispersion(&j, &[1.0, 1.0], 0.0, 32, 2, &tol()).is_err());
        let t = dispersion(&j, &[1.0, 1.0], 1.0, 32, 2, &tol()).unwrap();
        assert_eq!(t.onset_type, OnsetType::Stable);
        assert!(t.decays_at_kappa_max);
        assert!(t.to_csv().starts_with("kappa,re_mu1,im_mu1,re_mu2,im_mu2\n"));
    }

    #[test]
    fn eigenvector_of_known_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -1.0]);
        let v = eigenvector_near(&a, Complex64::new(2.0, 0.0)).unwrap();
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(v[1].norm() < 1e-12);
    }
}
