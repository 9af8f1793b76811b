//! Neumann Laplacian spectra on simple domains and the minimal domain size
//! for which the first nonzero eigenvalue drops below a threshold `μ̄`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest argument searched for derivative zeros.
pub const BESSEL_ZERO_X_MAX: f64 = 400.0;
const SERIES_X_MAX: f64 = 12.0;

/// `Γ(ν + 1)` for integer or half-integer `ν ≥ 0`.
fn gamma_plus_one(nu: f64) -> f64 {
    let twice = (2.0 * nu).round() as i64;
    if twice % 2 == 0 {
        (1..=twice / 2).fold(1.0, |acc, i| acc * i as f64)
    } else {
        // Γ(m + 3/2) = (2m+1)!! √π / 2^(m+1)
        let mut v = 0.5 * PI.sqrt();
        let mut x = 1.5;
        while x <= nu + 1.0 - 1e-9 {
            v *= x;
            x += 1.0;
        }
        v
    }
}

fn bessel_series(nu: f64, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = (0.5 * x).powf(nu) / gamma_plus_one(nu);
    let mut sum = term;
    for m in 1..500 {
        term *= q / (m as f64 * (m as f64 + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion, used for `J₀`, `J₁` at large argument.
fn bessel_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_m(x)` for integer order.
pub fn bessel_j(m: u32, x: f64) -> f64 {
    let mf = f64::from(m);
    if x == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_X_MAX || x <= mf {
        return bessel_series(mf, x);
    }
    let mut jm1 = bessel_asymptotic(0.0, x);
    if m == 0 {
        return jm1;
    }
    let mut j = bessel_asymptotic(1.0, x);
    for k in 1..m {
        let next = 2.0 * f64::from(k) / x * j - jm1;
        jm1 = j;
        j = next;
    }
    j
}

/// `J_m′(x)`.
pub fn bessel_j_deriv(m: u32, x: f64) -> f64 {
    if m == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))
    }
}

/// Spherical Bessel `j_l(x)`.
pub fn spherical_j(l: u32, x: f64) -> f64 {
    let lf = f64::from(l);
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if x <= lf + 1.0 {
        return (PI / (2.0 * x)).sqrt() * bessel_series(lf + 0.5, x);
    }
    let mut jm1 = x.sin() / x;
    if l == 0 {
        return jm1;
    }
    let mut j = x.sin() / (x * x) - x.cos() / x;
    for k in 1..l {
        let next = f64::from(2 * k + 1) / x * j - jm1;
        jm1 = j;
        j = next;
    }
    j
}

/// `j_l′(x)`; proportional to `d/dx[x^{-1/2} J_{l+1/2}(x)]`.
pub fn spherical_j_deriv(l: u32, x: f64) -> f64 {
    if l == 0 {
        -spherical_j(1, x)
    } else {
        spherical_j(l - 1, x) - f64::from(l + 1) / x * spherical_j(l, x)
    }
}

/// `n`-th positive zero of `f`, scanning from the origin in steps of π/8.
fn nth_positive_zero<F: Fn(f64) -> f64>(f: F, n: usize, x_start: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("zeros are numbered from 1".into()));
    }
    let step = PI / 8.0;
    let mut a = x_start;
    let mut fa = f(a);
    let mut found = 0;
    while a < BESSEL_ZERO_X_MAX {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == n {
                return Ok(refine_zero(&f, a, b, fa));
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::BracketNotFound(format!(
        "zero #{n} lies beyond x = {BESSEL_ZERO_X_MAX}"
    )))
}

fn refine_zero<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `n`-th positive zero of `J_m′` (`x = 0` is not counted).
pub fn bessel_deriv_zero_int(m: u32, n: usize) -> Result<f64> {
    // J_m′ has no zeros in (0, m) for m ≥ 1; J_0′ none in (0, 3).
    let start = if m == 0 { 1.0 } else { 0.5 * f64::from(m).max(1.0) };
    nth_positive_zero(|x| bessel_j_deriv(m, x), n, start)
}

/// `n`-th positive zero of `d/dx[x^{-1/2} J_{l+1/2}(x)]`.
pub fn spherical_deriv_zero(l: u32, n: usize) -> Result<f64> {
    let start = if l == 0 { 1.0 } else { 0.5 * f64::from(l).max(1.0) };
    nth_positive_zero(|x| spherical_j_deriv(l, x), n, start)
}

/// Zero of the derivative used in the domain thresholds. Integer `m` means
/// `J_m′`; half-integer `m = l + 1/2` means `d/dx[x^{-1/2} J_m(x)]`.
pub fn bessel_deriv_zero(m: f64, n: usize) -> Result<f64> {
    let twice = 2.0 * m;
    if !(m >= 0.0) || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "order {m} must be a non-negative integer or half-integer"
        )));
    }
    let twice = twice.round() as u32;
    if twice % 2 == 0 {
        bessel_deriv_zero_int(twice / 2, n)
    } else {
        spherical_deriv_zero((twice - 1) / 2, n)
    }
}

/// `p₁,₁ ≈ 1.8412`, first zero of `J₁′`.
pub fn p11() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| bessel_deriv_zero_int(1, 1).expect("first zero of J1'"))
}

/// `p_{3/2,1} ≈ 2.0816`, first zero of `d/dx[x^{-1/2} J_{3/2}]`.
pub fn p32_1() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| spherical_deriv_zero(1, 1).expect("first zero of j1'"))
}

/// Minimal measure of an interval (`d = 1`), disk (`d = 2`) or ball
/// (`d = 3`) whose first nonzero Neumann eigenvalue is `μ̄`. Any larger domain
/// of the same shape has `μ₁ < μ̄`.
pub fn min_domain_measure(mu_bar: f64, dim: u32) -> Result<f64> {
    if !(mu_bar.is_finite() && mu_bar > 0.0) {
        return Err(Error::InvalidParameter(format!("mu_bar = {mu_bar} must be positive")));
    }
    match dim {
        1 => Ok(PI / mu_bar.sqrt()),
        2 => Ok(p11().powi(2) * PI / mu_bar),
        3 => Ok(4.0 / 3.0 * p32_1().powi(3) * PI / mu_bar.powf(1.5)),
        other => Err(Error::InvalidParameter(format!("dimension {other} is not 1, 2 or 3"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdVerdict {
    /// `|Ω|` exceeds the threshold: some `μ_ℓ` lies in `(0, μ̄)`.
    Unstable,
    /// `|Ω|` equals the threshold to rounding: `μ₁ = μ̄`, strict test fails.
    Marginal,
    /// `|Ω|` below the threshold: the coefficient test guarantees nothing.
    BelowThreshold,
}

pub fn threshold_verdict(measure: f64, threshold: f64) -> ThresholdVerdict {
    if (measure - threshold).abs() <= 1e-12 * threshold {
        ThresholdVerdict::Marginal
    } else if measure > threshold {
        ThresholdVerdict::Unstable
    } else {
        ThresholdVerdict::BelowThreshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DomainSpec {
    /// Interval of the given length.
    Interval { length: f64 },
    Disk { radius: f64 },
    Ball { radius: f64 },
}

impl DomainSpec {
    pub fn dim(&self) -> u32 {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Disk { .. } => 2,
            DomainSpec::Ball { .. } => 3,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            DomainSpec::Interval { length } => length,
            DomainSpec::Disk { radius } => PI * radius * radius,
            DomainSpec::Ball { radius } => 4.0 / 3.0 * PI * radius.powi(3),
        }
    }

    /// Domain of the given shape with measure `m`.
    pub fn with_measure(dim: u32, m: f64) -> Result<Self> {
        match dim {
            1 => Ok(DomainSpec::Interval { length: m }),
            2 => Ok(DomainSpec::Disk {
                radius: (m / PI).sqrt(),
            }),
            3 => Ok(DomainSpec::Ball {
                radius: (3.0 * m / (4.0 * PI)).cbrt(),
            }),
            other => Err(Error::InvalidParameter(format!("dimension {other} is not 1, 2 or 3"))),
        }
    }

    fn size(&self) -> f64 {
        match *self {
            DomainSpec::Interval { length } => length,
            DomainSpec::Disk { radius } | DomainSpec::Ball { radius } => radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModeLabel {
    Interval { l: u32 },
    Disk { m: u32, n: u32 },
    Ball { l: u32, n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceMode {
    pub eigenvalue: f64,
    pub label: ModeLabel,
    pub multiplicity: u32,
}

/// Nonzero Neumann eigenvalues `≤ mu_max`, ascending.
pub fn neumann_modes(domain: DomainSpec, mu_max: f64) -> Result<Vec<LaplaceMode>> {
    let size = domain.size();
    if !(size.is_finite() && size > 0.0) {
        return Err(Error::InvalidParameter("domain size must be positive".into()));
    }
    if !(mu_max >= 0.0) {
        return Err(Error::InvalidParameter("mu_max must be non-negative".into()));
    }
    let mut modes = Vec::new();
    match domain {
        DomainSpec::Interval { length } => {
            let mut l = 1u32;
            loop {
                let mu = (f64::from(l) * PI / length).powi(2);
                if mu > mu_max {
                    break;
                }
                modes.push(LaplaceMode {
                    eigenvalue: mu,
                    label: ModeLabel::Interval { l },
                    multiplicity: 1,
                });
                l += 1;
            }
        }
        DomainSpec::Disk { radius } => {
            radial_modes(radius, mu_max, &mut modes, |m, n| {
                Ok((
                    bessel_deriv_zero_int(m, n)?,
                    ModeLabel::Disk { m, n: n as u32 },
                    if m == 0 { 1 } else { 2 },
                ))
            })?;
        }
        DomainSpec::Ball { radius } => {
            radial_modes(radius, mu_max, &mut modes, |l, n| {
                Ok((spherical_deriv_zero(l, n)?, ModeLabel::Ball { l, n: n as u32 }, 2 * l + 1))
            })?;
        }
    }
    modes.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    Ok(modes)
}

fn radial_modes<F>(radius: f64, mu_max: f64, out: &mut Vec<LaplaceMode>, zero: F) -> Result<()>
where
    F: Fn(u32, usize) -> Result<(f64, ModeLabel, u32)>,
{
    let x_max = mu_max.sqrt() * radius;
    if x_max >= BESSEL_ZERO_X_MAX {
        return Err(Error::BracketNotFound(format!(
            "sqrt(mu_max)·R = {x_max} exceeds the supported range {BESSEL_ZERO_X_MAX}"
        )));
    }
    // From order 1 on the first zero grows with the order, so stop at the
    // first such order whose lowest mode is already too large. Order 0 is
    // the exception (its first nonzero root sits above that of order 1).
    for order in 0u32.. {
        let mut n = 1;
        loop {
            let (x, label, mult) = zero(order, n)?;
            if x > x_max {
                break;
            }
            out.push(LaplaceMode {
                eigenvalue: (x / radius).powi(2),
                label,
                multiplicity: mult,
            });
            n += 1;
        }
        if n == 1 && order >= 1 {
            break;
        }
    }
    Ok(())
}

pub const MODES_CSV_HEADER: &str = "index,eigenvalue,label,multiplicity";

pub fn modes_to_csv(modes: &[LaplaceMode]) -> String {
    let mut out = String::from(MODES_CSV_HEADER);
    out.push('\n');
    for (i, m) in modes.iter().enumerate() {
        let label = match m.label {
            ModeLabel::Interval { l } => format!("l={l}"),
            ModeLabel::Disk { m, n } => format!("m={m};n={n}"),
            ModeLabel::Ball { l, n } => format!("l={l};n={n}"),
        };
        let _ = writeln!(out, "{},{:.17e},{},{}", i + 1, m.eigenvalue, label, m.multiplicity);
    }
    out
}

/// `|{ℓ ≥ 1 : (ℓπ/L)² < μ̄}|` on an interval of length `L`.
pub fn count_unstable_modes(length: f64, mu_bar: f64) -> usize {
    if !(length > 0.0 && mu_bar > 0.0) {
        return 0;
    }
    let x = mu_bar.sqrt() * length / PI;
    let f = x.floor();
    let count = if f == x { f - 1.0 } else { f };
    count.max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_m(x) = (1/π) ∫₀^π cos(mτ − x sin τ) dτ`; the trapezoid rule is
    /// spectrally accurate for this periodic integrand.
    fn bessel_quadrature(m: u32, x: f64) -> f64 {
        let n = 400 + 2 * x as usize;
        let h = PI / n as f64;
        let f = |t: f64| (f64::from(m) * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn bessel_matches_quadrature() {
        for m in [0, 1, 2, 5, 9] {
            for x in [0.1, 1.0, 3.7, 8.0, 11.9, 12.5, 20.0, 45.0, 110.0] {
                let a = bessel_j(m, x);
                let b = bessel_quadrature(m, x);
                assert!((a - b).abs() < 1e-11, "J_{m}({x}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn spherical_closed_forms() {
        for x in [0.3_f64, 1.0, 2.5, 7.0, 30.0] {
            let j2 = (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x);
            assert!((spherical_j(2, x) - j2).abs() < 1e-12);
            let via_half = (PI / (2.0 * x)).sqrt() * bessel_series(1.5, x);
            if x <= 12.0 {
                assert!((spherical_j(1, x) - via_half).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anchor_zeros() {
        assert!((p11() - 1.841_183_781_340_659).abs() < 1e-9);
        assert!((p32_1() - 2.081_575_977_818_101).abs() < 1e-9);
        assert!((bessel_deriv_zero(0.0, 1).unwrap() - 3.831_705_970_207_512).abs() < 1e-9);
        assert!((bessel_deriv_zero(1.5, 1).unwrap() - p32_1()).abs() < 1e-15);
        assert!((bessel_deriv_zero(2.0, 1).unwrap() - 3.054_236_928_227_14).abs() < 1e-9);
        assert!(bessel_deriv_zero(0.3, 1).is_err());
        assert!(bessel_deriv_zero(1.0, 0).is_err());
    }

    #[test]
    fn thresholds() {
        assert!((min_domain_measure(1.0, 1).unwrap() - PI).abs() < 1e-15);
        assert!((min_domain_measure(1.0, 2).unwrap() - 10.65).abs() < 0.01);
        assert!(min_domain_measure(0.0, 1).is_err());
        assert!(min_domain_measure(1.0, 4).is_err());
        assert_eq!(threshold_verdict(PI, PI), ThresholdVerdict::Marginal);
        assert_eq!(threshold_verdict(4.0, PI), ThresholdVerdict::Unstable);
        assert_eq!(threshold_verdict(3.0, PI), ThresholdVerdict::BelowThreshold);
    }

    #[test]
    fn interval_and_disk_modes() {
        let m = neumann_modes(DomainSpec::Interval { length: 40.0 }, 0.05).unwrap();
        assert!((m[0].eigenvalue - 0.006_168_502_750_680_849).abs() < 1e-15);
        let disk = neumann_modes(DomainSpec::Disk { radius: 1.0 }, 30.0).unwrap();
        let labels: Vec<_> = disk.iter().take(3).map(|m| m.label).collect();
        assert_eq!(
            labels,
            vec![
                ModeLabel::Disk { m: 1, n: 1 },
                ModeLabel::Disk { m: 2, n: 1 },
                ModeLabel::Disk { m: 0, n: 1 }
            ]
        );
        assert_eq!(disk[0].multiplicity, 2);
        assert_eq!(disk[2].multiplicity, 1);
        assert!(modes_to_csv(&disk).starts_with(MODES_CSV_HEADER));
    }

    #[test]
    fn unstable_mode_count() {
        let l = 40.0;
        assert_eq!(count_unstable_modes(l, (2.5 * PI / l).powi(2)), 2);
        assert_eq!(count_unstable_modes(l, (PI / l).powi(2) * 0.99), 0);
    }
}
