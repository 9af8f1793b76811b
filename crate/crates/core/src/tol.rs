//! Central tolerance block.
//!
//! Every numerical threshold used by the analysis lives here. Defaults can be
//! overridden at runtime with the `TURING_CRN_TOL` environment variable, a
//! comma-separated list of `name=value` pairs, e.g.
//! `TURING_CRN_TOL="rank_rel=1e-12,root_imag_rel=1e-6"`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_VAR: &str = "TURING_CRN_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Singular values below `rank_rel · σ_max` count as zero.
    pub rank_rel: f64,
    /// Trailing characteristic-polynomial coefficients below
    /// `trailing_coeff_rel · max|coeff|` are treated as structural zeros.
    pub trailing_coeff_rel: f64,
    /// Sign deadband for the coefficient conditions, relative to `max|aᵢ|`.
    pub sign_deadband_rel: f64,
    /// A companion eigenvalue is real if `|Im| ≤ root_imag_rel · (1 + |Re|)`.
    pub root_imag_rel: f64,
    /// Roots with real part at or below this are not positive.
    pub root_min_re: f64,
    /// Eigenvalue is positive if `Re > eig_pos_rel · ρ`.
    pub eig_pos_rel: f64,
    /// Eigenvalue is real if `|Im| ≤ eig_imag_rel · (1 + |Re|)`.
    pub eig_imag_rel: f64,
    /// `σ_min(M) ≤ det_singular_rel · σ_max(M)` rejects `M` as singular.
    pub det_singular_rel: f64,
    /// `|λ| ≤ zero_eig_rel · (1 + ρ(J))` counts as a structural zero eigenvalue.
    pub zero_eig_rel: f64,
    /// Nonzero eigenvalues are stable if `Re < −stable_margin_rel · (1 + ρ(J))`.
    pub stable_margin_rel: f64,
    /// Relative steady-state residual accepted by the parametrization.
    pub steady_residual_rel: f64,
    /// Curvature-normalized `|Im μ₁(h)| / h²` above this is a Hopf-type onset.
    pub hopf_imag: f64,
    /// Wave number used for curvature probes in onset bisection.
    pub curvature_h: f64,
    /// Absolute bisection tolerance for onset values of k₃.
    pub onset_k3_abs: f64,
    /// Negative concentrations below this are clamped with a warning.
    pub clamp_negative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rel: 1e-10,
            trailing_coeff_rel: 1e-8,
            sign_deadband_rel: 1e-12,
            root_imag_rel: 1e-8,
            root_min_re: 1e-12,
            eig_pos_rel: 1e-9,
            eig_imag_rel: 1e-8,
            det_singular_rel: 1e-12,
            zero_eig_rel: 1e-8,
            stable_margin_rel: 1e-10,
            steady_residual_rel: 1e-9,
            hopf_imag: 1e-8,
            curvature_h: 1e-3,
            onset_k3_abs: 1e-3,
            clamp_negative: 1e-8,
        }
    }
}

impl Tolerances {
    /// Defaults with any overrides from `TURING_CRN_TOL` applied.
    pub fn from_env() -> Result<Self> {
        match std::env::var(ENV_VAR) {
            Ok(spec) => Self::default().with_overrides(&spec),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("tolerance override `{item}` is not name=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("tolerance `{key}` has non-numeric value `{value}`")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Parse(format!("tolerance `{key}` must be positive and finite")));
            }
            let slot = match key.trim() {
                "rank_rel" => &mut self.rank_rel,
                "trailing_coeff_rel" => &mut self.trailing_coeff_rel,
                "sign_deadband_rel" => &mut self.sign_deadband_rel,
                "root_imag_rel" => &mut self.root_imag_rel,
                "root_min_re" => &mut self.root_min_re,
                "eig_pos_rel" => &mut self.eig_pos_rel,
                "eig_imag_rel" => &mut self.eig_imag_rel,
                "det_singular_rel" => &mut self.det_singular_rel,
                "zero_eig_rel" => &mut self.zero_eig_rel,
                "stable_margin_rel" => &mut self.stable_margin_rel,
                "steady_residual_rel" => &mut self.steady_residual_rel,
                "hopf_imag" => &mut self.hopf_imag,
                "curvature_h" => &mut self.curvature_h,
                "onset_k3_abs" => &mut self.onset_k3_abs,
                "clamp_negative" => &mut self.clamp_negative,
                other => return Err(Error::Parse(format!("unknown tolerance `{other}`"))),
            };
            *slot = value;
        }
        Ok(self)
    }
}
