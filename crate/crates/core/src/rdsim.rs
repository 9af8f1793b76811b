//! Method-of-lines reaction–diffusion simulator on `(−l, l)` with zero-flux
//! boundaries, stepped by IMEX Euler:
//!
//! ```text
//! (I − dt·dᵢ·L) cᵢⁿ⁺¹ = cᵢⁿ + dt·fᵢ(cⁿ)
//! ```
//!
//! Fields are stored species-major: `c[i * N + node]`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crn::{jacobian, ReactionNetwork, Stoich};
use crate::error::{Error, Result};
use crate::spectral::{eigenvalues, eigenvector_near, sort_eigenvalues};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    /// Half-length of the interval.
    pub l: f64,
    /// Number of nodes.
    pub n: usize,
}

impl Grid1D {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParameter(format!("half-length {l} must be positive")));
        }
        if n < 3 {
            return Err(Error::InvalidParameter(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Grid1D { l, n })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weights normalized by `|Ω|`, summing to one.
    pub fn mean_weights(&self) -> Vec<f64> {
        let w = self.h() / (2.0 * self.l);
        (0..self.n)
            .map(|i| if i == 0 || i == self.n - 1 { 0.5 * w } else { w })
            .collect()
    }

    /// Trapezoid mean `⟨v⟩` of a nodal vector.
    pub fn mean(&self, v: &[f64]) -> f64 {
        self.mean_weights().iter().zip(v).map(|(w, x)| w * x).sum()
    }
}

/// Tridiagonal Neumann Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

pub fn laplacian_matrix(grid: &Grid1D) -> Laplacian {
    let n = grid.n;
    let s = 1.0 / (grid.h() * grid.h());
    let mut sub = vec![s; n - 1];
    let diag = vec![-2.0 * s; n];
    let mut sup = vec![s; n - 1];
    // Mirrored ghost nodes.
    sup[0] = 2.0 * s;
    sub[n - 2] = 2.0 * s;
    Laplacian { sub, diag, sup }
}

impl Laplacian {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.size();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.sup[i];
                m[(i + 1, i)] = self.sub[i];
            }
        }
        m
    }
}

/// LU factors of `I − a·L` for the Thomas algorithm.
#[derive(Debug, Clone)]
struct Tridiag {
    lower: Vec<f64>,
    pivot: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiag {
    fn factor(lap: &Laplacian, a: f64) -> Result<Self> {
        let n = lap.size();
        let mut lower = vec![0.0; n.saturating_sub(1)];
        let mut pivot = vec![0.0; n];
        let upper: Vec<f64> = lap.sup.iter().map(|s| -a * s).collect();
        pivot[0] = 1.0 - a * lap.diag[0];
        for i in 1..n {
            if pivot[i - 1] == 0.0 || !pivot[i - 1].is_finite() {
                return Err(Error::Simulation("singular implicit diffusion system".into()));
            }
            lower[i - 1] = -a * lap.sub[i - 1] / pivot[i - 1];
            pivot[i] = 1.0 - a * lap.diag[i] - lower[i - 1] * upper[i - 1];
        }
        if pivot[n - 1] == 0.0 || !pivot[n - 1].is_finite() {
            return Err(Error::Simulation("singular implicit diffusion system".into()));
        }
        Ok(Tridiag { lower, pivot, upper })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 1..n {
            b[i] -= self.lower[i - 1] * b[i - 1];
        }
        b[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.upper[i] * b[i + 1]) / self.pivot[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimState {
    /// Species-major field, length `n_species · N`.
    pub c: Vec<f64>,
    pub t: f64,
    pub steps: u64,
}

impl SimState {
    pub fn new(c: Vec<f64>) -> Self {
        SimState { c, t: 0.0, steps: 0 }
    }

    pub fn species<'a>(&'a self, grid: &Grid1D, i: usize) -> &'a [f64] {
        &self.c[i * grid.n..(i + 1) * grid.n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between run-log rows.
    pub log_every: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            t_end: 2000.0,
            log_every: 100,
        }
    }
}

/// IMEX Euler integrator with factorizations cached for one `dt`.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub net: ReactionNetwork,
    pub stoich: Stoich,
    pub grid: Grid1D,
    pub lap: Laplacian,
    dt: f64,
    factors: Vec<Tridiag>,
    clamp_negative: f64,
    rhs: Vec<f64>,
    /// Per reaction: rate constant, reactant powers, nonzero column of Γ.
    kernel: Vec<(f64, Vec<(usize, u32)>, Vec<(usize, f64)>)>,
    rate_buf: Vec<f64>,
    /// Total number of node values clamped to zero so far.
    pub clamped: u64,
}

impl Simulator {
    pub fn new(net: ReactionNetwork, grid: Grid1D, dt: f64, tol: &Tolerances) -> Result<Self> {
        net.validate()?;
        let stoich = Stoich::build_with(&net, tol);
        let lap = laplacian_matrix(&grid);
        let n = net.n_species();
        let mut sim = Simulator {
            stoich,
            lap,
            dt: f64::NAN,
            factors: Vec::new(),
            clamp_negative: tol.clamp_negative,
            rhs: vec![0.0; n * grid.n],
            kernel: Vec::new(),
            rate_buf: vec![0.0; grid.n],
            clamped: 0,
            grid,
            net,
        };
        sim.kernel = sim
            .net
            .reactions
            .iter()
            .enumerate()
            .map(|(j, rx)| {
                let col = (0..n)
                    .filter_map(|i| {
                        let g = sim.stoich.gamma[(i, j)];
                        (g != 0).then_some((i, g as f64))
                    })
                    .collect();
                (sim.net.k[rx.rate_constant_index], rx.reactants.clone(), col)
            })
            .collect();
        sim.set_dt(dt)?;
        Ok(sim)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        if dt != self.dt {
            self.factors = self
                .net
                .d
                .iter()
                .map(|&di| Tridiag::factor(&self.lap, dt * di))
                .collect::<Result<_>>()?;
            self.dt = dt;
        }
        Ok(())
    }

    pub fn n_species(&self) -> usize {
        self.net.n_species()
    }

    fn check_state(&self, state: &SimState) -> Result<()> {
        let expected = self.n_species() * self.grid.n;
        if state.c.len() != expected {
            return Err(Error::Dimension {
                what: "field",
                got: state.c.len(),
                expected,
            });
        }
        Ok(())
    }

    /// Reaction term `f(c)` at every node, species-major.
    pub fn reaction_field(&mut self, c: &[f64], out: &mut [f64]) {
        let nodes = self.grid.n;
        out.iter_mut().for_each(|v| *v = 0.0);
        let r = &mut self.rate_buf;
        for (k, reactants, col) in &self.kernel {
            r.iter_mut().for_each(|v| *v = *k);
            for &(i, s) in reactants {
                let ci = &c[i * nodes..(i + 1) * nodes];
                match s {
                    1 => r.iter_mut().zip(ci).for_each(|(a, b)| *a *= b),
                    _ => r.iter_mut().zip(ci).for_each(|(a, b)| *a *= b.powi(s as i32)),
                }
            }
            for &(i, g) in col {
                out[i * nodes..(i + 1) * nodes]
                    .iter_mut()
                    .zip(r.iter())
                    .for_each(|(o, v)| *o += g * v);
            }
        }
    }

    /// One IMEX Euler step.
    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        self.check_state(state)?;
        let nodes = self.grid.n;
        let mut rhs = std::mem::take(&mut self.rhs);
        self.reaction_field(&state.c, &mut rhs);
        for (r, c) in rhs.iter_mut().zip(&state.c) {
            *r = c + self.dt * *r;
        }
        for (i, factor) in self.factors.iter().enumerate() {
            factor.solve_in_place(&mut rhs[i * nodes..(i + 1) * nodes]);
        }
        std::mem::swap(&mut state.c, &mut rhs);
        self.rhs = rhs;
        state.t += self.dt;
        state.steps += 1;

        let mut clamped = 0u64;
        for (idx, v) in state.c.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::Simulation(format!(
                    "non-finite value at species {} node {} (t = {})",
                    idx / nodes,
                    idx % nodes,
                    state.t
                )));
            }
            if *v < -self.clamp_negative {
                *v = 0.0;
                clamped += 1;
            }
        }
        if clamped > 0 {
            warn!("clamped {clamped} negative values to zero at t = {}", state.t);
            self.clamped += clamped;
        }
        Ok(())
    }

    /// Trapezoid means `⟨cᵢ⟩` per species.
    pub fn species_means(&self, c: &[f64]) -> Vec<f64> {
        let nodes = self.grid.n;
        let w = self.grid.mean_weights();
        (0..self.n_species())
            .map(|i| c[i * nodes..(i + 1) * nodes].iter().zip(&w).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Discrete mass functionals `Zᵀ⟨c⟩`.
    pub fn masses(&self, c: &[f64]) -> Vec<f64> {
        self.stoich.masses(&self.species_means(c))
    }

    /// `‖f(c) + D L c‖∞`.
    pub fn residual(&mut self, c: &[f64]) -> f64 {
        let nodes = self.grid.n;
        let mut g = vec![0.0; c.len()];
        self.reaction_field(c, &mut g);
        let mut lc = vec![0.0; nodes];
        let mut worst = 0.0_f64;
        for i in 0..self.n_species() {
            self.lap.apply(&c[i * nodes..(i + 1) * nodes], &mut lc);
            for node in 0..nodes {
                let v = g[i * nodes + node] + self.net.d[i] * lc[node];
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// Weighted `L²` distance to a homogeneous state:
    /// `(Σᵢ ⟨(cᵢ − c̄ᵢ)²⟩)^{1/2}`.
    pub fn distance_l2(&self, c: &[f64], cbar: &[f64]) -> f64 {
        let nodes = self.grid.n;
        let w = self.grid.mean_weights();
        let mut s = 0.0;
        for (i, cb) in cbar.iter().enumerate() {
            for node in 0..nodes {
                let d = c[i * nodes + node] - cb;
                s += w[node] * d * d;
            }
        }
        s.sqrt()
    }

    pub fn distance_inf(&self, c: &[f64], cbar: &[f64]) -> f64 {
        let nodes = self.grid.n;
        c.iter()
            .enumerate()
            .fold(0.0_f64, |m, (idx, v)| m.max((v - cbar[idx / nodes]).abs()))
    }

    /// Integrates to `cfg.t_end`, recording a log row every `cfg.log_every`
    /// steps and at the end.
    pub fn run(&mut self, state: &mut SimState, cfg: &SimConfig, cbar: &[f64]) -> Result<RunLog> {
        self.set_dt(cfg.dt)?;
        self.check_state(state)?;
        if cbar.len() != self.n_species() {
            return Err(Error::Dimension {
                what: "cbar",
                got: cbar.len(),
                expected: self.n_species(),
            });
        }
        let n_steps = ((cfg.t_end - state.t) / cfg.dt).round().max(0.0) as u64;
        let every = cfg.log_every.max(1);
        let mut log = RunLog::default();
        log.push(self, state, cbar);
        for s in 1..=n_steps {
            self.step(state)?;
            if s % every == 0 || s == n_steps {
                log.push(self, state, cbar);
            }
        }
        Ok(log)
    }

    pub fn snapshot_csv(&self, state: &SimState) -> String {
        let nodes = self.grid.n;
        let mut out = String::from("x");
        for s in &self.net.species {
            let _ = write!(out, ",{}", s.name);
        }
        out.push('\n');
        for node in 0..nodes {
            let _ = write!(out, "{:.17e}", self.grid.x(node));
            for i in 0..self.n_species() {
                let _ = write!(out, ",{:.17e}", state.c[i * nodes + node]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub masses: Vec<f64>,
    pub residual: f64,
    pub dist_l2: f64,
    pub dist_inf: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    fn push(&mut self, sim: &mut Simulator, state: &SimState, cbar: &[f64]) {
        self.rows.push(LogRow {
            t: state.t,
            masses: sim.masses(&state.c),
            residual: sim.residual(&state.c),
            dist_l2: sim.distance_l2(&state.c, cbar),
            dist_inf: sim.distance_inf(&state.c, cbar),
        });
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn dist_l2(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.dist_l2).collect()
    }

    /// `max_t |m(t) − m(0)|`, componentwise maximum.
    pub fn max_mass_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        self.rows
            .iter()
            .flat_map(|r| r.masses.iter().zip(&first.masses).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let n_m = self.rows.first().map_or(0, |r| r.masses.len());
        let mut out = String::from("t");
        for i in 1..=n_m {
            let _ = write!(out, ",m{i}");
        }
        out.push_str(",residual_inf,dist_l2,dist_inf\n");
        for r in &self.rows {
            let _ = write!(out, "{:.17e}", r.t);
            for m in &r.masses {
                let _ = write!(out, ",{m:.17e}");
            }
            let _ = writeln!(out, ",{:.17e},{:.17e},{:.17e}", r.residual, r.dist_l2, r.dist_inf);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// `c̄ + amplitude · cos(ℓπ(x+l)/(2l)) · Re v`, where `v` is the leading
    /// eigenvector of `J(c̄) − μ_ℓ D`, normalized to unit max-modulus.
    /// Species outside `mask` are left unperturbed.
    Eigenmode {
        ell: u32,
        amplitude: f64,
        #[serde(default)]
        mask: Option<Vec<bool>>,
    },
    /// `c̄ + amplitude · cos(ℓπx/l)` on one species (0-based).
    Cosine { ell: u32, amplitude: f64, species: usize },
    /// Independent uniform perturbations in `[−amplitude, amplitude]`.
    Random { amplitude: f64, seed: u64 },
}

/// Builds an initial field around `cbar`. With `mass_neutral`, the
/// perturbation's mean is projected off the conservation directions.
pub fn make_ic(
    sim: &Simulator,
    cbar: &[f64],
    ic: &InitialCondition,
    mass_neutral: bool,
) -> Result<Vec<f64>> {
    let n = sim.n_species();
    let grid = sim.grid;
    let nodes = grid.n;
    if cbar.len() != n {
        return Err(Error::Dimension {
            what: "cbar",
            got: cbar.len(),
            expected: n,
        });
    }
    let mut pert = vec![0.0; n * nodes];
    match ic {
        InitialCondition::Eigenmode { ell, amplitude, mask } => {
            if let Some(m) = mask {
                if m.len() != n {
                    return Err(Error::Dimension {
                        what: "species mask",
                        got: m.len(),
                        expected: n,
                    });
                }
            }
            let v = leading_mode_vector(&sim.net, &sim.stoich, cbar, mode_eigenvalue(&grid, *ell))?;
            let kappa = f64::from(*ell) * PI / (2.0 * grid.l);
            for i in 0..n {
                if mask.as_ref().is_some_and(|m| !m[i]) {
                    continue;
                }
                for node in 0..nodes {
                    pert[i * nodes + node] = amplitude * v[i] * (kappa * (grid.x(node) + grid.l)).cos();
                }
            }
        }
        InitialCondition::Cosine {
            ell,
            amplitude,
            species,
        } => {
            if *species >= n {
                return Err(Error::InvalidParameter(format!("species index {species} out of range")));
            }
            let kappa = f64::from(*ell) * PI / grid.l;
            for node in 0..nodes {
                pert[species * nodes + node] = amplitude * (kappa * grid.x(node)).cos();
            }
        }
        InitialCondition::Random { amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for p in pert.iter_mut() {
                *p = amplitude * rng.gen_range(-1.0..=1.0);
            }
        }
    }
    if mass_neutral {
        let means = sim.species_means(&pert);
        let z = &sim.stoich.conservation;
        let shift = z * (z.transpose() * DVector::from_column_slice(&means));
        for i in 0..n {
            for node in 0..nodes {
                pert[i * nodes + node] -= shift[i];
            }
        }
    }
    let c: Vec<f64> = pert
        .iter()
        .enumerate()
        .map(|(idx, p)| cbar[idx / nodes] + p)
        .collect();
    if let Some((idx, v)) = c.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Positivity(format!(
            "initial value {v} at species {} node {} is not positive",
            idx / nodes,
            idx % nodes
        )));
    }
    Ok(c)
}

/// `μ_ℓ = (ℓπ/(2l))²`.
pub fn mode_eigenvalue(grid: &Grid1D, ell: u32) -> f64 {
    (f64::from(ell) * PI / (2.0 * grid.l)).powi(2)
}

/// Leading eigenvalue of `J(c̄) − μD`.
pub fn leading_mode_eigenvalue(net: &ReactionNetwork, stoich: &Stoich, cbar: &[f64], mu: f64) -> Result<Complex64> {
    let mut a = jacobian(net, stoich, cbar)?;
    for (i, di) in net.d.iter().enumerate() {
        a[(i, i)] -= mu * di;
    }
    let mut ev = eigenvalues(&a)?;
    sort_eigenvalues(&mut ev);
    Ok(ev[0])
}

/// Real part of the leading eigenvector of `J(c̄) − μD`, scaled so its
/// largest entry is 1.
pub fn leading_mode_vector(net: &ReactionNetwork, stoich: &Stoich, cbar: &[f64], mu: f64) -> Result<Vec<f64>> {
    let mut a = jacobian(net, stoich, cbar)?;
    for (i, di) in net.d.iter().enumerate() {
        a[(i, i)] -= mu * di;
    }
    let mut ev = eigenvalues(&a)?;
    sort_eigenvalues(&mut ev);
    let v = eigenvector_near(&a, ev[0])?;
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let max = re.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Err(Error::Simulation("leading eigenvector has zero real part".into()));
    }
    Ok(re.iter().map(|x| x / max).collect())
}

/// Least-squares slope of `ln(amplitude)` against `t` over the linear-regime
/// window. For growing perturbations the window is `[2a₀, 0.1·scale]`; for
/// decaying ones `[max(10⁻⁶a₀, 10⁻¹²·scale), a₀/2]`.
pub fn growth_rate(times: &[f64], amps: &[f64], scale: f64) -> Result<f64> {
    if times.len() != amps.len() || times.is_empty() {
        return Err(Error::Dimension {
            what: "run log",
            got: amps.len(),
            expected: times.len(),
        });
    }
    let a0 = amps[0];
    if !(a0 > 0.0) {
        return Err(Error::WindowNotFound("initial amplitude is zero".into()));
    }
    let last = *amps.last().expect("non-empty");
    let (lo, hi) = if last > a0 {
        (2.0 * a0, 0.1 * scale)
    } else {
        ((1e-6 * a0).max(1e-12 * scale), 0.5 * a0)
    };
    // First contiguous stretch inside the window.
    let start = amps.iter().position(|&a| a >= lo && a <= hi);
    let Some(start) = start else {
        return Err(Error::WindowNotFound(format!("no samples with amplitude in [{lo:e}, {hi:e}]")));
    };
    let end = amps[start..]
        .iter()
        .position(|&a| !(a >= lo && a <= hi))
        .map_or(amps.len(), |p| start + p);
    if end - start < 3 {
        return Err(Error::WindowNotFound(format!(
            "only {} samples with amplitude in [{lo:e}, {hi:e}]",
            end - start
        )));
    }
    let ts = &times[start..end];
    let ys: Vec<f64> = amps[start..end].iter().map(|a| a.ln()).collect();
    let m = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let (num, den) = ts
        .iter()
        .zip(&ys)
        .fold((0.0, 0.0), |(n, d), (t, y)| (n + (t - tm) * (y - ym), d + (t - tm) * (t - tm)));
    Ok(num / den)
}
