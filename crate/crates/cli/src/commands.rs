use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use turing_crn::domain::{
    count_unstable_modes, min_domain_measure, modes_to_csv, neumann_modes, threshold_verdict, DomainSpec,
};
use turing_crn::param::{check_instability_condition, check_multistationarity_condition, linearize, xi1_threshold, Linearization};
use turing_crn::rdsim::{
    growth_rate, leading_mode_eigenvalue, make_ic, mode_eigenvalue, Grid1D, InitialCondition, RunLog, SimConfig,
    SimState, Simulator,
};
use turing_crn::spectral::{dispersion, StabilityReport};
use turing_crn::{Error, Tolerances};

use crate::manifest::{RunManifest, Sink};
use crate::model::{Model, ModelArgs};
use crate::CliError;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Interval length to test against the 1D threshold.
    #[arg(long = "L")]
    pub length: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1.0)]
    pub kappa_max: f64,
    #[arg(long, default_value_t = 201)]
    pub npts: usize,
    /// Number of leading eigenvalue curves to write.
    #[arg(long, default_value_t = 3)]
    pub curves: usize,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Spatial dimension (1, 2 or 3); all three when omitted.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub dim: Option<u32>,
    /// Domain measure to classify against the threshold.
    #[arg(long)]
    pub measure: Option<f64>,
    /// Interval length; shorthand for `--dim 1 --measure L`.
    #[arg(long = "L", conflicts_with_all = ["measure", "dim"])]
    pub length: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Interval length `2l`.
    #[arg(long = "L", default_value_t = 40.0)]
    pub length: f64,
    /// Number of grid nodes.
    #[arg(long = "N", default_value_t = 201)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub t_end: f64,
    /// `eigenmode:ELL:AMP`, `cosine:ELL:AMP:SPECIES` or `random:AMP`.
    #[arg(long, default_value = "eigenmode:1:1e-3")]
    pub ic: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Project the perturbation off the conservation directions.
    #[arg(long)]
    pub mass_neutral: bool,
    #[arg(long, default_value_t = 100)]
    pub log_every: u64,
    /// Number of snapshots after the initial one.
    #[arg(long, default_value_t = 10)]
    pub snapshots: u32,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Shape {
    Interval,
    Disk,
    Ball,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[arg(long, value_enum, default_value = "interval")]
    pub shape: Shape,
    /// Length of an interval, radius of a disk or ball.
    #[arg(long, required_unless_present = "length")]
    pub size: Option<f64>,
    /// Interval length; shorthand for `--shape interval --size L`.
    #[arg(long = "L", conflicts_with_all = ["size", "shape"])]
    pub length: Option<f64>,
    #[arg(long)]
    pub mu_max: f64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Shortest round-trip form, in exponent notation away from unit scale.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), num)
}

fn model_params(model: &Model) -> Value {
    json!({
        "model": model.name,
        "k": model.network.k,
        "d": model.network.d,
        "xi": model.xi,
    })
}

fn linearized(model: &Model, tol: &Tolerances) -> Result<Linearization, CliError> {
    Ok(linearize(&model.network, model.param()?, &model.xi, tol)?)
}

pub fn analyze(args: &AnalyzeArgs, tol: &Tolerances) -> Result<(), CliError> {
    let model = args.model.resolve()?;
    let lin = linearized(&model, tol)?;
    let d = &model.network.d;
    let rep = StabilityReport::build(&lin.jacobian, d, tol)?;

    let mut out = String::new();
    let mut kv = |key: &str, value: String| {
        let _ = writeln!(out, "{key}={value}");
    };
    kv("model", model.name.clone());
    kv("k", list(&model.network.k));
    kv("d", list(d));
    kv("xi", list(&model.xi));
    kv("cbar", list(&lin.steady.cbar));
    kv("steady_residual", num(lin.steady.residual));
    kv("ode_stable", rep.ode_stable.to_string());
    kv("ode_zero_eigs", rep.n_zero_eigs.to_string());
    kv(
        "ode_leading_eig",
        rep.leading_ode_eig.map_or("none".into(), |(re, im)| format!("{},{}", num(re), num(im))),
    );
    kv("n", rep.poly.n.to_string());
    kv("s", rep.poly.s.to_string());
    kv("coeffs", list(&rep.poly.coeffs));
    kv("cond_a0", rep.cond_a0.to_string());
    kv("cond_as", rep.cond_as.to_string());
    kv("mu_bar", opt(rep.mu_bar));
    kv("positive_roots", list(&rep.all_positive_roots));
    for dim in 1..=3 {
        let t = rep.mu_bar.map(|m| min_domain_measure(m, dim)).transpose()?;
        kv(&format!("threshold_d{dim}"), opt(t));
    }
    if model.is_mapk() {
        let ic = check_instability_condition(&model.network.k, d)?;
        kv("instability_condition", ic.holds.to_string());
        kv("instability_margin", num(ic.margin));
        kv(
            "multistationarity_condition",
            check_multistationarity_condition(&model.network.k)?.to_string(),
        );
        let xb = match xi1_threshold(&model.network.k, d, model.xi[1], model.xi[2], tol) {
            Ok(x) => Some(x),
            Err(Error::ConditionNotSatisfied(_) | Error::NoPositiveRoot(_)) => None,
            Err(e) => return Err(e.into()),
        };
        kv("xi1_bar", opt(xb));
    }
    if let Some(length) = args.length {
        kv("interval_length", num(length));
        match rep.mu_bar {
            Some(m) => {
                let t = min_domain_measure(m, 1)?;
                kv("interval_verdict", verdict_str(threshold_verdict(length, t)).into());
                kv("unstable_modes", count_unstable_modes(length, m).to_string());
            }
            None => kv("interval_verdict", "none".into()),
        }
    }
    kv(
        "verdict",
        if rep.turing_like() {
            "Turing-like instability certified".into()
        } else {
            "no Turing-like instability certified".into()
        },
    );

    let mut params = model_params(&model);
    params["L"] = json!(args.length);
    let mut sink = Sink::new(args.out.as_deref(), RunManifest::new("analyze", params, *tol, model.inputs.clone()))?;
    print!("{out}");
    sink.emit("analysis.txt", &out, false)?;
    sink.emit("report.csv", &rep.to_csv(), false)?;
    sink.finish()
}

fn verdict_str(v: turing_crn::domain::ThresholdVerdict) -> &'static str {
    use turing_crn::domain::ThresholdVerdict::*;
    match v {
        Unstable => "unstable",
        Marginal => "marginal",
        BelowThreshold => "below-threshold",
    }
}

pub fn dispersion_cmd(args: &DispersionArgs, tol: &Tolerances) -> Result<(), CliError> {
    let model = args.model.resolve()?;
    let lin = linearized(&model, tol)?;
    let table = dispersion(&lin.jacobian, &model.network.d, args.kappa_max, args.npts, args.curves, tol)?;

    let mut params = model_params(&model);
    params["kappa_max"] = json!(args.kappa_max);
    params["npts"] = json!(args.npts);
    params["curves"] = json!(args.curves);
    let mut sink = Sink::new(args.out.as_deref(), RunManifest::new("dispersion", params, *tol, model.inputs.clone()))?;
    let summary = format!(
        "onset_type={}\ncurvature_at_zero={}\nimag_at_zero={}\ndecays_at_kappa_max={}\n",
        table.onset_type.as_str(),
        num(table.curvature_at_zero),
        num(table.imag_at_zero),
        table.decays_at_kappa_max
    );
    eprint!("{summary}");
    sink.params_mut()["summary"] = json!({
        "onset_type": table.onset_type.as_str(),
        "curvature_at_zero": table.curvature_at_zero,
        "imag_at_zero": table.imag_at_zero,
        "decays_at_kappa_max": table.decays_at_kappa_max,
    });
    sink.emit("dispersion.csv", &table.to_csv(), true)?;
    sink.finish()
}

pub fn threshold(args: &ThresholdArgs, tol: &Tolerances) -> Result<(), CliError> {
    let model = args.model.resolve()?;
    let lin = linearized(&model, tol)?;
    let rep = StabilityReport::build(&lin.jacobian, &model.network.d, tol)?;
    let (dims, measure) = match args.length {
        Some(l) => (vec![1], Some(l)),
        None => (args.dim.map_or(vec![1, 2, 3], |d| vec![d]), args.measure),
    };

    let mut params = model_params(&model);
    params["dims"] = json!(dims);
    params["measure"] = json!(measure);
    let mut sink = Sink::new(args.out.as_deref(), RunManifest::new("threshold", params, *tol, model.inputs.clone()))?;

    let mu_bar = match rep.mu_bar {
        Some(m) if rep.cond_a0 && rep.cond_as => m,
        _ => {
            let msg = "no threshold; conditions not met\n";
            sink.emit("threshold.txt", msg, true)?;
            return sink.finish();
        }
    };
    let mut out = String::from("dim,mu_bar,min_measure,shape,min_size,measure,verdict,unstable_modes\n");
    for dim in dims {
        let t = min_domain_measure(mu_bar, dim)?;
        let extremal = DomainSpec::with_measure(dim, t)?;
        let (shape, size) = shape_size(&extremal);
        let _ = write!(out, "{dim},{mu_bar},{t},{shape},{size}");
        match measure {
            Some(m) => {
                let domain = DomainSpec::with_measure(dim, m)?;
                let unstable = if dim == 1 {
                    count_unstable_modes(m, mu_bar)
                } else {
                    neumann_modes(domain, mu_bar)?.iter().filter(|md| md.eigenvalue < mu_bar).count()
                };
                let _ = writeln!(out, ",{m},{},{unstable}", verdict_str(threshold_verdict(m, t)));
            }
            None => out.push_str(",,,\n"),
        }
    }
    sink.emit("threshold.csv", &out, true)?;
    sink.finish()
}

fn shape_size(d: &DomainSpec) -> (&'static str, f64) {
    match *d {
        DomainSpec::Interval { length } => ("interval", length),
        DomainSpec::Disk { radius } => ("disk", radius),
        DomainSpec::Ball { radius } => ("ball", radius),
    }
}

fn parse_ic(spec: &str, seed: u64) -> Result<InitialCondition, CliError> {
    let bad = |why: &str| CliError::Input(format!("--ic `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad("amplitude is not a number"));
    let int = |s: &str| s.parse::<u32>().map_err(|_| bad("mode index is not a non-negative integer"));
    match parts.as_slice() {
        ["eigenmode", ell, amp] => Ok(InitialCondition::Eigenmode {
            ell: int(ell)?,
            amplitude: num(amp)?,
            mask: None,
        }),
        ["cosine", ell, amp, species] => Ok(InitialCondition::Cosine {
            ell: int(ell)?,
            amplitude: num(amp)?,
            species: species.parse().map_err(|_| bad("species index is not an integer"))?,
        }),
        ["random", amp] => Ok(InitialCondition::Random {
            amplitude: num(amp)?,
            seed,
        }),
        _ => Err(bad("expected eigenmode:ELL:AMP, cosine:ELL:AMP:SPECIES or random:AMP")),
    }
}

pub fn simulate(args: &SimulateArgs, tol: &Tolerances) -> Result<(), CliError> {
    let model = args.model.resolve()?;
    let lin = linearized(&model, tol)?;
    let cbar = lin.steady.cbar.clone();
    if !(args.t_end > 0.0) {
        return Err(CliError::Input("--t-end must be positive".into()));
    }
    let grid = Grid1D::new(args.length / 2.0, args.nodes)?;
    let mut sim = Simulator::new(model.network.clone(), grid, args.dt, tol)?;
    let ic = parse_ic(&args.ic, args.seed)?;
    let mut state = SimState::new(make_ic(&sim, &cbar, &ic, args.mass_neutral)?);

    let mut params = model_params(&model);
    params["L"] = json!(args.length);
    params["N"] = json!(args.nodes);
    params["dt"] = json!(args.dt);
    params["t_end"] = json!(args.t_end);
    params["ic"] = serde_json::to_value(&ic).expect("ic serializes");
    params["mass_neutral"] = json!(args.mass_neutral);
    params["log_every"] = json!(args.log_every);
    params["snapshots"] = json!(args.snapshots);
    let mut sink = Sink::new(args.out.as_deref(), RunManifest::new("simulate", params, *tol, model.inputs.clone()))?;

    sink.emit("snapshot_000.csv", &sim.snapshot_csv(&state), false)?;
    let segments = args.snapshots.max(1);
    let mut log = RunLog::default();
    for seg in 1..=segments {
        let cfg = SimConfig {
            dt: args.dt,
            t_end: args.t_end * f64::from(seg) / f64::from(segments),
            log_every: args.log_every,
        };
        let part = sim.run(&mut state, &cfg, &cbar)?;
        let skip = usize::from(!log.rows.is_empty());
        log.rows.extend(part.rows.into_iter().skip(skip));
        if args.snapshots > 0 {
            sink.emit(&format!("snapshot_{seg:03}.csv"), &sim.snapshot_csv(&state), false)?;
        }
    }

    let scale = cbar.iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut summary = format!(
        "steps={}\nt={}\nmax_mass_drift={}\nfinal_dist_inf={}\nclamped={}\n",
        state.steps,
        num(state.t),
        num(log.max_mass_drift()),
        num(log.rows.last().map_or(f64::NAN, |r| r.dist_inf)),
        sim.clamped
    );
    let measured = growth_rate(&log.times(), &log.dist_l2(), scale).ok();
    let _ = writeln!(summary, "growth_rate={}", opt(measured));
    if let InitialCondition::Eigenmode { ell, .. } = ic {
        let predicted = leading_mode_eigenvalue(&sim.net, &sim.stoich, &cbar, mode_eigenvalue(&grid, ell))?;
        let _ = writeln!(summary, "predicted_growth_rate={}", num(predicted.re));
    }
    if sink.to_dir() {
        print!("{summary}");
    } else {
        eprint!("{summary}");
    }
    sink.emit("summary.txt", &summary, false)?;
    sink.emit("runlog.csv", &log.to_csv(), true)?;
    sink.finish()
}

pub fn modes(args: &ModesArgs, tol: &Tolerances) -> Result<(), CliError> {
    let domain = match (args.length, args.shape, args.size) {
        (Some(l), _, _) => DomainSpec::Interval { length: l },
        (None, Shape::Interval, Some(s)) => DomainSpec::Interval { length: s },
        (None, Shape::Disk, Some(s)) => DomainSpec::Disk { radius: s },
        (None, Shape::Ball, Some(s)) => DomainSpec::Ball { radius: s },
        (None, _, None) => return Err(CliError::Input("--size or --L is required".into())),
    };
    let list = neumann_modes(domain, args.mu_max)?;
    let params = json!({ "domain": domain, "mu_max": args.mu_max });
    let mut sink = Sink::new(args.out.as_deref(), RunManifest::new("modes", params, *tol, Vec::new()))?;
    sink.emit("modes.csv", &modes_to_csv(&list), true)?;
    sink.finish()
}
