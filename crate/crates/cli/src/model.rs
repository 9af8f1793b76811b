use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use sha2::{Digest, Sha256};

use turing_crn::crn::ReactionNetwork;
use turing_crn::models::{self, MAPK_BASE_D, MAPK_BASE_XI, MAPK_DD};
use turing_crn::param::MonomialParam;

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Built-in model name or path to a network JSON file.
    #[arg(value_name = "MODEL")]
    pub model_pos: Option<String>,

    #[arg(long = "model", value_name = "MODEL", conflicts_with = "model_pos")]
    pub model: Option<String>,

    /// Full rate-constant vector (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub k: Option<Vec<f64>>,

    /// Single rate-constant overrides, written `--k3 4` on the command line.
    #[arg(long = "set-k", hide = true, value_name = "INDEX=VALUE")]
    pub set_k: Vec<String>,

    /// Diffusion coefficients (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub d: Option<Vec<f64>>,

    /// Free parameters of the steady-state parametrization.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,

    /// Parametrization JSON for a custom network.
    #[arg(long, value_name = "FILE")]
    pub param: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

pub struct Model {
    pub name: String,
    pub network: ReactionNetwork,
    pub param: Option<MonomialParam>,
    pub xi: Vec<f64>,
    pub inputs: Vec<InputFile>,
}

impl Model {
    pub fn is_mapk(&self) -> bool {
        self.name == MAPK_DD
    }

    pub fn param(&self) -> Result<&MonomialParam, CliError> {
        self.param
            .as_ref()
            .ok_or_else(|| CliError::Input("a custom network needs --param with its steady-state parametrization".into()))
    }
}

fn read_input(path: &Path, inputs: &mut Vec<InputFile>) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    inputs.push(InputFile {
        path: path.display().to_string(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    });
    String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))
}

fn parse_override(s: &str) -> Result<(usize, f64), CliError> {
    let bad = || CliError::Input(format!("rate override `{s}` is not INDEX=VALUE"));
    let (i, v) = s.split_once('=').ok_or_else(bad)?;
    let i: usize = i.trim().parse().map_err(|_| bad())?;
    let v: f64 = v.trim().parse().map_err(|_| bad())?;
    if i == 0 {
        return Err(CliError::Input("rate constants are numbered from k1".into()));
    }
    Ok((i - 1, v))
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<Model, CliError> {
        let name = self
            .model
            .clone()
            .or_else(|| self.model_pos.clone())
            .unwrap_or_else(|| MAPK_DD.to_string());
        let mut inputs = Vec::new();

        let (mut k, d, param, default_xi, base) = if models::builtin_names().contains(&name.as_str()) {
            let k = self.k.clone().unwrap_or_else(|| models::mapk_base_k(4.0));
            let d = self.d.clone().unwrap_or_else(|| MAPK_BASE_D.to_vec());
            (k, d, Some(MonomialParam::mapk()), MAPK_BASE_XI.to_vec(), None)
        } else {
            let text = read_input(Path::new(&name), &mut inputs)?;
            let net = ReactionNetwork::from_json(&text)?;
            let param = match &self.param {
                Some(p) => Some(MonomialParam::from_json(&read_input(p, &mut inputs)?)?),
                None => None,
            };
            let xi = vec![1.0; param.as_ref().map_or(0, MonomialParam::n_free)];
            let k = self.k.clone().unwrap_or_else(|| net.k.clone());
            let d = self.d.clone().unwrap_or_else(|| net.d.clone());
            (k, d, param, xi, Some(net))
        };
        if self.param.is_some() && base.is_none() {
            return Err(CliError::Input("--param applies to custom networks only".into()));
        }

        for s in &self.set_k {
            let (i, v) = parse_override(s)?;
            let len = k.len();
            *k.get_mut(i)
                .ok_or_else(|| CliError::Input(format!("k{} is out of range (model has {len} rate constants)", i + 1)))? = v;
        }

        let network = match base {
            None => models::builtin(&name, &k, &d)?.network,
            Some(net) => net.with_k(k)?.with_d(d)?,
        };
        let xi = self.xi.clone().unwrap_or(default_xi);
        if let Some(p) = &param {
            if xi.len() != p.n_free() {
                return Err(CliError::Input(format!(
                    "--xi has {} entries, the parametrization has {} free parameters",
                    xi.len(),
                    p.n_free()
                )));
            }
        }
        Ok(Model {
            name,
            network,
            param,
            xi,
            inputs,
        })
    }
}

/// Rewrites `--k3 4` / `--k3=4` into `--set-k 3=4`.
pub fn rewrite_rate_flags(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = args.into_iter().peekable();
    while let Some(a) = iter.next() {
        let index = a
            .strip_prefix("--k")
            .map(|rest| rest.split_once('=').map_or((rest, None), |(i, v)| (i, Some(v))))
            .filter(|(i, _)| !i.is_empty() && i.bytes().all(|b| b.is_ascii_digit()));
        match index {
            Some((i, Some(v))) => {
                out.push("--set-k".into());
                out.push(format!("{i}={v}"));
            }
            Some((i, None)) => {
                out.push("--set-k".into());
                out.push(format!("{i}={}", iter.next().unwrap_or_default()));
            }
            None => out.push(a),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rewrites_indexed_rate_flags() {
        let args = ["x", "--k3", "4", "--k12=0.5", "--kappa-max", "1", "--k", "1,2"].map(String::from);
        assert_eq!(
            rewrite_rate_flags(args),
            ["x", "--set-k", "3=4", "--set-k", "12=0.5", "--kappa-max", "1", "--k", "1,2"].map(String::from)
        );
    }

    #[test]
    fn override_parsing() {
        assert_eq!(parse_override("3=4.5").unwrap(), (2, 4.5));
        assert!(parse_override("0=1").is_err());
        assert!(parse_override("k3=1").is_err());
    }
}
