//! Flat `key = value` configuration for simulation runs.
//!
//! Recognized keys: `n`, `p`, `sparsity`, `sigma`, `scenario`, `ar_rho`,
//! `structured_tau`, `k_min`, `k_max`, `replicates`, `seed`, `fixed_design`,
//! `dof_convention`. Blank lines and `#` comments are ignored; later
//! assignments override earlier ones. `scenario` takes a comma-separated
//! list or `all`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::inference::DofConvention;
use crate::simulation::{Scenario, SimulationConfig};

pub const KEYS: [&str; 13] = [
    "n",
    "p",
    "sparsity",
    "sigma",
    "scenario",
    "ar_rho",
    "structured_tau",
    "k_min",
    "k_max",
    "replicates",
    "seed",
    "fixed_design",
    "dof_convention",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

/// Applies one `key = value` assignment.
pub fn apply(config: &mut SimulationConfig, key: &str, value: &str) -> Result<()> {
    let value = value.trim();
    match key.trim() {
        "n" => config.n = parse_num("n", value)?,
        "p" => config.p = parse_num("p", value)?,
        "sparsity" => config.sparsity = parse_num("sparsity", value)?,
        "sigma" => config.sigma = parse_num("sigma", value)?,
        "scenario" => {
            config.scenarios = if value == "all" {
                Scenario::ALL.to_vec()
            } else {
                value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(Scenario::from_str)
                    .collect::<Result<_>>()?
            }
        }
        "ar_rho" => config.ar_rho = parse_num("ar_rho", value)?,
        "structured_tau" => config.structured_tau = parse_num("structured_tau", value)?,
        "k_min" => config.k_min = parse_num("k_min", value)?,
        "k_max" => config.k_max = parse_num("k_max", value)?,
        "replicates" => config.replicates = parse_num("replicates", value)?,
        "seed" => config.seed = parse_num("seed", value)?,
        "fixed_design" => config.fixed_design = parse_bool("fixed_design", value)?,
        "dof_convention" => {
            config.dof_convention = DofConvention::parse(value)
                .ok_or_else(|| Error::config("dof_convention", "expected `n-1` or `n-k-1`"))?
        }
        other => return Err(Error::config(other, "unknown key")),
    }
    Ok(())
}

/// Parses a `key=value` override as given on the command line.
pub fn apply_override(config: &mut SimulationConfig, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override `{assignment}` is not of the form key=value")))?;
    apply(config, key, value)
}

pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let mut config = SimulationConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        apply(&mut config, key, value)?;
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Canonical key/value snapshot, in the order of [`KEYS`].
pub fn snapshot(config: &SimulationConfig) -> BTreeMap<String, String> {
    let scenarios: Vec<&str> = config.scenarios.iter().map(|s| s.as_str()).collect();
    let values = [
        config.n.to_string(),
        config.p.to_string(),
        config.sparsity.to_string(),
        config.sigma.to_string(),
        scenarios.join(","),
        config.ar_rho.to_string(),
        config.structured_tau.to_string(),
        config.k_min.to_string(),
        config.k_max.to_string(),
        config.replicates.to_string(),
        config.seed.to_string(),
        config.fixed_design.to_string(),
        config.dof_convention.as_str().to_string(),
    ];
    KEYS.iter().map(|k| k.to_string()).zip(values).collect()
}

pub fn render_config(config: &SimulationConfig) -> String {
    let snap = snapshot(config);
    KEYS.iter().map(|k| format!("{k} = {}\n", snap[*k])).collect()
}
