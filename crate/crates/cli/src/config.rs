//! Scenario configuration: TOML schema, `--override` merging and hashing.

use std::path::{Path, PathBuf};

use nsoc::bench::Method;
use nsoc::dae::IntegratorConfig;
use nsoc::nlp::NlpOptions;
use nsoc::wtps::{SampledWind, WindProfile, WtpsParams, WtpsScenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Wtps,
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub t0: f64,
    pub tf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindConfig {
    Constant { v: f64 },
    Ramp { v0: f64, v_f: f64, t_on: f64, t_off: f64 },
    Gaussian { v0: f64, mu: f64, sigma: f64 },
    /// Two-column CSV `t_seconds,v_mps`; relative paths resolve against the
    /// config file's directory.
    Data { path: PathBuf },
}

/// Optimizer settings; unset fields keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub grad_tol: Option<f64>,
    pub step_tol: Option<f64>,
    pub constraint_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_outer: Option<usize>,
    pub rho0: Option<f64>,
    pub stagnation_rtol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub steps_per_interval: Option<usize>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub regularity_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub methods: Vec<String>,
    /// Smoothing parameters for the error table (alpha for the block move,
    /// N for the turbine).
    #[serde(default)]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: Problem,
    #[serde(default = "default_method")]
    pub method: String,
    pub n_s: usize,
    pub horizon: Option<Horizon>,
    pub wind: Option<WindConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    pub params: Option<WtpsParams>,
    pub compare: Option<CompareConfig>,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
}

fn default_method() -> String {
    "ld".into()
}

/// A parsed configuration with the hash of its effective contents.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub hash: String,
    /// Directory relative data paths resolve against.
    pub base_dir: PathBuf,
}

/// Read `path`, apply `key=value` overrides and validate against the schema.
pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: ScenarioConfig = table
        .clone()
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    validate(&config)?;
    // the output location does not change what is computed
    table.remove("out");
    let canonical = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig {
        config,
        hash,
        base_dir,
    })
}

/// Set a dotted `key` to `value`, parsed as a TOML value when possible and as
/// a string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn validate(c: &ScenarioConfig) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Config(m));
    c.method.parse::<Method>().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(cmp) = &c.compare {
        if cmp.methods.is_empty() {
            return bad("compare.methods must not be empty".into());
        }
        for m in &cmp.methods {
            m.parse::<Method>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if cmp.sweep.iter().any(|v| !(*v > 0.0)) {
            return bad("compare.sweep entries must be positive".into());
        }
    }
    if c.n_s == 0 {
        return bad("n_s must be at least 1".into());
    }
    match c.problem {
        Problem::Block => {
            if c.horizon.is_some() || c.wind.is_some() || c.params.is_some() {
                return bad("the block problem has a fixed horizon [0, 1] and takes no horizon, wind or params".into());
            }
            if c.integrator != IntegratorSettings::default() {
                return bad("the block problem takes no integrator settings".into());
            }
            if c.n_s < 2 {
                return bad(format!("block problem needs n_s >= 2, got {}", c.n_s));
            }
        }
        Problem::Wtps => {
            let Some(h) = &c.horizon else {
                return bad("wtps problem needs [horizon]".into());
            };
            if !(h.t0.is_finite() && h.tf.is_finite()) || h.tf < h.t0 {
                return bad(format!("horizon: tf ({}) must not precede t0 ({})", h.tf, h.t0));
            }
            if c.wind.is_none() {
                return bad("wtps problem needs [wind]".into());
            }
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn method(&self) -> Method {
        self.method.parse().expect("validated on load")
    }

    pub fn compare_methods(&self) -> Vec<Method> {
        match &self.compare {
            Some(c) => c.methods.iter().map(|m| m.parse().expect("validated on load")).collect(),
            None => vec![self.method()],
        }
    }

    pub fn sweep(&self) -> Vec<f64> {
        self.compare.as_ref().map(|c| c.sweep.clone()).unwrap_or_default()
    }

    pub fn nlp_options(&self) -> NlpOptions {
        let d = NlpOptions::default();
        let s = &self.solver;
        NlpOptions {
            grad_tol: s.grad_tol.unwrap_or(d.grad_tol),
            step_tol: s.step_tol.unwrap_or(d.step_tol),
            constraint_tol: s.constraint_tol.unwrap_or(d.constraint_tol),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            max_outer: s.max_outer.unwrap_or(d.max_outer),
            rho0: s.rho0.unwrap_or(d.rho0),
            stagnation_rtol: s.stagnation_rtol.unwrap_or(d.stagnation_rtol),
        }
    }

    fn integrator_config(&self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        let s = &self.integrator;
        IntegratorConfig {
            steps_per_interval: s.steps_per_interval.unwrap_or(d.steps_per_interval),
            newton_tol: s.newton_tol.unwrap_or(d.newton_tol),
            newton_max_iter: s.newton_max_iter.unwrap_or(d.newton_max_iter),
            regularity_floor: s.regularity_floor.unwrap_or(d.regularity_floor),
            ..d
        }
    }

    /// Build the turbine scenario, loading wind data where configured.
    pub fn wtps_scenario(&self, base_dir: &Path) -> Result<WtpsScenario, CliError> {
        let h = self.horizon.as_ref().expect("validated on load");
        let wind = match self.wind.as_ref().expect("validated on load") {
            WindConfig::Constant { v } => WindProfile::Constant(*v),
            WindConfig::Ramp { v0, v_f, t_on, t_off } => WindProfile::ramp(*v0, *v_f, *t_on, *t_off)?,
            WindConfig::Gaussian { v0, mu, sigma } => WindProfile::gaussian(*v0, *mu, *sigma)?,
            WindConfig::Data { path } => {
                let full = base_dir.join(path);
                let file = std::fs::File::open(&full)
                    .map_err(|e| CliError::Data(format!("cannot open {}: {e}", full.display())))?;
                let data = SampledWind::read_csv(file)
                    .map_err(|e| CliError::Data(format!("{}: {e}", full.display())))?;
                let (lo, hi) = data.span();
                if h.t0 < lo || h.tf > hi {
                    return Err(CliError::Data(format!(
                        "{} covers [{lo}, {hi}] but the horizon is [{}, {}]",
                        full.display(),
                        h.t0,
                        h.tf
                    )));
                }
                WindProfile::Sampled(data)
            }
        };
        let params = self.params.clone().unwrap_or_default();
        let mut sc = WtpsScenario::new(params, wind, h.t0, h.tf, self.n_s);
        sc.integrator = self.integrator_config();
        sc.validate()?;
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_values_and_nest() {
        let mut t: toml::Table = "n_s = 20\n[solver]\nmax_iter = 5\n".parse().unwrap();
        apply_override(&mut t, "solver.max_iter=7").unwrap();
        apply_override(&mut t, "horizon.tf = 22.5").unwrap();
        apply_override(&mut t, "method=smoothed:10").unwrap();
        assert_eq!(t["solver"]["max_iter"].as_integer(), Some(7));
        assert_eq!(t["horizon"]["tf"].as_float(), Some(22.5));
        assert_eq!(t["method"].as_str(), Some("smoothed:10"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "n_s.x=1").is_err());
    }
}
