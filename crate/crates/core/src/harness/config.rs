//! Flat `key=value` experiment configuration files.
//!
//! Every world and pipeline parameter is settable; unknown keys are
//! errors so typos cannot silently fall back to defaults. `#` starts a
//! comment line.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mobility::Period;

use super::experiment::{ExperimentConfig, Method};
use super::world::PiSpec;

/// Parses a privacy budget: a literal real or `ln<x>` (e.g. `ln4`).
pub fn parse_epsilon(text: &str) -> Result<f64> {
    let t = text.trim();
    let value = if let Some(rest) = t.strip_prefix("ln") {
        let inner: f64 = rest
            .trim_matches(|c| c == '(' || c == ')')
            .parse()
            .map_err(|e| Error::invalid(format!("bad epsilon {t:?}: {e}")))?;
        inner.ln()
    } else {
        t.parse().map_err(|e| Error::invalid(format!("bad epsilon {t:?}: {e}")))?
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::invalid(format!("epsilon {t:?} must be positive")));
    }
    Ok(value)
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| Error::parse(line, format!("bad value for {key}: {e}")))
}

impl ExperimentConfig {
    /// Parses the flat key=value format, starting from defaults.
    pub fn parse_key_values(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got {raw:?}")))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "rows" => cfg.world.rows = parse_num(lineno, key, value)?,
                "cols" => cfg.world.cols = parse_num(lineno, key, value)?,
                "cell_km" => cfg.world.cell_km = parse_num(lineno, key, value)?,
                "n_users" => cfg.world.n_users = parse_num(lineno, key, value)?,
                "pi_true" => {
                    cfg.world.pi_true = if value == "uniform" {
                        PiSpec::Uniform
                    } else if let Some(exp) = value.strip_prefix("zipf:") {
                        PiSpec::Zipf { exponent: parse_num(lineno, key, exp)? }
                    } else {
                        return Err(Error::parse(
                            lineno,
                            format!("pi_true must be uniform or zipf:<s>, got {value:?}"),
                        ));
                    }
                }
                "lambda_home" => cfg.world.lambda_home = parse_num(lineno, key, value)?,
                "lambda_bg" => cfg.world.lambda_bg = parse_num(lineno, key, value)?,
                "n_secondary" => cfg.world.n_secondary = parse_num(lineno, key, value)?,
                "lambda_secondary_min" => {
                    cfg.world.lambda_secondary.0 = parse_num(lineno, key, value)?
                }
                "lambda_secondary_max" => {
                    cfg.world.lambda_secondary.1 = parse_num(lineno, key, value)?
                }
                "train_periods" => cfg.world.train_periods = parse_num(lineno, key, value)?,
                "test_periods" => cfg.world.test_periods = parse_num(lineno, key, value)?,
                "period" => {
                    cfg.world.period = match value {
                        "daily" => Period::Daily,
                        "weekly" => Period::Weekly,
                        other => {
                            return Err(Error::parse(
                                lineno,
                                format!("period must be daily or weekly, got {other:?}"),
                            ))
                        }
                    }
                }
                "seed" => cfg.master_seed = parse_num(lineno, key, value)?,
                "epsilon" => {
                    cfg.epsilon = parse_epsilon(value)
                        .map_err(|e| Error::parse(lineno, e.to_string()))?
                }
                "delta" => cfg.delta = parse_num(lineno, key, value)?,
                "k" => cfg.k = parse_num(lineno, key, value)?,
                "alpha_frac" => cfg.alpha_frac = parse_num(lineno, key, value)?,
                "rho" => cfg.rho = parse_num(lineno, key, value)?,
                "n_targets" => cfg.n_targets = parse_num(lineno, key, value)?,
                "targets" => {
                    let ids: Result<Vec<usize>> = value
                        .split(',')
                        .map(|s| parse_num(lineno, key, s.trim()))
                        .collect();
                    cfg.targets = Some(ids?);
                }
                "methods" => {
                    let methods: Result<Vec<Method>> =
                        value.split(',').map(|s| s.trim().parse()).collect();
                    cfg.methods =
                        methods.map_err(|e| Error::parse(lineno, e.to_string()))?;
                }
                "trials" => cfg.trials = parse_num(lineno, key, value)?,
                "p_min" => cfg.p_min = parse_num(lineno, key, value)?,
                "laplace_kernel_scale" => {
                    cfg.laplace_kernel_scale = parse_num(lineno, key, value)?
                }
                other => {
                    return Err(Error::parse(lineno, format!("unknown key {other:?}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_key_values(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse_key_values(&std::fs::read_to_string(path)?)
    }
}
