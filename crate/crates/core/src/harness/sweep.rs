//! Parameter sweeps over one config field, run in parallel.

use std::str::FromStr;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{run_experiment, RunResult};

/// `param=lo:hi:n`, where `param` is a dotted path into the config JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for SweepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("sweep '{s}' is not param=lo:hi:n"));
        let (param, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let spec = SweepSpec {
            param: param.trim().to_string(),
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
            n: n.trim().parse().map_err(|_| bad())?,
        };
        if spec.param.is_empty() || spec.n == 0 {
            return Err(bad());
        }
        Ok(spec)
    }
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + step * i as f64).collect()
    }
}

/// Copy of `base` with the numeric field at `path` set to `value`.
pub fn with_param(base: &ExperimentConfig, path: &str, value: f64) -> Result<ExperimentConfig> {
    let mut json = serde_json::to_value(base).expect("config serializes");
    let mut slot = &mut json;
    for key in path.split('.') {
        slot = match slot {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::InvalidParameter(format!("unknown config parameter '{path}'")))?;
    }
    // Integer fields (substep counts) need an integer JSON number.
    let number = if slot.is_u64() && value.fract() == 0.0 && value >= 0.0 {
        Some(serde_json::Number::from(value as u64))
    } else {
        serde_json::Number::from_f64(value)
    };
    *slot = number
        .map(Value::Number)
        .ok_or_else(|| Error::InvalidParameter(format!("sweep value {value} is not finite")))?;
    let cfg: ExperimentConfig = serde_json::from_value(json)
        .map_err(|e| Error::InvalidParameter(format!("sweep of '{path}': {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// One independent run per sweep value.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Vec<(f64, Result<RunResult>)> {
    spec.values()
        .into_par_iter()
        .map(|v| (v, with_param(base, &spec.param, v).and_then(|c| run_experiment(&c))))
        .collect()
}
