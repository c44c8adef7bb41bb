//! Model descriptions, grids and run configuration.

use clap::{Args, ValueEnum};
use serde::Serialize;

use rwre_core::envgen::PeriodicPattern;
use rwre_core::{EnvKind, EnvModel, ScalarDist, TimeFlavor};

use crate::CliError;

pub const DIST_GRAMMAR: &str = "Distribution grammar: constant:v | two-point:a,b:p (value b with probability p, a otherwise) | uniform:lo,hi | discrete:v1,..,vk:p1,..,pk";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    /// Discrete-time random conductance model; --dist is the conductance law.
    RcmDiscrete,
    /// Continuous-time random conductance model; --dist is the conductance law.
    RcmContinuous,
    /// I.i.d. jump probabilities; --dist is the law of rho = omega-/omega+.
    IidOmega,
    /// Continuous-time coin-flip pairing model; --dist is the law of a+, --dist-minus of a-.
    Coinflip,
    /// Stationary renewal environment; needs --a and --gamma.
    Renewal,
    /// Periodic environment; needs --pattern.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeArg {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Model family.
    #[arg(long, value_enum, required_unless_present = "env", conflicts_with = "env")]
    pub model: Option<ModelName>,
    /// Scalar law for the model (see the grammar below).
    #[arg(long, long_help = DIST_GRAMMAR)]
    pub dist: Option<String>,
    /// Law of a- for the coin-flip model (defaults to --dist).
    #[arg(long)]
    pub dist_minus: Option<String>,
    /// Renewal ratio scale A.
    #[arg(long)]
    pub a: Option<f64>,
    /// Renewal tail exponent gamma > 2.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Periodic pattern: omega=p1,..,pL or rates=l1/r1,..,lL/rL.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Time flavor for iid-omega, renewal and periodic models (default discrete).
    #[arg(long, value_enum)]
    pub time: Option<TimeArg>,
    /// Full model text, e.g. "discrete rcm c=two-point:1,2:0.5".
    #[arg(long)]
    pub env: Option<String>,
}

fn dist(s: Option<&String>, what: &str) -> Result<ScalarDist, CliError> {
    let s = s.ok_or_else(|| CliError::Validation(format!("--{what} is required for this model")))?;
    Ok(s.parse::<ScalarDist>()?)
}

fn reject(present: bool, flag: &str, model: ModelName) -> Result<(), CliError> {
    if present {
        return Err(CliError::Validation(format!("--{flag} does not apply to {model:?}")));
    }
    Ok(())
}

impl ModelArgs {
    pub fn to_model(&self) -> Result<EnvModel, CliError> {
        if let Some(text) = &self.env {
            let m: EnvModel = text.parse()?;
            m.validate()?;
            return Ok(m);
        }
        let name = self.model.ok_or_else(|| CliError::Validation("one of --model or --env is required".into()))?;
        let time = match self.time {
            Some(TimeArg::Continuous) => TimeFlavor::Continuous,
            _ => TimeFlavor::Discrete,
        };
        let fixed_time = matches!(name, ModelName::RcmDiscrete | ModelName::RcmContinuous | ModelName::Coinflip);
        reject(fixed_time && self.time.is_some(), "time", name)?;
        reject(name != ModelName::Coinflip && self.dist_minus.is_some(), "dist-minus", name)?;
        reject(name != ModelName::Renewal && (self.a.is_some() || self.gamma.is_some()), "a/--gamma", name)?;
        reject(name != ModelName::Periodic && self.pattern.is_some(), "pattern", name)?;
        reject(matches!(name, ModelName::Renewal | ModelName::Periodic) && self.dist.is_some(), "dist", name)?;
        let model = match name {
            ModelName::RcmDiscrete => {
                EnvModel::new(EnvKind::IidConductance { conductance: dist(self.dist.as_ref(), "dist")? }, TimeFlavor::Discrete)
            }
            ModelName::RcmContinuous => {
                EnvModel::new(EnvKind::IidConductance { conductance: dist(self.dist.as_ref(), "dist")? }, TimeFlavor::Continuous)
            }
            ModelName::IidOmega => EnvModel::new(EnvKind::IidOmega { rho: dist(self.dist.as_ref(), "dist")? }, time),
            ModelName::Coinflip => {
                let plus = dist(self.dist.as_ref(), "dist")?;
                let minus = match &self.dist_minus {
                    Some(s) => s.parse()?,
                    None => plus.clone(),
                };
                EnvModel::new(EnvKind::CoinFlip { plus, minus }, TimeFlavor::Continuous)
            }
            ModelName::Renewal => {
                let a = self.a.ok_or_else(|| CliError::Validation("--a is required for the renewal model".into()))?;
                let gamma = self.gamma.ok_or_else(|| CliError::Validation("--gamma is required for the renewal model".into()))?;
                EnvModel::new(EnvKind::Renewal { a, gamma }, time)
            }
            ModelName::Periodic => {
                let p = self
                    .pattern
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("--pattern is required for the periodic model".into()))?;
                let time_word = if time == TimeFlavor::Continuous { "continuous" } else { "discrete" };
                let m: EnvModel = format!("{time_word} periodic {p}").parse()?;
                if let EnvKind::Periodic { pattern: PeriodicPattern::OmegaPlus(_) } = &m.kind {
                    reject(time == TimeFlavor::Continuous, "time continuous with omega=", name)?;
                }
                Ok(m)
            }
        }?;
        Ok(model)
    }
}

fn decimals(s: &str) -> Option<usize> {
    if s.contains(['e', 'E']) {
        return None;
    }
    Some(s.split_once('.').map_or(0, |(_, f)| f.len()))
}

fn number(s: &str, what: &str) -> Result<f64, CliError> {
    let x: f64 = s.trim().parse().map_err(|_| CliError::Validation(format!("{what}: not a number: {s:?}")))?;
    if !x.is_finite() {
        return Err(CliError::Validation(format!("{what}: not finite: {s:?}")));
    }
    Ok(x)
}

pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Parses `v`, `v1,v2,..` or `start:stop:step`.  A range holds
/// `start + k step` for `k = 0, 1, ..` up to the point nearest `stop`, so
/// `stop` is included whenever it lies within half a step of the lattice;
/// points are rounded to the decimals written in `start` and `step`.
pub fn parse_grid(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(|t| number(t, what)).collect(),
        [start, stop, step] => {
            let (a, b, h) = (number(start, what)?, number(stop, what)?, number(step, what)?);
            if !(h > 0.0) {
                return Err(CliError::Validation(format!("{what}: step must be positive")));
            }
            if b < a {
                return Err(CliError::Validation(format!("{what}: stop {b} is below start {a}")));
            }
            let n = ((b - a) / h).round();
            if n + 1.0 > MAX_GRID_POINTS as f64 {
                return Err(CliError::Validation(format!("{what}: more than {MAX_GRID_POINTS} points")));
            }
            let digits = decimals(start.trim()).zip(decimals(step.trim())).map(|(x, y)| x.max(y));
            Ok((0..=n as u64)
                .map(|k| {
                    let x = a + k as f64 * h;
                    match digits {
                        Some(d) => format!("{x:.d$}").parse().unwrap_or(x),
                        None => x,
                    }
                })
                .collect())
        }
        _ => Err(CliError::Validation(format!("{what}: expected v, v1,v2,.. or start:stop:step, got {s:?}"))),
    }
}

/// Configuration echoed into every output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub model: Option<String>,
    pub lambda: Vec<f64>,
    pub horizon: Option<String>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub output: Option<String>,
    pub workers: usize,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunConfig {
    pub fn new(command: &str, workers: usize) -> Self {
        Self {
            tool: "rwre",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            model: None,
            lambda: Vec::new(),
            horizon: None,
            replicas: None,
            seed: None,
            tolerance: None,
            output: None,
            workers,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(key.to_string(), serde_json::to_value(value).expect("serializable"));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ranges() {
        let g = parse_grid("0:2:0.1", "l").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.3);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert_eq!(parse_grid("1", "l").unwrap(), vec![1.0]);
        assert_eq!(parse_grid("0.5,1", "l").unwrap(), vec![0.5, 1.0]);
        assert_eq!(parse_grid("0:1:0.3", "l").unwrap(), vec![0.0, 0.3, 0.6, 0.9]);
        assert_eq!(parse_grid("-1:1:1", "l").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_grid("0:1:0", "l").is_err());
        assert!(parse_grid("1:0:0.1", "l").is_err());
        assert!(parse_grid("a", "l").is_err());
        assert!(parse_grid("0:1", "l").is_err());
    }

    fn args(model: ModelName, dist: Option<&str>) -> ModelArgs {
        ModelArgs {
            model: Some(model),
            dist: dist.map(String::from),
            dist_minus: None,
            a: None,
            gamma: None,
            pattern: None,
            time: None,
            env: None,
        }
    }

    #[test]
    fn model_args() {
        let m = args(ModelName::RcmDiscrete, Some("two-point:1,2:0.5")).to_model().unwrap();
        assert_eq!(m.to_string(), "discrete rcm c=two-point:1,2:0.5");
        assert!(args(ModelName::RcmDiscrete, None).to_model().is_err());
        assert!(args(ModelName::RcmDiscrete, Some("two-point:1,2:1.5")).to_model().is_err());
        let m = args(ModelName::Coinflip, Some("constant:1")).to_model().unwrap();
        assert_eq!(m.to_string(), "continuous coinflip plus=constant:1 minus=constant:1");
        let mut r = args(ModelName::Renewal, None);
        r.a = Some(2.0);
        r.gamma = Some(3.0);
        assert_eq!(r.to_model().unwrap().to_string(), "discrete renewal a=2 gamma=3");
        r.gamma = Some(1.5);
        assert!(r.to_model().is_err());
        let mut p = args(ModelName::Periodic, None);
        p.pattern = Some("omega=0.6,0.7".into());
        assert_eq!(p.to_model().unwrap().to_string(), "discrete periodic omega=0.6,0.7");
        p.time = Some(TimeArg::Continuous);
        assert!(p.to_model().is_err());
    }
}
