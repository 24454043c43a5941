use std::fmt;
use std::path::PathBuf;

use rwre_core::env::{validate_model, CounterexampleConfig};
use rwre_core::{ModelSpec, Point, SiteDistribution};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Kalikow,
    RareAnomaly,
    GreensRatio,
    Coupling,
    Animals,
    Counterexample,
    Solomon,
    OracleXcheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Kalikow => "kalikow",
            Experiment::RareAnomaly => "rare_anomaly",
            Experiment::GreensRatio => "greens_ratio",
            Experiment::Coupling => "coupling",
            Experiment::Animals => "animals",
            Experiment::Counterexample => "counterexample",
            Experiment::Solomon => "solomon",
            Experiment::OracleXcheck => "oracle_xcheck",
        }
    }
}

/// Why a run could not start. Rendered as the JSON error report.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
    pub details: Value,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError { message: message.into(), details: Value::Null }
    }

    pub fn with_details(message: impl Into<String>, details: Value) -> Self {
        ConfigError { message: message.into(), details }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Run configuration as written by the user. Every field except
/// `experiment` and `seed` has an experiment-specific default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// A `ModelSpec`, or a counterexample `{epsilon, seed, scan_cap}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Value>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_walks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Projection direction for velocities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    /// Width of the acceptance band in standard errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_sites: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_k_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_walks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laws: Option<Vec<SiteDistribution>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_windows: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_radius: Option<i64>,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::new(format!("malformed config: {e}")))
}

/// Parses and validates a `ModelSpec`.
pub fn model_spec(value: &Value) -> Result<ModelSpec, ConfigError> {
    let spec: ModelSpec =
        serde_json::from_value(value.clone()).map_err(|e| ConfigError::new(format!("malformed model: {e}")))?;
    let report = validate_model(&spec, None);
    if !report.is_valid() {
        let messages: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(ConfigError::with_details(
            format!("invalid model: {}", messages.join("; ")),
            json!({ "violations": report.violations }),
        ));
    }
    Ok(spec)
}

pub fn counterexample_model(value: &Value) -> Result<CounterexampleConfig, ConfigError> {
    serde_json::from_value(value.clone()).map_err(|e| ConfigError::new(format!("malformed counterexample model: {e}")))
}

impl ExperimentConfig {
    /// Fills every default the experiment uses and checks ranges.
    pub fn resolve(mut self) -> Result<ExperimentConfig, ConfigError> {
        use Experiment::*;
        let e = self.experiment;
        let set = |slot: &mut Option<u64>, v: u64| {
            slot.get_or_insert(v);
        };
        self.output_dir.get_or_insert_with(|| PathBuf::from("out").join(e.name()));
        self.sigmas.get_or_insert(5.0);
        match e {
            Kalikow | RareAnomaly => {
                if self.model.is_none() {
                    let spec =
                        if e == Kalikow { ModelSpec::kalikow() } else { ModelSpec::rare_anomaly(0.1, 0.9).unwrap() };
                    self.model = Some(serde_json::to_value(spec).unwrap());
                }
                set(&mut self.t, 100_000);
                set(&mut self.n_walks, 10_000);
                if e == RareAnomaly {
                    self.epsilon.get_or_insert(0.05);
                }
            }
            GreensRatio => {
                self.model.get_or_insert_with(|| serde_json::to_value(ModelSpec::kalikow()).unwrap());
                self.rho.get_or_insert(0.01);
                set(&mut self.n_walks, 1_000_000);
                self.sites.get_or_insert_with(|| vec![Point::new(&[1, 0]), Point::new(&[2, 1]), Point::new(&[5, 0])]);
                self.batches.get_or_insert(100);
                self.oracle_sites.get_or_insert_with(|| vec![Point::new(&[1, 0]), Point::origin(2)]);
                self.oracle_rho.get_or_insert(0.9);
                set(&mut self.oracle_k_max, 12);
            }
            Coupling => {
                self.model
                    .get_or_insert_with(|| serde_json::to_value(ModelSpec::rare_anomaly(0.1, 0.9).unwrap()).unwrap());
                set(&mut self.t, 10_000);
                set(&mut self.n_walks, 10_000);
                self.y.get_or_insert(Point::new(&[1, 0]));
                set(&mut self.marginal_t, 1_000);
                set(&mut self.marginal_walks, 100_000);
                self.ks_alpha.get_or_insert(1e-4);
            }
            Animals => {
                let d = *self.d.get_or_insert(2);
                self.n_max.get_or_insert(if d == 2 { 6 } else { 4 });
            }
            Counterexample => {
                if self.epsilons.is_none() {
                    let from_model = match &self.model {
                        Some(m) => Some(vec![counterexample_model(m)?.epsilon]),
                        None => None,
                    };
                    self.epsilons = Some(from_model.unwrap_or_else(|| vec![0.2, 0.1, 0.05]));
                }
                set(&mut self.t, 100_000);
                set(&mut self.n_walks, 2_000);
            }
            Solomon => {
                self.laws.get_or_insert_with(|| {
                    vec![
                        SiteDistribution::dirac(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
                        SiteDistribution::mixture(vec![(0.5, vec![0.7, 0.3]), (0.5, vec![0.55, 0.45])]).unwrap(),
                        SiteDistribution::mixture(vec![(0.3, vec![0.4, 0.6]), (0.7, vec![0.25, 0.75])]).unwrap(),
                    ]
                });
                set(&mut self.t, 1_000_000);
                set(&mut self.n_walks, 200);
            }
            OracleXcheck => {
                set(&mut self.n_windows, 50);
                self.max_radius.get_or_insert(6);
                set(&mut self.t, 12);
                set(&mut self.n_walks, 100_000);
            }
        }
        self.check_ranges()?;
        Ok(self)
    }

    fn check_ranges(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: Option<u64>| match v {
            Some(0) => Err(ConfigError::new(format!("{name} must be at least 1"))),
            _ => Ok(()),
        };
        positive("T", self.t)?;
        positive("n_walks", self.n_walks)?;
        positive("marginal_t", self.marginal_t)?;
        positive("marginal_walks", self.marginal_walks)?;
        positive("n_windows", self.n_windows)?;
        for (name, v) in [("rho", self.rho), ("oracle_rho", self.oracle_rho), ("ks_alpha", self.ks_alpha)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return Err(ConfigError::new(format!("{name} = {v} outside (0,1)")));
                }
            }
        }
        if let Some(s) = self.sigmas {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError::new(format!("sigmas = {s} must be positive")));
            }
        }
        if self.batches == Some(0) || self.batches.zip(self.n_walks).is_some_and(|(b, n)| b as u64 > n) {
            return Err(ConfigError::new("batches must be in 1..=n_walks"));
        }
        if let Some(eps) = &self.epsilons {
            if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
                return Err(ConfigError::new("epsilons must be non-empty and inside (0, 1/2)"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError::new(format!("epsilon = {e} outside (0,1)")));
            }
        }
        if let Some(r) = self.max_radius {
            if !(1..=20).contains(&r) {
                return Err(ConfigError::new(format!("max_radius = {r} outside 1..=20")));
            }
        }
        if self.laws.as_ref().is_some_and(|l| l.is_empty()) {
            return Err(ConfigError::new("laws must not be empty"));
        }
        if self.sites.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(ConfigError::new("sites must not be empty"));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().expect("resolved")
    }
}
