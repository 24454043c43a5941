//! One-shot `bounds` and `oracle` subcommands: JSON in, JSON out.

use std::sync::Arc;

use rwre_core::bounds::{annealed_drift, bound_report, epsilon_for_p, TwoVertexParams};
use rwre_core::env::validate_model;
use rwre_core::oracle::{
    exact_annealed_local_time, exact_hitting, expected_local_times, geometric_mixture, FiniteWindow,
};
use rwre_core::{Color, ModelSpec, Point, TaggedEnvironment, TransitionVector};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{model_spec, ConfigError};

pub fn bounds(text: &str) -> Result<Value, ConfigError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ConfigError::new(format!("malformed spec: {e}")))?;
    let spec = model_spec(&raw)?;
    let axes: Vec<f64> = (0..spec.d)
        .map(|i| {
            let mut u = vec![0.0; spec.d];
            u[i] = 1.0;
            annealed_drift(&spec, &u)
        })
        .collect();
    let kalikow = match TwoVertexParams::from_spec(&spec).and_then(|p| bound_report(&p)) {
        Ok(r) => serde_json::to_value(r).unwrap(),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let eps = epsilon_for_p(spec.p, spec.kappa, spec.d).ok();
    Ok(json!({
        "model": spec,
        "validation": validate_model(&spec, None),
        "annealed_drift": axes,
        "kalikow": kalikow,
        "epsilon_at_p": eps,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteOverride {
    x: Point,
    #[serde(default = "blue")]
    color: Color,
    vector: TransitionVector,
}

fn blue() -> Color {
    Color::Blue
}

/// A box `lo..=hi` filled from a sampled model, or from one vector with
/// optional per-site overrides.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSpec {
    lo: Point,
    hi: Point,
    #[serde(default)]
    model: Option<Value>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    fill: Option<TransitionVector>,
    #[serde(default)]
    sites: Vec<SiteOverride>,
}

impl WindowSpec {
    fn build(&self) -> Result<FiniteWindow, ConfigError> {
        let bad = |e: rwre_core::oracle::OracleError| ConfigError::new(e.to_string());
        let mut window = match (&self.model, &self.fill) {
            (Some(m), None) => {
                let env = TaggedEnvironment::new(Arc::new(model_spec(m)?), self.seed);
                FiniteWindow::from_environment(&env, self.lo, self.hi).map_err(bad)?
            }
            (None, Some(v)) => FiniteWindow::from_fn(self.lo, self.hi, |_| (Color::Blue, v.clone())).map_err(bad)?,
            _ => return Err(ConfigError::new("window needs exactly one of `model` or `fill`")),
        };
        for s in &self.sites {
            window.set(&s.x, s.color, s.vector.clone()).map_err(bad)?;
        }
        Ok(window)
    }
}

#[derive(Deserialize)]
#[serde(tag = "query", rename_all = "snake_case", deny_unknown_fields)]
enum Query {
    LocalTime {
        window: WindowSpec,
        start: Point,
        x: Point,
        #[serde(rename = "T")]
        t: u64,
    },
    Occupation {
        window: WindowSpec,
        start: Point,
        #[serde(rename = "T")]
        t: u64,
    },
    Hitting {
        window: WindowSpec,
        from: Point,
        target: Point,
        #[serde(default)]
        taboo: Option<Point>,
    },
    Annealed {
        model: Value,
        lo: Point,
        hi: Point,
        start: Point,
        x: Point,
        #[serde(rename = "T")]
        t: u64,
    },
    GeometricMixture {
        model: Value,
        start: Point,
        x: Point,
        rho: f64,
        k_max: u64,
    },
}

pub fn oracle(text: &str) -> Result<Value, ConfigError> {
    let q: Query = serde_json::from_str(text).map_err(|e| ConfigError::new(format!("malformed query: {e}")))?;
    let err = |e: rwre_core::oracle::OracleError| ConfigError::new(e.to_string());
    Ok(match q {
        Query::LocalTime { window, start, x, t } => {
            let w = window.build()?;
            let dp = expected_local_times(&w, &start, t).map_err(err)?;
            let i = w.index(&x).ok_or_else(|| ConfigError::new(format!("{x} outside the window")))?;
            json!({ "expected": dp.expected[i], "absorbed": dp.absorbed, "max_conservation_error": dp.max_conservation_error })
        }
        Query::Occupation { window, start, t } => {
            let w = window.build()?;
            let dp = expected_local_times(&w, &start, t).map_err(err)?;
            let sites: Vec<Value> = (0..w.len())
                .filter(|&i| dp.expected[i] > 0.0)
                .map(|i| json!({ "x": w.point(i), "expected": dp.expected[i] }))
                .collect();
            json!({ "sites": sites, "absorbed": dp.absorbed, "max_conservation_error": dp.max_conservation_error })
        }
        Query::Hitting { window, from, target, taboo } => {
            let w = window.build()?;
            json!({ "probability": exact_hitting(&w, &from, &target, taboo.as_ref()).map_err(err)? })
        }
        Query::Annealed { model, lo, hi, start, x, t } => {
            let spec: ModelSpec = model_spec(&model)?;
            serde_json::to_value(exact_annealed_local_time(&spec, lo, hi, &start, &x, t).map_err(err)?).unwrap()
        }
        Query::GeometricMixture { model, start, x, rho, k_max } => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(ConfigError::new(format!("rho = {rho} outside (0,1)")));
            }
            let spec = model_spec(&model)?;
            serde_json::to_value(geometric_mixture(&spec, &start, &x, rho, k_max)).unwrap()
        }
    })
}
