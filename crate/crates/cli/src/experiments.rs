use std::fmt::Display;
use std::sync::Arc;

use rand::Rng;
use rwre_core::bounds::{
    annealed_drift, bound_report, epsilon_for_p, kalikow_m, p_star_report, solomon_velocity_1d, TwoVertexParams,
};
use rwre_core::cluster::{animal_counts, boundary_size_bound_check, enumerate_animals, step_set};
use rwre_core::coupling::{coupled_replicates, excursion_length_stats, run_coupled, CoupledPair};
use rwre_core::env::{IidEnvironment, OverrideEnvironment};
use rwre_core::oracle::{expected_local_times, geometric_mixture, FiniteWindow};
use rwre_core::rng::{derive_seed, replicate_rng};
use rwre_core::stats::{ks_two_sample, summarize};
use rwre_core::walk::{
    annealed_velocity, empirical_velocity, greens_functions, trajectory, GeometricTruncation, Truncation,
    VelocityEstimate,
};
use rwre_core::{Color, CounterexampleEnv, ModelSpec, Point, SiteDistribution, TaggedEnvironment, TransitionVector};
use serde_json::{json, Value};

use crate::config::{counterexample_model, model_spec, ConfigError, Experiment, ExperimentConfig};
use crate::output::{histogram, num, Check, Outcome, PlotData, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn runtime<E: Display>(e: E) -> RunError {
    RunError::Runtime(e.to_string())
}

fn config<E: Display>(e: E) -> RunError {
    RunError::Config(ConfigError::new(e.to_string()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    match cfg.experiment {
        Experiment::Kalikow => kalikow(cfg),
        Experiment::RareAnomaly => rare_anomaly(cfg),
        Experiment::GreensRatio => greens_ratio(cfg),
        Experiment::Coupling => coupling(cfg),
        Experiment::Animals => animals(cfg),
        Experiment::Counterexample => counterexample(cfg),
        Experiment::Solomon => solomon(cfg),
        Experiment::OracleXcheck => oracle_xcheck(cfg),
    }
}

fn spec_of(cfg: &ExperimentConfig) -> Result<Arc<ModelSpec>, RunError> {
    Ok(Arc::new(model_spec(cfg.model.as_ref().expect("resolved"))?))
}

fn direction(cfg: &ExperimentConfig, d: usize) -> Result<Vec<f64>, RunError> {
    let u = cfg.u.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    });
    if u.len() != d {
        return Err(config(format!("u has {} entries, model dimension is {d}", u.len())));
    }
    Ok(u)
}

fn velocity_table(est: &VelocityEstimate, d: usize) -> Table {
    let mut header = vec!["walk".to_string(), "steps".to_string()];
    header.extend((1..=d).map(|i| format!("displacement_{i}")));
    header.push("velocity".into());
    let mut table = Table { header, rows: Vec::new() };
    for s in &est.samples {
        let mut row = vec![s.replicate.to_string(), s.steps.to_string()];
        row.extend(s.displacement.coords().iter().map(|c| c.to_string()));
        row.push(num(s.velocity));
        table.push(row);
    }
    table
}

fn velocity_plot(est: &VelocityEstimate) -> PlotData {
    let mut plot = PlotData::new(&["velocity", "count"]);
    plot.rows = histogram(&est.samples.iter().map(|s| s.velocity).collect::<Vec<_>>(), 40);
    plot
}

fn velocity_json(est: &VelocityEstimate) -> Value {
    json!({ "velocity": est.mean, "stderr": est.stderr, "n_walks": est.n_walks, "T": est.t })
}

fn kalikow(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let spec = spec_of(cfg)?;
    let params = TwoVertexParams::from_spec(&spec).map_err(config)?;
    let report = bound_report(&params).map_err(config)?;
    let u = direction(cfg, spec.d)?;
    let k = cfg.sigmas.unwrap();
    let est = annealed_velocity(&spec, &u, cfg.t.unwrap(), cfg.n_walks.unwrap(), cfg.seed).map_err(runtime)?;

    let mut checks = vec![Check::new(
        "kalikow_criterion",
        report.criterion_holds,
        format!("lhs {:.6} vs M {:.6}", report.lhs, report.m),
    )];
    if report.criterion_holds {
        let (lo, hi) = (report.lower - k * est.stderr, report.upper + k * est.stderr);
        checks.push(Check::new(
            "velocity_within_bounds",
            lo <= est.mean && est.mean <= hi,
            format!(
                "{:.6} +- {:.2e} in [{:.6}, {:.6}] widened by {k} sigma",
                est.mean, est.stderr, report.lower, report.upper
            ),
        ));
    }
    Ok(Outcome {
        table: velocity_table(&est, spec.d),
        plot: velocity_plot(&est),
        seeds: json!({ "walks": cfg.seed, "environment_of_walk_r": "derive_seed(seed, r)" }),
        estimates: velocity_json(&est),
        bounds: serde_json::to_value(&report).unwrap(),
        checks,
    })
}

fn rare_anomaly(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let spec = spec_of(cfg)?;
    let u = direction(cfg, spec.d)?;
    let k = cfg.sigmas.unwrap();
    // the all-blue velocity is the drift only for a deterministic blue law
    let v1b = match &spec.mu_b {
        SiteDistribution::Dirac(b) => Some(b.drift(&u)),
        SiteDistribution::FiniteMixture(_) => None,
    };
    let eps_at_p = epsilon_for_p(spec.p, spec.kappa, spec.d).ok();
    let target = p_star_report(cfg.epsilon.unwrap(), spec.kappa, spec.d, v1b).map_err(config)?;
    let est = annealed_velocity(&spec, &u, cfg.t.unwrap(), cfg.n_walks.unwrap(), cfg.seed).map_err(runtime)?;

    let guaranteed = v1b.zip(eps_at_p).map(|(v, e)| v - e);
    let mut checks = Vec::new();
    if let Some(g) = guaranteed {
        checks.push(Check::new(
            "velocity_above_guarantee",
            est.mean >= g - k * est.stderr,
            format!("{:.6} +- {:.2e} vs guaranteed {g:.6}", est.mean, est.stderr),
        ));
    }
    Ok(Outcome {
        table: velocity_table(&est, spec.d),
        plot: velocity_plot(&est),
        seeds: json!({ "walks": cfg.seed, "environment_of_walk_r": "derive_seed(seed, r)" }),
        estimates: velocity_json(&est),
        bounds: json!({
            "all_blue_velocity": v1b,
            "annealed_drift": annealed_drift(&spec, &u),
            "epsilon_at_p": eps_at_p,
            "guaranteed_speed_at_p": guaranteed,
            "target": target,
        }),
        checks,
    })
}

fn greens_ratio(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let spec = spec_of(cfg)?;
    let params = TwoVertexParams::from_spec(&spec).map_err(config)?;
    let m = kalikow_m(&params.b, &params.r).map_err(config)?;
    let c = (1.0 - spec.p) * m / spec.p;
    let k = cfg.sigmas.unwrap();
    let sites = cfg.sites.clone().unwrap();
    if sites.iter().chain(cfg.oracle_sites.iter().flatten()).any(|x| x.dim() != spec.d) {
        return Err(config("site dimension does not match the model"));
    }
    let rho = cfg.rho.unwrap();
    let trunc = Truncation::Geometric(GeometricTruncation::new(rho).map_err(config)?);
    let batches = cfg.batches.unwrap();
    let run = greens_functions(&spec, &sites, trunc, cfg.n_walks.unwrap(), cfg.seed).map_err(runtime)?;

    let mut header = vec!["site".to_string()];
    header.extend((1..=spec.d).map(|i| format!("x_{i}")));
    header.extend(
        ["blue", "blue_stderr", "red", "red_stderr", "ratio", "ratio_stderr", "c", "excess", "excess_stderr", "pass"]
            .map(String::from),
    );
    let mut table = Table { header, rows: Vec::new() };
    let mut plot = PlotData::new(&["site", "ratio", "ratio_stderr", "c"]);
    let mut checks = Vec::new();
    let mut estimates = Vec::new();
    for (i, x) in sites.iter().enumerate() {
        let e = run.estimate(i);
        let ex = run.excess(i, c, batches);
        let (ratio, ratio_se) = run.ratio(i, batches);
        let pass = ex.mean <= k * ex.stderr;
        let mut row = vec![i.to_string()];
        row.extend(x.coords().iter().map(|c| c.to_string()));
        row.extend(
            [e.blue_mass, e.blue_stderr, e.red_mass, e.red_stderr, ratio, ratio_se, c, ex.mean, ex.stderr].map(num),
        );
        row.push(pass.to_string());
        table.push(row);
        plot.rows.push(vec![i as f64, ratio, ratio_se, c]);
        checks.push(Check::new(
            format!("red_below_c_blue at {x}"),
            pass,
            format!("red {:.4e} blue {:.4e} excess {:.3e} +- {:.2e}", e.red_mass, e.blue_mass, ex.mean, ex.stderr),
        ));
        estimates.push(
            json!({ "site": x, "blue": e.blue_mass, "red": e.red_mass, "ratio": ratio, "ratio_stderr": ratio_se }),
        );
    }
    let origin = Point::origin(spec.d);
    let mut exact = Vec::new();
    for x in cfg.oracle_sites.as_ref().unwrap() {
        let g = geometric_mixture(&spec, &origin, x, cfg.oracle_rho.unwrap(), cfg.oracle_k_max.unwrap());
        checks.push(Check::new(
            format!("exact_ratio_certified at {x}"),
            g.certifies_ratio(c),
            format!(
                "blue >= {:.6e}, red <= {:.6e}, tail {:.2e}",
                g.blue_lower,
                g.red_lower + g.tail_bound,
                g.tail_bound
            ),
        ));
        exact.push(json!({ "site": x, "mixture": g }));
    }
    Ok(Outcome {
        table,
        plot,
        seeds: json!({ "walks": cfg.seed, "environment_of_walk_r": "derive_seed(seed, r)" }),
        estimates: json!({ "monte_carlo": estimates, "exact": exact }),
        bounds: json!({ "m": m, "c": c }),
        checks,
    })
}

type PairEnv = OverrideEnvironment<TaggedEnvironment>;

fn forced_pair(
    spec: &Arc<ModelSpec>,
    env_seed: u64,
    y: Point,
    blue: &TransitionVector,
    red: &TransitionVector,
) -> CoupledPair<PairEnv> {
    let mut base = OverrideEnvironment::new(TaggedEnvironment::new(Arc::clone(spec), env_seed));
    for s in &step_set(spec.d).expect("validated dimension").steps {
        base.set(y.add(s), Color::Blue, blue.clone());
    }
    CoupledPair::new(base, y, blue.clone(), red.clone())
}

fn coupling(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let spec = spec_of(cfg)?;
    let y = cfg.y.unwrap();
    if y.dim() != spec.d {
        return Err(config("y dimension does not match the model"));
    }
    let blue = spec.mu_b.atoms()[0].1.clone();
    let red = spec.mu_r.atoms()[0].1.clone();
    let factor = 1.0 + spec.kappa.powi(-6);
    let k = cfg.sigmas.unwrap();
    let origin = Point::origin(spec.d);
    let sites = [y, origin];
    let seeds = (derive_seed(cfg.seed, 100), derive_seed(cfg.seed, 101), derive_seed(cfg.seed, 102));

    let samples = coupled_replicates(
        |r| forced_pair(&spec, derive_seed(seeds.0, r), y, &blue, &red),
        cfg.t.unwrap(),
        cfg.n_walks.unwrap(),
        seeds.1,
        &sites,
    )
    .map_err(runtime)?;

    let mut checks = Vec::new();
    let mut estimates = Vec::new();
    for (i, x) in sites.iter().enumerate() {
        let diff: Vec<f64> = samples.iter().map(|s| s.n3[i] as f64 - factor * s.n2[i] as f64).collect();
        let d = summarize(&diff);
        let n2 = summarize(&samples.iter().map(|s| s.n2[i] as f64).collect::<Vec<_>>());
        let n3 = summarize(&samples.iter().map(|s| s.n3[i] as f64).collect::<Vec<_>>());
        checks.push(Check::new(
            format!("local_time_inequality at {x}"),
            d.mean <= k * d.stderr,
            format!("X3 {:.4} +- {:.2e}, X2 {:.4} +- {:.2e}, factor {factor}", n3.mean, n3.stderr, n2.mean, n2.stderr),
        ));
        estimates.push(json!({ "site": x, "n2": n2, "n3": n3, "excess": d }));
    }
    let censored = samples.iter().filter(|s| s.censored).count();
    let excursions = excursion_length_stats(samples.iter().flat_map(|s| &s.excursions));

    // marginal law of X3 against direct simulation in omega3 for one pair
    let pair = forced_pair(&spec, seeds.2, y, &blue, &red);
    let (mt, mn) = (cfg.marginal_t.unwrap(), cfg.marginal_walks.unwrap());
    let marginal_seed = derive_seed(cfg.seed, 103);
    let direct_seed = derive_seed(cfg.seed, 104);
    let coupled: Vec<f64> = (0..mn)
        .map(|r| run_coupled(&pair, mt, marginal_seed, r).map(|tr| tr.path3.last().unwrap().get(0) as f64))
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    let omega3 = pair.omega3();
    let direct: Vec<f64> = (0..mn)
        .map(|r| {
            trajectory(&omega3, origin, mt, &mut replicate_rng(direct_seed, r))
                .map(|(p, _)| p.last().unwrap().get(0) as f64)
        })
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    let ks = ks_two_sample(&coupled, &direct);
    let alpha = cfg.ks_alpha.unwrap();
    checks.push(Check::new(
        "x3_marginal_matches_direct",
        !ks.rejects(alpha),
        format!("KS D {:.5} critical {:.5} p {:.4}", ks.statistic, ks.critical_value(alpha), ks.p_value),
    ));

    let mut table = Table::new(&[
        "replicate",
        "n2_y",
        "n3_y",
        "n2_origin",
        "n3_origin",
        "decouple_count",
        "excursion_steps",
        "censored",
        "x2_1",
        "x3_1",
    ]);
    let mut plot = PlotData::new(&["n2_y", "n3_y"]);
    for s in &samples {
        table.push(vec![
            s.replicate.to_string(),
            s.n2[0].to_string(),
            s.n3[0].to_string(),
            s.n2[1].to_string(),
            s.n3[1].to_string(),
            s.decouple_count.to_string(),
            s.total_excursion_steps.to_string(),
            s.censored.to_string(),
            s.displacement2.get(0).to_string(),
            s.displacement3.get(0).to_string(),
        ]);
        plot.rows.push(vec![s.n2[0] as f64, s.n3[0] as f64]);
    }
    Ok(Outcome {
        table,
        plot,
        seeds: json!({
            "environments": seeds.0,
            "coupling": seeds.1,
            "marginal_environment": seeds.2,
            "marginal_coupled": marginal_seed,
            "marginal_direct": direct_seed,
        }),
        estimates: json!({ "local_times": estimates, "censored": censored, "excursions": excursions, "ks": ks }),
        bounds: json!({ "factor": factor, "kappa": spec.kappa }),
        checks,
    })
}

fn animals(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let d = cfg.d.unwrap();
    let n_max = cfg.n_max.unwrap();
    let steps = step_set(d).map_err(config)?;
    let counts = animal_counts(&steps, n_max).map_err(config)?;
    let base = 7 * d as u128;
    let mut table = Table::new(&["n", "count", "bound"]);
    let mut plot = PlotData::new(&["n", "log_count", "log_bound"]);
    let mut within = true;
    for (i, &c) in counts.iter().enumerate() {
        let n = i as u32 + 1;
        let bound = base.checked_pow(n);
        within &= bound.is_none_or(|b| c as u128 <= b);
        table.push(vec![n.to_string(), c.to_string(), bound.map_or("inf".into(), |b| b.to_string())]);
        plot.rows.push(vec![n as f64, (c as f64).ln(), n as f64 * (base as f64).ln()]);
    }
    let mut checks = vec![Check::new("count_below_bound", within, format!("counts {counts:?}, bound {base}^n"))];
    if let Some(&c1) = counts.first() {
        checks.push(Check::new("single_site_animal", c1 == 1, format!("count(1) = {c1}")));
    }
    if d == 2 && counts.len() >= 2 {
        checks.push(Check::new("two_site_animals", counts[1] == 4, format!("count(2) = {}", counts[1])));
    }
    let mut boundary_ok = true;
    for n in 1..=n_max {
        for a in enumerate_animals(&steps, n).map_err(config)? {
            boundary_ok &= boundary_size_bound_check(&a, &steps);
        }
    }
    checks.push(Check::new("boundary_size_bound", boundary_ok, "every enumerated animal"));
    Ok(Outcome {
        table,
        plot,
        seeds: json!({}),
        estimates: json!({ "counts": counts }),
        bounds: json!({ "base": base }),
        checks,
    })
}

fn counterexample(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let model = cfg.model.as_ref().map(counterexample_model).transpose()?;
    let eps = cfg.epsilons.clone().unwrap();
    let (t, n) = (cfg.t.unwrap(), cfg.n_walks.unwrap());
    let k = cfg.sigmas.unwrap();
    let mut rows = Vec::new();
    let mut reference = None;
    for (i, &e) in eps.iter().enumerate() {
        let env_seed = model.as_ref().map_or_else(|| derive_seed(cfg.seed, i as u64), |m| m.seed);
        let scan_cap = model.as_ref().and_then(|m| m.scan_cap);
        let base = CounterexampleEnv::new(e, env_seed, scan_cap).map_err(config)?;
        reference.get_or_insert(base.blue_vector().drift(&[1.0, 0.0]));
        let walk_seed = derive_seed(cfg.seed, 1000 + i as u64);
        let v = empirical_velocity(|r| base.with_seed(derive_seed(env_seed, r)), &[1.0, 0.0], t, n, walk_seed, false)
            .map_err(runtime)?;
        rows.push((e, base.delta(), v.mean, v.stderr, env_seed, walk_seed));
    }
    let reference = reference.unwrap();

    let mut table = Table::new(&["epsilon", "delta", "velocity", "stderr", "n_walks", "T", "reference"]);
    let mut plot = PlotData::new(&["epsilon", "velocity", "stderr"]);
    for &(e, delta, v, s, ..) in &rows {
        table.push(vec![num(e), num(delta), num(v), num(s), n.to_string(), t.to_string(), num(reference)]);
        plot.rows.push(vec![e, v, s]);
    }
    let detail = |r: &(f64, f64, f64, f64, u64, u64)| format!("eps {}: {:.5} +- {:.1e}", r.0, r.2, r.3);
    let mut checks = vec![Check::new(
        "below_all_blue",
        rows.iter().all(|r| r.2 < reference - k * r.3),
        format!("{} vs reference {reference}", rows.iter().map(detail).collect::<Vec<_>>().join("; ")),
    )];
    if rows.len() >= 2 {
        let mut sorted = rows.clone();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let sep =
            |a: &(f64, f64, f64, f64, u64, u64), b: &(f64, f64, f64, f64, u64, u64)| (a.3 * a.3 + b.3 * b.3).sqrt();
        let mut monotone = sorted.windows(2).all(|w| w[1].2 <= w[0].2 + k * sep(&w[0], &w[1]));
        let (first, last) = (&sorted[0], &sorted[sorted.len() - 1]);
        monotone &= last.2 < first.2 - k * sep(first, last);
        checks.push(Check::new(
            "nonincreasing_as_eps_decreases",
            monotone,
            sorted.iter().map(detail).collect::<Vec<_>>().join("; "),
        ));
    }
    Ok(Outcome {
        table,
        plot,
        seeds: json!({
            "environments": rows.iter().map(|r| r.4).collect::<Vec<_>>(),
            "walks": rows.iter().map(|r| r.5).collect::<Vec<_>>(),
        }),
        estimates: json!(rows
            .iter()
            .map(|r| json!({ "epsilon": r.0, "velocity": r.2, "stderr": r.3 }))
            .collect::<Vec<_>>()),
        bounds: json!({ "all_blue_velocity": reference }),
        checks,
    })
}

fn solomon(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let laws = cfg.laws.clone().unwrap();
    let (t, n) = (cfg.t.unwrap(), cfg.n_walks.unwrap());
    let k = cfg.sigmas.unwrap();
    let mut table = Table::new(&["law", "formula", "velocity", "stderr", "z"]);
    let mut plot = PlotData::new(&["formula", "velocity", "stderr"]);
    let mut checks = Vec::new();
    let mut seeds = Vec::new();
    for (i, law) in laws.into_iter().enumerate() {
        if law.dim() != 1 {
            return Err(config(format!("law {i} is not one-dimensional")));
        }
        let v = solomon_velocity_1d(&law).map_err(config)?;
        let law = Arc::new(law);
        let seed = derive_seed(cfg.seed, i as u64);
        let base = IidEnvironment::new(Arc::clone(&law), seed);
        let est =
            empirical_velocity(|r| base.with_seed(derive_seed(seed, r)), &[1.0], t, n, seed, false).map_err(runtime)?;
        let z = (est.mean - v) / est.stderr.max(f64::MIN_POSITIVE);
        table.push(vec![i.to_string(), num(v), num(est.mean), num(est.stderr), num(z)]);
        plot.rows.push(vec![v, est.mean, est.stderr]);
        checks.push(Check::new(
            format!("law {i} matches formula"),
            z.abs() <= k,
            format!("formula {v:.6}, simulated {:.6} +- {:.2e}", est.mean, est.stderr),
        ));
        seeds.push(seed);
    }
    Ok(Outcome { table, plot, seeds: json!({ "per_law": seeds }), estimates: Value::Null, bounds: Value::Null, checks })
}

fn random_simplex<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    let mut v: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = v[..len - 1].iter().sum();
    v[len - 1] = 1.0 - head;
    v
}

fn oracle_xcheck(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let spec = cfg.model.as_ref().map(model_spec).transpose()?.map(Arc::new);
    let d = spec.as_ref().map_or(2, |s| s.d);
    let (t_max, n) = (cfg.t.unwrap(), cfg.n_walks.unwrap());
    let k = cfg.sigmas.unwrap();
    let max_radius = cfg.max_radius.unwrap();
    let mut rng = replicate_rng(cfg.seed, 0);
    let origin = Point::origin(d);
    let mut header: Vec<String> = ["window", "radius", "T"].map(String::from).to_vec();
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend(["exact", "mean", "stderr", "z", "mass_error"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    let mut plot = PlotData::new(&["exact", "mean", "stderr"]);
    let (mut worst_z, mut worst_mass) = (0.0f64, 0.0f64);
    for w in 0..cfg.n_windows.unwrap() {
        let radius = 1 + (rng.random::<f64>() * max_radius as f64) as i64;
        let t = 1 + (rng.random::<f64>() * t_max as f64) as u64;
        let window = match &spec {
            Some(s) => {
                let env = TaggedEnvironment::new(Arc::clone(s), derive_seed(cfg.seed, 1_000_000 + w));
                let r = Point::new(&vec![radius; d]);
                FiniteWindow::from_environment(&env, origin.sub(&r), r).map_err(runtime)?
            }
            None => FiniteWindow::around(origin, radius, |_| {
                (Color::Blue, TransitionVector::new(random_simplex(&mut rng, 2 * d)).unwrap())
            })
            .map_err(runtime)?,
        };
        let reach = radius.min(t as i64);
        let coords: Vec<i64> = (0..d).map(|_| (rng.random::<f64>() * (2 * reach + 1) as f64) as i64 - reach).collect();
        let x = Point::new(&coords);
        let dp = expected_local_times(&window, &origin, t).map_err(runtime)?;
        let exact = dp.expected[window.index(&x).unwrap()];
        let seed = derive_seed(cfg.seed, w + 1);
        let counts: Vec<f64> = (0..n)
            .map(|r| {
                trajectory(&window, origin, t, &mut replicate_rng(seed, r))
                    .map(|(path, _)| path.iter().filter(|q| **q == x).count() as f64)
            })
            .collect::<Result<_, _>>()
            .map_err(runtime)?;
        let s = summarize(&counts);
        let z = (s.mean - exact) / s.stderr.max(1.0 / n as f64);
        worst_z = worst_z.max(z.abs());
        worst_mass = worst_mass.max(dp.max_conservation_error);
        let mut row = vec![w.to_string(), radius.to_string(), t.to_string()];
        row.extend(coords.iter().map(|c| c.to_string()));
        row.extend([exact, s.mean, s.stderr, z, dp.max_conservation_error].map(num));
        table.push(row);
        plot.rows.push(vec![exact, s.mean, s.stderr]);
    }
    Ok(Outcome {
        table,
        plot,
        seeds: json!({ "windows": cfg.seed, "walks_of_window_w": "derive_seed(seed, w + 1)" }),
        estimates: json!({ "max_abs_z": worst_z, "max_mass_error": worst_mass }),
        bounds: Value::Null,
        checks: vec![
            Check::new("monte_carlo_matches_exact", worst_z <= k, format!("max |z| = {worst_z:.3}")),
            Check::new("mass_conservation", worst_mass <= 1e-12, format!("max error {worst_mass:.2e}")),
        ],
    })
}
