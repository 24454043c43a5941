//! Acceptance suite. Each test writes one PASS/FAIL line to stderr
//! (bypassing libtest's output capture) before asserting.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rwre_core::bounds::{
    bound_report, epsilon_for_p, kalikow_m, p_star, perturbation_alpha, prop_bound_velocity, solomon_velocity_1d,
    TwoVertexParams,
};
use rwre_core::cluster::{animal_counts, boundary_size_bound_check, enumerate_animals, step_set};
use rwre_core::coupling::{coupled_replicates, detour_probability_check, run_coupled, CoupledPair};
use rwre_core::env::{CounterexampleEnv, IidEnvironment, OverrideEnvironment, SiteDistribution};
use rwre_core::oracle::{expected_local_times, geometric_mixture, FiniteWindow};
use rwre_core::rng::{derive_seed, replicate_rng};
use rwre_core::stats::{ks_two_sample, summarize};
use rwre_core::walk::{
    annealed_velocity, empirical_velocity, greens_functions, trajectory, GeometricTruncation, Truncation,
};
use rwre_core::{Color, ModelSpec, Point, TaggedEnvironment, TransitionVector};

fn report(id: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id}: {detail}");
}

fn p(c: &[i64]) -> Point {
    Point::new(c)
}

fn tv(v: &[f64]) -> TransitionVector {
    TransitionVector::new(v.to_vec()).unwrap()
}

/// Random probability vector with every entry at least `floor`.
fn random_vector<R: Rng>(rng: &mut R, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - floor * len as f64;
    let mut v: Vec<f64> = raw.iter().map(|x| floor + free * x / total).collect();
    let s: f64 = v.iter().sum();
    v[0] += 1.0 - s;
    v
}

#[test]
fn criterion_1_kalikow_velocity_bounds() {
    let params = TwoVertexParams::kalikow();
    let r = bound_report(&params).unwrap();
    let analytic_ok = (r.lower - 0.498).abs() < 1e-5 && (r.upper - 0.49875).abs() < 1e-5 && r.criterion_holds;
    let t0 = Instant::now();
    let v = annealed_velocity(&Arc::new(ModelSpec::kalikow()), &[1.0, 0.0], 100_000, 10_000, 0x4B41).unwrap();
    let inside = v.mean >= r.lower - 5.0 * v.stderr && v.mean <= r.upper + 5.0 * v.stderr;
    let pass = analytic_ok && inside;
    report(
        "1",
        pass,
        format!(
            "lower {:.6} upper {:.6}; empirical {:.6} +- {:.2e} (T=1e5, n=1e4, {:.0?})",
            r.lower,
            r.upper,
            v.mean,
            v.stderr,
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_red_blue_ratio() {
    let spec = Arc::new(ModelSpec::kalikow());
    let params = TwoVertexParams::kalikow();
    let m = kalikow_m(&params.b, &params.r).unwrap();
    let c = (1.0 - spec.p) * m / spec.p;
    let sites = [p(&[1, 0]), p(&[2, 1]), p(&[5, 0])];
    let trunc = Truncation::Geometric(GeometricTruncation::new(0.01).unwrap());
    let run = greens_functions(&spec, &sites, trunc, 1_000_000, 0x4C41).unwrap();
    let mut pass = (c - 0.002004).abs() < 1e-6;
    let mut detail = format!("c = {c:.6};");
    for (i, x) in sites.iter().enumerate() {
        let e = run.estimate(i);
        let ex = run.excess(i, c, 100);
        let ok = ex.mean <= 5.0 * ex.stderr;
        pass &= ok;
        detail +=
            &format!(" {x}: red {:.3e} blue {:.3e} excess {:.2e}+-{:.1e}", e.red_mass, e.blue_mass, ex.mean, ex.stderr);
    }
    for x in [p(&[1, 0]), p(&[0, 0])] {
        let g = geometric_mixture(&spec, &Point::origin(2), &x, 0.9, 12);
        let ok = g.certifies_ratio(c);
        pass &= ok;
        detail += &format!("; exact rho=0.9 at {x}: red/blue {:.3e}", g.red_lower / g.blue_lower);
    }
    report("2", pass, detail);
    assert!(pass);
}

#[test]
fn criterion_3_lattice_animals() {
    let t0 = Instant::now();
    let s2 = step_set(2).unwrap();
    let c2 = animal_counts(&s2, 6).unwrap();
    let s3 = step_set(3).unwrap();
    let c3 = animal_counts(&s3, 4).unwrap();
    let mut pass = c2[0] == 1 && c2[1] == 4;
    pass &= c2.iter().enumerate().all(|(i, &c)| (c as f64) <= 14f64.powi(i as i32 + 1));
    pass &= c3.iter().enumerate().all(|(i, &c)| (c as f64) <= 21f64.powi(i as i32 + 1));
    for n in 1..=6 {
        for a in enumerate_animals(&s2, n).unwrap() {
            pass &= boundary_size_bound_check(&a, &s2);
        }
    }
    let elapsed = t0.elapsed();
    pass &= elapsed.as_secs() <= 60;
    report("3", pass, format!("d=2 counts {c2:?}; d=3 counts {c3:?}; {elapsed:.1?}"));
    assert!(pass);
}

fn rare_anomaly_pair(
    spec: &Arc<ModelSpec>,
    seed: u64,
    y: Point,
) -> CoupledPair<OverrideEnvironment<TaggedEnvironment>> {
    let blue = tv(&[0.3, 0.25, 0.2, 0.25]);
    let red = tv(&[spec_delta(spec), 0.25, 0.5 - spec_delta(spec), 0.25]);
    let mut base = OverrideEnvironment::new(TaggedEnvironment::new(Arc::clone(spec), seed));
    for s in &step_set(2).unwrap().steps {
        base.set(y.add(s), Color::Blue, blue.clone());
    }
    CoupledPair::new(base, y, blue, red)
}

fn spec_delta(spec: &ModelSpec) -> f64 {
    match &spec.mu_r {
        SiteDistribution::Dirac(v) => v.probs()[0],
        SiteDistribution::FiniteMixture(_) => unreachable!(),
    }
}

#[test]
fn criterion_4_coupling_inequality_and_marginal() {
    let spec = Arc::new(ModelSpec::rare_anomaly(0.1, 0.9).unwrap());
    let kappa: f64 = 0.2;
    let factor = 1.0 + kappa.powi(-6);
    let y = p(&[1, 0]);
    let sites = [y, Point::origin(2)];
    let samples =
        coupled_replicates(|r| rare_anomaly_pair(&spec, derive_seed(0xC0, r), y), 10_000, 10_000, 0xC1, &sites)
            .unwrap();
    let mut pass = (factor - 15626.0).abs() < 1e-6;
    let mut detail = String::new();
    for (i, x) in sites.iter().enumerate() {
        let diff: Vec<f64> = samples.iter().map(|s| s.n3[i] as f64 - factor * s.n2[i] as f64).collect();
        let d = summarize(&diff);
        let n2 = summarize(&samples.iter().map(|s| s.n2[i] as f64).collect::<Vec<_>>());
        let n3 = summarize(&samples.iter().map(|s| s.n3[i] as f64).collect::<Vec<_>>());
        pass &= d.mean <= 5.0 * d.stderr;
        detail += &format!("N_{x}: X3 {:.3} X2 {:.3}; ", n3.mean, n2.mean);
    }
    let censored = samples.iter().filter(|s| s.censored).count();

    // marginal law of X3 against direct simulation in omega3, one fixed pair
    let pair = rare_anomaly_pair(&spec, 0xC2, y);
    let n = 100_000u64;
    let coupled: Vec<f64> = (0..n)
        .map(|r| {
            let tr = run_coupled(&pair, 1_000, 0xC3, r).unwrap();
            tr.path3.last().unwrap().get(0) as f64
        })
        .collect();
    let direct: Vec<f64> = (0..n)
        .map(|r| {
            let (path, _) = trajectory(&pair.omega3(), Point::origin(2), 1_000, &mut replicate_rng(0xC4, r)).unwrap();
            path.last().unwrap().get(0) as f64
        })
        .collect();
    let ks = ks_two_sample(&coupled, &direct);
    pass &= !ks.rejects(1e-4);
    detail += &format!(
        "censored {censored}/10000; KS D = {:.4} (critical {:.4}, p = {:.3})",
        ks.statistic,
        ks.critical_value(1e-4),
        ks.p_value
    );
    report("4", pass, detail);
    assert!(pass);
}

#[test]
fn criterion_5_detour_bound() {
    let kappa: f64 = 0.2;
    let steps = step_set(2).unwrap();
    let y = Point::origin(2);
    let mut rng = replicate_rng(0xD0, 0);
    let mut worst_path = f64::INFINITY;
    let mut worst_hit = f64::INFINITY;
    let mut pass = true;
    for k in 0..20u64 {
        let delta = rng.random::<f64>() * 0.25;
        let prob = 0.5 + 0.5 * rng.random::<f64>();
        let spec = Arc::new(ModelSpec::rare_anomaly(delta, prob).unwrap());
        let mut env = OverrideEnvironment::new(TaggedEnvironment::new(spec, derive_seed(0xD1, k)));
        for s in &steps.steps {
            env.set(y.add(s), Color::Blue, tv(&random_vector(&mut rng, 4, kappa)));
        }
        // red at y: only the e_3, e_4 entries are guaranteed to be >= kappa
        let mut r = random_vector(&mut rng, 4, 0.0);
        let scale = 1.0 - 2.0 * kappa;
        r.iter_mut().for_each(|x| *x *= scale);
        r[2] += kappa;
        r[3] += kappa;
        env.set(y, Color::Red, tv(&r));
        let rep = detour_probability_check(&env, &y, &steps, kappa, 4).unwrap();
        worst_path = worst_path.min(rep.min_path_probability);
        worst_hit = worst_hit.min(rep.min_hitting_probability);
        pass &= rep.passes();
    }
    report(
        "5",
        pass,
        format!(
            "20 surroundings: min path product {worst_path:.3e}, min hitting {worst_hit:.3e}, kappa^5 = {:.1e}",
            kappa.powi(5)
        ),
    );
    assert!(pass);
}

/// Random finite 1-d law with `E[rho^2] < 1`, mirrored when `negative`.
fn random_solomon_law<R: Rng>(rng: &mut R, negative: bool) -> SiteDistribution {
    loop {
        let k = 1 + (rng.random::<f64>() * 3.0) as usize;
        let w = random_vector(rng, k, 0.05);
        let atoms: Vec<(f64, Vec<f64>)> = w
            .iter()
            .map(|&wi| {
                let q = 0.35 + 0.55 * rng.random::<f64>();
                if negative {
                    (wi, vec![1.0 - q, q])
                } else {
                    (wi, vec![q, 1.0 - q])
                }
            })
            .collect();
        let moment: f64 = atoms
            .iter()
            .map(|(w, v)| {
                let rho = if negative { v[0] / v[1] } else { v[1] / v[0] };
                w * rho * rho
            })
            .sum();
        if moment < 0.9 {
            return SiteDistribution::mixture(atoms).unwrap();
        }
    }
}

#[test]
fn criterion_6_solomon_formula() {
    let third = solomon_velocity_1d(&SiteDistribution::dirac(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap()).unwrap();
    let mut pass = (third - 1.0 / 3.0).abs() < 1e-15;
    let mut rng = replicate_rng(0x50, 0);
    let mut detail = format!("Dirac(2/3,1/3) -> {third:.16};");
    for k in 0..10u64 {
        let law = Arc::new(random_solomon_law(&mut rng, k % 2 == 1));
        let v = solomon_velocity_1d(&law).unwrap();
        let base = IidEnvironment::new(Arc::clone(&law), 0);
        let seed = derive_seed(0x51, k);
        let est =
            empirical_velocity(|r| base.with_seed(derive_seed(seed, r)), &[1.0], 1_000_000, 200, seed, false).unwrap();
        let z = (est.mean - v) / est.stderr;
        pass &= z.abs() <= 5.0;
        detail += &format!(" {v:+.4}/{:+.4}(z={z:+.1})", est.mean);
    }
    report("6", pass, detail);
    assert!(pass);
}

fn counterexample_velocities() -> Vec<(f64, f64, f64)> {
    [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let seed = derive_seed(0xE0, (eps * 1000.0) as u64);
            let base = CounterexampleEnv::new(eps, seed, None).unwrap();
            let v =
                empirical_velocity(|r| base.with_seed(derive_seed(seed, r)), &[1.0, 0.0], 100_000, 2_000, seed, false)
                    .unwrap();
            (eps, v.mean, v.stderr)
        })
        .collect()
}

#[test]
fn criterion_7a_counterexample_below_all_blue() {
    let vs = counterexample_velocities();
    let pass = vs.iter().all(|&(_, v, s)| v < 0.1 - 5.0 * s);
    let detail = vs.iter().map(|(e, v, s)| format!("eps {e}: {v:.5} +- {s:.1e}")).collect::<Vec<_>>().join("; ");
    report("7a", pass, format!("{detail} (all-blue reference 0.1)"));
    assert!(pass);
}

#[test]
#[ignore = "unattainable at the stated eps: the velocity increases from eps = 0.2 to 0.05 (see README)"]
fn criterion_7b_counterexample_monotone_in_eps() {
    let vs = counterexample_velocities();
    let sep = |a: (f64, f64, f64), b: (f64, f64, f64)| (a.2 * a.2 + b.2 * b.2).sqrt();
    let mut pass = true;
    for w in vs.windows(2) {
        pass &= w[1].1 <= w[0].1 + 5.0 * sep(w[0], w[1]);
    }
    pass &= vs[2].1 < vs[0].1 - 5.0 * sep(vs[0], vs[2]);
    let detail = vs.iter().map(|(e, v, s)| format!("eps {e}: {v:.5} +- {s:.1e}")).collect::<Vec<_>>().join("; ");
    report("7b", pass, detail);
    assert!(pass);
}

#[test]
fn criterion_8_oracle_equivalence() {
    let mut rng = replicate_rng(0x80, 0);
    let n = 100_000u64;
    let mut pass = true;
    let mut worst_z: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for k in 0..50u64 {
        let radius = 1 + (rng.random::<f64>() * 6.0) as i64;
        let t = 1 + (rng.random::<f64>() * 12.0) as u64;
        let window =
            FiniteWindow::around(Point::origin(2), radius, |_| (Color::Blue, tv(&random_vector(&mut rng, 4, 0.0))))
                .unwrap();
        let r = radius.min(t as i64);
        let x = p(&[
            (rng.random::<f64>() * (2 * r + 1) as f64) as i64 - r,
            (rng.random::<f64>() * (2 * r + 1) as f64) as i64 - r,
        ]);
        let dp = expected_local_times(&window, &Point::origin(2), t).unwrap();
        let exact = dp.expected[window.index(&x).unwrap()];
        worst_mass = worst_mass.max(dp.max_conservation_error);
        let counts: Vec<f64> = (0..n)
            .map(|r| {
                let (path, _) =
                    trajectory(&window, Point::origin(2), t, &mut replicate_rng(derive_seed(0x81, k), r)).unwrap();
                path.iter().filter(|q| **q == x).count() as f64
            })
            .collect();
        let s = summarize(&counts);
        let sigma = s.stderr.max(1.0 / n as f64);
        let z = (s.mean - exact) / sigma;
        worst_z = worst_z.max(z.abs());
        pass &= z.abs() <= 5.0;
    }
    pass &= worst_mass <= 1e-12;
    report("8", pass, format!("50 windows: max |z| = {worst_z:.2}, max mass error = {worst_mass:.1e}"));
    assert!(pass);
}

#[test]
#[ignore = "the stated identity does not hold: the combination equals (1 - eps/2) v - eps/2 (see README)"]
fn criterion_9a_perturbation_identity() {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let eps = 0.01 + 0.098 * i as f64;
            let v = -0.5 + 0.15 * j as f64;
            worst = worst.max((prop_bound_velocity(perturbation_alpha(eps), v, -1.0) - (v - eps)).abs());
        }
    }
    let pass = worst <= 1e-12;
    report("9a", pass, format!("max |combination - (v - eps)| over 100 points = {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_9bc_bound_identities_and_threshold() {
    let mut rng = replicate_rng(0x90, 0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut cases = vec![TwoVertexParams::kalikow()];
    while cases.len() < 100 {
        let b = random_vector(&mut rng, 4, 0.01);
        let r = random_vector(&mut rng, 4, 0.01);
        let prob = 0.9 + 0.0999 * rng.random::<f64>();
        if let Ok(params) = TwoVertexParams::new(prob, b.try_into().unwrap(), r.try_into().unwrap()) {
            if bound_report(&params).map(|r| r.criterion_holds).unwrap_or(false) {
                cases.push(params);
            }
        }
    }
    for params in &cases {
        let r = bound_report(params).unwrap();
        let a = params.b.probs()[0] - params.b.probs()[2];
        let c = params.r.probs()[2] - params.r.probs()[0];
        worst = worst.max((r.lower - prop_bound_velocity(r.alpha, a, -c)).abs());
        checked += 1;
    }
    // round trip in p-space is exact to rounding; the eps-space trip loses
    // digits to the cancellation in 1 - p
    let mut inv_p: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for i in 1..100 {
        let eps = i as f64 / 100.0;
        let q = p_star(eps, 0.2, 2).unwrap();
        inv_p = inv_p.max((p_star(epsilon_for_p(q, 0.2, 2).unwrap(), 0.2, 2).unwrap() - q).abs());
        inv = inv.max((epsilon_for_p(q, 0.2, 2).unwrap() - eps).abs() / eps);
    }
    let eps = epsilon_for_p(1.0 - 1e-8, 0.2, 2).unwrap();
    let speed = 0.1 - eps;
    let pass = worst <= 1e-12 && inv_p <= 1e-12 && inv <= 1e-9 && (eps - 4.0625e-3).abs() < 1e-9 && speed >= 0.095;
    report(
        "9b/9c",
        pass,
        format!(
            "lower bound vs combination over {checked} models: {worst:.1e}; p round trip {inv_p:.1e}, eps relative round trip {inv:.1e}; eps = {eps:.6e}, speed >= {speed:.4}"
        ),
    );
    assert!(pass);
}
