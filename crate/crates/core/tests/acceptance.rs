//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits non-zero if any criterion
//! fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use renewal_hawkes::experiments::{
    run_clt, run_edge_effects, run_engine_agreement, run_lln, run_variance_fit, ExperimentConfig,
};
use renewal_hawkes::renewal::{
    mean_count, psi_function, renewal_function, GridFunction, LinearFunctionalCheck,
};
use renewal_hawkes::simulate::simulate_cluster;
use renewal_hawkes::{
    limit_constants, Engine, ExcitationKernel, InterarrivalModel, RandomStream, Result,
};

const RHP: &str = env!("CARGO_BIN_EXE_rhp");

/// The two configurations exercised throughout.
const CONFIGS: [(&str, &str); 2] = [("exp:1", "expk:0.5,1"), ("weibull:3,2", "expk:0.5,1")];

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn config(model: &str, kernel: &str) -> ExperimentConfig {
    ExperimentConfig::new(model.parse().unwrap(), kernel.parse().unwrap())
}

fn rhp(args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(RHP)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "rhp {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn sigma2_target() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    rhp(&[
        "theory",
        "--model",
        "weibull:3,2",
        "--kernel",
        "expk:0.5,1",
        "--out",
        out,
    ])?;
    let sigma2 = read_json(&dir.path().join("theory.json"))["sigma2"]
        .as_f64()
        .unwrap();

    let start = Instant::now();
    rhp(&[
        "varfit",
        "--model",
        "weibull:3,2",
        "--kernel",
        "expk:0.5,1",
        "--T",
        "200",
        "--reps",
        "2000",
        "--seed",
        "42",
        "--out",
        out,
    ])?;
    let elapsed = start.elapsed();
    let rel_err = read_json(&dir.path().join("varfit_summary.json"))["rel_err"]
        .as_f64()
        .unwrap();
    check(
        (1.915..=1.917).contains(&sigma2) && rel_err < 0.10 && elapsed <= Duration::from_secs(300),
        format!(
            "sigma2 {sigma2:.6}, varfit rel_err {rel_err:.4}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn classical_reduction() -> Result<Outcome> {
    let mut c = config("exp:1", "expk:0.5,1");
    let exact = limit_constants(&c.model, &c.kernel)?.sigma2;
    c.horizons = vec![500.0];
    c.v_grid = vec![1.0];
    c.replications = 2000;
    let report = run_clt(&c)?;
    let var = report.marginal_at(1.0).unwrap().var;
    let rel = (var - 8.0).abs() / 8.0;
    Ok(check(
        exact == 8.0 && rel < 0.10,
        format!("sigma2 {exact}, CLT variance {var:.4} (rel err {rel:.4})"),
    ))
}

fn renewal_only_reduction() -> Result<Outcome> {
    let mut c = config("weibull:3,2", "expk:0,1");
    let constants = limit_constants(&c.model, &c.kernel)?;
    let target = constants.m.powi(3) * c.model.variance();
    c.horizons = vec![200.0];
    c.replications = 2000;
    let fit = run_variance_fit(&c)?;
    let rel = (fit.slope - target).abs() / target;
    Ok(check(
        constants.sigma2 == target && rel < 0.10,
        format!(
            "sigma2 {:.6} = m³Var[τ] {target:.6}, slope {:.6} (rel err {rel:.4})",
            constants.sigma2, fit.slope
        ),
    ))
}

fn lln() -> Result<Outcome> {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, kernel) in CONFIGS {
        let mut c = config(model, kernel);
        c.horizons = vec![1e2, 1e3, 1e4];
        c.v_grid = (1..=100).map(|i| f64::from(i) / 100.0).collect();
        c.replications = 50;
        let report = run_lln(&c)?;
        let devs: Vec<f64> = report.rows.iter().map(|r| r.mean_sup_dev).collect();
        let last = *devs.last().unwrap();
        let slope = report.constants.lln_slope;
        ok &= strictly_decreasing(&devs) && last < 0.05 * slope;
        detail.push(format!(
            "{model}: {devs:.4?} vs 0.05·slope {:.4}",
            0.05 * slope
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= Duration::from_secs(600);
    detail.push(format!("{:.1}s", elapsed.as_secs_f64()));
    Ok(check(ok, detail.join("; ")))
}

fn mean_count_solver() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    let horizon = 500.0;
    for (model, kernel) in CONFIGS {
        let m: InterarrivalModel = model.parse()?;
        let k: ExcitationKernel = kernel.parse()?;
        let expected = *mean_count(&m, &k, horizon, 0.01)?.values().last().unwrap();
        let counts: Vec<f64> = (0..2000)
            .map(|r| {
                let mut rng = RandomStream::new(2024, r);
                Engine::Cluster
                    .simulate(&m, &k, horizon, &mut rng)
                    .map(|p| p.len() as f64)
            })
            .collect::<Result<_>>()?;
        let (mc, se) = mean_and_se(&counts);
        let z = (mc - expected) / se;
        ok &= z.abs() < 3.0;
        detail.push(format!(
            "{model}: solver {expected:.3}, MC {mc:.3} ± {se:.3}"
        ));
    }

    // closed forms for exponential interarrivals and kernel: Φ by relative
    // error on [0, 50], ψ by absolute error on [0, 40]
    let (rho, alpha, beta) = (1.0, 0.5, 1.0);
    let phi = renewal_function(&InterarrivalModel::exponential(rho)?, 50.0, 0.01)?;
    let psi = psi_function(&ExcitationKernel::exponential(alpha, beta)?, 40.0, 0.01)?;
    let nodes = |g: &GridFunction| {
        let step = g.step();
        g.values()
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as f64 * step, v))
            .collect::<Vec<_>>()
    };
    let phi_err = nodes(&phi)
        .iter()
        .map(|&(t, v)| (v - (1.0 + rho * t)).abs() / (1.0 + rho * t))
        .fold(0.0, f64::max);
    let psi_err = nodes(&psi)
        .iter()
        .map(|&(t, v)| (v - alpha * beta * (-beta * (1.0 - alpha) * t).exp()).abs())
        .fold(0.0, f64::max);
    ok &= phi_err < 1e-3 && psi_err < 1e-3;
    detail.push(format!(
        "closed forms: Φ rel err {phi_err:.2e}, ψ abs err {psi_err:.2e}"
    ));
    Ok(check(ok, detail.join("; ")))
}

fn psi_identities() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    let kernels = [
        ExcitationKernel::exponential(0.5, 1.0)?,
        ExcitationKernel::exponential(0.8, 2.0)?,
        ExcitationKernel::uniform(0.5, 2.0)?,
    ];
    for k in kernels {
        let a = k.alpha();
        let psi = psi_function(&k, 400.0, 0.01)?;
        let mass = psi.integral();
        let cap = k.sup_norm() / (1.0 - a) + 1e-9;
        let peak = psi.values().iter().cloned().fold(f64::MIN, f64::max);
        let in_bounds = psi.values().iter().all(|&v| v <= cap);
        ok &= (mass - a / (1.0 - a)).abs() < 1e-3 && in_bounds;
        detail.push(format!(
            "{k}: ∫ψ {mass:.5} vs {:.5}, max {peak:.4} ≤ {cap:.4}",
            a / (1.0 - a)
        ));
    }
    Ok(check(ok, detail.join("; ")))
}

fn linear_functional() -> Result<Outcome> {
    let m = InterarrivalModel::exponential(1.0)?;
    let k = ExcitationKernel::exponential(0.5, 1.0)?;
    let horizon = 100.0;
    let coarse = LinearFunctionalCheck::new(&m, &k, horizon, 0.01)?;
    let fine = LinearFunctionalCheck::new(&m, &k, horizon, 0.005)?;
    let mut ratios = Vec::new();
    let mut worst: f64 = 0.0;
    for r in 0..20 {
        let mut rng = RandomStream::new(7, r);
        let path = Engine::Cluster.simulate(&m, &k, horizon, &mut rng)?;
        let a = coarse.residual(&path)?;
        let b = fine.residual(&path)?;
        worst = worst.max(a);
        ratios.push(b / a);
    }
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[9] + ratios[10]);
    Ok(check(
        median <= 0.7 && worst < 0.5,
        format!("median ratio {median:.3}, max residual at Δ=0.01 {worst:.4}"),
    ))
}

fn cluster_sizes(k: &ExcitationKernel, seed: u64, n: usize) -> Result<(f64, f64)> {
    let mut rng = RandomStream::new(seed, 0);
    let sizes: Vec<f64> = (0..n)
        .map(|_| simulate_cluster(k, 0.0, 1e12, &mut rng).map(|c| c.total_size() as f64))
        .collect::<Result<_>>()?;
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<f64>() / n;
    let var = sizes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

fn cluster_moments() -> Result<Outcome> {
    let k = ExcitationKernel::exponential(0.5, 1.0)?;
    let (mean, var) = cluster_sizes(&k, 2, 10_000)?;
    // The ±0.4 band is under two standard errors of the sample variance
    // (fourth central moment 464), so also check 40 further batches for bias.
    let vars: Vec<f64> = (100..140)
        .map(|seed| cluster_sizes(&k, seed, 10_000).map(|(_, v)| v))
        .collect::<Result<_>>()?;
    let (pooled, se) = mean_and_se(&vars);
    Ok(check(
        (mean - 2.0).abs() < 0.06 && (var - 4.0).abs() < 0.4 && (pooled - 4.0).abs() < 3.0 * se,
        format!("mean {mean:.4}, variance {var:.4}; 40-batch variance {pooled:.4} ± {se:.4}"),
    ))
}

fn gaussianity() -> Result<Outcome> {
    let mut c = config("weibull:3,2", "expk:0.5,1");
    c.horizons = vec![500.0];
    c.v_grid = vec![0.25, 0.5, 0.75, 1.0];
    c.replications = 2000;
    let report = run_clt(&c)?;
    let ks = report.marginal_at(1.0).unwrap().ks;
    let crit = 1.628 / (c.replications as f64).sqrt();
    let cov = report.covariance_at(0.5, 1.0).unwrap();
    let target = report.constants.sigma2 / 2.0;
    let rel = (cov - target).abs() / target;
    Ok(check(
        ks < crit && rel < 0.10,
        format!(
            "KS {ks:.4} < {crit:.4}; Cov(0.5,1) {cov:.4} vs σ²/2 {target:.4} (rel err {rel:.4})"
        ),
    ))
}

fn engine_agreement() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, kernel) in CONFIGS {
        let mut c = config(model, kernel);
        c.horizons = vec![500.0];
        c.replications = 500;
        let r = run_engine_agreement(&c)?;
        ok &= r.pass;
        detail.push(format!(
            "{model}: means {:.2}/{:.2} z {:.3}, dispersion z {:.3}",
            r.means[0], r.means[1], r.zstat, r.dispersion_z
        ));
    }
    Ok(check(ok, detail.join("; ")))
}

fn edge_effects() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, kernel) in CONFIGS {
        let mut c = config(model, kernel);
        c.horizons = vec![250.0, 500.0, 1000.0, 2000.0];
        c.replications = 200;
        let report = run_edge_effects(&c)?;
        let fractions: Vec<f64> = report.rows.iter().map(|r| r.escaped_fraction).collect();
        let limit = 0.01 * report.constants.lln_slope;
        ok &= strictly_decreasing(&fractions) && *fractions.last().unwrap() < limit;
        detail.push(format!("{model}: {fractions:.5?} vs {limit:.5}"));
    }
    Ok(check(ok, detail.join("; ")))
}

/// Every file in `dir`, by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 8] = [
        &["theory", "--horizon", "20"],
        &["simulate", "--engine", "cluster", "--horizon", "1e3"],
        &["simulate", "--engine", "thinning", "--horizon", "1e3"],
        &["lln", "--T", "100,1000", "--reps", "20"],
        &["clt", "--T", "200", "--reps", "200"],
        &["varfit", "--T", "100", "--reps", "200"],
        &["edge", "--T", "100,200", "--reps", "50"],
        &["agree", "--model", "exp:1", "--T", "100", "--reps", "100"],
    ];
    let root = tempfile::tempdir().unwrap();
    for (i, args) in runs.iter().enumerate() {
        let dir = root.path().join(format!("run{i}"));
        let out = dir.to_str().unwrap();
        let with = |extra: &[&'static str]| [*args, extra].concat();
        rhp(&[with(&["--threads", "1"]), vec!["--out", out]].concat())?;
        let first = snapshot(&dir);
        rhp(&[with(&["--threads", "4"]), vec!["--out", out]].concat())?;
        if snapshot(&dir) != first {
            return Err(format!(
                "{}: outputs differ between 1 and 4 threads",
                args[0]
            ));
        }
        let manifest = dir.join("manifest.json");
        let replay = root.path().join(format!("manifest{i}.json"));
        fs::copy(&manifest, &replay).unwrap();
        rhp(&[
            args[0],
            "--config",
            replay.to_str().unwrap(),
            "--threads",
            "2",
        ])?;
        if snapshot(&dir) != first {
            return Err(format!("{}: replay from manifest.json differs", args[0]));
        }
    }
    Ok(format!(
        "{} runs byte-identical across threads and manifest replay",
        runs.len()
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("sigma2 target and variance fit", Box::new(sigma2_target)),
        (
            "classical reduction",
            Box::new(|| classical_reduction().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "renewal-only reduction",
            Box::new(|| renewal_only_reduction().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "law of large numbers",
            Box::new(|| lln().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "mean-count solver",
            Box::new(|| mean_count_solver().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "psi identities",
            Box::new(|| psi_identities().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "linear-functional identity",
            Box::new(|| linear_functional().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "cluster moments",
            Box::new(|| cluster_moments().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "gaussianity",
            Box::new(|| gaussianity().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "engine cross-validation",
            Box::new(|| engine_agreement().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        (
            "edge effects",
            Box::new(|| edge_effects().unwrap_or_else(|e| Err(e.to_string()))),
        ),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} ({name}): PASS [{secs:.1}s] {detail}",
                i + 1
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "criterion {:>2} ({name}): FAIL [{secs:.1}s] {detail}",
                    i + 1
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
