//! Monte Carlo harness for the limit theorems.
//!
//! Replication `r` of experiment block `b` always draws from
//! `RandomStream::new(seed, (b << 32) | r)`, and results are gathered in
//! replication order, so every report is identical for any worker count.
//!
//! Each experiment returns a report that can write its tables to a
//! directory and expose named scalar metrics for `--assert` checks.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use crate::error::{domain, Result};
use crate::limits::{limit_constants, LimitConstants};
use crate::model::{ExcitationKernel, InterarrivalModel};
use crate::output::{round9, write_json, write_table};
use crate::renewal::{mean_count, GridFunction};
use crate::simulate::{Engine, PointProcessPath};
use crate::statsutil::{
    ks_critical_value, ks_statistic, median, normal_cdf, regression_through_origin,
    sample_covariance, sample_mean_var, RandomStream,
};

/// Two-sided 1% standard normal quantile.
pub const Z_CRIT_1PCT: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: InterarrivalModel,
    pub kernel: ExcitationKernel,
    pub engine: Engine,
    /// Horizons `T`; single-horizon experiments use the first.
    pub horizons: Vec<f64>,
    /// Fractions `v` of the horizon, strictly increasing in `(0, 1]`.
    pub v_grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    /// Grid step for the renewal solvers.
    pub dt: f64,
    /// Spacing of the observation times in the variance fit.
    pub time_step: f64,
}

impl ExperimentConfig {
    pub fn new(model: InterarrivalModel, kernel: ExcitationKernel) -> Self {
        Self {
            model,
            kernel,
            engine: Engine::Cluster,
            horizons: vec![500.0],
            v_grid: vec![0.25, 0.5, 0.75, 1.0],
            replications: 500,
            seed: 42,
            dt: 0.01,
            time_step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return domain(format!(
                "need at least 2 replications, got {}",
                self.replications
            ));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return domain("horizons must be non-empty and strictly positive");
        }
        if self.v_grid.is_empty()
            || self.v_grid.iter().any(|&v| !(v > 0.0 && v <= 1.0))
            || self.v_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return domain("v grid must be strictly increasing within (0, 1]");
        }
        if !(self.dt > 0.0 && self.time_step > 0.0) {
            return domain("dt and time step must be positive");
        }
        Ok(())
    }

    fn horizon(&self) -> f64 {
        self.horizons[0]
    }

    fn replicate<T, F>(&self, block: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut RandomStream) -> Result<T> + Sync,
    {
        (0..self.replications)
            .into_par_iter()
            .map(|r| {
                let mut rng = RandomStream::new(self.seed, (block << 32) | r as u64);
                f(&mut rng)
            })
            .collect()
    }

    fn paths(&self, block: u64, engine: Engine, horizon: f64) -> Result<Vec<PointProcessPath>> {
        self.replicate(block, |rng| {
            engine.simulate(&self.model, &self.kernel, horizon, rng)
        })
    }
}

fn standard_error(var: f64, n: usize) -> f64 {
    (var / n as f64).sqrt()
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

// ---------------------------------------------------------------- LLN

#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub horizon: f64,
    pub mean_sup_dev: f64,
    pub se_sup_dev: f64,
    pub median_sup_dev: f64,
    pub max_sup_dev: f64,
    /// Mean of `T⁻¹ ∫₀ᵀ μ(s − T_I(s)) ds`.
    pub hazard_avg: f64,
    pub se_hazard_avg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnReport {
    pub constants: LimitConstants,
    pub rows: Vec<LlnRow>,
}

/// `sup_v |N(vT)/T − v·m/(1−α)|` over the v grid, per horizon.
pub fn run_lln(config: &ExperimentConfig) -> Result<LlnReport> {
    config.validate()?;
    let constants = limit_constants(&config.model, &config.kernel)?;
    let mut rows = Vec::new();
    for (block, &horizon) in config.horizons.iter().enumerate() {
        let stats = config.replicate(block as u64, |rng| {
            let path = config
                .engine
                .simulate(&config.model, &config.kernel, horizon, rng)?;
            let dev = config
                .v_grid
                .iter()
                .map(|&v| {
                    let n = path.count_at(v * horizon) as f64;
                    (n / horizon - v * constants.lln_slope).abs()
                })
                .fold(0.0, f64::max);
            let hazard = path.hazard_compensator(&config.model, horizon)? / horizon;
            Ok((dev, hazard))
        })?;
        let devs: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let hazards: Vec<f64> = stats.iter().map(|s| s.1).collect();
        let (mean_dev, var_dev) = sample_mean_var(&devs)?;
        let (hazard_avg, var_hazard) = sample_mean_var(&hazards)?;
        rows.push(LlnRow {
            horizon,
            mean_sup_dev: mean_dev,
            se_sup_dev: standard_error(var_dev, devs.len()),
            median_sup_dev: median(&devs)?,
            max_sup_dev: devs.iter().copied().fold(0.0, f64::max),
            hazard_avg,
            se_hazard_avg: standard_error(var_hazard, hazards.len()),
        });
    }
    Ok(LlnReport { constants, rows })
}

impl LlnReport {
    pub fn mean_sup_dev_decreasing(&self) -> bool {
        strictly_decreasing(&self.rows.iter().map(|r| r.mean_sup_dev).collect::<Vec<_>>())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.horizon,
                    r.mean_sup_dev,
                    r.median_sup_dev,
                    r.max_sup_dev,
                    r.hazard_avg,
                    self.constants.m,
                ]
            })
            .collect();
        write_table(
            dir,
            "lln.csv",
            "T,mean_sup_dev,median,max,hazard_avg,m",
            &rows,
        )
    }

    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let last = self.rows.last().expect("at least one horizon");
        BTreeMap::from([
            ("mean_sup_dev".into(), last.mean_sup_dev),
            (
                "rel_sup_dev".into(),
                last.mean_sup_dev / self.constants.lln_slope,
            ),
            (
                "decreasing".into(),
                f64::from(u8::from(self.mean_sup_dev_decreasing())),
            ),
            (
                "hazard_rel_err".into(),
                (last.hazard_avg - self.constants.m).abs() / self.constants.m,
            ),
        ])
    }
}

// ---------------------------------------------------------------- CLT

#[derive(Debug, Clone, PartialEq)]
pub struct CltMarginal {
    pub v: f64,
    pub mean: f64,
    pub se_mean: f64,
    pub var: f64,
    pub theo_var: f64,
    /// KS distance of `X(v)/(σ√v)` from the standard normal.
    pub ks: f64,
    pub ks_crit_1pct: f64,
    /// `E[N(vT)]` from the renewal solver.
    pub exact_mean: f64,
    /// `v·T·m/(1−α)`.
    pub asymptotic_mean: f64,
    /// Mean of `(N(vT) − v·T·m/(1−α))/√T`.
    pub mean_asymptotic_centering: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub constants: LimitConstants,
    pub horizon: f64,
    pub replications: usize,
    pub v_grid: Vec<f64>,
    pub marginals: Vec<CltMarginal>,
    /// Empirical covariance matrix over the v grid.
    pub covariance: Vec<Vec<f64>>,
    /// `X^{(T)}(v)` per replication, `[replication][v index]`.
    pub samples: Vec<Vec<f64>>,
}

/// Replications of `X^{(T)}(v) = (N(vT) − E[N(vT)])/√T`.
pub fn run_clt(config: &ExperimentConfig) -> Result<CltReport> {
    config.validate()?;
    let constants = limit_constants(&config.model, &config.kernel)?;
    let horizon = config.horizon();
    let mean = mean_count(&config.model, &config.kernel, horizon, config.dt)?;
    let root = horizon.sqrt();
    let counts = config.replicate(0, |rng| {
        let path = config
            .engine
            .simulate(&config.model, &config.kernel, horizon, rng)?;
        Ok(config
            .v_grid
            .iter()
            .map(|&v| path.count_at(v * horizon) as f64)
            .collect::<Vec<f64>>())
    })?;
    let samples: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&config.v_grid)
                .map(|(n, &v)| (n - mean.value_at(v * horizon)) / root)
                .collect()
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..config.v_grid.len())
        .map(|j| samples.iter().map(|row| row[j]).collect())
        .collect();
    let covariance = columns
        .iter()
        .map(|a| columns.iter().map(|b| sample_covariance(a, b)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let reps = config.replications;
    let ks_crit = ks_critical_value(reps, 0.01)?;
    let marginals = config
        .v_grid
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let xs = &columns[j];
            let (m, _) = sample_mean_var(xs)?;
            let var = covariance[j][j];
            let scale = (constants.sigma2 * v).sqrt();
            let ks = ks_statistic(xs, |x| normal_cdf(x / scale))?;
            let asymptotic_mean = v * horizon * constants.lln_slope;
            let shifted = counts
                .iter()
                .map(|row| (row[j] - asymptotic_mean) / root)
                .sum::<f64>()
                / reps as f64;
            Ok(CltMarginal {
                v,
                mean: m,
                se_mean: standard_error(var, reps),
                var,
                theo_var: constants.sigma2 * v,
                ks,
                ks_crit_1pct: ks_crit,
                exact_mean: mean.value_at(v * horizon),
                asymptotic_mean,
                mean_asymptotic_centering: shifted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CltReport {
        constants,
        horizon,
        replications: reps,
        v_grid: config.v_grid.clone(),
        marginals,
        covariance,
        samples,
    })
}

impl CltReport {
    fn index_of(&self, v: f64) -> Option<usize> {
        self.v_grid.iter().position(|&x| (x - v).abs() < 1e-12)
    }

    /// Empirical `Cov[X(u), X(v)]` for grid points `u`, `v`.
    pub fn covariance_at(&self, u: f64, v: f64) -> Option<f64> {
        Some(self.covariance[self.index_of(u)?][self.index_of(v)?])
    }

    pub fn marginal_at(&self, v: f64) -> Option<&CltMarginal> {
        self.marginals.get(self.index_of(v)?)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .marginals
            .iter()
            .map(|m| vec![m.v, m.mean, m.var, m.theo_var, m.ks, m.ks_crit_1pct])
            .collect();
        write_table(
            dir,
            "clt_marginals.csv",
            "v,mean,var,theo_var,ks,ks_crit_1pct",
            &rows,
        )?;

        let mut cov = Vec::new();
        for (i, &u) in self.v_grid.iter().enumerate() {
            for (j, &v) in self.v_grid.iter().enumerate().skip(i) {
                cov.push(vec![
                    u,
                    v,
                    self.covariance[i][j],
                    self.constants.sigma2 * u.min(v),
                ]);
            }
        }
        write_table(dir, "clt_cov.csv", "u,v,emp_cov,theo_cov", &cov)?;

        let centering: Vec<Vec<f64>> = self
            .marginals
            .iter()
            .map(|m| {
                vec![
                    m.v,
                    m.exact_mean,
                    m.asymptotic_mean,
                    m.mean,
                    m.mean_asymptotic_centering,
                ]
            })
            .collect();
        write_table(
            dir,
            "clt_centering.csv",
            "v,exact_mean,asymptotic_mean,x_mean_exact,x_mean_asymptotic",
            &centering,
        )?;

        let mut paths = Vec::new();
        for (r, row) in self.samples.iter().enumerate() {
            for (&v, &x) in self.v_grid.iter().zip(row) {
                paths.push(vec![r as f64, v, x]);
            }
        }
        write_table(dir, "clt_paths.csv", "rep,v,x", &paths)?;

        let summary = json!({
            "T": round9(self.horizon),
            "reps": self.replications,
            "sigma2": round9(self.constants.sigma2),
            "se_mean": self.marginals.iter().map(|m| round9(m.se_mean)).collect::<Vec<_>>(),
        });
        write_json(dir, "clt_summary.json", &summary)
    }

    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let sigma2 = self.constants.sigma2;
        let last = self.marginals.last().expect("non-empty v grid");
        let mut m = BTreeMap::from([
            (
                "var_rel_err".into(),
                (last.var - last.theo_var).abs() / last.theo_var,
            ),
            ("var".into(), last.var),
            ("ks".into(), last.ks),
            ("ks_ratio".into(), last.ks / last.ks_crit_1pct),
            (
                "max_abs_mean_z".into(),
                self.marginals
                    .iter()
                    .map(|m| (m.mean / m.se_mean).abs())
                    .fold(0.0, f64::max),
            ),
        ]);
        let mut worst = 0.0f64;
        for (i, &u) in self.v_grid.iter().enumerate() {
            for (j, &v) in self.v_grid.iter().enumerate().skip(i + 1) {
                let theo = sigma2 * u.min(v);
                worst = worst.max((self.covariance[i][j] - theo).abs() / theo);
            }
        }
        m.insert("max_cov_rel_err".into(), worst);
        m
    }
}

// ---------------------------------------------------------- variance fit

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceFitReport {
    pub constants: LimitConstants,
    pub times: Vec<f64>,
    pub sample_var: Vec<f64>,
    pub slope: f64,
    pub rel_err: f64,
}

/// Sample variance of `N(t) − E[N(t)]` at each observation time, regressed
/// on `t` through the origin.
pub fn run_variance_fit(config: &ExperimentConfig) -> Result<VarianceFitReport> {
    config.validate()?;
    let constants = limit_constants(&config.model, &config.kernel)?;
    let horizon = config.horizon();
    let steps = (horizon / config.time_step + 1e-9).floor() as usize;
    if steps == 0 {
        return domain("time step exceeds the horizon");
    }
    let times: Vec<f64> = (1..=steps).map(|j| j as f64 * config.time_step).collect();
    let mean = mean_count(&config.model, &config.kernel, horizon, config.dt)?;
    let centered = config.replicate(0, |rng| {
        let path = config
            .engine
            .simulate(&config.model, &config.kernel, horizon, rng)?;
        Ok(times
            .iter()
            .map(|&t| path.count_at(t) as f64 - mean.value_at(t))
            .collect::<Vec<f64>>())
    })?;
    let sample_var = (0..times.len())
        .map(|j| {
            let column: Vec<f64> = centered.iter().map(|row| row[j]).collect();
            Ok(sample_mean_var(&column)?.1)
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = regression_through_origin(&times, &sample_var)?;
    Ok(VarianceFitReport {
        constants,
        rel_err: (slope - constants.sigma2).abs() / constants.sigma2,
        times,
        sample_var,
        slope,
    })
}

impl VarianceFitReport {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.sample_var)
            .map(|(&t, &v)| vec![t, v])
            .collect();
        write_table(dir, "varfit.csv", "t,sample_var", &rows)?;
        let summary = json!({
            "slope": round9(self.slope),
            "sigma2": round9(self.constants.sigma2),
            "rel_err": round9(self.rel_err),
        });
        write_json(dir, "varfit_summary.json", &summary)
    }

    pub fn metrics(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("slope".into(), self.slope),
            ("sigma2".into(), self.constants.sigma2),
            ("rel_err".into(), self.rel_err),
        ])
    }
}

// ---------------------------------------------------------- edge effects

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub horizon: f64,
    pub escaped_fraction: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeReport {
    pub constants: LimitConstants,
    pub rows: Vec<EdgeRow>,
}

/// Mean escaped offspring per unit time for each horizon.
pub fn run_edge_effects(config: &ExperimentConfig) -> Result<EdgeReport> {
    config.validate()?;
    if config.engine != Engine::Cluster {
        return domain("edge effects are only tracked by the cluster engine");
    }
    let constants = limit_constants(&config.model, &config.kernel)?;
    let mut rows = Vec::new();
    for (block, &horizon) in config.horizons.iter().enumerate() {
        let fractions: Vec<f64> = config
            .paths(block as u64, Engine::Cluster, horizon)?
            .iter()
            .map(|p| p.escaped_count() as f64 / horizon)
            .collect();
        let (mean, var) = sample_mean_var(&fractions)?;
        rows.push(EdgeRow {
            horizon,
            escaped_fraction: mean,
            se: standard_error(var, fractions.len()),
        });
    }
    Ok(EdgeReport { constants, rows })
}

impl EdgeReport {
    pub fn decreasing(&self) -> bool {
        strictly_decreasing(
            &self
                .rows
                .iter()
                .map(|r| r.escaped_fraction)
                .collect::<Vec<_>>(),
        )
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| vec![r.horizon, r.escaped_fraction])
            .collect();
        write_table(dir, "edge.csv", "T,escaped_fraction", &rows)
    }

    pub fn metrics(&self) -> BTreeMap<String, f64> {
        let last = self.rows.last().expect("at least one horizon");
        BTreeMap::from([
            ("final_fraction".into(), last.escaped_fraction),
            (
                "final_over_slope".into(),
                last.escaped_fraction / self.constants.lln_slope,
            ),
            ("decreasing".into(), f64::from(u8::from(self.decreasing()))),
        ])
    }
}

// ------------------------------------------------------ engine agreement

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub horizon: f64,
    pub replications: usize,
    /// `[cluster, thinning]`
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub ses: [f64; 2],
    /// Two-sample z statistic of the mean difference.
    pub zstat: f64,
    /// Sample variance ratio cluster / thinning.
    pub dispersion_ratio: f64,
    /// `ln(ratio)` over its asymptotic standard error.
    pub dispersion_z: f64,
    pub pass: bool,
}

/// Compares `N(T)` between the two engines at the 1% level.
pub fn run_engine_agreement(config: &ExperimentConfig) -> Result<AgreementReport> {
    config.validate()?;
    let horizon = config.horizon();
    let counts = |block, engine| -> Result<Vec<f64>> {
        Ok(config
            .paths(block, engine, horizon)?
            .iter()
            .map(|p| p.len() as f64)
            .collect())
    };
    let cluster = counts(0, Engine::Cluster)?;
    let thinning = counts(1, Engine::Thinning)?;
    let (m0, v0) = sample_mean_var(&cluster)?;
    let (m1, v1) = sample_mean_var(&thinning)?;
    let n = config.replications;
    let (se0, se1) = (standard_error(v0, n), standard_error(v1, n));
    let pooled = (se0 * se0 + se1 * se1).sqrt();
    let zstat = if pooled > 0.0 {
        (m0 - m1) / pooled
    } else if m0 == m1 {
        0.0
    } else {
        f64::INFINITY
    };
    let (ratio, dispersion_z) = if v0 > 0.0 && v1 > 0.0 {
        let ratio = v0 / v1;
        (ratio, ratio.ln() / (4.0 / (n as f64 - 1.0)).sqrt())
    } else if v0 == v1 {
        (1.0, 0.0)
    } else {
        (f64::NAN, f64::INFINITY)
    };
    Ok(AgreementReport {
        horizon,
        replications: n,
        means: [m0, m1],
        variances: [v0, v1],
        ses: [se0, se1],
        zstat,
        dispersion_ratio: ratio,
        dispersion_z,
        pass: zstat.abs() < Z_CRIT_1PCT && dispersion_z.abs() < Z_CRIT_1PCT,
    })
}

impl AgreementReport {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let summary = json!({
            "T": round9(self.horizon),
            "reps": self.replications,
            "engines": ["cluster", "thinning"],
            "means": self.means.map(round9),
            "variances": self.variances.map(round9),
            "ses": self.ses.map(round9),
            "zstat": round9(self.zstat),
            "dispersion_ratio": round9(self.dispersion_ratio),
            "dispersion_z": round9(self.dispersion_z),
            "pass": self.pass,
        });
        write_json(dir, "agree.json", &summary)
    }

    pub fn metrics(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("zstat".into(), self.zstat.abs()),
            ("dispersion_z".into(), self.dispersion_z.abs()),
            ("pass".into(), f64::from(u8::from(self.pass))),
        ])
    }
}

/// `E[N(t)]` on the experiment's grid, for reuse outside the harness.
pub fn reference_mean(config: &ExperimentConfig) -> Result<GridFunction> {
    mean_count(&config.model, &config.kernel, config.horizon(), config.dt)
}
