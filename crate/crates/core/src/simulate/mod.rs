//! Sample paths of renewal Hawkes processes.
//!
//! Two independent constructions produce the same law:
//! - [`cluster`]: renewal immigrants, each expanded into a Poisson
//!   branching cascade;
//! - [`thinning`]: Ogata thinning against the conditional intensity.
//!
//! Every path opens with an immigrant at time 0.

pub mod cluster;
pub mod thinning;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{ExcitationKernel, InterarrivalModel};
use crate::statsutil::RandomStream;

pub use cluster::{simulate_cluster, simulate_rhp_cluster, ClusterEngine, ClusterOutcome};
pub use thinning::{simulate_rhp_thinning, ThinningEngine};

/// Which construction produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Cluster,
    Thinning,
}

impl Engine {
    pub fn simulate(
        self,
        model: &InterarrivalModel,
        kernel: &ExcitationKernel,
        horizon: f64,
        rng: &mut RandomStream,
    ) -> Result<PointProcessPath> {
        match self {
            Engine::Cluster => simulate_rhp_cluster(model, kernel, horizon, rng),
            Engine::Thinning => simulate_rhp_thinning(model, kernel, horizon, rng),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Cluster => "cluster",
            Engine::Thinning => "thinning",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster" => Ok(Engine::Cluster),
            "thinning" => Ok(Engine::Thinning),
            other => Err(Error::Parse {
                token: other.to_string(),
                reason: "expected `cluster` or `thinning`".into(),
            }),
        }
    }
}

/// Immigrant marker of an event (flag 0 / 1 on disk).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Immigrant,
    Offspring,
}

impl Origin {
    pub fn flag(self) -> u8 {
        match self {
            Origin::Immigrant => 0,
            Origin::Offspring => 1,
        }
    }
}

/// One realization on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProcessPath {
    times: Vec<f64>,
    origins: Vec<Origin>,
    immigrants: Vec<usize>,
    horizon: f64,
    escaped: u64,
    engine: Engine,
}

impl PointProcessPath {
    /// Validates the path invariants: strictly increasing times inside
    /// `[0, horizon]` and an immigrant at time 0.
    pub fn new(
        times: Vec<f64>,
        origins: Vec<Origin>,
        horizon: f64,
        escaped: u64,
        engine: Engine,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!(
                "horizon must be positive and finite, got {horizon}"
            ));
        }
        if times.len() != origins.len() {
            return domain("times and origins differ in length");
        }
        if times.first() != Some(&0.0) || origins[0] != Origin::Immigrant {
            return domain("a path must open with an immigrant at time 0");
        }
        if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::Runtime(format!(
                "event times not strictly increasing near {}",
                w[0]
            )));
        }
        if times[times.len() - 1] > horizon {
            return domain("event beyond the horizon");
        }
        let immigrants = origins
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Origin::Immigrant)
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            times,
            origins,
            immigrants,
            horizon,
            escaped,
            engine,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Offspring the cluster engine generated past the horizon.
    pub fn escaped_count(&self) -> u64 {
        self.escaped
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Imbedded renewal epochs `S₀ < S₁ < …`.
    pub fn immigrant_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.immigrants.iter().map(|&i| self.times[i])
    }

    /// `N(t)`: number of events in `[0, t]`.
    pub fn count(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return domain(format!("count at {t} outside [0, {}]", self.horizon));
        }
        Ok(self.count_at(t))
    }

    #[inline]
    pub(crate) fn count_at(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    /// `N_R(t)`: number of immigrants in `[0, t]`.
    pub fn immigrant_count(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return domain(format!(
                "immigrant count at {t} outside [0, {}]",
                self.horizon
            ));
        }
        Ok(self.immigrants.partition_point(|&i| self.times[i] <= t))
    }

    /// `I(t)`: index of the latest immigrant at or before `t`.
    pub fn last_immigrant_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return domain(format!("last immigrant index at negative time {t}"));
        }
        let k = self.immigrants.partition_point(|&i| self.times[i] <= t);
        Ok(self.immigrants[k - 1])
    }

    /// `λ(t) = μ(t − T_I(t−)) + Σ_{T_i < t} h(t − T_i)`, left-limit convention.
    pub fn intensity_at(
        &self,
        model: &InterarrivalModel,
        kernel: &ExcitationKernel,
        t: f64,
    ) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return domain(format!("intensity at {t} outside [0, {}]", self.horizon));
        }
        let before = self.times.partition_point(|&x| x < t).max(1);
        let k = self.immigrants.partition_point(|&i| i < before);
        let last = self.times[self.immigrants[k - 1]];
        let excitation: f64 = self.times[..before]
            .iter()
            .map(|&s| kernel.eval(t - s))
            .sum();
        Ok(model.hazard_at(t - last) + excitation)
    }

    /// `∫₀ᵗ μ(s − T_I(s)) ds`, exact via the cumulative hazard.
    pub fn hazard_compensator(&self, model: &InterarrivalModel, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return domain(format!("compensator at {t} outside [0, {}]", self.horizon));
        }
        let mut total = 0.0;
        let mut prev = 0.0;
        for s in self.immigrant_times().skip(1).take_while(|&s| s <= t) {
            total += model.cumulative_hazard_at(s - prev);
            prev = s;
        }
        Ok(total + model.cumulative_hazard_at(t - prev))
    }

    /// `∫₀ᵗ Σ h(s − T_i) ds = Σ_{T_i ≤ t} H(t − T_i)`.
    pub fn excitation_compensator(&self, kernel: &ExcitationKernel, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return domain(format!("compensator at {t} outside [0, {}]", self.horizon));
        }
        let n = self.count_at(t);
        Ok(self.times[..n]
            .iter()
            .map(|&s| kernel.integral(t - s))
            .sum())
    }

    /// Writes `time,flag` rows with 9 fractional digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,flag")?;
        for (t, o) in self.times.iter().zip(&self.origins) {
            writeln!(out, "{t:.9},{}", o.flag())?;
        }
        Ok(())
    }
}

/// Sidecar metadata written next to a path CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMetadata {
    pub engine: Engine,
    pub seed: u64,
    pub horizon: f64,
    pub escaped_count: u64,
    pub model: String,
    pub kernel: String,
}

/// Immigrant epochs `0 = S₀ < S₁ < … ≤ horizon`.
pub fn simulate_renewal(
    model: &InterarrivalModel,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return domain(format!(
            "horizon must be positive and finite, got {horizon}"
        ));
    }
    let mut epochs = vec![0.0];
    let mut s = 0.0;
    loop {
        s += model.sample_interarrival(rng);
        if s > horizon {
            break;
        }
        epochs.push(s);
    }
    Ok(epochs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(times: &[f64], flags: &[u8]) -> PointProcessPath {
        let origins = flags
            .iter()
            .map(|&f| {
                if f == 0 {
                    Origin::Immigrant
                } else {
                    Origin::Offspring
                }
            })
            .collect();
        PointProcessPath::new(times.to_vec(), origins, 10.0, 0, Engine::Cluster).unwrap()
    }

    #[test]
    fn count_queries() {
        let p = path(&[0.0, 1.5, 2.0], &[0, 1, 1]);
        assert_eq!(p.count(0.0).unwrap(), 1);
        assert_eq!(p.count(1.5).unwrap(), 2);
        assert_eq!(p.count(1.49).unwrap(), 1);
        assert!(p.count(-0.1).is_err());
        assert!(p.count(10.1).is_err());
    }

    #[test]
    fn last_immigrant_queries() {
        let p = path(&[0.0, 1.0, 2.0], &[0, 1, 0]);
        assert_eq!(p.last_immigrant_index(0.0).unwrap(), 0);
        assert_eq!(p.last_immigrant_index(1.5).unwrap(), 0);
        assert_eq!(p.last_immigrant_index(2.0).unwrap(), 2);
        assert!(p.last_immigrant_index(-1.0).is_err());
        assert_eq!(p.immigrant_count(2.0).unwrap(), 2);
    }

    #[test]
    fn intensity_examples() {
        let exp2 = InterarrivalModel::exponential(2.0).unwrap();
        let none = ExcitationKernel::exponential(0.0, 1.0).unwrap();
        let p = path(&[0.0, 1.0, 2.0], &[0, 1, 0]);
        for t in [0.0, 0.5, 1.7, 9.0] {
            assert_eq!(p.intensity_at(&exp2, &none, t).unwrap(), 2.0);
        }

        let exp1 = InterarrivalModel::exponential(1.0).unwrap();
        let k = ExcitationKernel::exponential(0.5, 1.0).unwrap();
        let p0 = path(&[0.0], &[0]);
        let v = p0.intensity_at(&exp1, &k, std::f64::consts::LN_2).unwrap();
        assert!((v - 1.25).abs() < 1e-15);

        // at an immigrant the left limit still uses the previous one
        let w = InterarrivalModel::weibull(3.0, 2.0).unwrap();
        let lam = p.intensity_at(&w, &none, 2.0).unwrap();
        assert!((lam - w.hazard(2.0).unwrap()).abs() < 1e-15);
        let lam = p.intensity_at(&w, &none, 2.5).unwrap();
        assert!((lam - w.hazard(0.5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn compensators() {
        let w = InterarrivalModel::weibull(3.0, 2.0).unwrap();
        let p = path(&[0.0, 1.0, 2.0], &[0, 1, 0]);
        let expected = (2.0f64 / 3.0).powi(2) + (1.5f64 / 3.0).powi(2);
        assert!((p.hazard_compensator(&w, 3.5).unwrap() - expected).abs() < 1e-15);
        let k = ExcitationKernel::uniform(0.5, 2.0).unwrap();
        // H(3.5) + H(2.5) + H(1.5) = 0.5 + 0.5 + 0.375
        assert!((p.excitation_compensator(&k, 3.5).unwrap() - 1.375).abs() < 1e-15);
    }

    #[test]
    fn invalid_paths_are_rejected() {
        let ok =
            |t: Vec<f64>, o: Vec<Origin>| PointProcessPath::new(t, o, 5.0, 0, Engine::Thinning);
        assert!(ok(vec![0.5], vec![Origin::Immigrant]).is_err());
        assert!(ok(vec![0.0], vec![Origin::Offspring]).is_err());
        assert!(ok(vec![0.0, 1.0, 1.0], vec![Origin::Immigrant; 3]).is_err());
        assert!(ok(vec![0.0, 6.0], vec![Origin::Immigrant; 2]).is_err());
        assert!(ok(vec![0.0, 1.0], vec![Origin::Immigrant]).is_err());
    }

    #[test]
    fn csv_format() {
        let p = path(&[0.0, 1.5, 2.0], &[0, 1, 0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,flag\n0.000000000,0\n1.500000000,1\n2.000000000,0\n"
        );
    }

    #[test]
    fn renewal_epochs() {
        let e = InterarrivalModel::exponential(1.0).unwrap();
        let mut rng = RandomStream::new(1, 0);
        let s = simulate_renewal(&e, 10.0, &mut rng).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(s.windows(2).all(|w| w[0] < w[1]) && *s.last().unwrap() <= 10.0);

        let s = simulate_renewal(&e, 1e4, &mut rng).unwrap();
        assert!(((s.len() - 1) as f64 / 1e4 - 1.0).abs() < 0.03);
        let w = InterarrivalModel::weibull(3.0, 2.0).unwrap();
        let s = simulate_renewal(&w, 1e4, &mut rng).unwrap();
        assert!(((s.len() - 1) as f64 / 1e4 - 0.3761).abs() < 0.02);
        assert!(simulate_renewal(&w, 0.0, &mut rng).is_err());
    }
}
