//! Cluster (branching) construction.
//!
//! Immigrants come from the renewal process; each point spawns
//! `Poisson(α)` children at offsets drawn from `h/α`. Children landing past
//! the horizon are counted as escaped and not expanded.

use crate::error::{domain, Error, Result};
use crate::model::{ExcitationKernel, InterarrivalModel};
use crate::simulate::{simulate_renewal, Engine, Origin, PointProcessPath};
use crate::statsutil::RandomStream;

pub const DEFAULT_GENERATION_CAP: usize = 10_000;

/// Descendants of one ancestor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterOutcome {
    /// Descendant times inside the horizon, in generation order; the
    /// ancestor is excluded.
    pub descendants: Vec<f64>,
    pub escaped: u64,
}

impl ClusterOutcome {
    /// Total size `W` including the ancestor (only meaningful when nothing
    /// escaped).
    pub fn total_size(&self) -> u64 {
        1 + self.descendants.len() as u64 + self.escaped
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterEngine {
    pub generation_cap: usize,
}

impl Default for ClusterEngine {
    fn default() -> Self {
        Self {
            generation_cap: DEFAULT_GENERATION_CAP,
        }
    }
}

impl ClusterEngine {
    /// Breadth-first expansion of the cascade rooted at `t0`.
    pub fn cluster(
        &self,
        kernel: &ExcitationKernel,
        t0: f64,
        horizon: f64,
        rng: &mut RandomStream,
    ) -> Result<ClusterOutcome> {
        if !(0.0 <= t0 && t0 <= horizon) {
            return domain(format!("ancestor time {t0} outside [0, {horizon}]"));
        }
        let mut out = ClusterOutcome::default();
        let mut generation = vec![t0];
        let mut next = Vec::new();
        let mut depth = 0;
        while !generation.is_empty() {
            depth += 1;
            if depth > self.generation_cap {
                return Err(Error::Runtime(format!(
                    "cluster exceeded {} generations; branching ratio {} is probably not subcritical",
                    self.generation_cap,
                    kernel.alpha()
                )));
            }
            for &parent in &generation {
                for _ in 0..rng.poisson(kernel.alpha()) {
                    let child = parent + kernel.sample_offset(rng);
                    if child > horizon {
                        out.escaped += 1;
                    } else {
                        out.descendants.push(child);
                        next.push(child);
                    }
                }
            }
            std::mem::swap(&mut generation, &mut next);
            next.clear();
        }
        Ok(out)
    }

    pub fn simulate(
        &self,
        model: &InterarrivalModel,
        kernel: &ExcitationKernel,
        horizon: f64,
        rng: &mut RandomStream,
    ) -> Result<PointProcessPath> {
        let immigrants = simulate_renewal(model, horizon, rng)?;
        let mut events: Vec<(f64, Origin)> =
            immigrants.iter().map(|&s| (s, Origin::Immigrant)).collect();
        let mut escaped = 0;
        for &s in &immigrants {
            let c = self.cluster(kernel, s, horizon, rng)?;
            escaped += c.escaped;
            events.extend(c.descendants.into_iter().map(|t| (t, Origin::Offspring)));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, origins) = events.into_iter().unzip();
        PointProcessPath::new(times, origins, horizon, escaped, Engine::Cluster)
    }
}

/// Cascade of one ancestor with the default generation cap.
pub fn simulate_cluster(
    kernel: &ExcitationKernel,
    t0: f64,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<ClusterOutcome> {
    ClusterEngine::default().cluster(kernel, t0, horizon, rng)
}

/// Full path by superposing the clusters of all immigrants.
pub fn simulate_rhp_cluster(
    model: &InterarrivalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<PointProcessPath> {
    ClusterEngine::default().simulate(model, kernel, horizon, rng)
}
