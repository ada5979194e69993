//! Ogata thinning against the exact conditional intensity
//! `λ(t) = μ(t − S_last) + Σ_{T_i < t} h(t − T_i)`.
//!
//! Each step bounds `λ` on a lookahead window `[t, t + L]`: the hazard part
//! by [`InterarrivalModel::hazard_sup`], the excitation part by an exact
//! per-kernel bound. Accepted points are split into immigrants and
//! offspring in proportion to the two parts of `λ`.

use std::collections::VecDeque;

use crate::error::{domain, Error, Result};
use crate::model::{ExcitationKernel, InterarrivalModel};
use crate::simulate::{Engine, Origin, PointProcessPath};
use crate::statsutil::RandomStream;

/// Proposals between acceptance-rate checks.
const RATE_CHECK_EVERY: u32 = 50;
const MIN_ACCEPTANCE: f64 = 0.05;
const MIN_WINDOW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThinningEngine {
    /// Initial lookahead window `L`; halved when acceptance drops below 5%.
    pub window: f64,
}

impl Default for ThinningEngine {
    fn default() -> Self {
        Self { window: 1.0 }
    }
}

/// Running excitation `Σ h(t − T_i)` with an exact bound on the future.
enum Excitation {
    /// Decreasing kernel: the value now bounds every later value.
    Exponential { beta: f64, level: f64, at: f64 },
    /// Flat kernel: height times the number of events still in support.
    Uniform {
        height: f64,
        support: f64,
        recent: VecDeque<f64>,
    },
}

impl Excitation {
    fn new(kernel: &ExcitationKernel) -> Self {
        match (kernel.exponential_decay(), kernel.uniform_support()) {
            (Some(beta), _) => Excitation::Exponential {
                beta,
                level: 0.0,
                at: 0.0,
            },
            (None, Some(support)) => Excitation::Uniform {
                height: kernel.sup_norm(),
                support,
                recent: VecDeque::new(),
            },
            (None, None) => unreachable!("kernel is either exponential or uniform"),
        }
    }

    /// Value just after `t`, including events at `t`; dominates `(t, ∞)`.
    fn bound_from(&mut self, t: f64) -> f64 {
        match self {
            Excitation::Exponential { beta, level, at } => *level * (-*beta * (t - *at)).exp(),
            Excitation::Uniform {
                height,
                support,
                recent,
            } => {
                while recent.front().is_some_and(|&s| t - s > *support) {
                    recent.pop_front();
                }
                *height * recent.len() as f64
            }
        }
    }

    /// Left-limit value at `t` (sum over events strictly before `t`).
    fn value_at(&mut self, t: f64) -> f64 {
        match self {
            Excitation::Exponential { .. } => self.bound_from(t),
            Excitation::Uniform {
                height,
                support,
                recent,
            } => {
                while recent.front().is_some_and(|&s| t - s > *support) {
                    recent.pop_front();
                }
                *height * recent.iter().filter(|&&s| s < t).count() as f64
            }
        }
    }

    fn push(&mut self, t: f64, jump: f64) {
        match self {
            Excitation::Exponential { beta, level, at } => {
                *level = *level * (-*beta * (t - *at)).exp() + jump;
                *at = t;
            }
            Excitation::Uniform { recent, .. } => recent.push_back(t),
        }
    }
}

impl ThinningEngine {
    pub fn simulate(
        &self,
        model: &InterarrivalModel,
        kernel: &ExcitationKernel,
        horizon: f64,
        rng: &mut RandomStream,
    ) -> Result<PointProcessPath> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!(
                "horizon must be positive and finite, got {horizon}"
            ));
        }
        if model.has_singular_origin() {
            return domain(format!(
                "thinning needs a bounded hazard near 0; {model} has none (use the cluster engine)"
            ));
        }
        if !(self.window > 0.0) {
            return domain("thinning window must be positive");
        }
        let jump = kernel.eval(0.0);
        let mut excitation = Excitation::new(kernel);
        let mut times = vec![0.0];
        let mut origins = vec![Origin::Immigrant];
        excitation.push(0.0, jump);

        let mut window = self.window;
        let mut last_immigrant = 0.0;
        let mut t = 0.0;
        let (mut proposed, mut accepted) = (0u32, 0u32);
        while t < horizon {
            let end = t + window;
            let elapsed = t - last_immigrant;
            let bound = model.hazard_sup(elapsed, elapsed + window)? + excitation.bound_from(t);
            if bound <= 0.0 {
                t = end;
                continue;
            }
            let candidate = t + rng.exponential(bound);
            if candidate > end {
                t = end;
                continue;
            }
            if candidate > horizon {
                break;
            }
            let hazard = model.hazard_at(candidate - last_immigrant);
            let lambda = hazard + excitation.value_at(candidate);
            if lambda > bound * (1.0 + 1e-12) {
                return Err(Error::Runtime(format!(
                    "intensity {lambda} exceeds its majorant {bound} at t = {candidate}"
                )));
            }
            proposed += 1;
            if rng.uniform() * bound <= lambda {
                accepted += 1;
                let origin = if rng.uniform() * lambda < hazard {
                    last_immigrant = candidate;
                    Origin::Immigrant
                } else {
                    Origin::Offspring
                };
                times.push(candidate);
                origins.push(origin);
                excitation.push(candidate, jump);
            }
            t = candidate;
            if proposed >= RATE_CHECK_EVERY {
                if f64::from(accepted) < MIN_ACCEPTANCE * f64::from(proposed) {
                    window = (window * 0.5).max(MIN_WINDOW);
                }
                proposed = 0;
                accepted = 0;
            }
        }
        PointProcessPath::new(times, origins, horizon, 0, Engine::Thinning)
    }
}

/// Path by thinning with the default lookahead window.
pub fn simulate_rhp_thinning(
    model: &InterarrivalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    rng: &mut RandomStream,
) -> Result<PointProcessPath> {
    ThinningEngine::default().simulate(model, kernel, horizon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statsutil::sample_mean_var;

    #[test]
    fn degenerates_to_poisson() {
        let e = InterarrivalModel::exponential(1.0).unwrap();
        let k = ExcitationKernel::exponential(0.0, 1.0).unwrap();
        let mut rng = RandomStream::new(1, 0);
        let p = simulate_rhp_thinning(&e, &k, 1e4, &mut rng).unwrap();
        assert!((p.count(1e4).unwrap() as f64 / 1e4 - 1.0).abs() < 0.03);
        assert!(p.origins().iter().all(|&o| o == Origin::Immigrant));
        assert_eq!(p.escaped_count(), 0);
    }

    #[test]
    fn rejects_singular_hazard() {
        let w = InterarrivalModel::weibull(1.0, 0.5).unwrap();
        let k = ExcitationKernel::exponential(0.5, 1.0).unwrap();
        let mut rng = RandomStream::new(1, 0);
        assert!(matches!(
            simulate_rhp_thinning(&w, &k, 10.0, &mut rng),
            Err(Error::Domain(_))
        ));
    }

    fn agree(model: InterarrivalModel, kernel: ExcitationKernel, horizon: f64, reps: u64) {
        let counts = |engine: Engine, stream: u64| -> Vec<f64> {
            (0..reps)
                .map(|r| {
                    let mut rng = RandomStream::new(99, stream + r);
                    engine
                        .simulate(&model, &kernel, horizon, &mut rng)
                        .unwrap()
                        .len() as f64
                })
                .collect()
        };
        let (mc, vc) = sample_mean_var(&counts(Engine::Cluster, 0)).unwrap();
        let (mt, vt) = sample_mean_var(&counts(Engine::Thinning, 1 << 32)).unwrap();
        let se = ((vc + vt) / reps as f64).sqrt();
        assert!(
            (mc - mt).abs() < 3.0 * se,
            "{model} {kernel}: {mc} vs {mt} (se {se})"
        );
    }

    #[test]
    fn agrees_with_cluster_engine() {
        let k = ExcitationKernel::exponential(0.5, 1.0).unwrap();
        agree(InterarrivalModel::exponential(1.0).unwrap(), k, 5000.0, 200);
        agree(
            InterarrivalModel::weibull(3.0, 2.0).unwrap(),
            k,
            1000.0,
            200,
        );
        let u = ExcitationKernel::uniform(0.6, 2.0).unwrap();
        agree(InterarrivalModel::weibull(3.0, 2.0).unwrap(), u, 500.0, 300);
    }

    #[test]
    fn immigrants_follow_the_renewal_law() {
        let w = InterarrivalModel::weibull(3.0, 2.0).unwrap();
        let k = ExcitationKernel::uniform(0.5, 1.0).unwrap();
        let mut rng = RandomStream::new(8, 0);
        let p = simulate_rhp_thinning(&w, &k, 2e4, &mut rng).unwrap();
        let s: Vec<f64> = p.immigrant_times().collect();
        let gaps: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let d = crate::statsutil::ks_statistic(&gaps, |x| w.cdf(x)).unwrap();
        assert!(d < 1.628 / (gaps.len() as f64).sqrt(), "KS {d}");
    }
}
