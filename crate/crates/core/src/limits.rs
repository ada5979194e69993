//! Closed-form limit constants.
//!
//! With renewal rate `m = 1/E[τ]` and branching ratio `α`:
//!
//! ```text
//! N(T)/T → m/(1−α)
//! σ²     = mα/(1−α)³ + m³ Var[τ]/(1−α)²
//! ```
//!
//! and the total size `W` of one Poisson(α) Galton–Watson cluster has
//! `E[W] = 1/(1−α)`, `Var[W] = α/(1−α)³`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{ExcitationKernel, InterarrivalModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub m: f64,
    pub alpha: f64,
    pub lln_slope: f64,
    pub sigma2: f64,
    /// Within-cluster part of `sigma2`.
    pub sigma2_cluster: f64,
    /// Immigration-timing part of `sigma2`.
    pub sigma2_immigration: f64,
    pub ew: f64,
    pub varw: f64,
}

/// `(mα/(1−α)³, m³Var[τ]/(1−α)²)`.
pub fn sigma2_decomposition(
    model: &InterarrivalModel,
    kernel: &ExcitationKernel,
) -> Result<(f64, f64)> {
    let alpha = kernel.alpha();
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("branching ratio {alpha} is not subcritical"));
    }
    let m = model.rate();
    let q = 1.0 - alpha;
    Ok((
        m * alpha / (q * q * q),
        m * m * m * model.variance() / (q * q),
    ))
}

pub fn limit_constants(
    model: &InterarrivalModel,
    kernel: &ExcitationKernel,
) -> Result<LimitConstants> {
    let (cluster, immigration) = sigma2_decomposition(model, kernel)?;
    let alpha = kernel.alpha();
    let m = model.rate();
    let q = 1.0 - alpha;
    Ok(LimitConstants {
        m,
        alpha,
        lln_slope: m / q,
        sigma2: cluster + immigration,
        sigma2_cluster: cluster,
        sigma2_immigration: immigration,
        ew: 1.0 / q,
        varw: alpha / (q * q * q),
    })
}
