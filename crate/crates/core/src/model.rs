//! Interarrival laws for immigrants and excitation kernels for offspring.
//!
//! Both types are immutable after construction. The textual grammar used
//! on the command line is `exp:<rate>`, `weibull:<scale>,<shape>`,
//! `expk:<alpha>,<beta>` and `unifk:<alpha>,<c>`.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::statsutil::RandomStream;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function (Lanczos, g = 7, n = 9) with reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi / ((pi * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Interarrival {
    Exponential { rate: f64 },
    Weibull { scale: f64, shape: f64 },
}

/// Immigrant interarrival distribution `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterarrivalModel {
    law: Interarrival,
    mean: f64,
    second_moment: f64,
}

impl InterarrivalModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return domain(format!(
                "exponential rate must be positive and finite, got {rate}"
            ));
        }
        Ok(Self {
            law: Interarrival::Exponential { rate },
            mean: 1.0 / rate,
            second_moment: 2.0 / (rate * rate),
        })
    }

    /// Weibull with `scale` λ and `shape` k: `F(t) = 1 − exp(−(t/λ)^k)`.
    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && shape.is_finite() && shape > 0.0) {
            return domain(format!(
                "weibull scale and shape must be positive and finite, got ({scale}, {shape})"
            ));
        }
        Ok(Self {
            law: Interarrival::Weibull { scale, shape },
            mean: scale * gamma(1.0 + 1.0 / shape),
            second_moment: scale * scale * gamma(1.0 + 2.0 / shape),
        })
    }

    /// Unit-mean Weibull of the given shape, see [`weibull_unit_mean_scale`].
    pub fn weibull_unit_mean(shape: f64) -> Result<Self> {
        Self::weibull(weibull_unit_mean_scale(shape)?, shape)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Renewal rate `m = 1 / E[τ]`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean
    }

    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }

    /// Weibull shape below one has an unbounded density and hazard at zero.
    pub fn has_singular_origin(&self) -> bool {
        matches!(self.law, Interarrival::Weibull { shape, .. } if shape < 1.0)
    }

    /// `E[τⁿ]` for `n ≥ 1`.
    pub fn raw_moment(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return domain("raw moment order must be at least 1");
        }
        Ok(match self.law {
            Interarrival::Exponential { rate } => {
                (1..=n).map(f64::from).product::<f64>() / rate.powi(n as i32)
            }
            Interarrival::Weibull { scale, shape } => {
                scale.powi(n as i32) * gamma(1.0 + f64::from(n) / shape)
            }
        })
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.law {
            Interarrival::Exponential { rate } => rate * (-rate * t).exp(),
            Interarrival::Weibull { scale, shape } => {
                let z = t / scale;
                (shape / scale) * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        -(-self.cumulative_hazard_at(t)).exp_m1()
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-self.cumulative_hazard_at(t)).exp()
    }

    /// Hazard rate `f(t) / (1 − F(t))`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("hazard evaluated at negative time {t}"));
        }
        Ok(self.hazard_at(t))
    }

    #[inline]
    pub(crate) fn hazard_at(&self, t: f64) -> f64 {
        match self.law {
            Interarrival::Exponential { rate } => rate,
            Interarrival::Weibull { scale, shape } => {
                if shape == 1.0 {
                    1.0 / scale
                } else {
                    (shape / scale) * (t / scale).powf(shape - 1.0)
                }
            }
        }
    }

    /// `∫₀ᵗ hazard = −ln(1 − F(t))`.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("cumulative hazard evaluated at negative time {t}"));
        }
        Ok(self.cumulative_hazard_at(t))
    }

    #[inline]
    pub(crate) fn cumulative_hazard_at(&self, t: f64) -> f64 {
        match self.law {
            Interarrival::Exponential { rate } => rate * t,
            Interarrival::Weibull { scale, shape } => (t / scale).powf(shape),
        }
    }

    /// Exact `sup` of the hazard over `[a, b]`.
    pub fn hazard_sup(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0) || !(a <= b) || !b.is_finite() {
            return domain(format!(
                "hazard_sup needs 0 <= a <= b < inf, got [{a}, {b}]"
            ));
        }
        Ok(match self.law {
            Interarrival::Exponential { rate } => rate,
            Interarrival::Weibull { shape, .. } if shape >= 1.0 => self.hazard_at(b),
            Interarrival::Weibull { .. } => self.hazard_at(a),
        })
    }

    /// Inverse-CDF draw from a supplied uniform on (0, 1).
    pub fn quantile_of_uniform_tail(&self, u: f64) -> f64 {
        match self.law {
            Interarrival::Exponential { rate } => -u.ln() / rate,
            Interarrival::Weibull { scale, shape } => scale * (-u.ln()).powf(1.0 / shape),
        }
    }

    pub fn sample_interarrival(&self, rng: &mut RandomStream) -> f64 {
        self.quantile_of_uniform_tail(rng.uniform())
    }
}

impl fmt::Display for InterarrivalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.law {
            Interarrival::Exponential { rate } => write!(f, "exp:{rate}"),
            Interarrival::Weibull { scale, shape } => write!(f, "weibull:{scale},{shape}"),
        }
    }
}

impl FromStr for InterarrivalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, args) = split_spec(s)?;
        match tag {
            "exp" => {
                let [rate] = parse_args::<1>(s, args)?;
                Self::exponential(rate)
            }
            "weibull" => {
                let [scale, shape] = parse_args::<2>(s, args)?;
                Self::weibull(scale, shape)
            }
            other => Err(Error::Parse {
                token: other.to_string(),
                reason: "unknown model, expected `exp` or `weibull`".into(),
            }),
        }
    }
}

/// Weibull scale giving unit mean at shape `k`: `1 / Γ(1 + 1/k)`.
pub fn weibull_unit_mean_scale(shape: f64) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return domain(format!("weibull shape must be positive, got {shape}"));
    }
    Ok(1.0 / gamma(1.0 + 1.0 / shape))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    /// `h(t) = αβ e^{−βt}`
    Exponential { beta: f64 },
    /// `h(t) = α/c` on `[0, c]`
    Uniform { support: f64 },
}

/// Excitation kernel `h` with branching ratio `α = ∫h < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationKernel {
    kernel: Kernel,
    alpha: f64,
    sup: f64,
}

impl ExcitationKernel {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(beta.is_finite() && beta > 0.0) {
            return domain(format!(
                "exponential kernel decay must be positive, got {beta}"
            ));
        }
        Ok(Self {
            kernel: Kernel::Exponential { beta },
            alpha,
            sup: alpha * beta,
        })
    }

    pub fn uniform(alpha: f64, support: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(support.is_finite() && support > 0.0) {
            return domain(format!(
                "uniform kernel support must be positive, got {support}"
            ));
        }
        Ok(Self {
            kernel: Kernel::Uniform { support },
            alpha,
            sup: alpha / support,
        })
    }

    /// Branching ratio `α`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `‖h‖∞`.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// Decay rate if the kernel is exponential.
    pub fn exponential_decay(&self) -> Option<f64> {
        match self.kernel {
            Kernel::Exponential { beta } => Some(beta),
            Kernel::Uniform { .. } => None,
        }
    }

    /// Support length if the kernel is uniform.
    pub fn uniform_support(&self) -> Option<f64> {
        match self.kernel {
            Kernel::Uniform { support } => Some(support),
            Kernel::Exponential { .. } => None,
        }
    }

    /// `h(t)`, zero for negative `t`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.kernel {
            Kernel::Exponential { beta } => self.alpha * beta * (-beta * t).exp(),
            Kernel::Uniform { support } => {
                if t <= support {
                    self.sup
                } else {
                    0.0
                }
            }
        }
    }

    /// `H(t) = ∫₀ᵗ h`.
    #[inline]
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kernel {
            Kernel::Exponential { beta } => -self.alpha * (-beta * t).exp_m1(),
            Kernel::Uniform { support } => self.alpha * (t / support).min(1.0),
        }
    }

    /// Distribution function of one offspring offset, `H(t) / α`.
    pub fn offset_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kernel {
            Kernel::Exponential { beta } => -(-beta * t).exp_m1(),
            Kernel::Uniform { support } => (t / support).min(1.0),
        }
    }

    /// Point beyond which `h < 1e-9`.
    pub fn tail_point(&self) -> f64 {
        match self.kernel {
            Kernel::Exponential { beta } => {
                let peak = self.alpha * beta;
                if peak <= 1e-9 {
                    0.0
                } else {
                    (peak / 1e-9).ln() / beta
                }
            }
            Kernel::Uniform { support } => support,
        }
    }

    /// `h` sampled at `n + 1` grid nodes; at a jump the node carries the
    /// mean of the one-sided limits so the trapezoid rule stays second order.
    pub fn tabulate(&self, step: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|i| {
                let t = i as f64 * step;
                match self.kernel {
                    Kernel::Uniform { support }
                        if (t - support).abs() <= 1e-9 * support.max(step) =>
                    {
                        0.5 * self.sup
                    }
                    _ => self.eval(t),
                }
            })
            .collect()
    }

    #[inline]
    pub(crate) fn sample_offset(&self, rng: &mut RandomStream) -> f64 {
        match self.kernel {
            Kernel::Exponential { beta } => rng.exponential(beta),
            Kernel::Uniform { support } => support * rng.uniform(),
        }
    }

    /// Offsets of the direct offspring of one point: `Poisson(α)` many,
    /// each i.i.d. with density `h/α`.
    pub fn sample_offspring_offsets(&self, rng: &mut RandomStream) -> Vec<f64> {
        let count = rng.poisson(self.alpha);
        (0..count).map(|_| self.sample_offset(rng)).collect()
    }
}

impl fmt::Display for ExcitationKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kernel {
            Kernel::Exponential { beta } => write!(f, "expk:{},{beta}", self.alpha),
            Kernel::Uniform { support } => write!(f, "unifk:{},{support}", self.alpha),
        }
    }
}

impl FromStr for ExcitationKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, args) = split_spec(s)?;
        let [alpha, second] = parse_args::<2>(s, args)?;
        match tag {
            "expk" => Self::exponential(alpha, second),
            "unifk" => Self::uniform(alpha, second),
            other => Err(Error::Parse {
                token: other.to_string(),
                reason: "unknown kernel, expected `expk` or `unifk`".into(),
            }),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("branching ratio must lie in [0, 1), got {alpha}"));
    }
    Ok(())
}

fn split_spec(s: &str) -> Result<(&str, &str)> {
    s.split_once(':').ok_or_else(|| Error::Parse {
        token: s.to_string(),
        reason: "expected `<kind>:<params>`".into(),
    })
}

fn parse_args<const N: usize>(spec: &str, args: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = args.split(',').collect();
    if parts.len() != N {
        return Err(Error::Parse {
            token: spec.to_string(),
            reason: format!("expected {N} comma-separated parameter(s)"),
        });
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && !part.contains(char::is_whitespace))
            .ok_or_else(|| Error::Parse {
                token: part.to_string(),
                reason: "not a decimal literal".into(),
            })?;
    }
    Ok(out)
}
