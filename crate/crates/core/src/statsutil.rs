//! Statistical primitives for the experiment harness.
//!
//! Random streams are keyed by `(master seed, stream index)` so that every
//! replication owns an independent, reproducible sequence regardless of
//! which worker thread runs it.

use crate::error::{domain, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic 64-bit random stream (SplitMix64).
///
/// Streams are single-owner; derive one per replication with
/// [`RandomStream::new`] instead of sharing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    state: u64,
}

impl RandomStream {
    /// Stream `index` under `seed`. Distinct indices land on unrelated
    /// positions of the SplitMix64 orbit.
    pub fn new(seed: u64, index: u64) -> Self {
        let state = mix64(mix64(seed) ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    /// Poisson by sequential inversion; intended for small means.
    pub fn poisson(&mut self, mean: f64) -> u32 {
        if mean <= 0.0 {
            return 0;
        }
        let u = self.uniform();
        let mut k = 0u32;
        let mut p = (-mean).exp();
        let mut cum = p;
        while u > cum && k < 10_000 {
            k += 1;
            p *= mean / f64::from(k);
            if p == 0.0 {
                break;
            }
            cum += p;
        }
        k
    }
}

/// Zero-intercept least squares slope `Σxy / Σx²`.
pub fn regression_through_origin(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return domain(format!(
            "regression needs equal non-empty inputs, got {} and {}",
            xs.len(),
            ys.len()
        ));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx <= 0.0 {
        return domain("regression through the origin needs a nonzero x");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    Ok(sxy / sxx)
}

/// Kolmogorov–Smirnov distance between the samples and a distribution
/// function.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return domain("KS statistic of an empty sample");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        let upper = ((i + 1) as f64 / n - f).abs();
        let lower = (i as f64 / n - f).abs();
        d.max(upper).max(lower)
    });
    Ok(d)
}

/// Asymptotic one-sample KS critical value `c(level)/√n`. Only the 5% and
/// 1% levels are tabulated.
pub fn ks_critical_value(n: usize, level: f64) -> Result<f64> {
    let c = if (level - 0.05).abs() < 1e-12 {
        1.358
    } else if (level - 0.01).abs() < 1e-12 {
        1.628
    } else {
        return domain(format!("no KS critical value tabulated for level {level}"));
    };
    if n == 0 {
        return domain("KS critical value for n = 0");
    }
    Ok(c / (n as f64).sqrt())
}

/// Empirical distribution function of a sample.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return domain("ECDF of an empty sample");
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mean and unbiased variance (Welford update).
pub fn sample_mean_var(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return domain(format!(
            "sample variance needs at least 2 values, got {}",
            samples.len()
        ));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok((mean, m2 / (samples.len() - 1) as f64))
}

/// Unbiased sample covariance of two equally long series.
pub fn sample_covariance(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return domain("covariance needs two equally long series of length >= 2");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let s: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(s / (n - 1.0))
}

/// Median of a non-empty sample.
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return domain("median of an empty sample");
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Ok(if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    })
}
