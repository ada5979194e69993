//! Grid solvers for renewal-type equations
//!
//! ```text
//! Z(t) = z(t) + ∫₀ᵗ Z(t − u) f(u) du
//! ```
//!
//! discretized with the trapezoid rule on a uniform grid and solved by
//! forward substitution. The same solver handles proper (`∫f = 1`) and
//! defective (`∫f < 1`) equations. On top of it sit the renewal function
//! `Φ`, the excitation series `ψ = Σ_{n≥1} h^{*n}`, and the mean count
//! `E[N(t)] = Φ(t) + ∫₀ᵗ ψ(t − s) Φ(s) ds`.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{domain, Result};
use crate::model::{ExcitationKernel, InterarrivalModel};
use crate::simulate::PointProcessPath;

/// A real function tabulated at nodes `0, Δ, …, NΔ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    step: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return domain(format!("grid step must be positive, got {step}"));
        }
        if values.is_empty() {
            return domain("grid function needs at least one node");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("grid value at node {i} is not finite"));
        }
        Ok(Self { step, values })
    }

    /// Samples `f` at `n + 1` nodes.
    pub fn tabulate<F: Fn(f64) -> f64>(step: f64, n: usize, f: F) -> Result<Self> {
        Self::new(step, (0..=n).map(|i| f(i as f64 * step)).collect())
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last node time.
    pub fn end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Linear interpolation between nodes; clamps outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t / self.step).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().expect("non-empty grid");
        }
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Trapezoid integral over the whole grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step)
    }

    /// `t,value` rows with 9 fractional digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.9},{v:.9}", i as f64 * self.step)?;
        }
        Ok(())
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Trapezoid convolution `c(tᵢ) = ∫₀^{tᵢ} a(tᵢ − s) b(s) ds` on a shared
/// grid, computed through an FFT of the full discrete convolution.
pub fn convolve(a: &[f64], b: &[f64], step: f64) -> Vec<f64> {
    let n = a.len().min(b.len());
    if n == 0 {
        return Vec::new();
    }
    let full = if n <= 64 {
        (0..n)
            .map(|i| (0..=i).map(|j| a[i - j] * b[j]).sum())
            .collect::<Vec<f64>>()
    } else {
        fft_convolve(&a[..n], &b[..n])
    };
    // the integral over [0, 0] is exactly zero
    std::iter::once(0.0)
        .chain((1..n).map(|i| step * (full[i] - 0.5 * (a[i] * b[0] + a[0] * b[i]))))
        .collect()
}

fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex<f64>> = x.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(size, Complex::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..n].iter().map(|c| c.re * scale).collect()
}

/// Solves `Z = z + Z ∗ f` by forward substitution. `mass` is the total mass
/// of the measure with density `f` (1 for a proper equation, `< 1` for a
/// defective one).
pub fn solve_renewal_equation(
    z: &GridFunction,
    density: &GridFunction,
    mass: f64,
) -> Result<GridFunction> {
    let step = z.step;
    if (density.step - step).abs() > 1e-12 * step {
        return domain(format!("grid steps differ: {} vs {}", z.step, density.step));
    }
    if density.len() < z.len() {
        return domain("density grid is shorter than the forcing grid");
    }
    if !(0.0..=1.0 + 1e-9).contains(&mass) {
        return domain(format!("measure mass must lie in [0, 1], got {mass}"));
    }
    let f = &density.values[..z.len()];
    if f.iter().any(|&v| v < 0.0) {
        return domain("density has negative values");
    }
    let quad = trapezoid(f, step);
    if quad > mass + 1e-3 {
        return domain(format!(
            "tabulated density integrates to {quad}, above the stated mass {mass}"
        ));
    }
    let divisor = 1.0 - 0.5 * step * f[0];
    if divisor <= 0.0 {
        return domain(format!(
            "step {step} too coarse for f(0) = {}; use a smaller step",
            f[0]
        ));
    }
    let n = z.len();
    let mut out = vec![0.0; n];
    out[0] = z.values[0];
    for i in 1..n {
        // Σ_{j=1}^{i-1} Z[i-j] f[j]
        let inner: f64 = out[1..i]
            .iter()
            .rev()
            .zip(&f[1..i])
            .map(|(zv, fv)| zv * fv)
            .sum();
        out[i] = (z.values[i] + step * (inner + 0.5 * out[0] * f[i])) / divisor;
    }
    GridFunction::new(step, out)
}

fn grid_size(horizon: f64, step: f64) -> Result<usize> {
    if !(horizon.is_finite() && horizon > 0.0 && step > 0.0) {
        return domain(format!(
            "need positive horizon and step, got {horizon}, {step}"
        ));
    }
    if step > horizon / 100.0 * (1.0 + 1e-12) {
        return domain(format!(
            "step {step} too coarse for horizon {horizon}; need at most horizon/100"
        ));
    }
    Ok((horizon / step - 1e-9).ceil() as usize)
}

fn density_grid(model: &InterarrivalModel, step: f64, n: usize) -> Result<GridFunction> {
    if model.has_singular_origin() {
        return domain(format!(
            "{model} has an unbounded density at 0; grid solvers need shape >= 1"
        ));
    }
    let mut grid = GridFunction::tabulate(step, n, |t| model.density(t))?;
    // Match the trapezoid mass to F(end) exactly. The raw tabulation
    // overshoots by O(step²), which makes the discrete equation slightly
    // supercritical and lets the error in Φ grow quadratically in t.
    let quad = grid.integral();
    if quad > 0.0 {
        let scale = model.cdf(grid.end()) / quad;
        grid.values.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(grid)
}

/// Renewal function `Φ = Σ_{n≥0} F^{*n}` on `[0, horizon]`, including the
/// atom at 0 (`Φ(0) = 1`).
pub fn renewal_function(
    model: &InterarrivalModel,
    horizon: f64,
    step: f64,
) -> Result<GridFunction> {
    let n = grid_size(horizon, step)?;
    let f = density_grid(model, step, n)?;
    let ones = GridFunction::new(step, vec![1.0; n + 1])?;
    solve_renewal_equation(&ones, &f, 1.0)
}

/// `ψ = Σ_{n≥1} h^{*n}`, the solution of `ψ = h + ψ ∗ h`.
pub fn psi_function(kernel: &ExcitationKernel, horizon: f64, step: f64) -> Result<GridFunction> {
    let n = grid_size(horizon, step)?;
    let h = GridFunction::new(step, kernel.tabulate(step, n))?;
    solve_renewal_equation(&h, &h, kernel.alpha())
}

/// `E[N(t)] = Φ(t) + ∫₀ᵗ ψ(t − s) Φ(s) ds`.
pub fn mean_count(
    model: &InterarrivalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    step: f64,
) -> Result<GridFunction> {
    let phi = renewal_function(model, horizon, step)?;
    let psi = psi_function(kernel, horizon, step)?;
    Ok(compose_mean(&phi, &psi))
}

fn compose_mean(phi: &GridFunction, psi: &GridFunction) -> GridFunction {
    let conv = convolve(&psi.values, &phi.values, phi.step);
    let values = phi.values.iter().zip(conv).map(|(p, c)| p + c).collect();
    GridFunction {
        step: phi.step,
        values,
    }
}

/// Precomputed grids for checking
/// `N(t) − E[N(t)] = A(t) + ∫₀ᵗ ψ(t − s) A(s) ds` with
/// `A = N − ∫(excitation part of λ) − Φ` on many paths.
#[derive(Debug, Clone)]
pub struct LinearFunctionalCheck {
    kernel: ExcitationKernel,
    phi: GridFunction,
    psi: GridFunction,
    mean: GridFunction,
}

impl LinearFunctionalCheck {
    pub fn new(
        model: &InterarrivalModel,
        kernel: &ExcitationKernel,
        horizon: f64,
        step: f64,
    ) -> Result<Self> {
        let phi = renewal_function(model, horizon, step)?;
        let psi = psi_function(kernel, horizon, step)?;
        let mean = compose_mean(&phi, &psi);
        Ok(Self {
            kernel: *kernel,
            phi,
            psi,
            mean,
        })
    }

    /// Max over grid nodes inside the path horizon of `|X̂(t) − (N(t) − E[N(t)])|`.
    pub fn residual(&self, path: &PointProcessPath) -> Result<f64> {
        let step = self.phi.step;
        let nodes = ((path.horizon() / step) + 1e-9).floor() as usize + 1;
        if nodes > self.phi.len() {
            return domain(format!(
                "grid ends at {} but the path runs to {}",
                self.phi.end(),
                path.horizon()
            ));
        }
        let times = path.times();
        let mut counts = Vec::with_capacity(nodes);
        let mut a = Vec::with_capacity(nodes);
        let mut k = 0;
        for i in 0..nodes {
            let t = i as f64 * step;
            while k < times.len() && times[k] <= t {
                k += 1;
            }
            let excitation: f64 = times[..k]
                .iter()
                .map(|&s| self.kernel.integral(t - s))
                .sum();
            counts.push(k as f64);
            a.push(k as f64 - excitation - self.phi.values[i]);
        }
        let smoothed = convolve(&self.psi.values[..nodes], &a, step);
        Ok((0..nodes)
            .map(|i| {
                let x_hat = a[i] + smoothed[i];
                (x_hat - (counts[i] - self.mean.values[i])).abs()
            })
            .fold(0.0, f64::max))
    }

    pub fn mean_count(&self) -> &GridFunction {
        &self.mean
    }
}

/// One-shot version of [`LinearFunctionalCheck::residual`].
pub fn verify_linear_functional(
    path: &PointProcessPath,
    model: &InterarrivalModel,
    kernel: &ExcitationKernel,
    step: f64,
) -> Result<f64> {
    LinearFunctionalCheck::new(model, kernel, path.horizon(), step)?.residual(path)
}
