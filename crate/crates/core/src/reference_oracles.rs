//! Analytic and semi-analytic references: the Mittag-Leffler function, the
//! eigenmode transform `U(λ) = φ(λ) / (λ (φ(λ) + θ))` and its numerical
//! inversion, and the subordinated kernel `q(t, x, y)`.
//!
//! Inversion runs two unrelated algorithms (fixed Talbot contour and the
//! Euler-accelerated Fourier series) and reports their difference as the
//! error estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::levy_kernel::LevySpec;
use crate::markov_core::GeneratorModel;
use crate::quadrature::{exp_sinh, tanh_sinh, Tolerance};

/// Below this `|z|` the power series is summed directly; the terms are then
/// bounded by one and cancellation costs at most a factor `e`.
const SERIES_LIMIT: f64 = 1.0;

/// `E_β(z) = Σ z^k / Γ(1 + βk)` for `0 < β ≤ 1`, `z ≤ 0`.
///
/// Small `|z|` uses the series; otherwise the Laplace representation
/// `E_β(-t^β) = ∫_0^∞ e^{-rt} K_β(r) dr` with the spectral density
/// `K_β(r) = sin(βπ) r^{β-1} / (π (r^{2β} + 2 r^β cos(βπ) + 1))`.
pub fn mittag_leffler(beta: f64, z: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    if z.is_nan() || z > 0.0 {
        return Err(invalid("z", format!("must be <= 0, got {z}")));
    }
    if beta == 1.0 {
        return Ok(z.exp());
    }
    let x = -z;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= SERIES_LIMIT {
        return Ok(ml_series(beta, z));
    }
    let t = x.powf(1.0 / beta);
    let (s, c) = (beta * PI).sin_cos();
    let density = |r: f64| -> f64 {
        let rb = r.powf(beta);
        let denom = rb * rb + 2.0 * rb * c + 1.0;
        s / PI * rb / r / denom * (-r * t).exp()
    };
    // The density peaks near r = 1 when β approaches one.
    let tol = Tolerance::new(0.0, 1e-13);
    let head = tanh_sinh(density, 0.0, 1.0, tol)?;
    let tail = exp_sinh(density, 1.0, tol)?;
    Ok(head + tail)
}

fn ml_series(beta: f64, z: f64) -> f64 {
    // Neumaier summation.
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut power = 1.0_f64;
    for k in 0..400 {
        let term = power / gamma(1.0 + beta * k as f64);
        let next = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - next) + term
        } else {
            (term - next) + sum
        };
        sum = next;
        if term.abs() <= 1e-18 * (sum + comp).abs() && k > 2 {
            break;
        }
        power *= z;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversionMethod {
    TalbotContour,
    AbateWhittSeries,
}

/// Which method supplies the returned value and how many nodes it uses.
/// The other method runs at its default node count as the cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    pub method: InversionMethod,
    pub node_count: usize,
    pub target_rel_tol: f64,
}

const TALBOT_NODES: usize = 32;
const EULER_NODES: usize = 15;

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            method: InversionMethod::TalbotContour,
            node_count: TALBOT_NODES,
            target_rel_tol: 1e-8,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 8 {
            return Err(invalid(
                "node_count",
                format!("must be >= 8, got {}", self.node_count),
            ));
        }
        ensure_positive("target_rel_tol", self.target_rel_tol)
    }
}

/// A single eigenmode `L f = -θ f` with initial amplitude `u(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenMode {
    pub theta: f64,
    pub initial_amplitude: f64,
}

impl EigenMode {
    pub fn new(theta: f64, initial_amplitude: f64) -> Result<Self> {
        ensure_positive("theta", theta)?;
        if !initial_amplitude.is_finite() {
            return Err(Error::NonFinite("initial_amplitude"));
        }
        Ok(Self {
            theta,
            initial_amplitude,
        })
    }

    pub fn evaluate(&self, spec: &LevySpec, t: f64, cfg: &InversionConfig) -> Result<Inversion> {
        let mut inv = eigenmode_solution(spec, self.theta, t, cfg)?;
        inv.value *= self.initial_amplitude;
        inv.error_estimate *= self.initial_amplitude.abs();
        Ok(inv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inversion {
    pub value: f64,
    /// `|method₁ - method₂|`.
    pub error_estimate: f64,
    /// Raw value left `[0, 1]` by more than `1e-8` and was clamped.
    pub clamped: bool,
}

/// `U(λ) = φ(λ) / (λ (φ(λ) + θ))`, the time transform of the eigenmode
/// solution with `u(0) = 1`.
pub fn eigenmode_transform(spec: &LevySpec, theta: f64, lambda: f64) -> Result<f64> {
    ensure_positive("theta", theta)?;
    ensure_positive("lambda", lambda)?;
    let phi = spec.laplace_exponent(lambda)?;
    Ok(phi / (lambda * (phi + theta)))
}

fn transform_complex(spec: &LevySpec, theta: f64, s: Complex64) -> Result<Complex64> {
    let phi = spec.kappa * s + spec.phi0_complex(s)?;
    Ok(phi / (s * (phi + theta)))
}

/// Fixed Talbot contour (Abate and Valkó), `r = 2M / (5t)`.
fn talbot<F>(transform: F, t: f64, m: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let mut acc = 0.5 * (transform(Complex64::new(r, 0.0))?.re * (r * t).exp());
    for k in 1..m {
        let th = k as f64 * PI / mf;
        let cot = th.cos() / th.sin();
        let s = Complex64::new(r * th * cot, r * th);
        let sigma = th + (th * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s)? * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    let v = r / mf * acc;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("talbot inversion"))
    }
}

/// Euler-summed Fourier series (Abate and Whitt).
fn euler<F>(transform: F, t: f64, m: usize) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mf = m as f64;
    let shift = mf * std::f64::consts::LN_10 / 3.0;
    // ξ_0 = 1/2, ξ_k = 1 (1 ≤ k ≤ M), then binomial tail sums down to 2^{-M}.
    let mut xi = vec![1.0; 2 * m + 1];
    xi[0] = 0.5;
    let p = 2f64.powi(-(m as i32));
    xi[2 * m] = p;
    let mut binom = 1.0;
    for k in 1..m {
        binom *= (m - k + 1) as f64 / k as f64;
        xi[2 * m - k] = xi[2 * m - k + 1] + p * binom;
    }
    let mut acc = 0.0;
    for (k, &x) in xi.iter().enumerate() {
        let s = Complex64::new(shift, PI * k as f64) / t;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * x * transform(s)?.re;
    }
    let v = 10f64.powf(mf / 3.0) / t * acc;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("euler inversion"))
    }
}

/// `u(t)` for `L f = -θ f`, `u(0) = 1`, by inverting [`eigenmode_transform`].
pub fn eigenmode_solution(
    spec: &LevySpec,
    theta: f64,
    t: f64,
    cfg: &InversionConfig,
) -> Result<Inversion> {
    ensure_positive("theta", theta)?;
    ensure_positive("t", t)?;
    cfg.validate()?;
    let transform = |s: Complex64| transform_complex(spec, theta, s);
    let (primary, check) = match cfg.method {
        InversionMethod::TalbotContour => (
            talbot(transform, t, cfg.node_count)?,
            euler(transform, t, EULER_NODES)?,
        ),
        InversionMethod::AbateWhittSeries => (
            euler(transform, t, cfg.node_count)?,
            talbot(transform, t, TALBOT_NODES)?,
        ),
    };
    let diff = (primary - check).abs();
    // An absolute floor keeps deep-decay values from tripping the check on
    // round-off alone.
    if diff > 10.0 * cfg.target_rel_tol * primary.abs().max(1e-6) {
        let (talbot, euler) = match cfg.method {
            InversionMethod::TalbotContour => (primary, check),
            InversionMethod::AbateWhittSeries => (check, primary),
        };
        return Err(Error::InversionDisagreement { t, talbot, euler });
    }
    let clamped = !(-1e-8..=1.0 + 1e-8).contains(&primary);
    Ok(Inversion {
        value: primary.clamp(0.0, 1.0),
        error_estimate: diff,
        clamped,
    })
}

/// One term of a spectral expansion `p(s, x, y) = Σ e^{-θ_k s} w_k` with
/// `w_k = φ_k(x) φ_k(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMode {
    pub theta: f64,
    pub weight: f64,
}

/// `q(t, x, y) = Σ_k u_{θ_k}(t) w_k`. Modes are summed in increasing `θ`;
/// since `u_θ(t)` is nonincreasing in `θ`, `u_{θ_k}(t) Σ_{j≥k} |w_j|` bounds
/// the remainder and the sum stops once that bound drops below `1e-12` of
/// the partial sum.
pub fn subordinated_kernel(
    spec: &LevySpec,
    modes: &[KernelMode],
    t: f64,
    cfg: &InversionConfig,
) -> Result<f64> {
    ensure_positive("t", t)?;
    let mut sorted = modes.to_vec();
    for m in &sorted {
        if !(m.theta.is_finite() && m.weight.is_finite()) {
            return Err(Error::NonFinite("kernel mode"));
        }
        // Round-off can leave a conservative mode slightly negative.
        if m.theta < -1e-10 {
            return Err(invalid("theta", format!("must be >= 0, got {}", m.theta)));
        }
    }
    sorted.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    let mut remaining: f64 = sorted.iter().map(|m| m.weight.abs()).sum();
    let mut partial = 0.0_f64;
    for m in &sorted {
        let u = if m.theta <= 1e-12 {
            1.0
        } else {
            eigenmode_solution(spec, m.theta, t, cfg)?.value
        };
        if u * remaining < 1e-12 * partial.abs() {
            break;
        }
        partial += u * m.weight;
        remaining -= m.weight.abs();
    }
    Ok(partial)
}

/// [`subordinated_kernel`] with modes taken from a model's eigendecomposition.
pub fn subordinated_kernel_for(
    spec: &LevySpec,
    model: &GeneratorModel,
    t: f64,
    x: usize,
    y: usize,
    cfg: &InversionConfig,
) -> Result<f64> {
    let e = model
        .eigen()
        .ok_or_else(|| Error::Unsupported("model has no eigendecomposition".into()))?;
    for i in [x, y] {
        if i >= model.dim() {
            return Err(invalid(
                "state",
                format!("index {i} out of range for dimension {}", model.dim()),
            ));
        }
    }
    let modes: Vec<KernelMode> = e
        .thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| KernelMode {
            theta,
            weight: e.vectors[(x, k)] * e.vectors[(y, k)],
        })
        .collect();
    subordinated_kernel(spec, &modes, t, cfg)
}
