//! Lévy measures of subordinators and the kernel functions derived from them.
//!
//! A subordinator with drift `κ` and Lévy measure `μ` has Laplace exponent
//! `φ(λ) = κλ + ∫(1 - e^{-λx}) μ(dx)`. The memory kernel of the associated
//! time derivative is the tail `w(x) = μ(x, ∞)` and its running integral
//! `G(x) = ∫_0^x w`. Every family supported here is a (possibly scaled,
//! truncated or tempered) one-sided stable density
//! `c β / Γ(1-β) · x^{-1-β}`, so each kernel function is available in closed
//! form and mixtures are plain sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{ensure_nonnegative, ensure_positive, invalid, Error, Result};
use crate::quadrature::{exp_sinh, tanh_sinh, tanh_sinh_split, Tolerance};

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

/// A subordinator's law: drift plus a parametric Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLevySpec")]
pub struct LevySpec {
    pub kappa: f64,
    pub measure: LevyMeasure,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevySpec {
    kappa: f64,
    measure: LevyMeasure,
}

impl TryFrom<RawLevySpec> for LevySpec {
    type Error = Error;

    fn try_from(raw: RawLevySpec) -> Result<Self> {
        LevySpec::new(raw.kappa, raw.measure)
    }
}

/// Parametric Lévy measures. `scale` multiplies the whole density and
/// defaults to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyMeasure {
    Stable {
        beta: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    TruncatedStable {
        beta: f64,
        delta: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    TemperedStable {
        beta: f64,
        m: f64,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        scale: f64,
    },
    /// Finite discretization of a distributed-order density `c(β) dβ`.
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub beta: f64,
}

/// `φ'(0) = E[S_1]`, which is infinite for every heavy-tailed family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanRate {
    Finite(f64),
    Infinite,
}

impl MeanRate {
    pub fn finite(self) -> Option<f64> {
        match self {
            MeanRate::Finite(v) => Some(v),
            MeanRate::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, MeanRate::Finite(_))
    }
}

/// How a stable density is modified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Cut {
    None,
    Truncate(f64),
    Temper(f64),
}

/// One scaled stable density `c β/Γ(1-β) x^{-1-β}` with an optional cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub c: f64,
    pub beta: f64,
    pub cut: Cut,
    /// Γ(1-β)
    g1: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

impl LevySpec {
    pub fn new(kappa: f64, measure: LevyMeasure) -> Result<Self> {
        ensure_nonnegative("kappa", kappa)?;
        match &measure {
            LevyMeasure::Stable { beta, scale } => {
                check_beta(*beta)?;
                ensure_positive("scale", *scale)?;
            }
            LevyMeasure::TruncatedStable { beta, delta, scale } => {
                check_beta(*beta)?;
                ensure_positive("delta", *delta)?;
                ensure_positive("scale", *scale)?;
            }
            LevyMeasure::TemperedStable { beta, m, scale } => {
                check_beta(*beta)?;
                ensure_positive("m", *m)?;
                ensure_positive("scale", *scale)?;
            }
            LevyMeasure::Mixture { components } => {
                if components.is_empty() {
                    return Err(invalid(
                        "components",
                        "mixture needs at least one component",
                    ));
                }
                for c in components {
                    check_beta(c.beta)?;
                    ensure_positive("weight", c.weight)?;
                }
            }
        }
        Ok(Self { kappa, measure })
    }

    pub fn stable(beta: f64) -> Result<Self> {
        Self::new(0.0, LevyMeasure::Stable { beta, scale: 1.0 })
    }

    pub fn truncated_stable(beta: f64, delta: f64) -> Result<Self> {
        Self::new(
            0.0,
            LevyMeasure::TruncatedStable {
                beta,
                delta,
                scale: 1.0,
            },
        )
    }

    pub fn tempered_stable(beta: f64, m: f64) -> Result<Self> {
        Self::new(
            0.0,
            LevyMeasure::TemperedStable {
                beta,
                m,
                scale: 1.0,
            },
        )
    }

    pub fn mixture(components: &[(f64, f64)]) -> Result<Self> {
        let components = components
            .iter()
            .map(|&(weight, beta)| MixtureComponent { weight, beta })
            .collect();
        Self::new(0.0, LevyMeasure::Mixture { components })
    }

    /// The kernel `η_δ`: truncated stable rescaled to unit mass,
    /// `Γ(2-β) δ^{β-1} / β · w_δ`. Its subordinator has mean rate 1 and tends
    /// to the identity clock as `δ → 0`.
    pub fn eta_delta(beta: f64, delta: f64) -> Result<Self> {
        check_beta(beta)?;
        ensure_positive("delta", delta)?;
        let scale = gamma(2.0 - beta) * delta.powf(beta - 1.0) / beta;
        Self::new(0.0, LevyMeasure::TruncatedStable { beta, delta, scale })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        ensure_nonnegative("kappa", kappa)?;
        self.kappa = kappa;
        Ok(self)
    }

    /// Multiplies the Lévy measure by `factor` (drift untouched).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ensure_positive("factor", factor)?;
        let measure = match self.measure.clone() {
            LevyMeasure::Stable { beta, scale } => LevyMeasure::Stable {
                beta,
                scale: scale * factor,
            },
            LevyMeasure::TruncatedStable { beta, delta, scale } => LevyMeasure::TruncatedStable {
                beta,
                delta,
                scale: scale * factor,
            },
            LevyMeasure::TemperedStable { beta, m, scale } => LevyMeasure::TemperedStable {
                beta,
                m,
                scale: scale * factor,
            },
            LevyMeasure::Mixture { components } => LevyMeasure::Mixture {
                components: components
                    .into_iter()
                    .map(|c| MixtureComponent {
                        weight: c.weight * factor,
                        beta: c.beta,
                    })
                    .collect(),
            },
        };
        Self::new(self.kappa, measure)
    }

    /// The same measure with zero drift (the `S̄` part of `S = κt + S̄`).
    pub fn driftless(&self) -> Self {
        Self {
            kappa: 0.0,
            measure: self.measure.clone(),
        }
    }

    /// `Some(β)` when this is an unscaled or scaled pure stable law.
    pub fn stable_index(&self) -> Option<f64> {
        match self.measure {
            LevyMeasure::Stable { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub(crate) fn pieces(&self) -> Vec<Piece> {
        let mk = |c: f64, beta: f64, cut: Cut| Piece {
            c,
            beta,
            cut,
            g1: gamma(1.0 - beta),
        };
        match &self.measure {
            LevyMeasure::Stable { beta, scale } => vec![mk(*scale, *beta, Cut::None)],
            LevyMeasure::TruncatedStable { beta, delta, scale } => {
                vec![mk(*scale, *beta, Cut::Truncate(*delta))]
            }
            LevyMeasure::TemperedStable { beta, m, scale } => {
                vec![mk(*scale, *beta, Cut::Temper(*m))]
            }
            LevyMeasure::Mixture { components } => components
                .iter()
                .map(|c| mk(c.weight, c.beta, Cut::None))
                .collect(),
        }
    }

    /// Points where `w` is discontinuous or changes formula.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        self.pieces()
            .iter()
            .filter_map(|p| match p.cut {
                Cut::Truncate(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    /// Lévy density at `x > 0`.
    pub fn density(&self, x: f64) -> f64 {
        self.pieces().iter().map(|p| p.density(x)).sum()
    }

    /// `x` times the Lévy density, evaluated without overflow near 0.
    pub(crate) fn moment_density(&self, x: f64) -> f64 {
        self.pieces().iter().map(|p| p.moment_density(x)).sum()
    }

    /// `w(x) = μ(x, ∞)`.
    pub fn tail_w(&self, x: f64) -> Result<f64> {
        ensure_positive("x", x)?;
        Ok(self.w(x))
    }

    pub(crate) fn w(&self, x: f64) -> f64 {
        self.pieces().iter().map(|p| p.tail(x)).sum()
    }

    /// `G(x) = ∫_0^x w(t) dt`.
    pub fn integrated_tail_g(&self, x: f64) -> Result<f64> {
        ensure_nonnegative("x", x)?;
        Ok(self.g(x))
    }

    pub(crate) fn g(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.pieces().iter().map(|p| p.g(x)).sum()
    }

    /// `∫_0^x G(t) dt`, used for path-wise integration of `G` along drift
    /// segments.
    pub fn integrated_g2(&self, x: f64) -> Result<f64> {
        ensure_nonnegative("x", x)?;
        Ok(self.g2(x))
    }

    pub(crate) fn g2(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.pieces().iter().map(|p| p.g2(x)).sum()
    }

    /// `φ(λ) = κλ + φ_0(λ)`.
    pub fn laplace_exponent(&self, lambda: f64) -> Result<f64> {
        Ok(self.kappa * lambda + self.phi0(lambda)?)
    }

    /// Driftless Laplace exponent `φ_0(λ) = ∫(1 - e^{-λx}) μ(dx)`.
    pub fn phi0(&self, lambda: f64) -> Result<f64> {
        ensure_positive("lambda", lambda)?;
        self.pieces().iter().map(|p| p.phi0(lambda)).sum()
    }

    pub(crate) fn phi0_complex(&self, z: Complex64) -> Result<Complex64> {
        self.pieces().iter().map(|p| p.phi0_complex(z)).sum()
    }

    /// `φ'(0) = κ + ∫ x μ(dx)`.
    pub fn mean_rate(&self) -> MeanRate {
        let mut total = self.kappa;
        for p in self.pieces() {
            match p.mean() {
                Some(v) => total += v,
                None => return MeanRate::Infinite,
            }
        }
        MeanRate::Finite(total)
    }

    /// `∫_0^eps x μ(dx)`, the mean of the jumps below `eps`.
    pub fn small_jump_mean(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return 0.0;
        }
        self.pieces().iter().map(|p| p.small_jump_mean(eps)).sum()
    }

    /// Relative error of `∫_0^∞ e^{-λx} w(x) dx = φ_0(λ)/λ`, the left side by
    /// quadrature split at 1 and at the kernel breakpoints.
    pub fn check_laplace_identity(&self, lambda: f64) -> Result<f64> {
        ensure_positive("lambda", lambda)?;
        let tol = Tolerance::new(1e-15, 1e-12);
        let f = |x: f64| (-lambda * x).exp() * self.w(x);
        let mut breaks = self.breakpoints();
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let split = breaks.iter().copied().fold(1.0, f64::max);
        let head = tanh_sinh_split(f, 0.0, split, &breaks, tol)?;
        let tail = exp_sinh(f, split, tol)?;
        let lhs = head + tail;
        let rhs = self.phi0(lambda)? / lambda;
        Ok((lhs - rhs).abs() / rhs)
    }

    /// Checks `G(a) = ∫ (ξ ∧ a) μ(dξ)` with the right side integrated
    /// independently from the Lévy density.
    pub fn check_g_bound(&self, a: f64) -> Result<bool> {
        ensure_positive("a", a)?;
        let (lhs, rhs) = self.g_bound_sides(a)?;
        Ok((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()))
    }

    /// Both sides of the `G` / `ξ ∧ a` identity.
    pub fn g_bound_sides(&self, a: f64) -> Result<(f64, f64)> {
        ensure_positive("a", a)?;
        let tol = Tolerance::new(0.0, 1e-12);
        let breaks = self.breakpoints();
        let below = tanh_sinh_split(|x| self.moment_density(x), 0.0, a, &breaks, tol)?;
        // Above a: ∫_a^∞ μ(dξ), split at breakpoints beyond a.
        let mut above_breaks: Vec<f64> = breaks.iter().copied().filter(|&b| b > a).collect();
        above_breaks.sort_by(f64::total_cmp);
        let mut lo = a;
        let mut above = 0.0;
        for b in above_breaks {
            above += tanh_sinh(|x| self.density(x), lo, b, tol)?;
            lo = b;
        }
        above += exp_sinh(|x| self.density(x), lo, tol)?;
        Ok((self.g(a), below + a * above))
    }

    /// Inverse of the tail on `(eps, ∞)`: the `x` with `w(x) = target` found by
    /// bisection in `log x`. Ties at jumps of `w` resolve to the right.
    pub fn tail_quantile(&self, target: f64, eps: f64) -> Result<f64> {
        ensure_positive("target", target)?;
        ensure_positive("eps", eps)?;
        let top = self.w(eps);
        if target > top {
            return Err(invalid("target", format!("exceeds w(eps) = {top}")));
        }
        let mut lo = eps.ln();
        let mut hi = lo;
        let mut steps = 0;
        while self.w(hi.exp()) > target {
            hi += 1.0;
            steps += 1;
            if steps > BISECTION_STEPS {
                return Err(Error::Bracketing(BISECTION_STEPS));
            }
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.w(mid.exp()) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            // log-width 1e-14 is finer than 1e-12 absolute for every x the
            // samplers produce
            if hi - lo <= 1e-14 {
                return Ok(hi.exp());
            }
        }
        Err(Error::Bracketing(BISECTION_STEPS))
    }
}

const BISECTION_STEPS: usize = 200;

impl Piece {
    fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.moment_density(x) / x
    }

    fn moment_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let base = self.c * self.beta / self.g1 * x.powf(-self.beta);
        match self.cut {
            Cut::None => base,
            Cut::Truncate(d) => {
                if x <= d {
                    base
                } else {
                    0.0
                }
            }
            Cut::Temper(m) => base * (-m * x).exp(),
        }
    }

    pub(crate) fn tail(&self, x: f64) -> f64 {
        let b = self.beta;
        match self.cut {
            Cut::None => self.c * x.powf(-b) / self.g1,
            Cut::Truncate(d) => {
                if x >= d {
                    0.0
                } else {
                    self.c * (x.powf(-b) - d.powf(-b)) / self.g1
                }
            }
            Cut::Temper(m) => self.c * b / self.g1 * m.powf(b) * upper_gamma_neg(-b, m * x),
        }
    }

    fn g(&self, x: f64) -> f64 {
        let b = self.beta;
        let g2 = (1.0 - b) * self.g1; // Γ(2-β)
        match self.cut {
            Cut::None => self.c * x.powf(1.0 - b) / g2,
            Cut::Truncate(d) => {
                let y = x.min(d);
                self.c * (y.powf(1.0 - b) / g2 - y * d.powf(-b) / self.g1)
            }
            Cut::Temper(m) => {
                self.c * b * m.powf(b - 1.0) * gamma_lr(1.0 - b, m * x) + x * self.tail(x)
            }
        }
    }

    fn g2(&self, x: f64) -> f64 {
        let b = self.beta;
        let gamma2 = (1.0 - b) * self.g1;
        let gamma3 = (2.0 - b) * gamma2;
        match self.cut {
            Cut::None => self.c * x.powf(2.0 - b) / gamma3,
            Cut::Truncate(d) => {
                let at = |y: f64| {
                    self.c * (y.powf(2.0 - b) / gamma3 - 0.5 * y * y * d.powf(-b) / self.g1)
                };
                if x <= d {
                    at(x)
                } else {
                    at(d) + self.g(d) * (x - d)
                }
            }
            Cut::Temper(m) => {
                let z = m * x;
                x * self.c * b * m.powf(b - 1.0) * gamma_lr(1.0 - b, z)
                    - 0.5 * self.c * b * (1.0 - b) * m.powf(b - 2.0) * gamma_lr(2.0 - b, z)
                    + 0.5 * x * x * self.tail(x)
            }
        }
    }

    fn phi0(&self, lambda: f64) -> Result<f64> {
        let b = self.beta;
        match self.cut {
            Cut::None => Ok(self.c * lambda.powf(b)),
            Cut::Temper(m) => Ok(self.c * m.powf(b) * (b * (lambda / m).ln_1p()).exp_m1()),
            Cut::Truncate(d) => {
                let f = |x: f64| -(-lambda * x).exp_m1() / x * x.powf(-b);
                let knee = 1.0 / lambda;
                let breaks: &[f64] = if knee < d { &[knee] } else { &[] };
                let integral = tanh_sinh_split(f, 0.0, d, breaks, Tolerance::new(0.0, 1e-12))?;
                Ok(self.c * b / self.g1 * integral)
            }
        }
    }

    fn phi0_complex(&self, z: Complex64) -> Result<Complex64> {
        let b = self.beta;
        match self.cut {
            Cut::None => Ok(self.c * z.powf(b)),
            Cut::Temper(m) => Ok(self.c * ((z + m).powf(b) - m.powf(b))),
            Cut::Truncate(_) => Err(Error::Unsupported(
                "complex Laplace exponent of a truncated stable measure".into(),
            )),
        }
    }

    fn mean(&self) -> Option<f64> {
        let b = self.beta;
        match self.cut {
            Cut::None => None,
            Cut::Truncate(d) => Some(self.c * b * d.powf(1.0 - b) / ((1.0 - b) * self.g1)),
            Cut::Temper(m) => Some(self.c * b * m.powf(b - 1.0)),
        }
    }

    fn small_jump_mean(&self, eps: f64) -> f64 {
        let b = self.beta;
        match self.cut {
            Cut::None => self.c * b * eps.powf(1.0 - b) / ((1.0 - b) * self.g1),
            Cut::Truncate(d) => self.c * b * eps.min(d).powf(1.0 - b) / ((1.0 - b) * self.g1),
            Cut::Temper(m) => self.c * b * m.powf(b - 1.0) * gamma_lr(1.0 - b, m * eps),
        }
    }
}

/// `Γ(a, z)` for `a ∈ (-1, 0)` and `z > 0`: Lentz continued fraction for
/// `z > 1`, otherwise the recurrence onto `Γ(a+1, z)`.
pub(crate) fn upper_gamma_neg(a: f64, z: f64) -> f64 {
    debug_assert!(a > -1.0 && a < 0.0);
    if z > 1.0 {
        // Γ(a,z) = e^{-z} z^a / (z + 1 - a - 1(1-a)/(z + 3 - a - ...))
        let tiny = 1e-300;
        let mut b = z + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (-z + a * z.ln()).exp() * h
    } else {
        let upper_next = gamma(a + 1.0) * gamma_ur(a + 1.0, z);
        (z.powf(a) * (-z).exp() - upper_next) / (-a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn all_families() -> Vec<LevySpec> {
        vec![
            LevySpec::stable(0.5).unwrap(),
            LevySpec::truncated_stable(0.5, 1.0).unwrap(),
            LevySpec::tempered_stable(0.5, 1.0).unwrap(),
            LevySpec::mixture(&[(1.0, 0.3), (1.0, 0.7)]).unwrap(),
        ]
    }

    #[test]
    fn stable_tail_at_one() {
        let w = LevySpec::stable(0.5).unwrap().tail_w(1.0).unwrap();
        assert_relative_eq!(w, 1.0 / PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(w, 0.564189583547756, max_relative = 1e-12);
    }

    #[test]
    fn truncated_tail_vanishes_beyond_delta() {
        let s = LevySpec::truncated_stable(0.5, 2.0).unwrap();
        assert_eq!(s.tail_w(3.0).unwrap(), 0.0);
        assert_eq!(s.tail_w(2.0).unwrap(), 0.0);
    }

    #[test]
    fn truncated_tail_inside_window() {
        let s = LevySpec::truncated_stable(0.5, 1.0).unwrap();
        let w = s.tail_w(0.25).unwrap();
        assert_relative_eq!(w, (2.0 - 1.0) / PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn tail_rejects_bad_points() {
        let s = LevySpec::stable(0.5).unwrap();
        assert!(s.tail_w(0.0).is_err());
        assert!(s.tail_w(-1.0).is_err());
        assert!(s.tail_w(f64::NAN).is_err());
        assert!(s.tail_w(f64::INFINITY).is_err());
    }

    #[test]
    fn tail_blows_up_at_origin() {
        for s in all_families() {
            assert!(s.w(1e-12) > 1e3 * s.w(1e-3).max(1e-300));
        }
    }

    #[test]
    fn tempered_tail_matches_quadrature() {
        for &(beta, m) in &[(0.5, 1.0), (0.3, 2.0), (0.8, 0.5)] {
            let s = LevySpec::tempered_stable(beta, m).unwrap();
            for &x in &[1e-6, 0.01, 0.5, 1.0, 3.0, 20.0] {
                let q = exp_sinh(|y| s.density(y), x, Tolerance::new(0.0, 1e-13)).unwrap();
                assert_relative_eq!(s.w(x), q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn g_closed_forms() {
        let s = LevySpec::stable(0.5).unwrap();
        assert_relative_eq!(
            s.integrated_tail_g(1.0).unwrap(),
            1.0 / gamma(1.5),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            s.g(1.0),
            std::f64::consts::FRAC_2_SQRT_PI,
            max_relative = 1e-12
        );
        for s in all_families() {
            assert_eq!(s.integrated_tail_g(0.0).unwrap(), 0.0);
        }
        assert!(s.integrated_tail_g(-1.0).is_err());

        let t = LevySpec::truncated_stable(0.5, 1.0).unwrap();
        let expected = (2.0 * 1.0 - 1.0) / PI.sqrt();
        assert_relative_eq!(t.g(2.0), expected, max_relative = 1e-14);
        assert_relative_eq!(t.g(2.0), t.g(1.0), max_relative = 1e-15);
    }

    #[test]
    fn g_matches_quadrature_of_w() {
        for s in all_families() {
            for &x in &[0.01, 0.5, 1.0, 2.5, 7.0] {
                let q = tanh_sinh_split(
                    |y| s.w(y),
                    0.0,
                    x,
                    &s.breakpoints(),
                    Tolerance::new(0.0, 1e-13),
                )
                .unwrap();
                assert_relative_eq!(s.g(x), q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn g2_matches_quadrature_of_g() {
        for s in all_families() {
            for &x in &[0.01, 0.5, 1.0, 2.5, 7.0] {
                let q = tanh_sinh_split(
                    |y| s.g(y),
                    0.0,
                    x,
                    &s.breakpoints(),
                    Tolerance::new(0.0, 1e-13),
                )
                .unwrap();
                assert_relative_eq!(s.g2(x), q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn laplace_exponent_examples() {
        assert_relative_eq!(
            LevySpec::stable(0.5)
                .unwrap()
                .laplace_exponent(4.0)
                .unwrap(),
            2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            LevySpec::tempered_stable(0.5, 1.0)
                .unwrap()
                .laplace_exponent(3.0)
                .unwrap(),
            1.0,
            max_relative = 1e-14
        );
        for s in all_families() {
            assert!(s.laplace_exponent(1e-40).unwrap() < 1e-8);
            assert!(s.laplace_exponent(0.0).is_err());
        }
        let d = LevySpec::stable(0.5).unwrap().with_kappa(2.0).unwrap();
        assert_relative_eq!(d.laplace_exponent(4.0).unwrap(), 10.0, max_relative = 1e-15);
    }

    #[test]
    fn truncated_phi_matches_incomplete_gamma_form() {
        // ∫_0^δ (1-e^{-λx}) β/Γ(1-β) x^{-1-β} dx
        //   = [λ^β γ(1-β, λδ) - (1 - e^{-λδ}) δ^{-β}] / Γ(1-β)
        let (beta, delta) = (0.5, 1.0);
        let s = LevySpec::truncated_stable(beta, delta).unwrap();
        for &lambda in &[0.5, 2.0, 10.0] {
            let lower = gamma(1.0 - beta) * gamma_lr(1.0 - beta, lambda * delta);
            let closed = (lambda.powf(beta) * lower
                - (1.0 - (-lambda * delta).exp()) * delta.powf(-beta))
                / gamma(1.0 - beta);
            assert_relative_eq!(s.phi0(lambda).unwrap(), closed, max_relative = 1e-10);
        }
    }

    #[test]
    fn mean_rate_examples() {
        assert_eq!(
            LevySpec::stable(0.5).unwrap().mean_rate(),
            MeanRate::Infinite
        );
        assert_eq!(
            LevySpec::mixture(&[(1.0, 0.5)]).unwrap().mean_rate(),
            MeanRate::Infinite
        );
        let t = LevySpec::tempered_stable(0.5, 1.0)
            .unwrap()
            .mean_rate()
            .finite()
            .unwrap();
        assert_relative_eq!(t, 0.5, max_relative = 1e-15);
        let tr = LevySpec::truncated_stable(0.5, 1.0)
            .unwrap()
            .mean_rate()
            .finite()
            .unwrap();
        assert_relative_eq!(tr, 0.5 / gamma(1.5), max_relative = 1e-14);
        assert_relative_eq!(tr, 0.564189583547756, max_relative = 1e-12);
        let with_drift = LevySpec::tempered_stable(0.5, 1.0)
            .unwrap()
            .with_kappa(1.5)
            .unwrap();
        assert_relative_eq!(
            with_drift.mean_rate().finite().unwrap(),
            2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn mean_rate_matches_phi_derivative() {
        let s = LevySpec::tempered_stable(0.3, 2.0).unwrap();
        let h = 1e-7;
        let fd = s.phi0(h).unwrap() / h;
        assert_relative_eq!(s.mean_rate().finite().unwrap(), fd, max_relative = 1e-5);
        let t = LevySpec::truncated_stable(0.6, 1.5).unwrap();
        let fd = t.phi0(h).unwrap() / h;
        assert_relative_eq!(t.mean_rate().finite().unwrap(), fd, max_relative = 1e-5);
    }

    #[test]
    fn laplace_identity_examples() {
        let s = LevySpec::stable(0.5).unwrap();
        assert!(s.check_laplace_identity(1.0).unwrap() <= 1e-8);
        let t = LevySpec::truncated_stable(0.5, 1.0).unwrap();
        assert!(t.check_laplace_identity(2.0).unwrap() <= 1e-8);
        let m = LevySpec::mixture(&[(1.0, 0.3), (1.0, 0.7)]).unwrap();
        assert!(m.check_laplace_identity(5.0).unwrap() <= 1e-8);
        assert!(s.check_laplace_identity(-1.0).is_err());
    }

    #[test]
    fn g_bound_examples() {
        assert!(LevySpec::stable(0.5).unwrap().check_g_bound(1.0).unwrap());
        assert!(LevySpec::tempered_stable(0.5, 2.0)
            .unwrap()
            .check_g_bound(0.5)
            .unwrap());
        let s = LevySpec::stable(0.5).unwrap();
        assert!(s.check_g_bound(1e-9).unwrap());
        let (lhs, _) = s.g_bound_sides(1e-9).unwrap();
        assert_relative_eq!(lhs, 1e-9f64.powf(0.5) / gamma(1.5), max_relative = 1e-12);
        assert!(LevySpec::truncated_stable(0.4, 0.7)
            .unwrap()
            .check_g_bound(2.0)
            .unwrap());
    }

    #[test]
    fn mixture_is_linear() {
        let m = LevySpec::mixture(&[(0.7, 0.3), (1.9, 0.8)]).unwrap();
        let a = LevySpec::new(
            0.0,
            LevyMeasure::Stable {
                beta: 0.3,
                scale: 0.7,
            },
        )
        .unwrap();
        let b = LevySpec::new(
            0.0,
            LevyMeasure::Stable {
                beta: 0.8,
                scale: 1.9,
            },
        )
        .unwrap();
        for &x in &[1e-3, 0.4, 2.0, 9.0] {
            assert_relative_eq!(m.w(x), a.w(x) + b.w(x), max_relative = 1e-14);
            assert_relative_eq!(m.g(x), a.g(x) + b.g(x), max_relative = 1e-14);
            assert_relative_eq!(
                m.phi0(x).unwrap(),
                a.phi0(x).unwrap() + b.phi0(x).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn eta_delta_has_unit_mean_rate() {
        for &delta in &[1.0, 0.5, 0.1] {
            let s = LevySpec::eta_delta(0.5, delta).unwrap();
            assert_relative_eq!(s.mean_rate().finite().unwrap(), 1.0, max_relative = 1e-13);
            // ∫ η_δ = G(δ) = 1
            assert_relative_eq!(s.g(delta), 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn tail_quantile_inverts_w() {
        for s in all_families() {
            let eps = 1e-4;
            let top = s.w(eps);
            for &u in &[0.9, 0.5, 0.01] {
                let x = s.tail_quantile(u * top, eps).unwrap();
                assert_relative_eq!(s.w(x), u * top, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(LevySpec::stable(1.0).is_err());
        assert!(LevySpec::stable(0.0).is_err());
        assert!(LevySpec::truncated_stable(0.5, 0.0).is_err());
        assert!(LevySpec::tempered_stable(0.5, -1.0).is_err());
        assert!(LevySpec::mixture(&[]).is_err());
        assert!(LevySpec::mixture(&[(0.0, 0.5)]).is_err());
        assert!(LevySpec::stable(0.5).unwrap().with_kappa(-1.0).is_err());
    }

    #[test]
    fn json_shape() {
        let s = LevySpec::stable(0.5).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kappa":0.0,"measure":{"type":"stable","beta":0.5}}"#);
        let back: LevySpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);

        let mix: LevySpec = serde_json::from_str(
            r#"{"kappa":1.0,"measure":{"type":"mixture","components":[{"weight":1.0,"beta":0.3}]}}"#,
        )
        .unwrap();
        assert_eq!(mix.kappa, 1.0);
        let tr: LevySpec = serde_json::from_str(
            r#"{"kappa":0.0,"measure":{"type":"truncated_stable","beta":0.5,"delta":2.0}}"#,
        )
        .unwrap();
        assert_eq!(tr, LevySpec::truncated_stable(0.5, 2.0).unwrap());
    }

    #[test]
    fn json_rejects_unknown_and_invalid() {
        assert!(serde_json::from_str::<LevySpec>(
            r#"{"kappa":0.0,"measure":{"type":"stable","beta":0.5,"gamma":1}}"#
        )
        .is_err());
        assert!(serde_json::from_str::<LevySpec>(
            r#"{"kappa":0.0,"extra":1,"measure":{"type":"stable","beta":0.5}}"#
        )
        .is_err());
        assert!(serde_json::from_str::<LevySpec>(
            r#"{"kappa":0.0,"measure":{"type":"stable","beta":1.5}}"#
        )
        .is_err());
    }
}
