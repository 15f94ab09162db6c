//! Sampling subordinators, their inverses and first-passage values.
//!
//! Jumps larger than a cutoff `eps` form a Poisson process with intensity
//! `μ|_(eps, ∞)`; smaller jumps are replaced by their mean `∫_0^eps x μ(dx)`,
//! added to the drift. Because every supported measure is a stable density
//! multiplied by an indicator or by `e^{-mx}`, large jumps are proposed from
//! the stable tail (inverted in closed form) and thinned, which samples the
//! restricted measure exactly.

use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Poisson};
use statrs::function::gamma::gamma;

use crate::error::{ensure_nonnegative, ensure_positive, invalid, Error, Result};
use crate::levy_kernel::{Cut, LevySpec};

pub type StreamRng = ChaCha8Rng;

/// Addressable random stream. Equal `(seed, stream_id)` pairs give equal
/// draws; different stream ids select disjoint ChaCha keystreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Steps a lazily extended path may take before giving up.
pub const PATH_BUDGET: u64 = 50_000_000;

/// Draw of `S_t` for the driftless β-stable subordinator with
/// `E e^{-λ S_t} = e^{-t λ^β}` (Kanter's representation).
pub fn sample_stable_increment<R: Rng + ?Sized>(beta: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    ensure_positive("t", t)?;
    Ok(t.powf(1.0 / beta) * stable_unit(beta, rng))
}

#[inline]
pub(crate) fn stable_unit<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u: f64 = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    let a = ((beta * u).sin().powf(beta) * ((1.0 - beta) * u).sin().powf(1.0 - beta) / u.sin())
        .powf(1.0 / (1.0 - beta));
    (a / e).powf((1.0 - beta) / beta)
}

/// `E_t = (t / S_1)^β` for the β-stable subordinator.
pub fn inverse_stable_exact<R: Rng + ?Sized>(beta: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    let s1 = stable_unit(beta, rng);
    Ok((t / s1).powf(beta))
}

/// Cutoff below which jumps are compensated: the largest `eps` whose drift
/// bias `∫_0^eps x μ(dx)` stays below `1e-3 · G(1)`, raised if needed so
/// that `μ(eps, ∞) ≤ 1e6`.
pub fn default_eps(spec: &LevySpec) -> f64 {
    let bias_cap = 1e-3 * spec.g(1.0);
    let count_cap = 1e6;
    // small_jump_mean is increasing and w decreasing in eps; bisect in log eps.
    let bisect = |pred: &dyn Fn(f64) -> bool| -> f64 {
        let (mut lo, mut hi) = (-80.0f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pred(mid.exp()) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo.exp()
    };
    let eps_bias = bisect(&|e| spec.small_jump_mean(e) <= bias_cap);
    let eps_count = if spec.w(eps_bias) <= count_cap {
        0.0
    } else {
        // smallest eps with w(eps) <= cap
        1.0 / bisect(&|inv| spec.w(1.0 / inv) <= count_cap)
    };
    eps_bias.max(eps_count)
}

#[derive(Debug, Clone, Copy)]
struct Proposal {
    rate: f64,
    beta: f64,
    cut: Cut,
}

/// Poisson proposal mechanism for the jumps above `eps` of one spec.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    eps: f64,
    drift: f64,
    kappa: f64,
    total_rate: f64,
    proposals: Vec<Proposal>,
}

impl JumpSampler {
    pub fn new(spec: &LevySpec, eps: f64) -> Result<Self> {
        ensure_positive("eps", eps)?;
        let proposals: Vec<Proposal> = spec
            .pieces()
            .into_iter()
            .map(|p| {
                let live = match p.cut {
                    Cut::Truncate(d) => eps < d,
                    _ => true,
                };
                let rate = if live {
                    p.c * eps.powf(-p.beta) / gamma(1.0 - p.beta)
                } else {
                    0.0
                };
                Proposal {
                    rate,
                    beta: p.beta,
                    cut: p.cut,
                }
            })
            .collect();
        let total_rate: f64 = proposals.iter().map(|p| p.rate).sum();
        if !total_rate.is_finite() {
            return Err(invalid(
                "eps",
                format!("jump rate above {eps} is not finite"),
            ));
        }
        Ok(Self {
            eps,
            drift: spec.kappa + spec.small_jump_mean(eps),
            kappa: spec.kappa,
            total_rate,
            proposals,
        })
    }

    pub fn with_default_eps(spec: &LevySpec) -> Result<Self> {
        Self::new(spec, default_eps(spec))
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Effective drift: κ plus the compensated small jumps.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn compensation(&self) -> f64 {
        self.drift - self.kappa
    }

    /// Rate of proposed jumps (before thinning).
    pub fn proposal_rate(&self) -> f64 {
        self.total_rate
    }

    /// One proposed jump; `None` when thinned away.
    #[inline]
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let p = if self.proposals.len() == 1 {
            &self.proposals[0]
        } else {
            let mut pick = rng.random::<f64>() * self.total_rate;
            let mut chosen = self.proposals.last().unwrap();
            for p in &self.proposals {
                if pick < p.rate {
                    chosen = p;
                    break;
                }
                pick -= p.rate;
            }
            chosen
        };
        let u: f64 = rng.sample(Open01);
        let x = self.eps * u.powf(-1.0 / p.beta);
        match p.cut {
            Cut::None => Some(x),
            Cut::Truncate(d) => (x <= d).then_some(x),
            Cut::Temper(m) => (rng.random::<f64>() < (-m * x).exp()).then_some(x),
        }
    }

    /// Time to the next proposal, or `None` if there are no jumps at all.
    #[inline]
    fn next_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        if self.total_rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            Some(e / self.total_rate)
        } else {
            None
        }
    }

    /// Value of the approximate subordinator at internal time `tau`.
    pub fn increment<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> Result<f64> {
        if tau == 0.0 {
            return Ok(0.0);
        }
        ensure_positive("tau", tau)?;
        let mean = self.total_rate * tau;
        let mut total = self.drift * tau;
        if mean > 0.0 {
            let n: f64 = rng.sample(Poisson::new(mean).map_err(|e| invalid("tau", e.to_string()))?);
            if n > PATH_BUDGET as f64 {
                return Err(Error::PathBudget {
                    steps: n as u64,
                    stream_id: 0,
                });
            }
            for _ in 0..n as u64 {
                if let Some(x) = self.propose(rng) {
                    total += x;
                }
            }
        }
        Ok(total)
    }

    /// First-passage times `E_t` for every `t` in `ts` (ascending) along one
    /// lazily extended path.
    pub fn first_passages<R: Rng + ?Sized>(&self, ts: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(ts.len());
        let mut s = 0.0;
        let mut value = 0.0;
        let mut steps = 0u64;
        let mut pending = ts.iter().copied().peekable();
        while let Some(&t) = pending.peek() {
            if t < 0.0 || t.is_nan() {
                return Err(invalid("t", format!("must be >= 0, got {t}")));
            }
            if value > t {
                // crossed by the last jump
                out.push(s);
                pending.next();
                continue;
            }
            let gap = self.next_gap(rng);
            // drift segment [s, s + gap)
            let reach = match gap {
                Some(g) => value + self.drift * g,
                None => f64::INFINITY,
            };
            while let Some(&t) = pending.peek() {
                if reach > t {
                    if self.drift > 0.0 {
                        out.push(s + (t - value) / self.drift);
                    } else {
                        out.push(s);
                    }
                    pending.next();
                } else {
                    break;
                }
            }
            let Some(g) = gap else {
                if pending.peek().is_some() {
                    return Err(Error::PathBudget {
                        steps,
                        stream_id: 0,
                    });
                }
                break;
            };
            s += g;
            value = reach;
            if let Some(x) = self.propose(rng) {
                value += x;
            }
            steps += 1;
            if steps > PATH_BUDGET {
                return Err(Error::PathBudget {
                    steps,
                    stream_id: 0,
                });
            }
        }
        Ok(out)
    }

    /// Walks one path until it first exceeds `level` and returns `E_level`.
    /// `visit(a, len)` sees every drift segment `S_r = a + drift·(r - r_0)`,
    /// `r ∈ [r_0, r_0 + len)`, the last one cut at the passage time.
    pub fn walk_to_level<R, F>(&self, level: f64, rng: &mut R, mut visit: F) -> Result<f64>
    where
        R: Rng + ?Sized,
        F: FnMut(f64, f64),
    {
        ensure_nonnegative("level", level)?;
        let mut s = 0.0;
        let mut value = 0.0;
        let mut steps = 0u64;
        loop {
            let gap = self.next_gap(rng);
            let reach = gap.map_or(f64::INFINITY, |g| value + self.drift * g);
            if reach > level {
                if self.drift <= 0.0 {
                    return Err(Error::PathBudget {
                        steps,
                        stream_id: 0,
                    });
                }
                let len = (level - value) / self.drift;
                visit(value, len);
                return Ok(s + len);
            }
            let g = gap.expect("finite reach implies a proposal");
            visit(value, g);
            s += g;
            value = reach;
            if let Some(x) = self.propose(rng) {
                value += x;
            }
            if value > level {
                return Ok(s);
            }
            steps += 1;
            if steps > PATH_BUDGET {
                return Err(Error::PathBudget {
                    steps,
                    stream_id: 0,
                });
            }
        }
    }

    /// Samples the path on `[0, horizon]`.
    pub fn path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<SubPath> {
        ensure_positive("horizon", horizon)?;
        let mut jump_times = Vec::new();
        let mut jump_sizes = Vec::new();
        let mut s = 0.0;
        let mut steps = 0u64;
        while let Some(g) = self.next_gap(rng) {
            s += g;
            if s > horizon {
                break;
            }
            if let Some(x) = self.propose(rng) {
                jump_times.push(s);
                jump_sizes.push(x);
            }
            steps += 1;
            if steps > PATH_BUDGET {
                return Err(Error::PathBudget {
                    steps,
                    stream_id: 0,
                });
            }
        }
        Ok(SubPath::new(
            horizon,
            self.drift,
            jump_times,
            jump_sizes,
            self.eps,
            self.total_rate,
        ))
    }
}

/// A sampled nondecreasing subordinator trajectory on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPath {
    pub horizon: f64,
    pub drift: f64,
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
    pub cutoff_eps: f64,
    /// Proposal rate used when sampling, for diagnostics.
    pub jump_rate: f64,
    cumulative: Vec<f64>,
}

impl SubPath {
    pub fn new(
        horizon: f64,
        drift: f64,
        jump_times: Vec<f64>,
        jump_sizes: Vec<f64>,
        cutoff_eps: f64,
        jump_rate: f64,
    ) -> Self {
        let mut acc = 0.0;
        let cumulative = jump_sizes
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self {
            horizon,
            drift,
            jump_times,
            jump_sizes,
            cutoff_eps,
            jump_rate,
            cumulative,
        }
    }

    fn jumps_through(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1]
        }
    }

    /// `S_s = drift·s + Σ_{t_i ≤ s} jump_i` (right continuous).
    pub fn evaluate(&self, s: f64) -> f64 {
        let n = self.jump_times.partition_point(|&t| t <= s);
        self.drift * s + self.jumps_through(n)
    }

    /// `E_t = inf{s : S_s > t}`, or `None` if the path does not pass `t`
    /// before its horizon.
    pub fn first_passage(&self, t: f64) -> Option<f64> {
        // first jump after which the path exceeds t
        let post = |i: usize| self.drift * self.jump_times[i] + self.cumulative[i];
        let (mut lo, mut hi) = (0, self.jump_times.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if post(mid) <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let before = self.jumps_through(i);
        if i < self.jump_times.len() {
            let ti = self.jump_times[i];
            if self.drift > 0.0 && self.drift * ti + before > t {
                Some((t - before) / self.drift)
            } else {
                Some(ti)
            }
        } else if self.drift > 0.0 {
            let s = (t - before) / self.drift;
            (s <= self.horizon).then_some(s)
        } else {
            None
        }
    }

    /// `(s, S_s)` rows at `resolution + 1` equally spaced points.
    pub fn write_csv<W: Write>(&self, mut out: W, resolution: usize) -> std::io::Result<()> {
        writeln!(out, "s,S_s")?;
        let n = resolution.max(1);
        for k in 0..=n {
            let s = self.horizon * k as f64 / n as f64;
            writeln!(out, "{:.16e},{:.16e}", s, self.evaluate(s))?;
        }
        Ok(())
    }
}

/// Samples a path of `spec` on `[0, horizon]` with small-jump cutoff `eps`.
pub fn sample_path<R: Rng + ?Sized>(
    spec: &LevySpec,
    horizon: f64,
    eps: f64,
    rng: &mut R,
) -> Result<SubPath> {
    JumpSampler::new(spec, eps)?.path(horizon, rng)
}

/// Generic `E_t` sampler: extends a path until it passes `t`.
pub fn inverse_at<R: Rng + ?Sized>(spec: &LevySpec, t: f64, eps: f64, rng: &mut R) -> Result<f64> {
    ensure_positive("t", t)?;
    Ok(JumpSampler::new(spec, eps)?.first_passages(&[t], rng)?[0])
}

/// `S_τ` on a fresh path, for an externally supplied `τ`.
pub fn first_passage_value<R: Rng + ?Sized>(
    spec: &LevySpec,
    tau: f64,
    eps: f64,
    rng: &mut R,
) -> Result<f64> {
    ensure_positive("tau", tau)?;
    JumpSampler::new(spec, eps)?.increment(tau, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn stream_determinism() {
        let a = sample_stable_increment(0.5, 1.0, &mut RandomStream::new(1, 0).rng()).unwrap();
        let b = sample_stable_increment(0.5, 1.0, &mut RandomStream::new(1, 0).rng()).unwrap();
        let c = sample_stable_increment(0.5, 1.0, &mut RandomStream::new(1, 1).rng()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a.to_bits(), c.to_bits());
        assert!(a > 0.0);
    }

    #[test]
    fn stable_laplace_transform() {
        let mut rng = RandomStream::new(7, 0).rng();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| (-sample_stable_increment(0.5, 1.0, &mut rng).unwrap()).exp())
            .collect();
        let (m, se) = mean_se(&xs);
        assert!(
            (m - (-1.0f64).exp()).abs() <= 3.0 * se,
            "{m} vs e^-1, se {se}"
        );
    }

    #[test]
    fn stable_beta_half_is_levy_distribution() {
        // S_1 for β = 1/2 is Lévy with scale 1/2: P(S_1 <= x) = erfc(1/(2√x)).
        let mut rng = RandomStream::new(8, 0).rng();
        let n = 50_000;
        let below = (0..n)
            .filter(|_| sample_stable_increment(0.5, 1.0, &mut rng).unwrap() <= 1.0)
            .count() as f64
            / n as f64;
        let p = statrs::function::erf::erfc(0.5);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((below - p).abs() < 4.0 * se);
    }

    #[test]
    fn parameter_validation() {
        let mut rng = RandomStream::new(1, 0).rng();
        assert!(sample_stable_increment(1.0, 1.0, &mut rng).is_err());
        assert!(sample_stable_increment(0.5, 0.0, &mut rng).is_err());
        assert!(inverse_stable_exact(0.0, 1.0, &mut rng).is_err());
        let s = LevySpec::stable(0.5).unwrap();
        assert!(sample_path(&s, 1.0, 0.0, &mut rng).is_err());
        assert!(sample_path(&s, 0.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn inverse_stable_at_zero() {
        let mut rng = RandomStream::new(1, 0).rng();
        assert_eq!(inverse_stable_exact(0.5, 0.0, &mut rng).unwrap(), 0.0);
        assert!(inverse_stable_exact(0.5, 1e-12, &mut rng).unwrap() < 1e-3);
    }

    #[test]
    fn path_starts_at_zero_and_is_monotone() {
        let spec = LevySpec::tempered_stable(0.5, 1.0).unwrap();
        let path = sample_path(&spec, 1.0, 1e-3, &mut RandomStream::new(3, 0).rng()).unwrap();
        assert_eq!(path.evaluate(0.0), 0.0);
        let mut prev = 0.0;
        for k in 0..=1000 {
            let v = path.evaluate(k as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn truncated_jump_count() {
        let spec = LevySpec::truncated_stable(0.5, 1.0).unwrap();
        let eps = 0.5;
        let expected = spec.w(eps);
        let counts: Vec<f64> = (0..10_000)
            .map(|i| {
                let p = sample_path(&spec, 1.0, eps, &mut RandomStream::new(5, i).rng()).unwrap();
                p.jump_times.len() as f64
            })
            .collect();
        let (m, se) = mean_se(&counts);
        assert!(
            (m - expected).abs() <= 3.0 * se,
            "{m} vs {expected} (se {se})"
        );
    }

    #[test]
    fn path_and_lazy_inverse_agree() {
        let spec = LevySpec::tempered_stable(0.5, 1.0)
            .unwrap()
            .with_kappa(0.3)
            .unwrap();
        let sampler = JumpSampler::new(&spec, 1e-3).unwrap();
        for id in 0..50 {
            let stream = RandomStream::new(11, id);
            let path = sampler.path(200.0, &mut stream.rng()).unwrap();
            let ts = [0.1, 0.5, 1.0, 3.0];
            let lazy = sampler.first_passages(&ts, &mut stream.rng()).unwrap();
            for (t, e) in ts.iter().zip(lazy) {
                assert_relative_eq!(path.first_passage(*t).unwrap(), e, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn walk_matches_lazy_inverse() {
        let spec = LevySpec::stable(0.5).unwrap();
        let sampler = JumpSampler::new(&spec, 1e-4).unwrap();
        for id in 0..50 {
            let stream = RandomStream::new(5, id);
            let mut covered = 0.0;
            let mut last_end = 0.0;
            let e = sampler
                .walk_to_level(1.0, &mut stream.rng(), |a, len| {
                    assert!(a >= last_end);
                    covered += len;
                    last_end = a + sampler.drift() * len;
                })
                .unwrap();
            let lazy = sampler.first_passages(&[1.0], &mut stream.rng()).unwrap()[0];
            assert_relative_eq!(e, lazy, max_relative = 1e-12);
            assert_relative_eq!(covered, e, max_relative = 1e-12);
            assert!(last_end <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn first_passage_definition() {
        let spec = LevySpec::stable(0.6).unwrap();
        let path = sample_path(&spec, 5.0, 1e-3, &mut RandomStream::new(2, 0).rng()).unwrap();
        for &t in &[0.01, 0.3, 1.0, 2.0] {
            if let Some(e) = path.first_passage(t) {
                assert!(path.evaluate(e + 1e-9) > t);
                assert!(path.evaluate((e - 1e-9).max(0.0)) <= t + 1e-9);
            }
        }
    }

    #[test]
    fn drift_dominated_inverse() {
        // κ = 1 with a measure of negligible mass: E_t ≈ t.
        let spec = LevySpec::truncated_stable(0.5, 1e-8)
            .unwrap()
            .with_kappa(1.0)
            .unwrap();
        let e = inverse_at(&spec, 1.0, 1e-9, &mut RandomStream::new(1, 0).rng()).unwrap();
        assert!((e - 1.0).abs() < 1e-2);
    }

    #[test]
    fn drift_only_first_passage_value() {
        let spec = LevySpec::truncated_stable(0.5, 1e-8)
            .unwrap()
            .with_kappa(1.0)
            .unwrap();
        let v = first_passage_value(&spec, 2.0, 1e-9, &mut RandomStream::new(1, 0).rng()).unwrap();
        assert!((v - 2.0).abs() < 1e-2);
    }

    #[test]
    fn default_eps_bounds() {
        for spec in [
            LevySpec::stable(0.5).unwrap(),
            LevySpec::tempered_stable(0.5, 1.0).unwrap(),
            LevySpec::truncated_stable(0.3, 2.0).unwrap(),
        ] {
            let eps = default_eps(&spec);
            assert!(spec.small_jump_mean(eps) <= 1e-3 * spec.g(1.0) * (1.0 + 1e-9));
            assert!(spec.w(eps) <= 1e6);
        }
        // β close to 1 needs the count bound to win
        let heavy = LevySpec::stable(0.9).unwrap();
        let eps = default_eps(&heavy);
        assert!(heavy.w(eps) <= 1e6 * (1.0 + 1e-9));
    }

    #[test]
    fn csv_dump_shape() {
        let spec = LevySpec::stable(0.5).unwrap();
        let path = sample_path(&spec, 1.0, 1e-2, &mut RandomStream::new(1, 0).rng()).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf, 4).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "s,S_s");
        assert_eq!(lines.len(), 6);
    }
}
