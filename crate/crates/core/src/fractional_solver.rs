//! Implicit time stepping for `(κ∂_t + ∂_t^w) u = L u` on a finite state
//! space, discretizing the integrated identity
//!
//! `κ(u(t) - f) + ∫_0^t w(t - r)(u(r) - f) dr = ∫_0^t L u(s) ds`.
//!
//! The memory term treats `u` as piecewise constant on `(t_{j-1}, t_j]`, so it
//! only needs exact differences of `G = ∫w`, which stay finite where `w`
//! blows up. `∫Lu` uses the right-endpoint rule. The step matrix
//! `(κ + G(Δt)) I - Δt L` is the same at every step and is factored once.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{ensure_positive, invalid, Error, Result};
use crate::levy_kernel::LevySpec;
use crate::markov_core::GeneratorModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        let grid = Self { t_end, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("t_end", self.t_end)?;
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be >= 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    /// `t_j = j Δt`, with the last node pinned to `t_end`.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.t_end
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.node(j)).collect()
    }
}

/// Memory weights on a uniform grid. `w̄_{n,j} = G(t_n - t_{j-1}) - G(t_n - t_j)`
/// depends only on `n - j`, so one array of G-differences serves every step.
#[derive(Debug, Clone, PartialEq)]
pub struct CaputoWeights {
    /// `G(k Δt)` for `k = 0..=n_steps`.
    g_nodes: Vec<f64>,
    /// `a_k = G((k+1) Δt) - G(k Δt)`.
    diffs: Vec<f64>,
}

const TELESCOPE_TOL: f64 = 1e-12;

impl CaputoWeights {
    pub fn build(spec: &LevySpec, grid: &TimeGrid) -> Result<Self> {
        grid.validate()?;
        let dt = grid.dt();
        let g_nodes = (0..=grid.n_steps)
            .map(|k| spec.integrated_tail_g(k as f64 * dt))
            .collect::<Result<Vec<f64>>>()?;
        if g_nodes.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("integrated kernel G"));
        }
        let diffs: Vec<f64> = g_nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(k) = diffs.iter().position(|&a| a < 0.0) {
            return Err(invalid("spec", format!("G decreases on step {k}")));
        }
        let weights = Self { g_nodes, diffs };
        for n in [1, grid.n_steps / 2, grid.n_steps] {
            if n > 0 {
                let err = weights.telescoping_error(n);
                if err > TELESCOPE_TOL {
                    return Err(invalid(
                        "weights",
                        format!("telescoping error {err:e} at step {n}"),
                    ));
                }
            }
        }
        Ok(weights)
    }

    pub fn n_steps(&self) -> usize {
        self.diffs.len()
    }

    /// `w̄_{n,j}` for `1 ≤ j ≤ n`.
    pub fn weight(&self, n: usize, j: usize) -> f64 {
        debug_assert!(1 <= j && j <= n && n <= self.n_steps());
        self.diffs[n - j]
    }

    pub fn diffs(&self) -> &[f64] {
        &self.diffs
    }

    /// `|Σ_j w̄_{n,j} - G(t_n)|` relative to `G(t_n)`.
    pub fn telescoping_error(&self, n: usize) -> f64 {
        let sum: f64 = self.diffs[..n].iter().sum();
        let g = self.g_nodes[n];
        (sum - g).abs() / g.abs().max(f64::MIN_POSITIVE)
    }

    /// SHA-256 of the little-endian weight bytes, as lowercase hex.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.diffs {
            h.update(a.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeInfo {
    pub weights_sha256: String,
    pub step_residual_tol: f64,
    pub max_step_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub grid: TimeGrid,
    /// `u(t_j, ·)` for `j = 0..=n_steps`; `states[0]` is the initial vector.
    pub states: Vec<Vec<f64>>,
    pub spec: LevySpec,
    pub scheme: SchemeInfo,
}

const STEP_RESIDUAL_TOL: f64 = 1e-10;

/// Time-stepper with the factored step matrix and running sums.
pub struct Stepper<'a> {
    generator: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    system: DMatrix<f64>,
    weights: &'a CaputoWeights,
    kappa: f64,
    dt: f64,
    f0: DVector<f64>,
    history: Vec<DVector<f64>>,
    running_sum: DVector<f64>,
    max_residual: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        model: &GeneratorModel,
        spec: &LevySpec,
        weights: &'a CaputoWeights,
        dt: f64,
        f0: &[f64],
    ) -> Result<Self> {
        ensure_positive("dt", dt)?;
        if f0.len() != model.dim() {
            return Err(Error::Dimension {
                expected: model.dim(),
                got: f0.len(),
            });
        }
        if f0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial vector"));
        }
        let dim = model.dim();
        let generator = full_generator(model);
        let lead = spec.kappa + weights.diffs.first().copied().unwrap_or(0.0);
        if !(lead > 0.0) {
            return Err(Error::Singular("κ + G(Δt) must be positive".into()));
        }
        let system = DMatrix::identity(dim, dim) * lead - &generator * dt;
        let lu = system.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("step matrix".into()));
        }
        let f0 = DVector::from_column_slice(&masked(model, f0));
        Ok(Self {
            generator,
            lu,
            system,
            weights,
            kappa: spec.kappa,
            dt,
            running_sum: DVector::zeros(dim),
            f0,
            history: Vec::new(),
            max_residual: 0.0,
        })
    }

    /// Advances one step and returns `u_n`.
    pub fn step(&mut self) -> Result<&DVector<f64>> {
        let n = self.history.len() + 1;
        if n > self.weights.n_steps() {
            return Err(invalid("n", format!("step {n} beyond the weight table")));
        }
        let a0 = self.weights.diffs[0];
        let mut rhs = &self.f0 * (self.kappa + a0);
        for (idx, uj) in self.history.iter().enumerate() {
            let j = idx + 1;
            let w = self.weights.weight(n, j);
            rhs.axpy(-w, uj, 1.0);
            rhs.axpy(w, &self.f0, 1.0);
        }
        rhs += &self.generator * &self.running_sum * self.dt;
        let un = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("step matrix".into()))?;
        if un.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("solver state"));
        }
        let residual = (&self.system * &un - &rhs).amax() / rhs.amax().max(1.0);
        if residual > STEP_RESIDUAL_TOL {
            return Err(Error::Singular(format!("step {n} residual {residual:e}")));
        }
        self.max_residual = self.max_residual.max(residual);
        self.running_sum += &un;
        self.history.push(un);
        Ok(self.history.last().expect("just pushed"))
    }
}

fn full_generator(model: &GeneratorModel) -> DMatrix<f64> {
    // Rows and columns outside D are zeroed, so exterior entries stay at 0.
    let mut l = model.generator().clone();
    for (i, &inside) in model.domain().iter().enumerate() {
        if !inside {
            l.row_mut(i).fill(0.0);
            l.column_mut(i).fill(0.0);
        }
    }
    l
}

fn masked(model: &GeneratorModel, f: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(model.domain())
        .map(|(&x, &d)| if d { x } else { 0.0 })
        .collect()
}

/// Runs the scheme over the whole grid.
pub fn solve(
    model: &GeneratorModel,
    spec: &LevySpec,
    grid: &TimeGrid,
    f0: &[f64],
) -> Result<SolveResult> {
    let weights = CaputoWeights::build(spec, grid)?;
    solve_with_weights(model, spec, grid, &weights, f0)
}

pub fn solve_with_weights(
    model: &GeneratorModel,
    spec: &LevySpec,
    grid: &TimeGrid,
    weights: &CaputoWeights,
    f0: &[f64],
) -> Result<SolveResult> {
    if weights.n_steps() != grid.n_steps {
        return Err(Error::Dimension {
            expected: grid.n_steps,
            got: weights.n_steps(),
        });
    }
    let mut stepper = Stepper::new(model, spec, weights, grid.dt(), f0)?;
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    states.push(f0.to_vec());
    for _ in 0..grid.n_steps {
        states.push(stepper.step()?.as_slice().to_vec());
    }
    Ok(SolveResult {
        grid: *grid,
        states,
        spec: spec.clone(),
        scheme: SchemeInfo {
            weights_sha256: weights.digest(),
            step_residual_tol: STEP_RESIDUAL_TOL,
            max_step_residual: stepper.max_residual,
        },
    })
}

impl SolveResult {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("states always holds the initial vector")
    }

    /// `t,state_0,...` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.states[0].len();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..dim).map(|i| format!("state_{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (j, u) in self.states.iter().enumerate() {
            write!(out, "{:.16e}", self.grid.node(j))?;
            for x in u {
                write!(out, ",{x:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Max over grid nodes of the sup-norm mismatch in the integrated identity,
/// with `∫Lu` recomputed by the trapezoid rule and the memory term by the
/// solver's weights. It behaves like `Δt/2 |L(u_n - f)|` and so is `O(Δt)`.
pub fn residual_check(result: &SolveResult, model: &GeneratorModel, f0: &[f64]) -> Result<f64> {
    let weights = CaputoWeights::build(&result.spec, &result.grid)?;
    let l = full_generator(model);
    let dt = result.grid.dt();
    let kappa = result.spec.kappa;
    let f = DVector::from_column_slice(&masked(model, f0));
    let us: Vec<DVector<f64>> = result
        .states
        .iter()
        .map(|u| DVector::from_column_slice(u))
        .collect();
    let lus: Vec<DVector<f64>> = us.iter().map(|u| &l * u).collect();
    let mut integral = DVector::zeros(f.len());
    let mut worst = 0.0_f64;
    for n in 1..us.len() {
        integral += (&lus[n - 1] + &lus[n]) * (0.5 * dt);
        let mut lhs = (&us[n] - &f) * kappa;
        for (j, uj) in us.iter().enumerate().take(n + 1).skip(1) {
            lhs.axpy(weights.weight(n, j), &(uj - &f), 1.0);
        }
        worst = worst.max((lhs - &integral).amax());
    }
    Ok(worst)
}

/// `max_j |a_j - b_j|_∞` over two results on the same grid.
pub fn sup_distance(a: &SolveResult, b: &SolveResult) -> Result<f64> {
    if a.grid != b.grid || a.states[0].len() != b.states[0].len() {
        return Err(invalid("result", "grids or dimensions differ"));
    }
    Ok(max_abs_diff(&a.states, &b.states))
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// A family of kernels with a known limit equation.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepFamily {
    /// Truncated stable with growing cutoff, approaching the stable equation.
    TruncatedToStable { beta: f64, deltas: Vec<f64> },
    /// Unit-mass kernels `η_δ` with shrinking support, approaching `∂_t u = L u`.
    EtaToHeat { beta: f64, deltas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Distances strictly decrease along the sweep; `None` for one member.
    pub strictly_decreasing: Option<bool>,
}

/// Solves each family member and measures its sup-norm distance to the
/// limit solution on the same grid.
pub fn convergence_sweep(
    model: &GeneratorModel,
    family: &SweepFamily,
    grid: &TimeGrid,
    f0: &[f64],
) -> Result<SweepReport> {
    let (deltas, reference) = match family {
        SweepFamily::TruncatedToStable { beta, deltas } => {
            let stable = LevySpec::stable(*beta)?;
            (deltas, solve(model, &stable, grid, f0)?.states)
        }
        SweepFamily::EtaToHeat { deltas, .. } => {
            let heat = grid
                .nodes()
                .iter()
                .map(|&t| model.semigroup_apply(t, f0))
                .collect::<Result<Vec<_>>>()?;
            (deltas, heat)
        }
    };
    if deltas.is_empty() {
        return Err(invalid("deltas", "sweep needs at least one member"));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let spec = match family {
            SweepFamily::TruncatedToStable { beta, .. } => {
                LevySpec::truncated_stable(*beta, delta)?
            }
            SweepFamily::EtaToHeat { beta, .. } => LevySpec::eta_delta(*beta, delta)?,
        };
        let member = solve(model, &spec, grid, f0)?;
        rows.push(SweepRow {
            delta,
            distance: max_abs_diff(&member.states, &reference),
        });
    }
    let strictly_decreasing =
        (rows.len() > 1).then(|| rows.windows(2).all(|w| w[1].distance < w[0].distance));
    Ok(SweepReport {
        rows,
        strictly_decreasing,
    })
}
