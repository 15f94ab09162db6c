//! Finite-state Markov generators: semigroups, jump-chain simulation, exit
//! times and occupation measures.
//!
//! A [`GeneratorModel`] holds a generator matrix with nonnegative off-diagonal
//! entries and nonpositive row sums. A strictly negative row sum is killing
//! mass (transition to the cemetery). An optional domain mask selects the
//! states of `D`; all operators act through the restriction `L_D`, and
//! vectors returned on the full state space vanish outside `D`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, invalid, Error, Result};

/// Eigenpairs of `L_D` with `L_D v_k = -θ_k v_k`; columns of `vectors` are
/// orthonormal and indexed by full-space state (zero outside `D`).
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub thetas: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "ModelRepr")]
pub struct GeneratorModel {
    generator: DMatrix<f64>,
    domain: Vec<bool>,
    eigen: Option<Eigen>,
}

/// Serialized form: dense row-major generator plus optional domain mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRepr {
    pub dim: usize,
    pub generator: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_mask: Option<Vec<bool>>,
}

impl From<GeneratorModel> for ModelRepr {
    fn from(m: GeneratorModel) -> Self {
        let dim = m.dim();
        let generator = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| m.generator[(i, j)])
            .collect();
        let full = m.domain.iter().all(|&d| d);
        Self {
            dim,
            generator,
            domain_mask: (!full).then_some(m.domain),
        }
    }
}

impl TryFrom<ModelRepr> for GeneratorModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        if r.generator.len() != r.dim * r.dim {
            return Err(Error::Dimension {
                expected: r.dim * r.dim,
                got: r.generator.len(),
            });
        }
        let l = DMatrix::from_row_slice(r.dim, r.dim, &r.generator);
        GeneratorModel::new(l, r.domain_mask)
    }
}

impl<'de> Deserialize<'de> for GeneratorModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ModelRepr::deserialize(d)?;
        GeneratorModel::try_from(repr)
            .and_then(|m| m.with_symmetric_eigen())
            .map_err(serde::de::Error::custom)
    }
}

/// Where a simulated path left `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitState {
    State(usize),
    Cemetery,
}

impl ExitState {
    /// Index with the cemetery encoded as -1.
    pub fn index(self) -> i64 {
        match self {
            ExitState::State(i) => i as i64,
            ExitState::Cemetery => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitSample {
    pub exit_time: f64,
    /// Sojourn time in each state before exit (full-space indexed).
    pub occupation: Vec<f64>,
    pub exit_state: ExitState,
}

const SIGN_SLACK: f64 = 1e-12;

impl GeneratorModel {
    pub fn new(generator: DMatrix<f64>, domain_mask: Option<Vec<bool>>) -> Result<Self> {
        let dim = generator.nrows();
        if dim == 0 || generator.ncols() != dim {
            return Err(invalid("generator", "must be a nonempty square matrix"));
        }
        if generator.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("generator"));
        }
        let domain = match domain_mask {
            Some(mask) => {
                if mask.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: mask.len(),
                    });
                }
                mask
            }
            None => vec![true; dim],
        };
        if !domain.iter().any(|&d| d) {
            return Err(invalid("domain_mask", "domain is empty"));
        }
        for i in 0..dim {
            let mut row = 0.0;
            for j in 0..dim {
                let v = generator[(i, j)];
                if i != j && v < 0.0 {
                    return Err(invalid(
                        "generator",
                        format!("negative off-diagonal entry at ({i}, {j})"),
                    ));
                }
                row += v;
            }
            let scale = generator.row(i).amax().max(1.0);
            if row > SIGN_SLACK * scale {
                return Err(invalid("generator", format!("row {i} sums to {row} > 0")));
            }
        }
        Ok(Self {
            generator,
            domain,
            eigen: None,
        })
    }

    /// Second-difference Laplacian on `n` interior points with zero exterior
    /// values, with its eigendecomposition in closed form.
    pub fn dirichlet_laplacian_1d(n: usize, h: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(
                "n",
                format!("need at least 2 interior states, got {n}"),
            ));
        }
        ensure_positive("h", h)?;
        let k = 1.0 / (h * h);
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            l[(i, i)] = -2.0 * k;
            if i > 0 {
                l[(i, i - 1)] = k;
            }
            if i + 1 < n {
                l[(i, i + 1)] = k;
            }
        }
        let np1 = (n + 1) as f64;
        let pi = std::f64::consts::PI;
        let thetas = (1..=n)
            .map(|m| 2.0 * k * (1.0 - (m as f64 * pi / np1).cos()))
            .collect();
        let norm = (2.0 / np1).sqrt();
        let vectors = DMatrix::from_fn(n, n, |j, m| {
            norm * ((m + 1) as f64 * pi * (j + 1) as f64 / np1).sin()
        });
        let mut model = Self::new(l, None)?;
        model.eigen = Some(Eigen { thetas, vectors });
        Ok(model)
    }

    /// One state with pure killing at rate `theta`: `L = [-θ]`.
    pub fn scalar(theta: f64) -> Result<Self> {
        ensure_nonnegative("theta", theta)?;
        let mut model = Self::new(DMatrix::from_element(1, 1, -theta), None)?;
        model.eigen = Some(Eigen {
            thetas: vec![theta],
            vectors: DMatrix::from_element(1, 1, 1.0),
        });
        Ok(model)
    }

    /// Attaches a numerically computed eigendecomposition when `L_D` is
    /// symmetric; otherwise returns the model unchanged.
    pub fn with_symmetric_eigen(mut self) -> Result<Self> {
        if self.eigen.is_some() {
            return Ok(self);
        }
        let ld = self.restricted();
        let n = ld.nrows();
        let sym_err = (&ld - ld.transpose()).amax();
        if sym_err > 1e-14 * ld.amax().max(1.0) {
            return Ok(self);
        }
        let eig = SymmetricEigen::new(ld.clone());
        let idx = self.domain_indices();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let thetas = order.iter().map(|&k| -eig.eigenvalues[k]).collect();
        let mut vectors = DMatrix::zeros(self.dim(), n);
        for (col, &k) in order.iter().enumerate() {
            for (r, &i) in idx.iter().enumerate() {
                vectors[(i, col)] = eig.eigenvectors[(r, k)];
            }
        }
        self.eigen = Some(Eigen { thetas, vectors });
        let err = self.eigen_reconstruction_error().unwrap_or(0.0);
        if err > 1e-10 {
            return Err(invalid(
                "generator",
                format!("eigendecomposition reconstruction error {err:e}"),
            ));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn domain(&self) -> &[bool] {
        &self.domain
    }

    pub fn eigen(&self) -> Option<&Eigen> {
        self.eigen.as_ref()
    }

    pub fn domain_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.domain[i]).collect()
    }

    /// `L_D`, the generator restricted to the domain states.
    pub fn restricted(&self) -> DMatrix<f64> {
        let idx = self.domain_indices();
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
            self.generator[(idx[a], idx[b])]
        })
    }

    /// No killing and no exterior: constants are preserved.
    pub fn is_conservative(&self) -> bool {
        self.domain.iter().all(|&d| d)
            && (0..self.dim()).all(|i| {
                let s: f64 = self.generator.row(i).sum();
                s.abs() <= SIGN_SLACK * self.generator.row(i).amax().max(1.0)
            })
    }

    /// Relative error of `L_D = -V Θ V^T`.
    pub fn eigen_reconstruction_error(&self) -> Option<f64> {
        let e = self.eigen.as_ref()?;
        let idx = self.domain_indices();
        let v = DMatrix::from_fn(idx.len(), e.thetas.len(), |r, k| e.vectors[(idx[r], k)]);
        let theta = DMatrix::from_diagonal(&DVector::from_vec(e.thetas.clone()));
        let rebuilt = -(&v * theta * v.transpose());
        let ld = self.restricted();
        Some((rebuilt - &ld).amax() / ld.amax().max(f64::MIN_POSITIVE))
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: f.len(),
            });
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(())
    }

    fn gather(&self, f: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.domain.iter().filter(|&&d| d).count(),
            f.iter()
                .zip(&self.domain)
                .filter(|(_, &d)| d)
                .map(|(x, _)| *x),
        )
    }

    fn scatter(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (r, i) in self.domain_indices().into_iter().enumerate() {
            out[i] = v[r];
        }
        out
    }

    /// `L_D f` on the full space.
    pub fn apply_generator(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok(self.scatter(&(self.restricted() * self.gather(f))))
    }

    /// `e^{s L_D} f`.
    pub fn semigroup_apply(&self, s: f64, f: &[f64]) -> Result<Vec<f64>> {
        ensure_nonnegative("s", s)?;
        self.check_len(f)?;
        if s == 0.0 {
            let mut out = f.to_vec();
            for (x, &d) in out.iter_mut().zip(&self.domain) {
                if !d {
                    *x = 0.0;
                }
            }
            return Ok(out);
        }
        if self.is_conservative() && f.iter().all(|&x| x == f[0]) {
            return Ok(f.to_vec());
        }
        let out = match &self.eigen {
            Some(e) => {
                let mut out = vec![0.0; self.dim()];
                self.eigen_apply_into(e, s, f, &mut out);
                out
            }
            None => {
                let p = (self.restricted() * s).exp();
                self.scatter(&(p * self.gather(f)))
            }
        };
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("semigroup_apply"));
        }
        Ok(out)
    }

    /// `Σ_k e^{-θ_k s} v_k (v_k · f)` written into `out`.
    pub(crate) fn eigen_apply_into(&self, e: &Eigen, s: f64, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (k, &theta) in e.thetas.iter().enumerate() {
            let col = e.vectors.column(k);
            let coef: f64 = col.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() * (-theta * s).exp();
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += coef * v;
            }
        }
    }

    /// Jump-chain simulation from `start` until the chain leaves `D` or is
    /// killed.
    pub fn simulate_ctmc<R: Rng + ?Sized>(&self, start: usize, rng: &mut R) -> Result<ExitSample> {
        if start >= self.dim() || !self.domain[start] {
            return Err(invalid(
                "start",
                format!("state {start} is not in the domain"),
            ));
        }
        let mut occupation = vec![0.0; self.dim()];
        let mut time = 0.0;
        let mut i = start;
        loop {
            let rate = -self.generator[(i, i)];
            if rate <= 0.0 {
                return Err(Error::Absorbing(i));
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / rate;
            time += hold;
            occupation[i] += hold;
            let mut pick = rng.random::<f64>() * rate;
            let mut next = None;
            for j in 0..self.dim() {
                if j == i {
                    continue;
                }
                let q = self.generator[(i, j)];
                if pick < q {
                    next = Some(j);
                    break;
                }
                pick -= q;
            }
            match next {
                None => {
                    return Ok(ExitSample {
                        exit_time: time,
                        occupation,
                        exit_state: ExitState::Cemetery,
                    })
                }
                Some(j) if !self.domain[j] => {
                    return Ok(ExitSample {
                        exit_time: time,
                        occupation,
                        exit_state: ExitState::State(j),
                    })
                }
                Some(j) => i = j,
            }
        }
    }

    /// `E_x[τ_D]` for every `x`, solving `L_D v = -1`.
    pub fn mean_exit_solve(&self) -> Result<Vec<f64>> {
        self.occupation_solve(&vec![1.0; self.dim()])
    }

    /// `G_D f = -L_D^{-1} f`, the occupation measure integrated against `f`.
    pub fn occupation_solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let ld = self.restricted();
        let rhs = -self.gather(f);
        let lu = ld.clone().lu();
        let v = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("L_D is not invertible".into()))?;
        let residual = (&ld * &v - &rhs).amax();
        if !residual.is_finite() || residual > 1e-10 * rhs.amax().max(1.0) * v.amax().max(1.0) {
            return Err(Error::Singular(format!(
                "residual {residual:e} after LU solve"
            )));
        }
        Ok(self.scatter(&v))
    }

    /// Eigenvalues `θ_k` as CSV (`k,theta`).
    pub fn write_eigen_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let e = self
            .eigen
            .as_ref()
            .ok_or_else(|| Error::Unsupported("model has no eigendecomposition".into()))?;
        writeln!(out, "k,theta")?;
        for (k, t) in e.thetas.iter().enumerate() {
            writeln!(out, "{k},{t:.16e}")?;
        }
        Ok(())
    }
}
