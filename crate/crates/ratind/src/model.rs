//! Finite-dimensional state space: the H inner product, the V seminorm, and
//! the full problem description shared by every other module.

use serde::{Deserialize, Serialize};

use crate::energy::PotentialSpec;
use crate::noise::NoiseSpec;
use crate::{Error, Result};

/// Element of the state space (H = V = real n-space with diagonal weights).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("StateVector coordinate {i}"),
            });
        }
        Ok(StateVector(coords))
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        StateVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        StateVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> StateVector {
        StateVector(self.0.iter().map(|a| a * c).collect())
    }

    /// self + c * other
    pub fn add_scaled(&self, other: &StateVector, c: f64) -> StateVector {
        StateVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }
}

/// Dense row-major matrix, just enough linear algebra for the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidSpec("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Operator-norm estimate by fixed-iteration power method (symmetric use).
    pub fn op_norm_est(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let mut v = vec![1.0; self.cols];
        let mut norm = 0.0;
        for _ in 0..200 {
            let w = self.mul_vec(&v).expect("square");
            norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 1e-300 {
                return 0.0;
            }
            v = w.iter().map(|x| x / norm).collect();
        }
        norm
    }
}

/// Diagonal realization of the Gelfand triple: H and V share coordinates,
/// with v_weights[i] >= h_weights[i] so the embedding ||.||_H <= ||.||_V
/// holds algebraically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceGeometry {
    pub dim: usize,
    pub h_weights: Vec<f64>,
    pub v_weights: Vec<f64>,
    /// Growth exponent p >= 2 of the stored energy.
    pub p: f64,
}

impl SpaceGeometry {
    pub fn new(dim: usize, h_weights: Vec<f64>, v_weights: Vec<f64>, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("dimension must be >= 1".into()));
        }
        if h_weights.len() != dim || v_weights.len() != dim {
            return Err(Error::InvalidSpec(format!(
                "weights must have length {dim}"
            )));
        }
        if h_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSpec("h_weights must be positive".into()));
        }
        for (i, (&hw, &vw)) in h_weights.iter().zip(&v_weights).enumerate() {
            if !(vw >= hw) || !vw.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "v_weights[{i}] must be >= h_weights[{i}]"
                )));
            }
        }
        if !(p >= 2.0) {
            return Err(Error::InvalidSpec("growth exponent p must be >= 2".into()));
        }
        Ok(SpaceGeometry {
            dim,
            h_weights,
            v_weights,
            p,
        })
    }

    pub fn unit(dim: usize) -> Self {
        SpaceGeometry {
            dim,
            h_weights: vec![1.0; dim],
            v_weights: vec![1.0; dim],
            p: 2.0,
        }
    }

    /// Conjugate exponent q = p/(p-1).
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn check_dim(&self, a: &StateVector) -> Result<()> {
        if a.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.dim(),
            });
        }
        Ok(())
    }

    pub fn h_inner(&self, a: &StateVector, b: &StateVector) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self
            .h_weights
            .iter()
            .zip(a.0.iter().zip(&b.0))
            .map(|(w, (x, y))| w * x * y)
            .sum())
    }

    pub fn h_norm(&self, a: &StateVector) -> Result<f64> {
        Ok(self.h_inner(a, a)?.sqrt())
    }

    pub fn v_norm(&self, a: &StateVector) -> Result<f64> {
        self.check_dim(a)?;
        Ok(self
            .v_weights
            .iter()
            .zip(&a.0)
            .map(|(w, x)| w * x * x)
            .sum::<f64>()
            .sqrt())
    }
}

/// Deterministic forcing g(t) entering the inclusion alongside -B(u).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Off,
    Constant { value: Vec<f64> },
    /// g(t) = rate * t, componentwise.
    Ramp { rate: Vec<f64> },
    /// g(t) = amplitude * sin(omega * t), componentwise.
    Sine { amplitude: Vec<f64>, omega: f64 },
}

impl ForcingSpec {
    pub fn eval(&self, t: f64, dim: usize) -> StateVector {
        match self {
            ForcingSpec::Off => StateVector::zeros(dim),
            ForcingSpec::Constant { value } => StateVector(value.clone()),
            ForcingSpec::Ramp { rate } => StateVector(rate.iter().map(|r| r * t).collect()),
            ForcingSpec::Sine { amplitude, omega } => {
                StateVector(amplitude.iter().map(|a| a * (omega * t).sin()).collect())
            }
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self, ForcingSpec::Off)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let len = match self {
            ForcingSpec::Off => return Ok(()),
            ForcingSpec::Constant { value } => value.len(),
            ForcingSpec::Ramp { rate } => rate.len(),
            ForcingSpec::Sine { amplitude, .. } => amplitude.len(),
        };
        if len != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: len,
            });
        }
        Ok(())
    }
}

/// Full problem description. Immutable after construction; shared across
/// concurrently running path simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub geometry: SpaceGeometry,
    pub potential: PotentialSpec,
    pub noise: NoiseSpec,
    pub forcing: ForcingSpec,
    pub u0: StateVector,
    /// Time horizon T.
    pub horizon: f64,
    /// Viscosity parameter, in (0, 1).
    pub epsilon: f64,
    /// Time step.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.geometry.dim;
        if self.u0.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.u0.dim(),
            });
        }
        if !self.u0.is_finite() {
            return Err(Error::NonFinite {
                context: "u0".into(),
            });
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidSpec("horizon must be >= 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidSpec("epsilon must lie in (0, 1)".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidSpec("dt must be positive".into()));
        }
        if self.horizon > 0.0 && self.dt > self.horizon {
            return Err(Error::InvalidSpec("dt must be <= horizon".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidSpec("n_paths must be >= 1".into()));
        }
        self.forcing.validate(n)?;
        self.potential.validate(n)?;
        self.noise.validate(n)?;
        Ok(())
    }

    /// Number of time steps; the grid is t_k = k * horizon / K.
    pub fn n_steps(&self) -> usize {
        if self.horizon == 0.0 {
            0
        } else {
            ((self.horizon / self.dt).round() as usize).max(1)
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let k = self.n_steps();
        if k == 0 {
            return vec![0.0];
        }
        let step = self.horizon / k as f64;
        (0..=k).map(|i| i as f64 * step).collect()
    }
}
