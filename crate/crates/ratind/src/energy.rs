//! Stored-energy potentials, their gradients B, second derivatives, and the
//! trace term coupling the noise amplitude to the curvature of the energy.

use serde::{Deserialize, Serialize};

use crate::model::{Matrix, StateVector};
use crate::noise::{g_matrix, NoiseSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// Phi(z) = (1/2) z^T K z with K symmetric positive definite.
    Quadratic { stiffness: Matrix },
    /// Componentwise Phi(z) = sum_i (z_i^4/4 - a z_i^2/2 + a^2/4), shifted so
    /// the well bottoms sit at energy zero.
    DoubleWell { well_param: f64 },
    /// Per-coordinate odd polynomial B_i(z) = sum_j coeffs[i][j] z^(2j+1);
    /// Phi is its antiderivative plus a user shift.
    CustomPolynomial { coeffs: Vec<Vec<f64>>, shift: f64 },
}

/// Potential plus the monotonicity/growth constants used by the monitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Growth exponent of the potential (2 quadratic, 4 double-well).
    pub p: f64,
    /// Strong-monotonicity constant.
    pub c_b: f64,
    /// Growth constant for the second derivative.
    pub big_c_b: f64,
    /// Quadratic relaxation constant (0 if p = 2).
    pub c_b_prime: f64,
}

impl PotentialSpec {
    pub fn quadratic(stiffness: Matrix) -> Result<Self> {
        let n = stiffness.rows;
        if stiffness.cols != n {
            return Err(Error::InvalidSpec("stiffness must be square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (stiffness.get(i, j) - stiffness.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidSpec("stiffness must be symmetric".into()));
                }
            }
        }
        let lam_max = stiffness.op_norm_est();
        // smallest eigenvalue via power iteration on lam_max*I - K
        let mut shifted = stiffness.scale(-1.0);
        for i in 0..n {
            shifted.set(i, i, shifted.get(i, i) + lam_max);
        }
        let lam_min = lam_max - shifted.op_norm_est();
        if lam_min <= 1e-12 {
            return Err(Error::InvalidSpec(
                "stiffness must be positive definite".into(),
            ));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Quadratic { stiffness },
            p: 2.0,
            c_b: lam_min,
            big_c_b: lam_max,
            c_b_prime: 0.0,
        })
    }

    pub fn quadratic_identity(n: usize) -> Self {
        PotentialSpec::quadratic(Matrix::identity(n)).expect("identity is spd")
    }

    pub fn double_well(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidSpec("well parameter must be positive".into()));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::DoubleWell { well_param: a },
            p: 4.0,
            // conservative componentwise bound from (u^3-v^3)(u-v) >= |u-v|^4/4
            c_b: 0.125,
            big_c_b: 3.0f64.max(a),
            c_b_prime: a,
        })
    }

    pub fn custom_polynomial(
        coeffs: Vec<Vec<f64>>,
        shift: f64,
        c_b: f64,
        big_c_b: f64,
        c_b_prime: f64,
    ) -> Result<Self> {
        for (i, c) in coeffs.iter().enumerate() {
            match c.last() {
                Some(&lead) if lead > 0.0 => {}
                _ => {
                    return Err(Error::InvalidSpec(format!(
                        "custom polynomial for coordinate {i} needs a positive leading coefficient"
                    )))
                }
            }
        }
        let degree = coeffs.iter().map(|c| c.len()).max().unwrap_or(1);
        Ok(PotentialSpec {
            kind: PotentialKind::CustomPolynomial { coeffs, shift },
            p: (2 * degree) as f64,
            c_b,
            big_c_b,
            c_b_prime,
        })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match &self.kind {
            PotentialKind::Quadratic { stiffness } => {
                if stiffness.rows != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: stiffness.rows,
                    });
                }
            }
            PotentialKind::DoubleWell { well_param } => {
                if !(*well_param > 0.0) {
                    return Err(Error::InvalidSpec("well parameter must be positive".into()));
                }
            }
            PotentialKind::CustomPolynomial { coeffs, .. } => {
                if coeffs.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: coeffs.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn phi(z: &StateVector, spec: &PotentialSpec) -> Result<f64> {
    match &spec.kind {
        PotentialKind::Quadratic { stiffness } => {
            let kz = stiffness.mul_vec(&z.0)?;
            Ok(0.5 * z.0.iter().zip(&kz).map(|(a, b)| a * b).sum::<f64>())
        }
        PotentialKind::DoubleWell { well_param: a } => Ok(z
            .0
            .iter()
            .map(|&x| 0.25 * x.powi(4) - 0.5 * a * x * x + 0.25 * a * a)
            .sum()),
        PotentialKind::CustomPolynomial { coeffs, shift } => {
            let mut total = *shift;
            for (x, c) in z.0.iter().zip(coeffs) {
                for (j, &cj) in c.iter().enumerate() {
                    let pow = 2 * j + 2;
                    total += cj * x.powi(pow as i32) / pow as f64;
                }
            }
            Ok(total)
        }
    }
}

/// B = gradient of phi.
pub fn b_of(z: &StateVector, spec: &PotentialSpec) -> Result<StateVector> {
    match &spec.kind {
        PotentialKind::Quadratic { stiffness } => Ok(StateVector(stiffness.mul_vec(&z.0)?)),
        PotentialKind::DoubleWell { well_param: a } => {
            Ok(StateVector(z.0.iter().map(|&x| x * x * x - a * x).collect()))
        }
        PotentialKind::CustomPolynomial { coeffs, .. } => {
            if coeffs.len() != z.dim() {
                return Err(Error::DimensionMismatch {
                    expected: coeffs.len(),
                    got: z.dim(),
                });
            }
            Ok(StateVector(
                z.0.iter()
                    .zip(coeffs)
                    .map(|(&x, c)| {
                        c.iter()
                            .enumerate()
                            .map(|(j, &cj)| cj * x.powi((2 * j + 1) as i32))
                            .sum()
                    })
                    .collect(),
            ))
        }
    }
}

/// Second derivative of phi as a symmetric matrix.
pub fn db_of(z: &StateVector, spec: &PotentialSpec) -> Result<Matrix> {
    match &spec.kind {
        PotentialKind::Quadratic { stiffness } => Ok(stiffness.clone()),
        PotentialKind::DoubleWell { well_param: a } => Ok(Matrix::diag(
            &z.0.iter().map(|&x| 3.0 * x * x - a).collect::<Vec<_>>(),
        )),
        PotentialKind::CustomPolynomial { coeffs, .. } => {
            if coeffs.len() != z.dim() {
                return Err(Error::DimensionMismatch {
                    expected: coeffs.len(),
                    got: z.dim(),
                });
            }
            Ok(Matrix::diag(
                &z.0.iter()
                    .zip(coeffs)
                    .map(|(&x, c)| {
                        c.iter()
                            .enumerate()
                            .map(|(j, &cj)| {
                                let k = (2 * j + 1) as f64;
                                cj * k * x.powi((2 * j) as i32)
                            })
                            .sum()
                    })
                    .collect::<Vec<_>>(),
            ))
        }
    }
}

/// Trace term Tr[G(t,v) G(t,v)^T dB(v)] entering the energy identities.
pub fn trace_l(t: f64, v: &StateVector, spec: &PotentialSpec, noise: &NoiseSpec) -> Result<f64> {
    let g = g_matrix(t, v, noise)?;
    let gg = g.matmul(&g.transpose())?;
    let db = db_of(v, spec)?;
    Ok(gg.matmul(&db)?.trace())
}
