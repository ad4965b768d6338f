//! Wiener driving at finite dimension: counter-based reproducible sampling,
//! the diffusion map G, rescaled-noise evaluation, and quadratic-variation
//! estimation.

use serde::{Deserialize, Serialize};

use crate::model::{Matrix, ProblemSpec, StateVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Off,
    AdditiveConstant,
    /// G(t,z) row i = sigma row i scaled by (1 + z_i).
    MultiplicativeLinear,
    /// G(t,z) = sigma * (1 + mod_amp * t^holder_t).
    TimeModulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Driving dimension m.
    pub u_dim: usize,
    pub kind: NoiseKind,
    /// Base amplitude, n x m.
    pub sigma: Matrix,
    /// Lipschitz constant in the state.
    pub lip_u: f64,
    /// Time Hoelder exponent in (0, 1].
    pub holder_t: f64,
    /// Amplitude of the time modulation.
    pub mod_amp: f64,
    /// Growth exponent (1 if p > 2).
    pub nu: f64,
}

impl NoiseSpec {
    pub fn off(n: usize) -> Self {
        NoiseSpec {
            u_dim: 1,
            kind: NoiseKind::Off,
            sigma: Matrix::zeros(n, 1),
            lip_u: 0.0,
            holder_t: 1.0,
            mod_amp: 0.0,
            nu: 1.0,
        }
    }

    pub fn additive(sigma: Matrix) -> Self {
        let m = sigma.cols;
        NoiseSpec {
            u_dim: m,
            kind: NoiseKind::AdditiveConstant,
            sigma,
            lip_u: 0.0,
            holder_t: 1.0,
            mod_amp: 0.0,
            nu: 1.0,
        }
    }

    pub fn is_off(&self) -> bool {
        self.kind == NoiseKind::Off
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.u_dim == 0 {
            return Err(Error::InvalidSpec("noise u_dim must be >= 1".into()));
        }
        if self.kind != NoiseKind::Off
            && (self.sigma.rows != n || self.sigma.cols != self.u_dim)
        {
            return Err(Error::InvalidSpec(format!(
                "sigma must be {n} x {} for the configured noise",
                self.u_dim
            )));
        }
        if !(self.holder_t > 0.0 && self.holder_t <= 1.0) {
            return Err(Error::InvalidSpec("holder_t must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// G(t, z) as an n x m matrix.
pub fn g_matrix(t: f64, z: &StateVector, spec: &NoiseSpec) -> Result<Matrix> {
    match spec.kind {
        NoiseKind::Off => Ok(Matrix::zeros(z.dim(), spec.u_dim)),
        NoiseKind::AdditiveConstant => Ok(spec.sigma.clone()),
        NoiseKind::MultiplicativeLinear => {
            if spec.sigma.rows != z.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.sigma.rows,
                    got: z.dim(),
                });
            }
            let mut out = spec.sigma.clone();
            for i in 0..out.rows {
                let factor = 1.0 + z.0[i];
                for j in 0..out.cols {
                    out.set(i, j, out.get(i, j) * factor);
                }
            }
            Ok(out)
        }
        NoiseKind::TimeModulated => {
            Ok(spec.sigma.scale(1.0 + spec.mod_amp * t.abs().powf(spec.holder_t)))
        }
    }
}

/// G(t, z) applied to a driving increment.
pub fn g_apply(t: f64, z: &StateVector, dw: &[f64], spec: &NoiseSpec) -> Result<StateVector> {
    if dw.len() != spec.u_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.u_dim,
            got: dw.len(),
        });
    }
    if spec.kind == NoiseKind::Off {
        return Ok(StateVector::zeros(z.dim()));
    }
    Ok(StateVector(g_matrix(t, z, spec)?.mul_vec(dw)?))
}

// ---------------------------------------------------------------------------
// counter-based generator: every draw is keyed by (seed, path, step,
// component, draw), so path generation is order-independent.

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn keyed(seed: u64, path: u64, step: u64, comp: u64, draw: u64) -> u64 {
    let mut z = seed;
    for word in [path, step, comp, draw] {
        z = mix64(z.wrapping_add(0x9E3779B97F4A7C15).wrapping_add(word.wrapping_mul(0xD1B54A32D192ED03)));
    }
    mix64(z)
}

fn uniform_open(x: u64) -> f64 {
    // (0, 1), never exactly 0
    (((x >> 11) + 1) as f64) / ((1u64 << 53) as f64 + 1.0)
}

/// Standard normal draw for the given counter key (Box-Muller).
pub fn standard_normal(seed: u64, path: u64, step: u64, comp: u64) -> f64 {
    let u1 = uniform_open(keyed(seed, path, step, comp, 0));
    let u2 = uniform_open(keyed(seed, path, step, comp, 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// One discrete Wiener trajectory on the problem's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub t_grid: Vec<f64>,
    /// K x m independent N(0, dt_k) draws.
    pub increments: Vec<Vec<f64>>,
    /// (K+1) x m cumulative sums, row 0 = 0.
    pub cumulative: Vec<Vec<f64>>,
}

impl WienerPath {
    pub fn u_dim(&self) -> usize {
        self.cumulative.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap_or(&0.0)
    }

    /// Evaluate by linear interpolation of the cumulative path.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let t_max = self.horizon();
        if !(t >= -1e-12 && t <= t_max + 1e-9 * t_max.max(1.0)) {
            return Err(Error::OutOfDomain(format!(
                "wiener eval time {t} outside [0, {t_max}]"
            )));
        }
        let t = t.clamp(0.0, t_max);
        // locate the segment containing t
        let k = match self
            .t_grid
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Ok(self.cumulative[i].clone()),
            Err(i) => i.saturating_sub(1).min(self.t_grid.len().saturating_sub(2)),
        };
        let (t0, t1) = (self.t_grid[k], self.t_grid[k + 1]);
        let theta = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Ok(self.cumulative[k]
            .iter()
            .zip(&self.cumulative[k + 1])
            .map(|(a, b)| a + theta * (b - a))
            .collect())
    }
}

/// Deterministic function of (seed, path_index): identical inputs reproduce
/// bit-identical paths.
pub fn sample_wiener(spec: &ProblemSpec, path_index: usize) -> WienerPath {
    let t_grid = spec.t_grid();
    let m = spec.noise.u_dim;
    let steps = t_grid.len() - 1;
    let mut increments = Vec::with_capacity(steps);
    let mut cumulative = Vec::with_capacity(steps + 1);
    cumulative.push(vec![0.0; m]);
    for k in 0..steps {
        let dt = t_grid[k + 1] - t_grid[k];
        let sqrt_dt = dt.sqrt();
        let row: Vec<f64> = (0..m)
            .map(|c| sqrt_dt * standard_normal(spec.seed, path_index as u64, k as u64, c as u64))
            .collect();
        let prev = cumulative.last().unwrap();
        cumulative.push(prev.iter().zip(&row).map(|(a, b)| a + b).collect());
        increments.push(row);
    }
    WienerPath {
        t_grid,
        increments,
        cumulative,
    }
}

/// Rescaled noise M(tau_j) = W(t_hat(tau_j)); plateaus of t_hat give constant
/// samples.
pub fn rescaled_noise(wiener: &WienerPath, t_hat: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut prev = f64::NEG_INFINITY;
    for &t in t_hat {
        if t < prev - 1e-12 {
            return Err(Error::NonMonotone(
                "t_hat samples must be nondecreasing".into(),
            ));
        }
        prev = t;
    }
    t_hat.iter().map(|&t| wiener.eval(t)).collect()
}

/// Mean over the ensemble of the summed squared increments, averaged per
/// component.
pub fn empirical_qv(ensemble: &[Vec<Vec<f64>>]) -> Result<f64> {
    if ensemble.len() < 2 {
        return Err(Error::EnsembleTooSmall {
            need: 2,
            have: ensemble.len(),
        });
    }
    let mut total = 0.0;
    for samples in ensemble {
        let m = samples.first().map(|r| r.len()).unwrap_or(0);
        if m == 0 {
            continue;
        }
        let qv: f64 = samples
            .windows(2)
            .map(|w| {
                w[1].iter()
                    .zip(&w[0])
                    .map(|(b, a)| (b - a) * (b - a))
                    .sum::<f64>()
            })
            .sum();
        total += qv / m as f64;
    }
    Ok(total / ensemble.len() as f64)
}

/// Empirical Hoelder constant of the interpolated Wiener path along the
/// comparison pairs (t1[j], t2[j]): the largest ratio
/// ||W(t1[j]) - W(t2[j])|| / |t1[j] - t2[j]|^alpha.
pub fn holder_transfer_constant(
    wiener: &WienerPath,
    t1: &[f64],
    t2: &[f64],
    alpha: f64,
) -> Result<f64> {
    if t1.len() != t2.len() {
        return Err(Error::DimensionMismatch {
            expected: t1.len(),
            got: t2.len(),
        });
    }
    let mut best = 0.0f64;
    for (&a, &b) in t1.iter().zip(t2) {
        let gap = (a - b).abs();
        if gap < 1e-300 {
            continue;
        }
        let wa = wiener.eval(a)?;
        let wb = wiener.eval(b)?;
        let dist = wa
            .iter()
            .zip(&wb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        best = best.max(dist / gap.powf(alpha));
    }
    Ok(best)
}
