//! Energy-identity verification (pathwise and in expectation), Mosco-gap
//! certification, and epsilon-sweep convergence studies.

use crate::dissipation::big_f;
use crate::model::{ProblemSpec, SpaceGeometry, StateVector};
use crate::noise::{holder_transfer_constant, sample_wiener};
use crate::reparam::{pl_eval, rescale_path, ParametrizedPath};
use crate::viscous::{simulate_path_with, ViscousPath};
use crate::{Error, Result};

/// Largest pathwise defect of the discrete energy identity.
pub fn energy_residual_pathwise(path: &ViscousPath) -> f64 {
    path.ledger
        .residual
        .iter()
        .map(|r| r.abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedEnergyRow {
    pub tau: f64,
    /// |E Phi(u_hat) + E int (v_hat, du_hat^d) - Phi(u0) - (1/2) E int Tr L t_hat'|
    pub residual: f64,
    /// Monte Carlo standard error of the dropped martingale term.
    pub mart_stderr: f64,
    /// Ensemble mean of the dropped martingale term (should straddle 0).
    pub mart_mean: f64,
    /// First-order scheme bias bound: mean |pathwise ledger defect|.
    pub scheme_bias: f64,
    pub pass: bool,
}

/// Expected energy identity at the given tau checkpoints, evaluated through
/// the change of variables back to original time per path.
pub fn energy_residual_expected(
    pairs: &[(ViscousPath, ParametrizedPath)],
    checkpoints: &[f64],
) -> Result<Vec<ExpectedEnergyRow>> {
    if pairs.len() < 100 {
        return Err(Error::EnsembleTooSmall {
            need: 100,
            have: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mut rows = Vec::with_capacity(checkpoints.len());
    for &tau in checkpoints {
        let mut sum_lhs = 0.0;
        let mut mart_sum = 0.0;
        let mut mart_sumsq = 0.0;
        let mut bias = 0.0;
        for (path, param) in pairs {
            // processes are constant-extended beyond each path's T_hat
            let t_c = pl_eval(&param.tau_grid, &param.t_hat, tau);
            let phi_c = pl_eval(&path.t_grid, &path.ledger.phi_t, t_c);
            let diss_c = pl_eval(&path.t_grid, &path.ledger.dissipation_int, t_c);
            let trace_c = pl_eval(&path.t_grid, &path.ledger.trace_int, t_c);
            let mart_c = pl_eval(&path.t_grid, &path.ledger.mart_int, t_c);
            let defect = pl_eval(&path.t_grid, &path.ledger.residual, t_c);
            sum_lhs += phi_c - path.ledger.phi_t[0] + diss_c - trace_c;
            mart_sum += mart_c;
            mart_sumsq += mart_c * mart_c;
            bias += defect.abs();
        }
        let residual = (sum_lhs / n).abs();
        let mart_mean = mart_sum / n;
        let mart_var = (mart_sumsq / n - mart_mean * mart_mean).max(0.0);
        let mart_stderr = (mart_var / n).sqrt();
        let scheme_bias = bias / n;
        rows.push(ExpectedEnergyRow {
            tau,
            residual,
            mart_stderr,
            mart_mean,
            scheme_bias,
            // the 1e-12 absorbs accumulation rounding when stderr vanishes
            pass: residual <= 3.0 * mart_stderr + scheme_bias + 1e-12,
        });
    }
    Ok(rows)
}

/// Default tau checkpoints: quarters of the smallest parametrized length in
/// the ensemble.
pub fn default_checkpoints(params: &[ParametrizedPath]) -> Vec<f64> {
    let t_hat_min = params
        .iter()
        .map(|p| p.t_hat_total)
        .fold(f64::INFINITY, f64::min);
    if !t_hat_min.is_finite() {
        return Vec::new();
    }
    vec![
        0.25 * t_hat_min,
        0.5 * t_hat_min,
        0.75 * t_hat_min,
        t_hat_min,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps_hi: f64,
    pub eps_lo: f64,
    pub dt: f64,
    pub sup_t_hat: f64,
    pub sup_u_hat: f64,
    pub sup_m_hat: f64,
    pub holder_alpha: f64,
    pub holder_const: f64,
    pub holder_bound: f64,
    pub holder_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Cauchy columns weakly decreasing down the epsilon ladder.
    pub fn weakly_decreasing(&self) -> bool {
        let slack = 1e-12;
        self.rows.windows(2).all(|w| {
            w[1].sup_t_hat <= w[0].sup_t_hat + slack
                && w[1].sup_u_hat <= w[0].sup_u_hat + slack
                && w[1].sup_m_hat <= w[0].sup_m_hat + slack
        })
    }
}

/// Empirical Cauchy differences between consecutive epsilon levels on matched
/// driving noise (all runs share seed and path index 0).
pub fn epsilon_sweep(
    template: &ProblemSpec,
    eps_list: &[f64],
    dt_list: &[f64],
) -> Result<SweepTable> {
    if eps_list.len() < 2 {
        return Err(Error::InvalidSpec(
            "epsilon sweep needs at least two epsilon values".into(),
        ));
    }
    let dts: Vec<f64> = match dt_list.len() {
        0 => vec![template.dt; eps_list.len()],
        1 => vec![dt_list[0]; eps_list.len()],
        n if n == eps_list.len() => dt_list.to_vec(),
        _ => {
            return Err(Error::InvalidSpec(
                "dt list must be empty, a single value, or match the epsilon list".into(),
            ))
        }
    };

    let mut runs = Vec::with_capacity(eps_list.len());
    for (&eps, &dt) in eps_list.iter().zip(&dts) {
        let mut spec = template.clone();
        spec.epsilon = eps;
        spec.dt = dt;
        let wiener = sample_wiener(&spec, 0);
        let path = simulate_path_with(&spec, 0, &wiener, false)?;
        let param = rescale_path(&path, &wiener, dt / 2.0, &spec)?;
        runs.push((spec, wiener, param));
    }

    let alpha = 0.4;
    let mut rows = Vec::new();
    for pair in runs.windows(2) {
        let (spec_a, wiener_a, pa) = &pair[0];
        let (_spec_b, _wiener_b, pb) = &pair[1];
        let t_hat_max = pa.t_hat_total.max(pb.t_hat_total);
        let n_cmp = pa.n_intervals().max(pb.n_intervals()).max(1);
        let mut sup_t = 0.0f64;
        let mut sup_u = 0.0f64;
        let mut sup_m = 0.0f64;
        let mut t1_samples = Vec::with_capacity(n_cmp + 1);
        let mut t2_samples = Vec::with_capacity(n_cmp + 1);
        for j in 0..=n_cmp {
            let tau = j as f64 * t_hat_max / n_cmp as f64;
            let t1 = pl_eval(&pa.tau_grid, &pa.t_hat, tau);
            let t2 = pl_eval(&pb.tau_grid, &pb.t_hat, tau);
            sup_t = sup_t.max((t1 - t2).abs());
            t1_samples.push(t1);
            t2_samples.push(t2);

            let u1 = eval_u_hat(pa, tau);
            let u2 = eval_u_hat(pb, tau);
            sup_u = sup_u.max(spec_a.geometry.h_norm(&u1.sub(&u2))?);

            let m1 = wiener_a.eval(t1)?;
            let m2 = wiener_a.eval(t2)?;
            let dm = m1
                .iter()
                .zip(&m2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sup_m = sup_m.max(dm);
        }
        let holder_const =
            holder_transfer_constant(wiener_a, &t1_samples, &t2_samples, alpha)?;
        let holder_bound = holder_const * sup_t.powf(alpha);
        rows.push(SweepRow {
            eps_hi: spec_a.epsilon,
            eps_lo: pair[1].0.epsilon,
            dt: spec_a.dt,
            sup_t_hat: sup_t,
            sup_u_hat: sup_u,
            sup_m_hat: sup_m,
            holder_alpha: alpha,
            holder_const,
            holder_bound,
            holder_ok: sup_m <= holder_bound + 1e-12,
        });
    }
    Ok(SweepTable { rows })
}

fn eval_u_hat(p: &ParametrizedPath, tau: f64) -> StateVector {
    let n = p.u_hat[0].dim();
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let col: Vec<f64> = p.u_hat.iter().map(|s| s.0[c]).collect();
        out.push(pl_eval(&p.tau_grid, &col, tau));
    }
    StateVector(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoRow {
    pub r: f64,
    pub epsilon: f64,
    pub gap: f64,
    pub expected: f64,
    pub error: f64,
}

/// Gap table over (||z||, eps): the Mosco gap against its algebraic value.
pub fn mosco_table(geom: &SpaceGeometry, eps_list: &[f64], n_grid: usize) -> Result<Vec<MoscoRow>> {
    let mut rows = Vec::new();
    for &eps in eps_list {
        for i in 0..n_grid {
            let r = i as f64 / n_grid as f64 * 0.999;
            let mut z = StateVector::zeros(geom.dim);
            z.0[0] = r / geom.h_weights[0].sqrt();
            let gap = crate::dissipation::mosco_gap(&z, eps, geom)?;
            let expected = eps
                * big_f(geom.h_norm(&z)?)
                    .finite()
                    .expect("inside the unit ball");
            rows.push(MoscoRow {
                r,
                epsilon: eps,
                gap,
                expected,
                error: (gap - expected).abs(),
            });
        }
    }
    Ok(rows)
}

/// Recovery-sequence check at the unit sphere: x_eps = (1-eps)x achieves
/// Psi_hat_eps(x_eps) -> ||x|| = 1 within the computed bound
/// 2 eps + eps |ln eps|.
pub fn mosco_recovery_check(geom: &SpaceGeometry, eps: f64) -> Result<(f64, f64, bool)> {
    let mut x = StateVector::zeros(geom.dim);
    x.0[0] = 1.0 / geom.h_weights[0].sqrt();
    let x_eps = x.scale(1.0 - eps);
    let value = crate::dissipation::psi_hat_eps(&x_eps, eps, geom)?
        .value
        .finite()
        .expect("(1-eps)x lies inside the unit ball");
    let err = (value - 1.0).abs();
    let bound = 2.0 * eps + eps * eps.ln().abs();
    Ok((err, bound, err <= bound))
}

/// Symmetric Hausdorff distance between two polylines in the plane.
pub fn hausdorff_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn point_segment_dist(p: (f64, f64), s0: (f64, f64), s1: (f64, f64)) -> f64 {
        let (dx, dy) = (s1.0 - s0.0, s1.1 - s0.1);
        let len_sq = dx * dx + dy * dy;
        let t = if len_sq > 0.0 {
            (((p.0 - s0.0) * dx + (p.1 - s0.1) * dy) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (cx, cy) = (s0.0 + t * dx, s0.1 + t * dy);
        ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
    }
    fn directed(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
        a.iter()
            .map(|&p| {
                if b.len() == 1 {
                    return point_segment_dist(p, b[0], b[0]);
                }
                b.windows(2)
                    .map(|s| point_segment_dist(p, s[0], s[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::PotentialSpec;
    use crate::model::{ForcingSpec, Matrix};
    use crate::noise::NoiseSpec;
    use crate::viscous::simulate_path;

    fn quad_spec(eps: f64, dt: f64, noise: NoiseSpec) -> ProblemSpec {
        ProblemSpec {
            geometry: SpaceGeometry::unit(1),
            potential: PotentialSpec::quadratic_identity(1),
            noise,
            forcing: ForcingSpec::Ramp { rate: vec![2.0] },
            u0: StateVector::zeros(1),
            horizon: 1.0,
            epsilon: eps,
            dt,
            n_paths: 1,
            seed: 8,
        }
    }

    #[test]
    fn pathwise_residual_zero_when_stationary() {
        let mut spec = quad_spec(1e-2, 1e-3, NoiseSpec::off(1));
        spec.forcing = ForcingSpec::Off;
        spec.u0 = StateVector(vec![0.5]);
        let path = simulate_path(&spec, 0).unwrap();
        assert_eq!(energy_residual_pathwise(&path), 0.0);
    }

    #[test]
    fn pathwise_residual_first_order_deterministic() {
        let mut residuals = Vec::new();
        for dt in [1e-3, 5e-4] {
            let spec = quad_spec(1e-3, dt, NoiseSpec::off(1));
            let path = simulate_path(&spec, 0).unwrap();
            residuals.push(energy_residual_pathwise(&path));
        }
        let ratio = residuals[0] / residuals[1];
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mosco_table_algebraic() {
        let geom = SpaceGeometry::unit(2);
        let rows = mosco_table(&geom, &[0.1, 0.05], 100).unwrap();
        assert_eq!(rows.len(), 200);
        for row in &rows {
            assert!(row.error <= 1e-12);
            assert!(row.gap >= 0.0);
        }
        // halving eps halves the gap at fixed r
        let (a, b) = (&rows[50], &rows[150]);
        assert_eq!(a.r, b.r);
        assert!((a.gap - 2.0 * b.gap).abs() < 1e-15);
    }

    #[test]
    fn mosco_recovery_at_sphere() {
        let geom = SpaceGeometry::unit(1);
        let mut last = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001] {
            let (err, bound, ok) = mosco_recovery_check(&geom, eps).unwrap();
            assert!(ok, "err {err} bound {bound}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn hausdorff_simple() {
        let a = vec![(0.0, 0.0), (1.0, 0.0)];
        let b = vec![(0.0, 0.1), (1.0, 0.1)];
        assert!((hausdorff_distance(&a, &b) - 0.1).abs() < 1e-12);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    #[test]
    fn sweep_stationary_all_zero() {
        let mut spec = quad_spec(1e-1, 1e-3, NoiseSpec::off(1));
        spec.forcing = ForcingSpec::Off;
        spec.u0 = StateVector(vec![0.3]);
        let table = epsilon_sweep(&spec, &[1e-1, 1e-2, 1e-3], &[]).unwrap();
        for row in &table.rows {
            assert_eq!(row.sup_t_hat, 0.0);
            assert_eq!(row.sup_u_hat, 0.0);
            assert_eq!(row.sup_m_hat, 0.0);
        }
        assert!(table.weakly_decreasing());
    }

    #[test]
    fn sweep_deterministic_benchmark_decreases() {
        let spec = quad_spec(1e-1, 1e-3, NoiseSpec::off(1));
        let table = epsilon_sweep(&spec, &[1e-1, 1e-2, 1e-3, 1e-4], &[]).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.weakly_decreasing(), "rows: {:?}", table.rows);
        for row in &table.rows {
            assert!(row.holder_ok);
        }
    }

    #[test]
    fn expected_energy_noise_off_matches_pathwise() {
        let spec = ProblemSpec {
            n_paths: 100,
            ..quad_spec(1e-2, 1e-3, NoiseSpec::off(1))
        };
        let mut pairs = Vec::new();
        for p in 0..spec.n_paths {
            let wiener = crate::noise::sample_wiener(&spec, p);
            let path = simulate_path(&spec, p).unwrap();
            let param = rescale_path(&path, &wiener, spec.dt / 2.0, &spec).unwrap();
            pairs.push((path, param));
        }
        let checkpoints = default_checkpoints(
            &pairs.iter().map(|(_, p)| p.clone()).collect::<Vec<_>>(),
        );
        let rows = energy_residual_expected(&pairs, &checkpoints).unwrap();
        for row in &rows {
            assert!(row.pass, "row {row:?}");
            // noise off: the martingale term is pure rounding residue
            assert!(row.mart_stderr <= 1e-12);
            // deterministic: residual equals the pathwise defect
            assert!(row.residual <= row.scheme_bias + 1e-12);
        }
        assert!(energy_residual_expected(&pairs[..50], &checkpoints).is_err());
    }

    #[test]
    fn expected_energy_additive_noise() {
        let spec = ProblemSpec {
            n_paths: 200,
            ..quad_spec(5e-2, 2e-3, NoiseSpec::additive(Matrix::diag(&[0.2])))
        };
        let mut pairs = Vec::new();
        for p in 0..spec.n_paths {
            let wiener = crate::noise::sample_wiener(&spec, p);
            let path = crate::viscous::simulate_path_with(&spec, p, &wiener, false).unwrap();
            let param = rescale_path(&path, &wiener, spec.dt / 2.0, &spec).unwrap();
            pairs.push((path, param));
        }
        let t_hat_min = pairs
            .iter()
            .map(|(_, p)| p.t_hat_total)
            .fold(f64::INFINITY, f64::min);
        let rows = energy_residual_expected(&pairs, &[0.5 * t_hat_min]).unwrap();
        assert!(rows[0].pass, "row {:?}", rows[0]);
        assert!(rows[0].mart_mean.abs() <= 3.0 * rows[0].mart_stderr + rows[0].scheme_bias);
        // accumulated trace term is nonnegative for the quadratic potential
        let (path, _) = &pairs[0];
        assert!(path.ledger.trace_int.iter().all(|&t| t >= 0.0));
    }
}
