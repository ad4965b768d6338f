//! Arc-length rescaling of viscous paths into parametrized records, the
//! inverse construction back to original time, and checkers for the two
//! solution notions.

use crate::dissipation::fenchel_gap;
use crate::energy::b_of;
use crate::model::{ProblemSpec, StateVector};
use crate::noise::{g_matrix, rescaled_noise, WienerPath};
use crate::viscous::ViscousPath;
use crate::{Error, Result};

/// Piecewise-linear evaluation of (xs, ys) at x, clamped to the range of xs.
/// xs must be nondecreasing.
pub fn pl_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= *xs.last().unwrap() {
        return *ys.last().unwrap();
    }
    let idx = match xs.binary_search_by(|probe| probe.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => i - 1,
    };
    let (x0, x1) = (xs[idx], xs[idx + 1]);
    if x1 <= x0 {
        return ys[idx];
    }
    let theta = (x - x0) / (x1 - x0);
    ys[idx] + theta * (ys[idx + 1] - ys[idx])
}

fn pl_eval_state(xs: &[f64], ys: &[StateVector], x: f64) -> StateVector {
    let n = ys[0].dim();
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let col: Vec<f64> = ys.iter().map(|s| s.0[c]).collect();
        out.push(pl_eval(xs, &col, x));
    }
    StateVector(out)
}

/// One rescaled trajectory on a uniform tau grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametrizedPath {
    pub path_index: usize,
    /// Uniform tau nodes 0..T_hat (J+1 entries).
    pub tau_grid: Vec<f64>,
    /// Rescaled time values in [0, T].
    pub t_hat: Vec<f64>,
    pub u_hat: Vec<StateVector>,
    pub u_hat_d: Vec<StateVector>,
    /// v_hat = -B(u_hat).
    pub v_hat: Vec<StateVector>,
    /// Per-interval t_hat difference quotients (J entries).
    pub speed_time: Vec<f64>,
    /// Per-interval arc-length difference quotients (J entries).
    pub speed_state: Vec<f64>,
    /// Rescaled noise samples W(t_hat(tau_j)).
    pub m_hat: Vec<Vec<f64>>,
    /// Total parametrized length T_hat.
    pub t_hat_total: f64,
    /// Original horizon T.
    pub horizon: f64,
}

impl ParametrizedPath {
    pub fn n_intervals(&self) -> usize {
        self.speed_time.len()
    }
}

/// Arc length tau(t_k) = t_k + sum_{j<k} ||d_j||_H dt (left Riemann sum,
/// matching the piecewise-constant drift). Slope >= 1 everywhere.
pub fn arc_length(path: &ViscousPath) -> Vec<f64> {
    path.t_grid
        .iter()
        .zip(&path.arc)
        .map(|(t, a)| t + a)
        .collect()
}

/// Monotone piecewise-linear inversion: for each query tau in tau_queries
/// return t with tau(t) = tau; constant T beyond the final arc length.
pub fn invert_clock(
    tau_nodes: &[f64],
    t_nodes: &[f64],
    tau_queries: &[f64],
) -> Result<Vec<f64>> {
    if tau_nodes.len() != t_nodes.len() || tau_nodes.is_empty() {
        return Err(Error::InvalidSpec("clock inversion needs matching node arrays".into()));
    }
    if tau_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotone(
            "arc-length samples must be strictly increasing".into(),
        ));
    }
    let t_end = *t_nodes.last().unwrap();
    let tau_end = *tau_nodes.last().unwrap();
    let mut out = Vec::with_capacity(tau_queries.len());
    let mut k = 0usize;
    let mut prev_query = f64::NEG_INFINITY;
    for &tau in tau_queries {
        if tau < prev_query {
            // queries may be arbitrary; fall back to a fresh search
            k = 0;
        }
        prev_query = tau;
        if tau >= tau_end {
            out.push(t_end);
            continue;
        }
        if tau <= tau_nodes[0] {
            out.push(t_nodes[0]);
            continue;
        }
        while tau_nodes[k + 1] < tau {
            k += 1;
        }
        let theta = (tau - tau_nodes[k]) / (tau_nodes[k + 1] - tau_nodes[k]);
        out.push(t_nodes[k] + theta * (t_nodes[k + 1] - t_nodes[k]));
    }
    Ok(out)
}

/// Rescale a viscous path by its arc length onto a uniform tau grid.
pub fn rescale_path(
    path: &ViscousPath,
    wiener: &WienerPath,
    tau_step: f64,
    spec: &ProblemSpec,
) -> Result<ParametrizedPath> {
    if !(tau_step > 0.0) {
        return Err(Error::InvalidSpec("tau_step must be positive".into()));
    }
    let tau_nodes = arc_length(path);
    let t_hat_total = *tau_nodes.last().unwrap();
    let horizon = *path.t_grid.last().unwrap();

    let intervals = if t_hat_total > 0.0 {
        ((t_hat_total / tau_step).ceil() as usize).max(1)
    } else {
        0
    };
    let dtau = if intervals > 0 {
        t_hat_total / intervals as f64
    } else {
        0.0
    };
    let tau_grid: Vec<f64> = (0..=intervals)
        .map(|j| {
            if j == intervals {
                t_hat_total
            } else {
                j as f64 * dtau
            }
        })
        .collect();

    let mut t_hat = invert_clock(&tau_nodes, &path.t_grid, &tau_grid)?;
    if let Some(last) = t_hat.last_mut() {
        *last = horizon;
    }

    // arc as a function of t (piecewise linear on the original grid)
    let speed_time: Vec<f64> = (0..intervals)
        .map(|j| (t_hat[j + 1] - t_hat[j]) / dtau)
        .collect();
    let speed_state: Vec<f64> = (0..intervals)
        .map(|j| {
            let a1 = pl_eval(&path.t_grid, &path.arc, t_hat[j + 1]);
            let a0 = pl_eval(&path.t_grid, &path.arc, t_hat[j]);
            (a1 - a0) / dtau
        })
        .collect();

    let u_hat: Vec<StateVector> = t_hat
        .iter()
        .map(|&t| pl_eval_state(&path.t_grid, &path.u, t))
        .collect();
    let u_hat_d: Vec<StateVector> = t_hat
        .iter()
        .map(|&t| pl_eval_state(&path.t_grid, &path.u_d, t))
        .collect();
    let v_hat: Vec<StateVector> = u_hat
        .iter()
        .map(|u| Ok(b_of(u, &spec.potential)?.scale(-1.0)))
        .collect::<Result<_>>()?;
    let m_hat = rescaled_noise(wiener, &t_hat)?;

    Ok(ParametrizedPath {
        path_index: path.path_index,
        tau_grid,
        t_hat,
        u_hat,
        u_hat_d,
        v_hat,
        speed_time,
        speed_state,
        m_hat,
        t_hat_total,
        horizon,
    })
}

/// Fenchel-gap series for the rescaled inclusion, one value per tau interval.
/// The rescaled state velocity is clipped into the closed unit ball before
/// evaluation; the worst overshoot is returned alongside.
pub fn incl_gap_series(p: &ParametrizedPath, spec: &ProblemSpec) -> Result<(Vec<f64>, f64)> {
    let geom = &spec.geometry;
    let mut gaps = Vec::with_capacity(p.n_intervals());
    let mut overshoot = 0.0f64;
    for j in 0..p.n_intervals() {
        let dtau = p.tau_grid[j + 1] - p.tau_grid[j];
        let mut z = p.u_hat_d[j + 1].sub(&p.u_hat_d[j]).scale(1.0 / dtau);
        let z_norm = geom.h_norm(&z)?;
        if z_norm > 1.0 {
            overshoot = overshoot.max(z_norm - 1.0);
            z = z.scale(1.0 / z_norm);
        }
        // forcing enters the inclusion on the driving side
        let g_ext = spec.forcing.eval(p.t_hat[j], geom.dim);
        let v_eff = p.v_hat[j].add(&g_ext);
        gaps.push(fenchel_gap(&z, &v_eff, geom)?);
    }
    Ok((gaps, overshoot))
}

/// Residual of the stronger selection v in A(du^d) (the 0-homogeneous
/// operator rather than its subdifferential hull).
pub fn a_inclusion_residual(p: &ParametrizedPath, spec: &ProblemSpec) -> Result<f64> {
    let geom = &spec.geometry;
    let mut worst = 0.0f64;
    for j in 0..p.n_intervals() {
        let dtau = p.tau_grid[j + 1] - p.tau_grid[j];
        let z = p.u_hat_d[j + 1].sub(&p.u_hat_d[j]).scale(1.0 / dtau);
        let z_norm = geom.h_norm(&z)?;
        let g_ext = spec.forcing.eval(p.t_hat[j], geom.dim);
        let v_eff = p.v_hat[j].add(&g_ext);
        let res = if z_norm > 1e-9 {
            geom.h_norm(&v_eff.sub(&z.scale(1.0 / z_norm)))?
        } else {
            (geom.h_norm(&v_eff)? - 1.0).max(0.0)
        };
        worst = worst.max(res);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ConditionCheck {
    fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        ConditionCheck {
            name,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCheckReport {
    pub conditions: Vec<ConditionCheck>,
    /// Per-interval Fenchel gaps behind the inclusion condition.
    pub gap_series: Vec<f64>,
    pub mean_gap: f64,
    /// Worst unit-ball overshoot of the clipped rescaled velocity.
    pub speed_overshoot: f64,
    /// Residual of the stronger A-selection, reported but not gating.
    pub a_inclusion_residual: f64,
}

impl SolutionCheckReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Ensemble quadratic-variation statistics for the noise condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvStats {
    pub mean_qv: f64,
    pub mean_t_hat: f64,
}

/// Check every condition defining a parametrized solution record, one entry
/// per condition, with numeric residuals.
pub fn check_parametrized(
    p: &ParametrizedPath,
    spec: &ProblemSpec,
    qv: Option<QvStats>,
) -> Result<SolutionCheckReport> {
    let geom = &spec.geometry;
    let mut conditions = Vec::new();

    // (hat_t): t_hat(0) = 0, nondecreasing, t_hat(T_hat) = T
    let mut hat_t_res = p.t_hat.first().copied().unwrap_or(0.0).abs();
    for w in p.t_hat.windows(2) {
        hat_t_res = hat_t_res.max(w[0] - w[1]);
    }
    hat_t_res = hat_t_res.max((p.t_hat.last().copied().unwrap_or(0.0) - p.horizon).abs());
    conditions.push(ConditionCheck::new("hat_t", hat_t_res, 1e-8));

    // (eq_hat): speed_time + speed_state = 1, speed_time >= 0
    let mut eq_hat_res = 0.0f64;
    for j in 0..p.n_intervals() {
        eq_hat_res = eq_hat_res.max((p.speed_time[j] + p.speed_state[j] - 1.0).abs());
        eq_hat_res = eq_hat_res.max(-p.speed_time[j]);
    }
    conditions.push(ConditionCheck::new("eq_hat", eq_hat_res, 1e-8));

    // (quadratic): QV of the rescaled noise equals the elapsed inner clock
    let quad_res = match qv {
        Some(stats) if !spec.noise.is_off() => {
            let denom = stats.mean_t_hat.max(1e-12);
            (stats.mean_qv - stats.mean_t_hat).abs() / denom
        }
        _ => 0.0,
    };
    conditions.push(ConditionCheck::new("quadratic", quad_res, 0.10));

    // (eq1_var'): u_hat = u0 + (u_hat_d - u0) + int G(t_hat, u_hat) dM_hat
    let mut stoch = StateVector::zeros(geom.dim);
    let mut eq1_res = 0.0f64;
    for j in 0..=p.n_intervals() {
        let lhs = p.u_hat[j].sub(&p.u_hat_d[j]);
        eq1_res = eq1_res.max(geom.h_norm(&lhs.sub(&stoch))?);
        if j < p.n_intervals() {
            let g = g_matrix(p.t_hat[j], &p.u_hat[j], &spec.noise)?;
            let dm: Vec<f64> = p.m_hat[j + 1]
                .iter()
                .zip(&p.m_hat[j])
                .map(|(b, a)| b - a)
                .collect();
            stoch = stoch.add(&StateVector(g.mul_vec(&dm)?));
        }
    }
    let eq1_tol = match spec.noise.kind {
        crate::noise::NoiseKind::Off | crate::noise::NoiseKind::AdditiveConstant => 1e-7,
        _ => 1e-7 + 100.0 * spec.dt,
    };
    conditions.push(ConditionCheck::new("eq1_var", eq1_res, eq1_tol));

    // (eq2_var'): v_hat + B(u_hat) = 0
    let mut eq2_res = 0.0f64;
    for (u, v) in p.u_hat.iter().zip(&p.v_hat) {
        let b = b_of(u, &spec.potential)?;
        eq2_res = eq2_res.max(geom.h_norm(&v.add(&b))?);
    }
    conditions.push(ConditionCheck::new("eq2_var", eq2_res, 1e-10));

    // (incl'): Fenchel gap of (clipped rescaled velocity, effective force)
    let (gaps, overshoot) = incl_gap_series(p, spec)?;
    let max_gap = gaps.iter().copied().fold(0.0f64, f64::max);
    let mean_gap = if gaps.is_empty() {
        0.0
    } else {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    let incl_tol = 5.0 * spec.epsilon + 1e-6;
    conditions.push(ConditionCheck::new("incl", max_gap, incl_tol));

    let a_res = a_inclusion_residual(p, spec)?;

    Ok(SolutionCheckReport {
        conditions,
        gap_series: gaps,
        mean_gap,
        speed_overshoot: overshoot,
        a_inclusion_residual: a_res,
    })
}

/// Differential-solution samples on a uniform original-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialSamples {
    pub t_grid: Vec<f64>,
    pub u: Vec<StateVector>,
    pub u_d: Vec<StateVector>,
    pub v: Vec<StateVector>,
}

/// Invert the parametrization back to original time. Valid only when the
/// inner clock never stalls: requires speed_time >= delta throughout,
/// otherwise reports the jump interval.
pub fn invert_parametrization(
    p: &ParametrizedPath,
    delta: f64,
    n_out: usize,
) -> Result<DifferentialSamples> {
    if !(delta > 0.0) {
        return Err(Error::InvalidSpec("delta must be positive".into()));
    }
    let mut min_speed = f64::INFINITY;
    let mut lo = None;
    let mut hi = 0.0f64;
    for j in 0..p.n_intervals() {
        let s = p.speed_time[j];
        min_speed = min_speed.min(s);
        if s < delta {
            if lo.is_none() {
                lo = Some(p.tau_grid[j]);
            }
            hi = p.tau_grid[j + 1];
        }
    }
    if let Some(tau_lo) = lo {
        return Err(Error::JumpDetected {
            tau_lo,
            tau_hi: hi,
            min_speed,
            delta,
        });
    }
    let n_out = n_out.max(1);
    let horizon = p.horizon;
    let mut t_grid = Vec::with_capacity(n_out + 1);
    let mut u = Vec::with_capacity(n_out + 1);
    let mut u_d = Vec::with_capacity(n_out + 1);
    let mut v = Vec::with_capacity(n_out + 1);
    for i in 0..=n_out {
        let t = if i == n_out {
            horizon
        } else {
            i as f64 * horizon / n_out as f64
        };
        // t_hat is strictly increasing here, so the pl inverse is well posed
        let tau = inverse_pl(&p.t_hat, &p.tau_grid, t);
        t_grid.push(t);
        u.push(pl_eval_state(&p.tau_grid, &p.u_hat, tau));
        u_d.push(pl_eval_state(&p.tau_grid, &p.u_hat_d, tau));
        v.push(pl_eval_state(&p.tau_grid, &p.v_hat, tau));
    }
    Ok(DifferentialSamples { t_grid, u, u_d, v })
}

fn inverse_pl(ys: &[f64], xs: &[f64], y: f64) -> f64 {
    // ys strictly increasing samples of a pl function on xs; find x with
    // pl(x) = y
    if y <= ys[0] {
        return xs[0];
    }
    if y >= *ys.last().unwrap() {
        return *xs.last().unwrap();
    }
    let mut lo = 0usize;
    let mut hi = ys.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ys[mid] <= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = (y - ys[lo]) / (ys[hi] - ys[lo]);
    xs[lo] + theta * (xs[hi] - xs[lo])
}

/// Check the differential-solution conditions on resampled records.
pub fn check_differential(
    samples: &DifferentialSamples,
    spec: &ProblemSpec,
    wiener: Option<&WienerPath>,
) -> Result<SolutionCheckReport> {
    let geom = &spec.geometry;
    let mut conditions = Vec::new();

    // (eq1_var): u - u_d equals the accumulated stochastic integral
    let mut stoch = StateVector::zeros(geom.dim);
    let mut eq1_res = 0.0f64;
    for i in 0..samples.t_grid.len() {
        let lhs = samples.u[i].sub(&samples.u_d[i]);
        eq1_res = eq1_res.max(geom.h_norm(&lhs.sub(&stoch))?);
        if i + 1 < samples.t_grid.len() {
            if let Some(w) = wiener {
                let g = g_matrix(samples.t_grid[i], &samples.u[i], &spec.noise)?;
                let w0 = w.eval(samples.t_grid[i])?;
                let w1 = w.eval(samples.t_grid[i + 1])?;
                let dw: Vec<f64> = w1.iter().zip(&w0).map(|(b, a)| b - a).collect();
                stoch = stoch.add(&StateVector(g.mul_vec(&dw)?));
            }
        }
    }
    let eq1_tol = if spec.noise.is_off() { 1e-6 } else { 1e-6 + 100.0 * spec.dt };
    conditions.push(ConditionCheck::new("eq1_var", eq1_res, eq1_tol));

    // (eq2_var): v + B(u) = 0
    let mut eq2_res = 0.0f64;
    for (u, v) in samples.u.iter().zip(&samples.v) {
        eq2_res = eq2_res.max(geom.h_norm(&v.add(&b_of(u, &spec.potential)?))?);
    }
    conditions.push(ConditionCheck::new("eq2_var", eq2_res, 1e-8));

    // (incl): effective force lies in A(du^d/dt)
    let mut incl_res = 0.0f64;
    for i in 0..samples.t_grid.len() - 1 {
        let dt = samples.t_grid[i + 1] - samples.t_grid[i];
        let d = samples.u_d[i + 1].sub(&samples.u_d[i]).scale(1.0 / dt);
        let g_ext = spec.forcing.eval(samples.t_grid[i], geom.dim);
        let v_eff = samples.v[i].add(&g_ext);
        let d_norm = geom.h_norm(&d)?;
        let res = if d_norm > 1e-6 {
            // membership in the subdifferential of the H-norm via its gap
            let dir = d.scale(1.0 / d_norm);
            fenchel_gap(&dir, &v_eff, geom)?
        } else {
            (geom.h_norm(&v_eff)? - 1.0).max(0.0)
        };
        incl_res = incl_res.max(res);
    }
    conditions.push(ConditionCheck::new("incl", incl_res, 5.0 * spec.epsilon + 1e-4));

    Ok(SolutionCheckReport {
        conditions,
        gap_series: Vec::new(),
        mean_gap: 0.0,
        speed_overshoot: 0.0,
        a_inclusion_residual: 0.0,
    })
}
