//! Time stepping for the viscously regularized system, with a per-step energy
//! ledger and the moment monitors used across epsilon sweeps.

use rayon::prelude::*;

use crate::dissipation::resolvent_selection;
use crate::energy::{b_of, phi, trace_l};
use crate::model::{ProblemSpec, StateVector};
use crate::noise::{g_apply, sample_wiener, WienerPath};
use crate::{Error, Result};

const BLOWUP_THRESHOLD: f64 = 1e8;

/// Discrete bookkeeping for the pathwise energy identity.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    /// Phi(u_k) series.
    pub phi_t: Vec<f64>,
    /// Running sum of (v_j, d_j)_H dt.
    pub dissipation_int: Vec<f64>,
    /// Running sum of (1/2) Tr L(t_j, u_j) dt.
    pub trace_int: Vec<f64>,
    /// Running sum of (B(u_j), G(t_j, u_j) dW_j)_H.
    pub mart_int: Vec<f64>,
    /// Discrete defect of the energy identity at each node.
    pub residual: Vec<f64>,
}

/// One discrete trajectory of the viscous problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscousPath {
    pub path_index: usize,
    pub t_grid: Vec<f64>,
    pub u: Vec<StateVector>,
    /// Absolutely continuous part u^d_k = u0 + sum d_j dt.
    pub u_d: Vec<StateVector>,
    /// Piecewise-constant drift on [t_k, t_{k+1}).
    pub drift: Vec<StateVector>,
    /// v_k = -B(u_k).
    pub v: Vec<StateVector>,
    /// Per-step noise increments G(t_k, u_k) dW_k.
    pub noise_inc: Vec<StateVector>,
    /// Running arc length sum ||d_j||_H dt.
    pub arc: Vec<f64>,
    pub ledger: EnergyLedger,
}

impl ViscousPath {
    pub fn n_steps(&self) -> usize {
        self.drift.len()
    }

    /// Largest defect across the three construction invariants (update
    /// identity, v = -B(u), and the per-step resolvent inclusion with the
    /// forcing moved to the driving side).
    pub fn invariant_residual(&self, spec: &ProblemSpec) -> Result<f64> {
        let geom = &spec.geometry;
        let mut worst = 0.0f64;
        for k in 0..self.n_steps() {
            let dt = self.t_grid[k + 1] - self.t_grid[k];
            let predicted = self.u[k]
                .add_scaled(&self.drift[k], dt)
                .add(&self.noise_inc[k]);
            worst = worst.max(geom.h_norm(&predicted.sub(&self.u[k + 1]))?);

            let b = b_of(&self.u[k], &spec.potential)?;
            worst = worst.max(geom.h_norm(&self.v[k].add(&b))?);

            let g_ext = spec.forcing.eval(self.t_grid[k], geom.dim);
            let w = b.sub(&g_ext);
            let (d, s) = resolvent_selection(&w, spec.epsilon, geom)?;
            worst = worst.max(geom.h_norm(&d.sub(&self.drift[k]))?);
            let incl = d.scale(spec.epsilon).add(&s).add(&w);
            worst = worst.max(geom.h_norm(&incl)?);
        }
        Ok(worst)
    }
}

/// One semi-implicit Euler-Maruyama step: implicit (closed-form resolvent) in
/// the dissipation, explicit in B and G.
pub fn step(
    u_k: &StateVector,
    t_k: f64,
    dt: f64,
    dw: &[f64],
    spec: &ProblemSpec,
) -> Result<(StateVector, StateVector, StateVector)> {
    let geom = &spec.geometry;
    let b = b_of(u_k, &spec.potential)?;
    let g_ext = spec.forcing.eval(t_k, geom.dim);
    let w = b.sub(&g_ext);
    let d = crate::dissipation::resolvent_shrink(&w, spec.epsilon, geom)?;
    let noise_inc = g_apply(t_k, u_k, dw, &spec.noise)?;
    let u_next = u_k.add_scaled(&d, dt).add(&noise_inc);
    let v = b.scale(-1.0);
    Ok((u_next, d, v))
}

/// Optional fixed-point refinement of the drift: midpoint evaluation of B,
/// at most 10 iterations, tolerance 1e-10.
pub fn step_refined(
    u_k: &StateVector,
    t_k: f64,
    dt: f64,
    dw: &[f64],
    spec: &ProblemSpec,
) -> Result<(StateVector, StateVector, StateVector)> {
    let geom = &spec.geometry;
    let g_ext = spec.forcing.eval(t_k, geom.dim);
    let mut d = StateVector::zeros(geom.dim);
    for _ in 0..10 {
        let mid = u_k.add_scaled(&d, 0.5 * dt);
        let w = b_of(&mid, &spec.potential)?.sub(&g_ext);
        let next = crate::dissipation::resolvent_shrink(&w, spec.epsilon, geom)?;
        let delta = geom.h_norm(&next.sub(&d))?;
        d = next;
        if delta < 1e-10 {
            break;
        }
    }
    let noise_inc = g_apply(t_k, u_k, dw, &spec.noise)?;
    let u_next = u_k.add_scaled(&d, dt).add(&noise_inc);
    let v = b_of(u_k, &spec.potential)?.scale(-1.0);
    Ok((u_next, d, v))
}

/// Simulate one full trajectory; deterministic per (seed, path_index).
pub fn simulate_path(spec: &ProblemSpec, path_index: usize) -> Result<ViscousPath> {
    let wiener = sample_wiener(spec, path_index);
    simulate_path_with(spec, path_index, &wiener, false)
}

pub fn simulate_path_with(
    spec: &ProblemSpec,
    path_index: usize,
    wiener: &WienerPath,
    refined: bool,
) -> Result<ViscousPath> {
    spec.validate()?;
    let geom = &spec.geometry;
    let t_grid = spec.t_grid();
    let steps = t_grid.len() - 1;

    let mut u = Vec::with_capacity(steps + 1);
    let mut u_d = Vec::with_capacity(steps + 1);
    let mut drift = Vec::with_capacity(steps);
    let mut v = Vec::with_capacity(steps + 1);
    let mut noise_inc = Vec::with_capacity(steps);
    let mut arc = Vec::with_capacity(steps + 1);

    let phi0 = phi(&spec.u0, &spec.potential)?;
    let mut ledger = EnergyLedger {
        phi_t: vec![phi0],
        dissipation_int: vec![0.0],
        trace_int: vec![0.0],
        mart_int: vec![0.0],
        residual: vec![0.0],
    };

    u.push(spec.u0.clone());
    u_d.push(spec.u0.clone());
    arc.push(0.0);

    for k in 0..steps {
        let t_k = t_grid[k];
        let dt = t_grid[k + 1] - t_k;
        let dw = &wiener.increments[k];
        let (u_next, d, v_k) = if refined {
            step_refined(&u[k], t_k, dt, dw, spec)?
        } else {
            step(&u[k], t_k, dt, dw, spec)?
        };
        if !u_next.is_finite() || geom.h_norm(&u_next)? > BLOWUP_THRESHOLD {
            return Err(Error::Blowup {
                path_index,
                step: k,
                t: t_k,
                norm: if u_next.is_finite() {
                    geom.h_norm(&u_next)?
                } else {
                    f64::INFINITY
                },
            });
        }

        let inc = u_next.sub(&u[k]).sub(&d.scale(dt));
        let b = v_k.scale(-1.0);
        let diss = ledger.dissipation_int.last().unwrap() + geom.h_inner(&v_k, &d)? * dt;
        let trace = ledger.trace_int.last().unwrap()
            + 0.5 * trace_l(t_k, &u[k], &spec.potential, &spec.noise)? * dt;
        let mart = ledger.mart_int.last().unwrap() + geom.h_inner(&b, &inc)?;
        let phi_next = phi(&u_next, &spec.potential)?;
        ledger.phi_t.push(phi_next);
        ledger.dissipation_int.push(diss);
        ledger.trace_int.push(trace);
        ledger.mart_int.push(mart);
        ledger.residual.push(phi_next - phi0 + diss - trace - mart);

        arc.push(arc[k] + geom.h_norm(&d)? * dt);
        u_d.push(u_d[k].add_scaled(&d, dt));
        v.push(v_k);
        noise_inc.push(inc);
        drift.push(d);
        u.push(u_next);
    }
    // terminal v for the node series
    v.push(b_of(&u[steps], &spec.potential)?.scale(-1.0));

    Ok(ViscousPath {
        path_index,
        t_grid,
        u,
        u_d,
        drift,
        v,
        noise_inc,
        arc,
        ledger,
    })
}

/// Simulate the whole ensemble concurrently; output ordered by path_index so
/// aggregation is scheduler-independent.
pub fn simulate_ensemble(spec: &ProblemSpec) -> Result<Vec<ViscousPath>> {
    (0..spec.n_paths)
        .into_par_iter()
        .map(|p| simulate_path(spec, p))
        .collect()
}

/// Empirical moment groups mirroring the a-priori estimates of the viscous
/// problem, per epsilon level.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub epsilon: f64,
    pub ell: u32,
    /// E sup_t ||u||_V^(p*ell)
    pub state_sup: f64,
    /// E (int ||d||_H dt)^ell
    pub arc_moment: f64,
    /// eps^(ell/2) E ||d||_L2^ell
    pub viscous_l2: f64,
    /// E ||B(u)||_L2^ell
    pub b_l2: f64,
    /// E sup_t ||v||_H^ell
    pub v_sup: f64,
    /// Worst violation of ||B(u_k) - g(t_k)||_H <= eps ||d_k||_H + 1
    /// (0 when the resolvent construction holds exactly).
    pub selection_bound_defect: f64,
}

pub fn estimate_monitors(
    paths: &[ViscousPath],
    ell: u32,
    spec: &ProblemSpec,
) -> Result<MonitorReport> {
    if paths.is_empty() {
        return Err(Error::EnsembleTooSmall { need: 1, have: 0 });
    }
    let geom = &spec.geometry;
    let ell_f = ell as f64;
    let mut state_sup = 0.0;
    let mut arc_moment = 0.0;
    let mut viscous_l2 = 0.0;
    let mut b_l2 = 0.0;
    let mut v_sup = 0.0;
    let mut defect = 0.0f64;
    for path in paths {
        let sup_v_norm = path
            .u
            .iter()
            .map(|u| geom.v_norm(u).unwrap())
            .fold(0.0f64, f64::max);
        state_sup += sup_v_norm.powf(spec.geometry.p * ell_f);
        arc_moment += path.arc.last().unwrap().powf(ell_f);

        let mut d_l2_sq = 0.0;
        let mut b_l2_sq = 0.0;
        for k in 0..path.n_steps() {
            let dt = path.t_grid[k + 1] - path.t_grid[k];
            let dn = geom.h_norm(&path.drift[k])?;
            d_l2_sq += dn * dn * dt;
            let bn = geom.h_norm(&path.v[k])?;
            b_l2_sq += bn * bn * dt;
            let g_ext = spec.forcing.eval(path.t_grid[k], geom.dim);
            let w_norm = geom.h_norm(&path.v[k].scale(-1.0).sub(&g_ext))?;
            defect = defect.max(w_norm - spec.epsilon * dn - 1.0);
        }
        viscous_l2 += spec.epsilon.powf(ell_f / 2.0) * d_l2_sq.sqrt().powf(ell_f);
        b_l2 += b_l2_sq.sqrt().powf(ell_f);
        v_sup += path
            .v
            .iter()
            .map(|v| geom.h_norm(v).unwrap())
            .fold(0.0f64, f64::max)
            .powf(ell_f);
    }
    let n = paths.len() as f64;
    Ok(MonitorReport {
        epsilon: spec.epsilon,
        ell,
        state_sup: state_sup / n,
        arc_moment: arc_moment / n,
        viscous_l2: viscous_l2 / n,
        b_l2: b_l2 / n,
        v_sup: v_sup / n,
        selection_bound_defect: defect.max(0.0),
    })
}

/// Across an epsilon sweep (sorted from largest epsilon down), assert each
/// moment group stays within a factor 2 of its value at the largest epsilon.
pub fn monitors_uniformly_bounded(reports: &[MonitorReport]) -> bool {
    let Some(first) = reports.first() else {
        return true;
    };
    let groups = |r: &MonitorReport| [r.state_sup, r.arc_moment, r.viscous_l2, r.b_l2, r.v_sup];
    let base = groups(first);
    reports.iter().all(|r| {
        groups(r)
            .iter()
            .zip(&base)
            .all(|(g, b)| *g <= 2.0 * b + 1e-12)
    })
}
