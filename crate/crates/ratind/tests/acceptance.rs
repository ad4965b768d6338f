//! Acceptance gate: one test per criterion, each printing a single PASS/FAIL
//! line. Tolerances and benchmark parameters are pinned here.

use std::time::Instant;

use ratind::diagnostics::{
    energy_residual_expected, energy_residual_pathwise, epsilon_sweep, mosco_recovery_check,
    mosco_table,
};
use ratind::energy::PotentialSpec;
use ratind::model::{ForcingSpec, Matrix, ProblemSpec, SpaceGeometry, StateVector};
use ratind::noise::{sample_wiener, NoiseSpec};
use ratind::oracles::{bruteforce_resolvent, play_operator};
use ratind::reparam::{invert_parametrization, rescale_path};
use ratind::run::qv_stats_from_params;
use ratind::viscous::{simulate_path, simulate_path_with};
use ratind::Error;

fn verdict(criterion: &str, pass: bool) {
    println!(
        "acceptance {criterion}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion failed: {criterion}");
}

fn quad_ramp(epsilon: f64, dt: f64, noise: NoiseSpec, n_paths: usize, seed: u64) -> ProblemSpec {
    ProblemSpec {
        geometry: SpaceGeometry::unit(1),
        potential: PotentialSpec::quadratic_identity(1),
        noise,
        forcing: ForcingSpec::Ramp { rate: vec![2.0] },
        u0: StateVector::zeros(1),
        horizon: 1.0,
        epsilon,
        dt,
        n_paths,
        seed,
    }
}

fn double_well_ramp(epsilon: f64, dt: f64) -> ProblemSpec {
    ProblemSpec {
        geometry: SpaceGeometry::unit(1),
        potential: PotentialSpec::double_well(1.0).unwrap(),
        noise: NoiseSpec::off(1),
        forcing: ForcingSpec::Ramp { rate: vec![2.0] },
        u0: StateVector(vec![-1.0]),
        horizon: 1.0,
        epsilon,
        dt,
        n_paths: 1,
        seed: 0,
    }
}

#[test]
fn criterion_01_resolvent_vs_bruteforce() {
    let start = Instant::now();
    let mut state = 0x51ce_b00cu64;
    let mut rand = || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut max_err = 0.0f64;
    for case in 0..200 {
        let n = 1 + case % 4;
        let geom = SpaceGeometry::unit(n);
        let g = StateVector((0..n).map(|_| rand() * 6.0 - 3.0).collect());
        let eps = 1e-3 + rand() * 0.9;
        let brute = bruteforce_resolvent(&g, eps, &geom).unwrap();
        let closed = ratind::dissipation::resolvent_shrink(&g, eps, &geom).unwrap();
        max_err = max_err.max(geom.h_norm(&brute.sub(&closed)).unwrap());
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "1 resolvent max H-error <= 1e-6 over 200 cases in < 5 s",
        max_err <= 1e-6 && elapsed < 5.0,
    );
}

fn play_sup_error(epsilon: f64, dt: f64) -> f64 {
    let spec = quad_ramp(epsilon, dt, NoiseSpec::off(1), 1, 0);
    let path = simulate_path(&spec, 0).unwrap();
    let g: Vec<f64> = path.t_grid.iter().map(|t| 2.0 * t).collect();
    let oracle = play_operator(&path.t_grid, &g, 0.0, 1.0).unwrap();
    path.u
        .iter()
        .zip(&oracle.u_ref)
        .map(|(a, b)| (a.0[0] - b.0[0]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_02_play_cross_validation() {
    let start = Instant::now();
    let coarse = play_sup_error(1e-3, 1e-4);
    let fine = play_sup_error(5e-4, 5e-5);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "2 play cross-validation sup <= 5e-2 and decreasing under halving in < 30 s",
        coarse <= 5e-2 && fine < coarse && elapsed < 30.0,
    );
}

#[test]
fn criterion_03_rescaling_constraint() {
    let mut worst = 0.0f64;
    let mut check = |spec: &ProblemSpec, tau_step: f64| {
        for p in 0..spec.n_paths {
            let wiener = sample_wiener(spec, p);
            let path = simulate_path_with(spec, p, &wiener, false).unwrap();
            let param = rescale_path(&path, &wiener, tau_step, spec).unwrap();
            for j in 0..param.n_intervals() {
                worst = worst.max((param.speed_time[j] + param.speed_state[j] - 1.0).abs());
            }
        }
    };
    check(&quad_ramp(1e-2, 1e-3, NoiseSpec::off(1), 1, 0), 5e-4);
    check(
        &quad_ramp(5e-2, 1e-3, NoiseSpec::additive(Matrix::diag(&[0.3])), 10, 5),
        5e-4,
    );
    check(&double_well_ramp(1e-3, 1e-4), 1e-3);
    verdict(
        "3 rescaling constraint |speed_time + speed_state - 1| <= 1e-8 on every parametrized path",
        worst <= 1e-8,
    );
}

#[test]
fn criterion_04_pathwise_energy_identity() {
    let start = Instant::now();

    // deterministic: first-order decay across three halvings
    let mut det = Vec::new();
    for dt in [1e-3, 5e-4, 2.5e-4, 1.25e-4] {
        let spec = quad_ramp(1e-2, dt, NoiseSpec::off(1), 1, 0);
        det.push(energy_residual_pathwise(&simulate_path(&spec, 0).unwrap()));
    }
    let det_ok = det
        .windows(2)
        .all(|w| (1.7..=2.3).contains(&(w[0] / w[1])));

    // stochastic: median over 100 paths decreases under halving
    let median_residual = |dt: f64| {
        let spec = quad_ramp(5e-2, dt, NoiseSpec::additive(Matrix::diag(&[0.5])), 100, 21);
        let mut r: Vec<f64> = (0..spec.n_paths)
            .map(|p| energy_residual_pathwise(&simulate_path(&spec, p).unwrap()))
            .collect();
        r.sort_by(|a, b| a.total_cmp(b));
        0.5 * (r[49] + r[50])
    };
    let factor = median_residual(2e-3) / median_residual(1e-3);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "4 pathwise energy identity: deterministic ratio in [1.7, 2.3], stochastic median factor in [1.2, 1.8], < 2 min",
        det_ok && (1.2..=1.8).contains(&factor) && elapsed < 120.0,
    );
}

#[test]
fn criterion_05_expected_energy_identity() {
    let start = Instant::now();
    let spec = quad_ramp(5e-2, 2e-3, NoiseSpec::additive(Matrix::diag(&[0.3])), 1000, 33);
    let pairs: Vec<_> = (0..spec.n_paths)
        .map(|p| {
            let wiener = sample_wiener(&spec, p);
            let path = simulate_path_with(&spec, p, &wiener, false).unwrap();
            let param = rescale_path(&path, &wiener, spec.dt / 2.0, &spec).unwrap();
            (path, param)
        })
        .collect();
    let t_hat_min = pairs
        .iter()
        .map(|(_, p)| p.t_hat_total)
        .fold(f64::INFINITY, f64::min);
    let rows = energy_residual_expected(&pairs, &[0.5 * t_hat_min]).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "5 expected energy identity at tau = T_hat/2 within 3 MC stderr + scheme bias, < 5 min",
        rows[0].pass && elapsed < 300.0,
    );
}

#[test]
fn criterion_06_jump_resolution() {
    // double-well fold: stick, slip, then a fast transition between wells
    let spec = double_well_ramp(1e-4, 1e-5);
    let wiener = sample_wiener(&spec, 0);
    let path = simulate_path_with(&spec, 0, &wiener, false).unwrap();
    let param = rescale_path(&path, &wiener, 2e-3, &spec).unwrap();

    // longest contiguous tau-interval with speed_time <= 0.05
    let dtau = param.tau_grid[1] - param.tau_grid[0];
    let mut best = 0.0f64;
    let mut current = 0.0f64;
    for j in 0..param.n_intervals() {
        if param.speed_time[j] <= 0.05 {
            current += dtau;
            best = best.max(current);
        } else {
            current = 0.0;
        }
    }
    let well_gap = 2.0; // wells at -1 and +1
    let crosses = param.u_hat.iter().any(|u| u.0[0] > 0.9)
        && param.u_hat.iter().any(|u| u.0[0] < -0.9);
    let plateau_ok = best >= 0.5 * well_gap && crosses;

    let inversion = invert_parametrization(&param, 0.05, 1000);
    let jump_detected = matches!(inversion, Err(Error::JumpDetected { .. }));

    // quadratic benchmark (no jump): round trip through the inverse clock
    let q_spec = quad_ramp(0.1, 2.5e-4, NoiseSpec::off(1), 1, 0);
    let q_wiener = sample_wiener(&q_spec, 0);
    let q_path = simulate_path_with(&q_spec, 0, &q_wiener, false).unwrap();
    let q_param = rescale_path(&q_path, &q_wiener, q_spec.dt / 2.0, &q_spec).unwrap();
    let samples = invert_parametrization(&q_param, 1e-3, q_path.n_steps()).unwrap();
    let mut round_trip = 0.0f64;
    for (i, t) in samples.t_grid.iter().enumerate() {
        let reference = ratind::reparam::pl_eval(
            &q_path.t_grid,
            &q_path.u.iter().map(|u| u.0[0]).collect::<Vec<_>>(),
            *t,
        );
        round_trip = round_trip.max((samples.u[i].0[0] - reference).abs());
    }

    verdict(
        "6 jump resolution: t_hat plateau over >= 0.5 well gap, jump detected on inversion, quadratic round trip <= 1e-6",
        plateau_ok && jump_detected && round_trip <= 1e-6,
    );
}

#[test]
fn criterion_07_mosco_gap() {
    let geom = SpaceGeometry::unit(2);
    let eps_list = [1e-1, 1e-2, 1e-3, 1e-4];
    let rows = mosco_table(&geom, &eps_list, 100).unwrap();
    let table_ok = rows.iter().all(|r| r.error <= 1e-12);

    let mut recovery_ok = true;
    let mut last = f64::INFINITY;
    for eps in eps_list {
        let (err, _bound, ok) = mosco_recovery_check(&geom, eps).unwrap();
        recovery_ok &= ok && err < last;
        last = err;
    }
    verdict(
        "7 Mosco gap = eps*F(||z||) to 1e-12 on 100-point grid, recovery sequence at the unit sphere",
        table_ok && recovery_ok,
    );
}

#[test]
fn criterion_08_rescaled_noise_qv() {
    let spec = quad_ramp(5e-2, 1e-3, NoiseSpec::additive(Matrix::diag(&[0.3])), 1000, 8);
    let params: Vec<_> = (0..spec.n_paths)
        .map(|p| {
            let wiener = sample_wiener(&spec, p);
            let path = simulate_path_with(&spec, p, &wiener, false).unwrap();
            rescale_path(&path, &wiener, spec.dt / 2.0, &spec).unwrap()
        })
        .collect();
    let stats = qv_stats_from_params(&params, spec.dt).unwrap().unwrap();
    let rel = (stats.mean_qv - stats.mean_t_hat).abs() / stats.mean_t_hat;
    verdict(
        "8 rescaled-noise QV within 10% of mean t_hat over 1000 paths",
        rel <= 0.10,
    );
}

#[test]
fn criterion_09_epsilon_sweep_cauchy() {
    let template = quad_ramp(1e-1, 1e-4, NoiseSpec::additive(Matrix::diag(&[0.2])), 1, 13);
    let table = epsilon_sweep(&template, &[1e-1, 1e-2, 1e-3, 1e-4], &[]).unwrap();
    let holder_ok = table.rows.iter().all(|r| r.holder_ok);
    verdict(
        "9 epsilon-sweep Cauchy columns weakly decreasing with pathwise Hoelder transfer bound",
        table.weakly_decreasing() && holder_ok,
    );
}

#[test]
fn criterion_10_determinism() {
    use ratind::config::parse_config;
    use ratind::run::{execute_run, read_manifest};

    let configs = [
        r#"
[geometry]
dim = 1
[potential]
kind = "quadratic"
[run]
u0 = [0.0]
horizon = 1.0
epsilon = 0.001
dt = 0.0001
seed = 2
[run.forcing]
kind = "ramp"
rate = [2.0]
"#,
        r#"
[geometry]
dim = 1
[potential]
kind = "double_well"
well_param = 1.0
[noise]
kind = "additive_constant"
sigma = [[0.2]]
[run]
u0 = [-1.0]
horizon = 0.5
epsilon = 0.01
dt = 0.0005
n_paths = 8
seed = 4
[run.forcing]
kind = "ramp"
rate = [2.0]
"#,
    ];
    let mut pass = true;
    for text in configs {
        let cfg = parse_config(text, &[]).unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        execute_run(&cfg, d1.path(), None, false).unwrap();
        execute_run(&cfg, d2.path(), None, false).unwrap();
        let m1 = read_manifest(d1.path()).unwrap();
        let m2 = read_manifest(d2.path()).unwrap();
        pass &= m1.files == m2.files && m1.config_digest == m2.config_digest;
        for name in m1.files.keys() {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            pass &= a == b;
        }
    }
    verdict(
        "10 determinism: repeated runs produce byte-identical data CSVs",
        pass,
    );
}
