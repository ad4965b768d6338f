//! Run orchestration: ensemble simulation plus rescaling, CSV serialization
//! and parsing, manifests, verification of stored runs, sweeps, and oracle
//! dumps. All number formatting uses shortest round-trip decimals so reruns
//! are byte-comparable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{self, ConfigFile};
use crate::model::StateVector;
use crate::noise::{empirical_qv, sample_wiener};
use crate::oracles;
use crate::reparam::{
    check_parametrized, incl_gap_series, rescale_path, ParametrizedPath, QvStats,
};
use crate::viscous::{simulate_path_with, ViscousPath};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest decimal form that parses back to the same f64.
pub fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn push_vec(row: &mut String, v: &StateVector) {
    for x in &v.0 {
        row.push(',');
        row.push_str(&fmt_f(*x));
    }
}

/// Per-path CSV, one row per time node. The drift column is zero on the
/// terminal row (there is no step out of the last node).
pub fn path_csv(path: &ViscousPath) -> String {
    let n = path.u[0].dim();
    let mut out = String::from("k,t");
    for name in ["u", "ud", "d", "v"] {
        for i in 1..=n {
            let _ = write!(out, ",{name}_{i}");
        }
    }
    out.push_str(",arc,phi,residual\n");
    let steps = path.n_steps();
    let zero = StateVector::zeros(n);
    for k in 0..=steps {
        let _ = write!(out, "{k},{}", fmt_f(path.t_grid[k]));
        push_vec(&mut out, &path.u[k]);
        push_vec(&mut out, &path.u_d[k]);
        push_vec(&mut out, if k < steps { &path.drift[k] } else { &zero });
        push_vec(&mut out, &path.v[k]);
        let _ = write!(
            out,
            ",{},{},{}\n",
            fmt_f(path.arc[k]),
            fmt_f(path.ledger.phi_t[k]),
            fmt_f(path.ledger.residual[k])
        );
    }
    out
}

/// Per-parametrized-path CSV, one row per tau node. Interval quantities
/// (speeds, gap) repeat their final value on the terminal row.
pub fn param_csv(p: &ParametrizedPath, gaps: &[f64]) -> String {
    let n = p.u_hat[0].dim();
    let m = p.m_hat[0].len();
    let mut out = String::from("j,tau,t_hat,speed_time,speed_state");
    for name in ["u_hat", "ud_hat", "v_hat"] {
        for i in 1..=n {
            let _ = write!(out, ",{name}_{i}");
        }
    }
    for i in 1..=m {
        let _ = write!(out, ",m_hat_{i}");
    }
    out.push_str(",fenchel_gap\n");
    let j_n = p.n_intervals();
    for j in 0..=j_n {
        let jj = j.min(j_n.saturating_sub(1));
        let _ = write!(
            out,
            "{j},{},{},{},{}",
            fmt_f(p.tau_grid[j]),
            fmt_f(p.t_hat[j]),
            fmt_f(p.speed_time[jj]),
            fmt_f(p.speed_state[jj])
        );
        push_vec(&mut out, &p.u_hat[j]);
        push_vec(&mut out, &p.u_hat_d[j]);
        push_vec(&mut out, &p.v_hat[j]);
        for x in &p.m_hat[j] {
            out.push(',');
            out.push_str(&fmt_f(*x));
        }
        let _ = write!(out, ",{}\n", fmt_f(gaps[jj.min(gaps.len().saturating_sub(1))]));
    }
    out
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| {
        Error::Config(format!("CSV line {line}: '{cell}' is not a number"))
    })
}

/// Reconstruct a parametrized record from its CSV dump (lossless thanks to
/// round-trip formatting).
pub fn parse_param_csv(text: &str, path_index: usize, horizon: f64) -> Result<ParametrizedPath> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Config("empty parametrized CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols.iter().filter(|c| c.starts_with("u_hat_")).count();
    let m = cols.iter().filter(|c| c.starts_with("m_hat_")).count();
    if n == 0 || cols.len() != 6 + 3 * n + m {
        return Err(Error::Config("unrecognized parametrized CSV header".into()));
    }

    let mut tau_grid = Vec::new();
    let mut t_hat = Vec::new();
    let mut u_hat = Vec::new();
    let mut u_hat_d = Vec::new();
    let mut v_hat = Vec::new();
    let mut m_hat = Vec::new();
    let mut speed_time = Vec::new();
    let mut speed_state = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::Config(format!(
                "CSV line {}: expected {} cells, found {}",
                idx + 1,
                cols.len(),
                cells.len()
            )));
        }
        let lno = idx + 1;
        tau_grid.push(parse_cell(cells[1], lno)?);
        t_hat.push(parse_cell(cells[2], lno)?);
        speed_time.push(parse_cell(cells[3], lno)?);
        speed_state.push(parse_cell(cells[4], lno)?);
        let take = |base: usize| -> Result<StateVector> {
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                v.push(parse_cell(cells[base + i], lno)?);
            }
            Ok(StateVector(v))
        };
        u_hat.push(take(5)?);
        u_hat_d.push(take(5 + n)?);
        v_hat.push(take(5 + 2 * n)?);
        let mut mv = Vec::with_capacity(m);
        for i in 0..m {
            mv.push(parse_cell(cells[5 + 3 * n + i], lno)?);
        }
        m_hat.push(mv);
    }
    if tau_grid.len() < 2 {
        return Err(Error::Config("parametrized CSV has fewer than two rows".into()));
    }
    // interval quantities: drop the repeated terminal row
    speed_time.pop();
    speed_state.pop();
    Ok(ParametrizedPath {
        path_index,
        t_hat_total: *tau_grid.last().unwrap(),
        tau_grid,
        t_hat,
        u_hat,
        u_hat_d,
        v_hat,
        speed_time,
        speed_state,
        m_hat,
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// sha256 of the resolved configuration text.
    pub config_digest: String,
    pub seed: u64,
    /// Wall-clock creation time; excluded from reproducibility comparisons.
    pub created_unix: u64,
    /// Data file name -> sha256 of its bytes.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn write_file(dir: &Path, name: &str, text: &str, files: &mut BTreeMap<String, String>) -> Result<()> {
    fs::write(dir.join(name), text)?;
    files.insert(name.to_string(), sha256_hex(text.as_bytes()));
    Ok(())
}

fn write_manifest(dir: &Path, config_digest: &str, seed: u64, files: BTreeMap<String, String>) -> Result<()> {
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config_digest: config_digest.to_string(),
        seed,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| Error::Config(format!("cannot read manifest in {}: {e}", dir.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad manifest: {e}")))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub n_paths: usize,
    pub t_hat_totals: Vec<f64>,
}

/// Simulate the configured ensemble, rescale every path, and write the run
/// directory: resolved config, per-path CSV pairs, summary, manifest, and
/// optional SVG plots.
pub fn execute_run(
    cfg: &ConfigFile,
    out_dir: &Path,
    tau_step: Option<f64>,
    svg: bool,
) -> Result<RunSummary> {
    let spec = cfg.to_problem_spec()?;
    let tau = tau_step.unwrap_or_else(|| cfg.tau_step());
    fs::create_dir_all(out_dir)?;

    let results: Vec<(ViscousPath, ParametrizedPath)> = (0..spec.n_paths)
        .into_par_iter()
        .map(|p| {
            let wiener = sample_wiener(&spec, p);
            let path = simulate_path_with(&spec, p, &wiener, false)?;
            let param = rescale_path(&path, &wiener, tau, &spec)?;
            Ok((path, param))
        })
        .collect::<Result<_>>()?;

    let resolved = config::resolved_toml(cfg)?;
    let digest = sha256_hex(resolved.as_bytes());
    let mut files = BTreeMap::new();
    write_file(out_dir, "resolved_config.toml", &resolved, &mut files)?;

    let mut summary = String::from("path,n_steps,t_hat_total,arc_total,max_ledger_residual\n");
    for (p, (path, param)) in results.iter().enumerate() {
        let (gaps, _) = incl_gap_series(param, &spec)?;
        write_file(out_dir, &format!("path_{p:04}.csv"), &path_csv(path), &mut files)?;
        write_file(out_dir, &format!("param_{p:04}.csv"), &param_csv(param, &gaps), &mut files)?;
        if svg {
            let plot = crate::svg::render_time_graph(param);
            write_file(out_dir, &format!("plot_{p:04}.svg"), &plot, &mut files)?;
        }
        let max_res = crate::diagnostics::energy_residual_pathwise(path);
        let _ = writeln!(
            summary,
            "{p},{},{},{},{}",
            path.n_steps(),
            fmt_f(param.t_hat_total),
            fmt_f(*path.arc.last().unwrap()),
            fmt_f(max_res)
        );
    }
    write_file(out_dir, "summary.csv", &summary, &mut files)?;
    write_manifest(out_dir, &digest, spec.seed, files)?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        n_paths: spec.n_paths,
        t_hat_totals: results.iter().map(|(_, p)| p.t_hat_total).collect(),
    })
}

/// Load the resolved configuration stored in a run directory.
pub fn load_run_config(run_dir: &Path) -> Result<ConfigFile> {
    let path = run_dir.join("resolved_config.toml");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    config::parse_config(&text, &[])
}

/// Re-derive parametrized records for a stored run at a new tau step. The
/// simulation is deterministic, so paths are rebuilt rather than parsed.
pub fn cmd_reparam(run_dir: &Path, tau_step: f64, svg: bool) -> Result<RunSummary> {
    let cfg = load_run_config(run_dir)?;
    execute_run(&cfg, run_dir, Some(tau_step), svg)
}

/// Quadratic-variation statistics from stored parametrized records. The
/// rescaled noise is subsampled so each increment spans roughly ten original
/// time steps; finer spacing would systematically undercount the variation of
/// the piecewise-linear driving record.
pub fn qv_stats_from_params(params: &[ParametrizedPath], dt: f64) -> Result<Option<QvStats>> {
    if params.len() < 2 {
        return Ok(None);
    }
    let mut series = Vec::with_capacity(params.len());
    let mut t_sum = 0.0;
    for p in params {
        let mut sub = vec![p.m_hat[0].clone()];
        let mut anchor = p.t_hat[0];
        for j in 1..p.m_hat.len() {
            let last = j + 1 == p.m_hat.len();
            if p.t_hat[j] - anchor >= 10.0 * dt || last {
                sub.push(p.m_hat[j].clone());
                anchor = p.t_hat[j];
            }
        }
        series.push(sub);
        t_sum += p.t_hat.last().copied().unwrap_or(0.0);
    }
    let mean_qv = empirical_qv(&series)?;
    Ok(Some(QvStats {
        mean_qv,
        mean_t_hat: t_sum / params.len() as f64,
    }))
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub report_text: String,
    pub all_pass: bool,
}

/// Check every stored parametrized record of the given runs against the
/// defining conditions; writes a verify_report.csv per run directory.
pub fn cmd_verify(run_dirs: &[PathBuf]) -> Result<VerifyOutcome> {
    let mut text = String::new();
    let mut all_pass = true;
    for dir in run_dirs {
        let cfg = load_run_config(dir)?;
        let spec = cfg.to_problem_spec()?;
        let mut names: Vec<String> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.starts_with("param_") && n.ends_with(".csv"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Config(format!(
                "no parametrized CSVs in {}",
                dir.display()
            )));
        }
        let mut params = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            let body = fs::read_to_string(dir.join(name))?;
            params.push(parse_param_csv(&body, i, spec.horizon)?);
        }
        let qv = if spec.noise.is_off() {
            None
        } else {
            qv_stats_from_params(&params, spec.dt)?
        };

        let mut report = String::from("path,condition,residual,tolerance,pass\n");
        for (name, p) in names.iter().zip(&params) {
            let check = check_parametrized(p, &spec, qv)?;
            for c in &check.conditions {
                let _ = writeln!(
                    report,
                    "{name},{},{},{},{}",
                    c.name,
                    fmt_f(c.residual),
                    fmt_f(c.tolerance),
                    c.pass
                );
                let verdict = if c.pass { "pass" } else { "FAIL" };
                let _ = writeln!(
                    text,
                    "{} {} {:<10} residual {:>12.5e}  tol {:>9.3e}  {}",
                    dir.display(),
                    name,
                    c.name,
                    c.residual,
                    c.tolerance,
                    verdict
                );
                all_pass &= c.pass;
            }
        }
        fs::write(dir.join("verify_report.csv"), report)?;
    }
    let _ = writeln!(
        text,
        "overall: {}",
        if all_pass { "PASS" } else { "FAIL" }
    );
    Ok(VerifyOutcome {
        report_text: text,
        all_pass,
    })
}

/// Epsilon-ladder sweep; writes sweep.csv into the output directory.
pub fn cmd_sweep(
    cfg: &ConfigFile,
    eps_list: &[f64],
    dt_list: &[f64],
    out_dir: &Path,
) -> Result<crate::diagnostics::SweepTable> {
    let spec = cfg.to_problem_spec()?;
    let table = crate::diagnostics::epsilon_sweep(&spec, eps_list, dt_list)?;
    fs::create_dir_all(out_dir)?;
    let mut out = String::from(
        "eps_hi,eps_lo,dt,sup_t_hat,sup_u_hat,sup_m_hat,holder_alpha,holder_const,holder_bound,holder_ok\n",
    );
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f(r.eps_hi),
            fmt_f(r.eps_lo),
            fmt_f(r.dt),
            fmt_f(r.sup_t_hat),
            fmt_f(r.sup_u_hat),
            fmt_f(r.sup_m_hat),
            fmt_f(r.holder_alpha),
            fmt_f(r.holder_const),
            fmt_f(r.holder_bound),
            r.holder_ok
        );
    }
    fs::write(out_dir.join("sweep.csv"), out)?;
    Ok(table)
}

/// Reference-solver dump for the configured driving. Kinds: play, catchup,
/// skorohod, resolvent.
pub fn cmd_oracle(kind: &str, cfg: &ConfigFile, out_dir: &Path) -> Result<PathBuf> {
    let spec = cfg.to_problem_spec()?;
    let t_grid = spec.t_grid();
    let n = spec.geometry.dim;
    let result = match kind {
        "play" => {
            if n != 1 {
                return Err(Error::Config("play oracle needs dim = 1".into()));
            }
            let g: Vec<f64> = t_grid.iter().map(|&t| spec.forcing.eval(t, 1).0[0]).collect();
            oracles::play_operator(&t_grid, &g, spec.u0.0[0], 1.0)?
        }
        "catchup" => {
            let g: Vec<StateVector> =
                t_grid.iter().map(|&t| spec.forcing.eval(t, n)).collect();
            oracles::sweeping_catchup(&t_grid, &g, &spec.u0, &spec.geometry)?
        }
        "skorohod" => {
            if n != 1 {
                return Err(Error::Config("skorohod oracle needs dim = 1".into()));
            }
            let drive: Vec<f64> = t_grid
                .iter()
                .map(|&t| spec.u0.0[0] + spec.forcing.eval(t, 1).0[0])
                .collect();
            oracles::skorohod_1d(&t_grid, &drive, -1.0, 1.0)?
        }
        "resolvent" => {
            // radial table of the closed-form target for cross-inspection
            let mut t = Vec::new();
            let mut u = Vec::new();
            for k in 0..=50 {
                let r = 3.0 * k as f64 / 50.0;
                let mut g = StateVector::zeros(n);
                g.0[0] = r;
                t.push(r);
                u.push(oracles::bruteforce_resolvent(&g, spec.epsilon, &spec.geometry)?);
            }
            crate::oracles::OracleResult {
                t_grid: t,
                u_ref: u,
                method: crate::oracles::OracleMethod::BruteforceResolvent,
            }
        }
        other => return Err(Error::Config(format!("unknown oracle kind '{other}'"))),
    };

    fs::create_dir_all(out_dir)?;
    let mut out = String::from("method,k,t");
    for i in 1..=n {
        let _ = write!(out, ",u_{i}");
    }
    out.push('\n');
    for (k, (t, u)) in result.t_grid.iter().zip(&result.u_ref).enumerate() {
        let _ = write!(out, "{:?},{k},{}", result.method, fmt_f(*t));
        push_vec(&mut out, u);
        out.push('\n');
    }
    let path = out_dir.join(format!("oracle_{kind}.csv"));
    fs::write(&path, out)?;
    Ok(path)
}
