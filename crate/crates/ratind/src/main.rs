use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratind::config::load_config;
use ratind::{run, Error};

#[derive(Parser)]
#[command(name = "ratind", version, about = "Rate-independent stochastic evolution laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Dotted key=value overrides, repeatable (e.g. --set run.epsilon=0.01).
    #[arg(long = "set")]
    set: Vec<String>,
    /// Override run.n_paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<String> {
        let mut out = self.set.clone();
        if let Some(p) = self.paths {
            out.push(format!("run.n_paths={p}"));
        }
        if let Some(s) = self.seed {
            out.push(format!("run.seed={s}"));
        }
        out
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured ensemble and write a run directory.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output run directory.
        #[arg(long)]
        out: PathBuf,
        /// Tau step for the parametrized records (default dt/2).
        #[arg(long)]
        tau_step: Option<f64>,
        /// Also write per-path SVG plots of the (t_hat, u_hat) graph.
        #[arg(long)]
        svg: bool,
    },
    /// Rebuild parametrized records of a stored run at a new tau step.
    Reparam {
        /// Existing run directory.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        tau_step: f64,
        #[arg(long)]
        svg: bool,
    },
    /// Check stored parametrized records against the defining conditions.
    Verify {
        /// Run directories to verify.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Epsilon-ladder Cauchy sweep on a common driving path.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated epsilon ladder (falls back to [sweep] in the config).
        #[arg(long, value_delimiter = ',')]
        eps_list: Vec<f64>,
        /// Comma-separated dt per epsilon (empty: config dt throughout).
        #[arg(long, value_delimiter = ',')]
        dt_list: Vec<f64>,
    },
    /// Dump a reference-solver trajectory (play, catchup, skorohod, resolvent).
    Oracle {
        kind: String,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("RATIND_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Blowup { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> ratind::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            cfg,
            out,
            tau_step,
            svg,
        } => {
            let config = load_config(&cfg.config, &cfg.overrides())?;
            let summary = run::execute_run(&config, &out, tau_step, svg)?;
            println!(
                "wrote {} path(s) to {}",
                summary.n_paths,
                summary.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Reparam { run: dir, tau_step, svg } => {
            run::cmd_reparam(&dir, tau_step, svg)?;
            println!("reparametrized {} at tau_step {tau_step}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { runs } => {
            let outcome = run::cmd_verify(&runs)?;
            print!("{}", outcome.report_text);
            Ok(if outcome.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Sweep {
            cfg,
            out,
            eps_list,
            dt_list,
        } => {
            let config = load_config(&cfg.config, &cfg.overrides())?;
            let eps = if eps_list.is_empty() {
                config
                    .sweep
                    .as_ref()
                    .map(|s| s.eps_list.clone())
                    .unwrap_or_default()
            } else {
                eps_list
            };
            let dts = if dt_list.is_empty() {
                config
                    .sweep
                    .as_ref()
                    .and_then(|s| s.dt_list.clone())
                    .unwrap_or_default()
            } else {
                dt_list
            };
            let table = run::cmd_sweep(&config, &eps, &dts, &out)?;
            println!(
                "sweep: {} row(s), Cauchy columns weakly decreasing: {}",
                table.rows.len(),
                table.weakly_decreasing()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { kind, cfg, out } => {
            let config = load_config(&cfg.config, &cfg.overrides())?;
            let path = run::cmd_oracle(&kind, &config, &out)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
