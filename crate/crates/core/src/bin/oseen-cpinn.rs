use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use oseen_cpinn::harness::output::{plot_histories, write_csv, write_history_csv};
use oseen_cpinn::harness::{self, Checkpoint, ExperimentConfig};
use oseen_cpinn::problem::case_by_name;
use oseen_cpinn::recovery_baseline::rate_study;
use oseen_cpinn::Result;

#[derive(Parser)]
#[command(name = "oseen-cpinn", version, about = "Physics-informed Oseen solvers and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $OSEEN_CPINN_OUT/<name> or out/<name>).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured formulation on every grid and write the error table.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train on the no-flow case for each configured forcing scale.
    RaSweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// H¹ interpolation errors of sin(2πx)sin(2πy) on dyadic meshes.
    RateStudy {
        #[arg(long, default_value_t = 2)]
        k_min: u32,
        #[arg(long)]
        k_max: u32,
        /// Degree bound r: polynomials of total degree < r.
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Recover a pressure from a saved velocity checkpoint.
    RecoverPressure {
        #[arg(long)]
        from: PathBuf,
        /// Optional config supplying the pressure network and recovery optimizer.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load(config: Option<&Path>, overrides: &Overrides, default_name: &str) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            name: default_name.into(),
            ..Default::default()
        },
    };
    if let Some(seed) = overrides.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(dir) = &overrides.out_dir {
        cfg.out_dir = Some(dir.clone());
    }
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    Ok((cfg, dir))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

#[derive(Serialize)]
struct RateCsvRow {
    k: u32,
    m: f64,
    error: f64,
    slope: f64,
}

#[derive(Serialize)]
struct RecoveryRow {
    case: String,
    formulation: String,
    #[serde(rename = "N")]
    n: usize,
    p_err_pct: Option<f64>,
    loss_final: f64,
    wall_s: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let (cfg, dir) = load(Some(&config), &overrides, "table")?;
            let runs = harness::run_table_experiment(&cfg)?;
            println!("{:<24} {:>4} {:>5} {:>10} {:>10} {:>10} {:>10}", "formulation", "N", "seed", "vel_l2%", "vel_h1%", "p%", "div_inf");
            for run in &runs {
                let r = &run.row;
                println!(
                    "{:<24} {:>4} {:>5} {:>10.3} {:>10.3} {:>10} {:>10.2e}",
                    r.formulation.to_string(),
                    r.n,
                    r.seed,
                    r.vel_err_l2_pct,
                    r.vel_err_h1_pct,
                    fmt_opt(r.p_err_pct),
                    r.div_linf
                );
                if let Some(msg) = &run.failure {
                    eprintln!("  training failed: {msg}");
                }
            }
            harness::write_table_outputs(&dir, &cfg, &runs)?;
            println!("wrote {}", dir.display());
        }
        Command::RaSweep { config, overrides } => {
            let (cfg, dir) = load(Some(&config), &overrides, "ra_sweep")?;
            let runs = harness::run_ra_sweep(&cfg)?;
            for run in &runs {
                let r = &run.row;
                println!("ra={:<10e} {:<24} seed={:<3} |grad u|={:.4e}", r.ra, r.formulation.to_string(), r.seed, r.grad_u_l2);
                if let Some(msg) = &run.failure {
                    eprintln!("  training failed: {msg}");
                }
            }
            harness::write_ra_outputs(&dir, &runs)?;
            println!("wrote {}", dir.display());
        }
        Command::RateStudy {
            k_min,
            k_max,
            degree,
            out_dir,
        } => {
            let study = rate_study(k_min..=k_max, degree)?;
            let rows: Vec<RateCsvRow> = study
                .rows
                .iter()
                .map(|r| RateCsvRow {
                    k: r.k,
                    m: r.m,
                    error: r.error,
                    slope: study.slope,
                })
                .collect();
            for r in &rows {
                println!("k={} m={} h1_error={:.6e}", r.k, r.m, r.error);
            }
            println!("fitted slope {:.4} (expected {})", study.slope, -(degree as f64 - 1.0));
            let dir = out_dir.unwrap_or_else(|| ExperimentConfig { name: "rate_study".into(), ..Default::default() }.output_dir());
            write_csv(&dir.join(format!("rate_study_r{degree}.csv")), &rows)?;
            println!("wrote {}", dir.display());
        }
        Command::RecoverPressure { from, config, overrides } => {
            let (cfg, dir) = load(config.as_deref(), &overrides, "recover_pressure")?;
            let ckpt = Checkpoint::load(&from)?;
            let case = case_by_name(&ckpt.case, ckpt.ra)?;
            let grid = oseen_cpinn::sampling::tensor_grid(ckpt.grid_n)?;
            let mut points = grid.interior;
            points.extend(grid.boundary);
            let seed = cfg.seeds[0];
            let start = Instant::now();
            let rec = harness::recover_pressure(
                &ckpt.model,
                &case,
                &points,
                &cfg.pressure_arch().with_seed(harness::experiments::pressure_seed(seed)),
                &cfg.loss,
                &cfg.recovery.optimizer,
                cfg.eval_n,
            )?;
            let row = RecoveryRow {
                case: ckpt.case.clone(),
                formulation: ckpt.formulation.to_string(),
                n: ckpt.grid_n,
                p_err_pct: rec.pressure_err_pct,
                loss_final: *rec.history.last().unwrap(),
                wall_s: start.elapsed().as_secs_f64(),
            };
            println!("pressure error {}%", fmt_opt(row.p_err_pct));
            write_csv(&dir.join("pressure_recovery.csv"), &[row])?;
            write_history_csv(&dir.join("pressure_history.csv"), &rec.history)?;
            plot_histories(&dir.join("pressure_history.svg"), "pressure recovery", &[("pressure".into(), rec.history)])?;
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
