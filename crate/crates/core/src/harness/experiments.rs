//! Table experiments and the forcing-scale sweep.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ClosureField, Field, FieldModel, FieldModelSpec, OutputKind};
use crate::losses::{Formulation, Objective};
use crate::optim::{train, OptimizerConfig};
use crate::problem::{make_example2, OseenCase};
use crate::sampling::CollocationSet;

use super::checkpoint::Checkpoint;
use super::config::ExperimentConfig;
use super::output::{plot_histories, plot_loglog, write_csv, write_history_csv};
use super::pressure::{recover_pressure, PressureRecovery};
use super::report::{error_report, ErrorReport, RunMetadata};

/// Seed of the pressure network paired with a velocity network seeded `seed`.
pub fn pressure_seed(seed: u64) -> u64 {
    seed.wrapping_add(1 << 32)
}

/// Fresh model with the architecture `formulation` trains.
pub fn build_model(
    formulation: Formulation,
    arch: &FieldModelSpec,
    pressure_arch: &FieldModelSpec,
    seed: u64,
) -> Result<FieldModel> {
    let spec = arch.with_seed(seed);
    match formulation.architecture() {
        (OutputKind::Stream, pressure) => {
            let p = pressure_arch.with_seed(pressure_seed(seed));
            FieldModel::divergence_free(&spec, pressure.map(|_| &p))
        }
        (kind, _) => FieldModel::new(&spec.with_outputs(kind)),
    }
}

/// Trains `model` on `objective`; see [`train`] for the history layout.
pub fn train_model(model: &mut FieldModel, objective: &Objective, optimizer: &OptimizerConfig) -> Result<Vec<f64>> {
    let mut params = model.params().to_vec();
    let mut work = model.clone();
    let history = train(
        &mut params,
        |p| {
            work.set_params(p);
            objective.value_and_grad(&work).map(|(b, g)| (b.total, g))
        },
        optimizer,
    )?;
    model.set_params(&params);
    Ok(history)
}

/// Everything produced by one training run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub formulation: Formulation,
    pub n: usize,
    pub seed: u64,
    pub model: FieldModel,
    pub recovery: Option<PressureRecovery>,
    pub report: ErrorReport,
}

/// Trains one formulation on one collocation set and evaluates it. Velocity-only
/// formulations get a recovered pressure when `cfg.recovery.enabled`.
pub fn run_one(
    cfg: &ExperimentConfig,
    case: &OseenCase,
    n: usize,
    colloc: &CollocationSet,
    formulation: Formulation,
    seed: u64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut model = build_model(formulation, &cfg.arch, &cfg.pressure_arch(), seed)?;
    let loss = cfg.loss.with_formulation(formulation);
    let objective = Objective::new(case, colloc, &loss, model.layout())?;
    let history = train_model(&mut model, &objective, &cfg.optimizer)?;
    let recovery = if model.layout().pressure.is_none() && cfg.recovery.enabled {
        let mut points = colloc.interior.clone();
        points.extend_from_slice(&colloc.boundary);
        Some(recover_pressure(
            &model,
            case,
            &points,
            &cfg.pressure_arch().with_seed(pressure_seed(seed)),
            &loss,
            &cfg.recovery.optimizer,
            cfg.eval_n,
        )?)
    } else {
        None
    };
    let report = error_report(&model, recovery.as_ref().map(|r| &r.pressure), case, cfg.eval_n)?
        .with_history(history)
        .with_metadata(RunMetadata {
            config_hash: cfg.hash(),
            seed: Some(seed),
            wall_s: start.elapsed().as_secs_f64(),
        });
    Ok(RunOutcome {
        formulation,
        n,
        seed,
        model,
        recovery,
        report,
    })
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub formulation: Formulation,
    pub method: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub vel_err_l2_pct: f64,
    pub vel_err_h1_pct: f64,
    pub p_err_pct: Option<f64>,
    pub div_linf: f64,
    pub loss_final: f64,
    pub wall_s: f64,
}

#[derive(Clone, Debug)]
pub struct TableRun {
    pub row: TableRow,
    pub history: Vec<f64>,
    pub checkpoint: Option<Checkpoint>,
    /// Error message when training aborted.
    pub failure: Option<String>,
}

fn failed_row(formulation: Formulation, n: usize, seed: u64) -> TableRow {
    TableRow {
        formulation,
        method: formulation.method().name(),
        n,
        seed,
        vel_err_l2_pct: f64::NAN,
        vel_err_h1_pct: f64::NAN,
        p_err_pct: None,
        div_linf: f64::NAN,
        loss_final: f64::NAN,
        wall_s: f64::NAN,
    }
}

/// Trains every (N, formulation, seed) combination. A failed run yields a
/// row of NaNs and the sweep continues.
pub fn run_table_experiment(cfg: &ExperimentConfig) -> Result<Vec<TableRun>> {
    cfg.validate()?;
    let case = cfg.case.build()?;
    case.exact()?;
    let mut runs = Vec::new();
    for (n, colloc) in cfg.grid.collocation_sets()? {
        for &formulation in &cfg.formulations {
            for &seed in &cfg.seeds {
                runs.push(match run_one(cfg, &case, n, &colloc, formulation, seed) {
                    Ok(out) => {
                        let r = &out.report;
                        TableRun {
                            row: TableRow {
                                formulation,
                                method: formulation.method().name(),
                                n,
                                seed,
                                vel_err_l2_pct: r.velocity_err_pct,
                                vel_err_h1_pct: r.velocity_h1_err_pct,
                                p_err_pct: r.pressure_err_pct,
                                div_linf: r.div_linf,
                                loss_final: r.loss_final.unwrap_or(f64::NAN),
                                wall_s: r.metadata.wall_s,
                            },
                            history: r.loss_history.clone(),
                            checkpoint: Some(Checkpoint {
                                formulation,
                                case: cfg.case.name.clone(),
                                ra: cfg.case.ra,
                                grid_n: n,
                                model: out.model,
                            }),
                            failure: None,
                        }
                    }
                    Err(e) => TableRun {
                        row: failed_row(formulation, n, seed),
                        history: Vec::new(),
                        checkpoint: None,
                        failure: Some(e.to_string()),
                    },
                });
            }
        }
    }
    Ok(runs)
}

fn run_stem(formulation: Formulation, n: usize, seed: u64) -> String {
    format!("{formulation}_N{n}_seed{seed}")
}

/// Writes `table.csv`, per-run loss histories, one loss plot per `(N, seed)`
/// and, if enabled, checkpoints.
pub fn write_table_outputs(dir: &Path, cfg: &ExperimentConfig, runs: &[TableRun]) -> Result<()> {
    let rows: Vec<&TableRow> = runs.iter().map(|r| &r.row).collect();
    write_csv(&dir.join("table.csv"), &rows)?;
    for run in runs {
        let stem = run_stem(run.row.formulation, run.row.n, run.row.seed);
        if !run.history.is_empty() {
            write_history_csv(&dir.join("histories").join(format!("{stem}.csv")), &run.history)?;
        }
        if let (true, Some(ckpt)) = (cfg.save_checkpoints, &run.checkpoint) {
            ckpt.save(&dir.join("checkpoints").join(format!("{stem}.ckpt")))?;
        }
    }
    let mut keys: Vec<(usize, u64)> = runs.iter().map(|r| (r.row.n, r.row.seed)).collect();
    keys.sort();
    keys.dedup();
    for (n, seed) in keys {
        let series: Vec<(String, Vec<f64>)> = runs
            .iter()
            .filter(|r| r.row.n == n && r.row.seed == seed && !r.history.is_empty())
            .map(|r| (r.row.formulation.to_string(), r.history.clone()))
            .collect();
        if !series.is_empty() {
            plot_histories(
                &dir.join("plots").join(format!("loss_N{n}_seed{seed}.svg")),
                &format!("{} N = {n}, seed {seed}", cfg.case.name),
                &series,
            )?;
        }
    }
    Ok(())
}

/// One line of the forcing-scale sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RaRow {
    pub ra: f64,
    pub formulation: Formulation,
    pub method: &'static str,
    pub seed: u64,
    pub grad_u_l2: f64,
    pub loss_final: f64,
    pub wall_s: f64,
}

#[derive(Clone, Debug)]
pub struct RaRun {
    pub row: RaRow,
    pub history: Vec<f64>,
    pub failure: Option<String>,
}

/// Trains every `(Ra, formulation, seed)` on the no-flow case with the first
/// configured grid and records `‖∇u_θ‖`.
pub fn run_ra_sweep(cfg: &ExperimentConfig) -> Result<Vec<RaRun>> {
    cfg.validate()?;
    if cfg.case.name != "example2" {
        return Err(Error::Config(format!(
            "the Ra sweep runs on example2, config names `{}`",
            cfg.case.name
        )));
    }
    if cfg.ra_values.is_empty() {
        return Err(Error::Config("ra_values must not be empty".into()));
    }
    let (_, colloc) = cfg.grid.collocation_sets()?.remove(0);
    let mut runs = Vec::new();
    for &ra in &cfg.ra_values {
        let case = make_example2(ra)?;
        for &formulation in &cfg.formulations {
            for &seed in &cfg.seeds {
                let start = Instant::now();
                let result = (|| {
                    let mut model = build_model(formulation, &cfg.arch, &cfg.pressure_arch(), seed)?;
                    let objective = Objective::new(&case, &colloc, &cfg.loss.with_formulation(formulation), model.layout())?;
                    let history = train_model(&mut model, &objective, &cfg.optimizer)?;
                    let report = error_report(&model, None::<&ClosureField>, &case, cfg.eval_n)?;
                    Ok::<_, Error>((history, report.grad_u_l2))
                })();
                let wall_s = start.elapsed().as_secs_f64();
                let method = formulation.method().name();
                runs.push(match result {
                    Ok((history, grad_u_l2)) => RaRun {
                        row: RaRow {
                            ra,
                            formulation,
                            method,
                            seed,
                            grad_u_l2,
                            loss_final: *history.last().unwrap(),
                            wall_s,
                        },
                        history,
                        failure: None,
                    },
                    Err(e) => RaRun {
                        row: RaRow {
                            ra,
                            formulation,
                            method,
                            seed,
                            grad_u_l2: f64::NAN,
                            loss_final: f64::NAN,
                            wall_s,
                        },
                        history: Vec::new(),
                        failure: Some(e.to_string()),
                    },
                });
            }
        }
    }
    Ok(runs)
}

/// Writes `ra_sweep.csv`, the log-log growth plot and per-run histories.
pub fn write_ra_outputs(dir: &Path, runs: &[RaRun]) -> Result<()> {
    let rows: Vec<&RaRow> = runs.iter().map(|r| &r.row).collect();
    write_csv(&dir.join("ra_sweep.csv"), &rows)?;
    let mut keys: Vec<(Formulation, u64)> = Vec::new();
    for r in runs {
        if !keys.contains(&(r.row.formulation, r.row.seed)) {
            keys.push((r.row.formulation, r.row.seed));
        }
        if !r.history.is_empty() {
            let stem = format!("{}_ra{}_seed{}", r.row.formulation, r.row.ra, r.row.seed);
            write_history_csv(&dir.join("histories").join(format!("{stem}.csv")), &r.history)?;
        }
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = keys
        .iter()
        .map(|&(f, seed)| {
            let pts = runs
                .iter()
                .filter(|r| r.row.formulation == f && r.row.seed == seed)
                .map(|r| (r.row.ra, r.row.grad_u_l2))
                .collect();
            (format!("{f} seed {seed}"), pts)
        })
        .collect();
    plot_loglog(&dir.join("ra_sweep.svg"), "velocity gradient vs forcing scale", "Ra", "||grad u||", &series)
}
