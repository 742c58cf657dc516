use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use oseen_cpinn::fields::{ClosureField, Field, FieldModel, FieldModelSpec, OutputKind};
use oseen_cpinn::harness::{
    self, error_report, recover_pressure, Checkpoint, ExperimentConfig, GridConfig, RecoveredPressure,
};
use oseen_cpinn::jet::Jet;
use oseen_cpinn::losses::{self, Formulation, LossConfig, Objective};
use oseen_cpinn::optim::OptimizerConfig;
use oseen_cpinn::problem::{make_example1, make_example2, OseenCase, VectorField};
use oseen_cpinn::sampling::tensor_grid;
use oseen_cpinn::Error;

fn tiny_spec(seed: u64) -> FieldModelSpec {
    FieldModelSpec {
        width: 4,
        depth: 1,
        seed,
        ..Default::default()
    }
}

fn zero_velocity_model() -> FieldModel {
    let mut m = FieldModel::new(&tiny_spec(0)).unwrap();
    m.zero_output_layers();
    m
}

fn tiny_config(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        grid: GridConfig {
            n: vec![4, 5],
            ..Default::default()
        },
        formulations: vec![Formulation::PinnPrimal, Formulation::CpinnPr],
        arch: tiny_spec(0),
        optimizer: OptimizerConfig {
            iterations: 20,
            learning_rate: 1e-2,
            ..Default::default()
        },
        recovery: harness::RecoveryConfig {
            enabled: true,
            optimizer: OptimizerConfig {
                iterations: 10,
                ..Default::default()
            },
        },
        seeds: vec![0, 1],
        eval_n: 11,
        ..Default::default()
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = tiny_config("roundtrip");
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    assert_eq!(cfg.hash(), ExperimentConfig::from_toml(&text).unwrap().hash());
}

#[test]
fn config_defaults_fill_missing_keys() {
    let cfg = ExperimentConfig::from_toml("name = \"x\"\nformulations = [\"cpinn_divfree\"]\n").unwrap();
    assert_eq!(cfg.formulations, vec![Formulation::CpinnDivfree]);
    assert_eq!(cfg.seeds, vec![0, 1, 2]);
    assert_eq!(cfg.grid.n, vec![20]);
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(matches!(ExperimentConfig::from_toml("nmae = \"typo\""), Err(Error::Config(_))));
    assert!(ExperimentConfig::from_toml("[optimizer]\nlearning_rat = 1e-3").is_err());
    assert!(ExperimentConfig::from_toml("seeds = []").is_err());
    assert!(ExperimentConfig::from_toml("[optimizer]\niterations = 0").is_err());
    assert!(ExperimentConfig::from_toml("formulations = [\"pinn_fancy\"]").is_err());
    assert!(ExperimentConfig::from_toml("[loss]\ntau = 1.0").is_err());
}

#[test]
fn output_dir_prefers_explicit_path() {
    let mut cfg = tiny_config("named");
    cfg.out_dir = Some("/tmp/somewhere".into());
    assert_eq!(cfg.output_dir(), Path::new("/tmp/somewhere"));
}

#[test]
fn checkpoint_round_trips_and_rejects_corruption() {
    let model = harness::build_model(Formulation::CpinnPr, &tiny_spec(3), &tiny_spec(4), 3).unwrap();
    let ckpt = Checkpoint {
        formulation: Formulation::CpinnPr,
        case: "example2".into(),
        ra: Some(1e4),
        grid_n: 15,
        model,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("run.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.formulation, ckpt.formulation);
    assert_eq!(back.case, ckpt.case);
    assert_eq!(back.ra, ckpt.ra);
    assert_eq!(back.grid_n, ckpt.grid_n);
    assert_eq!(back.model.params(), ckpt.model.params());
    assert_eq!(back.model.specs(), ckpt.model.specs());

    let bytes = ckpt.to_bytes();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Checkpoint(_))));
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Checkpoint(_))));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(Checkpoint::from_bytes(&trailing).is_err());
}

#[test]
fn exact_closures_report_zero_error() {
    let case = make_example1();
    let exact = ClosureField::velocity_pressure(case.exact().unwrap());
    let r = error_report(&exact, None::<&ClosureField>, &case, 41).unwrap();
    assert!(r.velocity_err_pct <= 1e-10, "{r:?}");
    assert!(r.velocity_h1_err_pct <= 1e-10, "{r:?}");
    assert!(r.pressure_err_pct.unwrap() <= 1e-10, "{r:?}");
    assert!(r.div_linf <= 1e-12, "{r:?}");
}

#[test]
fn zero_model_on_no_flow_case_has_zero_velocity_metric() {
    let case = make_example2(1e4).unwrap();
    let r = error_report(&zero_velocity_model(), None::<&ClosureField>, &case, 21).unwrap();
    assert_eq!(r.velocity_err_pct, 0.0);
    assert_eq!(r.grad_u_l2, 0.0);
    assert_eq!(r.div_linf, 0.0);
}

#[test]
fn pressure_error_ignores_constant_offsets() {
    let case = make_example1();
    let velocity = ClosureField::velocity(case.exact().unwrap());
    let p = FieldModel::new(&tiny_spec(9).with_outputs(OutputKind::Pressure)).unwrap();
    let a = RecoveredPressure::new(p.clone(), 1.0, 0.0);
    let b = RecoveredPressure::new(p, 1.0, 17.25);
    let ra = error_report(&velocity, Some(&a), &case, 21).unwrap();
    let rb = error_report(&velocity, Some(&b), &case, 21).unwrap();
    let (ea, eb) = (ra.pressure_err_pct.unwrap(), rb.pressure_err_pct.unwrap());
    assert!((ea - eb).abs() <= 1e-12 * ea, "{ea} vs {eb}");
}

fn unforced(case: &OseenCase) -> OseenCase {
    let mut c = case.clone();
    let zero: VectorField = Arc::new(|_, order| [Jet::zeros(order), Jet::zeros(order)]);
    c.forcing = zero;
    c
}

#[test]
fn recovery_from_zero_defect_gives_zero_pressure() {
    let case = unforced(&make_example2(1.0).unwrap());
    let points = tensor_grid(6).unwrap().interior;
    let opt = OptimizerConfig {
        iterations: 50,
        ..Default::default()
    };
    let rec = recover_pressure(&zero_velocity_model(), &case, &points, &tiny_spec(1), &LossConfig::default(), &opt, 11)
        .unwrap();
    let values = oseen_cpinn::fields::evaluate_pressure(&rec.pressure, &points).unwrap();
    assert!(values.iter().all(|v| v.abs() <= 1e-6), "{values:?}");
    assert_eq!(rec.history.len(), 51);
}

#[test]
fn oracle_recovery_reduces_pressure_error() {
    let case = make_example2(1e2).unwrap();
    let oracle = ClosureField::velocity(case.exact().unwrap());
    let grid = tensor_grid(8).unwrap();
    let mut points = grid.interior;
    points.extend(grid.boundary);
    let spec = FieldModelSpec {
        width: 8,
        depth: 2,
        ..Default::default()
    };
    let opt = OptimizerConfig {
        iterations: 300,
        learning_rate: 1e-2,
        ..Default::default()
    };
    let rec = recover_pressure(&oracle, &case, &points, &spec, &LossConfig::default(), &opt, 21).unwrap();
    assert!(rec.history.last().unwrap() < &rec.history[0]);
    assert!(rec.pressure_err_pct.unwrap() < 20.0, "{:?}", rec.pressure_err_pct);
}

#[test]
fn zero_model_pinn_loss_scales_with_forcing_squared() {
    let colloc = tensor_grid(7).unwrap();
    let model = zero_velocity_model();
    let l = |ra: f64| losses::pinn_loss(&model, &make_example2(ra).unwrap(), &colloc).unwrap().total;
    let (a, b) = (l(10.0), l(1e3));
    assert!(a > 0.0);
    assert!((b / a - 1e4).abs() <= 1e-8 * 1e4, "ratio {}", b / a);
}

#[test]
fn pressure_robust_loss_is_independent_of_forcing_scale() {
    let colloc = tensor_grid(7).unwrap();
    let model = harness::build_model(Formulation::CpinnPr, &tiny_spec(2), &tiny_spec(2), 2).unwrap();
    let cfg = LossConfig::new(Formulation::CpinnPr);
    let values: Vec<f64> = [1.0, 1e2, 1e4, 1e6]
        .iter()
        .map(|&ra| losses::pr_loss(&model, &make_example2(ra).unwrap(), &colloc, &cfg, true).unwrap().total)
        .collect();
    for v in &values {
        assert!((v - values[0]).abs() <= 1e-12 * values[0], "{values:?}");
    }
}

#[test]
fn pressure_robust_training_reaches_the_no_flow_minimum() {
    let case = make_example2(1e4).unwrap();
    let colloc = tensor_grid(8).unwrap();
    let spec = FieldModelSpec {
        width: 8,
        depth: 1,
        ..Default::default()
    };
    let mut model = harness::build_model(Formulation::CpinnPr, &spec, &spec, 0).unwrap();
    let cfg = LossConfig::new(Formulation::CpinnPr);
    let objective = Objective::new(&case, &colloc, &cfg, model.layout()).unwrap();
    let opt = OptimizerConfig {
        iterations: 5000,
        learning_rate: 2e-2,
        decay_rate: 0.3,
        decay_steps: 1000,
        ..Default::default()
    };
    let history = harness::train_model(&mut model, &objective, &opt).unwrap();
    let last = *history.last().unwrap();
    assert!(last <= 1e-6, "final loss {last}");
    assert_eq!(objective.evaluate(&model).unwrap().total, last);
}

#[test]
fn table_experiment_is_deterministic_and_complete() {
    let cfg = tiny_config("table");
    let a = harness::run_table_experiment(&cfg).unwrap();
    let b = harness::run_table_experiment(&cfg).unwrap();
    assert_eq!(a.len(), 2 * 2 * 2);
    for (x, y) in a.iter().zip(&b) {
        assert!(x.failure.is_none(), "{:?}", x.failure);
        let mut rx = x.row.clone();
        let mut ry = y.row.clone();
        rx.wall_s = 0.0;
        ry.wall_s = 0.0;
        assert_eq!(rx, ry);
        assert_eq!(x.history, y.history);
        assert_eq!(x.history.len(), 21);
        assert_eq!(*x.history.last().unwrap(), x.row.loss_final);
        assert!(x.row.p_err_pct.is_some());
        assert!(x.row.vel_err_l2_pct >= 0.0 && x.row.div_linf.is_finite());
    }
    let pr = a.iter().find(|r| r.row.formulation == Formulation::CpinnPr).unwrap();
    assert!(pr.row.div_linf <= 1e-12);

    let dir = tempfile::tempdir().unwrap();
    harness::write_table_outputs(dir.path(), &cfg, &a).unwrap();
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "formulation,method,N,seed,vel_err_l2_pct,vel_err_h1_pct,p_err_pct,div_linf,loss_final,wall_s"
    );
    assert_eq!(lines.count(), 8);
    assert!(dir.path().join("histories/cpinn_pr_N5_seed1.csv").exists());
    assert!(dir.path().join("checkpoints/pinn_primal_N4_seed0.ckpt").exists());
    assert!(dir.path().join("plots/loss_N4_seed0.svg").exists());
    let ckpt = Checkpoint::load(&dir.path().join("checkpoints/cpinn_pr_N4_seed1.ckpt")).unwrap();
    let run = a.iter().find(|r| r.row.formulation == Formulation::CpinnPr && r.row.n == 4 && r.row.seed == 1).unwrap();
    assert_eq!(ckpt.model.params(), run.checkpoint.as_ref().unwrap().model.params());
}

#[test]
fn ra_sweep_emits_one_row_per_combination() {
    let mut cfg = tiny_config("ra");
    cfg.case.name = "example2".into();
    cfg.grid.n = vec![5];
    cfg.ra_values = vec![1.0, 1e3];
    cfg.seeds = vec![0];
    let runs = harness::run_ra_sweep(&cfg).unwrap();
    assert_eq!(runs.len(), 2 * 2);
    assert!(runs.iter().all(|r| r.failure.is_none() && r.row.grad_u_l2.is_finite()));
    let dir = tempfile::tempdir().unwrap();
    harness::write_ra_outputs(dir.path(), &runs).unwrap();
    let text = std::fs::read_to_string(dir.path().join("ra_sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(dir.path().join("ra_sweep.svg").exists());
}

#[test]
fn ra_sweep_requires_the_no_flow_case() {
    assert!(harness::run_ra_sweep(&tiny_config("wrong")).is_err());
}

#[test]
fn cli_rate_study_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_oseen-cpinn"))
        .args(["rate-study", "--k-max", "4", "--degree", "2", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(dir.path().join("rate_study_r2.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,m,error,slope");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn cli_rejects_missing_config() {
    let out = Command::new(env!("CARGO_BIN_EXE_oseen-cpinn"))
        .args(["run", "--config", "/nonexistent/cfg.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.grid.collocation_sets().unwrap();
            cfg.case.build().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn guide_config_sample_parses() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src/experiments.md")).unwrap();
    let start = text.find("```toml\n").unwrap() + "```toml\n".len();
    let end = start + text[start..].find("```").unwrap();
    let cfg = ExperimentConfig::from_toml(&text[start..end]).unwrap();
    assert_eq!(cfg.grid.n, vec![10, 20, 30]);
    assert_eq!(cfg.recovery.optimizer.iterations, 5000);
}
