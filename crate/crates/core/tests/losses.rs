use oseen_cpinn::fields::{ClosureField, Field, FieldModel, FieldModelSpec, OutputKind};
use oseen_cpinn::losses::{self, Formulation, LossConfig, Objective, PressureObjective};
use oseen_cpinn::problem::{make_example1, make_example2, OseenCase};
use oseen_cpinn::sampling::{tensor_grid, CollocationSet};
use oseen_cpinn::Error;

fn exact_model(case: &OseenCase, f: Formulation) -> Box<dyn Fn(&Objective) -> f64> {
    let exact = case.exact().unwrap().clone();
    match f.architecture() {
        (OutputKind::VelocityPressure, _) => {
            let m = ClosureField::velocity_pressure(&exact);
            Box::new(move |o| o.evaluate(&m).unwrap().total)
        }
        (OutputKind::Stream, Some(_)) => {
            let m = ClosureField::stream(&exact, true).unwrap();
            Box::new(move |o| o.evaluate(&m).unwrap().total)
        }
        (OutputKind::Stream, None) => {
            let m = ClosureField::stream(&exact, false).unwrap();
            Box::new(move |o| o.evaluate(&m).unwrap().total)
        }
        _ => {
            let m = ClosureField::velocity(&exact);
            Box::new(move |o| o.evaluate(&m).unwrap().total)
        }
    }
}

fn exact_layout(case: &OseenCase, f: Formulation) -> oseen_cpinn::fields::OutputLayout {
    let exact = case.exact().unwrap();
    match f.architecture() {
        (OutputKind::VelocityPressure, _) => ClosureField::velocity_pressure(exact).layout(),
        (OutputKind::Stream, p) => ClosureField::stream(exact, p.is_some()).unwrap().layout(),
        _ => ClosureField::velocity(exact).layout(),
    }
}

#[test]
fn all_losses_vanish_at_exact_solutions() {
    let colloc = tensor_grid(8).unwrap();
    for case in [make_example1(), make_example2(1e3).unwrap()] {
        for f in Formulation::ALL {
            let cfg = LossConfig::new(f);
            let obj = Objective::new(&case, &colloc, &cfg, exact_layout(&case, f)).unwrap();
            let total = exact_model(&case, f)(&obj);
            assert!(total.abs() <= 1e-8, "{} {f}: {total}", case.label);
        }
    }
}

#[test]
fn cpinn_with_gamma_two_and_no_gagliardo_equals_pinn() {
    let case = make_example1();
    let colloc = tensor_grid(7).unwrap();
    let model = FieldModel::new(&FieldModelSpec {
        width: 6,
        depth: 2,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let mut cfg = LossConfig::new(Formulation::CpinnPrimal);
    cfg.gamma = 2.0;
    cfg.weights.boundary_gagliardo = 0.0;
    let a = losses::pinn_loss(&model, &case, &colloc).unwrap();
    let b = losses::cpinn_loss(&model, &case, &colloc, &cfg).unwrap();
    assert_eq!(a.total, b.total);
}

#[test]
fn divfree_loss_requires_stream_model() {
    let case = make_example1();
    let colloc = tensor_grid(5).unwrap();
    let model = FieldModel::new(&FieldModelSpec::default()).unwrap();
    let err = losses::divfree_loss(&model, &case, &colloc, &LossConfig::default(), true).unwrap_err();
    assert!(matches!(err, Error::RequiresDivergenceFree(_)));
}

#[test]
fn empty_collocation_rejected() {
    let case = make_example1();
    let colloc = tensor_grid(2).unwrap();
    let model = FieldModel::new(&FieldModelSpec::default()).unwrap();
    assert!(matches!(losses::pinn_loss(&model, &case, &colloc), Err(Error::EmptyPointSet)));
}

fn small_model(f: Formulation, seed: u64) -> FieldModel {
    let spec = FieldModelSpec {
        width: 5,
        depth: 2,
        seed,
        ..Default::default()
    };
    match f.architecture() {
        (OutputKind::Stream, p) => {
            let pspec = spec.with_seed(seed + 100);
            FieldModel::divergence_free(&spec, p.map(|_| &pspec)).unwrap()
        }
        (kind, _) => FieldModel::new(&spec.with_outputs(kind)).unwrap(),
    }
}

fn fd_check<F: Fn(&FieldModel) -> (f64, Vec<f64>)>(model: &FieldModel, f: F) -> f64 {
    let (_, g) = f(model);
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..model.n_params() {
        let h = 1e-5;
        let mut up = model.clone();
        up.params_mut()[i] += h;
        let mut dn = model.clone();
        dn.params_mut()[i] -= h;
        let fd = (f(&up).0 - f(&dn).0) / (2.0 * h);
        let denom = g[i].abs().max(fd.abs()).max(1e-6 * gmax);
        worst = worst.max((g[i] - fd).abs() / denom);
    }
    worst
}

#[test]
fn objective_gradients_match_finite_differences() {
    let colloc = CollocationSet::new(
        vec![[0.3, 0.4], [0.7, 0.2], [0.5, 0.5], [0.15, 0.85], [0.9, 0.6]],
        vec![[0.0, 0.3], [1.0, 0.6], [0.4, 0.0], [0.8, 1.0]],
    )
    .unwrap();
    for case in [make_example1(), make_example2(10.0).unwrap()] {
        for f in Formulation::ALL {
            let mut cfg = LossConfig::new(f);
            cfg.include_div_penalty = true;
            let model = small_model(f, 7);
            let obj = Objective::new(&case, &colloc, &cfg, model.layout()).unwrap();
            let worst = fd_check(&model, |m| {
                let (b, g) = obj.value_and_grad(m).unwrap();
                (b.total, g)
            });
            assert!(worst <= 1e-4, "{} {f}: {worst}", case.label);
        }
    }
}

#[test]
fn pressure_objective_gradient_matches_finite_differences() {
    let points = tensor_grid(6).unwrap().interior;
    let fbar: Vec<[f64; 2]> = points.iter().map(|p| [p[0].sin(), p[0] * p[1]]).collect();
    for tau in [2.0, 1.5] {
        let mut cfg = LossConfig::default();
        cfg.tau = tau;
        let model = FieldModel::new(&FieldModelSpec {
            width: 5,
            depth: 2,
            outputs: OutputKind::Pressure,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let obj = PressureObjective::new(points.clone(), fbar.clone(), &cfg, model.layout()).unwrap();
        let worst = fd_check(&model, |m| {
            let (b, g) = obj.value_and_grad(m).unwrap();
            (b.total, g)
        });
        assert!(worst <= 1e-4, "tau {tau}: {worst}");
    }
}
