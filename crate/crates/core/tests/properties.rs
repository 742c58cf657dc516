use std::sync::Arc;

use proptest::prelude::*;

use oseen_cpinn::fields::{self, Field, FieldModel, FieldModelSpec};
use oseen_cpinn::harness::report::pressure_error_pct;
use oseen_cpinn::jet::Jet;
use oseen_cpinn::losses::{self, discrete_h12_error, discrete_lgamma_term, Formulation, LossConfig};
use oseen_cpinn::problem::{make_example1, Point, VectorField};
use oseen_cpinn::recovery_baseline::{interpolate, interpolate_vector};
use oseen_cpinn::sampling::{tensor_grid, CollocationSet};

fn residuals() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lgamma_is_two_homogeneous(r in residuals(), c in -5.0..5.0f64, gamma in 1.0..=2.0f64) {
        let base = discrete_lgamma_term(std::slice::from_ref(&r), gamma).unwrap();
        let scaled: Vec<f64> = r.iter().map(|v| c * v).collect();
        let s = discrete_lgamma_term(&[scaled], gamma).unwrap();
        prop_assert!((s - c * c * base).abs() <= 1e-10 * (1.0 + s.abs()));
    }

    #[test]
    fn lgamma_is_permutation_invariant(r in residuals(), gamma in 1.0..=2.0f64, seed in any::<u64>()) {
        let mut p = r.clone();
        let n = p.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            p.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = discrete_lgamma_term(&[r], gamma).unwrap();
        let b = discrete_lgamma_term(&[p], gamma).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn lgamma_is_monotone_in_gamma(r in residuals()) {
        // power means grow with the exponent
        let a = discrete_lgamma_term(std::slice::from_ref(&r), 1.0).unwrap();
        let b = discrete_lgamma_term(&[r], 2.0).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn h12_gagliardo_part_ignores_constants(c in -3.0..3.0f64, n in 3usize..7) {
        let colloc = tensor_grid(n).unwrap();
        let m = colloc.n_boundary();
        let e: Vec<f64> = (0..m).map(|j| (j as f64 * 0.7).sin()).collect();
        let shifted: Vec<f64> = e.iter().map(|v| v + c).collect();
        let dist = colloc.boundary_dist_matrix();
        let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / m as f64;
        let gag_a = discrete_h12_error(std::slice::from_ref(&e), dist).unwrap() - l2(&e);
        let gag_b = discrete_h12_error(std::slice::from_ref(&shifted), dist).unwrap() - l2(&shifted);
        prop_assert!((gag_a - gag_b).abs() <= 1e-9 * (1.0 + gag_a.abs()));
    }

    #[test]
    fn h12_is_invariant_under_point_relabeling(rot in 0usize..8) {
        let colloc = tensor_grid(5).unwrap();
        let m = colloc.n_boundary();
        let e: Vec<f64> = colloc.boundary.iter().map(|p| p[0] * p[0] - p[1]).collect();
        let perm: Vec<usize> = (0..m).map(|j| (j + rot) % m).collect();
        let pts: Vec<Point> = perm.iter().map(|&j| colloc.boundary[j]).collect();
        let ep: Vec<f64> = perm.iter().map(|&j| e[j]).collect();
        let relabeled = CollocationSet::new(vec![], pts).unwrap();
        let a = discrete_h12_error(&[e], colloc.boundary_dist_matrix()).unwrap();
        let b = discrete_h12_error(&[ep], relabeled.boundary_dist_matrix()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn stream_models_are_divergence_free(seed in any::<u64>(), x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let spec = FieldModelSpec { width: 8, depth: 2, seed, ..Default::default() };
        let model = FieldModel::divergence_free(&spec, None).unwrap();
        let g = fields::velocity_gradient(&model, [x, y]).unwrap();
        prop_assert!((g[0][0] + g[1][1]).abs() <= 1e-12);
    }

    #[test]
    fn pressure_robust_loss_ignores_gradient_forcing(
        a in -50.0..50.0f64, b in -50.0..50.0f64, c in -50.0..50.0f64, seed in 0u64..1000,
    ) {
        let base = make_example1();
        let mut shifted = base.clone();
        let f = base.forcing.clone();
        // f + ∇φ with φ = a x² y + b sin(3y) + c x y³
        let forcing: VectorField = Arc::new(move |p, order| {
            let (x, y) = Jet::vars(order + 1, p);
            let phi = &(&(&(&x * &x) * &y).scale(a) + &(y.scale(3.0).sin().scale(b))) + &(&(&x * &(&y * &y)) * &y).scale(c);
            let [f1, f2] = f(p, order);
            [&f1 + &phi.dx(), &f2 + &phi.dy()]
        });
        shifted.forcing = forcing;
        let colloc = tensor_grid(6).unwrap();
        let spec = FieldModelSpec { width: 6, depth: 2, seed, ..Default::default() };
        let model = FieldModel::divergence_free(&spec, None).unwrap();
        let cfg = LossConfig::new(Formulation::CpinnPr);
        let l0 = losses::pr_loss(&model, &base, &colloc, &cfg, true).unwrap().total;
        let l1 = losses::pr_loss(&model, &shifted, &colloc, &cfg, true).unwrap().total;
        prop_assert!((l0 - l1).abs() <= 1e-10 * l0.abs().max(1e-300));
    }

    #[test]
    fn pressure_error_ignores_constant_shifts(c in -1e3..1e3f64, seed in 0u64..1000) {
        let n = 50;
        let exact: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37 + seed as f64).sin()).collect();
        let approx: Vec<f64> = exact.iter().enumerate().map(|(i, v)| v + 0.01 * (i as f64).cos()).collect();
        let shifted: Vec<f64> = approx.iter().map(|v| v + c).collect();
        let a = pressure_error_pct(&approx, &exact);
        let b = pressure_error_pct(&shifted, &exact);
        prop_assert!((a - b).abs() <= 1e-8 * a);
    }

    #[test]
    fn vector_interpolation_is_componentwise(k in 0u32..3, r in 2usize..4, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let f1 = |p: Point| (2.0 * p[0]).sin() + p[1];
        let f2 = |p: Point| p[0] * p[1].exp();
        let v = interpolate_vector(|p| [f1(p), f2(p)], k, r).unwrap();
        let s1 = interpolate(f1, k, r).unwrap();
        let s2 = interpolate(f2, k, r).unwrap();
        let vv = v.eval([x, y]);
        prop_assert_eq!(vv[0], s1.eval([x, y])[0]);
        prop_assert_eq!(vv[1], s2.eval([x, y])[0]);
    }

    #[test]
    fn interpolation_reproduces_random_polynomials(
        coef in prop::collection::vec(-2.0..2.0f64, 10), k in 0u32..4, r in 2usize..5, x in 0.0..1.0f64, y in 0.0..1.0f64,
    ) {
        let terms: Vec<(i32, i32)> = (0..r as i32).flat_map(|a| (0..r as i32 - a).map(move |b| (a, b))).collect();
        let poly = |p: Point| terms.iter().zip(&coef).map(|(&(a, b), c)| c * p[0].powi(a) * p[1].powi(b)).sum::<f64>();
        let interp = interpolate(poly, k, r).unwrap();
        prop_assert!((interp.eval([x, y])[0] - poly([x, y])).abs() <= 1e-10);
    }
}

#[test]
fn loss_terms_are_nonnegative_for_random_models() {
    let case = make_example1();
    let colloc = tensor_grid(6).unwrap();
    for seed in 0..5 {
        for f in Formulation::ALL {
            let arch = FieldModelSpec {
                width: 6,
                depth: 2,
                seed,
                ..Default::default()
            };
            let model = oseen_cpinn::harness::build_model(f, &arch, &arch, seed).unwrap();
            let obj = losses::Objective::new(&case, &colloc, &LossConfig::new(f), model.layout()).unwrap();
            let b = obj.evaluate(&model).unwrap();
            for v in [
                b.total,
                b.interior_residual_term,
                b.divergence_term,
                b.boundary_l2_term,
                b.boundary_gagliardo_term,
            ] {
                assert!(v >= 0.0 && v.is_finite(), "{f}: {b:?}");
            }
        }
    }
}
