//! Error metrics against manufactured solutions.

use serde::Serialize;

use crate::error::Result;
use crate::fields::{operators, Field, LinearFunctional};
use crate::problem::{OseenCase, Point};
use crate::sampling::tensor_grid;

/// Default evaluation grid size per axis.
pub const EVAL_N: usize = 101;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunMetadata {
    pub config_hash: u64,
    pub seed: Option<u64>,
    pub wall_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    /// Relative discrete L² velocity error in percent. For a case whose exact
    /// velocity vanishes this is the absolute `‖∇u_θ‖` instead.
    pub velocity_err_pct: f64,
    /// Relative discrete H¹ velocity error in percent, or the absolute H¹ norm for `u ≡ 0`.
    pub velocity_h1_err_pct: f64,
    pub pressure_err_pct: Option<f64>,
    pub div_linf: f64,
    /// Absolute discrete `‖∇u_θ‖`.
    pub grad_u_l2: f64,
    pub loss_final: Option<f64>,
    pub loss_history: Vec<f64>,
    pub metadata: RunMetadata,
}

impl ErrorReport {
    pub fn with_history(mut self, history: Vec<f64>) -> Self {
        self.loss_final = history.last().copied();
        self.loss_history = history;
        self
    }

    pub fn with_metadata(mut self, metadata: RunMetadata) -> Self {
        self.metadata = metadata;
        self
    }
}

/// All points of the uniform `n × n` grid including the boundary.
pub fn eval_grid(n: usize) -> Result<Vec<Point>> {
    let g = tensor_grid(n)?;
    let mut pts = g.interior;
    pts.extend(g.boundary);
    Ok(pts)
}

/// Velocity value and gradient functionals, plus the divergence.
struct VelocityProbe {
    fs: Vec<LinearFunctional>,
    orders: Vec<usize>,
}

impl VelocityProbe {
    fn new<F: Field>(model: &F) -> Result<Self> {
        let layout = model.layout();
        let mut fs = Vec::new();
        for (a, b) in [(0, 0), (1, 0), (0, 1)] {
            fs.extend(operators::velocity_functionals(&layout, a, b)?);
        }
        fs.push(operators::divergence_functional(&layout)?);
        let mut orders = vec![0; layout.n_outputs];
        for f in &fs {
            f.required_orders(&mut orders);
        }
        Ok(Self { fs, orders })
    }

    /// `[u1, u2, u1_x, u2_x, u1_y, u2_y, div]`.
    fn probe<F: Field>(&self, model: &F, x: Point) -> [f64; 7] {
        let outs = model.outputs(x, &self.orders);
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&self.fs) {
            *slot = f.eval(&outs);
        }
        v
    }
}

fn pressure_values<F: Field>(model: &F, points: &[Point]) -> Result<Vec<f64>> {
    crate::fields::evaluate_pressure(model, points)
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

/// Relative discrete L² pressure error in percent, both pressures recentered
/// to zero grid mean.
pub fn pressure_error_pct(approx: &[f64], exact: &[f64]) -> f64 {
    let a = centered(approx);
    let e = centered(exact);
    let num: f64 = a.iter().zip(&e).map(|(a, e)| (a - e).powi(2)).sum();
    let den: f64 = e.iter().map(|e| e * e).sum();
    if den == 0.0 {
        (num / a.len() as f64).sqrt()
    } else {
        100.0 * (num / den).sqrt()
    }
}

/// Errors of `model` against the exact solution of `case` on an `n_eval × n_eval` grid.
///
/// The pressure is read from `model` when it has a pressure output and from
/// `pressure_model` otherwise.
pub fn error_report<F: Field, P: Field>(
    model: &F,
    pressure_model: Option<&P>,
    case: &OseenCase,
    n_eval: usize,
) -> Result<ErrorReport> {
    let exact = case.exact()?;
    let points = eval_grid(n_eval)?;
    let probe = VelocityProbe::new(model)?;
    let mut sums = [0.0f64; 6];
    let mut div_linf = 0.0f64;
    for &x in &points {
        let v = probe.probe(model, x);
        let u = (exact.velocity)(x, 1);
        let ue = [
            u[0].value(),
            u[1].value(),
            u[0].derivative(1, 0),
            u[1].derivative(1, 0),
            u[0].derivative(0, 1),
            u[1].derivative(0, 1),
        ];
        // [|e|², |∇e|², |u|², |∇u|², |∇u_θ|²]
        let e2: f64 = (0..2).map(|i| (v[i] - ue[i]).powi(2)).sum();
        let ge2: f64 = (2..6).map(|i| (v[i] - ue[i]).powi(2)).sum();
        let u2: f64 = (0..2).map(|i| ue[i].powi(2)).sum();
        let gu2: f64 = (2..6).map(|i| ue[i].powi(2)).sum();
        let gm2: f64 = (2..6).map(|i| v[i].powi(2)).sum();
        for (s, t) in sums.iter_mut().zip([e2, ge2, u2, gu2, gm2]) {
            *s += t;
        }
        div_linf = div_linf.max(v[6].abs());
    }
    let m = points.len() as f64;
    let grad_u_l2 = (sums[4] / m).sqrt();
    let (velocity_err_pct, velocity_h1_err_pct) = if sums[2] == 0.0 {
        (grad_u_l2, ((sums[0] + sums[1]) / m).sqrt())
    } else {
        (
            100.0 * (sums[0] / sums[2]).sqrt(),
            100.0 * ((sums[0] + sums[1]) / (sums[2] + sums[3])).sqrt(),
        )
    };
    let approx_p = if model.layout().pressure.is_some() {
        Some(pressure_values(model, &points)?)
    } else {
        pressure_model.map(|p| pressure_values(p, &points)).transpose()?
    };
    let pressure_err_pct = approx_p.map(|ap| {
        let ep: Vec<f64> = points.iter().map(|&x| (exact.pressure)(x, 0).value()).collect();
        pressure_error_pct(&ap, &ep)
    });
    Ok(ErrorReport {
        velocity_err_pct,
        velocity_h1_err_pct,
        pressure_err_pct,
        div_linf,
        grad_u_l2,
        loss_final: None,
        loss_history: Vec::new(),
        metadata: RunMetadata::default(),
    })
}
