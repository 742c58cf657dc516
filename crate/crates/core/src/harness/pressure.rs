//! Two-stage pressure recovery from a velocity field.

use crate::error::Result;
use crate::fields::{Field, FieldModel, FieldModelSpec, MlpTape, OutputKind, OutputLayout};
use crate::jet::Jet;
use crate::losses::{modified_forcing, LossConfig, PressureObjective};
use crate::optim::{train, OptimizerConfig};
use crate::problem::{OseenCase, Point};

use super::report::{eval_grid, pressure_error_pct};

/// A pressure network whose output is multiplied by `scale` and shifted by `-offset`.
#[derive(Clone, Debug)]
pub struct RecoveredPressure {
    model: FieldModel,
    scale: f64,
    offset: f64,
}

impl RecoveredPressure {
    pub fn new(model: FieldModel, scale: f64, offset: f64) -> Self {
        Self { model, scale, offset }
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl Field for RecoveredPressure {
    type Tape = Vec<MlpTape>;

    fn layout(&self) -> OutputLayout {
        self.model.layout()
    }

    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn params(&self) -> &[f64] {
        self.model.params()
    }

    fn forward(&self, x: Point, orders: &[usize]) -> (Vec<Jet>, Vec<MlpTape>) {
        let (outs, tape) = self.model.forward(x, orders);
        let outs = outs
            .into_iter()
            .map(|j| {
                let mut j = j.scale(self.scale);
                j.coeffs_mut()[0] -= self.offset;
                j
            })
            .collect();
        (outs, tape)
    }

    fn backward(&self, tape: &Vec<MlpTape>, adjoints: &[Jet], grad: &mut [f64]) {
        let adj: Vec<Jet> = adjoints.iter().map(|a| a.scale(self.scale)).collect();
        self.model.backward(tape, &adj, grad);
    }
}

#[derive(Clone, Debug)]
pub struct PressureRecovery {
    pub pressure: RecoveredPressure,
    /// Loss history in the units of the unscaled pressure.
    pub history: Vec<f64>,
    /// Relative L² pressure error in percent, when the case has an exact pressure.
    pub pressure_err_pct: Option<f64>,
}

/// Fits a pressure network to `∇q = f̄` with `f̄` the pressure-free momentum
/// defect of `velocity`, at `points`.
///
/// Targets are divided by their root mean square before training and the
/// network output is multiplied back, so the optimizer sees unit-scale data
/// whatever the forcing magnitude. The output layer starts at zero, hence
/// `f̄ ≡ 0` returns `q ≡ 0`. The result is shifted to zero mean over `points`.
pub fn recover_pressure<V: Field>(
    velocity: &V,
    case: &OseenCase,
    points: &[Point],
    spec: &FieldModelSpec,
    loss: &LossConfig,
    optimizer: &OptimizerConfig,
    n_eval: usize,
) -> Result<PressureRecovery> {
    let fbar = modified_forcing(velocity, case, points)?;
    let ms = fbar.iter().map(|f| f[0] * f[0] + f[1] * f[1]).sum::<f64>() / fbar.len().max(1) as f64;
    let scale = if ms > 0.0 { ms.sqrt() } else { 1.0 };
    let targets: Vec<[f64; 2]> = fbar.iter().map(|f| [f[0] / scale, f[1] / scale]).collect();
    let mut model = FieldModel::new(&spec.with_outputs(OutputKind::Pressure))?;
    model.zero_output_layers();
    let objective = PressureObjective::new(points.to_vec(), targets, loss, model.layout())?;
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
    let history = history.into_iter().map(|v| v * scale * scale).collect();
    let unshifted = RecoveredPressure::new(model.clone(), scale, 0.0);
    let values = crate::fields::evaluate_pressure(&unshifted, points)?;
    let offset = values.iter().sum::<f64>() / values.len() as f64;
    let pressure = RecoveredPressure::new(model, scale, offset);
    let pressure_err_pct = match &case.exact {
        Some(exact) => {
            let grid = eval_grid(n_eval)?;
            let approx = crate::fields::evaluate_pressure(&pressure, &grid)?;
            let reference: Vec<f64> = grid.iter().map(|&x| (exact.pressure)(x, 0).value()).collect();
            Some(pressure_error_pct(&approx, &reference))
        }
        None => None,
    };
    Ok(PressureRecovery {
        pressure,
        history,
        pressure_err_pct,
    })
}
