//! Differentiable velocity and pressure fields.
//!
//! A [`Field`] maps a point to a handful of scalar outputs, each returned
//! as a Taylor jet. The [`OutputLayout`] says how to read velocity and
//! pressure from those outputs: either directly, or through a stream
//! function `ψ` with `u = (∂ψ/∂y, -∂ψ/∂x)`, which is divergence free by
//! construction.

pub mod mlp;
pub mod operators;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{n_coeffs, Jet};
use crate::problem::{ExactSolution, OseenCase, Point, ScalarField, VectorField};

pub use mlp::{Activation, Mlp, MlpTape};
pub use operators::{DiffExpr, LinearFunctional};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocityRepr {
    Direct { u1: usize, u2: usize },
    Stream { psi: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputLayout {
    pub n_outputs: usize,
    pub velocity: Option<VelocityRepr>,
    pub pressure: Option<usize>,
}

impl OutputLayout {
    pub fn is_divergence_free(&self) -> bool {
        matches!(self.velocity, Some(VelocityRepr::Stream { .. }))
    }
}

/// Anything that can be expanded in Taylor jets at a point and, for
/// trainable fields, differentiated with respect to its parameters.
pub trait Field {
    type Tape;

    fn layout(&self) -> OutputLayout;

    fn n_params(&self) -> usize {
        0
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    /// Output jets at `x`; `orders[o]` is the order required for output `o`.
    fn forward(&self, x: Point, orders: &[usize]) -> (Vec<Jet>, Self::Tape);

    /// Accumulates the parameter gradient for output adjoints `adjoints`.
    fn backward(&self, _tape: &Self::Tape, _adjoints: &[Jet], _grad: &mut [f64]) {}

    fn outputs(&self, x: Point, orders: &[usize]) -> Vec<Jet> {
        self.forward(x, orders).0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    VelocityPressure,
    Velocity,
    Stream,
    Pressure,
}

impl OutputKind {
    pub fn n_outputs(self) -> usize {
        match self {
            OutputKind::VelocityPressure => 3,
            OutputKind::Velocity => 2,
            OutputKind::Stream | OutputKind::Pressure => 1,
        }
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => OutputKind::VelocityPressure,
            1 => OutputKind::Velocity,
            2 => OutputKind::Stream,
            3 => OutputKind::Pressure,
            _ => return Err(Error::Checkpoint(format!("unknown output kind {code}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldModelSpec {
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub outputs: OutputKind,
    pub seed: u64,
}

impl Default for FieldModelSpec {
    fn default() -> Self {
        Self {
            width: 32,
            depth: 3,
            activation: Activation::Tanh,
            outputs: OutputKind::VelocityPressure,
            seed: 0,
        }
    }
}

impl FieldModelSpec {
    pub fn with_outputs(&self, outputs: OutputKind) -> Self {
        Self { outputs, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 {
            return Err(Error::InvalidParameter(format!(
                "network width and depth must be positive, got {}x{}",
                self.width, self.depth
            )));
        }
        Ok(())
    }

    fn mlp(&self) -> Mlp {
        Mlp::new(self.width, self.depth, self.outputs.n_outputs(), self.activation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Generic,
    DivergenceFree,
}

#[derive(Clone, Debug)]
struct Net {
    spec: FieldModelSpec,
    mlp: Mlp,
    offset: usize,
    first_output: usize,
}

/// One or two networks sharing a flat parameter vector.
#[derive(Clone, Debug)]
pub struct FieldModel {
    kind: ModelKind,
    nets: Vec<Net>,
    params: Vec<f64>,
    layout: OutputLayout,
}

impl FieldModel {
    fn assemble(kind: ModelKind, specs: &[FieldModelSpec], params: Option<Vec<f64>>) -> Result<Self> {
        let mut nets = Vec::new();
        let (mut offset, mut first_output) = (0, 0);
        let mut init = Vec::new();
        for spec in specs {
            spec.validate()?;
            let mlp = spec.mlp();
            if params.is_none() {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                init.extend(mlp.init(&mut rng));
            }
            let n = mlp.n_params();
            let outs = mlp.n_outputs();
            nets.push(Net {
                spec: spec.clone(),
                mlp,
                offset,
                first_output,
            });
            offset += n;
            first_output += outs;
        }
        let params = params.unwrap_or(init);
        if params.len() != offset {
            return Err(Error::InvalidParameter(format!(
                "expected {offset} parameters, got {}",
                params.len()
            )));
        }
        let mut velocity = None;
        let mut pressure = None;
        for net in &nets {
            let o = net.first_output;
            match net.spec.outputs {
                OutputKind::VelocityPressure => {
                    velocity = Some(VelocityRepr::Direct { u1: o, u2: o + 1 });
                    pressure = Some(o + 2);
                }
                OutputKind::Velocity => velocity = Some(VelocityRepr::Direct { u1: o, u2: o + 1 }),
                OutputKind::Stream => velocity = Some(VelocityRepr::Stream { psi: o }),
                OutputKind::Pressure => pressure = Some(o),
            }
        }
        Ok(Self {
            kind,
            nets,
            params,
            layout: OutputLayout {
                n_outputs: first_output,
                velocity,
                pressure,
            },
        })
    }

    /// A single network. `Stream` outputs give a divergence-free model.
    pub fn new(spec: &FieldModelSpec) -> Result<Self> {
        let kind = if spec.outputs == OutputKind::Stream {
            ModelKind::DivergenceFree
        } else {
            ModelKind::Generic
        };
        Self::assemble(kind, std::slice::from_ref(spec), None)
    }

    /// Stream-function network plus an optional independent pressure network.
    pub fn divergence_free(stream: &FieldModelSpec, pressure: Option<&FieldModelSpec>) -> Result<Self> {
        let mut specs = vec![stream.with_outputs(OutputKind::Stream)];
        if let Some(p) = pressure {
            specs.push(p.with_outputs(OutputKind::Pressure));
        }
        Self::assemble(ModelKind::DivergenceFree, &specs, None)
    }

    /// Rebuilds a model from stored specs and parameters.
    pub fn from_parts(kind: ModelKind, specs: &[FieldModelSpec], params: Vec<f64>) -> Result<Self> {
        Self::assemble(kind, specs, Some(params))
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn specs(&self) -> Vec<FieldModelSpec> {
        self.nets.iter().map(|n| n.spec.clone()).collect()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    /// Sets every output layer to zero, so the model starts as `0`.
    pub fn zero_output_layers(&mut self) {
        for net in &self.nets {
            let r = net.mlp.output_layer();
            self.params[net.offset + r.start..net.offset + r.end].fill(0.0);
        }
    }
}

impl Field for FieldModel {
    type Tape = Vec<MlpTape>;

    fn layout(&self) -> OutputLayout {
        self.layout
    }

    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn forward(&self, x: Point, orders: &[usize]) -> (Vec<Jet>, Vec<MlpTape>) {
        let mut outputs = Vec::with_capacity(self.layout.n_outputs);
        let mut tapes = Vec::with_capacity(self.nets.len());
        for net in &self.nets {
            let n_out = net.mlp.n_outputs();
            let order = orders[net.first_output..net.first_output + n_out].iter().copied().max().unwrap_or(0);
            let params = &self.params[net.offset..net.offset + net.mlp.n_params()];
            let tape = net.mlp.forward(params, x, order);
            let len = n_coeffs(order);
            for o in 0..n_out {
                outputs.push(Jet::from_coeffs(order, tape.out[o * len..(o + 1) * len].to_vec()));
            }
            tapes.push(tape);
        }
        (outputs, tapes)
    }

    fn backward(&self, tapes: &Vec<MlpTape>, adjoints: &[Jet], grad: &mut [f64]) {
        for (net, tape) in self.nets.iter().zip(tapes) {
            let n_out = net.mlp.n_outputs();
            let len = n_coeffs(tape.order());
            let mut adj = vec![0.0; n_out * len];
            for o in 0..n_out {
                let a = adjoints[net.first_output + o].coeffs();
                let k = a.len().min(len);
                adj[o * len..o * len + k].copy_from_slice(&a[..k]);
            }
            let n = net.mlp.n_params();
            let params = &self.params[net.offset..net.offset + n];
            net.mlp.backward(params, tape, &adj, &mut grad[net.offset..net.offset + n]);
        }
    }
}

/// Parameter-free field backed by closures, e.g. a manufactured solution.
#[derive(Clone)]
pub struct ClosureField {
    layout: OutputLayout,
    outputs: Vec<ScalarField>,
}

fn component(field: &VectorField, comp: usize) -> ScalarField {
    let field = field.clone();
    std::sync::Arc::new(move |x, order| field(x, order)[comp].clone())
}

impl ClosureField {
    pub fn new(layout: OutputLayout, outputs: Vec<ScalarField>) -> Self {
        assert_eq!(layout.n_outputs, outputs.len());
        Self { layout, outputs }
    }

    /// Outputs `(u1, u2, p)`.
    pub fn velocity_pressure(exact: &ExactSolution) -> Self {
        Self::new(
            OutputLayout {
                n_outputs: 3,
                velocity: Some(VelocityRepr::Direct { u1: 0, u2: 1 }),
                pressure: Some(2),
            },
            vec![
                component(&exact.velocity, 0),
                component(&exact.velocity, 1),
                exact.pressure.clone(),
            ],
        )
    }

    /// Outputs `(u1, u2)`.
    pub fn velocity(exact: &ExactSolution) -> Self {
        Self::new(
            OutputLayout {
                n_outputs: 2,
                velocity: Some(VelocityRepr::Direct { u1: 0, u2: 1 }),
                pressure: None,
            },
            vec![component(&exact.velocity, 0), component(&exact.velocity, 1)],
        )
    }

    /// Outputs `(ψ, p)`, or just `ψ` without pressure.
    pub fn stream(exact: &ExactSolution, with_pressure: bool) -> Result<Self> {
        let psi = exact
            .stream
            .clone()
            .ok_or_else(|| Error::InvalidParameter("exact solution has no stream function".into()))?;
        let mut outputs = vec![psi];
        if with_pressure {
            outputs.push(exact.pressure.clone());
        }
        Ok(Self::new(
            OutputLayout {
                n_outputs: outputs.len(),
                velocity: Some(VelocityRepr::Stream { psi: 0 }),
                pressure: with_pressure.then_some(1),
            },
            outputs,
        ))
    }

    pub fn pressure(pressure: ScalarField) -> Self {
        Self::new(
            OutputLayout {
                n_outputs: 1,
                velocity: None,
                pressure: Some(0),
            },
            vec![pressure],
        )
    }

    /// A velocity-only field from an arbitrary vector closure.
    pub fn from_velocity(velocity: &VectorField) -> Self {
        Self::new(
            OutputLayout {
                n_outputs: 2,
                velocity: Some(VelocityRepr::Direct { u1: 0, u2: 1 }),
                pressure: None,
            },
            vec![component(velocity, 0), component(velocity, 1)],
        )
    }
}

impl Field for ClosureField {
    type Tape = ();

    fn layout(&self) -> OutputLayout {
        self.layout
    }

    fn forward(&self, x: Point, orders: &[usize]) -> (Vec<Jet>, ()) {
        let outs = self.outputs.iter().zip(orders).map(|(f, &o)| f(x, o)).collect();
        (outs, ())
    }
}

/// Velocity (and pressure, if present) at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValue {
    pub velocity: [f64; 2],
    pub pressure: Option<f64>,
}

/// Evaluates `functionals` at `x` with a single forward pass.
pub fn eval_functionals<F: Field>(model: &F, x: Point, functionals: &[&LinearFunctional]) -> Vec<f64> {
    let mut orders = vec![0; model.layout().n_outputs];
    for f in functionals {
        f.required_orders(&mut orders);
    }
    let outs = model.outputs(x, &orders);
    functionals.iter().map(|f| f.eval(&outs)).collect()
}

pub fn evaluate<F: Field>(model: &F, points: &[Point]) -> Result<Vec<FieldValue>> {
    let layout = model.layout();
    let [v1, v2] = operators::velocity_functionals(&layout, 0, 0)?;
    let p = layout.pressure.map(|_| operators::pressure_functional(&layout, 0, 0)).transpose()?;
    Ok(points
        .iter()
        .map(|&x| {
            let mut fs = vec![&v1, &v2];
            if let Some(p) = &p {
                fs.push(p);
            }
            let vals = eval_functionals(model, x, &fs);
            FieldValue {
                velocity: [vals[0], vals[1]],
                pressure: vals.get(2).copied(),
            }
        })
        .collect())
}

pub fn evaluate_pressure<F: Field>(model: &F, points: &[Point]) -> Result<Vec<f64>> {
    let p = operators::pressure_functional(&model.layout(), 0, 0)?;
    Ok(points.iter().map(|&x| eval_functionals(model, x, &[&p])[0]).collect())
}

/// `-nu Δv + (beta·∇)v + sigma v - f`, plus `∇q` when `include_pressure`.
pub fn momentum_residual<F: Field>(model: &F, case: &OseenCase, x: Point, include_pressure: bool) -> Result<[f64; 2]> {
    let [a, b] = operators::momentum_functionals(case, &model.layout(), x, include_pressure)?;
    let v = eval_functionals(model, x, &[&a, &b]);
    Ok([v[0], v[1]])
}

/// Scalar curl of the pressure-free momentum residual, from exact derivatives.
pub fn curl_residual<F: Field>(model: &F, case: &OseenCase, x: Point) -> Result<f64> {
    let c = operators::curl_functional(case, &model.layout(), x)?;
    Ok(eval_functionals(model, x, &[&c])[0])
}

pub fn divergence<F: Field>(model: &F, x: Point) -> Result<f64> {
    let d = operators::divergence_functional(&model.layout())?;
    Ok(eval_functionals(model, x, &[&d])[0])
}

/// `[[∂u1/∂x, ∂u1/∂y], [∂u2/∂x, ∂u2/∂y]]` at `x`.
pub fn velocity_gradient<F: Field>(model: &F, x: Point) -> Result<[[f64; 2]; 2]> {
    let layout = model.layout();
    let [a, b] = operators::velocity_functionals(&layout, 1, 0)?;
    let [c, d] = operators::velocity_functionals(&layout, 0, 1)?;
    let v = eval_functionals(model, x, &[&a, &b, &c, &d]);
    Ok([[v[0], v[2]], [v[1], v[3]]])
}

pub fn pressure_gradient<F: Field>(model: &F, x: Point) -> Result<[f64; 2]> {
    let layout = model.layout();
    let a = operators::pressure_functional(&layout, 1, 0)?;
    let b = operators::pressure_functional(&layout, 0, 1)?;
    let v = eval_functionals(model, x, &[&a, &b]);
    Ok([v[0], v[1]])
}
