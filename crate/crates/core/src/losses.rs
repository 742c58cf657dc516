//! Discrete loss functionals.
//!
//! Plain PINN losses use mean squares everywhere. The consistent (CPINN)
//! variants replace the interior mean square by the collocation `L^γ`
//! norm `[(1/m̃) Σ |r|^γ]^{2/γ}` and add the discrete `H^{1/2}` boundary
//! double sum. Three families share this machinery:
//!
//! * primal: velocity and pressure networks, momentum + divergence + boundary;
//! * divergence-free: stream-function velocity, momentum + boundary;
//! * pressure-robust: velocity only, the curl of the pressure-free momentum
//!   residual + boundary. Gradient forcings drop out of this residual.
//!
//! [`Objective`] precomputes the residual functionals of a case on a
//! collocation set and evaluates the loss and its parameter gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::operators::{self, LinearFunctional};
use crate::fields::{Field, OutputKind, OutputLayout};
use crate::jet::Jet;
use crate::problem::{OseenCase, Point};
use crate::sampling::CollocationSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    PinnPrimal,
    CpinnPrimal,
    PinnDivfree,
    CpinnDivfree,
    PinnPr,
    CpinnPr,
    CpinnPrUnconstrained,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Primal,
    DivergenceFree,
    PressureRobust,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Pinn,
    Cpinn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pinn => "PINN",
            Method::Cpinn => "CPINN",
        }
    }
}

impl Formulation {
    pub const ALL: [Formulation; 7] = [
        Formulation::PinnPrimal,
        Formulation::CpinnPrimal,
        Formulation::PinnDivfree,
        Formulation::CpinnDivfree,
        Formulation::PinnPr,
        Formulation::CpinnPr,
        Formulation::CpinnPrUnconstrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::PinnPrimal => "pinn_primal",
            Formulation::CpinnPrimal => "cpinn_primal",
            Formulation::PinnDivfree => "pinn_divfree",
            Formulation::CpinnDivfree => "cpinn_divfree",
            Formulation::PinnPr => "pinn_pr",
            Formulation::CpinnPr => "cpinn_pr",
            Formulation::CpinnPrUnconstrained => "cpinn_pr_unconstrained",
        }
    }

    pub fn is_consistent(self) -> bool {
        self.method() == Method::Cpinn
    }

    pub fn method(self) -> Method {
        match self {
            Formulation::PinnPrimal | Formulation::PinnDivfree | Formulation::PinnPr => Method::Pinn,
            _ => Method::Cpinn,
        }
    }

    pub fn family(self) -> Family {
        match self {
            Formulation::PinnPrimal | Formulation::CpinnPrimal => Family::Primal,
            Formulation::PinnDivfree | Formulation::CpinnDivfree => Family::DivergenceFree,
            _ => Family::PressureRobust,
        }
    }

    /// Network outputs the formulation trains: the first entry is the
    /// velocity network, the optional second one a separate pressure network.
    pub fn architecture(self) -> (OutputKind, Option<OutputKind>) {
        match self {
            Formulation::PinnPrimal | Formulation::CpinnPrimal => (OutputKind::VelocityPressure, None),
            Formulation::PinnDivfree | Formulation::CpinnDivfree => (OutputKind::Stream, Some(OutputKind::Pressure)),
            Formulation::PinnPr | Formulation::CpinnPr => (OutputKind::Stream, None),
            Formulation::CpinnPrUnconstrained => (OutputKind::Velocity, None),
        }
    }

    pub(crate) fn code(self) -> u8 {
        Formulation::ALL.iter().position(|&f| f == self).unwrap() as u8
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Formulation::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("unknown formulation code {code}")))
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Formulation::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "formulation",
                name: s.to_string(),
            })
    }
}

/// Smallest `γ` with `L^γ ⊂ H^{-1}` in dimension `d`: `1/γ = 1/2 + 1/d`, clamped to `[1, 2]`.
pub fn default_gamma(d: usize) -> f64 {
    (2.0 * d as f64 / (d as f64 + 2.0)).clamp(1.0, 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermWeights {
    pub interior: f64,
    pub divergence: f64,
    pub boundary_l2: f64,
    pub boundary_gagliardo: f64,
    pub pressure_mean: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self {
            interior: 1.0,
            divergence: 1.0,
            boundary_l2: 1.0,
            boundary_gagliardo: 1.0,
            pressure_mean: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub formulation: Formulation,
    pub gamma: f64,
    pub tau: f64,
    pub include_div_penalty: bool,
    pub weights: TermWeights,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::new(Formulation::CpinnPrimal)
    }
}

impl LossConfig {
    pub fn new(formulation: Formulation) -> Self {
        Self {
            formulation,
            gamma: default_gamma(2),
            tau: 2.0,
            include_div_penalty: formulation == Formulation::CpinnPrUnconstrained,
            weights: TermWeights::default(),
        }
    }

    pub fn with_formulation(&self, formulation: Formulation) -> Self {
        Self {
            formulation,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [1, 2], got {}", self.gamma)));
        }
        if !(self.tau > 1.0 && self.tau <= 2.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (1, 2], got {}", self.tau)));
        }
        let w = &self.weights;
        for (name, v) in [
            ("interior", w.interior),
            ("divergence", w.divergence),
            ("boundary_l2", w.boundary_l2),
            ("boundary_gagliardo", w.boundary_gagliardo),
            ("pressure_mean", w.pressure_mean),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight {name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Whether the divergence term enters the total.
    pub fn divergence_in_total(&self) -> bool {
        match self.formulation.family() {
            Family::Primal => true,
            Family::DivergenceFree => false,
            Family::PressureRobust => {
                self.include_div_penalty || self.formulation == Formulation::CpinnPrUnconstrained
            }
        }
    }
}

/// Total loss and its unweighted parts.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub interior_residual_term: f64,
    pub divergence_term: f64,
    pub boundary_l2_term: f64,
    pub boundary_gagliardo_term: f64,
    pub pressure_term: Option<f64>,
}

/// `Σ_l [(1/m̃) Σ_i |r_l(x_i)|^γ]^{2/γ}` and its derivative with respect to each value.
fn lgamma_with_grad(values: &[Vec<f64>], gamma: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(values.len());
    for comp in values {
        if comp.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let m = comp.len() as f64;
        if gamma == 2.0 {
            let s = comp.iter().map(|r| r * r).sum::<f64>() / m;
            total += s;
            grads.push(comp.iter().map(|r| 2.0 * r / m).collect());
        } else {
            let s = comp.iter().map(|r| r.abs().powf(gamma)).sum::<f64>() / m;
            total += s.powf(2.0 / gamma);
            let outer = 2.0 / m * s.powf(2.0 / gamma - 1.0);
            grads.push(
                comp.iter()
                    .map(|&r| if r == 0.0 { 0.0 } else { outer * r.abs().powf(gamma - 1.0) * r.signum() })
                    .collect(),
            );
        }
    }
    Ok((total, grads))
}

/// Collocation `L^γ` term of the consistent loss.
pub fn discrete_lgamma_term(values: &[Vec<f64>], gamma: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [1, 2], got {gamma}")));
    }
    lgamma_with_grad(values, gamma).map(|(t, _)| t)
}

fn check_dist(dist: &[f64], m: usize) -> Result<()> {
    if dist.len() != m * m {
        return Err(Error::InvalidParameter(format!(
            "distance matrix has {} entries, expected {}",
            dist.len(),
            m * m
        )));
    }
    for i in 0..m {
        for j in 0..m {
            if i != j && dist[i * m + j] <= 0.0 {
                return Err(Error::CoincidentPoints(i.min(j), i.max(j)));
            }
        }
    }
    Ok(())
}

/// `(L², Gagliardo)` parts of the discrete `H^{1/2}` boundary norm and
/// their derivatives with respect to each error value.
#[allow(clippy::type_complexity)]
fn h12_with_grad(errors: &[Vec<f64>], dist: &[f64]) -> Result<((f64, f64), (Vec<Vec<f64>>, Vec<Vec<f64>>))> {
    let m = errors.first().map_or(0, Vec::len);
    if m == 0 {
        return Err(Error::EmptyPointSet);
    }
    let mf = m as f64;
    let (mut l2, mut gag) = (0.0, 0.0);
    let mut g_l2 = Vec::new();
    let mut g_gag = Vec::new();
    for e in errors {
        l2 += e.iter().map(|v| v * v).sum::<f64>() / mf;
        g_l2.push(e.iter().map(|v| 2.0 * v / mf).collect());
        let mut s = 0.0;
        let mut g = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let d = dist[i * m + j];
                // kernel |z_i - z_j|^d with d = 2
                let w = 1.0 / (d * d);
                let diff = e[i] - e[j];
                s += diff * diff * w;
                g[i] += 4.0 * diff * w / (mf * mf);
            }
        }
        gag += s / (mf * mf);
        g_gag.push(g);
    }
    Ok(((l2, gag), (g_l2, g_gag)))
}

/// `(1/m̄) Σ_l Σ_j |e_l(z_j)|² + (1/m̄²) Σ_l Σ_{i≠j} |e_l(z_i) - e_l(z_j)|² / |z_i - z_j|²`.
///
/// `errors[l][j]` is component `l` at boundary point `j`; `dist` is the
/// row-major distance matrix of the boundary points.
pub fn discrete_h12_error(errors: &[Vec<f64>], dist: &[f64]) -> Result<f64> {
    let m = errors.first().map_or(0, Vec::len);
    check_dist(dist, m)?;
    h12_with_grad(errors, dist).map(|((a, b), _)| a + b)
}

struct InteriorRows {
    x: Point,
    residual: Vec<LinearFunctional>,
    divergence: LinearFunctional,
}

struct BoundaryRows {
    z: Point,
    velocity: [LinearFunctional; 2],
    g: [f64; 2],
}

/// A loss functional bound to a case, a collocation set and an output layout.
pub struct Objective {
    config: LossConfig,
    layout: OutputLayout,
    interior: Vec<InteriorRows>,
    boundary: Vec<BoundaryRows>,
    dist: Vec<f64>,
    interior_orders: Vec<usize>,
    boundary_orders: Vec<usize>,
}

impl Objective {
    pub fn new(case: &OseenCase, colloc: &CollocationSet, config: &LossConfig, layout: OutputLayout) -> Result<Self> {
        config.validate()?;
        if colloc.n_interior() == 0 || colloc.n_boundary() == 0 {
            return Err(Error::EmptyPointSet);
        }
        let family = config.formulation.family();
        if family == Family::DivergenceFree {
            if !layout.is_divergence_free() {
                return Err(Error::RequiresDivergenceFree("divergence-free loss"));
            }
            layout.pressure.ok_or(Error::MissingPressure)?;
        }
        let divergence = operators::divergence_functional(&layout)?;
        let mut interior_orders = vec![0; layout.n_outputs];
        let interior = colloc
            .interior
            .iter()
            .map(|&x| {
                let residual = match family {
                    Family::Primal | Family::DivergenceFree => {
                        operators::momentum_functionals(case, &layout, x, true)?.to_vec()
                    }
                    Family::PressureRobust => vec![operators::curl_functional(case, &layout, x)?],
                };
                for r in &residual {
                    r.required_orders(&mut interior_orders);
                }
                Ok(InteriorRows {
                    x,
                    residual,
                    divergence: divergence.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        divergence.required_orders(&mut interior_orders);
        let velocity = operators::velocity_functionals(&layout, 0, 0)?;
        let mut boundary_orders = vec![0; layout.n_outputs];
        for v in &velocity {
            v.required_orders(&mut boundary_orders);
        }
        let boundary = colloc
            .boundary
            .iter()
            .map(|&z| BoundaryRows {
                z,
                velocity: velocity.clone(),
                g: case.boundary_at(z),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            interior,
            boundary,
            dist: colloc.boundary_dist_matrix().to_vec(),
            interior_orders,
            boundary_orders,
        })
    }

    pub fn config(&self) -> &LossConfig {
        &self.config
    }

    pub fn layout(&self) -> OutputLayout {
        self.layout
    }

    pub fn evaluate<F: Field>(&self, model: &F) -> Result<LossBreakdown> {
        self.run(model, false).map(|(b, _)| b)
    }

    pub fn value_and_grad<F: Field>(&self, model: &F) -> Result<(LossBreakdown, Vec<f64>)> {
        self.run(model, true)
    }

    fn check_layout<F: Field>(&self, model: &F) -> Result<()> {
        if model.layout() != self.layout {
            return Err(Error::InvalidParameter("model layout differs from the objective's layout".into()));
        }
        Ok(())
    }

    fn run<F: Field>(&self, model: &F, want_grad: bool) -> Result<(LossBreakdown, Vec<f64>)> {
        self.check_layout(model)?;
        let cfg = &self.config;
        let w = &cfg.weights;
        let consistent = cfg.formulation.is_consistent();
        let div_in_total = cfg.divergence_in_total();
        let m = self.interior.len();
        let n_res = self.interior[0].residual.len();

        let mut res_vals = vec![Vec::with_capacity(m); n_res];
        let mut div_vals = Vec::with_capacity(m);
        let mut tapes = Vec::new();
        let mut outs_cache = Vec::new();
        for row in &self.interior {
            let (outs, tape) = model.forward(row.x, &self.interior_orders);
            for (vals, r) in res_vals.iter_mut().zip(&row.residual) {
                vals.push(r.eval(&outs));
            }
            div_vals.push(row.divergence.eval(&outs));
            if want_grad {
                tapes.push(tape);
                outs_cache.push(outs);
            }
        }
        let gamma = if consistent { cfg.gamma } else { 2.0 };
        let (interior_term, interior_grad) = lgamma_with_grad(&res_vals, gamma)?;
        let mf = m as f64;
        let divergence_term = div_vals.iter().map(|d| d * d).sum::<f64>() / mf;

        let mb = self.boundary.len();
        let mut errors = [Vec::with_capacity(mb), Vec::with_capacity(mb)];
        let mut b_tapes = Vec::new();
        let mut b_outs = Vec::new();
        for row in &self.boundary {
            let (outs, tape) = model.forward(row.z, &self.boundary_orders);
            for l in 0..2 {
                errors[l].push(row.g[l] - row.velocity[l].eval(&outs));
            }
            if want_grad {
                b_tapes.push(tape);
                b_outs.push(outs);
            }
        }
        let ((boundary_l2_term, gag), (g_l2, g_gag)) = h12_with_grad(&errors, &self.dist)?;
        let boundary_gagliardo_term = if consistent { gag } else { 0.0 };

        let mut total = w.interior * interior_term;
        if div_in_total {
            total += w.divergence * divergence_term;
        }
        total += w.boundary_l2 * boundary_l2_term;
        if consistent {
            total += w.boundary_gagliardo * boundary_gagliardo_term;
        }
        let breakdown = LossBreakdown {
            total,
            interior_residual_term: interior_term,
            divergence_term,
            boundary_l2_term,
            boundary_gagliardo_term,
            pressure_term: None,
        };
        if !want_grad {
            return Ok((breakdown, Vec::new()));
        }

        let mut grad = vec![0.0; model.n_params()];
        let div_weight = if div_in_total { w.divergence } else { 0.0 };
        for (i, row) in self.interior.iter().enumerate() {
            let mut adj: Vec<Jet> = outs_cache[i].iter().map(|j| Jet::zeros(j.order())).collect();
            for (l, r) in row.residual.iter().enumerate() {
                r.scatter(w.interior * interior_grad[l][i], &mut adj);
            }
            if div_weight != 0.0 {
                row.divergence.scatter(div_weight * 2.0 * div_vals[i] / mf, &mut adj);
            }
            model.backward(&tapes[i], &adj, &mut grad);
        }
        for (j, row) in self.boundary.iter().enumerate() {
            let mut adj: Vec<Jet> = b_outs[j].iter().map(|o| Jet::zeros(o.order())).collect();
            for l in 0..2 {
                let mut de = w.boundary_l2 * g_l2[l][j];
                if consistent {
                    de += w.boundary_gagliardo * g_gag[l][j];
                }
                // e = g - v
                row.velocity[l].scatter(-de, &mut adj);
            }
            model.backward(&b_tapes[j], &adj, &mut grad);
        }
        Ok((breakdown, grad))
    }
}

/// Plain least-squares loss `L` of the primal formulation.
pub fn pinn_loss<F: Field>(model: &F, case: &OseenCase, colloc: &CollocationSet) -> Result<LossBreakdown> {
    Objective::new(case, colloc, &LossConfig::new(Formulation::PinnPrimal), model.layout())?.evaluate(model)
}

/// Consistent loss `L*` of the primal formulation.
pub fn cpinn_loss<F: Field>(
    model: &F,
    case: &OseenCase,
    colloc: &CollocationSet,
    config: &LossConfig,
) -> Result<LossBreakdown> {
    let config = config.with_formulation(Formulation::CpinnPrimal);
    Objective::new(case, colloc, &config, model.layout())?.evaluate(model)
}

/// Loss of the divergence-free formulation; the divergence is reported but not summed.
pub fn divfree_loss<F: Field>(
    model: &F,
    case: &OseenCase,
    colloc: &CollocationSet,
    config: &LossConfig,
    consistent: bool,
) -> Result<LossBreakdown> {
    let formulation = if consistent {
        Formulation::CpinnDivfree
    } else {
        Formulation::PinnDivfree
    };
    Objective::new(case, colloc, &config.with_formulation(formulation), model.layout())?.evaluate(model)
}

/// Pressure-robust loss built on the curl of the momentum residual.
pub fn pr_loss<F: Field>(
    model: &F,
    case: &OseenCase,
    colloc: &CollocationSet,
    config: &LossConfig,
    consistent: bool,
) -> Result<LossBreakdown> {
    let formulation = match (consistent, config.formulation) {
        (true, Formulation::CpinnPrUnconstrained) => Formulation::CpinnPrUnconstrained,
        (true, _) => Formulation::CpinnPr,
        (false, _) => Formulation::PinnPr,
    };
    Objective::new(case, colloc, &config.with_formulation(formulation), model.layout())?.evaluate(model)
}

/// `f̄ = f - (-nu Δu + (beta·∇)u + sigma u)` evaluated with a velocity model.
pub fn modified_forcing<F: Field>(velocity_model: &F, case: &OseenCase, points: &[Point]) -> Result<Vec<[f64; 2]>> {
    points
        .iter()
        .map(|&x| {
            let r = crate::fields::momentum_residual(velocity_model, case, x, false)?;
            Ok([-r[0], -r[1]])
        })
        .collect()
}

/// Pressure recovery loss `[(1/m̃) Σ |∇q(x_i) - f̄_i|^τ]^{2/τ}` plus a
/// penalty on the squared discrete mean of `q`.
pub struct PressureObjective {
    points: Vec<Point>,
    fbar: Vec<[f64; 2]>,
    tau: f64,
    mean_weight: f64,
    gradient_weight: f64,
    layout: OutputLayout,
    grad_functionals: [LinearFunctional; 2],
    value_functional: LinearFunctional,
    orders: Vec<usize>,
}

impl PressureObjective {
    pub fn new(points: Vec<Point>, fbar: Vec<[f64; 2]>, config: &LossConfig, layout: OutputLayout) -> Result<Self> {
        if !(config.tau > 1.0 && config.tau <= 2.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (1, 2], got {}", config.tau)));
        }
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if points.len() != fbar.len() {
            return Err(Error::InvalidParameter("fbar and points differ in length".into()));
        }
        let grad_functionals = [
            operators::pressure_functional(&layout, 1, 0)?,
            operators::pressure_functional(&layout, 0, 1)?,
        ];
        let value_functional = operators::pressure_functional(&layout, 0, 0)?;
        let mut orders = vec![0; layout.n_outputs];
        for f in &grad_functionals {
            f.required_orders(&mut orders);
        }
        Ok(Self {
            points,
            fbar,
            tau: config.tau,
            mean_weight: config.weights.pressure_mean,
            gradient_weight: config.weights.interior,
            layout,
            grad_functionals,
            value_functional,
            orders,
        })
    }

    pub fn evaluate<F: Field>(&self, model: &F) -> Result<LossBreakdown> {
        self.run(model, false).map(|(b, _)| b)
    }

    pub fn value_and_grad<F: Field>(&self, model: &F) -> Result<(LossBreakdown, Vec<f64>)> {
        self.run(model, true)
    }

    fn run<F: Field>(&self, model: &F, want_grad: bool) -> Result<(LossBreakdown, Vec<f64>)> {
        if model.layout() != self.layout {
            return Err(Error::InvalidParameter("model layout differs from the objective's layout".into()));
        }
        let m = self.points.len() as f64;
        let mut mismatch = Vec::with_capacity(self.points.len());
        let mut values = Vec::with_capacity(self.points.len());
        let mut cache = Vec::new();
        for (x, fb) in self.points.iter().zip(&self.fbar) {
            let (outs, tape) = model.forward(*x, &self.orders);
            let r = [
                self.grad_functionals[0].eval(&outs) - fb[0],
                self.grad_functionals[1].eval(&outs) - fb[1],
            ];
            mismatch.push(r);
            values.push(self.value_functional.eval(&outs));
            if want_grad {
                cache.push((outs, tape));
            }
        }
        let norms: Vec<f64> = mismatch.iter().map(|r| r[0].hypot(r[1])).collect();
        let tau = self.tau;
        let s = if tau == 2.0 {
            mismatch.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum::<f64>() / m
        } else {
            norms.iter().map(|n| n.powf(tau)).sum::<f64>() / m
        };
        let gradient_term = s.powf(2.0 / tau);
        let mean = values.iter().sum::<f64>() / m;
        let mean_term = mean * mean;
        let breakdown = LossBreakdown {
            total: self.gradient_weight * gradient_term + self.mean_weight * mean_term,
            interior_residual_term: gradient_term,
            pressure_term: Some(mean_term),
            ..Default::default()
        };
        if !want_grad {
            return Ok((breakdown, Vec::new()));
        }
        let mut grad = vec![0.0; model.n_params()];
        let outer = 2.0 / m * s.powf(2.0 / tau - 1.0);
        for (i, (outs, tape)) in cache.iter().enumerate() {
            let mut adj: Vec<Jet> = outs.iter().map(|o| Jet::zeros(o.order())).collect();
            let scale = if norms[i] == 0.0 {
                0.0
            } else {
                outer * norms[i].powf(tau - 2.0)
            };
            for l in 0..2 {
                self.grad_functionals[l].scatter(self.gradient_weight * scale * mismatch[i][l], &mut adj);
            }
            self.value_functional.scatter(self.mean_weight * 2.0 * mean / m, &mut adj);
            model.backward(tape, &adj, &mut grad);
        }
        Ok((breakdown, grad))
    }
}

/// Scalar pressure recovery loss.
pub fn pressure_loss<F: Field>(
    pressure_model: &F,
    points: &[Point],
    fbar: &[[f64; 2]],
    config: &LossConfig,
) -> Result<f64> {
    PressureObjective::new(points.to_vec(), fbar.to_vec(), config, pressure_model.layout())?
        .evaluate(pressure_model)
        .map(|b| b.total)
}
