//! Oseen problem instances on the unit square.
//!
//! Every field (coefficients, forcing, boundary data, manufactured
//! solutions) is a closure `(point, order) -> Jet`, returning the exact
//! Taylor expansion to the requested order. Residual operators downstream
//! read any derivative they need from these jets.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;

pub type Point = [f64; 2];

/// Scalar field on the closed unit square, expanded to a requested order.
pub type ScalarField = Arc<dyn Fn(Point, usize) -> Jet + Send + Sync>;
/// Vector field on the closed unit square, expanded to a requested order.
pub type VectorField = Arc<dyn Fn(Point, usize) -> [Jet; 2] + Send + Sync>;

pub fn constant_scalar(value: f64) -> ScalarField {
    Arc::new(move |_, order| Jet::constant(order, value))
}

pub fn constant_vector(value: [f64; 2]) -> VectorField {
    Arc::new(move |_, order| [Jet::constant(order, value[0]), Jet::constant(order, value[1])])
}

pub fn zero_vector() -> VectorField {
    constant_vector([0.0, 0.0])
}

/// Evaluates a vector field at a point (order 0).
pub fn eval_vector(field: &VectorField, x: Point) -> [f64; 2] {
    let [a, b] = field(x, 0);
    [a.value(), b.value()]
}

/// Viscosity `nu`, convection `beta` and reaction `sigma`.
#[derive(Clone)]
pub struct OseenCoefficients {
    pub nu: ScalarField,
    pub beta: VectorField,
    pub sigma: ScalarField,
}

/// Sampled coefficient bounds: `nu` range and `kappa = min(sigma - div(beta)/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientBounds {
    pub nu_min: f64,
    pub nu_max: f64,
    pub kappa: f64,
}

impl CoefficientBounds {
    /// Strict coercivity: `nu > 0` and `sigma - div(beta)/2 >= kappa > 0`.
    pub fn is_coercive(&self) -> bool {
        self.nu_min > 0.0 && self.kappa > 0.0
    }
}

impl OseenCoefficients {
    pub fn constant(nu: f64, beta: [f64; 2], sigma: f64) -> Self {
        Self {
            nu: constant_scalar(nu),
            beta: constant_vector(beta),
            sigma: constant_scalar(sigma),
        }
    }

    pub fn bounds(&self, points: &[Point]) -> Result<CoefficientBounds> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let mut bounds = CoefficientBounds {
            nu_min: f64::INFINITY,
            nu_max: f64::NEG_INFINITY,
            kappa: f64::INFINITY,
        };
        for &x in points {
            let nu = (self.nu)(x, 0).value();
            let [b1, b2] = (self.beta)(x, 1);
            let div_beta = b1.derivative(1, 0) + b2.derivative(0, 1);
            let sigma = (self.sigma)(x, 0).value();
            bounds.nu_min = bounds.nu_min.min(nu);
            bounds.nu_max = bounds.nu_max.max(nu);
            bounds.kappa = bounds.kappa.min(sigma - 0.5 * div_beta);
        }
        Ok(bounds)
    }
}

/// Manufactured solution with optional stream function and Helmholtz-Hodge split of the forcing.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: VectorField,
    pub pressure: ScalarField,
    pub stream: Option<ScalarField>,
    pub helmholtz_grad_part: Option<VectorField>,
    pub helmholtz_divfree_part: Option<VectorField>,
}

#[derive(Clone)]
pub struct OseenCase {
    pub label: String,
    pub coeffs: OseenCoefficients,
    pub forcing: VectorField,
    pub boundary_data: VectorField,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for OseenCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OseenCase")
            .field("label", &self.label)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl OseenCase {
    pub fn forcing_at(&self, x: Point) -> [f64; 2] {
        eval_vector(&self.forcing, x)
    }

    pub fn boundary_at(&self, z: Point) -> [f64; 2] {
        eval_vector(&self.boundary_data, z)
    }

    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::MissingExactSolution(self.label.clone()))
    }
}

fn require(name: &'static str, jet: &Jet, needed: usize) -> Result<()> {
    if jet.order() < needed {
        return Err(Error::NotDifferentiable {
            name,
            got: jet.order(),
            needed,
        });
    }
    Ok(())
}

/// `-nu Δu + (beta·∇)u + sigma u`, expanded to `order`.
///
/// `velocity` must be expanded to at least `order + 2`.
pub fn oseen_operator_jet(
    coeffs: &OseenCoefficients,
    velocity: &[Jet; 2],
    x: Point,
    order: usize,
) -> Result<[Jet; 2]> {
    for v in velocity {
        require("velocity", v, order + 2)?;
    }
    let nu = (coeffs.nu)(x, order);
    let [b1, b2] = (coeffs.beta)(x, order);
    let sigma = (coeffs.sigma)(x, order);
    require("nu", &nu, order)?;
    require("sigma", &sigma, order)?;
    let apply = |v: &Jet| {
        let lap = &v.dx().dx() + &v.dy().dy();
        let conv = &(&b1 * &v.dx()) + &(&b2 * &v.dy());
        &(&(-&(&nu * &lap)) + &conv) + &(&sigma * v)
    };
    Ok([apply(&velocity[0]), apply(&velocity[1])])
}

/// Forcing `f = -nu Δu + (beta·∇)u + ∇p + sigma u` of an exact solution at `x`.
pub fn synthesize_forcing(exact: &ExactSolution, coeffs: &OseenCoefficients, x: Point) -> Result<[f64; 2]> {
    let f = synthesize_forcing_jet(exact, coeffs, x, 0)?;
    Ok([f[0].value(), f[1].value()])
}

/// Jet version of [`synthesize_forcing`], exact to `order`.
pub fn synthesize_forcing_jet(
    exact: &ExactSolution,
    coeffs: &OseenCoefficients,
    x: Point,
    order: usize,
) -> Result<[Jet; 2]> {
    let u = (exact.velocity)(x, order + 2);
    let p = (exact.pressure)(x, order + 1);
    require("pressure", &p, order + 1)?;
    let [a, b] = oseen_operator_jet(coeffs, &u, x, order)?;
    Ok([&a + &p.dx(), &b + &p.dy()])
}

/// Wraps [`synthesize_forcing_jet`] as a field closure.
pub fn synthesized_forcing_field(exact: &ExactSolution, coeffs: &OseenCoefficients) -> VectorField {
    let exact = exact.clone();
    let coeffs = coeffs.clone();
    Arc::new(move |x, order| {
        synthesize_forcing_jet(&exact, &coeffs, x, order).expect("manufactured closures expand to any order")
    })
}

/// Velocity `(∂ψ/∂y, -∂ψ/∂x)` of a stream function.
pub fn velocity_from_stream(stream: ScalarField) -> VectorField {
    Arc::new(move |x, order| {
        let psi = stream(x, order + 1);
        [psi.dy(), -psi.dx()]
    })
}

pub fn gradient_field(potential: ScalarField) -> VectorField {
    Arc::new(move |x, order| {
        let phi = potential(x, order + 1);
        [phi.dx(), phi.dy()]
    })
}

/// Smooth manufactured solution: `ψ = sin²(x) sin(y) cos(y)`,
/// `p = sin(πx) cos(πy)`, `nu = 1`, `beta = (1, 1)`, `sigma = 1`.
pub fn make_example1() -> OseenCase {
    let coeffs = OseenCoefficients::constant(1.0, [1.0, 1.0], 1.0);
    let stream: ScalarField = Arc::new(|p, order| {
        let (x, y) = Jet::vars(order, p);
        let sx = x.sin();
        &(&(&sx * &sx) * &y.sin()) * &y.cos()
    });
    let pressure: ScalarField = Arc::new(|p, order| {
        let (x, y) = Jet::vars(order, p);
        &x.scale(PI).sin() * &y.scale(PI).cos()
    });
    let velocity = velocity_from_stream(stream.clone());
    let grad_part = gradient_field(pressure.clone());
    let mut exact = ExactSolution {
        velocity: velocity.clone(),
        pressure,
        stream: Some(stream),
        helmholtz_grad_part: Some(grad_part.clone()),
        helmholtz_divfree_part: None,
    };
    let forcing = synthesized_forcing_field(&exact, &coeffs);
    let f = forcing.clone();
    let divfree: VectorField = Arc::new(move |x, order| {
        let [f1, f2] = f(x, order);
        let [g1, g2] = grad_part(x, order);
        [&f1 - &g1, &f2 - &g2]
    });
    exact.helmholtz_divfree_part = Some(divfree);
    OseenCase {
        label: "example1".into(),
        coeffs,
        forcing,
        boundary_data: velocity,
        exact: Some(exact),
    }
}

/// No-flow benchmark: `f = (0, Ra(1 - y + 3y²))` is a pure gradient, so `u ≡ 0`
/// and `p = Ra(y³ - y²/2 + y - 7/12)`.
pub fn make_example2(ra: f64) -> Result<OseenCase> {
    if !(ra > 0.0 && ra.is_finite()) {
        return Err(Error::InvalidParameter(format!("Ra must be positive, got {ra}")));
    }
    let coeffs = OseenCoefficients::constant(1.0, [1.0, 1.0], 0.0);
    let forcing: VectorField = Arc::new(move |p, order| {
        let y = Jet::var_y(order, p[1]);
        let poly = (&(&y * &y).scale(3.0) - &y) + 1.0;
        [Jet::zeros(order), poly.scale(ra)]
    });
    let pressure: ScalarField = Arc::new(move |p, order| {
        let y = Jet::var_y(order, p[1]);
        let y2 = &y * &y;
        let poly = &(&(&y2 * &y) - &y2.scale(0.5)) + &y;
        (poly - 7.0 / 12.0).scale(ra)
    });
    let exact = ExactSolution {
        velocity: zero_vector(),
        pressure,
        stream: Some(constant_scalar(0.0)),
        helmholtz_grad_part: Some(forcing.clone()),
        helmholtz_divfree_part: Some(zero_vector()),
    };
    Ok(OseenCase {
        label: "example2".into(),
        coeffs,
        forcing,
        boundary_data: zero_vector(),
        exact: Some(exact),
    })
}

/// Looks up a benchmark case by name. `ra` is required for `example2`.
pub fn case_by_name(name: &str, ra: Option<f64>) -> Result<OseenCase> {
    match name {
        "example1" => Ok(make_example1()),
        "example2" => make_example2(ra.unwrap_or(1.0)),
        other => Err(Error::Unknown {
            kind: "case",
            name: other.to_string(),
        }),
    }
}

/// The analytic split `f = ∇φ + P(f)` attached to a case.
pub fn helmholtz_parts(case: &OseenCase) -> Result<(VectorField, VectorField)> {
    let missing = || Error::NoHelmholtzSplit(case.label.clone());
    let exact = case.exact.as_ref().ok_or_else(missing)?;
    match (&exact.helmholtz_grad_part, &exact.helmholtz_divfree_part) {
        (Some(g), Some(d)) => Ok((g.clone(), d.clone())),
        _ => Err(missing()),
    }
}
