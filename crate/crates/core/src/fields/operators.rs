//! Differential operators as linear functionals on output jets.
//!
//! Every residual in the Oseen losses is affine in the model outputs'
//! spatial derivatives once the point is fixed. A [`LinearFunctional`]
//! stores that affine map as `(output, monomial, weight)` entries, so the
//! same object evaluates the residual and scatters its adjoint.

use crate::error::{Error, Result};
use crate::jet::{factorial, index, Jet};
use crate::problem::{OseenCase, Point};

use super::{OutputLayout, VelocityRepr};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearFunctional {
    entries: Vec<(usize, usize, f64)>,
    constant: f64,
}

impl LinearFunctional {
    pub fn eval(&self, outputs: &[Jet]) -> f64 {
        self.entries
            .iter()
            .fold(self.constant, |acc, &(o, c, w)| acc + w * outputs[o].coeffs()[c])
    }

    /// Adds `weight · ∂(self)/∂(output coefficients)` into `adjoints`.
    pub fn scatter(&self, weight: f64, adjoints: &mut [Jet]) {
        for &(o, c, w) in &self.entries {
            adjoints[o].coeffs_mut()[c] += weight * w;
        }
    }

    /// Raises `orders[o]` to the highest derivative order used on output `o`.
    pub fn required_orders(&self, orders: &mut [usize]) {
        for &(o, c, _) in &self.entries {
            let (a, b) = crate::jet::monomial(c);
            orders[o] = orders[o].max(a + b);
        }
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }
}

#[derive(Clone, Debug)]
struct Term {
    output: usize,
    a: usize,
    b: usize,
    coef: Jet,
}

/// `Σ coef(x) ∂^{a+b} out / ∂x^a ∂y^b + constant(x)` with jet coefficients,
/// so the whole expression can be differentiated in space.
#[derive(Clone, Debug)]
pub struct DiffExpr {
    terms: Vec<Term>,
    constant: Jet,
}

impl DiffExpr {
    pub fn new(constant: Jet) -> Self {
        Self {
            terms: Vec::new(),
            constant,
        }
    }

    pub fn push(&mut self, output: usize, a: usize, b: usize, coef: Jet) {
        self.terms.push(Term { output, a, b, coef });
    }

    /// Adds `coef · ∂^{a+b} v_comp` for velocity component `comp`.
    pub fn push_velocity(&mut self, repr: VelocityRepr, comp: usize, a: usize, b: usize, coef: Jet) {
        match repr {
            VelocityRepr::Direct { u1, u2 } => self.push([u1, u2][comp], a, b, coef),
            VelocityRepr::Stream { psi } => {
                if comp == 0 {
                    self.push(psi, a, b + 1, coef);
                } else {
                    self.push(psi, a + 1, b, -coef);
                }
            }
        }
    }

    fn differentiate(&self, dx: bool) -> Self {
        let d = |j: &Jet| if dx { j.dx() } else { j.dy() };
        let mut out = Self::new(d(&self.constant));
        for t in &self.terms {
            let coef = d(&t.coef);
            if coef.coeffs().iter().any(|&c| c != 0.0) {
                out.push(t.output, t.a, t.b, coef);
            }
            let lower = t.coef.truncate(t.coef.order() - 1);
            let (a, b) = if dx { (t.a + 1, t.b) } else { (t.a, t.b + 1) };
            out.push(t.output, a, b, lower);
        }
        out
    }

    pub fn d_dx(&self) -> Self {
        self.differentiate(true)
    }

    pub fn d_dy(&self) -> Self {
        self.differentiate(false)
    }

    pub fn minus(mut self, other: &DiffExpr) -> Self {
        self.constant = &self.constant - &other.constant;
        for t in &other.terms {
            self.terms.push(Term {
                coef: -&t.coef,
                ..t.clone()
            });
        }
        self
    }

    /// Freezes the coefficients at the expansion point. Entries that hit
    /// the same output coefficient are merged.
    pub fn functional(&self) -> LinearFunctional {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for t in &self.terms {
            let c = index(t.a, t.b);
            let w = t.coef.value() * factorial(t.a) * factorial(t.b);
            match entries.iter_mut().find(|e| e.0 == t.output && e.1 == c) {
                Some(e) => e.2 += w,
                None => entries.push((t.output, c, w)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        LinearFunctional {
            entries,
            constant: self.constant.value(),
        }
    }
}

fn velocity_repr(layout: &OutputLayout) -> Result<VelocityRepr> {
    layout.velocity.ok_or(Error::MissingVelocity)
}

fn check_order(name: &'static str, jet: &Jet, needed: usize) -> Result<()> {
    if jet.order() < needed {
        return Err(Error::NotDifferentiable {
            name,
            got: jet.order(),
            needed,
        });
    }
    Ok(())
}

/// Momentum residual `-nu Δv + (beta·∇)v + sigma v [+ ∇q] - f`, component
/// by component, with coefficients expanded to `coef_order`.
pub fn momentum_exprs(
    case: &OseenCase,
    layout: &OutputLayout,
    x: Point,
    with_pressure: bool,
    coef_order: usize,
) -> Result<[DiffExpr; 2]> {
    let repr = velocity_repr(layout)?;
    let pressure = if with_pressure {
        Some(layout.pressure.ok_or(Error::MissingPressure)?)
    } else {
        None
    };
    let nu = (case.coeffs.nu)(x, coef_order);
    let beta = (case.coeffs.beta)(x, coef_order);
    let sigma = (case.coeffs.sigma)(x, coef_order);
    let f = (case.forcing)(x, coef_order);
    check_order("nu", &nu, coef_order)?;
    check_order("sigma", &sigma, coef_order)?;
    for j in beta.iter() {
        check_order("beta", j, coef_order)?;
    }
    for j in f.iter() {
        check_order("forcing", j, coef_order)?;
    }
    let exprs = [0, 1].map(|comp| {
        let mut e = DiffExpr::new(-&f[comp]);
        e.push_velocity(repr, comp, 2, 0, -&nu);
        e.push_velocity(repr, comp, 0, 2, -&nu);
        e.push_velocity(repr, comp, 1, 0, beta[0].clone());
        e.push_velocity(repr, comp, 0, 1, beta[1].clone());
        e.push_velocity(repr, comp, 0, 0, sigma.clone());
        if let Some(p) = pressure {
            let (a, b) = if comp == 0 { (1, 0) } else { (0, 1) };
            e.push(p, a, b, Jet::constant(coef_order, 1.0));
        }
        e
    });
    Ok(exprs)
}

pub fn momentum_functionals(
    case: &OseenCase,
    layout: &OutputLayout,
    x: Point,
    with_pressure: bool,
) -> Result<[LinearFunctional; 2]> {
    let [a, b] = momentum_exprs(case, layout, x, with_pressure, 0)?;
    Ok([a.functional(), b.functional()])
}

/// `∂R₂/∂x - ∂R₁/∂y` of the pressure-free momentum residual `R`.
pub fn curl_functional(case: &OseenCase, layout: &OutputLayout, x: Point) -> Result<LinearFunctional> {
    let [r1, r2] = momentum_exprs(case, layout, x, false, 1)?;
    Ok(r2.d_dx().minus(&r1.d_dy()).functional())
}

pub fn divergence_functional(layout: &OutputLayout) -> Result<LinearFunctional> {
    let repr = velocity_repr(layout)?;
    let mut e = DiffExpr::new(Jet::constant(0, 0.0));
    e.push_velocity(repr, 0, 1, 0, Jet::constant(0, 1.0));
    e.push_velocity(repr, 1, 0, 1, Jet::constant(0, 1.0));
    Ok(e.functional())
}

/// Functionals reading `∂^{a+b} v_comp` for both velocity components.
pub fn velocity_functionals(layout: &OutputLayout, a: usize, b: usize) -> Result<[LinearFunctional; 2]> {
    let repr = velocity_repr(layout)?;
    Ok([0, 1].map(|comp| {
        let mut e = DiffExpr::new(Jet::constant(0, 0.0));
        e.push_velocity(repr, comp, a, b, Jet::constant(0, 1.0));
        e.functional()
    }))
}

pub fn pressure_functional(layout: &OutputLayout, a: usize, b: usize) -> Result<LinearFunctional> {
    let p = layout.pressure.ok_or(Error::MissingPressure)?;
    let mut e = DiffExpr::new(Jet::constant(0, 0.0));
    e.push(p, a, b, Jet::constant(0, 1.0));
    Ok(e.functional())
}
