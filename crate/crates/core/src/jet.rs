//! Truncated bivariate Taylor arithmetic.
//!
//! A [`Jet`] of order `K` stores the normalized Taylor coefficients
//! `c[a, b] = (1 / a! b!) ∂^{a+b} f / ∂x^a ∂y^b` of a scalar function of
//! `(x, y)` for every monomial with `a + b <= K`. Arithmetic on jets is
//! exact truncated polynomial arithmetic, so composing elementary
//! functions on jets yields exact spatial derivatives (forward Taylor-mode
//! automatic differentiation). Monomials are stored by total degree, and
//! within a degree by increasing power of `y`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 6;

/// Number of coefficients of a jet of the given order.
pub const fn n_coeffs(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Storage index of the monomial `x^a y^b`.
pub const fn index(a: usize, b: usize) -> usize {
    let n = a + b;
    n * (n + 1) / 2 + b
}

/// Exponents `(a, b)` of the monomial stored at `idx`.
pub fn monomial(idx: usize) -> (usize, usize) {
    let mut n = 0;
    while n_coeffs(n) <= idx {
        n += 1;
    }
    let b = idx - n * (n + 1) / 2;
    (n - b, b)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Precomputed multiplication structure for one truncation order.
#[derive(Debug)]
pub struct JetTable {
    pub order: usize,
    pub len: usize,
    /// `(i, j, k)` with monomial `i` times monomial `j` equal to monomial
    /// `k`, restricted to non-constant `i` and `j`.
    pub products: Vec<(usize, usize, usize)>,
    /// `a! b!` for every stored monomial.
    pub scale: Vec<f64>,
}

impl JetTable {
    fn build(order: usize) -> Self {
        let len = n_coeffs(order);
        let mut products = Vec::new();
        for i in 1..len {
            let (a1, b1) = monomial(i);
            for j in 1..len {
                let (a2, b2) = monomial(j);
                if a1 + b1 + a2 + b2 <= order {
                    products.push((i, j, index(a1 + a2, b1 + b2)));
                }
            }
        }
        let scale = (0..len)
            .map(|i| {
                let (a, b) = monomial(i);
                factorial(a) * factorial(b)
            })
            .collect();
        Self {
            order,
            len,
            products,
            scale,
        }
    }

    pub fn get(order: usize) -> &'static JetTable {
        static TABLES: OnceLock<Vec<JetTable>> = OnceLock::new();
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        &TABLES.get_or_init(|| (0..=MAX_ORDER).map(JetTable::build).collect())[order]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![0.0; n_coeffs(order)],
        }
    }

    pub fn constant(order: usize, value: f64) -> Self {
        let mut jet = Self::zeros(order);
        jet.coeffs[0] = value;
        jet
    }

    /// The independent coordinate `x` expanded at `value`.
    pub fn var_x(order: usize, value: f64) -> Self {
        let mut jet = Self::constant(order, value);
        if order > 0 {
            jet.coeffs[index(1, 0)] = 1.0;
        }
        jet
    }

    pub fn var_y(order: usize, value: f64) -> Self {
        let mut jet = Self::constant(order, value);
        if order > 0 {
            jet.coeffs[index(0, 1)] = 1.0;
        }
        jet
    }

    /// Coordinate jets `(x, y)` at a point.
    pub fn vars(order: usize, point: [f64; 2]) -> (Self, Self) {
        (Self::var_x(order, point[0]), Self::var_y(order, point[1]))
    }

    pub fn from_coeffs(order: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), n_coeffs(order));
        Self { order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized Taylor coefficient of `x^a y^b`; zero beyond the order.
    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.order {
            0.0
        } else {
            self.coeffs[index(a, b)]
        }
    }

    /// The partial derivative `∂^{a+b} f / ∂x^a ∂y^b` at the expansion point.
    pub fn derivative(&self, a: usize, b: usize) -> f64 {
        assert!(a + b <= self.order, "derivative ({a}, {b}) beyond jet order {}", self.order);
        self.coeffs[index(a, b)] * factorial(a) * factorial(b)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Self {
            order,
            coeffs: self.coeffs[..n_coeffs(order)].to_vec(),
        }
    }

    fn shift(&self, dx: bool) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut out = Self::zeros(order);
        for (k, slot) in out.coeffs.iter_mut().enumerate() {
            let (a, b) = monomial(k);
            *slot = if dx {
                (a + 1) as f64 * self.coeffs[index(a + 1, b)]
            } else {
                (b + 1) as f64 * self.coeffs[index(a, b + 1)]
            };
        }
        out
    }

    /// Jet of `∂f/∂x`, one order lower.
    pub fn dx(&self) -> Self {
        self.shift(true)
    }

    pub fn dy(&self) -> Self {
        self.shift(false)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Composes a univariate function with this jet. `derivs[n]` must hold
    /// the `n`-th derivative of the function at `self.value()`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        assert!(derivs.len() > self.order);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = Self::constant(self.order, derivs[0]);
        let mut power = Self::constant(self.order, 1.0);
        let mut inv_fact = 1.0;
        for (n, d) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            power = &power * &delta;
            inv_fact /= n as f64;
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += d * inv_fact * p;
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let derivs: Vec<f64> = (0..=self.order)
            .map(|n| match n % 4 {
                0 => s,
                1 => c,
                2 => -s,
                _ => -c,
            })
            .collect();
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let derivs: Vec<f64> = (0..=self.order)
            .map(|n| match n % 4 {
                0 => c,
                1 => -s,
                2 => -c,
                _ => s,
            })
            .collect();
        self.compose(&derivs)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn tanh(&self) -> Self {
        let mut derivs = vec![0.0; self.order + 1];
        tanh_derivatives(self.value(), &mut derivs);
        self.compose(&derivs)
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(self.order, 1.0), |acc, _| &acc * self)
    }
}

/// Fills `out[n]` with the `n`-th derivative of `tanh` at `z`.
pub fn tanh_derivatives(z: f64, out: &mut [f64]) {
    // d^n tanh / dz^n = P_n(tanh z) with P_{n+1}(t) = P_n'(t) (1 - t^2).
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let polys = POLYS.get_or_init(|| {
        let mut polys = vec![vec![0.0, 1.0]];
        for _ in 0..=MAX_ORDER + 1 {
            let prev = polys.last().unwrap();
            let deriv: Vec<f64> = (1..prev.len()).map(|k| k as f64 * prev[k]).collect();
            let mut next = vec![0.0; deriv.len() + 2];
            for (k, d) in deriv.iter().enumerate() {
                next[k] += d;
                next[k + 2] -= d;
            }
            polys.push(next);
        }
        polys
    });
    let t = z.tanh();
    for (slot, poly) in out.iter_mut().zip(polys) {
        *slot = poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).take(n_coeffs(order)).map(|(a, b)| a + b).collect();
        Jet { order, coeffs }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).take(n_coeffs(order)).map(|(a, b)| a - b).collect();
        Jet { order, coeffs }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let table = JetTable::get(order);
        let mut out = Jet::zeros(order);
        let (a0, b0) = (self.coeffs[0], rhs.coeffs[0]);
        out.coeffs[0] = a0 * b0;
        for k in 1..table.len {
            out.coeffs[k] = a0 * rhs.coeffs[k] + b0 * self.coeffs[k];
        }
        for &(i, j, k) in &table.products {
            out.coeffs[k] += self.coeffs[i] * rhs.coeffs[j];
        }
        out
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.clone() + rhs
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.clone() - rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn index_roundtrip() {
        for i in 0..n_coeffs(MAX_ORDER) {
            let (a, b) = monomial(i);
            assert_eq!(index(a, b), i);
        }
        assert_eq!(index(0, 0), 0);
        assert_eq!(index(1, 0), 1);
        assert_eq!(index(0, 1), 2);
        assert_eq!(index(2, 0), 3);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x^3 y^2 + 2xy
        let (x, y) = Jet::vars(5, [0.7, -1.3]);
        let f = &(&x.powi(3) * &y.powi(2)) + &(&x * &y).scale(2.0);
        let (x0, y0): (f64, f64) = (0.7, -1.3);
        assert_relative_eq!(f.value(), x0.powi(3) * y0.powi(2) + 2.0 * x0 * y0, epsilon = 1e-14);
        assert_relative_eq!(f.derivative(1, 0), 3.0 * x0 * x0 * y0 * y0 + 2.0 * y0, epsilon = 1e-13);
        assert_relative_eq!(f.derivative(1, 1), 6.0 * x0 * x0 * y0 + 2.0, epsilon = 1e-13);
        assert_relative_eq!(f.derivative(3, 2), 12.0, epsilon = 1e-12);
        assert_relative_eq!(f.derivative(4, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sin_cos_match_closed_form() {
        let (x, y) = Jet::vars(4, [0.3, 0.9]);
        let f = (&x * &y).sin();
        // ∂²/∂x∂y sin(xy) = cos(xy) - xy sin(xy)
        let xy: f64 = 0.27;
        assert_relative_eq!(f.derivative(1, 1), xy.cos() - xy * xy.sin(), epsilon = 1e-13);
        // ∂⁴/∂x⁴ sin(xy) = y⁴ sin(xy)
        assert_relative_eq!(f.derivative(4, 0), 0.9f64.powi(4) * xy.sin(), epsilon = 1e-13);
        let g = x.cos();
        assert_relative_eq!(g.derivative(3, 0), 0.3f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn tanh_derivatives_match_finite_differences() {
        let mut d = [0.0; 6];
        let z = 0.4;
        tanh_derivatives(z, &mut d);
        let t = z.tanh();
        assert_relative_eq!(d[1], 1.0 - t * t, epsilon = 1e-14);
        assert_relative_eq!(d[2], -2.0 * t * (1.0 - t * t), epsilon = 1e-14);
        let h = 1e-4;
        let mut lo = [0.0; 6];
        let mut hi = [0.0; 6];
        tanh_derivatives(z - h, &mut lo);
        tanh_derivatives(z + h, &mut hi);
        for n in 0..5 {
            assert_relative_eq!((hi[n] - lo[n]) / (2.0 * h), d[n + 1], max_relative = 1e-6);
        }
    }

    #[test]
    fn dx_lowers_order_and_differentiates() {
        let (x, y) = Jet::vars(3, [0.5, 0.25]);
        let f = (&x * &x) * &y;
        let fx = f.dx();
        assert_eq!(fx.order(), 2);
        assert_relative_eq!(fx.value(), 2.0 * 0.5 * 0.25);
        assert_relative_eq!(fx.derivative(1, 1), 2.0);
        let fy = f.dy();
        assert_relative_eq!(fy.derivative(2, 0), 2.0);
    }

    #[test]
    fn mixed_partials_commute() {
        let (x, y) = Jet::vars(4, [0.2, 0.6]);
        let f = (&(&x * &y) + &y.exp()).tanh();
        let a = f.dx().dy();
        let b = f.dy().dx();
        for (p, q) in a.coeffs().iter().zip(b.coeffs()) {
            assert_relative_eq!(p, q, epsilon = 1e-13);
        }
    }
}
