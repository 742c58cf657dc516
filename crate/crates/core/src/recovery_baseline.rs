//! Piecewise Lagrange interpolation on dyadic simplicial meshes.
//!
//! The unit square is cut into `2^k × 2^k` cubes and every cube into two
//! Kuhn triangles along the `(0,0)`–`(1,1)` diagonal. On each triangle the
//! interpolant is the polynomial of total degree `< r` matching `f` at the
//! principal lattice nodes, which are exactly the nodes of
//! [`dyadic_grid(k, r)`](crate::sampling::dyadic_grid). Neighbouring
//! triangles share their edge nodes, so the interpolant is continuous.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::problem::Point;
use crate::sampling::dyadic_grid;

/// Which half of a cube a triangle covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Half {
    /// Vertices `(0,0), (1,0), (1,1)` in cube coordinates: `s >= t`.
    Lower,
    /// Vertices `(0,0), (1,1), (0,1)` in cube coordinates: `t > s`.
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SimplexId {
    pub cube: [usize; 2],
    pub half: Half,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicSimplicialPartition {
    k: u32,
}

impl DyadicSimplicialPartition {
    pub fn level(&self) -> u32 {
        self.k
    }

    /// Cubes per axis, `2^k`.
    pub fn cubes_per_axis(&self) -> usize {
        1 << self.k
    }

    pub fn side(&self) -> f64 {
        1.0 / self.cubes_per_axis() as f64
    }

    pub fn n_cubes(&self) -> usize {
        self.cubes_per_axis().pow(2)
    }

    pub fn n_simplices(&self) -> usize {
        2 * self.n_cubes()
    }

    /// Lower-left corners of the cubes.
    pub fn cubes(&self) -> Vec<Point> {
        let n = self.cubes_per_axis();
        let h = self.side();
        (0..n)
            .flat_map(|j| (0..n).map(move |i| [i as f64 * h, j as f64 * h]))
            .collect()
    }

    pub fn simplices(&self) -> Vec<SimplexId> {
        let n = self.cubes_per_axis();
        (0..n)
            .flat_map(|j| {
                (0..n).flat_map(move |i| {
                    [Half::Lower, Half::Upper].map(|half| SimplexId { cube: [i, j], half })
                })
            })
            .collect()
    }

    pub fn vertices(&self, id: SimplexId) -> [Point; 3] {
        let h = self.side();
        let [x0, y0] = [id.cube[0] as f64 * h, id.cube[1] as f64 * h];
        match id.half {
            Half::Lower => [[x0, y0], [x0 + h, y0], [x0 + h, y0 + h]],
            Half::Upper => [[x0, y0], [x0 + h, y0 + h], [x0, y0 + h]],
        }
    }

    /// The simplex containing `x`; points on the diagonal belong to the lower half.
    pub fn locate(&self, x: Point) -> SimplexId {
        let n = self.cubes_per_axis();
        let h = self.side();
        let cell = |c: f64| ((c / h).floor().max(0.0) as usize).min(n - 1);
        let cube = [cell(x[0]), cell(x[1])];
        let (s, t) = self.local(cube, x);
        let half = if s >= t { Half::Lower } else { Half::Upper };
        SimplexId { cube, half }
    }

    fn local(&self, cube: [usize; 2], x: Point) -> (f64, f64) {
        let h = self.side();
        ((x[0] - cube[0] as f64 * h) / h, (x[1] - cube[1] as f64 * h) / h)
    }
}

pub fn build_partition(k: u32) -> DyadicSimplicialPartition {
    DyadicSimplicialPartition { k }
}

/// Multi-indices `(α0, α1, α2)` with `|α| = p`.
fn lattice(p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a2 in 0..=p {
        for a1 in 0..=p - a2 {
            out.push([p - a1 - a2, a1, a2]);
        }
    }
    out
}

/// Barycentric coordinates in cube coordinates `(s, t)` and their `(∂s, ∂t)` gradients.
fn barycentric(half: Half, s: f64, t: f64) -> ([f64; 3], [[f64; 2]; 3]) {
    match half {
        Half::Lower => ([1.0 - s, s - t, t], [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]]),
        Half::Upper => ([1.0 - t, s, t - s], [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]]),
    }
}

/// Grid offset `(di, dj)` of lattice node `α` inside its cube, in units of `h/p`.
fn node_offset(half: Half, a: [usize; 3]) -> (usize, usize) {
    match half {
        Half::Lower => (a[1] + a[2], a[2]),
        Half::Upper => (a[1], a[1] + a[2]),
    }
}

/// `Π_{s<a} (pλ - s)/(s+1)` and its derivative in `λ`.
fn factor(p: usize, a: usize, lambda: f64) -> (f64, f64) {
    let mut val = 1.0;
    let mut der = 0.0;
    for s in 0..a {
        let scale = p as f64 / (s + 1) as f64;
        let g = (p as f64 * lambda - s as f64) / (s + 1) as f64;
        der = der * g + val * scale;
        val *= g;
    }
    (val, der)
}

/// Global continuous piecewise polynomial interpolant, scalar or vector valued.
#[derive(Clone, Debug)]
pub struct PiecewiseLagrangeInterpolant {
    partition: DyadicSimplicialPartition,
    r: usize,
    nodes_per_axis: usize,
    /// Node values per component on the `dyadic_grid(k, r)` ordering.
    values: Vec<Vec<f64>>,
    lattice: Vec<[usize; 3]>,
}

impl PiecewiseLagrangeInterpolant {
    pub fn partition(&self) -> &DyadicSimplicialPartition {
        &self.partition
    }

    /// Degree bound: polynomials of total degree `< r`.
    pub fn degree_bound(&self) -> usize {
        self.r
    }

    pub fn n_components(&self) -> usize {
        self.values.len()
    }

    fn p(&self) -> usize {
        self.r - 1
    }

    /// Coefficients of one simplex: component-major node values in lattice order.
    pub fn simplex_coefficients(&self, id: SimplexId) -> Vec<Vec<f64>> {
        let idx = self.node_indices(id);
        self.values.iter().map(|v| idx.iter().map(|&i| v[i]).collect()).collect()
    }

    fn node_indices(&self, id: SimplexId) -> Vec<usize> {
        let p = self.p();
        let (i0, j0) = (id.cube[0] * p, id.cube[1] * p);
        self.lattice
            .iter()
            .map(|&a| {
                let (di, dj) = node_offset(id.half, a);
                (j0 + dj) * self.nodes_per_axis + i0 + di
            })
            .collect()
    }

    /// Values and spatial gradients of all components, using the polynomial of simplex `id`.
    pub fn eval_on_simplex(&self, id: SimplexId, x: Point) -> Vec<(f64, [f64; 2])> {
        let p = self.p();
        let h = self.partition.side();
        let (s, t) = self.partition.local(id.cube, x);
        let (lambda, dl) = barycentric(id.half, s, t);
        let idx = self.node_indices(id);
        let mut out = vec![(0.0, [0.0; 2]); self.values.len()];
        for (n, a) in self.lattice.iter().enumerate() {
            let f: [(f64, f64); 3] = [0, 1, 2].map(|m| factor(p, a[m], lambda[m]));
            let phi = f[0].0 * f[1].0 * f[2].0;
            let mut grad = [0.0; 2];
            for m in 0..3 {
                let others: f64 = (0..3).filter(|&q| q != m).map(|q| f[q].0).product();
                for d in 0..2 {
                    grad[d] += f[m].1 * others * dl[m][d] / h;
                }
            }
            for (c, v) in self.values.iter().enumerate() {
                let val = v[idx[n]];
                out[c].0 += val * phi;
                out[c].1[0] += val * grad[0];
                out[c].1[1] += val * grad[1];
            }
        }
        out
    }

    pub fn eval(&self, x: Point) -> Vec<f64> {
        self.eval_on_simplex(self.partition.locate(x), x).into_iter().map(|(v, _)| v).collect()
    }

    pub fn gradient(&self, x: Point) -> Vec<[f64; 2]> {
        self.eval_on_simplex(self.partition.locate(x), x).into_iter().map(|(_, g)| g).collect()
    }
}

fn build(values: Vec<Vec<f64>>, k: u32, r: usize) -> PiecewiseLagrangeInterpolant {
    let p = r - 1;
    PiecewiseLagrangeInterpolant {
        partition: build_partition(k),
        r,
        nodes_per_axis: (1usize << k) * p + 1,
        values,
        lattice: lattice(p),
    }
}

fn check_finite(v: f64, x: Point) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("interpolated function is not finite at {x:?}")))
    }
}

/// Scalar interpolant `S_k^*(f)` with degree bound `r`.
pub fn interpolate(f: impl Fn(Point) -> f64, k: u32, r: usize) -> Result<PiecewiseLagrangeInterpolant> {
    let nodes = dyadic_grid(k, r)?;
    let values = nodes.iter().map(|&x| check_finite(f(x), x)).collect::<Result<_>>()?;
    Ok(build(vec![values], k, r))
}

/// Componentwise interpolant of a planar vector field.
pub fn interpolate_vector(f: impl Fn(Point) -> [f64; 2], k: u32, r: usize) -> Result<PiecewiseLagrangeInterpolant> {
    let nodes = dyadic_grid(k, r)?;
    let mut values = [Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len())];
    for &x in &nodes {
        let v = f(x);
        for c in 0..2 {
            values[c].push(check_finite(v[c], x)?);
        }
    }
    Ok(build(Vec::from(values), k, r))
}

/// Centroids of the `q²` congruent sub-triangles of a triangle.
fn sub_centroids(v: [Point; 3], q: usize) -> Vec<Point> {
    let qf = q as f64;
    let at = |b1: f64, b2: f64| {
        let b0 = 1.0 - b1 - b2;
        [
            b0 * v[0][0] + b1 * v[1][0] + b2 * v[2][0],
            b0 * v[0][1] + b1 * v[1][1] + b2 * v[2][1],
        ]
    };
    let mut out = Vec::with_capacity(q * q);
    for i in 0..q {
        for j in 0..q - i {
            out.push(at((i as f64 + 1.0 / 3.0) / qf, (j as f64 + 1.0 / 3.0) / qf));
            if i + j + 2 <= q {
                out.push(at((i as f64 + 2.0 / 3.0) / qf, (j as f64 + 2.0 / 3.0) / qf));
            }
        }
    }
    out
}

/// `‖f - S_k^*(f)‖_{H¹}` summed over components, by centroid quadrature on
/// `refine²` sub-triangles of every simplex. `exact(x, c)` returns the
/// value and gradient of component `c`.
pub fn h1_error(
    interp: &PiecewiseLagrangeInterpolant,
    exact: impl Fn(Point, usize) -> (f64, [f64; 2]),
    refine: usize,
) -> Result<f64> {
    if refine == 0 {
        return Err(Error::InvalidParameter("quadrature refinement must be positive".into()));
    }
    let part = interp.partition();
    let weight = part.side().powi(2) / 2.0 / (refine * refine) as f64;
    let mut sum = 0.0;
    for id in part.simplices() {
        for x in sub_centroids(part.vertices(id), refine) {
            for (c, (v, g)) in interp.eval_on_simplex(id, x).into_iter().enumerate() {
                let (ev, eg) = exact(x, c);
                sum += weight * ((ev - v).powi(2) + (eg[0] - g[0]).powi(2) + (eg[1] - g[1]).powi(2));
            }
        }
    }
    Ok(sum.sqrt())
}

/// Least-squares slope of `log e` against `log m`.
pub fn fit_rate(sizes: &[f64], errors: &[f64]) -> Result<f64> {
    if sizes.len() != errors.len() || sizes.len() < 3 {
        return Err(Error::InvalidParameter("rate fit needs at least three (size, error) pairs".into()));
    }
    if sizes.iter().chain(errors).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("rate fit needs positive sizes and errors".into()));
    }
    let xs: Vec<f64> = sizes.iter().map(|m| m.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct sizes".into()));
    }
    Ok(sxy / sxx)
}

/// Smooth test function `sin(2πx) sin(2πy)` with its gradient.
pub fn smooth_test_function(x: Point) -> (f64, [f64; 2]) {
    let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
    (sx * sy, [2.0 * PI * cx * sy, 2.0 * PI * sx * cy])
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub k: u32,
    /// Cubes per axis `2^k`, the inverse mesh size.
    pub m: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateStudy {
    pub degree_bound: usize,
    pub rows: Vec<RateRow>,
    pub slope: f64,
}

/// Quadrature refinement used by [`rate_study`].
pub const RATE_STUDY_REFINE: usize = 4;

/// H¹ interpolation errors of [`smooth_test_function`] over `levels`, with
/// the fitted slope against `m = 2^k`; the expected slope is `-(r-1)`.
pub fn rate_study(levels: std::ops::RangeInclusive<u32>, r: usize) -> Result<RateStudy> {
    let mut rows = Vec::new();
    for k in levels {
        let interp = interpolate(|x| smooth_test_function(x).0, k, r)?;
        let error = h1_error(&interp, |x, _| smooth_test_function(x), RATE_STUDY_REFINE)?;
        rows.push(RateRow {
            k,
            m: (1u64 << k) as f64,
            error,
        });
    }
    let sizes: Vec<f64> = rows.iter().map(|r| r.m).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let slope = fit_rate(&sizes, &errors)?;
    Ok(RateStudy {
        degree_bound: r,
        rows,
        slope,
    })
}
