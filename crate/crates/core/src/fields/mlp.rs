//! Fully connected networks evaluated on Taylor jets.
//!
//! A forward pass pushes the coordinate jets `x + dx`, `y + dy` through
//! the network, so every output carries its exact spatial derivatives up
//! to the requested order. The reverse pass propagates adjoints of output
//! jet coefficients back to the parameters, which yields parameter
//! gradients of any loss that is built from spatial derivatives.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{n_coeffs, tanh_derivatives, JetTable, MAX_ORDER};
use crate::problem::Point;

const MAX_LEN: usize = n_coeffs(MAX_ORDER);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Activation {
    Tanh,
    Sin,
}

impl Activation {
    /// `out[n]` = n-th derivative at `z`.
    fn derivatives(self, z: f64, out: &mut [f64]) {
        match self {
            Activation::Tanh => tanh_derivatives(z, out),
            Activation::Sin => {
                let (s, c) = z.sin_cos();
                for (n, slot) in out.iter_mut().enumerate() {
                    *slot = [s, c, -s, -c][n % 4];
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Sin => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Sin),
            _ => Err(Error::Checkpoint(format!("unknown activation code {code}"))),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sin" | "sine" => Ok(Activation::Sin),
            "relu" | "leaky_relu" | "elu" | "hardtanh" | "abs" => Err(Error::NonSmoothActivation(s.to_string())),
            _ => Err(Error::Unknown {
                kind: "activation",
                name: s.to_string(),
            }),
        }
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.name().to_string()
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Multilayer perceptron `R² → R^n_out` with `depth` hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
}

/// Per-point forward state needed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct MlpTape {
    order: usize,
    x: Point,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    /// Output jets, `n_out × n_coeffs(order)` row-major.
    pub out: Vec<f64>,
}

impl MlpTape {
    pub fn order(&self) -> usize {
        self.order
    }
}

impl Mlp {
    pub fn new(width: usize, depth: usize, n_out: usize, activation: Activation) -> Self {
        let mut sizes = vec![2];
        sizes.extend(std::iter::repeat_n(width, depth));
        sizes.push(n_out);
        Self { sizes, activation }
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Parameter range of the output layer's weights and biases.
    pub fn output_layer(&self) -> std::ops::Range<usize> {
        let n = self.n_params();
        let w = &self.sizes[self.sizes.len() - 2..];
        n - (w[0] * w[1] + w[1])..n
    }

    /// Zero biases and Glorot-normal weights.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.n_params());
        for w in self.sizes.windows(2) {
            let std = (2.0 / (w[0] + w[1]) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            params.extend((0..w[0] * w[1]).map(|_| normal.sample(rng)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        params
    }

    fn activate(&self, table: &JetTable, z: &[f64], a: &mut [f64]) {
        let (order, len) = (table.order, table.len);
        let mut d = [0.0; MAX_ORDER + 2];
        self.activation.derivatives(z[0], &mut d[..=order]);
        a.fill(0.0);
        a[0] = d[0];
        if order == 0 {
            return;
        }
        let mut delta = [0.0; MAX_LEN];
        delta[1..len].copy_from_slice(&z[1..len]);
        let mut power = delta;
        for c in 1..len {
            a[c] += d[1] * delta[c];
        }
        let mut inv_fact = 1.0;
        for (n, dn) in d.iter().enumerate().take(order + 1).skip(2) {
            inv_fact /= n as f64;
            let mut next = [0.0; MAX_LEN];
            for &(i, j, k) in &table.products {
                next[k] += power[i] * delta[j];
            }
            power = next;
            let g = dn * inv_fact;
            for c in 1..len {
                a[c] += g * power[c];
            }
        }
    }

    fn activate_backward(&self, table: &JetTable, z: &[f64], adj_a: &[f64], adj_z: &mut [f64]) {
        let (order, len) = (table.order, table.len);
        let mut d = [0.0; MAX_ORDER + 2];
        self.activation.derivatives(z[0], &mut d[..=order + 1]);
        let mut adj_z0 = adj_a[0] * d[1];
        if order == 0 {
            adj_z[0] = adj_z0;
            return;
        }
        let mut powers = [[0.0; MAX_LEN]; MAX_ORDER + 1];
        powers[1][1..len].copy_from_slice(&z[1..len]);
        for n in 2..=order {
            let (lo, hi) = powers.split_at_mut(n);
            for &(i, j, k) in &table.products {
                hi[0][k] += lo[n - 1][i] * lo[1][j];
            }
        }
        let mut adj_powers = [[0.0; MAX_LEN]; MAX_ORDER + 1];
        let mut inv_fact = 1.0;
        for n in 1..=order {
            inv_fact /= n as f64;
            let s: f64 = (1..len).map(|c| adj_a[c] * powers[n][c]).sum();
            // d/dz0 of d_n(z0)/n! is d_{n+1}(z0)/n!
            adj_z0 += s * d[n + 1] * inv_fact;
            let g = d[n] * inv_fact;
            for c in 1..len {
                adj_powers[n][c] = g * adj_a[c];
            }
        }
        let mut adj_delta = [0.0; MAX_LEN];
        for n in (2..=order).rev() {
            for &(i, j, k) in &table.products {
                let w = adj_powers[n][k];
                if w != 0.0 {
                    adj_powers[n - 1][i] += w * powers[1][j];
                    adj_delta[j] += w * powers[n - 1][i];
                }
            }
        }
        adj_z[0] = adj_z0;
        for c in 1..len {
            adj_z[c] = adj_delta[c] + adj_powers[1][c];
        }
    }

    pub fn forward(&self, params: &[f64], x: Point, order: usize) -> MlpTape {
        debug_assert_eq!(params.len(), self.n_params());
        let table = JetTable::get(order);
        let len = table.len;
        let n_layers = self.sizes.len() - 1;
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        let mut offset = 0;
        let mut out = Vec::new();
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut z = vec![0.0; n_out * len];
            if l == 0 {
                for j in 0..n_out {
                    let (wx, wy) = (w[2 * j], w[2 * j + 1]);
                    let zj = &mut z[j * len..(j + 1) * len];
                    zj[0] = wx * x[0] + wy * x[1] + b[j];
                    if order > 0 {
                        zj[1] = wx;
                        zj[2] = wy;
                    }
                }
            } else {
                let a = post.last().unwrap();
                for j in 0..n_out {
                    let zj = &mut z[j * len..(j + 1) * len];
                    zj[0] = b[j];
                    for (k, &wjk) in w[j * n_in..(j + 1) * n_in].iter().enumerate() {
                        for (zc, ac) in zj.iter_mut().zip(&a[k * len..(k + 1) * len]) {
                            *zc += wjk * ac;
                        }
                    }
                }
            }
            if l + 1 == n_layers {
                out = z;
            } else {
                let mut a = vec![0.0; n_out * len];
                for j in 0..n_out {
                    self.activate(table, &z[j * len..(j + 1) * len], &mut a[j * len..(j + 1) * len]);
                }
                pre.push(z);
                post.push(a);
            }
        }
        MlpTape {
            order,
            x,
            pre,
            post,
            out,
        }
    }

    /// Accumulates `∂L/∂params` into `grad` given `adj_out = ∂L/∂out`.
    pub fn backward(&self, params: &[f64], tape: &MlpTape, adj_out: &[f64], grad: &mut [f64]) {
        let table = JetTable::get(tape.order);
        let len = table.len;
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut adj = adj_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let w = &params[off..off + n_in * n_out];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for j in 0..n_out {
                gb[j] += adj[j * len];
            }
            if l == 0 {
                for j in 0..n_out {
                    let aj = &adj[j * len..(j + 1) * len];
                    gw[2 * j] += aj[0] * tape.x[0] + if tape.order > 0 { aj[1] } else { 0.0 };
                    gw[2 * j + 1] += aj[0] * tape.x[1] + if tape.order > 0 { aj[2] } else { 0.0 };
                }
                break;
            }
            let a = &tape.post[l - 1];
            let mut adj_a = vec![0.0; n_in * len];
            for j in 0..n_out {
                let aj = &adj[j * len..(j + 1) * len];
                let wrow = &w[j * n_in..(j + 1) * n_in];
                for k in 0..n_in {
                    let ak = &a[k * len..(k + 1) * len];
                    gw[j * n_in + k] += aj.iter().zip(ak).map(|(p, q)| p * q).sum::<f64>();
                    let wjk = wrow[k];
                    for (s, p) in adj_a[k * len..(k + 1) * len].iter_mut().zip(aj) {
                        *s += wjk * p;
                    }
                }
            }
            let z = &tape.pre[l - 1];
            let mut adj_z = vec![0.0; n_in * len];
            for k in 0..n_in {
                self.activate_backward(
                    table,
                    &z[k * len..(k + 1) * len],
                    &adj_a[k * len..(k + 1) * len],
                    &mut adj_z[k * len..(k + 1) * len],
                );
            }
            adj = adj_z;
        }
    }
}
