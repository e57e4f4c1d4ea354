//! Per-point record of the jet forward pass and its reverse sweep.
//!
//! Each hidden neuron carries the value stream and, per input axis `k`, a
//! first-derivative stream and (for Laplacian evaluations) a second-derivative
//! stream. The reverse sweep differentiates those jet operations with respect
//! to weights, biases and the activation scale.

use crate::activations::{act_eval3, ActivationKind};
use crate::loss::FieldValue;
use crate::network::{Architecture, MLPParams};
use crate::problems::Point;

/// Which input derivatives a pass must produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Value,
    Gradient,
    Laplacian,
}

#[derive(Clone, Debug, Default)]
struct LayerRecord {
    zv: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
    hv: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
}

impl LayerRecord {
    fn new(n: usize, dim: usize) -> Self {
        let one = vec![0.0; n];
        let many = vec![0.0; n * dim];
        Self {
            zv: one.clone(),
            z1: many.clone(),
            z2: many.clone(),
            hv: one.clone(),
            h1: many.clone(),
            h2: many,
            s1: one.clone(),
            s2: one.clone(),
            s3: one,
        }
    }
}

/// Output adjoints seeding a reverse sweep.
#[derive(Clone, Copy, Debug, Default)]
pub struct Seed {
    pub u: f64,
    pub grad: [f64; 3],
    pub laplacian: f64,
}

/// Reusable buffers for one evaluation; never shared between threads.
#[derive(Clone, Debug)]
pub struct Tape {
    dim: usize,
    layers: Vec<LayerRecord>,
    x: [f64; 3],
    order: Order,
    kind: ActivationKind,
    scale: f64,
    adj: [Vec<f64>; 3],
    prev: [Vec<f64>; 3],
}

impl Tape {
    pub fn new(arch: &Architecture) -> Self {
        let dim = arch.input_dim;
        let width = arch.hidden_sizes.iter().copied().max().unwrap_or(1).max(dim);
        let scratch = || vec![0.0; width * dim.max(1)];
        Self {
            dim,
            layers: arch.hidden_sizes.iter().map(|&n| LayerRecord::new(n, dim)).collect(),
            x: [0.0; 3],
            order: Order::Value,
            kind: ActivationKind::Tanh,
            scale: 1.0,
            adj: [scratch(), scratch(), scratch()],
            prev: [scratch(), scratch(), scratch()],
        }
    }

    fn axes(&self) -> usize {
        if self.order == Order::Value {
            0
        } else {
            self.dim
        }
    }

    /// Records the pass for subdomain `m` at `x` and returns the requested quantities.
    pub fn forward(&mut self, params: &MLPParams, arch: &Architecture, m: usize, x: &Point, order: Order) -> FieldValue {
        let (kind, scale) = arch.subdomain_activation(params.slopes(), m);
        self.x = *x;
        self.order = order;
        self.kind = kind;
        self.scale = scale;
        let dim = self.dim;
        let axes = self.axes();
        let second = order == Order::Laplacian;
        let values = params.as_slice();
        let shapes = params.shapes();
        let hidden = self.layers.len();

        for l in 0..hidden {
            let shape = shapes[l];
            let (n, nin) = (shape.out_dim, shape.in_dim);
            let w = &values[shape.weight_offset..shape.bias_offset];
            let b = &values[shape.bias_offset..shape.bias_offset + n];
            let (before, rest) = self.layers.split_at_mut(l);
            let cur = &mut rest[0];
            for j in 0..n {
                let row = &w[j * nin..(j + 1) * nin];
                let zv;
                if l == 0 {
                    zv = b[j] + dot(row, &x[..dim]);
                    for (k, &rk) in row.iter().enumerate().take(axes) {
                        cur.z1[k * n + j] = rk;
                        cur.z2[k * n + j] = 0.0;
                    }
                } else {
                    let p = &before[l - 1];
                    zv = b[j] + dot(row, &p.hv[..nin]);
                    for k in 0..axes {
                        cur.z1[k * n + j] = dot(row, &p.h1[k * nin..(k + 1) * nin]);
                        cur.z2[k * n + j] = if second { dot(row, &p.h2[k * nin..(k + 1) * nin]) } else { 0.0 };
                    }
                }
                cur.zv[j] = zv;
                let a = act_eval3(kind, scale * zv);
                cur.hv[j] = a.value;
                cur.s1[j] = a.d1;
                cur.s2[j] = a.d2;
                cur.s3[j] = a.d3;
                for k in 0..axes {
                    let z1 = cur.z1[k * n + j];
                    let z2 = cur.z2[k * n + j];
                    cur.h1[k * n + j] = scale * a.d1 * z1;
                    cur.h2[k * n + j] = if second { scale * scale * a.d2 * z1 * z1 + scale * a.d1 * z2 } else { 0.0 };
                }
            }
        }

        let out = shapes[hidden];
        let last = &self.layers[hidden - 1];
        let n = out.in_dim;
        let w = &values[out.weight_offset..out.bias_offset];
        let mut fv = FieldValue { u: values[out.bias_offset] + dot(w, &last.hv[..n]), ..Default::default() };
        for k in 0..axes {
            fv.grad[k] = dot(w, &last.h1[k * n..(k + 1) * n]);
            if second {
                fv.laplacian += dot(w, &last.h2[k * n..(k + 1) * n]);
            }
        }
        fv
    }

    /// Accumulates the parameter gradient of `seed · (u, ∇u, Δu)` for the recorded pass.
    ///
    /// `slope` is the flat index of the subdomain's `a_m` when it is trainable.
    pub fn backward(&mut self, params: &MLPParams, arch: &Architecture, slope: Option<usize>, seed: &Seed, grad: &mut [f64]) {
        let dim = self.dim;
        let axes = self.axes();
        let second = self.order == Order::Laplacian;
        let s = self.scale;
        let values = params.as_slice();
        let shapes = params.shapes();
        let hidden = self.layers.len();

        let out = shapes[hidden];
        let n = out.in_dim;
        let w_out = &values[out.weight_offset..out.bias_offset];
        {
            let last = &self.layers[hidden - 1];
            let [av, a1, a2] = &mut self.adj;
            for i in 0..n {
                let mut g = seed.u * last.hv[i];
                for k in 0..axes {
                    g += seed.grad[k] * last.h1[k * n + i];
                    if second {
                        g += seed.laplacian * last.h2[k * n + i];
                    }
                }
                grad[out.weight_offset + i] += g;
                av[i] = w_out[i] * seed.u;
                for k in 0..axes {
                    a1[k * n + i] = w_out[i] * seed.grad[k];
                    a2[k * n + i] = if second { w_out[i] * seed.laplacian } else { 0.0 };
                }
            }
            grad[out.bias_offset] += seed.u;
        }

        let mut s_bar = 0.0;
        for l in (0..hidden).rev() {
            let shape = shapes[l];
            let (n, nin) = (shape.out_dim, shape.in_dim);
            let rec = &self.layers[l];
            let [av, a1, a2] = &mut self.adj;

            // turn adjoints of (hv, h1, h2) into adjoints of (zv, z1, z2)
            for (j, avj) in av.iter_mut().enumerate().take(n) {
                let (d1, d2, d3) = (rec.s1[j], rec.s2[j], rec.s3[j]);
                let mut t_bar = *avj * d1;
                let mut explicit = 0.0;
                for k in 0..axes {
                    let idx = k * n + j;
                    let (z1, z2) = (rec.z1[idx], rec.z2[idx]);
                    let (b1, b2) = (a1[idx], a2[idx]);
                    t_bar += b1 * s * d2 * z1;
                    explicit += b1 * d1 * z1;
                    a1[idx] = b1 * s * d1;
                    if second {
                        t_bar += b2 * (s * s * d3 * z1 * z1 + s * d2 * z2);
                        explicit += b2 * (2.0 * s * d2 * z1 * z1 + d1 * z2);
                        a1[idx] += b2 * 2.0 * s * s * d2 * z1;
                        a2[idx] = b2 * s * d1;
                    }
                }
                s_bar += explicit + rec.zv[j] * t_bar;
                *avj = s * t_bar;
            }

            let w = &values[shape.weight_offset..shape.bias_offset];
            let (gw, gb) = grad[shape.weight_offset..shape.bias_offset + n].split_at_mut(n * nin);
            if l == 0 {
                for j in 0..n {
                    let row = &mut gw[j * nin..(j + 1) * nin];
                    let zv = av[j];
                    for (i, g) in row.iter_mut().enumerate().take(dim) {
                        *g += zv * self.x[i];
                    }
                    for k in 0..axes {
                        row[k] += a1[k * n + j];
                    }
                    gb[j] += zv;
                }
            } else {
                let p = &self.layers[l - 1];
                let [pv, p1, p2] = &mut self.prev;
                pv[..nin].fill(0.0);
                p1[..axes * nin].fill(0.0);
                p2[..axes * nin].fill(0.0);
                for j in 0..n {
                    let wrow = &w[j * nin..(j + 1) * nin];
                    let grow = &mut gw[j * nin..(j + 1) * nin];
                    let zv = av[j];
                    axpy(grow, zv, &p.hv[..nin]);
                    axpy(&mut pv[..nin], zv, wrow);
                    for k in 0..axes {
                        let r = k * nin..(k + 1) * nin;
                        let z1 = a1[k * n + j];
                        axpy(grow, z1, &p.h1[r.clone()]);
                        axpy(&mut p1[r.clone()], z1, wrow);
                        if second {
                            let z2 = a2[k * n + j];
                            axpy(grow, z2, &p.h2[r.clone()]);
                            axpy(&mut p2[r], z2, wrow);
                        }
                    }
                    gb[j] += zv;
                }
                std::mem::swap(&mut self.adj, &mut self.prev);
            }
        }

        if let Some(idx) = slope {
            grad[idx] += arch.scale_n * s_bar;
        }
    }
}

/// Four independent partial sums so the additions pipeline.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
