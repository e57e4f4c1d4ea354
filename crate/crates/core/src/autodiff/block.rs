//! The tape of [`super::Tape`], run over a block of points at once.
//!
//! Every layer holds a row-major `neurons × columns` matrix whose columns are
//! `(stream, point)` pairs: stream 0 is the value, streams `1..=K` the first
//! derivatives along each axis and, for Laplacian passes, streams `K+1..=2K`
//! the second derivatives. Mixing layers are then plain matrix products.

use super::tape::{Order, Seed};
use crate::activations::{act_eval3, ActivationKind};
use crate::loss::FieldValue;
use crate::network::{Architecture, MLPParams};
use crate::problems::Point;

#[derive(Clone, Debug, Default)]
struct BlockLayer {
    z: Vec<f64>,
    h: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
}

/// Reusable buffers for one block of evaluations.
#[derive(Clone, Debug)]
pub struct BlockTape {
    dim: usize,
    order: Order,
    points: usize,
    subdomains: Vec<usize>,
    kinds: Vec<ActivationKind>,
    scales: Vec<f64>,
    input: Vec<f64>,
    layers: Vec<BlockLayer>,
    adj: Vec<f64>,
    prev: Vec<f64>,
    row: Vec<f64>,
    s_bar: Vec<f64>,
}

/// Row-major `r × c` operand, optionally read transposed.
#[derive(Clone, Copy)]
struct Mat<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl<'a> Mat<'a> {
    fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        assert!(data.len() >= rows * cols);
        Self { data, rows, cols, transposed: false }
    }

    fn t(self) -> Self {
        Self { transposed: !self.transposed, ..self }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = a·b + beta·c` for a row-major `c`.
fn gemm(a: Mat, b: Mat, beta: f64, c: &mut [f64]) {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    assert_eq!(k, kb);
    assert!(c.len() >= m * n);
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the shape checks above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn resize(v: &mut Vec<f64>, len: usize) {
    v.clear();
    v.resize(len, 0.0);
}

impl BlockTape {
    pub fn new(arch: &Architecture) -> Self {
        Self {
            dim: arch.input_dim,
            order: Order::Value,
            points: 0,
            subdomains: Vec::new(),
            kinds: Vec::new(),
            scales: Vec::new(),
            input: Vec::new(),
            layers: vec![BlockLayer::default(); arch.hidden_sizes.len()],
            adj: Vec::new(),
            prev: Vec::new(),
            row: Vec::new(),
            s_bar: Vec::new(),
        }
    }

    fn axes(&self) -> usize {
        if self.order == Order::Value {
            0
        } else {
            self.dim
        }
    }

    fn streams(&self) -> usize {
        match self.order {
            Order::Value => 1,
            Order::Gradient => 1 + self.dim,
            Order::Laplacian => 1 + 2 * self.dim,
        }
    }

    /// Records the pass for point `points[b]` in subdomain `subdomains[b]`.
    pub fn forward(
        &mut self,
        params: &MLPParams,
        arch: &Architecture,
        subdomains: &[usize],
        points: &[Point],
        order: Order,
        out: &mut Vec<FieldValue>,
    ) {
        assert_eq!(subdomains.len(), points.len());
        let nb = points.len();
        self.order = order;
        self.points = nb;
        self.subdomains.clear();
        self.subdomains.extend_from_slice(subdomains);
        self.kinds.clear();
        self.scales.clear();
        for &m in subdomains {
            let (kind, scale) = arch.subdomain_activation(params.slopes(), m);
            self.kinds.push(kind);
            self.scales.push(scale);
        }
        let dim = self.dim;
        let axes = self.axes();
        let second = order == Order::Laplacian;
        let cols = self.streams() * nb;

        resize(&mut self.input, dim * cols);
        for (b, x) in points.iter().enumerate() {
            for (i, &xi) in x.iter().enumerate().take(dim) {
                self.input[i * cols + b] = xi;
            }
        }
        for k in 0..axes {
            for b in 0..nb {
                self.input[k * cols + (1 + k) * nb + b] = 1.0;
            }
        }

        let values = params.as_slice();
        let shapes = params.shapes();
        for l in 0..self.layers.len() {
            let shape = shapes[l];
            let (n, nin) = (shape.out_dim, shape.in_dim);
            let w = &values[shape.weight_offset..shape.bias_offset];
            let bias = &values[shape.bias_offset..shape.bias_offset + n];
            let (before, rest) = self.layers.split_at_mut(l);
            let cur = &mut rest[0];
            let hp = if l == 0 { &self.input } else { &before[l - 1].h };
            resize(&mut cur.z, n * cols);
            resize(&mut cur.h, n * cols);
            resize(&mut cur.s1, n * nb);
            resize(&mut cur.s2, n * nb);
            resize(&mut cur.s3, n * nb);
            gemm(Mat::new(w, n, nin), Mat::new(hp, nin, cols), 0.0, &mut cur.z);

            for (j, &bj) in bias.iter().enumerate() {
                let z = &mut cur.z[j * cols..(j + 1) * cols];
                let h = &mut cur.h[j * cols..(j + 1) * cols];
                for b in 0..nb {
                    z[b] += bj;
                    let s = self.scales[b];
                    let a = act_eval3(self.kinds[b], s * z[b]);
                    h[b] = a.value;
                    cur.s1[j * nb + b] = a.d1;
                    cur.s2[j * nb + b] = a.d2;
                    cur.s3[j * nb + b] = a.d3;
                    for k in 0..axes {
                        let c1 = (1 + k) * nb + b;
                        let z1 = z[c1];
                        h[c1] = s * a.d1 * z1;
                        if second {
                            let c2 = (1 + axes + k) * nb + b;
                            h[c2] = s * s * a.d2 * z1 * z1 + s * a.d1 * z[c2];
                        }
                    }
                }
            }
        }

        let outs = shapes[self.layers.len()];
        let n = outs.in_dim;
        let w = &values[outs.weight_offset..outs.bias_offset];
        let last = &self.layers[self.layers.len() - 1].h;
        resize(&mut self.row, cols);
        for (j, &wj) in w.iter().enumerate().take(n) {
            for (r, &h) in self.row.iter_mut().zip(&last[j * cols..(j + 1) * cols]) {
                *r += wj * h;
            }
        }
        out.clear();
        for b in 0..nb {
            let mut fv = FieldValue { u: values[outs.bias_offset] + self.row[b], ..Default::default() };
            for k in 0..axes {
                fv.grad[k] = self.row[(1 + k) * nb + b];
                if second {
                    fv.laplacian += self.row[(1 + axes + k) * nb + b];
                }
            }
            out.push(fv);
        }
    }

    /// Accumulates the parameter gradient of `Σ_b seeds[b] · (u, ∇u, Δu)(x_b)`.
    pub fn backward(&mut self, params: &MLPParams, arch: &Architecture, seeds: &[Seed], grad: &mut [f64]) {
        let nb = self.points;
        assert_eq!(seeds.len(), nb);
        let axes = self.axes();
        let second = self.order == Order::Laplacian;
        let cols = self.streams() * nb;
        let values = params.as_slice();
        let shapes = params.shapes();
        let hidden = self.layers.len();

        resize(&mut self.row, cols);
        for (b, seed) in seeds.iter().enumerate() {
            self.row[b] = seed.u;
            for k in 0..axes {
                self.row[(1 + k) * nb + b] = seed.grad[k];
                if second {
                    self.row[(1 + axes + k) * nb + b] = seed.laplacian;
                }
            }
        }
        let outs = shapes[hidden];
        let n = outs.in_dim;
        let w_out = &values[outs.weight_offset..outs.bias_offset];
        let last = &self.layers[hidden - 1].h;
        resize(&mut self.adj, n * cols);
        for j in 0..n {
            let h = &last[j * cols..(j + 1) * cols];
            grad[outs.weight_offset + j] += dot(h, &self.row);
            for (a, &r) in self.adj[j * cols..(j + 1) * cols].iter_mut().zip(&self.row) {
                *a = w_out[j] * r;
            }
        }
        grad[outs.bias_offset] += seeds.iter().map(|s| s.u).sum::<f64>();

        resize(&mut self.s_bar, nb);
        for l in (0..hidden).rev() {
            let shape = shapes[l];
            let (n, nin) = (shape.out_dim, shape.in_dim);
            let rec = &self.layers[l];

            // adjoints of (h, h', h'') become adjoints of (z, z', z'')
            for j in 0..n {
                let z = &rec.z[j * cols..(j + 1) * cols];
                let a = &mut self.adj[j * cols..(j + 1) * cols];
                for b in 0..nb {
                    let s = self.scales[b];
                    let (d1, d2, d3) = (rec.s1[j * nb + b], rec.s2[j * nb + b], rec.s3[j * nb + b]);
                    let mut t_bar = a[b] * d1;
                    let mut explicit = 0.0;
                    for k in 0..axes {
                        let c1 = (1 + k) * nb + b;
                        let z1 = z[c1];
                        let b1 = a[c1];
                        t_bar += b1 * s * d2 * z1;
                        explicit += b1 * d1 * z1;
                        a[c1] = b1 * s * d1;
                        if second {
                            let c2 = (1 + axes + k) * nb + b;
                            let (z2, b2) = (z[c2], a[c2]);
                            t_bar += b2 * (s * s * d3 * z1 * z1 + s * d2 * z2);
                            explicit += b2 * (2.0 * s * d2 * z1 * z1 + d1 * z2);
                            a[c1] += b2 * 2.0 * s * s * d2 * z1;
                            a[c2] = b2 * s * d1;
                        }
                    }
                    self.s_bar[b] += explicit + z[b] * t_bar;
                    a[b] = s * t_bar;
                }
            }

            let w = &values[shape.weight_offset..shape.bias_offset];
            let hp = if l == 0 { &self.input } else { &self.layers[l - 1].h };
            let (gw, gb) = grad[shape.weight_offset..shape.bias_offset + n].split_at_mut(n * nin);
            gemm(Mat::new(&self.adj, n, cols), Mat::new(hp, nin, cols).t(), 1.0, gw);
            for (j, g) in gb.iter_mut().enumerate() {
                *g += self.adj[j * cols..j * cols + nb].iter().sum::<f64>();
            }
            if l > 0 {
                resize(&mut self.prev, nin * cols);
                gemm(Mat::new(w, n, nin).t(), Mat::new(&self.adj, n, cols), 0.0, &mut self.prev);
                std::mem::swap(&mut self.adj, &mut self.prev);
            }
        }

        if arch.is_adaptive() {
            let offset = params.slope_offset();
            for (&m, &sb) in self.subdomains.iter().zip(&self.s_bar) {
                grad[offset + m] += arch.scale_n * sb;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
