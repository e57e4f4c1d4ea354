//! Shared-parameter multi-subdomain MLP.
//!
//! One set of weights and biases serves every subdomain. Subdomain `m` differs
//! only in its hidden-layer activation: a fixed kind per subdomain (interface
//! mode) or a common kind with effective slope `n · a_m` (adaptive mode). The
//! slope multiplies the full pre-activation, bias included. The output layer is
//! affine.
//!
//! Subdomain indices are zero-based in code; reports and CSV headers use `a_1..a_M`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{act_eval3, ActivationKind};
use crate::autodiff::{jet_activation, jet_affine, Jet2};
use crate::loss::{FieldEvaluator, FieldValue};
use crate::problems::Point;

/// Initial value of every trainable slope.
pub const INITIAL_SLOPE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Mode {
    /// One activation kind everywhere, trainable slope per subdomain.
    Adai { kind: ActivationKind },
    /// Fixed activation kind per subdomain, no slopes.
    Ipinn { kinds: Vec<ActivationKind> },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchitectureError {
    #[error("input_dim must be 1, 2 or 3, got {0}")]
    InputDim(usize),
    #[error("at least one hidden layer is required")]
    NoHiddenLayers,
    #[error("hidden layer {0} has zero width")]
    EmptyLayer(usize),
    #[error("at least two subdomains are required, got {0}")]
    TooFewSubdomains(usize),
    #[error("interface mode needs {expected} activation kinds (one per subdomain), got {found}")]
    KindCount { expected: usize, found: usize },
    #[error("scale_n must be finite and nonzero, got {0}")]
    Scale(f64),
    #[error("parameter vector has length {found}, architecture needs {expected}")]
    ParamCount { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub num_subdomains: usize,
    pub scale_n: f64,
    pub mode: Mode,
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<(), ArchitectureError> {
        if !(1..=3).contains(&self.input_dim) {
            return Err(ArchitectureError::InputDim(self.input_dim));
        }
        if self.hidden_sizes.is_empty() {
            return Err(ArchitectureError::NoHiddenLayers);
        }
        if let Some(i) = self.hidden_sizes.iter().position(|&w| w == 0) {
            return Err(ArchitectureError::EmptyLayer(i));
        }
        if self.num_subdomains < 2 {
            return Err(ArchitectureError::TooFewSubdomains(self.num_subdomains));
        }
        if !self.scale_n.is_finite() || self.scale_n == 0.0 {
            return Err(ArchitectureError::Scale(self.scale_n));
        }
        if let Mode::Ipinn { kinds } = &self.mode {
            if kinds.len() != self.num_subdomains {
                return Err(ArchitectureError::KindCount {
                    expected: self.num_subdomains,
                    found: kinds.len(),
                });
            }
        }
        Ok(())
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.mode, Mode::Adai { .. })
    }

    /// `[input_dim, hidden..., 1]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(1);
        sizes
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let sizes = self.layer_sizes();
        let mut offset = 0;
        sizes
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    in_dim: w[0],
                    out_dim: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                shape
            })
            .collect()
    }

    /// Number of weights and biases.
    pub fn weight_bias_count(&self) -> usize {
        self.layer_sizes().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Total slots: weights, biases and one slope per subdomain.
    pub fn param_count(&self) -> usize {
        self.weight_bias_count() + self.num_subdomains
    }

    /// Slots updated by the optimizer. Slopes are frozen in interface mode.
    pub fn trainable_count(&self) -> usize {
        if self.is_adaptive() {
            self.param_count()
        } else {
            self.weight_bias_count()
        }
    }

    /// Activation kind and effective slope used by subdomain `m`.
    #[inline]
    pub fn subdomain_activation(&self, slopes: &[f64], m: usize) -> (ActivationKind, f64) {
        match &self.mode {
            Mode::Adai { kind } => (*kind, self.scale_n * slopes[m]),
            Mode::Ipinn { kinds } => (kinds[m], 1.0),
        }
    }
}

/// Flat parameter vector: per layer `W` (row-major, out × in) then `b`, then the slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct MLPParams {
    values: Vec<f64>,
    shapes: Vec<LayerShape>,
    num_subdomains: usize,
}

/// Borrowed view of one dense layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    pub weights: &'a [f64],
    pub bias: &'a [f64],
    pub in_dim: usize,
    pub out_dim: usize,
}

impl MLPParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let mut params = Self {
            values: vec![0.0; arch.param_count()],
            shapes: arch.layer_shapes(),
            num_subdomains: arch.num_subdomains,
        };
        let slope = if arch.is_adaptive() { INITIAL_SLOPE } else { 1.0 };
        params.slopes_mut().fill(slope);
        params
    }

    pub fn from_flat(arch: &Architecture, values: Vec<f64>) -> Result<Self, ArchitectureError> {
        if values.len() != arch.param_count() {
            return Err(ArchitectureError::ParamCount {
                expected: arch.param_count(),
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            shapes: arch.layer_shapes(),
            num_subdomains: arch.num_subdomains,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn num_layers(&self) -> usize {
        self.shapes.len()
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let s = self.shapes[l];
        LayerView {
            weights: &self.values[s.weight_offset..s.bias_offset],
            bias: &self.values[s.bias_offset..s.bias_offset + s.out_dim],
            in_dim: s.in_dim,
            out_dim: s.out_dim,
        }
    }

    pub fn slope_offset(&self) -> usize {
        self.values.len() - self.num_subdomains
    }

    pub fn slopes(&self) -> &[f64] {
        &self.values[self.slope_offset()..]
    }

    pub fn slopes_mut(&mut self) -> &mut [f64] {
        let off = self.slope_offset();
        &mut self.values[off..]
    }
}

/// Xavier-uniform weights, zero biases, slopes at [`INITIAL_SLOPE`] (1 in interface mode).
pub fn init_xavier(arch: &Architecture, seed: u64) -> MLPParams {
    let mut params = MLPParams::zeros(arch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for shape in arch.layer_shapes() {
        let limit = (6.0 / (shape.in_dim + shape.out_dim) as f64).sqrt();
        for w in &mut params.values[shape.weight_offset..shape.bias_offset] {
            *w = rng.random_range(-limit..=limit);
        }
    }
    params
}

/// Network value for subdomain `m` at `x`.
pub fn forward(params: &MLPParams, arch: &Architecture, m: usize, x: &Point) -> f64 {
    let (kind, scale) = arch.subdomain_activation(params.slopes(), m);
    let mut h: Vec<f64> = x[..arch.input_dim].to_vec();
    let last = params.num_layers() - 1;
    for l in 0..=last {
        let layer = params.layer(l);
        let z = layer
            .weights
            .chunks_exact(layer.in_dim)
            .zip(layer.bias)
            .map(|(row, &b)| row.iter().zip(&h).fold(b, |acc, (w, v)| acc + w * v));
        h = if l == last {
            z.collect()
        } else {
            z.map(|z| act_eval3(kind, scale * z).value).collect()
        };
    }
    h[0]
}

/// Value, gradient and Laplacian with respect to the input, one jet pass per coordinate.
pub fn forward_with_derivs(params: &MLPParams, arch: &Architecture, m: usize, x: &Point) -> FieldValue {
    let (kind, scale) = arch.subdomain_activation(params.slopes(), m);
    let dim = arch.input_dim;
    let last = params.num_layers() - 1;
    let mut out = FieldValue::default();
    for axis in 0..dim {
        let mut h = Jet2::seed_point(&x[..dim], axis);
        for l in 0..=last {
            let layer = params.layer(l);
            // shapes come from the architecture, so a mismatch is a construction bug
            h = jet_affine(layer.weights, layer.bias, &h).expect("layer shapes are consistent");
            if l != last {
                for j in h.iter_mut() {
                    *j = jet_activation(kind, scale, *j);
                }
            }
        }
        out.u = h[0].val;
        out.grad[axis] = h[0].d1;
        out.laplacian += h[0].d2;
    }
    out
}

/// Network bound to its architecture, usable wherever a field is expected.
#[derive(Clone, Copy, Debug)]
pub struct NetworkField<'a> {
    pub params: &'a MLPParams,
    pub arch: &'a Architecture,
}

impl FieldEvaluator for NetworkField<'_> {
    fn value(&self, m: usize, x: &Point) -> f64 {
        forward(self.params, self.arch, m, x)
    }

    fn value_and_derivs(&self, m: usize, x: &Point) -> FieldValue {
        forward_with_derivs(self.params, self.arch, m, x)
    }
}

/// Serialized parameter snapshot: architecture header plus the flat vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub architecture: Architecture,
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl ParamSnapshot {
    pub fn new(arch: &Architecture, params: &MLPParams) -> Self {
        Self {
            architecture: arch.clone(),
            layer_sizes: arch.layer_sizes(),
            params: params.as_slice().to_vec(),
        }
    }

    pub fn restore(&self) -> Result<(Architecture, MLPParams), ArchitectureError> {
        self.architecture.validate()?;
        let params = MLPParams::from_flat(&self.architecture, self.params.clone())?;
        Ok((self.architecture.clone(), params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch(dim: usize, hidden: &[usize], mode: Mode) -> Architecture {
        Architecture {
            input_dim: dim,
            hidden_sizes: hidden.to_vec(),
            num_subdomains: 3,
            scale_n: 10.0,
            mode,
        }
    }

    fn adai(dim: usize, hidden: &[usize]) -> Architecture {
        arch(dim, hidden, Mode::Adai { kind: ActivationKind::Tanh })
    }

    #[test]
    fn validation() {
        assert!(adai(2, &[4, 4]).validate().is_ok());
        assert_eq!(adai(4, &[4]).validate(), Err(ArchitectureError::InputDim(4)));
        assert_eq!(adai(1, &[]).validate(), Err(ArchitectureError::NoHiddenLayers));
        assert_eq!(adai(1, &[3, 0]).validate(), Err(ArchitectureError::EmptyLayer(1)));
        let mut a = adai(1, &[3]);
        a.num_subdomains = 1;
        assert_eq!(a.validate(), Err(ArchitectureError::TooFewSubdomains(1)));
        let a = arch(1, &[3], Mode::Ipinn { kinds: vec![ActivationKind::Tanh; 2] });
        assert_eq!(a.validate(), Err(ArchitectureError::KindCount { expected: 3, found: 2 }));
    }

    #[test]
    fn counts_and_layout() {
        let a = adai(2, &[5, 4]);
        // 2*5+5 + 5*4+4 + 4*1+1 = 44
        assert_eq!(a.weight_bias_count(), 44);
        assert_eq!(a.param_count(), 47);
        assert_eq!(a.trainable_count(), 47);
        let ip = arch(2, &[5, 4], Mode::Ipinn { kinds: vec![ActivationKind::Tanh; 3] });
        assert_eq!(ip.trainable_count(), 44);
        let shapes = a.layer_shapes();
        assert_eq!(shapes[1].weight_offset, 15);
        assert_eq!(shapes[2].bias_offset, 43);
    }

    #[test]
    fn xavier_init() {
        let a = adai(1, &[10, 10, 10]);
        let p = init_xavier(&a, 3);
        assert!(p.slopes().iter().all(|&s| s == 0.5));
        let bound = (6.0f64 / 20.0).sqrt();
        assert!((bound - 0.5477).abs() < 1e-4);
        let mid = p.layer(1);
        assert!(mid.weights.iter().all(|w| w.abs() <= bound));
        assert!(mid.bias.iter().all(|&b| b == 0.0));
        assert_eq!(p, init_xavier(&a, 3));
        assert_ne!(p, init_xavier(&a, 4));
    }

    #[test]
    fn zero_params_give_zero_field() {
        let a = adai(3, &[6, 6]);
        let mut p = MLPParams::zeros(&a);
        p.slopes_mut().copy_from_slice(&[0.3, 0.9, 2.0]);
        for m in 0..3 {
            let x = [0.3, -0.7, 0.2];
            assert_eq!(forward(&p, &a, m, &x), 0.0);
            assert_eq!(forward_with_derivs(&p, &a, m, &x), FieldValue::default());
        }
    }

    #[test]
    fn equal_slopes_equal_outputs() {
        let a = adai(2, &[6, 6]);
        let mut p = init_xavier(&a, 11);
        p.slopes_mut().copy_from_slice(&[0.4, 0.4, 0.9]);
        let x = [0.31, 0.77, 0.0];
        assert_eq!(forward(&p, &a, 0, &x), forward(&p, &a, 1, &x));
        assert_ne!(forward(&p, &a, 0, &x), forward(&p, &a, 2, &x));
    }

    #[test]
    fn single_hidden_layer_gradient_at_origin() {
        // u = W2 tanh(s W1 x) + b2 with zero hidden bias: grad u(0) = W2 · s · W1
        let a = adai(2, &[3]);
        let mut p = init_xavier(&a, 5);
        let b2 = 0.37;
        let off = p.shapes()[1].bias_offset;
        p.as_mut_slice()[off] = b2;
        let s = a.scale_n * p.slopes()[1];
        let w1 = p.layer(0).weights.to_vec();
        let w2 = p.layer(1).weights.to_vec();
        let fv = forward_with_derivs(&p, &a, 1, &[0.0; 3]);
        assert_eq!(fv.u, b2);
        for axis in 0..2 {
            let expect: f64 = (0..3).map(|j| w2[j] * s * w1[j * 2 + axis]).sum();
            assert!((fv.grad[axis] - expect).abs() < 1e-14);
            let h = 1e-6;
            let mut xp = [0.0; 3];
            xp[axis] = h;
            let mut xm = [0.0; 3];
            xm[axis] = -h;
            let fd = (forward(&p, &a, 1, &xp) - forward(&p, &a, 1, &xm)) / (2.0 * h);
            assert!((fd - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn laplacian_matches_second_difference_1d() {
        let a = adai(1, &[8, 8]);
        let mut p = init_xavier(&a, 9);
        p.slopes_mut().copy_from_slice(&[0.1, 0.2, 0.15]);
        let h = 1e-4;
        for &x0 in &[0.05, 0.3, 0.71] {
            let f = |x: f64| forward(&p, &a, 2, &[x, 0.0, 0.0]);
            let fd = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
            let lap = forward_with_derivs(&p, &a, 2, &[x0, 0.0, 0.0]).laplacian;
            assert!(((lap - fd) / lap).abs() < 1e-5, "{lap} vs {fd}");
        }
    }

    #[test]
    fn shared_weights_and_local_slopes() {
        let a = adai(2, &[5, 5]);
        let p = init_xavier(&a, 21);
        let x = [0.2, 0.6, 0.0];
        let before: Vec<f64> = (0..3).map(|m| forward(&p, &a, m, &x)).collect();

        let mut q = p.clone();
        q.as_mut_slice()[7] += 0.05;
        for (m, &b) in before.iter().enumerate() {
            assert_ne!(forward(&q, &a, m, &x), b);
        }

        let mut r = p.clone();
        r.slopes_mut()[1] += 0.05;
        assert_eq!(forward(&r, &a, 0, &x), before[0]);
        assert_ne!(forward(&r, &a, 1, &x), before[1]);
        assert_eq!(forward(&r, &a, 2, &x), before[2]);
    }

    #[test]
    fn adaptive_unit_slope_equals_interface_mode() {
        let kind = ActivationKind::Swish;
        let mut ada = adai(2, &[6, 4]);
        ada.mode = Mode::Adai { kind };
        ada.scale_n = 1.0;
        let ip = arch(2, &[6, 4], Mode::Ipinn { kinds: vec![kind; 3] });
        let mut p = init_xavier(&ada, 2);
        p.slopes_mut().fill(1.0);
        let q = MLPParams::from_flat(&ip, p.as_slice().to_vec()).unwrap();
        for m in 0..3 {
            let x = [0.1 * m as f64, 0.9, 0.0];
            assert_eq!(forward(&p, &ada, m, &x), forward(&q, &ip, m, &x));
            assert_eq!(forward_with_derivs(&p, &ada, m, &x), forward_with_derivs(&q, &ip, m, &x));
        }
    }

    #[test]
    fn only_slope_product_matters() {
        let a = adai(2, &[5, 5]);
        let p = init_xavier(&a, 8);
        for c in [2.0, 4.0, 0.5, 0.125] {
            let mut b = a.clone();
            b.scale_n /= c;
            let mut q = p.clone();
            q.slopes_mut().iter_mut().for_each(|s| *s *= c);
            let x = [0.4, 0.1, 0.0];
            for m in 0..3 {
                assert_eq!(forward(&p, &a, m, &x), forward(&q, &b, m, &x));
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let a = arch(3, &[4], Mode::Ipinn { kinds: vec![ActivationKind::Gelu, ActivationKind::Mish, ActivationKind::Tanh] });
        let p = init_xavier(&a, 1);
        let json = serde_json::to_string(&ParamSnapshot::new(&a, &p)).unwrap();
        let snap: ParamSnapshot = serde_json::from_str(&json).unwrap();
        let (b, q) = snap.restore().unwrap();
        assert_eq!(a, b);
        assert_eq!(p, q);
        assert_eq!(snap.layer_sizes, vec![3, 4, 1]);
    }
}
