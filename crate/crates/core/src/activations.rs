//! Smooth scalar activations with exact derivatives up to third order.
//!
//! Second derivatives are needed for the PDE residual (the network Laplacian),
//! and the third derivative appears when that residual is differentiated with
//! respect to the network parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Activation catalog. Every member is C^∞ on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Sigmoid,
    Swish,
    Softplus,
    Gelu,
    Mish,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 6] = [
        ActivationKind::Tanh,
        ActivationKind::Swish,
        ActivationKind::Sigmoid,
        ActivationKind::Softplus,
        ActivationKind::Gelu,
        ActivationKind::Mish,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Swish => "swish",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Mish => "mish",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown activation `{name}` (valid kinds: {valid})")]
pub struct UnknownActivation {
    pub name: String,
    pub valid: String,
}

impl FromStr for ActivationKind {
    type Err = UnknownActivation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| UnknownActivation {
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

/// Value and first three derivatives of an activation at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActDerivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Returns `(σ(z), σ'(z), σ''(z))`.
pub fn act_eval2(kind: ActivationKind, z: f64) -> (f64, f64, f64) {
    let d = act_eval3(kind, z);
    (d.value, d.d1, d.d2)
}

/// Logistic function and its derivatives, overflow-free for any finite `z`.
#[inline]
fn sigmoid_derivs(z: f64) -> ActDerivs {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // 1 - s computed without cancellation
    let one_minus = if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    };
    let d1 = s * one_minus;
    let d2 = d1 * (one_minus - s);
    let d3 = d2 * (one_minus - s) - 2.0 * d1 * d1;
    ActDerivs { value: s, d1, d2, d3 }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn tanh_derivs(z: f64) -> ActDerivs {
    let t = z.tanh();
    let d1 = 1.0 - t * t;
    let d2 = -2.0 * t * d1;
    let d3 = -2.0 * d1 * d1 - 2.0 * t * d2;
    ActDerivs { value: t, d1, d2, d3 }
}

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2π)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Returns `σ(z)` and its first three derivatives.
#[inline]
pub fn act_eval3(kind: ActivationKind, z: f64) -> ActDerivs {
    match kind {
        ActivationKind::Tanh => tanh_derivs(z),
        ActivationKind::Sigmoid => sigmoid_derivs(z),
        ActivationKind::Swish => {
            let s = sigmoid_derivs(z);
            ActDerivs {
                value: z * s.value,
                d1: s.value + z * s.d1,
                d2: 2.0 * s.d1 + z * s.d2,
                d3: 3.0 * s.d2 + z * s.d3,
            }
        }
        ActivationKind::Softplus => {
            let s = sigmoid_derivs(z);
            ActDerivs { value: softplus(z), d1: s.value, d2: s.d1, d3: s.d2 }
        }
        ActivationKind::Gelu => {
            let cdf = 0.5 * libm::erfc(-z * INV_SQRT_2);
            let pdf = INV_SQRT_2PI * (-0.5 * z * z).exp();
            ActDerivs {
                value: z * cdf,
                d1: cdf + z * pdf,
                d2: pdf * (2.0 - z * z),
                d3: pdf * z * (z * z - 4.0),
            }
        }
        ActivationKind::Mish => {
            // mish(z) = z·g(z), g = tanh(softplus(z)), softplus' = sigmoid
            let s = sigmoid_derivs(z);
            let g = softplus(z).tanh();
            let t = 1.0 - g * g;
            let g1 = t * s.value;
            let t1 = -2.0 * g * g1;
            let g2 = t1 * s.value + t * s.d1;
            let t2 = -2.0 * (g1 * g1 + g * g2);
            let g3 = t2 * s.value + 2.0 * t1 * s.d1 + t * s.d2;
            ActDerivs {
                value: z * g,
                d1: g + z * g1,
                d2: 2.0 * g1 + z * g2,
                d3: 3.0 * g2 + z * g3,
            }
        }
    }
}
