//! Second-order directional jets.

use crate::activations::{act_eval3, ActivationKind};

use super::AutodiffError;

/// Value with first and second derivative along one fixed input direction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const fn new(val: f64, d1: f64, d2: f64) -> Self {
        Self { val, d1, d2 }
    }

    pub const fn constant(val: f64) -> Self {
        Self { val, d1: 0.0, d2: 0.0 }
    }

    /// The coordinate being differentiated along: `d/dt (x + t) = 1`.
    pub const fn seed(val: f64) -> Self {
        Self { val, d1: 1.0, d2: 0.0 }
    }

    /// Lifts a point into jets seeded along coordinate `axis`.
    pub fn seed_point(x: &[f64], axis: usize) -> Vec<Jet2> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| if i == axis { Jet2::seed(v) } else { Jet2::constant(v) })
            .collect()
    }

    /// Univariate chain rule to second order for `f` with derivatives `f1`, `f2` at `self.val`.
    #[inline]
    pub fn chain(self, f: f64, f1: f64, f2: f64) -> Self {
        Self {
            val: f,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }
}

/// `out_j = Σ_k w_jk · in_k + b_j`, applied slot-wise (affine maps carry no curvature).
///
/// `weights` is row-major with shape `bias.len() × inputs.len()`.
pub fn jet_affine(weights: &[f64], bias: &[f64], inputs: &[Jet2]) -> Result<Vec<Jet2>, AutodiffError> {
    let out_dim = bias.len();
    let in_dim = inputs.len();
    if weights.len() != out_dim * in_dim {
        return Err(AutodiffError::DimensionMismatch {
            expected: out_dim * in_dim,
            found: weights.len(),
        });
    }
    Ok(weights
        .chunks_exact(in_dim.max(1))
        .take(out_dim)
        .zip(bias)
        .map(|(row, &b)| {
            row.iter().zip(inputs).fold(Jet2::constant(b), |acc, (&w, j)| Jet2 {
                val: acc.val + w * j.val,
                d1: acc.d1 + w * j.d1,
                d2: acc.d2 + w * j.d2,
            })
        })
        .collect())
}

/// `σ(scale · x)` on a jet.
pub fn jet_activation(kind: ActivationKind, scale: f64, input: Jet2) -> Jet2 {
    let d = act_eval3(kind, scale * input.val);
    Jet2 {
        val: d.value,
        d1: scale * d.d1 * input.d1,
        d2: scale * scale * d.d2 * input.d1 * input.d1 + scale * d.d1 * input.d2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_examples() {
        let out = jet_affine(&[2.0], &[1.0], &[Jet2::new(3.0, 1.0, 0.0)]).unwrap();
        assert_eq!(out, vec![Jet2::new(7.0, 2.0, 0.0)]);

        let out = jet_affine(&[1.0, 1.0], &[0.0], &[Jet2::new(1.0, 1.0, 0.0), Jet2::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(out, vec![Jet2::new(3.0, 1.0, 0.0)]);

        let out = jet_affine(&[0.0], &[5.0], &[Jet2::new(-4.2, 3.0, 9.0)]).unwrap();
        assert_eq!(out, vec![Jet2::new(5.0, 0.0, 0.0)]);
    }

    #[test]
    fn affine_dimension_mismatch() {
        let err = jet_affine(&[1.0, 2.0, 3.0], &[0.0, 0.0], &[Jet2::seed(1.0)]).unwrap_err();
        assert!(matches!(err, AutodiffError::DimensionMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn activation_at_origin() {
        assert_eq!(jet_activation(ActivationKind::Tanh, 1.0, Jet2::seed(0.0)), Jet2::new(0.0, 1.0, 0.0));
        assert_eq!(jet_activation(ActivationKind::Sigmoid, 1.0, Jet2::seed(0.0)), Jet2::new(0.5, 0.25, 0.0));
    }

    #[test]
    fn scaled_tanh_matches_finite_differences() {
        let f = |t: f64| (2.0 * (0.3 + t)).tanh();
        let h = 1e-5;
        let fd1 = (f(h) - f(-h)) / (2.0 * h);
        // fourth-order stencil; a 1e-5 step would lose ~6 digits to roundoff here
        let h2 = 1e-3;
        let fd2 = (-f(2.0 * h2) + 16.0 * f(h2) - 30.0 * f(0.0) + 16.0 * f(-h2) - f(-2.0 * h2)) / (12.0 * h2 * h2);
        let jet = jet_activation(ActivationKind::Tanh, 2.0, Jet2::seed(0.3));
        assert_eq!(jet.val, f(0.0));
        assert!(((jet.d1 - fd1) / jet.d1).abs() < 1e-8, "{} vs {fd1}", jet.d1);
        assert!(((jet.d2 - fd2) / jet.d2).abs() < 1e-8, "{} vs {fd2}", jet.d2);
    }

    #[test]
    fn chain_matches_activation() {
        let x = Jet2::new(0.4, 0.7, -0.2);
        let d = act_eval3(ActivationKind::Mish, x.val);
        assert_eq!(x.chain(d.value, d.d1, d.d2), jet_activation(ActivationKind::Mish, 1.0, x));
    }

    #[test]
    fn constants_have_no_derivatives() {
        let c = Jet2::constant(3.0);
        assert_eq!((c.d1, c.d2), (0.0, 0.0));
        let p = Jet2::seed_point(&[1.0, 2.0, 3.0], 1);
        assert_eq!(p[0], Jet2::constant(1.0));
        assert_eq!(p[1], Jet2::seed(2.0));
        assert_eq!(p[2], Jet2::constant(3.0));
    }
}
