//! Composite PINN loss: PDE, boundary and interface mean-squared residuals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::problems::{Point, ProblemSpec};
use crate::sampling::Batch;

/// `u`, `∇u` and `Δu` of a field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldValue {
    pub u: f64,
    pub grad: [f64; 3],
    pub laplacian: f64,
}

/// Anything that can be evaluated per subdomain: a network or an exact solution.
pub trait FieldEvaluator {
    fn value(&self, m: usize, x: &Point) -> f64;
    fn value_and_derivs(&self, m: usize, x: &Point) -> FieldValue;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_bc_d: f64,
    pub alpha_bc_n: f64,
    /// Shared by the value-jump and flux-jump terms.
    pub alpha_int: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, v) in [("alpha_bc_d", self.alpha_bc_d), ("alpha_bc_n", self.alpha_bc_n), ("alpha_int", self.alpha_int)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(LossError::InvalidWeight { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse_eq: f64,
    pub mse_bc_d: f64,
    pub mse_bc_n: f64,
    pub mse_ic_d: f64,
    pub mse_ic_n: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn compose(mse_eq: f64, mse_bc_d: f64, mse_bc_n: f64, mse_ic_d: f64, mse_ic_n: f64, w: &LossWeights) -> Self {
        let total = mse_eq + w.alpha_bc_d * mse_bc_d + w.alpha_bc_n * mse_bc_n + w.alpha_int * (mse_ic_d + mse_ic_n);
        Self { mse_eq, mse_bc_d, mse_bc_n, mse_ic_d, mse_ic_n, total }
    }
}

/// Identifies one residual family within one partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTerm {
    Pde { subdomain: usize },
    Dirichlet { subdomain: usize },
    Neumann { subdomain: usize },
    InterfaceValue { interface: usize },
    InterfaceFlux { interface: usize },
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossTerm::Pde { subdomain } => write!(f, "PDE residual in subdomain {}", subdomain + 1),
            LossTerm::Dirichlet { subdomain } => write!(f, "Dirichlet residual of subdomain {}", subdomain + 1),
            LossTerm::Neumann { subdomain } => write!(f, "Neumann residual of subdomain {}", subdomain + 1),
            LossTerm::InterfaceValue { interface } => write!(f, "value jump on interface {}", interface + 1),
            LossTerm::InterfaceFlux { interface } => write!(f, "flux jump on interface {}", interface + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("no collocation points for {0}")]
    EmptySet(LossTerm),
    #[error("non-finite value in {0}")]
    NonFinite(LossTerm),
    #[error("loss weight {name} = {value} must be finite and non-negative")]
    InvalidWeight { name: &'static str, value: f64 },
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

fn mean_square(term: LossTerm, residuals: impl Iterator<Item = f64>) -> Result<f64, LossError> {
    let mut n = 0usize;
    let mut acc = CompensatedSum::default();
    for r in residuals {
        if !r.is_finite() {
            return Err(LossError::NonFinite(term));
        }
        acc.add(r * r);
        n += 1;
    }
    if n == 0 {
        return Err(LossError::EmptySet(term));
    }
    Ok(acc.value() / n as f64)
}

/// Checks the point sets the loss requires: every interior list and every interface must be nonempty.
pub fn check_batch(batch: &Batch) -> Result<(), LossError> {
    if let Some(subdomain) = batch.interior.iter().position(Vec::is_empty) {
        return Err(LossError::EmptySet(LossTerm::Pde { subdomain }));
    }
    if let Some(i) = batch.interfaces.iter().find(|i| i.points.is_empty()) {
        return Err(LossError::EmptySet(LossTerm::InterfaceValue { interface: i.id }));
    }
    Ok(())
}

/// Evaluates every loss component for `field`.
///
/// PDE and boundary terms are means per subdomain partition, summed over
/// partitions; boundary partitions without points are skipped. Interface
/// terms are means per interface, summed over interfaces, with both sides
/// evaluated at the same point.
pub fn evaluate_loss<F: FieldEvaluator + ?Sized>(
    field: &F,
    problem: &ProblemSpec,
    batch: &Batch,
    weights: &LossWeights,
) -> Result<LossBreakdown, LossError> {
    weights.validate()?;
    check_batch(batch)?;

    let mut eq = CompensatedSum::default();
    for (m, pts) in batch.interior.iter().enumerate() {
        let (kappa, g) = (problem.kappa[m], problem.source[m]);
        let term = LossTerm::Pde { subdomain: m };
        eq.add(mean_square(term, pts.iter().map(|x| kappa * field.value_and_derivs(m, x).laplacian - g))?);
    }

    let mut bc_d = CompensatedSum::default();
    for group in batch.dirichlet.iter().filter(|g| !g.points.is_empty()) {
        let m = group.subdomain;
        let term = LossTerm::Dirichlet { subdomain: m };
        let res = group.points.iter().zip(&group.targets).map(|(x, t)| field.value(m, x) - t);
        bc_d.add(mean_square(term, res)?);
    }

    let mut bc_n = CompensatedSum::default();
    for group in batch.neumann.iter().filter(|g| !g.points.is_empty()) {
        let m = group.subdomain;
        let kappa = problem.kappa[m];
        let term = LossTerm::Neumann { subdomain: m };
        let res = group.points.iter().zip(&group.normals).zip(&group.targets).map(|((x, n), t)| {
            let g = field.value_and_derivs(m, x).grad;
            kappa * (g[0] * n[0] + g[1] * n[1] + g[2] * n[2]) - t
        });
        bc_n.add(mean_square(term, res)?);
    }

    let mut ic_d = CompensatedSum::default();
    let mut ic_n = CompensatedSum::default();
    for iface in &batch.interfaces {
        let (s, f) = (iface.second, iface.first);
        let (ks, kf) = (problem.kappa[s], problem.kappa[f]);
        let mut value_res = Vec::with_capacity(iface.points.len());
        let mut flux_res = Vec::with_capacity(iface.points.len());
        for (j, x) in iface.points.iter().enumerate() {
            let vs = field.value_and_derivs(s, x);
            let vf = field.value_and_derivs(f, x);
            let n = &iface.normals[j];
            value_res.push(vs.u - vf.u - iface.value_jump[j]);
            let flux: f64 = (0..3).map(|i| (ks * vs.grad[i] - kf * vf.grad[i]) * n[i]).sum();
            flux_res.push(flux - iface.flux_jump[j]);
        }
        ic_d.add(mean_square(LossTerm::InterfaceValue { interface: iface.id }, value_res.into_iter())?);
        ic_n.add(mean_square(LossTerm::InterfaceFlux { interface: iface.id }, flux_res.into_iter())?);
    }

    let out = LossBreakdown::compose(eq.value(), bc_d.value(), bc_n.value(), ic_d.value(), ic_n.value(), weights);
    if !out.total.is_finite() {
        return Err(LossError::NonFinite(LossTerm::Pde { subdomain: 0 }));
    }
    Ok(out)
}
