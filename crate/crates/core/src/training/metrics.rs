use rayon::prelude::*;

use super::TrainError;
use crate::loss::{CompensatedSum, FieldEvaluator};
use crate::problems::{Point, ProblemSpec};

/// Uniform tensor grid over the problem box, endpoints included, first axis fastest.
pub fn eval_grid_points(problem: &ProblemSpec, counts: &[usize]) -> Vec<Point> {
    let axes: Vec<Vec<f64>> = problem
        .bounds
        .iter()
        .zip(counts)
        .map(|(&(lo, hi), &n)| (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    (0..total)
        .map(|mut idx| {
            let mut x = [0.0; 3];
            for (k, axis) in axes.iter().enumerate() {
                x[k] = axis[idx % axis.len()];
                idx /= axis.len();
            }
            x
        })
        .collect()
}

/// Root-mean-square error against the exact solution, each point evaluated in its own subdomain.
pub fn evaluate_rmse<F: FieldEvaluator + Sync + ?Sized>(field: &F, problem: &ProblemSpec, points: &[Point]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let partial: Vec<CompensatedSum> = points
        .par_chunks(512)
        .map(|chunk| {
            chunk
                .iter()
                .map(|x| {
                    let m = problem.membership(x);
                    let e = field.value(m, x) - problem.analytical(m, x);
                    e * e
                })
                .collect()
        })
        .collect();
    let total: CompensatedSum = partial.iter().map(CompensatedSum::value).collect();
    (total.value() / points.len() as f64).sqrt()
}

/// `C = t_method / t_adai`.
pub fn cost_ratio(t_method: f64, t_adai: f64) -> Result<f64, TrainError> {
    if !(t_method > 0.0 && t_adai > 0.0) {
        return Err(TrainError::NonPositiveTime { t_method, t_adai });
    }
    Ok(t_method / t_adai)
}
