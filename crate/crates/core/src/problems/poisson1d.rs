//! Five-material 1D Poisson problem on [0, 1] with interfaces at 0.2, 0.4, 0.6, 0.8.

use nalgebra::{DMatrix, DVector};

use super::{check_kappa, AffineField, BoundaryFace, Geometry, InterfaceSpec, ProblemError, ProblemKind, ProblemSpec, Quadratic, Surface};

pub const KAPPA_1D: [f64; 5] = [1.0, 0.25, 0.9, 0.1, 0.8];
const BREAKS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
const SOURCE_1D: f64 = -1.0;

/// Coefficients `(c0, c1, c2)` of `u_m = c0 x² + c1 x + c2` solving
/// `(κ u')' = −1`, `u(0) = u(1) = 0`, with `u` and `κu'` continuous at the breaks.
pub fn solve_1d_coefficients(kappas: &[f64; 5]) -> Result<[[f64; 3]; 5], ProblemError> {
    check_kappa(kappas)?;
    let m = kappas.len();
    let c0: Vec<f64> = kappas.iter().map(|k| SOURCE_1D / (2.0 * k)).collect();
    // unknowns: [c1_0, c2_0, c1_1, c2_1, ...]
    let n = 2 * m;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut row = 0;

    // u_0(0) = 0
    a[(row, 1)] = 1.0;
    row += 1;
    // u_{m-1}(1) = 0
    a[(row, 2 * (m - 1))] = 1.0;
    a[(row, 2 * (m - 1) + 1)] = 1.0;
    rhs[row] = -c0[m - 1];
    row += 1;
    for (i, &x) in BREAKS.iter().enumerate() {
        let (l, r) = (2 * i, 2 * (i + 1));
        a[(row, l)] = x;
        a[(row, l + 1)] = 1.0;
        a[(row, r)] = -x;
        a[(row, r + 1)] = -1.0;
        rhs[row] = (c0[i + 1] - c0[i]) * x * x;
        row += 1;

        a[(row, l)] = kappas[i];
        a[(row, r)] = -kappas[i + 1];
        rhs[row] = -2.0 * x * (kappas[i] * c0[i] - kappas[i + 1] * c0[i + 1]);
        row += 1;
    }
    let sol = a.lu().solve(&rhs).ok_or(ProblemError::Singular)?;
    Ok(std::array::from_fn(|k| [c0[k], sol[2 * k], sol[2 * k + 1]]))
}

pub fn problem_1d() -> Result<ProblemSpec, ProblemError> {
    let coeffs = solve_1d_coefficients(&KAPPA_1D)?;
    let solution: Vec<Quadratic> = coeffs
        .iter()
        .map(|c| Quadratic::new([c[0], 0.0, 0.0], [c[1], 0.0, 0.0], c[2]))
        .collect();
    let face = |coord: f64, normal: f64, subdomain: usize| BoundaryFace {
        axis: 0,
        coord,
        normal: [normal, 0.0, 0.0],
        subdomain,
        value: Quadratic::ZERO,
        flux: AffineField::flux(KAPPA_1D[subdomain], &solution[subdomain]),
    };
    let dirichlet = vec![face(0.0, -1.0, 0), face(1.0, 1.0, 4)];
    let interfaces = BREAKS
        .iter()
        .enumerate()
        .map(|(i, &x)| InterfaceSpec {
            id: i,
            second: i,
            first: i + 1,
            surface: Surface::Point { x, normal: 1.0 },
            value_jump: Quadratic::ZERO,
            flux_jump: AffineField::ZERO,
        })
        .collect();
    Ok(ProblemSpec {
        kind: ProblemKind::Poisson1d,
        dim: 1,
        bounds: vec![(0.0, 1.0)],
        kappa: KAPPA_1D.to_vec(),
        source: vec![SOURCE_1D; 5],
        geometry: Geometry::Interval { breaks: BREAKS.to_vec() },
        solution,
        dirichlet,
        neumann: Vec::new(),
        interfaces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(c: &[f64; 3], x: f64) -> f64 {
        c[0] * x * x + c[1] * x + c[2]
    }

    /// Independent route: the flux `κu'` equals `C − x` on the whole interval,
    /// so `u(x) = ∫_0^x (C − t)/κ(t) dt` with `C` fixed by `u(1) = 0`.
    fn flux_integral_solution(kappas: &[f64; 5], x: f64) -> f64 {
        let edges: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let integrate = |upper: f64, weight: &dyn Fn(f64, f64) -> f64| -> f64 {
            (0..5)
                .map(|m| {
                    let (a, b) = (edges[m], edges[m + 1].min(upper));
                    if b <= a {
                        0.0
                    } else {
                        weight(a, b) / kappas[m]
                    }
                })
                .sum()
        };
        let int_one = |a: f64, b: f64| b - a;
        let int_t = |a: f64, b: f64| 0.5 * (b * b - a * a);
        let c = integrate(1.0, &int_t) / integrate(1.0, &int_one);
        c * integrate(x, &int_one) - integrate(x, &int_t)
    }

    #[test]
    fn uniform_material_reduces_to_single_parabola() {
        let c = solve_1d_coefficients(&[1.0; 5]).unwrap();
        for row in c {
            assert!((row[0] + 0.5).abs() < 1e-14);
            assert!((row[1] - 0.5).abs() < 1e-12);
            assert!(row[2].abs() < 1e-12);
        }
    }

    #[test]
    fn benchmark_constraints_hold() {
        let c = solve_1d_coefficients(&KAPPA_1D).unwrap();
        assert!(eval(&c[0], 0.0).abs() < 1e-12);
        assert!(eval(&c[4], 1.0).abs() < 1e-12);
        for (i, &x) in BREAKS.iter().enumerate() {
            assert!((eval(&c[i], x) - eval(&c[i + 1], x)).abs() < 1e-12);
            let flux_l = KAPPA_1D[i] * (2.0 * c[i][0] * x + c[i][1]);
            let flux_r = KAPPA_1D[i + 1] * (2.0 * c[i + 1][0] * x + c[i + 1][1]);
            assert!((flux_l - flux_r).abs() < 1e-12);
        }
        for (k, row) in c.iter().enumerate() {
            assert_eq!(row[0], -1.0 / (2.0 * KAPPA_1D[k]));
        }
    }

    #[test]
    fn matches_flux_integral_oracle() {
        let c = solve_1d_coefficients(&KAPPA_1D).unwrap();
        for j in 0..=200 {
            let x = j as f64 / 200.0;
            let m = BREAKS.iter().take_while(|&&b| b <= x).count();
            assert!((eval(&c[m], x) - flux_integral_solution(&KAPPA_1D, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let err = solve_1d_coefficients(&[1.0, 0.0, 1.0, 1.0, 1.0]).unwrap_err();
        assert_eq!(err, ProblemError::Kappa { index: 1, value: 0.0 });
    }

    #[test]
    fn problem_layout() {
        let p = problem_1d().unwrap();
        assert_eq!(p.membership(&[0.1, 0.0, 0.0]), 0);
        assert_eq!(p.membership(&[0.5, 0.0, 0.0]), 2);
        assert_eq!(p.membership(&[0.95, 0.0, 0.0]), 4);
        assert_eq!(p.membership(&[1.0, 0.0, 0.0]), 4);
        assert!(p.analytical(0, &[0.0; 3]).abs() < 1e-15);
        assert!(p.analytical(4, &[1.0, 0.0, 0.0]).abs() < 1e-15);
        assert_eq!(p.interfaces[1].jump_u(&[0.4, 0.0, 0.0]), 0.0);
        assert_eq!(p.source, vec![-1.0; 5]);
        assert!(p.dirichlet.iter().all(|f| f.dirichlet_value(&[f.coord, 0.0, 0.0]) == 0.0));
    }
}
