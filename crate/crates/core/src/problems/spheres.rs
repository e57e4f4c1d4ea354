//! Eight spherical inclusions of radius 0.3 in the cube [-1, 1]³.

use super::{box_faces, AffineField, Geometry, InterfaceSpec, ProblemKind, ProblemSpec, Quadratic, Surface, SurfacePoint};

pub const SPHERE_RADIUS: f64 = 0.3;

const KAPPA_3D: [f64; 9] = [
    1.0 / 6.0,
    1.0 / 8.0,
    1.0 / 14.0,
    1.0 / 16.0,
    1.0 / 10.0,
    1.0 / 2.0,
    1.0 / 12.0,
    1.0 / 9.0,
    1.0 / 18.0,
];

/// Centers of Ω_2..Ω_9, in subdomain order.
pub fn sphere_centers() -> [[f64; 3]; 8] {
    [
        [-0.5, -0.5, -0.5],
        [-0.5, 0.5, -0.5],
        [0.5, -0.5, -0.5],
        [0.5, 0.5, -0.5],
        [-0.5, -0.5, 0.5],
        [-0.5, 0.5, 0.5],
        [0.5, -0.5, 0.5],
        [0.5, 0.5, 0.5],
    ]
}

pub(super) fn dist2(c: &[f64; 3], x: &[f64; 3]) -> f64 {
    (0..3).map(|i| (x[i] - c[i]) * (x[i] - c[i])).sum()
}

/// `ψ(x) = min_k |x − c_k| − r`; zero exactly on the interfaces.
pub fn sphere_level_set(x: &[f64; 3]) -> f64 {
    sphere_centers()
        .iter()
        .map(|c| dist2(c, x).sqrt())
        .fold(f64::INFINITY, f64::min)
        - SPHERE_RADIUS
}

pub(super) fn radial_normal(center: &[f64; 3], x: &[f64; 3]) -> [f64; 3] {
    let d: [f64; 3] = std::array::from_fn(|i| x[i] - center[i]);
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    d.map(|v| v / n)
}

/// `count` nearly uniform points on a sphere (golden-angle spiral).
pub(super) fn fibonacci_sphere(center: &[f64; 3], radius: f64, count: usize) -> Vec<SurfacePoint> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let dir = [r * phi.cos(), r * phi.sin(), z];
            let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
            let normal = dir.map(|v| v / norm);
            let x = std::array::from_fn(|k| center[k] + radius * normal[k]);
            SurfacePoint { x, normal }
        })
        .collect()
}

pub fn problem_3d_spheres() -> ProblemSpec {
    let solution = vec![
        Quadratic::new([1.0, 1.0, 1.0], [0.0; 3], 0.0),
        Quadratic::new([3.0, 0.0, 1.0], [0.0, 2.0, 0.0], 0.0),
        Quadratic::new([4.0, 1.0, 2.0], [0.0; 3], 0.0),
        Quadratic::new([1.0, 5.0, 2.0], [0.0; 3], 0.0),
        Quadratic::new([1.0, 3.0, 1.0], [0.0; 3], 0.0),
        Quadratic::new([0.0, 1.0, 0.0], [2.0, 0.0, 2.0], 0.0),
        Quadratic::new([5.0, 0.0, 1.0], [0.0, 2.0, 0.0], 0.0),
        Quadratic::new([2.0, 2.0, 0.5], [0.0; 3], 0.0),
        Quadratic::new([3.0, 5.0, 1.0], [0.0; 3], 0.0),
    ];
    let bounds = vec![(-1.0, 1.0); 3];
    let background_flux = AffineField::flux(KAPPA_3D[0], &solution[0]);
    let dirichlet = box_faces(&bounds, 0, solution[0], background_flux);
    let interfaces = sphere_centers()
        .iter()
        .enumerate()
        .map(|(k, &center)| {
            let inner = k + 1;
            InterfaceSpec {
                id: k,
                second: inner,
                first: 0,
                surface: Surface::Sphere { center, radius: SPHERE_RADIUS },
                value_jump: solution[inner].sub(&solution[0]),
                flux_jump: AffineField::flux(KAPPA_3D[inner], &solution[inner]).sub(&background_flux),
            }
        })
        .collect();
    ProblemSpec {
        kind: ProblemKind::Spheres3d,
        dim: 3,
        bounds,
        kappa: KAPPA_3D.to_vec(),
        source: vec![1.0; 9],
        geometry: Geometry::Spheres { centers: sphere_centers().to_vec(), radius: SPHERE_RADIUS },
        solution,
        dirichlet,
        neumann: Vec::new(),
        interfaces,
    }
}
