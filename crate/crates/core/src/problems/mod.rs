//! Benchmark elliptic interface problems with closed-form solutions.
//!
//! Every problem is stated as `∇·(κ_m ∇u_m) = g_m` in subdomain `m`, with
//! Dirichlet data on the outer boundary and jump conditions
//! `[[u]] = p`, `[[κ∇u]]·n = q` on each interface. The bracket is
//! `second − first`, where the interface normal points away from the second
//! side (the inclusion, for the 2D and 3D problems).

mod letters;
mod poisson1d;
mod spheres;

pub use letters::{problem_2d_letters, Letter, LetterLayout, Rect, Segment};
pub use poisson1d::{problem_1d, solve_1d_coefficients, KAPPA_1D};
pub use spheres::{problem_3d_spheres, sphere_centers, sphere_level_set, SPHERE_RADIUS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::loss::{FieldEvaluator, FieldValue};

/// Spatial point; coordinates beyond the problem dimension are zero.
pub type Point = [f64; 3];

/// Relative slack so points rounded off a closed inclusion's surface still count as inside.
const CLOSED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("coefficient kappa_{index} = {value} must be positive and finite")]
    Kappa { index: usize, value: f64 },
    #[error("singular system while solving for the 1D coefficients")]
    Singular,
    #[error("invalid letter layout: {0}")]
    Layout(String),
    #[error("failed to read layout: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson1d,
    Letters2d,
    Spheres3d,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Poisson1d => "poisson1d",
            ProblemKind::Letters2d => "letters2d",
            ProblemKind::Spheres3d => "spheres3d",
        }
    }
}

/// Separable quadratic `Σ_i (sq_i x_i² + lin_i x_i) + c`. All benchmark solutions have this form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub sq: [f64; 3],
    pub lin: [f64; 3],
    pub c: f64,
}

impl Quadratic {
    pub const ZERO: Quadratic = Quadratic { sq: [0.0; 3], lin: [0.0; 3], c: 0.0 };

    pub fn new(sq: [f64; 3], lin: [f64; 3], c: f64) -> Self {
        Self { sq, lin, c }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        (0..3).fold(self.c, |acc, i| acc + (self.sq[i] * x[i] + self.lin[i]) * x[i])
    }

    pub fn grad(&self, x: &Point) -> [f64; 3] {
        std::array::from_fn(|i| 2.0 * self.sq[i] * x[i] + self.lin[i])
    }

    pub fn laplacian(&self) -> f64 {
        2.0 * self.sq.iter().sum::<f64>()
    }

    pub fn sub(&self, other: &Quadratic) -> Quadratic {
        Quadratic {
            sq: std::array::from_fn(|i| self.sq[i] - other.sq[i]),
            lin: std::array::from_fn(|i| self.lin[i] - other.lin[i]),
            c: self.c - other.c,
        }
    }
}

/// Affine vector field `F(x)_i = diag_i · x_i + offset_i`; used for fluxes `κ∇u` of separable quadratics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineField {
    pub diag: [f64; 3],
    pub offset: [f64; 3],
}

impl AffineField {
    pub const ZERO: AffineField = AffineField { diag: [0.0; 3], offset: [0.0; 3] };

    /// `κ ∇u` for a quadratic `u`.
    pub fn flux(kappa: f64, u: &Quadratic) -> Self {
        Self {
            diag: std::array::from_fn(|i| 2.0 * kappa * u.sq[i]),
            offset: std::array::from_fn(|i| kappa * u.lin[i]),
        }
    }

    pub fn sub(&self, other: &AffineField) -> Self {
        Self {
            diag: std::array::from_fn(|i| self.diag[i] - other.diag[i]),
            offset: std::array::from_fn(|i| self.offset[i] - other.offset[i]),
        }
    }

    pub fn normal_component(&self, x: &Point, normal: &[f64; 3]) -> f64 {
        (0..3).map(|i| (self.diag[i] * x[i] + self.offset[i]) * normal[i]).sum()
    }
}

/// One planar face `x[axis] = coord` of the bounding box (a point in 1D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub axis: usize,
    pub coord: f64,
    /// Outward unit normal.
    pub normal: [f64; 3],
    /// Subdomain adjacent to this face.
    pub subdomain: usize,
    /// Dirichlet value `Λ^d(x)`.
    pub value: Quadratic,
    /// Neumann flux field; the target is `flux(x)·n0`.
    pub flux: AffineField,
}

impl BoundaryFace {
    pub fn dirichlet_value(&self, x: &Point) -> f64 {
        self.value.eval(x)
    }

    pub fn neumann_value(&self, x: &Point) -> f64 {
        self.flux.normal_component(x, &self.normal)
    }
}

/// Geometric support of one interface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Surface {
    Point { x: f64, normal: f64 },
    Segments { segments: Vec<Segment> },
    Sphere { center: [f64; 3], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSpec {
    pub id: usize,
    /// Side the normal points away from (`⊙_2`).
    pub second: usize,
    /// Opposite side (`⊙_1`).
    pub first: usize,
    pub surface: Surface,
    /// `p(x)` as a quadratic.
    pub value_jump: Quadratic,
    /// `κ_2∇u_2 − κ_1∇u_1` as an affine field; `q(x)` is its normal component.
    pub flux_jump: AffineField,
}

/// A sampled interface point with its normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub x: Point,
    pub normal: [f64; 3],
}

impl InterfaceSpec {
    pub fn jump_u(&self, x: &Point) -> f64 {
        self.value_jump.eval(x)
    }

    pub fn jump_flux(&self, x: &Point, normal: &[f64; 3]) -> f64 {
        self.flux_jump.normal_component(x, normal)
    }

    /// Unit normal at a point of the surface.
    pub fn normal(&self, x: &Point) -> [f64; 3] {
        match &self.surface {
            Surface::Point { normal, .. } => [*normal, 0.0, 0.0],
            Surface::Segments { segments } => {
                let seg = segments
                    .iter()
                    .min_by(|a, b| a.distance(x).total_cmp(&b.distance(x)))
                    .expect("interface has segments");
                seg.normal
            }
            Surface::Sphere { center, .. } => spheres::radial_normal(center, x),
        }
    }

    /// Points on the interface. 1D interfaces always yield their single point;
    /// segment interfaces draw uniformly inside each segment, never at its endpoints;
    /// spheres use a Fibonacci lattice.
    pub fn sample<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<SurfacePoint> {
        match &self.surface {
            Surface::Point { x, normal } => vec![SurfacePoint { x: [*x, 0.0, 0.0], normal: [*normal, 0.0, 0.0] }],
            Surface::Segments { segments } => letters::sample_segments(segments, count, rng),
            Surface::Sphere { center, radius } => spheres::fibonacci_sphere(center, *radius, count),
        }
    }
}

/// Subdomain layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Geometry {
    /// Interval split at increasing breakpoints; subdomains are `[b_i, b_{i+1})`, last one closed.
    Interval { breaks: Vec<f64> },
    Letters { layout: LetterLayout },
    Spheres { centers: Vec<[f64; 3]>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    /// Axis-aligned bounding box `[lo, hi]` per axis.
    pub bounds: Vec<(f64, f64)>,
    pub kappa: Vec<f64>,
    /// Right-hand side `g_m` of `∇·(κ_m∇u_m) = g_m`.
    pub source: Vec<f64>,
    pub geometry: Geometry,
    /// Exact solution per subdomain.
    pub solution: Vec<Quadratic>,
    pub dirichlet: Vec<BoundaryFace>,
    pub neumann: Vec<BoundaryFace>,
    pub interfaces: Vec<InterfaceSpec>,
}

impl ProblemSpec {
    pub fn num_subdomains(&self) -> usize {
        self.kappa.len()
    }

    /// Subdomain containing `x`. Closed inclusions win over the background.
    pub fn membership(&self, x: &Point) -> usize {
        match &self.geometry {
            Geometry::Interval { breaks } => breaks.iter().take_while(|&&b| b <= x[0]).count(),
            Geometry::Letters { layout } => layout.membership(x),
            Geometry::Spheres { centers, radius } => centers
                .iter()
                .position(|c| spheres::dist2(c, x) <= radius * radius * (1.0 + CLOSED_TOL))
                .map_or(0, |k| k + 1),
        }
    }

    pub fn analytical(&self, m: usize, x: &Point) -> f64 {
        self.solution[m].eval(x)
    }

    pub fn analytical_grad(&self, m: usize, x: &Point) -> [f64; 3] {
        self.solution[m].grad(x)
    }

    /// `κ_m Δu_m − g_m` for the stored solution (zero for a consistent problem).
    pub fn pde_defect(&self, m: usize) -> f64 {
        self.kappa[m] * self.solution[m].laplacian() - self.source[m]
    }

    /// Lebesgue measure of subdomain `m`.
    pub fn measure(&self, m: usize) -> f64 {
        let total: f64 = self.bounds.iter().map(|(lo, hi)| hi - lo).product();
        match &self.geometry {
            Geometry::Interval { breaks } => {
                let lo = if m == 0 { self.bounds[0].0 } else { breaks[m - 1] };
                let hi = breaks.get(m).copied().unwrap_or(self.bounds[0].1);
                hi - lo
            }
            Geometry::Letters { layout } => {
                if m == 0 {
                    total - layout.letters.iter().map(Letter::area).sum::<f64>()
                } else {
                    layout.letters[m - 1].area()
                }
            }
            Geometry::Spheres { centers, radius } => {
                let ball = 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3);
                if m == 0 {
                    total - centers.len() as f64 * ball
                } else {
                    ball
                }
            }
        }
    }

    /// Bounding box of subdomain `m`, used as the rejection-sampling envelope.
    pub fn subdomain_bounds(&self, m: usize) -> Vec<(f64, f64)> {
        match &self.geometry {
            Geometry::Letters { layout } if m > 0 => layout.letters[m - 1].bounds(),
            Geometry::Spheres { centers, radius } if m > 0 => {
                centers[m - 1].iter().take(self.dim).map(|c| (c - radius, c + radius)).collect()
            }
            _ => self.bounds.clone(),
        }
    }

    pub fn field(&self) -> AnalyticalField<'_> {
        AnalyticalField(self)
    }
}

/// The exact solution exposed as a field, for oracle checks.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticalField<'a>(pub &'a ProblemSpec);

impl FieldEvaluator for AnalyticalField<'_> {
    fn value(&self, m: usize, x: &Point) -> f64 {
        self.0.analytical(m, x)
    }

    fn value_and_derivs(&self, m: usize, x: &Point) -> FieldValue {
        let q = &self.0.solution[m];
        FieldValue {
            u: q.eval(x),
            grad: q.grad(x),
            laplacian: q.laplacian(),
        }
    }
}

/// Builds the benchmark for `kind`; the 2D problem uses `layout` or the default layout.
pub fn build_problem(kind: ProblemKind, layout: Option<LetterLayout>) -> Result<ProblemSpec, ProblemError> {
    match kind {
        ProblemKind::Poisson1d => problem_1d(),
        ProblemKind::Letters2d => problem_2d_letters(&layout.unwrap_or_default()),
        ProblemKind::Spheres3d => Ok(problem_3d_spheres()),
    }
}

fn check_kappa(kappa: &[f64]) -> Result<(), ProblemError> {
    match kappa.iter().position(|k| !(k.is_finite() && *k > 0.0)) {
        Some(index) => Err(ProblemError::Kappa { index, value: kappa[index] }),
        None => Ok(()),
    }
}

/// Outer faces of an axis-aligned box, each carrying the background data.
fn box_faces(bounds: &[(f64, f64)], subdomain: usize, value: Quadratic, flux: AffineField) -> Vec<BoundaryFace> {
    let mut faces = Vec::with_capacity(2 * bounds.len());
    for (axis, &(lo, hi)) in bounds.iter().enumerate() {
        for (coord, sign) in [(lo, -1.0), (hi, 1.0)] {
            let mut normal = [0.0; 3];
            normal[axis] = sign;
            faces.push(BoundaryFace { axis, coord, normal, subdomain, value, flux });
        }
    }
    faces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{jet_affine, Jet2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_problems() -> Vec<ProblemSpec> {
        vec![
            problem_1d().unwrap(),
            problem_2d_letters(&LetterLayout::default()).unwrap(),
            problem_3d_spheres(),
        ]
    }

    fn random_point(p: &ProblemSpec, rng: &mut ChaCha8Rng) -> Point {
        let mut x = [0.0; 3];
        for (i, (lo, hi)) in p.bounds.iter().enumerate() {
            x[i] = rng.random_range(*lo..*hi);
        }
        x
    }

    #[test]
    fn pde_holds_in_every_subdomain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in all_problems() {
            for m in 0..p.num_subdomains() {
                assert!(p.pde_defect(m).abs() < 1e-12, "{:?} subdomain {m}", p.kind);
            }
            for _ in 0..1000 {
                let x = random_point(&p, &mut rng);
                let m = p.membership(&x);
                // Laplacian of the stored quadratic through second-order jets
                let q = &p.solution[m];
                let mut lap = 0.0;
                for axis in 0..p.dim {
                    let jets = Jet2::seed_point(&x[..p.dim], axis);
                    let j = jets[axis];
                    let sq = Jet2::new(j.val * j.val, 2.0 * j.val * j.d1, 2.0 * j.d1 * j.d1 + 2.0 * j.val * j.d2);
                    let lin = jet_affine(&[q.sq[axis], q.lin[axis]], &[0.0], &[sq, j]).unwrap()[0];
                    lap += lin.d2;
                }
                assert!((p.kappa[m] * lap - p.source[m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jump_data_matches_two_sided_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in all_problems() {
            for iface in &p.interfaces {
                let pts = iface.sample(500, &mut rng);
                assert!(!pts.is_empty());
                for sp in pts {
                    let x = sp.x;
                    let (s, f) = (iface.second, iface.first);
                    let p_exact = p.analytical(s, &x) - p.analytical(f, &x);
                    let gs = p.analytical_grad(s, &x);
                    let gf = p.analytical_grad(f, &x);
                    let q_exact: f64 = (0..3).map(|i| (p.kappa[s] * gs[i] - p.kappa[f] * gf[i]) * sp.normal[i]).sum();
                    assert!((iface.jump_u(&x) - p_exact).abs() < 1e-12);
                    assert!((iface.jump_flux(&x, &sp.normal) - q_exact).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn normals_are_unit_and_displacements_cross_the_interface() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in all_problems() {
            for iface in &p.interfaces {
                for sp in iface.sample(200, &mut rng) {
                    let n = sp.normal;
                    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                    assert!((norm - 1.0).abs() < 1e-12);
                    assert_eq!(iface.normal(&sp.x).map(|v| (v * 1e9).round()), n.map(|v| (v * 1e9).round()));
                    let inside: Point = std::array::from_fn(|i| sp.x[i] - 1e-6 * n[i]);
                    let outside: Point = std::array::from_fn(|i| sp.x[i] + 1e-6 * n[i]);
                    assert_eq!(p.membership(&inside), iface.second, "{:?} iface {}", p.kind, iface.id);
                    assert_eq!(p.membership(&outside), iface.first, "{:?} iface {}", p.kind, iface.id);
                }
            }
        }
    }

    #[test]
    fn boundary_faces_use_background_solution() {
        for p in all_problems().into_iter().skip(1) {
            assert_eq!(p.dirichlet.len(), 2 * p.dim);
            for face in &p.dirichlet {
                assert_eq!(face.subdomain, 0);
                let mut x = [0.3, 0.4, 0.5];
                x[face.axis] = face.coord;
                assert_eq!(p.membership(&x), 0);
                assert!((face.dirichlet_value(&x) - p.analytical(0, &x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn measures_sum_to_box() {
        for p in all_problems() {
            let total: f64 = (0..p.num_subdomains()).map(|m| p.measure(m)).sum();
            let boxed: f64 = p.bounds.iter().map(|(lo, hi)| hi - lo).product();
            assert!((total - boxed).abs() < 1e-12);
            assert!((0..p.num_subdomains()).all(|m| p.measure(m) > 0.0));
        }
    }

    #[test]
    fn quadratic_helpers() {
        let q = Quadratic::new([1.0, 5.0, 0.0], [0.0, 0.0, 0.0], 0.0);
        assert!((q.eval(&[0.2, 0.1, 0.0]) - 0.09).abs() < 1e-16);
        assert_eq!(q.laplacian(), 12.0);
        let f = AffineField::flux(0.5, &q);
        assert_eq!(f.normal_component(&[1.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), 5.0);
    }
}
