//! Collocation point sets.
//!
//! The set is drawn once per run and stays fixed for every iteration.
//! 1D interiors use a uniform grid; 2D/3D interiors use uniform rejection
//! sampling per subdomain, with the total split in proportion to subdomain
//! measure and a per-subdomain floor.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problems::{BoundaryFace, Point, ProblemKind, ProblemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingCounts {
    /// Total interior points over all subdomains.
    pub interior: usize,
    /// Points per outer face or edge (a 1D face is a single point).
    pub boundary_per_face: usize,
    /// Points per interface (a 1D interface is a single point).
    pub interface_per_surface: usize,
    /// Floor on interior points per subdomain in 2D/3D.
    pub min_per_subdomain: usize,
}

impl SamplingCounts {
    pub fn defaults_for(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Poisson1d => Self { interior: 131, boundary_per_face: 1, interface_per_surface: 1, min_per_subdomain: 1 },
            ProblemKind::Letters2d => Self { interior: 3679, boundary_per_face: 60, interface_per_surface: 100, min_per_subdomain: 50 },
            ProblemKind::Spheres3d => Self { interior: 3336, boundary_per_face: 300, interface_per_surface: 200, min_per_subdomain: 50 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplingError {
    #[error("sampling count `{0}` must be positive")]
    ZeroCount(&'static str),
    #[error("{total} interior points cannot give {subdomains} subdomains at least {floor} each")]
    Unachievable { total: usize, subdomains: usize, floor: usize },
    #[error("subdomain {subdomain} received no interior points")]
    EmptySubdomain { subdomain: usize },
    #[error("rejection sampling found only {found} of {needed} points in subdomain {subdomain} after {draws} draws")]
    Rejection { subdomain: usize, found: usize, needed: usize, draws: usize },
}

/// Boundary points of one subdomain, with outward normals and target values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryGroup {
    pub subdomain: usize,
    pub points: Vec<Point>,
    pub normals: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
}

/// Points of one interface with their normals and jump data.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceBatch {
    pub id: usize,
    pub second: usize,
    pub first: usize,
    pub points: Vec<Point>,
    pub normals: Vec<[f64; 3]>,
    pub value_jump: Vec<f64>,
    pub flux_jump: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub dim: usize,
    /// Interior points, one list per subdomain.
    pub interior: Vec<Vec<Point>>,
    /// Dirichlet points grouped by subdomain; groups appear in subdomain order.
    pub dirichlet: Vec<BoundaryGroup>,
    pub neumann: Vec<BoundaryGroup>,
    pub interfaces: Vec<InterfaceBatch>,
}

impl Batch {
    pub fn interior_count(&self) -> usize {
        self.interior.iter().map(Vec::len).sum()
    }

    /// CSV with columns `x[,y[,z]],role,id`; subdomain and interface ids are 1-based.
    pub fn to_csv(&self) -> String {
        let axes = ["x", "y", "z"];
        let mut out = axes[..self.dim].join(",");
        out.push_str(",role,id\n");
        let mut row = |x: &Point, role: &str, id: usize| {
            for v in &x[..self.dim] {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{role},{}", id + 1);
        };
        for (m, pts) in self.interior.iter().enumerate() {
            pts.iter().for_each(|x| row(x, "interior", m));
        }
        for g in &self.dirichlet {
            g.points.iter().for_each(|x| row(x, "dirichlet", g.subdomain));
        }
        for g in &self.neumann {
            g.points.iter().for_each(|x| row(x, "neumann", g.subdomain));
        }
        for i in &self.interfaces {
            i.points.iter().for_each(|x| row(x, "interface", i.id));
        }
        out
    }
}

/// Splits `total` into integer shares proportional to `weights`, summing exactly to `total`.
pub fn allocate_by_weight(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut shares: Vec<usize> = ideal.iter().map(|v| v.floor() as usize).collect();
    let mut rest = total - shares.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (ideal[b] - ideal[b].floor()).total_cmp(&(ideal[a] - ideal[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        shares[i] += 1;
        rest -= 1;
    }
    shares
}

/// Interior counts per subdomain: proportional to measure, at least `floor`, summing to `total`.
pub fn allocate_interior(measures: &[f64], total: usize, floor: usize) -> Result<Vec<usize>, SamplingError> {
    let m = measures.len();
    if total < m * floor {
        return Err(SamplingError::Unachievable { total, subdomains: m, floor });
    }
    let mut fixed = vec![false; m];
    loop {
        let free: Vec<usize> = (0..m).filter(|&i| !fixed[i]).collect();
        let remaining = total - (m - free.len()) * floor;
        let weights: Vec<f64> = free.iter().map(|&i| measures[i]).collect();
        let shares = allocate_by_weight(&weights, remaining);
        let mut changed = false;
        for (&i, &s) in free.iter().zip(&shares) {
            if s < floor {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            let mut out = vec![floor; m];
            for (&i, &s) in free.iter().zip(&shares) {
                out[i] = s;
            }
            return Ok(out);
        }
    }
}

fn sample_face<R: Rng>(problem: &ProblemSpec, face: &BoundaryFace, count: usize, rng: &mut R) -> Vec<Point> {
    if problem.dim == 1 {
        return vec![[face.coord, 0.0, 0.0]];
    }
    (0..count)
        .map(|_| {
            let mut x = [0.0; 3];
            for (axis, &(lo, hi)) in problem.bounds.iter().enumerate() {
                x[axis] = if axis == face.axis { face.coord } else { rng.random_range(lo..hi) };
            }
            x
        })
        .collect()
}

fn boundary_groups<R: Rng>(
    problem: &ProblemSpec,
    faces: &[BoundaryFace],
    count: usize,
    rng: &mut R,
    target: impl Fn(&BoundaryFace, &Point) -> f64,
) -> Vec<BoundaryGroup> {
    let mut groups: Vec<BoundaryGroup> = Vec::new();
    for face in faces {
        let idx = match groups.iter().position(|g| g.subdomain == face.subdomain) {
            Some(i) => i,
            None => {
                groups.push(BoundaryGroup { subdomain: face.subdomain, ..Default::default() });
                groups.len() - 1
            }
        };
        for x in sample_face(problem, face, count, rng) {
            groups[idx].targets.push(target(face, &x));
            groups[idx].normals.push(face.normal);
            groups[idx].points.push(x);
        }
    }
    groups.sort_by_key(|g| g.subdomain);
    groups
}

pub fn build_batch(problem: &ProblemSpec, counts: &SamplingCounts, seed: u64) -> Result<Batch, SamplingError> {
    if counts.interior == 0 {
        return Err(SamplingError::ZeroCount("interior"));
    }
    if counts.boundary_per_face == 0 {
        return Err(SamplingError::ZeroCount("boundary_per_face"));
    }
    if counts.interface_per_surface == 0 {
        return Err(SamplingError::ZeroCount("interface_per_surface"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nsub = problem.num_subdomains();

    let interior = if problem.dim == 1 {
        let (lo, hi) = problem.bounds[0];
        let n = counts.interior;
        let mut lists = vec![Vec::new(); nsub];
        for j in 0..n {
            let t = if n == 1 { 0.5 } else { j as f64 / (n - 1) as f64 };
            let x = [lo + (hi - lo) * t, 0.0, 0.0];
            lists[problem.membership(&x)].push(x);
        }
        if let Some(subdomain) = lists.iter().position(Vec::is_empty) {
            return Err(SamplingError::EmptySubdomain { subdomain });
        }
        lists
    } else {
        let measures: Vec<f64> = (0..nsub).map(|m| problem.measure(m)).collect();
        let alloc = allocate_interior(&measures, counts.interior, counts.min_per_subdomain)?;
        let mut lists = Vec::with_capacity(nsub);
        for (m, &needed) in alloc.iter().enumerate() {
            let bounds = problem.subdomain_bounds(m);
            let max_draws = 1000 * needed + 10_000;
            let mut pts = Vec::with_capacity(needed);
            let mut draws = 0;
            while pts.len() < needed {
                if draws == max_draws {
                    return Err(SamplingError::Rejection { subdomain: m, found: pts.len(), needed, draws });
                }
                draws += 1;
                let mut x = [0.0; 3];
                for (axis, &(lo, hi)) in bounds.iter().enumerate() {
                    x[axis] = rng.random_range(lo..hi);
                }
                if problem.membership(&x) == m {
                    pts.push(x);
                }
            }
            lists.push(pts);
        }
        lists
    };

    let dirichlet = boundary_groups(problem, &problem.dirichlet, counts.boundary_per_face, &mut rng, |f, x| f.dirichlet_value(x));
    let neumann = boundary_groups(problem, &problem.neumann, counts.boundary_per_face, &mut rng, |f, x| f.neumann_value(x));

    let interfaces = problem
        .interfaces
        .iter()
        .map(|iface| {
            let pts = iface.sample(counts.interface_per_surface, &mut rng);
            InterfaceBatch {
                id: iface.id,
                second: iface.second,
                first: iface.first,
                value_jump: pts.iter().map(|p| iface.jump_u(&p.x)).collect(),
                flux_jump: pts.iter().map(|p| iface.jump_flux(&p.x, &p.normal)).collect(),
                normals: pts.iter().map(|p| p.normal).collect(),
                points: pts.into_iter().map(|p| p.x).collect(),
            }
        })
        .collect();

    Ok(Batch { dim: problem.dim, interior, dirichlet, neumann, interfaces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{problem_1d, problem_2d_letters, problem_3d_spheres, sphere_level_set, LetterLayout};

    #[test]
    fn grid_1d() {
        let p = problem_1d().unwrap();
        let b = build_batch(&p, &SamplingCounts::defaults_for(ProblemKind::Poisson1d), 0).unwrap();
        assert_eq!(b.interior_count(), 131);
        let mut all: Vec<f64> = b.interior.iter().flatten().map(|x| x[0]).collect();
        all.sort_by(f64::total_cmp);
        for (j, x) in all.iter().enumerate() {
            assert_eq!(*x, j as f64 / 130.0);
        }
        for (m, pts) in b.interior.iter().enumerate() {
            assert!(pts.iter().all(|x| p.membership(x) == m));
        }
        let iface: Vec<f64> = b.interfaces.iter().map(|i| i.points[0][0]).collect();
        assert_eq!(iface, vec![0.2, 0.4, 0.6, 0.8]);
        // interface locations are grid nodes
        for x in &iface {
            assert!(all.contains(x));
        }
        assert_eq!(b.dirichlet.len(), 2);
        assert_eq!((b.dirichlet[0].subdomain, b.dirichlet[0].points[0][0]), (0, 0.0));
        assert_eq!((b.dirichlet[1].subdomain, b.dirichlet[1].points[0][0]), (4, 1.0));
    }

    #[test]
    fn batches_are_deterministic() {
        let p = problem_2d_letters(&LetterLayout::default()).unwrap();
        let c = SamplingCounts::defaults_for(ProblemKind::Letters2d);
        assert_eq!(build_batch(&p, &c, 5).unwrap(), build_batch(&p, &c, 5).unwrap());
        assert_ne!(build_batch(&p, &c, 5).unwrap(), build_batch(&p, &c, 6).unwrap());
    }

    #[test]
    fn batch_2d_counts_and_placement() {
        let p = problem_2d_letters(&LetterLayout::default()).unwrap();
        let c = SamplingCounts::defaults_for(ProblemKind::Letters2d);
        let b = build_batch(&p, &c, 1).unwrap();
        assert_eq!(b.interior_count(), 3679);
        for (m, pts) in b.interior.iter().enumerate() {
            assert!(pts.len() >= 50, "subdomain {m} has {}", pts.len());
            assert!(pts.iter().all(|x| p.membership(x) == m));
        }
        assert_eq!(b.dirichlet.len(), 1);
        assert_eq!(b.dirichlet[0].points.len(), 240);
        for (x, n) in b.dirichlet[0].points.iter().zip(&b.dirichlet[0].normals) {
            let on_face = (n[0] == -1.0 && x[0] == 0.0)
                || (n[0] == 1.0 && x[0] == 1.7)
                || (n[1] == -1.0 && x[1] == 0.0)
                || (n[1] == 1.0 && x[1] == 1.0);
            assert!(on_face);
        }
        assert!(b.interfaces.iter().all(|i| i.points.len() == 100));
    }

    #[test]
    fn batch_3d_points_on_spheres() {
        let p = problem_3d_spheres();
        let c = SamplingCounts::defaults_for(ProblemKind::Spheres3d);
        let b = build_batch(&p, &c, 2).unwrap();
        assert_eq!(b.interior_count(), 3336);
        assert!(b.interior.iter().all(|l| l.len() >= 50));
        assert_eq!(b.dirichlet[0].points.len(), 1800);
        for i in &b.interfaces {
            assert_eq!(i.points.len(), 200);
            assert!(i.points.iter().all(|x| sphere_level_set(x).abs() < 1e-12));
        }
    }

    #[test]
    fn allocation_is_exact() {
        assert_eq!(allocate_by_weight(&[1.0, 1.0, 1.0], 10).iter().sum::<usize>(), 10);
        assert_eq!(allocate_by_weight(&[3.0, 1.0], 8), vec![6, 2]);
    }

    #[test]
    fn allocation_floor() {
        let a = allocate_interior(&[100.0, 1.0, 1.0], 300, 50).unwrap();
        assert_eq!(a, vec![200, 50, 50]);
        assert!(matches!(allocate_interior(&[1.0, 1.0], 60, 50), Err(SamplingError::Unachievable { .. })));
    }

    #[test]
    fn zero_counts_rejected() {
        let p = problem_1d().unwrap();
        let mut c = SamplingCounts::defaults_for(ProblemKind::Poisson1d);
        c.interior = 0;
        assert_eq!(build_batch(&p, &c, 0), Err(SamplingError::ZeroCount("interior")));
        // three grid points leave middle subdomains empty
        c.interior = 3;
        assert!(matches!(build_batch(&p, &c, 0), Err(SamplingError::EmptySubdomain { .. })));
    }

    #[test]
    fn csv_dump() {
        let p = problem_1d().unwrap();
        let b = build_batch(&p, &SamplingCounts::defaults_for(ProblemKind::Poisson1d), 0).unwrap();
        let csv = b.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,role,id"));
        assert_eq!(lines.next(), Some("0,interior,1"));
        assert_eq!(csv.lines().count(), 1 + 131 + 2 + 4);
        assert!(csv.contains("0.4,interface,2"));
    }
}
