//! Input derivatives by second-order jets; parameter gradients by reverse sweeps over them.

mod block;
mod jet;
mod tape;

pub use block::BlockTape;
pub use jet::*;
pub use tape::{Order, Seed, Tape};

use rayon::prelude::*;

use crate::loss::{check_batch, CompensatedSum, LossBreakdown, LossError, LossTerm, LossWeights};
use crate::network::{Architecture, MLPParams};
use crate::problems::ProblemSpec;
use crate::sampling::Batch;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// One slot per parameter of the flat vector. Frozen slopes stay at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GradBuffer(Vec<f64>);

impl GradBuffer {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Points per work unit. Fixed so the reduction order never depends on the thread count.
const CHUNK: usize = 64;

/// A run of consecutive points from one loss group.
#[derive(Clone, Copy, Debug)]
enum Block {
    Interior { m: usize, start: usize, len: usize },
    Dirichlet { g: usize, start: usize, len: usize },
    Neumann { g: usize, start: usize, len: usize },
    Interface { i: usize, start: usize, len: usize },
}

#[derive(Clone, Copy, Debug)]
struct Group {
    term: LossTerm,
    count: usize,
}

struct ChunkResult {
    sums: Vec<CompensatedSum>,
    grad: Vec<f64>,
}

fn split(count: usize, mut make: impl FnMut(usize, usize) -> Block, blocks: &mut Vec<Block>) {
    for start in (0..count).step_by(CHUNK) {
        blocks.push(make(start, CHUNK.min(count - start)));
    }
}

/// Loss and gradient evaluator bound to one problem, batch and weighting.
///
/// The work list is built once; each [`LossGrad::evaluate`] call sweeps it in
/// fixed blocks and reduces the block results in order.
pub struct LossGrad<'a> {
    arch: &'a Architecture,
    problem: &'a ProblemSpec,
    batch: &'a Batch,
    weights: LossWeights,
    blocks: Vec<Block>,
    groups: Vec<Group>,
    offsets: [usize; 4],
}

impl<'a> LossGrad<'a> {
    pub fn new(arch: &'a Architecture, problem: &'a ProblemSpec, batch: &'a Batch, weights: LossWeights) -> Result<Self, AutodiffError> {
        weights.validate()?;
        check_batch(batch)?;
        if batch.interior.len() != arch.num_subdomains || problem.num_subdomains() != arch.num_subdomains {
            return Err(AutodiffError::DimensionMismatch { expected: arch.num_subdomains, found: batch.interior.len() });
        }
        if batch.dim != arch.input_dim {
            return Err(AutodiffError::DimensionMismatch { expected: arch.input_dim, found: batch.dim });
        }

        let mut blocks = Vec::new();
        let mut groups = Vec::new();
        for (m, pts) in batch.interior.iter().enumerate() {
            split(pts.len(), |start, len| Block::Interior { m, start, len }, &mut blocks);
            groups.push(Group { term: LossTerm::Pde { subdomain: m }, count: pts.len() });
        }
        let dirichlet = groups.len();
        for (g, grp) in batch.dirichlet.iter().enumerate() {
            split(grp.points.len(), |start, len| Block::Dirichlet { g, start, len }, &mut blocks);
            groups.push(Group { term: LossTerm::Dirichlet { subdomain: grp.subdomain }, count: grp.points.len() });
        }
        let neumann = groups.len();
        for (g, grp) in batch.neumann.iter().enumerate() {
            split(grp.points.len(), |start, len| Block::Neumann { g, start, len }, &mut blocks);
            groups.push(Group { term: LossTerm::Neumann { subdomain: grp.subdomain }, count: grp.points.len() });
        }
        let value = groups.len();
        for (i, iface) in batch.interfaces.iter().enumerate() {
            split(iface.points.len(), |start, len| Block::Interface { i, start, len }, &mut blocks);
            groups.push(Group { term: LossTerm::InterfaceValue { interface: iface.id }, count: iface.points.len() });
        }
        for iface in &batch.interfaces {
            groups.push(Group { term: LossTerm::InterfaceFlux { interface: iface.id }, count: iface.points.len() });
        }
        let offsets = [dirichlet, neumann, value, groups.len()];
        Ok(Self { arch, problem, batch, weights, blocks, groups, offsets })
    }

    pub fn evaluate(&self, params: &MLPParams) -> Result<(LossBreakdown, GradBuffer), AutodiffError> {
        if params.len() != self.arch.param_count() {
            return Err(AutodiffError::DimensionMismatch { expected: self.arch.param_count(), found: params.len() });
        }
        let chunks: Vec<ChunkResult> = self
            .blocks
            .par_iter()
            .map_init(|| BlockTape::new(self.arch), |tape, b| self.run_block(params, tape, *b))
            .collect();

        let mut grad = vec![0.0; params.len()];
        let mut sums = vec![CompensatedSum::default(); self.groups.len()];
        for c in &chunks {
            for (g, v) in grad.iter_mut().zip(&c.grad) {
                *g += v;
            }
            for (s, v) in sums.iter_mut().zip(&c.sums) {
                s.add(v.value());
            }
        }

        let mut family = [CompensatedSum::default(); 5];
        let n_interfaces = self.batch.interfaces.len();
        for (idx, (grp, s)) in self.groups.iter().zip(&sums).enumerate() {
            let v = s.value();
            if !v.is_finite() {
                return Err(LossError::NonFinite(grp.term).into());
            }
            if grp.count == 0 {
                continue;
            }
            let f = match idx {
                i if i < self.offsets[0] => 0,
                i if i < self.offsets[1] => 1,
                i if i < self.offsets[2] => 2,
                i if i < self.offsets[2] + n_interfaces => 3,
                _ => 4,
            };
            family[f].add(v / grp.count as f64);
        }
        let [eq, bc_d, bc_n, ic_d, ic_n] = family.map(|s| s.value());
        let loss = LossBreakdown::compose(eq, bc_d, bc_n, ic_d, ic_n, &self.weights);
        Ok((loss, GradBuffer(grad)))
    }

    fn run_block(&self, params: &MLPParams, tape: &mut BlockTape, block: Block) -> ChunkResult {
        let arch = self.arch;
        let problem = self.problem;
        let batch = self.batch;
        let w = &self.weights;
        let mut grad = vec![0.0; params.len()];
        let mut sums = vec![CompensatedSum::default(); self.groups.len()];
        let mut fv = Vec::with_capacity(2 * CHUNK);
        let mut seeds = Vec::with_capacity(2 * CHUNK);

        match block {
            Block::Interior { m, start, len } => {
                let pts = &batch.interior[m][start..start + len];
                let kappa = problem.kappa[m];
                let n = self.groups[m].count as f64;
                tape.forward(params, arch, &vec![m; len], pts, Order::Laplacian, &mut fv);
                for v in &fv {
                    let r = kappa * v.laplacian - problem.source[m];
                    sums[m].add(r * r);
                    seeds.push(Seed { laplacian: 2.0 * r * kappa / n, ..Default::default() });
                }
            }
            Block::Dirichlet { g, start, len } => {
                let grp = &batch.dirichlet[g];
                let gi = self.offsets[0] + g;
                let n = self.groups[gi].count as f64;
                tape.forward(params, arch, &vec![grp.subdomain; len], &grp.points[start..start + len], Order::Value, &mut fv);
                for (v, target) in fv.iter().zip(&grp.targets[start..start + len]) {
                    let r = v.u - target;
                    sums[gi].add(r * r);
                    seeds.push(Seed { u: w.alpha_bc_d * 2.0 * r / n, ..Default::default() });
                }
            }
            Block::Neumann { g, start, len } => {
                let grp = &batch.neumann[g];
                let kappa = problem.kappa[grp.subdomain];
                let gi = self.offsets[1] + g;
                let n = self.groups[gi].count as f64;
                tape.forward(params, arch, &vec![grp.subdomain; len], &grp.points[start..start + len], Order::Gradient, &mut fv);
                for (j, v) in fv.iter().enumerate() {
                    let n0 = grp.normals[start + j];
                    let r = kappa * (0..3).map(|k| v.grad[k] * n0[k]).sum::<f64>() - grp.targets[start + j];
                    sums[gi].add(r * r);
                    let c = w.alpha_bc_n * 2.0 * r * kappa / n;
                    seeds.push(Seed { grad: n0.map(|v| c * v), ..Default::default() });
                }
            }
            Block::Interface { i, start, len } => {
                let iface = &batch.interfaces[i];
                let (s, f) = (iface.second, iface.first);
                let (ks, kf) = (problem.kappa[s], problem.kappa[f]);
                let pts = &iface.points[start..start + len];
                let mut subs = vec![s; len];
                subs.resize(2 * len, f);
                let mut doubled = Vec::with_capacity(2 * len);
                doubled.extend_from_slice(pts);
                doubled.extend_from_slice(pts);
                tape.forward(params, arch, &subs, &doubled, Order::Gradient, &mut fv);
                let gd = self.offsets[2] + i;
                let gn = gd + batch.interfaces.len();
                let n = iface.points.len() as f64;
                seeds.resize(2 * len, Seed::default());
                for j in 0..len {
                    let (vs, vf) = (&fv[j], &fv[len + j]);
                    let n2 = iface.normals[start + j];
                    let rd = vs.u - vf.u - iface.value_jump[start + j];
                    let rn = (0..3).map(|k| (ks * vs.grad[k] - kf * vf.grad[k]) * n2[k]).sum::<f64>() - iface.flux_jump[start + j];
                    sums[gd].add(rd * rd);
                    sums[gn].add(rn * rn);
                    let cd = w.alpha_int * 2.0 * rd / n;
                    let cn = w.alpha_int * 2.0 * rn / n;
                    seeds[j] = Seed { u: cd, grad: n2.map(|v| cn * ks * v), ..Default::default() };
                    seeds[len + j] = Seed { u: -cd, grad: n2.map(|v| -cn * kf * v), ..Default::default() };
                }
            }
        }
        tape.backward(params, arch, &seeds, &mut grad);
        ChunkResult { sums, grad }
    }
}

/// Loss and its exact gradient with respect to every parameter slot.
pub fn loss_and_grad(
    params: &MLPParams,
    arch: &Architecture,
    batch: &Batch,
    problem: &ProblemSpec,
    weights: &LossWeights,
) -> Result<(LossBreakdown, GradBuffer), AutodiffError> {
    LossGrad::new(arch, problem, batch, *weights)?.evaluate(params)
}
