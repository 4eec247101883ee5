//! The level stack `T_0, ..., T_K` with nested DG spaces, intergrid
//! transfers, per-level operators and the shared preconditioner.

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::field::PairField;
use crate::forms::{Coefficients, LevelOperators};
use crate::linalg::{DenseLu, SparseLu};
use crate::mesh::{build_initial_mesh, Domain, Mesh};
use crate::multigrid::{EigEstimate, PowerConfig, Variant};
use crate::precond::{BlockPreconditioner, InnerConfig};
use crate::space::DgSpace;
use crate::sparse::CsrMatrix;

/// Deepest hierarchy `build_hierarchy` accepts.
pub const MAX_LEVEL: usize = 12;

#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub domain: Domain,
    pub beta: f64,
    pub sigma: f64,
    pub coefficients: Coefficients,
    pub inner: InnerConfig,
    pub power: PowerConfig,
    /// `C_0` in `lambda_k = min(1 / lambda_max, C_0 / (sqrt(beta) h_k^-2 + 1))`.
    pub damping_constant: f64,
}

impl ProblemParams {
    /// `sigma = 6`, `zeta = [1, 0]`, `gamma = 0`, one V(4,4) inner cycle.
    pub fn new(domain: Domain, beta: f64) -> Self {
        ProblemParams {
            domain,
            beta,
            sigma: 6.0,
            coefficients: Coefficients::horizontal_wind(),
            inner: InnerConfig::default(),
            power: PowerConfig::default(),
            damping_constant: 1.0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_coefficients(mut self, coefficients: Coefficients) -> Self {
        self.coefficients = coefficients;
        self
    }

    pub fn with_inner(mut self, inner: InnerConfig) -> Self {
        self.inner = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.damping_constant > 0.0) {
            return Err(Error::Config("damping constant must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Level {
    pub mesh: Arc<Mesh>,
    pub space: DgSpace,
    pub ops: LevelOperators,
    pub eig: EigEstimate,
    /// Richardson damping `lambda_k`.
    pub damping: f64,
}

impl Level {
    pub fn h(&self) -> f64 {
        self.space.h()
    }

    pub fn dof_count(&self) -> usize {
        self.space.dof_count()
    }
}

#[derive(Debug)]
pub struct LevelStack {
    pub(crate) levels: Vec<Level>,
    /// `injections[k]` realizes `V_{k-1} -> V_k`; entry 0 is an empty
    /// placeholder.
    pub(crate) injections: Vec<CsrMatrix>,
    pub(crate) precond: BlockPreconditioner,
    pub(crate) coarse_primal: DenseLu,
    pub(crate) coarse_dual: DenseLu,
    pub(crate) params: ProblemParams,
}

/// Natural inclusion of the parent space into the child space: every child
/// node receives the barycentric weights of its position in the parent.
pub fn injection_matrix(coarse: &DgSpace, fine: &DgSpace) -> CsrMatrix {
    let fine_mesh = fine.mesh();
    let coarse_mesh = coarse.mesh();
    let mut triplets = Vec::with_capacity(2 * fine.dof_count());
    for (c, &parent) in fine_mesh.parent_map.iter().enumerate() {
        for local in 0..3 {
            let x = fine.node_coords(fine.dof(c, local));
            let lambda = coarse_mesh.barycentric(parent, x);
            for (j, &l) in lambda.iter().enumerate() {
                // red refinement only produces weights 0, 1/2 and 1
                let snapped = (2.0 * l).round() / 2.0;
                let l = if (l - snapped).abs() < 1e-12 { snapped } else { l };
                if l != 0.0 {
                    triplets.push((fine.dof(c, local), coarse.dof(parent, j), l));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine.dof_count(), coarse.dof_count(), &triplets)
}

/// Assemble the full hierarchy `0..=max_level`, including transfers,
/// preconditioner, coarse factorizations, eigenvalue estimates and damping
/// factors on every level.
pub fn build_hierarchy(params: ProblemParams, max_level: usize) -> Result<LevelStack> {
    params.validate()?;
    if max_level > MAX_LEVEL {
        return Err(Error::Config(format!(
            "refusing to build {max_level} levels (limit {MAX_LEVEL})"
        )));
    }
    let coeffs = params.coefficients.clone();

    let mut meshes = Vec::with_capacity(max_level + 1);
    let mut mesh = build_initial_mesh(params.domain);
    mesh.classify_edges(|x| coeffs.zeta(x));
    meshes.push(Arc::new(mesh));
    for _ in 0..max_level {
        let mut fine = meshes.last().unwrap().refine_uniform();
        fine.classify_edges(|x| coeffs.zeta(x));
        meshes.push(Arc::new(fine));
    }

    let spaces: Vec<DgSpace> = meshes.iter().map(|m| DgSpace::new(Arc::clone(m))).collect();
    let margin = coeffs.min_reaction_margin(&spaces[0]);
    if margin <= 0.0 {
        warn!("gamma - div(zeta)/2 reaches {margin:e}; advection-reaction coercivity margin is not positive");
    }

    let mut injections = vec![CsrMatrix::zeros(0, 0)];
    for k in 1..=max_level {
        injections.push(injection_matrix(&spaces[k - 1], &spaces[k]));
    }

    let mut ops = Vec::with_capacity(max_level + 1);
    for space in &spaces {
        ops.push(LevelOperators::assemble(space, params.beta, params.sigma, coeffs.clone())?);
    }

    let sb = params.beta.sqrt();
    let rd: Vec<CsrMatrix> = ops
        .iter()
        .map(|o| CsrMatrix::lin_comb(sb, &o.a_sip, 1.0, &o.mass))
        .collect();
    let weights: Vec<f64> = ops.iter().map(|o| o.weight).collect();
    let precond = BlockPreconditioner::new(rd, weights, injections.clone(), params.inner)?;

    let n0 = ops[0].dof_count();
    let coarse_primal = DenseLu::from_triplets(2 * n0, &ops[0].saddle().galerkin_triplets(false))?;
    let coarse_dual = DenseLu::from_triplets(2 * n0, &ops[0].saddle().galerkin_triplets(true))?;

    let levels = meshes
        .into_iter()
        .zip(spaces)
        .zip(ops)
        .enumerate()
        .map(|(k, ((mesh, space), ops))| Level {
            mesh,
            space,
            ops,
            eig: EigEstimate::placeholder(k),
            damping: 0.0,
        })
        .collect();

    let mut stack = LevelStack {
        levels,
        injections,
        precond,
        coarse_primal,
        coarse_dual,
        params,
    };
    for k in 0..=max_level {
        let eig = stack.estimate_extreme_eigs(k);
        let damping = stack.damping_factor(k, &eig);
        stack.levels[k].eig = eig;
        stack.levels[k].damping = damping;
    }
    Ok(stack)
}

impl LevelStack {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn preconditioner(&self) -> &BlockPreconditioner {
        &self.precond
    }

    pub fn injection(&self, k: usize) -> &CsrMatrix {
        assert!(k >= 1, "no injection into level 0");
        &self.injections[k]
    }

    /// `sqrt(beta) h_k^{-2}`
    pub fn diffusion_scale(&self, k: usize) -> f64 {
        let h = self.levels[k].h();
        self.params.beta.sqrt() / (h * h)
    }

    fn check_level(&self, k: usize, x: &PairField, what: &str) -> Result<()> {
        if k > self.max_level() {
            return Err(Error::Level(format!("level {k} not built (max {})", self.max_level())));
        }
        let n = self.levels[k].dof_count();
        if x.len() != n || x.y.len() != n {
            return Err(Error::Level(format!(
                "{what}: field of length {} does not live on level {k} ({n} dofs)",
                x.len()
            )));
        }
        Ok(())
    }

    /// `[x, w]_k`
    pub fn inner(&self, k: usize, x: &PairField, w: &PairField) -> f64 {
        self.levels[k].ops.pair_inner(x, w)
    }

    /// `I^k_{k-1}`: represent a level `k-1` pair on level `k`.
    pub fn inject(&self, k: usize, coarse: &PairField) -> Result<PairField> {
        if k == 0 || k > self.max_level() {
            return Err(Error::Level(format!("cannot inject into level {k}")));
        }
        self.check_level(k - 1, coarse, "inject")?;
        Ok(self.inject_unchecked(k, coarse))
    }

    pub(crate) fn inject_unchecked(&self, k: usize, coarse: &PairField) -> PairField {
        let p = &self.injections[k];
        PairField {
            p: p.apply(&coarse.p),
            y: p.apply(&coarse.y),
        }
    }

    /// `I^{k-1}_k = D_{k-1}^{-1} P_k^T D_k`, the `[.,.]`-adjoint of `inject`.
    pub fn restrict(&self, k: usize, fine: &PairField) -> Result<PairField> {
        if k == 0 || k > self.max_level() {
            return Err(Error::Level(format!("cannot restrict from level {k}")));
        }
        self.check_level(k, fine, "restrict")?;
        Ok(self.restrict_unchecked(k, fine))
    }

    pub(crate) fn restrict_unchecked(&self, k: usize, fine: &PairField) -> PairField {
        let p = &self.injections[k];
        let ratio = self.levels[k].ops.weight / self.levels[k - 1].ops.weight;
        let mut out = PairField::zeros(p.ncols());
        p.tr_mul_vec(&fine.p, &mut out.p);
        p.tr_mul_vec(&fine.y, &mut out.y);
        out.scale(ratio);
        out
    }

    /// Solve `B_k x = b` (primal) or `B_k^t x = b` (dual) with a sparse LU
    /// of the block Galerkin matrix.
    pub fn solve_direct(&self, k: usize, b: &PairField, variant: Variant) -> Result<PairField> {
        self.check_level(k, b, "solve_direct")?;
        let lu = self.direct_solver(k, variant)?;
        Ok(self.solve_with(k, &lu, b))
    }

    pub fn direct_solver(&self, k: usize, variant: Variant) -> Result<SparseLu> {
        let ops = &self.levels[k].ops;
        let n = ops.dof_count();
        SparseLu::from_triplets(2 * n, &ops.saddle().galerkin_triplets(variant == Variant::Dual))
    }

    /// Apply a factorization from [`Self::direct_solver`] to `b`.
    pub fn solve_with(&self, k: usize, lu: &SparseLu, b: &PairField) -> PairField {
        let w = self.levels[k].ops.weight;
        let rhs: Vec<f64> = b.to_stacked().iter().map(|v| w * v).collect();
        PairField::from_stacked(&lu.solve(&rhs))
    }

    pub(crate) fn coarse_solve(&self, b: &PairField, variant: Variant) -> PairField {
        let w = self.levels[0].ops.weight;
        let rhs: Vec<f64> = b.to_stacked().iter().map(|v| w * v).collect();
        let lu = match variant {
            Variant::Primal => &self.coarse_primal,
            Variant::Dual => &self.coarse_dual,
        };
        PairField::from_stacked(&lu.solve(&rhs))
    }
}
