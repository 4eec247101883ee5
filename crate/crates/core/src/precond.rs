//! Block-diagonal preconditioner `C_k = diag(L_k, L_k)`.
//!
//! `L_k^{-1} phi` is approximated by V-cycles for the SIP discretization of
//! `-sqrt(beta) Laplace u + u = phi` with homogeneous Dirichlet data, i.e.
//! the SPD matrix `K_k = sqrt(beta) A_sip + M`. The right-hand side is
//! `D_k phi`, which makes the resulting map self-adjoint in `(.,.)_k`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{dot, random_vector, PairField};
use crate::linalg::{DenseLu, SparseLu};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSmoother {
    /// Damped point Jacobi, weight `2 / (3 rho)`.
    Jacobi,
    /// Forward Gauss-Seidel before and backward after the coarse correction.
    GaussSeidel,
}

impl fmt::Display for InnerSmoother {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerSmoother::Jacobi => "jacobi",
            InnerSmoother::GaussSeidel => "gauss_seidel",
        })
    }
}

impl FromStr for InnerSmoother {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jacobi" => Ok(InnerSmoother::Jacobi),
            "gauss_seidel" | "gs" | "sgs" => Ok(InnerSmoother::GaussSeidel),
            other => Err(Error::Config(format!("unknown inner smoother '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    Multigrid,
    /// Sparse direct factorization of `K_k`; a reference for the multigrid.
    Direct,
}

impl fmt::Display for InnerSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerSolver::Multigrid => "multigrid",
            InnerSolver::Direct => "direct",
        })
    }
}

impl FromStr for InnerSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multigrid" | "mg" => Ok(InnerSolver::Multigrid),
            "direct" | "lu" => Ok(InnerSolver::Direct),
            other => Err(Error::Config(format!("unknown inner solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerConfig {
    /// V-cycles per application, zero initial guess.
    pub cycles: usize,
    /// Smoothing sweeps before and after each coarse correction.
    pub smoothing: usize,
    pub smoother: InnerSmoother,
    pub solver: InnerSolver,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            cycles: 1,
            smoothing: 4,
            smoother: InnerSmoother::GaussSeidel,
            solver: InnerSolver::Multigrid,
        }
    }
}

impl InnerConfig {
    pub fn direct() -> Self {
        InnerConfig {
            solver: InnerSolver::Direct,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
struct RdLevel {
    matrix: CsrMatrix,
    inv_diag: Vec<f64>,
    /// Jacobi damping `2 / (3 rho)`.
    omega: f64,
}

impl RdLevel {
    fn new(matrix: CsrMatrix) -> Self {
        let diag = matrix.diagonal();
        let rho = jacobi_spectral_radius(&matrix, &diag);
        RdLevel {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            omega: 2.0 / (3.0 * rho),
            matrix,
        }
    }
}

/// Power iteration for the spectral radius of `diag(K)^{-1} K`, run in the
/// `diag(K)` inner product where the operator is self-adjoint.
fn jacobi_spectral_radius(matrix: &CsrMatrix, diag: &[f64]) -> f64 {
    let n = diag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a61_636f_6269);
    let mut v = random_vector(n, &mut rng);
    let mut kv = vec![0.0; n];
    let mut rho = 0.0;
    for _ in 0..200 {
        let norm = v.iter().zip(diag).map(|(x, d)| d * x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        matrix.mul_vec(&v, &mut kv);
        let next = dot(&v, &kv);
        v.iter_mut().zip(&kv).zip(diag).for_each(|((x, k), d)| *x = k / d);
        if (next - rho).abs() < 1e-10 * next.abs() {
            return next;
        }
        rho = next;
    }
    rho
}

/// Multigrid approximation of `L_k^{-1}` on every level of a hierarchy.
#[derive(Debug)]
pub struct BlockPreconditioner {
    levels: Vec<RdLevel>,
    weights: Vec<f64>,
    /// `injections[k]` maps level `k - 1` into level `k`; entry 0 is unused.
    injections: Vec<CsrMatrix>,
    coarse: DenseLu,
    direct: Vec<SparseLu>,
    config: InnerConfig,
}

impl BlockPreconditioner {
    /// `matrices[k]` is `K_k = sqrt(beta) A_sip + M` on level `k` and
    /// `weights[k] = h_k^2`.
    pub fn new(
        matrices: Vec<CsrMatrix>,
        weights: Vec<f64>,
        injections: Vec<CsrMatrix>,
        config: InnerConfig,
    ) -> Result<Self> {
        if matrices.is_empty() || matrices.len() != weights.len() || injections.len() != matrices.len() {
            return Err(Error::Level(format!(
                "{} matrices, {} weights, {} injections",
                matrices.len(),
                weights.len(),
                injections.len()
            )));
        }
        if config.cycles == 0 {
            return Err(Error::Config("inner_cycles must be at least 1".into()));
        }
        let coarse = DenseLu::from_csr(&matrices[0])?;
        let direct = match config.solver {
            InnerSolver::Multigrid => Vec::new(),
            InnerSolver::Direct => matrices.iter().map(SparseLu::from_csr).collect::<Result<_>>()?,
        };
        let levels = matrices.into_iter().map(RdLevel::new).collect();
        Ok(BlockPreconditioner {
            levels,
            weights,
            injections,
            coarse,
            direct,
            config,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn config(&self) -> InnerConfig {
        self.config
    }

    pub fn jacobi_weight(&self, k: usize) -> f64 {
        self.levels[k].omega
    }

    pub fn rd_matrix(&self, k: usize) -> &CsrMatrix {
        &self.levels[k].matrix
    }

    fn jacobi(&self, lvl: &RdLevel, r: &[f64], u: &mut [f64], work: &mut [f64]) {
        for _ in 0..self.config.smoothing {
            lvl.matrix.mul_vec(u, work);
            for i in 0..u.len() {
                u[i] += lvl.omega * lvl.inv_diag[i] * (r[i] - work[i]);
            }
        }
    }

    fn gauss_seidel(&self, lvl: &RdLevel, r: &[f64], u: &mut [f64], forward: bool) {
        let n = u.len();
        for _ in 0..self.config.smoothing {
            for step in 0..n {
                let i = if forward { step } else { n - 1 - step };
                let s: f64 = lvl.matrix.row(i).map(|(j, v)| v * u[j]).sum();
                u[i] += lvl.inv_diag[i] * (r[i] - s);
            }
        }
    }

    fn smooth(&self, lvl: &RdLevel, r: &[f64], u: &mut [f64], work: &mut [f64], pre: bool) {
        match self.config.smoother {
            InnerSmoother::Jacobi => self.jacobi(lvl, r, u, work),
            InnerSmoother::GaussSeidel => self.gauss_seidel(lvl, r, u, pre),
        }
    }

    /// One V-cycle for `K_j u = r` from a zero initial guess.
    fn vcycle(&self, j: usize, r: &[f64]) -> Vec<f64> {
        if j == 0 {
            return self.coarse.solve(r);
        }
        let lvl = &self.levels[j];
        let n = r.len();
        let mut u = vec![0.0; n];
        let mut work = vec![0.0; n];
        self.smooth(lvl, r, &mut u, &mut work, true);

        lvl.matrix.mul_vec(&u, &mut work);
        work.iter_mut().zip(r).for_each(|(w, ri)| *w = ri - *w);
        let p = &self.injections[j];
        let mut coarse_r = vec![0.0; p.ncols()];
        p.tr_mul_vec(&work, &mut coarse_r);
        let coarse_u = self.vcycle(j - 1, &coarse_r);
        p.mul_vec_add(1.0, &coarse_u, &mut u);

        self.smooth(lvl, r, &mut u, &mut work, false);
        u
    }

    /// Approximate `L_k^{-1} phi`.
    pub fn apply_lk_inverse(&self, k: usize, phi: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = phi.iter().map(|v| self.weights[k] * v).collect();
        if let Some(lu) = self.direct.get(k) {
            return lu.solve(&r);
        }
        let mut u = self.vcycle(k, &r);
        for _ in 1..self.config.cycles {
            let mut res = vec![0.0; r.len()];
            self.levels[k].matrix.mul_vec(&u, &mut res);
            res.iter_mut().zip(&r).for_each(|(x, ri)| *x = ri - *x);
            let du = self.vcycle(k, &res);
            u.iter_mut().zip(du).for_each(|(a, b)| *a += b);
        }
        u
    }

    /// Approximate `C_k^{-1} x`, componentwise.
    pub fn apply_ck_inverse(&self, k: usize, x: &PairField) -> PairField {
        PairField {
            p: self.apply_lk_inverse(k, &x.p),
            y: self.apply_lk_inverse(k, &x.y),
        }
    }
}
