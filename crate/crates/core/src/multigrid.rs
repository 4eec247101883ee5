//! Outer multigrid for `B_k x = b` (primal) and `B_k^t x = b` (dual):
//! Richardson smoothers preconditioned by `C_k`, W- and V-cycles, damping
//! selection from power-iteration eigenvalue estimates, and the energy norm.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::PairField;
use crate::hierarchy::LevelStack;

const POWER_SEED: u64 = 0x706f_7765_72;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    W,
    V,
}

impl CycleKind {
    fn recursions(self) -> usize {
        match self {
            CycleKind::W => 2,
            CycleKind::V => 1,
        }
    }
}

impl fmt::Display for CycleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CycleKind::W => "W",
            CycleKind::V => "V",
        })
    }
}

impl FromStr for CycleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" => Ok(CycleKind::W),
            "v" => Ok(CycleKind::V),
            other => Err(Error::Config(format!("unknown cycle '{other}' (expected w or v)"))),
        }
    }
}

/// Which operator the cycle inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `B_k x = b`
    Primal,
    /// `B_k^t x = b`
    Dual,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Primal => "primal",
            Variant::Dual => "dual",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primal" => Ok(Variant::Primal),
            "dual" => Ok(Variant::Dual),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleConfig {
    pub m1: usize,
    pub m2: usize,
    pub cycle: CycleKind,
    pub variant: Variant,
}

impl CycleConfig {
    pub fn new(m1: usize, m2: usize, cycle: CycleKind) -> Result<Self> {
        let cfg = CycleConfig {
            m1,
            m2,
            cycle,
            variant: Variant::Primal,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `m1 = m2 = m`
    pub fn symmetric(m: usize, cycle: CycleKind) -> Result<Self> {
        Self::new(m, m, cycle)
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 == 0 && self.m2 == 0 {
            return Err(Error::Config("m1 and m2 cannot both be zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

/// Extreme eigenvalues of `T_k = B_k^t C_k^{-1} B_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub level: usize,
    /// Both power iterations met the tolerance.
    pub converged: bool,
}

impl EigEstimate {
    pub(crate) fn placeholder(level: usize) -> Self {
        EigEstimate {
            lambda_min: f64::NAN,
            lambda_max: f64::NAN,
            level,
            converged: false,
        }
    }

    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// Outcome of [`LevelStack::iterate`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: PairField,
    pub cycles: usize,
    /// Relative residual `||b - B x||_k / ||b||_k` after each cycle.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Power iteration in an inner product where the operator is self-adjoint;
/// `[.,.]_k` is a multiple of the Euclidean one, so plain dots suffice.
fn power_iteration(
    n: usize,
    cfg: PowerConfig,
    seed: u64,
    apply: impl Fn(&PairField) -> PairField,
) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = PairField::random(n, &mut rng);
    let mut rq = 0.0;
    for it in 0..cfg.max_iters {
        let norm = v.dot(&v).sqrt();
        v.scale(1.0 / norm);
        let w = apply(&v);
        let next = v.dot(&w);
        if it > 0 && (next - rq).abs() < cfg.tol * next.abs() {
            return (next, true);
        }
        rq = next;
        v = w;
    }
    (rq, false)
}

impl LevelStack {
    fn forward(&self, k: usize, x: &PairField, variant: Variant) -> PairField {
        let s = self.levels[k].ops.saddle();
        match variant {
            Variant::Primal => s.apply(x),
            Variant::Dual => s.apply_transpose(x),
        }
    }

    fn adjoint(&self, k: usize, x: &PairField, variant: Variant) -> PairField {
        let s = self.levels[k].ops.saddle();
        match variant {
            Variant::Primal => s.apply_transpose(x),
            Variant::Dual => s.apply(x),
        }
    }

    /// `B_k x`
    pub fn apply_operator(&self, k: usize, x: &PairField) -> PairField {
        self.forward(k, x, Variant::Primal)
    }

    /// `B_k^t x`
    pub fn apply_operator_transpose(&self, k: usize, x: &PairField) -> PairField {
        self.forward(k, x, Variant::Dual)
    }

    /// `C_k^{-1} x`
    pub fn apply_preconditioner(&self, k: usize, x: &PairField) -> PairField {
        self.precond.apply_ck_inverse(k, x)
    }

    /// `T_k x = B_k^t C_k^{-1} B_k x`
    pub fn apply_normal(&self, k: usize, x: &PairField) -> PairField {
        let bx = self.apply_operator(k, x);
        self.apply_operator_transpose(k, &self.apply_preconditioner(k, &bx))
    }

    /// `B_k C_k^{-1} B_k^t x`
    pub fn apply_normal_dual(&self, k: usize, x: &PairField) -> PairField {
        let bx = self.apply_operator_transpose(k, x);
        self.apply_operator(k, &self.apply_preconditioner(k, &bx))
    }

    /// Power iterations for the largest eigenvalue of `T_k` and, through
    /// the shift `lambda_max - T_k`, the smallest.
    pub fn estimate_extreme_eigs(&self, k: usize) -> EigEstimate {
        let cfg = self.params.power;
        let n = self.levels[k].dof_count();
        let (lambda_max, ok_max) =
            power_iteration(n, cfg, POWER_SEED + k as u64, |v| self.apply_normal(k, v));
        let (shifted, ok_min) = power_iteration(n, cfg, POWER_SEED + 1000 + k as u64, |v| {
            let mut w = v.scaled(lambda_max);
            w.axpy(-1.0, &self.apply_normal(k, v));
            w
        });
        let est = EigEstimate {
            lambda_min: lambda_max - shifted,
            lambda_max,
            level: k,
            converged: ok_max && ok_min,
        };
        if !est.converged {
            warn!(
                "power iteration on level {k} stopped at the iteration cap (lambda_min {:.3e}, lambda_max {:.3e})",
                est.lambda_min, est.lambda_max
            );
        }
        est
    }

    /// Richardson damping for level `k`.
    pub fn damping_factor(&self, k: usize, eig: &EigEstimate) -> f64 {
        let scale = self.diffusion_scale(k);
        if scale >= 1.0 {
            (1.0 / eig.lambda_max).min(self.params.damping_constant / (scale + 1.0))
        } else {
            2.0 / (eig.lambda_min + eig.lambda_max)
        }
    }

    pub fn damping(&self, k: usize) -> f64 {
        self.levels[k].damping
    }

    pub fn eig_estimate(&self, k: usize) -> &EigEstimate {
        &self.levels[k].eig
    }

    /// `steps` updates `x += lambda C^{-1} B^t (b - B x)` (operators swapped
    /// for the dual variant).
    pub fn smooth_pre(
        &self,
        k: usize,
        x: &PairField,
        b: &PairField,
        lambda: f64,
        steps: usize,
        variant: Variant,
    ) -> PairField {
        let mut x = x.clone();
        for _ in 0..steps {
            let r = b.sub(&self.forward(k, &x, variant));
            let d = self.apply_preconditioner(k, &self.adjoint(k, &r, variant));
            x.axpy(lambda, &d);
        }
        x
    }

    /// `steps` updates `x += lambda B^t C^{-1} (b - B x)` (operators swapped
    /// for the dual variant).
    pub fn smooth_post(
        &self,
        k: usize,
        x: &PairField,
        b: &PairField,
        lambda: f64,
        steps: usize,
        variant: Variant,
    ) -> PairField {
        let mut x = x.clone();
        for _ in 0..steps {
            let r = b.sub(&self.forward(k, &x, variant));
            let d = self.adjoint(k, &self.apply_preconditioner(k, &r), variant);
            x.axpy(lambda, &d);
        }
        x
    }

    /// One multigrid cycle on level `k` starting from `x0`.
    pub fn mg_solve(&self, k: usize, b: &PairField, x0: &PairField, cfg: &CycleConfig) -> Result<PairField> {
        cfg.validate()?;
        if k > self.max_level() {
            return Err(Error::Level(format!("level {k} not built (max {})", self.max_level())));
        }
        let n = self.levels[k].dof_count();
        if b.len() != n || x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: if b.len() != n { b.len() } else { x0.len() },
            });
        }
        Ok(self.cycle(k, b, x0, cfg))
    }

    fn cycle(&self, k: usize, b: &PairField, x0: &PairField, cfg: &CycleConfig) -> PairField {
        if k == 0 {
            return self.coarse_solve(b, cfg.variant);
        }
        let lambda = self.levels[k].damping;
        let x = self.smooth_pre(k, x0, b, lambda, cfg.m1, cfg.variant);
        let r = b.sub(&self.forward(k, &x, cfg.variant));
        let coarse_b = self.restrict_unchecked(k, &r);
        let mut c = PairField::zeros(coarse_b.len());
        for _ in 0..cfg.cycle.recursions() {
            c = self.cycle(k - 1, &coarse_b, &c, cfg);
        }
        let x = x.add(&self.inject_unchecked(k, &c));
        self.smooth_post(k, &x, b, lambda, cfg.m2, cfg.variant)
    }

    /// `[T_k x, x]_k^{1/2}`
    pub fn energy_norm(&self, k: usize, x: &PairField) -> f64 {
        let bx = self.apply_operator(k, x);
        self.inner(k, &self.apply_preconditioner(k, &bx), &bx).max(0.0).sqrt()
    }

    /// `[B_k C_k^{-1} B_k^t x, x]_k^{1/2}`
    pub fn energy_norm_dual(&self, k: usize, x: &PairField) -> f64 {
        let bx = self.apply_operator_transpose(k, x);
        self.inner(k, &self.apply_preconditioner(k, &bx), &bx).max(0.0).sqrt()
    }

    /// Energy norm matching the operator a variant inverts.
    pub fn energy_norm_for(&self, k: usize, x: &PairField, variant: Variant) -> f64 {
        match variant {
            Variant::Primal => self.energy_norm(k, x),
            Variant::Dual => self.energy_norm_dual(k, x),
        }
    }

    /// Repeat cycles until the relative residual drops below `rel_tol` or
    /// `max_cycles` is reached.
    pub fn iterate(
        &self,
        k: usize,
        b: &PairField,
        x0: &PairField,
        cfg: &CycleConfig,
        rel_tol: f64,
        max_cycles: usize,
    ) -> Result<SolveReport> {
        let norm = |v: &PairField| self.inner(k, v, v).sqrt();
        let b_norm = norm(b);
        let mut x = x0.clone();
        let mut history = Vec::new();
        if b_norm == 0.0 {
            return Ok(SolveReport {
                x: PairField::zeros(b.len()),
                cycles: 0,
                history,
                converged: true,
            });
        }
        for cycle in 1..=max_cycles {
            x = self.mg_solve(k, b, &x, cfg)?;
            let rel = norm(&b.sub(&self.forward(k, &x, cfg.variant))) / b_norm;
            history.push(rel);
            if rel < rel_tol {
                return Ok(SolveReport {
                    x,
                    cycles: cycle,
                    history,
                    converged: true,
                });
            }
        }
        Ok(SolveReport {
            x,
            cycles: max_cycles,
            history,
            converged: false,
        })
    }

    /// [`Self::iterate`] with relative residual `1e-10` and 100 cycles.
    pub fn solve(&self, k: usize, b: &PairField, cfg: &CycleConfig) -> Result<SolveReport> {
        self.iterate(k, b, &PairField::zeros(b.len()), cfg, 1e-10, 100)
    }
}
