//! Exact algebraic identities of the discretization and the multigrid
//! building blocks, checked on seeded random inputs.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::PairField;
use crate::forms::{assemble_sip, Coefficients};
use crate::hierarchy::{build_hierarchy, LevelStack, ProblemParams};
use crate::linalg::SparseLu;
use crate::mesh::Domain;
use crate::multigrid::Variant;
use crate::quadrature;
use crate::sparse::CsrMatrix;

/// Outcome of one identity over all samples, levels and `beta` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} max rel err {:.3e} (tol {:.0e}, {} samples)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.tolerance,
            self.samples
        )
    }
}

#[derive(Debug, Clone)]
pub struct PropertySuite {
    pub domain: Domain,
    pub levels: Vec<usize>,
    pub betas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub sigma: f64,
}

impl Default for PropertySuite {
    fn default() -> Self {
        PropertySuite {
            domain: Domain::UnitSquare,
            levels: vec![1, 2, 3],
            betas: vec![1.0, 1e-4],
            samples: 20,
            seed: 2024,
            tolerance: 1e-11,
            sigma: 6.0,
        }
    }
}

/// Coefficients with non-constant `zeta` and `gamma` whose normal flux keeps
/// one sign along every boundary edge of both domains.
pub fn variable_coefficients() -> Coefficients {
    Coefficients::variable(
        |x| [1.0 + x[0], 0.5 + 0.5 * x[1]],
        |x| 2.0 + x[0],
        |_| 1.5,
    )
}

fn rel(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let s = scale.max(lhs.abs()).max(rhs.abs());
    if s == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / s
    }
}

#[derive(Default)]
struct Tally {
    max: f64,
    count: usize,
}

impl Tally {
    fn record(&mut self, err: f64) {
        self.max = if err.is_nan() { f64::INFINITY } else { self.max.max(err) };
        self.count += 1;
    }
}

/// `B_k(x, (p - y, -y - p))` against `sqrt(beta) a(p,p) + |p|^2 + sqrt(beta) a(y,y) + |y|^2`.
pub fn coercivity_error(stack: &LevelStack, k: usize, x: &PairField) -> f64 {
    let ops = &stack.level(k).ops;
    let sb = ops.beta.sqrt();
    let w = PairField {
        p: x.p.iter().zip(&x.y).map(|(p, y)| p - y).collect(),
        y: x.p.iter().zip(&x.y).map(|(p, y)| -y - p).collect(),
    };
    let lhs = ops.saddle().form(x, &w);
    let rhs = sb * ops.a_form(&x.p, &x.p)
        + ops.l2_inner(&x.p, &x.p)
        + sb * ops.a_form(&x.y, &x.y)
        + ops.l2_inner(&x.y, &x.y);
    rel(lhs, rhs, 0.0)
}

/// `|p - y|^2 + |-y - p|^2` against `2 (|p|^2 + |y|^2)` in the broken
/// `H^1_beta` norm.
pub fn parallelogram_error(stack: &LevelStack, k: usize, x: &PairField) -> Result<f64> {
    let space = &stack.level(k).space;
    let beta = stack.beta();
    let diff: Vec<f64> = x.p.iter().zip(&x.y).map(|(p, y)| p - y).collect();
    let sum: Vec<f64> = x.p.iter().zip(&x.y).map(|(p, y)| -y - p).collect();
    let lhs = space.norm_h1beta(&diff, beta)?.powi(2) + space.norm_h1beta(&sum, beta)?.powi(2);
    let rhs = 2.0 * (space.norm_h1beta(&x.p, beta)?.powi(2) + space.norm_h1beta(&x.y, beta)?.powi(2));
    Ok(rel(lhs, rhs, 0.0))
}

/// Assembled `a^{ar}(v, v)` against the volume reaction integral plus half
/// the boundary integral of `|zeta . n| v^2`, both by quadrature.
pub fn advection_energy_error(stack: &LevelStack, k: usize, v: &[f64]) -> f64 {
    let level = stack.level(k);
    let space = &level.space;
    let coeffs = &level.ops.coefficients;
    let lhs = level.ops.a_ar.bilinear(v, v);
    let volume = space.integrate(|t, x| {
        (coeffs.gamma(x) - 0.5 * coeffs.div_zeta(x)) * space.eval_local(v, t, x).powi(2)
    });
    let mesh = space.mesh();
    let mut boundary = 0.0;
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let [a, b] = mesh.edge_points(e);
        for (x, w) in quadrature::edge_points(a, b, edge.length) {
            let z = coeffs.zeta(x);
            let flux = (z[0] * edge.normal[0] + z[1] * edge.normal[1]).abs();
            boundary += 0.5 * w * flux * space.eval_local(v, edge.plus, x).powi(2);
        }
    }
    rel(lhs, volume + boundary, 0.0)
}

/// `[restrict(x), w]_{k-1}` against `[x, inject(w)]_k`.
pub fn transfer_adjoint_error(stack: &LevelStack, k: usize, x: &PairField, w: &PairField) -> Result<f64> {
    let rx = stack.restrict(k, x)?;
    let iw = stack.inject(k, w)?;
    let lhs = stack.inner(k - 1, &rx, w);
    let rhs = stack.inner(k, x, &iw);
    let scale = stack.inner(k, x, x).sqrt() * stack.inner(k, &iw, &iw).sqrt();
    Ok(rel(lhs, rhs, scale))
}

/// `[B x, y]_k` against `[x, B^t y]_k`.
pub fn saddle_transpose_error(stack: &LevelStack, k: usize, x: &PairField, y: &PairField) -> f64 {
    let bx = stack.apply_operator(k, x);
    let bty = stack.apply_operator_transpose(k, y);
    let lhs = stack.inner(k, &bx, y);
    let rhs = stack.inner(k, x, &bty);
    let scale = stack.inner(k, &bx, &bx).sqrt() * stack.inner(k, y, y).sqrt();
    rel(lhs, rhs, scale)
}

/// The Ritz-type projection `P^{k-1}_k x` defined by
/// `B_{k-1}(P x, w) = B_k(x, I w)` for all coarse `w` (primal), or its dual
/// counterpart `B_{k-1}(w, P x) = B_k(I w, x)`.
pub fn project(stack: &LevelStack, k: usize, x: &PairField, variant: Variant) -> Result<PairField> {
    if k == 0 || k > stack.max_level() {
        return Err(Error::Level(format!("cannot project from level {k}")));
    }
    let lu = stack.direct_solver(k - 1, variant)?;
    Ok(project_with(stack, k, x, variant, &lu))
}

/// [`project`] with a prefactored coarse system from
/// [`LevelStack::direct_solver`].
pub fn project_with(stack: &LevelStack, k: usize, x: &PairField, variant: Variant, lu: &SparseLu) -> PairField {
    let saddle = stack.level(k).ops.saddle();
    let gx = match variant {
        Variant::Primal => saddle.galerkin_apply(x),
        Variant::Dual => saddle.galerkin_apply_transpose(x),
    };
    let p = stack.injection(k);
    let mut rhs = PairField::zeros(p.ncols());
    p.tr_mul_vec(&gx.p, &mut rhs.p);
    p.tr_mul_vec(&gx.y, &mut rhs.y);
    // solve_with multiplies by the coarse weight
    rhs.scale(1.0 / stack.level(k - 1).ops.weight);
    stack.solve_with(k - 1, lu, &rhs)
}

/// `max |P I w - w| / max |w|` for a coarse pair `w`.
pub fn projection_error(stack: &LevelStack, k: usize, w: &PairField, variant: Variant) -> Result<f64> {
    let iw = stack.inject(k, w)?;
    let piw = project(stack, k, &iw, variant)?;
    Ok(piw.sub(w).max_abs() / w.max_abs())
}

/// `max |P^T A^{sip}_k P - A^{sip}_{k-1} - J_{k-1}| / max |J_{k-1}|`, where
/// `J_{k-1}` is the coarse jump penalty matrix. Zero means the coarse SIP
/// operator differs from the Galerkin product only by the penalty, which
/// doubles under refinement.
pub fn penalty_mismatch(stack: &LevelStack, k: usize) -> f64 {
    let fine = &stack.level(k).ops;
    let coarse = stack.level(k - 1);
    let galerkin = fine.a_sip.galerkin(stack.injection(k));
    let penalty = CsrMatrix::lin_comb(
        1.0,
        &coarse.ops.a_sip,
        -1.0,
        &assemble_sip(&coarse.space, 0.0),
    );
    let defect = CsrMatrix::lin_comb(1.0, &galerkin, -1.0, &coarse.ops.a_sip);
    CsrMatrix::lin_comb(1.0, &defect, -1.0, &penalty).max_abs() / penalty.max_abs()
}

/// `B_k(S_k x, y)` against `B_k(x, R~_k y)`, where `S_k` is one homogeneous
/// pre-smoothing step and `R~_k` one homogeneous dual post-smoothing step.
pub fn smoother_adjoint_error(stack: &LevelStack, k: usize, x: &PairField, y: &PairField) -> f64 {
    let n = x.len();
    let zero = PairField::zeros(n);
    let lambda = stack.damping(k);
    let sx = stack.smooth_pre(k, x, &zero, lambda, 1, Variant::Primal);
    let ry = stack.smooth_post(k, y, &zero, lambda, 1, Variant::Dual);
    let form = stack.level(k).ops.saddle();
    let lhs = form.form(&sx, y);
    let rhs = form.form(x, &ry);
    let gx = form.galerkin_apply(&sx);
    let gr = form.galerkin_apply_transpose(&ry);
    let scale = (gx.dot(&gx) * y.dot(y)).sqrt().max((gr.dot(&gr) * x.dot(x)).sqrt());
    rel(lhs, rhs, scale)
}

impl PropertySuite {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(Error::Config("property levels must be non-empty and >= 1".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::Config("property suite needs at least one beta".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("property suite needs at least one sample".into()));
        }
        Ok(())
    }

    /// Runs every identity and returns one report per identity, each the
    /// worst case over all levels, `beta` values and samples.
    pub fn run(&self) -> Result<Vec<PropertyReport>> {
        self.validate()?;
        let max_level = *self.levels.iter().max().unwrap();
        let names = [
            "coercivity",
            "parallelogram",
            "advection_energy",
            "transfer_adjoint",
            "saddle_transpose",
            "projection_primal",
            "projection_dual",
            "smoother_adjoint",
        ];
        let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        for &beta in &self.betas {
            let params = ProblemParams::new(self.domain, beta).with_sigma(self.sigma);
            let stack = build_hierarchy(params.clone(), max_level)?;
            let variable = build_hierarchy(params.with_coefficients(variable_coefficients()), max_level)?;
            for &k in &self.levels {
                let n = stack.level(k).dof_count();
                let nc = stack.level(k - 1).dof_count();
                let primal = stack.direct_solver(k - 1, Variant::Primal)?;
                let dual = stack.direct_solver(k - 1, Variant::Dual)?;
                for _ in 0..self.samples {
                    let x = PairField::random(n, &mut rng);
                    let y = PairField::random(n, &mut rng);
                    let w = PairField::random(nc, &mut rng);
                    tallies[0].record(coercivity_error(&stack, k, &x));
                    tallies[1].record(parallelogram_error(&stack, k, &x)?);
                    tallies[2].record(advection_energy_error(&stack, k, &x.p));
                    tallies[2].record(advection_energy_error(&variable, k, &x.y));
                    tallies[3].record(transfer_adjoint_error(&stack, k, &x, &w)?);
                    tallies[4].record(saddle_transpose_error(&stack, k, &x, &y));
                    let iw = stack.inject(k, &w)?;
                    for (t, variant, lu) in [(5, Variant::Primal, &primal), (6, Variant::Dual, &dual)] {
                        let piw = project_with(&stack, k, &iw, variant, lu);
                        tallies[t].record(piw.sub(&w).max_abs() / w.max_abs());
                    }
                    tallies[7].record(smoother_adjoint_error(&stack, k, &x, &y));
                }
            }
        }

        Ok(names
            .iter()
            .zip(tallies)
            .map(|(name, t)| PropertyReport {
                name: name.to_string(),
                max_error: t.max,
                tolerance: self.tolerance,
                samples: t.count,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build_hierarchy;

    fn small_suite() -> PropertySuite {
        PropertySuite {
            levels: vec![1, 2],
            betas: vec![1e-2],
            samples: 3,
            ..PropertySuite::default()
        }
    }

    #[test]
    fn exact_identities_hold() {
        let reports = small_suite().run().unwrap();
        for r in &reports {
            if r.name.starts_with("projection") {
                continue;
            }
            assert!(r.passed(), "{r}");
        }
        assert_eq!(reports.len(), 8);
    }

    #[test]
    fn coarse_mismatch_is_exactly_the_penalty() {
        let stack = build_hierarchy(ProblemParams::new(Domain::UnitSquare, 1e-2), 2).unwrap();
        let err = penalty_mismatch(&stack, 2);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn projection_defect_is_not_roundoff() {
        let stack = build_hierarchy(ProblemParams::new(Domain::UnitSquare, 1e-2), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = PairField::random(stack.level(1).dof_count(), &mut rng);
        let err = projection_error(&stack, 2, &w, Variant::Primal).unwrap();
        assert!(err.is_finite() && err > 1e-6, "{err}");
    }

    #[test]
    fn project_checks_level() {
        let stack = build_hierarchy(ProblemParams::new(Domain::UnitSquare, 1.0), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = PairField::random(stack.level(0).dof_count(), &mut rng);
        let iw = stack.inject(1, &w).unwrap();
        let a = project(&stack, 1, &iw, Variant::Dual).unwrap();
        assert_eq!(a.len(), w.len());
        assert!(project(&stack, 0, &iw, Variant::Dual).is_err());
    }

    #[test]
    fn bad_suite_rejected() {
        let mut s = small_suite();
        s.levels = vec![0];
        assert!(s.run().is_err());
        s.levels = vec![1];
        s.samples = 0;
        assert!(s.run().is_err());
    }
}
