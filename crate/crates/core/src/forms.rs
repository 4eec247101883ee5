//! Bilinear forms of the DG discretization and the saddle-point system
//! operator built from them.
//!
//! Galerkin matrices are stored with entry `(i, j) = form(phi_j, phi_i)`
//! (row = test function). With `A = A_sip + A_ar` and mass matrix `M`, the
//! saddle form
//!
//! ```text
//! B((p,y),(q,z)) = sqrt(beta) a(q,p) - (y,q) - (p,z) - sqrt(beta) a(y,z)
//! ```
//!
//! has the block Galerkin matrix `[[sqrt(beta) A^T, -M], [-M, -sqrt(beta) A]]`.
//! The system operator acting on coefficient vectors is that matrix
//! premultiplied by `D^{-1}`, `D = h_k^2 I` being the matrix of the
//! mesh-dependent inner product.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::PairField;
use crate::mesh::{EdgeInfo, Point};
use crate::quadrature;
use crate::space::DgSpace;
use crate::sparse::CsrMatrix;

type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Advection velocity `zeta`, reaction `gamma` and `div zeta`.
#[derive(Clone)]
pub struct Coefficients {
    zeta: VectorFn,
    gamma: ScalarFn,
    div_zeta: ScalarFn,
    constant: Option<([f64; 2], f64)>,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some((zeta, gamma)) => write!(f, "Coefficients {{ zeta: {zeta:?}, gamma: {gamma} }}"),
            None => f.write_str("Coefficients { <variable> }"),
        }
    }
}

impl Coefficients {
    pub fn constant(zeta: [f64; 2], gamma: f64) -> Self {
        Coefficients {
            zeta: Arc::new(move |_| zeta),
            gamma: Arc::new(move |_| gamma),
            div_zeta: Arc::new(|_| 0.0),
            constant: Some((zeta, gamma)),
        }
    }

    /// Variable coefficients; `div_zeta` must be the divergence of `zeta`.
    pub fn variable(
        zeta: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        gamma: impl Fn(Point) -> f64 + Send + Sync + 'static,
        div_zeta: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Coefficients {
            zeta: Arc::new(zeta),
            gamma: Arc::new(gamma),
            div_zeta: Arc::new(div_zeta),
            constant: None,
        }
    }

    /// `zeta = [1, 0]`, `gamma = 0`.
    pub fn horizontal_wind() -> Self {
        Self::constant([1.0, 0.0], 0.0)
    }

    pub fn zeta(&self, x: Point) -> [f64; 2] {
        (self.zeta)(x)
    }

    pub fn gamma(&self, x: Point) -> f64 {
        (self.gamma)(x)
    }

    pub fn div_zeta(&self, x: Point) -> f64 {
        (self.div_zeta)(x)
    }

    pub fn as_constant(&self) -> Option<([f64; 2], f64)> {
        self.constant
    }

    /// Smallest sampled value of `gamma - div(zeta)/2` over the element
    /// quadrature points.
    pub fn min_reaction_margin(&self, space: &DgSpace) -> f64 {
        let mesh = space.mesh();
        let mut min = f64::INFINITY;
        for t in 0..mesh.num_triangles() {
            for (x, _) in quadrature::triangle_points(mesh.triangle_points(t), mesh.triangle_area(t)) {
                min = min.min(self.gamma(x) - 0.5 * self.div_zeta(x));
            }
        }
        min
    }
}

/// Dofs touching an edge with their per-point trace coefficients.
struct EdgeTrace {
    dofs: Vec<usize>,
    /// `[phi_a]` at each quadrature point
    jump: Vec<[f64; 3]>,
    /// `{phi_a}` at each quadrature point
    avg: Vec<[f64; 3]>,
    /// `{n . grad phi_a}` (constant along the edge)
    flux: Vec<f64>,
    points: [(Point, f64); 3],
}

impl EdgeTrace {
    fn new(space: &DgSpace, e: usize) -> Self {
        let mesh = space.mesh();
        let edge: &EdgeInfo = &mesh.edges[e];
        let [a, b] = mesh.edge_points(e);
        let points = quadrature::edge_points(a, b, edge.length);
        let n = edge.normal;
        let sides: Vec<(usize, f64)> = match edge.minus {
            Some(m) => vec![(edge.plus, 1.0), (m, -1.0)],
            None => vec![(edge.plus, 1.0)],
        };
        let avg_weight = if edge.minus.is_some() { 0.5 } else { 1.0 };

        let mut trace = EdgeTrace {
            dofs: Vec::with_capacity(6),
            jump: Vec::with_capacity(6),
            avg: Vec::with_capacity(6),
            flux: Vec::with_capacity(6),
            points,
        };
        for &(t, sign) in &sides {
            let geom = space.element(t);
            let phis = points.map(|(x, _)| geom.basis(x));
            for local in 0..3 {
                trace.dofs.push(space.dof(t, local));
                trace.jump.push([0, 1, 2].map(|q| sign * phis[q][local]));
                trace.avg.push([0, 1, 2].map(|q| avg_weight * phis[q][local]));
                let g = geom.grads[local];
                trace.flux.push(avg_weight * (n[0] * g[0] + n[1] * g[1]));
            }
        }
        trace
    }
}

/// Symmetric interior penalty form over all edges (boundary edges impose
/// homogeneous Dirichlet data weakly).
pub fn assemble_sip(space: &DgSpace, sigma: f64) -> CsrMatrix {
    let mesh = space.mesh();
    let n = space.dof_count();
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles() + 36 * mesh.edges.len());

    for t in 0..mesh.num_triangles() {
        let geom = space.element(t);
        for i in 0..3 {
            for j in 0..3 {
                let gi = geom.grads[i];
                let gj = geom.grads[j];
                triplets.push((
                    space.dof(t, i),
                    space.dof(t, j),
                    geom.area * (gi[0] * gj[0] + gi[1] * gj[1]),
                ));
            }
        }
    }

    for (e, edge) in mesh.edges.iter().enumerate() {
        let tr = EdgeTrace::new(space, e);
        let penalty = sigma / edge.length;
        for i in 0..tr.dofs.len() {
            for j in 0..tr.dofs.len() {
                let mut v = 0.0;
                for (q, &(_, w)) in tr.points.iter().enumerate() {
                    let (ji, jj) = (tr.jump[i][q], tr.jump[j][q]);
                    v += w * (-tr.flux[j] * ji - tr.flux[i] * jj + penalty * jj * ji);
                }
                triplets.push((tr.dofs[i], tr.dofs[j], v));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// Centered-flux advection-reaction form. The face term runs over interior
/// and inflow edges, so the mesh must already be classified for `coeffs`.
pub fn assemble_ar(space: &DgSpace, coeffs: &Coefficients) -> CsrMatrix {
    let mesh = space.mesh();
    let n = space.dof_count();
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles() + 36 * mesh.edges.len());

    for t in 0..mesh.num_triangles() {
        let geom = space.element(t);
        let mut local = [[0.0; 3]; 3];
        for (x, w) in quadrature::triangle_points(mesh.triangle_points(t), geom.area) {
            let zeta = coeffs.zeta(x);
            let gamma = coeffs.gamma(x);
            let phi = geom.basis(x);
            for j in 0..3 {
                let trial = zeta[0] * geom.grads[j][0] + zeta[1] * geom.grads[j][1] + gamma * phi[j];
                for i in 0..3 {
                    local[i][j] += w * trial * phi[i];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((space.dof(t, i), space.dof(t, j), local[i][j]));
            }
        }
    }

    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.carries_advective_flux() {
            continue;
        }
        let tr = EdgeTrace::new(space, e);
        let nz: Vec<f64> = tr
            .points
            .iter()
            .map(|&(x, _)| {
                let z = coeffs.zeta(x);
                edge.normal[0] * z[0] + edge.normal[1] * z[1]
            })
            .collect();
        for i in 0..tr.dofs.len() {
            for j in 0..tr.dofs.len() {
                let mut v = 0.0;
                for (q, &(_, w)) in tr.points.iter().enumerate() {
                    v -= w * nz[q] * tr.jump[j][q] * tr.avg[i][q];
                }
                triplets.push((tr.dofs[i], tr.dofs[j], v));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// `L2` mass matrix.
pub fn assemble_mass(space: &DgSpace) -> CsrMatrix {
    let mesh = space.mesh();
    let n = space.dof_count();
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let geom = space.element(t);
        let mut local = [[0.0; 3]; 3];
        for (x, w) in quadrature::triangle_points(mesh.triangle_points(t), geom.area) {
            let phi = geom.basis(x);
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] += w * phi[j] * phi[i];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((space.dof(t, i), space.dof(t, j), local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// `b_i = int_Omega f phi_i`
pub fn load_vector(space: &DgSpace, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let mesh = space.mesh();
    let mut b = vec![0.0; space.dof_count()];
    for t in 0..mesh.num_triangles() {
        let geom = space.element(t);
        for (x, w) in quadrature::triangle_points(mesh.triangle_points(t), geom.area) {
            let fx = f(x);
            let phi = geom.basis(x);
            for i in 0..3 {
                b[space.dof(t, i)] += w * fx * phi[i];
            }
        }
    }
    b
}

/// Assembled matrices of one level plus the problem parameters.
#[derive(Debug, Clone)]
pub struct LevelOperators {
    pub a_sip: CsrMatrix,
    pub a_ar: CsrMatrix,
    /// `A_sip + A_ar`
    pub a: CsrMatrix,
    /// `A^T`, stored so both saddle directions are row-oriented products.
    pub a_t: CsrMatrix,
    pub mass: CsrMatrix,
    /// Diagonal of `D`, i.e. `h_k^2`.
    pub weight: f64,
    pub beta: f64,
    pub sigma: f64,
    pub coefficients: Coefficients,
}

impl LevelOperators {
    pub fn assemble(space: &DgSpace, beta: f64, sigma: f64, coefficients: Coefficients) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        let a_sip = assemble_sip(space, sigma);
        let a_ar = assemble_ar(space, &coefficients);
        let a = CsrMatrix::lin_comb(1.0, &a_sip, 1.0, &a_ar);
        let a_t = a.transpose();
        let mass = assemble_mass(space);
        Ok(LevelOperators {
            a_sip,
            a_ar,
            a,
            a_t,
            mass,
            weight: space.inner_product_weight(),
            beta,
            sigma,
            coefficients,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.mass.nrows()
    }

    pub fn saddle(&self) -> SaddleOperator<'_> {
        SaddleOperator { ops: self }
    }

    /// `[x, w]_k`
    pub fn pair_inner(&self, x: &PairField, w: &PairField) -> f64 {
        self.weight * x.dot(w)
    }

    /// `a_h(u, v)` with `u` the trial and `v` the test function.
    pub fn a_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.a.bilinear(v, u)
    }

    /// `(u, v)_{L2}`
    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.bilinear(u, v)
    }
}

/// The system operator `B_k` and its transpose with respect to `[.,.]_k`.
#[derive(Debug, Clone, Copy)]
pub struct SaddleOperator<'a> {
    pub ops: &'a LevelOperators,
}

impl SaddleOperator<'_> {
    fn apply_blocks(&self, x: &PairField, upper: &CsrMatrix, lower: &CsrMatrix, scale: f64) -> PairField {
        let n = self.ops.dof_count();
        let sb = self.ops.beta.sqrt() * scale;
        let mut out = PairField::zeros(n);
        // upper row: sqrt(beta) upper p - M y
        self.ops.mass.mul_vec(&x.y, &mut out.p);
        out.p.iter_mut().for_each(|v| *v *= -scale);
        upper.mul_vec_add(sb, &x.p, &mut out.p);
        // lower row: -M p - sqrt(beta) lower y
        self.ops.mass.mul_vec(&x.p, &mut out.y);
        out.y.iter_mut().for_each(|v| *v *= -scale);
        lower.mul_vec_add(-sb, &x.y, &mut out.y);
        out
    }

    /// Block Galerkin matrix times `x` (no `D^{-1}`).
    pub fn galerkin_apply(&self, x: &PairField) -> PairField {
        self.apply_blocks(x, &self.ops.a_t, &self.ops.a, 1.0)
    }

    /// Transposed block Galerkin matrix times `x`.
    pub fn galerkin_apply_transpose(&self, x: &PairField) -> PairField {
        self.apply_blocks(x, &self.ops.a, &self.ops.a_t, 1.0)
    }

    /// `B_k x`
    pub fn apply(&self, x: &PairField) -> PairField {
        self.apply_blocks(x, &self.ops.a_t, &self.ops.a, 1.0 / self.ops.weight)
    }

    /// `B_k^t x`
    pub fn apply_transpose(&self, x: &PairField) -> PairField {
        self.apply_blocks(x, &self.ops.a, &self.ops.a_t, 1.0 / self.ops.weight)
    }

    /// `B_h(x, w)` with `x` the trial and `w` the test pair.
    pub fn form(&self, x: &PairField, w: &PairField) -> f64 {
        self.galerkin_apply(x).dot(w)
    }

    /// Triplets of the block Galerkin matrix (or its transpose) on the
    /// stacked `[p; y]` unknown.
    pub fn galerkin_triplets(&self, transpose: bool) -> Vec<(usize, usize, f64)> {
        let n = self.ops.dof_count();
        let sb = self.ops.beta.sqrt();
        let (upper, lower) = if transpose {
            (&self.ops.a, &self.ops.a_t)
        } else {
            (&self.ops.a_t, &self.ops.a)
        };
        let mut t = Vec::with_capacity(2 * upper.nnz() + 2 * self.ops.mass.nnz());
        t.extend(upper.triplets().map(|(i, j, v)| (i, j, sb * v)));
        t.extend(lower.triplets().map(|(i, j, v)| (n + i, n + j, -sb * v)));
        for (i, j, v) in self.ops.mass.triplets() {
            t.push((i, n + j, -v));
            t.push((n + i, j, -v));
        }
        t
    }
}

/// Representation `(f, 0)` of the functional `q -> -beta^{1/4} (y_d, q)`
/// in the mesh-dependent inner product.
pub fn load_functional(space: &DgSpace, y_d: impl Fn(Point) -> f64, beta: f64) -> Result<PairField> {
    if !(beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let scale = -beta.powf(0.25);
    general_rhs(space, |x| scale * y_d(x), |_| 0.0)
}

/// Representation of `(q, z) -> (f, q) + (g, z)`.
pub fn general_rhs(
    space: &DgSpace,
    f_fun: impl Fn(Point) -> f64,
    g_fun: impl Fn(Point) -> f64,
) -> Result<PairField> {
    let inv = 1.0 / space.inner_product_weight();
    let mut p = load_vector(space, f_fun);
    let mut y = load_vector(space, g_fun);
    p.iter_mut().chain(y.iter_mut()).for_each(|v| *v *= inv);
    PairField::new(p, y)
}
