//! Piecewise-linear discontinuous space over a triangulation, with the
//! mesh-dependent inner product and the broken norms used by the theory.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::dot;
use crate::mesh::{Mesh, Point};
use crate::quadrature;

/// Affine data of one triangle: `phi_i(x) = c_i + g_i . x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ElementGeometry {
    pub area: f64,
    pub constants: [f64; 3],
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    fn new(p: [Point; 3]) -> Self {
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let mut constants = [0.0; 3];
        let mut grads = [[0.0; 2]; 3];
        for i in 0..3 {
            let b = p[(i + 1) % 3];
            let c = p[(i + 2) % 3];
            // lambda_i is twice the signed area of (x, b, c) over twice the area.
            grads[i] = [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)];
            constants[i] = (b[0] * c[1] - c[0] * b[1]) / (2.0 * area);
        }
        ElementGeometry {
            area,
            constants,
            grads,
        }
    }

    #[inline]
    pub fn basis(&self, x: Point) -> [f64; 3] {
        [0, 1, 2].map(|i| self.constants[i] + self.grads[i][0] * x[0] + self.grads[i][1] * x[1])
    }
}

/// Fully discontinuous P1 space. Degree of freedom `3 t + i` is the value
/// at local vertex `i` of triangle `t`.
#[derive(Debug, Clone)]
pub struct DgSpace {
    mesh: Arc<Mesh>,
    geometry: Vec<ElementGeometry>,
}

impl DgSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let geometry = (0..mesh.num_triangles())
            .map(|t| ElementGeometry::new(mesh.triangle_points(t)))
            .collect();
        DgSpace { mesh, geometry }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        3 * self.mesh.num_triangles()
    }

    #[inline]
    pub fn dof(&self, triangle: usize, local: usize) -> usize {
        3 * triangle + local
    }

    pub fn node_coords(&self, dof: usize) -> Point {
        self.mesh.vertices[self.mesh.triangles[dof / 3][dof % 3]]
    }

    /// `h_k`, the largest element diameter.
    pub fn h(&self) -> f64 {
        self.mesh.h_max
    }

    pub(crate) fn element(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dof_count() {
            return Err(Error::DimensionMismatch {
                expected: self.dof_count(),
                actual: u.len(),
            });
        }
        Ok(())
    }

    /// Value of the restriction of `u` to triangle `t` at `x`.
    #[inline]
    pub fn eval_local(&self, u: &[f64], t: usize, x: Point) -> f64 {
        let phi = self.geometry[t].basis(x);
        phi[0] * u[3 * t] + phi[1] * u[3 * t + 1] + phi[2] * u[3 * t + 2]
    }

    #[inline]
    pub fn grad_local(&self, u: &[f64], t: usize) -> [f64; 2] {
        let g = &self.geometry[t].grads;
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += g[i][0] * u[3 * t + i];
            out[1] += g[i][1] * u[3 * t + i];
        }
        out
    }

    /// Point evaluation; `None` outside the mesh. On inter-element
    /// boundaries the lowest-index containing triangle is used.
    pub fn eval(&self, u: &[f64], x: Point) -> Option<f64> {
        self.mesh.locate(x).map(|t| self.eval_local(u, t, x))
    }

    /// `(u, v)_k = h_k^2 sum_i u_i v_i` over all element-local nodes.
    pub fn mesh_inner_product(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        Ok(self.h() * self.h() * dot(u, v))
    }

    /// `h_k^2`, the diagonal of the mesh-dependent inner product.
    pub fn inner_product_weight(&self) -> f64 {
        self.h() * self.h()
    }

    /// Nodal interpolation.
    pub fn project_analytic(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.dof_count()).map(|d| f(self.node_coords(d))).collect()
    }

    /// `int_Omega f` by the element rule.
    pub fn integrate(&self, f: impl Fn(usize, Point) -> f64) -> f64 {
        let mut total = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let pts = quadrature::triangle_points(self.mesh.triangle_points(t), self.geometry[t].area);
            total += pts.iter().map(|&(x, w)| w * f(t, x)).sum::<f64>();
        }
        total
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.integrate(|t, x| self.eval_local(u, t, x).powi(2)).sqrt()
    }

    /// `||exact - u||_{L2}`
    pub fn l2_error(&self, u: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
        self.integrate(|t, x| (exact(x) - self.eval_local(u, t, x)).powi(2))
            .sqrt()
    }

    /// Squared broken `1,h` norm of an elementwise-smooth function given by
    /// its per-element value and gradient: volume gradients, `h_e^{-1}`
    /// weighted jumps and `h_e` weighted normal-flux averages over all edges.
    /// Boundary jumps and averages are the single trace.
    pub fn norm_1h_sq_with(
        &self,
        value: impl Fn(usize, Point) -> f64,
        grad: impl Fn(usize, Point) -> [f64; 2],
    ) -> f64 {
        let mesh = &*self.mesh;
        let mut volume = 0.0;
        for t in 0..mesh.num_triangles() {
            for (x, w) in quadrature::triangle_points(mesh.triangle_points(t), self.geometry[t].area) {
                let g = grad(t, x);
                volume += w * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        let mut jumps = 0.0;
        let mut fluxes = 0.0;
        for (e, edge) in mesh.edges.iter().enumerate() {
            let [a, b] = mesh.edge_points(e);
            let n = edge.normal;
            let mut jump_sq = 0.0;
            let mut flux_sq = 0.0;
            for (x, w) in quadrature::edge_points(a, b, edge.length) {
                let gp = grad(edge.plus, x);
                let (jump, flux) = match edge.minus {
                    Some(m) => {
                        let gm = grad(m, x);
                        (
                            value(edge.plus, x) - value(m, x),
                            0.5 * (n[0] * (gp[0] + gm[0]) + n[1] * (gp[1] + gm[1])),
                        )
                    }
                    None => (value(edge.plus, x), n[0] * gp[0] + n[1] * gp[1]),
                };
                jump_sq += w * jump * jump;
                flux_sq += w * flux * flux;
            }
            jumps += jump_sq / edge.length;
            fluxes += edge.length * flux_sq;
        }
        volume + jumps + fluxes
    }

    /// `||u||_{1,h}`
    pub fn norm_1h(&self, u: &[f64]) -> f64 {
        self.norm_1h_sq_with(|t, x| self.eval_local(u, t, x), |t, _| self.grad_local(u, t))
            .sqrt()
    }

    /// `||exact - u||_{1,h}` for a smooth `exact` with gradient `exact_grad`.
    pub fn norm_1h_error(
        &self,
        u: &[f64],
        exact: impl Fn(Point) -> f64,
        exact_grad: impl Fn(Point) -> [f64; 2],
    ) -> f64 {
        self.norm_1h_sq_with(
            |t, x| exact(x) - self.eval_local(u, t, x),
            |t, x| {
                let g = exact_grad(x);
                let gu = self.grad_local(u, t);
                [g[0] - gu[0], g[1] - gu[1]]
            },
        )
        .sqrt()
    }

    /// `sqrt(beta^{1/2} ||u||_{1,h}^2 + ||u||_{L2}^2)`
    pub fn norm_h1beta(&self, u: &[f64], beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        self.check_len(u)?;
        Ok((beta.sqrt() * self.norm_1h(u).powi(2) + self.l2_norm(u).powi(2)).sqrt())
    }
}
