//! Conforming triangulations of the unit square and the L-shaped domain,
//! uniform red refinement and edge topology.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `(0,1)^2`
    UnitSquare,
    /// `(0,1)^2 \ (0.5,1)^2`
    LShaped,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShaped => 0.75,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::UnitSquare => "unit_square",
            Domain::LShaped => "l_shaped",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unit_square" | "square" | "unitsquare" | "unit-square" => Ok(Domain::UnitSquare),
            "l_shaped" | "lshaped" | "l-shaped" | "lshape" | "l" => Ok(Domain::LShaped),
            other => Err(Error::Config(format!("unknown domain `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    BoundaryInflow,
    BoundaryOutflow,
}

impl EdgeKind {
    fn tag(self) -> &'static str {
        match self {
            EdgeKind::Interior => "interior",
            EdgeKind::BoundaryInflow => "inflow",
            EdgeKind::BoundaryOutflow => "outflow",
        }
    }
}

/// One edge of the triangulation.
///
/// For interior edges `normal` points out of `plus` and into `minus`, where
/// `plus` is the incident triangle with the smaller index. For boundary
/// edges `minus` is `None` and `normal` is the outward normal of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeInfo {
    pub endpoints: [usize; 2],
    pub length: f64,
    pub normal: [f64; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    pub kind: EdgeKind,
}

impl EdgeInfo {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    /// Advective flux term is applied on interior and inflow edges only.
    pub fn carries_advective_flux(&self) -> bool {
        !matches!(self.kind, EdgeKind::BoundaryOutflow)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted lexicographically by endpoint pair.
    pub edges: Vec<EdgeInfo>,
    pub level: usize,
    pub h_max: f64,
    /// Child triangle -> parent triangle; empty on the initial mesh.
    pub parent_map: Vec<usize>,
}

fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn build_edges(vertices: &[Point], triangles: &[[usize; 3]]) -> Result<Vec<EdgeInfo>> {
    let mut incidence: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            incidence
                .entry(edge_key(tri[i], tri[(i + 1) % 3]))
                .or_default()
                .push(t);
        }
    }

    let mut edges = Vec::with_capacity(incidence.len());
    for (key, tris) in incidence {
        let (plus, minus) = match tris.as_slice() {
            [t] => (*t, None),
            [t0, t1] => (*t0.min(t1), Some(*t0.max(t1))),
            _ => {
                return Err(Error::Config(format!(
                    "edge {key:?} is shared by {} triangles",
                    tris.len()
                )))
            }
        };
        let a = vertices[key[0]];
        let b = vertices[key[1]];
        let length = dist(a, b);
        let mut normal = [(b[1] - a[1]) / length, -(b[0] - a[0]) / length];
        let opposite = triangles[plus]
            .iter()
            .copied()
            .find(|&v| v != key[0] && v != key[1])
            .expect("triangle has a vertex off each of its edges");
        let c = vertices[opposite];
        if normal[0] * (c[0] - a[0]) + normal[1] * (c[1] - a[1]) > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let kind = if minus.is_some() {
            EdgeKind::Interior
        } else {
            EdgeKind::BoundaryOutflow
        };
        edges.push(EdgeInfo {
            endpoints: key,
            length,
            normal,
            plus,
            minus,
            kind,
        });
    }
    Ok(edges)
}

fn max_diameter(vertices: &[Point], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| vertices[i]);
            dist(a, b).max(dist(b, c)).max(dist(c, a))
        })
        .fold(0.0, f64::max)
}

impl Mesh {
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| vertices[i]);
            if signed_area(a, b, c) <= 0.0 {
                return Err(Error::Config(format!("triangle {t} is not counterclockwise")));
            }
        }
        let edges = build_edges(&vertices, &triangles)?;
        let h_max = max_diameter(&vertices, &triangles);
        Ok(Mesh {
            vertices,
            triangles,
            edges,
            level: 0,
            h_max,
            parent_map: Vec::new(),
        })
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_points(&self, e: usize) -> [Point; 2] {
        self.edges[e].endpoints.map(|i| self.vertices[i])
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edge_points(e);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn interior_edge_count(&self) -> usize {
        self.edges.len() - self.boundary_edge_count()
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = signed_area(a, b, c);
        [
            signed_area(x, b, c) / area,
            signed_area(a, x, c) / area,
            signed_area(a, b, x) / area,
        ]
    }

    /// First triangle containing `x` (closed triangles, small tolerance).
    pub fn locate(&self, x: Point) -> Option<usize> {
        (0..self.num_triangles()).find(|&t| self.barycentric(t, x).iter().all(|&l| l >= -1e-12))
    }

    /// Label boundary edges as inflow when `zeta(midpoint) . n < 0`.
    pub fn classify_edges(&mut self, zeta: impl Fn(Point) -> [f64; 2]) {
        for e in 0..self.edges.len() {
            if !self.edges[e].is_boundary() {
                continue;
            }
            let v = zeta(self.edge_midpoint(e));
            let n = self.edges[e].normal;
            self.edges[e].kind = if v[0] * n[0] + v[1] * n[1] < 0.0 {
                EdgeKind::BoundaryInflow
            } else {
                EdgeKind::BoundaryOutflow
            };
        }
    }

    /// Red refinement: every triangle is split into four congruent children
    /// through its edge midpoints. Boundary classification is inherited from
    /// the parent edge.
    pub fn refine_uniform(&self) -> Mesh {
        let n_old = self.vertices.len();
        let mut vertices = self.vertices.clone();
        let mut midpoint_of: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut parent_edge_of_midpoint = Vec::with_capacity(self.edges.len());
        for (e, edge) in self.edges.iter().enumerate() {
            midpoint_of.insert(edge.endpoints, vertices.len());
            vertices.push(self.edge_midpoint(e));
            parent_edge_of_midpoint.push(e);
        }

        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut parent_map = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let mab = midpoint_of[&edge_key(a, b)];
            let mbc = midpoint_of[&edge_key(b, c)];
            let mca = midpoint_of[&edge_key(c, a)];
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
            parent_map.extend([t; 4]);
        }

        let mut edges = build_edges(&vertices, &triangles).expect("red refinement stays conforming");
        for edge in edges.iter_mut().filter(|e| e.is_boundary()) {
            let mid = edge
                .endpoints
                .iter()
                .copied()
                .find(|&v| v >= n_old)
                .expect("boundary child edge touches a parent midpoint");
            edge.kind = self.edges[parent_edge_of_midpoint[mid - n_old]].kind;
        }

        let h_max = max_diameter(&vertices, &triangles);
        Mesh {
            vertices,
            triangles,
            edges,
            level: self.level + 1,
            h_max,
            parent_map,
        }
    }

    /// Plain-text dump: a `nv nt ne` header, vertex coordinates, triangle
    /// triples and one record per edge (`a b plus minus kind nx ny`, with
    /// `minus = -1` on the boundary).
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.edges.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for e in &self.edges {
            let minus = e.minus.map_or(-1, |m| m as i64);
            writeln!(
                w,
                "{} {} {} {} {} {:.17e} {:.17e}",
                e.endpoints[0],
                e.endpoints[1],
                e.plus,
                minus,
                e.kind.tag(),
                e.normal[0],
                e.normal[1]
            )?;
        }
        Ok(())
    }
}

/// Initial triangulation `T_0`.
///
/// The unit square is split by the diagonal from `(0,1)` to `(1,0)`. The
/// L-shape is made of three half-unit squares, each split along its NW-SE
/// diagonal.
pub fn build_initial_mesh(domain: Domain) -> Mesh {
    let (vertices, triangles): (Vec<Point>, Vec<[usize; 3]>) = match domain {
        Domain::UnitSquare => (
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 3], [1, 2, 3]],
        ),
        Domain::LShaped => (
            vec![
                [0.0, 0.0],
                [0.5, 0.0],
                [1.0, 0.0],
                [0.0, 0.5],
                [0.5, 0.5],
                [1.0, 0.5],
                [0.0, 1.0],
                [0.5, 1.0],
            ],
            vec![
                // bottom-left square
                [0, 1, 3],
                [1, 4, 3],
                // bottom-right square
                [1, 2, 4],
                [2, 5, 4],
                // top-left square
                [3, 4, 6],
                [4, 7, 6],
            ],
        ),
    };
    Mesh::from_parts(vertices, triangles).expect("initial meshes are valid")
}

pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    mesh.refine_uniform()
}

pub fn classify_edges(mesh: &Mesh, zeta: impl Fn(Point) -> [f64; 2]) -> Mesh {
    let mut out = mesh.clone();
    out.classify_edges(zeta);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refined(domain: Domain, levels: usize) -> Mesh {
        let mut m = build_initial_mesh(domain);
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        m
    }

    #[test]
    fn initial_mesh_counts() {
        let sq = build_initial_mesh(Domain::UnitSquare);
        assert_eq!(sq.num_triangles(), 2);
        assert_eq!(sq.num_vertices(), 4);
        assert_eq!(sq.boundary_edge_count(), 4);
        assert_eq!(sq.interior_edge_count(), 1);
        assert_eq!(sq.h_max, 2f64.sqrt());

        let l = build_initial_mesh(Domain::LShaped);
        assert_eq!(l.num_triangles(), 6);
        assert_eq!(l.num_vertices(), 8);
        assert_eq!(l.boundary_edge_count(), 8);
        assert_eq!(l.interior_edge_count(), 5);
    }

    #[test]
    fn refinement_counts_and_h() {
        for domain in [Domain::UnitSquare, Domain::LShaped] {
            let mut m = build_initial_mesh(domain);
            for k in 1..=4 {
                let fine = m.refine_uniform();
                assert_eq!(fine.num_triangles(), 4 * m.num_triangles());
                assert_eq!(fine.h_max, m.h_max / 2.0);
                assert_eq!(fine.level, k);
                assert_eq!(fine.parent_map.len(), fine.num_triangles());
                m = fine;
            }
        }
        assert_eq!(refined(Domain::UnitSquare, 1).num_triangles(), 8);
        assert_eq!(refined(Domain::LShaped, 1).num_triangles(), 24);
    }

    #[test]
    fn areas_orientation_and_incidence() {
        for domain in [Domain::UnitSquare, Domain::LShaped] {
            for k in 0..=4 {
                let m = refined(domain, k);
                assert!((m.total_area() - domain.area()).abs() < 1e-12);
                assert!((0..m.num_triangles()).all(|t| m.triangle_area(t) > 0.0));
                let mut count = vec![0usize; m.edges.len()];
                let index: BTreeMap<[usize; 2], usize> = m
                    .edges
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (e.endpoints, i))
                    .collect();
                for tri in &m.triangles {
                    for i in 0..3 {
                        count[index[&edge_key(tri[i], tri[(i + 1) % 3])]] += 1;
                    }
                }
                for (e, c) in m.edges.iter().zip(count) {
                    assert_eq!(c, if e.is_boundary() { 1 } else { 2 });
                }
            }
        }
    }

    #[test]
    fn normals_are_unit_and_oriented() {
        let m = refined(Domain::LShaped, 3);
        for e in &m.edges {
            let n = e.normal;
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-14);
            let [a, _] = e.endpoints.map(|i| m.vertices[i]);
            let centroid = |t: usize| {
                let p = m.triangle_points(t);
                [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
            };
            let cp = centroid(e.plus);
            // Normal points away from the plus centroid.
            assert!(n[0] * (cp[0] - a[0]) + n[1] * (cp[1] - a[1]) < 0.0);
            if let Some(minus) = e.minus {
                assert!(e.plus < minus);
                let cm = centroid(minus);
                assert!(n[0] * (cm[0] - a[0]) + n[1] * (cm[1] - a[1]) > 0.0);
            }
        }
    }

    #[test]
    fn edges_sorted_lexicographically() {
        let m = refined(Domain::UnitSquare, 2);
        assert!(m.edges.windows(2).all(|w| w[0].endpoints < w[1].endpoints));
    }

    #[test]
    fn inflow_classification_for_horizontal_wind() {
        let m = classify_edges(&build_initial_mesh(Domain::UnitSquare), |_| [1.0, 0.0]);
        for (e, edge) in m.edges.iter().enumerate() {
            let mid = m.edge_midpoint(e);
            let expected = if !edge.is_boundary() {
                EdgeKind::Interior
            } else if mid[0] == 0.0 {
                EdgeKind::BoundaryInflow
            } else {
                // right edge (zeta.n = 1) and top/bottom (zeta.n = 0)
                EdgeKind::BoundaryOutflow
            };
            assert_eq!(edge.kind, expected, "edge {e} at {mid:?}");
        }
        // inherited through refinement
        let fine = m.refine_uniform().refine_uniform();
        for (e, edge) in fine.edges.iter().enumerate() {
            if edge.is_boundary() {
                let inflow = fine.edge_midpoint(e)[0] == 0.0;
                assert_eq!(edge.kind == EdgeKind::BoundaryInflow, inflow);
            }
        }
    }

    #[test]
    fn children_nested_in_parents() {
        let coarse = refined(Domain::LShaped, 2);
        let fine = coarse.refine_uniform();
        for (c, &p) in fine.parent_map.iter().enumerate() {
            for x in fine.triangle_points(c) {
                assert!(coarse.barycentric(p, x).iter().all(|&l| l >= -1e-14));
            }
        }
    }

    #[test]
    fn domain_parsing() {
        assert_eq!("square".parse::<Domain>().unwrap(), Domain::UnitSquare);
        assert_eq!("l_shaped".parse::<Domain>().unwrap(), Domain::LShaped);
        assert!("triangle".parse::<Domain>().is_err());
    }

    #[test]
    fn dump_header() {
        let m = build_initial_mesh(Domain::UnitSquare);
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("4 2 5"));
        assert_eq!(text.lines().count(), 1 + 4 + 2 + 5);
    }
}
