//! Fixed quadrature rules: a 6-point degree-4 rule on triangles and 3-point
//! Gauss-Legendre on edges.

use crate::mesh::Point;

/// Barycentric coordinates and weights (summing to one) of the symmetric
/// degree-4 triangle rule.
pub const TRIANGLE_RULE: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886_32;
    const B1: f64 = 0.108_103_018_168_070_227_36;
    const W1: f64 = 0.223_381_589_678_011_465_70;
    const A2: f64 = 0.091_576_213_509_770_743_46;
    const B2: f64 = 0.816_847_572_980_458_513_08;
    const W2: f64 = 0.109_951_743_655_321_867_64;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Gauss points on `[0, 1]` with weights summing to one.
pub const EDGE_RULE: [(f64, f64); 3] = {
    // sqrt(3/5) / 2
    const D: f64 = 0.387_298_334_620_741_688_52;
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};

/// Physical points and absolute weights of the triangle rule.
pub fn triangle_points(vertices: [Point; 3], area: f64) -> [(Point, f64); 6] {
    TRIANGLE_RULE.map(|(l, w)| {
        let x = [
            l[0] * vertices[0][0] + l[1] * vertices[1][0] + l[2] * vertices[2][0],
            l[0] * vertices[0][1] + l[1] * vertices[1][1] + l[2] * vertices[2][1],
        ];
        (x, w * area)
    })
}

/// Physical points and absolute weights of the edge rule.
pub fn edge_points(a: Point, b: Point, length: f64) -> [(Point, f64); 3] {
    EDGE_RULE.map(|(s, w)| {
        (
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
            w * length,
        )
    })
}
