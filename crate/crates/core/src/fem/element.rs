//! Six-node quadratic triangle on the reference element {ξ, η ≥ 0, ξ + η ≤ 1}.
//!
//! The same basis maps the reference element to physical space, so elements
//! with a Γ0 edge follow the curve through its midpoint node.

use crate::geometry::Point;

pub type Mat2 = [[f64; 2]; 2];

/// Constant second derivatives of the six shape functions.
pub const SHAPE_HESSIAN: [Mat2; 6] = [
    [[4.0, 4.0], [4.0, 4.0]],
    [[4.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [0.0, 4.0]],
    [[-8.0, -4.0], [-4.0, 0.0]],
    [[0.0, 4.0], [4.0, 0.0]],
    [[0.0, -4.0], [-4.0, -8.0]],
];

/// Values and reference gradients of the shape functions at ξ.
pub fn shape(xi: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
    let (l2, l3) = (xi[0], xi[1]);
    let l1 = 1.0 - l2 - l3;
    let n = [
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        l3 * (2.0 * l3 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l3,
        4.0 * l3 * l1,
    ];
    let g = [
        [1.0 - 4.0 * l1, 1.0 - 4.0 * l1],
        [4.0 * l2 - 1.0, 0.0],
        [0.0, 4.0 * l3 - 1.0],
        [4.0 * (l1 - l2), -4.0 * l2],
        [4.0 * l3, 4.0 * l2],
        [-4.0 * l3, 4.0 * (l1 - l3)],
    ];
    (n, g)
}

/// Reference coordinates of the point at parameter t ∈ [0, 1] along local
/// edge i (from vertex i to vertex i+1).
pub fn edge_point(edge: usize, t: f64) -> [f64; 2] {
    match edge {
        0 => [t, 0.0],
        1 => [1.0 - t, t],
        _ => [0.0, 1.0 - t],
    }
}

/// Local node indices on edge i: start vertex, end vertex, midpoint.
pub fn edge_nodes(edge: usize) -> [usize; 3] {
    [edge, (edge + 1) % 3, 3 + edge]
}

#[derive(Debug, Clone, Copy)]
pub struct Mapped {
    pub x: Point,
    /// J[i][j] = ∂x_i/∂ξ_j.
    pub jac: Mat2,
    pub det: f64,
    pub jinv: Mat2,
    pub n: [f64; 6],
    /// Physical gradients of the shape functions.
    pub grad: [[f64; 2]; 6],
    pub ref_grad: [[f64; 2]; 6],
}

pub fn map(nodes: &[Point; 6], xi: [f64; 2]) -> Mapped {
    let (n, g) = shape(xi);
    let mut x = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for a in 0..6 {
        for i in 0..2 {
            x[i] += n[a] * nodes[a][i];
            for j in 0..2 {
                jac[i][j] += nodes[a][i] * g[a][j];
            }
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let jinv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
    let mut grad = [[0.0; 2]; 6];
    for a in 0..6 {
        // ∇ₓN = J⁻ᵀ ∇ξN
        grad[a] = [
            jinv[0][0] * g[a][0] + jinv[1][0] * g[a][1],
            jinv[0][1] * g[a][0] + jinv[1][1] * g[a][1],
        ];
    }
    Mapped { x, jac, det, jinv, n, grad, ref_grad: g }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub x: Point,
    pub u: f64,
    pub grad: [f64; 2],
    pub hess: Mat2,
}

/// Value, gradient and Hessian of the quadratic field with nodal values `c`.
pub fn field(nodes: &[Point; 6], c: &[f64; 6], xi: [f64; 2]) -> FieldValue {
    let m = map(nodes, xi);
    let mut u = 0.0;
    let mut grad = [0.0; 2];
    let mut hxi = [[0.0; 2]; 2];
    let mut hx_geo = [[[0.0; 2]; 2]; 2];
    for a in 0..6 {
        u += c[a] * m.n[a];
        for i in 0..2 {
            grad[i] += c[a] * m.grad[a][i];
            for j in 0..2 {
                hxi[i][j] += c[a] * SHAPE_HESSIAN[a][i][j];
                for k in 0..2 {
                    hx_geo[k][i][j] += nodes[a][k] * SHAPE_HESSIAN[a][i][j];
                }
            }
        }
    }
    // H_x = J⁻ᵀ (H_ξ − Σ_k u_{x_k} ∇²_ξ x_k) J⁻¹
    let mut b = hxi;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                b[i][j] -= grad[k] * hx_geo[k][i][j];
            }
        }
    }
    let ji = m.jinv;
    let mut hess = [[0.0; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += ji[i][p] * b[i][j] * ji[j][q];
                }
            }
            hess[p][q] = s;
        }
    }
    FieldValue { x: m.x, u, grad, hess }
}

/// Reference coordinates of `p` under the element map (Newton, affine start).
pub fn inverse_map(nodes: &[Point; 6], p: Point) -> Option<[f64; 2]> {
    let (a, b, c) = (nodes[0], nodes[1], nodes[2]);
    let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let d = [p[0] - a[0], p[1] - a[1]];
    let mut xi = [(j[1][1] * d[0] - j[0][1] * d[1]) / det, (-j[1][0] * d[0] + j[0][0] * d[1]) / det];
    for _ in 0..30 {
        let m = map(nodes, xi);
        let r = [p[0] - m.x[0], p[1] - m.x[1]];
        let step = [m.jinv[0][0] * r[0] + m.jinv[0][1] * r[1], m.jinv[1][0] * r[0] + m.jinv[1][1] * r[1]];
        xi[0] += step[0];
        xi[1] += step[1];
        if step[0].abs() + step[1].abs() < 1e-15 {
            return Some(xi);
        }
    }
    let m = map(nodes, xi);
    let r = (p[0] - m.x[0]).hypot(p[1] - m.x[1]);
    (r < 1e-12).then_some(xi)
}

pub fn inside_reference(xi: [f64; 2], tol: f64) -> bool {
    xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol
}
