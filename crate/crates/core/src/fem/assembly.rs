use super::element::{edge_nodes, edge_point, map};
use super::sparse::SparseMatrix;
use crate::geometry::Point;
use crate::mesh::{EdgeLabel, TriMesh};
use crate::quad::{gauss4, triangle7};
use rayon::prelude::*;

/// Global matrices of the P2 discretization.
#[derive(Debug, Clone)]
pub struct Assembled {
    /// ∫ ∇φ_i·∇φ_j
    pub stiffness: SparseMatrix,
    /// ∫ φ_i φ_j
    pub mass: SparseMatrix,
    /// ∫_{Γ0} φ_i φ_j dS
    pub boundary_mass: SparseMatrix,
    /// −2 ∫ φ_i, the right-hand side of the weak form of Δu = 2.
    pub load: Vec<f64>,
}

pub fn element_nodes(mesh: &TriMesh, e: usize) -> [Point; 6] {
    mesh.p2.elements[e].map(|i| mesh.p2.coords[i])
}

/// d ξ / d t along local edge `edge`.
pub fn edge_direction(edge: usize) -> [f64; 2] {
    match edge {
        0 => [1.0, 0.0],
        1 => [-1.0, 1.0],
        _ => [0.0, -1.0],
    }
}

type Local = ([[f64; 6]; 6], [[f64; 6]; 6], [f64; 6]);

fn element_matrices(nodes: &[Point; 6]) -> Local {
    let mut k = [[0.0; 6]; 6];
    let mut m = [[0.0; 6]; 6];
    let mut f = [0.0; 6];
    for (xi, w) in triangle7() {
        let g = map(nodes, xi);
        let wd = w * g.det.abs();
        for a in 0..6 {
            f[a] -= 2.0 * wd * g.n[a];
            for b in 0..6 {
                k[a][b] += wd * (g.grad[a][0] * g.grad[b][0] + g.grad[a][1] * g.grad[b][1]);
                m[a][b] += wd * g.n[a] * g.n[b];
            }
        }
    }
    (k, m, f)
}

fn edge_mass_triplets<P: Fn(EdgeLabel) -> bool>(mesh: &TriMesh, keep: P) -> Vec<(usize, usize, f64)> {
    let mut bt = Vec::new();
    for (i, edge) in mesh.boundary.iter().enumerate() {
        if !keep(edge.label) {
            continue;
        }
        let (e, le) = mesh.p2.boundary_elements[i];
        let nodes = element_nodes(mesh, e);
        let dofs = mesh.p2.elements[e];
        let local = edge_nodes(le);
        let d = edge_direction(le);
        for (t, w) in gauss4() {
            let g = map(&nodes, edge_point(le, t));
            let tx = g.jac[0][0] * d[0] + g.jac[0][1] * d[1];
            let ty = g.jac[1][0] * d[0] + g.jac[1][1] * d[1];
            let ds = w * tx.hypot(ty);
            for &a in &local {
                for &b in &local {
                    bt.push((dofs[a], dofs[b], ds * g.n[a] * g.n[b]));
                }
            }
        }
    }
    bt
}

/// ∫_{Γ1} φ_i φ_j dS over both walls.
pub fn wall_mass(mesh: &TriMesh) -> SparseMatrix {
    SparseMatrix::from_triplets(mesh.p2.len(), edge_mass_triplets(mesh, |l| l != EdgeLabel::Gamma0))
}

pub fn assemble(mesh: &TriMesh) -> Assembled {
    let n = mesh.p2.len();
    let locals: Vec<Local> =
        (0..mesh.p2.elements.len()).into_par_iter().map(|e| element_matrices(&element_nodes(mesh, e))).collect();
    let mut kt = Vec::with_capacity(36 * locals.len());
    let mut mt = Vec::with_capacity(36 * locals.len());
    let mut load = vec![0.0; n];
    for (e, (k, m, f)) in locals.iter().enumerate() {
        let dofs = mesh.p2.elements[e];
        for a in 0..6 {
            load[dofs[a]] += f[a];
            for b in 0..6 {
                kt.push((dofs[a], dofs[b], k[a][b]));
                mt.push((dofs[a], dofs[b], m[a][b]));
            }
        }
    }
    let bt = edge_mass_triplets(mesh, |l| l == EdgeLabel::Gamma0);
    Assembled {
        stiffness: SparseMatrix::from_triplets(n, kt),
        mass: SparseMatrix::from_triplets(n, mt),
        boundary_mass: SparseMatrix::from_triplets(n, bt),
        load,
    }
}
