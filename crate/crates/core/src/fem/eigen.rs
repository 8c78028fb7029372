//! Block inverse (subspace) iteration with Rayleigh–Ritz for the
//! generalized symmetric problems B x = θ A x, A positive definite on the
//! iteration space, B positive semidefinite; the largest θ is returned.

use super::assembly::{assemble, wall_mass, Assembled};
use super::cg::pcg_with_kernel;
use super::solution::free_map;
use super::sparse::{dot, SparseMatrix};
use crate::error::{Error, Result};
use crate::geometry::{dot as pdot, Point};
use crate::mesh::TriMesh;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const EIGEN_TOL: f64 = 1e-8;
const INNER_TOL: f64 = 1e-13;
const BLOCK: usize = 4;
const MAX_ITER: usize = 400;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    /// Generalized eigenvalue: μ₂², η₂² or λ₂² depending on the problem.
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// ‖B x − θ A x‖ / (θ ‖A x‖) for the final Ritz pair.
    pub residual: f64,
}

impl EigenResult {
    /// Square root of the eigenvalue (μ₂, η₂ or λ₂).
    pub fn constant(&self) -> f64 {
        self.value.sqrt()
    }
}

struct Ritz {
    theta: f64,
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
}

/// Largest θ of B x = θ A x. With `deflate = Some(w)`, iterates in the
/// complement {x : wᵀx = 0} where `w` is the B-image of the kernel of A,
/// which is the constants.
fn largest(a: &SparseMatrix, b: &SparseMatrix, deflate: Option<&[f64]>) -> Result<Ritz> {
    let n = a.n;
    let ones = deflate.map(|_| vec![1.0; n]);
    let p = BLOCK.min(n);
    let w_norm = deflate.map(|w| w.iter().sum::<f64>());
    let project = |x: &mut [f64]| {
        if let (Some(w), Some(s)) = (deflate, w_norm) {
            let c = dot(w, x) / s;
            x.iter_mut().for_each(|v| *v -= c);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut q: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            project(&mut v);
            v
        })
        .collect();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; p];
    let mut last_residual = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let mut z = Vec::with_capacity(p);
        for (j, qj) in q.iter().enumerate() {
            let rhs = b.mul(qj);
            let out = pcg_with_kernel(a, &rhs, warm[j].as_deref(), INNER_TOL, 10 * n, ones.as_deref())?;
            let mut zj = out.x;
            project(&mut zj);
            z.push(zj);
        }
        let az: Vec<Vec<f64>> = z.iter().map(|v| a.mul(v)).collect();
        let bz: Vec<Vec<f64>> = z.iter().map(|v| b.mul(v)).collect();
        let at = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&z[i], &az[j]) + dot(&z[j], &az[i])));
        let bt = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&z[i], &bz[j]) + dot(&z[j], &bz[i])));
        let chol = at.cholesky().ok_or(Error::Eigen { iterations: it, residual: f64::NAN })?;
        let l = chol.l();
        let linv = l.clone().try_inverse().ok_or(Error::Eigen { iterations: it, residual: f64::NAN })?;
        let c = &linv * &bt * linv.transpose();
        let c = 0.5 * (&c + c.transpose());
        let eig = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let y = linv.transpose() * &eig.eigenvectors;
        let mut next = Vec::with_capacity(p);
        for &k in &order {
            let mut v = vec![0.0; n];
            for (i, zi) in z.iter().enumerate() {
                let coef = y[(i, k)];
                v.iter_mut().zip(zi).for_each(|(vv, zz)| *vv += coef * zz);
            }
            next.push(v);
        }
        let theta = eig.eigenvalues[order[0]];
        let x = &next[0];
        let ax = a.mul(x);
        let bx = b.mul(x);
        let r: f64 = bx.iter().zip(&ax).map(|(b, a)| (b - theta * a).powi(2)).sum::<f64>().sqrt();
        let residual = r / (theta.abs() * dot(&ax, &ax).sqrt());
        warm = next.iter().map(|v| Some(v.iter().map(|x| x * theta).collect())).collect();
        q = next;
        last_residual = residual;
        if residual <= EIGEN_TOL {
            let x = q.swap_remove(0);
            return Ok(Ritz { theta, x, iterations: it, residual });
        }
    }
    Err(Error::Eigen { iterations: MAX_ITER, residual: last_residual })
}

fn expand(map: &[Option<usize>], x: &[f64]) -> Vec<f64> {
    map.iter().map(|m| m.map_or(0.0, |j| x[j])).collect()
}

/// μ₂²: first nonzero eigenvalue of K x = λ M x (Neumann everywhere).
pub fn neumann_poincare(mesh: &TriMesh) -> Result<EigenResult> {
    neumann_poincare_with(&assemble(mesh))
}

pub fn neumann_poincare_with(asm: &Assembled) -> Result<EigenResult> {
    let ones = vec![1.0; asm.mass.n];
    let w = asm.mass.mul(&ones);
    let r = largest(&asm.stiffness, &asm.mass, Some(&w))?;
    Ok(EigenResult { value: 1.0 / r.theta, vector: r.x, iterations: r.iterations, residual: r.residual })
}

/// Smallest eigenvalue of K x = λ M x on scalar fields vanishing on Γ1.
pub fn zero_trace_poincare(mesh: &TriMesh) -> Result<EigenResult> {
    zero_trace_poincare_with(mesh, &assemble(mesh))
}

pub fn zero_trace_poincare_with(mesh: &TriMesh, asm: &Assembled) -> Result<EigenResult> {
    let fixed: Vec<bool> = mesh.p2.wall.iter().map(|&w| w != 0).collect();
    if !fixed.iter().any(|&f| f) {
        return Err(Error::Precondition("zero-trace problem needs a nonempty Γ1".into()));
    }
    let (map, nf) = free_map(&fixed);
    let k = asm.stiffness.restrict(&map, nf);
    let m = asm.mass.restrict(&map, nf);
    let r = largest(&k, &m, None)?;
    Ok(EigenResult { value: 1.0 / r.theta, vector: expand(&map, &r.x), iterations: r.iterations, residual: r.residual })
}

/// Admissible directions at each node: span of the wall normals intersected
/// with the tangent space of every wall through the node.
pub fn admissible_directions(mesh: &TriMesh) -> Vec<Vec<Point>> {
    let cone = mesh.domain.cone;
    let span = cone.span_basis();
    let normals = cone.wall_normals();
    mesh.p2
        .wall
        .iter()
        .map(|&bits| {
            let active: Vec<Point> = (0..2).filter(|b| bits & (1 << b) != 0).map(|b| normals[b]).collect();
            let independent = active.len() == 2 && (active[0][0] * active[1][1] - active[0][1] * active[1][0]).abs() > 1e-8;
            if independent {
                return Vec::new();
            }
            let mut out: Vec<Point> = Vec::new();
            for s in &span {
                let mut v = *s;
                if let Some(nu) = active.first() {
                    let c = pdot(v, *nu);
                    v = [v[0] - c * nu[0], v[1] - c * nu[1]];
                }
                for o in &out {
                    let c = pdot(v, *o);
                    v = [v[0] - c * o[0], v[1] - c * o[1]];
                }
                let len = v[0].hypot(v[1]);
                if len > 1e-8 {
                    out.push([v[0] / len, v[1] / len]);
                }
            }
            out
        })
        .collect()
}

/// η₂²: smallest eigenvalue of the vector Laplacian on fields valued in the
/// span of the wall normals with ⟨v, ν⟩ = 0 on Γ1. The returned vector holds
/// nodal values interleaved as (v_x, v_y).
pub fn vector_poincare(mesh: &TriMesh, k: usize) -> Result<EigenResult> {
    vector_poincare_with(mesh, &assemble(mesh), k)
}

pub fn vector_poincare_with(mesh: &TriMesh, asm: &Assembled, k: usize) -> Result<EigenResult> {
    if k == 0 {
        return Err(Error::Precondition("vector Poincaré constant is undefined for k = 0".into()));
    }
    if mesh.domain.cone.is_full_plane() {
        return Err(Error::Precondition("vector Poincaré constant needs a nonempty Γ1".into()));
    }
    if k != mesh.domain.cone.normal_span_dim() {
        return Err(Error::Precondition(format!(
            "k = {k} does not match the cone (k = {})",
            mesh.domain.cone.normal_span_dim()
        )));
    }
    let dirs = admissible_directions(mesh);
    let mut offset = Vec::with_capacity(dirs.len() + 1);
    let mut total = 0;
    for d in &dirs {
        offset.push(total);
        total += d.len();
    }
    let lift = |m: &SparseMatrix| {
        let mut trip = Vec::new();
        for i in 0..m.n {
            for kk in m.row_ptr[i]..m.row_ptr[i + 1] {
                let j = m.col[kk];
                for (a, da) in dirs[i].iter().enumerate() {
                    for (b, db) in dirs[j].iter().enumerate() {
                        let c = pdot(*da, *db);
                        if c != 0.0 {
                            trip.push((offset[i] + a, offset[j] + b, m.val[kk] * c));
                        }
                    }
                }
            }
        }
        SparseMatrix::from_triplets(total, trip)
    };
    let kv = lift(&asm.stiffness);
    let mv = lift(&asm.mass);
    let r = largest(&kv, &mv, None)?;
    let mut field = vec![0.0; 2 * dirs.len()];
    for (i, d) in dirs.iter().enumerate() {
        for (a, da) in d.iter().enumerate() {
            field[2 * i] += r.x[offset[i] + a] * da[0];
            field[2 * i + 1] += r.x[offset[i] + a] * da[1];
        }
    }
    Ok(EigenResult { value: 1.0 / r.theta, vector: field, iterations: r.iterations, residual: r.residual })
}

/// λ₂²: largest eigenvalue of B0 x = θ (K + M) x.
pub fn trace_constant(mesh: &TriMesh) -> Result<EigenResult> {
    trace_constant_with(&assemble(mesh))
}

pub fn trace_constant_with(asm: &Assembled) -> Result<EigenResult> {
    let a = asm.stiffness.combine(1.0, &asm.mass, 1.0);
    let r = largest(&a, &asm.boundary_mass, None)?;
    Ok(EigenResult { value: r.theta, vector: r.x, iterations: r.iterations, residual: r.residual })
}

/// λ₂(Γ1)²: trace constant of W^{1,2} into L²(Γ1), B_wall x = θ (K + M) x.
pub fn wall_trace_constant(mesh: &TriMesh, asm: &Assembled) -> Result<EigenResult> {
    if mesh.domain.cone.is_full_plane() {
        return Err(Error::Precondition("wall trace constant needs a nonempty Γ1".into()));
    }
    let a = asm.stiffness.combine(1.0, &asm.mass, 1.0);
    let r = largest(&a, &wall_mass(mesh), None)?;
    Ok(EigenResult { value: r.theta, vector: r.x, iterations: r.iterations, residual: r.residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolarDomain, SectorCone};

    fn mesh(cone: SectorCone, r: f64, levels: usize) -> TriMesh {
        let mut m = TriMesh::base(&PolarDomain::sector(cone, r).unwrap()).unwrap();
        for _ in 0..levels {
            m = m.refine();
        }
        m
    }

    #[test]
    fn neumann_scales_inversely_with_length() {
        let a = neumann_poincare(&mesh(SectorCone::quarter(), 1.0, 1)).unwrap();
        let b = neumann_poincare(&mesh(SectorCone::quarter(), 2.0, 1)).unwrap();
        assert!((b.constant() * 2.0 / a.constant() - 1.0).abs() < 1e-8);
        assert!(a.residual <= EIGEN_TOL, "{} {}", a.residual, a.iterations);
    }

    #[test]
    fn neumann_decreases_under_refinement() {
        let a = neumann_poincare(&mesh(SectorCone::quarter(), 1.0, 0)).unwrap();
        let b = neumann_poincare(&mesh(SectorCone::quarter(), 1.0, 1)).unwrap();
        let c = neumann_poincare(&mesh(SectorCone::quarter(), 1.0, 2)).unwrap();
        assert!(a.value >= b.value && b.value >= c.value, "{} {} {}", a.value, b.value, c.value);
        // quarter disk: first nonzero Neumann eigenvalue is j'_{2,1}² ≈ 9.3284
        assert!((c.value / 9.328363 - 1.0).abs() < 1e-3, "{}", c.value);
    }

    #[test]
    fn vector_branch_enforces_the_wall_constraint() {
        let m = mesh(SectorCone::quarter(), 1.0, 1);
        let r = vector_poincare(&m, 2).unwrap();
        assert!(r.value > 0.0);
        let normals = m.domain.cone.wall_normals();
        for (i, &bits) in m.p2.wall.iter().enumerate() {
            for b in 0..2 {
                if bits & (1 << b) != 0 {
                    let v = [r.vector[2 * i], r.vector[2 * i + 1]];
                    assert!(pdot(v, normals[b]).abs() <= 1e-10);
                }
            }
        }
        let finer = vector_poincare(&mesh(SectorCone::quarter(), 1.0, 2), 2).unwrap();
        assert!(finer.value <= r.value);
    }

    #[test]
    fn vector_branch_rejects_bad_k() {
        let m = mesh(SectorCone::quarter(), 1.0, 0);
        assert!(matches!(vector_poincare(&m, 0), Err(Error::Precondition(_))));
        let full = mesh(SectorCone::full(), 1.0, 0);
        assert!(matches!(vector_poincare(&full, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn trace_constant_dominates_random_quotients() {
        let m = mesh(SectorCone::quarter(), 1.0, 1);
        let asm = assemble(&m);
        let r = trace_constant_with(&asm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v: Vec<f64> = (0..m.p2.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let num = asm.boundary_mass.form(&v, &v);
            let den = asm.stiffness.form(&v, &v) + asm.mass.form(&v, &v);
            assert!(num / den <= r.value * (1.0 + 1e-12));
        }
    }
}
