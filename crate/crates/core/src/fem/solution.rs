use super::assembly::{assemble, element_nodes, Assembled};
use super::cg::pcg;
use super::element::{field, inside_reference, inverse_map, FieldValue};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::TriMesh;
use crate::quad::triangle_collapsed;
use std::sync::Arc;

pub const CG_TOL: f64 = 1e-10;

/// Record of the boundary conditions used in a solve.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    /// Nodes with the homogeneous Dirichlet condition (all nodes on Γ̄0).
    pub dirichlet: Vec<bool>,
    pub free_count: usize,
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

/// P2 torsion function on a mesh.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub mesh: Arc<TriMesh>,
    pub coeffs: Vec<f64>,
    pub bc: BoundaryConditions,
}

/// Numbering of the nodes not flagged in `fixed`.
pub fn free_map(fixed: &[bool]) -> (Vec<Option<usize>>, usize) {
    let mut next = 0;
    let map = fixed
        .iter()
        .map(|&f| {
            (!f).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    (map, next)
}

/// Solves Δu = 2, u = 0 on Γ0, u_ν = 0 on Γ1.
pub fn solve_torsion(mesh: Arc<TriMesh>) -> Result<FemSolution> {
    let a = assemble(&mesh);
    solve_torsion_with(mesh, &a)
}

pub fn solve_torsion_with(mesh: Arc<TriMesh>, a: &Assembled) -> Result<FemSolution> {
    let dirichlet = mesh.p2.on_gamma0.clone();
    let (map, nf) = free_map(&dirichlet);
    let k = a.stiffness.restrict(&map, nf);
    let mut rhs = vec![0.0; nf];
    for (i, m) in map.iter().enumerate() {
        if let Some(j) = m {
            rhs[*j] = a.load[i];
        }
    }
    let out = pcg(&k, &rhs, None, CG_TOL, 10 * nf.max(1))?;
    let mut coeffs = vec![0.0; mesh.p2.len()];
    for (i, m) in map.iter().enumerate() {
        if let Some(j) = m {
            coeffs[i] = out.x[*j];
        }
    }
    let bc = BoundaryConditions {
        dirichlet,
        free_count: nf,
        cg_iterations: out.iterations,
        cg_residual: out.relative_residual,
    };
    Ok(FemSolution { mesh, coeffs, bc })
}

impl FemSolution {
    pub fn element_coeffs(&self, e: usize) -> [f64; 6] {
        self.mesh.p2.elements[e].map(|i| self.coeffs[i])
    }

    pub fn eval_in(&self, e: usize, xi: [f64; 2]) -> FieldValue {
        field(&element_nodes(&self.mesh, e), &self.element_coeffs(e), xi)
    }

    /// Element and reference coordinates of `p`, by walking across edges
    /// from `start`; falls back to a full scan near the curved boundary.
    pub fn locate_from(&self, p: Point, start: usize) -> Result<(usize, [f64; 2])> {
        let mesh = &self.mesh;
        let ne = mesh.triangles.len();
        let mut e = start.min(ne - 1);
        let max_steps = 4 * (ne as f64).sqrt() as usize + 64;
        for _ in 0..max_steps {
            let [a, b, c] = mesh.triangles[e].map(|i| mesh.vertices[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let l2 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
            let l3 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
            let l1 = 1.0 - l2 - l3;
            // barycentric of v0, v1, v2 → edge opposite: 1, 2, 0
            let (worst, edge) = [(l1, 1), (l2, 2), (l3, 0)]
                .into_iter()
                .fold((f64::INFINITY, 0), |m, (l, i)| if l < m.0 { (l, i) } else { m });
            if worst >= -1e-12 {
                break;
            }
            match mesh.p2.neighbors[e][edge] {
                Some(nb) => e = nb,
                None => break,
            }
        }
        let nodes = element_nodes(mesh, e);
        if let Some(xi) = inverse_map(&nodes, p) {
            if inside_reference(xi, 1e-10) {
                return Ok((e, xi));
            }
        }
        for t in 0..ne {
            let nodes = element_nodes(mesh, t);
            if let Some(xi) = inverse_map(&nodes, p) {
                if inside_reference(xi, 1e-10) {
                    return Ok((t, xi));
                }
            }
        }
        Err(Error::Location(p[0], p[1]))
    }

    pub fn locate(&self, p: Point) -> Result<(usize, [f64; 2])> {
        self.locate_from(p, 0)
    }

    /// Value, gradient and element Hessian at `p`.
    pub fn eval(&self, p: Point) -> Result<FieldValue> {
        let (e, xi) = self.locate(p)?;
        Ok(self.eval_in(e, xi))
    }

    /// L² error and H¹-seminorm error against an exact (value, gradient) pair.
    pub fn errors<F>(&self, exact: F) -> (f64, f64)
    where
        F: Fn(Point) -> (f64, [f64; 2]) + Sync,
    {
        use rayon::prelude::*;
        let rule = triangle_collapsed(6);
        let (l2, h1) = (0..self.mesh.triangles.len())
            .into_par_iter()
            .map(|e| {
                let nodes = element_nodes(&self.mesh, e);
                let c = self.element_coeffs(e);
                let mut s = (0.0, 0.0);
                for (xi, w) in &rule {
                    let f = field(&nodes, &c, *xi);
                    let det = super::element::map(&nodes, *xi).det.abs();
                    let (u, g) = exact(f.x);
                    s.0 += w * det * (f.u - u).powi(2);
                    s.1 += w * det * ((f.grad[0] - g[0]).powi(2) + (f.grad[1] - g[1]).powi(2));
                }
                s
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        (l2.sqrt(), h1.sqrt())
    }

    pub fn max_neg_u(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, &v| m.max(-v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolarDomain, SectorCone};

    fn exact(p: Point) -> (f64, [f64; 2]) {
        (0.5 * (p[0] * p[0] + p[1] * p[1] - 1.0), p)
    }

    fn solve(cone: SectorCone, levels: usize) -> FemSolution {
        let d = PolarDomain::sector(cone, 1.0).unwrap();
        let mut m = TriMesh::base(&d).unwrap();
        for _ in 0..levels {
            m = m.refine();
        }
        solve_torsion(Arc::new(m)).unwrap()
    }

    #[test]
    fn sector_solution_is_close_to_exact_quadratic() {
        for cone in [SectorCone::quarter(), SectorCone::half(), SectorCone::full()] {
            let u = solve(cone, 2);
            let apex = u.eval([0.0, 0.0]).unwrap();
            assert!((apex.u + 0.5).abs() < 1e-4, "{}", apex.u);
            for (i, p) in u.mesh.p2.coords.iter().enumerate() {
                assert!((u.coeffs[i] - exact(*p).0).abs() < 1e-4);
                assert!(u.coeffs[i] <= 1e-12);
            }
            let h = u.eval([0.3, 0.2]).unwrap().hess;
            assert!((h[0][0] - 1.0).abs() < 1e-2 && h[0][1].abs() < 1e-2 && (h[1][1] - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn dirichlet_nodes_are_exactly_zero() {
        let u = solve(SectorCone::quarter(), 1);
        for (i, &d) in u.bc.dirichlet.iter().enumerate() {
            if d {
                assert_eq!(u.coeffs[i], 0.0);
            }
        }
        assert!(u.bc.cg_residual <= CG_TOL);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = PolarDomain::cosine(SectorCone::quarter(), 1.0, 0.05, vec![(2, 1.0)]).unwrap();
        let m = TriMesh::base(&d).unwrap().refine();
        let u = solve_torsion(Arc::new(m)).unwrap();
        let p = [0.31, 0.27];
        let f = u.eval(p).unwrap();
        let h = 1e-6;
        // stay inside the same element: the field is only piecewise smooth
        let (e, _) = u.locate(p).unwrap();
        let val = |q: Point| {
            let xi = inverse_map(&element_nodes(&u.mesh, e), q).unwrap();
            u.eval_in(e, xi).u
        };
        let gx = (val([p[0] + h, p[1]]) - val([p[0] - h, p[1]])) / (2.0 * h);
        let gy = (val([p[0], p[1] + h]) - val([p[0], p[1] - h])) / (2.0 * h);
        assert!((gx - f.grad[0]).abs() < 1e-8 && (gy - f.grad[1]).abs() < 1e-8);
    }

    #[test]
    fn outside_point_is_a_location_error() {
        let u = solve(SectorCone::quarter(), 0);
        assert!(matches!(u.eval([-0.5, 0.5]), Err(Error::Location(..))));
        assert!(matches!(u.eval([1.2, 0.1]), Err(Error::Location(..))));
    }

    #[test]
    fn errors_decrease_at_p2_rates() {
        let e1 = solve(SectorCone::quarter(), 1).errors(exact);
        let e2 = solve(SectorCone::quarter(), 2).errors(exact);
        assert!((e1.0 / e2.0).log2() > 2.5, "{e1:?} {e2:?}");
        assert!((e1.1 / e2.1).log2() > 1.8, "{e1:?} {e2:?}");
    }
}
