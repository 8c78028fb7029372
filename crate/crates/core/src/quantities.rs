//! Scalar and field quantities of a computed torsion function: centers,
//! Cauchy–Schwarz deficits, wall fluxes, boundary profiles of u_ν, the
//! quadratic defect h = |x − z|²/2 − u and the pseudodistances built on it.

use crate::error::Result;
use crate::fem::assembly::{edge_direction, element_nodes};
use crate::fem::element::{edge_point, field, map, FieldValue, Mat2};
use crate::fem::FemSolution;
use crate::geometry::{dot, measures, norm, sub, Point, PolarDomain};
use crate::mesh::EdgeLabel;
use crate::quad::{gauss_legendre, triangle7};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Gauss points per boundary edge.
const EDGE_POINTS: usize = 4;

pub fn frobenius2(h: &Mat2) -> f64 {
    h[0][0].powi(2) + h[0][1].powi(2) + h[1][0].powi(2) + h[1][1].powi(2)
}

pub fn laplacian(h: &Mat2) -> f64 {
    h[0][0] + h[1][1]
}

/// |∇²u|² − (Δu)²/2.
pub fn deficit(h: &Mat2) -> f64 {
    frobenius2(h) - 0.5 * laplacian(h).powi(2)
}

/// ⟨∇²u ∇u, ν⟩.
pub fn hess_grad_normal(f: &FieldValue, nu: Point) -> f64 {
    let hg = [
        f.hess[0][0] * f.grad[0] + f.hess[0][1] * f.grad[1],
        f.hess[1][0] * f.grad[0] + f.hess[1][1] * f.grad[1],
    ];
    dot(hg, nu)
}

/// FEM field at a Gauss point of a Γ0 edge, paired with the exact curve data
/// at the matching curve parameter.
#[derive(Debug, Clone, Copy)]
pub struct CurveSample {
    pub theta: f64,
    pub x: Point,
    pub normal: Point,
    pub curvature: f64,
    /// Quadrature weight including the arclength element.
    pub weight: f64,
    pub field: FieldValue,
    pub element: usize,
}

impl CurveSample {
    pub fn unu(&self) -> f64 {
        dot(self.field.grad, self.normal)
    }

    pub fn unn(&self) -> f64 {
        let h = &self.field.hess;
        let n = self.normal;
        n[0] * (h[0][0] * n[0] + h[0][1] * n[1]) + n[1] * (h[1][0] * n[0] + h[1][1] * n[1])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WallSample {
    pub x: Point,
    pub normal: Point,
    pub weight: f64,
    pub field: FieldValue,
    pub label: EdgeLabel,
}

pub fn gamma0_samples(u: &FemSolution) -> Vec<CurveSample> {
    let mesh = &u.mesh;
    let d = &mesh.domain;
    let g = gauss_legendre(EDGE_POINTS);
    let mut out = Vec::new();
    for (i, e) in mesh.boundary.iter().enumerate() {
        if e.label != EdgeLabel::Gamma0 {
            continue;
        }
        let (el, le) = mesh.p2.boundary_elements[i];
        let nodes = element_nodes(mesh, el);
        let c = u.element_coeffs(el);
        let dt = e.theta[1] - e.theta[0];
        for &(t, w) in &g {
            let theta = e.theta[0] + t * dt;
            out.push(CurveSample {
                theta,
                x: d.point(theta),
                normal: d.normal(theta),
                curvature: d.curvature(theta),
                weight: w * d.speed(theta) * dt.abs(),
                field: field(&nodes, &c, edge_point(le, t)),
                element: el,
            });
        }
    }
    out
}

pub fn gamma1_samples(u: &FemSolution) -> Vec<WallSample> {
    let mesh = &u.mesh;
    let normals = mesh.domain.cone.wall_normals();
    let g = gauss_legendre(EDGE_POINTS);
    let mut out = Vec::new();
    for (i, e) in mesh.boundary.iter().enumerate() {
        let normal = match e.label {
            EdgeLabel::Gamma0 => continue,
            EdgeLabel::Gamma1A => normals[0],
            EdgeLabel::Gamma1B => normals[1],
        };
        let (el, le) = mesh.p2.boundary_elements[i];
        let nodes = element_nodes(mesh, el);
        let c = u.element_coeffs(el);
        let dir = edge_direction(le);
        for &(t, w) in &g {
            let xi = edge_point(le, t);
            let m = map(&nodes, xi);
            let tx = m.jac[0][0] * dir[0] + m.jac[0][1] * dir[1];
            let ty = m.jac[1][0] * dir[0] + m.jac[1][1] * dir[1];
            let f = field(&nodes, &c, xi);
            out.push(WallSample { x: f.x, normal, weight: w * tx.hypot(ty), field: f, label: e.label });
        }
    }
    out
}

/// Sums of `f` over all element quadrature points, split into the vertex fan
/// and the rest: returns (total, fan part).
pub fn domain_integral<const K: usize, F>(u: &FemSolution, f: F) -> ([f64; K], [f64; K])
where
    F: Fn(&FieldValue) -> [f64; K] + Sync,
{
    let mesh = &u.mesh;
    let rule = triangle7();
    (0..mesh.triangles.len())
        .into_par_iter()
        .map(|e| {
            let nodes = element_nodes(mesh, e);
            let c = u.element_coeffs(e);
            let mut s = [0.0; K];
            for (xi, w) in rule {
                let det = map(&nodes, xi).det.abs();
                let v = f(&field(&nodes, &c, xi));
                for k in 0..K {
                    s[k] += w * det * v[k];
                }
            }
            let fan = if mesh.in_fan[e] { s } else { [0.0; K] };
            (s, fan)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            ([0.0; K], [0.0; K]),
            |a, b| {
                let mut out = a;
                for k in 0..K {
                    out.0[k] += b.0[k];
                    out.1[k] += b.1[k];
                }
                out
            },
        )
}

/// Area of the discrete (curved) domain.
pub fn fem_area(u: &FemSolution) -> f64 {
    domain_integral(u, |_| [1.0]).0[0]
}

/// (1/|Σ∩Ω|) ∫ (x − ∇u).
pub fn alternative_center_z(u: &FemSolution) -> Point {
    let ([a, zx, zy], _) = domain_integral(u, |f| [1.0, f.x[0] - f.grad[0], f.x[1] - f.grad[1]]);
    [zx / a, zy / a]
}

/// Center with the first k coordinates (along the span of the wall normals)
/// set to zero and the remaining ones given by the mean of x − ∇u.
pub fn center_z(u: &FemSolution, k: usize) -> Point {
    match k {
        0 => alternative_center_z(u),
        1 => [alternative_center_z(u)[0], 0.0],
        _ => [0.0, 0.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deficits {
    /// ∫ |∇²u|² − (Δu)²/2
    pub plain: f64,
    /// ∫ (−u)(|∇²u|² − (Δu)²/2)
    pub weighted: f64,
    pub plain_fan: f64,
    pub weighted_fan: f64,
}

pub fn deficit_integrals(u: &FemSolution) -> Deficits {
    let (s, fan) = domain_integral(u, |f| {
        let d = deficit(&f.hess);
        [d, -f.u * d]
    });
    Deficits { plain: s[0], weighted: s[1], plain_fan: fan[0], weighted_fan: fan[1] }
}

/// (∫_{Γ1} ⟨∇²u∇u, ν⟩, ∫_{Γ1} u⟨∇²u∇u, ν⟩); zero when Γ1 is empty.
pub fn gamma1_fluxes(u: &FemSolution) -> (f64, f64) {
    gamma1_samples(u).iter().fold((0.0, 0.0), |(a, b), s| {
        let q = hess_grad_normal(&s.field, s.normal);
        (a + s.weight * q, b + s.weight * s.field.u * q)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    pub m_lower: f64,
    pub unu_max: f64,
    pub unu_minus_r_l2: f64,
    /// ∫_{Γ0} u_ν
    pub volume_flux: f64,
}

pub fn boundary_profile(u: &FemSolution, r: f64) -> BoundaryProfile {
    let samples = gamma0_samples(u);
    let mut p = BoundaryProfile { m_lower: f64::INFINITY, unu_max: f64::NEG_INFINITY, unu_minus_r_l2: 0.0, volume_flux: 0.0 };
    for s in &samples {
        let v = s.unu();
        p.m_lower = p.m_lower.min(v);
        p.unu_max = p.unu_max.max(v);
        p.unu_minus_r_l2 += s.weight * (v - r).powi(2);
        p.volume_flux += s.weight * v;
    }
    p.unu_minus_r_l2 = p.unu_minus_r_l2.sqrt();
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HFields {
    /// Mean of h over Σ∩Ω.
    pub mean: f64,
    pub grad_l2: f64,
    pub hess_l2: f64,
    /// Mean of h over Γ0 (h = |x − z|²/2 there).
    pub gamma0_mean: f64,
    /// (θ, h) at the Γ0 quadrature points.
    pub gamma0: Vec<(f64, f64)>,
}

/// h = |x − z|²/2 − u, ∇h = x − z − ∇u, ∇²h = I − ∇²u.
pub fn h_fields(u: &FemSolution, z: Point) -> HFields {
    let ([a, hm, g2, h2], _) = domain_integral(u, |f| {
        let d = sub(f.x, z);
        let h = 0.5 * dot(d, d) - f.u;
        let gh = [d[0] - f.grad[0], d[1] - f.grad[1]];
        let hh = [[1.0 - f.hess[0][0], -f.hess[0][1]], [-f.hess[1][0], 1.0 - f.hess[1][1]]];
        [1.0, h, dot(gh, gh), frobenius2(&hh)]
    });
    let samples = gamma0_samples(u);
    let mut len = 0.0;
    let mut int = 0.0;
    let gamma0: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| {
            let d = sub(s.x, z);
            let h = 0.5 * dot(d, d) - s.field.u;
            len += s.weight;
            int += s.weight * h;
            (s.theta, h)
        })
        .collect();
    HFields { mean: hm / a, grad_l2: g2.sqrt(), hess_l2: h2.sqrt(), gamma0_mean: int / len, gamma0 }
}

/// min and max of |x − z| over Γ̄0.
pub fn rho_extremes(domain: &PolarDomain, z: Point) -> (f64, f64) {
    let n = 4000;
    let w = domain.opening();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..=n {
        let r = norm(sub(domain.point(w * i as f64 / n as f64), z));
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pseudodistances {
    /// ‖|x − z| − R‖_{L²(Γ0)}
    pub sbt: f64,
    /// ‖(|x − z|² − ρ²)/2‖_{L²(Γ0)} with ρ² = 2·mean_Ω h
    pub hk: f64,
    /// Same with ρ² = 2·mean_{Γ0} h
    pub hk_alt: f64,
    pub rho: f64,
    pub rho_alt: f64,
    pub rho_i: f64,
    pub rho_e: f64,
}

pub fn pseudodistances(domain: &PolarDomain, z: Point, r: f64, h: &HFields) -> Result<Pseudodistances> {
    let rho = (2.0 * h.mean).sqrt();
    let m = measures(domain)?;
    let d2 = |t: f64| {
        let d = sub(domain.point(t), z);
        dot(d, d)
    };
    let rho_alt = (domain.boundary_integral(d2)? / m.gamma0_length).sqrt();
    let sbt = domain.boundary_integral(|t| (d2(t).sqrt() - r).powi(2))?.sqrt();
    let hk = domain.boundary_integral(|t| (0.5 * (d2(t) - rho * rho)).powi(2))?.sqrt();
    let hk_alt = domain.boundary_integral(|t| (0.5 * (d2(t) - rho_alt * rho_alt)).powi(2))?.sqrt();
    let (rho_i, rho_e) = rho_extremes(domain, z);
    Ok(Pseudodistances { sbt, hk, hk_alt, rho, rho_alt, rho_i, rho_e })
}

/// Largest |∇u| over the nodes of every element.
pub fn max_gradient(u: &FemSolution) -> f64 {
    let refs = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
    (0..u.mesh.triangles.len())
        .into_par_iter()
        .map(|e| refs.iter().map(|&xi| norm(u.eval_in(e, xi).grad)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionReport {
    pub r: f64,
    pub z: Point,
    pub m_lower: f64,
    pub unu_max: f64,
    pub max_neg_u: f64,
    pub max_grad: f64,
    pub deficit_plain: f64,
    pub deficit_weighted: f64,
    pub deficit_plain_fan: f64,
    pub deficit_weighted_fan: f64,
    pub gamma1_flux: f64,
    pub gamma1_flux_weighted: f64,
    pub unu_minus_r_l2: f64,
    pub volume_flux: f64,
    pub hess_h_l2: f64,
    pub grad_h_l2: f64,
    pub h_mean: f64,
    pub rho_i: f64,
    pub rho_e: f64,
    pub u_l2: f64,
}

pub fn torsion_report(u: &FemSolution, z: Point) -> Result<TorsionReport> {
    let d = &u.mesh.domain;
    let m = measures(d)?;
    let r = 2.0 * m.area / m.gamma0_length;
    let def = deficit_integrals(u);
    let (g1, g1w) = gamma1_fluxes(u);
    let prof = boundary_profile(u, r);
    let h = h_fields(u, z);
    let (rho_i, rho_e) = rho_extremes(d, z);
    let u_l2 = domain_integral(u, |f| [f.u * f.u]).0[0].sqrt();
    Ok(TorsionReport {
        r,
        z,
        m_lower: prof.m_lower,
        unu_max: prof.unu_max,
        max_neg_u: u.max_neg_u(),
        max_grad: max_gradient(u),
        deficit_plain: def.plain,
        deficit_weighted: def.weighted,
        deficit_plain_fan: def.plain_fan,
        deficit_weighted_fan: def.weighted_fan,
        gamma1_flux: g1,
        gamma1_flux_weighted: g1w,
        unu_minus_r_l2: prof.unu_minus_r_l2,
        volume_flux: prof.volume_flux,
        hess_h_l2: h.hess_l2,
        grad_h_l2: h.grad_l2,
        h_mean: h.mean,
        rho_i,
        rho_e,
        u_l2,
    })
}

/// Sign tolerance for invariants: 1e−8 times ‖u‖_{L²}.
pub fn sign_tolerance(report: &TorsionReport) -> f64 {
    1e-8 * report.u_l2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve_torsion;
    use crate::geometry::SectorCone;
    use crate::mesh::TriMesh;
    use std::sync::Arc;

    fn solve(d: PolarDomain, levels: usize) -> FemSolution {
        let mut m = TriMesh::base(&d).unwrap();
        for _ in 0..levels {
            m = m.refine();
        }
        solve_torsion(Arc::new(m)).unwrap()
    }

    #[test]
    fn exact_sector_quantities_vanish() {
        for cone in [SectorCone::quarter(), SectorCone::half(), SectorCone::full()] {
            let u = solve(PolarDomain::sector(cone, 1.0).unwrap(), 3);
            let k = cone.normal_span_dim();
            let z = center_z(&u, k);
            assert!(norm(z) < 1e-4, "{z:?}");
            let r = torsion_report(&u, z).unwrap();
            assert!((r.r - 1.0).abs() < 1e-12);
            assert!((r.m_lower - 1.0).abs() < 1e-3 && (r.unu_max - 1.0).abs() < 1e-3);
            assert!(r.unu_minus_r_l2 < 1e-3);
            // curved elements do not reproduce quadratics: O(h³) defects
            assert!(r.deficit_plain.abs() < 1e-4 && r.deficit_weighted.abs() < 1e-5, "{r:?}");
            assert!(r.gamma1_flux.abs() < 5e-4 && r.gamma1_flux_weighted.abs() < 1e-5, "{r:?}");
            assert!((r.h_mean - 0.5).abs() < 1e-4 && r.hess_h_l2 < 2e-2 && r.grad_h_l2 < 1e-3);
            let area = cone.opening() / 2.0;
            assert!((r.volume_flux / (2.0 * area) - 1.0).abs() < 1e-3, "{} {}", r.volume_flux, area);
        }
    }

    #[test]
    fn hessian_defect_relation_is_algebraic() {
        // |I − ∇²u|² − deficit = ½(Δu − 2)² pointwise
        let d = PolarDomain::cosine(SectorCone::quarter(), 1.0, 0.05, vec![(2, 1.0)]).unwrap();
        let u = solve(d, 1);
        let h = h_fields(&u, [0.0, 0.0]);
        let def = deficit_integrals(&u);
        let drift = domain_integral(&u, |f| [0.5 * (laplacian(&f.hess) - 2.0).powi(2)]).0[0];
        assert!((h.hess_l2.powi(2) - def.plain - drift).abs() < 1e-12);
    }

    #[test]
    fn alternative_rho_minimizes_the_hk_pseudodistance() {
        let d = PolarDomain::cosine(SectorCone::quarter(), 1.0, 0.05, vec![(2, 1.0)]).unwrap();
        let u = solve(d.clone(), 2);
        let z = center_z(&u, 2);
        let h = h_fields(&u, z);
        let p = pseudodistances(&d, z, 2.0 * measures(&d).unwrap().area / measures(&d).unwrap().gamma0_length, &h).unwrap();
        assert!(p.hk_alt <= p.hk + 1e-14);
        assert!(p.rho_i <= p.rho_alt && p.rho_alt <= p.rho_e);
        assert!(p.sbt > 0.0 && p.rho_e > p.rho_i);
    }

    #[test]
    fn half_disk_center_stays_on_the_wall_line() {
        let u = solve(PolarDomain::sector(SectorCone::half(), 1.0).unwrap(), 2);
        let z = center_z(&u, 1);
        assert_eq!(z[1], 0.0);
        assert!(z[0].abs() < 1e-4);
    }

    #[test]
    fn perturbed_profile_brackets_r() {
        let d = PolarDomain::cosine(SectorCone::quarter(), 1.0, 0.05, vec![(2, 1.0)]).unwrap();
        let u = solve(d, 2);
        let r = torsion_report(&u, [0.0, 0.0]).unwrap();
        assert!(r.m_lower < r.r && r.r < r.unu_max);
        assert!(r.deficit_plain > 0.0 && r.deficit_weighted > 0.0);
        assert!(r.gamma1_flux <= 1e-8 && r.gamma1_flux_weighted >= -1e-8);
    }
}
