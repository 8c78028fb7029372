//! Term-by-term evaluation of the Serrin, Soap Bubble and Heintze–Karcher
//! integral identities on a computed torsion function, plus the spherical
//! detector.

use crate::error::{Error, Result};
use crate::fem::FemSolution;
use crate::geometry::{corner_conormal_sum, dot, measures, nonconvex_ranges, norm, reference_radius, sub, Point};
use crate::quantities::{
    alternative_center_z, deficit_integrals, gamma0_samples, gamma1_fluxes, gamma1_samples, CurveSample,
};
use serde::{Deserialize, Serialize};

/// Identities are compared against `SCALE_FLOOR` times a reference magnitude
/// of the right dimension, so that the relative residual stays meaningful
/// when every term vanishes.
pub const SCALE_FLOOR: f64 = 1e-3;

/// Tolerance on |⟨x − z, ν⟩| at the wall samples.
pub const WALL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs_terms: Vec<(String, f64)>,
    pub rhs_terms: Vec<(String, f64)>,
    /// |ΣLHS − ΣRHS|
    pub residual: f64,
    /// max(Σ|terms|, SCALE_FLOOR · reference)
    pub scale: f64,
    pub reference: f64,
    pub relative_residual: f64,
}

impl IdentityReport {
    fn new(name: &str, lhs: Vec<(&str, f64)>, rhs: Vec<(&str, f64)>, reference: f64) -> Self {
        let own = |v: Vec<(&str, f64)>| v.into_iter().map(|(n, x)| (n.to_string(), x)).collect::<Vec<_>>();
        let (lhs_terms, rhs_terms) = (own(lhs), own(rhs));
        let l: f64 = lhs_terms.iter().map(|t| t.1).sum();
        let r: f64 = rhs_terms.iter().map(|t| t.1).sum();
        let total: f64 = lhs_terms.iter().chain(&rhs_terms).map(|t| t.1.abs()).sum();
        let residual = (l - r).abs();
        let scale = total.max(SCALE_FLOOR * reference);
        IdentityReport {
            name: name.to_string(),
            lhs_terms,
            rhs_terms,
            residual,
            scale,
            reference,
            relative_residual: residual / scale,
        }
    }

    pub fn lhs(&self) -> f64 {
        self.lhs_terms.iter().map(|t| t.1).sum()
    }

    pub fn rhs(&self) -> f64 {
        self.rhs_terms.iter().map(|t| t.1).sum()
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.lhs_terms.iter().chain(&self.rhs_terms).find(|t| t.0 == name).map(|t| t.1)
    }

    /// Largest |term| divided by the reference magnitude.
    pub fn max_term_ratio(&self) -> f64 {
        self.lhs_terms.iter().chain(&self.rhs_terms).map(|t| t.1.abs()).fold(0.0, f64::max) / self.reference
    }
}

struct Setup {
    area: f64,
    r: f64,
    samples: Vec<CurveSample>,
}

fn setup(u: &FemSolution) -> Result<Setup> {
    let m = measures(&u.mesh.domain)?;
    Ok(Setup { area: m.area, r: reference_radius(m.area, m.gamma0_length), samples: gamma0_samples(u) })
}

fn sum<F: Fn(&CurveSample) -> f64>(s: &[CurveSample], f: F) -> f64 {
    s.iter().map(|x| x.weight * f(x)).sum()
}

/// Checks ⟨x − z, ν⟩ = 0 on Γ1 and names the worst sample otherwise.
pub fn check_wall_orthogonality(u: &FemSolution, z: Point) -> Result<()> {
    let worst = gamma1_samples(u)
        .into_iter()
        .map(|s| (dot(sub(s.x, z), s.normal).abs(), s))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match worst {
        Some((v, s)) if v > WALL_TOL * u.mesh.domain.base_radius.max(1.0) => Err(Error::Precondition(format!(
            "z = ({}, {}) is not admissible: |<x - z, nu>| = {v:.3e} at ({:.6}, {:.6}) on {}",
            z[0],
            z[1],
            s.x[0],
            s.x[1],
            s.label.name()
        ))),
        _ => Ok(()),
    }
}

/// ∫(−u)·deficit + ∫_{Γ1} u⟨∇²u∇u, ν⟩ = ½∫_{Γ0}(u_ν² − R²)(u_ν − q_ν).
pub fn serrin_identity(u: &FemSolution, z: Point) -> Result<IdentityReport> {
    check_wall_orthogonality(u, z)?;
    let s = setup(u)?;
    let def = deficit_integrals(u);
    let (_, g1w) = gamma1_fluxes(u);
    let r2 = s.r * s.r;
    let rhs = 0.5 * sum(&s.samples, |c| {
        let unu = c.unu();
        (unu * unu - r2) * (unu - dot(sub(c.x, z), c.normal))
    });
    Ok(IdentityReport::new(
        "serrin",
        vec![("weighted_deficit", def.weighted), ("gamma1_weighted_flux", g1w)],
        vec![("boundary", rhs)],
        s.area * r2,
    ))
}

/// Both Soap Bubble forms: the plain one with 1/R, and the one with H₀(z)
/// and the corner term. `z` enters only the second.
pub fn sbt_identity(u: &FemSolution, z: Point) -> Result<(IdentityReport, IdentityReport)> {
    let s = setup(u)?;
    let d = &u.mesh.domain;
    let def = deficit_integrals(u);
    let (g1, _) = gamma1_fluxes(u);
    let r = s.r;
    let unu_r = sum(&s.samples, |c| (c.unu() - r).powi(2)) / r;
    let plain_rhs = sum(&s.samples, |c| (1.0 / r - c.curvature) * c.unu().powi(2));
    let plain = IdentityReport::new(
        "sbt",
        vec![("deficit", def.plain), ("gamma1_flux", -g1), ("unu_minus_r", unu_r)],
        vec![("curvature_gap", plain_rhs)],
        s.area,
    );

    let corners = corner_conormal_sum(d, z);
    let h0 = 1.0 / r - corners / (2.0 * s.area);
    let unu2 = sum(&s.samples, |c| c.unu().powi(2));
    let v2 = IdentityReport::new(
        "sbt_v2",
        vec![
            ("deficit", def.plain),
            ("gamma1_flux", -g1),
            ("corner", -unu2 / (2.0 * s.area) * corners),
            ("unu_minus_r", unu_r),
        ],
        vec![
            ("h0_gap_unu", sum(&s.samples, |c| (h0 - c.curvature) * (c.unu().powi(2) - r * r))),
            ("h0_gap_qnu", r * sum(&s.samples, |c| (h0 - c.curvature) * (r - dot(sub(c.x, z), c.normal)))),
        ],
        s.area,
    );
    Ok((plain, v2))
}

/// (1/(N−1))[deficit − Γ1 flux] + ∫(1 − Hu_ν)²/H = ∫dS/H − N|Σ∩Ω|; needs H > 0.
pub fn hk_identity(u: &FemSolution) -> Result<IdentityReport> {
    let d = &u.mesh.domain;
    let ranges = nonconvex_ranges(d);
    if !ranges.is_empty() {
        return Err(Error::MeanConvexity { ranges });
    }
    let s = setup(u)?;
    let def = deficit_integrals(u);
    let (g1, _) = gamma1_fluxes(u);
    let square = sum(&s.samples, |c| (1.0 - c.curvature * c.unu()).powi(2) / c.curvature);
    Ok(IdentityReport::new(
        "hk",
        vec![("deficit", def.plain), ("gamma1_flux", -g1), ("hk_square", square)],
        vec![("hk_deficit", hk_deficit(d)?)],
        s.area,
    ))
}

/// ∫_{Γ0} dS/H − N|Σ∩Ω|, from the exact curve.
pub fn hk_deficit(d: &crate::geometry::PolarDomain) -> Result<f64> {
    let ranges = nonconvex_ranges(d);
    if !ranges.is_empty() {
        return Err(Error::MeanConvexity { ranges });
    }
    let m = measures(d)?;
    Ok(d.boundary_integral(|t| 1.0 / d.curvature(t))? - 2.0 * m.area)
}

/// u_νν + H u_ν − N at every Γ0 quadrature point, as (θ, residual).
pub fn reilly_residuals(u: &FemSolution) -> Vec<(f64, f64)> {
    gamma0_samples(u).iter().map(|c| (c.theta, c.unn() + c.curvature * c.unu() - 2.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigidity {
    pub is_rigid: bool,
    /// Least-squares fit of ∇u ≈ x − z.
    pub z: Point,
    /// dS-weighted mean of |x − z| over Γ0.
    pub radius: f64,
    pub deficit: f64,
}

/// Spherical detector: rigid when ∫ deficit ≤ tol·|Σ∩Ω|.
pub fn rigidity_detector(u: &FemSolution, tol: f64) -> Result<Rigidity> {
    let d = &u.mesh.domain;
    let m = measures(d)?;
    let def = deficit_integrals(u);
    let z = alternative_center_z(u);
    let radius = d.boundary_integral(|t| norm(sub(d.point(t), z)))? / m.gamma0_length;
    Ok(Rigidity { is_rigid: def.plain <= tol * m.area, z, radius, deficit: def.plain })
}

/// Distance from z to the set of centers allowed by a cone with normal span
/// dimension k (the whole plane, the first axis, the origin).
pub fn admissible_distance(z: Point, k: usize) -> f64 {
    match k {
        0 => 0.0,
        1 => z[1].abs(),
        _ => norm(z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve_torsion;
    use crate::geometry::{PolarDomain, SectorCone};
    use crate::mesh::TriMesh;
    use std::sync::Arc;

    fn solve(d: PolarDomain, levels: usize) -> FemSolution {
        let mut m = TriMesh::base(&d).unwrap();
        for _ in 0..levels {
            m = m.refine();
        }
        solve_torsion(Arc::new(m)).unwrap()
    }

    fn perturbed(eps: f64) -> PolarDomain {
        PolarDomain::cosine(SectorCone::quarter(), 1.0, eps, vec![(2, 1.0)]).unwrap()
    }

    #[test]
    fn exact_sector_terms_vanish() {
        let u = solve(PolarDomain::sector(SectorCone::quarter(), 1.0).unwrap(), 3);
        let z = [0.0, 0.0];
        let (sbt, v2) = sbt_identity(&u, z).unwrap();
        let reps = [serrin_identity(&u, z).unwrap(), sbt, v2, hk_identity(&u).unwrap()];
        for r in &reps {
            assert!(r.max_term_ratio() < 1e-3, "{r:?}");
        }
        assert!(reps[3].term("hk_deficit").unwrap().abs() < 1e-10);
    }

    #[test]
    fn off_axis_center_is_rejected_for_the_quarter_disk() {
        let u = solve(PolarDomain::sector(SectorCone::quarter(), 1.0).unwrap(), 0);
        match serrin_identity(&u, [0.1, 0.0]) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("Gamma1")),
            other => panic!("{other:?}"),
        }
        let h = solve(PolarDomain::sector(SectorCone::half(), 1.0).unwrap(), 0);
        assert!(serrin_identity(&h, [0.1, 0.0]).is_ok());
        assert!(serrin_identity(&h, [0.0, 0.1]).is_err());
    }

    #[test]
    fn perturbed_identities_close_under_refinement() {
        let d = perturbed(0.05);
        let coarse = solve(d.clone(), 2);
        let fine = solve(d, 3);
        let z = [0.0, 0.0];
        let pick = |u: &FemSolution| {
            let (a, b) = sbt_identity(u, z).unwrap();
            [serrin_identity(u, z).unwrap(), a, b, hk_identity(u).unwrap()]
        };
        for (c, f) in pick(&coarse).iter().zip(pick(&fine).iter()) {
            assert!(f.relative_residual < 0.05, "{f:?}");
            assert!(f.residual < c.residual, "{} {} {}", f.name, c.residual, f.residual);
            assert!(f.term("deficit").unwrap_or(1.0) > 0.0);
        }
    }

    #[test]
    fn both_sbt_forms_agree_when_there_are_no_corners() {
        // orthogonal gluing: the corner sum vanishes and H₀ = 1/R
        let u = solve(perturbed(0.03), 2);
        let (a, b) = sbt_identity(&u, [0.0, 0.0]).unwrap();
        assert!(b.term("corner").unwrap().abs() < 1e-12);
        assert!((a.rhs() - b.rhs()).abs() < 1e-10 * a.scale.max(1.0));
    }

    #[test]
    fn reilly_holds_on_the_exact_sector() {
        let u = solve(PolarDomain::sector(SectorCone::half(), 1.0).unwrap(), 3);
        let res = reilly_residuals(&u);
        let step = res.len() / 20;
        for (_, r) in res.iter().step_by(step).take(20) {
            assert!(r.abs() < 5e-2, "{r}");
        }
    }

    #[test]
    fn detector_separates_the_sector_from_a_perturbation() {
        let exact = rigidity_detector(&solve(PolarDomain::sector(SectorCone::half(), 1.0).unwrap(), 3), 1e-3).unwrap();
        assert!(exact.is_rigid && (exact.radius - 1.0).abs() < 1e-3);
        assert!(admissible_distance(exact.z, 1) < 1e-3);
        let bent = rigidity_detector(&solve(perturbed(0.1), 3), 1e-3).unwrap();
        assert!(!bent.is_rigid, "{bent:?}");
    }

    #[test]
    fn nonconvex_profile_is_reported_with_ranges() {
        let u = solve(perturbed(0.2), 0);
        match hk_identity(&u) {
            Err(Error::MeanConvexity { ranges }) => assert!(!ranges.is_empty()),
            other => panic!("{other:?}"),
        }
    }
}
