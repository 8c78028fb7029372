//! Convergence studies against the exact sector solution, ε-perturbation
//! sweeps of the stability estimates, and log-log fits.

use crate::constants::{constants_report, eigen_constants, ConstantsInputs, ConstantsReport};
use crate::error::{Error, Result};
use crate::fem::{solve_torsion, FemSolution};
use crate::geometry::{
    dot, geometry_report, measures, reference_curvature, reference_radius, sub, PolarDomain, SectorCone,
};
use crate::identities::{check_wall_orthogonality, hk_deficit, hk_identity, sbt_identity, serrin_identity};
use crate::mesh::TriMesh;
use crate::quantities::{alternative_center_z, boundary_profile, center_z, h_fields, pseudodistances};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub nodes: usize,
    pub l2: f64,
    pub h1: f64,
    /// log₂ of the error ratio to the previous level; None on the first row.
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
}

/// L² and H¹-seminorm errors against (|x|² − R₀²)/2 on the sector of radius
/// R₀, for the base mesh and `levels` uniform refinements.
pub fn convergence_study(cone: SectorCone, r0: f64, levels: usize) -> Result<Vec<ConvergenceRow>> {
    let d = PolarDomain::sector(cone, r0)?;
    let exact = |p: [f64; 2]| (0.5 * (dot(p, p) - r0 * r0), p);
    let mut mesh = TriMesh::base(&d)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels + 1);
    for level in 0..=levels {
        let h = mesh.mesh_size();
        let nodes = mesh.p2.len();
        let next = (level < levels).then(|| mesh.refine());
        let u = solve_torsion(Arc::new(mesh))?;
        let (l2, h1) = u.errors(exact);
        let prev = rows.last();
        rows.push(ConvergenceRow {
            level,
            h,
            nodes,
            l2,
            h1,
            l2_rate: prev.map(|p| (p.l2 / l2).log2()),
            h1_rate: prev.map(|p| (p.h1 / h1).log2()),
        });
        match next {
            Some(m) => mesh = m,
            None => break,
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through (log x, log y).
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} abscissae for {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", xs.len())));
    }
    if let Some((x, y)) = xs.iter().zip(ys).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(Error::Fit(format!("non-positive data point ({x}, {y})")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(FitResult { slope, intercept: my - slope * mx, r_squared, points: xs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZPolicy {
    /// Coordinates along the wall normals set to zero, the rest from the mean of x − ∇u.
    Constrained,
    /// The mean of x − ∇u in every coordinate.
    Alternative,
}

impl std::str::FromStr for ZPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constrained" => Ok(ZPolicy::Constrained),
            "alternative" => Ok(ZPolicy::Alternative),
            other => Err(format!("unknown z policy '{other}' (expected constrained or alternative)")),
        }
    }
}

impl ZPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ZPolicy::Constrained => "constrained",
            ZPolicy::Alternative => "alternative",
        }
    }

    pub fn center(self, u: &FemSolution) -> [f64; 2] {
        match self {
            ZPolicy::Constrained => center_z(u, u.mesh.domain.cone.normal_span_dim()),
            ZPolicy::Alternative => alternative_center_z(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub cone: SectorCone,
    pub base_radius: f64,
    pub modes: Vec<(usize, f64)>,
    pub epsilons: Vec<f64>,
    /// Target mesh size of the torsion solve.
    pub h: f64,
    /// Target mesh size of the eigenvalue problems.
    pub eigen_h: f64,
    pub z_policy: ZPolicy,
}

impl SweepConfig {
    /// Quarter disk with ρ = 1 + ε cos 4θ and seven ε geometric in [0.01, 0.08].
    pub fn quarter_disk() -> Self {
        SweepConfig {
            cone: SectorCone::quarter(),
            base_radius: 1.0,
            modes: vec![(2, 1.0)],
            epsilons: geometric_grid(0.01, 0.08, 7),
            h: 0.02,
            eigen_h: 0.1,
            z_policy: ZPolicy::Constrained,
        }
    }
}

/// `count` points from `lo` to `hi` with constant ratio.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub h: f64,
    pub z: [f64; 2],
    pub mean_convex: bool,
    /// ‖H₀ − H‖_{L²(Γ0)}
    pub deviation_sbt: f64,
    /// ∫dS/H − N|Σ∩Ω|; None off the mean-convex range.
    pub deviation_hk: Option<f64>,
    /// ‖|x − z| − R‖_{L²(Γ0)}
    pub pd_sbt: f64,
    /// ‖(|x − z|² − ρ²)/2‖_{L²(Γ0)}
    pub pd_hk: f64,
    pub rho_gap: f64,
    pub constants: ConstantsReport,
    pub residual_serrin: f64,
    pub residual_sbt: f64,
    pub residual_sbt_v2: f64,
    pub residual_hk: Option<f64>,
    /// pd_sbt ≤ Ĉ_sbt · deviation_sbt with the sharper Ĉ.
    pub sbt_holds: bool,
    /// pd_hk ≤ Ĉ_hk · deviation_hk^{1/2} with the general Ĉ.
    pub hk_holds: Option<bool>,
    pub hk_holds_best: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFits {
    pub sbt: Option<FitResult>,
    pub hk: Option<FitResult>,
    pub gap_sbt: Option<FitResult>,
    pub gap_hk: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub fits: SweepFits,
}

/// One record: solve, identities, geometry and constants at a single ε.
pub fn sweep_record(cfg: &SweepConfig, epsilon: f64) -> Result<SweepRecord> {
    let d = PolarDomain::cosine(cfg.cone, cfg.base_radius, epsilon, cfg.modes.clone())?;
    let mesh = TriMesh::with_max_size(&d, cfg.h)?;
    let h = mesh.mesh_size();
    if epsilon > 0.0 && h * h > 0.1 * epsilon {
        return Err(Error::Precondition(format!(
            "mesh size {h:.4} does not separate from ε = {epsilon}: need h² ≤ 0.1ε"
        )));
    }
    let u = solve_torsion(Arc::new(mesh))?;
    let z = cfg.z_policy.center(&u);
    let geo = geometry_report(&d)?;
    let m = measures(&d)?;
    let r = reference_radius(m.area, m.gamma0_length);
    let h0 = reference_curvature(&d, &m, z);
    let deviation_sbt = d.boundary_integral(|t| (h0 - d.curvature(t)).powi(2))?.sqrt();
    let mean_convex = crate::geometry::nonconvex_ranges(&d).is_empty();
    let deviation_hk = if mean_convex { Some(hk_deficit(&d)?) } else { None };
    let hf = h_fields(&u, z);
    let pd = pseudodistances(&d, z, r, &hf)?;
    let prof = boundary_profile(&u, r);

    let eigen_mesh = TriMesh::with_max_size(&d, cfg.eigen_h)?;
    let eigen = eigen_constants(&eigen_mesh)?;
    let gamma1_length = if cfg.cone.is_full_plane() { 0.0 } else { d.rho(0.0) + d.rho(d.opening()) };
    let constants = constants_report(&ConstantsInputs {
        n: 2,
        r_interior: geo.r_interior,
        r_exterior: geo.r_exterior,
        diameter: geo.diameter,
        area: m.area,
        gamma1_length,
        eigen,
        m_lower: Some(prof.m_lower),
        max_neg_u: Some(u.max_neg_u()),
        unu_max: Some(prof.unu_max),
        alternative_center: cfg.z_policy == ZPolicy::Alternative,
    })?;

    // the identities need ⟨x − z, ν⟩ = 0 on Γ1, which the alternative center
    // need not satisfy
    let z_id = if check_wall_orthogonality(&u, z).is_ok() { z } else { ZPolicy::Constrained.center(&u) };
    let serrin = serrin_identity(&u, z_id)?;
    let (sbt, sbt_v2) = sbt_identity(&u, z_id)?;
    let residual_hk = if mean_convex { Some(hk_identity(&u)?.relative_residual) } else { None };
    let hk_holds = deviation_hk.map(|dev| pd.hk <= constants.c_hk * dev.max(0.0).sqrt());
    let hk_holds_best = deviation_hk.map(|dev| pd.hk <= constants.c_hk_best() * dev.max(0.0).sqrt());
    Ok(SweepRecord {
        epsilon,
        h,
        z,
        mean_convex,
        deviation_sbt,
        deviation_hk,
        pd_sbt: pd.sbt,
        pd_hk: pd.hk,
        rho_gap: pd.rho_e - pd.rho_i,
        residual_serrin: serrin.relative_residual,
        residual_sbt: sbt.relative_residual,
        residual_sbt_v2: sbt_v2.relative_residual,
        residual_hk,
        sbt_holds: pd.sbt <= constants.c_sbt_best() * deviation_sbt,
        hk_holds,
        hk_holds_best,
        constants,
    })
}

/// Runs every ε of the sweep in parallel and fits the scaling exponents over
/// the records with ε > 0 (mean-convex ones only for the HK fits).
pub fn stability_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    if cfg.epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("ε list must be strictly increasing".into()));
    }
    let records: Vec<SweepRecord> =
        cfg.epsilons.par_iter().map(|&e| sweep_record(cfg, e)).collect::<Result<Vec<_>>>()?;
    let fits = sweep_fits(&records);
    Ok(SweepOutcome { records, fits })
}

pub fn sweep_fits(records: &[SweepRecord]) -> SweepFits {
    let pos: Vec<&SweepRecord> = records.iter().filter(|r| r.epsilon > 0.0).collect();
    let hk: Vec<(&SweepRecord, f64)> = pos.iter().filter_map(|r| r.deviation_hk.map(|d| (*r, d))).collect();
    let col = |f: &dyn Fn(&SweepRecord) -> f64| pos.iter().map(|r| f(r)).collect::<Vec<_>>();
    SweepFits {
        sbt: fit_loglog(&col(&|r| r.deviation_sbt), &col(&|r| r.pd_sbt)).ok(),
        hk: fit_loglog(&hk.iter().map(|p| p.1).collect::<Vec<_>>(), &hk.iter().map(|p| p.0.pd_hk).collect::<Vec<_>>())
            .ok(),
        gap_sbt: fit_loglog(&col(&|r| r.deviation_sbt), &col(&|r| r.rho_gap)).ok(),
        gap_hk: fit_loglog(
            &hk.iter().map(|p| p.1.sqrt()).collect::<Vec<_>>(),
            &hk.iter().map(|p| p.0.rho_gap).collect::<Vec<_>>(),
        )
        .ok(),
    }
}

/// Distance between the two center choices, and the worst |⟨z, ν⟩| of each
/// over the wall normals.
pub fn center_comparison(u: &FemSolution) -> (f64, f64, f64) {
    let k = u.mesh.domain.cone.normal_span_dim();
    let a = center_z(u, k);
    let b = alternative_center_z(u);
    let worst = |z: [f64; 2]| {
        u.mesh.domain.cone.wall_normals().iter().map(|n| dot(z, *n).abs()).fold(0.0, f64::max)
    };
    let diff = sub(a, b);
    (dot(diff, diff).sqrt(), worst(a), worst(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_examples() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let f = fit_loglog(&xs, &xs).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
        let ys: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();
        assert!((fit_loglog(&xs, &ys).unwrap().slope - 0.5).abs() < 1e-14);
        assert!(fit_loglog(&xs[..2], &xs[..2]).is_err());
        assert!(fit_loglog(&[1.0, 0.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn noisy_slope_two_is_recovered() {
        // multiplicative noise of at most 5% moves the slope by at most
        // 2·ln(1.05/0.95)/ln(xmax/xmin)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs = geometric_grid(0.01, 1.0, 20);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x * (1.0 + rng.gen_range(-0.05..0.05))).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        let bound = 2.0 * (1.05f64 / 0.95).ln() / 100f64.ln();
        assert!((f.slope - 2.0).abs() <= bound, "{f:?}");
        assert!(f.r_squared > 0.99);
    }

    #[test]
    fn grid_is_geometric() {
        let g = geometric_grid(0.01, 0.08, 7);
        assert_eq!(g.len(), 7);
        assert!((g[6] - 0.08).abs() < 1e-15 && (g[3] - 0.01 * 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn convergence_rows_carry_rates() {
        let rows = convergence_study(SectorCone::half(), 1.0, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].l2_rate.is_none());
        assert!(rows[2].l2_rate.unwrap() > 2.5 && rows[2].h1_rate.unwrap() > 1.8, "{rows:?}");
    }

    #[test]
    fn unperturbed_record_is_rigid() {
        let cfg = SweepConfig { h: 0.07, eigen_h: 0.3, ..SweepConfig::quarter_disk() };
        let r = sweep_record(&cfg, 0.0).unwrap();
        assert!(r.deviation_sbt < 1e-10 && r.pd_sbt < 1e-10 && r.rho_gap < 1e-12);
        assert!(r.deviation_hk.unwrap().abs() < 1e-10 && r.pd_hk < 1e-4);
    }

    #[test]
    fn coarse_mesh_is_rejected_for_small_epsilon() {
        let cfg = SweepConfig { h: 0.2, ..SweepConfig::quarter_disk() };
        assert!(matches!(sweep_record(&cfg, 0.01), Err(Error::Precondition(_))));
    }

    #[test]
    fn centers_differ_by_order_epsilon() {
        let gap = |eps: f64| {
            let d = PolarDomain::cosine(SectorCone::quarter(), 1.0, eps, vec![(2, 1.0)]).unwrap();
            let u = solve_torsion(Arc::new(TriMesh::base(&d).unwrap().refine().refine().refine())).unwrap();
            let (diff, constrained, _) = center_comparison(&u);
            assert_eq!(constrained, 0.0);
            diff
        };
        let (a, b, c) = (gap(0.0), gap(0.02), gap(0.04));
        assert!(a < 1e-5, "{a}");
        // first-order growth, with a visible second-order correction at ε = 0.04
        assert!(b > 10.0 * a && c / b > 1.3 && c / b < 2.3, "{b} {c}");
    }

    proptest! {
        #[test]
        fn fit_recovers_power_laws(p in -3.0f64..3.0, c in 0.1f64..10.0) {
            let xs = geometric_grid(0.01, 1.0, 6);
            let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(p)).collect();
            let f = fit_loglog(&xs, &ys).unwrap();
            prop_assert!((f.slope - p).abs() < 1e-10);
            prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&f.r_squared));
        }
    }
}
