//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs sequentially so the per-case timings are meaningful.

use cone_torsion::constants::gradient_bound;
use cone_torsion::experiments::{convergence_study, fit_loglog, stability_sweep, SweepConfig};
use cone_torsion::fem::{neumann_poincare, trace_constant, vector_poincare, zero_trace_poincare, FemSolution};
use cone_torsion::geometry::{geometry_report, nonconvex_ranges, PolarDomain, SectorCone};
use cone_torsion::identities::{
    admissible_distance, hk_deficit, hk_identity, rigidity_detector, sbt_identity, serrin_identity, IdentityReport,
};
use cone_torsion::mesh::TriMesh;
use cone_torsion::quantities::{boundary_profile, center_z, max_gradient};
use cone_torsion_validation::{unit_disk_trace_oracle, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

fn openings() -> [(&'static str, SectorCone); 3] {
    [("pi/2", SectorCone::quarter()), ("pi", SectorCone::half()), ("2pi", SectorCone::full())]
}

fn solve(d: &PolarDomain, h: f64) -> FemSolution {
    let mesh = TriMesh::with_max_size(d, h).unwrap();
    cone_torsion::fem::solve_torsion(Arc::new(mesh)).unwrap()
}

fn identities(u: &FemSolution) -> Vec<IdentityReport> {
    let z = center_z(u, u.mesh.domain.cone.normal_span_dim());
    let (sbt, sbt_v2) = sbt_identity(u, z).unwrap();
    vec![serrin_identity(u, z).unwrap(), sbt, sbt_v2, hk_identity(u).unwrap()]
}

/// A solved test domain, kept for the pointwise-bound and HK-sign criteria.
struct Case {
    label: String,
    u: FemSolution,
    hk_scale: f64,
    rigid: bool,
}

fn rigidity(cases: &mut Vec<Case>) -> Verdict {
    let mut v = Verdict::default();
    for (name, cone) in openings() {
        let t = Instant::now();
        let d = PolarDomain::sector(cone, 1.0).unwrap();
        let u = solve(&d, 0.02);
        let reports = identities(&u);
        let rig = rigidity_detector(&u, 1e-3).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let k = cone.normal_span_dim();
        let worst = reports.iter().map(|r| r.max_term_ratio()).fold(0.0, f64::max);
        v.check(
            worst <= 1e-3,
            format!("ω={name} h={:.4}: largest identity term / reference = {worst:.2e} (≤ 1e-3)", u.mesh.mesh_size()),
        );
        v.check(rig.is_rigid, format!("ω={name}: detector rigid, deficit = {:.2e}", rig.deficit));
        v.check((rig.radius - 1.0).abs() <= 1e-3, format!("ω={name}: |R − 1| = {:.2e}", (rig.radius - 1.0).abs()));
        let dz = admissible_distance(rig.z, k);
        v.check(dz <= 1e-3, format!("ω={name}: distance of z to the admissible set (k={k}) = {dz:.2e}"));
        v.check(secs <= 60.0, format!("ω={name}: runtime {secs:.1}s (≤ 60s)"));
        let hk_scale = reports[3].scale;
        cases.push(Case { label: format!("sector ω={name}"), u, hk_scale, rigid: true });
    }
    v
}

fn off_rigidity(cases: &mut Vec<Case>) -> Verdict {
    let mut v = Verdict::default();
    for (name, cone) in [("pi/2", SectorCone::quarter()), ("pi", SectorCone::half())] {
        for eps in [0.02, 0.05] {
            let d = PolarDomain::cosine(cone, 1.0, eps, vec![(2, 1.0)]).unwrap();
            // the last two uniform refinements up to the first mesh with h ≤ 0.021
            let mut meshes = vec![TriMesh::base(&d).unwrap()];
            while meshes.last().unwrap().mesh_size() > 0.021 {
                let next = meshes.last().unwrap().refine();
                meshes.push(next);
            }
            let meshes = meshes.split_off(meshes.len().saturating_sub(3));
            assert_eq!(meshes.len(), 3, "base mesh already finer than the target");
            let mut history: Vec<Vec<IdentityReport>> = Vec::new();
            let mut last = None;
            for mesh in meshes {
                let u = cone_torsion::fem::solve_torsion(Arc::new(mesh)).unwrap();
                history.push(identities(&u));
                last = Some(u);
            }
            let u = last.unwrap();
            let h = u.mesh.mesh_size();
            let fin = history.last().unwrap();
            for (i, r) in fin.iter().enumerate() {
                let seq: Vec<f64> = history.iter().map(|l| l[i].relative_residual).collect();
                v.check(
                    r.relative_residual <= 0.05,
                    format!("ω={name} ε={eps} h={h:.4} {}: relative residual {:.2e} (≤ 5%)", r.name, r.relative_residual),
                );
                v.check(
                    seq.windows(2).all(|w| w[1] < w[0]),
                    format!("ω={name} ε={eps} {}: residuals over refinement {:.2e} → {:.2e} → {:.2e}", r.name, seq[0], seq[1], seq[2]),
                );
            }
            let hk_scale = fin[3].scale;
            cases.push(Case { label: format!("ω={name} ε={eps}"), u, hk_scale, rigid: false });
        }
    }
    v
}

fn hk_sign(cases: &[Case], sweep_domains: &[PolarDomain]) -> Verdict {
    let mut v = Verdict::default();
    for c in cases {
        let d = &c.u.mesh.domain;
        let dev = hk_deficit(d).unwrap();
        if c.rigid {
            v.check(dev.abs() <= 1e-3 * c.hk_scale, format!("{}: hk_deficit = {dev:.2e} vanishes", c.label));
        } else {
            v.check(dev >= -1e-8 * c.hk_scale, format!("{}: hk_deficit = {dev:.3e} ≥ 0", c.label));
        }
    }
    for d in sweep_domains.iter().filter(|d| nonconvex_ranges(d).is_empty()) {
        let dev = hk_deficit(d).unwrap();
        let area = geometry_report(d).unwrap().area;
        v.check(dev >= -1e-8 * area, format!("sweep domain: hk_deficit = {dev:.3e} ≥ 0"));
    }
    v
}

fn sweep_criteria() -> (Verdict, Verdict, Verdict, Vec<PolarDomain>) {
    let cfg = SweepConfig::quarter_disk();
    let t = Instant::now();
    let out = stability_sweep(&cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let domains =
        cfg.epsilons.iter().map(|&e| PolarDomain::cosine(cfg.cone, 1.0, e, cfg.modes.clone()).unwrap()).collect();

    let mut sbt = Verdict::default();
    match &out.fits.sbt {
        Some(f) => {
            sbt.check((f.slope - 1.0).abs() <= 0.15, format!("slope {:.3} (1 ± 0.15), sweep {secs:.0}s", f.slope));
            sbt.check(f.r_squared >= 0.98, format!("r² {:.4} (≥ 0.98)", f.r_squared));
        }
        None => sbt.check(false, "no SBT fit".into()),
    }
    for r in &out.records {
        sbt.check(
            r.sbt_holds,
            format!(
                "ε={:.4}: pd_sbt {:.3e} ≤ Ĉ·dev {:.3e}",
                r.epsilon,
                r.pd_sbt,
                r.constants.c_sbt_best() * r.deviation_sbt
            ),
        );
    }

    let mut hk = Verdict::default();
    match &out.fits.hk {
        Some(f) => {
            hk.check(
                (f.slope - 0.5).abs() <= 0.1,
                format!("slope {:.3} (0.5 ± 0.1) over {} mean-convex records", f.slope, f.points),
            );
            hk.check(f.r_squared >= 0.98, format!("r² {:.4} (≥ 0.98)", f.r_squared));
        }
        None => hk.check(false, "no HK fit".into()),
    }
    for r in &out.records {
        match (r.hk_holds, r.deviation_hk) {
            (Some(ok), Some(dev)) => hk.check(
                ok,
                format!("ε={:.4}: pd_hk {:.3e} ≤ Ĉ·dev^½ {:.3e}", r.epsilon, r.pd_hk, r.constants.c_hk * dev.sqrt()),
            ),
            _ => hk.note(format!("ε={:.4}: not mean-convex, excluded", r.epsilon)),
        }
    }

    let mut gap = Verdict::default();
    match &out.fits.gap_sbt {
        Some(f) => gap.check(f.slope >= 0.85, format!("slope {:.3} (≥ 0.85)", f.slope)),
        None => gap.check(false, "no gap fit".into()),
    }
    (sbt, hk, gap, domains)
}

fn pointwise(cases: &[Case]) -> Verdict {
    let mut v = Verdict::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for c in cases {
        let d = &c.u.mesh.domain;
        let geo = geometry_report(d).unwrap();
        let prof = boundary_profile(&c.u, geo.reference_radius);
        let h = c.u.mesh.mesh_size();
        v.check(
            prof.m_lower >= 0.95 * geo.r_interior,
            format!("{}: min u_ν {:.4} ≥ 0.95·r_i = {:.4}", c.label, prof.m_lower, 0.95 * geo.r_interior),
        );
        let gb = gradient_bound(2, geo.r_exterior, geo.diameter);
        let mg = max_gradient(&c.u);
        v.check(mg <= gb, format!("{}: max|∇u| {mg:.4} ≤ {gb:.3}", c.label));
        let mu = c.u.max_neg_u();
        let half_d2 = 0.5 * geo.diameter * geo.diameter;
        v.check(mu <= half_d2, format!("{}: max(−u) {mu:.4} ≤ d²/2 = {half_d2:.4}", c.label));
        let mut worst = f64::INFINITY;
        for _ in 0..50 {
            let t = rng.gen_range(0.0..d.opening());
            let r = d.rho(t) * rng.gen_range(0.0..0.999f64).sqrt();
            let p = [r * t.cos(), r * t.sin()];
            let u = c.u.eval(p).unwrap().u;
            let dist = d.distance_to_gamma0(p);
            worst = worst.min(-u - (0.5 * dist * dist - 2.0 * h * h));
        }
        v.check(worst >= 0.0, format!("{}: min over 50 points of −u − (½dist² − 2h²) = {worst:.3e}", c.label));
    }
    v
}

fn variational() -> Verdict {
    let mut v = Verdict::default();
    let disk = PolarDomain::sector(SectorCone::full(), 1.0).unwrap();
    let mesh = TriMesh::with_max_size(&disk, 0.07).unwrap();
    let t = Instant::now();
    let mu = neumann_poincare(&mesh).unwrap().value;
    v.check(
        (mu - 3.3900).abs() <= 0.01 * 3.3900,
        format!("unit disk Neumann eigenvalue {mu:.5} vs 3.3900 (h={:.3}, {:.1}s)", mesh.mesh_size(), t.elapsed().as_secs_f64()),
    );
    let theta = trace_constant(&mesh).unwrap().value;
    let oracle = unit_disk_trace_oracle();
    v.check(
        (theta - oracle).abs() <= 0.01 * oracle,
        format!("unit disk trace eigenvalue {theta:.5} vs radial ODE {oracle:.5}"),
    );
    let half = PolarDomain::sector(SectorCone::half(), 1.0).unwrap();
    let hm = TriMesh::with_max_size(&half, 0.1).unwrap();
    let eta = vector_poincare(&hm, 1).unwrap().value;
    let zt = zero_trace_poincare(&hm).unwrap().value;
    v.check(
        (eta - zt).abs() <= 1e-6 * zt,
        format!("half disk η₂² {eta:.10} vs zero-trace {zt:.10}, rel {:.1e}", (eta - zt).abs() / zt),
    );
    v
}

fn convergence(total: Instant) -> Verdict {
    let mut v = Verdict::default();
    for (name, cone) in openings() {
        let rows = convergence_study(cone, 1.0, 3).unwrap();
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let l2 = fit_loglog(&hs, &rows.iter().map(|r| r.l2).collect::<Vec<_>>()).unwrap().slope;
        let h1 = fit_loglog(&hs, &rows.iter().map(|r| r.h1).collect::<Vec<_>>()).unwrap().slope;
        v.check(l2 >= 2.5, format!("ω={name}: L² rate {l2:.3} (≥ 2.5)"));
        v.check(h1 >= 1.8, format!("ω={name}: H¹ rate {h1:.3} (≥ 1.8)"));
    }
    let secs = total.elapsed().as_secs_f64();
    v.check(secs <= 900.0, format!("suite runtime {secs:.0}s (≤ 900s)"));
    v
}

fn main() {
    let total = Instant::now();
    let mut cases = Vec::new();
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    results.push((1, "rigidity reproduction", rigidity(&mut cases)));
    results.push((2, "identity consistency off rigidity", off_rigidity(&mut cases)));
    let (sbt, hk, gap, sweep_domains) = sweep_criteria();
    results.push((3, "Heintze-Karcher sign", hk_sign(&cases, &sweep_domains)));
    results.push((4, "SBT Lipschitz stability", sbt));
    results.push((5, "HK optimal stability", hk));
    results.push((6, "rho_e - rho_i stability", gap));
    results.push((7, "pointwise bounds", pointwise(&cases)));
    results.push((8, "variational constants", variational()));
    results.push((9, "convergence", convergence(total)));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, v) in &results {
        println!("criterion {n} ({name}): {}", if v.passed { "PASS" } else { "FAIL" });
        for l in &v.lines {
            println!("{l}");
        }
        failed += usize::from(!v.passed);
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
