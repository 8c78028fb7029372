//! Command execution: each command produces checks, CSV artifacts and a
//! manifest.

use crate::config::{resolve, Command, RunConfig, KEYS, OUT_ENV};
use crate::output::{flag, num, opt, opt_flag, Artifacts, Check, MeshInfo};
use clap::{Arg, ArgAction};
use cone_torsion::constants::{
    constants_report, eigen_constants, gradient_bound, ConstantsInputs, ConstantsReport, EigenConstants,
};
use cone_torsion::experiments::{convergence_study, stability_sweep, FitResult, SweepConfig, ZPolicy};
use cone_torsion::fem::{solve_torsion, FemSolution};
use cone_torsion::geometry::{geometry_report, measures, nonconvex_ranges, GeometryReport, PolarDomain};
use cone_torsion::identities::{
    admissible_distance, check_wall_orthogonality, hk_deficit, hk_identity, rigidity_detector, sbt_identity,
    serrin_identity, IdentityReport,
};
use cone_torsion::mesh::TriMesh;
use cone_torsion::quantities::{torsion_report, TorsionReport};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    /// Bad configuration or unusable output directory.
    Config(Vec<String>),
    /// A library call failed; `context` names the module and operation.
    Numerical { context: &'static str, source: cone_torsion::Error },
}

impl RunError {
    pub fn status(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            // preconditions come from the requested parameters, e.g. a mesh
            // too coarse for the requested ε
            RunError::Numerical { source: cone_torsion::Error::Precondition(_), .. }
            | RunError::Numerical { source: cone_torsion::Error::InvalidDomain(_), .. } => EXIT_CONFIG,
            RunError::Numerical { .. } => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Config(lines) => lines.join("\n"),
            RunError::Numerical { context, source } => format!("{context}: {source}"),
        }
    }
}

fn ctx(context: &'static str) -> impl FnOnce(cone_torsion::Error) -> RunError {
    move |source| RunError::Numerical { context, source }
}

fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |e| RunError::Config(vec![format!("{}: {e}", path.display())])
}

/// Everything a command hands back besides its files.
#[derive(Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub meshes: Vec<MeshInfo>,
    pub notes: Vec<String>,
}

fn cli() -> clap::Command {
    let mut cmd = clap::Command::new("cone-torsion")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Torsion problem in planar cones: solve, verify identities, assemble constants, sweep, converge")
        .arg(
            Arg::new("command_pos")
                .value_name("COMMAND")
                .help("shorthand for --command")
                .value_parser(["solve", "verify", "constants", "sweep", "convergence"]),
        )
        .arg(Arg::new("config").long("config").value_name("PATH").help("flat key = value config file"));
    for k in KEYS {
        let mut a = Arg::new(k.name).long(k.name).value_name("VALUE").action(ArgAction::Set).help(k.help);
        if !k.default.is_empty() {
            a = a.long_help(format!("{} [default: {}]", k.help, k.default));
        }
        cmd = cmd.arg(a);
    }
    cmd
}

/// Parses arguments, runs, writes artifacts, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut flags: Vec<(String, String)> = Vec::new();
    if let Some(c) = m.get_one::<String>("command_pos") {
        flags.push(("command".into(), c.clone()));
    }
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k.name) {
            if k.name == "command" && flags.iter().any(|(n, p)| n == "command" && p != v) {
                eprintln!("error: positional command and --command disagree");
                return EXIT_CONFIG;
            }
            flags.push((k.name.to_string(), v.clone()));
        }
    }
    let file = match m.get_one::<String>("config") {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(text) => Some((PathBuf::from(p), text)),
            Err(e) => {
                eprintln!("error: {p}: {e}");
                return EXIT_CONFIG;
            }
        },
        None => None,
    };
    let env_out = std::env::var(OUT_ENV).ok();
    let cfg = match resolve(file.as_ref().map(|(p, t)| (p.as_path(), t.as_str())), &flags, env_out) {
        Ok(c) => c,
        Err(lines) => {
            for l in lines {
                eprintln!("error: {l}");
            }
            return EXIT_CONFIG;
        }
    };
    if cfg.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let status = run(&cfg);
    if status != EXIT_OK {
        eprintln!("cone-torsion: exit status {status}");
    }
    status
}

/// Runs one configured command. Artifacts land in `cfg.out`.
pub fn run(cfg: &RunConfig) -> i32 {
    let mut art = match Artifacts::new(&cfg.out) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: output directory {}: {e}", cfg.out.display());
            return EXIT_CONFIG;
        }
    };
    let result = match cfg.command {
        Command::Solve => cmd_solve(cfg, &mut art, false),
        Command::Verify => cmd_solve(cfg, &mut art, true),
        Command::Constants => cmd_constants(cfg, &mut art),
        Command::Sweep => cmd_sweep(cfg, &mut art),
        Command::Convergence => cmd_convergence(cfg, &mut art),
    };
    let (status, outcome, error) = match result {
        Ok(o) => {
            let ok = o.checks.iter().all(|c| !c.enabled || c.passed);
            (if ok { EXIT_OK } else { EXIT_CHECK_FAILED }, o, None)
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            (e.status(), Outcome::default(), Some(e))
        }
    };
    for c in outcome.checks.iter().filter(|c| c.enabled) {
        eprintln!(
            "{} {} = {} ({}){}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            num(c.value),
            c.criterion,
            if c.detail.is_empty() { String::new() } else { format!(" {}", c.detail) }
        );
    }
    let manifest = json!({
        "tool": "cone-torsion",
        "cli_version": env!("CARGO_PKG_VERSION"),
        "library_version": cone_torsion::VERSION,
        "command": cfg.command.name(),
        "config": cfg.values,
        "meshes": outcome.meshes.iter().map(|m| json!({
            "role": m.role, "h": m.h, "nodes": m.nodes, "triangles": m.triangles,
        })).collect::<Vec<_>>(),
        "artifacts": art.files,
        "checks": outcome.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "notes": outcome.notes,
        "error": error.as_ref().map(|e| e.message()),
        "passed": status == EXIT_OK,
        "exit_status": status,
    });
    if let Err(e) = art.json("manifest.json", &manifest) {
        eprintln!("error: writing manifest: {e}");
        return EXIT_CONFIG;
    }
    status
}

fn domain(cfg: &RunConfig) -> Result<PolarDomain, RunError> {
    PolarDomain::cosine(cfg.cone, cfg.radius, cfg.epsilon, cfg.modes.clone()).map_err(ctx("geometry::cosine_domain"))
}

fn is_rigid_config(cfg: &RunConfig) -> bool {
    cfg.epsilon == 0.0 || cfg.modes.iter().all(|m| m.1 == 0.0)
}

fn gamma1_length(d: &PolarDomain) -> f64 {
    if d.cone.is_full_plane() {
        0.0
    } else {
        d.rho(0.0) + d.rho(d.opening())
    }
}

/// Identity center: the configured one when it is orthogonal to the walls,
/// otherwise the wall-constrained one.
fn identity_center(cfg: &RunConfig, u: &FemSolution) -> ([f64; 2], &'static str) {
    let z = cfg.z_policy.center(u);
    if check_wall_orthogonality(u, z).is_ok() {
        (z, cfg.z_policy.name())
    } else {
        (ZPolicy::Constrained.center(u), ZPolicy::Constrained.name())
    }
}

const SOLUTION_HEADER: &[&str] = &[
    "opening", "radius", "epsilon", "h", "nodes", "triangles", "area", "gamma0_length", "diameter", "r_interior",
    "r_exterior", "reference_radius", "k", "z_x", "z_y", "m_lower", "unu_max", "max_neg_u", "max_grad",
    "deficit_plain", "deficit_weighted", "deficit_plain_fan", "deficit_weighted_fan", "gamma1_flux",
    "gamma1_flux_weighted", "unu_minus_r_l2", "volume_flux", "hess_h_l2", "grad_h_l2", "h_mean", "rho_i", "rho_e",
    "u_l2", "max_u",
];

fn solution_row(cfg: &RunConfig, mesh: &MeshInfo, g: &GeometryReport, t: &TorsionReport, max_u: f64) -> Vec<String> {
    let mut r = vec![
        num(cfg.cone.opening()),
        num(cfg.radius),
        num(cfg.epsilon),
        num(mesh.h),
        mesh.nodes.map(|n| n.to_string()).unwrap_or_default(),
        mesh.triangles.map(|n| n.to_string()).unwrap_or_default(),
        num(g.area),
        num(g.gamma0_length),
        num(g.diameter),
        num(g.r_interior),
        num(g.r_exterior),
        num(g.reference_radius),
        g.k.to_string(),
    ];
    r.extend(
        [
            t.z[0],
            t.z[1],
            t.m_lower,
            t.unu_max,
            t.max_neg_u,
            t.max_grad,
            t.deficit_plain,
            t.deficit_weighted,
            t.deficit_plain_fan,
            t.deficit_weighted_fan,
            t.gamma1_flux,
            t.gamma1_flux_weighted,
            t.unu_minus_r_l2,
            t.volume_flux,
            t.hess_h_l2,
            t.grad_h_l2,
            t.h_mean,
            t.rho_i,
            t.rho_e,
            t.u_l2,
            max_u,
        ]
        .map(num),
    );
    r
}

/// `solve` writes the solution summary and pointwise checks; `verify` adds
/// the integral identities and the rigidity checks.
fn cmd_solve(cfg: &RunConfig, art: &mut Artifacts, verify: bool) -> Result<Outcome, RunError> {
    let d = domain(cfg)?;
    let mesh = TriMesh::with_max_size(&d, cfg.h).map_err(ctx("mesh::with_max_size"))?;
    let info = MeshInfo::of("torsion", &mesh);
    let u = solve_torsion(Arc::new(mesh)).map_err(ctx("fem::solve_torsion"))?;
    let geo = geometry_report(&d).map_err(ctx("geometry::geometry_report"))?;
    let (z, z_source) = identity_center(cfg, &u);
    let t = torsion_report(&u, z).map_err(ctx("quantities::torsion_report"))?;
    let max_u = u.coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    art.csv("solution.csv", SOLUTION_HEADER, &[solution_row(cfg, &info, &geo, &t, max_u)]).map_err(io(&art.dir))?;

    let mut out = Outcome { meshes: vec![info], ..Outcome::default() };
    if z_source != cfg.z_policy.name() {
        out.notes.push(format!("{} center is not orthogonal to the walls; using the wall-constrained center", cfg.z_policy.name()));
    }
    let c = &mut out.checks;
    c.push(Check::at_most("u_nonpositive", max_u, cfg.tol.sign * t.u_l2));
    c.push(Check::at_most(
        "volume_flux",
        (t.volume_flux - 2.0 * geo.area).abs() / (2.0 * geo.area),
        cfg.tol.flux,
    ));
    c.push(Check::at_least("min_unu_vs_interior_radius", t.m_lower, cfg.tol.lower_factor * geo.r_interior));
    c.push(Check::at_most("max_gradient_bound", t.max_grad, gradient_bound(2, geo.r_exterior, geo.diameter)));
    c.push(Check::at_most("max_neg_u_bound", t.max_neg_u, 0.5 * geo.diameter * geo.diameter));
    c.push(Check::at_least("deficit_nonnegative", t.deficit_plain, -cfg.tol.sign * geo.area));
    if verify {
        verify_identities(cfg, art, &u, z, &geo, &mut out)?;
    }
    Ok(out)
}

fn identity_rows(reports: &[&IdentityReport]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut rows = Vec::new();
    let mut terms = Vec::new();
    for r in reports {
        rows.push(vec![
            r.name.clone(),
            num(r.lhs()),
            num(r.rhs()),
            num(r.residual),
            num(r.scale),
            num(r.reference),
            num(r.relative_residual),
            num(r.max_term_ratio()),
        ]);
        for (side, list) in [("lhs", &r.lhs_terms), ("rhs", &r.rhs_terms)] {
            for (name, v) in list {
                terms.push(vec![r.name.clone(), side.to_string(), name.clone(), num(*v)]);
            }
        }
    }
    (rows, terms)
}

fn verify_identities(
    cfg: &RunConfig,
    art: &mut Artifacts,
    u: &FemSolution,
    z: [f64; 2],
    geo: &GeometryReport,
    out: &mut Outcome,
) -> Result<(), RunError> {
    let d = &u.mesh.domain;
    let serrin = serrin_identity(u, z).map_err(ctx("identities::serrin_identity"))?;
    let (sbt, sbt_v2) = sbt_identity(u, z).map_err(ctx("identities::sbt_identity"))?;
    let mean_convex = nonconvex_ranges(d).is_empty();
    let hk = if mean_convex { Some(hk_identity(u).map_err(ctx("identities::hk_identity"))?) } else { None };
    let mut reports = vec![&serrin, &sbt, &sbt_v2];
    reports.extend(hk.as_ref());
    let (rows, terms) = identity_rows(&reports);
    let header =
        ["identity", "lhs", "rhs", "residual", "scale", "reference", "relative_residual", "max_term_ratio"];
    art.csv("identities.csv", &header, &rows).map_err(io(&art.dir))?;
    art.csv("identity_terms.csv", &["identity", "side", "term", "value"], &terms).map_err(io(&art.dir))?;

    let rig = rigidity_detector(u, cfg.tol.rigidity).map_err(ctx("identities::rigidity_detector"))?;
    art.csv(
        "rigidity.csv",
        &["is_rigid", "z_x", "z_y", "radius", "deficit", "admissible_distance"],
        &[vec![
            flag(rig.is_rigid),
            num(rig.z[0]),
            num(rig.z[1]),
            num(rig.radius),
            num(rig.deficit),
            num(admissible_distance(rig.z, geo.k)),
        ]],
    )
    .map_err(io(&art.dir))?;

    let c = &mut out.checks;
    if is_rigid_config(cfg) {
        // relative residuals are 0/0 at rigidity, so every term is compared
        // against the reference magnitude instead
        for r in &reports {
            c.push(Check::at_most(&format!("identity_{}_terms", r.name), r.max_term_ratio(), cfg.tol.term));
        }
        c.push(Check::new("rigidity_detected", rig.is_rigid, rig.deficit / geo.area, format!("<= {}", num(cfg.tol.rigidity))));
        c.push(Check::at_most("rigidity_radius", (rig.radius - cfg.radius).abs() / cfg.radius, cfg.tol.rigidity));
        c.push(Check::at_most(
            "rigidity_center",
            admissible_distance(rig.z, geo.k) / cfg.radius,
            cfg.tol.rigidity,
        ));
        let dev = hk_deficit(d).map_err(ctx("identities::hk_deficit"))?;
        c.push(Check::at_most("hk_deficit_vanishes", dev.abs() / geo.area, cfg.tol.term));
    } else {
        for r in [&serrin, &sbt] {
            c.push(Check::at_most(&format!("identity_{}_residual", r.name), r.relative_residual, cfg.tol.identity));
        }
        match &hk {
            Some(r) => {
                c.push(Check::at_most("identity_hk_residual", r.relative_residual, cfg.tol.identity));
                let dev = r.term("hk_deficit").unwrap_or(f64::NAN);
                c.push(Check::at_least("hk_deficit_nonnegative", dev, -cfg.tol.sign * r.scale));
            }
            None => {
                c.push(Check::skipped("identity_hk_residual", "domain is not mean-convex"));
                c.push(Check::skipped("hk_deficit_nonnegative", "domain is not mean-convex"));
            }
        }
    }
    Ok(())
}

const CONSTANTS_HEADER: &[&str] = &[
    "k", "eigen_h", "lambda2", "mu2_inv", "eta2_inv", "wall_lambda", "zero_trace_inv", "m_hopf", "grad_bound",
    "max_u_bound_ii", "max_u_bound_i", "big_lambda", "c_hk", "c_hk_m", "c_sbt", "c_sbt_m", "zero_trace_bound",
    "max_neg_u_used", "unu_max_used",
];

fn constants_row(e: &EigenConstants, r: &ConstantsReport) -> Vec<String> {
    vec![
        r.k.to_string(),
        num(e.mesh_size),
        num(e.lambda2),
        num(e.mu2_inv),
        opt(e.eta2_inv),
        opt(e.wall_lambda),
        opt(e.zero_trace_inv),
        opt(r.m_hopf),
        num(r.grad_bound),
        num(r.max_u_bound_ii),
        num(r.max_u_bound_i),
        num(r.big_lambda),
        num(r.c_hk),
        opt(r.c_hk_m),
        num(r.c_sbt),
        opt(r.c_sbt_m),
        opt(r.zero_trace_bound),
        num(r.max_neg_u_used),
        num(r.unu_max_used),
    ]
}

/// Solve-free constants: geometry, eigenvalue constants, and the assembled
/// stability constants with the a-priori bounds in place of measured values.
fn cmd_constants(cfg: &RunConfig, art: &mut Artifacts) -> Result<Outcome, RunError> {
    let d = domain(cfg)?;
    let geo = geometry_report(&d).map_err(ctx("geometry::geometry_report"))?;
    let area = measures(&d).map_err(ctx("geometry::measures"))?.area;
    let mesh = TriMesh::with_max_size(&d, cfg.eigen_h).map_err(ctx("mesh::with_max_size"))?;
    let info = MeshInfo::of("eigen", &mesh);
    let eigen = eigen_constants(&mesh).map_err(ctx("fem::eigen_constants"))?;
    let report = constants_report(&ConstantsInputs {
        n: 2,
        r_interior: geo.r_interior,
        r_exterior: geo.r_exterior,
        diameter: geo.diameter,
        area,
        gamma1_length: gamma1_length(&d),
        eigen,
        m_lower: None,
        max_neg_u: None,
        unu_max: None,
        alternative_center: cfg.z_policy == ZPolicy::Alternative,
    })
    .map_err(ctx("constants::constants_report"))?;
    art.csv(
        "geometry.csv",
        &["area", "gamma0_length", "diameter", "r_interior", "r_exterior", "reference_radius", "k"],
        &[vec![
            num(geo.area),
            num(geo.gamma0_length),
            num(geo.diameter),
            num(geo.r_interior),
            num(geo.r_exterior),
            num(geo.reference_radius),
            geo.k.to_string(),
        ]],
    )
    .map_err(io(&art.dir))?;
    art.csv("constants.csv", CONSTANTS_HEADER, &[constants_row(&eigen, &report)]).map_err(io(&art.dir))?;

    let mut out = Outcome { meshes: vec![info], ..Outcome::default() };
    let finite = [report.c_hk, report.c_sbt, report.big_lambda, report.lambda2, report.mu2_inv, report.grad_bound];
    let worst = finite.iter().copied().fold(f64::INFINITY, f64::min);
    out.checks.push(Check::new(
        "constants_positive",
        finite.iter().all(|x| x.is_finite() && *x > 0.0),
        worst,
        "> 0 and finite".into(),
    ));
    match (report.zero_trace_bound, report.zero_trace_inv) {
        (Some(b), Some(c)) => out.checks.push(Check::at_least("zero_trace_bound_dominates", b, c)),
        _ => out.checks.push(Check::skipped("zero_trace_bound_dominates", "no cone walls")),
    }
    Ok(out)
}

const SWEEP_HEADER: &[&str] = &[
    "epsilon", "h", "z_x", "z_y", "mean_convex", "deviation_sbt", "deviation_hk", "pd_sbt", "pd_hk", "rho_gap",
    "residual_serrin", "residual_sbt", "residual_sbt_v2", "residual_hk", "sbt_holds", "hk_holds", "hk_holds_best",
    "lambda2", "mu2_inv", "eta2_inv", "big_lambda", "c_sbt", "c_sbt_m", "c_hk", "c_hk_m", "zero_trace_bound",
];

fn fit_json(f: &Option<FitResult>) -> Value {
    f.as_ref().map_or(Value::Null, |f| serde_json::to_value(f).unwrap_or(Value::Null))
}

fn slope_check(name: &str, fit: &Option<FitResult>, target: f64, tol: f64) -> Check {
    match fit {
        Some(f) => Check::new(name, (f.slope - target).abs() <= tol, f.slope, format!("{} ± {}", num(target), num(tol))),
        None => Check::new(name, false, f64::NAN, format!("{} ± {}", num(target), num(tol)))
            .with_detail("fewer than three usable records"),
    }
}

fn r2_check(name: &str, fit: &Option<FitResult>, min: f64) -> Check {
    match fit {
        Some(f) => Check::at_least(name, f.r_squared, min),
        None => Check::at_least(name, f64::NAN, min).with_detail("fewer than three usable records"),
    }
}

fn cmd_sweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<Outcome, RunError> {
    let sc = SweepConfig {
        cone: cfg.cone,
        base_radius: cfg.radius,
        modes: cfg.modes.clone(),
        epsilons: cfg.epsilons.clone(),
        h: cfg.h,
        eigen_h: cfg.eigen_h,
        z_policy: cfg.z_policy,
    };
    let res = stability_sweep(&sc).map_err(ctx("experiments::stability_sweep"))?;
    let rows: Vec<Vec<String>> = res
        .records
        .iter()
        .map(|r| {
            let k = &r.constants;
            vec![
                num(r.epsilon),
                num(r.h),
                num(r.z[0]),
                num(r.z[1]),
                flag(r.mean_convex),
                num(r.deviation_sbt),
                opt(r.deviation_hk),
                num(r.pd_sbt),
                num(r.pd_hk),
                num(r.rho_gap),
                num(r.residual_serrin),
                num(r.residual_sbt),
                num(r.residual_sbt_v2),
                opt(r.residual_hk),
                flag(r.sbt_holds),
                opt_flag(r.hk_holds),
                opt_flag(r.hk_holds_best),
                num(k.lambda2),
                num(k.mu2_inv),
                opt(k.eta2_inv),
                num(k.big_lambda),
                num(k.c_sbt),
                opt(k.c_sbt_m),
                num(k.c_hk),
                opt(k.c_hk_m),
                opt(k.zero_trace_bound),
            ]
        })
        .collect();
    art.csv("sweep.csv", SWEEP_HEADER, &rows).map_err(io(&art.dir))?;

    let f = &res.fits;
    let t = &cfg.tol;
    let recs = &res.records;
    let sbt_fail = recs.iter().filter(|r| !r.sbt_holds).count();
    let hk_fail = recs.iter().filter(|r| r.hk_holds == Some(false)).count();
    let excluded: Vec<String> = recs.iter().filter(|r| !r.mean_convex).map(|r| num(r.epsilon)).collect();
    let mut checks = vec![
        slope_check("sweep_sbt_slope", &f.sbt, 1.0, t.slope_sbt),
        r2_check("sweep_sbt_r2", &f.sbt, t.min_r2),
        Check::at_most("sweep_sbt_inequality_failures", sbt_fail as f64, 0.0),
        slope_check("sweep_hk_slope", &f.hk, 0.5, t.slope_hk),
        r2_check("sweep_hk_r2", &f.hk, t.min_r2),
        Check::at_most("sweep_hk_inequality_failures", hk_fail as f64, 0.0),
        match &f.gap_sbt {
            Some(g) => Check::at_least("sweep_gap_slope", g.slope, t.min_gap_slope),
            None => Check::at_least("sweep_gap_slope", f64::NAN, t.min_gap_slope)
                .with_detail("fewer than three usable records"),
        },
    ];
    if !excluded.is_empty() {
        let note = format!("not mean-convex, excluded from HK fits: ε = {}", excluded.join(", "));
        for c in checks.iter_mut().filter(|c| c.name.starts_with("sweep_hk")) {
            c.detail = if c.detail.is_empty() { note.clone() } else { format!("{}; {note}", c.detail) };
        }
    }
    art.json(
        "fits.json",
        &json!({
            "sbt": fit_json(&f.sbt),
            "hk": fit_json(&f.hk),
            "gap_sbt": fit_json(&f.gap_sbt),
            "gap_hk": fit_json(&f.gap_hk),
            "excluded_from_hk": recs.iter().filter(|r| !r.mean_convex).map(|r| r.epsilon).collect::<Vec<_>>(),
            "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        }),
    )
    .map_err(io(&art.dir))?;
    let meshes = recs
        .iter()
        .map(|r| MeshInfo { role: format!("torsion eps={}", num(r.epsilon)), h: r.h, nodes: None, triangles: None })
        .collect();
    Ok(Outcome { checks, meshes, notes: Vec::new() })
}

fn cmd_convergence(cfg: &RunConfig, art: &mut Artifacts) -> Result<Outcome, RunError> {
    let rows = convergence_study(cfg.cone, cfg.radius, cfg.levels).map_err(ctx("experiments::convergence_study"))?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.level.to_string(), num(r.h), r.nodes.to_string(), num(r.l2), num(r.h1), opt(r.l2_rate), opt(r.h1_rate)]
        })
        .collect();
    art.csv("convergence.csv", &["level", "h", "nodes", "l2", "h1", "l2_rate", "h1_rate"], &csv_rows)
        .map_err(io(&art.dir))?;
    let mut out = Outcome {
        meshes: rows
            .iter()
            .map(|r| MeshInfo { role: format!("level {}", r.level), h: r.h, nodes: Some(r.nodes), triangles: None })
            .collect(),
        ..Outcome::default()
    };
    if !is_rigid_config(cfg) {
        out.notes.push("convergence runs on the unperturbed sector; epsilon and modes are ignored".into());
    }
    let last = rows.last().expect("at least the base level");
    match (last.l2_rate, last.h1_rate) {
        (Some(l2), Some(h1)) => {
            out.checks.push(Check::at_least("l2_rate", l2, cfg.tol.min_l2_rate));
            out.checks.push(Check::at_least("h1_rate", h1, cfg.tol.min_h1_rate));
        }
        _ => {
            out.checks.push(Check::skipped("l2_rate", "needs levels >= 1"));
            out.checks.push(Check::skipped("h1_rate", "needs levels >= 1"));
        }
    }
    Ok(out)
}
