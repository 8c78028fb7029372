//! Flat `key = value` run configuration with per-key flag overrides.

use cone_torsion::experiments::{geometric_grid, ZPolicy};
use cone_torsion::geometry::{parse_angle, parse_modes, SectorCone};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

pub const OUT_ENV: &str = "CONE_TORSION_OUT";
pub const DEFAULT_OUT: &str = "cone-torsion-out";

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// Every recognised key. Each one is also a `--name VALUE` flag.
pub const KEYS: &[Key] = &[
    Key { name: "command", default: "verify", help: "solve | verify | constants | sweep | convergence" },
    Key { name: "opening", default: "pi/2", help: "cone opening angle, e.g. pi/2, pi, 2pi, 1.2" },
    Key { name: "radius", default: "1", help: "base radius R0" },
    Key { name: "epsilon", default: "0", help: "perturbation amplitude of the single-domain commands" },
    Key { name: "modes", default: "2:1", help: "cosine modes m:a,... of rho = R0(1 + eps sum a cos(m pi theta / opening))" },
    Key { name: "h", default: "0.02", help: "target mesh size of the torsion solve" },
    Key { name: "eigen_h", default: "0.1", help: "target mesh size of the eigenvalue problems" },
    Key { name: "epsilons", default: "geom:0.01:0.08:7", help: "sweep amplitudes: a,b,c or geom:lo:hi:count" },
    Key { name: "z_policy", default: "constrained", help: "center choice: constrained | alternative" },
    Key { name: "levels", default: "3", help: "uniform refinements of the convergence study" },
    Key { name: "threads", default: "0", help: "worker threads (0 = all cores)" },
    Key { name: "out", default: "", help: "output directory (default $CONE_TORSION_OUT or ./cone-torsion-out)" },
    Key { name: "tol_term", default: "1e-3", help: "max identity term / reference on rigid domains" },
    Key { name: "tol_identity", default: "0.05", help: "max relative identity residual off rigidity" },
    Key { name: "tol_rigidity", default: "1e-3", help: "detector threshold and radius/center tolerance" },
    Key { name: "tol_flux", default: "1e-2", help: "relative tolerance of the volume flux check" },
    Key { name: "tol_sign", default: "1e-8", help: "sign tolerance relative to the natural scale" },
    Key { name: "lower_factor", default: "0.95", help: "min u_nu must reach this fraction of r_i" },
    Key { name: "tol_slope_sbt", default: "0.15", help: "allowed deviation of the SBT slope from 1" },
    Key { name: "tol_slope_hk", default: "0.1", help: "allowed deviation of the HK slope from 1/2" },
    Key { name: "min_r2", default: "0.98", help: "minimum r^2 of the sweep fits" },
    Key { name: "min_gap_slope", default: "0.85", help: "minimum slope of the rho_e - rho_i fit" },
    Key { name: "min_l2_rate", default: "2.5", help: "minimum final L2 convergence rate" },
    Key { name: "min_h1_rate", default: "1.8", help: "minimum final H1 convergence rate" },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Constants,
    Sweep,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Constants => "constants",
            Command::Sweep => "sweep",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub term: f64,
    pub identity: f64,
    pub rigidity: f64,
    pub flux: f64,
    pub sign: f64,
    pub lower_factor: f64,
    pub slope_sbt: f64,
    pub slope_hk: f64,
    pub min_r2: f64,
    pub min_gap_slope: f64,
    pub min_l2_rate: f64,
    pub min_h1_rate: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub cone: SectorCone,
    pub radius: f64,
    pub epsilon: f64,
    pub modes: Vec<(usize, f64)>,
    pub h: f64,
    pub eigen_h: f64,
    pub epsilons: Vec<f64>,
    pub z_policy: ZPolicy,
    pub levels: usize,
    pub threads: usize,
    pub out: PathBuf,
    pub tol: Tolerances,
    /// Resolved textual values, for the manifest.
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Default,
    Env,
    File { path: String, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::Env => write!(f, "${OUT_ENV}"),
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

/// Parses a flat config text into (key, value, line) entries. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_text(text: &str, path: &str) -> Result<Vec<(String, String, usize)>, Vec<String>> {
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            errors.push(format!("{path}:{line}: expected `key = value`, found `{s}`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.iter().any(|key| key.name == k) {
            errors.push(format!("{path}:{line}: unknown key `{k}`"));
            continue;
        }
        if let Some(prev) = seen.insert(k.to_string(), line) {
            errors.push(format!("{path}:{line}: duplicate key `{k}` (first set on line {prev})"));
            continue;
        }
        entries.push((k.to_string(), v.to_string(), line));
    }
    if errors.is_empty() {
        Ok(entries)
    } else {
        Err(errors)
    }
}

/// Layers defaults, the environment, an optional config file and flag
/// overrides, then validates every value.
pub fn resolve(
    file: Option<(&Path, &str)>,
    flags: &[(String, String)],
    env_out: Option<String>,
) -> Result<RunConfig, Vec<String>> {
    let mut values: BTreeMap<String, (String, Origin)> =
        KEYS.iter().map(|k| (k.name.to_string(), (k.default.to_string(), Origin::Default))).collect();
    match env_out {
        Some(dir) if !dir.is_empty() => {
            values.insert("out".into(), (dir, Origin::Env));
        }
        _ => {
            values.insert("out".into(), (DEFAULT_OUT.into(), Origin::Default));
        }
    }
    if let Some((path, text)) = file {
        let p = path.display().to_string();
        for (k, v, line) in parse_text(text, &p)? {
            values.insert(k, (v, Origin::File { path: p.clone(), line }));
        }
    }
    for (k, v) in flags {
        values.insert(k.clone(), (v.clone(), Origin::Flag));
    }
    build(&values)
}

fn build(values: &BTreeMap<String, (String, Origin)>) -> Result<RunConfig, Vec<String>> {
    let mut errors = Vec::new();
    let get = |k: &str| &values[k];
    let mut fail = |k: &str, msg: String| {
        let (v, origin) = get(k);
        let at = match origin {
            Origin::Flag => format!("--{k}"),
            o => o.to_string(),
        };
        errors.push(format!("{at}: `{k} = {v}`: {msg}"));
    };

    let command = match get("command").0.as_str() {
        "solve" => Some(Command::Solve),
        "verify" => Some(Command::Verify),
        "constants" => Some(Command::Constants),
        "sweep" => Some(Command::Sweep),
        "convergence" => Some(Command::Convergence),
        _ => {
            fail("command", "expected solve, verify, constants, sweep or convergence".into());
            None
        }
    };
    let cone = match parse_angle(&get("opening").0) {
        Ok(a) => match SectorCone::new(a) {
            Ok(c) => Some(c),
            Err(e) => {
                fail("opening", e.to_string());
                None
            }
        },
        Err(e) => {
            fail("opening", e);
            None
        }
    };
    let mut positive = |k: &str| -> f64 {
        match get(k).0.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => v,
            Ok(_) => {
                fail(k, "must be a positive number".into());
                f64::NAN
            }
            Err(_) => {
                fail(k, "not a number".into());
                f64::NAN
            }
        }
    };
    let radius = positive("radius");
    let h = positive("h");
    let eigen_h = positive("eigen_h");
    let tol = Tolerances {
        term: positive("tol_term"),
        identity: positive("tol_identity"),
        rigidity: positive("tol_rigidity"),
        flux: positive("tol_flux"),
        sign: positive("tol_sign"),
        lower_factor: positive("lower_factor"),
        slope_sbt: positive("tol_slope_sbt"),
        slope_hk: positive("tol_slope_hk"),
        min_r2: positive("min_r2"),
        min_gap_slope: positive("min_gap_slope"),
        min_l2_rate: positive("min_l2_rate"),
        min_h1_rate: positive("min_h1_rate"),
    };
    let epsilon = match get("epsilon").0.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => v,
        _ => {
            fail("epsilon", "must be a non-negative number".into());
            f64::NAN
        }
    };
    let modes = parse_modes(&get("modes").0).unwrap_or_else(|e| {
        fail("modes", e);
        Vec::new()
    });
    let epsilons = parse_epsilons(&get("epsilons").0).unwrap_or_else(|e| {
        fail("epsilons", e);
        Vec::new()
    });
    let z_policy = get("z_policy").0.parse::<ZPolicy>().map_err(|e| fail("z_policy", e)).ok();
    let mut count = |k: &str| -> usize {
        get(k).0.parse::<usize>().unwrap_or_else(|_| {
            fail(k, "must be a non-negative integer".into());
            0
        })
    };
    let levels = count("levels");
    let threads = count("threads");
    let out = PathBuf::from(&get("out").0);
    if get("out").0.is_empty() {
        fail("out", "empty output directory".into());
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(RunConfig {
        command: command.expect("validated"),
        cone: cone.expect("validated"),
        radius,
        epsilon,
        modes,
        h,
        eigen_h,
        epsilons,
        z_policy: z_policy.expect("validated"),
        levels,
        threads,
        out,
        tol,
        values: values.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect(),
    })
}

/// `a,b,c` or `geom:lo:hi:count`; the result must be strictly increasing
/// and non-negative.
pub fn parse_epsilons(s: &str) -> Result<Vec<f64>, String> {
    let list = if let Some(rest) = s.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err("expected geom:lo:hi:count".into());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower end `{lo}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper end `{hi}`"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}`"))?;
        if !(lo > 0.0 && hi > lo && n >= 1) {
            return Err("geometric grid needs 0 < lo < hi and count ≥ 1".into());
        }
        geometric_grid(lo, hi, n)
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad amplitude `{}`", p.trim())))
            .collect::<Result<Vec<_>, _>>()?
    };
    if list.is_empty() {
        return Err("empty list".into());
    }
    if list.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err("amplitudes must be finite and non-negative".into());
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err("amplitudes must be strictly increasing".into());
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_resolve() {
        let c = resolve(None, &[], None).unwrap();
        assert_eq!(c.command, Command::Verify);
        assert_eq!(c.epsilons.len(), 7);
        assert_eq!(c.out, PathBuf::from(DEFAULT_OUT));
        assert!((c.cone.opening() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn flags_override_file_and_env() {
        let text = "# run\ncommand = sweep\nh = 0.05\n\nout = from-file\n";
        let c = resolve(Some((Path::new("run.cfg"), text)), &flags(&[("h", "0.03")]), Some("env-dir".into()))
            .unwrap();
        assert_eq!(c.command, Command::Sweep);
        assert_eq!(c.h, 0.03);
        assert_eq!(c.out, PathBuf::from("from-file"));
        let c = resolve(None, &[], Some("env-dir".into())).unwrap();
        assert_eq!(c.out, PathBuf::from("env-dir"));
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let text = "command = verify\nbogus = 1\nthis line has no equals\ncommand = solve\n";
        let errs = resolve(Some((Path::new("a.cfg"), text)), &[], None).unwrap_err();
        assert_eq!(errs.len(), 3);
        assert!(errs[0].starts_with("a.cfg:2:"));
        assert!(errs[1].starts_with("a.cfg:3:"));
        assert!(errs[2].starts_with("a.cfg:4:") && errs[2].contains("duplicate"));
    }

    #[test]
    fn value_errors_name_their_origin() {
        let text = "h = -1\n";
        let errs = resolve(Some((Path::new("b.cfg"), text)), &flags(&[("epsilons", "0.02,0.01")]), None)
            .unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("b.cfg:1:") && e.contains("positive")));
        assert!(errs.iter().any(|e| e.starts_with("--epsilons") && e.contains("increasing")));
    }

    #[test]
    fn epsilon_lists() {
        assert_eq!(parse_epsilons("0.01, 0.02,0.04").unwrap(), vec![0.01, 0.02, 0.04]);
        let g = parse_epsilons("geom:0.01:0.08:4").unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.08).abs() < 1e-15);
        assert!(parse_epsilons("0.01,abc").is_err());
        assert!(parse_epsilons("0.02,0.02").is_err());
        assert!(parse_epsilons("-0.1,0.2").is_err());
        assert!(parse_epsilons("geom:0.01:0.08").is_err());
        assert!(parse_epsilons("").is_err());
    }

    #[test]
    fn every_tolerance_must_be_positive() {
        for k in KEYS.iter().filter(|k| k.name.starts_with("tol_") || k.name.starts_with("min_")) {
            let errs = resolve(None, &flags(&[(k.name, "0")]), None).unwrap_err();
            assert_eq!(errs.len(), 1, "{}", k.name);
        }
    }
}
