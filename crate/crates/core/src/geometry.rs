//! Planar sector cones and star-shaped domains whose relative boundary is a
//! polar graph r = ρ(θ).

use crate::error::{Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub type Point = [f64; 2];

const ANGLE_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorCone {
    opening: f64,
}

impl SectorCone {
    pub fn new(opening: f64) -> Result<Self> {
        if !(opening > 0.0 && opening <= TAU + ANGLE_EPS) {
            return Err(Error::InvalidDomain(format!("opening {opening} outside (0, 2π]")));
        }
        Ok(Self { opening: opening.min(TAU) })
    }

    pub fn quarter() -> Self {
        Self { opening: PI / 2.0 }
    }

    pub fn half() -> Self {
        Self { opening: PI }
    }

    pub fn full() -> Self {
        Self { opening: TAU }
    }

    pub fn opening(&self) -> f64 {
        self.opening
    }

    /// Σ = ℝ²: no walls.
    pub fn is_full_plane(&self) -> bool {
        (self.opening - TAU).abs() < ANGLE_EPS
    }

    pub fn is_convex(&self) -> bool {
        self.opening <= PI + ANGLE_EPS || self.is_full_plane()
    }

    /// Outward unit normals of the walls θ = 0 and θ = ω (empty for ℝ²).
    pub fn wall_normals(&self) -> Vec<Point> {
        if self.is_full_plane() {
            return Vec::new();
        }
        let w = self.opening;
        vec![[0.0, -1.0], [-w.sin(), w.cos()]]
    }

    /// Dimension of the span of the wall normals.
    pub fn normal_span_dim(&self) -> usize {
        if self.is_full_plane() {
            0
        } else if (self.opening - PI).abs() < ANGLE_EPS {
            1
        } else {
            2
        }
    }

    /// Orthonormal basis of the span of the wall normals.
    pub fn span_basis(&self) -> Vec<Point> {
        match self.normal_span_dim() {
            0 => Vec::new(),
            1 => vec![[0.0, -1.0]],
            _ => vec![[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Polar angle of `p` mapped into [0, 2π).
    pub fn angle_of(p: Point) -> f64 {
        let a = p[1].atan2(p[0]);
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }

    /// Whether `p` lies in the closed cone, with angular slack `tol`.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        if self.is_full_plane() || norm(p) <= tol {
            return true;
        }
        let a = Self::angle_of(p);
        a <= self.opening + tol || a >= TAU - tol
    }
}

/// The function f in ρ(θ) = R₀(1 + ε f(θ)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// Pairs (m, a_m) of f = Σ a_m cos(mπθ/ω).
    Cosine(Vec<(usize, f64)>),
    /// Coefficients c_j of f = Σ c_j θ^j; generally not orthogonal to the walls.
    Polynomial(Vec<f64>),
}

impl Shape {
    fn eval(&self, theta: f64, opening: f64) -> [f64; 3] {
        match self {
            Shape::Cosine(modes) => {
                let mut out = [0.0; 3];
                for &(m, a) in modes {
                    let k = m as f64 * PI / opening;
                    let (s, c) = (k * theta).sin_cos();
                    out[0] += a * c;
                    out[1] -= a * k * s;
                    out[2] -= a * k * k * c;
                }
                out
            }
            Shape::Polynomial(c) => {
                let mut out = [0.0; 3];
                for &cj in c.iter().rev() {
                    out[2] = out[2] * theta + 2.0 * out[1];
                    out[1] = out[1] * theta + out[0];
                    out[0] = out[0] * theta + cj;
                }
                out
            }
        }
    }

    fn max_frequency(&self) -> usize {
        match self {
            Shape::Cosine(modes) => modes.iter().map(|&(m, _)| m).max().unwrap_or(0),
            Shape::Polynomial(c) => c.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarDomain {
    pub cone: SectorCone,
    pub base_radius: f64,
    pub amplitude: f64,
    pub shape: Shape,
}

impl PolarDomain {
    pub fn new(cone: SectorCone, base_radius: f64, amplitude: f64, shape: Shape) -> Result<Self> {
        if !(base_radius > 0.0 && base_radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("base radius {base_radius}")));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidDomain(format!("amplitude {amplitude}")));
        }
        if cone.is_full_plane() && amplitude > 0.0 {
            match &shape {
                Shape::Cosine(modes) => {
                    if let Some(&(m, _)) = modes.iter().find(|&&(m, a)| m % 2 == 1 && a != 0.0) {
                        return Err(Error::InvalidDomain(format!(
                            "mode {m} is not 2π-periodic on the full plane"
                        )));
                    }
                }
                Shape::Polynomial(c) => {
                    if c.iter().skip(1).any(|&v| v != 0.0) {
                        return Err(Error::InvalidDomain(
                            "polynomial shapes are not periodic on the full plane".into(),
                        ));
                    }
                }
            }
        }
        let d = Self { cone, base_radius, amplitude, shape };
        let n = 4000.max(64 * d.shape.max_frequency());
        for i in 0..=n {
            let t = d.cone.opening * i as f64 / n as f64;
            let r = d.rho(t);
            if !(r > 0.0) {
                return Err(Error::InvalidDomain(format!("ρ({t:.6}) = {r} is not positive")));
            }
        }
        Ok(d)
    }

    /// Unperturbed sector of radius R₀.
    pub fn sector(cone: SectorCone, base_radius: f64) -> Result<Self> {
        Self::new(cone, base_radius, 0.0, Shape::Cosine(Vec::new()))
    }

    pub fn cosine(cone: SectorCone, base_radius: f64, amplitude: f64, modes: Vec<(usize, f64)>) -> Result<Self> {
        Self::new(cone, base_radius, amplitude, Shape::Cosine(modes))
    }

    pub fn opening(&self) -> f64 {
        self.cone.opening
    }

    /// [ρ, ρ′, ρ″] at θ.
    pub fn rho_derivs(&self, theta: f64) -> [f64; 3] {
        let f = self.shape.eval(theta, self.cone.opening);
        let s = self.base_radius * self.amplitude;
        [self.base_radius + s * f[0], s * f[1], s * f[2]]
    }

    pub fn rho(&self, theta: f64) -> f64 {
        self.rho_derivs(theta)[0]
    }

    pub fn point(&self, theta: f64) -> Point {
        let r = self.rho(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    /// dx/dθ = ρ′ e_r + ρ e_θ.
    pub fn tangent(&self, theta: f64) -> Point {
        let [r, rp, _] = self.rho_derivs(theta);
        let (s, c) = theta.sin_cos();
        [rp * c - r * s, rp * s + r * c]
    }

    pub fn speed(&self, theta: f64) -> f64 {
        let [r, rp, _] = self.rho_derivs(theta);
        r.hypot(rp)
    }

    /// Outward unit normal (ρ e_r − ρ′ e_θ)/√(ρ² + ρ′²).
    pub fn normal(&self, theta: f64) -> Point {
        let [r, rp, _] = self.rho_derivs(theta);
        let (s, c) = theta.sin_cos();
        let l = r.hypot(rp);
        [(r * c + rp * s) / l, (r * s - rp * c) / l]
    }

    /// Signed curvature of Γ0, positive on circles.
    pub fn curvature(&self, theta: f64) -> f64 {
        let [r, rp, rpp] = self.rho_derivs(theta);
        (r * r + 2.0 * rp * rp - r * rpp) / (r * r + rp * rp).powf(1.5)
    }

    /// Whether Γ̄0 meets the walls orthogonally (ρ′ = 0 at both ends).
    pub fn is_orthogonal(&self) -> bool {
        if self.cone.is_full_plane() {
            return true;
        }
        let tol = 1e-12 * self.base_radius;
        self.rho_derivs(0.0)[1].abs() <= tol && self.rho_derivs(self.cone.opening)[1].abs() <= tol
    }

    /// Endpoints of Γ0 on the walls θ = 0 and θ = ω (none for ℝ²).
    pub fn corners(&self) -> Option<[Point; 2]> {
        if self.cone.is_full_plane() {
            None
        } else {
            Some([self.point(0.0), self.point(self.cone.opening)])
        }
    }

    fn panels(&self) -> usize {
        4.max(2 * self.shape.max_frequency())
    }

    /// ∫_{Γ0} g(θ) dS by adaptive quadrature in θ.
    pub fn boundary_integral<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        quad::integrate_panels(|t| g(t) * self.speed(t), 0.0, self.cone.opening, self.panels(), 1e-12)
    }

    /// Whether `p` lies in the closure of Σ∩Ω, with slack `tol`.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        if !self.cone.contains(p, tol / self.base_radius) {
            return false;
        }
        let a = SectorCone::angle_of(p).min(self.cone.opening);
        norm(p) <= self.rho(a) + tol
    }

    /// Distance from `p` to Γ̄0.
    pub fn distance_to_gamma0(&self, p: Point) -> f64 {
        let n = 720;
        let w = self.cone.opening;
        let d = |t: f64| norm(sub(self.point(t), p));
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let t = w * i as f64 / n as f64;
            let v = d(t);
            if v < best.0 {
                best = (v, t);
            }
        }
        let step = w / n as f64;
        let (lo, hi) = if self.cone.is_full_plane() {
            (best.1 - step, best.1 + step)
        } else {
            ((best.1 - step).max(0.0), (best.1 + step).min(w))
        };
        golden_min(d, lo, hi).min(best.0)
    }

    /// Distance from `p` to ∂(Σ∩Ω) = Γ̄0 ∪ Γ̄1.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let mut d = self.distance_to_gamma0(p);
        if let Some(corners) = self.corners() {
            for c in corners {
                d = d.min(segment_distance(p, [0.0, 0.0], c));
            }
        }
        d
    }

    /// Plain-text key = value record.
    pub fn to_record(&self) -> String {
        let mut s = format!(
            "opening = {:.17e}\nbase_radius = {:.17e}\namplitude = {:.17e}\n",
            self.cone.opening, self.base_radius, self.amplitude
        );
        match &self.shape {
            Shape::Cosine(modes) => {
                let parts: Vec<String> = modes.iter().map(|(m, a)| format!("{m}:{a:.17e}")).collect();
                s.push_str(&format!("cosine_modes = {}\n", parts.join(",")));
            }
            Shape::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|a| format!("{a:.17e}")).collect();
                s.push_str(&format!("polynomial = {}\n", parts.join(",")));
            }
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut opening = None;
        let mut base_radius = 1.0;
        let mut amplitude = 0.0;
        let mut shape = Shape::Cosine(Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::InvalidDomain(format!("line {}: {msg}", lineno + 1));
            let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "opening" => opening = Some(parse_angle(v).map_err(|e| bad(&e))?),
                "base_radius" => base_radius = v.parse().map_err(|_| bad("bad number"))?,
                "amplitude" => amplitude = v.parse().map_err(|_| bad("bad number"))?,
                "cosine_modes" => shape = Shape::Cosine(parse_modes(v).map_err(|e| bad(&e))?),
                "polynomial" => {
                    let c: std::result::Result<Vec<f64>, _> =
                        v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect();
                    shape = Shape::Polynomial(c.map_err(|_| bad("bad coefficient"))?);
                }
                _ => return Err(bad(&format!("unknown key {k}"))),
            }
        }
        let opening = opening.ok_or_else(|| Error::InvalidDomain("missing opening".into()))?;
        Self::new(SectorCone::new(opening)?, base_radius, amplitude, shape)
    }
}

/// Parses angles like `1.5708`, `pi`, `pi/2`, `2pi`, `3*pi/4`.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim().to_ascii_lowercase().replace(' ', "");
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().map_err(|_| format!("bad angle {s}"))?),
        None => (s.clone(), 1.0),
    };
    let coef = num
        .strip_suffix("pi")
        .ok_or_else(|| format!("bad angle {s}"))?
        .trim_end_matches('*');
    let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| format!("bad angle {s}"))? };
    Ok(c * PI / den)
}

/// Parses `m:a,m:a` cosine mode lists.
pub fn parse_modes(s: &str) -> std::result::Result<Vec<(usize, f64)>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (m, a) = p.split_once(':').ok_or_else(|| format!("bad mode {p}"))?;
            Ok((
                m.trim().parse().map_err(|_| format!("bad mode index {m}"))?,
                a.trim().parse().map_err(|_| format!("bad coefficient {a}"))?,
            ))
        })
        .collect()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

pub fn normal_span_dim(cone: &SectorCone) -> usize {
    cone.normal_span_dim()
}

pub fn curvature(domain: &PolarDomain, theta: f64) -> f64 {
    domain.curvature(theta)
}

/// Σ over the two endpoints of Γ0 of ⟨x − z, n_x⟩, n_x the unit tangent
/// pointing out of Γ0.
pub fn corner_conormal_sum(domain: &PolarDomain, z: Point) -> f64 {
    if domain.cone.is_full_plane() {
        return 0.0;
    }
    let w = domain.opening();
    let mut s = 0.0;
    for (theta, sign) in [(0.0, -1.0), (w, 1.0)] {
        let t = domain.tangent(theta);
        let l = norm(t);
        let n = [sign * t[0] / l, sign * t[1] / l];
        s += dot(sub(domain.point(theta), z), n);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub area: f64,
    pub gamma0_length: f64,
    pub diameter: f64,
}

pub fn measures(domain: &PolarDomain) -> Result<Measures> {
    let w = domain.opening();
    let p = domain.panels();
    let area = quad::integrate_panels(|t| 0.5 * domain.rho(t).powi(2), 0.0, w, p, 1e-12)?;
    let gamma0_length = quad::integrate_panels(|t| domain.speed(t), 0.0, w, p, 1e-12)?;
    Ok(Measures { area, gamma0_length, diameter: diameter(domain) })
}

/// Maximum pairwise distance over 1001 samples of Γ̄0 plus the vertex, polished
/// by coordinate-wise golden-section search around the best pair.
pub fn diameter(domain: &PolarDomain) -> f64 {
    let n = 1000;
    let w = domain.opening();
    let ts: Vec<f64> = (0..=n).map(|i| w * i as f64 / n as f64).collect();
    let pts: Vec<Point> = ts.iter().map(|&t| domain.point(t)).collect();
    let mut best = (0.0, 0usize, None::<usize>);
    for i in 0..pts.len() {
        if !domain.cone.is_full_plane() {
            let d = norm(pts[i]);
            if d > best.0 {
                best = (d, i, None);
            }
        }
        for j in (i + 1)..pts.len() {
            let d = norm(sub(pts[i], pts[j]));
            if d > best.0 {
                best = (d, i, Some(j));
            }
        }
    }
    let step = w / n as f64;
    let clamp = |t: f64| if domain.cone.is_full_plane() { t } else { t.clamp(0.0, w) };
    let (mut ti, mut tj) = (ts[best.1], best.2.map(|j| ts[j]));
    let mut d = best.0;
    for _ in 0..4 {
        let other = tj.map(|t| domain.point(t)).unwrap_or([0.0, 0.0]);
        ti = golden_argmax(|t| norm(sub(domain.point(t), other)), clamp(ti - step), clamp(ti + step));
        if let Some(t) = tj {
            let pi = domain.point(ti);
            tj = Some(golden_argmax(|s| norm(sub(domain.point(s), pi)), clamp(t - step), clamp(t + step)));
        }
        let other = tj.map(|t| domain.point(t)).unwrap_or([0.0, 0.0]);
        d = d.max(norm(sub(domain.point(ti), other)));
    }
    d
}

fn golden_argmax<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// R = N|Σ∩Ω|/|Γ0| with N = 2.
pub fn reference_radius(area: f64, gamma0_length: f64) -> f64 {
    2.0 * area / gamma0_length
}

/// H₀(z) = 1/R − (corner sum)/(N(N−1)|Σ∩Ω|) with N = 2.
pub fn reference_curvature(domain: &PolarDomain, m: &Measures, z: Point) -> f64 {
    1.0 / reference_radius(m.area, m.gamma0_length) - corner_conormal_sum(domain, z) / (2.0 * m.area)
}

/// Sub-intervals of [0, ω] where the curvature of Γ0 is ≤ 0.
pub fn nonconvex_ranges(domain: &PolarDomain) -> Vec<(f64, f64)> {
    let n = 4000.max(64 * domain.shape.max_frequency());
    let w = domain.opening();
    let t = |i: usize| w * i as f64 / n as f64;
    let bad = |x: f64| domain.curvature(x) <= 0.0;
    let root = |mut a: f64, mut b: f64| {
        // a and b straddle the sign change; return the crossing
        let fa = bad(a);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if bad(m) == fa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..=n {
        match (bad(t(i)), start) {
            (true, None) => start = Some(if i == 0 { 0.0 } else { root(t(i - 1), t(i)) }),
            (false, Some(s)) => {
                out.push((s, root(t(i - 1), t(i))));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, w));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereRadii {
    pub interior: f64,
    pub exterior: f64,
    /// False when the interior condition fails above the floor; interior is then 0.
    pub interior_found: bool,
    /// True when the exterior radius hit the 10·R₀ cap.
    pub exterior_capped: bool,
    /// Number of boundary samples; the estimate resolves the boundary at ω/samples.
    pub samples: usize,
}

/// Relative interior/exterior sphere radii by bisection on r.
pub fn relative_sphere_radii(domain: &PolarDomain) -> Result<SphereRadii> {
    relative_sphere_radii_with(domain, 1000)
}

pub fn relative_sphere_radii_with(domain: &PolarDomain, samples: usize) -> Result<SphereRadii> {
    if samples < 8 {
        return Err(Error::InvalidDomain("too few boundary samples".into()));
    }
    let w = domain.opening();
    let n = if domain.cone.is_full_plane() { samples } else { samples + 1 };
    let ts: Vec<f64> = (0..n).map(|i| w * i as f64 / samples as f64).collect();
    let xs: Vec<Point> = ts.iter().map(|&t| domain.point(t)).collect();
    let nus: Vec<Point> = ts.iter().map(|&t| domain.normal(t)).collect();
    let r0 = domain.base_radius;
    let slack = 1e-13 * r0;

    let touches_only_at = |c: Point, r: f64, j: usize| {
        xs.iter().enumerate().all(|(k, &x)| k == j || norm(sub(x, c)) >= r - slack)
    };
    let interior_ok = |r: f64| {
        (0..n).all(|j| {
            let c = [xs[j][0] - r * nus[j][0], xs[j][1] - r * nus[j][1]];
            domain.contains(c, slack) && touches_only_at(c, r, j)
        })
    };
    let exterior_ok = |r: f64| {
        (0..n).all(|j| {
            let c = [xs[j][0] + r * nus[j][0], xs[j][1] + r * nus[j][1]];
            let outside = if norm(c) <= slack {
                false
            } else {
                let a = SectorCone::angle_of(c).min(w);
                domain.cone.contains(c, 1e-10) && norm(c) >= domain.rho(a) - slack
            };
            outside && touches_only_at(c, r, j)
        })
    };
    let (floor, cap) = (1e-6 * r0, 10.0 * r0);
    let bisect = |ok: &dyn Fn(f64) -> bool| -> (f64, bool, bool) {
        if ok(cap) {
            return (cap, true, true);
        }
        if !ok(floor) {
            return (0.0, false, false);
        }
        let (mut lo, mut hi) = (floor, cap);
        while hi - lo > 1e-10 * r0 {
            let m = 0.5 * (lo + hi);
            if ok(m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        (lo, true, false)
    };
    let (interior, interior_found, _) = bisect(&interior_ok);
    let (exterior, _, exterior_capped) = bisect(&exterior_ok);
    Ok(SphereRadii { interior, exterior, interior_found, exterior_capped, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub area: f64,
    pub gamma0_length: f64,
    pub diameter: f64,
    pub r_interior: f64,
    pub r_exterior: f64,
    pub reference_radius: f64,
    pub k: usize,
}

pub fn geometry_report(domain: &PolarDomain) -> Result<GeometryReport> {
    let m = measures(domain)?;
    let s = relative_sphere_radii(domain)?;
    Ok(GeometryReport {
        area: m.area,
        gamma0_length: m.gamma0_length,
        diameter: m.diameter,
        r_interior: s.interior,
        r_exterior: s.exterior,
        reference_radius: reference_radius(m.area, m.gamma0_length),
        k: domain.cone.normal_span_dim(),
    })
}
