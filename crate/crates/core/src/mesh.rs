//! Structured polar triangulations of Σ∩Ω with labeled boundary edges and a
//! global P2 node numbering.

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Point, PolarDomain};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeLabel {
    Gamma0,
    /// Wall θ = 0.
    Gamma1A,
    /// Wall θ = ω.
    Gamma1B,
}

impl EdgeLabel {
    pub fn name(self) -> &'static str {
        match self {
            EdgeLabel::Gamma0 => "Gamma0",
            EdgeLabel::Gamma1A => "Gamma1A",
            EdgeLabel::Gamma1B => "Gamma1B",
        }
    }
}

/// Boundary edge oriented with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub label: EdgeLabel,
    /// Curve parameters of the endpoints (Γ0 only).
    pub theta: [f64; 2],
}

/// Global P2 numbering: vertices first, then one node per edge.
#[derive(Debug, Clone)]
pub struct P2Nodes {
    pub coords: Vec<Point>,
    /// Local order: three vertices, then midpoints of edges 01, 12, 20.
    pub elements: Vec<[usize; 6]>,
    /// Element has a Γ0 edge whose midpoint node sits on the curve.
    pub curved: Vec<bool>,
    pub on_gamma0: Vec<bool>,
    /// Bit 0: on wall θ = 0, bit 1: on wall θ = ω.
    pub wall: Vec<u8>,
    /// For each boundary edge: (element, local edge).
    pub boundary_elements: Vec<(usize, usize)>,
    /// Neighbor across local edge i (vertices i, i+1).
    pub neighbors: Vec<[Option<usize>; 3]>,
}

impl P2Nodes {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub domain: PolarDomain,
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    /// Cone vertex.
    pub apex: usize,
    /// Endpoints of Γ0 on the walls θ = 0 and θ = ω.
    pub corners: Option<[usize; 2]>,
    /// Triangles descending from the vertex fan.
    pub in_fan: Vec<bool>,
    pub p2: P2Nodes,
}

fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn angles(a: Point, b: Point, c: Point) -> [f64; 3] {
    let ang = |p: Point, q: Point, r: Point| {
        let u = sub(q, p);
        let v = sub(r, p);
        (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
    };
    [ang(a, b, c), ang(b, c, a), ang(c, a, b)]
}

fn circumdiameter(a: Point, b: Point, c: Point) -> f64 {
    let (la, lb, lc) = (norm(sub(b, c)), norm(sub(c, a)), norm(sub(a, b)));
    la * lb * lc / (2.0 * triangle_area(a, b, c).abs())
}

impl TriMesh {
    /// Mapped structured grid (s, θ) ↦ s·ρ(θ)(cos θ, sin θ).
    ///
    /// `n_radial` counts radial node levels including the cone vertex; the first
    /// ring is a fan of `n_angular` triangles, each further ring contributes
    /// `2·n_angular` triangles.
    pub fn generate(domain: &PolarDomain, n_radial: usize, n_angular: usize) -> Result<Self> {
        if n_radial < 2 || n_angular < 4 {
            return Err(Error::Precondition(format!(
                "mesh needs n_radial ≥ 2 and n_angular ≥ 4, got ({n_radial}, {n_angular})"
            )));
        }
        let full = domain.cone.is_full_plane();
        let w = domain.opening();
        let cols = if full { n_angular } else { n_angular + 1 };
        let theta = |j: usize| w * j as f64 / n_angular as f64;
        let levels = n_radial - 1;
        let node = |i: usize, j: usize| 1 + (i - 1) * cols + if full { j % n_angular } else { j };

        let mut vertices = vec![[0.0, 0.0]];
        for i in 1..=levels {
            let s = i as f64 / levels as f64;
            for j in 0..cols {
                let t = theta(j);
                let r = s * domain.rho(t);
                vertices.push([r * t.cos(), r * t.sin()]);
            }
        }
        let mut triangles = Vec::new();
        let mut in_fan = Vec::new();
        for j in 0..n_angular {
            triangles.push([0, node(1, j), node(1, j + 1)]);
            in_fan.push(true);
        }
        for i in 1..levels {
            for j in 0..n_angular {
                let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                let ac = norm(sub(vertices[a], vertices[c]));
                let bd = norm(sub(vertices[b], vertices[d]));
                if ac <= bd {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
                in_fan.push(false);
                in_fan.push(false);
            }
        }
        let mut boundary = Vec::new();
        for j in 0..n_angular {
            boundary.push(BoundaryEdge {
                a: node(levels, j),
                b: node(levels, j + 1),
                label: EdgeLabel::Gamma0,
                theta: [theta(j), theta(j + 1)],
            });
        }
        let mut corners = None;
        if !full {
            let mut ray = |j: usize, label: EdgeLabel, outward: bool| {
                let mut prev = 0;
                for i in 1..=levels {
                    let cur = node(i, j);
                    let (a, b) = if outward { (prev, cur) } else { (cur, prev) };
                    boundary.push(BoundaryEdge { a, b, label, theta: [0.0; 2] });
                    prev = cur;
                }
            };
            ray(0, EdgeLabel::Gamma1A, true);
            ray(n_angular, EdgeLabel::Gamma1B, false);
            corners = Some([node(levels, 0), node(levels, n_angular)]);
        }
        let mesh = Self::assemble(domain.clone(), vertices, triangles, boundary, 0, corners, in_fan);
        mesh.check_quality(15.0)?;
        Ok(mesh)
    }

    /// Coarse quality mesh refined until the mesh size is at most `h`.
    pub fn with_max_size(domain: &PolarDomain, h: f64) -> Result<Self> {
        let mut m = Self::base(domain)?;
        while m.mesh_size() > h {
            m = m.refine();
        }
        Ok(m)
    }

    /// Coarse mesh whose ring cells have aspect ratio close to one. Openings
    /// below roughly 70° give sliver cells in the first ring and are rejected.
    pub fn base(domain: &PolarDomain) -> Result<Self> {
        let w = domain.opening();
        let n_angular = 4.max((w / (std::f64::consts::PI / 8.0) - 1e-9).ceil() as usize);
        let rmax = (0..=200).map(|i| domain.rho(w * i as f64 / 200.0)).fold(0.0, f64::max);
        let arc = rmax * w / n_angular as f64;
        let levels = 2.max((domain.base_radius / arc).round() as usize);
        Self::generate(domain, levels + 1, n_angular)
    }

    fn assemble(
        domain: PolarDomain,
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
        apex: usize,
        corners: Option<[usize; 2]>,
        in_fan: Vec<bool>,
    ) -> Self {
        let p2 = build_p2(&domain, &vertices, &triangles, &boundary);
        Self { domain, vertices, triangles, boundary, apex, corners, in_fan, p2 }
    }

    /// Positive orientation and minimum angle (degrees) of every triangle.
    pub fn check_quality(&self, min_angle_deg: f64) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.vertices[i]);
            let area = triangle_area(a, b, c);
            if !(area > 0.0) {
                return Err(Error::MeshQuality { cell: t, reason: format!("signed area {area:.3e}") });
            }
            let m = angles(a, b, c).iter().cloned().fold(f64::INFINITY, f64::min).to_degrees();
            if m < min_angle_deg - 1e-9 {
                return Err(Error::MeshQuality {
                    cell: t,
                    reason: format!("minimum angle {m:.2}° below {min_angle_deg}°"),
                });
            }
        }
        Ok(())
    }

    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|tri| {
                let [a, b, c] = tri.map(|i| self.vertices[i]);
                angles(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
            .to_degrees()
    }

    /// Uniform red refinement; new Γ0 nodes are placed on the exact curve.
    pub fn refine(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let p = match e.label {
                EdgeLabel::Gamma0 => self.domain.point(0.5 * (e.theta[0] + e.theta[1])),
                _ => midpoint(self.vertices[e.a], self.vertices[e.b]),
            };
            let m = vertices.len();
            vertices.push(p);
            mid.insert(key(e.a, e.b), m);
            let tm = 0.5 * (e.theta[0] + e.theta[1]);
            let (t0, t1) = match e.label {
                EdgeLabel::Gamma0 => ([e.theta[0], tm], [tm, e.theta[1]]),
                _ => ([0.0; 2], [0.0; 2]),
            };
            boundary.push(BoundaryEdge { a: e.a, b: m, label: e.label, theta: t0 });
            boundary.push(BoundaryEdge { a: m, b: e.b, label: e.label, theta: t1 });
        }
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut in_fan = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let mut m = |p: usize, q: usize| {
                *mid.entry(key(p, q)).or_insert_with(|| {
                    vertices.push(midpoint(self.vertices[p], self.vertices[q]));
                    vertices.len() - 1
                })
            };
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            triangles.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            in_fan.extend_from_slice(&[self.in_fan[t]; 4]);
        }
        Self::assemble(self.domain.clone(), vertices, triangles, boundary, self.apex, self.corners, in_fan)
    }

    /// Maximum circumdiameter.
    pub fn mesh_size(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                circumdiameter(a, b, c)
            })
            .fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                triangle_area(a, b, c)
            })
            .sum()
    }

    pub fn gamma0_polygon_length(&self) -> f64 {
        self.boundary
            .iter()
            .filter(|e| e.label == EdgeLabel::Gamma0)
            .map(|e| norm(sub(self.vertices[e.a], self.vertices[e.b])))
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        self.p2.len() - self.vertices.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    pub fn labels(&self) -> Vec<EdgeLabel> {
        let mut l: Vec<EdgeLabel> = self.boundary.iter().map(|e| e.label).collect();
        l.sort_by_key(|l| *l as u8);
        l.dedup();
        l
    }

    /// Plain-text export: vertex table, triangle table, labeled edge table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "edges {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.label.name());
        }
        s
    }
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn build_p2(
    domain: &PolarDomain,
    vertices: &[Point],
    triangles: &[[usize; 3]],
    boundary: &[BoundaryEdge],
) -> P2Nodes {
    let nv = vertices.len();
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edge_tris: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    let mut coords = vertices.to_vec();
    let mut elements = Vec::with_capacity(triangles.len());
    let mut curve_mid: HashMap<(usize, usize), Point> = HashMap::new();
    for e in boundary.iter().filter(|e| e.label == EdgeLabel::Gamma0) {
        curve_mid.insert(key(e.a, e.b), domain.point(0.5 * (e.theta[0] + e.theta[1])));
    }
    for (t, tri) in triangles.iter().enumerate() {
        let mut el = [tri[0], tri[1], tri[2], 0, 0, 0];
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            let k = key(a, b);
            el[3 + i] = *edge_node.entry(k).or_insert_with(|| {
                coords.push(curve_mid.get(&k).copied().unwrap_or_else(|| midpoint(vertices[a], vertices[b])));
                coords.len() - 1
            });
            edge_tris.entry(k).or_default().push((t, i));
        }
        elements.push(el);
    }
    let mut neighbors = vec![[None; 3]; triangles.len()];
    for tris in edge_tris.values() {
        if let [(t1, i1), (t2, i2)] = tris[..] {
            neighbors[t1][i1] = Some(t2);
            neighbors[t2][i2] = Some(t1);
        }
    }
    let n = coords.len();
    let mut on_gamma0 = vec![false; n];
    let mut wall = vec![0u8; n];
    let mut curved = vec![false; triangles.len()];
    let mut boundary_elements = Vec::with_capacity(boundary.len());
    for e in boundary {
        let k = key(e.a, e.b);
        let (t, i) = edge_tris[&k][0];
        boundary_elements.push((t, i));
        let m = edge_node[&k];
        for v in [e.a, e.b, m] {
            match e.label {
                EdgeLabel::Gamma0 => on_gamma0[v] = true,
                EdgeLabel::Gamma1A => wall[v] |= 1,
                EdgeLabel::Gamma1B => wall[v] |= 2,
            }
        }
        if e.label == EdgeLabel::Gamma0 {
            curved[t] = true;
        }
    }
    debug_assert!(n >= nv);
    P2Nodes { coords, elements, curved, on_gamma0, wall, boundary_elements, neighbors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{measures, SectorCone};
    use std::f64::consts::PI;

    fn quarter() -> PolarDomain {
        PolarDomain::sector(SectorCone::quarter(), 1.0).unwrap()
    }

    #[test]
    fn triangle_count_by_construction() {
        let d = PolarDomain::sector(SectorCone::full(), 1.0).unwrap();
        for (nr, na) in [(2, 8), (4, 16), (5, 16)] {
            let m = TriMesh::generate(&d, nr, na).unwrap();
            assert_eq!(m.triangles.len(), na + 2 * na * (nr - 2));
            assert_eq!(m.in_fan.iter().filter(|&&f| f).count(), na);
            assert_eq!(m.euler_characteristic(), 1);
        }
    }

    #[test]
    fn quarter_disk_4_by_8_fan_is_too_sharp() {
        // 8 fan triangles in a 90° sector have an 11.25° apex angle.
        let err = TriMesh::generate(&quarter(), 4, 8).unwrap_err();
        match err {
            Error::MeshQuality { cell, reason } => {
                assert!(cell < 8, "{cell}");
                assert!(reason.contains("11.25"), "{reason}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn quarter_disk_4_by_4_counts_and_size() {
        let m = TriMesh::generate(&quarter(), 4, 4).unwrap();
        assert_eq!(m.triangles.len(), 4 + 2 * 2 * 4);
        assert_eq!(m.vertices.len(), 1 + 3 * 5);
        assert_eq!(m.euler_characteristic(), 1);
        // largest circumdiameter: an outer-ring cell
        let h = m.mesh_size();
        let mut brute = 0.0f64;
        for t in &m.triangles {
            let [a, b, c] = t.map(|i| m.vertices[i]);
            let (x, y, z) = (norm(sub(b, c)), norm(sub(c, a)), norm(sub(a, b)));
            let s = 0.5 * (x + y + z);
            let area = (s * (s - x) * (s - y) * (s - z)).sqrt();
            brute = brute.max(x * y * z / (2.0 * area));
        }
        assert!((h - brute).abs() < 1e-12);
    }

    #[test]
    fn single_ring_fan_size_scales_with_radius() {
        let d = PolarDomain::sector(SectorCone::full(), 2.0).unwrap();
        let m = TriMesh::generate(&d, 2, 12).unwrap();
        // isosceles with legs R₀ and apex 30°: circumdiameter R₀ / cos 15°
        let expect = 2.0 / (PI / 12.0).cos();
        assert!((m.mesh_size() - expect).abs() < 1e-12);
    }

    #[test]
    fn full_disk_has_no_walls() {
        let d = PolarDomain::sector(SectorCone::full(), 1.0).unwrap();
        let m = TriMesh::generate(&d, 4, 16).unwrap();
        assert_eq!(m.labels(), vec![EdgeLabel::Gamma0]);
        assert!(m.corners.is_none());
    }

    #[test]
    fn half_disk_walls_lie_on_the_x_axis() {
        let d = PolarDomain::sector(SectorCone::half(), 1.0).unwrap();
        let m = TriMesh::generate(&d, 4, 8).unwrap();
        assert_eq!(m.labels().len(), 3);
        for e in m.boundary.iter().filter(|e| e.label != EdgeLabel::Gamma0) {
            let (a, b) = (m.vertices[e.a], m.vertices[e.b]);
            assert!(a[1].abs() < 1e-15 && b[1].abs() < 1e-15);
            // domain on the left: outward normal (dy, −dx)/|·| = (0, −1)
            let l = norm(sub(b, a));
            let n = [(b[1] - a[1]) / l, -(b[0] - a[0]) / l];
            assert!((n[0]).abs() < 1e-15 && (n[1] + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_quadruples_and_halves() {
        let d = PolarDomain::cosine(SectorCone::quarter(), 1.0, 0.05, vec![(2, 1.0)]).unwrap();
        let m0 = TriMesh::base(&d).unwrap();
        let m1 = m0.refine();
        let m2 = m1.refine();
        assert_eq!(m1.triangles.len(), 4 * m0.triangles.len());
        assert_eq!(m2.triangles.len(), 4 * m1.triangles.len());
        assert_eq!(m2.euler_characteristic(), 1);
        let r = m2.mesh_size() / m1.mesh_size();
        assert!((r - 0.5).abs() < 0.025, "{r}");
        m2.check_quality(15.0).unwrap();
        for e in m2.boundary.iter().filter(|e| e.label == EdgeLabel::Gamma0) {
            for (v, t) in [(e.a, e.theta[0]), (e.b, e.theta[1])] {
                let p = m2.vertices[v];
                assert!((norm(p) - d.rho(t)).abs() <= 1e-14);
                let ang = p[1].atan2(p[0]);
                assert!((ang - t).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn base_meshes_meet_quality_on_all_openings() {
        for w in [PI / 2.0, 2.0 * PI / 3.0, PI, 1.5 * PI, 2.0 * PI] {
            let d = PolarDomain::sector(SectorCone::new(w).unwrap(), 1.0).unwrap();
            let m = TriMesh::base(&d).unwrap();
            assert!(m.min_angle_deg() >= 15.0, "w={w} {}", m.min_angle_deg());
        }
    }

    #[test]
    fn area_and_length_converge_quadratically() {
        let d = PolarDomain::cosine(SectorCone::half(), 1.0, 0.05, vec![(2, 1.0)]).unwrap();
        let ex = measures(&d).unwrap();
        let mut m = TriMesh::base(&d).unwrap();
        let mut prev = None;
        for _ in 0..3 {
            m = m.refine();
            let e = ((m.area() - ex.area).abs(), (m.gamma0_polygon_length() - ex.gamma0_length).abs());
            if let Some((ea, el)) = prev {
                let (ea, el): (f64, f64) = (ea, el);
                assert!((ea / e.0).log2() > 1.8 && (el / e.1).log2() > 1.8);
            }
            prev = Some(e);
        }
    }

    #[test]
    fn p2_numbering_and_labels() {
        let m = TriMesh::generate(&quarter(), 3, 4).unwrap();
        let p = &m.p2;
        assert_eq!(p.len(), m.vertices.len() + m.edge_count());
        // Γ0 midpoints lie on the curve
        for (i, &g) in p.on_gamma0.iter().enumerate() {
            if g {
                assert!((norm(p.coords[i]) - 1.0).abs() < 1e-15);
            }
        }
        assert_eq!(p.wall[m.apex], 3);
        let [c0, c1] = m.corners.unwrap();
        assert!(p.on_gamma0[c0] && p.wall[c0] == 1);
        assert!(p.on_gamma0[c1] && p.wall[c1] == 2);
        assert_eq!(p.curved.iter().filter(|&&c| c).count(), 4);
        let text = m.to_text();
        assert!(text.starts_with("vertices 11\n"));
        assert!(text.contains("Gamma1B"));
    }
}
