//! Closed-form constants and bounds (Hopf, gradient, max(−u), annulus
//! torsion) and the assembly of the stability constants Ĉ from the numeric
//! Poincaré and trace constants.

use crate::error::{Error, Result};
use crate::fem::assembly::assemble;
use crate::fem::eigen::{
    neumann_poincare_with, trace_constant_with, vector_poincare_with, wall_trace_constant, zero_trace_poincare_with,
};
use crate::mesh::TriMesh;
use serde::{Deserialize, Serialize};

/// Hopf lower bound m̲ = r̲ᵢ on u_ν; None when no interior sphere radius exists.
pub fn hopf_bound(r_interior: f64) -> Option<f64> {
    (r_interior > 0.0 && r_interior.is_finite()).then_some(r_interior)
}

/// Upper bound on |∇u|: 6r(1 + d/r)⁴ for N = 2, (3N/2)r(1 + d/r)^N otherwise.
pub fn gradient_bound(n: usize, r_exterior: f64, diameter: f64) -> f64 {
    let base = 1.0 + diameter / r_exterior;
    if n == 2 {
        6.0 * r_exterior * base.powi(4)
    } else {
        1.5 * n as f64 * r_exterior * base.powi(n as i32)
    }
}

/// Torsion function of the annulus r_in < |x| < r_out vanishing on both
/// spheres, and its radial derivative, at `radius`.
pub fn annulus_torsion(n: usize, r_in: f64, r_out: f64, radius: f64) -> Result<(f64, f64)> {
    if n < 2 || !(0.0 < r_in && r_in < r_out) {
        return Err(Error::Precondition(format!("annulus needs N >= 2 and 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    if !(r_in <= radius && radius <= r_out) {
        return Err(Error::Precondition(format!("radius {radius} outside [{r_in}, {r_out}]")));
    }
    let kappa = r_in / r_out;
    let big = r_out * r_out;
    if n == 2 {
        let a = 0.5 * big * (1.0 - kappa * kappa) / kappa.ln();
        Ok((0.5 * radius * radius + a * (radius / r_in).ln() - 0.5 * r_in * r_in, radius + a / radius))
    } else {
        let m = n as i32 - 2;
        let c = 0.5 * big / (1.0 - kappa.powi(m));
        let w = 0.5 * radius * radius
            + c * ((1.0 - kappa * kappa) * (radius / r_in).powi(-m) + kappa.powi(n as i32) - 1.0);
        let dw = radius - c * (1.0 - kappa * kappa) * m as f64 * (radius / r_in).powi(-m) / radius;
        Ok((w, dw))
    }
}

/// Radius of the sphere of critical points of the annulus torsion function.
pub fn critical_radius(n: usize, r_in: f64, r_out: f64) -> f64 {
    let kappa = r_in / r_out;
    let big = r_out * r_out;
    if n == 2 {
        (big * (1.0 - kappa * kappa) / (2.0 * (1.0 / kappa).ln())).sqrt()
    } else {
        let m = n as i32 - 2;
        let zn = 0.5 * m as f64 * r_in.powi(m) * big * (1.0 - kappa * kappa) / (1.0 - kappa.powi(m));
        zn.powf(1.0 / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxUBounds {
    /// d²/2
    pub bound_ii: f64,
    /// −w(𝓩) for the annulus with inner radius 1.
    pub bound_i: f64,
    pub outer_radius: f64,
    pub critical_radius: f64,
}

/// Both upper bounds on max(−u) in terms of the dimension and the diameter.
pub fn max_u_bounds(n: usize, diameter: f64) -> Result<MaxUBounds> {
    if !(diameter >= 0.0) {
        return Err(Error::Precondition(format!("diameter must be non-negative, got {diameter}")));
    }
    let outer = if n == 2 { 2.0 * (1.0 + diameter).powi(2) } else { 3f64.sqrt() * (1.0 + diameter).powf(n as f64 / 2.0) };
    let z = critical_radius(n, 1.0, outer);
    let (w, _) = annulus_torsion(n, 1.0, outer, z)?;
    Ok(MaxUBounds { bound_ii: 0.5 * diameter * diameter, bound_i: -w, outer_radius: outer, critical_radius: z })
}

/// Λ₂(k) for N = 2: μ⁻¹ when k = 0, η⁻¹ when k = 2, the larger of the two when k = 1.
pub fn lambda_combiner(k: usize, mu2_inv: Option<f64>, eta2_inv: Option<f64>) -> Result<f64> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| Error::Precondition(format!("Λ₂({k}) needs {what}")));
    match k {
        0 => need(mu2_inv, "μ₂⁻¹"),
        2 => need(eta2_inv, "η₂⁻¹"),
        1 => Ok(need(mu2_inv, "μ₂⁻¹")?.max(need(eta2_inv, "η₂⁻¹")?)),
        _ => Err(Error::Precondition(format!("k = {k} is not a planar normal span dimension"))),
    }
}

/// Heintze–Karcher stability constants: √(N−1)λ₂²(1 + Λ₂²) and, given m̲ > 0
/// and max(−u), (√(N−1)/m̲)(NΛ₂² + 2max(−u)).
pub fn hk_stability_constant(
    n: usize,
    lambda2: Option<f64>,
    big_lambda: f64,
    m_lower: Option<f64>,
    max_neg_u: Option<f64>,
) -> (Option<f64>, Option<f64>) {
    let s = ((n - 1) as f64).sqrt();
    let general = lambda2.map(|l| s * l * l * (1.0 + big_lambda * big_lambda));
    let with_m = match (m_lower, max_neg_u) {
        (Some(m), Some(mu)) if m > 0.0 => Some(s / m * (n as f64 * big_lambda * big_lambda + 2.0 * mu)),
        _ => None,
    };
    (general, with_m)
}

/// Trace constant C = λ₂√(1 + Λ₂²).
pub fn sbt_trace_constant(lambda2: f64, big_lambda: f64) -> f64 {
    lambda2 * (1.0 + big_lambda * big_lambda).sqrt()
}

/// C̃ = (1/m̲)(NΛ₂² + 2max(−u)).
pub fn sbt_trace_constant_with_m(n: usize, big_lambda: f64, m_lower: f64, max_neg_u: f64) -> Option<f64> {
    (m_lower > 0.0).then(|| (n as f64 * big_lambda * big_lambda + 2.0 * max_neg_u) / m_lower)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbtConstant {
    pub c_bar: f64,
    pub c_hat: f64,
}

/// C̄ = max{N−1, ‖u_ν‖∞}²(C + 3) and Ĉ = max{C, 1}·C̄.
pub fn sbt_stability_constant(n: usize, trace_c: f64, unu_max: f64) -> SbtConstant {
    let c_bar = ((n - 1) as f64).max(unu_max).powi(2) * (trace_c + 3.0);
    SbtConstant { c_bar, c_hat: trace_c.max(1.0) * c_bar }
}

/// μ⁻¹ + (|G|/|A|)^{1/2} λ (1 + μ⁻²)^{1/2} for functions vanishing on A.
pub fn zero_trace_bound(mu2_inv: f64, lambda2: f64, area: f64, gamma_measure: f64) -> f64 {
    mu2_inv + (area / gamma_measure).sqrt() * lambda2 * (1.0 + mu2_inv * mu2_inv).sqrt()
}

/// Numeric Poincaré and trace constants of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConstants {
    pub k: usize,
    /// λ₂: trace constant into L²(Γ0).
    pub lambda2: f64,
    pub mu2_inv: f64,
    pub eta2_inv: Option<f64>,
    /// Trace constant into L²(Γ1).
    pub wall_lambda: Option<f64>,
    /// Poincaré constant of scalar functions vanishing on Γ1.
    pub zero_trace_inv: Option<f64>,
    pub mesh_size: f64,
}

pub fn eigen_constants(mesh: &TriMesh) -> Result<EigenConstants> {
    let asm = assemble(mesh);
    let k = mesh.domain.cone.normal_span_dim();
    let walls = !mesh.domain.cone.is_full_plane();
    let lambda2 = trace_constant_with(&asm)?.constant();
    let mu2_inv = 1.0 / neumann_poincare_with(&asm)?.constant();
    let eta2_inv = if k > 0 { Some(1.0 / vector_poincare_with(mesh, &asm, k)?.constant()) } else { None };
    let (wall_lambda, zero_trace_inv) = if walls {
        (
            Some(wall_trace_constant(mesh, &asm)?.constant()),
            Some(1.0 / zero_trace_poincare_with(mesh, &asm)?.constant()),
        )
    } else {
        (None, None)
    };
    Ok(EigenConstants { k, lambda2, mu2_inv, eta2_inv, wall_lambda, zero_trace_inv, mesh_size: mesh.mesh_size() })
}

/// Geometric and measured inputs of a constants report. Measured values are
/// optional; without them the solve-free bounds stand in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsInputs {
    pub n: usize,
    pub r_interior: f64,
    pub r_exterior: f64,
    pub diameter: f64,
    pub area: f64,
    pub gamma1_length: f64,
    pub eigen: EigenConstants,
    /// Measured min u_ν on Γ0.
    pub m_lower: Option<f64>,
    pub max_neg_u: Option<f64>,
    pub unu_max: Option<f64>,
    /// With the center taken as the mean of x − ∇u in every coordinate, Λ₂
    /// is replaced by μ₂⁻¹.
    pub alternative_center: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub k: usize,
    pub m_hopf: Option<f64>,
    pub grad_bound: f64,
    pub max_u_bound_ii: f64,
    pub max_u_bound_i: f64,
    pub lambda2: f64,
    pub mu2_inv: f64,
    pub eta2_inv: Option<f64>,
    pub big_lambda: f64,
    pub c_hk: f64,
    pub c_hk_m: Option<f64>,
    pub c_sbt: f64,
    pub c_sbt_m: Option<f64>,
    pub zero_trace_bound: Option<f64>,
    pub zero_trace_inv: Option<f64>,
    /// max(−u) and ‖u_ν‖∞ that entered the constants.
    pub max_neg_u_used: f64,
    pub unu_max_used: f64,
}

impl ConstantsReport {
    /// The smaller of the available HK constants.
    pub fn c_hk_best(&self) -> f64 {
        self.c_hk_m.map_or(self.c_hk, |c| c.min(self.c_hk))
    }

    pub fn c_sbt_best(&self) -> f64 {
        self.c_sbt_m.map_or(self.c_sbt, |c| c.min(self.c_sbt))
    }
}

pub fn constants_report(input: &ConstantsInputs) -> Result<ConstantsReport> {
    let n = input.n;
    let e = &input.eigen;
    let mub = max_u_bounds(n, input.diameter)?;
    let grad = gradient_bound(n, input.r_exterior, input.diameter);
    let max_neg_u = input.max_neg_u.unwrap_or(mub.bound_i.min(mub.bound_ii));
    let unu_max = input.unu_max.unwrap_or(grad);
    let big_lambda =
        if input.alternative_center { e.mu2_inv } else { lambda_combiner(e.k, Some(e.mu2_inv), e.eta2_inv)? };
    let m_lower = input.m_lower.filter(|m| *m > 0.0);
    let (c_hk, c_hk_m) = hk_stability_constant(n, Some(e.lambda2), big_lambda, m_lower, Some(max_neg_u));
    let c_sbt = sbt_stability_constant(n, sbt_trace_constant(e.lambda2, big_lambda), unu_max).c_hat;
    let c_sbt_m = m_lower
        .and_then(|m| sbt_trace_constant_with_m(n, big_lambda, m, max_neg_u))
        .map(|c| sbt_stability_constant(n, c, unu_max).c_hat);
    let zero_trace = match e.wall_lambda {
        Some(l) if input.gamma1_length > 0.0 => Some(zero_trace_bound(e.mu2_inv, l, input.area, input.gamma1_length)),
        _ => None,
    };
    Ok(ConstantsReport {
        k: e.k,
        m_hopf: hopf_bound(input.r_interior),
        grad_bound: grad,
        max_u_bound_ii: mub.bound_ii,
        max_u_bound_i: mub.bound_i,
        lambda2: e.lambda2,
        mu2_inv: e.mu2_inv,
        eta2_inv: e.eta2_inv,
        big_lambda,
        c_hk: c_hk.expect("λ₂ is always present"),
        c_hk_m,
        c_sbt,
        c_sbt_m,
        zero_trace_bound: zero_trace,
        zero_trace_inv: e.zero_trace_inv,
        max_neg_u_used: max_neg_u,
        unu_max_used: unu_max,
    })
}
