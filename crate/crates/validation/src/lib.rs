//! Independent oracles and report plumbing for the acceptance suite.

/// Outcome of one acceptance criterion with its sub-check lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Default for Verdict {
    fn default() -> Self {
        Verdict { passed: true, lines: Vec::new() }
    }
}

impl Verdict {
    pub fn check(&mut self, ok: bool, what: String) {
        self.passed &= ok;
        self.lines.push(format!("    [{}] {what}", if ok { "ok" } else { "FAIL" }));
    }

    pub fn note(&mut self, what: String) {
        self.lines.push(format!("    [--] {what}"));
    }
}

/// θ = v(1)/v′(1) for the mode v(r)cos(mθ) of Δv = v on the unit disk, by
/// RK4 shooting of v″ + v′/r − (m²/r² + 1)v = 0 from the regular start
/// v ≈ rᵐ(1 + r²/(4(m+1))).
pub fn radial_trace_ratio(m: usize, steps: usize) -> f64 {
    let mf = m as f64;
    let f = |r: f64, y: [f64; 2]| [y[1], (mf * mf / (r * r) + 1.0) * y[0] - y[1] / r];
    let r0: f64 = 1e-3;
    let c = 1.0 / (4.0 * (mf + 1.0));
    let mut y = [r0.powi(m as i32) * (1.0 + c * r0 * r0), {
        let a = if m == 0 { 0.0 } else { mf * r0.powi(m as i32 - 1) };
        a + c * (mf + 2.0) * r0.powi(m as i32 + 1)
    }];
    let dr = (1.0 - r0) / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = f(r, y);
        let k2 = f(r + dr / 2.0, [y[0] + dr / 2.0 * k1[0], y[1] + dr / 2.0 * k1[1]]);
        let k3 = f(r + dr / 2.0, [y[0] + dr / 2.0 * k2[0], y[1] + dr / 2.0 * k2[1]]);
        let k4 = f(r + dr, [y[0] + dr * k3[0], y[1] + dr * k3[1]]);
        for i in 0..2 {
            y[i] += dr / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r += dr;
    }
    y[0] / y[1]
}

/// Largest trace eigenvalue θ = sup ∫_{∂B}v² / ∫_B(|∇v|² + v²) of the unit
/// disk, over the first few angular modes.
pub fn unit_disk_trace_oracle() -> f64 {
    (0..6).map(|m| radial_trace_ratio(m, 20_000)).fold(0.0, f64::max)
}

/// Modified Bessel function Iₘ(x) by its power series.
pub fn bessel_i(m: usize, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(m as i32) / (1..=m).map(|k| k as f64).product::<f64>();
    let mut sum = term;
    for k in 1..60 {
        term *= 0.25 * x * x / (k as f64 * (k + m) as f64);
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shooting_matches_bessel_ratios() {
        // Iₘ′(1) = Iₘ₊₁(1) + m·Iₘ(1)
        for m in 0..4 {
            let exact = bessel_i(m, 1.0) / (bessel_i(m + 1, 1.0) + m as f64 * bessel_i(m, 1.0));
            let shot = radial_trace_ratio(m, 20_000);
            assert!((shot - exact).abs() < 1e-8 * exact, "m={m}: {shot} vs {exact}");
        }
    }

    #[test]
    fn radial_mode_dominates() {
        let theta = unit_disk_trace_oracle();
        assert!((theta - radial_trace_ratio(0, 20_000)).abs() < 1e-15);
        assert!((theta - 2.2401).abs() < 1e-3);
    }

    #[test]
    fn bessel_values() {
        assert!((bessel_i(0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i(1, 1.0) - 0.565_159_103_992_485_0).abs() < 1e-14);
    }

    #[test]
    fn verdict_accumulates() {
        let mut v = Verdict::default();
        v.check(true, "a".into());
        v.note("b".into());
        assert!(v.passed);
        v.check(false, "c".into());
        assert!(!v.passed);
        assert_eq!(v.lines.len(), 3);
    }
}
