use super::sparse::{axpy, dot, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// (semi)definite systems; stops at ‖r‖ ≤ tol·‖b‖ or errors after `max_iter`.
pub fn pcg(a: &SparseMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<CgOutcome> {
    pcg_with_kernel(a, b, x0, tol, max_iter, None)
}

/// PCG for a singular `a` whose kernel is spanned by `kernel`: the residual is
/// kept orthogonal to the kernel so rounding cannot accumulate there.
pub fn pcg_with_kernel(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    kernel: Option<&[f64]>,
) -> Result<CgOutcome> {
    let n = a.n;
    let kk = kernel.map(|k| dot(k, k));
    let clean = |r: &mut [f64]| {
        if let (Some(k), Some(kk)) = (kernel, kk) {
            let c = dot(k, r) / kk;
            axpy(-c, k, r);
        }
    };
    let dinv: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.mul(&x);
        axpy(-1.0, &ax, &mut r);
    }
    clean(&mut r);
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgOutcome { x, iterations: it, relative_residual: res });
        }
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        clean(&mut r);
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        history.push(res);
    }
    if res <= tol {
        return Ok(CgOutcome { x, iterations: history.len(), relative_residual: res });
    }
    let keep = history.len().saturating_sub(50);
    Err(Error::Solver { iterations: history.len(), residual: res, history: history[keep..].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, t)
    }

    #[test]
    fn solves_tridiagonal_system() {
        let a = laplace_1d(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul(&x_true);
        let out = pcg(&a, &b, None, 1e-12, 500).unwrap();
        let err = out.x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
        assert!(out.relative_residual <= 1e-12);
    }

    #[test]
    fn stagnation_is_reported_with_history() {
        let a = laplace_1d(200);
        let b = vec![1.0; 200];
        match pcg(&a, &b, None, 1e-14, 5) {
            Err(Error::Solver { iterations, history, .. }) => {
                assert_eq!(iterations, 5);
                assert_eq!(history.len(), 5);
            }
            r => panic!("{r:?}"),
        }
    }
}
