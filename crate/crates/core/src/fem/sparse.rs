use rayon::prelude::*;
use std::fmt::Write as _;

/// Square matrix in compressed sparse row format.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

const PAR_THRESHOLD: usize = 20_000;

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(trip.len() / 2);
        let mut val: Vec<f64> = Vec::with_capacity(trip.len() / 2);
        let mut last = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(k) => self.val[r.start + k],
            Err(_) => 0.0,
        }
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.val[k] * x[self.col[k]];
        }
        s
    }

    /// y = A x.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        if self.n >= PAR_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = self.row_dot(i, x));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// xᵀ A y.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row_dot(i, y)).sum()
    }

    /// αA + βB.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, alpha), (other, beta)] {
            for i in 0..m.n {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    trip.push((i, m.col[k], s * m.val[k]));
                }
            }
        }
        Self::from_triplets(self.n, trip)
    }

    /// Principal submatrix on the rows/columns with `map[i] = Some(new index)`.
    pub fn restrict(&self, map: &[Option<usize>], size: usize) -> Self {
        let mut trip = Vec::new();
        for i in 0..self.n {
            if let Some(ri) = map[i] {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    if let Some(cj) = map[self.col[k]] {
                        trip.push((ri, cj, self.val[k]));
                    }
                }
            }
        }
        Self::from_triplets(size, trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A_ij − A_ji| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.val[k] - self.get(self.col[k], i)).abs());
            }
        }
        worst
    }

    /// `row col value` lines, one per stored entry.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let _ = writeln!(s, "{} {} {:.17e}", i, self.col[k], self.val[k]);
            }
        }
        s
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() >= PAR_THRESHOLD {
        // fixed chunking keeps the summation order independent of the thread pool
        let parts: Vec<f64> = a
            .par_chunks(4096)
            .zip(b.par_chunks(4096))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        parts.iter().sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(3, vec![(0, 0, 1.0), (2, 1, 3.0), (0, 0, 2.0), (1, 2, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(2, 1), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul(&[1.0, 2.0, 3.0]), vec![3.0, -3.0, 6.0]);
        assert_eq!(a.asymmetry(), 4.0);
    }

    #[test]
    fn restrict_and_combine() {
        let a = SparseMatrix::from_triplets(3, vec![(0, 0, 2.0), (0, 2, 1.0), (2, 0, 1.0), (2, 2, 4.0), (1, 1, 5.0)]);
        let r = a.restrict(&[Some(0), None, Some(1)], 2);
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(1, 1), 4.0);
        let c = a.combine(1.0, &a, -0.5);
        assert_eq!(c.get(1, 1), 2.5);
        assert!(a.to_triplet_text().lines().count() == 5);
    }
}
