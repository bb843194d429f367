//! Cholesky factorization of symmetric positive definite band matrices.

/// Lower Cholesky factor stored row by row, `bandwidth + 1` entries per row.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    // entry (i, j), i - bandwidth <= j <= i, lives at i * (bandwidth + 1) + bandwidth - (i - j)
    factor: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix whose lower band is produced by `entry(i, j)` for
    /// `i - bandwidth <= j <= i`. Returns `None` if it is not positive definite.
    pub fn factor(n: usize, bandwidth: usize, entry: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let w = bandwidth + 1;
        let mut l = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + bandwidth - (i - j);
        for i in 0..n {
            let j0 = i.saturating_sub(bandwidth);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bandwidth));
                let mut sum = entry(i, j);
                for k in k0..j {
                    sum -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    l[at(i, i)] = sum.sqrt();
                } else {
                    l[at(i, j)] = sum / l[at(j, j)];
                }
            }
        }
        Some(Self {
            n,
            bandwidth,
            factor: l,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.bandwidth + 1;
        let p = self.bandwidth;
        // L z = b
        for i in 0..self.n {
            let j0 = i.saturating_sub(p);
            let row = &self.factor[i * w..(i + 1) * w];
            let mut s = x[i];
            for j in j0..i {
                s -= row[p - (i - j)] * x[j];
            }
            x[i] = s / row[p];
        }
        // L^T x = z
        for i in (0..self.n).rev() {
            let mut s = x[i];
            let k1 = (i + p).min(self.n - 1);
            for k in i + 1..=k1 {
                s -= self.factor[k * w + p - (k - i)] * x[k];
            }
            x[i] = s / self.factor[i * w + p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 12;
        let p = 3;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let d = i.abs_diff(j);
            if d == 0 {
                10.0 + i as f64
            } else if d <= p {
                1.0 / (1.0 + d as f64) + 0.01 * (i + j) as f64
            } else {
                0.0
            }
        });
        let f = BandedCholesky::factor(n, p, |i, j| a[(i, j)]).unwrap();
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        let mut x = b.as_slice().to_vec();
        f.solve_in_place(&mut x);
        let r = &a * DVector::from_vec(x) - b;
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(BandedCholesky::factor(2, 1, |i, j| if i == j { 1.0 } else { 2.0 }).is_none());
    }
}
