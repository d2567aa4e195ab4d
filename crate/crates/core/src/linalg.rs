//! Symmetric banded matrices with an in-place Cholesky factorization.
//!
//! Natural node ordering on the grids gives a band of half-width 1 in 1D
//! and `2 nx + 1` in 2D, so a dense band factorization is cheap and exact.

#[derive(Debug, Clone)]
pub(crate) struct SymBanded {
    n: usize,
    bw: usize,
    // row i holds A[i][i - d] at i * (bw + 1) + d, d = 0..=bw
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NotPositiveDefinite {
    pub row: usize,
}

impl SymBanded {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub(crate) fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw, "entry ({i},{j}) outside the band");
        r * (self.bw + 1) + (r - c)
    }

    /// Adds `v` to the symmetric pair `(i, j)` and `(j, i)`.
    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.bw + 1)]
    }

    pub(crate) fn add_diagonal(&mut self, i: usize, v: f64) {
        let s = self.slot(i, i);
        self.data[s] += v;
    }

    #[cfg(test)]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Factors `A = L L^T` in place of the band.
    pub(crate) fn cholesky(mut self) -> Result<BandedCholesky, NotPositiveDefinite> {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        let l = &mut self.data;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // s = A[i][j] - sum_k L[i][k] L[j][k], k in max(j0, j - bw)..j
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * stride + (i - j)];
                for k in k0..j {
                    s -= l[i * stride + (i - k)] * l[j * stride + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(NotPositiveDefinite { row: i });
                    }
                    l[i * stride] = s.sqrt();
                } else {
                    l[i * stride + (i - j)] = s / l[j * stride];
                }
            }
        }
        Ok(BandedCholesky {
            n,
            bw,
            data: self.data,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedCholesky {
    /// Overwrites `b` with `A^{-1} b`.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        let l = &self.data;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= l[i * stride + (i - k)] * b[k];
            }
            b[i] = s / l[i * stride];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= l[k * stride + (k - i)] * b[k];
            }
            b[i] = s / l[i * stride];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_spd_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, bw) = (40, 5);
        let mut a = SymBanded::zeros(n, bw);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a.add(i, j, v);
                dense[i][j] += v;
                dense[j][i] += v;
            }
            a.add_diagonal(i, 2.0 * bw as f64 + 1.0);
            dense[i][i] += 2.0 * bw as f64 + 1.0;
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum())
            .collect();
        a.cholesky().unwrap().solve_in_place(&mut b);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite() {
        let mut a = SymBanded::zeros(3, 1);
        a.add_diagonal(0, 1.0);
        a.add_diagonal(1, -1.0);
        a.add_diagonal(2, 1.0);
        assert_eq!(a.cholesky().unwrap_err(), NotPositiveDefinite { row: 1 });
    }
}
