//! Band storage and a partial-pivoting LU solver.
//!
//! Row `i` of a matrix with `kl` sub- and `ku` super-diagonals stores the
//! columns `i - kl ..= i + ku`. Factorization widens the upper band to
//! `ku + kl` to make room for the fill-in produced by row interchanges.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && col + self.kl >= row && col <= row + self.ku
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        row * (self.kl + self.ku + 1) + (col + self.kl - row)
    }

    /// Entry `(row, col)`; zero outside the band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if self.in_band(row, col) {
            self.data[self.offset(row, col)]
        } else {
            0.0
        }
    }

    /// Adds `value` to entry `(row, col)`.
    ///
    /// Panics if the entry lies outside the band.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            self.in_band(row, col),
            "entry ({row}, {col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.offset(row, col);
        self.data[k] += value;
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(self.in_band(row, col), "entry ({row}, {col}) outside band");
        let k = self.offset(row, col);
        self.data[k] = value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Row-major dense copy, mostly useful for inspection and testing.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factorize(&self) -> Result<BandedLu> {
        BandedLu::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::SizeMismatch {
                what: "right-hand side",
                expected: self.n,
                actual: rhs.len(),
            });
        }
        let lu = self.factorize()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        Ok(x)
    }
}

/// LU factors of a [`BandedMatrix`] with row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` (original `ku + kl`).
    ku: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn new(a: &BandedMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku + a.kl;
        let width = kl + ku + 1;
        // Working rows hold columns `i - kl ..= i + ku`, so row `i` shares
        // the source layout and only gains `kl` trailing slots.
        let src_width = a.kl + a.ku + 1;
        let mut w = vec![0.0; n * width];
        for (dst, src) in w
            .chunks_exact_mut(width)
            .zip(a.data.chunks_exact(src_width))
        {
            dst[..src_width].copy_from_slice(src);
        }
        let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = f64::MIN_POSITIVE.max(scale * f64::EPSILON * 1e-6);

        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            // Column `j` sits at slot `kl - (r - j)` of row `r`.
            let mut p = j;
            let mut best = w[j * width + kl].abs();
            for r in j + 1..=last {
                let v = w[r * width + kl + j - r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularSystem { row: j });
            }
            pivots[j] = p;
            let len = (j + ku).min(n - 1) - j + 1;
            if p != j {
                let (head, tail) = w.split_at_mut(p * width);
                let off = kl + j - p;
                head[j * width + kl..j * width + kl + len]
                    .swap_with_slice(&mut tail[off..off + len]);
            }
            let (head, tail) = w.split_at_mut((j + 1) * width);
            let pivot_row = &head[j * width + kl..j * width + kl + len];
            let pivot = pivot_row[0];
            for r in j + 1..=last {
                let off = (r - j - 1) * width + kl + j - r;
                let row = &mut tail[off..off + len];
                let m = row[0] / pivot;
                lower[j * kl + (r - j - 1)] = m;
                if m != 0.0 {
                    row[0] = 0.0;
                    for (x, u) in row[1..].iter_mut().zip(&pivot_row[1..]) {
                        *x -= m * u;
                    }
                }
            }
        }

        let uw = ku + 1;
        let mut upper = vec![0.0; n * uw];
        for (dst, src) in upper.chunks_exact_mut(uw).zip(w.chunks_exact(width)) {
            dst.copy_from_slice(&src[kl..]);
        }
        Ok(Self {
            n,
            kl,
            ku,
            upper,
            lower,
            pivots,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            for r in j + 1..=(j + self.kl).min(n - 1) {
                b[r] -= self.lower[j * self.kl + (r - j - 1)] * bj;
            }
        }
        let uw = self.ku + 1;
        for i in (0..n).rev() {
            let row = &self.upper[i * uw..(i + 1) * uw];
            let mut s = b[i];
            for c in i + 1..=(i + self.ku).min(n - 1) {
                s -= row[c - i] * b[c];
            }
            b[i] = s / row[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_matches_known_solution() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let mut a = BandedMatrix::zeros(3, 1, 1);
        for i in 0..3 {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
                a.set(i - 1, i, -1.0);
            }
        }
        let x = a.solve(&[1.0, 0.0, 1.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_diagonal() {
        // [0 1; 1 0] needs a row swap.
        let mut a = BandedMatrix::zeros(2, 1, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let x = a.solve(&[3.0, 5.0]).unwrap();
        assert_eq!(x, vec![5.0, 3.0]);
    }

    #[test]
    fn singular_matrix_reports_row() {
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(0, 0, 1.0);
        a.set(2, 2, 1.0);
        assert_eq!(a.solve(&[1.0; 3]), Err(Error::SingularSystem { row: 1 }));
    }

    #[test]
    fn rhs_length_is_checked() {
        let a = BandedMatrix::zeros(3, 1, 1);
        assert!(matches!(
            a.solve(&[1.0; 2]),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    #[should_panic]
    fn add_outside_band_panics() {
        let mut a = BandedMatrix::zeros(4, 1, 1);
        a.add(0, 3, 1.0);
    }
}
