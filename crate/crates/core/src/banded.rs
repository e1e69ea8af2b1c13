//! Banded matrices with an LU factorization using partial pivoting.

use crate::error::{Error, Result};

/// Square matrix stored by diagonals. Row `i` keeps columns
/// `i - lower ..= i + upper + lower`; the extra `lower` columns hold fill-in
/// from row interchanges during factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn identity(n: usize, lower: usize, upper: usize) -> Self {
        let mut m = Self::zeros(n, lower, upper);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.lower as isize;
        if off < 0 || off as usize >= self.width || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * self.width + off as usize)
        }
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        let d = j as isize - i as isize;
        d >= -(self.lower as isize) && d <= self.upper as isize
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics if `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.slot(i, j).unwrap();
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.slot(i, j).unwrap();
        self.data[k] += value;
    }

    /// `self + a·other`; both matrices must share size and bandwidths.
    pub fn add_scaled(&self, a: f64, other: &BandedMatrix) -> BandedMatrix {
        assert_eq!(
            (self.n, self.lower, self.upper),
            (other.n, other.lower, other.upper),
            "band shapes differ"
        );
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let j0 = i.saturating_sub(self.lower);
                let j1 = (i + self.upper).min(self.n - 1);
                let base = i * self.width + self.lower - i;
                (j0..=j1).map(|j| self.data[base + j] * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(&self) -> Result<BandedLu> {
        let mut a = self.clone();
        let n = a.n;
        let kl = a.lower;
        let reach = a.upper + a.lower;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            pivots.push(p);
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let kp = a.slot(p, j).unwrap();
                    let kk = a.slot(k, j).unwrap();
                    a.data.swap(kp, kk);
                }
            }
            let pivot = a.get(k, k);
            for i in k + 1..=last_row {
                let ik = a.slot(i, k).unwrap();
                let l = a.data[ik] / pivot;
                a.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let w = a.width;
                let count = last_col - k;
                let (head, tail) = a.data.split_at_mut(i * w);
                let start = k * w + kl + 1;
                let pivot_row = &head[start..start + count];
                let start = k + 1 + kl - i;
                let row = &mut tail[start..start + count];
                for (x, y) in row.iter_mut().zip(pivot_row) {
                    *x -= l * y;
                }
            }
        }
        Ok(BandedLu { lu: a, pivots })
    }
}

/// Packed `PA = LU` factors of a [`BandedMatrix`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.lu;
        let n = a.n;
        assert_eq!(b.len(), n);
        let (kl, w) = (a.lower, a.width);
        let reach = a.upper + a.lower;
        let data = &a.data;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= data[i * w + k + kl - i] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &data[k * w + kl..k * w + kl + reach + 1];
            let last = (k + reach).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last {
                s -= row[j - k] * b[j];
            }
            b[k] = s / row[0];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
