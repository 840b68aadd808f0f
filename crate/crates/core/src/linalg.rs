//! Banded matrices with an unpivoted LU solve. Used for Newton systems of the
//! form `I + tau D J` where `J` is a diagonally dominant stencil matrix.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    w: usize,
    // row-major, row i holds columns i-w ..= i+w
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, w: usize) -> Self {
        Self {
            n,
            w,
            data: vec![0.0; n * (2 * w + 1)],
        }
    }

    pub fn identity(n: usize, w: usize) -> Self {
        let mut m = Self::zeros(n, w);
        (0..n).for_each(|i| m.add(i, i, 1.0));
        m
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i.abs_diff(j) > self.w || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (2 * self.w + 1) + (j + self.w - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn scale_row(&mut self, i: usize, factor: f64) {
        let width = 2 * self.w + 1;
        for v in &mut self.data[i * width..(i + 1) * width] {
            *v *= factor;
        }
    }

    /// Solves `self x = rhs` by Gaussian elimination inside the band.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (n, w) = (self.n, self.w);
        let mut b = rhs.to_vec();
        for k in 0..n {
            let pivot = self.get(k, k);
            if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
                return Err(Error::NumericOverflow(format!("singular pivot at row {k}")));
            }
            for i in k + 1..(k + w + 1).min(n) {
                let f = self.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in k..(k + w + 1).min(n) {
                    let v = self.get(k, j);
                    if let Some(s) = self.slot(i, j) {
                        self.data[s] -= f * v;
                    }
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..(k + w + 1).min(n) {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        let n = 6;
        let mut m = Banded::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 4.0);
            if i + 1 < n {
                m.add(i, i + 1, -1.0);
                m.add(i + 1, i, -1.5);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j) * x_true[j]).sum())
            .collect();
        let x = m.solve(&rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn wide_band_matches_dense_solution() {
        let n = 9;
        let w = 3;
        let mut m = Banded::identity(n, w);
        for i in 0..n {
            m.add(i, i, 6.0);
            for d in 1..=w {
                if i + d < n {
                    m.add(i, i + d, -1.0 / d as f64);
                    m.add(i + d, i, -0.5 / d as f64);
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let x = m.clone().solve(&rhs).unwrap();
        for i in 0..n {
            let r: f64 = (0..n).map(|j| m.get(i, j) * x[j]).sum();
            assert!((r - rhs[i]).abs() < 1e-12);
        }
    }
}
