//! Small dense linear algebra: row-major matrices and an LU solver with
//! partial pivoting. The systems in this crate are tiny (order s or a few
//! hundred for chain solves), so a direct dense solve is the right tool.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DMat { rows: n_rows, cols: n_cols, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = x^T * M for a row vector x.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &m) in self.row(i).iter().enumerate() {
                y[j] += xi * m;
            }
        }
        y
    }

    /// y = M * x for a column vector x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(m, xj)| m * xj).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve `A x = b` in place by LU with partial pivoting. `a` is destroyed.
pub fn lu_solve(a: &mut DMat, b: &mut [f64], context: &'static str) -> Result<()> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.len(), n);
    let data = &mut a.data;
    let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for k in 0..n {
        // pivot selection
        let mut p = k;
        let mut best = data[k * n + k].abs();
        for i in k + 1..n {
            let v = data[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= scale * 1e-300 {
            return Err(Error::SingularSystem { context });
        }
        if p != k {
            for j in 0..n {
                data.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        // split off the pivot row so the elimination loop borrows cleanly
        // and runs on plain slices
        let (head, tail) = data.split_at_mut((k + 1) * n);
        let pivot_row = &head[k * n + k..(k + 1) * n];
        let pivot = pivot_row[0];
        for (i, row) in tail.chunks_exact_mut(n).enumerate() {
            let factor = row[k] / pivot;
            if factor == 0.0 {
                continue;
            }
            row[k] = 0.0;
            for (x, &pv) in row[k + 1..n].iter_mut().zip(&pivot_row[1..]) {
                *x -= factor * pv;
            }
            b[k + 1 + i] -= factor * b[k];
        }
    }
    for i in (0..n).rev() {
        let row = &data[i * n..(i + 1) * n];
        let mut acc = b[i];
        for (pv, x) in row[i + 1..].iter().zip(&b[i + 1..]) {
            acc -= pv * x;
        }
        b[i] = acc / row[i];
    }
    Ok(())
}

/// Stationary distribution of a row-stochastic matrix: solves pi P = pi with
/// the normalization row replacing one balance equation.
pub fn stationary_distribution(p: &DMat) -> Result<Vec<f64>> {
    let n = p.rows;
    assert_eq!(p.cols, n);
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = DMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    lu_solve(&mut a, &mut b, "stationary distribution")?;
    // scrub solver noise on structurally-zero entries
    for x in &mut b {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    let total: f64 = b.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::SingularSystem { context: "stationary distribution" });
    }
    for x in &mut b {
        *x /= total;
    }
    Ok(b)
}

/// max_i |(pi P)_i - pi_i|
pub fn stationary_residual(p: &DMat, pi: &[f64]) -> f64 {
    p.left_mul(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
