//! Normal-equation least squares via Cholesky.

use crate::error::{Error, Result};

/// Relative pivot below which a column counts as collinear with the columns
/// before it.
const COLLINEAR_TOL: f64 = 1e-10;

pub(crate) const RIDGE: f64 = 1e-8;

/// Accumulates `X'X` and `X'y` row by row.
pub(crate) struct NormalEquations {
    dim: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    rows: usize,
}

pub(crate) struct Solution {
    pub beta: Vec<f64>,
    /// Diagonal of `(X'X + ridge I)^-1`.
    pub inv_diag: Vec<f64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xtx: vec![0.0; dim * dim],
            xty: vec![0.0; dim],
            rows: 0,
        }
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            self.xty[i] += xi * y;
            let row = &mut self.xtx[i * self.dim..(i + 1) * self.dim];
            for j in 0..=i {
                row[j] += xi * x[j];
            }
        }
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Solves `(X'X + 1e-8 I) beta = X'y`. Columns that are zero or linearly
    /// dependent on earlier columns are reported by name.
    pub fn solve(&self, labels: &[String]) -> Result<Solution> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        let mut bad = Vec::new();
        for j in 0..n {
            let ajj = self.xtx[j * n + j];
            let mut d = ajj + RIDGE;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if ajj <= 0.0 || d - RIDGE <= COLLINEAR_TOL * ajj {
                bad.push(labels[j].clone());
            }
            let d = d.max(RIDGE);
            let ljj = d.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = self.xtx[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        if !bad.is_empty() {
            return Err(Error::Estimation(format!(
                "singular design: column(s) {} are zero or collinear with earlier columns",
                bad.join(", ")
            )));
        }
        let beta = chol_solve(&l, n, &self.xty);
        let mut inv_diag = vec![0.0; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            inv_diag[j] = chol_solve(&l, n, &e)[j];
        }
        Ok(Solution { beta, inv_diag })
    }
}

fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}
