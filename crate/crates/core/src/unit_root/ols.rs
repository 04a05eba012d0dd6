//! Least squares through a Householder QR factorisation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot tolerance below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub aic: f64,
    pub n_obs: usize,
    pub n_params: usize,
}

impl OlsFit {
    pub fn t_stat(&self, column: usize) -> f64 {
        self.coefficients[column] / self.std_errors[column]
    }
}

/// Information criterion in the `n ln(rss/n) + 2k` form used throughout.
pub fn aic(rss: f64, n_obs: usize, n_params: usize) -> f64 {
    let n = n_obs as f64;
    n * (rss / n).ln() + 2.0 * n_params as f64
}

/// Householder QR of a tall design, stored column-major.
///
/// Keeps `R` and `Qᵀy`, which is enough for coefficients, standard errors and
/// the residual sum of squares of every leading-column sub-model.
pub(crate) struct Qr {
    n: usize,
    k: usize,
    /// Upper triangle, `r[j][i]` is row `i` of column `j` (i <= j).
    r: Vec<Vec<f64>>,
    qty: Vec<f64>,
}

impl Qr {
    /// Factorises `columns` (each of length n) against `response`.
    pub(crate) fn new(mut columns: Vec<Vec<f64>>, response: &[f64]) -> Result<Self> {
        let k = columns.len();
        let n = response.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        if n <= k {
            return Err(Error::TooFewObservations { needed: k + 1, got: n });
        }
        let norms: Vec<f64> = columns
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let mut qty = response.to_vec();
        let mut r = vec![Vec::new(); k];

        for j in 0..k {
            let (head, tail) = columns.split_at_mut(j + 1);
            let col = &mut head[j];
            let alpha = col[j..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norms[j] == 0.0 || alpha <= RANK_TOL * norms[j] {
                return Err(Error::RankDeficient { column: j });
            }
            let diag = if col[j] > 0.0 { -alpha } else { alpha };
            // v = x - diag * e_j, stored in place; |v|^2 = 2 alpha (alpha + |x_j|)
            col[j] -= diag;
            let vnorm2 = 2.0 * alpha * (alpha + (col[j] + diag).abs());
            let v = &col[j..];
            for other in tail.iter_mut() {
                reflect(v, vnorm2, &mut other[j..]);
            }
            reflect(v, vnorm2, &mut qty[j..]);

            let mut rj = columns[j][..j].to_vec();
            rj.push(diag);
            r[j] = rj;
        }
        Ok(Qr { n, k, r, qty })
    }

    /// Residual sum of squares of the model using the first `k` columns.
    pub(crate) fn prefix_rss(&self, k: usize) -> f64 {
        self.qty[k..].iter().map(|x| x * x).sum()
    }

    fn r_at(&self, i: usize, j: usize) -> f64 {
        self.r[j][i]
    }

    /// Solves `R beta = Qᵀy` for the leading `k` columns.
    pub(crate) fn prefix_coefficients(&self, k: usize) -> Vec<f64> {
        let mut beta = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = self.qty[i];
            for (j, b) in beta.iter().enumerate().take(k).skip(i + 1) {
                acc -= self.r_at(i, j) * b;
            }
            beta[i] = acc / self.r_at(i, i);
        }
        beta
    }

    /// Diagonal of `(RᵀR)⁻¹` for the leading `k` columns.
    pub(crate) fn prefix_inverse_diag(&self, k: usize) -> Vec<f64> {
        // Rinv is upper triangular; its row norms give diag((XᵀX)⁻¹).
        let mut rinv = vec![vec![0.0; k]; k];
        for c in 0..k {
            rinv[c][c] = 1.0 / self.r_at(c, c);
            for i in (0..c).rev() {
                let mut acc = 0.0;
                for j in i + 1..=c {
                    acc += self.r_at(i, j) * rinv[j][c];
                }
                rinv[i][c] = -acc / self.r_at(i, i);
            }
        }
        rinv.iter().map(|row| row.iter().map(|x| x * x).sum()).collect()
    }

    pub(crate) fn n_obs(&self) -> usize {
        self.n
    }

    pub(crate) fn n_cols(&self) -> usize {
        self.k
    }
}

fn reflect(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let scale = 2.0 * dot / vnorm2;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= scale * vi;
    }
}

/// Ordinary least squares of `response` on the columns of `design`.
pub fn ols_fit(design: &Array2<f64>, response: &[f64]) -> Result<OlsFit> {
    if design.nrows() != response.len() {
        return Err(Error::DimensionMismatch {
            expected: design.nrows(),
            got: response.len(),
        });
    }
    let columns = design.columns().into_iter().map(|c| c.to_vec()).collect();
    let qr = Qr::new(columns, response)?;
    let k = qr.n_cols();
    let coefficients = qr.prefix_coefficients(k);
    let residuals: Vec<f64> = design
        .rows()
        .into_iter()
        .zip(response)
        .map(|(row, y)| y - row.iter().zip(&coefficients).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let rss = qr.prefix_rss(k);
    Ok(finish(&qr, k, coefficients, residuals, rss))
}

pub(crate) fn finish(qr: &Qr, k: usize, coefficients: Vec<f64>, residuals: Vec<f64>, rss: f64) -> OlsFit {
    let n = qr.n_obs();
    let sigma2 = rss / (n - k) as f64;
    let std_errors = qr
        .prefix_inverse_diag(k)
        .into_iter()
        .map(|d| (sigma2 * d).sqrt())
        .collect();
    OlsFit {
        coefficients,
        std_errors,
        residuals,
        rss,
        aic: aic(rss, n, k),
        n_obs: n,
        n_params: k,
    }
}
