//! Least squares with heteroskedasticity-robust (HC0) covariance.
//!
//! Sums are accumulated over fixed-size blocks and combined in block order,
//! so results do not depend on the rayon thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

const BLOCK: usize = 8192;

/// Relative Schur-complement pivot below which a feature counts as
/// collinear with the ones before it.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Indices of the features kept in the fit, in input order.
    pub kept: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub n: usize,
}

fn block_sums<F>(n: usize, width: usize, per_row: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; width];
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                per_row(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for acc in &partial {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    total
}

/// Greedy forward selection of non-collinear columns of a Gram matrix.
fn independent_columns(gram: &DMatrix<f64>) -> Vec<usize> {
    let k = gram.nrows();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..k {
        let gjj = gram[(j, j)];
        if !(gjj > 0.0) {
            continue;
        }
        let pivot = if kept.is_empty() {
            gjj
        } else {
            let sub = gram.select_rows(&kept).select_columns(&kept);
            let g: DVector<f64> = DVector::from_iterator(kept.len(), kept.iter().map(|&i| gram[(i, j)]));
            match sub.cholesky() {
                Some(ch) => gjj - g.dot(&ch.solve(&g)),
                None => 0.0,
            }
        };
        if pivot > PIVOT_TOL * gjj {
            kept.push(j);
        }
    }
    kept
}

/// Regresses a response on `k` features. `row(i, x)` writes the features
/// of observation `i` into `x` and returns its response.
pub fn ols_hc0<F>(n: usize, k: usize, row: F) -> Result<OlsFit>
where
    F: Fn(usize, &mut [f64]) -> f64 + Sync,
{
    if k == 0 || k > 16 {
        return Err(Error::argument(format!("supports 1 to 16 features, got {k}")));
    }
    if n <= k {
        return Err(Error::argument(format!("need more than {k} observations, got {n}")));
    }
    // packed upper triangle of X'X followed by X'y
    let tri = k * (k + 1) / 2;
    let sums = block_sums(n, tri + k, |i, acc| {
        let mut x = [0.0; 16];
        let y = row(i, &mut x[..k]);
        let mut c = 0;
        for a in 0..k {
            for b in a..k {
                acc[c] += x[a] * x[b];
                c += 1;
            }
            acc[tri + a] += x[a] * y;
        }
    });
    let mut gram = DMatrix::zeros(k, k);
    let mut c = 0;
    for a in 0..k {
        for b in a..k {
            gram[(a, b)] = sums[c];
            gram[(b, a)] = sums[c];
            c += 1;
        }
    }
    if sums.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("non-finite values in regression data"));
    }
    let kept = independent_columns(&gram);
    if kept.is_empty() {
        return Err(Error::SingularDesign("every feature is identically zero".into()));
    }
    let m = kept.len();
    let xtx = gram.select_rows(&kept).select_columns(&kept);
    let xty = DVector::from_iterator(m, kept.iter().map(|&a| sums[tri + a]));
    let ch = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularDesign("X'X is not positive definite".into()))?;
    let beta = ch.solve(&xty);
    let bread = ch.inverse();

    let mtri = m * (m + 1) / 2;
    let meat_sums = block_sums(n, mtri, |i, acc| {
        let mut full = [0.0; 16];
        let y = row(i, &mut full[..k]);
        let mut x = [0.0; 16];
        for (dst, &src) in x.iter_mut().zip(&kept) {
            *dst = full[src];
        }
        let fitted: f64 = (0..m).map(|a| x[a] * beta[a]).sum();
        let e2 = (y - fitted) * (y - fitted);
        let mut c = 0;
        for a in 0..m {
            for b in a..m {
                acc[c] += e2 * x[a] * x[b];
                c += 1;
            }
        }
    });
    let mut meat = DMatrix::zeros(m, m);
    let mut c = 0;
    for a in 0..m {
        for b in a..m {
            meat[(a, b)] = meat_sums[c];
            meat[(b, a)] = meat_sums[c];
            c += 1;
        }
    }
    let cov = &bread * meat * &bread;
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        covariance: (0..m).map(|a| (0..m).map(|b| cov[(a, b)]).collect()).collect(),
        kept,
        n,
    })
}

/// Mean and standard error of `f(i)` over `0..n`, with block-ordered sums.
pub fn mean_and_se<F>(n: usize, f: F) -> (f64, f64)
where
    F: Fn(usize) -> f64 + Sync,
{
    let s = block_sums(n, 1, |i, acc| acc[0] += f(i));
    let mean = s[0] / n as f64;
    let ss = block_sums(n, 1, |i, acc| {
        let d = f(i) - mean;
        acc[0] += d * d;
    });
    let var = ss[0] / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
