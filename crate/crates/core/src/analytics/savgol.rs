//! Savitzky-Golay smoothing. Interior points use precomputed convolution
//! weights; the first and last `window / 2` points are refit on the
//! truncated window, so no values are invented past the series ends.

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 501;
pub const DEFAULT_POLY: usize = 2;

pub fn savitzky_golay(series: &[f64], window: usize, poly: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::config(format!("savgol window must be odd, got {window}")));
    }
    if poly >= window {
        return Err(Error::config(format!(
            "savgol polynomial order {poly} must be below the window {window}"
        )));
    }
    if series.is_empty() {
        return Err(Error::Empty("savgol series"));
    }
    let n = series.len();
    let half = window / 2;
    let mut out = vec![0.0; n];
    let interior = if n > 2 * half {
        Some(fit_weights(half, half, poly)?)
    } else {
        None
    };
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let values = &series[lo..=hi];
        *slot = match &interior {
            Some(w) if i - lo == half && hi - i == half => dot(w, values),
            _ => dot(&fit_weights(i - lo, hi - i, poly)?, values),
        };
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights `h` such that `h · y` is the value at offset 0 of the
/// least-squares polynomial through points at offsets `-before..=after`.
/// The degree drops when the window is too short to support it.
fn fit_weights(before: usize, after: usize, poly: usize) -> Result<Vec<f64>> {
    let m = before + after + 1;
    let degree = poly.min(m - 1);
    let k = degree + 1;
    let scale = before.max(after).max(1) as f64;
    let xs: Vec<f64> = (0..m)
        .map(|j| (j as f64 - before as f64) / scale)
        .collect();
    // normal equations in the scaled abscissa
    let mut gram = vec![vec![0.0; k]; k];
    for x in &xs {
        let mut powers = vec![1.0; 2 * k - 1];
        for p in 1..powers.len() {
            powers[p] = powers[p - 1] * x;
        }
        for (r, row) in gram.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell += powers[r + c];
            }
        }
    }
    let mut rhs = vec![0.0; k];
    rhs[0] = 1.0;
    let u = solve(gram, rhs)?;
    Ok(xs
        .iter()
        .map(|x| {
            let mut acc = 0.0;
            let mut p = 1.0;
            for coef in &u {
                acc += coef * p;
                p *= x;
            }
            acc
        })
        .collect())
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Numerical("singular savgol normal equations".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}
