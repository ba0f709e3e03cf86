//! Naive reference BLAS on column-major slices.
//!
//! Vectors are contiguous; matrices carry an explicit leading dimension.
//! A `beta` of zero overwrites the output without reading it.

use crate::error::{Error, Result};

#[inline]
fn at(ld: usize, i: usize, j: usize) -> usize {
    i + j * ld
}

/// Dense `rows x cols` copy of `op(A)` where `A` is general.
fn op_general(trans: &str, rows: usize, cols: usize, a: &[f64], lda: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            out[at(rows, i, j)] = if trans == "N" {
                a[at(lda, i, j)]
            } else {
                a[at(lda, j, i)]
            };
        }
    }
    out
}

/// Dense copy of the triangle of `A` selected by `uplo`, zeros elsewhere.
pub(crate) fn dense_triangle(uplo: &str, diag: &str, n: usize, a: &[f64], lda: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let stored = if uplo == "L" { i >= j } else { i <= j };
            if stored {
                out[at(n, i, j)] = if i == j && diag == "U" {
                    1.0
                } else {
                    a[at(lda, i, j)]
                };
            }
        }
    }
    out
}

/// Dense symmetric matrix from the triangle selected by `uplo`.
pub(crate) fn dense_symmetric(uplo: &str, n: usize, a: &[f64], lda: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (r, c) = if (uplo == "L") == (i >= j) { (i, j) } else { (j, i) };
            out[at(n, i, j)] = a[at(lda, r, c)];
        }
    }
    out
}

fn transpose(n: usize, t: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[at(n, j, i)] = t[at(n, i, j)];
        }
    }
    out
}

fn scale_output(beta: f64, c: &mut [f64], ldc: usize, m: usize, n: usize) {
    for j in 0..n {
        for i in 0..m {
            let v = &mut c[at(ldc, i, j)];
            *v = if beta == 0.0 { 0.0 } else { beta * *v };
        }
    }
}

pub fn dcopy(n: usize, x: &[f64], y: &mut [f64]) {
    y[..n].copy_from_slice(&x[..n]);
}

pub fn dswap(n: usize, x: &mut [f64], y: &mut [f64]) {
    x[..n].swap_with_slice(&mut y[..n]);
}

pub fn daxpy(n: usize, alpha: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..n {
        y[i] += alpha * x[i];
    }
}

pub fn ddot(n: usize, x: &[f64], y: &[f64]) -> f64 {
    (0..n).map(|i| x[i] * y[i]).sum()
}

/// `y := alpha op(A) x + beta y` with `A` of size `m x n`.
#[allow(clippy::too_many_arguments)]
pub fn dgemv(
    trans: &str,
    m: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    x: &[f64],
    beta: f64,
    y: &mut [f64],
) {
    let (rows, cols) = if trans == "N" { (m, n) } else { (n, m) };
    for i in 0..rows {
        let mut s = 0.0;
        for j in 0..cols {
            let aij = if trans == "N" {
                a[at(lda, i, j)]
            } else {
                a[at(lda, j, i)]
            };
            s += aij * x[j];
        }
        y[i] = if beta == 0.0 { 0.0 } else { beta * y[i] } + alpha * s;
    }
}

/// `A := alpha x y^T + A`.
pub fn dger(m: usize, n: usize, alpha: f64, x: &[f64], y: &[f64], a: &mut [f64], lda: usize) {
    for j in 0..n {
        for i in 0..m {
            a[at(lda, i, j)] += alpha * x[i] * y[j];
        }
    }
}

/// Solves `T x = b` in place for a dense triangular `T`.
fn solve_dense(n: usize, t: &[f64], lower: bool, x: &mut [f64]) -> Result<()> {
    let order: Vec<usize> = if lower {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    for &i in &order {
        let mut s = x[i];
        for j in 0..n {
            if j != i {
                s -= t[at(n, i, j)] * x[j];
            }
        }
        let d = t[at(n, i, i)];
        if d == 0.0 {
            return Err(Error::Singular(i));
        }
        x[i] = s / d;
    }
    Ok(())
}

/// Solves `op(A) x = b` in place.
#[allow(clippy::too_many_arguments)]
pub fn dtrsv(
    uplo: &str,
    trans: &str,
    diag: &str,
    n: usize,
    a: &[f64],
    lda: usize,
    x: &mut [f64],
) -> Result<()> {
    let mut t = dense_triangle(uplo, diag, n, a, lda);
    let mut lower = uplo == "L";
    if trans == "T" {
        t = transpose(n, &t);
        lower = !lower;
    }
    // Unsolved entries start at their right-hand side; zero them as we go
    // by solving on a scratch vector.
    let mut y = vec![0.0; n];
    let order: Vec<usize> = if lower {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    for &i in &order {
        let mut s = x[i];
        for j in 0..n {
            if j != i {
                s -= t[at(n, i, j)] * y[j];
            }
        }
        let d = t[at(n, i, i)];
        if d == 0.0 {
            return Err(Error::Singular(i));
        }
        y[i] = s / d;
    }
    x[..n].copy_from_slice(&y);
    Ok(())
}

/// `C := alpha op(A) op(B) + beta C`.
#[allow(clippy::too_many_arguments)]
pub fn dgemm(
    transa: &str,
    transb: &str,
    m: usize,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    let oa = op_general(transa, m, k, a, lda);
    let ob = op_general(transb, k, n, b, ldb);
    scale_output(beta, c, ldc, m, n);
    for j in 0..n {
        for i in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += oa[at(m, i, l)] * ob[at(k, l, j)];
            }
            c[at(ldc, i, j)] += alpha * s;
        }
    }
}

/// `C := alpha A B + beta C` (side L) or `alpha B A + beta C` (side R), `A` symmetric.
#[allow(clippy::too_many_arguments)]
pub fn dsymm(
    side: &str,
    uplo: &str,
    m: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    let na = if side == "L" { m } else { n };
    let s = dense_symmetric(uplo, na, a, lda);
    let bd = op_general("N", m, n, b, ldb);
    if side == "L" {
        dgemm("N", "N", m, n, m, alpha, &s, na, &bd, m, beta, c, ldc);
    } else {
        dgemm("N", "N", m, n, n, alpha, &bd, m, &s, na, beta, c, ldc);
    }
}

/// `B := alpha op(A) B` (side L) or `alpha B op(A)` (side R), `A` triangular.
#[allow(clippy::too_many_arguments)]
pub fn dtrmm(
    side: &str,
    uplo: &str,
    transa: &str,
    diag: &str,
    m: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &mut [f64],
    ldb: usize,
) {
    let na = if side == "L" { m } else { n };
    let t = dense_triangle(uplo, diag, na, a, lda);
    let bd = op_general("N", m, n, b, ldb);
    if side == "L" {
        dgemm(transa, "N", m, n, m, alpha, &t, na, &bd, m, 0.0, b, ldb);
    } else {
        dgemm("N", transa, m, n, n, alpha, &bd, m, &t, na, 0.0, b, ldb);
    }
}

/// Solves `op(A) X = alpha B` (side L) or `X op(A) = alpha B` (side R) in place.
#[allow(clippy::too_many_arguments)]
pub fn dtrsm(
    side: &str,
    uplo: &str,
    transa: &str,
    diag: &str,
    m: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &mut [f64],
    ldb: usize,
) -> Result<()> {
    let na = if side == "L" { m } else { n };
    let mut t = dense_triangle(uplo, diag, na, a, lda);
    let mut lower = uplo == "L";
    if transa == "T" {
        t = transpose(na, &t);
        lower = !lower;
    }
    if side == "L" {
        for j in 0..n {
            let mut col: Vec<f64> = (0..m).map(|i| alpha * b[at(ldb, i, j)]).collect();
            solve_dense(m, &t, lower, &mut col)?;
            for i in 0..m {
                b[at(ldb, i, j)] = col[i];
            }
        }
    } else {
        // X T = B  <=>  T^T X^T = B^T.
        let tt = transpose(n, &t);
        for i in 0..m {
            let mut row: Vec<f64> = (0..n).map(|j| alpha * b[at(ldb, i, j)]).collect();
            solve_dense(n, &tt, !lower, &mut row)?;
            for j in 0..n {
                b[at(ldb, i, j)] = row[j];
            }
        }
    }
    Ok(())
}

/// `C := alpha op(A) op(A)^T + beta C` on the `uplo` triangle of `C`.
#[allow(clippy::too_many_arguments)]
pub fn dsyrk(
    uplo: &str,
    trans: &str,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    let oa = op_general(trans, n, k, a, lda);
    for j in 0..n {
        for i in 0..n {
            if (uplo == "L") != (i >= j) {
                continue;
            }
            let mut s = 0.0;
            for l in 0..k {
                s += oa[at(n, i, l)] * oa[at(n, j, l)];
            }
            let v = &mut c[at(ldc, i, j)];
            *v = if beta == 0.0 { 0.0 } else { beta * *v } + alpha * s;
        }
    }
}

/// `C := alpha (op(A) op(B)^T + op(B) op(A)^T) + beta C` on the `uplo` triangle.
#[allow(clippy::too_many_arguments)]
pub fn dsyr2k(
    uplo: &str,
    trans: &str,
    n: usize,
    k: usize,
    alpha: f64,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    let oa = op_general(trans, n, k, a, lda);
    let ob = op_general(trans, n, k, b, ldb);
    for j in 0..n {
        for i in 0..n {
            if (uplo == "L") != (i >= j) {
                continue;
            }
            let mut s = 0.0;
            for l in 0..k {
                s += oa[at(n, i, l)] * ob[at(n, j, l)] + ob[at(n, i, l)] * oa[at(n, j, l)];
            }
            let v = &mut c[at(ldc, i, j)];
            *v = if beta == 0.0 { 0.0 } else { beta * *v } + alpha * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_identity() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let mut c = [9.0; 4];
        dgemm("N", "N", 2, 2, 2, 1.0, &id, 2, &b, 2, 0.0, &mut c, 2);
        assert_eq!(c, b);
    }

    #[test]
    fn trsm_diagonal() {
        let a = [2.0, 0.0, 0.0, 2.0];
        let mut b = [1.0; 4];
        dtrsm("L", "L", "N", "N", 2, 2, 1.0, &a, 2, &mut b, 2).unwrap();
        assert_eq!(b, [0.5; 4]);
    }

    #[test]
    fn trsm_singular() {
        let a = [0.0, 1.0, 0.0, 2.0];
        let mut b = [1.0; 4];
        assert!(matches!(
            dtrsm("L", "L", "N", "N", 2, 2, 1.0, &a, 2, &mut b, 2),
            Err(Error::Singular(0))
        ));
    }

    #[test]
    fn trsm_inverts_trmm() {
        let a = [2.0, 1.0, 7.0, 3.0];
        let b0 = [1.0, -2.0, 0.5, 4.0, 3.0, 1.0];
        for (side, m, n) in [("L", 2, 3), ("R", 3, 2)] {
            for uplo in ["L", "U"] {
                for tr in ["N", "T"] {
                    let mut b = b0;
                    dtrmm(side, uplo, tr, "N", m, n, 2.0, &a, 2, &mut b, m);
                    dtrsm(side, uplo, tr, "N", m, n, 0.5, &a, 2, &mut b, m).unwrap();
                    for (x, y) in b.iter().zip(&b0) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
