//! Naive reference LAPACK routines on column-major slices.
//!
//! Routines return the LAPACK `info` code: 0 on success, `i > 0` when the
//! `i`-th (1-based) pivot or diagonal element breaks the factorization.

use super::blas::{dense_symmetric, dense_triangle, dgemm};

#[inline]
fn at(ld: usize, i: usize, j: usize) -> usize {
    i + j * ld
}

fn write_triangle(uplo: &str, n: usize, src: &[f64], a: &mut [f64], lda: usize) {
    for j in 0..n {
        for i in 0..n {
            if (uplo == "L") == (i >= j) || i == j {
                a[at(lda, i, j)] = src[at(n, i, j)];
            }
        }
    }
}

/// Cholesky factorization: `A = L L^T` (uplo L) or `A = U^T U` (uplo U).
pub fn dpotf2(uplo: &str, n: usize, a: &mut [f64], lda: usize) -> i32 {
    for j in 0..n {
        let mut d = a[at(lda, j, j)];
        for k in 0..j {
            let v = if uplo == "L" {
                a[at(lda, j, k)]
            } else {
                a[at(lda, k, j)]
            };
            d -= v * v;
        }
        if d <= 0.0 || d.is_nan() {
            a[at(lda, j, j)] = d;
            return (j + 1) as i32;
        }
        let d = d.sqrt();
        a[at(lda, j, j)] = d;
        for i in j + 1..n {
            let mut s = if uplo == "L" {
                a[at(lda, i, j)]
            } else {
                a[at(lda, j, i)]
            };
            for k in 0..j {
                s -= if uplo == "L" {
                    a[at(lda, i, k)] * a[at(lda, j, k)]
                } else {
                    a[at(lda, k, i)] * a[at(lda, k, j)]
                };
            }
            if uplo == "L" {
                a[at(lda, i, j)] = s / d;
            } else {
                a[at(lda, j, i)] = s / d;
            }
        }
    }
    0
}

/// Triangular product: `A := L^T L` (uplo L) or `A := U U^T` (uplo U).
pub fn dlauu2(uplo: &str, n: usize, a: &mut [f64], lda: usize) -> i32 {
    let t = dense_triangle(uplo, "N", n, a, lda);
    let mut p = vec![0.0; n * n];
    if uplo == "L" {
        dgemm("T", "N", n, n, n, 1.0, &t, n, &t, n, 0.0, &mut p, n);
    } else {
        dgemm("N", "T", n, n, n, 1.0, &t, n, &t, n, 0.0, &mut p, n);
    }
    write_triangle(uplo, n, &p, a, lda);
    0
}

/// Inverse of a dense triangular matrix (lower if `lower`), or the failing index.
fn invert_dense(n: usize, t: &[f64], lower: bool) -> Result<Vec<f64>, usize> {
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let order: Vec<usize> = if lower {
            (0..n).collect()
        } else {
            (0..n).rev().collect()
        };
        for &i in &order {
            let mut s = e[i];
            for j in 0..n {
                if j != i {
                    s -= t[at(n, i, j)] * inv[at(n, j, c)];
                }
            }
            let d = t[at(n, i, i)];
            if d == 0.0 {
                return Err(i);
            }
            inv[at(n, i, c)] = s / d;
        }
    }
    Ok(inv)
}

/// Triangular inversion in place.
pub fn dtrti2(uplo: &str, diag: &str, n: usize, a: &mut [f64], lda: usize) -> i32 {
    let t = dense_triangle(uplo, diag, n, a, lda);
    match invert_dense(n, &t, uplo == "L") {
        Ok(inv) => {
            for j in 0..n {
                for i in 0..n {
                    let stored = if uplo == "L" { i > j } else { i < j };
                    if stored || (i == j && diag == "N") {
                        a[at(lda, i, j)] = inv[at(n, i, j)];
                    }
                }
            }
            0
        }
        Err(i) => (i + 1) as i32,
    }
}

/// Reduction of a symmetric-definite generalized eigenproblem to standard form.
///
/// itype 1: `A := inv(L) A inv(L^T)` or `inv(U^T) A inv(U)`;
/// itype 2, 3: `A := L^T A L` or `U A U^T`. `B` holds the Cholesky factor.
#[allow(clippy::too_many_arguments)]
pub fn dsygs2(
    itype: &str,
    uplo: &str,
    n: usize,
    a: &mut [f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
) -> i32 {
    let s = dense_symmetric(uplo, n, a, lda);
    let t = dense_triangle(uplo, "N", n, b, ldb);
    // Left factor F such that the result is F S F^T.
    let f = if itype == "1" {
        let inv = match invert_dense(n, &t, uplo == "L") {
            Ok(v) => v,
            Err(i) => return (i + 1) as i32,
        };
        if uplo == "L" {
            inv
        } else {
            transpose(n, &inv)
        }
    } else if uplo == "L" {
        transpose(n, &t)
    } else {
        t
    };
    let mut fs = vec![0.0; n * n];
    dgemm("N", "N", n, n, n, 1.0, &f, n, &s, n, 0.0, &mut fs, n);
    let mut r = vec![0.0; n * n];
    dgemm("N", "T", n, n, n, 1.0, &fs, n, &f, n, 0.0, &mut r, n);
    write_triangle(uplo, n, &r, a, lda);
    0
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

/// LU factorization with partial pivoting; `ipiv` receives 1-based row indices.
pub fn dgetf2(m: usize, n: usize, a: &mut [f64], lda: usize, ipiv: &mut [f64]) -> i32 {
    let mut info = 0;
    for j in 0..m.min(n) {
        let mut p = j;
        for i in j + 1..m {
            if a[at(lda, i, j)].abs() > a[at(lda, p, j)].abs() {
                p = i;
            }
        }
        ipiv[j] = (p + 1) as f64;
        if a[at(lda, p, j)] == 0.0 {
            if info == 0 {
                info = (j + 1) as i32;
            }
            continue;
        }
        if p != j {
            for c in 0..n {
                a.swap(at(lda, p, c), at(lda, j, c));
            }
        }
        let d = a[at(lda, j, j)];
        for i in j + 1..m {
            a[at(lda, i, j)] /= d;
        }
        for c in j + 1..n {
            let u = a[at(lda, j, c)];
            for i in j + 1..m {
                a[at(lda, i, c)] -= a[at(lda, i, j)] * u;
            }
        }
    }
    info
}

/// Householder reflector annihilating `x[1..]`: returns `(beta, tau)` and
/// scales `x[1..]` into the reflector's tail.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let xnorm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if xnorm == 0.0 {
        return (alpha, 0.0);
    }
    let norm = alpha.hypot(xnorm);
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    (beta, tau)
}

/// QR factorization; reflectors stored below the diagonal, `work` of length `n`.
pub fn dgeqr2(m: usize, n: usize, a: &mut [f64], lda: usize, tau: &mut [f64], work: &mut [f64]) -> i32 {
    for j in 0..m.min(n) {
        let mut col: Vec<f64> = (j..m).map(|i| a[at(lda, i, j)]).collect();
        let (beta, t) = householder(&mut col);
        tau[j] = t;
        col[0] = 1.0;
        // Apply H = I - t v v^T to the trailing columns.
        for c in j + 1..n {
            let w: f64 = (j..m).map(|i| col[i - j] * a[at(lda, i, c)]).sum();
            work[c] = w;
            for i in j..m {
                a[at(lda, i, c)] -= t * col[i - j] * w;
            }
        }
        a[at(lda, j, j)] = beta;
        for i in j + 1..m {
            a[at(lda, i, j)] = col[i - j];
        }
    }
    0
}

/// Unit lower trapezoidal reflector matrix with implicit unit diagonal.
fn reflectors(rows: usize, k: usize, v: &[f64], ldv: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * k];
    for j in 0..k {
        for i in 0..rows {
            out[at(rows, i, j)] = match i.cmp(&j) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => v[at(ldv, i, j)],
            };
        }
    }
    out
}

/// Triangular factor `T` of a forward, columnwise block reflector
/// `H = I - V T V^T`.
#[allow(clippy::too_many_arguments)]
pub fn dlarft(n: usize, k: usize, v: &[f64], ldv: usize, tau: &[f64], t: &mut [f64], ldt: usize) {
    let vd = reflectors(n, k, v, ldv);
    for i in 0..k {
        // w = -tau_i V(:, 0..i)^T v_i, then T(0..i, i) = T(0..i, 0..i) w.
        let w: Vec<f64> = (0..i)
            .map(|c| -tau[i] * (0..n).map(|r| vd[at(n, r, c)] * vd[at(n, r, i)]).sum::<f64>())
            .collect();
        for r in 0..i {
            t[at(ldt, r, i)] = (r..i).map(|c| t[at(ldt, r, c)] * w[c]).sum();
        }
        t[at(ldt, i, i)] = tau[i];
    }
}

/// Applies a forward, columnwise block reflector `H = I - V T V^T`:
/// `C := op(H) C` (side L) or `C := C op(H)` (side R).
#[allow(clippy::too_many_arguments)]
pub fn dlarfb(
    side: &str,
    trans: &str,
    m: usize,
    n: usize,
    k: usize,
    v: &[f64],
    ldv: usize,
    t: &[f64],
    ldt: usize,
    c: &mut [f64],
    ldc: usize,
    work: &mut [f64],
    ldwork: usize,
) {
    let tt = dense_triangle("U", "N", k, t, ldt);
    if side == "L" {
        let vd = reflectors(m, k, v, ldv);
        // W = C^T V  (n x k), W := W op(T)^T, C := C - V W^T.
        let mut w = vec![0.0; n * k];
        dgemm("T", "N", n, k, m, 1.0, c, ldc, &vd, m, 0.0, &mut w, n.max(1));
        let mut w2 = vec![0.0; n * k];
        let opt = if trans == "N" { "T" } else { "N" };
        dgemm("N", opt, n, k, k, 1.0, &w, n.max(1), &tt, k.max(1), 0.0, &mut w2, n.max(1));
        dgemm("N", "T", m, n, k, -1.0, &vd, m.max(1), &w2, n.max(1), 1.0, c, ldc);
        for j in 0..k {
            for i in 0..n {
                work[at(ldwork, i, j)] = w2[at(n, i, j)];
            }
        }
    } else {
        let vd = reflectors(n, k, v, ldv);
        // W = C V  (m x k), W := W op(T), C := C - W V^T.
        let mut w = vec![0.0; m * k];
        dgemm("N", "N", m, k, n, 1.0, c, ldc, &vd, n.max(1), 0.0, &mut w, m.max(1));
        let mut w2 = vec![0.0; m * k];
        dgemm("N", trans, m, k, k, 1.0, &w, m.max(1), &tt, k.max(1), 0.0, &mut w2, m.max(1));
        dgemm("N", "T", m, n, k, -1.0, &w2, m.max(1), &vd, n.max(1), 1.0, c, ldc);
        for j in 0..k {
            for i in 0..m {
                work[at(ldwork, i, j)] = w2[at(m, i, j)];
            }
        }
    }
}

/// Row interchanges `k1..=k2` (1-based) of the `n` columns of `A`.
///
/// `ipiv[i - 1]` names the row swapped with row `i`; a negative `incx`
/// applies the interchanges in reverse order.
pub fn dlaswp(n: usize, a: &mut [f64], lda: usize, k1: usize, k2: usize, ipiv: &[f64], incx: isize) {
    if k1 == 0 || k2 < k1 {
        return;
    }
    let rows: Vec<usize> = if incx > 0 {
        (k1..=k2).collect()
    } else {
        (k1..=k2).rev().collect()
    };
    for i in rows {
        let p = ipiv[i - 1] as usize;
        if p != i {
            for c in 0..n {
                a.swap(at(lda, i - 1, c), at(lda, p - 1, c));
            }
        }
    }
}

/// Solves `op(A) X + isgn X op(B) = scale C` for upper triangular `A`, `B`,
/// overwriting `C` with `X`. Returns `(info, scale)`; info 1 flags a
/// perturbed near-singular system.
#[allow(clippy::too_many_arguments)]
pub fn dtrsyl(
    trana: &str,
    tranb: &str,
    isgn: &str,
    m: usize,
    n: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
    ldc: usize,
) -> (i32, f64) {
    let sgn = if isgn == "-1" { -1.0 } else { 1.0 };
    let mut ta = dense_triangle("U", "N", m, a, lda);
    let mut tb = dense_triangle("U", "N", n, b, ldb);
    if trana == "T" {
        ta = transpose(m, &ta);
    }
    if tranb == "T" {
        tb = transpose(n, &tb);
    }
    let a_upper = trana == "N";
    let b_upper = tranb == "N";
    let rows: Vec<usize> = if a_upper {
        (0..m).rev().collect()
    } else {
        (0..m).collect()
    };
    let cols: Vec<usize> = if b_upper {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    };
    let mut x = vec![0.0; m * n];
    let mut info = 0;
    for &l in &cols {
        for &k in &rows {
            let mut s = c[at(ldc, k, l)];
            for j in 0..m {
                if j != k {
                    s -= ta[at(m, k, j)] * x[at(m, j, l)];
                }
            }
            for j in 0..n {
                if j != l {
                    s -= sgn * x[at(m, k, j)] * tb[at(n, j, l)];
                }
            }
            let mut d = ta[at(m, k, k)] + sgn * tb[at(n, l, l)];
            if d == 0.0 {
                d = f64::EPSILON;
                info = 1;
            }
            x[at(m, k, l)] = s / d;
        }
    }
    for j in 0..n {
        for i in 0..m {
            c[at(ldc, i, j)] = x[at(m, i, j)];
        }
    }
    (info, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lower_example(n: usize) -> Vec<f64> {
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                l[i + j * n] = if i == j { 2.0 + j as f64 } else { 0.3 * (i + 2 * j) as f64 - 0.7 };
            }
        }
        l
    }

    #[test]
    fn potf2_recovers_factor() {
        let n = 4;
        let l = lower_example(n);
        let mut a = vec![0.0; n * n];
        dgemm("N", "T", n, n, n, 1.0, &l, n, &l, n, 0.0, &mut a, n);
        assert_eq!(dpotf2("L", n, &mut a, n), 0);
        for j in 0..n {
            for i in j..n {
                assert!((a[i + j * n] - l[i + j * n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trti2_inverts() {
        let n = 4;
        let l = lower_example(n);
        let mut inv = l.clone();
        assert_eq!(dtrti2("L", "N", n, &mut inv, n), 0);
        let mut p = vec![0.0; n * n];
        dgemm("N", "N", n, n, n, 1.0, &l, n, &inv, n, 0.0, &mut p, n);
        for j in 0..n {
            for i in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i + j * n] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn getf2_reconstructs() {
        let (m, n) = (5, 3);
        let a0: Vec<f64> = (0..m * n).map(|v| ((v * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut a = a0.clone();
        let mut ipiv = vec![0.0; 3];
        assert_eq!(dgetf2(m, n, &mut a, m, &mut ipiv), 0);
        let mut lmat = vec![0.0; m * n];
        let mut u = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..m {
                if i > j {
                    lmat[i + j * m] = a[i + j * m];
                } else if i == j {
                    lmat[i + j * m] = 1.0;
                }
                if i <= j {
                    u[i + j * n] = a[i + j * m];
                }
            }
        }
        let mut lu = vec![0.0; m * n];
        dgemm("N", "N", m, n, n, 1.0, &lmat, m, &u, n, 0.0, &mut lu, m);
        let mut pa = a0;
        dlaswp(n, &mut pa, m, 1, 3, &ipiv, 1);
        for (x, y) in lu.iter().zip(&pa) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn qr_blocked_matches_unblocked() {
        let (m, n, k) = (6, 5, 2);
        let a0: Vec<f64> = (0..m * n).map(|v| ((v * 5 + 1) % 13) as f64 - 6.0).collect();
        let mut full = a0.clone();
        let mut tau = vec![0.0; n];
        let mut work = vec![0.0; n];
        dgeqr2(m, n, &mut full, m, &mut tau, &mut work);

        let mut a = a0;
        let mut tau2 = vec![0.0; k];
        let mut panel: Vec<f64> = a[..m * k].to_vec();
        dgeqr2(m, k, &mut panel, m, &mut tau2, &mut work);
        a[..m * k].copy_from_slice(&panel);
        let mut t = vec![0.0; k * k];
        dlarft(m, k, &panel, m, &tau2, &mut t, k);
        let mut w = vec![0.0; (n - k) * k];
        dlarfb("L", "T", m, n - k, k, &panel, m, &t, k, &mut a[m * k..], m, &mut w, n - k);
        // The first k rows of the updated trailing columns belong to R.
        for j in k..n {
            for i in 0..k {
                assert!((a[i + j * m] - full[i + j * m]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trsyl_solves() {
        let (m, n) = (3, 2);
        let a = [1.0, 0.0, 0.0, 2.0, 3.0, 0.0, -1.0, 0.5, 4.0];
        let b = [2.0, 0.0, 1.0, 5.0];
        let c0 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        for (ta, tb, s) in [("N", "N", "1"), ("T", "N", "-1"), ("N", "T", "1"), ("T", "T", "1")] {
            let mut x = c0;
            let (info, _) = dtrsyl(ta, tb, s, m, n, &a, m, &b, n, &mut x, m);
            assert_eq!(info, 0);
            let mut r = [0.0; 6];
            dgemm(ta, "N", m, n, m, 1.0, &a, m, &x, m, 0.0, &mut r, m);
            let sg = if s == "1" { 1.0 } else { -1.0 };
            dgemm("N", tb, m, n, n, sg, &x, m, &b, n, 1.0, &mut r, m);
            for (p, q) in r.iter().zip(&c0) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }
}
