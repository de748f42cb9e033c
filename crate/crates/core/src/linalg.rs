//! Small dense kernels on column-major slices.
//!
//! Frames are stored as flat arrays of `M×u` blocks; these helpers work on
//! those blocks in place so the per-step scans do not allocate.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin QR of the `m×u` column-major block `a` (overwritten by `Q`), with
/// `R` (`u×u`, column-major, upper triangular) written to `r`. The diagonal
/// of `R` is positive. Modified Gram-Schmidt with one reorthogonalization
/// pass. Returns the smallest diagonal entry of `R`.
pub fn qr_positive(a: &mut [f64], m: usize, u: usize, r: &mut [f64]) -> f64 {
    debug_assert_eq!(a.len(), m * u);
    debug_assert_eq!(r.len(), u * u);
    r.iter_mut().for_each(|x| *x = 0.0);
    let mut min_diag = f64::INFINITY;
    for j in 0..u {
        for _pass in 0..2 {
            for i in 0..j {
                let (head, tail) = a.split_at_mut(j * m);
                let qi = &head[i * m..(i + 1) * m];
                let aj = &mut tail[..m];
                let c = dot(qi, aj);
                axpy(-c, qi, aj);
                r[i + j * u] += c;
            }
        }
        let col = &mut a[j * m..(j + 1) * m];
        let nrm = norm(col);
        r[j + j * u] = nrm;
        min_diag = min_diag.min(nrm);
        if nrm > 0.0 {
            col.iter_mut().for_each(|x| *x /= nrm);
        }
    }
    min_diag
}

/// Solves `R x = b` in place for upper-triangular column-major `R`.
pub fn solve_upper(r: &[f64], u: usize, b: &mut [f64]) {
    for i in (0..u).rev() {
        let mut s = b[i];
        for k in i + 1..u {
            s -= r[i + k * u] * b[k];
        }
        b[i] = s / r[i + i * u];
    }
}

/// Solves `Rᵀ x = b` in place (equivalently the row system `xᵀ R = bᵀ`).
pub fn solve_upper_transpose(r: &[f64], u: usize, b: &mut [f64]) {
    for i in 0..u {
        let mut s = b[i];
        for k in 0..i {
            s -= r[k + i * u] * b[k];
        }
        b[i] = s / r[i + i * u];
    }
}

/// Inverse of an upper-triangular column-major matrix.
pub fn upper_inverse(r: &[f64], u: usize) -> Vec<f64> {
    let mut inv = vec![0.0; u * u];
    for j in 0..u {
        let col = &mut inv[j * u..(j + 1) * u];
        col[j] = 1.0;
        solve_upper(r, u, col);
    }
    inv
}

/// `X = B R⁻¹` in place for column-major `B: m×u` and upper-triangular `R`.
pub fn right_solve_upper(b: &mut [f64], m: usize, u: usize, r: &[f64]) {
    for k in 0..u {
        let (done, rest) = b.split_at_mut(k * m);
        let col = &mut rest[..m];
        for j in 0..k {
            axpy(-r[j + k * u], &done[j * m..(j + 1) * m], col);
        }
        let d = r[k + k * u];
        col.iter_mut().for_each(|v| *v /= d);
    }
}

/// `C = Aᵀ B` for column-major `A: m×p`, `B: m×q`; `C` is `p×q` column-major.
pub fn at_b(a: &[f64], b: &[f64], m: usize, p: usize, q: usize, c: &mut [f64]) {
    for j in 0..q {
        let bj = &b[j * m..(j + 1) * m];
        for i in 0..p {
            c[i + j * p] = dot(&a[i * m..(i + 1) * m], bj);
        }
    }
}

/// `y = A x` for column-major `A: m×p`.
pub fn a_x(a: &[f64], x: &[f64], m: usize, p: usize, y: &mut [f64]) {
    y[..m].iter_mut().for_each(|v| *v = 0.0);
    for j in 0..p {
        axpy(x[j], &a[j * m..(j + 1) * m], y);
    }
}

/// `y = Aᵀ x` for column-major `A: m×p`.
pub fn at_x(a: &[f64], x: &[f64], m: usize, p: usize, y: &mut [f64]) {
    for j in 0..p {
        y[j] = dot(&a[j * m..(j + 1) * m], x);
    }
}

/// Determinant by LU with partial pivoting (small matrices only).
pub fn det(a: &[f64], n: usize) -> f64 {
    nalgebra::DMatrix::from_column_slice(n, n, a).determinant()
}
