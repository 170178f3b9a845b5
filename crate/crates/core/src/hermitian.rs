//! Dense kernels for the small per-point matrices (`n ≤ 5`, `2n ≤ 10`).
//!
//! Matrices are row-major slices. Nothing here allocates for sizes within
//! [`MAX_DIM`].

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Largest supported half dimension. Grids with `N ≥ 8` cannot exceed it.
pub const MAX_HALF_DIM: usize = 5;
pub const MAX_DIM: usize = 2 * MAX_HALF_DIM;

/// Symmetrizes a complex `n×n` matrix in place to `(A + A†)/2` and returns
/// the Frobenius norm of `A − A†` before symmetrization.
pub fn hermitize(a: &mut [Complex64], n: usize) -> f64 {
    let mut defect = 0.0;
    for i in 0..n {
        for j in i..n {
            let x = a[i * n + j];
            let y = a[j * n + i].conj();
            let d = (x - y).norm_sqr();
            defect += if i == j { d } else { 2.0 * d };
            let m = 0.5 * (x + y);
            a[i * n + j] = m;
            a[j * n + i] = m.conj();
        }
    }
    defect.sqrt()
}

/// Cholesky factorization of a Hermitian positive definite matrix.
///
/// On success returns `log det A` and writes `A⁻¹` into `inv`. Returns `None`
/// when a pivot is not strictly positive.
pub fn cholesky_logdet_inverse(a: &[Complex64], n: usize, inv: &mut [Complex64]) -> Option<f64> {
    let mut l = [Complex64::new(0.0, 0.0); MAX_HALF_DIM * MAX_HALF_DIM];
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        logdet += 2.0 * ljj.ln();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    // A⁻¹ = L^{-†} L^{-1}; solve column by column.
    for c in 0..n {
        let mut y = [Complex64::new(0.0, 0.0); MAX_HALF_DIM];
        for i in 0..n {
            let mut s = if i == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * inv[k * n + c];
            }
            inv[i * n + c] = s / l[i * n + i].re;
        }
    }
    Some(logdet)
}

/// Eigenvalues (ascending) of a Hermitian `n×n` matrix.
pub fn hermitian_eigenvalues(a: &[Complex64], n: usize) -> Vec<f64> {
    match n {
        1 => vec![a[0].re],
        2 => {
            let (p, q) = (a[0].re, a[3].re);
            let mid = 0.5 * (p + q);
            let rad = (0.25 * (p - q) * (p - q) + a[1].norm_sqr()).sqrt();
            vec![mid - rad, mid + rad]
        }
        _ => {
            // real embedding [[Re, -Im], [Im, Re]] doubles every eigenvalue
            let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
                let z = a[(r % n) * n + (c % n)];
                match (r < n, c < n) {
                    (true, true) | (false, false) => z.re,
                    (true, false) => -z.im,
                    (false, true) => z.im,
                }
            });
            let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev.into_iter().step_by(2).collect()
        }
    }
}

pub fn hermitian_min_eigenvalue(a: &[Complex64], n: usize) -> f64 {
    hermitian_eigenvalues(a, n)[0]
}

pub fn hermitian_max_eigenvalue(a: &[Complex64], n: usize) -> f64 {
    *hermitian_eigenvalues(a, n).last().unwrap()
}

/// Solves `A x = b` for a complex `m×m` system by Gaussian elimination with
/// partial pivoting. `b` is overwritten by `x`. Returns `false` if a pivot
/// falls below `tol` times the largest entry.
pub fn complex_solve(a: &[Complex64], m: usize, b: &mut [Complex64], tol: f64) -> bool {
    let mut w = [Complex64::new(0.0, 0.0); MAX_DIM * MAX_DIM];
    w[..m * m].copy_from_slice(&a[..m * m]);
    // squared moduli avoid hypot in the pivot search
    let scale2 = w[..m * m].iter().fold(0.0f64, |s, z| s.max(z.norm_sqr()));
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&r, &s| w[r * m + col].norm_sqr().total_cmp(&w[s * m + col].norm_sqr()))
            .unwrap();
        if w[piv * m + col].norm_sqr() <= tol * tol * scale2 {
            return false;
        }
        if piv != col {
            for c in 0..m {
                w.swap(piv * m + c, col * m + c);
            }
            b.swap(piv, col);
        }
        let d = w[col * m + col];
        for r in col + 1..m {
            let f = w[r * m + col] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in col..m {
                let v = w[col * m + c];
                w[r * m + c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    for r in (0..m).rev() {
        let mut s = b[r];
        for c in r + 1..m {
            s -= w[r * m + c] * b[c];
        }
        b[r] = s / w[r * m + r];
    }
    true
}

/// Inverts a real `m×m` matrix; returns the determinant, or `None` if singular.
pub fn real_inverse(a: &[f64], m: usize, inv: &mut [f64]) -> Option<f64> {
    let mut w = [0.0; MAX_DIM * MAX_DIM];
    w[..m * m].copy_from_slice(&a[..m * m]);
    inv[..m * m].fill(0.0);
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    let scale = w[..m * m].iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut det = 1.0;
    for col in 0..m {
        let piv = (col..m).max_by(|&r, &s| w[r * m + col].abs().total_cmp(&w[s * m + col].abs())).unwrap();
        if w[piv * m + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for c in 0..m {
                w.swap(piv * m + c, col * m + c);
                inv.swap(piv * m + c, col * m + c);
            }
            det = -det;
        }
        let d = w[col * m + col];
        det *= d;
        for c in 0..m {
            w[col * m + c] /= d;
            inv[col * m + c] /= d;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = w[r * m + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..m {
                w[r * m + c] -= f * w[col * m + c];
                inv[r * m + c] -= f * inv[col * m + c];
            }
        }
    }
    Some(det)
}

/// Real symmetric eigendecomposition, eigenvalues descending; eigenvectors
/// are the columns of the returned matrix.
pub fn symmetric_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = 0.5 * (a + a.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), a.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}
