//! Restarted GMRES with right preconditioning, and the bordered systems
//! used to pin down the one-dimensional kernel of the Laplacian-type
//! operators.

use crate::fft::FlatInverse;
use crate::stencil_op::StencilOperator;

pub trait LinearMap {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    /// Target for `‖b − A x‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, restart: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// Final relative residual, recomputed from scratch.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b`, starting from the given `x`.
pub fn gmres(
    a: &dyn LinearMap,
    m: Option<&dyn Preconditioner>,
    b: &[f64],
    x: &mut [f64],
    opts: &GmresOptions,
) -> GmresOutcome {
    let len = a.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return GmresOutcome { iterations: 0, residual: 0.0, converged: true };
    }
    let restart = opts.restart.max(1);
    let mut r = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut iterations = 0;
    let residual_of = |x: &[f64], r: &mut Vec<f64>| {
        a.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm(r)
    };
    let mut rnorm = residual_of(x, &mut r);
    loop {
        if rnorm <= opts.tol * bnorm || iterations >= opts.max_iter {
            break;
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / rnorm).collect());
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = rnorm;
        let mut k = 0;
        while k < restart && iterations < opts.max_iter {
            match m {
                Some(pre) => {
                    pre.apply(&basis[k], &mut z);
                    a.apply(&z, &mut w);
                }
                None => a.apply(&basis[k], &mut w),
            }
            // modified Gram-Schmidt, applied twice for robustness
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    hess[j][k] += c;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let den = hess[k][k].hypot(hess[k + 1][k]);
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / den;
                sn[k] = hess[k + 1][k] / den;
            }
            hess[k][k] = den;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if g[k].abs() <= opts.tol * bnorm * 0.5 || hn <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[i][j] * y[j]).sum();
            y[i] = if hess[i][i] != 0.0 { (g[i] - s) / hess[i][i] } else { 0.0 };
        }
        let mut update = vec![0.0; len];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        match m {
            Some(pre) => {
                pre.apply(&update, &mut z);
                x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
            }
            None => x.iter_mut().zip(&update).for_each(|(xi, ui)| *xi += ui),
        }
        let previous = rnorm;
        rnorm = residual_of(x, &mut r);
        if rnorm >= previous && k < restart {
            // breakdown without progress
            break;
        }
    }
    let residual = rnorm / bnorm;
    GmresOutcome { iterations, residual, converged: residual <= opts.tol }
}

impl LinearMap for StencilOperator {
    fn len(&self) -> usize {
        self.grid().len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        StencilOperator::apply(self, x, y)
    }
}

impl Preconditioner for FlatInverse {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        FlatInverse::apply(self, x, y)
    }
}

/// `[[A, −1], [cᵀ, 0]]` acting on `(ψ, β)`: the operator `A` with a scalar
/// unknown absorbing the constant mode and a linear constraint on `ψ`.
pub struct Bordered<'a> {
    pub op: &'a dyn LinearMap,
    pub constraint: &'a [f64],
}

impl LinearMap for Bordered<'_> {
    fn len(&self) -> usize {
        self.op.len() + 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.op.len();
        self.op.apply(&x[..n], &mut y[..n]);
        let beta = x[n];
        y[..n].iter_mut().for_each(|v| *v -= beta);
        y[n] = dot(self.constraint, &x[..n]);
    }
}

/// Exact inverse of the bordered system with `A` replaced by a
/// constant-coefficient operator whose kernel is the constants.
pub struct BorderedFlat<'a> {
    pub flat: &'a FlatInverse,
    pub constraint: &'a [f64],
}

impl Preconditioner for BorderedFlat<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len() - 1;
        let mean = x[..n].iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = x[..n].iter().map(|v| v - mean).collect();
        self.flat.apply(&centered, &mut y[..n]);
        let csum: f64 = self.constraint.iter().sum();
        let kappa = (x[n] - dot(self.constraint, &y[..n])) / csum;
        y[..n].iter_mut().for_each(|v| *v += kappa);
        y[n] = -mean;
    }
}
