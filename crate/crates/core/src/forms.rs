//! Real differential forms sampled on a grid, stored by coordinate
//! components over strictly increasing multi-indices.
//!
//! A `p`-form on `2n` axes has `C(2n, p)` component fields; component `k`
//! belongs to the `k`-th multi-index of [`multi_indices`] (lexicographic).
//! Antisymmetry holds by construction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{apply_axis, check_grid, Grid, ScalarField};
use crate::hermitian::MAX_DIM;

/// Strictly increasing multi-indices of length `p` from `0..dim`, in
/// lexicographic order.
pub fn multi_indices(dim: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=dim - left {
            cur.push(i);
            rec(i + 1, dim, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if p <= dim {
        rec(0, dim, p, &mut Vec::with_capacity(p), &mut out);
    }
    out
}

/// Position of a strictly increasing multi-index in [`multi_indices`].
pub fn multi_index_position(dim: usize, idx: &[usize]) -> usize {
    // combinatorial number system, lexicographic order
    let p = idx.len();
    let mut pos = 0;
    let mut prev = 0;
    for (k, &i) in idx.iter().enumerate() {
        for j in prev..i {
            pos += binomial(dim - j - 1, p - k - 1);
        }
        prev = i + 1;
    }
    pos
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Sorts `idx` in place; returns the permutation sign, or 0 on a repeat.
pub fn sort_with_sign(idx: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        0.0
    } else {
        sign
    }
}

/// Determinant of a small dense matrix (row-major, `m ≤ MAX_DIM`).
pub(crate) fn small_det(a: &[f64], m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            let mut w = [0.0; MAX_DIM * MAX_DIM];
            w[..m * m].copy_from_slice(&a[..m * m]);
            let mut det = 1.0;
            for col in 0..m {
                let piv = (col..m).max_by(|&r, &s| w[r * m + col].abs().total_cmp(&w[s * m + col].abs())).unwrap();
                if w[piv * m + col] == 0.0 {
                    return 0.0;
                }
                if piv != col {
                    for c in 0..m {
                        w.swap(piv * m + c, col * m + c);
                    }
                    det = -det;
                }
                let d = w[col * m + col];
                det *= d;
                for r in col + 1..m {
                    let f = w[r * m + col] / d;
                    for c in col..m {
                        w[r * m + c] -= f * w[col * m + c];
                    }
                }
            }
            det
        }
    }
}

/// Precomputed index bookkeeping for the pointwise `J` action on `p`-forms.
pub(crate) struct JActionPlan {
    dim: usize,
    p: usize,
    indices: Vec<Vec<usize>>,
}

impl JActionPlan {
    pub fn new(dim: usize, p: usize) -> Self {
        Self { dim, p, indices: multi_indices(dim, p) }
    }

    /// `(Jα)_B = (−1)^p Σ_C α_C det(J[C, B])` where `j[r * dim + c]` is the
    /// coordinate matrix of `J` (`J ∂_c = Σ_r j[r, c] ∂_r`).
    pub fn apply(&self, j: &[f64], alpha: &[f64], out: &mut [f64]) {
        let sign = if self.p % 2 == 0 { 1.0 } else { -1.0 };
        let p = self.p;
        let mut sub = [0.0; MAX_DIM * MAX_DIM];
        for (bi, b) in self.indices.iter().enumerate() {
            let mut acc = 0.0;
            for (ci, c) in self.indices.iter().enumerate() {
                let a = alpha[ci];
                if a == 0.0 {
                    continue;
                }
                for r in 0..p {
                    for s in 0..p {
                        sub[r * p + s] = j[c[r] * self.dim + b[s]];
                    }
                }
                acc += a * small_det(&sub, p);
            }
            out[bi] = sign * acc;
        }
    }
}

/// Pointwise wedge-product bookkeeping: for each output component, the list
/// of `(left, right, sign)` contributions.
pub(crate) struct WedgePlan {
    terms: Vec<Vec<(usize, usize, f64)>>,
}

impl WedgePlan {
    pub fn new(dim: usize, p: usize, q: usize) -> Self {
        let out = multi_indices(dim, p + q);
        let mut terms = vec![Vec::new(); out.len()];
        if p + q <= dim {
            for (ai, a) in multi_indices(dim, p).iter().enumerate() {
                for (bi, b) in multi_indices(dim, q).iter().enumerate() {
                    let mut joined: Vec<usize> = a.iter().chain(b).copied().collect();
                    let s = sort_with_sign(&mut joined);
                    if s != 0.0 {
                        terms[multi_index_position(dim, &joined)].push((ai, bi, s));
                    }
                }
            }
        }
        Self { terms }
    }

    pub fn apply(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.iter().map(|&(i, j, s)| s * a[i] * b[j]).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealForm {
    grid: Grid,
    degree: usize,
    components: Vec<Vec<f64>>,
}

impl RealForm {
    pub fn zeros(grid: Grid, degree: usize) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::UnsupportedDegree(degree));
        }
        let count = binomial(grid.dim(), degree);
        Ok(Self { grid, degree, components: vec![vec![0.0; grid.len()]; count] })
    }

    pub fn from_components(grid: Grid, degree: usize, components: Vec<Vec<f64>>) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::UnsupportedDegree(degree));
        }
        if components.len() != binomial(grid.dim(), degree) || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid(format!(
                "a {degree}-form on {} axes needs {} component fields of length {}",
                grid.dim(),
                binomial(grid.dim(), degree),
                grid.len()
            )));
        }
        Ok(Self { grid, degree, components })
    }

    pub fn from_scalar(f: &ScalarField) -> Self {
        Self { grid: *f.grid(), degree: 0, components: vec![f.values().to_vec()] }
    }

    /// Form with constant components, given as `(multi-index, value)` pairs
    /// (indices in any order; signs are applied).
    pub fn constant(grid: Grid, degree: usize, entries: &[(&[usize], f64)]) -> Result<Self> {
        let mut out = Self::zeros(grid, degree)?;
        for (idx, v) in entries {
            if idx.len() != degree {
                return Err(Error::DegreeMismatch { expected: degree, got: idx.len() });
            }
            let mut sorted = idx.to_vec();
            let s = sort_with_sign(&mut sorted);
            if sorted.iter().any(|&a| a >= grid.dim()) {
                return Err(Error::AxisOutOfRange { axis: *sorted.last().unwrap(), dim: grid.dim() });
            }
            if s != 0.0 {
                let k = multi_index_position(grid.dim(), &sorted);
                out.components[k].iter_mut().for_each(|c| *c += s * v);
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }

    /// Component field for a strictly increasing multi-index.
    pub fn component(&self, idx: &[usize]) -> &[f64] {
        &self.components[multi_index_position(self.grid.dim(), idx)]
    }

    /// Coefficient `α_{i₁…i_p}` at point `p` for any index order.
    pub fn coefficient(&self, point: usize, idx: &[usize]) -> f64 {
        let mut sorted = idx.to_vec();
        let s = sort_with_sign(&mut sorted);
        if s == 0.0 {
            0.0
        } else {
            s * self.component(&sorted)[point]
        }
    }

    /// All components at one point.
    pub fn at(&self, point: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[point]).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn lin_comb(&self, a: f64, other: &RealForm, b: f64) -> Result<RealForm> {
        check_grid(&self.grid, &other.grid)?;
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, got: other.degree });
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
            .collect();
        Ok(RealForm { grid: self.grid, degree: self.degree, components })
    }

    /// Multiplies every component pointwise by `f`.
    pub fn scale_by(&self, f: &ScalarField) -> Result<RealForm> {
        check_grid(&self.grid, f.grid())?;
        let components = self
            .components
            .iter()
            .map(|c| c.iter().zip(f.values()).map(|(x, y)| x * y).collect())
            .collect();
        Ok(RealForm { grid: self.grid, degree: self.degree, components })
    }

    /// Discrete exterior derivative with the grid's stencil order:
    /// `(dα)_B = Σ_k (−1)^k D_{b_k} α_{B∖b_k}`.
    pub fn exterior_derivative(&self) -> Result<RealForm> {
        let dim = self.grid.dim();
        let p = self.degree + 1;
        if p > dim {
            return Err(Error::UnsupportedDegree(p));
        }
        let taps = self.grid.order().first_derivative_taps(self.grid.spacing());
        // derivative of every input component along every axis, computed lazily
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; self.components.len() * dim];
        let mut out = RealForm::zeros(self.grid, p)?;
        for (bi, b) in multi_indices(dim, p).iter().enumerate() {
            let acc = &mut out.components[bi];
            for k in 0..p {
                let rest: Vec<usize> = b.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &v)| v).collect();
                let ci = multi_index_position(dim, &rest);
                let slot = ci * dim + b[k];
                if cache[slot].is_none() {
                    let mut d = vec![0.0; self.grid.len()];
                    apply_axis(&self.grid, &self.components[ci], &mut d, b[k], &taps);
                    cache[slot] = Some(d);
                }
                let d = cache[slot].as_ref().unwrap();
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc.par_iter_mut().zip(d.par_iter()).for_each(|(o, v)| *o += s * v);
            }
        }
        Ok(out)
    }

    pub fn wedge(&self, other: &RealForm) -> Result<RealForm> {
        check_grid(&self.grid, &other.grid)?;
        let dim = self.grid.dim();
        let p = self.degree + other.degree;
        if p > dim {
            return Err(Error::UnsupportedDegree(p));
        }
        let plan = WedgePlan::new(dim, self.degree, other.degree);
        let mut out = RealForm::zeros(self.grid, p)?;
        let ncomp = out.components.len();
        let len = self.grid.len();
        let mut flat = vec![0.0; len * ncomp];
        flat.par_chunks_mut(ncomp).enumerate().for_each(|(pt, o)| {
            plan.apply(&self.at(pt), &other.at(pt), o);
        });
        for (k, comp) in out.components.iter_mut().enumerate() {
            for (pt, c) in comp.iter_mut().enumerate() {
                *c = flat[pt * ncomp + k];
            }
        }
        Ok(out)
    }

    /// Evaluates the form at `point` on real vectors `X₁, …, X_p`.
    pub fn evaluate(&self, point: usize, vectors: &[&[f64]]) -> Result<f64> {
        if vectors.len() != self.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, got: vectors.len() });
        }
        let p = self.degree;
        let mut sub = [0.0; MAX_DIM * MAX_DIM];
        let mut acc = 0.0;
        for (ci, c) in multi_indices(self.grid.dim(), p).iter().enumerate() {
            for r in 0..p {
                for s in 0..p {
                    sub[r * p + s] = vectors[s][c[r]];
                }
            }
            acc += self.components[ci][point] * small_det(&sub, p);
        }
        Ok(acc)
    }
}
