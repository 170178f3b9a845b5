//! Almost Hermitian structures induced by a global complex frame.
//!
//! A [`FrameModel`] supplies, at any coordinate point, the coefficients
//! `E_i^α` of a frame `e_i = Σ_α E_i^α ∂_α` of `T^{1,0}` together with their
//! analytic first derivatives. Everything else is derived pointwise:
//!
//! * the real frame `f_{2k} = √2 Re e_k`, `f_{2k+1} = −√2 Im e_k`;
//! * `J f_{2k} = f_{2k+1}`, `J f_{2k+1} = −f_{2k}`;
//! * the metric `g` making `{f_a}` orthonormal (times a constant `gram`, so
//!   that `g(e_i, ē_j) = gram·δ_ij`), and `ω(X, Y) = g(JX, Y)`.
//!
//! [`Geometry`] samples a model on a grid and caches what the operators need
//! at every point: the frame coefficients on their support and the
//! first-order coefficients `c_ij^β` of `∂∂̄`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::hermitian::{complex_solve, real_inverse, MAX_DIM};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Analytic description of a global `(1,0)`-frame.
pub trait FrameModel: Send + Sync + fmt::Debug {
    fn half_dim(&self) -> usize;

    fn name(&self) -> String;

    /// Writes `E_i^α` into `out[i * 2n + α]`.
    fn frame(&self, x: &[f64], out: &mut [Complex64]);

    /// Writes `∂_β E_i^α` into `out[(i * 2n + α) * 2n + β]`.
    fn frame_derivative(&self, x: &[f64], out: &mut [Complex64]);
}

/// Frame data at a single coordinate point.
#[derive(Clone, Debug)]
pub struct PointFrame {
    pub half_dim: usize,
    pub dim: usize,
    /// `E_i^α` at `[i * dim + α]`.
    pub e: Vec<Complex64>,
    /// `∂_β E_i^α` at `[(i * dim + α) * dim + β]`.
    pub de: Vec<Complex64>,
    /// Real frame matrix: column `a` is `f_a`, entry `[α * dim + a]`.
    pub f: Vec<f64>,
    pub f_inv: Vec<f64>,
    pub det_f: f64,
    pub gram: f64,
}

impl PointFrame {
    pub fn new(model: &dyn FrameModel, x: &[f64], gram: f64, point: usize) -> Result<Self> {
        let n = model.half_dim();
        let dim = 2 * n;
        let mut e = vec![ZERO; n * dim];
        let mut de = vec![ZERO; n * dim * dim];
        model.frame(x, &mut e);
        model.frame_derivative(x, &mut de);
        let f = real_frame(&e, n);
        let mut f_inv = vec![0.0; dim * dim];
        let det_f = real_inverse(&f, dim, &mut f_inv).ok_or(Error::FrameDegenerate { point })?;
        if !e.iter().chain(&de).all(|z| z.is_finite()) {
            return Err(Error::FrameDegenerate { point });
        }
        Ok(Self { half_dim: n, dim, e, de, f, f_inv, det_f, gram })
    }

    /// Coordinate matrix of `J`: `J ∂_c = Σ_r j[r * dim + c] ∂_r`.
    pub fn j(&self) -> Vec<f64> {
        let d = self.dim;
        // J = F J0 F⁻¹ with J0 e_{2k} = e_{2k+1}
        let mut fj0 = vec![0.0; d * d];
        for r in 0..d {
            for k in 0..self.half_dim {
                fj0[r * d + 2 * k] = self.f[r * d + 2 * k + 1];
                fj0[r * d + 2 * k + 1] = -self.f[r * d + 2 * k];
            }
        }
        matmul(&fj0, &self.f_inv, d)
    }

    /// Covariant metric `g_{αβ} = gram (F⁻ᵀ F⁻¹)_{αβ}`.
    pub fn metric(&self) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                g[a * d + b] = self.gram * (0..d).map(|k| self.f_inv[k * d + a] * self.f_inv[k * d + b]).sum::<f64>();
            }
        }
        g
    }

    /// Contravariant metric `g^{αβ} = (F Fᵀ)^{αβ} / gram`.
    pub fn inverse_metric(&self) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                g[a * d + b] = (0..d).map(|k| self.f[a * d + k] * self.f[b * d + k]).sum::<f64>() / self.gram;
            }
        }
        g
    }

    /// `ω_{αβ} = g(J∂_α, ∂_β)`.
    pub fn omega(&self) -> Vec<f64> {
        let d = self.dim;
        let j = self.j();
        let g = self.metric();
        let mut w = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                w[a * d + b] = (0..d).map(|c| j[c * d + a] * g[c * d + b]).sum();
            }
        }
        w
    }

    /// Riemannian volume density `√det g = gram^n / |det F|`.
    pub fn density(&self) -> f64 {
        self.gram.powi(self.half_dim as i32) / self.det_f.abs()
    }

    /// `∂_γ F^α_a` at `[(α * dim + a) * dim + γ]`.
    pub fn real_frame_derivative(&self) -> Vec<f64> {
        let d = self.dim;
        let s = std::f64::consts::SQRT_2;
        let mut out = vec![0.0; d * d * d];
        for k in 0..self.half_dim {
            for a in 0..d {
                for c in 0..d {
                    let z = self.de[(k * d + a) * d + c];
                    out[(a * d + 2 * k) * d + c] = s * z.re;
                    out[(a * d + 2 * k + 1) * d + c] = -s * z.im;
                }
            }
        }
        out
    }

    /// `∂_γ g^{αβ}` at `[(α * dim + β) * dim + γ]`.
    pub fn inverse_metric_derivative(&self) -> Vec<f64> {
        let d = self.dim;
        let df = self.real_frame_derivative();
        let mut out = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += df[(a * d + k) * d + c] * self.f[b * d + k] + self.f[a * d + k] * df[(b * d + k) * d + c];
                    }
                    out[(a * d + b) * d + c] = s / self.gram;
                }
            }
        }
        out
    }

    /// `∂_γ log √det g = −tr(F⁻¹ ∂_γ F)`.
    pub fn log_density_gradient(&self) -> Vec<f64> {
        let d = self.dim;
        let df = self.real_frame_derivative();
        (0..d)
            .map(|c| {
                let mut s = 0.0;
                for a in 0..d {
                    for k in 0..d {
                        s += self.f_inv[a * d + k] * df[(k * d + a) * d + c];
                    }
                }
                -s
            })
            .collect()
    }

    /// Christoffel symbols `Γ^α_{βγ}` of `g` at `[(α * dim + β) * dim + γ]`.
    pub fn christoffel(&self) -> Vec<f64> {
        let d = self.dim;
        let mut gamma = vec![0.0; d * d * d];
        self.christoffel_into(&mut gamma);
        gamma
    }

    /// [`PointFrame::christoffel`] into a caller-provided buffer of length `dim³`.
    pub fn christoffel_into(&self, gamma: &mut [f64]) {
        let d = self.dim;
        let s2 = std::f64::consts::SQRT_2;
        let fi = &self.f_inv;
        // ∂_c g_{ab} = −gram Σ_k (A_{ka} F⁻¹_{kb} + F⁻¹_{ka} A_{kb}), A = F⁻¹ ∂_c F F⁻¹
        let mut dg = vec![0.0; d * d * d];
        let mut dfc = [0.0; MAX_DIM * MAX_DIM];
        let mut t = [0.0; MAX_DIM * MAX_DIM];
        let mut a_mat = [0.0; MAX_DIM * MAX_DIM];
        for c in 0..d {
            for k in 0..self.half_dim {
                for a in 0..d {
                    let z = self.de[(k * d + a) * d + c];
                    dfc[a * d + 2 * k] = s2 * z.re;
                    dfc[a * d + 2 * k + 1] = -s2 * z.im;
                }
            }
            matmul_into(fi, &dfc, d, &mut t);
            matmul_into(&t, fi, d, &mut a_mat);
            for a in 0..d {
                for b in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += a_mat[k * d + a] * fi[k * d + b] + fi[k * d + a] * a_mat[k * d + b];
                    }
                    dg[(a * d + b) * d + c] = -self.gram * s;
                }
            }
        }
        let mut g_inv = [0.0; MAX_DIM * MAX_DIM];
        for a in 0..d {
            for b in 0..d {
                g_inv[a * d + b] = (0..d).map(|k| self.f[a * d + k] * self.f[b * d + k]).sum::<f64>() / self.gram;
            }
        }
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += g_inv[a * d + m] * (dg[(m * d + c) * d + b] + dg[(m * d + b) * d + c] - dg[(b * d + c) * d + m]);
                    }
                    gamma[(a * d + b) * d + c] = 0.5 * s;
                }
            }
        }
    }

    /// Coordinate components of `[e_i, ē_j]`.
    pub fn bracket(&self, i: usize, j: usize) -> Vec<Complex64> {
        let d = self.dim;
        (0..d)
            .map(|a| {
                let mut s = ZERO;
                for b in 0..d {
                    s += self.e[i * d + b] * self.de[(j * d + a) * d + b].conj()
                        - self.e[j * d + b].conj() * self.de[(i * d + a) * d + b];
                }
                s
            })
            .collect()
    }

    /// Coefficients of a complex coordinate vector in the basis
    /// `(e_1, …, e_n, ē_1, …, ē_n)`.
    pub fn decompose(&self, v: &[Complex64], point: usize) -> Result<Vec<Complex64>> {
        let d = self.dim;
        let n = self.half_dim;
        let mut m = [ZERO; MAX_DIM * MAX_DIM];
        for a in 0..d {
            for k in 0..n {
                m[a * d + k] = self.e[k * d + a];
                m[a * d + n + k] = self.e[k * d + a].conj();
            }
        }
        let mut z = v.to_vec();
        if !complex_solve(&m, d, &mut z, 1e-13) {
            return Err(Error::FrameDegenerate { point });
        }
        Ok(z)
    }

    /// `[e_i, ē_j]` in the complex frame basis.
    pub fn bracket_in_frame(&self, i: usize, j: usize, point: usize) -> Result<Vec<Complex64>> {
        self.decompose(&self.bracket(i, j), point)
    }

    /// First-order coefficients of `∂∂̄` in the expanded form
    /// `(∂∂̄f)_{ij} = Σ E_i^α Ē_j^β ∂_α∂_β f + Σ c_ij^β ∂_β f`.
    pub fn first_order_coefficients(&self, i: usize, j: usize, point: usize) -> Result<Vec<Complex64>> {
        let d = self.dim;
        let n = self.half_dim;
        let z = self.bracket_in_frame(i, j, point)?;
        Ok((0..d)
            .map(|b| {
                let mut s = ZERO;
                for a in 0..d {
                    s += self.e[i * d + a] * self.de[(j * d + b) * d + a].conj();
                }
                for k in 0..n {
                    s -= z[n + k] * self.e[k * d + b].conj();
                }
                s
            })
            .collect())
    }

    /// Checks `J² = −I` and `g(J·, J·) = g` to `tol`.
    pub fn check_structure(&self, tol: f64, point: usize) -> Result<()> {
        let d = self.dim;
        let j = self.j();
        let jj = matmul(&j, &j, d);
        let scale = 1.0 + j.iter().map(|v| v * v).sum::<f64>();
        for a in 0..d {
            for b in 0..d {
                let target = if a == b { -1.0 } else { 0.0 };
                if (jj[a * d + b] - target).abs() > tol * scale {
                    return Err(Error::StructureViolation {
                        point,
                        detail: format!("J^2 + I has entry {:.3e}", jj[a * d + b] - target),
                    });
                }
            }
        }
        let g = self.metric();
        let gscale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..d {
            for b in 0..d {
                let mut s = 0.0;
                for c in 0..d {
                    for e in 0..d {
                        s += j[c * d + a] * g[c * d + e] * j[e * d + b];
                    }
                }
                if (s - g[a * d + b]).abs() > tol * scale * gscale {
                    return Err(Error::StructureViolation {
                        point,
                        detail: format!("g(J,J) - g has entry {:.3e}", s - g[a * d + b]),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Real frame matrix from complex frame coefficients.
pub(crate) fn real_frame(e: &[Complex64], n: usize) -> Vec<f64> {
    let d = 2 * n;
    let s = std::f64::consts::SQRT_2;
    let mut f = vec![0.0; d * d];
    for k in 0..n {
        for a in 0..d {
            f[a * d + 2 * k] = s * e[k * d + a].re;
            f[a * d + 2 * k + 1] = -s * e[k * d + a].im;
        }
    }
    f
}

pub(crate) fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    matmul_into(a, b, d, &mut c);
    c
}

fn matmul_into(a: &[f64], b: &[f64], d: usize, c: &mut [f64]) {
    c[..d * d].fill(0.0);
    for i in 0..d {
        for k in 0..d {
            let x = a[i * d + k];
            if x == 0.0 {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += x * b[k * d + j];
            }
        }
    }
}

/// Entries below this magnitude everywhere are treated as structurally zero.
const SUPPORT_TOL: f64 = 1e-15;

/// Per-point values of a family of sparse complex vectors with a fixed
/// global support pattern.
#[derive(Clone, Debug)]
pub(crate) struct SparseCache {
    pub support: Vec<Vec<usize>>,
    offset: Vec<usize>,
    stride: usize,
    values: Vec<Complex64>,
}

impl SparseCache {
    fn build(
        len: usize,
        support: Vec<Vec<usize>>,
        fill: impl Fn(usize, &mut [Complex64]) -> Result<()> + Sync,
    ) -> Result<Self> {
        let mut offset = Vec::with_capacity(support.len());
        let mut stride = 0;
        for s in &support {
            offset.push(stride);
            stride += s.len();
        }
        let mut values = vec![ZERO; stride * len];
        if stride > 0 {
            values
                .par_chunks_mut(stride)
                .enumerate()
                .try_for_each(|(p, out)| fill(p, out))?;
        }
        Ok(Self { support, offset, stride, values })
    }

    pub fn entries(&self, p: usize, k: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let base = p * self.stride + self.offset[k];
        self.support[k].iter().enumerate().map(move |(m, &a)| (a, self.values[base + m]))
    }

    pub fn get(&self, p: usize, k: usize, axis: usize) -> Complex64 {
        self.entries(p, k).find(|&(a, _)| a == axis).map_or(ZERO, |(_, v)| v)
    }
}

/// A model sampled on a grid, with cached operator coefficients.
#[derive(Clone)]
pub struct Geometry {
    grid: Grid,
    model: Arc<dyn FrameModel>,
    gram: f64,
    frame: SparseCache,
    first_order: SparseCache,
    density: ScalarField,
}

impl fmt::Debug for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Geometry")
            .field("name", &self.name())
            .field("grid", &self.grid)
            .field("gram", &self.gram)
            .finish()
    }
}

/// Tolerance of the pointwise `J² = −I` and `g(J·,J·) = g` checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

impl Geometry {
    /// Samples a unitary frame (`g(e_i, ē_j) = δ_ij`).
    pub fn new(grid: Grid, model: Arc<dyn FrameModel>) -> Result<Self> {
        Self::with_gram(grid, model, 1.0)
    }

    /// Samples a frame with `g(e_i, ē_j) = gram·δ_ij`.
    pub fn with_gram(grid: Grid, model: Arc<dyn FrameModel>, gram: f64) -> Result<Self> {
        let n = model.half_dim();
        if n != grid.half_dim() {
            return Err(Error::InvalidGeometry(format!(
                "model {} has half dimension {n} but the grid has {}",
                model.name(),
                grid.half_dim()
            )));
        }
        if !(gram.is_finite() && gram > 0.0) {
            return Err(Error::InvalidGeometry(format!("frame gram factor must be positive, got {gram}")));
        }
        let d = 2 * n;
        let len = grid.len();
        let m = model.as_ref();

        // pass 1: validate and evaluate every point once
        let (ew, cw) = (n * d, n * n * d);
        let mut density = vec![0.0; len];
        let mut e_dense = vec![ZERO; len * ew];
        let mut c_dense = vec![ZERO; len * cw];
        density
            .par_iter_mut()
            .zip(e_dense.par_chunks_mut(ew))
            .zip(c_dense.par_chunks_mut(cw))
            .enumerate()
            .try_for_each(|(p, ((dens, e), c))| -> Result<()> {
                let x = grid.coord_vec(p);
                let pf = PointFrame::new(m, &x, gram, p)?;
                pf.check_structure(STRUCTURE_TOL, p)?;
                *dens = pf.density();
                e.copy_from_slice(&pf.e);
                for i in 0..n {
                    for j in 0..n {
                        let k = (i * n + j) * d;
                        c[k..k + d].copy_from_slice(&pf.first_order_coefficients(i, j, p)?);
                    }
                }
                Ok(())
            })?;

        // pass 2: global supports, then keep only the supported entries
        let mask = |dense: &[Complex64], width: usize| -> Vec<bool> {
            dense
                .par_chunks(width)
                .fold(|| vec![false; width], |mut acc, v| {
                    acc.iter_mut().zip(v).for_each(|(s, z)| *s |= z.norm_sqr() > SUPPORT_TOL * SUPPORT_TOL);
                    acc
                })
                .reduce(|| vec![false; width], |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x |= y);
                    a
                })
        };
        let support = |mask: &[bool], groups: usize| -> Vec<Vec<usize>> {
            (0..groups).map(|k| (0..d).filter(|&a| mask[k * d + a]).collect()).collect()
        };
        let e_support = support(&mask(&e_dense, ew), n);
        let c_support = support(&mask(&c_dense, cw), n * n);
        let compact = |dense: &[Complex64], width: usize, support: &[Vec<usize>]| {
            SparseCache::build(len, support.to_vec(), |p, out| {
                let v = &dense[p * width..(p + 1) * width];
                let mut k = 0;
                for (g, s) in support.iter().enumerate() {
                    for &a in s {
                        out[k] = v[g * d + a];
                        k += 1;
                    }
                }
                Ok(())
            })
        };
        let frame = compact(&e_dense, ew, &e_support)?;
        drop(e_dense);
        let first_order = compact(&c_dense, cw, &c_support)?;

        Ok(Self { grid, model, gram, frame, first_order, density: ScalarField::from_vec(grid, density) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn half_dim(&self) -> usize {
        self.grid.half_dim()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn name(&self) -> String {
        self.model.name()
    }

    pub fn model(&self) -> &Arc<dyn FrameModel> {
        &self.model
    }

    /// The constant `g(e_i, ē_i)`.
    pub fn gram(&self) -> f64 {
        self.gram
    }

    /// Volume density `√det g` (the `ωⁿ/n!` density).
    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn volume(&self) -> f64 {
        crate::grid::weighted_sum(self.density.values(), &vec![1.0; self.grid.len()]) * self.grid.cell_volume()
    }

    pub fn check_frame_index(&self, i: usize) -> Result<()> {
        if i < self.half_dim() {
            Ok(())
        } else {
            Err(Error::FrameIndexOutOfRange { index: i, n: self.half_dim() })
        }
    }

    /// Frame data at grid point `p`, evaluated from the model.
    pub fn point_frame(&self, p: usize) -> Result<PointFrame> {
        PointFrame::new(self.model.as_ref(), &self.grid.coord_vec(p), self.gram, p)
    }

    /// Axes on which `e_i` has a nonzero coefficient somewhere.
    pub fn frame_support(&self, i: usize) -> &[usize] {
        &self.frame.support[i]
    }

    /// Cached `(α, E_i^α)` pairs at point `p`.
    pub fn frame_entries(&self, p: usize, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.frame.entries(p, i)
    }

    pub fn frame_coefficient(&self, p: usize, i: usize, axis: usize) -> Complex64 {
        self.frame.get(p, i, axis)
    }

    /// Cached `(β, c_ij^β)` pairs at point `p`.
    pub fn first_order_entries(&self, p: usize, i: usize, j: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.first_order.entries(p, i * self.half_dim() + j)
    }

    pub fn first_order_support(&self, i: usize, j: usize) -> &[usize] {
        &self.first_order.support[i * self.half_dim() + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Standard(usize);

    impl FrameModel for Standard {
        fn half_dim(&self) -> usize {
            self.0
        }
        fn name(&self) -> String {
            "standard".into()
        }
        fn frame(&self, _x: &[f64], out: &mut [Complex64]) {
            let d = 2 * self.0;
            out.fill(ZERO);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for k in 0..self.0 {
                out[k * d + 2 * k] = Complex64::new(s, 0.0);
                out[k * d + 2 * k + 1] = Complex64::new(0.0, -s);
            }
        }
        fn frame_derivative(&self, _x: &[f64], out: &mut [Complex64]) {
            out.fill(ZERO);
        }
    }

    #[derive(Debug)]
    struct Collapsed;

    impl FrameModel for Collapsed {
        fn half_dim(&self) -> usize {
            1
        }
        fn name(&self) -> String {
            "collapsed".into()
        }
        fn frame(&self, _x: &[f64], out: &mut [Complex64]) {
            out[0] = Complex64::new(1.0, 0.0);
            out[1] = ZERO;
        }
        fn frame_derivative(&self, _x: &[f64], out: &mut [Complex64]) {
            out.fill(ZERO);
        }
    }

    #[test]
    fn standard_frame_structure() {
        let g = Grid::periodic(2, 8).unwrap();
        let geom = Geometry::new(g, Arc::new(Standard(2))).unwrap();
        let pf = geom.point_frame(3).unwrap();
        let j = pf.j();
        // J ∂_1 = ∂_2, J ∂_3 = ∂_4
        assert!((j[1 * 4] - 1.0).abs() < 1e-15 && (j[3 * 4 + 2] - 1.0).abs() < 1e-15);
        let g_mat = pf.metric();
        for a in 0..4 {
            for b in 0..4 {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((g_mat[a * 4 + b] - e).abs() < 1e-15);
            }
        }
        let w = pf.omega();
        assert!((w[1] - 1.0).abs() < 1e-15 && (w[2 * 4 + 3] - 1.0).abs() < 1e-15);
        assert!((geom.density().values()[0] - 1.0).abs() < 1e-15);
        assert_eq!(geom.frame_support(1), &[2, 3]);
        assert!(geom.first_order_support(0, 1).is_empty());
        assert!(pf.christoffel().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn degenerate_frame_is_rejected() {
        let g = Grid::periodic(1, 8).unwrap();
        let err = Geometry::new(g, Arc::new(Collapsed)).unwrap_err();
        assert_eq!(err.name(), "FrameDegenerate");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = Grid::periodic(1, 8).unwrap();
        assert_eq!(Geometry::new(g, Arc::new(Standard(2))).unwrap_err().name(), "InvalidGeometry");
    }
}
