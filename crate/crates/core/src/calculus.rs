//! Almost-complex calculus on a sampled geometry: frame derivatives, Lie
//! brackets, `∂∂̄`, the action of `J` on forms and the `(1,1)` projection.
//!
//! Frame indices `i, j` and coordinate axes are 0-based.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{multi_indices, JActionPlan, RealForm};
use crate::geometry::{FrameModel, Geometry};
use crate::grid::{apply_axis, check_grid, pair_index, ComplexField, Derivatives, Grid, ScalarField};
use crate::hermitian::{hermitize, real_inverse, MAX_DIM};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `e_i(f) = Σ_α E_i^α D_α f` with the grid's stencil.
pub fn frame_apply(geom: &Geometry, i: usize, f: &ScalarField) -> Result<ComplexField> {
    check_grid(geom.grid(), f.grid())?;
    geom.check_frame_index(i)?;
    let grid = *geom.grid();
    let taps = grid.order().first_derivative_taps(grid.spacing());
    let mut out = vec![ZERO; grid.len()];
    let mut d = vec![0.0; grid.len()];
    for &a in geom.frame_support(i) {
        apply_axis(&grid, f.values(), &mut d, a, &taps);
        out.par_iter_mut().zip(d.par_iter()).enumerate().for_each(|(p, (o, v))| {
            *o += geom.frame_coefficient(p, i, a) * v;
        });
    }
    Ok(ComplexField::from_vec(grid, out))
}

/// `ē_i(f)`, the conjugate of [`frame_apply`] for real `f`.
pub fn frame_apply_conj(geom: &Geometry, i: usize, f: &ScalarField) -> Result<ComplexField> {
    let e = frame_apply(geom, i, f)?;
    Ok(ComplexField::from_vec(*e.grid(), e.values().iter().map(|z| z.conj()).collect()))
}

/// Coefficients of `[e_i, ē_j]` in the basis `(e_1, …, e_n, ē_1, …, ē_n)` at
/// every point.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketData {
    grid: Grid,
    half_dim: usize,
    coeffs: Vec<Complex64>,
}

impl BracketData {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// All `2n` coefficients at point `p`.
    pub fn at(&self, p: usize) -> &[Complex64] {
        let m = 2 * self.half_dim;
        &self.coeffs[p * m..(p + 1) * m]
    }

    /// The `e_k` components at `p`.
    pub fn one_zero(&self, p: usize) -> &[Complex64] {
        &self.at(p)[..self.half_dim]
    }

    /// The `ē_k` components at `p`.
    pub fn zero_one(&self, p: usize) -> &[Complex64] {
        &self.at(p)[self.half_dim..]
    }

    /// The `ē_k` component as a field.
    pub fn zero_one_field(&self, k: usize) -> ComplexField {
        let m = 2 * self.half_dim;
        ComplexField::from_vec(self.grid, self.coeffs.iter().skip(self.half_dim + k).step_by(m).copied().collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// `[e_i, ē_j]` from the analytic frame derivatives, decomposed in the frame.
pub fn bracket(geom: &Geometry, i: usize, j: usize) -> Result<BracketData> {
    geom.check_frame_index(i)?;
    geom.check_frame_index(j)?;
    let grid = *geom.grid();
    let m = geom.dim();
    let mut coeffs = vec![ZERO; grid.len() * m];
    coeffs.par_chunks_mut(m).enumerate().try_for_each(|(p, out)| -> Result<()> {
        let pf = geom.point_frame(p)?;
        out.copy_from_slice(&pf.bracket_in_frame(i, j, p)?);
        Ok(())
    })?;
    Ok(BracketData { grid, half_dim: geom.half_dim(), coeffs })
}

/// The `(0,1)` part of `[e_i, ē_j]`: one field per `ē_k` component.
pub fn bracket_01(geom: &Geometry, i: usize, j: usize) -> Result<Vec<ComplexField>> {
    let b = bracket(geom, i, j)?;
    Ok((0..geom.half_dim()).map(|k| b.zero_one_field(k)).collect())
}

/// Per-point `n×n` complex matrices, exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianField {
    grid: Grid,
    half_dim: usize,
    values: Vec<Complex64>,
    hermitization_defect: f64,
}

impl HermitianField {
    /// Symmetrizes the given matrices and records the largest defect.
    pub fn from_matrices(grid: Grid, half_dim: usize, mut values: Vec<Complex64>) -> Result<Self> {
        let m = half_dim * half_dim;
        if values.len() != grid.len() * m {
            return Err(Error::InvalidGrid("wrong number of matrix entries".into()));
        }
        let defect = values
            .par_chunks_mut(m)
            .map(|a| hermitize(a, half_dim))
            .reduce(|| 0.0, f64::max);
        Ok(Self { grid, half_dim, values, hermitization_defect: defect })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Row-major matrix at point `p`.
    pub fn at(&self, p: usize) -> &[Complex64] {
        let m = self.half_dim * self.half_dim;
        &self.values[p * m..(p + 1) * m]
    }

    pub fn entry(&self, i: usize, j: usize) -> ComplexField {
        let n = self.half_dim;
        ComplexField::from_vec(self.grid, self.values.iter().skip(i * n + j).step_by(n * n).copied().collect())
    }

    /// Max over points of the Frobenius norm of `H − H†` before symmetrization.
    pub fn hermitization_defect(&self) -> f64 {
        self.hermitization_defect
    }

    pub fn trace(&self) -> ScalarField {
        let n = self.half_dim;
        let values = self
            .values
            .par_chunks(n * n)
            .map(|a| (0..n).map(|i| a[i * n + i].re).sum())
            .collect();
        ScalarField::from_vec(self.grid, values)
    }

    /// Max over points and entries of `|self − other|`.
    pub fn max_abs_diff(&self, other: &HermitianField) -> Result<f64> {
        check_grid(&self.grid, &other.grid)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// All matrices, point-major.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Adds `c·I` at every point.
    pub(crate) fn shift_diagonal(&mut self, c: f64) {
        let n = self.half_dim;
        self.values.par_chunks_mut(n * n).for_each(|a| {
            for i in 0..n {
                a[i * n + i] += c;
            }
        });
    }
}

/// `(∂∂̄f)(e_i, ē_j) = e_i ē_j f − [e_i, ē_j]^{(0,1)} f`, evaluated in the
/// expanded form `Σ E_i^α Ē_j^β D²_{αβ} f + Σ c_ij^β D_β f`.
///
/// Pure second derivatives use the compact stencil, so the discrete operator
/// has no spurious grid-scale null modes.
pub fn ddbar(geom: &Geometry, f: &ScalarField) -> Result<HermitianField> {
    check_grid(geom.grid(), f.grid())?;
    let grid = *geom.grid();
    let derivs = Derivatives::compute(&grid, f.values());
    let raw = ddbar_raw(geom, &derivs);
    HermitianField::from_matrices(grid, geom.half_dim(), raw)
}

pub(crate) fn ddbar_raw(geom: &Geometry, derivs: &Derivatives) -> Vec<Complex64> {
    let n = geom.half_dim();
    let dim = geom.dim();
    let mut out = vec![ZERO; geom.grid().len() * n * n];
    out.par_chunks_mut(n * n).enumerate().for_each(|(p, h)| {
        ddbar_point(geom, p, dim, &|a, b| derivs.second[pair_index(dim, a, b)][p], &|b| derivs.first[b][p], h);
    });
    out
}

/// Unsymmetrized `∂∂̄` matrix at one point from derivative accessors.
pub(crate) fn ddbar_point(
    geom: &Geometry,
    p: usize,
    _dim: usize,
    second: &dyn Fn(usize, usize) -> f64,
    first: &dyn Fn(usize) -> f64,
    h: &mut [Complex64],
) {
    let n = geom.half_dim();
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for (a, ea) in geom.frame_entries(p, i) {
                for (b, eb) in geom.frame_entries(p, j) {
                    s += ea * eb.conj() * second(a, b);
                }
            }
            for (b, c) in geom.first_order_entries(p, i, j) {
                s += c * first(b);
            }
            h[i * n + j] = s;
        }
    }
}

/// Allocation-free `J` matrix (`J ∂_c = Σ_r j[r·dim + c] ∂_r`) of a model at `x`.
pub(crate) fn structure_at(model: &dyn FrameModel, x: &[f64], j: &mut [f64]) -> bool {
    let n = model.half_dim();
    let d = 2 * n;
    let mut e = [ZERO; MAX_DIM * MAX_DIM / 2];
    model.frame(x, &mut e[..n * d]);
    let s = std::f64::consts::SQRT_2;
    let mut f = [0.0; MAX_DIM * MAX_DIM];
    for k in 0..n {
        for a in 0..d {
            f[a * d + 2 * k] = s * e[k * d + a].re;
            f[a * d + 2 * k + 1] = -s * e[k * d + a].im;
        }
    }
    let mut f_inv = [0.0; MAX_DIM * MAX_DIM];
    if real_inverse(&f, d, &mut f_inv).is_none() {
        return false;
    }
    for r in 0..d {
        for c in 0..d {
            let mut acc = 0.0;
            for k in 0..n {
                acc += f[r * d + 2 * k + 1] * f_inv[(2 * k) * d + c] - f[r * d + 2 * k] * f_inv[(2 * k + 1) * d + c];
            }
            j[r * d + c] = acc;
        }
    }
    true
}

/// `(Jα)(X₁, …, X_p) = (−1)^p α(JX₁, …, JX_p)`, for any degree.
pub fn j_form_action(geom: &Geometry, alpha: &RealForm) -> Result<RealForm> {
    check_grid(geom.grid(), alpha.grid())?;
    let grid = *geom.grid();
    let dim = grid.dim();
    let p = alpha.degree();
    let plan = JActionPlan::new(dim, p);
    let ncomp = alpha.components().len();
    let model = geom.model().as_ref();
    let mut flat = vec![0.0; grid.len() * ncomp];
    flat.par_chunks_mut(ncomp).enumerate().try_for_each(|(pt, out)| -> Result<()> {
        let x = grid.coord_vec(pt);
        let mut j = [0.0; MAX_DIM * MAX_DIM];
        if !structure_at(model, &x, &mut j) {
            return Err(Error::FrameDegenerate { point: pt });
        }
        let a: Vec<f64> = alpha.components().iter().map(|c| c[pt]).collect();
        plan.apply(&j[..dim * dim], &a, out);
        Ok(())
    })?;
    let components = (0..ncomp).map(|k| flat.iter().skip(k).step_by(ncomp).copied().collect()).collect();
    RealForm::from_components(grid, p, components)
}

fn require_two_form(alpha: &RealForm) -> Result<()> {
    if alpha.degree() == 2 {
        Ok(())
    } else {
        Err(Error::DegreeMismatch { expected: 2, got: alpha.degree() })
    }
}

/// `(1,1)` part `½(α + Jα)` of a real 2-form.
pub fn pq11(geom: &Geometry, alpha: &RealForm) -> Result<RealForm> {
    require_two_form(alpha)?;
    let ja = j_form_action(geom, alpha)?;
    alpha.lin_comb(0.5, &ja, 0.5)
}

/// Coordinate gradient `df` as a 1-form.
pub fn exterior_d_scalar(f: &ScalarField) -> Result<RealForm> {
    RealForm::from_scalar(f).exterior_derivative()
}

/// `d(J df)`, a real 2-form.
pub fn d_j_d(geom: &Geometry, f: &ScalarField) -> Result<RealForm> {
    check_grid(geom.grid(), f.grid())?;
    let df = exterior_d_scalar(f)?;
    j_form_action(geom, &df)?.exterior_derivative()
}

/// Sup-norm of the non-`(1,1)` part of `d(J df)`.
pub fn nijenhuis_defect(geom: &Geometry, f: &ScalarField) -> Result<f64> {
    let a = d_j_d(geom, f)?;
    let p = pq11(geom, &a)?;
    Ok(a.lin_comb(1.0, &p, -1.0)?.sup_norm())
}

/// Frame components `−i·α(e_i, ē_j)` of a real 2-form.
///
/// For `α = ½ pq11(d(J df))` this is the matrix of `∂∂̄f`.
pub fn frame_components(geom: &Geometry, alpha: &RealForm) -> Result<HermitianField> {
    require_two_form(alpha)?;
    check_grid(geom.grid(), alpha.grid())?;
    let n = geom.half_dim();
    let dim = geom.dim();
    let pairs = multi_indices(dim, 2);
    let mut out = vec![ZERO; geom.grid().len() * n * n];
    out.par_chunks_mut(n * n).enumerate().for_each(|(p, h)| {
        let mut e = [ZERO; MAX_DIM * MAX_DIM / 2];
        for i in 0..n {
            for (a, v) in geom.frame_entries(p, i) {
                e[i * dim + a] = v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for (k, ab) in pairs.iter().enumerate() {
                    let c = alpha.components()[k][p];
                    if c == 0.0 {
                        continue;
                    }
                    let (a, b) = (ab[0], ab[1]);
                    s += c * (e[i * dim + a] * e[j * dim + b].conj() - e[i * dim + b] * e[j * dim + a].conj());
                }
                h[i * n + j] = Complex64::new(0.0, -1.0) * s;
            }
        }
    });
    HermitianField::from_matrices(*geom.grid(), n, out)
}

/// Max entrywise gap between `ddbar(f)` and the form route
/// `½(d(J df))^{(1,1)}` in frame components.
pub fn ddbar_route_gap(geom: &Geometry, f: &ScalarField) -> Result<f64> {
    let frame = ddbar(geom, f)?;
    let form = pq11(geom, &d_j_d(geom, f)?)?;
    let half = form.lin_comb(0.5, &form, 0.0)?;
    frame.max_abs_diff(&frame_components(geom, &half)?)
}

/// The fundamental form `ω(X, Y) = g(JX, Y)` as a 2-form.
pub fn omega_form(geom: &Geometry) -> Result<RealForm> {
    let grid = *geom.grid();
    let dim = grid.dim();
    let pairs = multi_indices(dim, 2);
    let mut flat = vec![0.0; grid.len() * pairs.len()];
    flat.par_chunks_mut(pairs.len()).enumerate().try_for_each(|(p, out)| -> Result<()> {
        let w = geom.point_frame(p)?.omega();
        for (k, ab) in pairs.iter().enumerate() {
            out[k] = w[ab[0] * dim + ab[1]];
        }
        Ok(())
    })?;
    let m = pairs.len();
    let components = (0..m).map(|k| flat.iter().skip(k).step_by(m).copied().collect()).collect();
    RealForm::from_components(grid, 2, components)
}
