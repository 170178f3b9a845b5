//! Pointwise algebra oracles and estimate monitors: derivatives of the top
//! eigenvalue, the Hessian decomposition, determinant superadditivity, the
//! wedge/`J` identity, and sup-norm dashboards of a potential.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{d_j_d, ddbar_point, j_form_action, omega_form, pq11, structure_at};
use crate::error::{Error, Result};
use crate::forms::RealForm;
use crate::geometries::{flat_torus, twisted_torus};
use crate::geometry::{Geometry, PointFrame};
use crate::grid::{check_grid, derivatives_at, pair_index, Derivatives, ScalarField};
use crate::hermitian::{hermitize, symmetric_eigen_desc, MAX_DIM};
use crate::operators::ma_log_density;

/// Default minimal spectral gap below `λ₁`.
pub const DEFAULT_GAP_MIN: f64 = 1e-6;

/// First and second derivatives of the top eigenvalue `λ₁` of a symmetric
/// matrix with respect to its entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TopEigenDerivatives {
    pub lambda1: f64,
    /// `λ₁ − λ₂`.
    pub gap: f64,
    /// `∂λ₁/∂Φ_{αβ} = V₁^α V₁^β`.
    pub gradient: DMatrix<f64>,
    /// `∂²λ₁/∂Φ_{αβ}∂Φ_{γδ}` at `[((α·d + β)·d + γ)·d + δ]`.
    pub curvature: Vec<f64>,
}

impl TopEigenDerivatives {
    pub fn dim(&self) -> usize {
        self.gradient.nrows()
    }

    pub fn curvature_entry(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let m = self.dim();
        self.curvature[((a * m + b) * m + c) * m + d]
    }

    /// `Σ λ₁^{αβ} E_{αβ}`.
    pub fn first_variation(&self, e: &DMatrix<f64>) -> f64 {
        self.gradient.component_mul(e).sum()
    }

    /// `Σ λ₁^{αβ,γδ} E_{αβ} E_{γδ}`.
    pub fn second_variation(&self, e: &DMatrix<f64>) -> f64 {
        let m = self.dim();
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        s += self.curvature_entry(a, b, c, d) * e[(a, b)] * e[(c, d)];
                    }
                }
            }
        }
        s
    }
}

/// Derivatives of `λ₁` from the eigendecomposition of `phi` (symmetrized).
pub fn eig_top_derivatives(phi: &DMatrix<f64>, gap_min: f64) -> Result<TopEigenDerivatives> {
    let m = phi.nrows();
    if m == 0 || phi.ncols() != m {
        return Err(Error::InvalidOptions(format!("expected a square matrix, got {}x{}", m, phi.ncols())));
    }
    let (values, v) = symmetric_eigen_desc(phi);
    let gap = if m > 1 { values[0] - values[1] } else { f64::INFINITY };
    if !(gap >= gap_min) {
        return Err(Error::DegenerateTopEigenvalue { gap, gap_min });
    }
    let gradient = DMatrix::from_fn(m, m, |a, b| v[(a, 0)] * v[(b, 0)]);
    let mut curvature = vec![0.0; m.pow(4)];
    for mu in 1..m {
        let inv = 1.0 / (values[0] - values[mu]);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let t = v[(a, 0)] * v[(b, mu)] * v[(c, mu)] * v[(d, 0)]
                            + v[(a, mu)] * v[(b, 0)] * v[(c, 0)] * v[(d, mu)];
                        curvature[((a * m + b) * m + c) * m + d] += t * inv;
                    }
                }
            }
        }
    }
    Ok(TopEigenDerivatives { lambda1: values[0], gap, gradient, curvature })
}

/// The real Hessian-type matrices of a function at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianDecomposition {
    /// `H(X, Y) = (i∂∂̄v)(X, JY)`.
    pub h: DMatrix<f64>,
    /// J-invariant part `½(D²v + Jᵀ D²v J)` of the coordinate Hessian.
    pub j_invariant: DMatrix<f64>,
    /// `H − ½(D²v + Jᵀ D²v J)`.
    pub error: DMatrix<f64>,
    /// Coordinate gradient `Dv`.
    pub gradient: Vec<f64>,
    /// Coordinate matrix of `J`.
    pub j: DMatrix<f64>,
}

pub fn hessian_decomposition(geom: &Geometry, v: &ScalarField, point: usize) -> Result<HessianDecomposition> {
    check_grid(geom.grid(), v.grid())?;
    let grid = *geom.grid();
    if point >= grid.len() {
        return Err(Error::InvalidGrid(format!("point {point} out of range ({} points)", grid.len())));
    }
    let n = geom.half_dim();
    let d = geom.dim();
    let (first, second) = derivatives_at(&grid, v.values(), point);
    let mut hc = vec![Complex64::new(0.0, 0.0); n * n];
    ddbar_point(geom, point, d, &|a, b| second[pair_index(d, a, b)], &|b| first[b], &mut hc);
    hermitize(&mut hc, n);

    let pf = geom.point_frame(point)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // coframe θ^k = (φ^{2k} + i φ^{2k+1})/√2 with φ the rows of F⁻¹
    let theta = |k: usize, a: usize| Complex64::new(pf.f_inv[2 * k * d + a], pf.f_inv[(2 * k + 1) * d + a]) * s;
    let i = Complex64::new(0.0, 1.0);
    let alpha = DMatrix::from_fn(d, d, |a, b| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                acc += i * hc[k * n + l] * (theta(k, a) * theta(l, b).conj() - theta(k, b) * theta(l, a).conj());
            }
        }
        acc.re
    });
    let jv = pf.j();
    let j = DMatrix::from_fn(d, d, |r, c| jv[r * d + c]);
    let h = &alpha * &j;
    let h = 0.5 * (&h + h.transpose());
    let d2 = DMatrix::from_fn(d, d, |a, b| second[pair_index(d, a, b)]);
    let j_invariant = 0.5 * (&d2 + j.transpose() * &d2 * &j);
    let error = &h - &j_invariant;
    Ok(HessianDecomposition { h, j_invariant, error, gradient: first, j })
}

/// Verdict of `det(A + B) ≥ det A + det B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuperadditivityOutcome {
    pub holds: bool,
    /// `det(A + B) − det A − det B`.
    pub slack: f64,
}

/// Eigenvalue floor below which an input counts as not semidefinite.
pub const PSD_FLOOR: f64 = -1e-12;
/// Tolerated negative slack.
pub const SLACK_FLOOR: f64 = -1e-12;

pub fn det_superadditivity_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SuperadditivityOutcome> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::InvalidOptions("matrices must be square and of equal size".into()));
    }
    for m in [a, b] {
        let (values, _) = symmetric_eigen_desc(m);
        let min = values.last().copied().unwrap_or(0.0);
        if min < PSD_FLOOR || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::NonPsd(min));
        }
    }
    let slack = (a + b).determinant() - a.determinant() - b.determinant();
    Ok(SuperadditivityOutcome { holds: slack >= SLACK_FLOOR, slack })
}

/// Sup-norm of `α∧(Jβ) − (−1)^p (Jα)∧β` with `p = deg β`.
pub fn wedge_j_identity_check(geom: &Geometry, alpha: &RealForm, beta: &RealForm) -> Result<f64> {
    let dim = geom.dim();
    let p = beta.degree();
    if p > 2 {
        return Err(Error::UnsupportedDegree(p));
    }
    if alpha.degree() + p != dim {
        return Err(Error::DegreeMismatch { expected: dim - p, got: alpha.degree() });
    }
    let lhs = alpha.wedge(&j_form_action(geom, beta)?)?;
    let rhs = j_form_action(geom, alpha)?.wedge(beta)?;
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    Ok(lhs.lin_comb(1.0, &rhs, -sign)?.sup_norm())
}

/// Outcome of [`taming_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TamingOutcome {
    /// Sup-norm of `dω̃` for `ω̃ = ω + ½d(Jdφ)`.
    pub closedness: f64,
    /// Pointwise minimum of the top-degree coefficient of
    /// `ω̃ⁿ − (ω̃^{(1,1)})ⁿ`, where `ω̃^{(1,1)} = ω^{(1,1)} + i∂∂̄φ`.
    pub min_slack: f64,
    /// Sup of `|(ω̃^{(1,1)})ⁿ − e^{log det g̃} ωⁿ|`: the gap between the
    /// `d(Jd·)` and `ddbar` discretizations of `(ω + i∂∂̄φ)ⁿ`.
    pub route_gap: f64,
}

/// Compares `ω̃ = ω + ½d(Jdφ)` with the solution metric `ω + i∂∂̄φ`.
pub fn taming_check(geom: &Geometry, phi: &ScalarField) -> Result<TamingOutcome> {
    check_grid(geom.grid(), phi.grid())?;
    let n = geom.half_dim();
    let omega = omega_form(geom)?;
    let tamed = omega.lin_comb(1.0, &d_j_d(geom, phi)?, 0.5)?;
    let closedness = tamed.exterior_derivative()?.sup_norm();
    let power = |form: &RealForm| -> Result<Vec<f64>> {
        let mut acc = form.clone();
        for _ in 1..n {
            acc = acc.wedge(form)?;
        }
        Ok(acc.components()[0].clone())
    };
    let top = power(&tamed)?;
    let hermitian = power(&pq11(geom, &tamed)?)?;
    let reference = power(&omega)?;
    let (log_det, _) = ma_log_density(geom, phi)?;
    let min_slack = top.iter().zip(&hermitian).fold(f64::INFINITY, |m, (t, h)| m.min(t - h));
    let route_gap = hermitian
        .iter()
        .zip(&reference)
        .zip(log_det.values())
        .fold(0.0f64, |m, ((h, r), l)| m.max((h - l.exp() * r).abs()));
    Ok(TamingOutcome { closedness, min_slack, route_gap })
}

/// Sup-norm dashboard of a potential `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateMonitors {
    pub sup_abs_phi: f64,
    /// `sup |∂φ|_g`.
    pub sup_grad: f64,
    /// `sup |∇²φ|_g` for the Levi-Civita real Hessian.
    pub sup_real_hessian: f64,
    /// Largest eigenvalue of `∇²φ` (relative to `g`) over all points.
    pub lambda1_max: f64,
    /// Smallest eigenvalue of `g̃` relative to `g`.
    pub min_eig_tilted: f64,
}

impl EstimateMonitors {
    pub fn is_finite(&self) -> bool {
        [self.sup_abs_phi, self.sup_grad, self.sup_real_hessian, self.lambda1_max, self.min_eig_tilted]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Pointwise real-Hessian data: `(|∂φ|_g, |∇²φ|_g, λ₁(∇²φ))`.
fn hessian_monitors_at(pf: &PointFrame, first: &[f64], second: &dyn Fn(usize, usize) -> f64) -> (f64, f64, f64) {
    let d = pf.dim;
    let g_inv = pf.inverse_metric();
    let mut gamma = vec![0.0; d * d * d];
    pf.christoffel_into(&mut gamma);
    let mut hess = [0.0; MAX_DIM * MAX_DIM];
    for a in 0..d {
        for b in 0..d {
            let corr: f64 = (0..d).map(|c| gamma[(c * d + a) * d + b] * first[c]).sum();
            hess[a * d + b] = second(a, b) - corr;
        }
    }
    let mut grad2 = 0.0;
    for a in 0..d {
        for b in 0..d {
            grad2 += g_inv[a * d + b] * first[a] * first[b];
        }
    }
    // |∇²φ|² = tr(g⁻¹ ∇² g⁻¹ ∇²)
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    for a in 0..d {
        for b in 0..d {
            m[a * d + b] = (0..d).map(|c| g_inv[a * d + c] * hess[c * d + b]).sum();
        }
    }
    let mut hn2 = 0.0;
    for a in 0..d {
        for b in 0..d {
            hn2 += m[a * d + b] * m[b * d + a];
        }
    }
    // eigenvalues relative to g: orthonormal frame f_a/√gram
    let ortho = DMatrix::from_fn(d, d, |r, c| {
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += pf.f[a * d + r] * hess[a * d + b] * pf.f[b * d + c];
            }
        }
        s / pf.gram
    });
    let (values, _) = symmetric_eigen_desc(&ortho);
    (grad2.max(0.0).sqrt(), hn2.max(0.0).sqrt(), values[0])
}

/// Monitors of `φ` as given (no normalization is applied).
pub fn estimate_monitors(geom: &Geometry, phi: &ScalarField) -> Result<EstimateMonitors> {
    check_grid(geom.grid(), phi.grid())?;
    let grid = *geom.grid();
    let (_, tilted) = ma_log_density(geom, phi)?;
    let derivs = Derivatives::compute(&grid, phi.values());
    let d = grid.dim();
    let model = geom.model().as_ref();
    let gram = geom.gram();
    let (sup_grad, sup_hess, lambda1) = (0..grid.len())
        .into_par_iter()
        .map(|p| -> Result<(f64, f64, f64)> {
            let x = grid.coord_vec(p);
            let pf = PointFrame::new(model, &x, gram, p)?;
            let first: Vec<f64> = (0..d).map(|a| derivs.first[a][p]).collect();
            Ok(hessian_monitors_at(&pf, &first, &|a, b| derivs.second[pair_index(d, a, b)][p]))
        })
        .try_reduce(
            || (0.0, 0.0, f64::NEG_INFINITY),
            |x, y| Ok((x.0.max(y.0), x.1.max(y.1), x.2.max(y.2))),
        )?;
    Ok(EstimateMonitors {
        sup_abs_phi: phi.sup_norm(),
        sup_grad,
        sup_real_hessian: sup_hess,
        lambda1_max: lambda1,
        min_eig_tilted: tilted.min_eigenvalue() / gram,
    })
}

/// Outcome of one family of randomized identity checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    /// Worst observed error (or, for superadditivity, the most negative slack).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentitySuite {
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

/// Case counts of [`identity_suite`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteSizes {
    pub eigen_matrices: usize,
    pub psd_pairs: usize,
    pub wedge_pairs: usize,
    pub j_squared_forms: usize,
    /// Points per axis of the tori carrying random forms.
    pub points_per_axis: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self { eigen_matrices: 100, psd_pairs: 1000, wedge_pairs: 100, j_squared_forms: 20, points_per_axis: 8 }
    }
}

pub const EIGEN_REL_TOL: f64 = 1e-6;
pub const FORM_IDENTITY_TOL: f64 = 1e-12;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random symmetric matrix with prescribed gap `λ₁ − λ₂`, eigenvalues in `[−2, 2]`.
pub fn random_symmetric_with_gap(m: usize, gap: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = DMatrix::from_fn(m, m, |_, _| gaussian(rng)).qr().q();
    let mut values: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0 - gap)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    if m > 1 {
        values[0] = values[1] + gap;
    }
    &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values)) * q.transpose()
}

pub fn random_symmetric(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| gaussian(rng));
    0.5 * (&a + a.transpose())
}

/// Random positive semidefinite matrix `X Xᵀ` of random rank, scaled to
/// unit spectral norm (zero stays zero).
pub fn random_psd(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let rank = rng.gen_range(0..=m);
    let x = DMatrix::from_fn(m, rank, |_, _| gaussian(rng));
    let a = &x * x.transpose();
    let top = symmetric_eigen_desc(&a).0.first().copied().unwrap_or(0.0);
    if top > 0.0 { a / top } else { a }
}

/// Relative errors of the first and second variation formulas against
/// five-point central differences of `t ↦ λ₁(φ + t·dir)`.
///
/// The differences are taken of `λ₁(φ + t·dir) − λ₁(φ)`, evaluated in the
/// eigenbasis of `φ` as the Rayleigh quotient of the top eigenvector of
/// `Λ − λ₁ + t·QᵀdirQ`. Every term of that quotient is `O(t)`, so the
/// rounding error scales with `t` instead of `‖φ‖`.
pub fn eigen_fd_errors(phi: &DMatrix<f64>, dir: &DMatrix<f64>) -> Result<(f64, f64)> {
    let der = eig_top_derivatives(phi, DEFAULT_GAP_MIN)?;
    let m = phi.nrows();
    let (vals, vecs) = symmetric_eigen_desc(phi);
    let rot = vecs.transpose() * dir * &vecs;
    let shifted = DMatrix::from_fn(m, m, |i, j| if i == j { vals[i] - vals[0] } else { 0.0 });
    let increment = |s: f64| {
        let b = &shifted + &rot * s;
        let (_, v) = symmetric_eigen_desc(&b);
        let v = v.column(0);
        (v.transpose() * &b * v)[(0, 0)] / v.norm_squared()
    };
    let norm2 = dir.norm_squared();
    // keeps t·dir small against the gap
    let t = 1e-3 * der.gap.min(1.0) / norm2.sqrt().max(1.0);
    let (p1, m1, p2, m2, z) = (increment(t), increment(-t), increment(2.0 * t), increment(-2.0 * t), increment(0.0));
    let fd1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * t);
    let fd2 = (-p2 + 16.0 * p1 - 30.0 * z + 16.0 * m1 - m2) / (12.0 * t * t);
    let spread = (vals[0] - vals[m - 1]).max(der.gap);
    let f1 = der.first_variation(dir);
    let f2 = der.second_variation(dir);
    let e1 = (fd1 - f1).abs() / f1.abs().max(norm2.sqrt());
    let e2 = (fd2 - f2).abs() / f2.abs().max(norm2 / spread);
    Ok((e1, e2))
}

fn random_form(grid: crate::grid::Grid, degree: usize, rng: &mut ChaCha8Rng) -> Result<RealForm> {
    let count = crate::forms::binomial(grid.dim(), degree);
    let comps = (0..count).map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    RealForm::from_components(grid, degree, comps)
}

fn check(name: &str, cases: usize, worst: f64, tolerance: f64, passed: bool) -> IdentityCheck {
    IdentityCheck { name: name.into(), cases, worst, tolerance, passed }
}

/// Runs the randomized pointwise identity suite.
pub fn identity_suite(seed: u64, sizes: &SuiteSizes) -> Result<IdentitySuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let (mut w1, mut w2) = (0.0f64, 0.0f64);
    for k in 0..sizes.eigen_matrices {
        let m = 2 + k % 5;
        let gap = 10f64.powf(rng.gen_range(-3.0..0.0));
        let phi = random_symmetric_with_gap(m, gap, &mut rng);
        let dir = random_symmetric(m, &mut rng);
        let (e1, e2) = eigen_fd_errors(&phi, &dir)?;
        w1 = w1.max(e1);
        w2 = w2.max(e2);
    }
    checks.push(check("eigenvalue_gradient", sizes.eigen_matrices, w1, EIGEN_REL_TOL, w1 <= EIGEN_REL_TOL));
    checks.push(check("eigenvalue_curvature", sizes.eigen_matrices, w2, EIGEN_REL_TOL, w2 <= EIGEN_REL_TOL));

    let mut worst_slack = f64::INFINITY;
    for k in 0..sizes.psd_pairs {
        let m = 2 + k % 5;
        let a = random_psd(m, &mut rng);
        let b = random_psd(m, &mut rng);
        worst_slack = worst_slack.min(det_superadditivity_check(&a, &b)?.slack);
    }
    checks.push(check(
        "det_superadditivity",
        sizes.psd_pairs,
        worst_slack,
        SLACK_FLOOR,
        worst_slack >= SLACK_FLOOR,
    ));

    let n = sizes.points_per_axis;
    let geoms = [flat_torus(2, n)?, twisted_torus(n, 0.3)?];
    let mut worst = 0.0f64;
    for k in 0..sizes.wedge_pairs {
        let geom = &geoms[k % 2];
        let p = k % 3;
        let beta = if k % 10 == 9 { omega_form(geom)? } else { random_form(*geom.grid(), p, &mut rng)? };
        let alpha = random_form(*geom.grid(), 4 - beta.degree(), &mut rng)?;
        worst = worst.max(wedge_j_identity_check(geom, &alpha, &beta)?);
    }
    checks.push(check("wedge_j_identity", sizes.wedge_pairs, worst, FORM_IDENTITY_TOL, worst <= FORM_IDENTITY_TOL));

    let mut worst = 0.0f64;
    for k in 0..sizes.j_squared_forms {
        let geom = &geoms[k % 2];
        let p = k % 5;
        let alpha = random_form(*geom.grid(), p, &mut rng)?;
        let jj = j_form_action(geom, &j_form_action(geom, &alpha)?)?;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        worst = worst.max(jj.lin_comb(1.0, &alpha, -sign)?.sup_norm());
    }
    checks.push(check("j_squared", sizes.j_squared_forms, worst, FORM_IDENTITY_TOL, worst <= FORM_IDENTITY_TOL));

    let passed = checks.iter().all(|c| c.passed);
    Ok(IdentitySuite { seed, checks, passed })
}

/// Coordinate `J` at grid point `p` (for callers working pointwise).
pub fn structure_matrix(geom: &Geometry, p: usize) -> Result<DMatrix<f64>> {
    let d = geom.dim();
    let x = geom.grid().coord_vec(p);
    let mut j = [0.0; MAX_DIM * MAX_DIM];
    if !structure_at(geom.model().as_ref(), &x, &mut j) {
        return Err(Error::FrameDegenerate { point: p });
    }
    Ok(DMatrix::from_fn(d, d, |r, c| j[r * d + c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::TrigSeries;

    #[test]
    fn diag_three_one() {
        let phi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let d = eig_top_derivatives(&phi, DEFAULT_GAP_MIN).unwrap();
        assert!((d.gradient[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(d.gradient[(0, 1)].abs() + d.gradient[(1, 0)].abs() + d.gradient[(1, 1)].abs() < 1e-15);
        assert!((d.curvature_entry(0, 1, 1, 0) - 0.5).abs() < 1e-15);
        // mixed derivative of λ₁([[3, s], [t, 1]]) = 2 + √(1 + st) is ½
        let lam = |s: f64, t: f64| 2.0 + (1.0 + s * t).sqrt();
        let e = 1e-4;
        let fd = (lam(e, e) - lam(e, -e) - lam(-e, e) + lam(-e, -e)) / (4.0 * e * e);
        assert!((fd - d.curvature_entry(0, 1, 1, 0)).abs() / 0.5 < 1e-6);
    }

    #[test]
    fn degenerate_top_eigenvalue() {
        let err = eig_top_derivatives(&DMatrix::identity(3, 3), DEFAULT_GAP_MIN).unwrap_err();
        assert_eq!(err.name(), "DegenerateTopEigenvalue");
    }

    #[test]
    fn superadditivity_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let out = det_superadditivity_check(&id, &id).unwrap();
        assert!(out.holds && (out.slack - 2.0).abs() < 1e-14);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let out = det_superadditivity_check(&a, &DMatrix::zeros(2, 2)).unwrap();
        assert!(out.slack.abs() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(det_superadditivity_check(&bad, &id).unwrap_err().name(), "NonPsd");
    }

    #[test]
    fn flat_hessian_error_vanishes() {
        let g = flat_torus(2, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = TrigSeries::random(4, 5, 2, 1.0, &mut rng).sample(*g.grid()).unwrap();
        for p in [0, 123, 4000] {
            let dec = hessian_decomposition(&g, &v, p).unwrap();
            assert!(dec.error.amax() < 1e-12, "{}", dec.error.amax());
            let jt = dec.j.transpose() * &dec.j_invariant * &dec.j;
            assert!((jt - &dec.j_invariant).amax() < 1e-12);
        }
    }

    #[test]
    fn monitors_of_zero() {
        let g = twisted_torus(8, 0.3).unwrap();
        let m = estimate_monitors(&g, &ScalarField::zeros(*g.grid())).unwrap();
        assert_eq!((m.sup_abs_phi, m.sup_grad, m.sup_real_hessian, m.lambda1_max), (0.0, 0.0, 0.0, 0.0));
        assert!((m.min_eig_tilted - 1.0).abs() < 1e-14);
    }

    #[test]
    fn small_suite_passes() {
        let sizes = SuiteSizes { eigen_matrices: 10, psd_pairs: 50, wedge_pairs: 10, j_squared_forms: 5, points_per_axis: 8 };
        let suite = identity_suite(3, &sizes).unwrap();
        assert!(suite.passed, "{suite:#?}");
    }

    #[test]
    fn taming_of_zero_and_small_potential() {
        let g = twisted_torus(8, 0.3).unwrap();
        let zero = taming_check(&g, &ScalarField::zeros(*g.grid())).unwrap();
        assert!(zero.closedness < 1e-14 && zero.min_slack.abs() < 1e-14 && zero.route_gap < 1e-14);
        let phi = ScalarField::from_fn(*g.grid(), |x| 0.05 * (x[0] + x[2]).sin());
        let t = taming_check(&g, &phi).unwrap();
        assert!(t.closedness < 1e-12);
        assert!(t.min_slack >= -1e-12, "{t:?}");
    }
}
