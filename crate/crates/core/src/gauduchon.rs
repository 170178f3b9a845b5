//! The conformal factor making `e^u ω` Gauduchon, and the canonical Poisson
//! problem `Δ^C f = h`.
//!
//! Both rest on the discrete adjoint `Δ* = W⁻¹ Aᵀ W` of the assembled
//! canonical Laplacian `A` with respect to the volume weight `W`. Its kernel
//! is spanned by a positive field `f`, and `u = log f / (n − 1)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{j_form_action, omega_form};
use crate::error::{Error, Result};
use crate::fft::FlatInverse;
use crate::forms::RealForm;
use crate::geometry::Geometry;
use crate::grid::{check_grid, integrate, weighted_sum, ScalarField};
use crate::krylov::{gmres, Bordered, BorderedFlat, GmresOptions, LinearMap, Preconditioner};
use crate::operators::canonical_operator;
use crate::stencil_op::StencilOperator;

/// Applies the discrete adjoint of the canonical Laplacian with respect to
/// `⟨a, b⟩ = ∫ a b ωⁿ`.
pub fn adjoint_apply(geom: &Geometry, f: &ScalarField) -> Result<ScalarField> {
    check_grid(geom.grid(), f.grid())?;
    let op = canonical_operator(geom);
    let adj = Adjoint { op: &op, density: geom.density().values(), shift: 0.0 };
    let mut out = vec![0.0; f.grid().len()];
    adj.apply(f.values(), &mut out);
    Ok(ScalarField::new(*f.grid(), out)?)
}

struct Adjoint<'a> {
    op: &'a StencilOperator,
    density: &'a [f64],
    shift: f64,
}

impl LinearMap for Adjoint<'_> {
    fn len(&self) -> usize {
        self.density.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let wx: Vec<f64> = x.par_iter().zip(self.density.par_iter()).map(|(a, w)| a * w).collect();
        self.op.apply_transpose(&wx, y);
        y.par_iter_mut()
            .zip(self.density.par_iter().zip(x.par_iter()))
            .for_each(|(v, (w, xi))| *v = *v / w - self.shift * xi);
    }
}

/// Settings of the inverse-power iteration for the kernel of `Δ*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GauduchonOptions {
    /// Regularizing shift `σ`: the iteration solves `(Δ* − σ) f_{k+1} = f_k`.
    pub shift: f64,
    pub max_iter: usize,
    /// Stop when the relative sup-change between iterates falls below this.
    pub tol: f64,
    /// A seed with `‖Δ* f‖ / ‖f‖` below this is accepted without iterating.
    pub kernel_tol: f64,
    pub krylov: GmresOptions,
    /// Evaluate the `n = 2` defect diagnostic.
    pub compute_defect: bool,
}

impl Default for GauduchonOptions {
    fn default() -> Self {
        Self {
            shift: 1e-4,
            max_iter: 50,
            tol: 1e-12,
            kernel_tol: 1e-12,
            krylov: GmresOptions { tol: 1e-13, max_iter: 2000, restart: 60 },
            compute_defect: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GauduchonFactor {
    #[serde(skip)]
    pub u: ScalarField,
    /// `‖Δ* f‖ / ‖f‖` (RMS norms) at `f = e^{(n−1)u}`.
    pub kernel_residual: f64,
    /// `min f`.
    pub positivity_margin: f64,
    /// Sup-norm of `d(J d(e^{(n−1)u} ω^{n−1}))`; available for `n = 2`.
    pub gauduchon_defect: Option<f64>,
    pub iterations: usize,
}

impl GauduchonFactor {
    /// `e^{(n−1)u}`.
    pub fn weight_factor(&self) -> ScalarField {
        let k = (self.u.grid().half_dim() - 1) as f64;
        self.u.map(|v| (k * v).exp())
    }

    /// `e^{(n−1)u} · √det g`, the weight annihilating the range of `Δ^C`.
    pub fn weight(&self, geom: &Geometry) -> Result<ScalarField> {
        self.weight_factor().mul(geom.density())
    }
}

/// Gauduchon factor with default options.
pub fn gauduchon_factor(geom: &Geometry) -> Result<GauduchonFactor> {
    gauduchon_factor_with(geom, &GauduchonOptions::default(), None)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Inverse-power iteration for the positive kernel vector of `Δ*`, started
/// from `seed` (the constant field by default).
///
/// The kernel vector is scaled to weighted mean one, so a metric that is
/// already Gauduchon gets `u ≡ 0`.
pub fn gauduchon_factor_with(
    geom: &Geometry,
    opts: &GauduchonOptions,
    seed: Option<&ScalarField>,
) -> Result<GauduchonFactor> {
    let grid = *geom.grid();
    let n = geom.half_dim();
    let op = canonical_operator(geom);
    let density = geom.density().values();
    let vol = weighted_sum(density, &vec![1.0; grid.len()]);
    let mean_one = |f: &mut Vec<f64>| {
        let m = weighted_sum(f, density) / vol;
        if m != 0.0 {
            f.iter_mut().for_each(|v| *v /= m);
        }
    };
    let residual_of = |f: &[f64]| {
        let adj = Adjoint { op: &op, density, shift: 0.0 };
        let mut r = vec![0.0; f.len()];
        adj.apply(f, &mut r);
        rms(&r) / rms(f)
    };

    if n == 1 {
        // every metric in real dimension 2 is Gauduchon
        let one = vec![1.0; grid.len()];
        return Ok(GauduchonFactor {
            u: ScalarField::zeros(grid),
            kernel_residual: residual_of(&one),
            positivity_margin: 1.0,
            gauduchon_defect: None,
            iterations: 0,
        });
    }
    if let Some(s) = seed {
        check_grid(&grid, s.grid())?;
    }
    let mut f: Vec<f64> = seed.map_or_else(|| vec![1.0; grid.len()], |s| s.values().to_vec());
    let shifted = Adjoint { op: &op, density, shift: opts.shift };
    let scale = 1.0 / geom.gram();
    let pre = FlatInverse::new(grid, scale, opts.shift);
    let mut iterations = 0;
    mean_one(&mut f);
    while residual_of(&f) > opts.kernel_tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: residual_of(&f) });
        }
        let mut next = f.clone();
        let out = gmres(&shifted, Some(&pre as &dyn Preconditioner), &f, &mut next, &opts.krylov);
        iterations += 1;
        if !out.converged && out.residual > 1e-8 {
            return Err(Error::NoConvergence { iterations, residual: out.residual });
        }
        // the kernel direction is amplified by −1/σ; keep the sign positive
        if weighted_sum(&next, density) < 0.0 {
            next.iter_mut().for_each(|v| *v = -*v);
        }
        mean_one(&mut next);
        let change = next.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        f = next;
        if change <= opts.tol {
            break;
        }
    }
    let (min, max) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min > 0.0) {
        return Err(Error::KernelSignChange { min, max });
    }
    let kernel_residual = residual_of(&f);
    let k = (n - 1) as f64;
    let u = ScalarField::from_vec(grid, f.iter().map(|v| v.ln() / k).collect());
    let gauduchon_defect = if n == 2 && opts.compute_defect { Some(gauduchon_defect(geom, &u)?) } else { None };
    Ok(GauduchonFactor { u, kernel_residual, positivity_margin: min, gauduchon_defect, iterations })
}

/// Sup-norm of `d(J d(e^u ω))` for `n = 2`, a 4-form with one component.
pub fn gauduchon_defect(geom: &Geometry, u: &ScalarField) -> Result<f64> {
    if geom.half_dim() != 2 {
        return Err(Error::UnsupportedDegree(2 * geom.half_dim() - 1));
    }
    let form: RealForm = omega_form(geom)?.scale_by(&u.map(f64::exp))?;
    let d = form.exterior_derivative()?;
    let top = j_form_action(geom, &d)?.exterior_derivative()?;
    Ok(top.sup_norm())
}

/// Default compatibility tolerance `1e-8 · ‖h‖_∞ · vol`.
pub fn default_compat_tol(geom: &Geometry, h: &ScalarField) -> f64 {
    1e-8 * h.sup_norm() * geom.volume()
}

/// Tolerances of [`solve_canonical_poisson`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonOptions {
    /// Absolute bound on `|∫ h e^{(n−1)u} ωⁿ|`; `None` uses [`default_compat_tol`].
    pub compat_tol: Option<f64>,
    pub krylov: GmresOptions,
    pub precondition: bool,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self { compat_tol: None, krylov: GmresOptions { tol: 1e-10, max_iter: 1000, restart: 60 }, precondition: true }
    }
}

/// `|∫ h e^{(n−1)u} ωⁿ|`.
pub fn compatibility_defect(geom: &Geometry, h: &ScalarField, u: &GauduchonFactor) -> Result<f64> {
    Ok(integrate(&h.mul(&u.weight_factor())?, geom.density())?.abs())
}

/// Projects `h` onto the compatible subspace by removing its weighted mean.
pub fn project_compatible(geom: &Geometry, h: &ScalarField, u: &GauduchonFactor) -> Result<ScalarField> {
    let w = u.weight(geom)?;
    let m = weighted_sum(h.values(), w.values()) / weighted_sum(&vec![1.0; h.grid().len()], w.values());
    Ok(h.shifted(-m))
}

pub fn solve_canonical_poisson(geom: &Geometry, h: &ScalarField, u: &GauduchonFactor) -> Result<ScalarField> {
    solve_canonical_poisson_with(geom, h, u, &PoissonOptions::default())
}

/// Solves `Δ^C f = h` for `f` with `∫ f ωⁿ = 0`.
///
/// The kernel (constants) is removed by bordering the operator with the
/// mean-zero constraint and a scalar unknown for the constant mode; a
/// compatible right-hand side makes that scalar vanish.
pub fn solve_canonical_poisson_with(
    geom: &Geometry,
    h: &ScalarField,
    u: &GauduchonFactor,
    opts: &PoissonOptions,
) -> Result<ScalarField> {
    check_grid(geom.grid(), h.grid())?;
    let grid = *geom.grid();
    let defect = compatibility_defect(geom, h, u)?;
    let tol = opts.compat_tol.unwrap_or_else(|| default_compat_tol(geom, h));
    if defect > tol {
        return Err(Error::Incompatible { defect, tol });
    }
    if h.sup_norm() == 0.0 {
        return Ok(ScalarField::zeros(grid));
    }
    let op = canonical_operator(geom);
    let density = geom.density().values();
    let total: f64 = density.iter().sum();
    let constraint: Vec<f64> = density.iter().map(|w| w / total).collect();
    let bordered = Bordered { op: &op, constraint: &constraint };
    let flat = FlatInverse::new(grid, 1.0 / geom.gram(), 0.0);
    let pre = BorderedFlat { flat: &flat, constraint: &constraint };
    let mut rhs = h.values().to_vec();
    rhs.push(0.0);
    let mut x = vec![0.0; grid.len() + 1];
    let out = gmres(
        &bordered,
        if opts.precondition { Some(&pre as &dyn Preconditioner) } else { None },
        &rhs,
        &mut x,
        &opts.krylov,
    );
    if !out.converged {
        return Err(Error::LinearNoConvergence { iterations: out.iterations, residual: out.residual });
    }
    x.pop();
    ScalarField::new(grid, x)
}
