//! Scalar operators built on `∂∂̄`: the canonical Laplacian, the
//! Laplace–Beltrami operator, the torsion residual, the Monge–Ampère
//! log-density and its linearization.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::calculus::{ddbar, ddbar_point, HermitianField};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{check_grid, pair_count, pair_index, ScalarField};
use crate::hermitian::{cholesky_logdet_inverse, hermitian_min_eigenvalue, hermitize, MAX_HALF_DIM};
use crate::stencil_op::StencilOperator;
use crate::trig::TrigSeries;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The metric `g̃ = g + ∂∂̄φ` in frame components, known to be positive.
#[derive(Clone, Debug)]
pub struct TiltedMetric {
    metric: HermitianField,
    inverse: Vec<Complex64>,
    min_eigenvalue: f64,
    argmin: usize,
}

impl TiltedMetric {
    pub fn metric(&self) -> &HermitianField {
        &self.metric
    }

    /// `g̃^{-1}` at point `p`, row-major.
    pub fn inverse_at(&self, p: usize) -> &[Complex64] {
        let m = self.metric.half_dim().pow(2);
        &self.inverse[p * m..(p + 1) * m]
    }

    /// Smallest eigenvalue of `g̃` over all points.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// A point where the smallest eigenvalue is attained.
    pub fn argmin(&self) -> usize {
        self.argmin
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue > 0.0
    }
}

/// Builds `g̃ = gram·I + ∂∂̄φ` and `log det g̃ − n log gram`.
///
/// Fails with `NotPositive` (carrying the worst point) if `g̃` is not
/// positive definite everywhere.
pub fn ma_log_density(geom: &Geometry, phi: &ScalarField) -> Result<(ScalarField, TiltedMetric)> {
    let h = ddbar(geom, phi)?;
    tilt(geom, h)
}

pub(crate) fn tilt(geom: &Geometry, h: HermitianField) -> Result<(ScalarField, TiltedMetric)> {
    let n = geom.half_dim();
    let m = n * n;
    let gram = geom.gram();
    let grid = *geom.grid();
    let mut metric = h;
    metric.shift_diagonal(gram);

    let mut inverse = vec![ZERO; grid.len() * m];
    let mut logdet = vec![0.0; grid.len()];
    let ref_log = n as f64 * gram.ln();
    let (min_eig, argmin) = inverse
        .par_chunks_mut(m)
        .zip(logdet.par_iter_mut())
        .enumerate()
        .map(|(p, (inv, ld))| {
            let a = metric.at(p);
            let lam = hermitian_min_eigenvalue(a, n);
            match cholesky_logdet_inverse(a, n, inv) {
                Some(v) if lam > 0.0 => *ld = v - ref_log,
                _ => *ld = f64::NAN,
            }
            (lam, p)
        })
        .reduce(|| (f64::INFINITY, 0), |x, y| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x });
    if !(min_eig > 0.0) || logdet.iter().any(|v| v.is_nan()) {
        return Err(Error::NotPositive { point: argmin, eigenvalue: min_eig });
    }
    Ok((ScalarField::from_vec(grid, logdet), TiltedMetric { metric, inverse, min_eigenvalue: min_eig, argmin }))
}

/// Operator `ψ ↦ Re Σ_ij W_ji(p) (∂∂̄ψ)_ij` for a per-point weight matrix `W`.
fn trace_operator(geom: &Geometry, weight: &(dyn Fn(usize, &mut [Complex64]) + Sync)) -> StencilOperator {
    let n = geom.half_dim();
    let dim = geom.dim();
    let grid = *geom.grid();
    let npairs = pair_count(dim);
    let width = npairs + dim;
    let mut flat = vec![0.0; grid.len() * width];
    flat.par_chunks_mut(width).enumerate().for_each(|(p, out)| {
        let mut w = [ZERO; MAX_HALF_DIM * MAX_HALF_DIM];
        weight(p, &mut w[..n * n]);
        for i in 0..n {
            for j in 0..n {
                let wji = w[j * n + i];
                if wji == ZERO {
                    continue;
                }
                for (a, ea) in geom.frame_entries(p, i) {
                    for (b, eb) in geom.frame_entries(p, j) {
                        out[pair_index(dim, a, b)] += (wji * ea * eb.conj()).re;
                    }
                }
                for (b, c) in geom.first_order_entries(p, i, j) {
                    out[npairs + b] += (wji * c).re;
                }
            }
        }
    });
    let field = |k: usize| -> Vec<f64> { flat.par_chunks(width).map(|c| c[k]).collect() };
    let mut second = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            second.push(((a, b), field(pair_index(dim, a, b))));
        }
    }
    let first = (0..dim).map(|b| (b, field(npairs + b))).collect();
    StencilOperator::new(grid, second, first)
}

/// Assembled canonical Laplacian `Δ^C = g^{ij̄}(e_i ē_j − [e_i, ē_j]^{(0,1)})`.
pub fn canonical_operator(geom: &Geometry) -> StencilOperator {
    let n = geom.half_dim();
    let s = 1.0 / geom.gram();
    trace_operator(geom, &|_, w| {
        for i in 0..n {
            w[i * n + i] = Complex64::new(s, 0.0);
        }
    })
}

pub fn canonical_laplacian(geom: &Geometry, f: &ScalarField) -> Result<ScalarField> {
    check_grid(geom.grid(), f.grid())?;
    apply_op(&canonical_operator(geom), f)
}

/// Assembled `L = g̃^{ij̄}(e_i ē_j − [e_i, ē_j]^{(0,1)})`.
pub fn linearized_operator(geom: &Geometry, tilted: &TiltedMetric) -> Result<StencilOperator> {
    check_grid(geom.grid(), tilted.metric().grid())?;
    if !tilted.is_positive() {
        return Err(Error::NotPositive { point: tilted.argmin(), eigenvalue: tilted.min_eigenvalue() });
    }
    Ok(trace_operator(geom, &|p, w| w.copy_from_slice(tilted.inverse_at(p))))
}

pub fn linearized_apply(geom: &Geometry, tilted: &TiltedMetric, psi: &ScalarField) -> Result<ScalarField> {
    check_grid(geom.grid(), psi.grid())?;
    apply_op(&linearized_operator(geom, tilted)?, psi)
}

/// Laplace–Beltrami operator in non-divergence expanded form
/// `g^{αβ} D²_{αβ} + (∂_α g^{αβ} + g^{αβ} ∂_α log √det g) D_β`
/// with analytic metric coefficients.
pub fn lb_operator(geom: &Geometry) -> Result<StencilOperator> {
    let dim = geom.dim();
    let grid = *geom.grid();
    let npairs = pair_count(dim);
    let width = npairs + dim;
    let mut flat = vec![0.0; grid.len() * width];
    flat.par_chunks_mut(width).enumerate().try_for_each(|(p, out)| -> Result<()> {
        let pf = geom.point_frame(p)?;
        let gi = pf.inverse_metric();
        let dgi = pf.inverse_metric_derivative();
        let dl = pf.log_density_gradient();
        for a in 0..dim {
            for b in a..dim {
                out[pair_index(dim, a, b)] = if a == b { gi[a * dim + a] } else { 2.0 * gi[a * dim + b] };
            }
        }
        for b in 0..dim {
            out[npairs + b] = (0..dim).map(|a| dgi[(a * dim + b) * dim + a] + gi[a * dim + b] * dl[a]).sum();
        }
        Ok(())
    })?;
    let field = |k: usize| -> Vec<f64> { flat.par_chunks(width).map(|c| c[k]).collect() };
    let mut second = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            second.push(((a, b), field(pair_index(dim, a, b))));
        }
    }
    let first = (0..dim).map(|b| (b, field(npairs + b))).collect();
    Ok(StencilOperator::new(grid, second, first))
}

pub fn lb_laplacian(geom: &Geometry, f: &ScalarField) -> Result<ScalarField> {
    check_grid(geom.grid(), f.grid())?;
    apply_op(&lb_operator(geom)?, f)
}

/// `Δf − 2Δ^C f`, the discrete `τ(df)`.
pub fn torsion_residual(geom: &Geometry, f: &ScalarField) -> Result<ScalarField> {
    let lb = lb_laplacian(geom, f)?;
    let c = canonical_laplacian(geom, f)?;
    lb.lin_comb(1.0, &c, -2.0)
}

pub(crate) fn apply_op(op: &StencilOperator, f: &ScalarField) -> Result<ScalarField> {
    let mut out = vec![0.0; f.grid().len()];
    op.apply(f.values(), &mut out);
    Ok(ScalarField::from_vec(*f.grid(), out))
}

/// Log-density of `φ` given analytically, evaluated with exact derivatives
/// (no stencils). Used to manufacture right-hand sides.
pub fn exact_log_density(geom: &Geometry, phi: &TrigSeries) -> Result<ScalarField> {
    let grid = *geom.grid();
    phi.validate(grid.dim())?;
    let n = geom.half_dim();
    let dim = grid.dim();
    let gram = geom.gram();
    let ref_log = n as f64 * gram.ln();
    let vals: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let x = grid.coord_vec(p);
            let mut g = vec![0.0; dim];
            let mut hess = vec![0.0; dim * dim];
            phi.gradient(&x, &mut g);
            phi.hessian(&x, &mut hess);
            let mut h = vec![ZERO; n * n];
            ddbar_point(geom, p, dim, &|a, b| hess[a * dim + b], &|b| g[b], &mut h);
            hermitize(&mut h, n);
            for i in 0..n {
                h[i * n + i] += gram;
            }
            let mut inv = vec![ZERO; n * n];
            cholesky_logdet_inverse(&h, n, &mut inv)
                .map(|v| v - ref_log)
                .ok_or_else(|| Error::NotPositive { point: p, eigenvalue: hermitian_min_eigenvalue(&h, n) })
        })
        .collect();
    let values = vals.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(ScalarField::from_vec(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::ddbar;
    use crate::geometries::{flat_torus, twisted_torus};
    use crate::grid::integrate;
    use crate::trig::TrigTerm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_laplacian_flat_cosine() {
        let g = flat_torus(1, 32).unwrap();
        let f = ScalarField::from_fn(*g.grid(), |x| x[0].cos());
        let l = canonical_laplacian(&g, &f).unwrap();
        let exact = f.scaled(-0.5);
        assert!(l.lin_comb(1.0, &exact, -1.0).unwrap().sup_norm() < 1e-5);
        let c = ScalarField::constant(*g.grid(), 1.5);
        assert!(canonical_laplacian(&g, &c).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn trace_of_ddbar_is_canonical_laplacian() {
        let g = twisted_torus(8, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = TrigSeries::random(4, 4, 2, 1.0, &mut rng).sample(*g.grid()).unwrap();
        let t = ddbar(&g, &f).unwrap().trace();
        let l = canonical_laplacian(&g, &f).unwrap();
        assert!(t.lin_comb(1.0, &l, -1.0).unwrap().sup_norm() < 1e-11 * (1.0 + l.sup_norm()));
    }

    #[test]
    fn lb_flat_cosine_and_constant() {
        let g = flat_torus(2, 16).unwrap();
        let f = ScalarField::from_fn(*g.grid(), |x| x[0].cos());
        let l = lb_laplacian(&g, &f).unwrap();
        assert!(l.lin_comb(1.0, &f, 1.0).unwrap().sup_norm() < 1e-3);
        assert!(lb_laplacian(&g, &ScalarField::constant(*g.grid(), 2.0)).unwrap().sup_norm() < 1e-11);
    }

    #[test]
    fn ma_log_density_examples() {
        let g = flat_torus(1, 32).unwrap();
        let zero = ScalarField::zeros(*g.grid());
        let (ld, t) = ma_log_density(&g, &zero).unwrap();
        assert_eq!(ld.sup_norm(), 0.0);
        assert_eq!(t.min_eigenvalue(), 1.0);
        let phi = ScalarField::from_fn(*g.grid(), |x| 0.1 * x[0].cos());
        let (ld, _) = ma_log_density(&g, &phi).unwrap();
        let exact = ScalarField::from_fn(*g.grid(), |x| (1.0 - 0.05 * x[0].cos()).ln());
        assert!(ld.lin_comb(1.0, &exact, -1.0).unwrap().sup_norm() < 1e-6);
        let big = ScalarField::from_fn(*g.grid(), |x| 3.0 * x[0].cos());
        let err = ma_log_density(&g, &big).unwrap_err();
        assert_eq!(err.name(), "NotPositive");
        if let Error::NotPositive { point, eigenvalue } = err {
            assert!(eigenvalue < 0.0);
            assert_eq!(g.grid().coord_vec(point)[0], 0.0);
        }
    }

    #[test]
    fn linearized_reduces_to_canonical() {
        let g = twisted_torus(8, 0.3).unwrap();
        let zero = ScalarField::zeros(*g.grid());
        let (_, t) = ma_log_density(&g, &zero).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = TrigSeries::random(4, 3, 2, 1.0, &mut rng).sample(*g.grid()).unwrap();
        let a = linearized_apply(&g, &t, &psi).unwrap();
        let b = canonical_laplacian(&g, &psi).unwrap();
        assert!(a.lin_comb(1.0, &b, -1.0).unwrap().sup_norm() < 1e-12);
        let c = ScalarField::constant(*g.grid(), 3.0);
        assert!(linearized_apply(&g, &t, &c).unwrap().sup_norm() < 1e-11);
    }

    #[test]
    fn exact_log_density_matches_discrete() {
        let g = twisted_torus(16, 0.3).unwrap();
        let s = TrigSeries::new(vec![TrigTerm::sin(vec![1, 0, 0, 0], 0.2), TrigTerm::cos(vec![0, 0, 1, 0], 0.2)]);
        let exact = exact_log_density(&g, &s).unwrap();
        let (disc, _) = ma_log_density(&g, &s.sample(*g.grid()).unwrap()).unwrap();
        let err = exact.lin_comb(1.0, &disc, -1.0).unwrap().sup_norm();
        assert!(err < 1e-3 && err > 0.0, "{err}");
        let one = ScalarField::constant(*g.grid(), 1.0);
        assert!(integrate(&exact, &one).unwrap().is_finite());
    }
}
