//! Assembled variable-coefficient second-order operators
//! `A v = Σ_{α≤β} a^{αβ} D²_{αβ} v + Σ_β b^β D_β v`
//! together with their exact discrete transposes.

use rayon::prelude::*;

use crate::grid::{apply_axis, Grid};

#[derive(Clone, Debug)]
pub struct StencilOperator {
    grid: Grid,
    /// `(α, β)` with `α ≤ β` and the coefficient field of `D²_{αβ}`.
    second: Vec<((usize, usize), Vec<f64>)>,
    /// `β` and the coefficient field of `D_β`.
    first: Vec<(usize, Vec<f64>)>,
}

impl StencilOperator {
    /// Builds an operator from coefficient fields. Terms whose coefficient
    /// vanishes identically are dropped.
    pub fn new(grid: Grid, second: Vec<((usize, usize), Vec<f64>)>, first: Vec<(usize, Vec<f64>)>) -> Self {
        let second = second
            .into_iter()
            .map(|((a, b), c)| ((a.min(b), a.max(b)), c))
            .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
            .collect();
        let first = first.into_iter().filter(|(_, c)| c.iter().any(|&v| v != 0.0)).collect();
        Self { grid, second, first }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn second_order_terms(&self) -> &[((usize, usize), Vec<f64>)] {
        &self.second
    }

    pub fn first_order_terms(&self) -> &[(usize, Vec<f64>)] {
        &self.first
    }

    fn taps(&self) -> (Vec<(isize, f64)>, Vec<(isize, f64)>) {
        let h = self.grid.spacing();
        let o = self.grid.order();
        (o.first_derivative_taps(h), o.second_derivative_taps(h))
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let len = g.len();
        let (t1, t2) = self.taps();
        let mut first_derivs: Vec<Option<Vec<f64>>> = vec![None; g.dim()];
        let d1 = |axis: usize, cache: &mut Vec<Option<Vec<f64>>>| {
            if cache[axis].is_none() {
                let mut d = vec![0.0; len];
                apply_axis(g, v, &mut d, axis, &t1);
                cache[axis] = Some(d);
            }
        };
        out.fill(0.0);
        let mut tmp = vec![0.0; len];
        for ((a, b), c) in &self.second {
            if a == b {
                apply_axis(g, v, &mut tmp, *a, &t2);
            } else {
                d1(*a, &mut first_derivs);
                apply_axis(g, first_derivs[*a].as_ref().unwrap(), &mut tmp, *b, &t1);
            }
            accumulate(out, c, &tmp, 1.0);
        }
        for (b, c) in &self.first {
            d1(*b, &mut first_derivs);
            accumulate(out, c, first_derivs[*b].as_ref().unwrap(), 1.0);
        }
    }

    /// Exact transpose: `Aᵀ w = Σ D²_{αβ}(a^{αβ} w) − Σ D_β(b^β w)`, using
    /// that compact and composed second-difference matrices are symmetric
    /// and first-difference matrices antisymmetric.
    pub fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let len = g.len();
        let (t1, t2) = self.taps();
        out.fill(0.0);
        let mut prod = vec![0.0; len];
        let mut tmp = vec![0.0; len];
        let mut tmp2 = vec![0.0; len];
        for ((a, b), c) in &self.second {
            multiply(&mut prod, c, w);
            if a == b {
                apply_axis(g, &prod, &mut tmp, *a, &t2);
            } else {
                apply_axis(g, &prod, &mut tmp2, *b, &t1);
                apply_axis(g, &tmp2, &mut tmp, *a, &t1);
            }
            out.par_iter_mut().zip(tmp.par_iter()).for_each(|(o, t)| *o += t);
        }
        for (b, c) in &self.first {
            multiply(&mut prod, c, w);
            apply_axis(g, &prod, &mut tmp, *b, &t1);
            out.par_iter_mut().zip(tmp.par_iter()).for_each(|(o, t)| *o -= t);
        }
    }

    /// Upper bound on the spectral radius from Gershgorin-type estimates of
    /// the stencil symbols.
    pub fn spectral_bound(&self) -> f64 {
        let h = self.grid.spacing();
        let o = self.grid.order();
        let s2 = o.second_symbol_bound() / (h * h);
        let s1 = o.first_symbol_bound() / h;
        let len = self.grid.len();
        (0..len)
            .into_par_iter()
            .map(|p| {
                let mut r = 0.0;
                for ((a, b), c) in &self.second {
                    r += c[p].abs() * if a == b { s2 } else { s1 * s1 };
                }
                for (_, c) in &self.first {
                    r += c[p].abs() * s1;
                }
                r
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn accumulate(out: &mut [f64], c: &[f64], t: &[f64], s: f64) {
    out.par_iter_mut().zip(c.par_iter().zip(t.par_iter())).for_each(|(o, (c, t))| *o += s * c * t);
}

fn multiply(out: &mut [f64], c: &[f64], w: &[f64]) {
    out.par_iter_mut().zip(c.par_iter().zip(w.par_iter())).for_each(|(o, (c, w))| *o = c * w);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(grid: Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn transpose_is_exact() {
        let grid = Grid::periodic(1, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let op = StencilOperator::new(
            grid,
            vec![((0, 0), random(grid, &mut rng)), ((0, 1), random(grid, &mut rng)), ((1, 1), random(grid, &mut rng))],
            vec![(0, random(grid, &mut rng)), (1, random(grid, &mut rng))],
        );
        let u = random(grid, &mut rng);
        let w = random(grid, &mut rng);
        let mut au = vec![0.0; grid.len()];
        let mut atw = vec![0.0; grid.len()];
        op.apply(&u, &mut au);
        op.apply_transpose(&w, &mut atw);
        let lhs: f64 = au.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&atw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn laplacian_of_cosine() {
        let grid = Grid::periodic(1, 32).unwrap();
        let one = vec![1.0; grid.len()];
        let op = StencilOperator::new(grid, vec![((0, 0), one.clone()), ((1, 1), one)], vec![]);
        let f = ScalarField::from_fn(grid, |x| x[0].cos() + x[1].sin());
        let mut out = vec![0.0; grid.len()];
        op.apply(f.values(), &mut out);
        let err = out.iter().zip(f.values()).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        assert!(err < 1e-4);
        assert!(op.spectral_bound() >= 2.0 * 16.0 / 3.0 / grid.spacing().powi(2) * 0.999);
    }

    #[test]
    fn zero_terms_are_dropped() {
        let grid = Grid::periodic(1, 8).unwrap();
        let op = StencilOperator::new(grid, vec![((1, 0), vec![0.0; 64])], vec![(0, vec![0.0; 64])]);
        assert!(op.second_order_terms().is_empty() && op.first_order_terms().is_empty());
    }
}
