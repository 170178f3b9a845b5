//! Inverse of the constant-coefficient operator `c·½Σ_α D²_α − σ` by FFT.
//!
//! This is the flat canonical Laplacian (with an optional shift) and serves
//! as a preconditioner for the variable-coefficient operators.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct FlatInverse {
    grid: Grid,
    /// Reciprocal symbol per flat wave index; 0 where the symbol vanishes.
    inv_symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FlatInverse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlatInverse").field("grid", &self.grid).finish()
    }
}

impl FlatInverse {
    /// Inverse of `scale·½Σ_α D²_α − shift`. With `shift = 0` the constant
    /// mode is mapped to zero (pseudo-inverse).
    pub fn new(grid: Grid, scale: f64, shift: f64) -> Self {
        let n = grid.points_per_axis();
        let dim = grid.dim();
        let h = grid.spacing();
        let order = grid.order();
        let line: Vec<f64> = (0..n)
            .map(|k| 0.5 * order.second_derivative_symbol(h, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        let mut inv_symbol = vec![0.0; grid.len()];
        let mut idx = vec![0usize; dim];
        for (p, s) in inv_symbol.iter_mut().enumerate() {
            grid.multi_index(p, &mut idx);
            let sym: f64 = scale * idx.iter().map(|&k| line[k]).sum::<f64>() - shift;
            *s = if sym.abs() > 1e-12 * (1.0 + shift.abs()) { 1.0 / sym } else { 0.0 };
        }
        let mut planner = FftPlanner::new();
        Self { grid, inv_symbol, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points_per_axis();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..self.grid.dim() {
            let stride = self.grid.stride(axis);
            if stride == 1 {
                fft.process_with_scratch(buf, &mut scratch);
                continue;
            }
            let block = stride * n;
            for chunk in buf.chunks_mut(block) {
                for l in 0..stride {
                    for (i, z) in line.iter_mut().enumerate() {
                        *z = chunk[l + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, z) in line.iter().enumerate() {
                        chunk[l + i * stride] = *z;
                    }
                }
            }
        }
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        for (z, s) in buf.iter_mut().zip(&self.inv_symbol) {
            *z *= *s;
        }
        self.transform(&mut buf, &self.inverse);
        let norm = 1.0 / self.grid.len() as f64;
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil_op::StencilOperator;

    #[test]
    fn inverts_flat_operator() {
        let grid = Grid::periodic(2, 8).unwrap();
        let half = vec![0.5; grid.len()];
        let op = StencilOperator::new(grid, (0..4).map(|a| ((a, a), half.clone())).collect(), vec![]);
        let v: Vec<f64> = (0..grid.len()).map(|p| ((p * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let v: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let pre = FlatInverse::new(grid, 1.0, 0.0);
        let mut x = vec![0.0; grid.len()];
        pre.apply(&v, &mut x);
        let mut back = vec![0.0; grid.len()];
        op.apply(&x, &mut back);
        let err = back.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn shifted_inverse_keeps_constants() {
        let grid = Grid::periodic(1, 8).unwrap();
        let pre = FlatInverse::new(grid, 1.0, 0.5);
        let mut x = vec![0.0; grid.len()];
        pre.apply(&vec![1.0; grid.len()], &mut x);
        assert!(x.iter().all(|v| (v + 2.0).abs() < 1e-12));
    }
}
