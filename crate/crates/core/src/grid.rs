//! Uniform periodic grids over a `2n`-dimensional box, real and complex
//! sample fields, centered finite differences and midpoint integration.
//!
//! Points are addressed by a flat index with axis 0 varying fastest, so the
//! stride of axis `a` is `N^a`. All index arithmetic is periodic.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy order of the centered stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn as_usize(self) -> usize {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }

    pub fn from_usize(order: usize) -> Result<Self> {
        match order {
            2 => Ok(StencilOrder::Second),
            4 => Ok(StencilOrder::Fourth),
            other => Err(Error::InvalidGrid(format!("unsupported stencil order {other}"))),
        }
    }

    /// Taps `(offset, weight)` of the first-derivative stencil at spacing `h`.
    pub fn first_derivative_taps(self, h: f64) -> Vec<(isize, f64)> {
        match self {
            StencilOrder::Second => vec![(-1, -0.5 / h), (1, 0.5 / h)],
            StencilOrder::Fourth => {
                let c = 1.0 / (12.0 * h);
                vec![(-2, c), (-1, -8.0 * c), (1, 8.0 * c), (2, -c)]
            }
        }
    }

    /// Taps of the compact second-derivative stencil at spacing `h`.
    pub fn second_derivative_taps(self, h: f64) -> Vec<(isize, f64)> {
        match self {
            StencilOrder::Second => {
                let c = 1.0 / (h * h);
                vec![(-1, c), (0, -2.0 * c), (1, c)]
            }
            StencilOrder::Fourth => {
                let c = 1.0 / (12.0 * h * h);
                vec![(-2, -c), (-1, 16.0 * c), (0, -30.0 * c), (1, 16.0 * c), (2, -c)]
            }
        }
    }

    /// Fourier symbol of the compact second derivative at angle `theta = k h`.
    pub fn second_derivative_symbol(self, h: f64, theta: f64) -> f64 {
        self.second_derivative_taps(h)
            .iter()
            .map(|&(o, c)| c * (o as f64 * theta).cos())
            .sum()
    }

    /// Largest modulus of the first-derivative symbol, times `h`.
    pub(crate) fn first_symbol_bound(self) -> f64 {
        match self {
            StencilOrder::Second => 1.0,
            // max over theta of |8 sin(t) - sin(2t)| / 6
            StencilOrder::Fourth => 1.3722,
        }
    }

    /// Largest modulus of the compact second-derivative symbol, times `h^2`.
    pub(crate) fn second_symbol_bound(self) -> f64 {
        match self {
            StencilOrder::Second => 4.0,
            StencilOrder::Fourth => 16.0 / 3.0,
        }
    }
}

/// A uniform periodic lattice with `N` points on each of the `2n` axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_dim: usize,
    points_per_axis: usize,
    box_length: f64,
    order: StencilOrder,
}

impl Grid {
    /// Builds a grid with the default fourth-order stencils.
    pub fn new(half_dim: usize, points_per_axis: usize, box_length: f64) -> Result<Self> {
        if half_dim == 0 {
            return Err(Error::InvalidGrid("half_dim must be at least 1".into()));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::GridTooCoarse(points_per_axis));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {box_length}")));
        }
        let total = (points_per_axis as u128).checked_pow(2 * half_dim as u32);
        match total {
            Some(t) if t <= (1u128 << 31) => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "{points_per_axis}^{} points is too many",
                    2 * half_dim
                )))
            }
        }
        Ok(Self { half_dim, points_per_axis, box_length, order: StencilOrder::Fourth })
    }

    /// Grid on the standard `2π` box.
    pub fn periodic(half_dim: usize, points_per_axis: usize) -> Result<Self> {
        Self::new(half_dim, points_per_axis, 2.0 * std::f64::consts::PI)
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Real dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Total number of points, `N^(2n)`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell, `h^(2n)`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.dim() as i32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow(axis as u32)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim() {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange { axis, dim: self.dim() })
        }
    }

    /// Integer coordinates of point `p`.
    pub fn multi_index(&self, mut p: usize, out: &mut [usize]) {
        for slot in out.iter_mut().take(self.dim()) {
            *slot = p % self.points_per_axis;
            p /= self.points_per_axis;
        }
    }

    /// Flat index of the given (periodically wrapped) integer coordinates.
    pub fn index_of(&self, idx: &[isize]) -> usize {
        let n = self.points_per_axis as isize;
        idx.iter()
            .rev()
            .fold(0usize, |acc, &i| acc * self.points_per_axis + i.rem_euclid(n) as usize)
    }

    /// Flat index of the neighbour of `p` shifted by `offset` along `axis`.
    pub fn shift(&self, p: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let n = self.points_per_axis as isize;
        let i = ((p / stride) % self.points_per_axis) as isize;
        let j = (i + offset).rem_euclid(n);
        (p as isize + (j - i) * stride as isize) as usize
    }

    /// Physical coordinates of point `p`.
    pub fn coords(&self, p: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut q = p;
        for slot in out.iter_mut().take(self.dim()) {
            *slot = (q % self.points_per_axis) as f64 * h;
            q /= self.points_per_axis;
        }
    }

    pub fn coord_vec(&self, p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.coords(p, &mut x);
        x
    }
}

/// Real samples, one per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at point {p}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |x, p| {
                    grid.coords(p, x);
                    f(x)
                },
            )
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (p, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = p;
            }
        }
        best
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square of the samples.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self { grid: self.grid, values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        check_grid(&self.grid, &other.grid)
    }
}

/// Complex samples, one per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite complex value".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Grid, values: Vec<Complex64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_vec(self.grid, self.values.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> ScalarField {
        ScalarField::from_vec(self.grid, self.values.iter().map(|z| z.im).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub(crate) fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Applies a constant-coefficient periodic stencil along one axis.
pub(crate) fn apply_axis(grid: &Grid, src: &[f64], dst: &mut [f64], axis: usize, taps: &[(isize, f64)]) {
    let n = grid.points_per_axis();
    let stride = grid.stride(axis);
    let block = stride * n;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            taps.iter()
                .map(|&(o, _)| (i as isize + o).rem_euclid(n as isize) as usize)
                .collect()
        })
        .collect();
    let kernel = |b: usize, out: &mut [f64]| {
        let base = &src[b * block..(b + 1) * block];
        if stride == 1 {
            for (i, y) in out.iter_mut().enumerate() {
                let nb = &neighbours[i];
                *y = taps.iter().zip(nb).map(|(&(_, c), &j)| c * base[j]).sum();
            }
        } else {
            for i in 0..n {
                let o = &mut out[i * stride..(i + 1) * stride];
                o.fill(0.0);
                for (&(_, c), &j) in taps.iter().zip(&neighbours[i]) {
                    let s = &base[j * stride..(j + 1) * stride];
                    for (y, x) in o.iter_mut().zip(s) {
                        *y += c * x;
                    }
                }
            }
        }
    };
    if block == dst.len() && stride >= 1024 {
        // single block: split the contiguous inner range instead
        let chunk = stride.div_ceil(rayon::current_num_threads().max(1)).max(256);
        let out_ptr = SyncPtr(dst.as_mut_ptr());
        (0..stride.div_ceil(chunk)).into_par_iter().for_each(|c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(stride);
            for i in 0..n {
                for l in lo..hi {
                    let mut acc = 0.0;
                    for (&(_, w), &j) in taps.iter().zip(&neighbours[i]) {
                        acc += w * src[j * stride + l];
                    }
                    // SAFETY: each (i, l) is written by exactly one task.
                    unsafe { *out_ptr.get().add(i * stride + l) = acc };
                }
            }
        });
    } else {
        dst.par_chunks_mut(block).enumerate().for_each(|(b, out)| kernel(b, out));
    }
}

#[derive(Clone, Copy)]
struct SyncPtr(*mut f64);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}
impl SyncPtr {
    fn get(self) -> *mut f64 {
        self.0
    }
}

/// Stencil value at a single point.
pub(crate) fn apply_axis_at(grid: &Grid, src: &[f64], p: usize, axis: usize, taps: &[(isize, f64)]) -> f64 {
    taps.iter().map(|&(o, c)| c * src[grid.shift(p, axis, o)]).sum()
}

/// Centered periodic first derivative along `axis` (0-based) with the given
/// stencil order.
pub fn diff(f: &ScalarField, axis: usize, order: StencilOrder) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_axis(axis)?;
    let taps = order.first_derivative_taps(grid.spacing());
    let mut out = vec![0.0; grid.len()];
    apply_axis(&grid, f.values(), &mut out, axis, &taps);
    Ok(ScalarField::from_vec(grid, out))
}

/// Compact periodic second derivative along `axis` with the grid's order.
pub fn diff2(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    let grid = *f.grid();
    grid.check_axis(axis)?;
    let taps = grid.order().second_derivative_taps(grid.spacing());
    let mut out = vec![0.0; grid.len()];
    apply_axis(&grid, f.values(), &mut out, axis, &taps);
    Ok(ScalarField::from_vec(grid, out))
}

/// Midpoint rule `h^(2n) Σ f·density`.
pub fn integrate(f: &ScalarField, density: &ScalarField) -> Result<f64> {
    f.same_grid(density)?;
    if let Some((p, &v)) = density.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::BadDensity { point: p, value: v });
    }
    Ok(weighted_sum(f.values(), density.values()) * f.grid().cell_volume())
}

/// `Σ a·b`, summed in a fixed order.
pub(crate) fn weighted_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All first and second derivatives of one field, computed once.
pub(crate) struct Derivatives {
    pub first: Vec<Vec<f64>>,
    /// Indexed by [`pair_index`]; pure pairs use the compact stencil, mixed
    /// pairs compose two first derivatives.
    pub second: Vec<Vec<f64>>,
}

pub(crate) fn pair_index(dim: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    // row-major upper triangle
    a * dim - a * (a + 1) / 2 + b
}

pub(crate) fn pair_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl Derivatives {
    pub fn compute(grid: &Grid, f: &[f64]) -> Self {
        let dim = grid.dim();
        let h = grid.spacing();
        let order = grid.order();
        let t1 = order.first_derivative_taps(h);
        let t2 = order.second_derivative_taps(h);
        let len = grid.len();
        let mut first = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut d = vec![0.0; len];
            apply_axis(grid, f, &mut d, a, &t1);
            first.push(d);
        }
        let mut second = vec![Vec::new(); pair_count(dim)];
        for a in 0..dim {
            for b in a..dim {
                let mut d = vec![0.0; len];
                if a == b {
                    apply_axis(grid, f, &mut d, a, &t2);
                } else {
                    apply_axis(grid, &first[a], &mut d, b, &t1);
                }
                second[pair_index(dim, a, b)] = d;
            }
        }
        Self { first, second }
    }
}

/// First and second derivatives at a single point.
pub(crate) fn derivatives_at(grid: &Grid, f: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let dim = grid.dim();
    let h = grid.spacing();
    let order = grid.order();
    let t1 = order.first_derivative_taps(h);
    let t2 = order.second_derivative_taps(h);
    let first: Vec<f64> = (0..dim).map(|a| apply_axis_at(grid, f, p, a, &t1)).collect();
    let mut second = vec![0.0; pair_count(dim)];
    for a in 0..dim {
        for b in a..dim {
            second[pair_index(dim, a, b)] = if a == b {
                apply_axis_at(grid, f, p, a, &t2)
            } else {
                t1.iter()
                    .map(|&(o, c)| c * apply_axis_at(grid, f, grid.shift(p, b, o), a, &t1))
                    .sum()
            };
        }
    }
    (first, second)
}
