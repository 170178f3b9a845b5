//! Built-in model geometries on the standard torus.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameModel, Geometry};
use crate::grid::{Grid, StencilOrder};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `e_j = (∂_{2j} − i ∂_{2j+1})/√2` with constant coefficients.
#[derive(Clone, Debug)]
pub struct FlatFrame {
    pub half_dim: usize,
}

impl FrameModel for FlatFrame {
    fn half_dim(&self) -> usize {
        self.half_dim
    }

    fn name(&self) -> String {
        format!("flat-{}", self.half_dim)
    }

    fn frame(&self, _x: &[f64], out: &mut [Complex64]) {
        let d = 2 * self.half_dim;
        out.fill(ZERO);
        for k in 0..self.half_dim {
            out[k * d + 2 * k] = Complex64::new(FRAC_1_SQRT_2, 0.0);
            out[k * d + 2 * k + 1] = Complex64::new(0.0, -FRAC_1_SQRT_2);
        }
    }

    fn frame_derivative(&self, _x: &[f64], out: &mut [Complex64]) {
        out.fill(ZERO);
    }
}

/// Real frame `∂₁, ∂₂, ∂₃ + ε sin(x¹) ∂₄, ∂₄` on the 4-torus, paired by `J`
/// as `(f₁, f₂)` and `(f₃, f₄)`.
#[derive(Clone, Debug)]
pub struct TwistedFrame {
    pub twist: f64,
}

impl FrameModel for TwistedFrame {
    fn half_dim(&self) -> usize {
        2
    }

    fn name(&self) -> String {
        format!("twisted-{}", self.twist)
    }

    fn frame(&self, x: &[f64], out: &mut [Complex64]) {
        let s = FRAC_1_SQRT_2;
        out.fill(ZERO);
        out[0] = Complex64::new(s, 0.0);
        out[1] = Complex64::new(0.0, -s);
        out[4 + 2] = Complex64::new(s, 0.0);
        out[4 + 3] = Complex64::new(s * self.twist * x[0].sin(), -s);
    }

    fn frame_derivative(&self, x: &[f64], out: &mut [Complex64]) {
        out.fill(ZERO);
        // ∂₁ E₂⁴
        out[(4 + 3) * 4] = Complex64::new(FRAC_1_SQRT_2 * self.twist * x[0].cos(), 0.0);
    }
}

/// Conformal rescaling `e_i ↦ e^{−v/2} e_i` of another frame, with
/// `v = a (sin(x¹ + x^{2n}) + cos x²)`; the metric becomes `e^v g`.
#[derive(Clone, Debug)]
pub struct ConformalFrame {
    pub base: Arc<dyn FrameModel>,
    pub amplitude: f64,
}

impl ConformalFrame {
    /// The conformal exponent `v` and its gradient.
    pub fn exponent(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = x.len();
        let a = self.amplitude;
        let t = x[0] + x[d - 1];
        grad.fill(0.0);
        grad[0] += a * t.cos();
        grad[d - 1] += a * t.cos();
        grad[1] -= a * x[1].sin();
        a * (t.sin() + x[1].cos())
    }
}

impl FrameModel for ConformalFrame {
    fn half_dim(&self) -> usize {
        self.base.half_dim()
    }

    fn name(&self) -> String {
        format!("{}-conformal-{}", self.base.name(), self.amplitude)
    }

    fn frame(&self, x: &[f64], out: &mut [Complex64]) {
        self.base.frame(x, out);
        let mut grad = vec![0.0; x.len()];
        let s = (-0.5 * self.exponent(x, &mut grad)).exp();
        out.iter_mut().for_each(|z| *z *= s);
    }

    fn frame_derivative(&self, x: &[f64], out: &mut [Complex64]) {
        let d = x.len();
        let n = self.half_dim();
        let mut e = vec![ZERO; n * d];
        self.base.frame(x, &mut e);
        self.base.frame_derivative(x, out);
        let mut grad = vec![0.0; d];
        let s = (-0.5 * self.exponent(x, &mut grad)).exp();
        for i in 0..n {
            for a in 0..d {
                for b in 0..d {
                    let k = (i * d + a) * d + b;
                    out[k] = s * (out[k] - 0.5 * grad[b] * e[i * d + a]);
                }
            }
        }
    }
}

/// Rescales the last frame vector of another frame by `e^{−w}`, with
/// `w = a (cos x¹ + sin x^{2n−1})`. Unlike a conformal change this does not keep
/// `ω` conformally closed, and `w` couples the first and last planes so the
/// Gauduchon factor is not a closed-form function of the data.
#[derive(Clone, Debug)]
pub struct WarpedFrame {
    pub base: Arc<dyn FrameModel>,
    pub amplitude: f64,
}

impl WarpedFrame {
    /// The exponent `w` and its gradient.
    pub fn exponent(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = x.len();
        let a = self.amplitude;
        grad.fill(0.0);
        grad[0] = -a * x[0].sin();
        grad[d - 2] += a * x[d - 2].cos();
        a * (x[0].cos() + x[d - 2].sin())
    }
}

impl FrameModel for WarpedFrame {
    fn half_dim(&self) -> usize {
        self.base.half_dim()
    }

    fn name(&self) -> String {
        format!("{}-warped-{}", self.base.name(), self.amplitude)
    }

    fn frame(&self, x: &[f64], out: &mut [Complex64]) {
        self.base.frame(x, out);
        let d = x.len();
        let mut grad = vec![0.0; d];
        let s = (-self.exponent(x, &mut grad)).exp();
        out[(self.half_dim() - 1) * d..].iter_mut().for_each(|z| *z *= s);
    }

    fn frame_derivative(&self, x: &[f64], out: &mut [Complex64]) {
        let d = x.len();
        let n = self.half_dim();
        let mut e = vec![ZERO; n * d];
        self.base.frame(x, &mut e);
        self.base.frame_derivative(x, out);
        let mut grad = vec![0.0; d];
        let s = (-self.exponent(x, &mut grad)).exp();
        let i = n - 1;
        for a in 0..d {
            for b in 0..d {
                let k = (i * d + a) * d + b;
                out[k] = s * (out[k] - grad[b] * e[i * d + a]);
            }
        }
    }
}

pub fn flat_torus(half_dim: usize, points_per_axis: usize) -> Result<Geometry> {
    let grid = Grid::periodic(half_dim, points_per_axis)?;
    Geometry::new(grid, Arc::new(FlatFrame { half_dim }))
}

pub fn check_twist(twist: f64) -> Result<()> {
    if (0.0..1.0).contains(&twist) {
        Ok(())
    } else {
        Err(Error::TwistOutOfRange(twist))
    }
}

pub fn twisted_torus(points_per_axis: usize, twist: f64) -> Result<Geometry> {
    check_twist(twist)?;
    let grid = Grid::periodic(2, points_per_axis)?;
    Geometry::new(grid, Arc::new(TwistedFrame { twist }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Flat,
    Twisted,
}

fn default_box() -> f64 {
    2.0 * PI
}

fn default_order() -> usize {
    4
}

/// Declarative description of a built-in geometry and its grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub half_dim: usize,
    #[serde(default)]
    pub twist: f64,
    pub points_per_axis: usize,
    #[serde(default = "default_box")]
    pub box_length: f64,
    #[serde(default = "default_order")]
    pub stencil_order: usize,
    /// Amplitude of an optional conformal rescaling (0 disables it).
    #[serde(default)]
    pub conformal_amplitude: f64,
    /// Amplitude of an optional warping of the last frame vector (0 disables it).
    #[serde(default)]
    pub warp_amplitude: f64,
}

impl GeometrySpec {
    pub fn flat(half_dim: usize, points_per_axis: usize) -> Self {
        Self {
            kind: GeometryKind::Flat,
            half_dim,
            twist: 0.0,
            points_per_axis,
            box_length: default_box(),
            stencil_order: 4,
            conformal_amplitude: 0.0,
            warp_amplitude: 0.0,
        }
    }

    pub fn twisted(points_per_axis: usize, twist: f64) -> Self {
        Self { kind: GeometryKind::Twisted, half_dim: 2, twist, ..Self::flat(2, points_per_axis) }
    }

    pub fn build(&self) -> Result<Geometry> {
        let order = StencilOrder::from_usize(self.stencil_order)?;
        let grid = Grid::new(self.half_dim, self.points_per_axis, self.box_length)?.with_order(order);
        let model: Arc<dyn FrameModel> = match self.kind {
            GeometryKind::Flat => {
                if self.twist != 0.0 {
                    return Err(Error::InvalidGeometry("twist is only meaningful for the twisted torus".into()));
                }
                Arc::new(FlatFrame { half_dim: self.half_dim })
            }
            GeometryKind::Twisted => {
                check_twist(self.twist)?;
                if self.half_dim != 2 {
                    return Err(Error::InvalidGeometry(format!(
                        "the twisted torus has half dimension 2, got {}",
                        self.half_dim
                    )));
                }
                Arc::new(TwistedFrame { twist: self.twist })
            }
        };
        let needs_standard_box =
            self.kind == GeometryKind::Twisted || self.conformal_amplitude != 0.0 || self.warp_amplitude != 0.0;
        if needs_standard_box && (self.box_length - 2.0 * PI).abs() > 1e-12 {
            return Err(Error::InvalidGeometry("twisted, conformal and warped models need box length 2π".into()));
        }
        if !self.conformal_amplitude.is_finite() || !self.warp_amplitude.is_finite() {
            return Err(Error::InvalidGeometry("conformal and warp amplitudes must be finite".into()));
        }
        let model: Arc<dyn FrameModel> = if self.warp_amplitude != 0.0 {
            Arc::new(WarpedFrame { base: model, amplitude: self.warp_amplitude })
        } else {
            model
        };
        let model = if self.conformal_amplitude != 0.0 {
            Arc::new(ConformalFrame { base: model, amplitude: self.conformal_amplitude })
        } else {
            model
        };
        Geometry::new(grid, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twist_range() {
        assert_eq!(twisted_torus(8, 1.5).unwrap_err().name(), "TwistOutOfRange");
        assert_eq!(twisted_torus(8, -0.1).unwrap_err().name(), "TwistOutOfRange");
        assert!(twisted_torus(8, 0.99).is_ok());
    }

    #[test]
    fn zero_twist_is_flat() {
        let t = twisted_torus(8, 0.0).unwrap();
        let f = flat_torus(2, 8).unwrap();
        for p in [0, 100, 4095] {
            for i in 0..2 {
                for a in 0..4 {
                    assert_eq!(t.frame_coefficient(p, i, a), f.frame_coefficient(p, i, a));
                }
            }
            assert_eq!(t.density().values()[p], f.density().values()[p]);
        }
        assert!(t.first_order_support(0, 1).is_empty());
    }

    #[test]
    fn conformal_derivatives_match_finite_differences() {
        let m = ConformalFrame { base: Arc::new(TwistedFrame { twist: 0.3 }), amplitude: 0.2 };
        let x = [0.4, 1.1, 2.5, 3.3];
        let mut de = vec![ZERO; 2 * 4 * 4];
        m.frame_derivative(&x, &mut de);
        let t = 1e-6;
        for b in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[b] += t;
            xm[b] -= t;
            let mut ep = vec![ZERO; 8];
            let mut em = vec![ZERO; 8];
            m.frame(&xp, &mut ep);
            m.frame(&xm, &mut em);
            for k in 0..8 {
                let fd = (ep[k] - em[k]) / (2.0 * t);
                assert!((fd - de[k * 4 + b]).norm() < 1e-8, "k={k} b={b}");
            }
        }
    }

    #[test]
    fn warped_derivatives_match_finite_differences() {
        let m = WarpedFrame { base: Arc::new(TwistedFrame { twist: 0.3 }), amplitude: 0.2 };
        let x = [0.4, 1.1, 2.5, 3.3];
        let mut de = vec![ZERO; 2 * 4 * 4];
        m.frame_derivative(&x, &mut de);
        let t = 1e-6;
        for b in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[b] += t;
            xm[b] -= t;
            let mut ep = vec![ZERO; 8];
            let mut em = vec![ZERO; 8];
            m.frame(&xp, &mut ep);
            m.frame(&xm, &mut em);
            for k in 0..8 {
                let fd = (ep[k] - em[k]) / (2.0 * t);
                assert!((fd - de[k * 4 + b]).norm() < 1e-8, "k={k} b={b}");
            }
        }
    }

    #[test]
    fn spec_round_trip_and_validation() {
        let spec = GeometrySpec::twisted(8, 0.3);
        assert_eq!(spec.build().unwrap().half_dim(), 2);
        let bad = GeometrySpec { half_dim: 3, ..spec.clone() };
        assert_eq!(bad.build().unwrap_err().name(), "InvalidGeometry");
        let bad = GeometrySpec { twist: 1.5, ..spec };
        assert_eq!(bad.build().unwrap_err().name(), "TwistOutOfRange");
    }
}
