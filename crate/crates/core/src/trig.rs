//! Finite trigonometric series `Σ a·cos(k·x + phase)` with exact derivatives.
//!
//! These are the analytic test fields used for right-hand sides and
//! manufactured solutions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    /// Integer wave vector, one entry per axis.
    pub wave: Vec<i32>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl TrigTerm {
    pub fn cos(wave: Vec<i32>, amplitude: f64) -> Self {
        Self { wave, amplitude, phase: 0.0 }
    }

    pub fn sin(wave: Vec<i32>, amplitude: f64) -> Self {
        Self { wave, amplitude, phase: -std::f64::consts::FRAC_PI_2 }
    }

    fn angle(&self, x: &[f64]) -> f64 {
        self.wave.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>() + self.phase
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigSeries {
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        Self { terms }
    }

    /// Checks that every wave vector has `dim` entries and amplitudes are finite.
    pub fn validate(&self, dim: usize) -> Result<()> {
        for (k, t) in self.terms.iter().enumerate() {
            if t.wave.len() != dim {
                return Err(Error::InvalidOptions(format!(
                    "trig term {k}: wave vector has {} entries, expected {dim}",
                    t.wave.len()
                )));
            }
            if !t.amplitude.is_finite() || !t.phase.is_finite() {
                return Err(Error::InvalidOptions(format!("trig term {k}: non-finite coefficient")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.amplitude * t.angle(x).cos()).sum()
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for t in &self.terms {
            let s = -t.amplitude * t.angle(x).sin();
            for (o, &k) in out.iter_mut().zip(&t.wave) {
                *o += s * k as f64;
            }
        }
    }

    /// Row-major `dim × dim` Hessian.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let dim = x.len();
        for t in &self.terms {
            let c = -t.amplitude * t.angle(x).cos();
            for a in 0..dim {
                for b in 0..dim {
                    out[a * dim + b] += c * (t.wave[a] * t.wave[b]) as f64;
                }
            }
        }
    }

    /// Upper bound on the sup-norm, `Σ |a|`.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs()).sum()
    }

    pub fn sample(&self, grid: Grid) -> Result<ScalarField> {
        self.validate(grid.dim())?;
        Ok(ScalarField::from_fn(grid, |x| self.eval(x)))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { amplitude: c * t.amplitude, ..t.clone() })
                .collect(),
        }
    }

    /// Random series with `terms` nonconstant modes of wave numbers in
    /// `-max_wave..=max_wave`, scaled so that `Σ |a| = amplitude`.
    pub fn random(dim: usize, terms: usize, max_wave: i32, amplitude: f64, rng: &mut impl Rng) -> Self {
        let mut out = Vec::with_capacity(terms);
        while out.len() < terms {
            let wave: Vec<i32> = (0..dim).map(|_| rng.gen_range(-max_wave..=max_wave)).collect();
            if wave.iter().all(|&k| k == 0) {
                continue;
            }
            let amp = rng.gen_range(0.2..1.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            out.push(TrigTerm { wave, amplitude: amp, phase });
        }
        let series = Self { terms: out };
        let total = series.amplitude_bound();
        series.scaled(amplitude / total)
    }
}
