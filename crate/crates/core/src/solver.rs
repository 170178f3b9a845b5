//! Solvers for `(ω + i∂∂̄φ)ⁿ = e^{F+b} ωⁿ`: a continuity path with damped
//! Newton steps on the bordered unknown `(φ, b)`, and the parabolic flow
//! `∂φ/∂t = log det g̃ − F` integrated by a damped Runge–Kutta–Chebyshev
//! scheme.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FlatInverse;
use crate::gauduchon::{gauduchon_factor_with, GauduchonFactor, GauduchonOptions};
use crate::geometry::Geometry;
use crate::grid::{check_grid, weighted_sum, ScalarField};
use crate::krylov::{gmres, Bordered, BorderedFlat, GmresOptions, Preconditioner};
use crate::operators::{exact_log_density, linearized_operator, ma_log_density, TiltedMetric};
use crate::trig::TrigSeries;
use crate::verify::{estimate_monitors, EstimateMonitors};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePath {
    Continuity,
    Flow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub path: SolvePath,
    pub t_step_init: f64,
    pub t_step_min: f64,
    /// Sup-norm target for the residual `log det g̃ − F − b`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Smallest damping factor tried before a Newton step counts as failed.
    pub damping_min: f64,
    /// Accepted iterates keep `λ_min(g̃) ≥ positivity_floor · λ_min(g)`.
    pub positivity_floor: f64,
    /// Flow step `dt = flow_dt_factor · h²`.
    pub flow_dt_factor: f64,
    /// The flow stops once `sup |∂φ/∂t|` falls below this.
    pub flow_stop_tol: f64,
    pub flow_max_steps: usize,
    /// Floor of the relative Krylov tolerance (the Newton forcing term is
    /// never tighter than this).
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
    pub krylov_restart: usize,
    /// Precondition Krylov solves with the flat constant-coefficient inverse.
    pub precondition: bool,
    /// Record monitors at every continuity checkpoint and every this many
    /// flow steps (0 disables monitors).
    pub monitor_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            path: SolvePath::Continuity,
            t_step_init: 1.0,
            t_step_min: 1.0 / 64.0,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            damping_min: 1.0 / 64.0,
            positivity_floor: 0.05,
            flow_dt_factor: 100.0,
            flow_stop_tol: 1e-6,
            flow_max_steps: 2000,
            krylov_tol: 1e-12,
            krylov_max_iter: 600,
            krylov_restart: 60,
            precondition: true,
            monitor_every: 25,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidOptions(what.into()));
        let positive = [
            ("newton_tol", self.newton_tol),
            ("flow_dt_factor", self.flow_dt_factor),
            ("flow_stop_tol", self.flow_stop_tol),
            ("krylov_tol", self.krylov_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.t_step_init > 0.0 && self.t_step_init <= 1.0) {
            return bad("t_step_init must lie in (0, 1]");
        }
        if !(self.t_step_min > 0.0 && self.t_step_min <= self.t_step_init) {
            return bad("t_step_min must lie in (0, t_step_init]");
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return bad("damping_min must lie in (0, 1]");
        }
        if !(self.positivity_floor > 0.0 && self.positivity_floor < 1.0) {
            return bad("positivity_floor must lie in (0, 1)");
        }
        if self.newton_max_iter == 0 || self.flow_max_steps == 0 || self.krylov_max_iter == 0 || self.krylov_restart == 0 {
            return bad("iteration limits must be at least 1");
        }
        Ok(())
    }
}

/// Monitors recorded at a continuity parameter or flow time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonitorCheckpoint {
    pub at: f64,
    pub monitors: EstimateMonitors,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub phi: ScalarField,
    pub b: f64,
    pub path: SolvePath,
    /// Sup-norm of `log det g̃ − F − b` at the returned pair.
    pub final_residual: f64,
    /// `(t or flow time, sup-norm residual)` at every accepted iterate.
    pub residual_history: Vec<(f64, f64)>,
    /// `λ_min(g̃)/λ_min(g)` at every accepted iterate.
    pub positivity_margin_history: Vec<f64>,
    pub monitors: Vec<MonitorCheckpoint>,
    /// Newton steps or flow steps.
    pub iterations: usize,
    /// Accepted continuity steps, or flow steps.
    pub path_steps: usize,
    /// Wall-clock seconds.
    #[serde(skip)]
    pub wall_time: f64,
}

impl SolveReport {
    pub fn min_positivity_margin(&self) -> f64 {
        self.positivity_margin_history.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `log det g̃(φ) − F − b`.
pub fn residual(geom: &Geometry, phi: &ScalarField, b: f64, f: &ScalarField) -> Result<ScalarField> {
    check_grid(geom.grid(), f.grid())?;
    let (ld, _) = ma_log_density(geom, phi)?;
    Ok(ld.lin_comb(1.0, f, -1.0)?.shifted(-b))
}

/// A right-hand side built from a chosen potential.
#[derive(Clone, Debug)]
pub struct Manufactured {
    /// `F* = log det g̃(φ*) − b*`, evaluated with exact derivatives of `φ*`.
    pub f: ScalarField,
    /// The weighted mean of `log det g̃(φ*)` (weight `e^{(n−1)u} ωⁿ`).
    pub b: f64,
    /// `φ*` sampled on the grid and shifted to `sup φ* = 0`.
    pub phi: ScalarField,
}

/// Manufactures `(F*, b*)` so that `φ*` solves the equation exactly in the
/// continuum.
pub fn manufacture(geom: &Geometry, phi: &TrigSeries, u: &GauduchonFactor) -> Result<Manufactured> {
    check_grid(geom.grid(), u.u.grid())?;
    let ld = exact_log_density(geom, phi)?;
    let w = u.weight(geom)?;
    let b = weighted_sum(ld.values(), w.values()) / w.values().iter().sum::<f64>();
    let sample = phi.sample(*geom.grid())?;
    let top = sample.max();
    Ok(Manufactured { f: ld.shifted(-b), b, phi: sample.shifted(-top) })
}

/// Optional inputs shared by both solvers.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveInputs<'a> {
    /// Initial potential (must keep `g̃` positive); it is shifted to the
    /// weighted-mean-zero gauge.
    pub warm_start: Option<&'a ScalarField>,
    /// Precomputed Gauduchon factor; computed on demand otherwise.
    pub gauduchon: Option<&'a GauduchonFactor>,
}

struct Context<'a> {
    geom: &'a Geometry,
    f: &'a ScalarField,
    opts: &'a SolveOptions,
    /// Gauge weight normalized to unit sum.
    weight: Vec<f64>,
}

impl<'a> Context<'a> {
    fn new(geom: &'a Geometry, f: &'a ScalarField, opts: &'a SolveOptions, inputs: &SolveInputs) -> Result<Self> {
        opts.validate()?;
        check_grid(geom.grid(), f.grid())?;
        let computed;
        let u = match inputs.gauduchon {
            Some(u) => {
                check_grid(geom.grid(), u.u.grid())?;
                u
            }
            None => {
                let opts = GauduchonOptions { compute_defect: false, ..GauduchonOptions::default() };
                computed = gauduchon_factor_with(geom, &opts, None)?;
                &computed
            }
        };
        let w = u.weight(geom)?.into_values();
        let total: f64 = w.iter().sum();
        Ok(Self { geom, f, opts, weight: w.iter().map(|v| v / total).collect() })
    }

    fn mean(&self, v: &[f64]) -> f64 {
        weighted_sum(v, &self.weight)
    }

    fn start(&self, inputs: &SolveInputs) -> Result<Vec<f64>> {
        match inputs.warm_start {
            Some(w) => {
                check_grid(self.geom.grid(), w.grid())?;
                let m = self.mean(w.values());
                Ok(w.values().iter().map(|v| v - m).collect())
            }
            None => Ok(vec![0.0; self.geom.grid().len()]),
        }
    }

    fn margin(&self, tilted: &TiltedMetric) -> f64 {
        tilted.min_eigenvalue() / self.geom.gram()
    }

    fn field(&self, v: Vec<f64>) -> ScalarField {
        ScalarField::from_vec(*self.geom.grid(), v)
    }

    fn flat_preconditioner(&self, tilted: &TiltedMetric) -> FlatInverse {
        let n = self.geom.half_dim();
        let len = self.geom.grid().len();
        let mean_trace = (0..len)
            .map(|p| {
                let inv = tilted.inverse_at(p);
                (0..n).map(|i| inv[i * n + i].re).sum::<f64>()
            })
            .sum::<f64>()
            / (len * n) as f64;
        FlatInverse::new(*self.geom.grid(), mean_trace, 0.0)
    }

    fn monitors(&self, phi: &[f64], at: f64) -> Result<MonitorCheckpoint> {
        Ok(MonitorCheckpoint { at, monitors: estimate_monitors(self.geom, &self.field(phi.to_vec()))? })
    }

    fn finish(&self, mut phi: Vec<f64>, b: f64, mut report: SolveReport, started: Instant) -> Result<SolveReport> {
        let top = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        phi.iter_mut().for_each(|v| *v -= top);
        let phi = self.field(phi);
        report.final_residual = residual(self.geom, &phi, b, self.f)?.sup_norm();
        report.phi = phi;
        report.b = b;
        report.wall_time = started.elapsed().as_secs_f64();
        Ok(report)
    }
}

fn empty_report(grid: crate::grid::Grid, path: SolvePath) -> SolveReport {
    SolveReport {
        phi: ScalarField::zeros(grid),
        b: 0.0,
        path,
        final_residual: 0.0,
        residual_history: Vec::new(),
        positivity_margin_history: Vec::new(),
        monitors: Vec::new(),
        iterations: 0,
        path_steps: 0,
        wall_time: 0.0,
    }
}

/// Continuity method with default inputs.
pub fn solve_continuity(geom: &Geometry, f: &ScalarField, opts: &SolveOptions) -> Result<SolveReport> {
    solve_continuity_with(geom, f, opts, &SolveInputs::default())
}

enum NewtonFailure {
    Fatal(Error),
    Retry(Error),
}

/// Newton on `log det g̃(φ) − tF − b = 0` from the current state.
fn newton(
    ctx: &Context,
    t: f64,
    phi: &mut Vec<f64>,
    b: &mut f64,
    report: &mut SolveReport,
) -> std::result::Result<(), NewtonFailure> {
    let opts = ctx.opts;
    let geom = ctx.geom;
    let gram = geom.gram();
    let n = phi.len();
    let target: Vec<f64> = ctx.f.values().iter().map(|v| t * v).collect();
    let eval = |phi: &[f64], b: f64| -> Result<(Vec<f64>, TiltedMetric)> {
        let (ld, tilted) = ma_log_density(geom, &ctx.field(phi.to_vec()))?;
        let r = ld.values().iter().zip(&target).map(|(l, f)| l - f - b).collect();
        Ok((r, tilted))
    };
    let sup = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut r, mut tilted) = eval(phi, *b).map_err(NewtonFailure::Fatal)?;
    let mut rn = sup(&r);
    let mut k = 0;
    while rn > opts.newton_tol {
        if k >= opts.newton_max_iter {
            return Err(NewtonFailure::Retry(Error::NoConvergence { iterations: k, residual: rn }));
        }
        k += 1;
        report.iterations += 1;
        let op = linearized_operator(geom, &tilted).map_err(NewtonFailure::Fatal)?;
        let bordered = Bordered { op: &op, constraint: &ctx.weight };
        let flat = ctx.flat_preconditioner(&tilted);
        let pre = BorderedFlat { flat: &flat, constraint: &ctx.weight };
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        rhs.push(-ctx.mean(phi));
        let eta = opts.krylov_tol.max((0.01 * rn).min(1e-3));
        let gm = GmresOptions { tol: eta, max_iter: opts.krylov_max_iter, restart: opts.krylov_restart };
        let mut x = vec![0.0; n + 1];
        let out = gmres(
            &bordered,
            if opts.precondition { Some(&pre as &dyn Preconditioner) } else { None },
            &rhs,
            &mut x,
            &gm,
        );
        if !out.converged && out.residual > 10.0 * eta {
            return Err(NewtonFailure::Retry(Error::LinearNoConvergence {
                iterations: out.iterations,
                residual: out.residual,
            }));
        }
        let mut lambda = 1.0;
        let mut last_err;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&x[..n]).map(|(p, d)| p + lambda * d).collect();
            let tb = *b + lambda * x[n];
            match eval(&trial, tb) {
                Ok((tr, tt)) => {
                    let margin = tt.min_eigenvalue() / gram;
                    let tn = sup(&tr);
                    if margin >= opts.positivity_floor && tn < rn {
                        *phi = trial;
                        *b = tb;
                        r = tr;
                        tilted = tt;
                        rn = tn;
                        report.residual_history.push((t, rn));
                        report.positivity_margin_history.push(margin);
                        break;
                    }
                    last_err = if margin < opts.positivity_floor {
                        Error::NotPositive { point: tt.argmin(), eigenvalue: tt.min_eigenvalue() }
                    } else {
                        Error::NoConvergence { iterations: k, residual: tn }
                    };
                }
                Err(e @ Error::NotPositive { .. }) => last_err = e,
                Err(e) => return Err(NewtonFailure::Fatal(e)),
            }
            lambda *= 0.5;
            if lambda < opts.damping_min {
                return Err(NewtonFailure::Retry(last_err));
            }
        }
    }
    let _ = r;
    Ok(())
}

/// Continuity path `t: 0 → 1` for `(ω + i∂∂̄φ_t)ⁿ = e^{tF + b_t} ωⁿ`.
///
/// Each accepted step doubles the next step; a failed Newton solve halves
/// it. Fails with `PathStalled` once the step would drop below
/// `t_step_min`, unless the failures were caused by lost positivity or a
/// non-converging linear solve, which are reported as such.
pub fn solve_continuity_with(
    geom: &Geometry,
    f: &ScalarField,
    opts: &SolveOptions,
    inputs: &SolveInputs,
) -> Result<SolveReport> {
    let started = Instant::now();
    let ctx = Context::new(geom, f, opts, inputs)?;
    let mut report = empty_report(*geom.grid(), SolvePath::Continuity);
    let mut phi = ctx.start(inputs)?;
    let (ld, tilted) = ma_log_density(geom, &ctx.field(phi.clone()))?;
    // b solving the t = 0 equation in mean for the starting potential
    let mut b = ctx.mean(ld.values());
    report.positivity_margin_history.push(ctx.margin(&tilted));
    let r0 = ld.values().iter().fold(0.0f64, |m, v| m.max((v - b).abs()));
    report.residual_history.push((0.0, r0));
    if opts.monitor_every > 0 {
        report.monitors.push(ctx.monitors(&phi, 0.0)?);
    }

    let mut t = 0.0;
    let mut step = opts.t_step_init;
    while t < 1.0 {
        let next = (t + step).min(1.0);
        let (saved_phi, saved_b) = (phi.clone(), b);
        let (saved_hist, saved_pos) = (report.residual_history.len(), report.positivity_margin_history.len());
        match newton(&ctx, next, &mut phi, &mut b, &mut report) {
            Ok(()) => {
                t = next;
                report.path_steps += 1;
                if opts.monitor_every > 0 {
                    report.monitors.push(ctx.monitors(&phi, t)?);
                }
                step = (2.0 * step).min(1.0);
            }
            Err(NewtonFailure::Fatal(e)) => return Err(e),
            Err(NewtonFailure::Retry(e)) => {
                phi = saved_phi;
                b = saved_b;
                report.residual_history.truncate(saved_hist);
                report.positivity_margin_history.truncate(saved_pos);
                step *= 0.5;
                if step < opts.t_step_min {
                    return Err(match e {
                        Error::NotPositive { .. } | Error::LinearNoConvergence { .. } => e,
                        _ => Error::PathStalled { t, step },
                    });
                }
            }
        }
    }
    ctx.finish(phi, b, report, started)
}

/// Parabolic flow with default inputs.
pub fn solve_flow(geom: &Geometry, f: &ScalarField, opts: &SolveOptions) -> Result<SolveReport> {
    solve_flow_with(geom, f, opts, &SolveInputs::default())
}

/// Damping of the Chebyshev stability polynomial. Strong damping bounds the
/// amplification of every mode with `dt·λ ≥ 2` by about 0.09 per step.
const CHEBYSHEV_DAMPING: f64 = 5.0;

fn chebyshev_at(s: usize, x: f64) -> (Vec<f64>, f64) {
    // T_j(x) for j = 0..=s and T_s'(x)
    let mut t = vec![0.0; s + 1];
    let mut d = vec![0.0; s + 1];
    t[0] = 1.0;
    t[1] = x;
    d[1] = 1.0;
    for j in 2..=s {
        t[j] = 2.0 * x * t[j - 1] - t[j - 2];
        d[j] = 2.0 * t[j - 1] + 2.0 * x * d[j - 1] - d[j - 2];
    }
    let ds = d[s];
    (t, ds)
}

fn chebyshev_params(s: usize) -> (Vec<f64>, f64, f64) {
    let w0 = 1.0 + CHEBYSHEV_DAMPING / (s * s) as f64;
    let (t, ds) = chebyshev_at(s, w0);
    let w1 = t[s] / ds;
    (t, w0, w1)
}

/// Real stability interval `[−β(s), 0]` of the `s`-stage scheme.
pub fn chebyshev_stability_bound(s: usize) -> f64 {
    let (_, w0, w1) = chebyshev_params(s);
    (w0 + 1.0) / w1
}

/// Smallest stage count whose stability interval covers `dt·ρ` (at least 2).
pub fn chebyshev_stages(dt_rho: f64) -> usize {
    let mut s = 2;
    while chebyshev_stability_bound(s) < dt_rho {
        s += 1;
    }
    s
}

/// One step of the damped first-order Runge–Kutta–Chebyshev scheme, whose
/// stability polynomial is `T_s(w₀ + w₁z)/T_s(w₀)`.
fn chebyshev_step(
    y0: &[f64],
    f0: &[f64],
    dt: f64,
    s: usize,
    rhs: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let (t, w0, w1) = chebyshev_params(s);
    let mut prev2 = y0.to_vec();
    let mut prev: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + w1 / w0 * dt * f).collect();
    for j in 2..=s {
        let fj = rhs(&prev)?;
        let mu = 2.0 * w0 * t[j - 1] / t[j];
        let nu = -t[j - 2] / t[j];
        let mt = 2.0 * w1 * t[j - 1] / t[j];
        let next: Vec<f64> = (0..y0.len()).map(|k| mu * prev[k] + nu * prev2[k] + mt * dt * fj[k]).collect();
        prev2 = std::mem::replace(&mut prev, next);
    }
    Ok(prev)
}

/// Parabolic flow `∂φ/∂t = log det g̃ − F − b(t)` with `b(t)` the weighted
/// mean of `log det g̃ − F`, which keeps the weighted mean of `φ` fixed.
///
/// A step that leaves the positivity cone (or drops below the floor) is
/// rejected and retried with half the step; the flow fails with
/// `NotPositive` when the step underflows.
pub fn solve_flow_with(geom: &Geometry, f: &ScalarField, opts: &SolveOptions, inputs: &SolveInputs) -> Result<SolveReport> {
    let started = Instant::now();
    let ctx = Context::new(geom, f, opts, inputs)?;
    let mut report = empty_report(*geom.grid(), SolvePath::Flow);
    let h = geom.grid().spacing();
    let dt0 = opts.flow_dt_factor * h * h;
    let mut dt = dt0;
    let gram = geom.gram();

    // right-hand side with its weighted mean removed, the mean, and g̃
    let eval = |phi: &[f64]| -> Result<(Vec<f64>, f64, TiltedMetric)> {
        let (ld, tilted) = ma_log_density(geom, &ctx.field(phi.to_vec()))?;
        let mut r: Vec<f64> = ld.values().iter().zip(f.values()).map(|(l, v)| l - v).collect();
        let m = ctx.mean(&r);
        r.iter_mut().for_each(|v| *v -= m);
        Ok((r, m, tilted))
    };

    let mut phi = ctx.start(inputs)?;
    let (mut r, mut b, mut tilted) = eval(&phi)?;
    let mut time = 0.0;
    report.positivity_margin_history.push(ctx.margin(&tilted));
    if opts.monitor_every > 0 {
        report.monitors.push(ctx.monitors(&phi, 0.0)?);
    }
    loop {
        let rate = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        report.residual_history.push((time, rate));
        if rate < opts.flow_stop_tol {
            break;
        }
        if report.path_steps >= opts.flow_max_steps {
            return Err(Error::FlowNoConvergence { steps: report.path_steps, rate });
        }
        let rho = linearized_operator(geom, &tilted)?.spectral_bound();
        let accepted = loop {
            let s = chebyshev_stages(1.05 * dt * rho);
            let mut stage = |y: &[f64]| eval(y).map(|(v, _, _)| v);
            let attempt = chebyshev_step(&phi, &r, dt, s, &mut stage).and_then(|y| {
                let (ry, my, ty) = eval(&y)?;
                if ty.min_eigenvalue() / gram < opts.positivity_floor {
                    return Err(Error::NotPositive { point: ty.argmin(), eigenvalue: ty.min_eigenvalue() });
                }
                Ok((y, ry, my, ty))
            });
            match attempt {
                Ok(v) => break v,
                Err(e @ Error::NotPositive { .. }) => {
                    dt *= 0.5;
                    if dt < 1e-6 * dt0 {
                        return Err(e);
                    }
                }
                Err(e) => return Err(e),
            }
        };
        time += dt;
        (phi, r, b, tilted) = accepted;
        report.path_steps += 1;
        report.iterations += 1;
        report.positivity_margin_history.push(ctx.margin(&tilted));
        if opts.monitor_every > 0 && report.path_steps % opts.monitor_every == 0 {
            report.monitors.push(ctx.monitors(&phi, time)?);
        }
    }
    if opts.monitor_every > 0 && report.path_steps % opts.monitor_every != 0 {
        report.monitors.push(ctx.monitors(&phi, time)?);
    }
    ctx.finish(phi, b, report, started)
}
