//! Acceptance suite: runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line each. Exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p acmax --test acceptance -- 1 9`.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use acmax::calculus::{ddbar_route_gap, nijenhuis_defect};
use acmax::gauduchon::{
    gauduchon_defect, gauduchon_factor, project_compatible, solve_canonical_poisson, GauduchonFactor,
};
use acmax::geometries::{flat_torus, twisted_torus, GeometrySpec};
use acmax::geometry::Geometry;
use acmax::operators::canonical_laplacian;
use acmax::solver::{
    manufacture, solve_continuity_with, solve_flow_with, SolveInputs, SolveOptions, SolvePath,
    SolveReport,
};
use acmax::trig::{TrigSeries, TrigTerm};
use acmax::verify::{identity_suite, taming_check, SuiteSizes};
use acmax::{integrate, Result, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWIST: f64 = 0.3;

// criterion 1
const TRIVIAL_TOL: f64 = 1e-10;
const TRIVIAL_RUNTIME_S: f64 = 10.0;
// criterion 2
const MANUFACTURED_RATIO: (f64, f64) = (8.0, 24.0);
const MANUFACTURED_RUNTIME_S: f64 = 300.0;
// criteria 3 and 4
const RANDOM_CASES: usize = 5;
const RANDOM_AMPLITUDE: f64 = 0.2;
const CROSS_TOL: f64 = 1e-5;
const B_BOUND_SLACK: f64 = 1e-6;
// criterion 5
const UNIQUENESS_TOL: f64 = 1e-8;
// criterion 6
const POSITIVITY_FLOOR: f64 = 0.05;
// criterion 7
const FLAT_FACTOR_TOL: f64 = 1e-10;
const DEFECT_DECREASE: f64 = 12.0;
const FREDHOLM_CASES: usize = 10;
/// `C` in `|∫Δ^Cφ·e^{(n−1)u}ωⁿ| ≤ C·h⁴·‖Δ^Cφ‖_∞·vol`.
const FREDHOLM_C: f64 = 1.0;
// criterion 8
const POISSON_TOL: f64 = 1e-9;
// criterion 9
const SUITE_SEED: u64 = 9;
const SUITE_RUNTIME_S: f64 = 30.0;
// criterion 10
/// `C` in `flat defect ≤ C·h⁴`.
const FLAT_NIJENHUIS_C: f64 = 1e-9;
/// Frozen limit of the twisted-torus defect for `f = sin(x⁴)`.
const TWISTED_NIJENHUIS: f64 = 0.15;
const TWISTED_NIJENHUIS_REL: f64 = 0.05;
// criterion 11
/// `C` in `sup|dω̃| ≤ C·h⁴`.
const CLOSEDNESS_C: f64 = 1e-9;
const TAMING_TOL: f64 = 1e-8;
// criterion 12
const ROUTE_FIELDS: usize = 10;
/// `C` in `route gap ≤ C·h⁴` for the seeded fields of unit amplitude; frozen
/// from the measured 2.99 at N = 32.
const ROUTE_C: f64 = 4.0;
const ROUTE_MIN_ORDER: f64 = 3.5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn quiet() -> SolveOptions {
    SolveOptions { monitor_every: 0, ..SolveOptions::default() }
}

fn flow_opts() -> SolveOptions {
    SolveOptions { path: SolvePath::Flow, ..quiet() }
}

struct RandomCase {
    f: ScalarField,
    continuity: SolveReport,
    flow: SolveReport,
}

/// State shared between criteria, built on first use.
#[derive(Default)]
struct Shared {
    twisted32: Option<(Geometry, GauduchonFactor)>,
    random: Option<Vec<RandomCase>>,
    /// Positivity margin histories of every solve run so far.
    margins: Vec<(String, f64)>,
}

impl Shared {
    fn twisted32(&mut self) -> Result<&(Geometry, GauduchonFactor)> {
        if self.twisted32.is_none() {
            let g = twisted_torus(32, TWIST)?;
            let u = gauduchon_factor(&g)?;
            self.twisted32 = Some((g, u));
        }
        Ok(self.twisted32.as_ref().unwrap())
    }

    fn record(&mut self, label: &str, report: &SolveReport) {
        self.margins.push((label.to_string(), report.min_positivity_margin()));
    }

    fn random_cases(&mut self) -> Result<&[RandomCase]> {
        if self.random.is_none() {
            let (g, u) = self.twisted32()?.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let inputs = SolveInputs { gauduchon: Some(&u), ..Default::default() };
            let mut cases = Vec::new();
            for k in 0..RANDOM_CASES {
                let series = TrigSeries::random(4, 3, 2, RANDOM_AMPLITUDE, &mut rng);
                let f = series.sample(*g.grid())?;
                let continuity = solve_continuity_with(&g, &f, &quiet(), &inputs)?;
                let flow = solve_flow_with(&g, &f, &flow_opts(), &inputs)?;
                self.record(&format!("random case {k} continuity"), &continuity);
                self.record(&format!("random case {k} flow"), &flow);
                cases.push(RandomCase { f, continuity, flow });
            }
            self.random = Some(cases);
        }
        Ok(self.random.as_deref().unwrap())
    }
}

fn trivial_solution(shared: &mut Shared) -> Result<Outcome> {
    let flat = flat_torus(2, 32)?;
    let (twisted, _) = shared.twisted32()?.clone();
    let mut worst = 0.0f64;
    let mut elapsed = 0.0;
    for (name, g) in [("flat", &flat), ("twisted", &twisted)] {
        let zero = ScalarField::zeros(*g.grid());
        let start = Instant::now();
        let c = solve_continuity_with(g, &zero, &quiet(), &SolveInputs::default())?;
        let f = solve_flow_with(g, &zero, &flow_opts(), &SolveInputs::default())?;
        elapsed += start.elapsed().as_secs_f64();
        for r in [&c, &f] {
            worst = worst.max(r.phi.sup_norm()).max(r.b.abs());
            shared.record(&format!("trivial {name} {:?}", r.path), r);
        }
    }
    Ok(outcome(
        worst <= TRIVIAL_TOL && elapsed <= TRIVIAL_RUNTIME_S,
        format!("max(sup|φ|, |b|) = {worst:.2e} (tol {TRIVIAL_TOL:.0e}); solve time {elapsed:.1}s (limit {TRIVIAL_RUNTIME_S}s, N = 32 geometry construction excluded)"),
    ))
}

fn manufactured_solution(shared: &mut Shared) -> Result<Outcome> {
    let start = Instant::now();
    let series = TrigSeries::new(vec![
        TrigTerm::sin(vec![1, 0, 0, 0], 0.2),
        TrigTerm::cos(vec![0, 0, 1, 0], 0.2),
    ]);
    let mut errors = Vec::new();
    for n in [16, 32] {
        let (g, u) = if n == 32 {
            shared.twisted32()?.clone()
        } else {
            let g = twisted_torus(n, TWIST)?;
            let u = gauduchon_factor(&g)?;
            (g, u)
        };
        let m = manufacture(&g, &series, &u)?;
        let inputs = SolveInputs { gauduchon: Some(&u), ..Default::default() };
        let rep = solve_continuity_with(&g, &m.f, &quiet(), &inputs)?;
        shared.record(&format!("manufactured N={n}"), &rep);
        errors.push(sup_diff(&rep.phi, &m.phi));
    }
    let ratio = errors[0] / errors[1];
    let elapsed = start.elapsed().as_secs_f64();
    let (lo, hi) = MANUFACTURED_RATIO;
    Ok(outcome(
        (lo..=hi).contains(&ratio) && elapsed <= MANUFACTURED_RUNTIME_S,
        format!(
            "sup error N=16 {:.3e}, N=32 {:.3e}, ratio {ratio:.2} (want [{lo}, {hi}]); {elapsed:.0}s (limit {MANUFACTURED_RUNTIME_S}s)",
            errors[0], errors[1]
        ),
    ))
}

fn cross_validation(shared: &mut Shared) -> Result<Outcome> {
    let cases = shared.random_cases()?;
    let (mut dphi, mut db) = (0.0f64, 0.0f64);
    for c in cases {
        dphi = dphi.max(sup_diff(&c.flow.phi, &c.continuity.phi));
        db = db.max((c.flow.b - c.continuity.b).abs());
    }
    Ok(outcome(
        dphi <= CROSS_TOL && db <= CROSS_TOL,
        format!("{RANDOM_CASES} cases at N = 32: max ‖φ_flow − φ_cont‖ = {dphi:.2e}, max |Δb| = {db:.2e} (tol {CROSS_TOL:.0e})"),
    ))
}

fn b_bound(shared: &mut Shared) -> Result<Outcome> {
    let cases = shared.random_cases()?;
    let mut worst = f64::NEG_INFINITY;
    for c in cases {
        let sup_f = c.f.sup_norm();
        for b in [c.continuity.b, c.flow.b] {
            worst = worst.max(b.abs() - sup_f);
        }
    }
    Ok(outcome(
        worst <= B_BOUND_SLACK,
        format!("max(|b| − sup|F|) = {worst:.3e} (allowed {B_BOUND_SLACK:.0e})"),
    ))
}

fn uniqueness(shared: &mut Shared) -> Result<Outcome> {
    let (g, u) = shared.twisted32()?.clone();
    let (f, cold) = {
        let case = &shared.random_cases()?[0];
        (case.f.clone(), case.continuity.phi.clone())
    };
    let warm = ScalarField::from_fn(*g.grid(), |x| 0.1 * (x[0] + x[3]).cos() + 0.05 * x[2].sin());
    let inputs = SolveInputs { gauduchon: Some(&u), warm_start: Some(&warm) };
    let rep = solve_continuity_with(&g, &f, &quiet(), &inputs)?;
    shared.record("warm start", &rep);
    let diff = sup_diff(&rep.phi, &cold);
    Ok(outcome(
        diff <= UNIQUENESS_TOL,
        format!("starts φ = 0 and a trigonometric perturbation: ‖Δφ‖ = {diff:.2e} (tol {UNIQUENESS_TOL:.0e})"),
    ))
}

fn positivity(shared: &mut Shared) -> Result<Outcome> {
    shared.random_cases()?;
    let (label, worst) = shared
        .margins
        .iter()
        .cloned()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or(("none".into(), f64::INFINITY));
    Ok(outcome(
        worst >= POSITIVITY_FLOOR,
        format!(
            "min λ(g̃) over {} runs = {worst:.4} at {label} (floor {POSITIVITY_FLOOR})",
            shared.margins.len()
        ),
    ))
}

fn fredholm_worst(g: &Geometry, u: &GauduchonFactor, rng: &mut ChaCha8Rng) -> Result<f64> {
    let w = u.weight(g)?;
    let vol = integrate(&ScalarField::constant(*g.grid(), 1.0), &w)?;
    let h = g.grid().spacing();
    let mut worst = 0.0f64;
    for _ in 0..FREDHOLM_CASES {
        let phi = TrigSeries::random(g.dim(), 4, 3, 1.0, rng).sample(*g.grid())?;
        let lap = canonical_laplacian(g, &phi)?;
        let ratio = integrate(&lap, &w)?.abs() / (lap.sup_norm() * vol * h.powi(4));
        worst = worst.max(ratio);
    }
    Ok(worst)
}

fn gauduchon_suite(_: &mut Shared) -> Result<Outcome> {
    let flat = gauduchon_factor(&flat_torus(2, 16)?)?;
    let flat_u = flat.u.sup_norm();

    let mut defects = Vec::new();
    for n in [16, 32] {
        let u = gauduchon_factor(&twisted_torus(n, TWIST)?)?;
        defects.push(u.gauduchon_defect.unwrap_or(f64::NAN));
    }
    let decrease = defects[0] / defects[1];

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let twisted = twisted_torus(16, TWIST)?;
    let tw = gauduchon_factor(&twisted)?;
    let conformal = GeometrySpec { conformal_amplitude: 0.2, ..GeometrySpec::twisted(16, TWIST) }.build()?;
    let cf = gauduchon_factor(&conformal)?;
    let warped = GeometrySpec { warp_amplitude: 0.2, ..GeometrySpec::twisted(16, TWIST) }.build()?;
    let wf = gauduchon_factor(&warped)?;
    let fredholm = fredholm_worst(&twisted, &tw, &mut rng)?
        .max(fredholm_worst(&conformal, &cf, &mut rng)?)
        .max(fredholm_worst(&warped, &wf, &mut rng)?);

    let parts = [flat_u <= FLAT_FACTOR_TOL, decrease >= DEFECT_DECREASE, fredholm <= FREDHOLM_C];
    Ok(outcome(
        parts.iter().all(|p| *p),
        format!(
            "flat sup|u| = {flat_u:.1e} [{}]; twisted defect N=16 {:.2e}, N=32 {:.2e}, decrease {decrease:.2} (want ≥ {DEFECT_DECREASE}) [{}]; Fredholm |∫Δ^Cφ·w|/(h⁴‖Δ^Cφ‖vol) ≤ {fredholm:.2e} over {} fields (C = {FREDHOLM_C}) [{}]",
            tag(parts[0]),
            defects[0],
            defects[1],
            tag(parts[1]),
            3 * FREDHOLM_CASES,
            tag(parts[2]),
        ),
    ))
}

/// The defect on the warped variant, where `ω` itself is not Gauduchon and the
/// factor is not constant: before and after weighting by `e^u`.
fn warped_defect_supplement() -> Result<String> {
    let mut parts = Vec::new();
    for n in [16, 32] {
        let g = GeometrySpec { warp_amplitude: 0.2, ..GeometrySpec::twisted(n, TWIST) }.build()?;
        let factor = gauduchon_factor(&g)?;
        let plain = gauduchon_defect(&g, &ScalarField::zeros(g.grid().clone()))?;
        parts.push(format!(
            "N={n} sup|u| {:.3}, defect of ω {:.3e}, of e^u ω {:.3e}",
            factor.u.sup_norm(),
            plain,
            factor.gauduchon_defect.unwrap_or(f64::NAN)
        ));
    }
    Ok(format!("warped variant (amplitude 0.2): {}", parts.join("; ")))
}

fn poisson_dichotomy(_: &mut Shared) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut incompatible = true;
    let geoms = [
        twisted_torus(16, TWIST)?,
        GeometrySpec { conformal_amplitude: 0.2, ..GeometrySpec::twisted(16, TWIST) }.build()?,
    ];
    for g in &geoms {
        let u = gauduchon_factor(g)?;
        let raw = TrigSeries::random(4, 4, 2, 1.0, &mut rng).sample(*g.grid())?;
        let h = project_compatible(g, &raw, &u)?;
        let f = solve_canonical_poisson(g, &h, &u)?;
        worst = worst.max(sup_diff(&canonical_laplacian(g, &f)?, &h));
        let one = ScalarField::constant(*g.grid(), 1.0);
        incompatible &= matches!(solve_canonical_poisson(g, &one, &u), Err(e) if e.name() == "Incompatible");
    }
    Ok(outcome(
        worst <= POISSON_TOL && incompatible,
        format!(
            "twisted and conformal N=16: round-trip ‖Δ^C f − h‖ = {worst:.2e} (tol {POISSON_TOL:.0e}); h ≡ 1 → Incompatible: {incompatible}"
        ),
    ))
}

fn identity_suite_criterion(_: &mut Shared) -> Result<Outcome> {
    let start = Instant::now();
    let suite = identity_suite(SUITE_SEED, &SuiteSizes::default())?;
    let elapsed = start.elapsed().as_secs_f64();
    let summary: Vec<String> =
        suite.checks.iter().map(|c| format!("{} {:.1e} [{}]", c.name, c.worst, tag(c.passed))).collect();
    Ok(outcome(
        suite.passed && elapsed <= SUITE_RUNTIME_S,
        format!("{}; {elapsed:.1}s (limit {SUITE_RUNTIME_S}s)", summary.join(", ")),
    ))
}

fn integrability_detector(_: &mut Shared) -> Result<Outcome> {
    let probe = |x: &[f64]| x[3].sin();
    let mut flat_ok = true;
    let mut twisted_ok = true;
    let mut flat_values = Vec::new();
    let mut twisted_values = Vec::new();
    for n in [16, 32] {
        let g = flat_torus(2, n)?;
        let h = g.grid().spacing();
        let d = nijenhuis_defect(&g, &ScalarField::from_fn(*g.grid(), probe))?;
        flat_ok &= d <= FLAT_NIJENHUIS_C * h.powi(4);
        flat_values.push(d);
        let g = twisted_torus(n, TWIST)?;
        let d = nijenhuis_defect(&g, &ScalarField::from_fn(*g.grid(), probe))?;
        twisted_ok &= (d - TWISTED_NIJENHUIS).abs() <= TWISTED_NIJENHUIS_REL * TWISTED_NIJENHUIS;
        twisted_values.push(d);
    }
    Ok(outcome(
        flat_ok && twisted_ok,
        format!(
            "f = sin(x⁴): flat N=16/32 {:.1e}/{:.1e} (≤ {FLAT_NIJENHUIS_C:.0e}·h⁴); twisted N=16/32 {:.5}/{:.5} (frozen {TWISTED_NIJENHUIS} ± {}%)",
            flat_values[0],
            flat_values[1],
            twisted_values[0],
            twisted_values[1],
            TWISTED_NIJENHUIS_REL * 100.0
        ),
    ))
}

fn taming(shared: &mut Shared) -> Result<Outcome> {
    let (g, _) = shared.twisted32()?.clone();
    let phi = shared.random_cases()?[0].continuity.phi.clone();
    let t = taming_check(&g, &phi)?;
    let h = g.grid().spacing();
    Ok(outcome(
        t.closedness <= CLOSEDNESS_C * h.powi(4) && t.min_slack >= -TAMING_TOL,
        format!(
            "N=32 solution of random case 0: sup|dω̃| = {:.1e} (≤ {CLOSEDNESS_C:.0e}·h⁴), min(ω̃² − (ω + i∂∂̄φ)²) = {:.2e} (≥ −{TAMING_TOL:.0e}), ddbar route gap {:.1e}",
            t.closedness, t.min_slack, t.route_gap
        ),
    ))
}

fn route_equivalence(_: &mut Shared) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let series: Vec<TrigSeries> = (0..ROUTE_FIELDS).map(|_| TrigSeries::random(4, 3, 2, 1.0, &mut rng)).collect();
    let mut worst_c = 0.0f64;
    let mut worst_order = f64::INFINITY;
    for twisted in [false, true] {
        let mut gaps = vec![Vec::new(); 2];
        for (k, n) in [16, 32].into_iter().enumerate() {
            let g = if twisted { twisted_torus(n, TWIST)? } else { flat_torus(2, n)? };
            let h = g.grid().spacing();
            for s in &series {
                let gap = ddbar_route_gap(&g, &s.sample(*g.grid())?)?;
                if k == 1 {
                    worst_c = worst_c.max(gap / h.powi(4));
                }
                gaps[k].push(gap);
            }
        }
        for (a, b) in gaps[0].iter().zip(&gaps[1]) {
            worst_order = worst_order.min((a / b).log2());
        }
    }
    Ok(outcome(
        worst_c <= ROUTE_C && worst_order >= ROUTE_MIN_ORDER,
        format!(
            "{ROUTE_FIELDS} fields each on flat and twisted: max gap/h⁴ at N=32 = {worst_c:.3} (C = {ROUTE_C}), min observed order N=16→32 {worst_order:.2} (≥ {ROUTE_MIN_ORDER})"
        ),
    ))
}

fn tag(passed: bool) -> &'static str {
    if passed {
        "ok"
    } else {
        "fail"
    }
}

type Criterion = fn(&mut Shared) -> Result<Outcome>;

fn main() {
    let criteria: [(u32, &str, Criterion); 12] = [
        (1, "trivial solution", trivial_solution),
        (2, "manufactured solution", manufactured_solution),
        (3, "solver cross-validation", cross_validation),
        (4, "|b| ≤ sup|F| bound", b_bound),
        (5, "uniqueness from two warm starts", uniqueness),
        (6, "positivity invariant", positivity),
        (7, "Gauduchon suite", gauduchon_suite),
        (8, "Poisson dichotomy", poisson_dichotomy),
        (9, "pointwise identity suite", identity_suite_criterion),
        (10, "integrability detector", integrability_detector),
        (11, "taming inequality", taming),
        (12, "route equivalence", route_equivalence),
    ];
    let selected: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run(&mut shared);
        let secs = start.elapsed().as_secs_f64();
        let line = match result {
            Ok(o) => {
                if !o.passed {
                    failed.push(id);
                }
                format!("criterion {id:>2} {} {name} ({secs:.1}s): {}", if o.passed { "PASS" } else { "FAIL" }, o.detail)
            }
            Err(e) => {
                failed.push(id);
                format!("criterion {id:>2} FAIL {name} ({secs:.1}s): {}::{}: {e}", e.module(), e.name())
            }
        };
        let _ = writeln!(err, "{line}");
        if id == 7 {
            let line = match warped_defect_supplement() {
                Ok(s) => format!("  supplementary: {s}"),
                Err(e) => format!("  supplementary: error {}::{}: {e}", e.module(), e.name()),
            };
            let _ = writeln!(err, "{line}");
        }
    }
    if failed.is_empty() {
        let _ = writeln!(err, "acceptance: all selected criteria passed");
    } else {
        let _ = writeln!(err, "acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
