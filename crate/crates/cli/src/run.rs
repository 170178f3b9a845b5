//! Subcommands and the artifacts they write.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use acmax::dump::write_field;
use acmax::gauduchon::{gauduchon_factor_with, GauduchonFactor, GauduchonOptions};
use acmax::geometry::Geometry;
use acmax::solver::{manufacture, solve_continuity_with, solve_flow_with, SolveInputs, SolvePath, SolveReport};
use acmax::verify::{identity_suite, IdentitySuite, SuiteSizes};
use acmax::ScalarField;
use serde::Serialize;

use crate::config::{sample_data, DataSpec, OutputFormat, RunConfig};
use crate::error::{CliError, CliResult, RunContext};

/// Version of the layout of `report.json` and `convergence.json`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Solve with the configured path (continuity by default).
    Solve,
    /// Solve with the parabolic flow regardless of the configured path.
    Flow,
    /// Compute the Gauduchon factor and its defects.
    Gauduchon,
    /// Run the randomized pointwise identity suite.
    Verify,
    /// Solve at N and 2N and report observed orders.
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Flow => "flow",
            Command::Gauduchon => "gauduchon",
            Command::Verify => "verify",
            Command::Convergence => "convergence",
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid_n: Option<usize>,
    pub seed: Option<u64>,
    pub stencil_order: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(out) = &self.out {
            config.outputs.directory = out.clone();
        }
        if let Some(n) = self.grid_n {
            config.geometry.points_per_axis = n;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(order) = self.stencil_order {
            config.geometry.stencil_order = order;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryInfo {
    pub name: String,
    pub half_dim: usize,
    pub points_per_axis: usize,
    pub spacing: f64,
    pub stencil_order: usize,
    pub volume: f64,
}

impl GeometryInfo {
    fn of(geom: &Geometry) -> Self {
        let grid = geom.grid();
        Self {
            name: geom.name(),
            half_dim: grid.half_dim(),
            points_per_axis: grid.points_per_axis(),
            spacing: grid.spacing(),
            stencil_order: grid.order().as_usize(),
            volume: geom.volume(),
        }
    }
}

/// Errors against the manufactured solution, both sides shifted to `sup φ = 0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ManufacturedErrors {
    pub phi_error: f64,
    pub b_exact: f64,
    pub b_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub solve: SolveReport,
    pub sup_data: f64,
    pub manufactured: Option<ManufacturedErrors>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Level {
    pub points_per_axis: usize,
    pub spacing: f64,
    pub b: f64,
    pub final_residual: f64,
    pub manufactured: Option<ManufacturedErrors>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceResult {
    pub coarse: Level,
    pub fine: Level,
    /// `log₂` of the error ratio; manufactured data only.
    pub observed_order_phi: Option<f64>,
    pub observed_order_b: Option<f64>,
    /// Sup-distance between the coarse and the restricted fine potential.
    pub phi_difference: f64,
    pub b_difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub geometry: Option<GeometryInfo>,
    pub result: T,
}

/// What a run wrote.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    /// `false` when a verification check failed.
    pub passed: bool,
}

struct Writer<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    outcome: RunOutcome,
}

impl<'a> Writer<'a> {
    fn new(config: &'a RunConfig) -> CliResult<Self> {
        let dir = config.outputs.directory.as_path();
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        Ok(Self { config, dir, outcome: RunOutcome { artifacts: Vec::new(), passed: true } })
    }

    fn wants(&self, format: OutputFormat) -> bool {
        self.config.outputs.formats.contains(&format)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        if !self.wants(OutputFormat::Json) {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        self.outcome.artifacts.push(path);
        Ok(())
    }

    fn field(&mut self, stem: &str, field: &ScalarField) -> CliResult<()> {
        for (format, ext) in [(OutputFormat::Csv, "csv"), (OutputFormat::Binary, "bin")] {
            if self.wants(format) {
                let path = self.dir.join(format!("{stem}.{ext}"));
                write_field(&path, field).map_err(|e| CliError::Output(e.to_string()))?;
                self.outcome.artifacts.push(path);
            }
        }
        Ok(())
    }
}

fn quiet_gauduchon() -> GauduchonOptions {
    GauduchonOptions { compute_defect: false, ..GauduchonOptions::default() }
}

fn sup_normalized(f: &ScalarField) -> ScalarField {
    f.shifted(-f.max())
}

/// One solve of the configured problem on `geom`.
fn solve_once(config: &RunConfig, geom: &Geometry, path: SolvePath) -> CliResult<SolveResult> {
    let factor: GauduchonFactor = gauduchon_factor_with(geom, &quiet_gauduchon(), None).running()?;
    let (f, exact) = match &config.data {
        DataSpec::Manufactured { phi } => {
            let m = manufacture(geom, phi, &factor).running()?;
            (m.f, Some((m.phi, m.b)))
        }
        other => (sample_data(other, geom)?, None),
    };
    let opts = acmax::solver::SolveOptions { path, ..config.solver.clone() };
    let inputs = SolveInputs { warm_start: None, gauduchon: Some(&factor) };
    let solve = match path {
        SolvePath::Continuity => solve_continuity_with(geom, &f, &opts, &inputs),
        SolvePath::Flow => solve_flow_with(geom, &f, &opts, &inputs),
    }
    .running()?;
    let manufactured = match exact {
        Some((phi, b)) => Some(ManufacturedErrors {
            phi_error: sup_normalized(&solve.phi).lin_comb(1.0, &phi, -1.0).running()?.sup_norm(),
            b_exact: b,
            b_error: (solve.b - b).abs(),
        }),
        None => None,
    };
    Ok(SolveResult { solve, sup_data: f.sup_norm(), manufactured })
}

/// Sup-distance between `coarse` and `fine` sampled at the coarse points.
fn restricted_difference(coarse: &ScalarField, fine: &ScalarField) -> f64 {
    let cg = coarse.grid();
    let fg = fine.grid();
    let mut idx = vec![0usize; cg.dim()];
    let mut fine_idx = vec![0isize; cg.dim()];
    let mut worst = 0.0f64;
    for (p, &c) in coarse.values().iter().enumerate() {
        cg.multi_index(p, &mut idx);
        for (f, &i) in fine_idx.iter_mut().zip(&idx) {
            *f = 2 * i as isize;
        }
        worst = worst.max((c - fine.values()[fg.index_of(&fine_idx)]).abs());
    }
    worst
}

fn level(geom: &Geometry, r: &SolveResult) -> Level {
    Level {
        points_per_axis: geom.grid().points_per_axis(),
        spacing: geom.grid().spacing(),
        b: r.solve.b,
        final_residual: r.solve.final_residual,
        manufactured: r.manufactured,
    }
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Runs `command` and writes its artifacts into the output directory.
///
/// Configuration problems are reported before anything is solved; errors
/// raised afterwards are tagged as run failures.
pub fn run(config: &RunConfig, command: Command) -> CliResult<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    if command == Command::Verify {
        let suite: IdentitySuite = identity_suite(config.seed, &SuiteSizes::default()).running()?;
        let mut w = Writer::new(config)?;
        w.json("report.json", &Report { schema_version: SCHEMA_VERSION, command: command.name(), config, geometry: None, result: &suite })?;
        w.json("timing.json", &serde_json::json!({ "wall_time": started.elapsed().as_secs_f64() }))?;
        w.outcome.passed = suite.passed;
        return Ok(w.outcome);
    }
    if command == Command::Convergence && matches!(config.data, DataSpec::File { .. }) {
        return Err(CliError::ConfigParse("convergence needs resolution-independent data, not a file".into()));
    }
    let geom = config.geometry.build()?;
    if let DataSpec::File { .. } = config.data {
        sample_data(&config.data, &geom)?;
    }
    let mut w = Writer::new(config)?;
    let info = Some(GeometryInfo::of(&geom));
    match command {
        Command::Solve | Command::Flow => {
            let path = if command == Command::Flow { SolvePath::Flow } else { config.solver.path };
            let result = solve_once(config, &geom, path)?;
            w.json("report.json", &Report { schema_version: SCHEMA_VERSION, command: command.name(), config, geometry: info, result: &result })?;
            w.field("phi", &result.solve.phi)?;
        }
        Command::Gauduchon => {
            let factor = gauduchon_factor_with(&geom, &GauduchonOptions::default(), None).running()?;
            w.json("report.json", &Report { schema_version: SCHEMA_VERSION, command: command.name(), config, geometry: info, result: &factor })?;
            w.field("u", &factor.u)?;
        }
        Command::Convergence => {
            let fine_config = config.at_resolution(2 * config.geometry.points_per_axis);
            let fine_geom = fine_config.geometry.build()?;
            let path = config.solver.path;
            let (coarse, fine) = rayon::join(|| solve_once(config, &geom, path), || solve_once(&fine_config, &fine_geom, path));
            let (coarse, fine) = (coarse?, fine?);
            let orders = match (coarse.manufactured, fine.manufactured) {
                (Some(c), Some(f)) => (Some(order(c.phi_error, f.phi_error)), Some(order(c.b_error, f.b_error))),
                _ => (None, None),
            };
            let result = ConvergenceResult {
                coarse: level(&geom, &coarse),
                fine: level(&fine_geom, &fine),
                observed_order_phi: orders.0,
                observed_order_b: orders.1,
                phi_difference: restricted_difference(&sup_normalized(&coarse.solve.phi), &sup_normalized(&fine.solve.phi)),
                b_difference: (coarse.solve.b - fine.solve.b).abs(),
            };
            w.json("convergence.json", &Report { schema_version: SCHEMA_VERSION, command: command.name(), config, geometry: info, result: &result })?;
            w.field("phi_coarse", &coarse.solve.phi)?;
            w.field("phi_fine", &fine.solve.phi)?;
        }
        Command::Verify => unreachable!("handled above"),
    }
    w.json("timing.json", &serde_json::json!({ "wall_time": started.elapsed().as_secs_f64() }))?;
    Ok(w.outcome)
}
