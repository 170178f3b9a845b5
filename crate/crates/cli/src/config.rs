//! Run configuration: a TOML (or JSON) file with tables `geometry`, `data`,
//! `solver` and `outputs`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use acmax::dump::read_field;
use acmax::geometries::GeometrySpec;
use acmax::geometry::Geometry;
use acmax::solver::SolveOptions;
use acmax::trig::TrigSeries;
use acmax::ScalarField;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// The right-hand side `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    /// A struct variant so that stray keys are rejected.
    Zero {},
    Constant {
        value: f64,
    },
    /// `F = Σ a cos(k·x + phase)`.
    Trig {
        terms: TrigSeries,
    },
    /// A field dump (`.csv` or `.bin`) on the configured grid; relative paths
    /// are resolved against the config file's directory.
    File {
        path: PathBuf,
    },
    /// `F` manufactured from the exact solution `φ*` given as a trig series.
    Manufactured {
        phi: TrigSeries,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Binary,
}

fn default_formats() -> BTreeSet<OutputFormat> {
    [OutputFormat::Json, OutputFormat::Csv].into_iter().collect()
}

fn default_directory() -> PathBuf {
    PathBuf::from("acmax-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: BTreeSet<OutputFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub data: DataSpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Seed of randomized suites; at most `i64::MAX` so that it fits a TOML integer.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parses TOML, or JSON when `text` starts with `{`.
    pub fn parse(text: &str) -> CliResult<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        if let DataSpec::File { path: data } = &mut config.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(config)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> CliResult<()> {
        self.solver.validate()?;
        if self.seed > i64::MAX as u64 {
            return Err(CliError::ConfigParse(format!("seed must be at most {}, got {}", i64::MAX, self.seed)));
        }
        let dim = 2 * self.geometry.half_dim;
        match &self.data {
            DataSpec::Constant { value } if !value.is_finite() => {
                Err(CliError::ConfigParse(format!("data.value must be finite, got {value}")))
            }
            DataSpec::Trig { terms } => Ok(terms.validate(dim)?),
            DataSpec::Manufactured { phi } => Ok(phi.validate(dim)?),
            _ => Ok(()),
        }
    }

    /// A copy with `points_per_axis` replaced.
    pub fn at_resolution(&self, points_per_axis: usize) -> Self {
        let mut c = self.clone();
        c.geometry.points_per_axis = points_per_axis;
        c
    }
}

/// `F` on the grid of `geom`. Manufactured data are handled by the caller.
pub fn sample_data(data: &DataSpec, geom: &Geometry) -> CliResult<ScalarField> {
    let grid = *geom.grid();
    Ok(match data {
        DataSpec::Zero {} => ScalarField::zeros(grid),
        DataSpec::Constant { value } => ScalarField::constant(grid, *value),
        DataSpec::Trig { terms } => terms.sample(grid)?,
        DataSpec::File { path } => read_field(path, grid)?,
        DataSpec::Manufactured { .. } => {
            return Err(CliError::ConfigParse("manufactured data has no stand-alone sample".into()))
        }
    })
}
