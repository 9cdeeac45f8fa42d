//! Experiment specifications: TOML files, flag overrides and geometry lookup.

use std::path::{Path, PathBuf};

use ricci_boundary::complementarity::RowVariant;
use ricci_boundary::flow::Stepper;
use ricci_boundary::presets::{self, GeometrySpec};
use ricci_boundary::spectral::EigenMethod;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Colon-separated directories searched for `<name>.toml` geometry specs.
pub const PRESETS_ENV: &str = "RICCI_BOUNDARY_PRESETS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Curvature,
    Boundary,
    Lambda,
    VariationCheck,
    Complementarity,
    Flow,
    EinsteinTest,
    RescalingCheck,
    CompatCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Curvature => "curvature",
            CommandKind::Boundary => "boundary",
            CommandKind::Lambda => "lambda",
            CommandKind::VariationCheck => "variation-check",
            CommandKind::Complementarity => "complementarity",
            CommandKind::Flow => "flow",
            CommandKind::EinsteinTest => "einstein-test",
            CommandKind::RescalingCheck => "rescaling-check",
            CommandKind::CompatCheck => "compat-check",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GeometrySection {
    pub preset: Option<String>,
    /// A TOML file holding a full geometry spec.
    pub file: Option<PathBuf>,
    pub nodes: Option<usize>,
    pub angular: Option<usize>,
    pub dim: Option<usize>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct NumericsSection {
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub stepper: Option<Stepper>,
    pub stride: Option<usize>,
    pub boundary_tolerance: Option<f64>,
    pub lambda_stride: Option<usize>,
    pub method: Option<EigenMethod>,
    /// Pass/fail tolerance of the command's main check.
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub fd_step: Option<f64>,
    pub n: Option<usize>,
    pub metric: Option<String>,
    pub samples: Option<usize>,
    pub variant: Option<RowVariant>,
    pub threshold: Option<f64>,
    pub order: Option<usize>,
    pub scales: Option<Vec<f64>>,
    pub refine: Option<bool>,
    pub pullback: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub plot_data: Option<bool>,
}

/// One experiment. Every field is optional so that a file and the command
/// line can each supply part of it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentSpec {
    pub command: Option<CommandKind>,
    /// Prefix of the artifact file names.
    pub name: Option<String>,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// `[[experiment]]` tables of a batch file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchFile {
    #[serde(default)]
    pub experiment: Vec<ExperimentSpec>,
}

macro_rules! overlay {
    ($base:expr, $over:expr; $($field:ident),*) => {
        $( if $over.$field.is_some() { $base.$field = $over.$field; } )*
    };
}

impl ExperimentSpec {
    /// Fields set in `over` replace those in `self`.
    pub fn merged(mut self, over: ExperimentSpec) -> Self {
        overlay!(self, over; command, name);
        overlay!(self.geometry, over.geometry; preset, file, nodes, angular, dim, amplitude);
        overlay!(self.numerics, over.numerics;
            t_end, dt, stepper, stride, boundary_tolerance, lambda_stride, method, tolerance, seed,
            count, fd_step, n, metric, samples, variant, threshold, order, scales, refine, pullback);
        overlay!(self.output, over.output; dir, plot_data);
        self
    }

    pub fn command(&self) -> Result<CommandKind> {
        self.command.ok_or_else(|| CliError::Config("no command given".into()))
    }

    /// Artifact prefix: a plain file name, defaulting to the command name.
    pub fn name(&self) -> Result<String> {
        let name = match &self.name {
            Some(name) => name.clone(),
            None => self.command()?.name().to_string(),
        };
        let plain = !name.is_empty() && name != "." && name != ".." && !name.contains(['/', '\\']);
        if !plain {
            return Err(CliError::Config(format!("experiment name `{name}` is not a plain file name")));
        }
        Ok(name)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// The geometry with size overrides applied.
    pub fn geometry_spec(&self) -> Result<GeometrySpec> {
        let g = &self.geometry;
        let mut spec = match (&g.preset, &g.file) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either a preset or a geometry file, not both".into()))
            }
            (Some(name), None) => lookup_preset(name)?,
            (None, Some(path)) => read_geometry_file(path)?,
            (None, None) => return Err(CliError::Config("no geometry: pass --preset or --geometry-file".into())),
        };
        if let Some(nodes) = g.nodes {
            spec.nodes = nodes;
        }
        if let Some(angular) = g.angular {
            spec.angular = Some(angular);
        }
        if let Some(dim) = g.dim {
            spec.dim = dim;
        }
        if let Some(amplitude) = g.amplitude {
            spec.amplitude = Some(amplitude);
        }
        Ok(spec)
    }
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|source| CliError::Toml {
        path: path.to_path_buf(),
        source,
    })
}

fn read_geometry_file(path: &Path) -> Result<GeometrySpec> {
    read_toml(path)
}

/// Embedded presets first, then `<name>.toml` in the directories listed in
/// [`PRESETS_ENV`], in order.
pub fn lookup_preset(name: &str) -> Result<GeometrySpec> {
    if let Ok(spec) = presets::preset(name) {
        return Ok(spec);
    }
    if let Some(dirs) = std::env::var_os(PRESETS_ENV) {
        for dir in std::env::split_paths(&dirs) {
            let path = dir.join(format!("{name}.toml"));
            if path.is_file() {
                return read_geometry_file(&path);
            }
        }
    }
    Err(CliError::Config(format!(
        "unknown preset `{name}` (embedded: {}; extra directories come from {PRESETS_ENV})",
        presets::PRESET_NAMES.join(", ")
    )))
}
