//! `ricci-boundary`: batch front-end for the geometry, spectral and flow checks.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use ricci_boundary::complementarity::RowVariant;
use ricci_boundary::flow::Stepper;
use ricci_boundary::spectral::EigenMethod;
use serde::de::DeserializeOwned;

use config::{BatchFile, CommandKind, ExperimentSpec, GeometrySection, NumericsSection, OutputSection};
use error::{CliError, Result};

const EXIT_PASS: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ricci-boundary", version, about = "Ricci flow on manifolds with boundary: checks and experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Prefix of the artifact file names (default: the command name).
    #[arg(long, global = true)]
    name: Option<String>,
    /// Also write `<name>.plot.csv` in tidy long format.
    #[arg(long, global = true)]
    emit_plot_data: bool,
    /// Worker threads for `batch`.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Args, Default)]
struct GeometryArgs {
    /// Embedded preset or `<name>.toml` in a RICCI_BOUNDARY_PRESETS directory.
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with a geometry spec.
    #[arg(long)]
    geometry_file: Option<PathBuf>,
    /// Radial node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Angular node count (conformal backend).
    #[arg(long)]
    angular: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Perturbation amplitude of the perturbed families.
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct FlowArgs {
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// `imex` or `explicit`.
    #[arg(long, value_parser = parse_enum::<Stepper>)]
    stepper: Option<Stepper>,
    /// Write every N-th snapshot to the trace CSV.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    boundary_tolerance: Option<f64>,
    /// Evaluate λ every N steps.
    #[arg(long)]
    lambda_stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ricci and scalar curvature of a geometry.
    Curvature {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Induced metric, second fundamental form and mean curvature.
    Boundary {
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// The λ-functional and its minimizer.
    Lambda {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// `auto`, `dense` or `inverse-iteration`.
        #[arg(long, value_parser = parse_enum::<EigenMethod>)]
        method: Option<EigenMethod>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Boundary identity and λ first variation on seeded random variations.
    VariationCheck {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// First seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeds.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        fd_step: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Complementing condition of the boundary symbol.
    Complementarity {
        #[arg(long)]
        n: Option<usize>,
        /// `euclidean`, `diag:a,b,...` or n² row-major entries.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        /// `standard` or `duplicated-row`.
        #[arg(long, value_parser = parse_enum::<RowVariant>)]
        variant: Option<RowVariant>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Ricci-deTurck flow with the mean-curvature boundary law.
    Flow {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Also pull the trace back to a Ricci-flow solution.
        #[arg(long)]
        pullback: bool,
    },
    /// Flow from an Einstein metric against the exact rescaling.
    EinsteinTest {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        tolerance: Option<f64>,
        /// Repeat at half the spacing and a quarter of the step.
        #[arg(long)]
        refine: bool,
    },
    /// Parabolic rescaling of the mean-curvature law along a flow.
    RescalingCheck {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Comma-separated scale factors.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
    },
    /// Compatibility conditions of the initial data.
    CompatCheck {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// 0 or 1.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Runs the `[[experiment]]` tables of a TOML file.
    Batch {
        file: PathBuf,
    },
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl GeometryArgs {
    fn section(self) -> GeometrySection {
        GeometrySection {
            preset: self.preset,
            file: self.geometry_file,
            nodes: self.nodes,
            angular: self.angular,
            dim: self.dim,
            amplitude: self.amplitude,
        }
    }
}

impl FlowArgs {
    fn apply(self, n: &mut NumericsSection) {
        n.t_end = self.t_end;
        n.dt = self.dt;
        n.stepper = self.stepper;
        n.stride = self.stride;
        n.boundary_tolerance = self.boundary_tolerance;
        n.lambda_stride = self.lambda_stride;
    }
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

/// The spec given by the flags alone.
fn flag_spec(command: Command) -> ExperimentSpec {
    let mut n = NumericsSection::default();
    let (kind, geometry) = match command {
        Command::Curvature { geometry, tolerance } => {
            n.tolerance = tolerance;
            (CommandKind::Curvature, geometry)
        }
        Command::Boundary { geometry } => (CommandKind::Boundary, geometry),
        Command::Lambda {
            geometry,
            method,
            tolerance,
        } => {
            n.method = method;
            n.tolerance = tolerance;
            (CommandKind::Lambda, geometry)
        }
        Command::VariationCheck {
            geometry,
            seed,
            count,
            fd_step,
            tolerance,
        } => {
            n.seed = seed;
            n.count = count;
            n.fd_step = fd_step;
            n.tolerance = tolerance;
            (CommandKind::VariationCheck, geometry)
        }
        Command::Complementarity {
            n: dim,
            metric,
            samples,
            variant,
            threshold,
        } => {
            n.n = dim;
            n.metric = metric;
            n.samples = samples;
            n.variant = variant;
            n.threshold = threshold;
            (CommandKind::Complementarity, GeometryArgs::default())
        }
        Command::Flow {
            geometry,
            flow,
            pullback,
        } => {
            flow.apply(&mut n);
            n.pullback = flag(pullback);
            (CommandKind::Flow, geometry)
        }
        Command::EinsteinTest {
            geometry,
            flow,
            tolerance,
            refine,
        } => {
            flow.apply(&mut n);
            n.tolerance = tolerance;
            n.refine = flag(refine);
            (CommandKind::EinsteinTest, geometry)
        }
        Command::RescalingCheck { geometry, flow, scales } => {
            flow.apply(&mut n);
            n.scales = scales;
            (CommandKind::RescalingCheck, geometry)
        }
        Command::CompatCheck {
            geometry,
            order,
            tolerance,
        } => {
            n.order = order;
            n.tolerance = tolerance;
            (CommandKind::CompatCheck, geometry)
        }
        Command::Batch { .. } => unreachable!("batch has no single spec"),
    };
    ExperimentSpec {
        command: Some(kind),
        name: None,
        geometry: geometry.section(),
        numerics: n,
        output: OutputSection::default(),
    }
}

fn global_spec(global: &GlobalArgs) -> ExperimentSpec {
    ExperimentSpec {
        name: global.name.clone(),
        output: OutputSection {
            dir: global.out.clone(),
            plot_data: flag(global.emit_plot_data),
        },
        ..Default::default()
    }
}

struct Finished {
    name: String,
    pass: Option<bool>,
    report: serde_json::Value,
    written: Vec<PathBuf>,
}

fn run_one(spec: &ExperimentSpec) -> Result<Finished> {
    let outcome = commands::run(spec)?;
    let report = output::report(spec, &outcome)?;
    let written = output::write_artifacts(&spec.output_dir(), spec, &outcome, &report)?;
    Ok(Finished {
        name: spec.name()?,
        pass: outcome.pass,
        report,
        written,
    })
}

fn exit_code(pass: Option<bool>) -> u8 {
    if pass == Some(false) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    }
}

fn single(global: &GlobalArgs, command: Command) -> Result<u8> {
    let flags = flag_spec(command);
    let given = flags.command()?;
    let base = match &global.config {
        Some(path) => {
            let file: ExperimentSpec = config::read_toml(path)?;
            if let Some(kind) = file.command {
                if kind != given {
                    return Err(CliError::Config(format!(
                        "config is for `{}` but the command is `{}`",
                        kind.name(),
                        given.name()
                    )));
                }
            }
            file
        }
        None => ExperimentSpec::default(),
    };
    let spec = base.merged(flags).merged(global_spec(global));
    let done = run_one(&spec)?;
    println!("{}", serde_json::to_string_pretty(&done.report)?);
    for path in &done.written {
        eprintln!("wrote {}", path.display());
    }
    Ok(exit_code(done.pass))
}

/// Runs every experiment of a batch file. Any error gives exit 1, otherwise
/// any failed check gives exit 2. Names default to `<command>-<index>` and must be unique.
fn batch(global: &GlobalArgs, file: &std::path::Path) -> Result<u8> {
    let parsed: BatchFile = config::read_toml(file)?;
    if parsed.experiment.is_empty() {
        return Err(CliError::Config(format!("{} has no [[experiment]] tables", file.display())));
    }
    let overrides = ExperimentSpec {
        name: None,
        ..global_spec(global)
    };
    let mut specs = Vec::new();
    for (k, spec) in parsed.experiment.into_iter().enumerate() {
        let kind = spec.command()?;
        let mut spec = spec.merged(overrides.clone());
        if spec.name.is_none() {
            spec.name = Some(format!("{}-{k}", kind.name()));
        }
        specs.push(spec);
    }
    let mut names: Vec<&String> = specs.iter().filter_map(|s| s.name.as_ref()).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("experiment name `{}` is used twice", w[0])));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.jobs.unwrap_or(1).max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Finished>> = pool.install(|| specs.par_iter().map(run_one).collect());
    let (mut failed, mut errored) = (false, false);
    for (spec, result) in specs.iter().zip(results) {
        let name = spec.name.as_deref().unwrap_or_default();
        match result {
            Ok(done) => {
                let status = match done.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "DONE",
                };
                println!("{status} {}", done.name);
                failed |= done.pass == Some(false);
            }
            Err(e) => {
                println!("ERROR {name}: {e}");
                errored = true;
            }
        }
    }
    Ok(if errored {
        EXIT_ERROR
    } else if failed {
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    })
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a failed check
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Batch { file } => batch(&cli.global, &file),
        command => single(&cli.global, command),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
