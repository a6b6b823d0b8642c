use std::path::PathBuf;

use clap::{Args, Parser, ValueEnum};
use epicontrol_core::STUDY_DAYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "epicontrol",
    version,
    about = "Controlled logistic epidemic model toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Fit r, gamma and h to a case-count CSV
    Fit(FitArgs),
    /// Simulate one trajectory under a policy
    Simulate(ModelArgs),
    /// Compare a policy against the uncontrolled baseline
    Scenario(ModelArgs),
    /// Treatment-multiplier sweep and strategy comparison
    Sweep(SweepArgs),
    /// Render chart.svg only
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory (created if missing)
    #[arg(long = "output", value_name = "DIR", default_value = ".")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Also write chart.svg
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, value_name = "F")]
    pub r: Option<f64>,
    #[arg(long, value_name = "F")]
    pub gamma: Option<f64>,
    #[arg(long, value_name = "F")]
    pub h: Option<f64>,
    /// Take parameters from a previous fit.json
    #[arg(long = "from-fit", value_name = "PATH")]
    pub from_fit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Initial guess overrides
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    pub u: f64,
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    pub v: f64,
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    pub mult: f64,
    #[arg(long, value_name = "N", default_value_t = STUDY_DAYS)]
    pub horizon: u32,
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    pub y0: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Treatment multipliers (repeatable)
    #[arg(long, value_name = "F", default_values_t = [2.0, 5.0])]
    pub mult: Vec<f64>,
    /// Control efficacies for the strategy comparison (repeatable)
    #[arg(long, value_name = "F", default_values_t = [0.4, 0.8])]
    pub efficacy: Vec<f64>,
    #[arg(long, value_name = "N", default_value_t = STUDY_DAYS)]
    pub horizon: u32,
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    pub y0: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Observed series to overlay
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    pub u: f64,
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    pub v: f64,
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    pub mult: f64,
    #[arg(long, value_name = "N", default_value_t = STUDY_DAYS)]
    pub horizon: u32,
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    pub y0: f64,
    #[arg(long = "output", value_name = "DIR", default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Fit,
    Simulate,
    Scenario,
    Sweep,
    Plot,
}

/// Flattened view of a parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub input_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub r: Option<f64>,
    pub gamma: Option<f64>,
    pub h: Option<f64>,
    pub from_fit: Option<PathBuf>,
    pub u: f64,
    pub v: f64,
    pub multipliers: Vec<f64>,
    pub efficacies: Vec<f64>,
    pub horizon: u32,
    pub y0: f64,
    pub format: Format,
    pub plot: bool,
}

impl RunConfig {
    fn base(subcommand: Subcommand, params: ParamArgs, output_dir: PathBuf) -> Self {
        RunConfig {
            subcommand,
            input_path: None,
            output_dir,
            r: params.r,
            gamma: params.gamma,
            h: params.h,
            from_fit: params.from_fit,
            u: 0.0,
            v: 0.0,
            multipliers: vec![1.0],
            efficacies: Vec::new(),
            horizon: STUDY_DAYS,
            y0: 1.0,
            format: Format::Both,
            plot: false,
        }
    }

    fn model(subcommand: Subcommand, a: ModelArgs) -> Self {
        RunConfig {
            u: a.u,
            v: a.v,
            multipliers: vec![a.mult],
            horizon: a.horizon,
            y0: a.y0,
            format: a.out.format,
            plot: a.out.plot,
            ..RunConfig::base(subcommand, a.params, a.out.output)
        }
    }
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        match cli.command {
            Command::Fit(a) => RunConfig {
                input_path: Some(a.input),
                format: a.out.format,
                plot: a.out.plot,
                ..RunConfig::base(Subcommand::Fit, a.params, a.out.output)
            },
            Command::Simulate(a) => RunConfig::model(Subcommand::Simulate, a),
            Command::Scenario(a) => RunConfig::model(Subcommand::Scenario, a),
            Command::Sweep(a) => RunConfig {
                multipliers: a.mult,
                efficacies: a.efficacy,
                horizon: a.horizon,
                y0: a.y0,
                format: a.out.format,
                plot: a.out.plot,
                ..RunConfig::base(Subcommand::Sweep, a.params, a.out.output)
            },
            Command::Plot(a) => RunConfig {
                input_path: a.input,
                u: a.u,
                v: a.v,
                multipliers: vec![a.mult],
                horizon: a.horizon,
                y0: a.y0,
                plot: true,
                ..RunConfig::base(Subcommand::Plot, a.params, a.output)
            },
        }
    }
}
