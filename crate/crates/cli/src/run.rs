use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use epicontrol_core::calibration::default_initial_guess;
use epicontrol_core::scenario::simulate;
use epicontrol_core::{
    compare_strategies, fit, parse_case_csv, peak_incidence, run_scenario, treatment_sweep,
    CaseSeries, ControlPolicy, CsvSchema, FitResult, ModelParams, OptimizerSettings, Peak,
    RankedStrategy, ScenarioReport, ScenarioSpec, Trajectory,
};
use serde::Serialize;
use thiserror::Error;

use crate::chart::{emit_svg, ChartStyle, LabeledTrajectory, Panel};
use crate::config::{RunConfig, Subcommand};

/// Jittered restarts used by `fit`.
pub const FIT_RESTARTS: usize = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Validation(_) => 2,
        }
    }

    fn invalid(err: impl std::fmt::Display) -> Self {
        CliError::Validation(err.to_string())
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    /// Summary lines for the console.
    pub lines: Vec<String>,
    pub written: Vec<PathBuf>,
    pub converged: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            0
        } else {
            3
        }
    }
}

struct Writer<'a> {
    dir: &'a Path,
    outcome: Outcome,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_owned(),
            source,
        })?;
        Ok(Writer {
            dir,
            outcome: Outcome {
                converged: true,
                ..Outcome::default()
            },
        })
    }

    fn file(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.outcome.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(CliError::invalid)?;
        text.push('\n');
        self.file(name, &text)
    }

    fn svg(&mut self, series: &[LabeledTrajectory], style: &ChartStyle) -> Result<(), CliError> {
        let svg = emit_svg(series, style).map_err(CliError::invalid)?;
        self.file("chart.svg", &svg)
    }

    fn line(&mut self, line: String) {
        self.outcome.lines.push(line);
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_series(path: &Path) -> Result<CaseSeries, CliError> {
    let bytes = read(path)?;
    let schema = CsvSchema::infer(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    parse_case_csv(&bytes, &schema)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Parameters from `--from-fit` overlaid with explicit flags.
fn partial_params(config: &RunConfig) -> Result<[Option<f64>; 3], CliError> {
    let mut values = [None; 3];
    if let Some(path) = &config.from_fit {
        let fitted: FitResult = serde_json::from_slice(&read(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        values = [
            Some(fitted.params.r),
            Some(fitted.params.gamma),
            Some(fitted.params.h),
        ];
    }
    for (slot, flag) in values.iter_mut().zip([config.r, config.gamma, config.h]) {
        if flag.is_some() {
            *slot = flag;
        }
    }
    Ok(values)
}

fn required_params(config: &RunConfig) -> Result<ModelParams, CliError> {
    match partial_params(config)? {
        [Some(r), Some(gamma), Some(h)] => ModelParams::new(r, gamma, h).map_err(CliError::invalid),
        _ => Err(CliError::Validation(
            "model parameters required: pass --r, --gamma and --h or --from-fit PATH".into(),
        )),
    }
}

fn policy(config: &RunConfig) -> Result<ControlPolicy, CliError> {
    let mult = config.multipliers.first().copied().unwrap_or(1.0);
    ControlPolicy::new(config.u, config.v, mult).map_err(CliError::invalid)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "none".to_owned(), |v| v.to_string())
}

fn policy_label(p: &ControlPolicy) -> String {
    format!("u={} v={} mult={}", p.u, p.v, p.treatment_multiplier)
}

fn trajectory_csv(t: &Trajectory) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["day", "date", "cumulative", "daily"])
        .expect("in-memory write");
    for i in 0..t.len() {
        w.write_record([
            i.to_string(),
            t.date(i).to_string(),
            t.cumulative[i].to_string(),
            t.daily[i].to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config.subcommand {
        Subcommand::Fit => cmd_fit(config),
        Subcommand::Simulate => cmd_simulate(config),
        Subcommand::Scenario => cmd_scenario(config),
        Subcommand::Sweep => cmd_sweep(config),
        Subcommand::Plot => cmd_plot(config),
    }
}

pub fn cmd_fit(config: &RunConfig) -> Result<Outcome, CliError> {
    let input = config
        .input_path
        .as_deref()
        .ok_or_else(|| CliError::Validation("fit requires --input PATH".into()))?;
    let series = load_series(input)?;

    let guess = {
        let d = default_initial_guess();
        let [r, gamma, h] = partial_params(config)?;
        ModelParams::new(r.unwrap_or(d.r), gamma.unwrap_or(d.gamma), h.unwrap_or(d.h))
            .map_err(CliError::invalid)?
    };
    let settings = OptimizerSettings {
        restarts: FIT_RESTARTS,
        ..OptimizerSettings::default()
    };
    let result = fit(&series, &guess, &settings).map_err(CliError::invalid)?;

    let model: Vec<f64> = series
        .cumulative
        .iter()
        .zip(&result.residuals)
        .map(|(o, r)| o + r)
        .collect();

    let mut out = Writer::new(&config.output_dir)?;
    if config.format.json() {
        out.json("fit.json", &result)?;
    }
    if config.format.csv() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["day", "date", "observed", "model", "residual"])
            .expect("in-memory write");
        for (i, date) in series.dates.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                date.to_string(),
                series.cumulative[i].to_string(),
                model[i].to_string(),
                result.residuals[i].to_string(),
            ])
            .expect("in-memory write");
        }
        out.file(
            "residuals.csv",
            &String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv"),
        )?;
        out.file("observed.csv", &series.to_csv())?;
    }
    if config.plot {
        let fitted = Trajectory::from_cumulative(series.epoch_date, 1.0, model);
        out.svg(
            &[
                LabeledTrajectory::new("observed", series.to_trajectory()).dotted(),
                LabeledTrajectory::new("model fit", fitted),
            ],
            &ChartStyle::new("Model fit", vec![Panel::Daily, Panel::Cumulative]),
        )?;
    }
    out.line(format!(
        "fit: r={} gamma={} h={} rmse={} sse={} iterations={} converged={}",
        result.params.r,
        result.params.gamma,
        result.params.h,
        result.rmse,
        result.sse,
        result.iterations,
        result.converged
    ));
    out.outcome.converged = result.converged;
    Ok(out.outcome)
}

#[derive(Serialize)]
struct SimulationDoc<'a> {
    params: ModelParams,
    policy: ControlPolicy,
    y0: f64,
    horizon: u32,
    peak: Option<Peak>,
    trajectory: &'a Trajectory,
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Outcome, CliError> {
    let params = required_params(config)?;
    let policy = policy(config)?;
    let trajectory =
        simulate(&params, &policy, config.y0, config.horizon).map_err(CliError::invalid)?;
    let peak = peak_incidence(&params, &policy, config.y0).ok();

    let mut out = Writer::new(&config.output_dir)?;
    if config.format.json() {
        out.json(
            "simulation.json",
            &SimulationDoc {
                params,
                policy,
                y0: config.y0,
                horizon: config.horizon,
                peak,
                trajectory: &trajectory,
            },
        )?;
    }
    if config.format.csv() {
        out.file("trajectories.csv", &trajectory_csv(&trajectory))?;
    }
    if config.plot {
        out.svg(
            &[LabeledTrajectory::new(
                policy_label(&policy),
                trajectory.clone(),
            )],
            &ChartStyle::new(
                "Simulated trajectory",
                vec![Panel::Daily, Panel::Cumulative],
            ),
        )?;
    }
    out.line(format!(
        "simulate: final_cumulative={} peak_day={} peak_daily={}",
        trajectory.last_cumulative().unwrap_or(0.0),
        fmt_opt(peak.map(|p| p.day)),
        fmt_opt(peak.map(|p| p.daily_cases)),
    ));
    Ok(out.outcome)
}

fn report_line(prefix: &str, r: &ScenarioReport) -> String {
    format!(
        "{prefix}: {} avg_cumulative_reduction={} max_pointwise_reduction={} final_size_reduction={} peak_day_baseline={} peak_day_scenario={}",
        r.label,
        r.avg_cumulative_reduction,
        r.max_pointwise_reduction,
        r.final_size_reduction,
        fmt_opt(r.peak_day_baseline),
        fmt_opt(r.peak_day_scenario),
    )
}

pub fn cmd_scenario(config: &RunConfig) -> Result<Outcome, CliError> {
    let params = required_params(config)?;
    let policy = policy(config)?;
    let spec = ScenarioSpec::new(policy_label(&policy), policy, config.horizon, config.y0);
    let report = run_scenario(&params, &spec).map_err(CliError::invalid)?;

    let mut out = Writer::new(&config.output_dir)?;
    if config.format.json() {
        out.json("scenario.json", &report)?;
    }
    if config.format.csv() {
        out.file("trajectories.csv", &report.to_csv())?;
    }
    if config.plot {
        out.svg(
            &[
                LabeledTrajectory::new("baseline", report.baseline.clone()),
                LabeledTrajectory::new(report.label.clone(), report.scenario.clone()),
            ],
            &ChartStyle::new(
                "Scenario vs baseline",
                vec![Panel::Daily, Panel::Cumulative],
            ),
        )?;
    }
    out.line(report_line("scenario", &report));
    Ok(out.outcome)
}

#[derive(Serialize)]
struct StrategyComparison {
    efficacy: f64,
    ranking: Vec<RankedStrategy>,
}

#[derive(Serialize)]
struct SweepDoc {
    params: ModelParams,
    treatment: Vec<ScenarioReport>,
    strategies: Vec<StrategyComparison>,
}

pub fn cmd_sweep(config: &RunConfig) -> Result<Outcome, CliError> {
    let params = required_params(config)?;
    let treatment = treatment_sweep(&params, &config.multipliers, config.horizon, config.y0)
        .map_err(CliError::invalid)?;
    let strategies = config
        .efficacies
        .iter()
        .map(|&e| {
            Ok(StrategyComparison {
                efficacy: e,
                ranking: compare_strategies(&params, e, config.horizon, config.y0)
                    .map_err(CliError::invalid)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = Writer::new(&config.output_dir)?;
    let mut lines = Vec::new();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kind",
        "label",
        "rank",
        "u",
        "v",
        "mult",
        "avg_cumulative_reduction",
        "max_pointwise_reduction",
        "final_size_reduction",
        "peak_day_baseline",
        "peak_day_scenario",
    ])
    .expect("in-memory write");
    let mut row = |kind: &str, rank: String, r: &ScenarioReport| {
        w.write_record([
            kind.to_owned(),
            r.label.clone(),
            rank,
            r.policy.u.to_string(),
            r.policy.v.to_string(),
            r.policy.treatment_multiplier.to_string(),
            r.avg_cumulative_reduction.to_string(),
            r.max_pointwise_reduction.to_string(),
            r.final_size_reduction.to_string(),
            r.peak_day_baseline.map_or(String::new(), |d| d.to_string()),
            r.peak_day_scenario.map_or(String::new(), |d| d.to_string()),
        ])
        .expect("in-memory write");
    };
    for r in &treatment {
        row("treatment", String::new(), r);
        lines.push(report_line("sweep", r));
    }
    for comparison in &strategies {
        for (rank, ranked) in comparison.ranking.iter().enumerate() {
            row("strategy", (rank + 1).to_string(), &ranked.report);
            lines.push(report_line(
                &format!("strategy rank {}", rank + 1),
                &ranked.report,
            ));
        }
    }
    let summary = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");

    if config.format.json() {
        out.json(
            "sweep.json",
            &SweepDoc {
                params,
                treatment: treatment.clone(),
                strategies,
            },
        )?;
    }
    if config.format.csv() {
        out.file("sweep.csv", &summary)?;
    }
    if config.plot {
        if let Some(first) = treatment.first() {
            let mut series = vec![LabeledTrajectory::new("baseline", first.baseline.clone())];
            series.extend(
                treatment
                    .iter()
                    .map(|r| LabeledTrajectory::new(r.label.clone(), r.scenario.clone())),
            );
            out.svg(
                &series,
                &ChartStyle::new(
                    "Treatment facility sweep",
                    vec![Panel::Daily, Panel::Cumulative],
                ),
            )?;
        }
    }
    for l in lines {
        out.line(l);
    }
    Ok(out.outcome)
}

pub fn cmd_plot(config: &RunConfig) -> Result<Outcome, CliError> {
    let params = required_params(config)?;
    let policy = policy(config)?;
    let mut series = Vec::new();
    let title;
    if let Some(path) = &config.input_path {
        let observed = load_series(path)?;
        let horizon = (observed.len() - 1).max(1) as u32;
        let y0 = observed.cumulative[0];
        let model = simulate(&params, &policy, y0, horizon)
            .map_err(CliError::invalid)?
            .with_epoch(observed.epoch_date);
        let observed_traj = observed.to_trajectory();
        if observed_traj.len() != model.len() {
            return Err(CliError::Validation(
                "observed series needs at least two days".into(),
            ));
        }
        series.push(LabeledTrajectory::new("observed", observed_traj).dotted());
        series.push(LabeledTrajectory::new(
            format!("model {}", policy_label(&policy)),
            model,
        ));
        title = "Observed vs model";
    } else {
        let baseline = simulate(&params, &ControlPolicy::NONE, config.y0, config.horizon)
            .map_err(CliError::invalid)?;
        series.push(LabeledTrajectory::new("baseline", baseline));
        if !policy.is_null() {
            let scenario =
                simulate(&params, &policy, config.y0, config.horizon).map_err(CliError::invalid)?;
            series.push(LabeledTrajectory::new(policy_label(&policy), scenario));
        }
        title = "Model trajectories";
    }
    let mut out = Writer::new(&config.output_dir)?;
    out.svg(
        &series,
        &ChartStyle::new(title, vec![Panel::Daily, Panel::Cumulative]),
    )?;
    out.line(format!("plot: series={}", series.len()));
    Ok(out.outcome)
}
