//! Baseline-versus-intervention comparisons.
//!
//! Strategy 1 applies the human-to-human control alone, Strategy 2 the
//! zoonotic control alone and Strategy 3 both at once. Treatment sweeps
//! scale `γ` with every control off.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{derive_constants, ClosedForm, ControlPolicy, ModelError, ModelParams};
use crate::numerics::{integrate_rk4, NumericsError, Trajectory};
use crate::{study_epoch, RK4_STEP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("horizon must be at least 1 day")]
    ZeroHorizon,
    #[error("y0 = {0} must be finite and >= 0")]
    InvalidInitial(f64),
    #[error("trajectories do not share a grid")]
    GridMismatch,
    #[error("baseline has no cumulative cases on day {day}")]
    ZeroBaseline { day: usize },
    #[error("trajectories need at least two samples")]
    TooShort,
    #[error("efficacy {0} must lie strictly between 0 and 1")]
    InvalidEfficacy(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub label: String,
    pub policy: ControlPolicy,
    pub horizon: u32,
    pub y0: f64,
}

impl ScenarioSpec {
    pub fn new(label: impl Into<String>, policy: ControlPolicy, horizon: u32, y0: f64) -> Self {
        ScenarioSpec {
            label: label.into(),
            policy,
            horizon,
            y0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.horizon < 1 {
            return Err(ScenarioError::ZeroHorizon);
        }
        if !(self.y0.is_finite() && self.y0 >= 0.0) {
            return Err(ScenarioError::InvalidInitial(self.y0));
        }
        self.policy.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub label: String,
    pub policy: ControlPolicy,
    pub horizon: u32,
    pub y0: f64,
    pub avg_cumulative_reduction: f64,
    pub max_pointwise_reduction: f64,
    pub final_size_reduction: f64,
    /// `None` when the policy has no incidence peak (`u = 1`).
    pub peak_day_baseline: Option<f64>,
    pub peak_day_scenario: Option<f64>,
    pub peak_daily_baseline: Option<f64>,
    pub peak_daily_scenario: Option<f64>,
    pub baseline: Trajectory,
    pub scenario: Trajectory,
}

impl ScenarioReport {
    /// Columns: day, date, baseline_cumulative, scenario_cumulative,
    /// baseline_daily, scenario_daily.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record([
                "day",
                "date",
                "baseline_cumulative",
                "scenario_cumulative",
                "baseline_daily",
                "scenario_daily",
            ])
            .expect("in-memory write");
        for i in 0..self.baseline.len() {
            writer
                .write_record([
                    i.to_string(),
                    self.baseline.date(i).to_string(),
                    self.baseline.cumulative[i].to_string(),
                    self.scenario.cumulative[i].to_string(),
                    self.baseline.daily[i].to_string(),
                    self.scenario.daily[i].to_string(),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Daily-grid trajectory over days `0..=horizon` under `policy`.
///
/// Uses the closed form whenever `u < 1`; the `u = 1` case has no `tanh`
/// form and is integrated with RK4 instead.
pub fn simulate(
    params: &ModelParams,
    policy: &ControlPolicy,
    y0: f64,
    horizon: u32,
) -> Result<Trajectory, ScenarioError> {
    params.validate()?;
    policy.validate()?;
    if horizon < 1 {
        return Err(ScenarioError::ZeroHorizon);
    }
    if policy.u < 1.0 {
        let solution = ClosedForm::new(params, policy, y0)?;
        let cumulative = (0..=horizon).map(|t| solution.eval(f64::from(t))).collect();
        Ok(Trajectory::from_cumulative(study_epoch(), 1.0, cumulative))
    } else {
        let c = derive_constants(params, policy);
        Ok(integrate_rk4(
            |y| c.rhs(y),
            y0,
            f64::from(horizon),
            RK4_STEP,
        )?)
    }
}

fn peak_of(params: &ModelParams, policy: &ControlPolicy, y0: f64) -> (Option<f64>, Option<f64>) {
    match ClosedForm::new(params, policy, y0) {
        Ok(solution) => (
            Some(solution.inflection_time()),
            Some(solution.constants().peak_rate()),
        ),
        Err(_) => (None, None),
    }
}

fn relative_reductions(
    baseline: &Trajectory,
    scenario: &Trajectory,
) -> Result<Vec<f64>, ScenarioError> {
    if !baseline.same_grid(scenario) {
        return Err(ScenarioError::GridMismatch);
    }
    if baseline.len() < 2 {
        return Err(ScenarioError::TooShort);
    }
    baseline
        .cumulative
        .iter()
        .zip(&scenario.cumulative)
        .enumerate()
        .skip(1)
        .map(|(day, (&b, &s))| {
            if b > 0.0 {
                Ok(1.0 - s / b)
            } else {
                Err(ScenarioError::ZeroBaseline { day })
            }
        })
        .collect()
}

/// Mean over days `1..=N` of `1 - scenario/baseline` on cumulative cases.
pub fn avg_cumulative_reduction(
    baseline: &Trajectory,
    scenario: &Trajectory,
) -> Result<f64, ScenarioError> {
    let reductions = relative_reductions(baseline, scenario)?;
    Ok(reductions.iter().sum::<f64>() / reductions.len() as f64)
}

/// Largest pointwise relative reduction over days `1..=N`.
pub fn max_pointwise_reduction(
    baseline: &Trajectory,
    scenario: &Trajectory,
) -> Result<f64, ScenarioError> {
    let reductions = relative_reductions(baseline, scenario)?;
    Ok(reductions.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

pub fn final_size_reduction(
    baseline: &Trajectory,
    scenario: &Trajectory,
) -> Result<f64, ScenarioError> {
    if !baseline.same_grid(scenario) {
        return Err(ScenarioError::GridMismatch);
    }
    match (baseline.last_cumulative(), scenario.last_cumulative()) {
        (Some(b), Some(s)) if b > 0.0 => Ok(1.0 - s / b),
        (Some(_), Some(_)) => Err(ScenarioError::ZeroBaseline {
            day: baseline.len() - 1,
        }),
        _ => Err(ScenarioError::TooShort),
    }
}

pub fn run_scenario(
    params: &ModelParams,
    spec: &ScenarioSpec,
) -> Result<ScenarioReport, ScenarioError> {
    params.validate()?;
    spec.validate()?;
    let baseline_policy = ControlPolicy::NONE;
    let baseline = simulate(params, &baseline_policy, spec.y0, spec.horizon)?;
    let scenario = simulate(params, &spec.policy, spec.y0, spec.horizon)?;
    let (peak_day_baseline, peak_daily_baseline) = peak_of(params, &baseline_policy, spec.y0);
    let (peak_day_scenario, peak_daily_scenario) = peak_of(params, &spec.policy, spec.y0);
    Ok(ScenarioReport {
        label: spec.label.clone(),
        policy: spec.policy,
        horizon: spec.horizon,
        y0: spec.y0,
        avg_cumulative_reduction: avg_cumulative_reduction(&baseline, &scenario)?,
        max_pointwise_reduction: max_pointwise_reduction(&baseline, &scenario)?,
        final_size_reduction: final_size_reduction(&baseline, &scenario)?,
        peak_day_baseline,
        peak_day_scenario,
        peak_daily_baseline,
        peak_daily_scenario,
        baseline,
        scenario,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Strategy 1: human-to-human control only.
    HumanToHuman,
    /// Strategy 2: zoonotic control only.
    Zoonotic,
    /// Strategy 3: both controls.
    Combined,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::HumanToHuman,
        Strategy::Zoonotic,
        Strategy::Combined,
    ];

    pub fn number(self) -> u8 {
        match self {
            Strategy::HumanToHuman => 1,
            Strategy::Zoonotic => 2,
            Strategy::Combined => 3,
        }
    }

    pub fn policy(self, efficacy: f64) -> Result<ControlPolicy, ModelError> {
        match self {
            Strategy::HumanToHuman => ControlPolicy::controls(efficacy, 0.0),
            Strategy::Zoonotic => ControlPolicy::controls(0.0, efficacy),
            Strategy::Combined => ControlPolicy::controls(efficacy, efficacy),
        }
    }

    pub fn label(self) -> String {
        format!("strategy-{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedStrategy {
    pub strategy: Strategy,
    pub efficacy: f64,
    pub report: ScenarioReport,
}

/// Runs Strategies 1-3 at one efficacy and ranks them by average reduction,
/// breaking ties on final-size reduction.
pub fn compare_strategies(
    params: &ModelParams,
    efficacy: f64,
    horizon: u32,
    y0: f64,
) -> Result<Vec<RankedStrategy>, ScenarioError> {
    if !(efficacy > 0.0 && efficacy < 1.0) {
        return Err(ScenarioError::InvalidEfficacy(efficacy));
    }
    let mut ranked = Strategy::ALL
        .par_iter()
        .map(|&strategy| {
            let spec = ScenarioSpec::new(strategy.label(), strategy.policy(efficacy)?, horizon, y0);
            Ok(RankedStrategy {
                strategy,
                efficacy,
                report: run_scenario(params, &spec)?,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    ranked.sort_by(|a, b| {
        b.report
            .avg_cumulative_reduction
            .total_cmp(&a.report.avg_cumulative_reduction)
            .then(
                b.report
                    .final_size_reduction
                    .total_cmp(&a.report.final_size_reduction),
            )
    });
    Ok(ranked)
}

/// One report per treatment multiplier, in input order.
pub fn treatment_sweep(
    params: &ModelParams,
    multipliers: &[f64],
    horizon: u32,
    y0: f64,
) -> Result<Vec<ScenarioReport>, ScenarioError> {
    multipliers
        .par_iter()
        .map(|&m| {
            let spec = ScenarioSpec::new(
                format!("treatment-x{m}"),
                ControlPolicy::treatment(m)?,
                horizon,
                y0,
            );
            run_scenario(params, &spec)
        })
        .collect()
}

/// Calendar date of grid day `day` from the study epoch.
pub fn day_date(day: u32) -> NaiveDate {
    study_epoch() + chrono::Days::new(u64::from(day))
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: ModelParams = ModelParams::US_2022;

    fn report(policy: ControlPolicy) -> ScenarioReport {
        run_scenario(&US, &ScenarioSpec::new("test", policy, 236, 1.0)).unwrap()
    }

    #[test]
    fn null_policy_is_identity() {
        let r = report(ControlPolicy::NONE);
        assert_eq!(r.avg_cumulative_reduction, 0.0);
        assert_eq!(r.final_size_reduction, 0.0);
        assert_eq!(r.max_pointwise_reduction, 0.0);
        assert_eq!(r.baseline, r.scenario);
        for (a, b) in r.baseline.cumulative.iter().zip(&r.scenario.cumulative) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn strong_control_one_final_size() {
        let r = report(ControlPolicy::controls(0.8, 0.0).unwrap());
        assert!(
            (r.final_size_reduction - 0.78).abs() < 0.05,
            "{}",
            r.final_size_reduction
        );
    }

    #[test]
    fn combined_strong_average() {
        let r = report(ControlPolicy::controls(0.8, 0.8).unwrap());
        assert!((r.avg_cumulative_reduction - 0.95).abs() <= 0.08);
    }

    #[test]
    fn avg_reduction_examples() {
        let base = Trajectory::from_cumulative(study_epoch(), 1.0, vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(avg_cumulative_reduction(&base, &base).unwrap(), 0.0);
        let half = Trajectory::from_cumulative(study_epoch(), 1.0, vec![0.5, 1.0, 2.0, 4.0]);
        assert_eq!(avg_cumulative_reduction(&base, &half).unwrap(), 0.5);
    }

    #[test]
    fn avg_reduction_guards() {
        let base = Trajectory::from_cumulative(study_epoch(), 1.0, vec![0.0, 0.0, 4.0]);
        let other = base.clone();
        assert_eq!(
            avg_cumulative_reduction(&base, &other),
            Err(ScenarioError::ZeroBaseline { day: 1 })
        );
        let short = Trajectory::from_cumulative(study_epoch(), 1.0, vec![1.0, 2.0]);
        let long = Trajectory::from_cumulative(study_epoch(), 1.0, vec![1.0, 2.0, 3.0]);
        assert_eq!(
            avg_cumulative_reduction(&short, &long),
            Err(ScenarioError::GridMismatch)
        );
    }

    #[test]
    fn doubled_treatment_average() {
        let r = report(ControlPolicy::treatment(2.0).unwrap());
        assert!((r.avg_cumulative_reduction - 0.31).abs() <= 0.08);
    }

    #[test]
    fn full_control_uses_integrator() {
        let r = report(ControlPolicy::controls(1.0, 0.0).unwrap());
        assert_eq!(r.peak_day_scenario, None);
        // pure constant influx: y = 1 + 5.99 t
        let last = *r.scenario.cumulative.last().unwrap();
        assert!((last - (1.0 + 5.99 * 236.0)).abs() < 1e-6);
    }

    #[test]
    fn ranking_at_forty_percent() {
        let ranked = compare_strategies(&US, 0.4, 236, 1.0).unwrap();
        let order: Vec<u8> = ranked.iter().map(|r| r.strategy.number()).collect();
        assert_eq!(order, [3, 1, 2]);
    }

    #[test]
    fn vanishing_efficacy_ties() {
        let ranked = compare_strategies(&US, 1e-9, 236, 1.0).unwrap();
        for r in &ranked {
            assert!(r.report.avg_cumulative_reduction.abs() < 1e-6);
            assert!(r.report.final_size_reduction.abs() < 1e-6);
        }
    }

    #[test]
    fn efficacy_bounds() {
        assert!(compare_strategies(&US, 0.0, 236, 1.0).is_err());
        assert!(compare_strategies(&US, 1.0, 236, 1.0).is_err());
    }

    #[test]
    fn sweep_order_and_identity() {
        let reports = treatment_sweep(&US, &[1.0, 5.0, 2.0], 236, 1.0).unwrap();
        assert_eq!(reports[0].avg_cumulative_reduction, 0.0);
        assert_eq!(reports[1].policy.treatment_multiplier, 5.0);
        assert_eq!(reports[2].policy.treatment_multiplier, 2.0);
        assert!((reports[1].avg_cumulative_reduction - 0.55).abs() <= 0.08);
        assert!(reports[2].peak_day_scenario.unwrap() < reports[2].peak_day_baseline.unwrap());
        assert!(treatment_sweep(&US, &[0.5], 236, 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = run_scenario(&US, &ScenarioSpec::new("x", ControlPolicy::NONE, 2, 1.0)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "day,date,baseline_cumulative,scenario_cumulative,baseline_daily,scenario_daily"
        );
        assert!(lines.next().unwrap().starts_with("0,2022-05-10,1,1,1,1"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn invalid_spec() {
        let bad = ScenarioSpec::new("bad", ControlPolicy::NONE, 0, 1.0);
        assert_eq!(run_scenario(&US, &bad), Err(ScenarioError::ZeroHorizon));
        let bad = ScenarioSpec::new("bad", ControlPolicy::NONE, 10, -1.0);
        assert!(run_scenario(&US, &bad).is_err());
    }
}
