//! Least-squares calibration of `(r, γ, h)` against observed cumulative cases.
//!
//! The fit minimizes the sum of squared differences between the closed-form
//! trajectory on the series' day grid and the observed cumulative counts.
//! The search runs in log-space so every iterate stays positive. `y0` is
//! pinned to the first observation and controls are off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_data::{CaseDataError, CaseSeries};
use crate::model::{derive_constants, ClosedForm, ControlPolicy, ModelError, ModelParams};
use crate::numerics::{integrate_rk4, nelder_mead, sse, Minimum, NumericsError, OptimizerSettings};
use crate::RK4_STEP;

/// Shortest series accepted for fitting, in days.
pub const MIN_FIT_DAYS: usize = 10;

/// Largest number of follow-up simplex runs started from a converged point.
const MAX_POLISH_ROUNDS: usize = 8;

/// Half-width of the log-space jitter applied to restart points.
const RESTART_JITTER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("series spans {0} days; at least {MIN_FIT_DAYS} are required")]
    TooShort(usize),
    #[error(transparent)]
    Series(#[from] CaseDataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("fit has {residuals} residuals but the series has {series} days")]
    LengthMismatch { residuals: usize, series: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub params: ModelParams,
    pub sse: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(rename = "y0")]
    pub y0_used: f64,
    /// Model minus observed, one per fitted day.
    pub residuals: Vec<f64>,
}

/// Model cumulative cases on days `0..n` from `y0`, without controls.
///
/// Uses the closed form when `y0` lies on the growing branch and falls back
/// to RK4 otherwise (e.g. when a candidate's final size is below `y0`).
pub fn model_curve(params: &ModelParams, y0: f64, n: usize) -> Result<Vec<f64>, CalibrationError> {
    let policy = ControlPolicy::NONE;
    match ClosedForm::new(params, &policy, y0) {
        Ok(solution) => Ok((0..n).map(|t| solution.eval(t as f64)).collect()),
        Err(ModelError::InitialOutsideBranch { .. }) => {
            let horizon = n.saturating_sub(1).max(1) as f64;
            let c = derive_constants(params, &policy);
            let traj = integrate_rk4(|y| c.rhs(y), y0, horizon, RK4_STEP)?;
            Ok(traj.cumulative.into_iter().take(n).collect())
        }
        Err(e) => Err(e.into()),
    }
}

/// Which parameters the search moves.
#[derive(Debug, Clone, Copy)]
enum Free {
    All,
    FixedH(f64),
}

impl Free {
    fn encode(self, p: &ModelParams) -> Vec<f64> {
        match self {
            Free::All => vec![p.r.ln(), p.gamma.ln(), p.h.ln()],
            Free::FixedH(_) => vec![p.r.ln(), p.gamma.ln()],
        }
    }

    fn decode(self, x: &[f64]) -> ModelParams {
        let h = match self {
            Free::All => x[2].exp(),
            Free::FixedH(h) => h,
        };
        ModelParams {
            r: x[0].exp(),
            gamma: x[1].exp(),
            h,
        }
    }
}

fn objective(free: Free, x: &[f64], y0: f64, observed: &[f64]) -> f64 {
    let params = free.decode(x);
    if params.validate().is_err() {
        return f64::MAX;
    }
    match model_curve(&params, y0, observed.len()).and_then(|m| Ok(sse(&m, observed)?)) {
        Ok(value) if value.is_finite() => value,
        _ => f64::MAX,
    }
}

/// One simplex run followed by restarts from its best point until the
/// objective stops improving.
fn polished_search<F>(
    f: F,
    start: &[f64],
    settings: &OptimizerSettings,
) -> Result<(Minimum, usize), NumericsError>
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = nelder_mead(&f, start, settings)?;
    let mut total = best.iterations;
    for _ in 0..MAX_POLISH_ROUNDS {
        if !best.converged() {
            break;
        }
        let next = nelder_mead(&f, &best.point, settings)?;
        total += next.iterations;
        let improved = next.value < best.value * (1.0 - 1e-12) && next.value < best.value;
        if next.value <= best.value {
            best = next;
        }
        if !improved {
            break;
        }
    }
    Ok((best, total))
}

fn fit_impl(
    series: &CaseSeries,
    initial_guess: &ModelParams,
    settings: &OptimizerSettings,
    free: Free,
) -> Result<FitResult, CalibrationError> {
    series.validate()?;
    if series.len() < MIN_FIT_DAYS {
        return Err(CalibrationError::TooShort(series.len()));
    }
    initial_guess.validate()?;
    settings.validate()?;

    let observed = &series.cumulative;
    let y0 = observed[0];
    let origin = free.encode(initial_guess);

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut starts = vec![origin.clone()];
    for _ in 0..settings.restarts {
        starts.push(
            origin
                .iter()
                .map(|x| x + rng.random_range(-RESTART_JITTER..=RESTART_JITTER))
                .collect(),
        );
    }

    let f = |x: &[f64]| objective(free, x, y0, observed);
    let runs = starts
        .par_iter()
        .map(|s| polished_search(f, s, settings))
        .collect::<Result<Vec<_>, _>>()?;

    // min_by keeps the first of equal elements, so ties go to the lowest index
    let (best, iterations) = runs
        .into_iter()
        .min_by(|a, b| a.0.value.total_cmp(&b.0.value))
        .expect("at least one start");

    let params = free.decode(&best.point);
    let model = model_curve(&params, y0, observed.len())?;
    let residuals: Vec<f64> = model.iter().zip(observed).map(|(m, o)| m - o).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(FitResult {
        params,
        sse,
        rmse: (sse / residuals.len() as f64).sqrt(),
        iterations,
        converged: best.converged(),
        y0_used: y0,
        residuals,
    })
}

/// Fits `(r, γ, h)` to the cumulative counts of `series`.
pub fn fit(
    series: &CaseSeries,
    initial_guess: &ModelParams,
    settings: &OptimizerSettings,
) -> Result<FitResult, CalibrationError> {
    fit_impl(series, initial_guess, settings, Free::All)
}

/// Fits `(r, γ)` with the zoonotic rate held at `h`.
pub fn fit_with_fixed_h(
    series: &CaseSeries,
    initial_guess: &ModelParams,
    h: f64,
    settings: &OptimizerSettings,
) -> Result<FitResult, CalibrationError> {
    let guess = ModelParams {
        h,
        ..*initial_guess
    };
    fit_impl(series, &guess, settings, Free::FixedH(h))
}

/// Default starting point for calibration.
pub fn default_initial_guess() -> ModelParams {
    ModelParams {
        r: 0.1,
        gamma: 1e-5,
        h: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodnessReport {
    pub rmse: f64,
    pub max_abs_residual: f64,
    /// Maximal blocks of same-signed non-zero residuals.
    pub sign_runs: usize,
    pub longest_run: usize,
}

pub fn goodness_report(
    fit: &FitResult,
    series: &CaseSeries,
) -> Result<GoodnessReport, CalibrationError> {
    if fit.residuals.len() != series.len() {
        return Err(CalibrationError::LengthMismatch {
            residuals: fit.residuals.len(),
            series: series.len(),
        });
    }
    let n = fit.residuals.len().max(1) as f64;
    let sum_sq: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let max_abs_residual = fit.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));

    let mut sign_runs = 0;
    let mut longest_run = 0;
    let mut current = 0;
    let mut last_sign = 0.0;
    for &r in &fit.residuals {
        if r == 0.0 {
            continue;
        }
        let sign = r.signum();
        if sign == last_sign {
            current += 1;
        } else {
            sign_runs += 1;
            current = 1;
            last_sign = sign;
        }
        longest_run = longest_run.max(current);
    }

    Ok(GoodnessReport {
        rmse: (sum_sq / n).sqrt(),
        max_abs_residual,
        sign_runs,
        longest_run,
    })
}
