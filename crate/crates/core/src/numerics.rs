//! Numerical kernels: fixed-step RK4, the squared-error objective and a
//! Nelder-Mead simplex minimizer.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::study_epoch;

/// States outside `[0, STATE_LIMIT]` are treated as blow-up.
pub const STATE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("invalid integrator input: {0}")]
    InvalidInput(String),
    #[error("state left [0, {limit:e}] at t = {t}: y = {value}")]
    Overflow { t: f64, value: f64, limit: f64 },
    #[error("length mismatch: model has {model} values, observed has {observed}")]
    LengthMismatch { model: usize, observed: usize },
    #[error("empty sequences")]
    Empty,
    #[error("objective is not finite ({value}) at {point:?}")]
    NonFiniteObjective { point: Vec<f64>, value: f64 },
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),
}

/// Cumulative cases on a uniform grid with derived daily incidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Calendar date of sample 0.
    pub t0_epoch: NaiveDate,
    /// Days between samples.
    pub step: f64,
    pub cumulative: Vec<f64>,
    /// `daily[0] = cumulative[0]`, then first differences.
    pub daily: Vec<f64>,
}

impl Trajectory {
    pub fn from_cumulative(t0_epoch: NaiveDate, step: f64, cumulative: Vec<f64>) -> Self {
        let daily = first_differences(&cumulative);
        Trajectory {
            t0_epoch,
            step,
            cumulative,
            daily,
        }
    }

    pub fn with_epoch(mut self, t0_epoch: NaiveDate) -> Self {
        self.t0_epoch = t0_epoch;
        self
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Time of sample `index` in days after the epoch.
    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.step
    }

    /// Calendar date of sample `index`, rounded down to whole days.
    pub fn date(&self, index: usize) -> NaiveDate {
        let days = self.time(index).floor().max(0.0) as u64;
        self.t0_epoch + Days::new(days)
    }

    pub fn last_cumulative(&self) -> Option<f64> {
        self.cumulative.last().copied()
    }

    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.t0_epoch == other.t0_epoch && self.step == other.step && self.len() == other.len()
    }

    /// Index of the largest daily increment, skipping the anchor sample.
    pub fn peak_daily_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in self.daily.iter().enumerate().skip(1) {
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}

pub(crate) fn first_differences(cumulative: &[f64]) -> Vec<f64> {
    let mut daily = Vec::with_capacity(cumulative.len());
    let mut prev = None;
    for &c in cumulative {
        daily.push(match prev {
            None => c,
            Some(p) => c - p,
        });
        prev = Some(c);
    }
    daily
}

/// Integrates `dy/dt = rate(y)` with classical RK4 and samples on a one-day grid.
///
/// Every day is split into `n = ceil(1/step)` equal sub-steps, so `step` is
/// used exactly when it divides one day. Samples cover days `0..=floor(horizon)`.
pub fn integrate_rk4<F>(
    rate: F,
    y0: f64,
    horizon: f64,
    step: f64,
) -> Result<Trajectory, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !y0.is_finite() {
        return Err(NumericsError::InvalidInput(format!(
            "y0 = {y0} is not finite"
        )));
    }
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(NumericsError::InvalidInput(format!(
            "step = {step} must be finite and in (0, 1] day"
        )));
    }
    if !(horizon.is_finite() && horizon >= step) {
        return Err(NumericsError::InvalidInput(format!(
            "horizon = {horizon} must be finite and >= step"
        )));
    }
    check_state(0.0, y0)?;

    let substeps = (1.0 / step - 1e-9).ceil().max(1.0) as usize;
    let dt = 1.0 / substeps as f64;
    let days = horizon.floor() as usize;

    let mut y = y0;
    let mut cumulative = Vec::with_capacity(days + 1);
    cumulative.push(y);
    for day in 0..days {
        for s in 0..substeps {
            let k1 = rate(y);
            let k2 = rate(y + 0.5 * dt * k1);
            let k3 = rate(y + 0.5 * dt * k2);
            let k4 = rate(y + dt * k3);
            y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            check_state(day as f64 + (s + 1) as f64 * dt, y)?;
        }
        cumulative.push(y);
    }
    Ok(Trajectory::from_cumulative(study_epoch(), 1.0, cumulative))
}

fn check_state(t: f64, y: f64) -> Result<(), NumericsError> {
    if y.is_finite() && (0.0..=STATE_LIMIT).contains(&y) {
        Ok(())
    } else {
        Err(NumericsError::Overflow {
            t,
            value: y,
            limit: STATE_LIMIT,
        })
    }
}

/// Sum of squared differences between model values and observations.
pub fn sse(model_values: &[f64], observed: &[f64]) -> Result<f64, NumericsError> {
    if model_values.len() != observed.len() {
        return Err(NumericsError::LengthMismatch {
            model: model_values.len(),
            observed: observed.len(),
        });
    }
    if model_values.is_empty() {
        return Err(NumericsError::Empty);
    }
    Ok(model_values
        .iter()
        .zip(observed)
        .map(|(m, o)| (m - o) * (m - o))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Relative spread of objective values across the simplex.
    pub simplex_tolerance: f64,
    /// Largest vertex distance from the best vertex.
    pub parameter_tolerance: f64,
    /// Relative size of the starting simplex along each coordinate. A single
    /// entry applies to every coordinate.
    pub initial_step_fractions: Vec<f64>,
    /// Extra jittered starts used by calibration (0 = single start).
    pub restarts: usize,
    /// Seed for the jittered starts.
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 10_000,
            simplex_tolerance: 1e-10,
            parameter_tolerance: 1e-8,
            initial_step_fractions: vec![0.1],
            restarts: 0,
            seed: 0x5eed,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.max_iterations < 1 {
            return Err(NumericsError::InvalidSettings(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.simplex_tolerance > 0.0 && self.parameter_tolerance > 0.0) {
            return Err(NumericsError::InvalidSettings(
                "tolerances must be > 0".into(),
            ));
        }
        if self.initial_step_fractions.is_empty()
            || self
                .initial_step_fractions
                .iter()
                .any(|f| !(f.is_finite() && *f > 0.0))
        {
            return Err(NumericsError::InvalidSettings(
                "initial_step_fractions must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }

    fn step_fraction(&self, dim: usize, i: usize) -> Result<f64, NumericsError> {
        match self.initial_step_fractions.len() {
            1 => Ok(self.initial_step_fractions[0]),
            n if n == dim => Ok(self.initial_step_fractions[i]),
            n => Err(NumericsError::InvalidSettings(format!(
                "{n} step fractions for a {dim}-dimensional problem"
            ))),
        }
    }
}

/// Why the simplex search stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ObjectiveSpread,
    SimplexSize,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

/// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2).
pub fn nelder_mead<F>(
    mut objective: F,
    initial_guess: &[f64],
    settings: &OptimizerSettings,
) -> Result<Minimum, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    settings.validate()?;
    let n = initial_guess.len();
    if n == 0 {
        return Err(NumericsError::Empty);
    }

    let mut eval = |x: &[f64]| -> Result<f64, NumericsError> {
        let value = objective(x);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(NumericsError::NonFiniteObjective {
                point: x.to_vec(),
                value,
            })
        }
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(initial_guess.to_vec());
    for i in 0..n {
        let fraction = settings.step_fraction(n, i)?;
        let mut v = initial_guess.to_vec();
        v[i] += if v[i] != 0.0 {
            fraction * v[i].abs()
        } else {
            fraction
        };
        vertices.push(v);
    }
    let mut values = vertices
        .iter()
        .map(|v| eval(v))
        .collect::<Result<Vec<_>, _>>()?;

    let mut iterations = 0;
    let termination = loop {
        order_simplex(&mut vertices, &mut values);

        let best = values[0];
        let worst = values[n];
        if 2.0 * (worst - best).abs()
            <= settings.simplex_tolerance * (best.abs() + worst.abs()) + f64::MIN_POSITIVE
        {
            break Termination::ObjectiveSpread;
        }
        let diameter = vertices[1..]
            .iter()
            .map(|v| distance(v, &vertices[0]))
            .fold(0.0, f64::max);
        if diameter < settings.parameter_tolerance {
            break Termination::SimplexSize;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| vertices[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let toward = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&vertices[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = toward(1.0);
        let f_reflected = eval(&reflected)?;
        if f_reflected < values[0] {
            let expanded = toward(2.0);
            let f_expanded = eval(&expanded)?;
            if f_expanded < f_reflected {
                vertices[n] = expanded;
                values[n] = f_expanded;
            } else {
                vertices[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[n - 1] {
            vertices[n] = reflected;
            values[n] = f_reflected;
            continue;
        }

        let (contracted, f_contracted) = if f_reflected < values[n] {
            let outside = toward(0.5);
            let f = eval(&outside)?;
            (outside, f)
        } else {
            let inside = toward(-0.5);
            let f = eval(&inside)?;
            (inside, f)
        };
        if f_contracted < values[n].min(f_reflected) {
            vertices[n] = contracted;
            values[n] = f_contracted;
            continue;
        }

        // shrink toward the best vertex
        let best_vertex = vertices[0].clone();
        for i in 1..=n {
            for (x, b) in vertices[i].iter_mut().zip(&best_vertex) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = eval(&vertices[i])?;
        }
    };

    Ok(Minimum {
        point: vertices.swap_remove(0),
        value: values[0],
        iterations,
        termination,
    })
}

fn order_simplex(vertices: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *vertices = order.iter().map(|&i| vertices[i].clone()).collect();
    *values = order.iter().map(|&i| values[i]).collect();
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
