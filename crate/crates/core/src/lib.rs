//! Calibration and intervention-scenario toolkit for a controlled logistic
//! epidemic model.
//!
//! The model tracks cumulative cases `y(t)` growing logistically through
//! human-to-human transmission plus a constant zoonotic influx. Two control
//! efficacies damp those routes and a treatment multiplier shrinks the
//! final size. The crate provides the closed-form solution, an RK4
//! cross-check, least-squares calibration against observed series, and
//! baseline-versus-scenario comparisons.

pub mod calibration;
pub mod case_data;
pub mod model;
pub mod numerics;
pub mod scenario;

use chrono::NaiveDate;

pub use calibration::{
    fit, fit_with_fixed_h, goodness_report, CalibrationError, FitResult, GoodnessReport,
};
pub use case_data::{parse_case_csv, window, CaseDataError, CaseSeries, CountKind, CsvSchema};
pub use model::{
    closed_form, derive_constants, equilibria, peak_incidence, rhs, ClosedForm, ControlPolicy,
    DerivedConstants, Equilibria, ModelError, ModelParams, Peak,
};
pub use numerics::{
    integrate_rk4, nelder_mead, sse, Minimum, NumericsError, OptimizerSettings, Termination,
    Trajectory,
};
pub use scenario::{
    avg_cumulative_reduction, compare_strategies, run_scenario, simulate, treatment_sweep,
    RankedStrategy, ScenarioError, ScenarioReport, ScenarioSpec, Strategy,
};

/// 10 May 2022, day 0 of the study window (index 1 of the observed series).
pub fn study_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 5, 10).expect("valid date")
}

/// Length of the 10 May to 31 December 2022 study window in days.
pub const STUDY_DAYS: u32 = 236;

/// Sub-day RK4 step used wherever the closed form is unavailable.
pub const RK4_STEP: f64 = 0.01;
