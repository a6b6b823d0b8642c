//! Controlled logistic growth model of cumulative epidemic cases.
//!
//! The state `y(t)` is the cumulative number of cases. Its rate of change is
//!
//! ```text
//! dy/dt = (1 - u) r y (1 - y γ m) + (1 - v) h
//! ```
//!
//! where `u` and `v` damp the human-to-human and zoonotic routes and `m`
//! scales the treatment-facility rate `γ`. The right-hand side is a
//! downward parabola in `y`, so the equation is a Riccati equation with a
//! `tanh` solution between its two real roots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid control policy {name} = {value}: {reason}")]
    InvalidPolicy {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("control u = 1 removes the logistic term; no closed-form tanh solution exists (integrate the ODE instead)")]
    DegenerateControl,
    #[error("initial value {y0} lies outside the growing branch ({lower}, {upper})")]
    InitialOutsideBranch { y0: f64, lower: f64, upper: f64 },
    #[error("peak has already passed: y0 = {y0} is at or above the inflection point {inflection} (peak day {peak_day})")]
    PeakPassed {
        y0: f64,
        inflection: f64,
        peak_day: f64,
    },
}

/// Fitted rates of the model.
///
/// `r` and `γ` are per day; `h` is a constant influx in persons per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: f64,
    pub gamma: f64,
    pub h: f64,
}

impl ModelParams {
    /// Parameters fitted to the 2022 US outbreak (10 May to 31 December).
    pub const US_2022: ModelParams = ModelParams {
        r: 0.06,
        gamma: 0.000034,
        h: 5.99,
    };

    pub fn new(r: f64, gamma: f64, h: f64) -> Result<Self, ModelError> {
        let params = ModelParams { r, gamma, h };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "r",
                value: self.r,
                reason: "must be finite and > 0",
            });
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0 && (1.0 / self.gamma).is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "must be > 0 with a finite reciprocal",
            });
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "h",
                value: self.h,
                reason: "must be finite and >= 0",
            });
        }
        Ok(())
    }

    /// Final epidemic size of the uncontrolled logistic term, `1/γ`.
    pub fn carrying_capacity(&self) -> f64 {
        1.0 / self.gamma
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::US_2022
    }
}

/// Constant control efficacies and the treatment-facility multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPolicy {
    /// Efficacy of the control on human-to-human transmission.
    pub u: f64,
    /// Efficacy of the control on zoonotic transmission.
    pub v: f64,
    /// Factor applied to `γ`; 1 is the baseline facility level.
    pub treatment_multiplier: f64,
}

impl ControlPolicy {
    pub const NONE: ControlPolicy = ControlPolicy {
        u: 0.0,
        v: 0.0,
        treatment_multiplier: 1.0,
    };

    pub fn new(u: f64, v: f64, treatment_multiplier: f64) -> Result<Self, ModelError> {
        let policy = ControlPolicy {
            u,
            v,
            treatment_multiplier,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn controls(u: f64, v: f64) -> Result<Self, ModelError> {
        Self::new(u, v, 1.0)
    }

    pub fn treatment(multiplier: f64) -> Result<Self, ModelError> {
        Self::new(0.0, 0.0, multiplier)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("u", self.u), ("v", self.v)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidPolicy {
                    name,
                    value,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        let m = self.treatment_multiplier;
        if !(m.is_finite() && m >= 1.0) {
            return Err(ModelError::InvalidPolicy {
                name: "treatment_multiplier",
                value: m,
                reason: "must be finite and >= 1",
            });
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        *self == Self::NONE
    }
}

impl Default for ControlPolicy {
    fn default() -> Self {
        Self::NONE
    }
}

/// Effective rates under a policy and the radicals of the closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Effective logistic growth rate `(1 - u) r`.
    pub a1: f64,
    /// Effective carrying capacity `1 / (m γ)`.
    pub a2: f64,
    /// Effective influx `(1 - v) h`.
    pub a3: f64,
    /// `sqrt(a1 a2 + 4 a3)`
    pub b1: f64,
    /// `sqrt(a1 / a2)`
    pub b2: f64,
    /// `sqrt(a1 a2)`
    pub b3: f64,
}

pub fn derive_constants(params: &ModelParams, policy: &ControlPolicy) -> DerivedConstants {
    let a1 = (1.0 - policy.u) * params.r;
    let a2 = 1.0 / (policy.treatment_multiplier * params.gamma);
    let a3 = (1.0 - policy.v) * params.h;
    DerivedConstants {
        a1,
        a2,
        a3,
        b1: (a1 * a2 + 4.0 * a3).sqrt(),
        b2: (a1 / a2).sqrt(),
        b3: (a1 * a2).sqrt(),
    }
}

impl DerivedConstants {
    pub fn rhs(&self, y: f64) -> f64 {
        self.a1 * y * (1.0 - y / self.a2) + self.a3
    }

    fn require_growth(&self) -> Result<(), ModelError> {
        if self.a1 > 0.0 {
            Ok(())
        } else {
            Err(ModelError::DegenerateControl)
        }
    }

    pub fn equilibria(&self) -> Result<Equilibria, ModelError> {
        self.require_growth()?;
        // Equal to (a1 a2 ± b1 b3) / (2 a1). The upper root is taken as
        // a2/2 + sqrt(a2²/4 + a2 a3/a1) and the lower one from the product
        // of roots, which keeps both exact when a3 = 0 and avoids
        // cancellation in the small root.
        let half = self.a2 / 2.0;
        let product = self.a2 * self.a3 / self.a1;
        let xi1 = half + (half * half + product).sqrt();
        let xi2 = if self.a3 == 0.0 { 0.0 } else { -product / xi1 };
        Ok(Equilibria { xi1, xi2 })
    }

    /// Largest instantaneous incidence, reached at `y = a2 / 2`.
    pub fn peak_rate(&self) -> f64 {
        self.a1 * self.a2 / 4.0 + self.a3
    }
}

/// The two roots of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibria {
    pub xi1: f64,
    pub xi2: f64,
}

pub fn rhs(y: f64, params: &ModelParams, policy: &ControlPolicy) -> f64 {
    derive_constants(params, policy).rhs(y)
}

pub fn equilibria(params: &ModelParams, policy: &ControlPolicy) -> Result<Equilibria, ModelError> {
    derive_constants(params, policy).equilibria()
}

/// Closed-form solution anchored at `y(0) = y0`.
///
/// `y(t) = a2/2 + (b1 / (2 b2)) tanh(k (t - t*))` with `k = b1 b2 / 2`. The
/// shift `t*` is the inflection time, where daily incidence peaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    constants: DerivedConstants,
    y0: f64,
    midpoint: f64,
    half_range: f64,
    rate: f64,
    inflection_time: f64,
}

impl ClosedForm {
    pub fn new(params: &ModelParams, policy: &ControlPolicy, y0: f64) -> Result<Self, ModelError> {
        let constants = derive_constants(params, policy);
        let eq = constants.equilibria()?;
        if !(y0 > eq.xi2 && y0 < eq.xi1) {
            return Err(ModelError::InitialOutsideBranch {
                y0,
                lower: eq.xi2,
                upper: eq.xi1,
            });
        }
        let half_range = constants.b1 / (2.0 * constants.b2);
        let rate = constants.b1 * constants.b2 / 2.0;
        let ratio = (constants.a2 - 2.0 * y0) / (2.0 * half_range);
        // Rounding can push the ratio onto ±1 when y0 hugs an equilibrium.
        if ratio.abs() >= 1.0 {
            return Err(ModelError::InitialOutsideBranch {
                y0,
                lower: eq.xi2,
                upper: eq.xi1,
            });
        }
        Ok(ClosedForm {
            constants,
            y0,
            midpoint: constants.a2 / 2.0,
            half_range,
            rate,
            inflection_time: ratio.atanh() / rate,
        })
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    /// Time of maximal incidence relative to `t = 0`; non-positive once passed.
    pub fn inflection_time(&self) -> f64 {
        self.inflection_time
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.y0;
        }
        self.midpoint + self.half_range * (self.rate * (t - self.inflection_time)).tanh()
    }
}

pub fn closed_form(
    t: f64,
    y0: f64,
    params: &ModelParams,
    policy: &ControlPolicy,
) -> Result<f64, ModelError> {
    Ok(ClosedForm::new(params, policy, y0)?.eval(t))
}

/// Timing and size of the incidence peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Days after `t = 0`.
    pub day: f64,
    /// Instantaneous incidence at the peak, persons per day.
    pub daily_cases: f64,
    /// Cumulative cases at the peak.
    pub cumulative: f64,
}

pub fn peak_incidence(
    params: &ModelParams,
    policy: &ControlPolicy,
    y0: f64,
) -> Result<Peak, ModelError> {
    let solution = ClosedForm::new(params, policy, y0)?;
    let c = solution.constants();
    let peak = Peak {
        day: solution.inflection_time(),
        daily_cases: c.peak_rate(),
        cumulative: c.a2 / 2.0,
    };
    if y0 >= c.a2 / 2.0 {
        return Err(ModelError::PeakPassed {
            y0,
            inflection: c.a2 / 2.0,
            peak_day: peak.day,
        });
    }
    Ok(peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    const US: ModelParams = ModelParams::US_2022;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Frozen from a 40-digit evaluation of the same formulas.
    #[test]
    fn derived_constants_baseline() {
        let c = derive_constants(&US, &ControlPolicy::NONE);
        assert_eq!(c.a1, 0.06);
        assert!(rel(c.a2, 29411.7647058824) < 1e-12);
        assert_eq!(c.a3, 5.99);
        assert!(rel(c.b1, 42.2926220794235) < 1e-12);
        assert!(rel(c.b2, 0.00142828568570857) < 1e-12);
        assert!(rel(c.b3, 42.0084025208403) < 1e-12);
    }

    #[test]
    fn full_controls_zero_out_rates() {
        let policy = ControlPolicy::controls(1.0, 1.0).unwrap();
        let c = derive_constants(&US, &policy);
        assert_eq!((c.a1, c.a3, c.b1, c.b2, c.b3), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn doubled_treatment_halves_capacity() {
        let c = derive_constants(&US, &ControlPolicy::treatment(2.0).unwrap());
        assert!(rel(c.a2, 14705.8823529412) < 1e-12);
    }

    #[test]
    fn rhs_examples() {
        let none = ControlPolicy::NONE;
        let a2 = 1.0 / US.gamma;
        assert_eq!(rhs(0.0, &US, &none), 5.99);
        assert!(rel(rhs(a2 / 2.0, &US, &none), 447.166470588235) < 1e-12);
        assert!((rhs(a2, &US, &none) - 5.99).abs() < 1e-9);
    }

    #[test]
    fn equilibria_baseline() {
        let eq = equilibria(&US, &ControlPolicy::NONE).unwrap();
        assert!(rel(eq.xi1, 29511.2614527262) < 1e-12);
        assert!(rel(eq.xi2, -99.4967468438282) < 1e-9);
    }

    #[test]
    fn equilibria_pure_logistic() {
        let p = ModelParams::new(0.2, 1e-3, 0.0).unwrap();
        let eq = equilibria(&p, &ControlPolicy::NONE).unwrap();
        assert_eq!(eq.xi1, 1.0 / p.gamma);
        assert_eq!(eq.xi2, 0.0);

        let v_off = ControlPolicy::controls(0.0, 1.0).unwrap();
        let eq = equilibria(&US, &v_off).unwrap();
        assert_eq!(eq.xi1, 1.0 / US.gamma);
        assert_eq!(eq.xi2, 0.0);
    }

    #[test]
    fn degenerate_control_refused() {
        let policy = ControlPolicy::controls(1.0, 0.0).unwrap();
        assert_eq!(equilibria(&US, &policy), Err(ModelError::DegenerateControl));
        assert_eq!(
            closed_form(3.0, 1.0, &US, &policy),
            Err(ModelError::DegenerateControl)
        );
        assert!(matches!(
            peak_incidence(&US, &policy, 1.0),
            Err(ModelError::DegenerateControl)
        ));
        // rhs stays defined
        assert_eq!(rhs(100.0, &US, &policy), 5.99);
    }

    #[test]
    fn closed_form_anchors_and_saturates() {
        let none = ControlPolicy::NONE;
        assert_eq!(closed_form(0.0, 1.0, &US, &none).unwrap(), 1.0);
        assert_eq!(closed_form(0.0, 123.5, &US, &none).unwrap(), 123.5);
        let far = closed_form(10000.0, 1.0, &US, &none).unwrap();
        assert!(rel(far, 29511.2614527262) < 1e-3);
        let end = closed_form(236.0, 1.0, &US, &none).unwrap();
        assert!(rel(end, 29505.6642412354) < 1e-10);
        assert!(rel(end, 30000.0) < 0.03);
    }

    #[test]
    fn closed_form_rejects_initial_outside_branch() {
        let none = ControlPolicy::NONE;
        assert!(matches!(
            closed_form(1.0, 40000.0, &US, &none),
            Err(ModelError::InitialOutsideBranch { .. })
        ));
        assert!(matches!(
            closed_form(1.0, -200.0, &US, &none),
            Err(ModelError::InitialOutsideBranch { .. })
        ));
    }

    #[test]
    fn peak_baseline() {
        let peak = peak_incidence(&US, &ControlPolicy::NONE, 1.0).unwrap();
        assert!(rel(peak.daily_cases, 447.166470588235) < 1e-12);
        assert!(rel(peak.cumulative, 14705.8823529412) < 1e-12);
        assert!(rel(peak.day, 94.0696782074469) < 1e-9);
    }

    #[test]
    fn peak_delayed_by_control() {
        let policy = ControlPolicy::controls(0.4, 0.0).unwrap();
        let peak = peak_incidence(&US, &policy, 1.0).unwrap();
        assert!(rel(peak.day, 142.287503470324) < 1e-9);
    }

    #[test]
    fn peak_passed_is_reported() {
        let err = peak_incidence(&US, &ControlPolicy::NONE, 20000.0).unwrap_err();
        match err {
            ModelError::PeakPassed { peak_day, .. } => assert!(peak_day <= 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn policy_validation() {
        assert!(ControlPolicy::new(1.2, 0.0, 1.0).is_err());
        assert!(ControlPolicy::new(0.0, -0.1, 1.0).is_err());
        assert!(ControlPolicy::new(0.0, 0.0, 0.5).is_err());
        assert!(ControlPolicy::new(1.0, 1.0, 5.0).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1e-3, 1.0).is_err());
        assert!(ModelParams::new(0.1, 0.0, 1.0).is_err());
        assert!(ModelParams::new(0.1, 1e-320, 1.0).is_err());
        assert!(ModelParams::new(0.1, 1e-3, -1.0).is_err());
        assert!(ModelParams::new(0.1, 1e-3, 0.0).is_ok());
    }
}
