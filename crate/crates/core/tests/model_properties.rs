use epicontrol_core::{
    closed_form, derive_constants, equilibria, integrate_rk4, rhs, ClosedForm, ControlPolicy,
    ModelParams,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.01f64..0.5, 1e-5f64..1e-2, 0.0f64..20.0).prop_map(|(r, gamma, h)| ModelParams {
        r,
        gamma,
        h,
    })
}

fn policy() -> impl Strategy<Value = ControlPolicy> {
    (0.0f64..0.95, 0.0f64..=1.0, 1.0f64..6.0).prop_map(|(u, v, m)| ControlPolicy {
        u,
        v,
        treatment_multiplier: m,
    })
}

/// Independent textbook logistic: K / (1 + (K/y0 - 1) e^{-rt}).
fn logistic(t: f64, y0: f64, r: f64, k: f64) -> f64 {
    k / (1.0 + (k / y0 - 1.0) * (-r * t).exp())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_matches_rk4(p in params(), c in policy(), frac in 0.0001f64..0.9) {
        let eq = equilibria(&p, &c).unwrap();
        let y0 = frac * eq.xi1;
        prop_assume!(y0 > 1e-3);
        let solution = ClosedForm::new(&p, &c, y0).unwrap();
        let k = derive_constants(&p, &c);
        let traj = integrate_rk4(|y| k.rhs(y), y0, 300.0, 0.01).unwrap();
        for (day, &numeric) in traj.cumulative.iter().enumerate() {
            let exact = solution.eval(day as f64);
            prop_assert!(((exact - numeric) / exact).abs() < 1e-6, "day {day}: {exact} vs {numeric}");
        }
    }

    #[test]
    fn closed_form_increasing_and_bounded(p in params(), c in policy(), frac in 0.0001f64..0.99) {
        let eq = equilibria(&p, &c).unwrap();
        let y0 = frac * eq.xi1;
        prop_assume!(y0 > eq.xi2);
        let solution = ClosedForm::new(&p, &c, y0).unwrap();
        let mut prev = solution.eval(0.0);
        for i in 1..400 {
            let y = solution.eval(i as f64 * 0.5);
            prop_assert!(y >= prev);
            prop_assert!(y <= eq.xi1 * (1.0 + 1e-12));
            prev = y;
        }
        let far = solution.eval(1e6);
        prop_assert!(((far - eq.xi1) / eq.xi1).abs() < 1e-9);
    }

    #[test]
    fn closed_form_monotone_in_controls(
        p in params(),
        t in 1.0f64..300.0,
        lo in 0.0f64..0.9,
        delta in 0.0f64..0.09,
        m_lo in 1.0f64..4.0,
        m_delta in 0.0f64..2.0,
    ) {
        let y0 = 1.0;
        let at = |c: ControlPolicy| closed_form(t, y0, &p, &c).unwrap();
        let tol = 1e-9;
        let hi = lo + delta;
        prop_assume!(y0 < equilibria(&p, &ControlPolicy { u: hi, v: hi, treatment_multiplier: m_lo + m_delta }).unwrap().xi1);
        let base = |u: f64, v: f64, m: f64| ControlPolicy { u, v, treatment_multiplier: m };
        // Damping r only slows growth while y is below the carrying term
        // 1/γ; above it the logistic term is negative and the upper
        // equilibrium rises with u.
        if at(base(lo, 0.0, 1.0)) <= p.carrying_capacity() {
            prop_assert!(at(base(hi, 0.0, 1.0)) <= at(base(lo, 0.0, 1.0)) * (1.0 + tol));
        }
        prop_assert!(at(base(0.0, hi, 1.0)) <= at(base(0.0, lo, 1.0)) * (1.0 + tol));
        prop_assert!(at(base(0.0, 0.0, m_lo + m_delta)) <= at(base(0.0, 0.0, m_lo)) * (1.0 + tol));
    }

    #[test]
    fn equilibria_are_roots_and_satisfy_vieta(p in params(), c in policy()) {
        let k = derive_constants(&p, &c);
        let eq = equilibria(&p, &c).unwrap();
        prop_assert!(eq.xi1 >= eq.xi2);
        // relative to the size of the terms that cancel
        let scale = k.a1 * k.a2 / 4.0 + k.a3;
        prop_assert!(rhs(eq.xi1, &p, &c).abs() <= 1e-9 * scale);
        prop_assert!(rhs(eq.xi2, &p, &c).abs() <= 1e-9 * scale);
        prop_assert!(((eq.xi1 + eq.xi2) - k.a2).abs() <= 1e-12 * k.a2);
        let product = -k.a2 * k.a3 / k.a1;
        prop_assert!((eq.xi1 * eq.xi2 - product).abs() <= 1e-12 * product.abs().max(1.0));
    }

    #[test]
    fn equilibria_agree_with_radical_form(p in params(), c in policy()) {
        let k = derive_constants(&p, &c);
        let eq = equilibria(&p, &c).unwrap();
        let upper = (k.a1 * k.a2 + k.b1 * k.b3) / (2.0 * k.a1);
        let upper_alt = (k.a1 * k.a2 + k.a2 * k.b1 * k.b2) / (2.0 * k.a1);
        prop_assert!(((eq.xi1 - upper) / upper).abs() < 1e-12);
        prop_assert!(((eq.xi1 - upper_alt) / upper_alt).abs() < 1e-12);
    }

    #[test]
    fn radical_identity(p in params(), c in policy()) {
        let k = derive_constants(&p, &c);
        let lhs = k.b1 * k.b3;
        let rhs = k.a2 * k.b1 * k.b2;
        prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * lhs.abs());
    }

    #[test]
    fn reduces_to_plain_logistic(r in 0.01f64..0.5, gamma in 1e-5f64..1e-2, frac in 0.001f64..0.9, t in 0.0f64..300.0) {
        let p = ModelParams { r, gamma, h: 0.0 };
        let k = 1.0 / gamma;
        let y0 = frac * k;
        let exact = logistic(t, y0, r, k);
        let ours = closed_form(t, y0, &p, &ControlPolicy::NONE).unwrap();
        prop_assert!(((ours - exact) / exact).abs() < 1e-10, "{ours} vs {exact}");
    }
}

#[test]
fn control_one_raises_upper_equilibrium() {
    let p = ModelParams::US_2022;
    let base = equilibria(&p, &ControlPolicy::NONE).unwrap().xi1;
    let damped = equilibria(&p, &ControlPolicy::controls(0.5, 0.0).unwrap())
        .unwrap()
        .xi1;
    assert!(damped > base);
    // so a weak control ends slightly above the baseline once saturated
    let t = 300.0;
    let weak = closed_form(t, 1.0, &p, &ControlPolicy::controls(0.01, 0.0).unwrap()).unwrap();
    assert!(weak > closed_form(t, 1.0, &p, &ControlPolicy::NONE).unwrap());
}

#[test]
fn strong_control_equilibrium_is_root() {
    let p = ModelParams::US_2022;
    let c = ControlPolicy::controls(0.8, 0.0).unwrap();
    let eq = equilibria(&p, &c).unwrap();
    assert!(((eq.xi1 - 29902.7355906206) / 29902.7355906206).abs() < 1e-12);

    // bisection on rhs over [a2/2, 2 a2], where rhs changes sign once
    let k = derive_constants(&p, &c);
    let (mut lo, mut hi) = (k.a2 / 2.0, 2.0 * k.a2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if k.rhs(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    assert!(((eq.xi1 - lo) / lo).abs() < 1e-9);
    assert!(rhs(eq.xi1, &p, &c).abs() / (k.a1 * eq.xi1) < 1e-9);
}

#[test]
fn baseline_equilibria_match_root_finding() {
    let p = ModelParams::US_2022;
    let k = derive_constants(&p, &ControlPolicy::NONE);
    let bisect = |mut lo: f64, mut hi: f64| {
        let rising = k.rhs(lo) < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (k.rhs(mid) < 0.0) == rising {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    };
    let eq = equilibria(&p, &ControlPolicy::NONE).unwrap();
    let upper = bisect(k.a2 / 2.0, 2.0 * k.a2);
    let lower = bisect(-1000.0, 0.0);
    assert!(((eq.xi1 - upper) / upper).abs() < 1e-12);
    assert!(((eq.xi2 - lower) / lower).abs() < 1e-9);
    assert!((eq.xi1 - 29511.3).abs() < 0.1);
    assert!((eq.xi2 - -99.5).abs() < 0.01);
}
