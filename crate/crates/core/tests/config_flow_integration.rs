//! Cross-checks of the JSON config path against the builtin registry:
//! a custom problem given by expression strings must reproduce the
//! builtin dynamics, classification and spectra.

use shiftspec_core::classify::{classify_point, ClassificationConfig, PhaseClass};
use shiftspec_core::flow::{advance_flow, exit_time, FlowConfig};
use shiftspec_core::sampling::seeded_rng;
use shiftspec_core::{builtin, ProblemConfig};

use rand::Rng;

#[test]
fn custom_rotation_reproduces_builtin_flow() {
    let custom = ProblemConfig::from_json(
        r#"{"custom": {
            "dimension": 2,
            "field": ["-x1", "x0"],
            "h": "0",
            "domain": {"all": true},
            "p": 2.0,
            "kappa": 1.0,
            "sample_box": [[-2.0, 2.0], [-2.0, 2.0]]
        }}"#,
    )
    .unwrap()
    .build()
    .unwrap();
    let reference = builtin("rotation", &serde_json::Map::new()).unwrap();
    let cfg = FlowConfig::default();
    let mut rng = seeded_rng(5);
    for _ in 0..20 {
        let x = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        let t = rng.random_range(-4.0..4.0);
        let a = advance_flow(&custom, &x, t, &cfg).unwrap();
        let b = advance_flow(&reference, &x, t, &cfg).unwrap();
        assert!(a.is_ok() && b.is_ok());
        for (ca, cb) in a.endpoint.iter().zip(&b.endpoint) {
            assert!((ca - cb).abs() < 1e-9, "{ca} vs {cb}");
        }
        assert!((a.int_nu - b.int_nu).abs() < 1e-9);
    }
}

#[test]
fn custom_slab_reproduces_builtin_exit_times() {
    let custom = ProblemConfig::from_json(
        r#"{"custom": {
            "dimension": 1,
            "field": ["1"],
            "h": "0.4",
            "domain": {"box": [[0.0, 1.0]]},
            "p": 2.0,
            "kappa": 1.0
        }}"#,
    )
    .unwrap()
    .build()
    .unwrap();
    let cfg = FlowConfig::default();
    for x in [0.1, 0.33, 0.77] {
        let et = exit_time(&custom, &[x], 5.0, &cfg).unwrap();
        assert!((et.tau_minus.exact().unwrap() - x).abs() < 2e-9);
        assert!((et.tau_plus.exact().unwrap() - (1.0 - x)).abs() < 2e-9);
    }
}

#[test]
fn custom_vander_pol_style_field_classifies_periodic() {
    // a nonlinear, non-builtin field with a known limit-cycle structure:
    // the classifier must find a period without any closed form
    let custom = ProblemConfig::from_json(
        r#"{"custom": {
            "dimension": 2,
            "field": ["x1", "-x0 + 0.5*(1 - x0^2)*x1"],
            "h": "0",
            "domain": {"all": true},
            "p": 2.0,
            "kappa": 4.0,
            "sample_box": [[-2.0, 2.0], [-2.0, 2.0]]
        }}"#,
    )
    .unwrap()
    .build()
    .unwrap();
    // points relax to the limit cycle, so classify a point after a long
    // settle-in flow
    let cfg = FlowConfig::default();
    let settled = advance_flow(&custom, &[1.0, 0.5], 60.0, &cfg).unwrap();
    assert!(settled.is_ok());
    let class_cfg = ClassificationConfig::with_horizon(40.0);
    // relax return tolerance: the settled point is close to, not on, the cycle
    let mut loose = class_cfg.clone();
    loose.return_tol = 1e-4;
    let c = classify_point(&custom, &settled.endpoint, &loose).unwrap();
    match c.class {
        PhaseClass::Omega3Periodic { prime_period } => {
            // the mu = 0.5 oscillator has its cycle period slightly above 2 pi
            let two_pi = 2.0 * std::f64::consts::PI;
            assert!(
                prime_period > two_pi - 0.01 && prime_period < 7.2,
                "period {prime_period}"
            );
        }
        other => panic!("expected a periodic classification, got {other:?}"),
    }
}

#[test]
fn nordstrom_exit_times_finite_for_nonzero_momentum() {
    // convex potential: every trajectory with nonzero momentum leaves
    let prob = builtin("nordstrom", &serde_json::Map::new()).unwrap();
    let cfg = FlowConfig::default();
    let mut rng = seeded_rng(11);
    for _ in 0..10 {
        let x = [rng.random_range(0.05..0.95), rng.random_range(0.3..2.0)];
        let et = exit_time(&prob, &x, 60.0, &cfg).unwrap();
        assert!(
            et.tau_plus.exact().is_some() && et.tau_minus.exact().is_some(),
            "censored stay time at {x:?}"
        );
    }
}

#[test]
fn gradient_flow_classifies_infinite_and_rest() {
    let prob = builtin("gradient", &serde_json::Map::new()).unwrap();
    let cfg = ClassificationConfig::with_horizon(30.0);
    let moving = classify_point(&prob, &[0.8], &cfg).unwrap();
    assert_eq!(moving.class, PhaseClass::Omega3Infinite);
    let origin = classify_point(&prob, &[0.0], &cfg).unwrap();
    assert_eq!(origin.class, PhaseClass::Omega3Rest);
}
