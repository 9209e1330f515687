//! Residual suites cross-checking the numerical machinery against
//! structural identities of the flow and the semigroup.
//!
//! Each check reports a residual and its tolerance; a nonzero exit of the
//! CLI `verify` subcommand means some suite exceeded tolerance. The
//! volume-distortion check deliberately uses a separate fixed-step
//! integrator for the scalar variational equation, so the two routes to
//! the same quantity share no code.

use rand::Rng;
use serde::Serialize;

use crate::classify::{
    classify_sample, search_prime_period, ClassificationConfig, PartitionStats, PeriodSearch,
    PhaseClass,
};
use crate::flow::{advance_flow, exit_time, Tau};
use crate::linalg::{dist, norm};
use crate::problem::{estimate_lipschitz, Problem, ProblemError};
use crate::sampling::{sample_domain, seeded_rng};
use crate::semigroup::verify_alpha_cocycle;

/// One residual check. `warning` rows never fail the run; they record
/// data-integrity observations (e.g. sampled absorption below the
/// declared bound).
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub warning: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, residual: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            residual,
            tolerance,
            passed: residual <= tolerance,
            warning: false,
            detail,
        }
    }

    fn warning(name: &str, residual: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            residual,
            tolerance,
            passed: true,
            warning: residual > tolerance,
            detail,
        }
    }

    fn vacuous(name: &str, detail: &str) -> Self {
        CheckResult {
            name: name.to_string(),
            residual: 0.0,
            tolerance: 0.0,
            passed: true,
            warning: false,
            detail: format!("vacuous: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerificationReport {
    fn from_checks(checks: Vec<CheckResult>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        VerificationReport { checks, passed }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.passed = self.passed && check.passed;
        self.checks.push(check);
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: usize,
    pub classification: ClassificationConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 1,
            samples: 40,
            classification: ClassificationConfig::with_horizon(40.0),
        }
    }
}

/// Fixed-step classic RK4 on the joint system `(X, J)` with
/// `J' = div F(X) J`: the independent route to the volume distortion.
fn reference_flow_with_jacobian(
    problem: &Problem,
    x: &[f64],
    t: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let dim = problem.dimension();
    let h = t / steps as f64;
    let mut state: Vec<f64> = x.to_vec();
    state.push(1.0); // J
    let rhs = |s: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim + 1];
        problem.field().eval_into(&s[..dim], &mut out[..dim]);
        out[dim] = problem.field().divergence(&s[..dim]) * s[dim];
        out
    };
    for _ in 0..steps {
        let k1 = rhs(&state);
        let s2: Vec<f64> = state
            .iter()
            .zip(&k1)
            .map(|(y, k)| y + 0.5 * h * k)
            .collect();
        let k2 = rhs(&s2);
        let s3: Vec<f64> = state
            .iter()
            .zip(&k2)
            .map(|(y, k)| y + 0.5 * h * k)
            .collect();
        let k3 = rhs(&s3);
        let s4: Vec<f64> = state.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
        let k4 = rhs(&s4);
        for (i, y) in state.iter_mut().enumerate() {
            *y += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let jacobian = state.pop().unwrap();
    (state, jacobian)
}

/// Clamp `value` into the open interval `(lo, hi)` shrunk by `margin`.
fn clamp_into(value: f64, lo: f64, hi: f64, margin: f64) -> Option<f64> {
    let (a, b) = (lo + margin, hi - margin);
    if a >= b {
        return None;
    }
    Some(value.clamp(a, b))
}

fn stay_interval(point: &crate::classify::ClassifiedPoint) -> (f64, f64) {
    (
        -point.tau_minus.value_or_inf(),
        point.tau_plus.value_or_inf(),
    )
}

/// Field-level checks: finite-difference divergence against the declared
/// one, sampled Lipschitz quotients against the declared constant, and
/// the absorption lower bound (warning only).
pub fn field_suite(
    problem: &Problem,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>, ProblemError> {
    let mut rng = seeded_rng(cfg.seed ^ 0x5EED_F1E1);
    let points = sample_domain(problem, None, cfg.samples.max(20), &mut rng)?;
    let mut checks = Vec::new();

    let mut worst_div = 0.0_f64;
    for x in &points {
        let analytic = problem.field().divergence(x);
        let fd = problem.field().divergence_fd(x);
        let step = crate::problem::VectorField::fd_step(x);
        worst_div = worst_div.max((analytic - fd).abs() / (10.0 * step * step + 1e-12));
    }
    checks.push(CheckResult::new(
        "divergence_fd_vs_declared",
        worst_div,
        1.0,
        format!("{} points, normalized by 10 dx^2", points.len()),
    ));

    let region = problem
        .sample_box()
        .map(<[[f64; 2]]>::to_vec)
        .unwrap_or_else(|| vec![[-1.0, 1.0]; problem.dimension()]);
    let estimate = estimate_lipschitz(problem, &region, 2000, &mut rng)?;
    let kappa = problem.field().kappa();
    checks.push(CheckResult::new(
        "lipschitz_declared_bound",
        estimate / kappa,
        1.0 + 1e-6,
        format!("sampled estimate {estimate:.6e} vs declared {kappa:.6e}"),
    ));

    let violations = problem.absorption_violations(&points);
    checks.push(CheckResult::warning(
        "absorption_lower_bound",
        violations.len() as f64,
        0.0,
        format!(
            "{} of {} sampled points fall below the declared h_inf",
            violations.len(),
            points.len()
        ),
    ));
    Ok(checks)
}

/// Flow-level checks: group law, Lipschitz growth, exit-time shift and
/// the volume-distortion oracle.
pub fn flow_suite(
    problem: &Problem,
    stats: &PartitionStats,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>, ProblemError> {
    let flow_cfg = &cfg.classification.flow;
    let mut rng = seeded_rng(cfg.seed ^ 0xF10F_F10F);
    let margin = 1e-3;
    let mut checks = Vec::new();

    // group law
    let mut group_residual = 0.0_f64;
    let mut group_count = 0usize;
    for point in &stats.points {
        let (lo, hi) = stay_interval(point);
        let Some(s1) = clamp_into(rng.random_range(-2.0..2.0), lo, hi, margin) else {
            continue;
        };
        let raw2 = rng.random_range(-2.0..2.0);
        let Some(sum) = clamp_into(s1 + raw2, lo, hi, margin) else {
            continue;
        };
        let s2 = sum - s1;
        let Ok(first) = advance_flow(problem, &point.x, s1, flow_cfg) else {
            continue;
        };
        if !first.is_ok() {
            continue;
        }
        let Ok(second) = advance_flow(problem, &first.endpoint, s2, flow_cfg) else {
            continue;
        };
        let Ok(direct) = advance_flow(problem, &point.x, s1 + s2, flow_cfg) else {
            continue;
        };
        if !second.is_ok() || !direct.is_ok() {
            continue;
        }
        let residual = dist(&second.endpoint, &direct.endpoint) / (1.0 + norm(&point.x));
        group_residual = group_residual.max(residual);
        group_count += 1;
    }
    checks.push(if group_count == 0 {
        CheckResult::vacuous("flow_group_law", "no interior trajectory segments sampled")
    } else {
        CheckResult::new(
            "flow_group_law",
            group_residual,
            1e-7,
            format!("{group_count} composed trajectories"),
        )
    });

    // Lipschitz growth of trajectory separation
    let kappa = problem.field().kappa();
    let mut growth_ratio = 0.0_f64;
    let mut growth_count = 0usize;
    for pair in stats.points.chunks(2) {
        let [a, b] = pair else { continue };
        let gap = dist(&a.x, &b.x);
        if gap < 1e-10 {
            continue;
        }
        let (lo_a, hi_a) = stay_interval(a);
        let (lo_b, hi_b) = stay_interval(b);
        let Some(t) = clamp_into(
            rng.random_range(-2.0..2.0),
            lo_a.max(lo_b),
            hi_a.min(hi_b),
            margin,
        ) else {
            continue;
        };
        let (Ok(fa), Ok(fb)) = (
            advance_flow(problem, &a.x, t, flow_cfg),
            advance_flow(problem, &b.x, t, flow_cfg),
        ) else {
            continue;
        };
        if !fa.is_ok() || !fb.is_ok() {
            continue;
        }
        let bound = (kappa * t.abs()).exp() * gap;
        growth_ratio = growth_ratio.max(dist(&fa.endpoint, &fb.endpoint) / bound);
        growth_count += 1;
    }
    checks.push(if growth_count == 0 {
        CheckResult::vacuous("flow_lipschitz_growth", "no usable point pairs")
    } else {
        CheckResult::new(
            "flow_lipschitz_growth",
            growth_ratio,
            1.0 + 1e-6,
            format!("{growth_count} pairs, ratio to e^{{kappa|t|}} separation"),
        )
    });

    // exit-time shift along the backward flow
    let t_tol = flow_cfg.t_tol;
    let mut shift_residual = 0.0_f64;
    let mut shift_count = 0usize;
    for point in &stats.points {
        let (Tau::Exact(tau_minus), Tau::Exact(tau_plus)) = (point.tau_minus, point.tau_plus)
        else {
            continue;
        };
        let t = 0.5 * tau_minus;
        if t <= 10.0 * t_tol || tau_plus + t > cfg.classification.horizon * 0.9 {
            continue;
        }
        let Ok(pulled) = advance_flow(problem, &point.x, -t, flow_cfg) else {
            continue;
        };
        if !pulled.is_ok() {
            continue;
        }
        let Ok(there) = exit_time(
            problem,
            &pulled.endpoint,
            cfg.classification.horizon,
            flow_cfg,
        ) else {
            continue;
        };
        if let Tau::Exact(tp) = there.tau_plus {
            shift_residual = shift_residual.max((tp - (t + tau_plus)).abs());
        }
        if let Tau::Exact(tm) = there.tau_minus {
            shift_residual = shift_residual.max((tm - (tau_minus - t)).abs());
        }
        shift_count += 1;
    }
    checks.push(if shift_count == 0 {
        CheckResult::vacuous(
            "exit_time_shift",
            "no points with finite stay times in both directions",
        )
    } else {
        CheckResult::new(
            "exit_time_shift",
            shift_residual,
            2.0 * t_tol,
            format!("{shift_count} pulled-back points"),
        )
    });

    // volume distortion vs the variational-equation oracle
    let mut rn_residual = 0.0_f64;
    let mut rn_count = 0usize;
    for point in &stats.points {
        let (lo, hi) = stay_interval(point);
        let Some(t) = clamp_into(rng.random_range(0.2..1.0), lo, hi, margin) else {
            continue;
        };
        if t <= 0.0 {
            continue;
        }
        let Ok(flow) = advance_flow(problem, &point.x, t, flow_cfg) else {
            continue;
        };
        if !flow.is_ok() {
            continue;
        }
        let rn = flow.int_div.exp();
        let (_, oracle) = reference_flow_with_jacobian(problem, &point.x, t, 512);
        rn_residual = rn_residual.max((rn - oracle).abs() / oracle.abs().max(1e-300));
        rn_count += 1;
    }
    checks.push(if rn_count == 0 {
        CheckResult::vacuous("volume_distortion_oracle", "no forward segments sampled")
    } else {
        CheckResult::new(
            "volume_distortion_oracle",
            rn_residual,
            1e-6,
            format!("{rn_count} points vs fixed-step variational integration"),
        )
    });

    Ok(checks)
}

/// Period checks: search with a floor from the *sampled* Lipschitz
/// constant, then test the detected periods against the declared one.
/// A corrupted declaration fails here even though the production search
/// (which trusts the declaration) would simply find nothing.
pub fn yorke_suite(
    problem: &Problem,
    stats: &PartitionStats,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>, ProblemError> {
    let mut rng = seeded_rng(cfg.seed ^ 0x010C_BEE5);
    let region = problem
        .sample_box()
        .map(<[[f64; 2]]>::to_vec)
        .unwrap_or_else(|| vec![[-1.0, 1.0]; problem.dimension()]);
    let kappa_est = estimate_lipschitz(problem, &region, 2000, &mut rng)?.max(1e-9);
    let declared = problem.field().kappa();
    let floor_declared = 2.0 * std::f64::consts::PI / declared;

    let mut worst_gap = f64::NEG_INFINITY;
    let mut tested = 0usize;
    for point in stats
        .points
        .iter()
        .filter(|p| p.class.is_omega3() && !matches!(p.class, PhaseClass::Omega3Rest))
        .take(10)
    {
        let found = search_prime_period(problem, &point.x, kappa_est, &cfg.classification)?;
        if let PeriodSearch::Found { prime_period, .. } = found {
            worst_gap = worst_gap.max(floor_declared - prime_period);
            tested += 1;
        }
    }
    if tested == 0 {
        return Ok(vec![CheckResult::vacuous(
            "yorke_period_floor",
            "no periodic orbits detected",
        )]);
    }
    Ok(vec![CheckResult::new(
        "yorke_period_floor",
        worst_gap.max(0.0),
        cfg.classification.period_tol,
        format!("{tested} periodic points; declared kappa {declared:.4e}, sampled {kappa_est:.4e}"),
    )])
}

/// Cocycle checks: the class-specific time coordinates rewind by `t`
/// under the backward flow.
pub fn cocycle_suite(
    problem: &Problem,
    stats: &PartitionStats,
    cfg: &VerifyConfig,
) -> Result<Vec<CheckResult>, ProblemError> {
    let flow_cfg = cfg.classification.flow.clone();
    let horizon = cfg.classification.horizon;
    let t_tol = flow_cfg.t_tol;
    let mut checks = Vec::new();

    let omega1: Vec<Vec<f64>> = stats
        .points
        .iter()
        .filter(|p| matches!(p.class, PhaseClass::Omega1))
        .take(6)
        .map(|p| p.x.clone())
        .collect();
    if omega1.is_empty() {
        checks.push(CheckResult::vacuous(
            "cocycle_neg_tau_plus",
            "no finite-forward-exit points",
        ));
    } else {
        let fc = flow_cfg.clone();
        let alpha = move |x: &[f64]| -> f64 {
            exit_time(problem, x, horizon, &fc)
                .ok()
                .and_then(|et| et.tau_plus.exact())
                .map(|v| -v)
                .unwrap_or(f64::NAN)
        };
        let t_list: Vec<f64> = vec![0.05, 0.1, 0.2];
        let report = verify_alpha_cocycle(problem, &alpha, &omega1, &t_list, &flow_cfg)
            .map_err(|_| ProblemError::OutsideDomain)?;
        checks.push(if report.evaluated == 0 {
            CheckResult::vacuous("cocycle_neg_tau_plus", "all probes left the domain")
        } else {
            CheckResult::new(
                "cocycle_neg_tau_plus",
                report.max_residual,
                2.0 * t_tol,
                format!("{} evaluations", report.evaluated),
            )
        });
    }

    let omega2: Vec<Vec<f64>> = stats
        .points
        .iter()
        .filter(|p| matches!(p.class, PhaseClass::Omega2))
        .take(6)
        .map(|p| p.x.clone())
        .collect();
    if omega2.is_empty() {
        checks.push(CheckResult::vacuous(
            "cocycle_tau_minus",
            "no backward-escaping points",
        ));
    } else {
        let fc = flow_cfg.clone();
        let alpha = move |x: &[f64]| -> f64 {
            exit_time(problem, x, horizon, &fc)
                .ok()
                .and_then(|et| et.tau_minus.exact())
                .unwrap_or(f64::NAN)
        };
        let t_list: Vec<f64> = vec![0.05, 0.1, 0.2];
        let report = verify_alpha_cocycle(problem, &alpha, &omega2, &t_list, &flow_cfg)
            .map_err(|_| ProblemError::OutsideDomain)?;
        checks.push(if report.evaluated == 0 {
            CheckResult::vacuous("cocycle_tau_minus", "all probes left the domain")
        } else {
            CheckResult::new(
                "cocycle_tau_minus",
                report.max_residual,
                2.0 * t_tol,
                format!("{} evaluations", report.evaluated),
            )
        });
    }
    Ok(checks)
}

/// Residual of the integrated flow against an exact flow map over a
/// sample of points and times inside the stay interval.
pub fn closed_form_check(
    problem: &Problem,
    reference: &crate::builtins::ReferenceFlow,
    cfg: &VerifyConfig,
) -> Result<CheckResult, ProblemError> {
    let mut rng = seeded_rng(cfg.seed ^ 0xC105_EDF0);
    let points = sample_domain(problem, None, cfg.samples.clamp(5, 20), &mut rng)?;
    let flow_cfg = &cfg.classification.flow;
    let mut worst = 0.0_f64;
    let mut evaluated = 0usize;
    for x in &points {
        let t = rng.random_range(-3.0..3.0);
        let Ok(flow) = advance_flow(problem, x, t, flow_cfg) else {
            continue;
        };
        if !flow.is_ok() {
            continue;
        }
        let exact = reference(x, t);
        let residual = dist(&flow.endpoint, &exact) / (1.0 + norm(&exact));
        worst = worst.max(residual);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Ok(CheckResult::vacuous(
            "closed_form_reference",
            "every sampled trajectory left the domain",
        ));
    }
    Ok(CheckResult::new(
        "closed_form_reference",
        worst,
        1e-6,
        format!("{evaluated} trajectories against the exact flow map"),
    ))
}

/// Run every suite on a fresh sample of the problem.
pub fn run_verification(
    problem: &Problem,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, ProblemError> {
    let mut rng = seeded_rng(cfg.seed);
    let points = sample_domain(problem, None, cfg.samples, &mut rng)?;
    let stats = classify_sample(problem, &points, &cfg.classification)?;
    let mut checks = field_suite(problem, cfg)?;
    checks.extend(flow_suite(problem, &stats, cfg)?);
    checks.extend(yorke_suite(problem, &stats, cfg)?);
    checks.extend(cocycle_suite(problem, &stats, cfg)?);
    Ok(VerificationReport::from_checks(checks))
}
