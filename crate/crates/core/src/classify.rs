//! Phase-space classification by exit-time finiteness.
//!
//! A point goes to `Omega1` when its forward stay time is finite, to
//! `Omega2` when only the backward one is, and otherwise to the global
//! component, which splits into rest points, periodic orbits (with their
//! prime period) and infinite aperiodic orbits. Infinity is only
//! semi-decidable here: raw results carry "censored at horizon" tags, and
//! the censored-to-infinite promotion happens exactly when the horizon
//! reaches the configured confidence horizon.

use rayon::prelude::*;
use serde::Serialize;

use crate::flow::{advance_flow, exit_time, FlowConfig, FlowError, Tau};
use crate::linalg::{dist, norm};
use crate::problem::{Problem, ProblemError};

/// Why a point could not be fully classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CensorReason {
    /// Horizon smaller than the configured confidence horizon.
    Horizon,
    /// The integrator gave up along one of the probes.
    StepFailure,
}

/// Classification tag. Periodic points carry the refined prime period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PhaseClass {
    Omega1,
    Omega2,
    Omega3Rest,
    Omega3Periodic { prime_period: f64 },
    Omega3Infinite,
    Censored { reason: CensorReason },
}

impl PhaseClass {
    pub fn label(&self) -> &'static str {
        match self {
            PhaseClass::Omega1 => "omega1",
            PhaseClass::Omega2 => "omega2",
            PhaseClass::Omega3Rest => "omega3_rest",
            PhaseClass::Omega3Periodic { .. } => "omega3_periodic",
            PhaseClass::Omega3Infinite => "omega3_infinite",
            PhaseClass::Censored { .. } => "censored",
        }
    }

    pub fn is_omega3(&self) -> bool {
        matches!(
            self,
            PhaseClass::Omega3Rest | PhaseClass::Omega3Periodic { .. } | PhaseClass::Omega3Infinite
        )
    }
}

/// Tolerances for classification and period detection.
#[derive(Debug, Clone)]
pub struct ClassificationConfig {
    /// Exit-time integration horizon. At least `4 pi / kappa` is needed
    /// to see one full candidate period plus slack.
    pub horizon: f64,
    /// Censored returns and exit times are promoted to "infinite" only
    /// when `horizon >= confidence_horizon`.
    pub confidence_horizon: f64,
    /// Rest detection: `|F(x)| <= rest_tol * (1 + |x|)`.
    pub rest_tol: f64,
    /// Return detection: refined minimum of `|Phi(x,s) - x|` must come
    /// below `return_tol * (1 + |x|)`.
    pub return_tol: f64,
    /// Width to which the golden-section refinement shrinks the period
    /// bracket.
    pub period_refine_tol: f64,
    /// Slack allowed on the `2 pi / kappa` period lower bound.
    pub period_tol: f64,
    pub flow: FlowConfig,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            horizon: 50.0,
            confidence_horizon: 50.0,
            rest_tol: 1e-10,
            return_tol: 1e-6,
            period_refine_tol: 1e-8,
            period_tol: 1e-6,
            flow: FlowConfig::default(),
        }
    }
}

impl ClassificationConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        ClassificationConfig {
            horizon,
            confidence_horizon: horizon,
            ..ClassificationConfig::default()
        }
    }
}

/// One classified point with its raw exit-time data.
#[derive(Debug, Clone)]
pub struct ClassifiedPoint {
    pub x: Vec<f64>,
    pub class: PhaseClass,
    pub tau_minus: Tau,
    pub tau_plus: Tau,
}

impl ClassifiedPoint {
    pub fn prime_period(&self) -> Option<f64> {
        match self.class {
            PhaseClass::Omega3Periodic { prime_period } => Some(prime_period),
            _ => None,
        }
    }
}

/// Outcome of a first-return search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodSearch {
    Found {
        prime_period: f64,
        /// Refined minimum of `|Phi(x,s) - x|` at the period.
        min_distance: f64,
    },
    /// No return below the tolerance within the horizon.
    NoReturn,
}

/// First-return time of the forward orbit through `x`, from the first
/// local minimum of `s -> |Phi(x,s) - x|` that drops below the return
/// tolerance at or beyond the Yorke floor `2 pi / kappa`. Minima are
/// bracketed on a grid of spacing `pi / (4 kappa)` (the floor guarantees
/// no period hides below four grid cells) and refined by golden-section
/// minimization.
pub fn estimate_prime_period(
    problem: &Problem,
    x: &[f64],
    cfg: &ClassificationConfig,
) -> Result<PeriodSearch, ProblemError> {
    let kappa = problem.field().kappa();
    search_prime_period(problem, x, kappa, cfg)
}

/// Same search with an explicit Lipschitz constant for the Yorke floor;
/// verification drills pass a sampled estimate here to cross-check a
/// declared constant.
pub fn search_prime_period(
    problem: &Problem,
    x: &[f64],
    kappa: f64,
    cfg: &ClassificationConfig,
) -> Result<PeriodSearch, ProblemError> {
    if !problem.domain().contains(x) {
        return Err(ProblemError::OutsideDomain);
    }
    let floor = (2.0 * std::f64::consts::PI / kappa) * (1.0 - 1e-3);
    let spacing = std::f64::consts::PI / (4.0 * kappa);
    let tol = cfg.return_tol * (1.0 + norm(x));

    let probe = |s: f64| -> Option<f64> {
        match advance_flow(problem, x, s, &cfg.flow) {
            Ok(r) if r.is_ok() => Some(dist(&r.endpoint, x)),
            _ => None,
        }
    };

    // sample |Phi(x, s) - x| along the forward orbit on the dense grid
    let n_nodes = (cfg.horizon / spacing).floor() as usize;
    if n_nodes < 3 {
        return Ok(PeriodSearch::NoReturn);
    }
    let mut distances = Vec::with_capacity(n_nodes + 1);
    distances.push(0.0); // s = 0
    let mut endpoint = x.to_vec();
    for _ in 1..=n_nodes {
        match advance_flow(problem, &endpoint, spacing, &cfg.flow) {
            Ok(r) if r.is_ok() => {
                endpoint = r.endpoint;
                distances.push(dist(&endpoint, x));
            }
            _ => break,
        }
    }

    for k in 1..distances.len().saturating_sub(1) {
        let s_k = k as f64 * spacing;
        if s_k < floor - spacing {
            continue;
        }
        if !(distances[k] <= distances[k - 1] && distances[k] <= distances[k + 1]) {
            continue;
        }
        let lo = (k - 1) as f64 * spacing;
        let hi = (k + 1) as f64 * spacing;
        let Some((s_min, d_min)) = golden_min(&probe, lo, hi, cfg.period_refine_tol) else {
            continue;
        };
        if d_min <= tol && s_min >= floor - cfg.period_tol {
            return Ok(PeriodSearch::Found {
                prime_period: s_min,
                min_distance: d_min,
            });
        }
    }
    Ok(PeriodSearch::NoReturn)
}

/// Golden-section minimization of a unimodal function on `[a, b]` down to
/// a bracket of width `tol`. Returns `None` if any probe fails.
fn golden_min(f: &dyn Fn(f64) -> Option<f64>, a: f64, b: f64, tol: f64) -> Option<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut lo = a;
    let mut hi = b;
    let mut m1 = hi - INV_PHI * (hi - lo);
    let mut m2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(m1)?;
    let mut f2 = f(m2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - INV_PHI * (hi - lo);
            f1 = f(m1)?;
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + INV_PHI * (hi - lo);
            f2 = f(m2)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid)?;
    Some((mid, fm))
}

/// Classify a single point. Integration failures surface as
/// `Censored(StepFailure)`, never as panics or hard errors.
pub fn classify_point(
    problem: &Problem,
    x: &[f64],
    cfg: &ClassificationConfig,
) -> Result<ClassifiedPoint, ProblemError> {
    if !problem.domain().contains(x) {
        return Err(ProblemError::OutsideDomain);
    }
    let times = match exit_time(problem, x, cfg.horizon, &cfg.flow) {
        Ok(t) => t,
        Err(FlowError::StepFailure { .. }) => {
            return Ok(ClassifiedPoint {
                x: x.to_vec(),
                class: PhaseClass::Censored {
                    reason: CensorReason::StepFailure,
                },
                tau_minus: Tau::CensoredAt(cfg.horizon),
                tau_plus: Tau::CensoredAt(cfg.horizon),
            })
        }
        Err(FlowError::OutsideDomain) => return Err(ProblemError::OutsideDomain),
        Err(FlowError::LeftDomain { .. }) => unreachable!("exit_time reports exits as Tau"),
    };

    let class = match (times.tau_plus, times.tau_minus) {
        (Tau::Exact(_), _) => PhaseClass::Omega1,
        (Tau::CensoredAt(_), Tau::Exact(_)) => PhaseClass::Omega2,
        (Tau::CensoredAt(_), Tau::CensoredAt(_)) => {
            let speed = norm(&problem.field().eval(x));
            if speed <= cfg.rest_tol * (1.0 + norm(x)) {
                PhaseClass::Omega3Rest
            } else {
                match estimate_prime_period(problem, x, cfg)? {
                    PeriodSearch::Found { prime_period, .. } => {
                        PhaseClass::Omega3Periodic { prime_period }
                    }
                    PeriodSearch::NoReturn => {
                        if cfg.horizon >= cfg.confidence_horizon {
                            PhaseClass::Omega3Infinite
                        } else {
                            PhaseClass::Censored {
                                reason: CensorReason::Horizon,
                            }
                        }
                    }
                }
            }
        }
    };
    Ok(ClassifiedPoint {
        x: x.to_vec(),
        class,
        tau_minus: times.tau_minus,
        tau_plus: times.tau_plus,
    })
}

/// Per-class counts of a classified sample.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct ClassCounts {
    pub omega1: usize,
    pub omega2: usize,
    pub rest: usize,
    pub periodic: usize,
    pub infinite: usize,
    pub censored: usize,
}

/// Empirical partition of a point sample, the desk-scale surrogate for
/// the measure-theoretic hypotheses of the spectral statements.
#[derive(Debug, Clone)]
pub struct PartitionStats {
    pub points: Vec<ClassifiedPoint>,
    pub counts: ClassCounts,
    /// Largest prime period seen. Sampling can never certify that the
    /// period is bounded over the whole periodic set, so consumers treat
    /// this as an empirical value with the boundedness hypothesis
    /// unverified.
    pub max_period: Option<f64>,
    pub min_period: Option<f64>,
}

impl PartitionStats {
    pub fn total(&self) -> usize {
        self.points.len()
    }

    pub fn fraction(&self, count: usize) -> f64 {
        if self.points.is_empty() {
            0.0
        } else {
            count as f64 / self.points.len() as f64
        }
    }

    pub fn omega3_fraction(&self) -> f64 {
        self.fraction(self.counts.rest + self.counts.periodic + self.counts.infinite)
    }

    /// Points matching a class predicate, borrowed in sample order.
    pub fn of_class(&self, pred: impl Fn(&PhaseClass) -> bool) -> Vec<&ClassifiedPoint> {
        self.points.iter().filter(|p| pred(&p.class)).collect()
    }
}

/// Classify a batch of points in parallel with deterministic ordering.
pub fn classify_sample(
    problem: &Problem,
    points: &[Vec<f64>],
    cfg: &ClassificationConfig,
) -> Result<PartitionStats, ProblemError> {
    let classified: Result<Vec<ClassifiedPoint>, ProblemError> = points
        .par_iter()
        .map(|x| classify_point(problem, x, cfg))
        .collect();
    let points = classified?;
    let mut counts = ClassCounts::default();
    let mut max_period: Option<f64> = None;
    let mut min_period: Option<f64> = None;
    for p in &points {
        match &p.class {
            PhaseClass::Omega1 => counts.omega1 += 1,
            PhaseClass::Omega2 => counts.omega2 += 1,
            PhaseClass::Omega3Rest => counts.rest += 1,
            PhaseClass::Omega3Periodic { prime_period } => {
                counts.periodic += 1;
                max_period = Some(max_period.map_or(*prime_period, |m| m.max(*prime_period)));
                min_period = Some(min_period.map_or(*prime_period, |m| m.min(*prime_period)));
            }
            PhaseClass::Omega3Infinite => counts.infinite += 1,
            PhaseClass::Censored { .. } => counts.censored += 1,
        }
    }
    Ok(PartitionStats {
        points,
        counts,
        max_period,
        min_period,
    })
}

/// Write one CSV row per classified point:
/// `x..., tag, tau_minus, tau_plus, prime_period` with empty fields for
/// censored exit times and non-periodic points.
pub fn write_classification_csv<W: std::io::Write>(
    stats: &PartitionStats,
    dimension: usize,
    out: &mut W,
) -> std::io::Result<()> {
    for i in 0..dimension {
        write!(out, "x{i},")?;
    }
    writeln!(out, "tag,tau_minus,tau_plus,prime_period")?;
    for p in &stats.points {
        for c in &p.x {
            write!(out, "{c:.12e},")?;
        }
        let tau_str = |t: &Tau| match t {
            Tau::Exact(v) => format!("{v:.12e}"),
            Tau::CensoredAt(_) => String::new(),
        };
        let period = p
            .prime_period()
            .map(|v| format!("{v:.12e}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            p.class.label(),
            tau_str(&p.tau_minus),
            tau_str(&p.tau_plus),
            period
        )?;
    }
    Ok(())
}
