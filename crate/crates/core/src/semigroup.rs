//! Evaluation of the weighted-shift semigroup and its dual.
//!
//! `U(t)` acts by pullback along the backward characteristic:
//! `exp[-int_0^t nu(Phi(x,-s)) ds] f(Phi(x,-t))` while the backward
//! trajectory stays in the domain, and 0 once it has left. Everything is
//! computed along characteristics, never by discretizing the transport
//! equation, so grid error enters only through interpolation of stored
//! grid data.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::classify::{ClassifiedPoint, PhaseClass};
use crate::flow::{advance_flow, FlowConfig, FlowError, FlowStatus};
use crate::linalg::dist;
use crate::problem::Problem;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SemigroupError {
    #[error("semigroup time must be nonnegative (got {0})")]
    NegativeTime(f64),
    #[error("indeterminate value: integration failed at |t| = {at}")]
    Indeterminate { at: f64 },
    #[error("grid construction: {0}")]
    Grid(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Anything evaluable at a phase-space point. Implemented by closures and
/// by [`GridFunction`] (nearest-neighbor lookup).
pub trait SampledFunction: Sync {
    fn value(&self, x: &[f64]) -> Complex64;
}

impl<F> SampledFunction for F
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    fn value(&self, x: &[f64]) -> Complex64 {
        self(x)
    }
}

/// Discrete surrogate for a function in `L^p`: sample points, complex
/// values and positive quadrature weights.
#[derive(Debug, Clone)]
pub struct GridFunction {
    points: Vec<Vec<f64>>,
    values: Vec<Complex64>,
    weights: Vec<f64>,
    p: f64,
}

impl GridFunction {
    // negated comparisons below deliberately reject NaN inputs
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(
        points: Vec<Vec<f64>>,
        values: Vec<Complex64>,
        weights: Vec<f64>,
        p: f64,
    ) -> Result<Self, SemigroupError> {
        if points.len() != values.len() || points.len() != weights.len() {
            return Err(SemigroupError::Grid(format!(
                "length mismatch: {} points, {} values, {} weights",
                points.len(),
                values.len(),
                weights.len()
            )));
        }
        if !(p >= 1.0) {
            return Err(SemigroupError::Grid(format!("p must be >= 1, got {p}")));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(SemigroupError::Grid("weights must be positive".into()));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(SemigroupError::Grid(
                "values must be finite for the norm to exist".into(),
            ));
        }
        Ok(GridFunction {
            points,
            values,
            weights,
            p,
        })
    }

    pub fn from_callable(
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        p: f64,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self, SemigroupError> {
        let values = points.iter().map(|x| f(x)).collect();
        GridFunction::new(points, values, weights, p)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(sum_i w_i |f_i|^p)^(1/p)`.
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm().powf(self.p))
            .sum::<f64>()
            .powf(1.0 / self.p)
    }

    /// Nearest-neighbor interpolation; O(mesh) accurate for Lipschitz
    /// data, which keeps callable-backed grids the sharp option for norm
    /// tests.
    pub fn nearest_value(&self, x: &[f64]) -> Complex64 {
        let mut best = Complex64::ZERO;
        let mut best_dist = f64::INFINITY;
        for (p, v) in self.points.iter().zip(&self.values) {
            let d = dist(p, x);
            if d < best_dist {
                best_dist = d;
                best = *v;
            }
        }
        best
    }

    /// Pairing `sum_i w_i f_i conj(g_i)` on a shared grid.
    pub fn pair(&self, other: &GridFunction) -> Complex64 {
        self.weights
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (f, g))| w * f * g.conj())
            .sum()
    }
}

impl SampledFunction for GridFunction {
    fn value(&self, x: &[f64]) -> Complex64 {
        self.nearest_value(x)
    }
}

/// One pointwise semigroup evaluation.
#[derive(Debug, Clone, Copy)]
pub struct UValue {
    pub value: Complex64,
    /// Exponential weight applied to the pullback (0 when cut off).
    pub weight: f64,
    /// The backward trajectory left the domain before `t`, so the
    /// indicator annihilated the value.
    pub cutoff: bool,
    /// The exit time sits within `2 t_tol` of `t`; norm statistics
    /// exclude such points.
    pub ambiguous: bool,
}

/// `U(t) f` at `x`: attenuated pullback along the backward flow, zero
/// from the first backward exit on.
pub fn apply_u(
    problem: &Problem,
    f: &dyn SampledFunction,
    t: f64,
    x: &[f64],
    cfg: &FlowConfig,
) -> Result<UValue, SemigroupError> {
    if t < 0.0 {
        return Err(SemigroupError::NegativeTime(t));
    }
    let flow = advance_flow(problem, x, -t, cfg)?;
    match flow.status {
        FlowStatus::Ok => {
            let weight = (-flow.int_nu).exp();
            Ok(UValue {
                value: weight * f.value(&flow.endpoint),
                weight,
                cutoff: false,
                ambiguous: false,
            })
        }
        FlowStatus::LeftDomain { t_exit } => Ok(UValue {
            value: Complex64::ZERO,
            weight: 0.0,
            cutoff: true,
            ambiguous: (t - t_exit).abs() <= 2.0 * cfg.t_tol,
        }),
        FlowStatus::StepFailure { at, .. } => Err(SemigroupError::Indeterminate { at }),
    }
}

/// Dual action `exp[-int_0^t h(Phi(x,s)) ds] g(Phi(x,t))` along the
/// forward flow. Domain exits before `t` cut the value off exactly as in
/// the primal case.
pub fn apply_u_dual(
    problem: &Problem,
    g: &dyn SampledFunction,
    t: f64,
    x: &[f64],
    cfg: &FlowConfig,
) -> Result<UValue, SemigroupError> {
    if t < 0.0 {
        return Err(SemigroupError::NegativeTime(t));
    }
    let flow = advance_flow(problem, x, t, cfg)?;
    match flow.status {
        FlowStatus::Ok => {
            // int_nu - int_div = int h
            let int_h = flow.int_nu - flow.int_div;
            let weight = (-int_h).exp();
            Ok(UValue {
                value: weight * g.value(&flow.endpoint),
                weight,
                cutoff: false,
                ambiguous: false,
            })
        }
        FlowStatus::LeftDomain { t_exit } => Ok(UValue {
            value: Complex64::ZERO,
            weight: 0.0,
            cutoff: true,
            ambiguous: (t - t_exit).abs() <= 2.0 * cfg.t_tol,
        }),
        FlowStatus::StepFailure { at, .. } => Err(SemigroupError::Indeterminate { at }),
    }
}

/// Apply `U(t)` to a function over all points of a grid template,
/// producing a new grid function on the same points and weights.
pub fn apply_u_grid(
    problem: &Problem,
    f: &(dyn SampledFunction + Sync),
    t: f64,
    template: &GridFunction,
    cfg: &FlowConfig,
) -> Result<GridFunction, SemigroupError> {
    let values: Result<Vec<Complex64>, SemigroupError> = template
        .points()
        .par_iter()
        .map(|x| apply_u(problem, f, t, x, cfg).map(|u| u.value))
        .collect();
    GridFunction::new(
        template.points().to_vec(),
        values?,
        template.weights().to_vec(),
        template.p(),
    )
}

/// Which classified points participate in a norm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    Omega1,
    Omega2,
    Omega3,
    All,
}

impl ClassFilter {
    pub fn matches(&self, class: &PhaseClass) -> bool {
        match self {
            ClassFilter::Omega1 => matches!(class, PhaseClass::Omega1),
            ClassFilter::Omega2 => matches!(class, PhaseClass::Omega2),
            ClassFilter::Omega3 => class.is_omega3(),
            ClassFilter::All => true,
        }
    }
}

/// Sampled lower bound for the operator norm at one time.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    /// `None` means the admissible set was empty, the norm-zero signal of
    /// the nilpotent regime.
    pub value: Option<f64>,
    pub admissible: usize,
    pub ambiguous_excluded: usize,
}

impl NormEstimate {
    pub fn value_or_zero(&self) -> f64 {
        self.value.unwrap_or(0.0)
    }
}

/// Norm of `U(t)` restricted to a phase class, estimated from below by
/// `max exp[-int_0^t Sigma_p(Phi(y,r)) dr]` over the sampled points `y`
/// with `t < tau_plus(y)`. Points whose forward exit time sits within
/// `2 t_tol` of `t` are excluded as ambiguous.
pub fn operator_norm_estimate(
    problem: &Problem,
    t: f64,
    filter: ClassFilter,
    sample: &[ClassifiedPoint],
    cfg: &FlowConfig,
) -> Result<NormEstimate, SemigroupError> {
    if t < 0.0 {
        return Err(SemigroupError::NegativeTime(t));
    }
    #[derive(Clone, Copy)]
    enum PointOutcome {
        Weight(f64),
        Ambiguous,
        Skip,
    }
    let outcomes: Result<Vec<PointOutcome>, SemigroupError> = sample
        .par_iter()
        .map(|point| {
            if !filter.matches(&point.class) {
                return Ok(PointOutcome::Skip);
            }
            let tau_plus = point.tau_plus.value_or_inf();
            if (tau_plus - t).abs() <= 2.0 * cfg.t_tol {
                return Ok(PointOutcome::Ambiguous);
            }
            if tau_plus <= t {
                return Ok(PointOutcome::Skip);
            }
            let flow = advance_flow(problem, &point.x, t, cfg)?;
            match flow.status {
                FlowStatus::Ok => Ok(PointOutcome::Weight((-flow.int_sigma_p).exp())),
                // stored tau_plus said the point was admissible; treat the
                // contradiction as boundary ambiguity
                FlowStatus::LeftDomain { .. } => Ok(PointOutcome::Ambiguous),
                FlowStatus::StepFailure { at, .. } => Err(SemigroupError::Indeterminate { at }),
            }
        })
        .collect();
    let mut best: Option<f64> = None;
    let mut admissible = 0;
    let mut ambiguous = 0;
    for outcome in outcomes? {
        match outcome {
            PointOutcome::Weight(w) => {
                admissible += 1;
                best = Some(best.map_or(w, |b: f64| b.max(w)));
            }
            PointOutcome::Ambiguous => ambiguous += 1,
            PointOutcome::Skip => {}
        }
    }
    Ok(NormEstimate {
        value: best,
        admissible,
        ambiguous_excluded: ambiguous,
    })
}

/// Result of checking the additive time relation `alpha(Phi(x,-t)) =
/// alpha(x) - t` over a sample; `alpha` plays the role of a time
/// coordinate that the backward flow rewinds.
#[derive(Debug, Clone, Copy)]
pub struct CocycleReport {
    pub max_residual: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Max residual `|alpha(Phi(x,-t)) - alpha(x) + t|` over sample points
/// and times with `t < tau_minus(x)`; pairs whose backward trajectory
/// exits before `t` are skipped.
pub fn verify_alpha_cocycle(
    problem: &Problem,
    alpha: &(dyn Fn(&[f64]) -> f64 + Sync),
    sample: &[Vec<f64>],
    t_list: &[f64],
    cfg: &FlowConfig,
) -> Result<CocycleReport, SemigroupError> {
    let mut max_residual = 0.0_f64;
    let mut evaluated = 0;
    let mut skipped = 0;
    for x in sample {
        let base = alpha(x);
        if !base.is_finite() {
            skipped += t_list.len();
            continue;
        }
        for &t in t_list {
            let flow = advance_flow(problem, x, -t, cfg)?;
            match flow.status {
                FlowStatus::Ok => {
                    let residual = (alpha(&flow.endpoint) - base + t).abs();
                    max_residual = max_residual.max(residual);
                    evaluated += 1;
                }
                FlowStatus::LeftDomain { .. } => skipped += 1,
                FlowStatus::StepFailure { at, .. } => {
                    return Err(SemigroupError::Indeterminate { at })
                }
            }
        }
    }
    Ok(CocycleReport {
        max_residual,
        evaluated,
        skipped,
    })
}

/// Max pointwise residual of the multiplication-operator intertwining
/// `M_eta^{-1} U(t) M_eta = e^{i eta t} U(t)` with
/// `(M_eta f)(x) = e^{-i eta alpha(x)} f(x)`, over the sample.
pub fn intertwining_residual(
    problem: &Problem,
    alpha: &(dyn Fn(&[f64]) -> f64 + Sync),
    f: &dyn SampledFunction,
    eta: f64,
    t: f64,
    sample: &[Vec<f64>],
    cfg: &FlowConfig,
) -> Result<f64, SemigroupError> {
    let modulated =
        |y: &[f64]| -> Complex64 { (Complex64::new(0.0, -eta * alpha(y))).exp() * f.value(y) };
    let phase = Complex64::new(0.0, eta * t).exp();
    let mut worst = 0.0_f64;
    for x in sample {
        let direct = apply_u(problem, f, t, x, cfg)?;
        let shifted = apply_u(problem, &modulated, t, x, cfg)?;
        let lhs = Complex64::new(0.0, eta * alpha(x)).exp() * shifted.value;
        let rhs = phase * direct.value;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// CSV rows `x..., re, im` of a semigroup application over a grid.
pub fn write_u_csv<W: std::io::Write>(
    grid: &GridFunction,
    dimension: usize,
    out: &mut W,
) -> std::io::Result<()> {
    for i in 0..dimension {
        write!(out, "x{i},")?;
    }
    writeln!(out, "re,im")?;
    for (x, v) in grid.points().iter().zip(grid.values()) {
        for c in x {
            write!(out, "{c:.12e},")?;
        }
        writeln!(out, "{:.12e},{:.12e}", v.re, v.im)?;
    }
    Ok(())
}
