//! Growth-constant estimation for the escaping phase-space components.
//!
//! The decay rate of the semigroup restricted to points with a finite
//! forward (resp. backward) stay time is the large-time limit of the
//! infimum over admissible points of the time-averaged attenuation
//! `Sigma_p` along the flow. At desk scale the limit is approximated by
//! the tail of the per-time infima over a finite sample, with explicit
//! admissible counts so estimator starvation stays visible.

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{ClassifiedPoint, PhaseClass};
use crate::flow::{advance_flow, FlowConfig, Tau};
use crate::problem::Problem;
use crate::semigroup::NormEstimate;
use crate::spectral_set::{Region, SpectralSet};

#[derive(Debug, Clone, thiserror::Error)]
pub enum GrowthError {
    #[error("no sample points in class {0}")]
    EmptyClass(&'static str),
    #[error("time grid must be positive and strictly increasing")]
    InvalidGrid,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(
        "sample has nonzero global-component fraction {omega3_fraction}; \
         compose with the rest/periodic/aperiodic spectra instead"
    )]
    CompositionRequired { omega3_fraction: f64 },
}

/// Direction of the trajectory integral in the time average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageDirection {
    Backward,
    Forward,
}

impl AverageDirection {
    fn sign(self) -> f64 {
        match self {
            AverageDirection::Backward => -1.0,
            AverageDirection::Forward => 1.0,
        }
    }
}

/// Per-time infima of averaged attenuation and their tail summary.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthEstimate {
    pub t_grid: Vec<f64>,
    /// Infimum over admissible sampled points of `t^{-1} int Sigma_p`;
    /// `+inf` when no sampled point is admissible at that time.
    pub inf_avg: Vec<f64>,
    pub admissible_counts: Vec<usize>,
    /// Average of the finite entries in the last quartile of `inf_avg`;
    /// `+inf` when the tail is fully starved (nilpotent regime).
    pub gamma_hat: f64,
    /// The whole tail quartile was starved.
    pub nilpotent: bool,
    /// Some tail entry was starved.
    pub censored: bool,
}

fn summarize(t_grid: Vec<f64>, inf_avg: Vec<f64>, counts: Vec<usize>) -> GrowthEstimate {
    let n = inf_avg.len();
    let tail_len = n.div_ceil(4).max(1);
    let tail = &inf_avg[n - tail_len..];
    let finite: Vec<f64> = tail.iter().copied().filter(|v| v.is_finite()).collect();
    let censored = finite.len() < tail.len();
    let nilpotent = finite.is_empty();
    let gamma_hat = if nilpotent {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    GrowthEstimate {
        t_grid,
        inf_avg,
        admissible_counts: counts,
        gamma_hat,
        nilpotent,
        censored,
    }
}

/// A point is admissible at time `t` when `t < tau_minus` is *known*:
/// a censored backward exit only certifies admissibility up to its
/// horizon.
fn admissible_at(tau_minus: Tau, t: f64) -> bool {
    match tau_minus {
        Tau::Exact(v) => t < v,
        Tau::CensoredAt(h) => t <= h,
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<(), GrowthError> {
    if t_grid.is_empty() || t_grid[0] <= 0.0 {
        return Err(GrowthError::InvalidGrid);
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GrowthError::InvalidGrid);
    }
    Ok(())
}

/// Averages along one trajectory at every admissible grid time: one
/// incremental integration pass per point.
fn point_averages(
    problem: &Problem,
    point: &ClassifiedPoint,
    t_grid: &[f64],
    direction: AverageDirection,
    cfg: &FlowConfig,
) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut pos = point.x.clone();
    let mut acc = 0.0;
    let mut prev_t = 0.0;
    for (k, &t) in t_grid.iter().enumerate() {
        if !admissible_at(point.tau_minus, t) {
            break;
        }
        let Ok(leg) = advance_flow(problem, &pos, direction.sign() * (t - prev_t), cfg) else {
            break;
        };
        if !leg.is_ok() {
            break;
        }
        acc += leg.int_sigma_p;
        pos = leg.endpoint;
        prev_t = t;
        out.push((k, acc / t));
    }
    out
}

/// Shared estimator body: per-time infimum over the sampled class.
fn gamma_estimate(
    problem: &Problem,
    points: Vec<&ClassifiedPoint>,
    t_grid: &[f64],
    direction: AverageDirection,
    cfg: &FlowConfig,
) -> Result<GrowthEstimate, GrowthError> {
    validate_grid(t_grid)?;
    let per_point: Vec<Vec<(usize, f64)>> = points
        .par_iter()
        .map(|p| point_averages(problem, p, t_grid, direction, cfg))
        .collect();
    let mut inf_avg = vec![f64::INFINITY; t_grid.len()];
    let mut counts = vec![0usize; t_grid.len()];
    for averages in &per_point {
        for &(k, avg) in averages {
            counts[k] += 1;
            if avg < inf_avg[k] {
                inf_avg[k] = avg;
            }
        }
    }
    Ok(summarize(t_grid.to_vec(), inf_avg, counts))
}

/// Backward-average growth constant over the finite-forward-exit class.
pub fn gamma1_estimate(
    problem: &Problem,
    sample: &[ClassifiedPoint],
    t_grid: &[f64],
    cfg: &FlowConfig,
) -> Result<GrowthEstimate, GrowthError> {
    let points: Vec<&ClassifiedPoint> = sample
        .iter()
        .filter(|p| matches!(p.class, PhaseClass::Omega1))
        .collect();
    if points.is_empty() {
        return Err(GrowthError::EmptyClass("omega1"));
    }
    gamma_estimate(problem, points, t_grid, AverageDirection::Backward, cfg)
}

/// Forward-average growth constant over the backward-escaping class.
pub fn gamma2_estimate(
    problem: &Problem,
    sample: &[ClassifiedPoint],
    t_grid: &[f64],
    cfg: &FlowConfig,
) -> Result<GrowthEstimate, GrowthError> {
    let points: Vec<&ClassifiedPoint> = sample
        .iter()
        .filter(|p| matches!(p.class, PhaseClass::Omega2))
        .collect();
    if points.is_empty() {
        return Err(GrowthError::EmptyClass("omega2"));
    }
    gamma_estimate(problem, points, t_grid, AverageDirection::Forward, cfg)
}

/// Time-averaged attenuation along aperiodic global trajectories, used
/// as a type bound annotation for the component where no finer spectral
/// picture is computed.
pub fn infinite_class_averages(
    problem: &Problem,
    sample: &[ClassifiedPoint],
    t_grid: &[f64],
    direction: AverageDirection,
    cfg: &FlowConfig,
) -> Result<GrowthEstimate, GrowthError> {
    let points: Vec<&ClassifiedPoint> = sample
        .iter()
        .filter(|p| matches!(p.class, PhaseClass::Omega3Infinite))
        .collect();
    if points.is_empty() {
        return Err(GrowthError::EmptyClass("omega3_infinite"));
    }
    gamma_estimate(problem, points, t_grid, direction, cfg)
}

/// Generator and semigroup spectral sets when the sampled global
/// component carries no mass: half-plane `Re <= -gamma` and disk of
/// radius `e^{-gamma t}` with `gamma` the smallest supplied growth
/// constant. Fully starved (nilpotent) inputs degenerate to the empty
/// set and `{0}`.
pub fn assemble_spectrum(
    gamma1: Option<&GrowthEstimate>,
    gamma2: Option<&GrowthEstimate>,
    omega3_fraction: f64,
    t: f64,
) -> Result<(SpectralSet, SpectralSet), GrowthError> {
    if omega3_fraction > 0.0 {
        return Err(GrowthError::CompositionRequired { omega3_fraction });
    }
    let supplied: Vec<f64> = [gamma1, gamma2]
        .iter()
        .flatten()
        .map(|g| g.gamma_hat)
        .collect();
    if supplied.is_empty() {
        return Err(GrowthError::InsufficientData(
            "no growth estimate supplied".into(),
        ));
    }
    let gamma = supplied.iter().copied().fold(f64::INFINITY, f64::min);
    if gamma.is_infinite() {
        return Ok((
            SpectralSet::new(
                Region::Empty,
                "nilpotent escaping component: empty generator spectrum",
            ),
            SpectralSet::new(
                Region::Discrete {
                    points: vec![(0.0, 0.0)],
                },
                "nilpotent escaping component: semigroup spectrum {0}",
            ),
        ));
    }
    let generator = SpectralSet::new(
        Region::HalfPlane { re_max: -gamma },
        format!("escaping-component growth bound (gamma = {gamma})"),
    );
    let semigroup = SpectralSet::new(
        Region::Disk {
            radius: (-gamma * t).exp(),
            includes_zero: true,
        },
        format!("escaping-component growth bound at t = {t} (gamma = {gamma})"),
    );
    Ok((generator, semigroup))
}

/// Importance sampling toward deep-interior points: draw
/// `oversample * n` candidates and keep the `n` with the largest
/// backward stay time (censored counts as infinite). The infimum at
/// large `t` only sees points with `tau_minus > t`, so a uniform sample
/// starves exactly at the times that matter.
pub fn deep_backward_sample(
    problem: &Problem,
    bounds: Option<&[[f64; 2]]>,
    n: usize,
    oversample: usize,
    horizon: f64,
    cfg: &FlowConfig,
    rng: &mut impl rand::Rng,
) -> Result<Vec<Vec<f64>>, crate::problem::ProblemError> {
    let candidates = crate::sampling::sample_domain(problem, bounds, n * oversample.max(1), rng)?;
    let mut scored: Vec<(f64, Vec<f64>)> = candidates
        .into_par_iter()
        .map(|x| {
            let tau = crate::flow::exit_time(problem, &x, horizon, cfg)
                .map(|et| et.tau_minus.value_or_inf())
                .unwrap_or(0.0);
            (tau, x)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(n);
    Ok(scored.into_iter().map(|(_, x)| x).collect())
}

/// Exponential type from norm samples: least-squares slope of
/// `log |U(t)|` against `t` over the tail half of the grid.
pub fn type_estimate(t_grid: &[f64], norms: &[NormEstimate]) -> Result<f64, GrowthError> {
    if t_grid.len() != norms.len() {
        return Err(GrowthError::InsufficientData(
            "time grid and norm table differ in length".into(),
        ));
    }
    let start = t_grid.len() / 2;
    let pairs: Vec<(f64, f64)> = t_grid[start..]
        .iter()
        .zip(&norms[start..])
        .filter_map(|(t, n)| n.value.filter(|v| *v > 0.0).map(|v| (*t, v.ln())))
        .collect();
    if pairs.len() < 3 {
        return Err(GrowthError::InsufficientData(format!(
            "only {} usable tail norm points (need 3)",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_t = pairs.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, y) in &pairs {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(GrowthError::InsufficientData(
            "degenerate time grid in tail".into(),
        ));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::classify::{classify_sample, ClassificationConfig};
    use crate::problem::{Divergence, Domain, Problem, VectorField};
    use crate::semigroup::{operator_norm_estimate, ClassFilter};
    use serde_json::{json, Map, Value};
    use std::sync::Arc;

    fn grid(t_max: f64, steps: usize) -> Vec<f64> {
        (1..=steps)
            .map(|k| t_max * k as f64 / steps as f64)
            .collect()
    }

    /// Unit drift on the half line, exiting backward at `tau_minus = x`.
    fn half_line_forward(c: f64) -> Problem {
        let field = VectorField::new(
            1,
            Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0),
            Divergence::Analytic(Arc::new(|_| 0.0)),
            1.0,
        )
        .unwrap();
        Problem::new(
            field,
            Arc::new(move |_: &[f64]| c),
            c,
            Domain::open_box(vec![[0.0, f64::INFINITY]], "(0, inf)"),
            2.0,
            "half-line drift",
        )
        .unwrap()
        .with_sample_box(vec![[0.0, 30.0]])
    }

    /// Reverse drift on the half line: forward exit at `tau_plus = x`.
    fn half_line_backward(c: f64) -> Problem {
        let field = VectorField::new(
            1,
            Arc::new(|_: &[f64], out: &mut [f64]| out[0] = -1.0),
            Divergence::Analytic(Arc::new(|_| 0.0)),
            1.0,
        )
        .unwrap();
        Problem::new(
            field,
            Arc::new(move |_: &[f64]| c),
            c,
            Domain::open_box(vec![[0.0, f64::INFINITY]], "(0, inf)"),
            2.0,
            "half-line reverse drift",
        )
        .unwrap()
        .with_sample_box(vec![[0.0, 30.0]])
    }

    /// Half-line drift with constant divergence `d` carried by a second
    /// coordinate: `F(x1, x2) = (1, d x2)`.
    fn half_line_with_divergence(c: f64, d: f64, p: f64) -> Problem {
        let field = VectorField::new(
            2,
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                out[0] = 1.0;
                out[1] = d * x[1];
            }),
            Divergence::Analytic(Arc::new(move |_| d)),
            1.0 + d.abs(),
        )
        .unwrap();
        Problem::new(
            field,
            Arc::new(move |_: &[f64]| c),
            c,
            Domain::open_box(
                vec![[0.0, f64::INFINITY], [f64::NEG_INFINITY, f64::INFINITY]],
                "(0, inf) x R",
            ),
            p,
            "half-line drift with divergence",
        )
        .unwrap()
        .with_sample_box(vec![[0.0, 30.0], [-1.0, 1.0]])
    }

    fn classified(problem: &Problem, points: Vec<Vec<f64>>, horizon: f64) -> Vec<ClassifiedPoint> {
        classify_sample(
            problem,
            &points,
            &ClassificationConfig::with_horizon(horizon),
        )
        .unwrap()
        .points
    }

    #[test]
    fn gamma2_constant_absorption_is_exact() {
        let c = 0.7;
        let p = half_line_forward(c);
        let points: Vec<Vec<f64>> = (1..=25).map(|i| vec![1.2 * i as f64]).collect();
        let sample = classified(&p, points, 40.0);
        let est = gamma2_estimate(&p, &sample, &grid(20.0, 20), &FlowConfig::default()).unwrap();
        assert!((est.gamma_hat - c).abs() < 1e-3, "{}", est.gamma_hat);
        assert!(!est.nilpotent);
        // every grid time keeps at least the deepest points admissible
        assert!(est.admissible_counts.iter().all(|&n| n > 0));
    }

    #[test]
    fn gamma2_forgets_transients() {
        // h(x) = c + e^{-x}: the tail averages converge to c
        let c = 0.7;
        let base = half_line_forward(c);
        let field = base.field().clone();
        let p = Problem::new(
            field,
            Arc::new(move |x: &[f64]| c + (-x[0]).exp()),
            c,
            base.domain().clone(),
            2.0,
            "half-line drift with transient",
        )
        .unwrap();
        let points: Vec<Vec<f64>> = (1..=25).map(|i| vec![1.2 * i as f64]).collect();
        let sample = classified(&p, points, 40.0);
        let est = gamma2_estimate(&p, &sample, &grid(20.0, 20), &FlowConfig::default()).unwrap();
        assert!((est.gamma_hat - c).abs() < 5e-3, "{}", est.gamma_hat);
    }

    #[test]
    fn gamma2_shift_between_exponents_is_half_divergence() {
        let (c, d) = (0.3, 0.4);
        let points: Vec<Vec<f64>> = (1..=25).map(|i| vec![1.2 * i as f64, 0.5]).collect();
        let mut gammas = Vec::new();
        for p_exp in [1.0, 2.0] {
            let p = half_line_with_divergence(c, d, p_exp);
            let sample = classified(&p, points.clone(), 40.0);
            let est =
                gamma2_estimate(&p, &sample, &grid(15.0, 15), &FlowConfig::default()).unwrap();
            gammas.push(est.gamma_hat);
        }
        assert!(
            ((gammas[1] - gammas[0]) - d / 2.0).abs() < 1e-3,
            "shift {}",
            gammas[1] - gammas[0]
        );
    }

    #[test]
    fn gamma1_slab_goes_nilpotent() {
        let c = 0.5;
        let mut params = Map::new();
        params.insert("c".into(), json!(c));
        let p = builtin("slab_constant", &params).unwrap();
        let points: Vec<Vec<f64>> = (1..=30).map(|i| vec![i as f64 / 31.0]).collect();
        let sample = classified(&p, points, 5.0);
        let est = gamma1_estimate(&p, &sample, &grid(2.0, 20), &FlowConfig::default()).unwrap();
        // admissible for small t with value c, starved for t >= 1
        assert!((est.inf_avg[0] - c).abs() < 1e-6);
        assert!(est.inf_avg.last().unwrap().is_infinite());
        assert!(est.nilpotent);
        assert!(est.censored);
        assert_eq!(est.gamma_hat, f64::INFINITY);
    }

    #[test]
    fn gamma1_half_line_reverse_drift() {
        let c = 0.45;
        let p = half_line_backward(c);
        let points: Vec<Vec<f64>> = (1..=25).map(|i| vec![1.2 * i as f64]).collect();
        let sample = classified(&p, points, 40.0);
        // all points are Omega1 (forward exit at x), backward admissible forever
        let est = gamma1_estimate(&p, &sample, &grid(20.0, 20), &FlowConfig::default()).unwrap();
        assert!((est.gamma_hat - c).abs() < 1e-3, "{}", est.gamma_hat);
        assert!(!est.censored);
    }

    #[test]
    fn divergence_free_zero_absorption_gives_zero() {
        let p = half_line_forward(0.0);
        let points: Vec<Vec<f64>> = (1..=10).map(|i| vec![2.0 * i as f64]).collect();
        let sample = classified(&p, points, 30.0);
        let est = gamma2_estimate(&p, &sample, &grid(10.0, 10), &FlowConfig::default()).unwrap();
        assert!(est.gamma_hat.abs() < 1e-9);
    }

    #[test]
    fn enlarging_the_sample_never_raises_the_infimum() {
        let p = half_line_forward(0.7);
        let small: Vec<Vec<f64>> = (1..=8).map(|i| vec![2.5 * i as f64]).collect();
        let mut large = small.clone();
        large.extend((1..=8).map(|i| vec![2.5 * i as f64 + 1.1]));
        let tg = grid(10.0, 10);
        let cfg = FlowConfig::default();
        let est_small = gamma2_estimate(&p, &classified(&p, small, 40.0), &tg, &cfg).unwrap();
        let est_large = gamma2_estimate(&p, &classified(&p, large, 40.0), &tg, &cfg).unwrap();
        for (a, b) in est_large.inf_avg.iter().zip(&est_small.inf_avg) {
            assert!(a <= &(b + 1e-12), "{a} > {b}");
        }
    }

    #[test]
    fn empty_class_is_an_error() {
        let p = half_line_forward(0.1);
        let sample = classified(&p, vec![vec![5.0]], 40.0);
        assert!(matches!(
            gamma1_estimate(&p, &sample, &grid(5.0, 5), &FlowConfig::default()),
            Err(GrowthError::EmptyClass("omega1"))
        ));
    }

    #[test]
    fn invalid_grids_rejected() {
        let p = half_line_forward(0.1);
        let sample = classified(&p, vec![vec![5.0]], 40.0);
        for bad in [vec![], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]] {
            assert!(matches!(
                gamma2_estimate(&p, &sample, &bad, &FlowConfig::default()),
                Err(GrowthError::InvalidGrid)
            ));
        }
    }

    #[test]
    fn assemble_takes_the_minimum() {
        let g1 = summarize(vec![1.0], vec![1.0], vec![1]);
        let g2 = summarize(vec![1.0], vec![2.0], vec![1]);
        let (gen, semi) = assemble_spectrum(Some(&g1), Some(&g2), 0.0, 1.0).unwrap();
        assert_eq!(gen.region, Region::HalfPlane { re_max: -1.0 });
        assert_eq!(
            semi.region,
            Region::Disk {
                radius: (-1.0_f64).exp(),
                includes_zero: true
            }
        );
    }

    #[test]
    fn assemble_zero_gammas() {
        let g = summarize(vec![1.0], vec![0.0], vec![1]);
        let (gen, semi) = assemble_spectrum(Some(&g), Some(&g), 0.0, 1.0).unwrap();
        assert_eq!(gen.region, Region::HalfPlane { re_max: 0.0 });
        assert_eq!(
            semi.region,
            Region::Disk {
                radius: 1.0,
                includes_zero: true
            }
        );
    }

    #[test]
    fn assemble_nilpotent_degenerates() {
        let g = summarize(vec![1.0], vec![f64::INFINITY], vec![0]);
        let (gen, semi) = assemble_spectrum(Some(&g), None, 0.0, 1.5).unwrap();
        assert_eq!(gen.region, Region::Empty);
        assert_eq!(
            semi.region,
            Region::Discrete {
                points: vec![(0.0, 0.0)]
            }
        );
    }

    #[test]
    fn assemble_refuses_global_component_mass() {
        let g = summarize(vec![1.0], vec![0.5], vec![1]);
        assert!(matches!(
            assemble_spectrum(Some(&g), None, 0.25, 1.0),
            Err(GrowthError::CompositionRequired { .. })
        ));
    }

    #[test]
    fn type_matches_negative_gamma_on_half_line() {
        let c = 0.45;
        let p = half_line_forward(c);
        let points: Vec<Vec<f64>> = (1..=25).map(|i| vec![1.2 * i as f64]).collect();
        let sample = classified(&p, points, 40.0);
        let tg = grid(10.0, 10);
        let cfg = FlowConfig::default();
        let norms: Vec<NormEstimate> = tg
            .iter()
            .map(|&t| operator_norm_estimate(&p, t, ClassFilter::Omega2, &sample, &cfg).unwrap())
            .collect();
        let omega0 = type_estimate(&tg, &norms).unwrap();
        assert!((omega0 + c).abs() < 5e-3, "type {omega0}");
        let est = gamma2_estimate(&p, &sample, &tg, &cfg).unwrap();
        assert!((omega0 + est.gamma_hat).abs() < 5e-3);
    }

    #[test]
    fn deep_sampling_prefers_large_backward_stay() {
        let p = half_line_forward(0.2);
        let cfg = FlowConfig::default();
        let mut rng = crate::sampling::seeded_rng(21);
        let uniform = crate::sampling::sample_domain(&p, None, 10, &mut rng).unwrap();
        let mut rng = crate::sampling::seeded_rng(21);
        let deep = deep_backward_sample(&p, None, 10, 6, 40.0, &cfg, &mut rng).unwrap();
        let min_of = |pts: &[Vec<f64>]| pts.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
        // tau_minus = x here, so the kept points sit deeper than the
        // shallow end of a plain uniform draw
        assert!(min_of(&deep) > min_of(&uniform), "{deep:?}");
        assert_eq!(deep.len(), 10);
    }

    #[test]
    fn type_estimate_needs_three_tail_points() {
        let err = type_estimate(
            &[1.0, 2.0],
            &[
                NormEstimate {
                    value: Some(1.0),
                    admissible: 1,
                    ambiguous_excluded: 0,
                },
                NormEstimate {
                    value: Some(0.5),
                    admissible: 1,
                    ambiguous_excluded: 0,
                },
            ],
        );
        assert!(matches!(err, Err(GrowthError::InsufficientData(_))));
    }

    #[test]
    fn rotation_type_with_constant_absorption() {
        let c = 0.8;
        let mut params = Map::new();
        params.insert("h".into(), Value::from(c));
        let p = builtin("rotation", &params).unwrap();
        let points: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 0.5], vec![-0.7, 0.7]];
        let sample = classified(&p, points, 20.0);
        let tg = grid(5.0, 8);
        let cfg = FlowConfig::default();
        let norms: Vec<NormEstimate> = tg
            .iter()
            .map(|&t| operator_norm_estimate(&p, t, ClassFilter::Omega3, &sample, &cfg).unwrap())
            .collect();
        let omega0 = type_estimate(&tg, &norms).unwrap();
        assert!((omega0 + c).abs() < 1e-3, "type {omega0}");
    }
}
