//! Spectral objects attached to rest points and periodic orbits.
//!
//! On a periodic orbit the orbit-averaged attenuation `theta` and the
//! prime period determine the return multiplier
//! `M_lambda = exp{-p (lambda - theta)}`; `lambda` is a candidate
//! spectral point exactly when the essential range of `M_lambda` meets 1,
//! which resolves into the lattice `F_k = theta + 2 pi i k / p`. Rest
//! points contribute the essential range of `-nu` directly. Both are
//! approximated here by density-thresholded value clustering over
//! classified samples.

use num_complex::Complex64;
use serde::Serialize;

use crate::classify::{ClassifiedPoint, PhaseClass};
use crate::flow::{advance_flow, FlowConfig, FlowError};
use crate::problem::Problem;
use crate::spectral_set::{annular_hull, RealSet, Region, SpectralSet};

#[derive(Debug, Clone, thiserror::Error)]
pub enum PeriodicError {
    #[error("point is not classified as periodic")]
    NotPeriodic,
    #[error("periodic orbit integration left the domain unexpectedly")]
    OrbitEscaped,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Orbit data of one periodic point: prime period and orbit-averaged
/// attenuation `theta = -p^{-1} int_0^p nu`.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodicPointData {
    pub x: Vec<f64>,
    pub prime_period: f64,
    pub theta: f64,
}

/// Extract period and orbit average for a point already classified as
/// periodic. One full-period integration supplies the attenuation
/// integral; the closed orbit makes forward and backward averages equal.
pub fn periodic_point_data(
    problem: &Problem,
    point: &ClassifiedPoint,
    cfg: &FlowConfig,
) -> Result<PeriodicPointData, PeriodicError> {
    let PhaseClass::Omega3Periodic { prime_period } = point.class else {
        return Err(PeriodicError::NotPeriodic);
    };
    let orbit = advance_flow(problem, &point.x, prime_period, cfg)?;
    if !orbit.is_ok() {
        return Err(PeriodicError::OrbitEscaped);
    }
    // `+ 0.0` normalizes a negative zero out of the reports
    Ok(PeriodicPointData {
        x: point.x.clone(),
        prime_period,
        theta: -orbit.int_nu / prime_period + 0.0,
    })
}

/// Return multiplier `exp{-p (lambda - theta)}` of one orbit.
pub fn m_lambda(data: &PeriodicPointData, lambda: Complex64) -> Complex64 {
    (-(lambda - data.theta) * data.prime_period).exp()
}

/// Lattice point `theta + 2 pi i k / p`; exactly the solutions of
/// `M_lambda = 1`.
pub fn f_k(data: &PeriodicPointData, k: i64) -> Complex64 {
    Complex64::new(
        data.theta,
        2.0 * std::f64::consts::PI * k as f64 / data.prime_period,
    )
}

/// Density-thresholded clustering of weighted values, the finite-sample
/// surrogate of an essential range: single outliers of small weight are
/// measure-zero artifacts and must not enter.
#[derive(Debug, Clone)]
pub struct EssentialRangeApprox {
    /// Normalized input samples.
    pub values: Vec<(Complex64, f64)>,
    pub bandwidth: f64,
    /// Weighted centroids of the clusters whose mass reached the
    /// density threshold, sorted by real then imaginary part.
    pub retained: Vec<Complex64>,
}

/// Default clustering radius for values of the given magnitude scale.
pub fn default_bandwidth(scale: f64) -> f64 {
    1e-4 * (1.0 + scale)
}

/// Default density threshold: two samples' worth of mass.
pub fn default_density_threshold(n_samples: usize) -> f64 {
    if n_samples == 0 {
        1.0
    } else {
        2.0 / n_samples as f64
    }
}

/// Cluster weighted samples greedily in input order; clusters whose
/// total weight reaches `density_threshold` survive.
pub fn essential_range(
    samples: &[(Complex64, f64)],
    bandwidth: f64,
    density_threshold: f64,
) -> EssentialRangeApprox {
    let total: f64 = samples.iter().map(|(_, w)| w).sum();
    let values: Vec<(Complex64, f64)> = if total > 0.0 {
        samples.iter().map(|(v, w)| (*v, w / total)).collect()
    } else {
        samples.to_vec()
    };
    struct Cluster {
        weighted_sum: Complex64,
        weight: f64,
    }
    impl Cluster {
        fn center(&self) -> Complex64 {
            if self.weight > 0.0 {
                self.weighted_sum / self.weight
            } else {
                self.weighted_sum
            }
        }
    }
    let mut clusters: Vec<Cluster> = Vec::new();
    for &(v, w) in &values {
        match clusters
            .iter_mut()
            .find(|c| (c.center() - v).norm() <= bandwidth)
        {
            Some(c) => {
                c.weighted_sum += v * w;
                c.weight += w;
            }
            None => clusters.push(Cluster {
                weighted_sum: v * w,
                weight: w,
            }),
        }
    }
    let mut retained: Vec<Complex64> = clusters
        .iter()
        .filter(|c| c.weight >= density_threshold)
        .map(Cluster::center)
        .collect();
    retained.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    EssentialRangeApprox {
        values,
        bandwidth,
        retained,
    }
}

/// Truncated candidate generator spectrum over the periodic component.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateSpectrum {
    /// Union over `|k| <= k_max` of the retained lattice clusters. The
    /// inclusion direction is certified; equality is an open question,
    /// hence "candidate".
    pub set: SpectralSet,
    pub k_max: i64,
    /// The truncation is exact inside `|Im lambda| < covered_band`: no
    /// discarded lattice point reaches below that height.
    pub covered_band: f64,
    pub max_period: Option<f64>,
    /// Sampling cannot certify that the prime period is bounded over the
    /// whole periodic set, which the lattice description assumes.
    pub period_bound_unverified: bool,
}

/// Union over `|k| <= k_max` of the essential ranges of the lattice maps
/// over the sampled periodic orbits. Empty samples yield an empty set
/// with an explanatory provenance rather than an error.
pub fn candidate_spectrum_per(
    periodic: &[PeriodicPointData],
    k_max: i64,
    bandwidth: Option<f64>,
    density_threshold: Option<f64>,
) -> CandidateSpectrum {
    if periodic.is_empty() {
        return CandidateSpectrum {
            set: SpectralSet::new(
                Region::Empty,
                "periodic candidate spectrum: no periodic points sampled",
            ),
            k_max,
            covered_band: 0.0,
            max_period: None,
            period_bound_unverified: false,
        };
    }
    let max_period = periodic
        .iter()
        .map(|d| d.prime_period)
        .fold(f64::NEG_INFINITY, f64::max);
    let theta_scale = periodic
        .iter()
        .map(|d| d.theta.abs())
        .fold(0.0_f64, f64::max);
    let threshold = density_threshold.unwrap_or_else(|| default_density_threshold(periodic.len()));
    let weight = 1.0 / periodic.len() as f64;
    let mut points: Vec<Complex64> = Vec::new();
    for k in -k_max..=k_max {
        let scale = theta_scale
            + 2.0 * std::f64::consts::PI * k.unsigned_abs() as f64
                / periodic
                    .iter()
                    .map(|d| d.prime_period)
                    .fold(f64::INFINITY, f64::min);
        let bw = bandwidth.unwrap_or_else(|| default_bandwidth(scale));
        let samples: Vec<(Complex64, f64)> = periodic.iter().map(|d| (f_k(d, k), weight)).collect();
        points.extend(essential_range(&samples, bw, threshold).retained);
    }
    points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let covered_band = 2.0 * std::f64::consts::PI * (k_max + 1) as f64 / max_period;
    CandidateSpectrum {
        set: SpectralSet::new(
            Region::discrete_from(points),
            format!("periodic candidate spectrum (lattice truncated at |k| <= {k_max})"),
        ),
        k_max,
        covered_band,
        max_period: Some(max_period),
        period_bound_unverified: true,
    }
}

/// The stratum of sampled orbit data with prime period at most `n`.
/// The lattice description of the candidate spectrum is exact on such
/// strata; whether the resolvent stays uniformly bounded across them is
/// reported as unchecked metadata, never assumed.
pub fn bounded_period_stratum(data: &[PeriodicPointData], n: f64) -> Vec<&PeriodicPointData> {
    data.iter().filter(|d| d.prime_period <= n).collect()
}

/// Generator and semigroup spectra over the rest-point component: the
/// essential range of `-nu` on the sampled rest points, and its exact
/// exponential image.
pub fn rest_spectrum(
    problem: &Problem,
    rest_points: &[&ClassifiedPoint],
    t: f64,
    bandwidth: Option<f64>,
    density_threshold: Option<f64>,
) -> (SpectralSet, SpectralSet) {
    if rest_points.is_empty() {
        return (
            SpectralSet::new(Region::Empty, "rest-point spectrum: no rest points sampled"),
            SpectralSet::new(Region::Empty, "rest-point spectrum: no rest points sampled"),
        );
    }
    let weight = 1.0 / rest_points.len() as f64;
    let samples: Vec<(Complex64, f64)> = rest_points
        .iter()
        .map(|p| (Complex64::new(-problem.nu_raw(&p.x), 0.0), weight))
        .collect();
    let scale = samples
        .iter()
        .map(|(v, _)| v.norm())
        .fold(0.0_f64, f64::max);
    let bw = bandwidth.unwrap_or_else(|| default_bandwidth(scale));
    let threshold =
        density_threshold.unwrap_or_else(|| default_density_threshold(rest_points.len()));
    let range = essential_range(&samples, bw, threshold);
    let generator_region = Region::discrete_from(range.retained.clone());
    let semigroup_region = generator_region
        .exp_map(t)
        .expect("discrete sets always have exact exponential images");
    (
        SpectralSet::new(
            generator_region,
            "rest-point spectrum: essential range of the negated attenuation",
        ),
        SpectralSet::new(
            semigroup_region,
            format!("rest-point semigroup spectrum at t = {t} (exact exponential image)"),
        ),
    )
}

/// Annular hull with provenance: the rotational closure of the
/// exponential image of the real spectrum points.
pub fn annular_hull_set(reals: &RealSet, t: f64) -> SpectralSet {
    SpectralSet::new(
        annular_hull(reals, t),
        format!("annular hull of the real spectrum at t = {t}"),
    )
}

/// Demonstration that the exponential image of a lattice spectrum fails
/// to fill the circle at finite truncation.
#[derive(Debug, Clone, Serialize)]
pub struct SmtFailureReport {
    pub t: f64,
    pub k_max: i64,
    /// Distinct points of `{ e^{i k t} : |k| <= k_max }`.
    pub finite_points: Vec<(f64, f64)>,
    pub distinct_count: usize,
    /// Largest angular gap (radians) left uncovered on the circle.
    pub max_gap: f64,
    /// The rotational closure the finite image should fill.
    pub full_circle: SpectralSet,
    /// A positive gap certifies that the exponential image of the
    /// truncated lattice is a proper subset of the circle.
    pub exp_image_proper_subset: bool,
}

/// The rotation-group counterexample at time `t`: eigenvalue images
/// `e^{i k t}` only ever fill the unit circle in the closure, so the
/// pointwise exponential image misses arcs whenever `t / 2 pi` is
/// irrational.
pub fn smt_counterexample_report(t: f64, k_max: i64) -> SmtFailureReport {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut angles: Vec<f64> = (-k_max..=k_max)
        .map(|k| (k as f64 * t).rem_euclid(two_pi))
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    // a point within tolerance of 2 pi duplicates one at 0
    if angles.len() > 1 {
        let first = angles[0];
        let last = *angles.last().unwrap();
        if (two_pi - last + first).abs() <= 1e-9 {
            angles.pop();
        }
    }
    let max_gap = if angles.len() <= 1 {
        two_pi
    } else {
        let mut gap = two_pi - angles.last().unwrap() + angles[0];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap
    };
    let finite_points: Vec<(f64, f64)> = angles.iter().map(|a| (a.cos(), a.sin())).collect();
    SmtFailureReport {
        t,
        k_max,
        distinct_count: finite_points.len(),
        finite_points,
        max_gap,
        full_circle: SpectralSet::new(
            Region::unit_circle(),
            "rotational closure of the lattice exponential image",
        ),
        exp_image_proper_subset: max_gap > 0.0,
    }
}

/// CSV rows `x..., prime_period, theta` for periodic orbit data.
pub fn write_periodic_csv<W: std::io::Write>(
    data: &[PeriodicPointData],
    dimension: usize,
    out: &mut W,
) -> std::io::Result<()> {
    for i in 0..dimension {
        write!(out, "x{i},")?;
    }
    writeln!(out, "prime_period,theta")?;
    for d in data {
        for c in &d.x {
            write!(out, "{c:.12e},")?;
        }
        writeln!(out, "{:.12e},{:.12e}", d.prime_period, d.theta)?;
    }
    Ok(())
}
