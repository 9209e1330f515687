//! Analysis pipelines and machine-readable reports.
//!
//! The spectrum report composes per-class results by set union, exactly
//! mirroring how the semigroup decomposes over the exit-time partition;
//! nothing is recomputed across classes. Reports are deterministic for a
//! fixed config and seed: sampling uses a seeded ChaCha stream, parallel
//! reductions are order-independent, and timestamps live in a separate
//! metadata file.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{
    classify_sample, ClassCounts, ClassificationConfig, PartitionStats, PhaseClass,
};
use crate::config::{ConfigError, ProblemConfig};
use crate::flow::{FlowConfig, FlowError};
use crate::growth::{
    gamma1_estimate, gamma2_estimate, infinite_class_averages, type_estimate, AverageDirection,
    GrowthError, GrowthEstimate,
};
use crate::periodic::{
    annular_hull_set, candidate_spectrum_per, periodic_point_data, rest_spectrum,
    CandidateSpectrum, PeriodicError, PeriodicPointData,
};
use crate::problem::{Problem, ProblemError};
use crate::sampling::{sample_domain, seeded_rng};
use crate::semigroup::{operator_norm_estimate, ClassFilter, SemigroupError};
use crate::spectral_set::{RealSet, Region, SpectralSet};
use crate::verify::{run_verification, VerificationReport, VerifyConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// CLI exit code: 2 for configuration problems, 3 for numerical
    /// failures (verification failures are reported separately as 1).
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Full description of one analysis run. Identical configs (hence
/// identical hashes) with identical seeds produce byte-identical report
/// bodies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub seed: u64,
    pub samples: usize,
    /// Classification horizon. Raised internally to cover `t_max` so
    /// admissibility at every grid time is decided, never guessed.
    pub horizon: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub k_max: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_tol: Option<f64>,
    pub verify_samples: usize,
}

impl RunConfig {
    pub fn new(problem: ProblemConfig) -> Self {
        RunConfig {
            problem,
            seed: 1,
            samples: 200,
            horizon: 40.0,
            t_max: 10.0,
            t_steps: 20,
            k_max: 5,
            sample_box: None,
            rtol: None,
            atol: None,
            t_tol: None,
            verify_samples: 24,
        }
    }

    pub fn flow_config(&self) -> FlowConfig {
        let mut cfg = FlowConfig::default();
        if let Some(rtol) = self.rtol {
            cfg.rtol = rtol;
        }
        if let Some(atol) = self.atol {
            cfg.atol = atol;
        }
        if let Some(t_tol) = self.t_tol {
            cfg.t_tol = t_tol;
        }
        cfg
    }

    pub fn classification_config(&self) -> ClassificationConfig {
        let horizon = self.horizon.max(self.t_max * 1.01);
        ClassificationConfig {
            horizon,
            confidence_horizon: horizon,
            flow: self.flow_config(),
            ..ClassificationConfig::default()
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let steps = self.t_steps.max(1);
        (1..=steps)
            .map(|k| self.t_max * k as f64 / steps as f64)
            .collect()
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub description: String,
    pub dimension: usize,
    pub p: f64,
    pub kappa: f64,
}

impl ProblemSummary {
    fn of(problem: &Problem) -> Self {
        ProblemSummary {
            description: problem.description().to_string(),
            dimension: problem.dimension(),
            p: problem.p(),
            kappa: problem.field().kappa(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifySummary {
    pub total: usize,
    pub counts: ClassCounts,
    pub fractions: BTreeMap<String, f64>,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_period: Option<f64>,
    /// Sampling can bound the empirical period range but never certify
    /// that the period is bounded over the whole periodic set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period_bound_note: Option<String>,
}

fn summarize_classification(stats: &PartitionStats, horizon: f64) -> ClassifySummary {
    let c = &stats.counts;
    let mut fractions = BTreeMap::new();
    for (label, count) in [
        ("omega1", c.omega1),
        ("omega2", c.omega2),
        ("omega3_rest", c.rest),
        ("omega3_periodic", c.periodic),
        ("omega3_infinite", c.infinite),
        ("censored", c.censored),
    ] {
        fractions.insert(label.to_string(), stats.fraction(count));
    }
    ClassifySummary {
        total: stats.total(),
        counts: c.clone(),
        fractions,
        horizon,
        max_period: stats.max_period,
        min_period: stats.min_period,
        period_bound_note: (c.periodic > 0).then(|| {
            format!(
                "empirical prime periods span [{:.6}, {:.6}]; boundedness over the whole \
                 periodic set is a hypothesis this sample cannot certify",
                stats.min_period.unwrap_or(f64::NAN),
                stats.max_period.unwrap_or(f64::NAN)
            )
        }),
    }
}

/// Sample, classify, summarize.
pub fn run_classify(
    config: &RunConfig,
) -> Result<(Problem, PartitionStats, ClassifySummary), PipelineError> {
    if config.samples == 0 {
        return Err(PipelineError::Config(ConfigError::Schema(
            "sample size must be at least 1".into(),
        )));
    }
    let problem = config.problem.build()?;
    let mut rng = seeded_rng(config.seed);
    let points = sample_domain(
        &problem,
        config.sample_box.as_deref(),
        config.samples,
        &mut rng,
    )?;
    let class_cfg = config.classification_config();
    let stats = classify_sample(&problem, &points, &class_cfg)?;
    let summary = summarize_classification(&stats, class_cfg.horizon);
    Ok((problem, stats, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    pub admissible: usize,
    pub ambiguous_excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<GrowthEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<GrowthEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2_note: Option<String>,
    /// Smallest finite growth constant among the supplied estimates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
    /// Every present estimate starved: the escaping part is nilpotent.
    pub nilpotent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0_note: Option<String>,
    pub norm_vs_t: Vec<NormRow>,
    /// The spectral statements assume the classes carry measure; the
    /// sample only sees fractions. Reported side by side, never decided.
    pub hypothesis_note: String,
}

/// Growth constants, norm table and the type estimate.
pub fn growth_block(
    config: &RunConfig,
    problem: &Problem,
    stats: &PartitionStats,
) -> Result<GammaBlock, PipelineError> {
    let t_grid = config.t_grid();
    let flow_cfg = config.flow_config();

    let mut gamma1 = None;
    let mut gamma1_note = None;
    if stats.counts.omega1 > 0 {
        match gamma1_estimate(problem, &stats.points, &t_grid, &flow_cfg) {
            Ok(est) => gamma1 = Some(est),
            Err(e) => gamma1_note = Some(e.to_string()),
        }
    } else {
        gamma1_note = Some("no finite-forward-exit points sampled".into());
    }
    let mut gamma2 = None;
    let mut gamma2_note = None;
    if stats.counts.omega2 > 0 {
        match gamma2_estimate(problem, &stats.points, &t_grid, &flow_cfg) {
            Ok(est) => gamma2 = Some(est),
            Err(e) => gamma2_note = Some(e.to_string()),
        }
    } else {
        gamma2_note = Some("no backward-escaping points sampled".into());
    }

    let finite: Vec<f64> = [&gamma1, &gamma2]
        .iter()
        .filter_map(|g| g.as_ref())
        .map(|g| g.gamma_hat)
        .filter(|g| g.is_finite())
        .collect();
    let gamma_min = finite.iter().copied().reduce(f64::min);
    let nilpotent = gamma_min.is_none()
        && [&gamma1, &gamma2].iter().any(|g| g.is_some())
        && [&gamma1, &gamma2]
            .iter()
            .filter_map(|g| g.as_ref())
            .all(|g| g.nilpotent);

    let mut norm_vs_t = Vec::with_capacity(t_grid.len());
    let mut norms = Vec::with_capacity(t_grid.len());
    for &t in &t_grid {
        let est = operator_norm_estimate(problem, t, ClassFilter::All, &stats.points, &flow_cfg)?;
        norm_vs_t.push(NormRow {
            t,
            norm: est.value,
            admissible: est.admissible,
            ambiguous_excluded: est.ambiguous_excluded,
        });
        norms.push(est);
    }
    let (omega0_hat, omega0_note) = match type_estimate(&t_grid, &norms) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let hypothesis_note = format!(
        "sampled fractions: omega1 = {:.3}, omega2 = {:.3}, omega3 = {:.3} \
         (statements about each component assume it carries measure)",
        stats.fraction(stats.counts.omega1),
        stats.fraction(stats.counts.omega2),
        stats.omega3_fraction(),
    );

    Ok(GammaBlock {
        gamma1,
        gamma1_note,
        gamma2,
        gamma2_note,
        gamma_min,
        nilpotent,
        omega0_hat,
        omega0_note,
        norm_vs_t,
        hypothesis_note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicBlock {
    pub candidate: CandidateSpectrum,
    /// Exponential images of the candidate points at the report time.
    pub point_images: SpectralSet,
    /// Certified rotational closure of the semigroup spectrum.
    pub annular_hull: SpectralSet,
    pub weak_closure_note: String,
    pub resolvent_uniformity: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AperiodicBlock {
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward_tail_average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backward_tail_average: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectraBlock {
    /// Report time for all semigroup-side sets.
    pub t: f64,
    pub generator_components: Vec<SpectralSet>,
    pub semigroup_components: Vec<SpectralSet>,
    pub generator_union: SpectralSet,
    pub semigroup_union: SpectralSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperiodic: Option<AperiodicBlock>,
}

/// Periodic orbit data for every sampled periodic point.
pub fn periodic_data(
    config: &RunConfig,
    problem: &Problem,
    stats: &PartitionStats,
) -> Result<Vec<PeriodicPointData>, PipelineError> {
    let flow_cfg = config.flow_config();
    let mut out = Vec::new();
    for point in &stats.points {
        if matches!(point.class, PhaseClass::Omega3Periodic { .. }) {
            out.push(periodic_point_data(problem, point, &flow_cfg)?);
        }
    }
    Ok(out)
}

/// Compose the per-class spectral sets into the report block. The union
/// fields are built from the component lists, never recomputed.
pub fn spectra_block(
    config: &RunConfig,
    problem: &Problem,
    stats: &PartitionStats,
    growth: &GammaBlock,
) -> Result<SpectraBlock, PipelineError> {
    let t = config.t_max;
    let mut generator_components: Vec<SpectralSet> = Vec::new();
    let mut semigroup_components: Vec<SpectralSet> = Vec::new();

    let mut push_escaping = |est: &GrowthEstimate, label: &str| {
        if est.gamma_hat.is_finite() {
            let gamma = est.gamma_hat;
            generator_components.push(SpectralSet::new(
                Region::HalfPlane { re_max: -gamma },
                format!("{label}: growth-bound half-plane (gamma = {gamma})"),
            ));
            semigroup_components.push(SpectralSet::new(
                Region::Disk {
                    radius: (-gamma * t).exp(),
                    includes_zero: true,
                },
                format!("{label}: growth-bound disk at t = {t} (gamma = {gamma})"),
            ));
        } else {
            generator_components.push(SpectralSet::new(
                Region::Empty,
                format!("{label}: nilpotent, empty generator spectrum"),
            ));
            semigroup_components.push(SpectralSet::new(
                Region::Discrete {
                    points: vec![(0.0, 0.0)],
                },
                format!("{label}: nilpotent, semigroup spectrum {{0}}"),
            ));
        }
    };
    if let Some(est) = &growth.gamma1 {
        push_escaping(est, "finite-forward-exit component");
    }
    if let Some(est) = &growth.gamma2 {
        push_escaping(est, "backward-escaping component");
    }

    if stats.counts.rest > 0 {
        let rest_points: Vec<&crate::classify::ClassifiedPoint> = stats
            .points
            .iter()
            .filter(|p| matches!(p.class, PhaseClass::Omega3Rest))
            .collect();
        let (gen_set, semi_set) = rest_spectrum(problem, &rest_points, t, None, None);
        generator_components.push(gen_set);
        semigroup_components.push(semi_set);
    }

    let mut periodic_block = None;
    if stats.counts.periodic > 0 {
        let data = periodic_data(config, problem, stats)?;
        let candidate = candidate_spectrum_per(&data, config.k_max, None, None);
        let point_images = SpectralSet::new(
            candidate.set.region.exp_map(t).unwrap_or(Region::Empty),
            format!("periodic component: exponential images of candidate points at t = {t}"),
        );
        let reals: Vec<f64> = match &candidate.set.region {
            Region::Discrete { points } => {
                let mut rs: Vec<f64> = points.iter().map(|(re, _)| *re).collect();
                rs.sort_by(f64::total_cmp);
                rs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
                rs
            }
            _ => Vec::new(),
        };
        let hull = annular_hull_set(&RealSet::Points(reals), t);
        generator_components.push(candidate.set.clone());
        semigroup_components.push(point_images.clone());
        semigroup_components.push(hull.clone());
        periodic_block = Some(PeriodicBlock {
            candidate,
            point_images,
            annular_hull: hull,
            weak_closure_note: "at p = 1 the semigroup spectrum is the closure of the \
                                exponential image of the generator spectrum"
                .into(),
            resolvent_uniformity: "uniform resolvent bounds across the bounded-period \
                                   strata: not checked"
                .into(),
        });
    }

    let mut aperiodic_block = None;
    if stats.counts.infinite > 0 {
        let t_grid = config.t_grid();
        let flow_cfg = config.flow_config();
        let fwd = infinite_class_averages(
            problem,
            &stats.points,
            &t_grid,
            AverageDirection::Forward,
            &flow_cfg,
        )
        .ok()
        .map(|g| g.gamma_hat);
        let bwd = infinite_class_averages(
            problem,
            &stats.points,
            &t_grid,
            AverageDirection::Backward,
            &flow_cfg,
        )
        .ok()
        .map(|g| g.gamma_hat);
        aperiodic_block = Some(AperiodicBlock {
            note: "aperiodic global component: spectrum invariant under rotations \
                   (semigroup) and imaginary translations (generator); only the \
                   trajectory-averaged type bounds below are computed"
                .into(),
            forward_tail_average: fwd.filter(|v| v.is_finite()),
            backward_tail_average: bwd.filter(|v| v.is_finite()),
        });
    }

    let generator_union = SpectralSet::new(
        Region::Union {
            members: generator_components
                .iter()
                .map(|s| s.region.clone())
                .collect(),
        },
        "union of the generator spectra over the phase-space components",
    );
    let semigroup_union = SpectralSet::new(
        Region::Union {
            members: semigroup_components
                .iter()
                .map(|s| s.region.clone())
                .collect(),
        },
        "union of the semigroup spectra over the phase-space components",
    );

    Ok(SpectraBlock {
        t,
        generator_components,
        semigroup_components,
        generator_union,
        semigroup_union,
        periodic: periodic_block,
        aperiodic: aperiodic_block,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub problem: ProblemSummary,
    pub classification: ClassifySummary,
    pub growth: GammaBlock,
    pub spectra: SpectraBlock,
    pub verification: VerificationReport,
    pub provenance: Provenance,
}

fn verify_config(config: &RunConfig) -> VerifyConfig {
    VerifyConfig {
        seed: config.seed,
        samples: config.verify_samples,
        classification: config.classification_config(),
    }
}

/// All verification suites, plus the closed-form trajectory check for
/// builtins whose characteristics solve exactly.
fn full_verification(
    config: &RunConfig,
    problem: &Problem,
) -> Result<VerificationReport, PipelineError> {
    let vcfg = verify_config(config);
    let mut report = run_verification(problem, &vcfg)?;
    if let Some(name) = &config.problem.builtin {
        let empty = serde_json::Map::new();
        let params = config.problem.params.as_ref().unwrap_or(&empty);
        if let Some(reference) = crate::builtins::reference_flow(name, params)? {
            report.push(crate::verify::closed_form_check(problem, &reference, &vcfg)?);
        }
    }
    Ok(report)
}

/// The full pipeline: classify, estimate growth, compose spectra, verify.
pub fn run_spectrum(config: &RunConfig) -> Result<AnalysisReport, PipelineError> {
    let (problem, stats, summary) = run_classify(config)?;
    let growth = growth_block(config, &problem, &stats)?;
    let spectra = spectra_block(config, &problem, &stats, &growth)?;
    let verification = full_verification(config, &problem)?;
    Ok(AnalysisReport {
        problem: ProblemSummary::of(&problem),
        classification: summary,
        growth,
        spectra,
        verification,
        provenance: Provenance {
            config_sha256: config.config_hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Verification entry point used by the CLI.
pub fn run_verify(config: &RunConfig) -> Result<VerificationReport, PipelineError> {
    let problem = config.problem.build()?;
    full_verification(config, &problem)
}

/// Deterministic pretty JSON body.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

/// CSV `t, inf_avg, admissible` of one growth estimate.
pub fn write_growth_csv<W: Write>(est: &GrowthEstimate, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "t,inf_avg,admissible")?;
    for ((t, avg), count) in est
        .t_grid
        .iter()
        .zip(&est.inf_avg)
        .zip(&est.admissible_counts)
    {
        if avg.is_finite() {
            writeln!(out, "{t:.12e},{avg:.12e},{count}")?;
        } else {
            writeln!(out, "{t:.12e},,{count}")?;
        }
    }
    Ok(())
}

/// CSV `t, norm, admissible, ambiguous_excluded` for log-norm slope fits.
pub fn write_norm_csv<W: Write>(rows: &[NormRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "t,norm,admissible,ambiguous_excluded")?;
    for row in rows {
        match row.norm {
            Some(v) => writeln!(
                out,
                "{:.12e},{v:.12e},{},{}",
                row.t, row.admissible, row.ambiguous_excluded
            )?,
            None => writeln!(
                out,
                "{:.12e},,{},{}",
                row.t, row.admissible, row.ambiguous_excluded
            )?,
        }
    }
    Ok(())
}

fn write_region_points<W: Write>(region: &Region, out: &mut W) -> std::io::Result<()> {
    match region {
        Region::Empty => Ok(()),
        Region::Discrete { points } => {
            for (re, im) in points {
                writeln!(out, "{re:.12e} {im:.12e}")?;
            }
            Ok(())
        }
        Region::Annulus { r_min, r_max } => {
            for r in [r_min, r_max] {
                write_circle(*r, out)?;
            }
            Ok(())
        }
        Region::Disk { radius, .. } => write_circle(*radius, out),
        Region::HalfPlane { re_max } => {
            // boundary line segment, plot-ready
            for k in 0..=64 {
                let im = -10.0 + 20.0 * k as f64 / 64.0;
                writeln!(out, "{re_max:.12e} {im:.12e}")?;
            }
            Ok(())
        }
        Region::VerticalLines { reals, im_spacing } => {
            for a in reals {
                let mut k = 0i64;
                loop {
                    let im = k as f64 * im_spacing;
                    if im.abs() > 10.0 && k != 0 {
                        break;
                    }
                    writeln!(out, "{a:.12e} {im:.12e}")?;
                    if *im_spacing == 0.0 {
                        break;
                    }
                    k = if k > 0 { -k } else { -k + 1 };
                }
            }
            Ok(())
        }
        Region::Union { members } => {
            for m in members {
                write_region_points(m, out)?;
            }
            Ok(())
        }
    }
}

fn write_circle<W: Write>(radius: f64, out: &mut W) -> std::io::Result<()> {
    for k in 0..=256 {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
        writeln!(
            out,
            "{:.12e} {:.12e}",
            radius * angle.cos(),
            radius * angle.sin()
        )?;
    }
    Ok(())
}

/// Two-column `re im` data for gnuplot, one indexed block per spectral
/// component.
pub fn write_spectrum_dat<W: Write>(spectra: &SpectraBlock, out: &mut W) -> std::io::Result<()> {
    for (kind, sets) in [
        ("generator", &spectra.generator_components),
        ("semigroup", &spectra.semigroup_components),
    ] {
        for set in sets.iter() {
            writeln!(out, "# {kind}: {}", set.provenance)?;
            write_region_points(&set.region, out)?;
            writeln!(out)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Map};

    fn rotation_config(h: f64) -> RunConfig {
        let mut params = Map::new();
        params.insert("h".into(), json!(h));
        let mut cfg = RunConfig::new(ProblemConfig::for_builtin("rotation", params));
        cfg.samples = 12;
        cfg.verify_samples = 8;
        cfg.horizon = 25.0;
        cfg.t_max = 4.0;
        cfg.t_steps = 8;
        cfg.k_max = 3;
        cfg
    }

    fn slab_config(c: f64) -> RunConfig {
        let mut params = Map::new();
        params.insert("c".into(), json!(c));
        let mut cfg = RunConfig::new(ProblemConfig::for_builtin("slab_constant", params));
        cfg.samples = 24;
        cfg.verify_samples = 8;
        cfg.horizon = 10.0;
        cfg.t_max = 2.0;
        cfg.t_steps = 8;
        cfg
    }

    #[test]
    fn classify_pipeline_rotation_fractions() {
        let (_, stats, summary) = run_classify(&rotation_config(0.0)).unwrap();
        assert_eq!(summary.total, 12);
        assert_eq!(stats.counts.periodic, 12);
        assert!((summary.fractions["omega3_periodic"] - 1.0).abs() < 1e-12);
        assert!(summary.period_bound_note.is_some());
    }

    #[test]
    fn spectrum_report_rotation_has_periodic_block() {
        let report = run_spectrum(&rotation_config(0.0)).unwrap();
        let periodic = report.spectra.periodic.as_ref().expect("periodic block");
        assert_eq!(periodic.candidate.k_max, 3);
        // sigma(T) = i Z truncated: the candidate set contains i
        assert!(periodic
            .candidate
            .set
            .region
            .contains(num_complex::Complex64::new(0.0, 1.0), 1e-6));
        // the hull of theta = 0 is the unit circle
        assert_eq!(periodic.annular_hull.region, Region::unit_circle());
        assert!(report.verification.passed);
    }

    #[test]
    fn spectrum_report_slab_goes_nilpotent() {
        let report = run_spectrum(&slab_config(1.0)).unwrap();
        assert!(report.growth.nilpotent);
        assert!(report.growth.gamma_min.is_none());
        // semigroup spectrum degenerates to {0} past the stay time
        let found = report.spectra.semigroup_components.iter().any(
            |s| matches!(&s.region, Region::Discrete { points } if points == &vec![(0.0, 0.0)]),
        );
        assert!(found, "{:?}", report.spectra.semigroup_components);
    }

    #[test]
    fn union_is_composed_from_components() {
        let report = run_spectrum(&rotation_config(0.3)).unwrap();
        let Region::Union { members } = &report.spectra.generator_union.region else {
            panic!("expected union");
        };
        let component_regions: Vec<Region> = report
            .spectra
            .generator_components
            .iter()
            .map(|s| s.region.clone())
            .collect();
        assert_eq!(members, &component_regions);
    }

    #[test]
    fn every_component_carries_provenance() {
        let report = run_spectrum(&rotation_config(0.3)).unwrap();
        for set in report
            .spectra
            .generator_components
            .iter()
            .chain(&report.spectra.semigroup_components)
        {
            assert!(!set.provenance.is_empty());
        }
    }

    #[test]
    fn report_bodies_are_byte_identical_for_equal_configs() {
        let a = to_json_pretty(&run_spectrum(&rotation_config(0.0)).unwrap());
        let b = to_json_pretty(&run_spectrum(&rotation_config(0.0)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_change_the_hash_not_the_schema() {
        let mut c1 = rotation_config(0.0);
        let mut c2 = rotation_config(0.0);
        c1.seed = 1;
        c2.seed = 2;
        assert_ne!(c1.config_hash(), c2.config_hash());
        assert_eq!(c1.config_hash().len(), 64);
    }

    #[test]
    fn growth_csv_handles_starved_rows() {
        let est = GrowthEstimate {
            t_grid: vec![0.5, 1.5],
            inf_avg: vec![0.7, f64::INFINITY],
            admissible_counts: vec![3, 0],
            gamma_hat: f64::INFINITY,
            nilpotent: true,
            censored: true,
        };
        let mut buf = Vec::new();
        write_growth_csv(&est, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,inf_avg,admissible");
        assert!(lines[2].contains(",,0"));
    }

    #[test]
    fn spectrum_dat_emits_blocks() {
        let report = run_spectrum(&rotation_config(0.0)).unwrap();
        let mut buf = Vec::new();
        write_spectrum_dat(&report.spectra, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# generator:"));
        assert!(text.contains("# semigroup:"));
    }
}
