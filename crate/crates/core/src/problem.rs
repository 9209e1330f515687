//! Transport problem definitions: vector field, absorption, domain, exponent.
//!
//! A [`Problem`] bundles everything the analysis pipelines consume. The
//! field carries a Lipschitz constant `kappa` (used by the period lower
//! bound and growth estimates) and a divergence that is either analytic or
//! a scale-aware central finite difference.

use std::sync::Arc;

use rand::Rng;

use crate::linalg::{dist, norm};

/// Vector-valued field callback writing `F(x)` into `out`.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Scalar callback on phase-space points.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Domain membership predicate. Must be pure and deterministic.
pub type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProblemError {
    #[error("point lies outside the problem domain")]
    OutsideDomain,
    #[error("kappa must be positive and finite (got {0})")]
    InvalidKappa(f64),
    #[error("exponent p must satisfy 1 <= p < inf (got {0})")]
    InvalidExponent(f64),
    #[error("unknown builtin problem '{0}'")]
    UnknownBuiltin(String),
    #[error("builtin '{name}': {message}")]
    Configuration { name: String, message: String },
    #[error("invalid sampling region: {0}")]
    InvalidRegion(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// How the divergence of a field is computed.
#[derive(Clone)]
pub enum Divergence {
    /// Exact closure, e.g. from a symbolic derivative or a known formula.
    Analytic(ScalarFn),
    /// Central finite differences with step `1e-5 * (1 + |x|)`.
    FiniteDifference,
}

const FD_STEP_SCALE: f64 = 1e-5;

/// A Lipschitz vector field together with its divergence and constant.
#[derive(Clone)]
pub struct VectorField {
    dimension: usize,
    eval: FieldFn,
    divergence: Divergence,
    kappa: f64,
}

impl VectorField {
    pub fn new(
        dimension: usize,
        eval: FieldFn,
        divergence: Divergence,
        kappa: f64,
    ) -> Result<Self, ProblemError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(ProblemError::InvalidKappa(kappa));
        }
        Ok(VectorField {
            dimension,
            eval,
            divergence,
            kappa,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Declared Lipschitz constant (an upper bound for the true one).
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Replace the declared Lipschitz constant. Used by verification
    /// drills that deliberately corrupt the declaration.
    pub fn with_kappa(mut self, kappa: f64) -> Result<Self, ProblemError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(ProblemError::InvalidKappa(kappa));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dimension);
        debug_assert_eq!(out.len(), self.dimension);
        (self.eval)(x, out);
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.eval_into(x, &mut out);
        out
    }

    /// Divergence at `x`, analytic when available.
    pub fn divergence(&self, x: &[f64]) -> f64 {
        match &self.divergence {
            Divergence::Analytic(f) => f(x),
            Divergence::FiniteDifference => self.divergence_fd(x),
        }
    }

    /// Central finite-difference divergence, regardless of how the field
    /// declares its divergence. Serves as the cross-check route.
    pub fn divergence_fd(&self, x: &[f64]) -> f64 {
        let step = FD_STEP_SCALE * (1.0 + norm(x));
        let mut probe = x.to_vec();
        let mut fwd = vec![0.0; self.dimension];
        let mut bwd = vec![0.0; self.dimension];
        let mut div = 0.0;
        for i in 0..self.dimension {
            let saved = probe[i];
            probe[i] = saved + step;
            (self.eval)(&probe, &mut fwd);
            probe[i] = saved - step;
            (self.eval)(&probe, &mut bwd);
            probe[i] = saved;
            div += (fwd[i] - bwd[i]) / (2.0 * step);
        }
        div
    }

    /// Step used by [`Self::divergence_fd`] at `x`; exposed so tolerance
    /// models in tests can refer to the actual value.
    pub fn fd_step(x: &[f64]) -> f64 {
        FD_STEP_SCALE * (1.0 + norm(x))
    }
}

/// Phase-space domain given by a pure membership predicate. The boundary
/// is only ever located implicitly through sign changes of membership
/// along trajectories; no distance function is required.
#[derive(Clone)]
pub struct Domain {
    contains: DomainFn,
    bounding_box: Option<Vec<[f64; 2]>>,
    description: String,
}

impl Domain {
    pub fn new(
        contains: DomainFn,
        bounding_box: Option<Vec<[f64; 2]>>,
        description: impl Into<String>,
    ) -> Self {
        Domain {
            contains,
            bounding_box,
            description: description.into(),
        }
    }

    /// The whole space: membership always holds.
    pub fn all(description: impl Into<String>) -> Self {
        Domain::new(Arc::new(|_x: &[f64]| true), None, description)
    }

    /// Open axis-aligned box; infinite bounds leave that side unconstrained.
    pub fn open_box(bounds: Vec<[f64; 2]>, description: impl Into<String>) -> Self {
        let all_finite = bounds.iter().all(|b| b[0].is_finite() && b[1].is_finite());
        let bbox = all_finite.then(|| bounds.clone());
        let pred = move |x: &[f64]| {
            x.iter()
                .zip(&bounds)
                .all(|(xi, b)| *xi > b[0] && *xi < b[1])
        };
        Domain::new(Arc::new(pred), bbox, description)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.contains)(x)
    }

    /// Axis-aligned box containing the domain, when the domain is bounded.
    pub fn bounding_box(&self) -> Option<&[[f64; 2]]> {
        self.bounding_box.as_deref()
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain")
            .field("description", &self.description)
            .field("bounding_box", &self.bounding_box)
            .finish_non_exhaustive()
    }
}

/// Full analysis input: field `F`, absorption `h`, domain, exponent `p`.
///
/// All members are immutable after construction and the closures must be
/// pure, so a `Problem` can be shared across worker threads.
#[derive(Clone)]
pub struct Problem {
    field: VectorField,
    absorption: ScalarFn,
    h_inf: f64,
    domain: Domain,
    p: f64,
    description: String,
    sample_box: Option<Vec<[f64; 2]>>,
}

impl Problem {
    pub fn new(
        field: VectorField,
        absorption: ScalarFn,
        h_inf: f64,
        domain: Domain,
        p: f64,
        description: impl Into<String>,
    ) -> Result<Self, ProblemError> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(ProblemError::InvalidExponent(p));
        }
        Ok(Problem {
            field,
            absorption,
            h_inf,
            domain,
            p,
            description: description.into(),
            sample_box: None,
        })
    }

    /// Attach a default box for point samplers. Falls back to the domain
    /// bounding box when absent.
    pub fn with_sample_box(mut self, sample_box: Vec<[f64; 2]>) -> Self {
        self.sample_box = Some(sample_box);
        self
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.field.dimension()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `1/p*` where `p*` is the conjugate exponent: `1 - 1/p`, exactly 0
    /// at `p = 1`.
    pub fn conjugate_weight(&self) -> f64 {
        if self.p == 1.0 {
            0.0
        } else {
            1.0 - 1.0 / self.p
        }
    }

    /// Declared lower bound for the absorption function.
    pub fn h_inf(&self) -> f64 {
        self.h_inf
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn sample_box(&self) -> Option<&[[f64; 2]]> {
        self.sample_box
            .as_deref()
            .or_else(|| self.domain.bounding_box())
    }

    /// Absorption `h(x)` without a membership check; integrators call this
    /// at quadrature nodes that may sit slightly outside the domain, so
    /// the closure must be defined on a neighborhood of it.
    pub fn h(&self, x: &[f64]) -> f64 {
        (self.absorption)(x)
    }

    /// Shared handle to the absorption closure.
    pub fn absorption_closure(&self) -> ScalarFn {
        Arc::clone(&self.absorption)
    }

    /// `nu(x) = h(x) + div F(x)`, unchecked.
    pub fn nu_raw(&self, x: &[f64]) -> f64 {
        self.h(x) + self.field.divergence(x)
    }

    /// `Sigma_p(x) = h(x) + (1/p*) div F(x)`, unchecked.
    pub fn sigma_p_raw(&self, x: &[f64]) -> f64 {
        self.h(x) + self.conjugate_weight() * self.field.divergence(x)
    }

    /// `nu(x)` with the domain-membership precondition enforced.
    pub fn nu(&self, x: &[f64]) -> Result<f64, ProblemError> {
        if !self.domain.contains(x) {
            return Err(ProblemError::OutsideDomain);
        }
        Ok(self.nu_raw(x))
    }

    /// `Sigma_p(x)` with the domain-membership precondition enforced.
    pub fn sigma_p(&self, x: &[f64]) -> Result<f64, ProblemError> {
        if !self.domain.contains(x) {
            return Err(ProblemError::OutsideDomain);
        }
        Ok(self.sigma_p_raw(x))
    }

    /// Sampled check of the declared absorption lower bound; returns the
    /// points violating `h(x) >= h_inf`. Violations are data-integrity
    /// warnings, never hard errors: `h` is only assumed measurable.
    pub fn absorption_violations(&self, points: &[Vec<f64>]) -> Vec<usize> {
        points
            .iter()
            .enumerate()
            .filter(|(_, x)| self.h(x) < self.h_inf)
            .map(|(i, _)| i)
            .collect()
    }
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("description", &self.description)
            .field("dimension", &self.dimension())
            .field("p", &self.p)
            .field("kappa", &self.field.kappa())
            .finish_non_exhaustive()
    }
}

/// Sampled Lipschitz quotient of the field over an axis-aligned region:
/// the max of `|F(x1)-F(x2)| / |x1-x2|` over `n_pairs` random pairs.
/// A lower bound for the true constant; never exceeds a correctly
/// declared `kappa`.
// negated comparisons below deliberately reject NaN bounds
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn estimate_lipschitz(
    problem: &Problem,
    region: &[[f64; 2]],
    n_pairs: usize,
    rng: &mut impl Rng,
) -> Result<f64, ProblemError> {
    if region.len() != problem.dimension() {
        return Err(ProblemError::DimensionMismatch(format!(
            "region has {} axes, problem dimension is {}",
            region.len(),
            problem.dimension()
        )));
    }
    if n_pairs == 0 {
        return Err(ProblemError::InvalidRegion(
            "n_pairs must be at least 1".into(),
        ));
    }
    if region
        .iter()
        .any(|b| !(b[1] > b[0]) || !b[0].is_finite() || !b[1].is_finite())
    {
        return Err(ProblemError::InvalidRegion(
            "region must have positive volume and finite bounds".into(),
        ));
    }
    let dim = problem.dimension();
    let mut best = 0.0_f64;
    let mut f1 = vec![0.0; dim];
    let mut f2 = vec![0.0; dim];
    for _ in 0..n_pairs {
        let x1: Vec<f64> = region
            .iter()
            .map(|b| rng.random_range(b[0]..b[1]))
            .collect();
        let x2: Vec<f64> = region
            .iter()
            .map(|b| rng.random_range(b[0]..b[1]))
            .collect();
        let gap = dist(&x1, &x2);
        if gap < 1e-12 {
            continue;
        }
        problem.field().eval_into(&x1, &mut f1);
        problem.field().eval_into(&x2, &mut f2);
        best = best.max(dist(&f1, &f2) / gap);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde_json::Map;

    fn no_params() -> Map<String, serde_json::Value> {
        Map::new()
    }

    #[test]
    fn sigma_p_free_streaming_is_zero() {
        let prob = builtin("free_streaming", &no_params()).unwrap();
        for x in [[0.5, 1.0], [-0.2, 0.7]] {
            assert_eq!(prob.sigma_p(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn sigma_p_rotation_constant_absorption() {
        // div F = 0 symbolically, so Sigma_p = h = c regardless of p
        let mut params = no_params();
        params.insert("h".into(), serde_json::json!(0.35));
        params.insert("p".into(), serde_json::json!(2.0));
        let prob = builtin("rotation", &params).unwrap();
        assert!((prob.sigma_p(&[1.0, -0.5]).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn sigma_p_vfp_at_p_one_equals_h() {
        let mut params = no_params();
        params.insert("p".into(), serde_json::json!(1.0));
        let prob = builtin("vfp_fourier", &params).unwrap();
        // x = (xi, eta), N = 1: h = eta^2 - 1 and 1/p* = 0 at p = 1
        let x = [0.3, 1.7];
        let expected = 1.7_f64 * 1.7 - 1.0;
        assert!((prob.sigma_p(&x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn nu_vfp_is_eta_squared() {
        let prob = builtin("vfp_fourier", &no_params()).unwrap();
        let x = [0.3, 1.7];
        assert!((prob.nu(&x).unwrap() - 1.7_f64 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn nu_divergence_free_zero_absorption_vanishes() {
        let prob = builtin("free_streaming", &no_params()).unwrap();
        assert_eq!(prob.nu(&[0.4, -1.1]).unwrap(), 0.0);
    }

    #[test]
    fn nu_lorentz_constant_absorption() {
        let mut params = no_params();
        params.insert("h".into(), serde_json::json!(2.5));
        let prob = builtin("lorentz", &params).unwrap();
        let x = [0.1, -0.2, 0.0, 0.5, 0.4, -0.3];
        assert!((prob.nu(&x).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn membership_precondition_enforced() {
        let prob = builtin("slab_constant", &no_params()).unwrap();
        assert!(matches!(
            prob.sigma_p(&[1.5]),
            Err(ProblemError::OutsideDomain)
        ));
        assert!(matches!(prob.nu(&[-0.1]), Err(ProblemError::OutsideDomain)));
    }

    #[test]
    fn nu_minus_sigma_p_is_divergence_over_p() {
        let mut params = no_params();
        params.insert("p".into(), serde_json::json!(2.0));
        let prob = builtin("vfp_fourier", &params).unwrap();
        let x = [0.9, -0.4];
        let gap = prob.nu(&x).unwrap() - prob.sigma_p(&x).unwrap();
        let expected = prob.field().divergence(&x) / prob.p();
        assert!((gap - expected).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_estimate_rotation_close_to_one() {
        let prob = builtin("rotation", &no_params()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let est = estimate_lipschitz(&prob, &[[-1.0, 1.0], [-1.0, 1.0]], 4000, &mut rng).unwrap();
        assert!(est > 0.0 && est <= 1.0 + 1e-9, "estimate {est}");
    }

    #[test]
    fn lipschitz_estimate_constant_field_is_zero() {
        let prob = builtin("slab_constant", &no_params()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = estimate_lipschitz(&prob, &[[0.0, 1.0]], 500, &mut rng).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn lipschitz_estimate_linear_field_is_exact() {
        // F(x) = 2x has Lipschitz constant exactly 2
        let field = VectorField::new(
            1,
            Arc::new(|x: &[f64], out: &mut [f64]| out[0] = 2.0 * x[0]),
            Divergence::Analytic(Arc::new(|_| 2.0)),
            2.0,
        )
        .unwrap();
        let prob = Problem::new(
            field,
            Arc::new(|_: &[f64]| 0.0),
            0.0,
            Domain::all("line"),
            2.0,
            "doubling field",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = estimate_lipschitz(&prob, &[[-1.0, 1.0]], 200, &mut rng).unwrap();
        assert!((est - 2.0).abs() < 1e-9, "estimate {est}");
    }

    #[test]
    fn degenerate_region_rejected() {
        let prob = builtin("slab_constant", &no_params()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            estimate_lipschitz(&prob, &[[0.5, 0.5]], 10, &mut rng),
            Err(ProblemError::InvalidRegion(_))
        ));
    }

    #[test]
    fn finite_difference_divergence_matches_analytic_on_builtins() {
        let names = [
            "rotation",
            "lorentz",
            "vfp_fourier",
            "free_streaming",
            "nordstrom",
            "gradient",
            "slab_constant",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in names {
            let prob = builtin(name, &no_params()).unwrap();
            let bx = prob.sample_box().expect("sample box").to_vec();
            for _ in 0..100 {
                let x: Vec<f64> = bx.iter().map(|b| rng.random_range(b[0]..b[1])).collect();
                let analytic = prob.field().divergence(&x);
                let fd = prob.field().divergence_fd(&x);
                let step = VectorField::fd_step(&x);
                assert!(
                    (analytic - fd).abs() <= 10.0 * step * step + 1e-12,
                    "{name}: divergence mismatch at {x:?}: {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn declared_kappa_never_beaten_by_samples() {
        let names = [
            "rotation",
            "lorentz",
            "vfp_fourier",
            "free_streaming",
            "nordstrom",
            "gradient",
            "slab_constant",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in names {
            let prob = builtin(name, &no_params()).unwrap();
            let bx = prob.sample_box().expect("sample box").to_vec();
            let est = estimate_lipschitz(&prob, &bx, 2000, &mut rng).unwrap();
            let kappa = prob.field().kappa();
            assert!(
                est <= kappa * (1.0 + 1e-6),
                "{name}: sampled Lipschitz {est} exceeds declared {kappa}"
            );
        }
    }

    #[test]
    fn absorption_violations_reported_not_fatal() {
        // declare h_inf = 1 but supply h = 0: the check flags every point
        let field = VectorField::new(
            1,
            Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0),
            Divergence::Analytic(Arc::new(|_| 0.0)),
            1.0,
        )
        .unwrap();
        let prob = Problem::new(
            field,
            Arc::new(|_: &[f64]| 0.0),
            1.0,
            Domain::all("line"),
            2.0,
            "inconsistent h_inf",
        )
        .unwrap();
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(prob.absorption_violations(&pts), vec![0, 1]);
    }
}
