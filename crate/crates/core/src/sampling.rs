//! Deterministic point sampling for classification and estimation runs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::problem::{Problem, ProblemError};

/// Seeded RNG used everywhere a pipeline needs randomness; ChaCha keeps
/// streams identical across platforms, which the report determinism
/// guarantee relies on.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw one point uniformly from an axis-aligned box.
pub fn sample_box(rng: &mut impl Rng, bounds: &[[f64; 2]]) -> Vec<f64> {
    bounds
        .iter()
        .map(|b| {
            if b[0] == b[1] {
                b[0]
            } else {
                rng.random_range(b[0]..b[1])
            }
        })
        .collect()
}

/// Draw `n` points from `bounds` that lie in the problem domain, by
/// rejection. Errors when the acceptance rate collapses (box and domain
/// barely intersect) or when no box is available.
pub fn sample_domain(
    problem: &Problem,
    bounds: Option<&[[f64; 2]]>,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>, ProblemError> {
    let bounds = bounds.or_else(|| problem.sample_box()).ok_or_else(|| {
        ProblemError::InvalidRegion(
            "no sampling box: domain is unbounded and no sample_box was supplied".into(),
        )
    })?;
    if bounds.len() != problem.dimension() {
        return Err(ProblemError::DimensionMismatch(format!(
            "sample box has {} axes, problem dimension is {}",
            bounds.len(),
            problem.dimension()
        )));
    }
    let mut points = Vec::with_capacity(n);
    let mut rejected = 0usize;
    while points.len() < n {
        let x = sample_box(rng, bounds);
        if problem.domain().contains(&x) {
            points.push(x);
        } else {
            rejected += 1;
            if rejected > 1000 * (n + 10) {
                return Err(ProblemError::InvalidRegion(
                    "rejection sampling starved: sample box barely meets the domain".into(),
                ));
            }
        }
    }
    Ok(points)
}
