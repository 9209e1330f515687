//! Built-in transport problems with analytic divergences and known
//! Lipschitz constants.
//!
//! Every builtin accepts an optional `"p"` (default 2) and `"kappa"`
//! (override of the declared Lipschitz constant, mainly for verification
//! drills). Unknown parameters are rejected.

use std::sync::Arc;

use serde_json::{Map, Value};

use crate::linalg::{cross3, dot, norm};
use crate::problem::{Divergence, Domain, Problem, ProblemError, ScalarFn, VectorField};

struct Params<'a> {
    name: &'static str,
    map: &'a Map<String, Value>,
}

impl<'a> Params<'a> {
    fn new(
        name: &'static str,
        map: &'a Map<String, Value>,
        known: &'static [&'static str],
    ) -> Result<Self, ProblemError> {
        for key in map.keys() {
            if !known.contains(&key.as_str()) && key != "p" && key != "kappa" {
                return Err(ProblemError::Configuration {
                    name: name.into(),
                    message: format!("unknown parameter '{key}'"),
                });
            }
        }
        Ok(Params { name, map })
    }

    fn config_err(&self, message: impl Into<String>) -> ProblemError {
        ProblemError::Configuration {
            name: self.name.into(),
            message: message.into(),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ProblemError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| self.config_err(format!("parameter '{key}' must be a number"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ProblemError> {
        let v = self.f64_or(key, default as f64)?;
        if v.fract() != 0.0 || v < 0.0 {
            return Err(
                self.config_err(format!("parameter '{key}' must be a non-negative integer"))
            );
        }
        Ok(v as usize)
    }

    fn vec3_or(&self, key: &str, default: [f64; 3]) -> Result<[f64; 3], ProblemError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(Value::Array(items)) if items.len() == 3 => {
                let mut out = [0.0; 3];
                for (slot, item) in out.iter_mut().zip(items) {
                    *slot = item.as_f64().ok_or_else(|| {
                        self.config_err(format!("parameter '{key}' must hold numbers"))
                    })?;
                }
                Ok(out)
            }
            Some(_) => Err(self.config_err(format!("parameter '{key}' must be a 3-vector"))),
        }
    }

    fn exponent(&self) -> Result<f64, ProblemError> {
        self.f64_or("p", 2.0)
    }
}

fn constant_fn(c: f64) -> ScalarFn {
    Arc::new(move |_x: &[f64]| c)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "rotation",
    "lorentz",
    "vfp_fourier",
    "free_streaming",
    "nordstrom",
    "gradient",
    "slab_constant",
];

/// Construct one of the built-in problems from a parameter map.
pub fn builtin(name: &str, params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let mut problem = match name {
        "rotation" => rotation(params)?,
        "lorentz" => lorentz(params)?,
        "vfp_fourier" => vfp_fourier(params)?,
        "free_streaming" => free_streaming(params)?,
        "nordstrom" => nordstrom(params)?,
        "gradient" => gradient(params)?,
        "slab_constant" => slab_constant(params)?,
        other => return Err(ProblemError::UnknownBuiltin(other.into())),
    };
    if let Some(v) = params.get("kappa") {
        let kappa = v.as_f64().ok_or_else(|| ProblemError::Configuration {
            name: name.into(),
            message: "parameter 'kappa' must be a number".into(),
        })?;
        problem = replace_kappa(problem, kappa)?;
    }
    Ok(problem)
}

/// Exact flow map `(x, t) -> Phi(x, t)`, available for the builtins
/// whose characteristics solve in closed form.
pub type ReferenceFlow = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Closed-form characteristics for cross-checking the integrator, when
/// the builtin has them (`lorentz` and `nordstrom` do not, in full).
pub fn reference_flow(
    name: &str,
    params: &Map<String, Value>,
) -> Result<Option<ReferenceFlow>, ProblemError> {
    match name {
        "rotation" => {
            let p = Params::new("rotation", params, &["omega", "h"])?;
            let omega = p.f64_or("omega", 1.0)?;
            Ok(Some(Arc::new(move |x: &[f64], t: f64| {
                let (sin, cos) = (omega * t).sin_cos();
                vec![x[0] * cos - x[1] * sin, x[0] * sin + x[1] * cos]
            })))
        }
        "vfp_fourier" => {
            let p = Params::new("vfp_fourier", params, &["n"])?;
            let n = p.usize_or("n", 1)?;
            Ok(Some(Arc::new(move |x: &[f64], t: f64| {
                // each (xi_i, eta_i) pair spirals independently with
                // rate e^{t/2} and angular frequency sqrt(3)/2
                let w = 3.0_f64.sqrt() / 2.0;
                let amp = (2.0 / 3.0_f64.sqrt()) * (t / 2.0).exp();
                let (sin, cos) = (w * t).sin_cos();
                let mut out = vec![0.0; 2 * n];
                for i in 0..n {
                    let (xi, eta) = (x[i], x[n + i]);
                    out[i] = amp * ((w * cos - 0.5 * sin) * xi + sin * eta);
                    out[n + i] = amp * ((w * cos + 0.5 * sin) * eta - sin * xi);
                }
                out
            })))
        }
        "free_streaming" => {
            let p = Params::new("free_streaming", params, &["n", "h"])?;
            let n = p.usize_or("n", 1)?;
            Ok(Some(Arc::new(move |x: &[f64], t: f64| {
                let mut out = x.to_vec();
                for i in 0..n {
                    out[i] += t * x[n + i];
                }
                out
            })))
        }
        "gradient" => {
            let p = Params::new("gradient", params, &["a", "n", "h"])?;
            let a = p.f64_or("a", 1.0)?;
            Ok(Some(Arc::new(move |x: &[f64], t: f64| {
                let decay = (-a * t).exp();
                x.iter().map(|c| c * decay).collect()
            })))
        }
        "slab_constant" => {
            let _ = Params::new("slab_constant", params, &["c"])?;
            Ok(Some(Arc::new(|x: &[f64], t: f64| vec![x[0] + t])))
        }
        "lorentz" | "nordstrom" => Ok(None),
        other => Err(ProblemError::UnknownBuiltin(other.into())),
    }
}

fn replace_kappa(problem: Problem, kappa: f64) -> Result<Problem, ProblemError> {
    let field = problem.field().clone().with_kappa(kappa)?;
    let sample_box = problem.sample_box().map(<[[f64; 2]]>::to_vec);
    let absorption = problem.absorption_closure();
    let mut rebuilt = Problem::new(
        field,
        absorption,
        problem.h_inf(),
        problem.domain().clone(),
        problem.p(),
        problem.description().to_string(),
    )?;
    if let Some(bx) = sample_box {
        rebuilt = rebuilt.with_sample_box(bx);
    }
    Ok(rebuilt)
}

/// Planar rotation `F(x, y) = (-omega*y, omega*x)` on all of R^2.
/// Parameters: `omega` (default 1), `h` (constant absorption, default 0).
fn rotation(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("rotation", params, &["omega", "h"])?;
    let omega = p.f64_or("omega", 1.0)?;
    if omega == 0.0 {
        return Err(p.config_err("omega must be nonzero"));
    }
    let h = p.f64_or("h", 0.0)?;
    let field = VectorField::new(
        2,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = -omega * x[1];
            out[1] = omega * x[0];
        }),
        Divergence::Analytic(Arc::new(|_| 0.0)),
        omega.abs(),
    )?;
    let problem = Problem::new(
        field,
        constant_fn(h),
        h,
        Domain::all("all of R^2"),
        p.exponent()?,
        format!("rotation (omega = {omega}, h = {h})"),
    )?;
    Ok(problem.with_sample_box(vec![[-2.0, 2.0], [-2.0, 2.0]]))
}

/// Lorentz force `F(x, v) = (v, q (E + v x B))` on a slab bounded along
/// `B`, times all velocities. Parameters: `q`, `e`, `b`, `width`, `h`.
fn lorentz(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("lorentz", params, &["q", "e", "b", "width", "h"])?;
    let q = p.f64_or("q", 1.0)?;
    let e_field = p.vec3_or("e", [0.0, 0.0, 1.0])?;
    let b_field = p.vec3_or("b", [0.0, 0.0, 1.0])?;
    let width = p.f64_or("width", 2.0)?;
    let h = p.f64_or("h", 0.0)?;
    let b_len = norm(&b_field);
    if b_len == 0.0 {
        return Err(p.config_err("magnetic field must be nonzero"));
    }
    if width <= 0.0 {
        return Err(p.config_err("slab width must be positive"));
    }
    // |DF| for the linear map (x, v) -> (v, q v x B)
    let kappa = (1.0 + q * q * b_len * b_len).sqrt();
    let field = VectorField::new(
        6,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            let v = [x[3], x[4], x[5]];
            let vxb = cross3(&v, &b_field);
            out[0] = v[0];
            out[1] = v[1];
            out[2] = v[2];
            out[3] = q * (e_field[0] + vxb[0]);
            out[4] = q * (e_field[1] + vxb[1]);
            out[5] = q * (e_field[2] + vxb[2]);
        }),
        // div_x(v) = 0 and div_v(v x B) = 0
        Divergence::Analytic(Arc::new(|_| 0.0)),
        kappa,
    )?;
    let b_hat: Vec<f64> = b_field.iter().map(|c| c / b_len).collect();
    let half_width = width / 2.0;
    let domain = Domain::new(
        Arc::new(move |x: &[f64]| dot(&x[..3], &b_hat).abs() < half_width),
        None,
        "slab bounded along B, all velocities",
    );
    let problem = Problem::new(
        field,
        constant_fn(h),
        h,
        domain,
        p.exponent()?,
        format!(
            "lorentz force (q = {q}, <E,B> = {})",
            dot(&e_field, &b_field)
        ),
    )?;
    let a = half_width.min(1.0) * 0.999;
    let mut bx = vec![[-1.0, 1.0]; 6];
    for (i, slot) in bx.iter_mut().enumerate().take(3) {
        // shrink the position box along B so rejection stays cheap
        let along = b_field[i].abs() / b_len;
        if along > 0.9 {
            *slot = [-a, a];
        }
    }
    Ok(problem.with_sample_box(bx))
}

/// Fourier-side Vlasov-Fokker-Planck field `F(xi, eta) = (eta, eta - xi)`
/// on R^{2N} with `h = |eta|^2 - N`. Parameter: `n` (default 1).
fn vfp_fourier(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("vfp_fourier", params, &["n"])?;
    let n = p.usize_or("n", 1)?;
    if n == 0 {
        return Err(p.config_err("n must be at least 1"));
    }
    let dim = 2 * n;
    let field = VectorField::new(
        dim,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            let (xi, eta) = x.split_at(n);
            for i in 0..n {
                out[i] = eta[i];
                out[n + i] = eta[i] - xi[i];
            }
        }),
        Divergence::Analytic(Arc::new(move |_| n as f64)),
        // operator norm of [[0, I], [-I, I]] is the golden ratio
        (1.0 + 5.0_f64.sqrt()) / 2.0,
    )?;
    let absorption: ScalarFn = Arc::new(move |x: &[f64]| {
        let eta = &x[n..];
        eta.iter().map(|c| c * c).sum::<f64>() - n as f64
    });
    let problem = Problem::new(
        field,
        absorption,
        -(n as f64),
        Domain::all("all of R^{2N}"),
        p.exponent()?,
        format!("Fourier-side Vlasov-Fokker-Planck (N = {n})"),
    )?;
    Ok(problem.with_sample_box(vec![[-1.0, 1.0]; dim]))
}

/// Free streaming `F(x, v) = (v, 0)` on R^{2n}. Parameters: `n` (spatial
/// dimension, default 1), `h` (constant absorption, default 0).
fn free_streaming(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("free_streaming", params, &["n", "h"])?;
    let n = p.usize_or("n", 1)?;
    if n == 0 {
        return Err(p.config_err("n must be at least 1"));
    }
    let h = p.f64_or("h", 0.0)?;
    let dim = 2 * n;
    let field = VectorField::new(
        dim,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = x[n + i];
                out[n + i] = 0.0;
            }
        }),
        Divergence::Analytic(Arc::new(|_| 0.0)),
        1.0,
    )?;
    let problem = Problem::new(
        field,
        constant_fn(h),
        h,
        Domain::all("all of R^{2n}"),
        p.exponent()?,
        format!("free streaming (n = {n}, h = {h})"),
    )?;
    Ok(problem.with_sample_box(vec![[-1.0, 1.0]; dim]))
}

/// One-dimensional relativistic transport on `(0,1) x R`:
/// `F(x, p) = (p / sqrt(1+p^2), -sqrt(1+p^2) phi'(x))` with the
/// repulsive quadratic potential `phi(x) = -a (x - 1/2)^2`. The quantity
/// `sqrt(1+p^2) e^{phi(x)}` is conserved, and with this sign the
/// momentum grows toward the boundary, so every trajectory off the
/// central rest point leaves the slab in finite time in both directions.
/// Parameters: `a` (default 1), `p_ref` (momentum range for the declared
/// Lipschitz constant, default 10).
fn nordstrom(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("nordstrom", params, &["a", "p_ref", "h"])?;
    let a = p.f64_or("a", 1.0)?;
    if a <= 0.0 {
        return Err(p.config_err("potential coefficient a must be positive"));
    }
    let p_ref = p.f64_or("p_ref", 10.0)?;
    let h = p.f64_or("h", 0.0)?;
    // phi'(x) = -2 a (x - 1/2)
    let field = VectorField::new(
        2,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            let mom = x[1];
            let root = (1.0 + mom * mom).sqrt();
            out[0] = mom / root;
            out[1] = root * 2.0 * a * (x[0] - 0.5);
        }),
        Divergence::Analytic(Arc::new(move |x: &[f64]| {
            let mom = x[1];
            (mom / (1.0 + mom * mom).sqrt()) * 2.0 * a * (x[0] - 0.5)
        })),
        // Frobenius bound of the Jacobian valid for |p| <= p_ref
        (1.0 + (1.0 + p_ref * p_ref) * 4.0 * a * a + a * a).sqrt(),
    )?;
    let problem = Problem::new(
        field,
        constant_fn(h),
        h,
        Domain::open_box(
            vec![[0.0, 1.0], [f64::NEG_INFINITY, f64::INFINITY]],
            "(0,1) x R",
        ),
        p.exponent()?,
        format!("relativistic slab transport (a = {a})"),
    )?;
    Ok(problem.with_sample_box(vec![[0.0, 1.0], [-3.0, 3.0]]))
}

/// Gradient flow of the quadratic potential `V(x) = (a/2)|x|^2`:
/// `F(x) = -a x` on R^n. Parameters: `a` (default 1, may be negative for
/// the expanding flow), `n` (default 1), `h`.
fn gradient(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("gradient", params, &["a", "n", "h"])?;
    let a = p.f64_or("a", 1.0)?;
    if a == 0.0 {
        return Err(p.config_err("a must be nonzero"));
    }
    let n = p.usize_or("n", 1)?;
    if n == 0 {
        return Err(p.config_err("n must be at least 1"));
    }
    let h = p.f64_or("h", 0.0)?;
    let field = VectorField::new(
        n,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = -a * xi;
            }
        }),
        Divergence::Analytic(Arc::new(move |_| -a * n as f64)),
        a.abs(),
    )?;
    let problem = Problem::new(
        field,
        constant_fn(h),
        h,
        Domain::all("all of R^n"),
        p.exponent()?,
        format!("gradient flow of (a/2)|x|^2 (a = {a}, n = {n})"),
    )?;
    Ok(problem.with_sample_box(vec![[-1.0, 1.0]; n]))
}

/// Unit drift on the open interval: `F = 1` on `(0,1)`, `h = c`.
/// The simplest exactly solvable problem; nilpotent for `t >= 1`.
/// Parameter: `c` (default 0).
fn slab_constant(params: &Map<String, Value>) -> Result<Problem, ProblemError> {
    let p = Params::new("slab_constant", params, &["c"])?;
    let c = p.f64_or("c", 0.0)?;
    let field = VectorField::new(
        1,
        Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0),
        Divergence::Analytic(Arc::new(|_| 0.0)),
        1.0,
    )?;
    Problem::new(
        field,
        constant_fn(c),
        c,
        Domain::open_box(vec![[0.0, 1.0]], "(0,1)"),
        p.exponent()?,
        format!("unit drift on (0,1) with h = {c}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn params(entries: &[(&str, Value)]) -> Map<String, Value> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn rotation_field_values() {
        let prob = builtin("rotation", &Map::new()).unwrap();
        assert_eq!(prob.field().eval(&[1.0, 0.0]), vec![0.0, 1.0]);
        assert_eq!(prob.field().eval(&[0.0, 1.0]), vec![-1.0, 0.0]);
        assert_eq!(prob.field().kappa(), 1.0);
    }

    #[test]
    fn lorentz_field_shape() {
        let prob = builtin(
            "lorentz",
            &params(&[
                ("q", json!(2.0)),
                ("e", json!([1.0, 0.0, 0.0])),
                ("b", json!([0.0, 0.0, 1.0])),
            ]),
        )
        .unwrap();
        // F(x, v) = (v, q(E + v x B)); v = (1, 0, 0), B = e_z: v x B = (0, -1, 0)
        let out = prob.field().eval(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&out[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(&out[3..], &[2.0 * (1.0 + 0.0), 2.0 * (0.0 - 1.0), 0.0]);
    }

    #[test]
    fn slab_constant_is_unit_drift() {
        let prob = builtin("slab_constant", &params(&[("c", json!(0.7))])).unwrap();
        assert_eq!(prob.field().eval(&[0.5]), vec![1.0]);
        assert_eq!(prob.h(&[0.5]), 0.7);
        assert!(prob.domain().contains(&[0.5]));
        assert!(!prob.domain().contains(&[1.5]));
    }

    #[test]
    fn unknown_builtin_is_registry_error() {
        assert!(matches!(
            builtin("sombrero", &Map::new()),
            Err(ProblemError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn unknown_parameter_is_configuration_error() {
        let err = builtin("rotation", &params(&[("omga", json!(2.0))])).unwrap_err();
        assert!(matches!(err, ProblemError::Configuration { .. }));
    }

    #[test]
    fn kappa_override_applies() {
        let prob = builtin("rotation", &params(&[("kappa", json!(0.1))])).unwrap();
        assert_eq!(prob.field().kappa(), 0.1);
        // absorption survives the rebuild
        let prob2 = builtin(
            "rotation",
            &params(&[("kappa", json!(0.1)), ("h", json!(1.25))]),
        )
        .unwrap();
        assert_eq!(prob2.h(&[0.3, 0.4]), 1.25);
    }

    #[test]
    fn vfp_dimension_scales_with_n() {
        let prob = builtin("vfp_fourier", &params(&[("n", json!(3.0))])).unwrap();
        assert_eq!(prob.dimension(), 6);
        assert_eq!(prob.field().divergence(&[0.0; 6]), 3.0);
    }

    #[test]
    fn nordstrom_divergence_sign() {
        let prob = builtin("nordstrom", &Map::new()).unwrap();
        // repulsive potential: at x > 1/2 and p > 0 the divergence is positive
        assert!(prob.field().divergence(&[0.8, 1.0]) > 0.0);
        assert_eq!(prob.field().divergence(&[0.5, 1.0]), 0.0);
        // momentum is pushed away from the center and the invariant
        // sqrt(1+p^2) e^{phi} has no interior turning points
        let f = prob.field().eval(&[0.8, 1.0]);
        assert!(f[1] > 0.0);
    }
}
