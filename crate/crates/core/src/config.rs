//! JSON problem definitions.
//!
//! Two forms are accepted: `{"builtin": name, "params": {...}}` for the
//! registry problems, and `{"custom": {...}}` for user fields given as
//! expression strings (one per component) with symbolic divergence.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::builtins;
use crate::expr::{self, ExprAst, ParseDiagnostics};
use crate::problem::{Divergence, Domain, Problem, ProblemError, VectorField};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config JSON: {0}")]
    Json(String),
    #[error("config schema: {0}")]
    Schema(String),
    #[error("expression '{component}': {source}")]
    Expr {
        component: String,
        source: ParseDiagnostics,
    },
    #[error("divergence of '{component}': {message}")]
    Divergence { component: String, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Top-level problem description, exactly one of `builtin` or `custom`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Map<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomProblemConfig>,
}

impl ProblemConfig {
    pub fn for_builtin(name: &str, params: Map<String, Value>) -> Self {
        ProblemConfig {
            builtin: Some(name.to_string()),
            params: (!params.is_empty()).then_some(params),
            custom: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
    }

    /// Build the runnable problem this config describes.
    pub fn build(&self) -> Result<Problem, ConfigError> {
        match (&self.builtin, &self.custom) {
            (Some(name), None) => {
                let empty = Map::new();
                let params = self.params.as_ref().unwrap_or(&empty);
                Ok(builtins::builtin(name, params)?)
            }
            (None, Some(custom)) => {
                if self.params.is_some() {
                    return Err(ConfigError::Schema(
                        "'params' only applies to builtin problems".into(),
                    ));
                }
                custom.build()
            }
            (Some(_), Some(_)) => Err(ConfigError::Schema(
                "give either 'builtin' or 'custom', not both".into(),
            )),
            (None, None) => Err(ConfigError::Schema(
                "missing problem: set 'builtin' or 'custom'".into(),
            )),
        }
    }
}

/// User-defined field with expression strings per component.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CustomProblemConfig {
    pub dimension: usize,
    /// One expression per component in the variables `x0..x{N-1}`.
    pub field: Vec<String>,
    /// Absorption expression.
    pub h: String,
    pub domain: DomainConfig,
    pub p: f64,
    /// Lipschitz constant; estimated by sampling (times a 1.1 safety
    /// factor) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Declared lower bound for `h`; unconstrained when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_inf: Option<f64>,
    /// Default box for point samplers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Phase-space domain: an open box (null bounds are unconstrained) or
/// the whole space.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DomainConfig {
    Box {
        #[serde(rename = "box")]
        bounds: Vec<[Option<f64>; 2]>,
    },
    All {
        all: bool,
    },
}

/// Evaluate a parsed expression, mapping singular points to NaN so the
/// integrator's non-finite check turns them into step failures instead
/// of panics.
fn eval_or_nan(ast: &ExprAst, x: &[f64]) -> f64 {
    expr::evaluate(ast, x).unwrap_or(f64::NAN)
}

impl CustomProblemConfig {
    // negated comparisons below deliberately reject NaN bounds
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn build(&self) -> Result<Problem, ConfigError> {
        if self.dimension == 0 {
            return Err(ConfigError::Schema("dimension must be at least 1".into()));
        }
        if self.field.len() != self.dimension {
            return Err(ConfigError::Schema(format!(
                "field has {} components but dimension is {}",
                self.field.len(),
                self.dimension
            )));
        }
        let components: Vec<ExprAst> = self
            .field
            .iter()
            .map(|text| {
                expr::parse(text, self.dimension).map_err(|source| ConfigError::Expr {
                    component: text.clone(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        let absorption_ast =
            expr::parse(&self.h, self.dimension).map_err(|source| ConfigError::Expr {
                component: self.h.clone(),
                source,
            })?;
        // exact divergence: sum of the diagonal symbolic derivatives
        let divergence_terms: Vec<ExprAst> = components
            .iter()
            .zip(&self.field)
            .enumerate()
            .map(|(i, (ast, text))| {
                expr::differentiate(ast, i).map_err(|e| ConfigError::Divergence {
                    component: text.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;

        let domain = match &self.domain {
            DomainConfig::All { all } => {
                if !all {
                    return Err(ConfigError::Schema(
                        "domain 'all' must be true (use a box otherwise)".into(),
                    ));
                }
                Domain::all("all of R^N")
            }
            DomainConfig::Box { bounds } => {
                if bounds.len() != self.dimension {
                    return Err(ConfigError::Schema(format!(
                        "domain box has {} axes but dimension is {}",
                        bounds.len(),
                        self.dimension
                    )));
                }
                let resolved: Vec<[f64; 2]> = bounds
                    .iter()
                    .map(|b| {
                        [
                            b[0].unwrap_or(f64::NEG_INFINITY),
                            b[1].unwrap_or(f64::INFINITY),
                        ]
                    })
                    .collect();
                if resolved.iter().any(|b| !(b[0] < b[1])) {
                    return Err(ConfigError::Schema(
                        "domain box bounds must satisfy lo < hi".into(),
                    ));
                }
                Domain::open_box(resolved, "open box")
            }
        };

        let eval_components = components.clone();
        let field_fn = Arc::new(move |x: &[f64], out: &mut [f64]| {
            for (slot, ast) in out.iter_mut().zip(&eval_components) {
                *slot = eval_or_nan(ast, x);
            }
        });
        let divergence_fn =
            Arc::new(move |x: &[f64]| divergence_terms.iter().map(|ast| eval_or_nan(ast, x)).sum());
        let absorption = Arc::new(move |x: &[f64]| eval_or_nan(&absorption_ast, x));

        let sample_box = self.sample_box.clone().or_else(|| match &self.domain {
            DomainConfig::Box { bounds } => {
                let finite: Vec<[f64; 2]> = bounds
                    .iter()
                    .filter_map(|b| match (b[0], b[1]) {
                        (Some(lo), Some(hi)) => Some([lo, hi]),
                        _ => None,
                    })
                    .collect();
                (finite.len() == self.dimension).then_some(finite)
            }
            DomainConfig::All { .. } => None,
        });

        let kappa = match self.kappa {
            Some(k) => k,
            None => {
                // sampled estimate over the best available box, padded
                let probe_field = VectorField::new(
                    self.dimension,
                    field_fn.clone(),
                    Divergence::Analytic(divergence_fn.clone()),
                    1.0,
                )?;
                let probe = Problem::new(
                    probe_field,
                    absorption.clone(),
                    f64::NEG_INFINITY,
                    domain.clone(),
                    self.p,
                    "kappa probe",
                )?;
                let region = sample_box
                    .clone()
                    .unwrap_or_else(|| vec![[-1.0, 1.0]; self.dimension]);
                let mut rng = crate::sampling::seeded_rng(0x00C0_FFEE);
                let estimate = crate::problem::estimate_lipschitz(&probe, &region, 4000, &mut rng)?;
                (estimate * 1.1).max(1e-6)
            }
        };

        let field = VectorField::new(
            self.dimension,
            field_fn,
            Divergence::Analytic(divergence_fn),
            kappa,
        )?;
        let mut problem = Problem::new(
            field,
            absorption,
            self.h_inf.unwrap_or(f64::NEG_INFINITY),
            domain,
            self.p,
            self.description
                .clone()
                .unwrap_or_else(|| "custom problem".to_string()),
        )?;
        if let Some(bx) = sample_box {
            problem = problem.with_sample_box(bx);
        }
        Ok(problem)
    }
}
