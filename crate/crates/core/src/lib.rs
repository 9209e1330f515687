//! Spectral analysis of weighted-shift transport semigroups.
//!
//! The semigroups act by pulling functions back along the characteristic
//! flow of a Lipschitz vector field and attenuating them with the
//! accumulated absorption and divergence. This crate integrates the
//! characteristics, partitions phase space by exit-time finiteness,
//! estimates the growth bounds that pin down generator and semigroup
//! spectra for the escaping components, and computes the candidate
//! spectra attached to rest points and periodic orbits of the global
//! component.

pub mod builtins;
pub mod classify;
pub mod config;
pub mod expr;
pub mod flow;
pub mod growth;
mod linalg;
pub mod periodic;
pub mod problem;
pub mod report;
pub mod sampling;
pub mod semigroup;
pub mod spectral_set;
pub mod verify;

pub use builtins::{builtin, BUILTIN_NAMES};
pub use classify::{
    ClassificationConfig, ClassifiedPoint, PartitionStats, PeriodSearch, PhaseClass,
};
pub use config::ProblemConfig;
pub use flow::{ExitTimeResult, FlowConfig, FlowResult, FlowStatus, Tau};
pub use problem::{Divergence, Domain, Problem, VectorField};
pub use report::{AnalysisReport, PipelineError, RunConfig};
pub use semigroup::{ClassFilter, GridFunction, NormEstimate, SampledFunction};
pub use spectral_set::{Region, SpectralSet};
