use thiserror::Error;

use crate::particle::ParticleType;

/// Errors raised by state construction, channel processing and amplitude
/// evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("four-momentum off shell for {ptype}: |E^2 - p^2 - m^2| = {residual:e} (allowed {allowed:e})")]
    OnShellViolation {
        ptype: ParticleType,
        residual: f64,
        allowed: f64,
    },
    #[error("spin label {label} is not valid for {ptype}")]
    SpinDomain { ptype: ParticleType, label: String },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("degenerate q-object: {0}")]
    DegenerateObject(String),
    #[error("path index {index} out of range (object has {len} paths)")]
    Index { index: usize, len: usize },
    #[error("kinematics error: {0}")]
    Kinematics(String),
    #[error("no vertex rule combines {0} and {1}")]
    Vertex(ParticleType, ParticleType),
    #[error("no tree-level channel for ({0}, {1})")]
    EmptyChannelSet(ParticleType, ParticleType),
    #[error("every out channel of ({a}, {b}) is below threshold at sqrt(s) = {sqrt_s:e}")]
    BelowThreshold { a: ParticleType, b: ParticleType, sqrt_s: f64 },
    #[error("propagator pole: {line} line with q^2 = {q2:e}")]
    PropagatorPole { line: ParticleType, q2: f64 },
    #[error("no path of the object covers the requested cell")]
    Coverage,
    #[error("rule table line {line}: {message}")]
    RuleTable { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
