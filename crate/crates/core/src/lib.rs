//! Cellular-automaton simulator for tree-level QED scattering.
//!
//! Particle/waves live on a lattice as q-objects: superpositions of paths,
//! each a list of state elements with a complex amplitude. Interactions are
//! enumerated as typed combine/split channels, weighted by Feynman-rule
//! amplitudes and collapsed by the Born rule.

pub mod channel;
pub mod collapse;
pub mod dirac;
pub mod error;
pub mod kinematics;
pub mod lattice;
pub mod particle;
pub mod qed;
pub mod qstate;
pub mod records;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use kinematics::FourMomentum;
pub use lattice::{SimConfig, SystemState};
pub use particle::ParticleType;
pub use qstate::{Coord, ObjectId, ObjectKind, Path, Position, QObject, SpinState, StateElement};
