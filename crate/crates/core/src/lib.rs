//! Scattering of a particle off arrays of harmonic oscillators, treated to
//! first order in the particle-oscillator potential.
//!
//! Elastic scattering leaves every oscillator in its ground state and adds
//! coherently over the array, so it diffracts. Inelastic scattering excites
//! one oscillator; each particle is assigned exactly one such jump, drawn
//! with probabilities given by the overlap of the incident wave with the
//! site's transition density. A detector array made of oscillators then
//! builds up the diffraction pattern one particle at a time.
//!
//! Internally all quantities are in natural units `ħ = Ω = 1` with lengths
//! in the oscillator length `√(ħ/MΩ)`; see [`model::build_model`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod field;
pub mod finite_time;
pub mod hermite;
pub mod jumps;
pub mod model;
pub mod oracle;
pub mod scattering;

pub use error::{Error, ErrorKind, Result};
pub use experiment::{
    build_experiment, merge, prepare, run_experiment, visibility, ExperimentSpec, Histogram, RawExperiment,
    VisibilityOptions,
};
pub use field::{Channel, Grid, ScalarField};
pub use finite_time::{delta_limit_amplitude, finite_time_amplitude, FiniteTimeSettings};
pub use jumps::{
    argmax_jump, jump_weights, normalize, sample_jump, DetectionEvent, JumpWeightTable, Outcome, ProbabilityTable,
};
pub use model::{build_model, ModelConfig, MultiIndex, RawModel};
pub use oracle::{channel_probabilities, evolve, first_order_prediction, CoupledState};
pub use scattering::{elastic_source, far_field, inelastic_source, DetectorPlane};
