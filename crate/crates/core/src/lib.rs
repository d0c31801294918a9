//! Periodic-boundary denoising diffusion for particle self-assembly.
#![allow(clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod cli;
pub mod conformation;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod io;
pub mod md;
pub mod optim;
pub mod potential;
pub mod rdf;
pub mod verify;

pub use conformation::{Condition, ConditionRanges, Conformation, Provenance, Source};
pub use error::{Error, Result};
pub use geometry::{Box3, PeriodicBox};
pub use potential::OppParams;
