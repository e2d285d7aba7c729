//! Measure-valued solutions of the aggregation equation `∂t ρ = div((∇W∗ρ)ρ)`.
//!
//! Two solvers share one set of potentials and diagnostics:
//! sticky particles for atomic data ([`particles`]) and a conservative
//! finite-volume scheme on uniform 2D grids ([`fv2d`]). Distances between
//! solutions are exact quadratic Wasserstein distances ([`ot`]).
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fv2d;
pub mod iolab;
pub mod measure;
pub mod ot;
pub mod particles;
pub mod potentials;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use measure::{DiscreteMeasure, Dim};
pub use potentials::{Potential, PotentialKind, PotentialSpec};
pub use scalar::{Point, Real};

pub type Potential64 = Potential<f64>;
pub type Measure64 = DiscreteMeasure<f64>;
pub type Plan64 = ot::TransportPlan<f64>;
pub type Grid64 = fv2d::Grid2D<f64>;
pub type FvState64 = fv2d::FvState<f64>;
pub type FvSolver64 = fv2d::FvSolver<f64>;
pub type Particles64 = particles::ParticleSystem<f64>;
