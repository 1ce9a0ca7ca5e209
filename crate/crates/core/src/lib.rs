//! Distributed pseudo-localization and density control for 1D and 2D swarms,
//! with continuum reference solvers.
//!
//! Every numeric type is generic over the scalar ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`.

pub mod config;
pub mod control1d;
pub mod density;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod neighbors;
pub mod oracle;
pub mod pseudoloc1d;
pub mod scalar;
pub mod state;
pub mod swarm2d;
pub mod targets;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec2F64 = geometry::Vec2<f64>;
pub type Swarm1DF64 = state::Swarm1D<f64>;
pub type Swarm2DF64 = state::Swarm2D<f64>;
pub type PStarTable1DF64 = targets::PStarTable1D<f64>;
pub type PStarField2DF64 = targets::PStarField2D<f64>;
pub type SelfOrg1DRunF64 = control1d::SelfOrg1DRun<f64>;
pub type SelfOrg2DRunF64 = swarm2d::SelfOrg2DRun<f64>;

pub type Vec2F32 = geometry::Vec2<f32>;
pub type Swarm1DF32 = state::Swarm1D<f32>;
pub type Swarm2DF32 = state::Swarm2D<f32>;
