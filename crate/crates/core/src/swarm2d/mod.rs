//! The 2D pipeline: boundary localization, boundary shape control, interior
//! pseudo-localization on the radius graph, and interior density control.

mod boundary;
mod control;
mod gradient;
mod pipeline;
mod pseudoloc;

pub use boundary::{
    assign_boundary_targets, boundary_gammas, boundary_target_map, chain_tangents,
    localize_boundary, BoundaryChainState, BoundaryLocalization,
};
pub use control::{
    contain, stage1_step, stage3_energy_terms, stage3_step, Stage1Params, Stage1State,
    Stage3Params, StepReport,
};
pub use gradient::{GradientContext, GradientEstimate, GradientMethodTag, JacobianEstimate};
pub use pipeline::{
    build_initial_swarm, fill_shape, hex_disk_swarm, run_selforg_2d, FallbackCounts, InitialSwarm,
    SelfOrg2DRun, Snapshot2D, Stage1Metrics, Stage2Metrics, Stage3Metrics, TargetSetup,
};
pub use pseudoloc::{
    pseudoloc_residual_2d, pseudoloc_step_2d, relaxation, run_pseudoloc_2d, Pseudoloc2DRun,
};
