//! Problem objects: grids, paths, drift/diffusion functionals, message laws,
//! condition probes, and the truncation / unit-diffusion transforms.

mod diffusion;
mod drift;
mod expr;
mod grid;
mod message;
mod probe;

pub use diffusion::{Diffusion, FnDiffusion, UnitDiffusion};
pub use drift::{
    reduce_diffusion, truncate_drift, ConstantDrift, Constants, Drift, DriftRef, FnDrift, LinearFeedback, MessageDrift,
    Reduced, Truncated, WithConstants, ZeroDrift,
};
pub use expr::ExprDrift;
pub use grid::{Path, TimeGrid};
pub use message::{ConstantGaussian, ConstantUniform, MessageLaw, MessageLawRef, NoMessage};
pub use probe::{probe_conditions, Condition, ConditionReport, ProbeOptions, VIOLATION_TOLERANCE};
