//! Physics-informed dual-pixel disparity: thin-lens simulation, SAD
//! template matching, a parametric matching-error model, fast global
//! smoothing for completion and refinement, and affine-invariant
//! evaluation.

pub mod camera;
pub mod convert;
pub mod errmodel;
pub mod error;
pub mod eval;
pub mod filter;
pub mod grid;
pub mod io;
pub mod matching;
pub mod optics;
pub mod refine;

pub use camera::CameraParams;
pub use convert::{
    depth_to_disparity, depth_to_disparity_scalar, disparity_to_depth, disparity_to_depth_scalar,
};
pub use errmodel::{ErrorModel, SweepRecord, TrainingSample};
pub use error::{Error, Result};
pub use eval::MetricReport;
pub use grid::{ConfidenceMap, DepthMap, DisparityMap, DpImagePair, Grid, Guide, Mask};
pub use matching::MatchConfig;
pub use optics::SimConfig;
pub use refine::{FgsConfig, RefineConfig};
