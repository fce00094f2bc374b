//! Depth <-> disparity conversion.
//!
//! d = alpha * L * f / (1 - f/z_f) * (1/z_f - 1/z), in pixel units once
//! alpha absorbs the sensor scale. The sign convention fixed repo-wide is
//! far-positive: z > z_f gives d > 0, z < z_f gives d < 0.

use crate::camera::CameraParams;
use crate::error::{Error, Result};
use crate::grid::{DepthMap, DisparityMap, Grid, Mask};

/// Scalar form of the depth -> disparity relation.
#[inline]
pub fn depth_to_disparity_scalar(z: f64, cam: &CameraParams) -> f64 {
    cam.disparity_coefficient() * (1.0 / cam.focus_distance - 1.0 / z)
}

/// Scalar inverse. Returns `None` when the disparity maps to a
/// non-positive or non-finite depth (beyond the z -> infinity limit).
#[inline]
pub fn disparity_to_depth_scalar(d: f64, cam: &CameraParams) -> Option<f64> {
    let inv_z = 1.0 / cam.focus_distance - d / cam.disparity_coefficient();
    if inv_z <= 0.0 || !inv_z.is_finite() {
        return None;
    }
    let z = 1.0 / inv_z;
    if z.is_finite() && z > 0.0 {
        Some(z)
    } else {
        None
    }
}

pub fn depth_to_disparity(z: &DepthMap, cam: &CameraParams) -> Result<DisparityMap> {
    cam.validate()?;
    if cam.focus_distance <= cam.focal_length {
        return Err(Error::Config(
            "focus distance must exceed focal length".into(),
        ));
    }
    let coeff = cam.disparity_coefficient();
    let inv_zf = 1.0 / cam.focus_distance;
    let mut values = Grid::filled(z.width(), z.height(), f64::NAN);
    let mut valid = Mask::filled(z.width(), z.height(), false);
    for i in 0..values.data.len() {
        if z.valid.data[i] {
            values.data[i] = coeff * (inv_zf - 1.0 / z.values.data[i]);
            valid.data[i] = true;
        }
    }
    DisparityMap::new(values, valid)
}

pub fn disparity_to_depth(d: &DisparityMap, cam: &CameraParams) -> Result<DepthMap> {
    cam.validate()?;
    let mut values = Grid::filled(d.width(), d.height(), f64::NAN);
    let mut valid = Mask::filled(d.width(), d.height(), false);
    for i in 0..values.data.len() {
        if d.valid.data[i] {
            if let Some(z) = disparity_to_depth_scalar(d.values.data[i], cam) {
                values.data[i] = z;
                valid.data[i] = true;
            }
        }
    }
    DepthMap::new(values, valid)
}
