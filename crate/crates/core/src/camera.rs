//! Camera parameters and the thin-lens quantities shared by the
//! simulator and the depth/disparity conversion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thin-lens camera description. The aperture diameter is derived from the
/// focal length and f-number and kept consistent with both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParams {
    /// Focal length f in meters.
    pub focal_length: f64,
    /// F-number F (dimensionless), F = f / L.
    pub f_number: f64,
    /// Aperture diameter L in meters.
    pub aperture: f64,
    /// Focus distance z_f in meters.
    pub focus_distance: f64,
    /// Proportionality constant between geometric defocus and pixel
    /// disparity, obtained by calibration.
    pub alpha: f64,
}

/// On-disk JSON form: {focal_length_m, f_number, focus_distance_m, alpha}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraParamsFile {
    pub focal_length_m: f64,
    pub f_number: f64,
    pub focus_distance_m: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl CameraParams {
    pub fn new(focal_length: f64, f_number: f64, focus_distance: f64, alpha: f64) -> Result<Self> {
        let cam = CameraParams {
            focal_length,
            f_number,
            aperture: focal_length / f_number,
            focus_distance,
            alpha,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.focal_length > 0.0
            && self.aperture > 0.0
            && self.focus_distance > self.focal_length
            && self.alpha > 0.0
            && self.f_number > 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "invalid camera parameters: f={} L={} z_f={} alpha={}",
                self.focal_length, self.aperture, self.focus_distance, self.alpha
            )));
        }
        let rel = (self.f_number - self.focal_length / self.aperture).abs() / self.f_number;
        if rel > 1e-9 {
            return Err(Error::Config(
                "f-number inconsistent with focal length / aperture".into(),
            ));
        }
        if !self.focal_length.is_finite()
            || !self.focus_distance.is_finite()
            || !self.alpha.is_finite()
        {
            return Err(Error::Config("non-finite camera parameter".into()));
        }
        Ok(())
    }

    /// The disparity prefactor alpha * L * f / (1 - f/z_f) in meter units.
    pub fn disparity_coefficient(&self) -> f64 {
        self.alpha * self.aperture * self.focal_length
            / (1.0 - self.focal_length / self.focus_distance)
    }

    /// Disparity of the z -> infinity limit.
    pub fn disparity_at_infinity(&self) -> f64 {
        self.disparity_coefficient() / self.focus_distance
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CameraParamsFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("camera json {}: {e}", path.display())))?;
        CameraParams::new(
            file.focal_length_m,
            file.f_number,
            file.focus_distance_m,
            file.alpha,
        )
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let file = CameraParamsFile {
            focal_length_m: self.focal_length,
            f_number: self.f_number,
            focus_distance_m: self.focus_distance,
            alpha: self.alpha,
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Config(format!("camera json: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aperture_derived_from_f_number() {
        let cam = CameraParams::new(0.05, 2.0, 2.0, 1.0).unwrap();
        assert!((cam.aperture - 0.025).abs() < 1e-15);
        cam.validate().unwrap();
    }

    #[test]
    fn rejects_focus_inside_focal_length() {
        assert!(CameraParams::new(0.05, 2.0, 0.04, 1.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        assert!(CameraParams::new(0.05, 2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.json");
        let cam = CameraParams::new(0.035, 2.8, 1.5, 420.0).unwrap();
        cam.to_json_file(&path).unwrap();
        let back = CameraParams::from_json_file(&path).unwrap();
        assert_eq!(cam, back);
    }
}
