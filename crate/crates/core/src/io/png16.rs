//! 16-bit grayscale PNG export with a JSON sidecar describing the
//! quantization: stored = round((value - offset) * scale). Invalid pixels
//! are stored as `valid_sentinel`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Png16Sidecar {
    pub scale: f64,
    pub offset: f64,
    pub valid_sentinel: u16,
}

impl Default for Png16Sidecar {
    fn default() -> Self {
        Png16Sidecar {
            scale: 1000.0,
            offset: 0.0,
            valid_sentinel: u16::MAX,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_png16(path: &Path, grid: &Grid, valid: &Mask, sidecar: Png16Sidecar) -> Result<()> {
    if grid.width != valid.width || grid.height != valid.height {
        return Err(Error::Format("png16 export: mask size mismatch".into()));
    }
    if sidecar.scale == 0.0 || !sidecar.scale.is_finite() || !sidecar.offset.is_finite() {
        return Err(Error::Format("png16 export: bad quantization".into()));
    }
    let mut pixels = Vec::with_capacity(grid.data.len());
    for (v, ok) in grid.data.iter().zip(&valid.data) {
        if !*ok {
            pixels.push(sidecar.valid_sentinel);
            continue;
        }
        if !v.is_finite() {
            return Err(Error::Format(
                "png16 export: non-finite value marked valid".into(),
            ));
        }
        let q = ((v - sidecar.offset) * sidecar.scale).round();
        if !(0.0..=u16::MAX as f64).contains(&q) || q as u16 == sidecar.valid_sentinel {
            return Err(Error::Format(format!(
                "png16 export: value {v} quantizes to {q}, outside the representable range"
            )));
        }
        pixels.push(q as u16);
    }

    let mut buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(
        grid.width as u32,
        grid.height as u32,
    );
    for (i, p) in buf.pixels_mut().enumerate() {
        p.0[0] = pixels[i];
    }
    buf.save(path)
        .map_err(|e| Error::Format(format!("png16 write {}: {e}", path.display())))?;
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Format(format!("sidecar json: {e}")))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub fn read_png16(path: &Path) -> Result<(Grid, Mask)> {
    let text = std::fs::read_to_string(sidecar_path(path)).map_err(|e| {
        Error::Format(format!(
            "missing sidecar {}: {e}",
            sidecar_path(path).display()
        ))
    })?;
    let sidecar: Png16Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("sidecar json {}: {e}", path.display())))?;
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("png16 read {}: {e}", path.display())))?
        .into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = Grid::filled(w, h, f64::NAN);
    let mut valid = Mask::filled(w, h, false);
    for (i, p) in img.pixels().enumerate() {
        let raw = p.0[0];
        if raw != sidecar.valid_sentinel {
            grid.data[i] = raw as f64 / sidecar.scale + sidecar.offset;
            valid.data[i] = true;
        }
    }
    Ok((grid, valid))
}
