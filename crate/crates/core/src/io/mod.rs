//! Map and image file I/O. Float maps travel as grayscale PFM, integer
//! maps as 16-bit PNG with a JSON sidecar.

pub mod pfm;
pub mod png16;

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Guide, Mask};

pub use pfm::{read_pfm, write_pfm};
pub use png16::{read_png16, sidecar_path, write_png16, Png16Sidecar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    /// Grayscale portable float map, little-endian, scale -1.0. Invalid
    /// pixels are written as NaN; on read the mask is the finite set.
    Pfm,
    /// 16-bit grayscale PNG plus {scale, offset, valid_sentinel} sidecar.
    Png16,
}

impl MapFormat {
    pub fn from_path(path: &Path) -> Result<MapFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pfm") => Ok(MapFormat::Pfm),
            Some("png") => Ok(MapFormat::Png16),
            other => Err(Error::Format(format!(
                "cannot infer map format from extension {other:?} of {}",
                path.display()
            ))),
        }
    }
}

/// Write a masked map. The mask is encoded as NaN (PFM) or the sentinel
/// value (PNG16).
pub fn write_map(path: &Path, values: &Grid, valid: &Mask, format: MapFormat) -> Result<()> {
    match format {
        MapFormat::Pfm => {
            let mut out = values.clone();
            for (v, ok) in out.data.iter_mut().zip(&valid.data) {
                if !*ok {
                    *v = f64::NAN;
                }
            }
            write_pfm(path, &out)
        }
        MapFormat::Png16 => write_png16(path, values, valid, Png16Sidecar::default()),
    }
}

/// Read a masked map written by [`write_map`].
pub fn read_map(path: &Path, format: MapFormat) -> Result<(Grid, Mask)> {
    match format {
        MapFormat::Pfm => {
            let grid = read_pfm(path)?;
            let valid = Mask {
                width: grid.width,
                height: grid.height,
                data: grid.data.iter().map(|v| v.is_finite()).collect(),
            };
            Ok((grid, valid))
        }
        MapFormat::Png16 => read_png16(path),
    }
}

/// Load an 8/16-bit PNG image as a guide with samples in [0, 1].
pub fn read_guide_png(path: &Path) -> Result<Guide> {
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("image read {}: {e}", path.display())))?;
    let rgb = img.into_rgb16();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut channels = vec![Grid::new(w, h), Grid::new(w, h), Grid::new(w, h)];
    for (i, p) in rgb.pixels().enumerate() {
        for c in 0..3 {
            channels[c].data[i] = p.0[c] as f64 / u16::MAX as f64;
        }
    }
    let grayscale = channels[0] == channels[1] && channels[1] == channels[2];
    if grayscale {
        Ok(Guide::gray(channels.swap_remove(0)))
    } else {
        let b = channels.pop().unwrap();
        let g = channels.pop().unwrap();
        let r = channels.pop().unwrap();
        Guide::rgb(r, g, b)
    }
}

/// Write a [0, 1] grid as an 8-bit grayscale PNG (masks, guides, previews).
pub fn write_gray_png(path: &Path, grid: &Grid) -> Result<()> {
    let mut buf =
        image::ImageBuffer::<image::Luma<u8>, Vec<u8>>::new(grid.width as u32, grid.height as u32);
    for (i, p) in buf.pixels_mut().enumerate() {
        p.0[0] = (grid.data[i].clamp(0.0, 1.0) * 255.0).round() as u8;
    }
    buf.save(path)
        .map_err(|e| Error::Format(format!("png write {}: {e}", path.display())))
}

/// Write a guide as PNG (8-bit, gray or RGB).
pub fn write_guide_png(path: &Path, guide: &Guide) -> Result<()> {
    if guide.channels.len() == 1 {
        return write_gray_png(path, &guide.channels[0]);
    }
    let (w, h) = (guide.width() as u32, guide.height() as u32);
    let mut buf = image::ImageBuffer::<image::Rgb<u8>, Vec<u8>>::new(w, h);
    for (i, p) in buf.pixels_mut().enumerate() {
        for c in 0..3 {
            p.0[c] = (guide.channels[c].data[i].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    buf.save(path)
        .map_err(|e| Error::Format(format!("png write {}: {e}", path.display())))
}
