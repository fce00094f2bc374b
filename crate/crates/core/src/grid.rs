//! Plain row-major float grids, boolean masks, and the map types built
//! from them. The validity mask is authoritative; invalid entries carry a
//! NaN sentinel and must never be read by downstream consumers.

use crate::error::{Error, Result};

/// Single-channel row-major grid of f64 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Self {
        Grid {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Format(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with mirror (reflect-101-style without edge repeat is not
    /// needed here; simple reflection) boundary handling.
    #[inline]
    pub fn at_mirrored(&self, x: isize, y: isize) -> f64 {
        let xm = mirror_index(x, self.width);
        let ym = mirror_index(y, self.height);
        self.data[ym * self.width + xm]
    }

    pub fn same_size(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mirrored_horizontal(&self) -> Grid {
        let mut out = Grid::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x, y, self.at(self.width - 1 - x, y));
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }
}

/// Reflect an out-of-range index back into [0, n).
#[inline]
pub fn mirror_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    debug_assert!(n > 0);
    let period = 2 * n;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Boolean validity mask with the same layout as [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn intersect(&self, other: &Mask) -> Mask {
        assert_eq!(self.width, other.width);
        assert_eq!(self.height, other.height);
        Mask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn mirrored_horizontal(&self) -> Mask {
        let mut out = Mask::filled(self.width, self.height, false);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x, y, self.at(self.width - 1 - x, y));
            }
        }
        out
    }
}

/// Depth map in meters with validity mask. Valid entries are positive and
/// finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub values: Grid,
    pub valid: Mask,
}

impl DepthMap {
    pub fn constant(width: usize, height: usize, z: f64) -> Self {
        DepthMap {
            values: Grid::filled(width, height, z),
            valid: Mask::filled(width, height, true),
        }
    }

    pub fn new(values: Grid, valid: Mask) -> Result<Self> {
        check_map_dims(&values, &valid)?;
        for (v, ok) in values.data.iter().zip(&valid.data) {
            if *ok && !(v.is_finite() && *v > 0.0) {
                return Err(Error::Format(format!(
                    "depth map contains non-positive or non-finite valid value {v}"
                )));
            }
        }
        Ok(DepthMap { values, valid })
    }

    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }
}

/// Signed disparity map in pixels with validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub values: Grid,
    pub valid: Mask,
}

impl DisparityMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        DisparityMap {
            values: Grid::filled(width, height, f64::NAN),
            valid: Mask::filled(width, height, false),
        }
    }

    pub fn constant(width: usize, height: usize, d: f64) -> Self {
        DisparityMap {
            values: Grid::filled(width, height, d),
            valid: Mask::filled(width, height, true),
        }
    }

    pub fn new(values: Grid, valid: Mask) -> Result<Self> {
        check_map_dims(&values, &valid)?;
        for (v, ok) in values.data.iter().zip(&valid.data) {
            if *ok && !v.is_finite() {
                return Err(Error::Format(
                    "disparity map contains non-finite valid value".into(),
                ));
            }
        }
        Ok(DisparityMap { values, valid })
    }

    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }
}

/// Per-pixel confidence in [0, 1]. Values are clamped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub values: Grid,
}

impl ConfidenceMap {
    pub fn new(mut values: Grid) -> Self {
        for v in &mut values.data {
            *v = v.clamp(0.0, 1.0);
        }
        ConfidenceMap { values }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        ConfidenceMap::new(Grid::filled(width, height, value))
    }

    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }

    /// Threshold into a validity-style binary mask.
    pub fn binarize(&self, threshold: f64) -> Mask {
        Mask {
            width: self.width(),
            height: self.height(),
            data: self.values.data.iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub fn from_mask(mask: &Mask) -> Self {
        ConfidenceMap {
            values: Grid {
                width: mask.width,
                height: mask.height,
                data: mask
                    .data
                    .iter()
                    .map(|&b| if b { 1.0 } else { 0.0 })
                    .collect(),
            },
        }
    }
}

/// One- or three-channel guide image used for similarity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Guide {
    pub channels: Vec<Grid>,
}

impl Guide {
    pub fn gray(g: Grid) -> Self {
        Guide { channels: vec![g] }
    }

    pub fn rgb(r: Grid, g: Grid, b: Grid) -> Result<Self> {
        if !r.same_size(&g) || !r.same_size(&b) {
            return Err(Error::Format("guide channels differ in size".into()));
        }
        Ok(Guide {
            channels: vec![r, g, b],
        })
    }

    pub fn width(&self) -> usize {
        self.channels[0].width
    }

    pub fn height(&self) -> usize {
        self.channels[0].height
    }

    /// L1 distance between the guide vectors at two pixels.
    #[inline]
    pub fn l1_distance(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        self.channels
            .iter()
            .map(|c| (c.at(x0, y0) - c.at(x1, y1)).abs())
            .sum()
    }

    /// Luminance-style average of the channels.
    pub fn to_gray(&self) -> Grid {
        if self.channels.len() == 1 {
            return self.channels[0].clone();
        }
        let mut out = Grid::new(self.width(), self.height());
        let n = self.channels.len() as f64;
        for c in &self.channels {
            for (o, v) in out.data.iter_mut().zip(&c.data) {
                *o += v / n;
            }
        }
        out
    }
}

/// Left/right dual-pixel views plus an optional guide retained from the
/// source image.
#[derive(Debug, Clone)]
pub struct DpImagePair {
    pub left: Grid,
    pub right: Grid,
    pub guide: Option<Guide>,
}

impl DpImagePair {
    pub fn new(left: Grid, right: Grid, guide: Option<Guide>) -> Result<Self> {
        if !left.same_size(&right) {
            return Err(Error::Format(format!(
                "dual-pixel views differ in size: {}x{} vs {}x{}",
                left.width, left.height, right.width, right.height
            )));
        }
        if let Some(g) = &guide {
            if g.width() != left.width || g.height() != left.height {
                return Err(Error::Format("guide size differs from views".into()));
            }
        }
        for v in left.data.iter().chain(&right.data) {
            if !v.is_finite() {
                return Err(Error::Format("dual-pixel view contains non-finite sample".into()));
            }
        }
        Ok(DpImagePair { left, right, guide })
    }

    pub fn width(&self) -> usize {
        self.left.width
    }

    pub fn height(&self) -> usize {
        self.left.height
    }
}

fn check_map_dims(values: &Grid, valid: &Mask) -> Result<()> {
    if values.width != valid.width || values.height != valid.height {
        return Err(Error::Format("map values and mask differ in size".into()));
    }
    Ok(())
}
