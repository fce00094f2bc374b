//! Physics-based dual-pixel simulator: half-shaded defocus PSF pairs,
//! layered depth-dependent convolution, and the random dot chart used by
//! the error sweeps.
//!
//! PSF shading is a linear ramp across the defocus disc (weight
//! proportional to max(0, x/r) on one half), mirrored between the left and
//! right views and flipped when the scene crosses the focal plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::CameraParams;
use crate::error::{Error, Result};
use crate::grid::{DepthMap, DpImagePair, Grid, Guide};

/// Simulator options. `pixel_pitch` converts geometric defocus in meters
/// to pixels.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub pixel_pitch: f64,
    pub max_psf_radius: f64,
    pub depth_layers: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pixel_pitch: 4e-6,
            max_psf_radius: DEFAULT_MAX_PSF_RADIUS,
            depth_layers: 16,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

pub const DEFAULT_MAX_PSF_RADIUS: f64 = 64.0;

/// Left/right PSF kernels for one depth. `radius` is the
/// circle-of-confusion radius in pixels, signed by focal side
/// (positive behind the focal plane, matching the far-positive disparity
/// convention).
#[derive(Debug, Clone)]
pub struct DpPsfPair {
    pub radius: f64,
    pub support: usize,
    pub left_kernel: Grid,
    pub right_kernel: Grid,
}

impl DpPsfPair {
    /// Horizontal centroid of a kernel, in pixels relative to its center.
    pub fn centroid_x(kernel: &Grid) -> f64 {
        let half = (kernel.width / 2) as f64;
        let mut acc = 0.0;
        for y in 0..kernel.height {
            for x in 0..kernel.width {
                acc += kernel.at(x, y) * (x as f64 - half);
            }
        }
        acc
    }

    /// Centroid separation (right minus left), the geometric stand-in for
    /// the view-to-view disparity this PSF pair induces.
    pub fn centroid_separation(&self) -> f64 {
        Self::centroid_x(&self.right_kernel) - Self::centroid_x(&self.left_kernel)
    }
}

/// Signed circle-of-confusion radius in pixels for depth `z`.
pub fn coc_radius_px(z: f64, cam: &CameraParams, pixel_pitch: f64) -> f64 {
    let coeff = cam.aperture * cam.focal_length
        / (1.0 - cam.focal_length / cam.focus_distance);
    coeff * (1.0 / cam.focus_distance - 1.0 / z) / (2.0 * pixel_pitch)
}

pub fn make_psf_pair(z: f64, cam: &CameraParams, pixel_pitch: f64) -> Result<DpPsfPair> {
    make_psf_pair_capped(z, cam, pixel_pitch, DEFAULT_MAX_PSF_RADIUS)
}

pub fn make_psf_pair_capped(
    z: f64,
    cam: &CameraParams,
    pixel_pitch: f64,
    max_radius: f64,
) -> Result<DpPsfPair> {
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::Simulation(format!("non-positive depth {z}")));
    }
    cam.validate()?;
    let radius = coc_radius_px(z, cam, pixel_pitch);
    if radius.abs() > max_radius {
        return Err(Error::Simulation(format!(
            "defocus radius {:.1} px exceeds maximum support {max_radius} px",
            radius.abs()
        )));
    }
    let r = radius.abs();
    if r < 0.5 {
        let delta = Grid::filled(1, 1, 1.0);
        return Ok(DpPsfPair {
            radius,
            support: 1,
            left_kernel: delta.clone(),
            right_kernel: delta,
        });
    }

    let dir = radius.signum();
    let half = r.ceil() as usize;
    let support = 2 * half + 1;
    let mut left = Grid::new(support, support);

    // 4x4 supersampled disc coverage combined with the shading ramp; the
    // subsample offsets are symmetric so the mirror relations hold exactly
    const SS: usize = 4;
    let offsets: Vec<f64> = (0..SS).map(|j| (j as f64 + 0.5) / SS as f64 - 0.5).collect();
    for cy in 0..support {
        for cx in 0..support {
            let px = cx as f64 - half as f64;
            let py = cy as f64 - half as f64;
            let mut acc = 0.0;
            for oy in &offsets {
                for ox in &offsets {
                    let sx = px + ox;
                    let sy = py + oy;
                    if sx * sx + sy * sy <= r * r {
                        // left view kernel leans opposite the defocus sign
                        acc += f64::max(0.0, -dir * sx) / r;
                    }
                }
            }
            left.set(cx, cy, acc / (SS * SS) as f64);
        }
    }
    let total = left.sum();
    if total <= 0.0 {
        return Err(Error::Simulation("degenerate PSF (zero energy)".into()));
    }
    for v in &mut left.data {
        *v /= total;
    }
    let right = left.mirrored_horizontal();
    Ok(DpPsfPair {
        radius,
        support,
        left_kernel: left,
        right_kernel: right,
    })
}

/// Calibrate the disparity proportionality constant alpha so that the
/// pixel disparity predicted by the thin-lens relation matches the PSF
/// centroid separation of this simulator.
pub fn calibrate_alpha(cam: &CameraParams, pixel_pitch: f64) -> Result<f64> {
    let base = cam.with_alpha(1.0)?;
    // probe a far-side depth with a well-resolved disc
    let mut probe = None;
    for k in 1..400 {
        let z = cam.focus_distance * (1.0 + 0.05 * k as f64);
        let r = coc_radius_px(z, &base, pixel_pitch);
        if r.abs() >= 8.0 {
            probe = Some(z);
            break;
        }
    }
    let z = probe.ok_or_else(|| {
        Error::Simulation("camera too weakly defocused to calibrate alpha".into())
    })?;
    let psf = make_psf_pair_capped(z, &base, pixel_pitch, DEFAULT_MAX_PSF_RADIUS)?;
    let separation = psf.centroid_separation();
    let d_unit = crate::convert::depth_to_disparity_scalar(z, &base);
    Ok(separation / d_unit)
}

/// Deterministic random dot chart: anti-aliased bright dots on black, with
/// expected bright-pixel fraction equal to `dot_density`.
pub fn render_random_dot_chart(
    width: usize,
    height: usize,
    dot_density: f64,
    seed: u64,
) -> Result<Grid> {
    if !(0.0..1.0).contains(&dot_density) {
        return Err(Error::Simulation(format!(
            "dot density {dot_density} outside [0, 1)"
        )));
    }
    let mut chart = Grid::new(width, height);
    if dot_density == 0.0 {
        return Ok(chart);
    }
    let dot_radius = 0.75f64;
    let dot_area = std::f64::consts::PI * dot_radius * dot_radius;
    // union coverage of independently placed discs: 1 - exp(-n*area/WH)
    let n = (-(1.0 - dot_density).ln() * (width * height) as f64 / dot_area).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // pixel-center-inside rasterization: averaged over uniform centers a
    // disc lights up exactly pi*r^2 pixels, so the union coverage above
    // holds without an effective-area correction
    for _ in 0..n {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let x0 = (cx - dot_radius).floor().max(0.0) as usize;
        let x1 = ((cx + dot_radius).ceil() as usize).min(width - 1);
        let y0 = (cy - dot_radius).floor().max(0.0) as usize;
        let y1 = ((cy + dot_radius).ceil() as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= dot_radius * dot_radius {
                    chart.set(x, y, 1.0);
                }
            }
        }
    }
    Ok(chart)
}

/// Convolution with mirror boundary handling, parallel over rows.
fn convolve_mirror(src: &Grid, kernel: &Grid) -> Grid {
    let (w, h) = (src.width, src.height);
    let kh = kernel.height / 2;
    let kw = kernel.width / 2;
    let mut out = Grid::new(w, h);
    out.data
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for ky in 0..kernel.height {
                    for kx in 0..kernel.width {
                        let k = kernel.at(kx, ky);
                        if k == 0.0 {
                            continue;
                        }
                        // gather formulation of scatter through the PSF
                        let sx = x as isize + kw as isize - kx as isize;
                        let sy = y as isize + kh as isize - ky as isize;
                        acc += k * src.at_mirrored(sx, sy);
                    }
                }
                *o = acc;
            }
        });
    out
}

/// Render left/right dual-pixel views of `image` seen at `depth`.
///
/// Depth is quantized into inverse-depth layers, each layer is blurred
/// with its PSF pair, and layers are composited back to front. The
/// grayscale input is retained as the guide.
pub fn simulate_dp(
    image: &Guide,
    depth: &DepthMap,
    cam: &CameraParams,
    cfg: &SimConfig,
) -> Result<DpImagePair> {
    let (w, h) = (image.width(), image.height());
    if depth.width() != w || depth.height() != h {
        return Err(Error::Simulation(format!(
            "image {}x{} and depth {}x{} differ in size",
            w,
            h,
            depth.width(),
            depth.height()
        )));
    }
    if depth.valid.count() != w * h {
        return Err(Error::Simulation(
            "simulation requires a fully valid depth map".into(),
        ));
    }
    let gray = image.to_gray();

    // group pixels into inverse-depth layers
    let diopters: Vec<f64> = depth.values.data.iter().map(|&z| 1.0 / z).collect();
    let qmin = diopters.iter().cloned().fold(f64::INFINITY, f64::min);
    let qmax = diopters.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let layers = if qmax - qmin < 1e-12 {
        1
    } else {
        cfg.depth_layers.max(1)
    };
    let mut bin_of = vec![0usize; w * h];
    if layers > 1 {
        for (i, &q) in diopters.iter().enumerate() {
            let t = (q - qmin) / (qmax - qmin);
            bin_of[i] = ((t * layers as f64) as usize).min(layers - 1);
        }
    }
    let mut bin_sum = vec![0.0f64; layers];
    let mut bin_count = vec![0usize; layers];
    for (i, &b) in bin_of.iter().enumerate() {
        bin_sum[b] += diopters[i];
        bin_count[b] += 1;
    }

    let mut left_acc = Grid::new(w, h);
    let mut right_acc = Grid::new(w, h);
    let mut left_cov = Grid::new(w, h);
    let mut right_cov = Grid::new(w, h);

    // far layers first (small inverse depth), near layers composite over
    for b in 0..layers {
        if bin_count[b] == 0 {
            continue;
        }
        let z_layer = bin_count[b] as f64 / bin_sum[b];
        let psf = make_psf_pair_capped(z_layer, cam, cfg.pixel_pitch, cfg.max_psf_radius)?;

        let mut layer_img = Grid::new(w, h);
        let mut layer_mask = Grid::new(w, h);
        for i in 0..w * h {
            if bin_of[i] == b {
                layer_img.data[i] = gray.data[i];
                layer_mask.data[i] = 1.0;
            }
        }
        for (kernel, acc, cov) in [
            (&psf.left_kernel, &mut left_acc, &mut left_cov),
            (&psf.right_kernel, &mut right_acc, &mut right_cov),
        ] {
            let img_b = convolve_mirror(&layer_img, kernel);
            let mask_b = convolve_mirror(&layer_mask, kernel);
            for i in 0..w * h {
                let a = mask_b.data[i];
                acc.data[i] = img_b.data[i] + (1.0 - a) * acc.data[i];
                cov.data[i] = a + (1.0 - a) * cov.data[i];
            }
        }
    }

    let mut left = Grid::new(w, h);
    let mut right = Grid::new(w, h);
    for i in 0..w * h {
        left.data[i] = (left_acc.data[i] / left_cov.data[i].max(1e-12)).clamp(0.0, 1.0);
        right.data[i] = (right_acc.data[i] / right_cov.data[i].max(1e-12)).clamp(0.0, 1.0);
    }

    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for view in [&mut left, &mut right] {
            for v in &mut view.data {
                *v = (*v + cfg.noise_sigma * standard_normal(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }

    DpImagePair::new(left, right, Some(Guide::gray(gray)))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
