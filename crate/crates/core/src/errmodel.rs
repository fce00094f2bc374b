//! Template-matching error model: the simulation sweep that measures the
//! disparity error under varying optics, the parametric standard-deviation
//! model sigma_d = c1 * (c2*z / (F*z_f))^(z/c3), Laplace sampling of that
//! error, and the RGBD-to-sparse-disparity training data generator.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraParams;
use crate::convert::depth_to_disparity;
use crate::error::{Error, Result};
use crate::grid::{DepthMap, DisparityMap, Grid, Guide, Mask};
use crate::matching::{edge_mask, template_match, MatchConfig};
use crate::optics::{calibrate_alpha, render_random_dot_chart, simulate_dp, SimConfig};

/// Constants of the parametric disparity-error model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ErrorModel {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ErrorModel {
    /// `c1 = 0` is accepted as the explicit noiseless model; `c2` and `c3`
    /// must stay positive.
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let ok = c1 >= 0.0
            && c2 > 0.0
            && c3 > 0.0
            && c1.is_finite()
            && c2.is_finite()
            && c3.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "invalid error model constants ({c1}, {c2}, {c3})"
            )));
        }
        Ok(ErrorModel { c1, c2, c3 })
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let raw: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("error model json {}: {e}", path.display())))?;
        let field = |k: &str| {
            raw.get(k)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Config(format!("error model json missing field {k}")))
        };
        ErrorModel::new(field("c1")?, field("c2")?, field("c3")?)
    }
}

/// Predicted standard deviation of the template-matching disparity error,
/// in pixels.
pub fn sigma_d(model: &ErrorModel, z: f64, z_f: f64, f_number: f64) -> f64 {
    debug_assert!(z > 0.0 && z_f > 0.0 && f_number > 0.0);
    let base = model.c2 * z / (f_number * z_f);
    model.c1 * (z / model.c3 * base.ln()).exp()
}

/// One measured point of the error sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRecord {
    pub z: f64,
    pub z_f: f64,
    pub f_number: f64,
    pub sigma_measured: f64,
    pub n_samples: usize,
}

/// Fixed simulation settings shared by all sweep points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSimConfig {
    pub chart_width: usize,
    pub chart_height: usize,
    pub dot_density: f64,
    pub focal_length: f64,
    pub pixel_pitch: f64,
    pub noise_sigma: f64,
    pub match_cfg: MatchConfig,
}

impl Default for SweepSimConfig {
    fn default() -> Self {
        SweepSimConfig {
            chart_width: 160,
            chart_height: 160,
            dot_density: 0.25,
            focal_length: 0.05,
            pixel_pitch: 4e-6,
            noise_sigma: 0.0,
            match_cfg: MatchConfig::default(),
        }
    }
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 step, decorrelates per-point streams
    let mut x = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Measure the TM disparity error for one (z, z_f, F) condition.
pub fn measure_sweep_point(
    z: f64,
    z_f: f64,
    f_number: f64,
    sim: &SweepSimConfig,
    seed: u64,
) -> Result<SweepRecord> {
    if z <= 0.0 || z_f <= 0.0 || f_number <= 0.0 {
        return Err(Error::Simulation("non-positive sweep condition".into()));
    }
    let cam = CameraParams::new(sim.focal_length, f_number, z_f, 1.0)?;
    let alpha = calibrate_alpha(&cam, sim.pixel_pitch)?;
    let cam = cam.with_alpha(alpha)?;

    let chart = render_random_dot_chart(sim.chart_width, sim.chart_height, sim.dot_density, seed)?;
    let sim_cfg = SimConfig {
        pixel_pitch: sim.pixel_pitch,
        noise_sigma: sim.noise_sigma,
        seed,
        ..SimConfig::default()
    };
    let depth = DepthMap::constant(sim.chart_width, sim.chart_height, z);
    let pair = simulate_dp(&Guide::gray(chart.clone()), &depth, &cam, &sim_cfg)?;
    let mask = edge_mask(&pair.left, &sim.match_cfg)?;
    let matched = template_match(&pair, &mask, &sim.match_cfg)?;

    let gt = crate::convert::depth_to_disparity_scalar(z, &cam);
    let errors: Vec<f64> = matched
        .values
        .data
        .iter()
        .zip(&matched.valid.data)
        .filter(|(_, ok)| **ok)
        .map(|(v, _)| v - gt)
        .collect();
    if errors.len() < 100 {
        return Err(Error::Simulation(format!(
            "sweep point (z={z}, z_f={z_f}, F={f_number}) produced only {} samples",
            errors.len()
        )));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / errors.len() as f64;
    Ok(SweepRecord {
        z,
        z_f,
        f_number,
        sigma_measured: var.sqrt(),
        n_samples: errors.len(),
    })
}

/// Run the full grid of sweep conditions. Each point gets an independent
/// seed derived from (seed, point index), so the result is the same under
/// any execution order.
pub fn run_error_sweep(
    z_list: &[f64],
    zf_list: &[f64],
    f_list: &[f64],
    sim: &SweepSimConfig,
    seed: u64,
) -> Result<Vec<SweepRecord>> {
    let mut records = Vec::new();
    let mut index = 0u64;
    for &z_f in zf_list {
        for &f_number in f_list {
            for &z in z_list {
                records.push(measure_sweep_point(
                    z,
                    z_f,
                    f_number,
                    sim,
                    mix_seed(seed, index),
                )?);
                index += 1;
            }
        }
    }
    Ok(records)
}

/// Fit the model constants to sweep records by least squares in log-sigma
/// space. Returns the model and the residual RMS of log sigma.
///
/// With a = ln c1, p = ln(c2)/c3 and k = 1/c3 the model is linear:
/// ln sigma = a + p*z + k * z*ln(z/(F*z_f)), so the log-space least squares
/// problem has a closed-form solution.
pub fn fit_error_model(records: &[SweepRecord]) -> Result<(ErrorModel, f64)> {
    let usable: Vec<&SweepRecord> = records.iter().filter(|r| r.sigma_measured > 1e-9).collect();
    if usable.len() < 10 {
        return Err(Error::Eval(format!(
            "degenerate sweep: {} usable records, need >= 10",
            usable.len()
        )));
    }
    let mut zs: Vec<f64> = usable.iter().map(|r| r.z).collect();
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    zs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if zs.len() < 3 {
        return Err(Error::Eval(
            "degenerate sweep: need at least 3 distinct depths".into(),
        ));
    }

    // normal equations for features (1, z, z*ln(z/(F*z_f)))
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for r in &usable {
        let feat = [1.0, r.z, r.z * (r.z / (r.f_number * r.z_f)).ln()];
        let target = r.sigma_measured.ln();
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += feat[i] * feat[j];
            }
            atb[i] += feat[i] * target;
        }
    }
    let coef = solve3(ata, atb)
        .ok_or_else(|| Error::Eval("degenerate sweep: singular normal equations".into()))?;
    let (a, p, k) = (coef[0], coef[1], coef[2]);
    if k <= 0.0 || !k.is_finite() {
        return Err(Error::Eval(
            "sweep not informative: fitted exponent scale is non-positive".into(),
        ));
    }
    let model = ErrorModel::new(a.exp(), (p / k).exp(), 1.0 / k)?;

    let mut ss = 0.0;
    for r in &usable {
        let resid = r.sigma_measured.ln() - sigma_d(&model, r.z, r.z_f, r.f_number).ln();
        ss += resid * resid;
    }
    Ok((model, (ss / usable.len() as f64).sqrt()))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// Add zero-mean Laplace noise whose standard deviation is `sigma`
/// (scale b = sigma / sqrt(2)).
pub fn sample_disparity<R: Rng>(d: f64, sigma: f64, rng: &mut R) -> f64 {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return d;
    }
    let b = sigma / std::f64::consts::SQRT_2;
    let u: f64 = rng.gen_range(-0.5..0.5);
    d - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Random camera draw covering consumer optics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSampler {
    /// Focus distance range in meters, sampled log-uniformly.
    pub focus_range: (f64, f64),
    /// Discrete f-number choices.
    pub f_numbers: Vec<f64>,
    /// Focal length range in meters, sampled uniformly.
    pub focal_range: (f64, f64),
    pub pixel_pitch: f64,
}

impl Default for CameraSampler {
    fn default() -> Self {
        CameraSampler {
            focus_range: (0.3, 10.0),
            f_numbers: vec![1.4, 2.0, 2.8, 4.0],
            focal_range: (0.024, 0.085),
            pixel_pitch: 4e-6,
        }
    }
}

impl CameraSampler {
    /// Sample camera parameters with alpha calibrated to this simulator.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<CameraParams> {
        let (lo, hi) = self.focus_range;
        let z_f = (rng.gen_range(lo.ln()..hi.ln())).exp();
        let f_number = self.f_numbers[rng.gen_range(0..self.f_numbers.len())];
        let f = rng.gen_range(self.focal_range.0..self.focal_range.1);
        let cam = CameraParams::new(f, f_number, z_f, 1.0)?;
        let alpha = calibrate_alpha(&cam, self.pixel_pitch)?;
        cam.with_alpha(alpha)
    }
}

/// One generated training sample.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub sparse: DisparityMap,
    pub dense: DisparityMap,
    pub guide: Guide,
    pub camera: CameraParams,
}

/// Build a (sparse input, dense pseudo-ground-truth) disparity pair from an
/// aligned RGB(-or-gray) image and depth map. The pseudo ground truth is
/// the converted depth; the sparse input keeps it only on image edges and
/// perturbs each kept pixel with the modeled TM error.
pub fn generate_training_sample<R: Rng>(
    rgb: &Guide,
    depth: &DepthMap,
    sampler: &CameraSampler,
    model: &ErrorModel,
    match_cfg: &MatchConfig,
    rng: &mut R,
) -> Result<TrainingSample> {
    if rgb.width() != depth.width() || rgb.height() != depth.height() {
        return Err(Error::Config("rgb and depth are not aligned".into()));
    }
    let camera = sampler.sample(rng)?;
    let dense = depth_to_disparity(depth, &camera)?;
    let gray = rgb.to_gray();
    let edges = edge_mask(&gray, match_cfg)?.binarize(0.5);
    let keep = edges.intersect(&depth.valid);

    let (w, h) = (rgb.width(), rgb.height());
    let mut values = Grid::filled(w, h, f64::NAN);
    let mut valid = Mask::filled(w, h, false);
    for i in 0..w * h {
        if !keep.data[i] {
            continue;
        }
        let z = depth.values.data[i];
        let sigma = sigma_d(model, z, camera.focus_distance, camera.f_number);
        values.data[i] = sample_disparity(dense.values.data[i], sigma, rng);
        valid.data[i] = true;
    }
    Ok(TrainingSample {
        sparse: DisparityMap::new(values, valid)?,
        dense,
        guide: rgb.clone(),
        camera,
    })
}

pub const PAPER_CONSTANTS: ErrorModel = ErrorModel {
    c1: 6.93,
    c2: 0.48,
    c3: 1.39,
};
