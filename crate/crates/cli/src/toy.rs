//! Stereo-vs-dual-pixel template-matching comparison on a random dot
//! chart: a plain shifted stereo pair matches almost everywhere, while the
//! DP pair's asymmetric defocus blur degrades matching, and the resulting
//! error distribution is closer to Laplace than to Gaussian.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use dpdisp::camera::CameraParams;
use dpdisp::convert::depth_to_disparity_scalar;
use dpdisp::grid::{DepthMap, DpImagePair, Grid, Guide};
use dpdisp::matching::{edge_mask, template_match, MatchConfig};
use dpdisp::optics::{calibrate_alpha, render_random_dot_chart, simulate_dp, SimConfig};
use dpdisp::Result;

use crate::util::save_json;

#[derive(Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Chart side length in pixels.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    /// Ground-truth disparity in pixels (integer, used as the stereo shift).
    /// Sized so the DP defocus blur is substantial.
    #[arg(long, default_value_t = 10)]
    pub disparity: i64,
}

#[derive(Serialize)]
struct ToySummary {
    gt_disparity: f64,
    dp_scene_depth_m: f64,
    stereo_within_1px: f64,
    dp_within_1px: f64,
    stereo_n: usize,
    dp_n: usize,
    dp_laplace_loglik: f64,
    dp_gaussian_loglik: f64,
}

fn shift_mirror(src: &Grid, k: isize) -> Grid {
    let mut out = Grid::new(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            out.set(x, y, src.at_mirrored(x as isize - k, y as isize));
        }
    }
    out
}

fn matched_errors(pair: &DpImagePair, gt: f64, cfg: &MatchConfig) -> Result<Vec<f64>> {
    let mask = edge_mask(&pair.left, cfg)?;
    let d = template_match(pair, &mask, cfg)?;
    Ok(d.values
        .data
        .iter()
        .zip(&d.valid.data)
        .filter(|(_, ok)| **ok)
        .map(|(v, _)| v - gt)
        .collect())
}

fn within_1px(errors: &[f64]) -> f64 {
    errors.iter().filter(|e| e.abs() <= 1.0).count() as f64 / errors.len() as f64
}

/// Maximum-likelihood Laplace fit log-likelihood.
fn laplace_loglik(errors: &[f64]) -> f64 {
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mu = sorted[sorted.len() / 2];
    let n = errors.len() as f64;
    let b = (errors.iter().map(|e| (e - mu).abs()).sum::<f64>() / n).max(1e-9);
    -n * (2.0 * b).ln() - n
}

/// Maximum-likelihood Gaussian fit log-likelihood.
fn gaussian_loglik(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let mu = errors.iter().sum::<f64>() / n;
    let var = (errors.iter().map(|e| (e - mu) * (e - mu)).sum::<f64>() / n).max(1e-18);
    -0.5 * n * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * n
}

fn write_histogram(path: &PathBuf, stereo: &[f64], dp: &[f64]) -> Result<()> {
    use std::io::Write;
    let lo = -5.0f64;
    let step = 0.25f64;
    let bins = 40usize;
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "branch,bin_lo,bin_hi,count")?;
    for (name, errors) in [("stereo", stereo), ("dp", dp)] {
        let mut counts = vec![0usize; bins];
        for &e in errors {
            let idx = (((e - lo) / step).floor() as isize).clamp(0, bins as isize - 1);
            counts[idx as usize] += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let b0 = lo + step * i as f64;
            writeln!(file, "{name},{b0},{},{c}", b0 + step)?;
        }
    }
    Ok(())
}

pub fn run(args: &ToyArgs, seed: u64) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let cfg = MatchConfig::default();
    let chart = render_random_dot_chart(args.size, args.size, 0.25, seed)?;
    let gt = args.disparity as f64;

    // stereo branch: right view is the chart rigidly shifted by gt pixels
    let stereo_pair = DpImagePair::new(chart.clone(), shift_mirror(&chart, args.disparity as isize), None)?;
    let stereo_errors = matched_errors(&stereo_pair, gt, &cfg)?;

    // DP branch: same chart seen through the thin-lens simulator at the
    // depth whose disparity equals gt
    let pitch = 4e-6;
    let cam = CameraParams::new(0.05, 4.0, 2.0, 1.0)?;
    let cam = cam.with_alpha(calibrate_alpha(&cam, pitch)?)?;
    let inv_z = 1.0 / cam.focus_distance - gt / cam.disparity_coefficient();
    let z = 1.0 / inv_z;
    let depth = DepthMap::constant(args.size, args.size, z);
    let sim_cfg = SimConfig {
        pixel_pitch: pitch,
        seed,
        ..SimConfig::default()
    };
    let dp_pair = simulate_dp(&Guide::gray(chart.clone()), &depth, &cam, &sim_cfg)?;
    let dp_gt = depth_to_disparity_scalar(z, &cam);
    let dp_errors = matched_errors(&dp_pair, dp_gt, &cfg)?;

    write_histogram(&args.out_dir.join("histogram.csv"), &stereo_errors, &dp_errors)?;
    let summary = ToySummary {
        gt_disparity: gt,
        dp_scene_depth_m: z,
        stereo_within_1px: within_1px(&stereo_errors),
        dp_within_1px: within_1px(&dp_errors),
        stereo_n: stereo_errors.len(),
        dp_n: dp_errors.len(),
        dp_laplace_loglik: laplace_loglik(&dp_errors),
        dp_gaussian_loglik: gaussian_loglik(&dp_errors),
    };
    save_json(&args.out_dir.join("summary.json"), &summary)?;
    println!(
        "stereo within 1px: {:.4}  dp within 1px: {:.4}  laplace ll {:.1} vs gaussian ll {:.1}",
        summary.stereo_within_1px,
        summary.dp_within_1px,
        summary.dp_laplace_loglik,
        summary.dp_gaussian_loglik
    );
    Ok(())
}
