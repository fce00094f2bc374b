//! The five single-stage subcommands.

use std::path::PathBuf;

use clap::Args;
use log::info;
use serde::Serialize;

use dpdisp::camera::CameraParams;
use dpdisp::eval::evaluate;
use dpdisp::grid::{ConfidenceMap, DpImagePair};
use dpdisp::io::{read_guide_png, write_gray_png};
use dpdisp::matching::{edge_mask, template_match, MatchConfig};
use dpdisp::optics::{calibrate_alpha, simulate_dp, SimConfig};
use dpdisp::refine::{complete_sparse, refine_pipeline, FgsConfig, RefineConfig};
use dpdisp::{Error, Result};

use crate::util::{
    load_json, read_depth, read_disparity, read_grid, require_file, save_json, write_disparity,
    write_grid,
};

#[derive(Args)]
pub struct SimulateArgs {
    /// Input image (8- or 16-bit PNG, gray or RGB).
    #[arg(long)]
    pub image: PathBuf,
    /// Depth map in meters (PFM or PNG16+sidecar), fully valid.
    #[arg(long)]
    pub depth: PathBuf,
    /// Camera JSON {focal_length_m, f_number, focus_distance_m, alpha}.
    #[arg(long)]
    pub camera: PathBuf,
    #[arg(long, default_value_t = 4e-6)]
    pub pixel_pitch: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Calibrate alpha from the PSF model instead of taking it from the
    /// camera file.
    #[arg(long)]
    pub calibrate_alpha: bool,
    #[arg(long)]
    pub out_left: PathBuf,
    #[arg(long)]
    pub out_right: PathBuf,
}

pub fn run_simulate(args: &SimulateArgs, seed: u64) -> Result<()> {
    require_file(&args.camera, "camera file")?;
    require_file(&args.image, "image")?;
    require_file(&args.depth, "depth map")?;
    let mut cam = CameraParams::from_json_file(&args.camera)?;
    if args.calibrate_alpha {
        cam = cam.with_alpha(calibrate_alpha(&cam, args.pixel_pitch)?)?;
    }
    let guide = read_guide_png(&args.image)?;
    let depth = read_depth(&args.depth)?;
    let cfg = SimConfig {
        pixel_pitch: args.pixel_pitch,
        noise_sigma: args.noise_sigma,
        seed,
        ..SimConfig::default()
    };
    let pair = simulate_dp(&guide, &depth, &cam, &cfg)?;
    write_grid(&args.out_left, &pair.left)?;
    write_grid(&args.out_right, &pair.right)?;
    info!("simulated {}x{} dual-pixel pair", pair.width(), pair.height());
    Ok(())
}

#[derive(Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// MatchConfig JSON; defaults used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_disparity: PathBuf,
    /// Edge-reliability mask output (gray PNG).
    #[arg(long)]
    pub out_mask: Option<PathBuf>,
}

pub fn run_match(args: &MatchArgs) -> Result<()> {
    let cfg: MatchConfig = match &args.config {
        Some(p) => load_json(p)?,
        None => MatchConfig::default(),
    };
    let left = read_grid(&args.left)?;
    let right = read_grid(&args.right)?;
    let pair = DpImagePair::new(left, right, None)?;
    let mask = edge_mask(&pair.left, &cfg)?;
    let disparity = template_match(&pair, &mask, &cfg)?;
    write_disparity(&args.out_disparity, &disparity)?;
    if let Some(p) = &args.out_mask {
        write_gray_png(p, &mask.values)?;
    }
    info!(
        "matched {} of {} pixels",
        disparity.valid.count(),
        disparity.width() * disparity.height()
    );
    Ok(())
}

#[derive(Args)]
pub struct CompleteArgs {
    #[arg(long)]
    pub sparse: PathBuf,
    /// Guide image PNG.
    #[arg(long)]
    pub guide: PathBuf,
    /// FgsConfig JSON; defaults used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dense: PathBuf,
    #[arg(long)]
    pub out_conf: PathBuf,
}

pub fn run_complete(args: &CompleteArgs) -> Result<()> {
    let cfg: FgsConfig = match &args.config {
        Some(p) => load_json(p)?,
        None => FgsConfig::default(),
    };
    let sparse = read_disparity(&args.sparse)?;
    let guide = read_guide_png(&args.guide)?;
    let (dense, conf) = complete_sparse(&sparse, &guide, &cfg)?;
    write_disparity(&args.out_dense, &dense)?;
    write_grid(&args.out_conf, &conf.values)?;
    Ok(())
}

#[derive(Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub dense: PathBuf,
    #[arg(long)]
    pub conf: PathBuf,
    #[arg(long)]
    pub guide: PathBuf,
    /// RefineConfig JSON; defaults used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_refine(args: &RefineArgs) -> Result<()> {
    let cfg: RefineConfig = match &args.config {
        Some(p) => load_json(p)?,
        None => RefineConfig::default(),
    };
    let dense = read_disparity(&args.dense)?;
    let conf = ConfidenceMap::new(read_grid(&args.conf)?);
    let guide = read_guide_png(&args.guide)?;
    let refined = refine_pipeline(&dense, &conf, &guide, &cfg)?;
    write_disparity(&args.out, &refined)
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Value domain of --gt. The metrics are affine invariant, so inverse
    /// depth compares directly against disparity.
    #[arg(long, value_parser = ["disparity", "inverse-depth"], default_value = "disparity")]
    pub gt_kind: String,
    /// Optional crop rectangle "x,y,w,h" applied to both maps.
    #[arg(long)]
    pub crop: Option<String>,
    /// Report JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV to append a one-line summary row to.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalReport {
    gt_kind: String,
    #[serde(flatten)]
    metrics: dpdisp::MetricReport,
}

fn apply_crop(
    map: &dpdisp::DisparityMap,
    rect: (usize, usize, usize, usize),
) -> Result<dpdisp::DisparityMap> {
    let (x0, y0, w, h) = rect;
    if x0 + w > map.width() || y0 + h > map.height() || w == 0 || h == 0 {
        return Err(Error::Config(format!(
            "crop {x0},{y0},{w},{h} outside {}x{} map",
            map.width(),
            map.height()
        )));
    }
    let mut values = dpdisp::Grid::new(w, h);
    let mut valid = dpdisp::Mask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            values.set(x, y, map.values.at(x0 + x, y0 + y));
            valid.set(x, y, map.valid.at(x0 + x, y0 + y));
        }
    }
    dpdisp::DisparityMap::new(values, valid)
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let mut est = read_disparity(&args.est)?;
    let mut gt = read_disparity(&args.gt)?;
    if let Some(spec) = &args.crop {
        let parts: Vec<usize> = spec
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad crop '{spec}': {e}")))?;
        if parts.len() != 4 {
            return Err(Error::Config(format!("bad crop '{spec}': need x,y,w,h")));
        }
        let rect = (parts[0], parts[1], parts[2], parts[3]);
        est = apply_crop(&est, rect)?;
        gt = apply_crop(&gt, rect)?;
    }
    let metrics = evaluate(&est, &gt)?;
    let report = EvalReport {
        gt_kind: args.gt_kind.clone(),
        metrics,
    };
    save_json(&args.out, &report)?;
    if let Some(csv) = &args.csv {
        use std::io::Write;
        let new = !csv.exists();
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(csv)?;
        if new {
            writeln!(file, "est,gt,ai1,ai2,spearman_one_minus_abs,n_pixels,degenerate")?;
        }
        writeln!(
            file,
            "{},{},{},{},{},{},{}",
            args.est.display(),
            args.gt.display(),
            metrics.ai1,
            metrics.ai2,
            metrics.spearman_one_minus_abs,
            metrics.n_pixels,
            metrics.degenerate
        )?;
    }
    println!(
        "AI(1)={:.6} AI(2)={:.6} 1-|rho_s|={:.6} n={}",
        metrics.ai1, metrics.ai2, metrics.spearman_one_minus_abs, metrics.n_pixels
    );
    Ok(())
}
