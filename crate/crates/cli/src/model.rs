//! Error-model fitting and training-data generation.

use std::path::PathBuf;

use clap::Args;
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use dpdisp::errmodel::{
    fit_error_model, generate_training_sample, run_error_sweep, CameraSampler, ErrorModel,
    SweepSimConfig,
};
use dpdisp::grid::DepthMap;
use dpdisp::io::{read_guide_png, write_guide_png};
use dpdisp::matching::MatchConfig;
use dpdisp::{Error, Result};

use crate::util::{load_json, read_depth, require_file, save_json, write_disparity};

/// Grid of sweep conditions plus shared simulation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub z_list: Vec<f64>,
    pub zf_list: Vec<f64>,
    pub f_list: Vec<f64>,
    #[serde(default)]
    pub sim: SweepSimConfig,
}

#[derive(Args)]
pub struct FitArgs {
    /// SweepConfig JSON (z/z_f/F grids + simulation settings).
    #[arg(long)]
    pub sweep_config: PathBuf,
    /// Fitted model output JSON {c1, c2, c3, residual_rms}.
    #[arg(long)]
    pub out_model: PathBuf,
    /// Also dump the raw sweep records next to the model.
    #[arg(long)]
    pub out_records: Option<PathBuf>,
}

#[derive(Serialize)]
struct FittedModel {
    c1: f64,
    c2: f64,
    c3: f64,
    residual_rms: f64,
    n_records: usize,
}

pub fn run_fit(args: &FitArgs, seed: u64) -> Result<()> {
    let cfg: SweepConfig = load_json(&args.sweep_config)?;
    let records = run_error_sweep(&cfg.z_list, &cfg.zf_list, &cfg.f_list, &cfg.sim, seed)?;
    if let Some(p) = &args.out_records {
        save_json(p, &records)?;
    }
    let (model, residual_rms) = fit_error_model(&records)?;
    save_json(
        &args.out_model,
        &FittedModel {
            c1: model.c1,
            c2: model.c2,
            c3: model.c3,
            residual_rms,
            n_records: records.len(),
        },
    )?;
    info!(
        "fitted c1={:.4} c2={:.4} c3={:.4} (log-sigma residual {:.4})",
        model.c1, model.c2, model.c3, residual_rms
    );
    Ok(())
}

#[derive(Args)]
pub struct DatagenArgs {
    /// CSV manifest, one "rgb_path,depth_path" row per scene.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Error-model JSON {c1, c2, c3}.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of samples; scenes are cycled.
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Camera draw settings JSON; defaults used when omitted.
    #[arg(long)]
    pub sampler: Option<PathBuf>,
}

fn read_manifest(path: &PathBuf) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let rgb = parts.next().unwrap_or("").trim();
        let depth = parts.next().unwrap_or("").trim();
        if rgb.is_empty() || depth.is_empty() {
            return Err(Error::Config(format!(
                "{}:{}: expected 'rgb_path,depth_path'",
                path.display(),
                lineno + 1
            )));
        }
        rows.push((PathBuf::from(rgb), PathBuf::from(depth)));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: empty manifest", path.display())));
    }
    Ok(rows)
}

pub fn run_datagen(args: &DatagenArgs, seed: u64) -> Result<()> {
    let rows = read_manifest(&args.manifest)?;
    for (rgb, depth) in &rows {
        require_file(rgb, "rgb image")?;
        require_file(depth, "depth map")?;
    }
    let model = ErrorModel::from_json_file(&args.model)?;
    let sampler: CameraSampler = match &args.sampler {
        Some(p) => load_json(p)?,
        None => CameraSampler::default(),
    };
    let match_cfg = MatchConfig::default();
    std::fs::create_dir_all(&args.out_dir)?;

    // cache scenes so cycling does not re-read files
    let mut scenes: Vec<(dpdisp::Guide, DepthMap)> = Vec::new();
    for (rgb, depth) in &rows {
        scenes.push((read_guide_png(rgb)?, read_depth(depth)?));
    }

    for i in 0..args.count {
        let (guide, depth) = &scenes[i % scenes.len()];
        // independent stream per sample keeps output stable under count
        // changes
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let sample = generate_training_sample(guide, depth, &sampler, &model, &match_cfg, &mut rng)?;
        let dir = args.out_dir.join(format!("sample_{i:05}"));
        std::fs::create_dir_all(&dir)?;
        write_disparity(&dir.join("sparse.pfm"), &sample.sparse)?;
        write_disparity(&dir.join("dense.pfm"), &sample.dense)?;
        write_guide_png(&dir.join("guide.png"), &sample.guide)?;
        sample.camera.to_json_file(&dir.join("camera.json"))?;
    }
    info!("wrote {} samples to {}", args.count, args.out_dir.display());
    Ok(())
}
