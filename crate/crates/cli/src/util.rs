//! Shared helpers: map/config loading and canonical JSON hashing.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use dpdisp::grid::{DepthMap, DisparityMap, Grid, Mask};
use dpdisp::io::{read_map, write_map, MapFormat};
use dpdisp::{Error, Result};

pub fn read_disparity(path: &Path) -> Result<DisparityMap> {
    let (values, valid) = read_map(path, MapFormat::from_path(path)?)?;
    DisparityMap::new(values, valid)
}

pub fn write_disparity(path: &Path, d: &DisparityMap) -> Result<()> {
    write_map(path, &d.values, &d.valid, MapFormat::from_path(path)?)
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    let (values, valid) = read_map(path, MapFormat::from_path(path)?)?;
    DepthMap::new(values, valid)
}

pub fn write_grid(path: &Path, g: &Grid) -> Result<()> {
    let valid = Mask::filled(g.width, g.height, true);
    write_map(path, g, &valid, MapFormat::from_path(path)?)
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    let (values, _) = read_map(path, MapFormat::from_path(path)?)?;
    Ok(values)
}

/// Parse a JSON config file into any deserializable stage config.
pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialize: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// SHA-256 of the canonical JSON form (serde_json sorts object keys).
pub fn config_hash<T: serde::Serialize>(value: &T) -> Result<String> {
    let canon: serde_json::Value =
        serde_json::to_value(value).map_err(|e| Error::Config(format!("canonicalize: {e}")))?;
    let text = serde_json::to_string(&canon)
        .map_err(|e| Error::Config(format!("canonicalize: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Config(format!(
            "{what} not found: {}",
            path.display()
        )));
    }
    Ok(())
}
