//! On-disk dataset cache shared by `ingest` and `synth`.
//!
//! A dataset directory holds `windows.json` (every ego-frame window),
//! `split.json` (train/val/test indices into it), `scaler.json` (fitted on
//! the train split only) and the resolved `config.toml`.

use std::path::{Path, PathBuf};

use aigem::traj::{fit_scaler, segment_all, split_indices, FeatureScaler, SegmentOptions, SplitIndices, VehicleTrack};
use aigem::SceneWindow;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, Split};
use crate::error::{CliError, Result, ResultExt};

pub const WINDOWS_FILE: &str = "windows.json";
pub const SPLIT_FILE: &str = "split.json";
pub const SCALER_FILE: &str = "scaler.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCache {
    pub dt: f64,
    pub history_len: usize,
    pub future_len: usize,
    /// Radius the windows were cut with; graphs may not use a larger one.
    pub radius: f64,
    pub windows: Vec<SceneWindow>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub cache: WindowCache,
    pub split: SplitIndices,
    pub scaler: FeatureScaler,
}

impl Dataset {
    pub fn windows(&self, split: Split) -> Vec<SceneWindow> {
        let idx = match split {
            Split::Train => &self.split.train,
            Split::Val => &self.split.val,
            Split::Test => &self.split.test,
        };
        idx.iter().map(|&i| self.cache.windows[i].clone()).collect()
    }
}

/// Summary printed by the data commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub vehicles: usize,
    pub windows: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Creates `dir` and refuses to clobber any of `files` unless `force`.
pub fn prepare_output(dir: &Path, files: &[&str], force: bool) -> Result<()> {
    std::fs::create_dir_all(dir).data_ctx(|| format!("creating output directory {}", dir.display()))?;
    if !force {
        if let Some(f) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(CliError::usage(anyhow::anyhow!(
                "{} already exists; pass --force to overwrite",
                f.display()
            )));
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    std::fs::write(path, text).data_ctx(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).data_ctx(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).data_ctx(|| format!("parsing {}", path.display()))
}

/// Windows every ego, splits them and fits the scaler, then writes the
/// cache files into `out` (which must already be prepared).
pub fn build_dataset(tracks: &[VehicleTrack], cfg: &DataConfig, out: &Path) -> Result<DatasetSummary> {
    let opts = SegmentOptions {
        history_len: cfg.history,
        future_len: cfg.future,
        stride: cfg.stride,
        sensing_radius: Some(cfg.radius),
    };
    let windows = segment_all(tracks, cfg.egos.as_deref(), &opts)?;
    if windows.is_empty() {
        return Err(CliError::data(anyhow::anyhow!(
            "no window of {} frames fits the recording",
            cfg.history + cfg.future
        )));
    }
    let split = split_indices(windows.len(), cfg.fractions, cfg.seed)?;
    let train: Vec<SceneWindow> = split.train.iter().map(|&i| windows[i].clone()).collect();
    let scaler = fit_scaler(&train, cfg.radius).map_err(|e| CliError::from(e).context("fitting the feature scaler"))?;
    let summary = DatasetSummary {
        vehicles: tracks.len(),
        windows: windows.len(),
        train: split.train.len(),
        val: split.val.len(),
        test: split.test.len(),
    };
    let cache = WindowCache {
        dt: windows[0].dt,
        history_len: cfg.history,
        future_len: cfg.future,
        radius: cfg.radius,
        windows,
    };
    write_json(&out.join(WINDOWS_FILE), &cache)?;
    write_json(&out.join(SPLIT_FILE), &split)?;
    write_json(&out.join(SCALER_FILE), &scaler)?;
    Ok(summary)
}

fn expect_file(dir: &Path, name: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(CliError::data(anyhow::anyhow!(
            "expected {} (run `aigem ingest` or `aigem synth` with --out {})",
            p.display(),
            dir.display()
        )));
    }
    Ok(p)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let cache: WindowCache = read_json(&expect_file(dir, WINDOWS_FILE)?)?;
    let split: SplitIndices = read_json(&expect_file(dir, SPLIT_FILE)?)?;
    let scaler: FeatureScaler = read_json(&expect_file(dir, SCALER_FILE)?)?;
    let n = cache.windows.len();
    if split.train.iter().chain(&split.val).chain(&split.test).any(|&i| i >= n) {
        return Err(CliError::data(anyhow::anyhow!("{} indexes past the {n} cached windows", dir.join(SPLIT_FILE).display())));
    }
    Ok(Dataset { cache, split, scaler })
}
