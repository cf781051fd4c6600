use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sim2real_core::image::load_image_set;
use sim2real_core::lane_eval::{
    default_h_samples, extract_ground_truth, read_lane_file, tusimple_accuracy, write_lane_file,
    SegmentationRaster, ThreeRunRule,
};

use super::{require, require_nonempty};
use crate::config::Config;
use crate::report::Outcome;
use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractGtConfig {
    /// Directory of RGB segmentation images.
    pub input: String,
    pub pattern: String,
    /// Lane-annotation file to write (one JSON frame per line).
    pub output: String,
    pub lane_color: [u8; 3],
    /// Sample rows; empty selects every 10th row from 250 to 10 above the bottom.
    pub h_samples: Vec<u32>,
    pub three_run_rule: ThreeRunRule,
}

impl Default for ExtractGtConfig {
    fn default() -> Self {
        Self {
            input: String::new(),
            pattern: "*.png".into(),
            output: String::new(),
            lane_color: [255, 255, 255],
            h_samples: Vec::new(),
            three_run_rule: ThreeRunRule::default(),
        }
    }
}

impl Config for ExtractGtConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require_nonempty(&mut p, "input", &self.input);
        require_nonempty(&mut p, "output", &self.output);
        require(
            &mut p,
            self.h_samples.windows(2).all(|w| w[0] < w[1]),
            "h_samples must be strictly increasing",
        );
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractGtArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    #[arg(long = "out")]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[arg(long, value_parser = ["pseudocode", "prose"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    three_run_rule: Option<String>,
}

pub fn run_extract(cfg: &ExtractGtConfig) -> Result<Outcome, CliError> {
    let set = load_image_set(&cfg.input, &cfg.pattern).map_err(CliError::input)?;
    let mut frames = Vec::with_capacity(set.len());
    let mut points = [0usize; 4];
    for (img, path) in set.images().iter().zip(set.paths()) {
        let id = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let raster = SegmentationRaster::new(img.clone(), cfg.lane_color).map_err(CliError::input)?;
        let rows = if cfg.h_samples.is_empty() {
            default_h_samples(img.height())
        } else {
            cfg.h_samples.clone()
        };
        if let Some(&r) = rows.iter().find(|&&r| r >= img.height()) {
            return Err(CliError::invalid(format!("{id}: h_sample {r} beyond height {}", img.height())));
        }
        let frame = extract_ground_truth(id, &raster, &rows, cfg.three_run_rule);
        for (k, lane) in frame.lanes.iter().enumerate() {
            points[k] += (0..lane.len()).filter(|&i| frame.point(k + 1, i).is_some()).count();
        }
        frames.push(frame);
    }
    write_lane_file(&cfg.output, &frames)
        .map_err(|e| CliError::invalid(format!("{}: {e}", cfg.output)))?;
    Ok(Outcome::new(json!({
        "frames": frames.len(),
        "output": cfg.output,
        "points_per_line": points,
    })))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneAccuracyConfig {
    pub pred: String,
    pub gt: String,
    /// Match tolerance in pixels.
    pub threshold: f64,
}

impl Default for LaneAccuracyConfig {
    fn default() -> Self {
        Self {
            pred: String::new(),
            gt: String::new(),
            threshold: 20.0,
        }
    }
}

impl Config for LaneAccuracyConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require_nonempty(&mut p, "pred", &self.pred);
        require_nonempty(&mut p, "gt", &self.gt);
        require(&mut p, self.threshold >= 0.0, "threshold must be nonnegative");
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct LaneAccuracyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pred: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gt: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
}

pub fn run_accuracy(cfg: &LaneAccuracyConfig) -> Result<Outcome, CliError> {
    let pred = read_lane_file(&cfg.pred).map_err(CliError::input)?;
    let gt = read_lane_file(&cfg.gt).map_err(CliError::input)?;
    let r = tusimple_accuracy(&pred, &gt, cfg.threshold).map_err(CliError::compute)?;
    Ok(Outcome::new(&r))
}
