use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sim2real_core::fsim::{default_roi, mean_fsim, select_lambda, FsimParams, LambdaCandidate, MeanFsim};
use sim2real_core::image::{load_image_set, ImageSet, RegionOfInterest};

use super::{require, require_nonempty};
use crate::config::Config;
use crate::report::{Outcome, Table};
use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FsimConfig {
    /// Reference directory (e.g. real images).
    pub a: String,
    /// Compared directory; pairs are formed by sorted filename.
    pub b: String,
    pub pattern: String,
    /// `[x0, y0, width, height]`; empty selects the default bottom band.
    pub roi: Vec<u32>,
    pub params: FsimParams,
}

impl Default for FsimConfig {
    fn default() -> Self {
        Self {
            a: String::new(),
            b: String::new(),
            pattern: "*.png".into(),
            roi: Vec::new(),
            params: FsimParams::default(),
        }
    }
}

fn roi_problems(p: &mut Vec<String>, roi: &[u32], params: &FsimParams) {
    require(p, roi.is_empty() || roi.len() == 4, "roi must be empty or [x0, y0, width, height]");
    if let Err(e) = params.validate() {
        p.push(e.to_string());
    }
}

impl Config for FsimConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require_nonempty(&mut p, "a", &self.a);
        require_nonempty(&mut p, "b", &self.b);
        roi_problems(&mut p, &self.roi, &self.params);
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FsimArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    /// x0,y0,width,height
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    roi: Option<Vec<u32>>,
}

fn resolve_roi(roi: &[u32], set: &ImageSet) -> Result<RegionOfInterest, CliError> {
    let first = set.images().first().ok_or_else(|| CliError::invalid("empty image set"))?;
    Ok(match roi {
        [x0, y0, w, h] => RegionOfInterest::new(*x0, *y0, *w, *h),
        _ => default_roi(first.width(), first.height()),
    })
}

fn compare(a: &ImageSet, b: &ImageSet, roi: &[u32], params: &FsimParams) -> Result<MeanFsim, CliError> {
    if a.len() != b.len() {
        return Err(CliError::invalid(format!(
            "{} has {} images but {} has {}",
            a.label,
            a.len(),
            b.label,
            b.len()
        )));
    }
    let roi = resolve_roi(roi, a)?;
    mean_fsim(a, b, roi, params).map_err(CliError::compute)
}

fn load(dir: &str, pattern: &str) -> Result<ImageSet, CliError> {
    let mut s = load_image_set(dir, pattern).map_err(CliError::input)?;
    s.label = dir.to_string();
    Ok(s)
}

fn file_name(p: &Path) -> String {
    p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string()
}

pub fn run(cfg: &FsimConfig) -> Result<Outcome, CliError> {
    let a = load(&cfg.a, &cfg.pattern)?;
    let b = load(&cfg.b, &cfg.pattern)?;
    let m = compare(&a, &b, &cfg.roi, &cfg.params)?;
    let mut table = Table::new(["a", "b", "fsim"]);
    let pairs: Vec<_> = a
        .paths()
        .iter()
        .zip(b.paths())
        .zip(&m.scores)
        .map(|((pa, pb), &s)| {
            table.push(vec![json!(file_name(pa)), json!(file_name(pb)), json!(s)]);
            json!({"a": file_name(pa), "b": file_name(pb), "fsim": s})
        })
        .collect();
    Ok(Outcome::new(json!({
        "mean": m.mean,
        "pairs": pairs,
        "roi": m.roi,
    }))
    .with_table(table))
}

/// Candidate id as written in the config; numbers and text both work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaId {
    Int(i64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for LambdaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaId::Int(v) => write!(f, "{v}"),
            LambdaId::Float(v) => write!(f, "{v}"),
            LambdaId::Text(v) => f.write_str(v),
        }
    }
}

/// One setting under comparison. Exactly one of `mean_fsim` (a known
/// score), `dir` (images scored against `reference`) or `report` (an earlier
/// `fsim` report) supplies its score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub lambda: LambdaId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_fsim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

impl CandidateConfig {
    /// `LAMBDA=SOURCE`: a number is a score, a `.json` path a report, any
    /// other path an image directory.
    fn parse(text: &str) -> Result<Self, String> {
        let (id, src) = text
            .split_once('=')
            .ok_or_else(|| format!("candidate `{text}` is not LAMBDA=SOURCE"))?;
        let lambda = id
            .trim()
            .parse::<i64>()
            .map(LambdaId::Int)
            .unwrap_or_else(|_| LambdaId::Text(id.trim().to_string()));
        let src = src.trim();
        let mut c = Self { lambda, mean_fsim: None, dir: None, report: None };
        if let Ok(v) = src.parse::<f64>() {
            c.mean_fsim = Some(v);
        } else if src.ends_with(".json") {
            c.report = Some(src.to_string());
        } else {
            c.dir = Some(src.to_string());
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectLambdaConfig {
    /// Reference directory for candidates given as `dir`.
    pub reference: String,
    pub pattern: String,
    pub roi: Vec<u32>,
    pub params: FsimParams,
    pub candidates: Vec<CandidateConfig>,
}

impl Default for SelectLambdaConfig {
    fn default() -> Self {
        Self {
            reference: String::new(),
            pattern: "*.png".into(),
            roi: Vec::new(),
            params: FsimParams::default(),
            candidates: Vec::new(),
        }
    }
}

impl Config for SelectLambdaConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require(&mut p, !self.candidates.is_empty(), "candidates must not be empty");
        roi_problems(&mut p, &self.roi, &self.params);
        for c in &self.candidates {
            let sources = [c.mean_fsim.is_some(), c.dir.is_some(), c.report.is_some()];
            if sources.iter().filter(|&&s| s).count() != 1 {
                p.push(format!("candidate {}: give exactly one of mean_fsim, dir, report", c.lambda));
            }
            if c.dir.is_some() && self.reference.is_empty() {
                p.push(format!("candidate {}: dir needs a reference directory", c.lambda));
            }
        }
        let mut ids: Vec<String> = self.candidates.iter().map(|c| c.lambda.to_string()).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            p.push(format!("candidate {} listed twice", w[0]));
        }
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SelectLambdaArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
    /// LAMBDA=SCORE, LAMBDA=DIR or LAMBDA=REPORT.json (repeatable).
    #[arg(long = "candidate", value_parser = CandidateConfig::parse)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    candidates: Vec<CandidateConfig>,
}

fn score_from_report(path: &str) -> Result<f64, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{path}: {e}")))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{path}: {e}")))?;
    doc.pointer("/result/mean")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| CliError::invalid(format!("{path}: not an fsim report (no result.mean)")))
}

pub fn run_select(cfg: &SelectLambdaConfig) -> Result<Outcome, CliError> {
    let reference = if cfg.candidates.iter().any(|c| c.dir.is_some()) {
        Some(load(&cfg.reference, &cfg.pattern)?)
    } else {
        None
    };
    let mut scored = Vec::new();
    for c in &cfg.candidates {
        let score = match (&c.mean_fsim, &c.dir, &c.report) {
            (Some(v), _, _) => *v,
            (_, Some(dir), _) => {
                let set = load(dir, &cfg.pattern)?;
                compare(reference.as_ref().expect("loaded above"), &set, &cfg.roi, &cfg.params)?.mean
            }
            (_, _, Some(path)) => score_from_report(path)?,
            _ => unreachable!("validated"),
        };
        scored.push(LambdaCandidate::new(c.lambda.to_string(), score));
    }
    let best = select_lambda(&scored).map_err(CliError::compute)?;
    let mut table = Table::new(["lambda", "mean_fsim", "selected"]);
    for c in &scored {
        table.push(vec![json!(c.lambda_id), json!(c.mean_fsim), json!(c.lambda_id == best.lambda_id)]);
    }
    Ok(Outcome::new(json!({
        "lambda": best.lambda_id,
        "mean_fsim": best.mean_fsim,
        "candidates": scored,
    }))
    .with_table(table))
}
