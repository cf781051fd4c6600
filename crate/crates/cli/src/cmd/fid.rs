use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sim2real_core::fid::{fid_between_features, fid_between_sets, fid_matrix, read_feature_file, FeatureSource};
use sim2real_core::image::{load_image_set, ImageSet};
use sim2real_core::FeatureMatrix;

use super::{require, require_nonempty};
use crate::config::Config;
use crate::report::{Outcome, Table};
use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FidConfig {
    /// Image directory or S2RF feature file.
    pub a: String,
    pub b: String,
    /// Built-in feature dimensionality (ignored for feature files).
    pub d: usize,
    pub seed: u64,
    /// Filename glob inside image directories.
    pub pattern: String,
}

impl Default for FidConfig {
    fn default() -> Self {
        Self {
            a: String::new(),
            b: String::new(),
            d: 64,
            seed: 0,
            pattern: "*.png".into(),
        }
    }
}

impl Config for FidConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require_nonempty(&mut p, "a", &self.a);
        require_nonempty(&mut p, "b", &self.b);
        require(&mut p, self.d > 0, "d must be positive");
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FidArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
}

enum Side {
    Images(ImageSet),
    Features(String, FeatureMatrix),
}

fn load_side(path: &str, pattern: &str) -> Result<Side, CliError> {
    if std::path::Path::new(path).is_file() {
        let m = read_feature_file(path).map_err(CliError::input)?;
        Ok(Side::Features(path.to_string(), m))
    } else {
        let mut set = load_image_set(path, pattern).map_err(CliError::input)?;
        set.label = path.to_string();
        Ok(Side::Images(set))
    }
}

impl Side {
    fn source(&self) -> FeatureSource<'_> {
        match self {
            Side::Images(s) => FeatureSource::Images(s),
            Side::Features(label, matrix) => FeatureSource::Features { label, matrix },
        }
    }
}

pub fn run(cfg: &FidConfig) -> Result<Outcome, CliError> {
    let a = load_side(&cfg.a, &cfg.pattern)?;
    let b = load_side(&cfg.b, &cfg.pattern)?;
    let report = match (&a, &b) {
        (Side::Features(la, ma), Side::Features(lb, mb)) => fid_between_features(la, ma, lb, mb),
        _ => fid_between_sets(a.source(), b.source(), cfg.d, cfg.seed),
    }
    .map_err(CliError::compute)?;
    Ok(Outcome::new(json!({
        "a": report.labels.0,
        "b": report.labels.1,
        "value": report.value,
        "d": report.d,
        "n_a": report.n_a,
        "n_b": report.n_b,
        "regularized": report.regularized,
    })))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FidMatrixConfig {
    /// Image directories; every pair is compared.
    pub sets: Vec<String>,
    pub d: usize,
    pub seed: u64,
    pub pattern: String,
}

impl Default for FidMatrixConfig {
    fn default() -> Self {
        Self {
            sets: Vec::new(),
            d: 64,
            seed: 0,
            pattern: "*.png".into(),
        }
    }
}

impl Config for FidMatrixConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require(&mut p, self.sets.len() >= 2, "sets needs at least two directories");
        require(&mut p, self.d > 0, "d must be positive");
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FidMatrixArgs {
    /// Image directory (repeat for each set).
    #[arg(long = "dir")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sets: Vec<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern: Option<String>,
}

pub fn run_matrix(cfg: &FidMatrixConfig) -> Result<Outcome, CliError> {
    let sets = cfg
        .sets
        .iter()
        .map(|dir| {
            let mut s = load_image_set(dir, &cfg.pattern).map_err(CliError::input)?;
            s.label = dir.clone();
            Ok(s)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let m = fid_matrix(&sets, cfg.d, cfg.seed).map_err(CliError::compute)?;
    let mut table = Table::new(std::iter::once("set".to_string()).chain(m.labels.iter().cloned()));
    for (label, row) in m.labels.iter().zip(&m.values) {
        table.push(std::iter::once(json!(label)).chain(row.iter().map(|v| json!(v))).collect());
    }
    Ok(Outcome::new(&m).with_table(table))
}
