pub mod fid;
pub mod fsim;
pub mod lanes;
pub mod merge;
pub mod synth;
pub mod traj;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sim2real_core::trajectory::{
    section_rmse, success_rate, Centerline, SectionRmse, SectionSpec, Trajectory, TrajectoryError, UtmZone,
};
use sim2real_core::StylePreset;

use crate::report::Table;
use crate::CliError;

/// Default success band: a 1.8 m wide vehicle whose reference point stays
/// within 0.85 m of the center keeps its wheels inside a 3.5 m lane.
pub const LANE_BAND: f64 = 0.85;

pub(crate) fn require(p: &mut Vec<String>, ok: bool, msg: &str) {
    if !ok {
        p.push(msg.to_string());
    }
}

pub(crate) fn require_nonempty(p: &mut Vec<String>, key: &str, v: &str) {
    require(p, !v.trim().is_empty(), &format!("{key} is required"));
}

/// Empty text means "not given".
pub(crate) fn parse_zone(text: &str) -> Result<Option<UtmZone>, String> {
    if text.trim().is_empty() {
        return Ok(None);
    }
    text.trim().parse().map(Some).map_err(|e| format!("zone: {e}"))
}

/// A built-in preset by name, or a full preset table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StyleChoice {
    Name(String),
    Preset(StylePreset),
}

impl StyleChoice {
    pub fn resolve(&self) -> Result<StylePreset, String> {
        let p = match self {
            StyleChoice::Name(n) => {
                StylePreset::builtin(n).ok_or_else(|| format!("unknown style preset `{n}`"))?
            }
            StyleChoice::Preset(p) => p.clone(),
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

pub(crate) struct RunMetrics {
    /// `None` where the run has no samples in that section (it ended first).
    pub sections: Vec<Option<SectionRmse>>,
    pub kept: bool,
}

/// RMSE per section, with sections the trajectory never reached left empty.
pub(crate) fn sections_rmse(
    traj: &Trajectory,
    c: &Centerline,
    sections: &[SectionSpec],
) -> Result<Vec<Option<SectionRmse>>, CliError> {
    sections
        .iter()
        .map(|s| match section_rmse(traj, c, s) {
            Ok(r) => Ok(Some(r)),
            Err(TrajectoryError::EmptySection(_)) => Ok(None),
            Err(e) => Err(CliError::compute(e)),
        })
        .collect()
}

/// One row per group: mean per-section RMSE over the runs that reached the
/// section (x and y) and the success rate of runs that stayed in lane.
pub(crate) fn group_table(
    sections: &[String],
    groups: &[(String, Vec<RunMetrics>)],
) -> Result<(Table, Vec<Value>), CliError> {
    let mut cols = vec!["label".to_string(), "runs".to_string()];
    for s in sections {
        cols.push(format!("{s}_x"));
        cols.push(format!("{s}_y"));
    }
    cols.push("success_rate".into());
    let mut table = Table::new(cols);
    let mut rows = Vec::new();
    for (label, runs) in groups {
        let mut row = vec![json!(label), json!(runs.len())];
        let mut per = serde_json::Map::new();
        for (i, s) in sections.iter().enumerate() {
            let reached: Vec<&SectionRmse> = runs.iter().filter_map(|r| r.sections[i].as_ref()).collect();
            let (x, y) = if reached.is_empty() {
                (Value::Null, Value::Null)
            } else {
                let n = reached.len() as f64;
                (
                    json!(reached.iter().map(|r| r.rmse_x).sum::<f64>() / n),
                    json!(reached.iter().map(|r| r.rmse_y).sum::<f64>() / n),
                )
            };
            row.push(x.clone());
            row.push(y.clone());
            per.insert(s.clone(), json!({"x": x, "y": y}));
        }
        let kept: Vec<bool> = runs.iter().map(|r| r.kept).collect();
        let rate = success_rate(&kept).map_err(CliError::compute)?;
        row.push(json!(rate));
        table.push(row);
        rows.push(json!({"label": label, "runs": runs.len(), "sections": per, "success_rate": rate}));
    }
    Ok((table, rows))
}
