use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sim2real_core::trajectory::{
    lateral_offsets, read_centerline_csv, read_trajectory_csv, restoring_verdict,
    success_rate, Centerline, RestoreSpec, SectionSpec, Trajectory, UtmZone,
};

use super::{group_table, sections_rmse, parse_zone, require, require_nonempty, RunMetrics, LANE_BAND};
use crate::config::Config;
use crate::report::{Outcome, Table};
use crate::CliError;

/// Trajectories that form one row of the summary (e.g. all laps of one model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub label: String,
    pub trajectories: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajRmseConfig {
    /// Ideal path: `x,y` (planar, needs `zone`) or `lat,lon` columns.
    pub centerline: String,
    /// UTM zone such as "52N"; required for planar files, else derived.
    pub zone: String,
    /// Trajectory files for a single group labelled "run".
    pub trajectories: Vec<String>,
    pub groups: Vec<GroupConfig>,
    /// Arclength windows along the centerline; empty means the whole path.
    pub sections: Vec<SectionSpec>,
    /// A run counts as a success when it never strays further than this
    /// from the centerline, metres.
    pub lane_band: f64,
}

impl Default for TrajRmseConfig {
    fn default() -> Self {
        Self {
            centerline: String::new(),
            zone: String::new(),
            trajectories: Vec::new(),
            groups: Vec::new(),
            sections: Vec::new(),
            lane_band: LANE_BAND,
        }
    }
}

fn common_problems(p: &mut Vec<String>, centerline: &str, zone: &str) {
    require_nonempty(p, "centerline", centerline);
    if let Err(e) = parse_zone(zone) {
        p.push(e);
    }
}

impl Config for TrajRmseConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        common_problems(&mut p, &self.centerline, &self.zone);
        require(
            &mut p,
            !self.trajectories.is_empty() || !self.groups.is_empty(),
            "give trajectories or groups",
        );
        for g in &self.groups {
            require(&mut p, !g.trajectories.is_empty(), &format!("group {} has no trajectories", g.label));
        }
        for s in &self.sections {
            require(
                &mut p,
                s.start_s.is_finite() && s.end_s.is_finite() && s.start_s < s.end_s,
                &format!("section {}: start_s must be below end_s", s.name),
            );
        }
        require(&mut p, self.lane_band > 0.0, "lane_band must be positive");
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrajRmseArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    centerline: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    zone: Option<String>,
    /// Trajectory CSV (repeatable).
    #[arg(long = "trajectory")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trajectories: Vec<String>,
}

fn load_centerline(path: &str, zone: &str) -> Result<(Centerline, Option<UtmZone>), CliError> {
    let zone = parse_zone(zone).map_err(CliError::invalid)?;
    let c = read_centerline_csv(path, zone).map_err(CliError::input)?;
    let zone = Some(zone.unwrap_or(c.zone()));
    Ok((c, zone))
}

fn load_trajectory(path: &str, zone: Option<UtmZone>) -> Result<Trajectory, CliError> {
    read_trajectory_csv(path, path, zone).map_err(CliError::input)
}

fn offsets_max(traj: &Trajectory, c: &Centerline) -> Result<f64, CliError> {
    Ok(lateral_offsets(traj, c)
        .map_err(CliError::compute)?
        .iter()
        .fold(0.0, |m, o| m.max(o.offset.abs())))
}

pub fn run_rmse(cfg: &TrajRmseConfig) -> Result<Outcome, CliError> {
    let (centerline, zone) = load_centerline(&cfg.centerline, &cfg.zone)?;
    let sections = if cfg.sections.is_empty() {
        vec![SectionSpec { name: "all".into(), start_s: 0.0, end_s: centerline.length() }]
    } else {
        cfg.sections.clone()
    };
    for s in &sections {
        s.validate(&centerline).map_err(CliError::input)?;
    }
    let mut groups = cfg.groups.clone();
    if !cfg.trajectories.is_empty() {
        groups.insert(0, GroupConfig { label: "run".into(), trajectories: cfg.trajectories.clone() });
    }
    let mut summary = Vec::new();
    let mut runs = Vec::new();
    for g in &groups {
        let mut metrics = Vec::new();
        for path in &g.trajectories {
            let traj = load_trajectory(path, zone)?;
            let rmse = sections_rmse(&traj, &centerline, &sections)?;
            let max_offset = offsets_max(&traj, &centerline)?;
            let kept = max_offset <= cfg.lane_band;
            runs.push(json!({
                "group": g.label,
                "trajectory": path,
                "sections": rmse,
                "max_abs_offset": max_offset,
                "lane_kept": kept,
            }));
            metrics.push(RunMetrics { sections: rmse, kept });
        }
        summary.push((g.label.clone(), metrics));
    }
    let names: Vec<String> = sections.iter().map(|s| s.name.clone()).collect();
    let (table, rows) = group_table(&names, &summary)?;
    Ok(Outcome::new(json!({
        "zone": zone.map(|z| z.to_string()),
        "sections": sections,
        "groups": rows,
        "runs": runs,
    }))
    .with_table(table))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RestoreEvalConfig {
    pub centerline: String,
    pub zone: String,
    pub trajectories: Vec<String>,
    pub restore: RestoreSpec,
}

impl Default for RestoreEvalConfig {
    fn default() -> Self {
        Self {
            centerline: String::new(),
            zone: String::new(),
            trajectories: Vec::new(),
            restore: RestoreSpec::default(),
        }
    }
}

impl Config for RestoreEvalConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        common_problems(&mut p, &self.centerline, &self.zone);
        require(&mut p, !self.trajectories.is_empty(), "trajectories must not be empty");
        if let Err(e) = self.restore.validate() {
            p.push(e.to_string());
        }
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct RestoreEvalArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    centerline: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    zone: Option<String>,
    #[arg(long = "trajectory")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    trajectories: Vec<String>,
}

pub fn run_restore(cfg: &RestoreEvalConfig) -> Result<Outcome, CliError> {
    let (centerline, zone) = load_centerline(&cfg.centerline, &cfg.zone)?;
    let mut table = Table::new([
        "trajectory",
        "initial_offset",
        "initial_offset_right_positive",
        "success",
        "return_time",
        "failure",
    ]);
    let mut runs = Vec::new();
    let mut outcomes = Vec::new();
    for path in &cfg.trajectories {
        let traj = load_trajectory(path, zone)?;
        let offs = lateral_offsets(&traj, &centerline).map_err(CliError::compute)?;
        let v = restoring_verdict(&offs, &cfg.restore).map_err(CliError::compute)?;
        let initial = offs.first().map_or(0.0, |o| o.offset);
        let failure = v.failure.map(|f| f.to_string());
        table.push(vec![
            json!(path),
            json!(initial),
            json!(-initial),
            json!(v.success),
            json!(v.return_time),
            json!(failure),
        ]);
        runs.push(json!({
            "trajectory": path,
            "initial_offset": initial,
            "initial_offset_right_positive": -initial,
            "success": v.success,
            "return_time": v.return_time,
            "failure": failure,
        }));
        outcomes.push(v.success);
    }
    let rate = success_rate(&outcomes).map_err(CliError::compute)?;
    Ok(Outcome::new(json!({
        "zone": zone.map(|z| z.to_string()),
        "runs": runs,
        "success_rate": rate,
    }))
    .with_table(table))
}
