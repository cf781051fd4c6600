use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sim2real_core::image::save_image;
use sim2real_core::synth::{
    apply_style, episode_seed, render_frame, render_segmentation, run_episode, sample_poses,
    CameraSpec, EpisodeSpec, PoseSampler, SceneSpec, SimLog, Track, TrackSpec,
};
use sim2real_core::trajectory::{lateral_offsets, restoring_verdict, RestoreSpec, SectionSpec};

use super::{group_table, sections_rmse, parse_zone, require, require_nonempty, RunMetrics, StyleChoice, LANE_BAND};
use crate::config::Config;
use crate::report::Outcome;
use crate::CliError;

/// Straight lead-in, one 150 m-radius left arc of 40°, straight run-out.
pub fn default_track() -> TrackSpec {
    TrackSpec::single_arc(60.0, 150.0, 40.0, 60.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Each dataset goes to `<out_dir>/setNN/NNNNNN.png`.
    pub out_dir: String,
    pub frames: usize,
    /// Seeds the pose draw (shared by every set) and the style noise.
    pub seed: u64,
    pub track: TrackSpec,
    /// Base scene; variants and grid entries override its fields.
    pub scene: SceneSpec,
    pub camera: CameraSpec,
    pub sampler: PoseSampler,
    pub style: StyleChoice,
    /// Explicit scene overrides, one dataset each (e.g. `{line_length = 5, line_spacing = 5}`).
    pub variants: Vec<toml::Table>,
    /// Scene field → values; every combination becomes a dataset.
    pub grid: BTreeMap<String, Vec<toml::Value>>,
    /// Also write analytic lane masks to `setNN/seg/`.
    pub segmentation: bool,
    pub lane_color: [u8; 3],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            out_dir: String::new(),
            frames: 200,
            seed: 0,
            track: default_track(),
            scene: SceneSpec::default(),
            camera: CameraSpec::default(),
            sampler: PoseSampler::default(),
            style: StyleChoice::Name("crisp".into()),
            variants: Vec::new(),
            grid: BTreeMap::new(),
            segmentation: false,
            lane_color: [255, 255, 255],
        }
    }
}

impl SynthConfig {
    /// Overrides for every dataset, variants first, then the grid product
    /// (keys in sorted order, last key varying fastest).
    fn expand(&self) -> Vec<toml::Table> {
        let mut out = self.variants.clone();
        if !self.grid.is_empty() {
            let mut combos = vec![toml::Table::new()];
            for (k, values) in &self.grid {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        values.iter().map(move |v| {
                            let mut c = c.clone();
                            c.insert(k.clone(), v.clone());
                            c
                        })
                    })
                    .collect();
            }
            out.extend(combos);
        }
        if out.is_empty() {
            out.push(toml::Table::new());
        }
        out
    }

    fn scene_for(&self, overrides: &toml::Table) -> Result<SceneSpec, String> {
        let mut base = match toml::Value::try_from(&self.scene).expect("scene serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        };
        for (k, v) in overrides {
            base.insert(k.clone(), v.clone());
        }
        let scene: SceneSpec = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| format!("scene override {overrides}: {}", e.to_string().trim()))?;
        scene.validate().map_err(|e| format!("scene override {overrides}: {e}"))?;
        Ok(scene)
    }
}

fn set_name(overrides: &toml::Table) -> String {
    if overrides.is_empty() {
        return "base".into();
    }
    overrides.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

impl Config for SynthConfig {
    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        require_nonempty(&mut p, "out_dir", &self.out_dir);
        require(&mut p, self.frames > 0, "frames must be positive");
        if let Err(e) = Track::new(self.track.clone()) {
            p.push(format!("track: {e}"));
        }
        for (name, r) in [("scene", self.scene.validate()), ("camera", self.camera.validate())] {
            if let Err(e) = r {
                p.push(format!("{name}: {e}"));
            }
        }
        if let Err(e) = self.style.resolve() {
            p.push(e);
        }
        for (k, v) in &self.grid {
            require(&mut p, !v.is_empty(), &format!("grid.{k} has no values"));
        }
        for o in self.expand() {
            if let Err(e) = self.scene_for(&o) {
                p.push(e);
            }
        }
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    frames: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::invalid(format!("{}: {e}", path.display()))
}

pub fn run_synth(cfg: &SynthConfig) -> Result<Outcome, CliError> {
    let track = Track::new(cfg.track.clone()).map_err(CliError::input)?;
    let style = cfg.style.resolve().map_err(CliError::invalid)?;
    let poses = sample_poses(&track, cfg.frames, cfg.seed, &cfg.sampler).map_err(CliError::input)?;
    let mut sets = Vec::new();
    for (i, overrides) in cfg.expand().iter().enumerate() {
        let scene = cfg.scene_for(overrides).map_err(CliError::invalid)?;
        let dir = PathBuf::from(&cfg.out_dir).join(format!("set{i:02}"));
        let seg_dir = dir.join("seg");
        std::fs::create_dir_all(if cfg.segmentation { &seg_dir } else { &dir }).map_err(|e| io_err(&dir, e))?;
        poses.par_iter().enumerate().try_for_each(|(k, pose)| -> Result<(), CliError> {
            let frame = render_frame(&scene, &cfg.camera, pose, &track).map_err(CliError::compute)?;
            let frame = apply_style(&frame, &style, episode_seed(cfg.seed, k as u64));
            let path = dir.join(format!("{k:06}.png"));
            save_image(&frame, &path).map_err(|e| io_err(&path, e))?;
            if cfg.segmentation {
                let seg = render_segmentation(&scene, &cfg.camera, pose, &track, cfg.lane_color)
                    .map_err(CliError::compute)?;
                let path = seg_dir.join(format!("{k:06}.png"));
                save_image(&seg.image, &path).map_err(|e| io_err(&path, e))?;
            }
            Ok(())
        })?;
        sets.push(json!({
            "name": set_name(overrides),
            "dir": dir.display().to_string(),
            "frames": poses.len(),
            "scene": scene,
        }));
    }
    Ok(Outcome::new(json!({"sets": sets, "style": style.name})))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    /// Per-episode logs (trajectory.csv, manifest.json) go under here; empty skips them.
    pub out_dir: String,
    pub track: TrackSpec,
    /// Settings shared by every episode; `style`, `seed` and
    /// `init_lateral_offset` are replaced per episode.
    pub episode: EpisodeSpec,
    pub styles: Vec<StyleChoice>,
    /// Signed initial displacement, metres, left positive.
    pub init_offsets: Vec<f64>,
    /// Episodes per (style, offset); episode `i` uses the same seed under every style.
    pub seeds: usize,
    pub base_seed: u64,
    /// Nominal UTM zone the planar simulator coordinates are tagged with.
    pub zone: String,
    pub lane_band: f64,
    pub restore: RestoreSpec,
    /// Spacing of the reference centerline polyline, metres.
    pub centerline_step: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            out_dir: String::new(),
            track: default_track(),
            episode: EpisodeSpec::default(),
            styles: vec![StyleChoice::Name("crisp".into()), StyleChoice::Name("soft".into())],
            init_offsets: vec![0.0],
            seeds: 10,
            base_seed: 0,
            zone: "52N".into(),
            lane_band: LANE_BAND,
            restore: RestoreSpec::default(),
            centerline_step: 0.5,
        }
    }
}

impl Config for SimulateConfig {
    const OPTIONAL: &'static [&'static str] = &["episode.fixed_steer"];

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if let Err(e) = Track::new(self.track.clone()) {
            p.push(format!("track: {e}"));
        }
        if let Err(e) = self.episode.validate() {
            p.push(format!("episode: {e}"));
        }
        require(&mut p, !self.styles.is_empty(), "styles must not be empty");
        for s in &self.styles {
            if let Err(e) = s.resolve() {
                p.push(e);
            }
        }
        require(&mut p, !self.init_offsets.is_empty(), "init_offsets must not be empty");
        for &o in &self.init_offsets {
            require(
                &mut p,
                o.is_finite() && o.abs() <= self.episode.scene.road_width,
                &format!("init offset {o} outside one lane width"),
            );
        }
        require(&mut p, self.seeds > 0, "seeds must be positive");
        match parse_zone(&self.zone) {
            Ok(Some(_)) => {}
            Ok(None) => p.push("zone is required".into()),
            Err(e) => p.push(e),
        }
        require(&mut p, self.lane_band > 0.0, "lane_band must be positive");
        require(&mut p, self.centerline_step > 0.0, "centerline_step must be positive");
        if let Err(e) = self.restore.validate() {
            p.push(e.to_string());
        }
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    base_seed: Option<u64>,
    /// Preset name (repeatable).
    #[arg(long = "style")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    styles: Vec<String>,
    /// Initial displacement in metres, left positive (repeatable).
    #[arg(long = "init-offset", allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    init_offsets: Vec<f64>,
}

fn group_label(style: &str, offset: f64) -> String {
    if offset == 0.0 {
        style.to_string()
    } else {
        format!("{style}@{offset:+}")
    }
}

struct Episode {
    group: usize,
    index: u64,
    spec: EpisodeSpec,
}

pub fn run_simulate(cfg: &SimulateConfig) -> Result<Outcome, CliError> {
    let track = Track::new(cfg.track.clone()).map_err(CliError::input)?;
    let zone = parse_zone(&cfg.zone).map_err(CliError::invalid)?.expect("validated");
    let centerline = track.centerline(zone, cfg.centerline_step).map_err(CliError::compute)?;
    // chord sampling makes the polyline a hair shorter than the track
    let end = centerline.length();
    let mut sections = vec![SectionSpec { name: "all".into(), start_s: 0.0, end_s: end }];
    sections.extend(track.arc_sections().into_iter().map(|s| SectionSpec { end_s: s.end_s.min(end), ..s }));
    let mut labels = Vec::new();
    let mut episodes = Vec::new();
    for style in &cfg.styles {
        let style = style.resolve().map_err(CliError::invalid)?;
        for &offset in &cfg.init_offsets {
            labels.push((group_label(&style.name, offset), offset != 0.0));
            for i in 0..cfg.seeds as u64 {
                let spec = EpisodeSpec {
                    style: style.clone(),
                    init_lateral_offset: offset,
                    seed: episode_seed(cfg.base_seed, i),
                    ..cfg.episode.clone()
                };
                episodes.push(Episode { group: labels.len() - 1, index: i, spec });
            }
        }
    }
    let logs: Vec<SimLog> = episodes
        .par_iter()
        .map(|e| run_episode(&track, &e.spec).map_err(CliError::compute))
        .collect::<Result<_, _>>()?;

    let mut groups: Vec<(String, Vec<RunMetrics>)> =
        labels.iter().map(|(l, _)| (l.clone(), Vec::new())).collect();
    let mut restores: Vec<Vec<bool>> = vec![Vec::new(); labels.len()];
    let mut runs = Vec::new();
    for (e, log) in episodes.iter().zip(&logs) {
        let (label, displaced) = &labels[e.group];
        let traj = log.trajectory(zone).map_err(CliError::compute)?;
        let rmse = sections_rmse(&traj, &centerline, &sections)?;
        let restore = if *displaced {
            let offs = lateral_offsets(&traj, &centerline).map_err(CliError::compute)?;
            let v = restoring_verdict(&offs, &cfg.restore).map_err(CliError::compute)?;
            restores[e.group].push(v.success);
            json!({"success": v.success, "return_time": v.return_time, "failure": v.failure.map(|f| f.to_string())})
        } else {
            Value::Null
        };
        let kept = log.lane_kept(cfg.lane_band);
        if !cfg.out_dir.is_empty() {
            let dir = PathBuf::from(&cfg.out_dir).join(label).join(format!("{:03}", e.index));
            log.write(&dir, zone, &track, &e.spec).map_err(|err| io_err(&dir, err))?;
        }
        runs.push(json!({
            "group": label,
            "label": log.label,
            "seed": log.seed,
            "termination": log.termination,
            "steps": log.steps.len(),
            "detection_failures": log.detection_failures,
            "lockstep": log.is_lockstep(),
            "max_abs_offset": log.max_abs_offset(),
            "lane_kept": kept,
            "sections": rmse,
            "restore": restore,
        }));
        groups[e.group].1.push(RunMetrics { sections: rmse, kept });
    }
    let names: Vec<String> = sections.iter().map(|s| s.name.clone()).collect();
    let (mut table, mut rows) = group_table(&names, &groups)?;
    table.columns.push("restore_success_rate".into());
    for ((row, json_row), r) in table.rows.iter_mut().zip(rows.iter_mut()).zip(&restores) {
        let rate = if r.is_empty() {
            Value::Null
        } else {
            json!(sim2real_core::trajectory::success_rate(r).map_err(CliError::compute)?)
        };
        row.push(rate.clone());
        json_row["restore_success_rate"] = rate;
    }
    Ok(Outcome::new(json!({
        "zone": zone.to_string(),
        "track_length": track.length(),
        "sections": sections,
        "groups": rows,
        "episodes": runs,
    }))
    .with_table(table))
}
