use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    apply_style, bad, detect_lane_center_with, pure_pursuit_curve, render_frame, step_vehicle,
    CameraSpec, ControllerParams, DetectorParams, SceneSpec, StylePreset, SynthError, Track,
    TrackSpec, VehicleState, DEFAULT_SPEED,
};
use crate::image::{save_image, ImageBuffer};
use crate::trajectory::{write_trajectory_csv, OffsetSample, Trajectory, UtmZone};

/// What the controller does on a frame where detection fails.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    #[default]
    HoldLast,
    Straight,
}

/// Small seeded perturbation of the start pose so repeated seeds are not
/// identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitJitter {
    pub lateral_sigma: f64,
    pub heading_sigma: f64,
}

impl Default for InitJitter {
    fn default() -> Self {
        Self {
            lateral_sigma: 0.02,
            heading_sigma: 0.002,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSpec {
    pub scene: SceneSpec,
    pub camera: CameraSpec,
    pub style: StylePreset,
    pub controller: ControllerParams,
    pub detector: DetectorParams,
    pub init_lateral_offset: f64,
    pub duration: f64,
    pub seed: u64,
    pub speed: f64,
    pub jitter: InitJitter,
    pub failure_policy: FailurePolicy,
    /// Bypasses the controller with a constant steering angle (the loop
    /// still renders and detects every frame).
    pub fixed_steer: Option<f64>,
    /// Open tracks end the episode this far before the last metre, so the
    /// camera never looks past the end of the road.
    pub end_margin: f64,
    pub save_frames: bool,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            camera: CameraSpec::default(),
            style: StylePreset::crisp(),
            controller: ControllerParams::default(),
            detector: DetectorParams::default(),
            init_lateral_offset: 0.0,
            duration: 120.0,
            seed: 0,
            speed: DEFAULT_SPEED,
            jitter: InitJitter::default(),
            failure_policy: FailurePolicy::HoldLast,
            fixed_steer: None,
            end_margin: 25.0,
            save_frames: false,
        }
    }
}

impl EpisodeSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.scene.validate()?;
        self.camera.validate()?;
        self.style.validate()?;
        self.controller.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(bad("episode", "duration must be positive"));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(bad("episode", "speed must be nonnegative"));
        }
        if !(self.end_margin.is_finite() && self.end_margin >= 0.0) {
            return Err(bad("episode", "end_margin must be nonnegative"));
        }
        if !self.init_lateral_offset.is_finite()
            || self.init_lateral_offset.abs() > self.scene.road_width
        {
            return Err(bad("episode", "init_lateral_offset must lie within one lane width"));
        }
        for (name, v) in [
            ("jitter.lateral_sigma", self.jitter.lateral_sigma),
            ("jitter.heading_sigma", self.jitter.heading_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad("episode", format!("{name} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Duration,
    LapComplete,
    TrackEnd,
    OffRoad,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub s: f64,
    pub offset: f64,
    /// Command issued from this state; absent on the terminal record.
    pub steer: Option<f64>,
    pub detected: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimLog {
    pub label: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub frames_rendered: usize,
    pub commands_issued: usize,
    pub state_updates: usize,
    pub detection_failures: usize,
    pub termination: Termination,
    /// Styled frames as the detector saw them, when requested.
    pub frames: Vec<ImageBuffer>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    label: &'a str,
    seed: u64,
    termination: Termination,
    steps: usize,
    frames_rendered: usize,
    commands_issued: usize,
    state_updates: usize,
    detection_failures: usize,
    max_abs_offset: f64,
    zone: String,
    track: &'a TrackSpec,
    episode: &'a EpisodeSpec,
}

impl SimLog {
    pub fn offsets(&self) -> Vec<OffsetSample> {
        self.steps
            .iter()
            .map(|r| OffsetSample {
                t: r.t,
                s: r.s,
                offset: r.offset,
            })
            .collect()
    }

    pub fn max_abs_offset(&self) -> f64 {
        self.steps.iter().map(|r| r.offset.abs()).fold(0.0, f64::max)
    }

    /// Local track coordinates tagged with `zone`.
    pub fn trajectory(&self, zone: UtmZone) -> Result<Trajectory, SynthError> {
        Ok(Trajectory::from_planar(
            self.label.clone(),
            zone,
            self.steps.iter().map(|r| (r.t, r.x, r.y)),
        )?)
    }

    /// Finished the lap (or the open track) without the vehicle reference
    /// point leaving `band` of the ego-lane center.
    pub fn lane_kept(&self, band: f64) -> bool {
        matches!(self.termination, Termination::LapComplete | Termination::TrackEnd)
            && self.max_abs_offset() <= band
    }

    pub fn is_lockstep(&self) -> bool {
        self.frames_rendered == self.commands_issued && self.commands_issued == self.state_updates
    }

    /// Writes `trajectory.csv`, `manifest.json` and, if frames were kept,
    /// `frames/NNNNNN.png`.
    pub fn write(
        &self,
        dir: &Path,
        zone: UtmZone,
        track: &Track,
        spec: &EpisodeSpec,
    ) -> Result<(), SynthError> {
        let io = |e: std::io::Error| SynthError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        write_trajectory_csv(dir.join("trajectory.csv"), &self.trajectory(zone)?)?;
        let manifest = Manifest {
            label: &self.label,
            seed: self.seed,
            termination: self.termination,
            steps: self.steps.len(),
            frames_rendered: self.frames_rendered,
            commands_issued: self.commands_issued,
            state_updates: self.state_updates,
            detection_failures: self.detection_failures,
            max_abs_offset: self.max_abs_offset(),
            zone: zone.to_string(),
            track: track.spec(),
            episode: spec,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text + "\n").map_err(io)?;
        if !self.frames.is_empty() {
            let fdir = dir.join("frames");
            std::fs::create_dir_all(&fdir).map_err(io)?;
            for (i, f) in self.frames.iter().enumerate() {
                save_image(f, fdir.join(format!("{i:06}.png")))?;
            }
        }
        Ok(())
    }
}

/// Lockstep loop: every control period renders one frame, styles it,
/// detects the lane, issues one steering command and advances the world
/// once. The world never advances without a command.
pub fn run_episode(track: &Track, spec: &EpisodeSpec) -> Result<SimLog, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |sigma: f64| {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("validated sigma").sample(&mut rng)
        } else {
            0.0
        }
    };
    let d_lat = draw(spec.jitter.lateral_sigma);
    let d_head = draw(spec.jitter.heading_sigma);
    let (x, y) = track.offset_point(0.0, spec.init_lateral_offset + d_lat);
    let (_, _, h) = track.pose_at(0.0);
    let mut state = VehicleState {
        x,
        y,
        heading: h + d_head,
        speed: spec.speed,
    };

    let ctl = &spec.controller;
    let mut log = SimLog {
        label: format!("{}-seed{}", spec.style.name, spec.seed),
        seed: spec.seed,
        steps: Vec::new(),
        frames_rendered: 0,
        commands_issued: 0,
        state_updates: 0,
        detection_failures: 0,
        termination: Termination::Duration,
        frames: Vec::new(),
    };
    let mut last_steer = 0.0;
    let mut prev_s = track.project(state.x, state.y).s;
    let mut progress = 0.0;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * ctl.dt;
        let tp = track.project(state.x, state.y);
        if track.is_closed() {
            let half = track.length() / 2.0;
            progress += (tp.s - prev_s + half).rem_euclid(track.length()) - half;
            prev_s = tp.s;
        }
        let ended = if tp.lateral.abs() > spec.scene.road_width {
            Some(Termination::OffRoad)
        } else if track.is_closed() && progress >= track.length() {
            Some(Termination::LapComplete)
        } else if !track.is_closed() && tp.s >= track.length() - spec.end_margin {
            Some(Termination::TrackEnd)
        } else if t >= spec.duration - 1e-9 {
            Some(Termination::Duration)
        } else {
            None
        };
        let mut record = StepRecord {
            t,
            x: state.x,
            y: state.y,
            heading: state.heading,
            s: tp.s,
            offset: tp.lateral,
            steer: None,
            detected: None,
        };
        if let Some(reason) = ended {
            log.steps.push(record);
            log.termination = reason;
            break;
        }

        let frame = render_frame(&spec.scene, &spec.camera, &state, track)?;
        log.frames_rendered += 1;
        let styled = apply_style(&frame, &spec.style, rng.next_u64());
        let estimate = detect_lane_center_with(&styled, &spec.camera, &spec.detector);
        let steer = match (spec.fixed_steer, estimate) {
            (Some(fixed), _) => fixed,
            (None, Some(e)) => {
                pure_pursuit_curve(e.lateral_error, e.heading_error, e.curvature, &state, ctl)
            }
            (None, None) => match spec.failure_policy {
                FailurePolicy::HoldLast => last_steer,
                FailurePolicy::Straight => 0.0,
            },
        };
        if estimate.is_none() {
            log.detection_failures += 1;
        }
        log.commands_issued += 1;
        last_steer = steer;
        record.steer = Some(steer);
        record.detected = Some(estimate.is_some());
        log.steps.push(record);
        if spec.save_frames {
            log.frames.push(styled);
        }

        state = step_vehicle(&state, steer, ctl.dt, ctl.wheelbase);
        log.state_updates += 1;
        k += 1;
    }
    Ok(log)
}

/// Seed for episode `index` of a batch: independent streams per episode.
pub fn episode_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast(spec: EpisodeSpec) -> EpisodeSpec {
        EpisodeSpec {
            camera: CameraSpec { width: 404, height: 310, supersample: 1, ..Default::default() },
            ..spec
        }
    }

    #[test]
    fn straight_track_stays_centered() {
        let track = Track::new(TrackSpec::straight(120.0)).unwrap();
        let log = run_episode(&track, &fast(EpisodeSpec::default())).unwrap();
        assert_eq!(log.termination, Termination::TrackEnd);
        assert!(log.max_abs_offset() < 0.1, "{}", log.max_abs_offset());
        assert!(log.is_lockstep());
        assert_eq!(log.steps.len(), log.commands_issued + 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let track = Track::new(TrackSpec::single_arc(20.0, 150.0, 20.0, 40.0)).unwrap();
        let spec = fast(EpisodeSpec { style: StylePreset::soft(), seed: 5, ..Default::default() });
        let a = run_episode(&track, &spec).unwrap();
        let b = run_episode(&track, &spec).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&track, &EpisodeSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a.steps, c.steps);
    }

    #[test]
    fn no_steering_on_arc_leaves_the_road() {
        let track = Track::new(TrackSpec::single_arc(5.0, 40.0, 90.0, 60.0)).unwrap();
        let spec = fast(EpisodeSpec { fixed_steer: Some(0.0), ..Default::default() });
        let log = run_episode(&track, &spec).unwrap();
        assert_eq!(log.termination, Termination::OffRoad);
        assert!(log.is_lockstep());
    }

    #[test]
    fn duration_cap() {
        let track = Track::new(TrackSpec::straight(500.0)).unwrap();
        let spec = fast(EpisodeSpec { duration: 1.0, ..Default::default() });
        let log = run_episode(&track, &spec).unwrap();
        assert_eq!(log.termination, Termination::Duration);
        assert_eq!(log.commands_issued, 20);
    }

    #[test]
    fn writes_outputs() {
        let track = Track::new(TrackSpec::straight(500.0)).unwrap();
        let spec = fast(EpisodeSpec { duration: 0.2, save_frames: true, ..Default::default() });
        let log = run_episode(&track, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let zone = UtmZone::new(52, true).unwrap();
        log.write(dir.path(), zone, &track, &spec).unwrap();
        assert!(dir.path().join("frames/000003.png").exists());
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["termination"], "duration");
        assert_eq!(m["frames_rendered"], 4);
        let t = crate::trajectory::read_trajectory_csv(dir.path().join("trajectory.csv"), "x", Some(zone)).unwrap();
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn episode_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..100).map(|i| episode_seed(42, i)).collect();
        assert_eq!(s.len(), 100);
    }
}
