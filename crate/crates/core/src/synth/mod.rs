//! Synthetic lane scenes and a lockstep closed-loop lane-keeping simulator.
//!
//! The world is a flat ground plane in local metres. A [`Track`] defines the
//! ego-lane centerline; lane markings sit at fixed lateral offsets from it.
//! Frames are rendered through a pinhole camera, passed through a
//! degradation [`StylePreset`], and fed to a simple IPM lane detector whose
//! output drives pure pursuit on a kinematic bicycle.

mod camera;
mod control;
mod dataset;
mod detect;
mod episode;
mod render;
mod style;
mod track;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageError;
use crate::lane_eval::LaneEvalError;
use crate::trajectory::TrajectoryError;

pub use camera::Camera;
pub use control::{pure_pursuit, pure_pursuit_curve, pursuit_steer, step_vehicle};
pub use dataset::{render_set, sample_poses, PoseSampler};
pub use detect::{detect_lane_center, detect_lane_center_with, DetectorParams, LaneEstimate};
pub use episode::{
    episode_seed, run_episode, EpisodeSpec, FailurePolicy, InitJitter, SimLog, StepRecord,
    Termination,
};
pub use render::{render_frame, render_segmentation, Surface};
pub use style::apply_style;
pub use track::{Segment, Track, TrackPoint, TrackSpec, CLOSURE_TOLERANCE};

/// 30 km/h, the data-collection speed.
pub const DEFAULT_SPEED: f64 = 30.0 / 3.6;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid {what}: {msg}")]
    BadSpec { what: &'static str, msg: String },
    #[error("closed track ends {gap:.3} m from its start (tolerance {CLOSURE_TOLERANCE} m)")]
    TrackNotClosed { gap: f64 },
    #[error("vehicle {offset:.2} m from the centerline exceeds the render guard of {limit:.2} m")]
    OffRoad { offset: f64, limit: f64 },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    LaneEval(#[from] LaneEvalError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub(crate) fn bad(what: &'static str, msg: impl Into<String>) -> SynthError {
    SynthError::BadSpec {
        what,
        msg: msg.into(),
    }
}

fn positive(what: &'static str, name: &str, v: f64) -> Result<(), SynthError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(what, format!("{name} must be positive, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub road_width: f64,
    pub line_length: f64,
    pub line_spacing: f64,
    pub line_width: f64,
    pub lane_count: u32,
    /// 1 = full-contrast markings, 0 = markings indistinguishable from asphalt.
    pub texture_sharpness: f64,
    pub connected_lines: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            road_width: 3.5,
            line_length: 4.5,
            line_spacing: 4.0,
            line_width: 0.125,
            lane_count: 3,
            texture_sharpness: 1.0,
            connected_lines: false,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("road_width", self.road_width),
            ("line_length", self.line_length),
            ("line_spacing", self.line_spacing),
            ("line_width", self.line_width),
        ] {
            positive("scene", name, v)?;
        }
        if self.line_width >= self.road_width {
            return Err(bad("scene", "line_width must be narrower than road_width"));
        }
        if !(1..=8).contains(&self.lane_count) {
            return Err(bad("scene", format!("lane_count {} outside 1..=8", self.lane_count)));
        }
        if !(0.0..=1.0).contains(&self.texture_sharpness) {
            return Err(bad(
                "scene",
                format!("texture_sharpness {} outside [0, 1]", self.texture_sharpness),
            ));
        }
        Ok(())
    }

    /// Lateral offsets (left-positive) of every marking, left to right. The
    /// ego lane is the middle one (left of middle for an even count).
    pub fn line_offsets(&self) -> Vec<f64> {
        let n = self.lane_count as i64;
        let ego = (n - 1) / 2;
        (0..=n)
            .map(|k| (ego as f64 + 0.5 - k as f64) * self.road_width)
            .collect()
    }

    /// Lateral extent `(right, left)` of the painted road.
    pub fn road_extent(&self) -> (f64, f64) {
        let offs = self.line_offsets();
        (offs[offs.len() - 1], offs[0])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub h_fov: f64,
    pub width: u32,
    pub height: u32,
    pub mount_height: f64,
    /// Degrees; negative looks down.
    pub pitch: f64,
    pub gamma: f64,
    /// Ground beyond this forward distance is drawn as distant terrain.
    pub max_range: f64,
    /// Samples per pixel along each axis when rendering camera frames.
    pub supersample: u32,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            h_fov: 76.0,
            width: 808,
            height: 620,
            mount_height: 1.4,
            pitch: -4.0,
            gamma: 0.8,
            max_range: 120.0,
            supersample: 2,
        }
    }
}

impl CameraSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.h_fov > 0.0 && self.h_fov < 180.0) {
            return Err(bad("camera", format!("h_fov {} outside (0, 180)", self.h_fov)));
        }
        if self.width < 8 || self.height < 8 {
            return Err(bad("camera", "image must be at least 8x8"));
        }
        positive("camera", "mount_height", self.mount_height)?;
        positive("camera", "gamma", self.gamma)?;
        positive("camera", "max_range", self.max_range)?;
        if !(self.pitch.is_finite() && self.pitch.abs() < 45.0) {
            return Err(bad("camera", format!("pitch {} outside (-45, 45)", self.pitch)));
        }
        if !(1..=8).contains(&self.supersample) {
            return Err(bad("camera", "supersample must be in 1..=8"));
        }
        Ok(())
    }

    /// Same optics at `1/factor` the resolution (pixel binning).
    pub fn binned(&self, factor: u32) -> Self {
        Self {
            width: self.width / factor.max(1),
            height: self.height / factor.max(1),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StylePreset {
    pub name: String,
    pub blur_sigma: f64,
    pub contrast: f64,
    pub noise_sigma: f64,
}

impl StylePreset {
    pub fn crisp() -> Self {
        Self {
            name: "crisp".into(),
            blur_sigma: 0.0,
            contrast: 1.0,
            noise_sigma: 0.0,
        }
    }

    pub fn soft() -> Self {
        Self {
            name: "soft".into(),
            blur_sigma: 1.5,
            contrast: 0.7,
            noise_sigma: 4.0,
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "crisp" => Some(Self::crisp()),
            "soft" => Some(Self::soft()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("blur_sigma", self.blur_sigma),
            ("contrast", self.contrast),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(bad("style", format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians, unwrapped.
    pub heading: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    pub wheelbase: f64,
    pub lookahead_base: f64,
    pub lookahead_gain: f64,
    pub dt: f64,
    pub max_steer: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            lookahead_base: 4.0,
            lookahead_gain: 0.5,
            dt: 0.05,
            max_steer: 0.6,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, v) in [
            ("wheelbase", self.wheelbase),
            ("lookahead_base", self.lookahead_base),
            ("lookahead_gain", self.lookahead_gain),
            ("dt", self.dt),
            ("max_steer", self.max_steer),
        ] {
            positive("controller", name, v)?;
        }
        if self.dt > 0.1 {
            return Err(bad("controller", format!("dt {} exceeds 0.1 s", self.dt)));
        }
        Ok(())
    }

    pub fn lookahead(&self, speed: f64) -> f64 {
        self.lookahead_base + self.lookahead_gain * speed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_lane_offsets() {
        let s = SceneSpec::default();
        assert_eq!(s.line_offsets(), vec![5.25, 1.75, -1.75, -5.25]);
        assert_eq!(s.road_extent(), (-5.25, 5.25));
    }

    #[test]
    fn even_lane_count_keeps_ego_left_of_middle() {
        let s = SceneSpec { lane_count: 2, ..Default::default() };
        assert_eq!(s.line_offsets(), vec![1.75, -1.75, -5.25]);
    }

    #[test]
    fn validation() {
        assert!(SceneSpec { texture_sharpness: 1.2, ..Default::default() }.validate().is_err());
        assert!(SceneSpec { line_width: 0.0, ..Default::default() }.validate().is_err());
        assert!(CameraSpec { h_fov: 180.0, ..Default::default() }.validate().is_err());
        assert!(ControllerParams { dt: 0.2, ..Default::default() }.validate().is_err());
        assert!(StylePreset { contrast: -1.0, ..StylePreset::soft() }.validate().is_err());
        assert!(StylePreset::builtin("soft").unwrap().validate().is_ok());
        assert!(StylePreset::builtin("grainy").is_none());
    }
}
