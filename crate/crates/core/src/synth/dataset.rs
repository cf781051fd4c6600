use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bad, render_frame, CameraSpec, SceneSpec, SynthError, Track, VehicleState};
use crate::image::ImageSet;

/// Distribution of vehicle poses for still-frame datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSampler {
    /// Std-dev of the lateral offset from the ego-lane center, metres.
    pub lateral_sigma: f64,
    /// Offsets are clipped to this magnitude.
    pub lateral_limit: f64,
    /// Std-dev of the heading relative to the lane, radians.
    pub heading_sigma: f64,
    /// Open tracks keep this much road ahead of every pose.
    pub lookahead_margin: f64,
}

impl Default for PoseSampler {
    fn default() -> Self {
        Self {
            lateral_sigma: 0.3,
            lateral_limit: 1.0,
            heading_sigma: 0.02,
            lookahead_margin: 40.0,
        }
    }
}

/// `n` poses at uniformly random arclengths. The draw order is fixed, so
/// equal seeds give equal pose lists whatever the scene.
pub fn sample_poses(
    track: &Track,
    n: usize,
    seed: u64,
    sampler: &PoseSampler,
) -> Result<Vec<VehicleState>, SynthError> {
    let span = if track.is_closed() {
        track.length()
    } else {
        track.length() - sampler.lookahead_margin
    };
    if span <= 0.0 {
        return Err(bad("poses", "track shorter than the lookahead margin"));
    }
    let lat = Normal::new(0.0, sampler.lateral_sigma)
        .map_err(|e| bad("poses", format!("lateral_sigma: {e}")))?;
    let head = Normal::new(0.0, sampler.heading_sigma)
        .map_err(|e| bad("poses", format!("heading_sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let s = rng.random::<f64>() * span;
            let off = lat.sample(&mut rng).clamp(-sampler.lateral_limit, sampler.lateral_limit);
            let dh = head.sample(&mut rng);
            let (x, y) = track.offset_point(s, off);
            let (_, _, h) = track.pose_at(s);
            VehicleState {
                x,
                y,
                heading: h + dh,
                speed: 0.0,
            }
        })
        .collect())
}

/// Renders one frame per pose (in parallel, order preserved).
pub fn render_set(
    label: impl Into<String>,
    scene: &SceneSpec,
    cam: &CameraSpec,
    track: &Track,
    poses: &[VehicleState],
) -> Result<ImageSet, SynthError> {
    let images = poses
        .par_iter()
        .map(|p| render_frame(scene, cam, p, track))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ImageSet::from_images(label, images)?)
}
