//! Sim-to-real gap measurement for lane-keeping systems: image-distribution
//! distance (FID), structural similarity (FSIM), lane-detection accuracy,
//! trajectory deviation and restoring, plus a small synthetic lane-scene
//! simulator to exercise them end to end.

pub mod fid;
pub mod fsim;
pub mod image;
pub mod lane_eval;
pub mod synth;
pub mod trajectory;

pub use fid::{FeatureMatrix, FidError, FidMatrix, FidReport, GaussianStats};
pub use fsim::{FsimError, FsimParams, LambdaCandidate, MeanFsim};
pub use image::{ImageBuffer, ImageError, ImageSet, RegionOfInterest};
pub use lane_eval::{AccuracyReport, LaneEvalError, LaneFrame, SegmentationRaster, ThreeRunRule};
pub use synth::{
    CameraSpec, EpisodeSpec, SceneSpec, SimLog, StylePreset, SynthError, Track, TrackSpec,
};
pub use trajectory::{
    Centerline, GeoPoint, RestoreSpec, RestoreVerdict, SectionRmse, SectionSpec, Trajectory,
    TrajectoryError, UtmPoint, UtmZone,
};
