//! Trajectory fidelity: centerline matching, per-section RMSE, lane-restoring
//! verdicts and lap success rates.
//!
//! Positions are planar UTM metres. Lateral offsets are signed left-positive
//! relative to the centerline's direction of travel.

mod io;
mod utm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    read_centerline_csv, read_trajectory_csv, write_centerline_csv, write_trajectory_csv,
    CoordinateKind,
};
pub use utm::{
    latlon_to_utm, latlon_to_utm_in_zone, zone_for, GeoPoint, UtmPoint, UtmZone, FALSE_EASTING,
    FALSE_NORTHING_SOUTH, MAX_ABS_LAT, UTM_K0, WGS84_A, WGS84_F,
};

/// Consecutive samples further apart than this are treated as a dropout.
pub const MAX_SAMPLE_GAP: f64 = 10.0;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("latitude {0} outside [-84, 84]")]
    LatitudeOutOfRange(f64),
    #[error("UTM zone {0} outside [1, 60]")]
    BadZone(u8),
    #[error("cannot parse UTM zone '{0}' (expected e.g. 52N)")]
    BadZoneText(String),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("timestamps not strictly increasing at sample {index} ({prev} -> {next})")]
    NonMonotonicTime { index: usize, prev: f64, next: f64 },
    #[error("discontinuity of {gap:.3} m between samples {index} and {} (limit {limit} m)", index + 1)]
    Discontinuity { index: usize, gap: f64, limit: f64 },
    #[error("centerline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("zero-length centerline segment at vertex {0}")]
    ZeroLengthSegment(usize),
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("zone mismatch: {0} vs {1}")]
    ZoneMismatch(UtmZone, UtmZone),
    #[error("section '{name}' [{start_s}, {end_s}] invalid for centerline of length {length}")]
    BadSection {
        name: String,
        start_s: f64,
        end_s: f64,
        length: f64,
    },
    #[error("no samples fall inside section '{0}'")]
    EmptySection(String),
    #[error("invalid restore spec: {0}")]
    BadRestoreSpec(String),
    #[error("empty outcome list")]
    NoOutcomes,
    #[error("planar coordinates need a UTM zone")]
    MissingZone,
    #[error("unrecognised header {0:?}")]
    BadHeader(Vec<String>),
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: UtmPoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub label: String,
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(label: impl Into<String>, samples: Vec<TrajectorySample>) -> Result<Self, TrajectoryError> {
        Self::with_max_gap(label, samples, MAX_SAMPLE_GAP)
    }

    pub fn with_max_gap(
        label: impl Into<String>,
        samples: Vec<TrajectorySample>,
        max_gap: f64,
    ) -> Result<Self, TrajectoryError> {
        if samples.is_empty() {
            return Err(TrajectoryError::EmptyTrajectory);
        }
        let zone = samples[0].position.zone;
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.position.easting.is_finite() && s.position.northing.is_finite()) {
                return Err(TrajectoryError::NonFinite);
            }
            if s.position.zone != zone {
                return Err(TrajectoryError::ZoneMismatch(zone, s.position.zone));
            }
            if i == 0 {
                continue;
            }
            let prev = &samples[i - 1];
            if s.t <= prev.t {
                return Err(TrajectoryError::NonMonotonicTime {
                    index: i,
                    prev: prev.t,
                    next: s.t,
                });
            }
            let gap = (s.position.easting - prev.position.easting)
                .hypot(s.position.northing - prev.position.northing);
            if gap >= max_gap {
                return Err(TrajectoryError::Discontinuity {
                    index: i - 1,
                    gap,
                    limit: max_gap,
                });
            }
        }
        Ok(Self {
            label: label.into(),
            samples,
        })
    }

    /// Builds from `(t, easting, northing)` triples in one zone.
    pub fn from_planar(
        label: impl Into<String>,
        zone: UtmZone,
        rows: impl IntoIterator<Item = (f64, f64, f64)>,
    ) -> Result<Self, TrajectoryError> {
        let samples = rows
            .into_iter()
            .map(|(t, easting, northing)| TrajectorySample {
                t,
                position: UtmPoint {
                    easting,
                    northing,
                    zone,
                },
            })
            .collect();
        Self::new(label, samples)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn zone(&self) -> UtmZone {
        self.samples[0].position.zone
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Centerline {
    points: Vec<UtmPoint>,
    cumulative: Vec<f64>,
}

impl Centerline {
    pub fn new(points: Vec<UtmPoint>) -> Result<Self, TrajectoryError> {
        if points.len() < 2 {
            return Err(TrajectoryError::TooFewPoints(points.len()));
        }
        let zone = points[0].zone;
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].easting.is_finite() && w[1].northing.is_finite() && w[0].easting.is_finite()) {
                return Err(TrajectoryError::NonFinite);
            }
            if w[1].zone != zone {
                return Err(TrajectoryError::ZoneMismatch(zone, w[1].zone));
            }
            let len = (w[1].easting - w[0].easting).hypot(w[1].northing - w[0].northing);
            if len == 0.0 {
                return Err(TrajectoryError::ZeroLengthSegment(i));
            }
            cumulative.push(cumulative[i] + len);
        }
        Ok(Self { points, cumulative })
    }

    pub fn from_planar(
        zone: UtmZone,
        xy: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self, TrajectoryError> {
        Self::new(
            xy.into_iter()
                .map(|(easting, northing)| UtmPoint {
                    easting,
                    northing,
                    zone,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[UtmPoint] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    pub fn zone(&self) -> UtmZone {
        self.points[0].zone
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolylineMatch {
    pub foot: UtmPoint,
    pub s: f64,
    pub offset: f64,
}

/// Orthogonal projection onto the closest segment. Exact ties go to the
/// earlier segment (smaller `s`). The caller is responsible for zone agreement.
pub fn nearest_on_polyline(p: UtmPoint, c: &Centerline) -> PolylineMatch {
    let mut best: Option<(f64, PolylineMatch)> = None;
    for (i, w) in c.points.windows(2).enumerate() {
        let (ax, ay) = (w[0].easting, w[0].northing);
        let (dx, dy) = (w[1].easting - ax, w[1].northing - ay);
        let seg_len2 = dx * dx + dy * dy;
        let (px, py) = (p.easting - ax, p.northing - ay);
        let u = ((px * dx + py * dy) / seg_len2).clamp(0.0, 1.0);
        // interior feet are found by removing the perpendicular part of p, which
        // keeps the along-track coordinate exact (a + u·d would round it)
        let (fx, fy) = if u == 0.0 {
            (ax, ay)
        } else if u == 1.0 {
            (w[1].easting, w[1].northing)
        } else {
            let k = (dx * py - dy * px) / seg_len2;
            (p.easting + k * dy, p.northing - k * dx)
        };
        let dist = (p.easting - fx).hypot(p.northing - fy);
        if best.as_ref().is_some_and(|(d, _)| dist >= *d) {
            continue;
        }
        let cross = dx * (p.northing - fy) - dy * (p.easting - fx);
        let offset = if cross < 0.0 { -dist } else { dist };
        let s = c.cumulative[i] + u * (c.cumulative[i + 1] - c.cumulative[i]);
        best = Some((
            dist,
            PolylineMatch {
                foot: UtmPoint {
                    easting: fx,
                    northing: fy,
                    zone: c.zone(),
                },
                s,
                offset,
            },
        ));
    }
    best.expect("centerline has at least one segment").1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetSample {
    pub t: f64,
    pub s: f64,
    pub offset: f64,
}

pub fn lateral_offsets(
    traj: &Trajectory,
    c: &Centerline,
) -> Result<Vec<OffsetSample>, TrajectoryError> {
    if traj.zone() != c.zone() {
        return Err(TrajectoryError::ZoneMismatch(traj.zone(), c.zone()));
    }
    Ok(traj
        .samples
        .iter()
        .map(|smp| {
            let m = nearest_on_polyline(smp.position, c);
            OffsetSample {
                t: smp.t,
                s: m.s,
                offset: m.offset,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub name: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl SectionSpec {
    pub fn validate(&self, c: &Centerline) -> Result<(), TrajectoryError> {
        // small slack so a section ending at a rounded "total length" is accepted
        let len = c.length();
        let ok = self.start_s >= 0.0 && self.start_s < self.end_s && self.end_s <= len + 1e-9 * len.max(1.0);
        if !ok {
            return Err(TrajectoryError::BadSection {
                name: self.name.clone(),
                start_s: self.start_s,
                end_s: self.end_s,
                length: len,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionRmse {
    pub name: String,
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub n: usize,
}

pub fn section_rmse(
    traj: &Trajectory,
    c: &Centerline,
    sec: &SectionSpec,
) -> Result<SectionRmse, TrajectoryError> {
    sec.validate(c)?;
    if traj.zone() != c.zone() {
        return Err(TrajectoryError::ZoneMismatch(traj.zone(), c.zone()));
    }
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for smp in &traj.samples {
        let m = nearest_on_polyline(smp.position, c);
        if m.s < sec.start_s || m.s > sec.end_s {
            continue;
        }
        sx += (smp.position.easting - m.foot.easting).powi(2);
        sy += (smp.position.northing - m.foot.northing).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(TrajectoryError::EmptySection(sec.name.clone()));
    }
    Ok(SectionRmse {
        name: sec.name.clone(),
        rmse_x: (sx / n as f64).sqrt(),
        rmse_y: (sy / n as f64).sqrt(),
        n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestoreSpec {
    pub return_band: f64,
    pub t_max: f64,
    pub stable_window: f64,
    pub stable_band: f64,
}

impl Default for RestoreSpec {
    fn default() -> Self {
        Self {
            return_band: 0.2,
            t_max: 120.0,
            stable_window: 10.0,
            stable_band: 0.3,
        }
    }
}

impl RestoreSpec {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        for (name, v) in [
            ("return_band", self.return_band),
            ("t_max", self.t_max),
            ("stable_window", self.stable_window),
            ("stable_band", self.stable_band),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TrajectoryError::BadRestoreSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestoreFailure {
    /// No sample within `t_max` came inside the return band.
    NeverReturned,
    /// Returned, but drifted outside the stable band during every window.
    Unstable,
    /// Every candidate return lacked a full stability window of data.
    InsufficientData,
}

impl std::fmt::Display for RestoreFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NeverReturned => "never returned",
            Self::Unstable => "unstable",
            Self::InsufficientData => "insufficient data",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestoreVerdict {
    pub success: bool,
    pub return_time: Option<f64>,
    pub failure: Option<RestoreFailure>,
}

/// `t` is measured from the first sample; the window check is inclusive.
pub fn restoring_verdict(
    offsets: &[OffsetSample],
    spec: &RestoreSpec,
) -> Result<RestoreVerdict, TrajectoryError> {
    spec.validate()?;
    if offsets.is_empty() {
        return Err(TrajectoryError::EmptyTrajectory);
    }
    let t0 = offsets[0].t;
    let t_end = offsets[offsets.len() - 1].t - t0;
    let (mut any_candidate, mut any_complete) = (false, false);
    for (i, c) in offsets.iter().enumerate() {
        let t = c.t - t0;
        if t > spec.t_max {
            break;
        }
        if c.offset.abs() > spec.return_band {
            continue;
        }
        any_candidate = true;
        if t_end < t + spec.stable_window {
            continue;
        }
        any_complete = true;
        let stable = offsets[i..]
            .iter()
            .take_while(|o| o.t - t0 <= t + spec.stable_window)
            .all(|o| o.offset.abs() <= spec.stable_band);
        if stable {
            return Ok(RestoreVerdict {
                success: true,
                return_time: Some(t),
                failure: None,
            });
        }
    }
    let failure = match (any_candidate, any_complete) {
        (false, _) => RestoreFailure::NeverReturned,
        (true, false) => RestoreFailure::InsufficientData,
        (true, true) => RestoreFailure::Unstable,
    };
    Ok(RestoreVerdict {
        success: false,
        return_time: None,
        failure: Some(failure),
    })
}

/// Percentage of successes, rounded to one decimal.
pub fn success_rate(outcomes: &[bool]) -> Result<f64, TrajectoryError> {
    if outcomes.is_empty() {
        return Err(TrajectoryError::NoOutcomes);
    }
    let k = outcomes.iter().filter(|&&b| b).count() as f64;
    Ok((1000.0 * k / outcomes.len() as f64).round() / 10.0)
}
