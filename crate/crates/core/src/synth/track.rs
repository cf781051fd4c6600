use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{bad, SynthError};
use crate::trajectory::{Centerline, SectionSpec, UtmPoint, UtmZone};

/// Closed tracks must end this close to where they start.
pub const CLOSURE_TOLERANCE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Straight { length: f64 },
    /// Positive angles turn left.
    Arc { radius: f64, angle_deg: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { length } => length,
            Segment::Arc { radius, angle_deg } => radius * angle_deg.to_radians().abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub closed: bool,
}

impl TrackSpec {
    pub fn straight(length: f64) -> Self {
        Self {
            segments: vec![Segment::Straight { length }],
            closed: false,
        }
    }

    /// Straight lead-in, one arc, straight run-out.
    pub fn single_arc(lead: f64, radius: f64, angle_deg: f64, tail: f64) -> Self {
        Self {
            segments: vec![
                Segment::Straight { length: lead },
                Segment::Arc { radius, angle_deg },
                Segment::Straight { length: tail },
            ],
            closed: false,
        }
    }

    /// Two straights joined by half circles.
    pub fn oval(straight: f64, radius: f64) -> Self {
        Self {
            segments: vec![
                Segment::Straight { length: straight },
                Segment::Arc { radius, angle_deg: 180.0 },
                Segment::Straight { length: straight },
                Segment::Arc { radius, angle_deg: 180.0 },
            ],
            closed: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Pose {
    x: f64,
    y: f64,
    heading: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    /// Arclength of the closest centerline point.
    pub s: f64,
    /// Signed distance, left of travel positive.
    pub lateral: f64,
    /// True when the point lies past either end of an open track.
    pub beyond: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    spec: TrackSpec,
    starts: Vec<Pose>,
    geom: Vec<Geom>,
    s0: Vec<f64>,
    length: f64,
}

impl Track {
    pub fn new(spec: TrackSpec) -> Result<Self, SynthError> {
        if spec.segments.is_empty() {
            return Err(bad("track", "no segments"));
        }
        let mut pose = Pose {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        };
        let (mut starts, mut s0) = (Vec::new(), Vec::new());
        let mut s = 0.0;
        for (i, seg) in spec.segments.iter().enumerate() {
            match *seg {
                Segment::Straight { length } if !(length.is_finite() && length > 0.0) => {
                    return Err(bad("track", format!("segment {i}: length must be positive")));
                }
                Segment::Arc { radius, angle_deg }
                    if !(radius.is_finite() && radius > 0.0 && angle_deg.is_finite() && angle_deg != 0.0) =>
                {
                    return Err(bad(
                        "track",
                        format!("segment {i}: arc needs positive radius and nonzero angle"),
                    ));
                }
                _ => {}
            }
            starts.push(pose);
            s0.push(s);
            pose = advance(pose, seg, seg.length());
            s += seg.length();
        }
        if spec.closed {
            let gap = pose.x.hypot(pose.y);
            if gap > CLOSURE_TOLERANCE {
                return Err(SynthError::TrackNotClosed { gap });
            }
        }
        let geom = spec
            .segments
            .iter()
            .zip(&starts)
            .map(|(seg, &st)| Geom::new(seg, st))
            .collect();
        Ok(Self {
            spec,
            starts,
            geom,
            s0,
            length: s,
        })
    }

    pub fn spec(&self) -> &TrackSpec {
        &self.spec
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_closed(&self) -> bool {
        self.spec.closed
    }

    /// Arclength interval covered by segment `i`.
    pub fn segment_range(&self, i: usize) -> (f64, f64) {
        (self.s0[i], self.s0[i] + self.spec.segments[i].length())
    }

    /// One section per arc segment, named `arc<i>` after the segment index.
    pub fn arc_sections(&self) -> Vec<SectionSpec> {
        self.spec
            .segments
            .iter()
            .enumerate()
            .filter(|(_, seg)| matches!(seg, Segment::Arc { .. }))
            .map(|(i, _)| {
                let (start_s, end_s) = self.segment_range(i);
                SectionSpec {
                    name: format!("arc{i}"),
                    start_s,
                    end_s,
                }
            })
            .collect()
    }

    fn normalize_s(&self, s: f64) -> f64 {
        if self.spec.closed {
            s.rem_euclid(self.length)
        } else {
            s.clamp(0.0, self.length)
        }
    }

    fn segment_at(&self, s: f64) -> usize {
        self.s0.partition_point(|&a| a <= s).saturating_sub(1)
    }

    /// Centerline position and heading at arclength `s` (wrapped on closed
    /// tracks, clamped on open ones).
    pub fn pose_at(&self, s: f64) -> (f64, f64, f64) {
        let s = self.normalize_s(s);
        let i = self.segment_at(s);
        let p = advance(self.starts[i], &self.spec.segments[i], s - self.s0[i]);
        (p.x, p.y, p.heading)
    }

    /// Point at arclength `s`, displaced `lateral` metres to the left.
    pub fn offset_point(&self, s: f64, lateral: f64) -> (f64, f64) {
        let (x, y, h) = self.pose_at(s);
        (x - lateral * h.sin(), y + lateral * h.cos())
    }

    /// Closest centerline point. Exact ties resolve to the smaller arclength.
    pub fn project(&self, x: f64, y: f64) -> TrackPoint {
        let mut best = (f64::INFINITY, TrackPoint { s: 0.0, lateral: 0.0, beyond: false });
        let last = self.geom.len() - 1;
        for (i, g) in self.geom.iter().enumerate() {
            let (px, py) = (x - g.start.x, y - g.start.y);
            let (dist, s_local, lateral) = match g.arc {
                None => {
                    let u = px * g.cos + py * g.sin;
                    let v = py * g.cos - px * g.sin;
                    if u < 0.0 {
                        ((px * px + py * py).sqrt(), 0.0, v)
                    } else if u > g.len {
                        ((u - g.len).hypot(v), g.len, v)
                    } else {
                        (v.abs(), u, v)
                    }
                }
                Some(a) => {
                    let (dx, dy) = (x - a.cx, y - a.cy);
                    let r = (dx * dx + dy * dy).sqrt();
                    // cheap reject: no point of this arc is closer than |r − R|
                    if (a.radius - r).abs() >= best.0 {
                        continue;
                    }
                    let delta = (a.sigma * (dy.atan2(dx) - a.phi0)).rem_euclid(TAU);
                    if delta <= a.sweep {
                        ((a.radius - r).abs(), a.radius * delta, a.sigma * (a.radius - r))
                    } else {
                        // outside the swept wedge: nearer endpoint
                        let (qx, qy) = (x - g.end.x, y - g.end.y);
                        let d0 = (px * px + py * py).sqrt();
                        let d1 = (qx * qx + qy * qy).sqrt();
                        if d0 <= d1 {
                            (d0, 0.0, py * g.cos - px * g.sin)
                        } else {
                            (d1, g.len, qy * g.end_cos - qx * g.end_sin)
                        }
                    }
                }
            };
            if dist < best.0 {
                let beyond = !self.spec.closed
                    && ((i == 0 && s_local == 0.0 && px * g.cos + py * g.sin < 0.0)
                        || (i == last
                            && s_local == g.len
                            && (x - g.end.x) * g.end_cos + (y - g.end.y) * g.end_sin > 0.0));
                best = (
                    dist,
                    TrackPoint {
                        s: self.s0[i] + s_local,
                        lateral,
                        beyond,
                    },
                );
            }
        }
        best.1
    }

    /// Polyline through the centerline with arcs split into chords of at
    /// most `step` metres, tagged with `zone` for the trajectory tools.
    pub fn centerline(&self, zone: UtmZone, step: f64) -> Result<Centerline, SynthError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(bad("centerline", "step must be positive"));
        }
        let mut pts = vec![(self.starts[0].x, self.starts[0].y)];
        for (i, seg) in self.spec.segments.iter().enumerate() {
            let len = seg.length();
            let pieces = match seg {
                Segment::Straight { .. } => 1,
                Segment::Arc { .. } => (len / step).ceil().max(1.0) as usize,
            };
            for k in 1..=pieces {
                let p = advance(self.starts[i], seg, len * k as f64 / pieces as f64);
                pts.push((p.x, p.y));
            }
        }
        let to_utm = |(easting, northing): (f64, f64)| UtmPoint {
            easting,
            northing,
            zone,
        };
        Ok(Centerline::new(pts.into_iter().map(to_utm).collect())?)
    }
}

/// Per-segment constants for projection.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Geom {
    start: Pose,
    end: Pose,
    cos: f64,
    sin: f64,
    end_cos: f64,
    end_sin: f64,
    len: f64,
    arc: Option<ArcGeom>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ArcGeom {
    cx: f64,
    cy: f64,
    radius: f64,
    sigma: f64,
    sweep: f64,
    phi0: f64,
}

impl Geom {
    fn new(seg: &Segment, start: Pose) -> Self {
        let len = seg.length();
        let end = advance(start, seg, len);
        let arc = match *seg {
            Segment::Straight { .. } => None,
            Segment::Arc { radius, angle_deg } => {
                let sigma = angle_deg.signum();
                let cx = start.x - sigma * radius * start.heading.sin();
                let cy = start.y + sigma * radius * start.heading.cos();
                Some(ArcGeom {
                    cx,
                    cy,
                    radius,
                    sigma,
                    sweep: angle_deg.to_radians().abs(),
                    phi0: (start.y - cy).atan2(start.x - cx),
                })
            }
        };
        Self {
            start,
            end,
            cos: start.heading.cos(),
            sin: start.heading.sin(),
            end_cos: end.heading.cos(),
            end_sin: end.heading.sin(),
            len,
            arc,
        }
    }
}

fn advance(p: Pose, seg: &Segment, d: f64) -> Pose {
    match *seg {
        Segment::Straight { .. } => Pose {
            x: p.x + d * p.heading.cos(),
            y: p.y + d * p.heading.sin(),
            heading: p.heading,
        },
        Segment::Arc { radius, angle_deg } => {
            let sigma = angle_deg.signum();
            let heading = p.heading + sigma * d / radius;
            let (cx, cy) = (
                p.x - sigma * radius * p.heading.sin(),
                p.y + sigma * radius * p.heading.cos(),
            );
            Pose {
                x: cx + sigma * radius * heading.sin(),
                y: cy - sigma * radius * heading.cos(),
                heading,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quarter_circle_endpoint() {
        let t = Track::new(TrackSpec {
            segments: vec![Segment::Arc { radius: 10.0, angle_deg: 90.0 }],
            closed: false,
        })
        .unwrap();
        let (x, y, h) = t.pose_at(t.length());
        assert!((x - 10.0).abs() < 1e-12 && (y - 10.0).abs() < 1e-12);
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn right_turn_goes_negative_y() {
        let t = Track::new(TrackSpec {
            segments: vec![Segment::Arc { radius: 10.0, angle_deg: -90.0 }],
            closed: false,
        })
        .unwrap();
        let (x, y, _) = t.pose_at(t.length());
        assert!((x - 10.0).abs() < 1e-12 && (y + 10.0).abs() < 1e-12);
    }

    #[test]
    fn oval_closes() {
        let t = Track::new(TrackSpec::oval(100.0, 40.0)).unwrap();
        assert!((t.length() - (200.0 + 80.0 * std::f64::consts::PI)).abs() < 1e-9);
        let bad = TrackSpec { closed: true, ..TrackSpec::straight(10.0) };
        assert!(matches!(Track::new(bad), Err(SynthError::TrackNotClosed { .. })));
    }

    #[test]
    fn rejects_degenerate_segments() {
        assert!(Track::new(TrackSpec { segments: vec![], closed: false }).is_err());
        assert!(Track::new(TrackSpec::straight(0.0)).is_err());
        assert!(Track::new(TrackSpec::single_arc(10.0, 50.0, 0.0, 10.0)).is_err());
    }

    #[test]
    fn project_on_arc() {
        let t = Track::new(TrackSpec::single_arc(20.0, 150.0, 45.0, 20.0)).unwrap();
        let s = 20.0 + 60.0;
        let (x, y) = t.offset_point(s, 0.7);
        let p = t.project(x, y);
        assert!((p.s - s).abs() < 1e-9);
        assert!((p.lateral - 0.7).abs() < 1e-9);
        assert!(!p.beyond);
    }

    #[test]
    fn beyond_open_ends() {
        let t = Track::new(TrackSpec::straight(50.0)).unwrap();
        assert!(t.project(-3.0, 0.5).beyond);
        assert!(t.project(53.0, 0.5).beyond);
        assert!(!t.project(25.0, 40.0).beyond);
        let closed = Track::new(TrackSpec::oval(50.0, 20.0)).unwrap();
        assert!(!closed.project(-3.0, 0.5).beyond);
    }

    #[test]
    fn centerline_matches_track() {
        let t = Track::new(TrackSpec::single_arc(30.0, 150.0, 40.0, 30.0)).unwrap();
        let c = t.centerline(UtmZone::new(52, true).unwrap(), 0.5).unwrap();
        // chord length 0.5 on R=150 sags by R(1-cos(θ/2)) ≈ 0.2 mm
        assert!((c.length() - t.length()).abs() < 1e-3);
        let sections = t.arc_sections();
        assert_eq!(sections.len(), 1);
        assert_eq!((sections[0].start_s, sections[0].name.as_str()), (30.0, "arc1"));
    }

    proptest! {
        #[test]
        fn project_inverts_offset_point(
            frac in 0.0f64..1.0, lat in -4.0f64..4.0,
            radius in 30.0f64..300.0, angle in prop_oneof![-120.0f64..-10.0, 10.0f64..120.0],
        ) {
            let t = Track::new(TrackSpec::single_arc(25.0, radius, angle, 25.0)).unwrap();
            let s = frac * t.length();
            let (x, y) = t.offset_point(s, lat);
            let p = t.project(x, y);
            prop_assert!((p.lateral - lat).abs() < 1e-7, "{} vs {}", p.lateral, lat);
            prop_assert!((p.s - s).abs() < 1e-6, "{} vs {}", p.s, s);
        }
    }
}
