//! Lane ground truth from segmentation rasters, and TuSimple-style point
//! accuracy between predicted and ground-truth lane frames.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageBuffer;

/// Marker for "no lane point at this row".
pub const ABSENT: i32 = -2;
/// Lines tracked per frame; line ids run 1..=4 from left to right.
pub const MAX_LINES: usize = 4;
/// Canonical TuSimple matching threshold, pixels.
pub const DEFAULT_THRESHOLD: f64 = 20.0;

#[derive(Debug, Error)]
pub enum LaneEvalError {
    #[error("segmentation raster must be RGB, got {0} channel(s)")]
    NotRgb(u8),
    #[error("frame {frame}: {detail}")]
    InvalidFrame { frame: String, detail: String },
    #[error("prediction missing for ground-truth frame {0}")]
    MissingPrediction(String),
    #[error("prediction {0} has no ground-truth frame")]
    UnmatchedPrediction(String),
    #[error("duplicate frame id {0}")]
    DuplicateFrame(String),
    #[error("frame {0}: h_samples differ between prediction and ground truth")]
    HSamplesMismatch(String),
    #[error("ground truth contains no lane points")]
    NoGroundTruth,
    #[error("threshold must be a non-negative number, got {0}")]
    BadThreshold(f64),
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// RGB segmentation output where lane pixels carry exactly `lane_color`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationRaster {
    pub image: ImageBuffer,
    pub lane_color: [u8; 3],
}

impl SegmentationRaster {
    pub fn new(image: ImageBuffer, lane_color: [u8; 3]) -> Result<Self, LaneEvalError> {
        if image.channels() != 3 {
            return Err(LaneEvalError::NotRgb(image.channels()));
        }
        Ok(Self { image, lane_color })
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}

/// How a row with three lane runs is mapped onto line ids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThreeRunRule {
    /// Second run left of the image center means lines (1, 2, 3), otherwise (2, 3, 4).
    #[default]
    Pseudocode,
    /// The mirrored assignment: second run left of center means lines (2, 3, 4).
    Prose,
}

/// One annotated image: x-coordinate per line id at every sample row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaneFrame {
    pub frame_id: String,
    pub h_samples: Vec<u32>,
    /// `lanes[k]` holds line `k + 1`; [`ABSENT`] where the line has no point.
    pub lanes: Vec<Vec<i32>>,
}

impl LaneFrame {
    pub fn validate(&self) -> Result<(), LaneEvalError> {
        let invalid = |detail: String| LaneEvalError::InvalidFrame {
            frame: self.frame_id.clone(),
            detail,
        };
        if self.h_samples.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("h_samples not strictly increasing".into()));
        }
        if self.lanes.len() > MAX_LINES {
            return Err(invalid(format!("{} lanes, at most {MAX_LINES}", self.lanes.len())));
        }
        for (k, lane) in self.lanes.iter().enumerate() {
            if lane.len() != self.h_samples.len() {
                return Err(invalid(format!(
                    "lane {} has {} points for {} h_samples",
                    k + 1,
                    lane.len(),
                    self.h_samples.len()
                )));
            }
            if let Some(x) = lane.iter().find(|&&x| x < 0 && x != ABSENT) {
                return Err(invalid(format!("lane {} has invalid x {x}", k + 1)));
            }
        }
        Ok(())
    }

    /// x of line `line_id` (1-based) at sample `i`, if present.
    pub fn point(&self, line_id: usize, i: usize) -> Option<i32> {
        self.lanes
            .get(line_id - 1)
            .and_then(|lane| lane.get(i))
            .copied()
            .filter(|&x| x != ABSENT)
    }
}

/// TuSimple default sample rows: every 10th row from 250 up to 10 rows above the bottom.
pub fn default_h_samples(height: u32) -> Vec<u32> {
    (250..height.saturating_sub(9)).step_by(10).collect()
}

/// Centers (rounded mean column) of the contiguous `lane_color` runs in `row`, left to right.
pub fn row_runs(raster: &SegmentationRaster, row: u32) -> Vec<u32> {
    let mut centers = Vec::new();
    if row >= raster.height() {
        return centers;
    }
    let mut start: Option<u32> = None;
    let w = raster.width();
    for x in 0..=w {
        let on = x < w && raster.image.pixel(x, row) == raster.lane_color;
        match (on, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                // mean of s..x-1 is (s + x - 1) / 2, rounded half up
                centers.push((s + x) / 2);
                start = None;
            }
            _ => {}
        }
    }
    centers
}

/// Line ids (1-based) for a row with the given run centers, or `None` when
/// the run count does not identify the lines.
pub fn assign_lines(centers: &[u32], width: u32, rule: ThreeRunRule) -> Option<&'static [usize]> {
    match centers.len() {
        2 => Some(&[2, 3]),
        3 => {
            let second_left = (centers[1] as f64) < width as f64 / 2.0;
            Some(match (rule, second_left) {
                (ThreeRunRule::Pseudocode, true) | (ThreeRunRule::Prose, false) => &[1, 2, 3],
                _ => &[2, 3, 4],
            })
        }
        4 => Some(&[1, 2, 3, 4]),
        _ => None,
    }
}

/// Ground-truth lane frame from a segmentation raster, sampled at `h_samples`.
pub fn extract_ground_truth(
    frame_id: impl Into<String>,
    raster: &SegmentationRaster,
    h_samples: &[u32],
    rule: ThreeRunRule,
) -> LaneFrame {
    let mut lanes = vec![vec![ABSENT; h_samples.len()]; MAX_LINES];
    for (i, &row) in h_samples.iter().enumerate() {
        let centers = row_runs(raster, row);
        if let Some(ids) = assign_lines(&centers, raster.width(), rule) {
            for (&id, &x) in ids.iter().zip(&centers) {
                lanes[id - 1][i] = x as i32;
            }
        }
    }
    LaneFrame {
        frame_id: frame_id.into(),
        h_samples: h_samples.to_vec(),
        lanes,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub matched: usize,
    pub total_gt: usize,
    pub threshold: f64,
}

fn index_frames(frames: &[LaneFrame]) -> Result<HashMap<&str, &LaneFrame>, LaneEvalError> {
    let mut map = HashMap::with_capacity(frames.len());
    for f in frames {
        f.validate()?;
        if map.insert(f.frame_id.as_str(), f).is_some() {
            return Err(LaneEvalError::DuplicateFrame(f.frame_id.clone()));
        }
    }
    Ok(map)
}

/// Fraction of ground-truth points whose line has a predicted point within
/// `threshold` pixels at the same sample row.
pub fn tusimple_accuracy(
    preds: &[LaneFrame],
    gts: &[LaneFrame],
    threshold: f64,
) -> Result<AccuracyReport, LaneEvalError> {
    if !(threshold >= 0.0) {
        return Err(LaneEvalError::BadThreshold(threshold));
    }
    let pred_index = index_frames(preds)?;
    let gt_index = index_frames(gts)?;
    if let Some(p) = preds.iter().find(|p| !gt_index.contains_key(p.frame_id.as_str())) {
        return Err(LaneEvalError::UnmatchedPrediction(p.frame_id.clone()));
    }
    let (mut matched, mut total) = (0usize, 0usize);
    for gt in gts {
        let pred = pred_index
            .get(gt.frame_id.as_str())
            .ok_or_else(|| LaneEvalError::MissingPrediction(gt.frame_id.clone()))?;
        if pred.h_samples != gt.h_samples {
            return Err(LaneEvalError::HSamplesMismatch(gt.frame_id.clone()));
        }
        for (k, lane) in gt.lanes.iter().enumerate() {
            for (i, &x_gt) in lane.iter().enumerate() {
                if x_gt == ABSENT {
                    continue;
                }
                total += 1;
                if let Some(x_pred) = pred.point(k + 1, i) {
                    if ((x_pred - x_gt) as f64).abs() <= threshold {
                        matched += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        return Err(LaneEvalError::NoGroundTruth);
    }
    Ok(AccuracyReport {
        accuracy: matched as f64 / total as f64,
        matched,
        total_gt: total,
        threshold,
    })
}

/// One line of a TuSimple label file. Field order follows the benchmark's files.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneRecord {
    lanes: Vec<Vec<i32>>,
    h_samples: Vec<u32>,
    raw_file: String,
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    run_time: Option<f64>,
}

pub fn read_lane_file(path: impl AsRef<Path>) -> Result<Vec<LaneFrame>, LaneEvalError> {
    let path = path.as_ref();
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut frames = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LaneRecord = serde_json::from_str(&line).map_err(|e| LaneEvalError::Parse {
            path: path.display().to_string(),
            line: n + 1,
            detail: e.to_string(),
        })?;
        let frame = LaneFrame {
            frame_id: rec.raw_file,
            h_samples: rec.h_samples,
            lanes: rec.lanes,
        };
        frame.validate()?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn write_lane_file(path: impl AsRef<Path>, frames: &[LaneFrame]) -> Result<(), LaneEvalError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for f in frames {
        let rec = LaneRecord {
            lanes: f.lanes.clone(),
            h_samples: f.h_samples.clone(),
            raw_file: f.frame_id.clone(),
            run_time: None,
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LANE: [u8; 3] = [255, 0, 255];

    fn raster_with_runs(w: u32, h: u32, runs: &[(u32, u32)], rows: &[u32]) -> SegmentationRaster {
        let mut data = vec![0u8; (w * h * 3) as usize];
        for &row in rows {
            for &(a, b) in runs {
                for x in a..=b {
                    let i = ((row * w + x) * 3) as usize;
                    data[i..i + 3].copy_from_slice(&LANE);
                }
            }
        }
        SegmentationRaster::new(ImageBuffer::new(w, h, 3, data).unwrap(), LANE).unwrap()
    }

    fn frame(id: &str, lanes: Vec<Vec<i32>>) -> LaneFrame {
        let n = lanes[0].len();
        LaneFrame {
            frame_id: id.into(),
            h_samples: (0..n as u32).map(|i| 300 + 10 * i).collect(),
            lanes,
        }
    }

    #[test]
    fn runs_of_a_row() {
        let r = raster_with_runs(200, 4, &[(10, 14), (100, 104)], &[1]);
        assert_eq!(row_runs(&r, 1), [12, 102]);
        assert!(row_runs(&r, 0).is_empty());
        let r = raster_with_runs(20, 2, &[(7, 7)], &[0]);
        assert_eq!(row_runs(&r, 0), [7]);
        // run touching the right border
        let r = raster_with_runs(20, 1, &[(17, 19)], &[0]);
        assert_eq!(row_runs(&r, 0), [18]);
        // even-length run rounds half up
        let r = raster_with_runs(20, 1, &[(4, 5)], &[0]);
        assert_eq!(row_runs(&r, 0), [5]);
    }

    #[test]
    fn branch_assignment() {
        let w = 808;
        let rows = [0u32];
        let two = raster_with_runs(w, 1, &[(299, 301), (499, 501)], &rows);
        let f = extract_ground_truth("a", &two, &rows, ThreeRunRule::Pseudocode);
        assert_eq!(f.lanes, vec![vec![ABSENT], vec![300], vec![500], vec![ABSENT]]);

        let three = raster_with_runs(w, 1, &[(99, 101), (299, 301), (499, 501)], &rows);
        let f = extract_ground_truth("b", &three, &rows, ThreeRunRule::Pseudocode);
        assert_eq!(f.lanes, vec![vec![100], vec![300], vec![500], vec![ABSENT]]);
        let f = extract_ground_truth("b", &three, &rows, ThreeRunRule::Prose);
        assert_eq!(f.lanes, vec![vec![ABSENT], vec![100], vec![300], vec![500]]);

        let three_right = raster_with_runs(w, 1, &[(299, 301), (499, 501), (699, 701)], &rows);
        let f = extract_ground_truth("c", &three_right, &rows, ThreeRunRule::Pseudocode);
        assert_eq!(f.lanes, vec![vec![ABSENT], vec![300], vec![500], vec![700]]);

        let four = raster_with_runs(w, 1, &[(99, 101), (299, 301), (499, 501), (699, 701)], &rows);
        let f = extract_ground_truth("d", &four, &rows, ThreeRunRule::Pseudocode);
        assert_eq!(f.lanes, vec![vec![100], vec![300], vec![500], vec![700]]);

        for runs in [&[(10u32, 12u32)][..], &[(1, 2), (10, 11), (20, 21), (30, 31), (40, 41)][..], &[][..]] {
            let r = raster_with_runs(w, 1, runs, &rows);
            let f = extract_ground_truth("e", &r, &rows, ThreeRunRule::Pseudocode);
            assert!(f.lanes.iter().all(|l| l == &[ABSENT]));
        }
    }

    #[test]
    fn default_rows() {
        let rows = default_h_samples(620);
        assert_eq!(rows.first(), Some(&250));
        assert_eq!(rows.last(), Some(&610));
        assert_eq!(rows.len(), 37);
    }

    #[test]
    fn accuracy_hand_fixtures() {
        let gt = frame("f", vec![vec![100, 110], vec![200, ABSENT], vec![300, ABSENT], vec![ABSENT; 2]]);
        assert_eq!(tusimple_accuracy(&[gt.clone()], &[gt.clone()], 20.0).unwrap().accuracy, 1.0);

        let none = frame("f", vec![vec![ABSENT; 2]; 4]);
        let r = tusimple_accuracy(&[none], &[gt.clone()], 20.0).unwrap();
        assert_eq!((r.accuracy, r.matched, r.total_gt), (0.0, 0, 4));

        // three within 20 px, one off by 21
        let pred = frame("f", vec![vec![120, 90], vec![180, 250], vec![321, 310], vec![ABSENT; 2]]);
        let r = tusimple_accuracy(&[pred], &[gt], 20.0).unwrap();
        assert_eq!((r.matched, r.total_gt), (3, 4));
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn accuracy_errors() {
        let a = frame("a", vec![vec![1]]);
        let b = frame("b", vec![vec![1]]);
        assert!(matches!(
            tusimple_accuracy(&[a.clone()], &[b.clone()], 20.0),
            Err(LaneEvalError::UnmatchedPrediction(_))
        ));
        assert!(matches!(
            tusimple_accuracy(&[], &[b.clone()], 20.0),
            Err(LaneEvalError::MissingPrediction(_))
        ));
        let mut shifted = b.clone();
        shifted.h_samples = vec![999];
        assert!(matches!(
            tusimple_accuracy(&[shifted], &[b.clone()], 20.0),
            Err(LaneEvalError::HSamplesMismatch(_))
        ));
        assert!(matches!(
            tusimple_accuracy(&[b.clone(), b.clone()], &[b.clone()], 20.0),
            Err(LaneEvalError::DuplicateFrame(_))
        ));
        let empty = frame("b", vec![vec![ABSENT]]);
        assert!(matches!(
            tusimple_accuracy(&[b.clone()], &[empty], 20.0),
            Err(LaneEvalError::NoGroundTruth)
        ));
        let bad = frame("b", vec![vec![-5]]);
        assert!(tusimple_accuracy(&[b.clone()], &[bad], 20.0).is_err());
    }

    #[test]
    fn lane_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        let frames = vec![
            frame("clips/0/1.jpg", vec![vec![1, ABSENT], vec![3, 4]]),
            frame("clips/0/2.jpg", vec![vec![ABSENT, 7]]),
        ];
        write_lane_file(&path, &frames).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"lanes":[[1,-2],[3,4]],"h_samples":[300,310],"raw_file":"clips/0/1.jpg"}"#));
        assert_eq!(read_lane_file(&path).unwrap(), frames);

        std::fs::write(&path, "{\"raw_file\": 3}\n").unwrap();
        assert!(matches!(read_lane_file(&path), Err(LaneEvalError::Parse { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn accuracy_monotone_in_threshold(
            gt in proptest::collection::vec(0i32..800, 8),
            noise in proptest::collection::vec(-60i32..60, 8),
        ) {
            let g = frame("x", vec![gt[..4].to_vec(), gt[4..].to_vec()]);
            let p_lanes: Vec<Vec<i32>> = g.lanes.iter().zip(noise.chunks(4))
                .map(|(l, n)| l.iter().zip(n).map(|(a, b)| (a + b).max(0)).collect())
                .collect();
            let p = frame("x", p_lanes);
            let mut last = 1.0;
            for t in [40.0, 20.0, 10.0, 5.0, 0.0] {
                let acc = tusimple_accuracy(std::slice::from_ref(&p), std::slice::from_ref(&g), t).unwrap().accuracy;
                prop_assert!(acc <= last);
                last = acc;
            }
        }

        #[test]
        fn extracted_ids_increase_left_to_right(cols in proptest::collection::btree_set(0u32..400, 0..7)) {
            let runs: Vec<(u32, u32)> = cols.iter().map(|&c| (c * 2, c * 2)).collect();
            let r = raster_with_runs(800, 1, &runs, &[0]);
            let f = extract_ground_truth("p", &r, &[0], ThreeRunRule::Pseudocode);
            let xs: Vec<i32> = f.lanes.iter().map(|l| l[0]).filter(|&x| x != ABSENT).collect();
            prop_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
