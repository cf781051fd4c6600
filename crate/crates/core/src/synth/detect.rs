use serde::{Deserialize, Serialize};

use super::{Camera, CameraSpec};
use crate::image::{to_luminance, ImageBuffer};

/// Stand-in lane detector: bright-pixel runs inside a near-field band are
/// mapped to the ground plane, the nearest run on each side of the vehicle
/// is taken as that side's ego boundary, and a robust line fit per side
/// gives the lane center curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Luminance strictly above this counts as marking.
    pub threshold: u8,
    pub near: f64,
    pub far: f64,
    /// Runs further than this from the vehicle are ignored.
    pub max_lateral: f64,
    /// Residual beyond which a point is dropped before refitting.
    pub outlier: f64,
    pub min_points: usize,
    /// Polynomial order of the per-side fit: 1 (line) or 2 (parabola).
    pub fit_order: u8,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            threshold: 150,
            near: 4.0,
            far: 20.0,
            max_lateral: 3.2,
            outlier: 0.5,
            min_points: 3,
            fit_order: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneEstimate {
    /// Lateral position of the lane center at the vehicle (left positive);
    /// the vehicle must move this way to re-center.
    pub lateral_error: f64,
    /// Direction of the lane center line relative to the heading (left positive).
    pub heading_error: f64,
    /// Quadratic coefficient of the center curve `L(F) = a + b·F + c·F²`.
    /// Zero for line fits.
    pub curvature: f64,
    pub left_points: usize,
    pub right_points: usize,
}

pub fn detect_lane_center(img: &ImageBuffer, cam: &CameraSpec) -> Option<LaneEstimate> {
    detect_lane_center_with(img, cam, &DetectorParams::default())
}

pub fn detect_lane_center_with(
    img: &ImageBuffer,
    cam: &CameraSpec,
    params: &DetectorParams,
) -> Option<LaneEstimate> {
    if !(1..=2).contains(&params.fit_order) {
        return None;
    }
    let camera = Camera::new(cam).ok()?;
    if img.width() != cam.width || img.height() != cam.height {
        return None;
    }
    let lum = to_luminance(img);
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for y in 0..cam.height {
        let Some((f, k)) = camera.row_ground(y as f64 + 0.5) else {
            continue;
        };
        if f < params.near || f > params.far {
            continue;
        }
        let (mut best_l, mut best_r): (Option<f64>, Option<f64>) = (None, None);
        let mut start = None;
        for x in 0..=cam.width {
            let on = x < cam.width && lum.gray(x, y) > params.threshold;
            match (on, start) {
                (true, None) => start = Some(x),
                (false, Some(s)) => {
                    start = None;
                    let u = (s + x) as f64 / 2.0;
                    let l = -k * (u - cam.width as f64 / 2.0);
                    if l.abs() > params.max_lateral {
                        continue;
                    }
                    if l >= 0.0 {
                        best_l = Some(best_l.map_or(l, |b| b.min(l)));
                    } else {
                        best_r = Some(best_r.map_or(l, |b| b.max(l)));
                    }
                }
                _ => {}
            }
        }
        if let Some(l) = best_l {
            left.push((f, l));
        }
        if let Some(r) = best_r {
            right.push((f, r));
        }
    }
    let ([al, bl, cl], nl) = robust_fit(&left, params)?;
    let ([ar, br, cr], nr) = robust_fit(&right, params)?;
    Some(LaneEstimate {
        lateral_error: (al + ar) / 2.0,
        heading_error: ((bl + br) / 2.0).atan(),
        curvature: (cl + cr) / 2.0,
        left_points: nl,
        right_points: nr,
    })
}

/// Least-squares `L = a + b·F (+ c·F²)`, refit once without points whose
/// residual exceeds the outlier bound. Returns `([a, b, c], inliers)`.
fn robust_fit(pts: &[(f64, f64)], params: &DetectorParams) -> Option<([f64; 3], usize)> {
    let order = params.fit_order as usize;
    let fit = |pts: &[(f64, f64)]| poly_fit(pts, order, params.min_points.max(order + 1));
    let eval = |c: &[f64; 3], f: f64| c[0] + f * (c[1] + f * c[2]);
    let coef = fit(pts)?;
    let kept: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&(f, l)| (l - eval(&coef, f)).abs() <= params.outlier)
        .collect();
    if kept.len() == pts.len() {
        return Some((coef, pts.len()));
    }
    Some((fit(&kept)?, kept.len()))
}

/// Normal-equation fit in the centered abscissa, mapped back to raw `F`.
fn poly_fit(pts: &[(f64, f64)], order: usize, min_points: usize) -> Option<[f64; 3]> {
    if pts.len() < min_points {
        return None;
    }
    let n = pts.len() as f64;
    let mf = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let m = order + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut aty = nalgebra::DVector::<f64>::zeros(m);
    for &(f, l) in pts {
        let z = f - mf;
        let basis = [1.0, z, z * z];
        for i in 0..m {
            aty[i] += basis[i] * l;
            for j in 0..m {
                ata[(i, j)] += basis[i] * basis[j];
            }
        }
    }
    if ata.determinant().abs() <= 1e-12 * ata.norm().powi(m as i32) {
        return None;
    }
    let q = ata.lu().solve(&aty)?;
    let (a, b, c) = (q[0], q[1], if order == 2 { q[2] } else { 0.0 });
    // L = a + b(F − m) + c(F − m)²
    Some([a - b * mf + c * mf * mf, b - 2.0 * c * mf, c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render_frame, SceneSpec, Track, TrackSpec, VehicleState};

    fn detect_at(lateral: f64, heading: f64) -> Option<LaneEstimate> {
        let track = Track::new(TrackSpec::straight(300.0)).unwrap();
        let cam = CameraSpec::default();
        let state = VehicleState { x: 30.0, y: lateral, heading, speed: 0.0 };
        let img = render_frame(&SceneSpec::default(), &cam, &state, &track).unwrap();
        detect_lane_center(&img, &cam)
    }

    #[test]
    fn centered_vehicle() {
        let e = detect_at(0.0, 0.0).unwrap();
        assert!(e.lateral_error.abs() < 0.05, "{e:?}");
        assert!(e.heading_error.abs() < 0.01, "{e:?}");
    }

    #[test]
    fn offset_vehicle_reports_correction() {
        let e = detect_at(0.5, 0.0).unwrap();
        assert!((e.lateral_error + 0.5).abs() < 0.1, "{e:?}");
    }

    #[test]
    fn yawed_vehicle() {
        // vehicle yawed left: the lane appears rotated right
        let e = detect_at(0.0, 0.03).unwrap();
        assert!((e.heading_error + 0.03).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn blank_frame_is_none() {
        let img = ImageBuffer::filled(808, 620, &[80, 80, 80]).unwrap();
        assert!(detect_lane_center(&img, &CameraSpec::default()).is_none());
    }

    #[test]
    fn mismatched_dims_is_none() {
        let img = ImageBuffer::filled(100, 100, &[255]).unwrap();
        assert!(detect_lane_center(&img, &CameraSpec::default()).is_none());
    }

    #[test]
    fn line_fit_drops_outlier() {
        let mut pts: Vec<(f64, f64)> = (0..10).map(|i| (4.0 + i as f64, 1.0 + 0.01 * i as f64)).collect();
        pts.push((9.5, 4.0));
        let params = DetectorParams { fit_order: 1, ..Default::default() };
        let ([a, b, c], n) = robust_fit(&pts, &params).unwrap();
        assert_eq!(n, 10);
        assert!((a - 0.96).abs() < 1e-9 && (b - 0.01).abs() < 1e-9 && c == 0.0);
    }

    #[test]
    fn parabola_recovered_exactly() {
        let pts: Vec<(f64, f64)> =
            (0..12).map(|i| 4.0 + 1.3 * i as f64).map(|f| (f, 0.2 - 0.03 * f + 0.004 * f * f)).collect();
        let ([a, b, c], n) = robust_fit(&pts, &DetectorParams::default()).unwrap();
        assert_eq!(n, 12);
        assert!((a - 0.2).abs() < 1e-9 && (b + 0.03).abs() < 1e-10 && (c - 0.004).abs() < 1e-11);
    }

    #[test]
    fn curved_lane_reports_curvature_sign() {
        // left-turning arc: the lane bends toward +L ahead
        let track = Track::new(TrackSpec::single_arc(5.0, 150.0, 40.0, 50.0)).unwrap();
        let cam = CameraSpec::default();
        let (x, y) = track.offset_point(10.0, 0.0);
        let state = VehicleState { x, y, heading: track.pose_at(10.0).2, speed: 0.0 };
        let img = render_frame(&SceneSpec::default(), &cam, &state, &track).unwrap();
        let e = detect_lane_center(&img, &cam).unwrap();
        // circle of radius R: L ≈ F²/(2R)
        assert!((e.curvature - 1.0 / 300.0).abs() < 0.001, "{e:?}");
        assert!(e.lateral_error.abs() < 0.05 && e.heading_error.abs() < 0.01, "{e:?}");
    }
}
