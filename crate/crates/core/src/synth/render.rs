use super::{Camera, CameraSpec, SceneSpec, SynthError, Track, TrackPoint, VehicleState};
use crate::image::ImageBuffer;
use crate::lane_eval::SegmentationRaster;

const SKY: [f64; 3] = [170.0, 190.0, 210.0];
const ROAD: [f64; 3] = [80.0, 80.0, 80.0];
const GRASS: [f64; 3] = [70.0, 100.0, 60.0];
const PAINT: f64 = 235.0;
/// Asphalt continues this far past the outermost marking.
const SHOULDER: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Surface {
    Sky,
    Grass,
    Road,
    Marking,
}

/// Scene geometry resolved once per frame.
struct Painter<'a> {
    scene: &'a SceneSpec,
    track: &'a Track,
    offsets: Vec<f64>,
    extent: (f64, f64),
    half_width: f64,
    period: f64,
}

impl<'a> Painter<'a> {
    fn new(scene: &'a SceneSpec, track: &'a Track) -> Self {
        let offsets = scene.line_offsets();
        Self {
            scene,
            track,
            extent: scene.road_extent(),
            offsets,
            half_width: scene.line_width / 2.0,
            period: scene.line_length + scene.line_spacing,
        }
    }

    fn classify(&self, p: TrackPoint) -> Surface {
        if p.beyond {
            return Surface::Grass;
        }
        let last = self.offsets.len() - 1;
        for (k, &o) in self.offsets.iter().enumerate() {
            if (p.lateral - o).abs() <= self.half_width {
                // road edges are always solid
                let solid = self.scene.connected_lines || k == 0 || k == last;
                if solid || p.s.rem_euclid(self.period) < self.scene.line_length {
                    return Surface::Marking;
                }
            }
        }
        if p.lateral >= self.extent.0 - SHOULDER && p.lateral <= self.extent.1 + SHOULDER {
            Surface::Road
        } else {
            Surface::Grass
        }
    }

    fn surface(&self, cam: &Camera, state: &VehicleState, (c, s): (f64, f64), u: f64, row: Option<(f64, f64)>) -> Surface {
        let Some((f, k)) = row else {
            return Surface::Sky;
        };
        if f > cam.spec().max_range {
            return Surface::Grass;
        }
        let l = -k * (u - cam.spec().width as f64 / 2.0);
        let x = state.x + f * c - l * s;
        let y = state.y + f * s + l * c;
        self.classify(self.track.project(x, y))
    }
}

fn check_guard(scene: &SceneSpec, state: &VehicleState, track: &Track) -> Result<(), SynthError> {
    let limit = 2.0 * scene.road_width;
    let p = track.project(state.x, state.y);
    if p.lateral.abs() > limit || !(state.x.is_finite() && state.y.is_finite()) {
        return Err(SynthError::OffRoad {
            offset: p.lateral,
            limit,
        });
    }
    Ok(())
}

fn paint_color(scene: &SceneSpec) -> [f64; 3] {
    let v = ROAD[0] + scene.texture_sharpness * (PAINT - ROAD[0]);
    [v, v, v]
}

/// RGB camera frame of the scene from `state`, supersampled and gamma-encoded.
pub fn render_frame(
    scene: &SceneSpec,
    cam: &CameraSpec,
    state: &VehicleState,
    track: &Track,
) -> Result<ImageBuffer, SynthError> {
    scene.validate()?;
    let camera = Camera::new(cam)?;
    check_guard(scene, state, track)?;
    let painter = Painter::new(scene, track);
    let paint = paint_color(scene);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let ss = cam.supersample as usize;
    let offsets: Vec<f64> = (0..ss).map(|i| (i as f64 + 0.5) / ss as f64).collect();
    let lut: Vec<u8> = (0..=255 * 16)
        .map(|i| {
            let v = i as f64 / (255.0 * 16.0);
            (255.0 * v.powf(cam.gamma)).round() as u8
        })
        .collect();
    let (sin, cos) = state.heading.sin_cos();
    let trig = (cos, sin);
    let horizon = camera.horizon();

    let mut data = vec![0u8; w * h * 3];
    let mut acc = vec![[0.0f64; 3]; w];
    for y in 0..h {
        acc.iter_mut().for_each(|a| *a = [0.0; 3]);
        let rows: Vec<Option<(f64, f64)>> = offsets.iter().map(|dy| camera.row_ground(y as f64 + dy)).collect();
        let all_sky = (y as f64 + 1.0) < horizon && rows.iter().all(Option::is_none);
        for (x, a) in acc.iter_mut().enumerate() {
            if all_sky {
                *a = SKY;
                continue;
            }
            for row in &rows {
                for dx in &offsets {
                    let col = match painter.surface(&camera, state, trig, x as f64 + dx, *row) {
                        Surface::Sky => SKY,
                        Surface::Grass => GRASS,
                        Surface::Road => ROAD,
                        Surface::Marking => paint,
                    };
                    for ch in 0..3 {
                        a[ch] += col[ch];
                    }
                }
            }
            let n = (ss * ss) as f64;
            a.iter_mut().for_each(|v| *v /= n);
        }
        for (x, a) in acc.iter().enumerate() {
            for ch in 0..3 {
                let i = (a[ch] * 16.0).round().clamp(0.0, 255.0 * 16.0) as usize;
                data[(y * w + x) * 3 + ch] = lut[i];
            }
        }
    }
    Ok(ImageBuffer::new(cam.width, cam.height, 3, data)?)
}

/// Marking mask sampled at pixel centers: `lane_color` on marking pixels,
/// black elsewhere.
pub fn render_segmentation(
    scene: &SceneSpec,
    cam: &CameraSpec,
    state: &VehicleState,
    track: &Track,
    lane_color: [u8; 3],
) -> Result<SegmentationRaster, SynthError> {
    scene.validate()?;
    let camera = Camera::new(cam)?;
    check_guard(scene, state, track)?;
    let painter = Painter::new(scene, track);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let (sin, cos) = state.heading.sin_cos();
    let trig = (cos, sin);
    let mut data = vec![0u8; w * h * 3];
    for y in 0..h {
        let row = camera.row_ground(y as f64 + 0.5);
        if row.is_none() {
            continue;
        }
        for x in 0..w {
            if painter.surface(&camera, state, trig, x as f64 + 0.5, row) == Surface::Marking {
                data[(y * w + x) * 3..][..3].copy_from_slice(&lane_color);
            }
        }
    }
    Ok(SegmentationRaster::new(
        ImageBuffer::new(cam.width, cam.height, 3, data)?,
        lane_color,
    )?)
}
