use super::{CameraSpec, SynthError};

/// Pinhole camera over the vehicle reference point, looking along the
/// vehicle's heading. Vehicle frame: F forward, L left, U up, origin on the
/// ground. Image coordinates are continuous with pixel `(i, j)` covering
/// `[i, i+1) x [j, j+1)`, so its center sits at `(i + 0.5, j + 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    spec: CameraSpec,
    focal: f64,
    cx: f64,
    cy: f64,
    fwd: [f64; 3],
    down: [f64; 3],
}

const RIGHT: [f64; 3] = [0.0, -1.0, 0.0];

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Camera {
    pub fn new(spec: &CameraSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let focal = (spec.width as f64 / 2.0) / (spec.h_fov.to_radians() / 2.0).tan();
        // positive `tilt` looks down
        let tilt = -spec.pitch.to_radians();
        let (s, c) = tilt.sin_cos();
        Ok(Self {
            spec: spec.clone(),
            focal,
            cx: spec.width as f64 / 2.0,
            cy: spec.height as f64 / 2.0,
            fwd: [c, 0.0, -s],
            down: [-s, 0.0, -c],
        })
    }

    pub fn spec(&self) -> &CameraSpec {
        &self.spec
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn width(&self) -> u32 {
        self.spec.width
    }

    pub fn height(&self) -> u32 {
        self.spec.height
    }

    /// Ground geometry of image row coordinate `v`: forward distance `F` and
    /// the scale `k` such that column `u` sees lateral `L = -k·(u − cx)`.
    /// `None` at or above the horizon.
    pub fn row_ground(&self, v: f64) -> Option<(f64, f64)> {
        let yc = (v - self.cy) / self.focal;
        let du = self.fwd[2] + yc * self.down[2];
        if du >= -1e-12 {
            return None;
        }
        let t = self.spec.mount_height / -du;
        let f = t * (self.fwd[0] + yc * self.down[0]);
        Some((f, t / self.focal))
    }

    /// Ground point `(F, L)` seen through image point `(u, v)`.
    pub fn ground_hit(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        self.row_ground(v).map(|(f, k)| (f, -k * (u - self.cx)))
    }

    /// Image point of ground point `(F, L)`; `None` behind the camera.
    pub fn project(&self, f: f64, l: f64) -> Option<(f64, f64)> {
        let p = [f, l, -self.spec.mount_height];
        let z = dot(p, self.fwd);
        if z <= 1e-9 {
            return None;
        }
        Some((
            self.cx + self.focal * dot(p, RIGHT) / z,
            self.cy + self.focal * dot(p, self.down) / z,
        ))
    }

    /// Image row coordinate at which flat ground reaches forward distance `f`.
    pub fn row_for_distance(&self, f: f64) -> Option<f64> {
        self.project(f, 0.0).map(|(_, v)| v)
    }

    /// Row coordinate of the horizon.
    pub fn horizon(&self) -> f64 {
        // direction with zero vertical component: fwd + yc·down has U = 0
        self.cy + self.focal * (-self.fwd[2] / self.down[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::new(&CameraSpec::default()).unwrap()
    }

    #[test]
    fn projection_round_trip() {
        let c = cam();
        for &(f, l) in &[(5.0, 0.0), (12.0, 1.75), (30.0, -5.25), (3.0, -1.2)] {
            let (u, v) = c.project(f, l).unwrap();
            let (f2, l2) = c.ground_hit(u, v).unwrap();
            assert!((f2 - f).abs() < 1e-9 && (l2 - l).abs() < 1e-9, "{f},{l} -> {f2},{l2}");
        }
    }

    #[test]
    fn optical_axis_hits_ground_ahead() {
        let c = cam();
        // 4° down from 1.4 m: F = 1.4 / tan 4°
        let (f, _) = c.ground_hit(c.cx, c.cy).unwrap();
        assert!((f - 1.4 / 4f64.to_radians().tan()).abs() < 1e-9);
    }

    #[test]
    fn horizon_and_sky() {
        let c = cam();
        let h = c.horizon();
        assert!(h < c.cy);
        assert!(c.row_ground(h - 1.0).is_none());
        assert!(c.row_ground(h + 1.0).unwrap().0 > 100.0);
    }

    #[test]
    fn left_is_left_of_center() {
        let c = cam();
        let (u, _) = c.project(10.0, 1.0).unwrap();
        assert!(u < c.cx);
        assert!(c.project(-1.0, 0.0).is_none());
    }
}
