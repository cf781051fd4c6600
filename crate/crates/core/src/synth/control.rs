use super::{ControllerParams, VehicleState};

/// Pure-pursuit steering toward the point where the detected lane-center line
/// `L = lateral_error + tan(heading_error)·F` crosses the lookahead circle.
/// When the line misses the circle the closest point on the line is used.
pub fn pure_pursuit(
    lateral_error: f64,
    heading_error: f64,
    state: &VehicleState,
    params: &ControllerParams,
) -> f64 {
    let ld = params.lookahead(state.speed.max(0.0));
    let (a, b) = (lateral_error, heading_error.tan());
    let q = 1.0 + b * b;
    let disc = a * a * b * b - q * (a * a - ld * ld);
    let f = if disc >= 0.0 {
        (-a * b + disc.sqrt()) / q
    } else {
        -a * b / q
    };
    let alpha = (a + b * f).atan2(f);
    pursuit_steer(alpha, ld, params)
}

/// Pure pursuit on the detected center curve `L = a + tan(h)·F + c·F²`.
/// The target is the first crossing of the lookahead circle ahead of the
/// vehicle; with `c = 0`, or when the vehicle is already outside the circle,
/// this is [`pure_pursuit`].
pub fn pure_pursuit_curve(
    lateral_error: f64,
    heading_error: f64,
    curvature: f64,
    state: &VehicleState,
    params: &ControllerParams,
) -> f64 {
    let ld = params.lookahead(state.speed.max(0.0));
    let (a, b, c) = (lateral_error, heading_error.tan(), curvature);
    if c == 0.0 || a.abs() >= ld {
        return pure_pursuit(lateral_error, heading_error, state, params);
    }
    let lat = |f: f64| a + f * (b + f * c);
    let outside = |f: f64| f * f + lat(f).powi(2) >= ld * ld;
    // F = ld is always on or outside the circle; bracket the first crossing
    let step = ld / 16.0;
    let mut hi = step;
    while !outside(hi) {
        hi += step;
    }
    let mut lo = hi - step;
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if outside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let f = 0.5 * (lo + hi);
    pursuit_steer(lat(f).atan2(f), ld, params)
}

/// `atan(2·wheelbase·sin α / L_d)`, clamped to the steering limit.
pub fn pursuit_steer(alpha: f64, lookahead: f64, params: &ControllerParams) -> f64 {
    let steer = (2.0 * params.wheelbase * alpha.sin() / lookahead).atan();
    steer.clamp(-params.max_steer, params.max_steer)
}

/// Kinematic bicycle about the rear axle, forward Euler. Speed is held.
pub fn step_vehicle(state: &VehicleState, steer: f64, dt: f64, wheelbase: f64) -> VehicleState {
    let (s, c) = state.heading.sin_cos();
    VehicleState {
        x: state.x + state.speed * c * dt,
        y: state.y + state.speed * s * dt,
        heading: state.heading + state.speed / wheelbase * steer.tan() * dt,
        speed: state.speed,
    }
}
