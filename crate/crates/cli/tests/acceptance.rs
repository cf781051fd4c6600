//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit
//! if any fails. Runs with `cargo test --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sim2real_core::fid::{fid_between_sets, frechet_distance, sqrtm_psd, FeatureSource, GaussianStats};
use sim2real_core::fsim::{default_roi, select_lambda, FsimEvaluator, FsimParams, LambdaCandidate};
use sim2real_core::image::{crop, gaussian_blur, ImageBuffer, ImageSet};
use sim2real_core::lane_eval::{
    default_h_samples, extract_ground_truth, tusimple_accuracy, LaneFrame, ThreeRunRule, ABSENT,
};
use sim2real_core::synth::{
    episode_seed, render_segmentation, render_set, run_episode, sample_poses, CameraSpec, EpisodeSpec,
    PoseSampler, SceneSpec, SimLog, StylePreset, Track, TrackSpec, VehicleState,
};
use sim2real_core::trajectory::{
    lateral_offsets, latlon_to_utm_in_zone, restoring_verdict, section_rmse, success_rate, Centerline,
    GeoPoint, OffsetSample, RestoreFailure, RestoreSpec, SectionSpec, Trajectory, UtmZone,
};

type Check = Result<String, String>;

struct Runner {
    failed: Vec<String>,
    /// Substrings from the command line; when given, only matching criteria run.
    filters: Vec<String>,
}

impl Runner {
    /// Runs one criterion; a run over `budget` seconds fails it.
    fn run(&mut self, name: &str, budget: f64, f: impl FnOnce() -> Check) {
        if !self.filters.is_empty() && !self.filters.iter().any(|f| name.contains(f.as_str())) {
            return;
        }
        let t0 = Instant::now();
        let r = f();
        let secs = t0.elapsed().as_secs_f64();
        let r = match r {
            Ok(d) if secs > budget => Err(format!("{d}; took {secs:.1} s, budget {budget} s")),
            other => other,
        };
        match r {
            Ok(d) => println!("PASS  {name}  [{secs:.2} s]  {d}"),
            Err(d) => {
                println!("FAIL  {name}  [{secs:.2} s]  {d}");
                self.failed.push(name.to_string());
            }
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn zone() -> UtmZone {
    UtmZone::new(52, true).unwrap()
}

fn dataset_track() -> Track {
    Track::new(TrackSpec::single_arc(60.0, 150.0, 40.0, 60.0)).unwrap()
}

fn full_res() -> CameraSpec {
    CameraSpec { supersample: 1, ..CameraSpec::default() }
}

fn fid(a: &ImageSet, b: &ImageSet) -> Result<f64, String> {
    fid_between_sets(FeatureSource::Images(a), FeatureSource::Images(b), 64, 0)
        .map(|r| r.value)
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- FID

fn fid_identity(base: &ImageSet) -> Check {
    let v = fid(base, base)?;
    ensure(v < 1e-3, || format!("FID(set, set) = {v:e}"))?;
    Ok(format!("FID(set, set) = {v:.3e} over {} images", base.len()))
}

fn fid_scalar_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let (m1, m2): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let v1 = 10f64.powf(rng.random_range(-3.0..2.0));
        let v2 = 10f64.powf(rng.random_range(-3.0..2.0));
        // (μ1 − μ2)² + (σ1 − σ2)², the stable form of the scalar distance
        let want = (m1 - m2).powi(2) + (v1.sqrt() - v2.sqrt()).powi(2);
        let got = frechet_distance(&GaussianStats::scalar(m1, v1), &GaussianStats::scalar(m2, v2))
            .map_err(|e| format!("pair {i}: {e}"))?
            .value;
        let rel = (got - want).abs() / want;
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("pair {i}: got {got}, want {want}, rel {rel:e}"))?;
    }
    Ok(format!("1000 pairs, worst relative error {worst:.2e}"))
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize, cond: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let eig = DVector::from_fn(d, |i, _| {
        let frac = if d == 1 { 0.0 } else { i as f64 / (d - 1) as f64 };
        scale * cond.powf(-frac)
    });
    let a = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&a + a.transpose()) * 0.5
}

fn sqrtm_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let d = rng.random_range(1..=64);
        let cond = 10f64.powf(rng.random_range(0.0..8.0));
        let a = random_spd(&mut rng, d, cond);
        let r = sqrtm_psd(&a).map_err(|e| format!("matrix {i}: {e}"))?;
        let rel = (&r * &r - &a).norm() / a.norm();
        worst = worst.max(rel);
        ensure(rel < 1e-6, || format!("matrix {i} (d={d}, cond={cond:.1e}): residual {rel:e}"))?;
    }
    Ok(format!("100 matrices, worst residual {worst:.2e}"))
}

fn strictly_increasing(name: &str, labels: &[String], base: &ImageSet, sets: &[ImageSet]) -> Check {
    let values = sets.iter().map(|s| fid(base, s)).collect::<Result<Vec<_>, _>>()?;
    let shown: Vec<String> = labels.iter().zip(&values).map(|(l, v)| format!("{l}:{v:.4}")).collect();
    ensure(values.windows(2).all(|w| w[0] < w[1]), || format!("{name} not increasing: {}", shown.join(" ")))?;
    Ok(format!("{name} {}", shown.join(" ")))
}

fn fid_monotone(poses: &[VehicleState]) -> Check {
    let track = dataset_track();
    let cam = full_res();
    let render = |label: String, scene: SceneSpec| {
        render_set(label, &scene, &cam, &track, poses).map_err(|e| e.to_string())
    };
    let base = SceneSpec::default();
    let mut lines = Vec::new();

    let widths = [0.125, 0.15, 0.175, 0.2];
    let labels: Vec<String> = widths.iter().map(|w| format!("w={w}")).collect();
    let sets = widths
        .iter()
        .zip(&labels)
        .map(|(&w, l)| render(l.clone(), SceneSpec { line_width: w, ..base.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    lines.push(strictly_increasing("thickness", &labels, &sets[0], &sets)?);

    let sharp = [1.0, 0.6, 0.3];
    let labels: Vec<String> = sharp.iter().map(|s| format!("tex={s}")).collect();
    let sets = sharp
        .iter()
        .zip(&labels)
        .map(|(&s, l)| render(l.clone(), SceneSpec { texture_sharpness: s, ..base.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    lines.push(strictly_increasing("texture", &labels, &sets[0], &sets)?);

    let spacing = [(10.0, 10.0), (5.0, 5.0), (3.0, 3.0)];
    let labels: Vec<String> = spacing.iter().map(|(a, b)| format!("({a},{b})")).collect();
    let sets = spacing
        .iter()
        .zip(&labels)
        .map(|(&(len, gap), l)| {
            render(l.clone(), SceneSpec { line_length: len, line_spacing: gap, ..base.clone() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    lines.push(strictly_increasing("spacing", &labels, &sets[0], &sets)?);
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------- FSIM

fn fsim_properties(frames: &[ImageBuffer]) -> Check {
    let roi = default_roi(frames[0].width(), frames[0].height());
    let eval = FsimEvaluator::new(roi.width, roi.height, &FsimParams::default()).map_err(|e| e.to_string())?;
    let sigmas = [0.5, 1.0, 2.0, 4.0];
    let mut sums = [0.0; 4];
    let mut worst_identity = 0.0f64;
    for (i, frame) in frames.iter().enumerate() {
        let a = crop(frame, roi).map_err(|e| e.to_string())?;
        let ma = eval.maps(&a).map_err(|e| e.to_string())?;
        let id = eval.score_maps(&ma, &ma);
        worst_identity = worst_identity.max((id - 1.0).abs());
        ensure((id - 1.0).abs() <= 1e-9, || format!("frame {i}: FSIM(x, x) = {id}"))?;
        for (k, &s) in sigmas.iter().enumerate() {
            let blurred = crop(&gaussian_blur(frame, s), roi).map_err(|e| e.to_string())?;
            let mb = eval.maps(&blurred).map_err(|e| e.to_string())?;
            let (ab, ba) = (eval.score_maps(&ma, &mb), eval.score_maps(&mb, &ma));
            ensure(ab.to_bits() == ba.to_bits(), || format!("frame {i}, σ={s}: FSIM(a,b) = {ab}, FSIM(b,a) = {ba}"))?;
            sums[k] += ab;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / frames.len() as f64).collect();
    let shown: Vec<String> = sigmas.iter().zip(&means).map(|(s, m)| format!("σ={s}:{m:.4}")).collect();
    ensure(means.windows(2).all(|w| w[0] > w[1]), || format!("blur not monotone: {}", shown.join(" ")))?;
    Ok(format!(
        "{} frames; |FSIM(x,x)-1| <= {worst_identity:.1e}; symmetric; {}",
        frames.len(),
        shown.join(" ")
    ))
}

fn select_lambda_checks() -> Check {
    let fixture = [("1", 0.439), ("2", 0.423), ("3", 0.451), ("4", 0.403)];
    let cands: Vec<LambdaCandidate> = fixture.iter().map(|&(id, v)| LambdaCandidate::new(id, v)).collect();
    let best = select_lambda(&cands).map_err(|e| e.to_string())?;
    ensure(best.lambda_id == "3", || format!("fixture picked {}", best.lambda_id))?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..1000 {
        let n = rng.random_range(1..8);
        let cands: Vec<LambdaCandidate> = (0..n)
            .map(|i| LambdaCandidate::new((i + 1).to_string(), rng.random_range(0.0..1.0)))
            .collect();
        let (a, b) = (10f64.powf(rng.random_range(-3.0..3.0)), rng.random_range(-10.0..10.0));
        let scaled: Vec<LambdaCandidate> =
            cands.iter().map(|c| LambdaCandidate::new(c.lambda_id.clone(), a * c.mean_fsim + b)).collect();
        let (x, y) = (select_lambda(&cands).unwrap(), select_lambda(&scaled).unwrap());
        ensure(x.lambda_id == y.lambda_id, || format!("trial {trial}: {} vs {} under {a}·s+{b}", x.lambda_id, y.lambda_id))?;
    }
    Ok("fixture -> 3; argmax unchanged in 1000 affine rescalings".into())
}

// ---------------------------------------------------------------- lanes

/// Flat-ground pinhole written out independently of the renderer.
struct Pinhole {
    w: f64,
    h: f64,
    focal: f64,
    sin: f64,
    cos: f64,
    mount: f64,
    max_range: f64,
}

impl Pinhole {
    fn new(c: &CameraSpec) -> Self {
        let tilt = (-c.pitch).to_radians();
        Self {
            w: c.width as f64,
            h: c.height as f64,
            focal: (c.width as f64 / 2.0) / (c.h_fov.to_radians() / 2.0).tan(),
            sin: tilt.sin(),
            cos: tilt.cos(),
            mount: c.mount_height,
            max_range: c.max_range,
        }
    }

    /// Forward ground distance seen along image row coordinate `v`.
    fn distance(&self, v: f64) -> Option<f64> {
        let dv = v - self.h / 2.0;
        let den = dv * self.cos + self.focal * self.sin;
        if den <= 0.0 {
            return None;
        }
        let f = self.mount * (self.focal * self.cos - dv * self.sin) / den;
        (f > 0.0 && f <= self.max_range).then_some(f)
    }

    fn column(&self, f: f64, l: f64) -> f64 {
        self.w / 2.0 - self.focal * l / (f * self.cos + self.mount * self.sin)
    }
}

#[derive(Clone, Copy)]
enum Road {
    /// Along +x from the origin.
    Straight,
    /// Circle around `(cx, cy)`; `sigma` is +1 for a left turn.
    Arc { cx: f64, cy: f64, radius: f64, sigma: f64 },
}

impl Road {
    /// Vehicle-frame lateral coordinate at forward distance `f` of the curve
    /// lying `o` metres left of the road center.
    fn lateral(&self, st: &VehicleState, f: f64, o: f64) -> Option<f64> {
        let (s, c) = st.heading.sin_cos();
        let (px, py) = (st.x + f * c, st.y + f * s);
        match *self {
            Road::Straight => Some((o - py) / c),
            Road::Arc { cx, cy, radius, sigma } => {
                let r = radius - sigma * o;
                let (dx, dy) = (px - cx, py - cy);
                let b = -dx * s + dy * c;
                let disc = b * b - (dx * dx + dy * dy) + r * r;
                if disc < 0.0 {
                    return None;
                }
                let (l1, l2) = (-b - disc.sqrt(), -b + disc.sqrt());
                Some(if l1.abs() < l2.abs() { l1 } else { l2 })
            }
        }
    }
}

struct RowTruth {
    /// Pixel-coordinate center and extent of each line (left to right) that
    /// covers at least one pixel center.
    visible: Vec<(usize, f64)>,
    ambiguous: bool,
}

fn row_truth(cam: &Pinhole, scene: &SceneSpec, road: Road, st: &VehicleState, row: u32) -> RowTruth {
    let mut visible = Vec::new();
    let mut ambiguous = false;
    let Some(f) = cam.distance(row as f64 + 0.5) else {
        return RowTruth { visible, ambiguous };
    };
    let hw = scene.line_width / 2.0;
    for (k, &o) in scene.line_offsets().iter().enumerate() {
        let edges = [o - hw, o, o + hw].map(|e| road.lateral(st, f, e).map(|l| cam.column(f, l)));
        let [Some(a), Some(mid), Some(b)] = edges else {
            ambiguous = true;
            continue;
        };
        let (lo, hi) = (a.min(b), a.max(b));
        if (lo < 1.0 && hi > -1.0) || (hi > cam.w - 1.0 && lo < cam.w + 1.0) {
            ambiguous = true;
        }
        let covered = (0..cam.w as u32).any(|i| (lo..=hi).contains(&(i as f64 + 0.5)));
        if covered {
            visible.push((k + 1, mid));
        }
    }
    RowTruth { visible, ambiguous }
}

fn algorithm_oracle() -> Check {
    let scene = SceneSpec { connected_lines: true, ..SceneSpec::default() };
    let spec = CameraSpec { max_range: 40.0, ..CameraSpec::default() };
    let cam = Pinhole::new(&spec);
    let h_samples = default_h_samples(spec.height);
    let straight = Track::new(TrackSpec::straight(200.0)).unwrap();
    let (lead, radius) = (20.0, 150.0);
    let left = Track::new(TrackSpec::single_arc(lead, radius, 60.0, 20.0)).unwrap();
    let right = Track::new(TrackSpec::single_arc(lead, radius, -60.0, 20.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut branch = [0usize; 4]; // 2 runs, 3 runs (1,2,3), 3 runs (2,3,4), 4 runs
    let (mut points, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
    for n in 0..50 {
        let off: f64 = rng.random_range(-1.2..1.2);
        let dh: f64 = rng.random_range(-0.03..0.03);
        let (track, road, st) = match n % 3 {
            0 => {
                let x = rng.random_range(10.0..100.0);
                (&straight, Road::Straight, VehicleState { x, y: off, heading: dh, speed: 0.0 })
            }
            k => {
                let sigma = if k == 1 { 1.0 } else { -1.0 };
                let theta = rng.random_range(5.0..90.0) / radius;
                let (cx, cy) = (lead, sigma * radius);
                let r = radius - sigma * off;
                let (x, y) = (cx + r * theta.sin(), cy - sigma * r * theta.cos());
                let st = VehicleState { x, y, heading: sigma * theta + dh, speed: 0.0 };
                (if k == 1 { &left } else { &right }, Road::Arc { cx, cy, radius, sigma }, st)
            }
        };
        let raster = render_segmentation(&scene, &spec, &st, track, [255, 255, 255]).map_err(|e| e.to_string())?;
        let gt = extract_ground_truth(format!("r{n}"), &raster, &h_samples, ThreeRunRule::Pseudocode);
        for (i, &row) in h_samples.iter().enumerate() {
            let truth = row_truth(&cam, &scene, road, &st, row);
            if truth.ambiguous {
                skipped += 1;
                continue;
            }
            let ids: Vec<usize> = truth.visible.iter().map(|v| v.0).collect();
            let got: Vec<usize> = (1..=4).filter(|&id| gt.point(id, i).is_some()).collect();
            let expected: Vec<usize> = if (2..=4).contains(&ids.len()) { ids.clone() } else { Vec::new() };
            ensure(got == expected, || format!("raster {n} row {row}: lines {got:?}, analytic {ids:?}"))?;
            match ids.as_slice() {
                [_, _] => branch[0] += 1,
                [1, 2, 3] => branch[1] += 1,
                [2, 3, 4] => branch[2] += 1,
                [_, _, _, _] => branch[3] += 1,
                _ => {}
            }
            for &(id, u) in truth.visible.iter().filter(|_| !expected.is_empty()) {
                let x = gt.point(id, i).expect("checked above") as f64 + 0.5;
                let err = (x - u).abs();
                worst = worst.max(err);
                points += 1;
                ensure(err <= 1.0, || format!("raster {n} row {row} line {id}: x {x} vs analytic {u:.2}"))?;
            }
        }
    }
    ensure(branch.iter().all(|&c| c > 0), || format!("branch coverage {branch:?}"))?;
    Ok(format!(
        "{points} points, worst |dx| {worst:.2} px; rows by branch 2/3a/3b/4 = {branch:?}; {skipped} edge rows skipped"
    ))
}

fn frame(id: &str, h: &[u32], lanes: Vec<Vec<i32>>) -> LaneFrame {
    LaneFrame { frame_id: id.into(), h_samples: h.to_vec(), lanes }
}

fn tusimple_checks() -> Check {
    let h = [300, 310];
    let gt = vec![frame("a", &h, vec![vec![100, 110], vec![400, 390]])];
    let perfect = tusimple_accuracy(&gt, &gt, 20.0).map_err(|e| e.to_string())?.accuracy;
    ensure(perfect == 1.0, || format!("perfect = {perfect}"))?;
    let pred = vec![frame("a", &h, vec![vec![105, 135], vec![400, 392]])];
    let fixture = tusimple_accuracy(&pred, &gt, 20.0).map_err(|e| e.to_string())?.accuracy;
    ensure(fixture == 0.75, || format!("3-of-4 fixture = {fixture}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let hs: Vec<u32> = (250..610).step_by(10).collect();
    let mut gts = Vec::new();
    let mut preds = Vec::new();
    for n in 0..40 {
        let lanes: Vec<Vec<i32>> =
            (0..4).map(|k| hs.iter().map(|_| 100 + 150 * k + rng.random_range(0..50)).collect()).collect();
        let noisy = lanes
            .iter()
            .map(|l| l.iter().map(|&x| if rng.random_bool(0.1) { ABSENT } else { x + rng.random_range(-60..=60) }).collect())
            .collect();
        gts.push(frame(&format!("f{n}"), &hs, lanes));
        preds.push(frame(&format!("f{n}"), &hs, noisy));
    }
    let accs = [5.0, 10.0, 20.0, 40.0]
        .iter()
        .map(|&t| tusimple_accuracy(&preds, &gts, t).map(|r| r.accuracy))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    ensure(accs.windows(2).all(|w| w[0] <= w[1]), || format!("not monotone: {accs:?}"))?;
    Ok(format!("perfect 1.0, fixture 0.75, thresholds 5/10/20/40 -> {accs:.3?}"))
}

// ---------------------------------------------------------------- trajectories

fn trajectory_checks() -> Check {
    let z = zone();
    let pts: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let a = i as f64 * 0.01;
            (300000.0 + 50.0 * a.sin() * 3.0, 4000000.0 + 40.0 * a)
        })
        .collect();
    let c = Centerline::from_planar(z, pts.clone()).map_err(|e| e.to_string())?;
    let all = SectionSpec { name: "all".into(), start_s: 0.0, end_s: c.length() };
    let on = Trajectory::from_planar("on", z, pts.iter().enumerate().map(|(i, &(e, n))| (i as f64, e, n)))
        .map_err(|e| e.to_string())?;
    let r = section_rmse(&on, &c, &all).map_err(|e| e.to_string())?;
    ensure(r.rmse_x == 0.0 && r.rmse_y == 0.0, || format!("on-centerline RMSE ({}, {})", r.rmse_x, r.rmse_y))?;

    let line = Centerline::from_planar(z, [(500000.0, 0.0), (500100.0, 0.0)]).map_err(|e| e.to_string())?;
    let sec = SectionSpec { name: "all".into(), start_s: 0.0, end_s: 100.0 };
    let shifted = Trajectory::from_planar("shift", z, (0..=20).map(|i| (i as f64, 500000.0 + 5.0 * i as f64, 0.5)))
        .map_err(|e| e.to_string())?;
    let r = section_rmse(&shifted, &line, &sec).map_err(|e| e.to_string())?;
    ensure(r.rmse_x.abs() < 1e-12 && (r.rmse_y - 0.5).abs() < 1e-12, || {
        format!("constant offset RMSE ({}, {})", r.rmse_x, r.rmse_y)
    })?;

    let mut worst = 0.0f64;
    for number in [1u8, 17, 31, 52, 60] {
        for north in [true, false] {
            let zn = UtmZone::new(number, north).unwrap();
            for lat in (0..=80).step_by(5) {
                let lat = if north { lat as f64 } else { -(lat as f64) };
                let p = latlon_to_utm_in_zone(GeoPoint { lat, lon: zn.central_meridian() }, zn)
                    .map_err(|e| e.to_string())?;
                worst = worst.max((p.easting - 500000.0).abs());
            }
        }
    }
    ensure(worst <= 0.01, || format!("central meridian easting off by {worst} m"))?;

    let spec = RestoreSpec { return_band: 0.2, t_max: 30.0, stable_window: 5.0, stable_band: 0.3 };
    let series = |f: &dyn Fn(f64) -> f64| -> Vec<OffsetSample> {
        (0..=400).map(|i| i as f64 * 0.1).map(|t| OffsetSample { t, s: t, offset: f(t) }).collect()
    };
    let cases: [(&str, Vec<OffsetSample>, bool, Option<f64>, Option<RestoreFailure>); 4] = [
        ("immediate", series(&|_| 0.05), true, Some(0.0), None),
        ("never", series(&|_| 0.9), false, None, Some(RestoreFailure::NeverReturned)),
        ("late", series(&|t| if t < 12.0 { 0.9 } else { 0.1 }), true, Some(12.0), None),
        ("after t_max", series(&|t| if t < 35.0 { 0.9 } else { 0.0 }), false, None, Some(RestoreFailure::NeverReturned)),
    ];
    for (name, offs, success, time, failure) in cases {
        let v = restoring_verdict(&offs, &spec).map_err(|e| e.to_string())?;
        let time_ok = match (v.return_time, time) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-9,
            (a, b) => a.is_none() && b.is_none(),
        };
        ensure(v.success == success && time_ok && v.failure == failure, || format!("{name}: {v:?}"))?;
    }
    Ok(format!("centerline RMSE (0,0); offset fixture (0,0.5); meridian |Δe| <= {worst:.1e} m; 4 restore cases"))
}

// ---------------------------------------------------------------- closed loop

const LANE_BAND: f64 = 0.85;

fn closed_loop() -> Check {
    let track = Track::new(TrackSpec::single_arc(30.0, 150.0, 40.0, 40.0)).unwrap();
    let centerline = track.centerline(zone(), 0.5).map_err(|e| e.to_string())?;
    let arc = track.arc_sections().remove(0);
    let arc = SectionSpec { end_s: arc.end_s.min(centerline.length()), ..arc };
    let camera = CameraSpec::default().binned(2);
    let camera = CameraSpec { supersample: 1, ..camera };
    let episode = |style: StylePreset, offset: f64, i: u64| -> Result<SimLog, String> {
        let spec = EpisodeSpec {
            style,
            camera: camera.clone(),
            init_lateral_offset: offset,
            seed: episode_seed(2024, i),
            ..EpisodeSpec::default()
        };
        run_episode(&track, &spec).map_err(|e| e.to_string())
    };
    let arc_rmse = |log: &SimLog| -> Result<Option<f64>, String> {
        let traj = log.trajectory(zone()).map_err(|e| e.to_string())?;
        Ok(section_rmse(&traj, &centerline, &arc).ok().map(|r| r.rmse_x.hypot(r.rmse_y)))
    };
    let mut summary = Vec::new();
    let mut stats = Vec::new();
    for style in [StylePreset::crisp(), StylePreset::soft()] {
        let (mut rmse, mut kept, mut missing) = (Vec::new(), Vec::new(), 0);
        for i in 0..10 {
            let log = episode(style.clone(), 0.0, i)?;
            match arc_rmse(&log)? {
                Some(r) => rmse.push(r),
                None => missing += 1,
            }
            kept.push(log.lane_kept(LANE_BAND));
        }
        let mean = if rmse.is_empty() { f64::INFINITY } else { rmse.iter().sum::<f64>() / rmse.len() as f64 };
        let rate = success_rate(&kept).map_err(|e| e.to_string())?;
        summary.push(format!("{}: arc RMSE {mean:.4} m, success {rate}%, {missing} never reached the arc", style.name));
        stats.push((mean, rate));
    }
    let mut restored = 0;
    for i in 0..10 {
        let log = episode(StylePreset::crisp(), 0.9, i)?;
        let traj = log.trajectory(zone()).map_err(|e| e.to_string())?;
        let offs = lateral_offsets(&traj, &centerline).map_err(|e| e.to_string())?;
        if restoring_verdict(&offs, &RestoreSpec::default()).map_err(|e| e.to_string())?.success {
            restored += 1;
        }
    }
    summary.push(format!("crisp restore from +0.9 m: {restored}/10"));
    let text = summary.join("; ");
    let (crisp, soft) = (stats[0], stats[1]);
    ensure(soft.0 > crisp.0, || format!("soft RMSE not above crisp: {text}"))?;
    ensure(restored >= 9, || format!("too few restores: {text}"))?;
    ensure(crisp.1 >= soft.1, || format!("success rate order: {text}"))?;
    Ok(text)
}

// ---------------------------------------------------------------- CLI determinism

fn sim2real(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sim2real")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("sim2real {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism(dir: &Path) -> Check {
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        r#"
[simulate]
seeds = 2
init_offsets = [0.0, 0.9]
track = { segments = [{ type = "straight", length = 30.0 }, { type = "arc", radius = 150.0, angle_deg = 10.0 }, { type = "straight", length = 30.0 }] }
episode = { camera = { width = 404, height = 310, supersample = 1 } }

[synth]
frames = 30
camera = { width = 202, height = 155, supersample = 1 }
grid = { line_width = [0.125, 0.2] }
"#,
    )
    .map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().unwrap();
    let a = sim2real(&["simulate", "--config", cfg])?;
    let b = sim2real(&["simulate", "--config", cfg])?;
    ensure(a == b, || "simulate reports differ".into())?;
    let out = dir.join("sets");
    let out = out.to_str().unwrap();
    sim2real(&["synth", "--config", cfg, "--out-dir", out])?;
    let (s0, s1) = (format!("{out}/set00"), format!("{out}/set01"));
    let args = ["fid", "--a", &s0, "--b", &s1];
    let (x, y) = (sim2real(&args)?, sim2real(&args)?);
    ensure(x == y, || "fid reports differ".into())?;
    Ok(format!("simulate report {} bytes, fid report {} bytes, both identical across runs", a.len(), x.len()))
}

fn main() {
    let filters = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut runner = Runner { failed: Vec::new(), filters };
    let t0 = Instant::now();

    let track = dataset_track();
    let poses = sample_poses(&track, 200, 7, &PoseSampler::default()).expect("poses");
    let base = render_set("base", &SceneSpec::default(), &full_res(), &track, &poses).expect("render");

    runner.run("fid identity (200 images, d=64)", 10.0, || fid_identity(&base));
    runner.run("fid scalar closed form", 1.0, fid_scalar_oracle);
    runner.run("matrix square root residual", 5.0, sqrtm_oracle);
    runner.run("fid monotone in thickness, texture, spacing", 180.0, || fid_monotone(&poses));
    let frames: Vec<ImageBuffer> = base.images()[..20].to_vec();
    runner.run("fsim identity, symmetry, blur monotonicity", 60.0, || fsim_properties(&frames));
    runner.run("select_lambda fixture and affine invariance", 1.0, select_lambda_checks);
    runner.run("lane extraction against analytic projection", 30.0, algorithm_oracle);
    runner.run("tusimple accuracy fixtures and threshold order", 5.0, tusimple_checks);
    runner.run("trajectory rmse, utm meridian, restore verdicts", 5.0, trajectory_checks);
    runner.run("closed-loop style gap and restoring", 300.0, closed_loop);
    let tmp = tempfile::tempdir().expect("tempdir");
    runner.run("simulate and fid reports byte-identical", f64::INFINITY, || determinism(tmp.path()));

    println!("{} criteria failed; total {:.1} s", runner.failed.len(), t0.elapsed().as_secs_f64());
    if !runner.failed.is_empty() {
        std::process::exit(1);
    }
}
