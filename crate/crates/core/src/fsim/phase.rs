//! Phase congruency from a log-Gabor filter bank evaluated in the frequency
//! domain, with per-orientation noise compensation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FsimError, FsimParams};
use crate::image::{to_luminance, ImageBuffer};

/// Smallest side accepted by [`phase_congruency`].
pub const MIN_SIDE: u32 = 16;

const EPSILON: f64 = 1e-4;
const LOWPASS_CUTOFF: f64 = 0.45;
const LOWPASS_ORDER: i32 = 15;
/// Ratio of angular spacing to the angular Gaussian's sigma.
const D_THETA_ON_SIGMA: f64 = 1.2;
/// Empirical rescaling of the noise threshold.
const NOISE_RESCALE: f64 = 1.7;

/// Per-pixel phase congruency in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCongruencyMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl PhaseCongruencyMap {
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            col_fwd: planner.plan_fft_forward(rows),
            row_inv: planner.plan_fft_inverse(cols),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    /// Cache-blocked transpose of a `rows x cols` buffer into `out`.
    fn transpose(buf: &[Complex<f64>], out: &mut [Complex<f64>], rows: usize, cols: usize) {
        const TILE: usize = 32;
        for r0 in (0..rows).step_by(TILE) {
            for c0 in (0..cols).step_by(TILE) {
                for r in r0..(r0 + TILE).min(rows) {
                    for c in c0..(c0 + TILE).min(cols) {
                        out[c * rows + r] = buf[r * cols + c];
                    }
                }
            }
        }
    }

    fn run(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let len = row_fft.get_inplace_scratch_len().max(col_fft.get_inplace_scratch_len());
        let mut scratch = vec![Complex::default(); len];
        row_fft.process_with_scratch(buf, &mut scratch);
        let mut t = vec![Complex::default(); buf.len()];
        Self::transpose(buf, &mut t, self.rows, self.cols);
        col_fft.process_with_scratch(&mut t, &mut scratch);
        Self::transpose(&t, buf, self.cols, self.rows);
        if inverse {
            let scale = 1.0 / (self.rows * self.cols) as f64;
            buf.iter_mut().for_each(|v| *v *= scale);
        }
    }

    fn forward(&self, buf: &mut [Complex<f64>]) {
        self.run(buf, false);
    }

    /// Inverse transform including the 1/(rows*cols) normalization.
    fn inverse(&self, buf: &mut [Complex<f64>]) {
        self.run(buf, true);
    }
}

/// Frequency coordinate of FFT bin `k` of `n`, in the layout where bin 0 is DC.
fn freq(k: usize, n: usize) -> f64 {
    let half = n.div_ceil(2);
    let signed = if k < half { k as f64 } else { k as f64 - n as f64 };
    let denom = if n % 2 == 0 { n } else { n - 1 };
    signed / denom as f64
}

/// Reflect index `i` (possibly outside `0..n`) back into range, edge sample repeated.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Smallest length `>= n` with no prime factor above 5.
fn smooth_len(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("unbounded search")
}

/// Log-Gabor bank for one image size, reusable across images.
///
/// Images are mirror-padded by the largest filter wavelength before
/// filtering so that the FFT's implicit tiling never places a seam within
/// filter reach of the image.
pub struct LogGaborBank {
    width: usize,
    height: usize,
    pad: usize,
    /// Padded dimensions the filters are built for.
    cols: usize,
    rows: usize,
    params: FsimParams,
    fft: Fft2,
    /// Radial filters per scale, including the low-pass window.
    radial: Vec<Vec<f64>>,
    /// Angular spread per orientation.
    spread: Vec<Vec<f64>>,
    /// Noise-model sums: Σ_s Σ_px a_s², and Σ_{s<t} Σ_px a_s a_t
    /// where a_s is the spatial-domain radial filter scaled by sqrt(rows*cols).
    sum_an2: f64,
    sum_ai_aj: f64,
}

impl LogGaborBank {
    pub fn new(width: u32, height: u32, params: &FsimParams) -> Result<Self, FsimError> {
        params.validate()?;
        if width.min(height) < MIN_SIDE {
            return Err(FsimError::TooSmall {
                width,
                height,
                min: MIN_SIDE,
            });
        }
        let max_wavelength =
            params.min_wavelength * params.scale_mult.powi(params.scales as i32 - 1);
        let pad = max_wavelength.ceil() as usize;
        // the far side takes any extra padding needed for a fast FFT length
        let (cols, rows) = (
            smooth_len(width as usize + 2 * pad),
            smooth_len(height as usize + 2 * pad),
        );
        let fft = Fft2::new(rows, cols);
        let n = rows * cols;

        let mut radius = vec![0.0; n];
        let mut theta = vec![0.0; n];
        for r in 0..rows {
            let y = freq(r, rows);
            for c in 0..cols {
                let x = freq(c, cols);
                radius[r * cols + c] = (x * x + y * y).sqrt();
                theta[r * cols + c] = (-y).atan2(x);
            }
        }
        radius[0] = 1.0;

        let lowpass: Vec<f64> = radius
            .iter()
            .map(|&rad| 1.0 / (1.0 + (rad / LOWPASS_CUTOFF).powi(2 * LOWPASS_ORDER)))
            .collect();
        let log_sigma_sq = 2.0 * params.sigma_on_f.ln().powi(2);
        let radial: Vec<Vec<f64>> = (0..params.scales)
            .map(|s| {
                let wavelength = params.min_wavelength * params.scale_mult.powi(s as i32);
                let fo = 1.0 / wavelength;
                let mut g: Vec<f64> = radius
                    .iter()
                    .zip(&lowpass)
                    .map(|(&rad, &lp)| (-(rad / fo).ln().powi(2) / log_sigma_sq).exp() * lp)
                    .collect();
                g[0] = 0.0;
                g
            })
            .collect();

        let theta_sigma = PI / params.orientations as f64 / D_THETA_ON_SIGMA;
        let spread = (0..params.orientations)
            .map(|o| {
                let angle = o as f64 * PI / params.orientations as f64;
                let (sa, ca) = angle.sin_cos();
                theta
                    .iter()
                    .map(|&t| {
                        let (st, ct) = t.sin_cos();
                        let ds = st * ca - ct * sa;
                        let dc = ct * ca + st * sa;
                        let dtheta = ds.atan2(dc).abs();
                        (-dtheta * dtheta / (2.0 * theta_sigma * theta_sigma)).exp()
                    })
                    .collect()
            })
            .collect();

        // spatial-domain radial filters for the noise model
        let root_n = (n as f64).sqrt();
        let spatial: Vec<Vec<f64>> = radial
            .iter()
            .map(|g| {
                let mut buf: Vec<Complex<f64>> = g.iter().map(|&v| Complex::new(v, 0.0)).collect();
                fft.inverse(&mut buf);
                buf.iter().map(|v| v.re * root_n).collect()
            })
            .collect();
        let sum_an2 = spatial.iter().flatten().map(|v| v * v).sum();
        let mut sum_ai_aj = 0.0;
        for i in 0..spatial.len() {
            for j in i + 1..spatial.len() {
                sum_ai_aj += spatial[i]
                    .iter()
                    .zip(&spatial[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        }

        Ok(Self {
            width: width as usize,
            height: height as usize,
            pad,
            cols,
            rows,
            params: params.clone(),
            fft,
            radial,
            spread,
            sum_an2,
            sum_ai_aj,
        })
    }

    /// Spectrum of the periodic component of `plane` (periodic + smooth
    /// decomposition), which removes the cross artifacts that image borders
    /// otherwise inject into every FFT-domain filter.
    fn periodic_spectrum(&self, plane: &[f64]) -> Vec<Complex<f64>> {
        let (rows, cols) = (self.rows, self.cols);
        let mut boundary = vec![0.0; rows * cols];
        for c in 0..cols {
            let d = plane[(rows - 1) * cols + c] - plane[c];
            boundary[c] += d;
            boundary[(rows - 1) * cols + c] -= d;
        }
        for r in 0..rows {
            let d = plane[r * cols + cols - 1] - plane[r * cols];
            boundary[r * cols] += d;
            boundary[r * cols + cols - 1] -= d;
        }
        let mut smooth: Vec<Complex<f64>> =
            boundary.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.forward(&mut smooth);
        let mut spectrum: Vec<Complex<f64>> = plane.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.forward(&mut spectrum);
        let cos_x: Vec<f64> = (0..cols).map(|c| (2.0 * PI * c as f64 / cols as f64).cos()).collect();
        for r in 0..rows {
            let cy = (2.0 * PI * r as f64 / rows as f64).cos();
            for (c, &cx) in cos_x.iter().enumerate() {
                if r == 0 && c == 0 {
                    continue;
                }
                let denom = 2.0 * (2.0 - cx - cy);
                spectrum[r * cols + c] -= smooth[r * cols + c] / denom;
            }
        }
        spectrum
    }

    pub fn compute(&self, img: &ImageBuffer) -> Result<PhaseCongruencyMap, FsimError> {
        if img.width() as usize != self.width || img.height() as usize != self.height {
            return Err(FsimError::DimensionMismatch {
                a: (img.width(), img.height()),
                b: (self.width as u32, self.height as u32),
            });
        }
        let lum = to_luminance(img);
        let pad = self.pad as isize;
        let mut plane = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows as isize {
            let y = reflect(r - pad, self.height);
            for c in 0..self.cols as isize {
                let x = reflect(c - pad, self.width);
                plane.push(lum.gray(x as u32, y as u32) as f64);
            }
        }
        Ok(self.compute_plane(&plane))
    }

    fn compute_plane(&self, plane: &[f64]) -> PhaseCongruencyMap {
        let n = self.rows * self.cols;
        let spectrum = self.periodic_spectrum(plane);
        let k = self.params.noise_k;

        let mut energy_all = vec![0.0; n];
        let mut amplitude_all = vec![0.0; n];

        for spread in &self.spread {
            let mut sum_e = vec![0.0; n];
            let mut sum_o = vec![0.0; n];
            let mut sum_an = vec![0.0; n];
            let mut responses = Vec::with_capacity(self.radial.len());
            let mut em_n = 0.0;
            for (s, radial) in self.radial.iter().enumerate() {
                let mut eo: Vec<Complex<f64>> = spectrum
                    .iter()
                    .zip(radial)
                    .zip(spread)
                    .map(|((z, g), a)| z * (g * a))
                    .collect();
                if s == 0 {
                    em_n = radial
                        .iter()
                        .zip(spread)
                        .map(|(g, a)| (g * a) * (g * a))
                        .sum();
                }
                self.fft.inverse(&mut eo);
                for (i, v) in eo.iter().enumerate() {
                    sum_e[i] += v.re;
                    sum_o[i] += v.im;
                    // sqrt of the square, not `norm` (hypot is several times slower)
                    sum_an[i] += v.norm_sqr().sqrt();
                }
                responses.push(eo);
            }

            let mut energy = vec![0.0; n];
            for i in 0..n {
                let x_energy = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + EPSILON;
                let (mean_e, mean_o) = (sum_e[i] / x_energy, sum_o[i] / x_energy);
                energy[i] = responses
                    .iter()
                    .map(|eo| {
                        let (e, o) = (eo[i].re, eo[i].im);
                        e * mean_e + o * mean_o - (e * mean_o - o * mean_e).abs()
                    })
                    .sum();
            }

            // noise statistics from the smallest scale, assumed Rayleigh-distributed
            let mut mag2: Vec<f64> = responses[0].iter().map(|v| v.norm_sqr()).collect();
            let mid = mag2.len() / 2;
            let median = *mag2
                .select_nth_unstable_by(mid, |a, b| a.total_cmp(b))
                .1;
            let mean_e2n = -median / 0.5f64.ln();
            let noise_power = if em_n > 0.0 { mean_e2n / em_n } else { 0.0 };
            let noise_energy2 = 2.0 * noise_power * self.sum_an2 + 4.0 * noise_power * self.sum_ai_aj;
            let tau = (noise_energy2.max(0.0) / 2.0).sqrt();
            let noise_mean = tau * (PI / 2.0).sqrt();
            let noise_sigma = ((2.0 - PI / 2.0) * tau * tau).sqrt();
            let threshold = (noise_mean + k * noise_sigma) / NOISE_RESCALE;

            for i in 0..n {
                energy_all[i] += (energy[i] - threshold).max(0.0);
                amplitude_all[i] += sum_an[i];
            }
        }

        let mut values = Vec::with_capacity(self.width * self.height);
        for r in self.pad..self.pad + self.height {
            for c in self.pad..self.pad + self.width {
                let i = r * self.cols + c;
                values.push((energy_all[i] / (amplitude_all[i] + EPSILON)).clamp(0.0, 1.0));
            }
        }
        PhaseCongruencyMap {
            width: self.width as u32,
            height: self.height as u32,
            values,
        }
    }
}

/// Phase congruency of a single image (luminance is taken for RGB input).
pub fn phase_congruency(img: &ImageBuffer, params: &FsimParams) -> Result<PhaseCongruencyMap, FsimError> {
    LogGaborBank::new(img.width(), img.height(), params)?.compute(img)
}
