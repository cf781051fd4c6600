//! Feature-similarity index (luminance FSIM) between paired images, and
//! the hyperparameter choice that maximizes it over paired image sets.
//!
//! ```text
//! S_PC = (2·PC1·PC2 + T1) / (PC1² + PC2² + T1)
//! S_G  = (2·G1·G2  + T2) / (G1²  + G2²  + T2)
//! FSIM = Σ S_PC·S_G·PC_m / Σ PC_m,   PC_m = max(PC1, PC2)
//! ```

mod gradient;
mod phase;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{crop, ImageBuffer, ImageError, ImageSet, RegionOfInterest};

pub use gradient::{gradient_magnitude, scharr, GradientMap};
pub use phase::{phase_congruency, LogGaborBank, PhaseCongruencyMap, MIN_SIDE};

/// Rows between the bottom of the default FSIM band and the image bottom (bonnet).
pub const DEFAULT_ROI_BOTTOM_MARGIN: u32 = 130;
/// Height of the default FSIM band.
pub const DEFAULT_ROI_HEIGHT: u32 = 245;

#[derive(Debug, Error)]
pub enum FsimError {
    #[error("image {width}x{height} smaller than {min}x{min}")]
    TooSmall { width: u32, height: u32, min: u32 },
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("set length mismatch: {0} reference vs {1} generated images")]
    LengthMismatch(usize, usize),
    #[error("empty image set")]
    EmptySet,
    #[error("invalid FSIM parameters: {0}")]
    BadParams(String),
    #[error("no lambda candidates")]
    NoCandidates,
    #[error("candidate {0} has a non-finite mean FSIM")]
    NonFiniteScore(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// FSIM stability constants and log-Gabor bank shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsimParams {
    /// Phase-congruency similarity constant.
    pub t1: f64,
    /// Gradient similarity constant (8-bit gradient scale).
    pub t2: f64,
    pub scales: usize,
    pub orientations: usize,
    /// Wavelength of the smallest-scale filter, pixels.
    pub min_wavelength: f64,
    /// Wavelength ratio between successive scales.
    pub scale_mult: f64,
    /// Log-Gabor bandwidth: sigma over center frequency.
    pub sigma_on_f: f64,
    /// Noise threshold in standard deviations above the noise mean.
    pub noise_k: f64,
}

impl Default for FsimParams {
    fn default() -> Self {
        Self {
            t1: 0.85,
            t2: 160.0,
            scales: 4,
            orientations: 4,
            min_wavelength: 6.0,
            scale_mult: 2.0,
            sigma_on_f: 0.55,
            noise_k: 2.0,
        }
    }
}

impl FsimParams {
    pub fn validate(&self) -> Result<(), FsimError> {
        let positive = [
            ("t1", self.t1),
            ("t2", self.t2),
            ("min_wavelength", self.min_wavelength),
            ("scale_mult", self.scale_mult),
            ("sigma_on_f", self.sigma_on_f),
            ("noise_k", self.noise_k),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(FsimError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.scales < 2 || self.orientations < 2 {
            return Err(FsimError::BadParams(format!(
                "need at least 2 scales and 2 orientations, got {} and {}",
                self.scales, self.orientations
            )));
        }
        if self.sigma_on_f >= 1.0 {
            return Err(FsimError::BadParams("sigma_on_f must be below 1".into()));
        }
        Ok(())
    }
}

/// Full-width band of height 245 ending 130 rows above the bottom, clipped
/// to the image when it is shorter than that.
pub fn default_roi(width: u32, height: u32) -> RegionOfInterest {
    let band = DEFAULT_ROI_HEIGHT.min(height);
    let y0 = height.saturating_sub(DEFAULT_ROI_BOTTOM_MARGIN + band);
    RegionOfInterest::new(0, y0, width, band)
}

/// Precomputed maps of one image, for comparing it against several others.
pub struct FsimMaps {
    pc: PhaseCongruencyMap,
    grad: GradientMap,
}

/// FSIM evaluator for a fixed image size; the filter bank is built once.
pub struct FsimEvaluator {
    bank: LogGaborBank,
    params: FsimParams,
    dims: (u32, u32),
}

impl FsimEvaluator {
    pub fn new(width: u32, height: u32, params: &FsimParams) -> Result<Self, FsimError> {
        Ok(Self {
            bank: LogGaborBank::new(width, height, params)?,
            params: params.clone(),
            dims: (width, height),
        })
    }

    pub fn maps(&self, img: &ImageBuffer) -> Result<FsimMaps, FsimError> {
        if (img.width(), img.height()) != self.dims {
            return Err(FsimError::DimensionMismatch {
                a: (img.width(), img.height()),
                b: self.dims,
            });
        }
        Ok(FsimMaps {
            pc: self.bank.compute(img)?,
            grad: gradient_magnitude(img)?,
        })
    }

    pub fn score_maps(&self, a: &FsimMaps, b: &FsimMaps) -> f64 {
        let (t1, t2) = (self.params.t1, self.params.t2);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut unweighted = 0.0;
        let n = a.pc.values.len();
        for i in 0..n {
            let (p1, p2) = (a.pc.values[i], b.pc.values[i]);
            let (g1, g2) = (a.grad.values[i], b.grad.values[i]);
            let s_pc = (2.0 * p1 * p2 + t1) / (p1 * p1 + p2 * p2 + t1);
            let s_g = (2.0 * g1 * g2 + t2) / (g1 * g1 + g2 * g2 + t2);
            let pm = p1.max(p2);
            num += s_pc * s_g * pm;
            den += pm;
            unweighted += s_pc * s_g;
        }
        if den > 0.0 {
            num / den
        } else {
            // neither image has any phase structure: weight pixels uniformly
            unweighted / n as f64
        }
    }

    pub fn score(&self, a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, FsimError> {
        if a.dims().0 != b.dims().0 || a.dims().1 != b.dims().1 {
            return Err(FsimError::DimensionMismatch {
                a: (a.width(), a.height()),
                b: (b.width(), b.height()),
            });
        }
        Ok(self.score_maps(&self.maps(a)?, &self.maps(b)?))
    }
}

pub fn fsim_score(a: &ImageBuffer, b: &ImageBuffer, params: &FsimParams) -> Result<f64, FsimError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(FsimError::DimensionMismatch {
            a: (a.width(), a.height()),
            b: (b.width(), b.height()),
        });
    }
    FsimEvaluator::new(a.width(), a.height(), params)?.score(a, b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFsim {
    pub mean: f64,
    pub scores: Vec<f64>,
    pub roi: RegionOfInterest,
}

/// Mean FSIM over pairs `(reference[i], generated[i])` after cropping both to `roi`.
pub fn mean_fsim(
    reference: &ImageSet,
    generated: &ImageSet,
    roi: RegionOfInterest,
    params: &FsimParams,
) -> Result<MeanFsim, FsimError> {
    if reference.len() != generated.len() {
        return Err(FsimError::LengthMismatch(reference.len(), generated.len()));
    }
    if reference.is_empty() {
        return Err(FsimError::EmptySet);
    }
    let eval = FsimEvaluator::new(roi.width, roi.height, params)?;
    let scores = reference
        .images()
        .iter()
        .zip(generated.images())
        .map(|(r, g)| eval.score(&crop(r, roi)?, &crop(g, roi)?))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(MeanFsim { mean, scores, roi })
}

/// One hyperparameter setting and the mean FSIM its generated set achieved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCandidate {
    pub lambda_id: String,
    pub mean_fsim: f64,
}

impl LambdaCandidate {
    pub fn new(lambda_id: impl Into<String>, mean_fsim: f64) -> Self {
        Self {
            lambda_id: lambda_id.into(),
            mean_fsim,
        }
    }
}

/// Numeric order when both ids parse as numbers, text order otherwise.
fn id_order(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// The candidate with the highest mean FSIM; ties go to the smallest id.
pub fn select_lambda(candidates: &[LambdaCandidate]) -> Result<&LambdaCandidate, FsimError> {
    let mut best: Option<&LambdaCandidate> = None;
    for c in candidates {
        if !c.mean_fsim.is_finite() {
            return Err(FsimError::NonFiniteScore(c.lambda_id.clone()));
        }
        best = match best {
            None => Some(c),
            Some(b) if c.mean_fsim > b.mean_fsim => Some(c),
            Some(b) if c.mean_fsim == b.mean_fsim && id_order(&c.lambda_id, &b.lambda_id).is_lt() => {
                Some(c)
            }
            keep => keep,
        };
    }
    best.ok_or(FsimError::NoCandidates)
}
