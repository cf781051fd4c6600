//! Deterministic built-in embedding: luminance, 32x32 bilinear thumbnail,
//! then a fixed-seed Gaussian random projection.
//!
//! This is not a learned network. Absolute FID values computed on it are not
//! comparable with Inception-based numbers; orderings between image sets are
//! what it preserves.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{FeatureMatrix, FidError};
use crate::image::{resize_bilinear, ImageBuffer, ImageSet};

pub const THUMB_SIDE: usize = 32;
pub const THUMB_LEN: usize = THUMB_SIDE * THUMB_SIDE;

/// Column-major `THUMB_LEN x d` projection with unit-norm columns.
///
/// Columns are drawn one after another, so the first `k` columns for
/// dimensionality `d` equal the full projection for dimensionality `k`.
#[derive(Clone, Debug)]
pub struct RandomProjection {
    d: usize,
    columns: Vec<f64>,
}

impl RandomProjection {
    pub fn new(d: usize, seed: u64) -> Result<Self, FidError> {
        if d == 0 || d > THUMB_LEN {
            return Err(FidError::BadDimensionality(d));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut columns = Vec::with_capacity(THUMB_LEN * d);
        for _ in 0..d {
            let col: Vec<f64> = (0..THUMB_LEN)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            columns.extend(col.into_iter().map(|v| v / norm));
        }
        Ok(Self { d, columns })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Embeds one image: thumbnail samples in [0,1] are centered on mid-gray
    /// and projected onto each unit column.
    pub fn embed(&self, img: &ImageBuffer) -> Vec<f32> {
        let thumb = thumbnail(img);
        self.columns
            .chunks_exact(THUMB_LEN)
            .map(|col| {
                col.iter()
                    .zip(&thumb)
                    .map(|(p, x)| p * (x - 0.5))
                    .sum::<f64>() as f32
            })
            .collect()
    }
}

/// 32x32 luminance thumbnail scaled to [0, 1].
pub fn thumbnail(img: &ImageBuffer) -> Vec<f64> {
    let plane: Vec<f64> = img.luminance_f64().into_iter().map(|v| v / 255.0).collect();
    resize_bilinear(
        &plane,
        img.width() as usize,
        img.height() as usize,
        THUMB_SIDE,
        THUMB_SIDE,
    )
}

/// Embeds every image of `set` (rows in set order).
pub fn builtin_features(set: &ImageSet, d: usize, seed: u64) -> Result<FeatureMatrix, FidError> {
    if set.is_empty() {
        return Err(FidError::EmptySet);
    }
    let proj = RandomProjection::new(d, seed)?;
    let rows: Vec<Vec<f32>> = set.images().par_iter().map(|img| proj.embed(img)).collect();
    FeatureMatrix::new(set.len(), d, rows.concat())
}
