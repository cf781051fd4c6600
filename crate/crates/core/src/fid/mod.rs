//! Fréchet distance between Gaussian fits of image embeddings.
//!
//! ```text
//! FID = |μa − μb|² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)
//! ```
//!
//! The inner root is taken of the symmetric product `Σa^½ Σb Σa^½`, which has
//! the same trace as `(Σa Σb)^½` but can be handled by a symmetric eigensolver.

mod features;
mod file;
mod linalg;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::image::ImageSet;

pub use features::{builtin_features, thumbnail, RandomProjection, THUMB_LEN, THUMB_SIDE};
pub use file::{decode_features, encode_features, read_feature_file, write_feature_file};
pub use linalg::{sqrtm_psd, SYMMETRY_TOL};

/// Diagonal load applied when the inner square root fails numerically.
pub const REGULARIZATION_EPS: f64 = 1e-6;
/// Negative distances down to `-NEGATIVE_FLOOR` (scaled by the trace
/// magnitude) are treated as round-off and clamped to zero.
pub const NEGATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FidError {
    #[error("feature matrix needs at least 2 rows for a covariance, got {0}")]
    TooFewSamples(usize),
    #[error("feature matrix shape {n}x{d} does not match {len} values")]
    Shape { n: usize, d: usize, len: usize },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("matrix not symmetric: |m[{i},{j}] - m[{j},{i}]| = {gap:e}")]
    Asymmetric { i: usize, j: usize, gap: f64 },
    #[error("feature dimensionality {0} outside 1..=1024")]
    BadDimensionality(usize),
    #[error("empty image set")]
    EmptySet,
    #[error("need at least 2 sets for a FID table, got {0}")]
    TooFewSets(usize),
    #[error("negative distance {0:e} beyond round-off floor")]
    Negative(f64),
    #[error("bad magic (expected \"S2RF\")")]
    BadMagic,
    #[error("unknown feature file version {0}")]
    UnknownVersion(u32),
    #[error("size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `n x d` embeddings, one row per image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f32>) -> Result<Self, FidError> {
        if values.len() != n * d || d == 0 {
            return Err(FidError::Shape {
                n,
                d,
                len: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FidError::NonFinite("feature matrix"));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FidError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(FidError::Shape {
                n: rows.len(),
                d,
                len: rows.iter().map(Vec::len).sum(),
            });
        }
        let values = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(rows.len(), d, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

/// Mean vector and covariance matrix of a feature distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, FidError> {
        if !cov.is_square() {
            return Err(FidError::NotSquare(cov.nrows(), cov.ncols()));
        }
        if cov.nrows() != mean.len() {
            return Err(FidError::DimensionMismatch(mean.len(), cov.nrows()));
        }
        Ok(Self { mean, cov })
    }

    /// One-dimensional distribution with mean `mu` and variance `var`.
    pub fn scalar(mu: f64, var: f64) -> Self {
        Self {
            mean: DVector::from_element(1, mu),
            cov: DMatrix::from_element(1, 1, var),
        }
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and unbiased (n − 1) sample covariance, symmetrized.
pub fn fit_gaussian(feats: &FeatureMatrix) -> Result<GaussianStats, FidError> {
    let (n, d) = (feats.n, feats.d);
    if n < 2 {
        return Err(FidError::TooFewSamples(n));
    }
    let x = DMatrix::from_row_iterator(n, d, feats.values.iter().map(|&v| v as f64));
    let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.sum() / n as f64));
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok(GaussianStats {
        mean,
        cov: linalg::symmetrize(&cov),
    })
}

/// A Fréchet distance with its regularization audit flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrechetDistance {
    pub value: f64,
    pub regularized: bool,
}

fn trace_cross_term(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, FidError> {
    let root_a = sqrtm_psd(a)?;
    let inner = linalg::symmetrize(&(&root_a * b * &root_a));
    linalg::trace_sqrt_psd(&inner)
}

pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<FrechetDistance, FidError> {
    if a.d() != b.d() {
        return Err(FidError::DimensionMismatch(a.d(), b.d()));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let traces = a.cov.trace() + b.cov.trace();
    if !mean_term.is_finite() || !traces.is_finite() {
        return Err(FidError::NonFinite("gaussian statistics"));
    }

    let (cross, regularized) = match trace_cross_term(&a.cov, &b.cov) {
        Ok(t) if t.is_finite() => (t, false),
        Ok(_) | Err(FidError::NonFinite(_)) => {
            let load = DMatrix::<f64>::identity(a.d(), a.d()) * REGULARIZATION_EPS;
            let t = trace_cross_term(&(&a.cov + &load), &(&b.cov + &load))?;
            if !t.is_finite() {
                return Err(FidError::NonFinite("regularized covariance product"));
            }
            (t, true)
        }
        Err(e) => return Err(e),
    };

    let value = mean_term + traces - 2.0 * cross;
    let floor = NEGATIVE_FLOOR * (1.0 + traces + mean_term);
    let value = if value < 0.0 {
        if value >= -floor {
            0.0
        } else {
            return Err(FidError::Negative(value));
        }
    } else {
        value
    };
    Ok(FrechetDistance { value, regularized })
}

/// Where the features of one side come from.
#[derive(Clone, Copy, Debug)]
pub enum FeatureSource<'a> {
    /// Embedded with [`builtin_features`].
    Images(&'a ImageSet),
    /// Precomputed (for example an S2RF file from an external extractor).
    Features {
        label: &'a str,
        matrix: &'a FeatureMatrix,
    },
}

impl FeatureSource<'_> {
    fn label(&self) -> &str {
        match self {
            FeatureSource::Images(set) => &set.label,
            FeatureSource::Features { label, .. } => label,
        }
    }

    fn resolve(&self, d: usize, seed: u64) -> Result<std::borrow::Cow<'_, FeatureMatrix>, FidError> {
        match self {
            FeatureSource::Images(set) => Ok(std::borrow::Cow::Owned(builtin_features(set, d, seed)?)),
            FeatureSource::Features { matrix, .. } => Ok(std::borrow::Cow::Borrowed(*matrix)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidReport {
    pub labels: (String, String),
    pub value: f64,
    pub d: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub regularized: bool,
}

/// FID between two sets. Image sets use the built-in extractor with `(d, seed)`;
/// precomputed features are taken as-is and must agree in dimensionality.
pub fn fid_between_sets(
    a: FeatureSource<'_>,
    b: FeatureSource<'_>,
    d: usize,
    seed: u64,
) -> Result<FidReport, FidError> {
    let fa = a.resolve(d, seed)?;
    let fb = b.resolve(d, seed)?;
    fid_between_features(a.label(), &fa, b.label(), &fb)
}

pub fn fid_between_features(
    label_a: &str,
    a: &FeatureMatrix,
    label_b: &str,
    b: &FeatureMatrix,
) -> Result<FidReport, FidError> {
    if a.d() != b.d() {
        return Err(FidError::DimensionMismatch(a.d(), b.d()));
    }
    let dist = frechet_distance(&fit_gaussian(a)?, &fit_gaussian(b)?)?;
    Ok(FidReport {
        labels: (label_a.to_string(), label_b.to_string()),
        value: dist.value,
        d: a.d(),
        n_a: a.n(),
        n_b: b.n(),
        regularized: dist.regularized,
    })
}

/// Pairwise FID table; `values[i][j]` is set for `i < j`, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub regularized: bool,
}

pub fn fid_matrix(sets: &[ImageSet], d: usize, seed: u64) -> Result<FidMatrix, FidError> {
    if sets.len() < 2 {
        return Err(FidError::TooFewSets(sets.len()));
    }
    let stats = sets
        .iter()
        .map(|s| fit_gaussian(&builtin_features(s, d, seed)?))
        .collect::<Result<Vec<_>, _>>()?;
    let k = sets.len();
    let mut values = vec![vec![0.0; k]; k];
    let mut regularized = false;
    for i in 0..k {
        for j in i + 1..k {
            let dist = frechet_distance(&stats[i], &stats[j])?;
            values[i][j] = dist.value;
            regularized |= dist.regularized;
        }
    }
    Ok(FidMatrix {
        labels: sets.iter().map(|s| s.label.clone()).collect(),
        values,
        regularized,
    })
}
