//! 8-bit raster containers, codecs, and the small set of pixel operations
//! every metric shares (luminance, cropping, blur, resampling).

use std::fmt;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageError as CodecError, ImageReader};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported bit depth in {path}: {color:?} (only 8-bit gray/RGB accepted)")]
    UnsupportedBitDepth { path: PathBuf, color: ColorType },
    #[error("corrupt stream in {path}: {detail}")]
    CorruptStream { path: PathBuf, detail: String },
    #[error("unsupported image format for {0}")]
    UnsupportedFormat(PathBuf),
    #[error("invalid image geometry: {0}")]
    InvalidGeometry(String),
    #[error("region {roi} out of bounds for {width}x{height} image")]
    RoiOutOfBounds {
        roi: RegionOfInterest,
        width: u32,
        height: u32,
    },
    #[error("no files matching {pattern:?} in {dir}")]
    EmptyMatch { dir: PathBuf, pattern: String },
    #[error("invalid glob pattern {0:?}")]
    BadPattern(String),
    #[error("heterogeneous dimensions: {first} is {expected}, {other} is {found}")]
    HeterogeneousDimensions {
        first: PathBuf,
        expected: String,
        other: PathBuf,
        found: String,
    },
    #[error("cannot encode {path}: {detail}")]
    Encode { path: PathBuf, detail: String },
}

/// Row-major, channel-interleaved 8-bit raster with 1 (gray) or 3 (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidGeometry(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidGeometry(format!(
                "channel count {channels} not in {{1,3}}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ImageError::InvalidGeometry(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a single value per channel.
    pub fn filled(width: u32, height: u32, pixel: &[u8]) -> Result<Self, ImageError> {
        let channels = pixel.len() as u8;
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * pixel.len())
            .collect();
        Self::new(width, height, channels, data)
    }

    /// Grayscale image from a function of (x, y).
    pub fn from_fn_gray(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data).expect("from_fn_gray geometry")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (u32, u32, u8) {
        (self.width, self.height, self.channels)
    }

    /// Samples of the pixel at (x, y).
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    /// Single-channel images only: the sample at (x, y).
    #[inline]
    pub fn gray(&self, x: u32, y: u32) -> u8 {
        debug_assert_eq!(self.channels, 1);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Luminance samples as `f64`, row-major.
    pub fn luminance_f64(&self) -> Vec<f64> {
        to_luminance(self).data.iter().map(|&v| v as f64).collect()
    }
}

/// Axis-aligned pixel rectangle; `(x0, y0)` is the inclusive top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RegionOfInterest {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl fmt::Display for RegionOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}x{})",
            self.x0, self.y0, self.width, self.height
        )
    }
}

impl RegionOfInterest {
    pub fn new(x0: u32, y0: u32, width: u32, height: u32) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn full(img: &ImageBuffer) -> Self {
        Self::new(0, 0, img.width, img.height)
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.width > 0
            && self.height > 0
            && self.x0 as u64 + self.width as u64 <= width as u64
            && self.y0 as u64 + self.height as u64 <= height as u64
    }
}

/// Ordered, dimension-homogeneous collection of images.
#[derive(Clone, Debug)]
pub struct ImageSet {
    pub label: String,
    images: Vec<ImageBuffer>,
    paths: Vec<PathBuf>,
}

impl ImageSet {
    /// Builds a set from in-memory images; paths are synthesized as `<label>/<index>`.
    pub fn from_images(label: impl Into<String>, images: Vec<ImageBuffer>) -> Result<Self, ImageError> {
        let label = label.into();
        let paths = (0..images.len())
            .map(|i| PathBuf::from(format!("{label}/{i:06}")))
            .collect();
        Self::from_parts(label, images, paths)
    }

    fn from_parts(
        label: String,
        images: Vec<ImageBuffer>,
        paths: Vec<PathBuf>,
    ) -> Result<Self, ImageError> {
        if let Some(first) = images.first() {
            for (img, path) in images.iter().zip(&paths).skip(1) {
                if img.dims() != first.dims() {
                    let (w, h, c) = first.dims();
                    let (w2, h2, c2) = img.dims();
                    return Err(ImageError::HeterogeneousDimensions {
                        first: paths[0].clone(),
                        expected: format!("{w}x{h}x{c}"),
                        other: path.clone(),
                        found: format!("{w2}x{h2}x{c2}"),
                    });
                }
            }
        }
        Ok(Self {
            label,
            images,
            paths,
        })
    }

    pub fn images(&self) -> &[ImageBuffer] {
        &self.images
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Splits into two sets at `mid`.
    pub fn split_at(&self, mid: usize) -> (ImageSet, ImageSet) {
        let a = ImageSet {
            label: format!("{}[..{mid}]", self.label),
            images: self.images[..mid].to_vec(),
            paths: self.paths[..mid].to_vec(),
        };
        let b = ImageSet {
            label: format!("{}[{mid}..]", self.label),
            images: self.images[mid..].to_vec(),
            paths: self.paths[mid..].to_vec(),
        };
        (a, b)
    }
}

fn decode_error(path: &Path, err: CodecError) -> ImageError {
    match err {
        CodecError::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            ImageError::CorruptStream {
                path: path.to_path_buf(),
                detail: e.to_string(),
            }
        }
        CodecError::IoError(e) => ImageError::Io {
            path: path.to_path_buf(),
            source: e,
        },
        CodecError::Unsupported(_) => ImageError::UnsupportedFormat(path.to_path_buf()),
        other => ImageError::CorruptStream {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

/// Decodes an 8-bit PNG, PGM (P5) or PPM (P6) file.
///
/// Alpha channels are dropped; 16-bit and floating-point sources are rejected.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer, ImageError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| ImageError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| ImageError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    if reader.format().is_none() {
        return Err(ImageError::UnsupportedFormat(path.to_path_buf()));
    }
    let decoded = reader.decode().map_err(|e| decode_error(path, e))?;
    let color = decoded.color();
    let (w, h) = (decoded.width(), decoded.height());
    let (channels, data) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, decoded.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, decoded.to_rgb8().into_raw()),
        _ => {
            return Err(ImageError::UnsupportedBitDepth {
                path: path.to_path_buf(),
                color,
            })
        }
    };
    ImageBuffer::new(w, h, channels, data)
}

/// Encodes by extension: `.png`, `.pgm`/`.ppm`/`.pnm` (binary PNM).
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let color = if img.channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let format = match ext.as_deref() {
        Some("png") => image::ImageFormat::Png,
        Some("pgm") | Some("ppm") | Some("pnm") => image::ImageFormat::Pnm,
        _ => return Err(ImageError::UnsupportedFormat(path.to_path_buf())),
    };
    image::save_buffer_with_format(path, &img.data, img.width, img.height, color, format).map_err(
        |e| ImageError::Encode {
            path: path.to_path_buf(),
            detail: e.to_string(),
        },
    )
}

/// BT.601 luma, rounded to nearest. Single-channel input is returned unchanged.
pub fn to_luminance(img: &ImageBuffer) -> ImageBuffer {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    ImageBuffer {
        width: img.width,
        height: img.height,
        channels: 1,
        data,
    }
}

pub fn crop(img: &ImageBuffer, roi: RegionOfInterest) -> Result<ImageBuffer, ImageError> {
    if !roi.fits(img.width, img.height) {
        return Err(ImageError::RoiOutOfBounds {
            roi,
            width: img.width,
            height: img.height,
        });
    }
    let c = img.channels as usize;
    let stride = img.width as usize * c;
    let row_len = roi.width as usize * c;
    let mut data = Vec::with_capacity(row_len * roi.height as usize);
    for y in roi.y0..roi.y0 + roi.height {
        let start = y as usize * stride + roi.x0 as usize * c;
        data.extend_from_slice(&img.data[start..start + row_len]);
    }
    Ok(ImageBuffer {
        width: roi.width,
        height: roi.height,
        channels: img.channels,
        data,
    })
}

/// Loads every file in `dir` whose name matches `pattern`, sorted by file name.
pub fn load_image_set(dir: impl AsRef<Path>, pattern: &str) -> Result<ImageSet, ImageError> {
    let dir = dir.as_ref();
    let matcher =
        glob::Pattern::new(pattern).map_err(|_| ImageError::BadPattern(pattern.to_string()))?;
    let entries = std::fs::read_dir(dir).map_err(|source| ImageError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| ImageError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if entry.path().is_file() && matcher.matches(name) {
            paths.push(entry.path());
        }
    }
    if paths.is_empty() {
        return Err(ImageError::EmptyMatch {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    let images = paths
        .iter()
        .map(load_image)
        .collect::<Result<Vec<_>, _>>()?;
    let label = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    ImageSet::from_parts(label, images, paths)
}

/// Normalized 1-D Gaussian kernel with radius `ceil(3σ)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable convolution of a single plane with replicate borders.
pub(crate) fn convolve_separable(
    plane: &[f64],
    width: usize,
    height: usize,
    kx: &[f64],
    ky: &[f64],
) -> Vec<f64> {
    let rx = kx.len() / 2;
    let ry = (ky.len() / 2) as isize;
    // horizontal: replicate-pad each row, then accumulate one tap at a time
    // over the whole row so the inner loops are branch-free
    let mut tmp = vec![0.0; plane.len()];
    let mut padded = vec![0.0; width + 2 * rx];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        padded[..rx].fill(row[0]);
        padded[rx..rx + width].copy_from_slice(row);
        padded[rx + width..].fill(row[width - 1]);
        let dst = &mut tmp[y * width..(y + 1) * width];
        for (i, &k) in kx.iter().enumerate() {
            for (d, s) in dst.iter_mut().zip(&padded[i..i + width]) {
                *d += k * s;
            }
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for (i, &k) in ky.iter().enumerate() {
            let yy = (y as isize + i as isize - ry).clamp(0, height as isize - 1) as usize;
            let src = &tmp[yy * width..(yy + 1) * width];
            let dst = &mut out[y * width..(y + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
    out
}

/// Per-channel Gaussian blur (replicate border). `sigma <= 0` is the identity.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let (w, h, c) = (img.width as usize, img.height as usize, img.channels as usize);
    let mut data = img.data.clone();
    for ch in 0..c {
        let plane: Vec<f64> = img.data.iter().skip(ch).step_by(c).map(|&v| v as f64).collect();
        let blurred = convolve_separable(&plane, w, h, &k, &k);
        for (i, v) in blurred.into_iter().enumerate() {
            data[i * c + ch] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageBuffer {
        width: img.width,
        height: img.height,
        channels: img.channels,
        data,
    }
}

/// Triangle-filter weights for resampling `src` samples onto `dst` samples.
///
/// When shrinking, the filter support widens by the scale factor so every
/// source sample contributes (the usual "bilinear" resize of imaging libraries).
fn triangle_weights(src: usize, dst: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0);
    (0..dst)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(src);
            let mut w: Vec<f64> = (lo..hi)
                .map(|j| {
                    let d = ((j as f64 + 0.5) - center).abs() / support;
                    (1.0 - d).max(0.0)
                })
                .collect();
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sum);
            (lo, w)
        })
        .collect()
}

/// Resizes a single plane with a triangle (bilinear) filter.
pub fn resize_bilinear(
    plane: &[f64],
    width: usize,
    height: usize,
    out_w: usize,
    out_h: usize,
) -> Vec<f64> {
    let wx = triangle_weights(width, out_w);
    let wy = triangle_weights(height, out_h);
    let mut tmp = vec![0.0; out_w * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for (x, (lo, w)) in wx.iter().enumerate() {
            tmp[y * out_w + x] = w.iter().zip(&row[*lo..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for (y, (lo, w)) in wy.iter().enumerate() {
        for (k, wk) in w.iter().enumerate() {
            let src = &tmp[(lo + k) * out_w..(lo + k + 1) * out_w];
            for (d, s) in out[y * out_w..(y + 1) * out_w].iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    out
}
