use super::FsimError;
use crate::image::{to_luminance, ImageBuffer};

/// Per-pixel gradient magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl GradientMap {
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Horizontal and vertical Scharr responses (kernel scaled by 1/16), replicate border.
pub fn scharr(img: &ImageBuffer) -> Result<(Vec<f64>, Vec<f64>), FsimError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(FsimError::TooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let lum = to_luminance(img);
    let (w, h) = (w as isize, h as isize);
    let px = |x: isize, y: isize| lum.gray(x.clamp(0, w - 1) as u32, y.clamp(0, h - 1) as u32) as f64;
    let mut gx = Vec::with_capacity((w * h) as usize);
    let mut gy = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let dx = 3.0 * (px(x + 1, y - 1) - px(x - 1, y - 1))
                + 10.0 * (px(x + 1, y) - px(x - 1, y))
                + 3.0 * (px(x + 1, y + 1) - px(x - 1, y + 1));
            let dy = 3.0 * (px(x - 1, y + 1) - px(x - 1, y - 1))
                + 10.0 * (px(x, y + 1) - px(x, y - 1))
                + 3.0 * (px(x + 1, y + 1) - px(x + 1, y - 1));
            gx.push(dx / 16.0);
            gy.push(dy / 16.0);
        }
    }
    Ok((gx, gy))
}

pub fn gradient_magnitude(img: &ImageBuffer) -> Result<GradientMap, FsimError> {
    let (gx, gy) = scharr(img)?;
    let values = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    Ok(GradientMap {
        width: img.width(),
        height: img.height(),
        values,
    })
}
