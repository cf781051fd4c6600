use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::StylePreset;
use crate::image::{gaussian_blur, ImageBuffer};

/// Blur, then contrast about mid-grey, then seeded additive Gaussian noise.
/// Identity parameters return the input unchanged.
pub fn apply_style(img: &ImageBuffer, preset: &StylePreset, seed: u64) -> ImageBuffer {
    let blurred = gaussian_blur(img, preset.blur_sigma);
    if preset.contrast == 1.0 && preset.noise_sigma == 0.0 {
        return blurred;
    }
    let (w, h, c) = blurred.dims();
    let mut data = blurred.into_data();
    let mut noise = (preset.noise_sigma > 0.0).then(|| {
        (
            ChaCha8Rng::seed_from_u64(seed),
            Normal::new(0.0, preset.noise_sigma).expect("validated sigma"),
        )
    });
    for v in data.iter_mut() {
        let mut x = 128.0 + preset.contrast * (*v as f64 - 128.0);
        if let Some((rng, dist)) = noise.as_mut() {
            x += dist.sample(rng);
        }
        *v = x.round().clamp(0.0, 255.0) as u8;
    }
    ImageBuffer::new(w, h, c, data).expect("dimensions unchanged")
}
