//! Generated texture corpus for running the full pipeline without a dataset.
//!
//! Each class is a sinusoidal grating with its own spatial period and base
//! orientation; every image gets a jittered orientation, a random phase and
//! additive Gaussian noise. The period, not the orientation, is what a
//! rotation-invariant texture descriptor can tell apart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{GrayImage, LabeledImageSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GratingCorpus {
    /// Spatial period in pixels for each class.
    pub periods: Vec<f64>,
    pub per_class: usize,
    pub width: usize,
    pub height: usize,
    pub amplitude: f64,
    pub noise_sigma: f64,
    /// Maximum deviation from the class orientation, in degrees.
    pub orientation_jitter: f64,
    pub seed: u64,
}

impl Default for GratingCorpus {
    fn default() -> Self {
        GratingCorpus {
            periods: vec![5.0, 9.0, 16.0, 28.0],
            per_class: 50,
            width: 96,
            height: 96,
            amplitude: 60.0,
            noise_sigma: 12.0,
            orientation_jitter: 15.0,
            seed: 42,
        }
    }
}

impl GratingCorpus {
    pub fn generate(&self) -> Result<LabeledImageSet> {
        if self.periods.is_empty() || self.per_class == 0 {
            return Err(Error::param("grating corpus needs at least one class and one image"));
        }
        let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| Error::param(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n_classes = self.periods.len();
        let mut images = Vec::with_capacity(n_classes * self.per_class);
        let mut labels = Vec::with_capacity(n_classes * self.per_class);
        for (c, &period) in self.periods.iter().enumerate() {
            let base = 180.0 * c as f64 / n_classes as f64;
            for _ in 0..self.per_class {
                let theta = (base + rng.random_range(-self.orientation_jitter..=self.orientation_jitter)).to_radians();
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let (ct, st) = (theta.cos(), theta.sin());
                let freq = std::f64::consts::TAU / period;
                let img = GrayImage::from_fn(self.width, self.height, |x, y| {
                    let s = (freq * (x as f64 * ct + y as f64 * st) + phase).sin();
                    (128.0 + self.amplitude * s + noise.sample(&mut rng)).clamp(0.0, 255.0)
                })?;
                images.push(img);
                labels.push(c);
            }
        }
        Ok(LabeledImageSet {
            images,
            labels,
            class_names: (0..n_classes).map(|c| format!("grating{c}")).collect(),
            paths: Vec::new(),
        })
    }
}
