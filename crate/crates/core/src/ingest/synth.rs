use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection, Labeled};
use crate::Scalar;

/// Random box distortion used to synthesize predictions from ground truth.
///
/// Each box is translated by `u1 * width` horizontally and `u2 * height`
/// vertically with `u1, u2 ~ U[-translate_fraction, translate_fraction]`,
/// then its width and height are scaled by `u3, u4 ~ U[scale_low,
/// scale_high]`. Randomness comes from ChaCha8 seeded with `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PerturbationParams<T> {
    pub translate_fraction: T,
    pub scale_low: T,
    pub scale_high: T,
    pub seed: u64,
}

impl<T: Scalar> Default for PerturbationParams<T> {
    fn default() -> Self {
        Self {
            translate_fraction: T::lit(0.2),
            scale_low: T::lit(0.8),
            scale_high: T::lit(1.2),
            seed: 0,
        }
    }
}

impl<T: Scalar> PerturbationParams<T> {
    pub fn identity(seed: u64) -> Self {
        Self {
            translate_fraction: T::zero(),
            scale_low: T::one(),
            scale_high: T::one(),
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.translate_fraction >= T::zero() && self.translate_fraction < T::one()) {
            return Err(Error::Argument(format!(
                "translate fraction {} outside [0, 1)",
                self.translate_fraction
            )));
        }
        if !(self.scale_low > T::zero()
            && self.scale_low <= self.scale_high
            && self.scale_high.is_finite())
        {
            return Err(Error::Argument(format!(
                "scale range [{}, {}] must satisfy 0 < low <= high",
                self.scale_low, self.scale_high
            )));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.translate_fraction == T::zero()
            && self.scale_low == T::one()
            && self.scale_high == T::one()
    }
}

/// Uniform sample of `n` images without replacement, in sampled order.
pub fn sample_images<T: Scalar>(dataset: &Dataset<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    if n > dataset.len() {
        return Err(Error::Argument(format!(
            "cannot sample {n} images from a dataset of {}",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, dataset.len(), n).into_vec();
    Ok(dataset.subset(&picked))
}

/// Replaces every image's detections with one distorted copy of each
/// ground truth, keeping its class, with confidence drawn from `U(0, 1]`.
pub fn perturb<T: Scalar>(
    dataset: &Dataset<T>,
    params: &PerturbationParams<T>,
) -> Result<Dataset<T>> {
    params.validate()?;
    let tf = params.translate_fraction.to_f64().unwrap_or(0.0);
    let (lo, hi) = (
        params.scale_low.to_f64().unwrap_or(1.0),
        params.scale_high.to_f64().unwrap_or(1.0),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let images = dataset
        .images
        .iter()
        .map(|rec| {
            let detections = rec
                .ground_truths
                .iter()
                .filter(|g| !g.is_padding())
                .map(|g| {
                    let u1 = T::lit(rng.random_range(-tf..=tf));
                    let u2 = T::lit(rng.random_range(-tf..=tf));
                    let u3 = T::lit(rng.random_range(lo..=hi));
                    let u4 = T::lit(rng.random_range(lo..=hi));
                    let confidence = T::lit(1.0 - rng.random::<f64>());
                    let bbox = if params.is_identity() {
                        g.bbox
                    } else {
                        let (w, h) = (g.bbox.width(), g.bbox.height());
                        let left = g.bbox.left() + u1 * w;
                        let top = g.bbox.top() + u2 * h;
                        BoundingBox::from_xywh(left, top, w * u3, h * u4)?
                    };
                    Detection::new(bbox, g.class_id, confidence)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ImageRecord {
                image_id: rec.image_id.clone(),
                detections,
                ground_truths: rec.ground_truths.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        categories: dataset.categories.clone(),
        images,
    })
}
