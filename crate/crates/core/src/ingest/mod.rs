//! In-memory datasets, challenge-format JSON I/O, and synthetic predictions.

mod coco;
mod synth;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Detection, GroundTruth, PADDING_CLASS};
use crate::Scalar;

pub use coco::{load_detections, load_ground_truth, write_coco_ground_truth, write_coco_results};
pub use synth::{perturb, sample_images, PerturbationParams};

const DATASET_FORMAT: &str = "cocostream-dataset";
const DATASET_VERSION: u32 = 1;

/// Image identifier as it appears in the source document.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageId {
    Int(i64),
    Str(String),
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageId::Int(i) => write!(f, "{i}"),
            ImageId::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// A source category. Its position in [`Dataset::categories`] is the
/// contiguous class index used everywhere else.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: i64,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ImageRecord<T> {
    pub image_id: ImageId,
    pub detections: Vec<Detection<T>>,
    pub ground_truths: Vec<GroundTruth<T>>,
}

impl<T: Scalar> ImageRecord<T> {
    pub fn new(image_id: ImageId) -> Self {
        Self {
            image_id,
            detections: Vec::new(),
            ground_truths: Vec::new(),
        }
    }

    pub fn pair(&self) -> (&[Detection<T>], &[GroundTruth<T>]) {
        (&self.detections, &self.ground_truths)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Dataset<T> {
    pub categories: Vec<Category>,
    pub images: Vec<ImageRecord<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn num_classes(&self) -> usize {
        self.categories.len()
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(detections, ground_truths)` per image, the shape the evaluators take.
    pub fn pairs(&self) -> impl Iterator<Item = (&[Detection<T>], &[GroundTruth<T>])> + '_ {
        self.images.iter().map(ImageRecord::pair)
    }

    pub fn class_index(&self, category_id: i64) -> Option<usize> {
        self.categories.iter().position(|c| c.id == category_id)
    }

    pub fn category_id(&self, class: usize) -> Option<i64> {
        self.categories.get(class).map(|c| c.id)
    }

    pub fn detection_count(&self) -> usize {
        self.images.iter().map(|i| i.detections.len()).sum()
    }

    pub fn ground_truth_count(&self) -> usize {
        self.images.iter().map(|i| i.ground_truths.len()).sum()
    }

    /// Keeps only the given images, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            categories: self.categories.clone(),
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
        }
    }

    pub(crate) fn image_lookup(&self) -> HashMap<&ImageId, usize> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, r)| (&r.image_id, i))
            .collect()
    }

    /// Checks class ids and confidences against the category table.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_classes() as i64;
        let check = |class: i64, what: &str, image: &ImageId| {
            if class != PADDING_CLASS && !(0..n).contains(&class) {
                return Err(Error::Validation(format!(
                    "image {image}: {what} class {class} outside [0, {n})"
                )));
            }
            Ok(())
        };
        let mut seen = HashMap::new();
        for (i, rec) in self.images.iter().enumerate() {
            if let Some(prev) = seen.insert(&rec.image_id, i) {
                return Err(Error::Validation(format!(
                    "image id {} appears at positions {prev} and {i}",
                    rec.image_id
                )));
            }
            for d in &rec.detections {
                check(d.class_id, "detection", &rec.image_id)?;
                d.validate()?;
            }
            for g in &rec.ground_truths {
                check(g.class_id, "ground truth", &rec.image_id)?;
            }
        }
        Ok(())
    }

    /// Lossless JSON form (corner boxes, class indices).
    pub fn to_json(&self) -> String {
        let doc = DatasetDoc {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            dataset: self.clone(),
        };
        serde_json::to_string(&doc).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DatasetDoc<T> = serde_json::from_str(text)?;
        if doc.format != DATASET_FORMAT || doc.version != DATASET_VERSION {
            return Err(Error::Validation(format!(
                "unsupported dataset document {:?} v{}",
                doc.format, doc.version
            )));
        }
        doc.dataset.validate()?;
        Ok(doc.dataset)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct DatasetDoc<T> {
    format: String,
    version: u32,
    dataset: Dataset<T>,
}
