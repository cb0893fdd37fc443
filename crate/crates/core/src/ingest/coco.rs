use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Category, Dataset, ImageId, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection, GroundTruth};
use crate::Scalar;

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct AnnotationDoc<T> {
    images: Vec<ImageEntry>,
    annotations: Vec<AnnotationEntry<T>>,
    categories: Vec<CategoryEntry>,
}

#[derive(Serialize, Deserialize)]
struct ImageEntry {
    id: ImageId,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct AnnotationEntry<T> {
    image_id: ImageId,
    category_id: i64,
    bbox: [T; 4],
}

#[derive(Serialize, Deserialize)]
struct CategoryEntry {
    id: i64,
    #[serde(default)]
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct ResultEntry<T> {
    image_id: ImageId,
    category_id: i64,
    bbox: [T; 4],
    score: T,
}

#[derive(Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
struct AnnotationOut<T> {
    id: u64,
    image_id: ImageId,
    category_id: i64,
    bbox: [T; 4],
    area: T,
    iscrowd: u8,
}

#[derive(Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
struct AnnotationDocOut<T> {
    images: Vec<ImageEntry>,
    annotations: Vec<AnnotationOut<T>>,
    categories: Vec<CategoryEntry>,
}

/// Parses an annotation document (`images`, `annotations`, `categories`,
/// boxes as `[x, y, width, height]`).
///
/// Categories are sorted by id and numbered from 0. Images keep document
/// order; images without annotations become empty records. The annotation
/// `area` field is ignored: area filtering always uses the box itself.
pub fn load_ground_truth<T: Scalar>(doc: &str) -> Result<Dataset<T>> {
    let doc: AnnotationDoc<T> = serde_json::from_str(doc)?;

    let mut categories: Vec<Category> = doc
        .categories
        .into_iter()
        .map(|c| Category {
            id: c.id,
            name: c.name,
        })
        .collect();
    categories.sort_by_key(|c| c.id);
    if let Some(w) = categories.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Validation(format!(
            "duplicate category id {}",
            w[0].id
        )));
    }
    let class_of: HashMap<i64, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id, i))
        .collect();

    let mut images = Vec::with_capacity(doc.images.len());
    let mut index = HashMap::new();
    for (i, img) in doc.images.into_iter().enumerate() {
        if index.insert(img.id.clone(), i).is_some() {
            return Err(Error::Validation(format!(
                "images[{i}]: duplicate image id {}",
                img.id
            )));
        }
        images.push(ImageRecord::new(img.id));
    }

    for (i, ann) in doc.annotations.into_iter().enumerate() {
        let &slot = index.get(&ann.image_id).ok_or_else(|| {
            Error::Validation(format!(
                "annotations[{i}]: unknown image id {}",
                ann.image_id
            ))
        })?;
        let &class = class_of.get(&ann.category_id).ok_or_else(|| {
            Error::Validation(format!(
                "annotations[{i}]: unknown category id {}",
                ann.category_id
            ))
        })?;
        let [x, y, w, h] = ann.bbox;
        let bbox = BoundingBox::from_xywh(x, y, w, h)
            .map_err(|e| Error::Validation(format!("annotations[{i}]: {e}")))?;
        images[slot]
            .ground_truths
            .push(GroundTruth::new(bbox, class as i64));
    }

    Ok(Dataset { categories, images })
}

/// Parses a results document (a list of `{image_id, category_id, bbox,
/// score}`) and appends its detections to a copy of `base`.
pub fn load_detections<T: Scalar>(doc: &str, base: &Dataset<T>) -> Result<Dataset<T>> {
    let rows: Vec<ResultEntry<T>> = serde_json::from_str(doc)?;
    let mut out = base.clone();
    let index: HashMap<ImageId, usize> = base
        .image_lookup()
        .into_iter()
        .map(|(k, v)| (k.clone(), v))
        .collect();

    for (i, row) in rows.into_iter().enumerate() {
        let &slot = index.get(&row.image_id).ok_or_else(|| {
            Error::Validation(format!("results[{i}]: unknown image id {}", row.image_id))
        })?;
        let class = base.class_index(row.category_id).ok_or_else(|| {
            Error::Validation(format!(
                "results[{i}]: unknown category id {}",
                row.category_id
            ))
        })?;
        if !(row.score >= T::zero() && row.score <= T::one()) {
            return Err(Error::Validation(format!(
                "results[{i}]: score {} outside [0, 1]",
                row.score
            )));
        }
        let [x, y, w, h] = row.bbox;
        let bbox = BoundingBox::from_xywh(x, y, w, h)
            .map_err(|e| Error::Validation(format!("results[{i}]: {e}")))?;
        out.images[slot]
            .detections
            .push(Detection::new(bbox, class as i64, row.score)?);
    }
    Ok(out)
}

/// Writes the ground truths as an annotation document. `area` is the box
/// area, so external tools filter by the same quantity.
pub fn write_coco_ground_truth<T: Scalar>(dataset: &Dataset<T>) -> Result<String> {
    let mut annotations = Vec::new();
    for rec in &dataset.images {
        for g in rec.ground_truths.iter().filter(|g| g.class_id >= 0) {
            annotations.push(AnnotationOut {
                id: annotations.len() as u64 + 1,
                image_id: rec.image_id.clone(),
                category_id: category_of(dataset, g.class_id)?,
                bbox: g.bbox.to_xywh(),
                area: g.bbox.area(),
                iscrowd: 0,
            });
        }
    }
    let doc = AnnotationDocOut {
        images: dataset
            .images
            .iter()
            .map(|r| ImageEntry {
                id: r.image_id.clone(),
            })
            .collect(),
        annotations,
        categories: dataset
            .categories
            .iter()
            .map(|c| CategoryEntry {
                id: c.id,
                name: c.name.clone(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&doc).expect("annotations serialize"))
}

pub fn write_coco_results<T: Scalar>(dataset: &Dataset<T>) -> Result<String> {
    let mut rows = Vec::new();
    for rec in &dataset.images {
        for d in rec.detections.iter().filter(|d| d.class_id >= 0) {
            rows.push(ResultEntry {
                image_id: rec.image_id.clone(),
                category_id: category_of(dataset, d.class_id)?,
                bbox: d.bbox.to_xywh(),
                score: d.confidence,
            });
        }
    }
    Ok(serde_json::to_string(&rows).expect("results serialize"))
}

fn category_of<T: Scalar>(dataset: &Dataset<T>, class: i64) -> Result<i64> {
    usize::try_from(class)
        .ok()
        .and_then(|c| dataset.category_id(c))
        .ok_or_else(|| Error::Validation(format!("class {class} has no category")))
}
