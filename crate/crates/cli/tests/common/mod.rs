//! Random datasets shaped like a detection validation split.

use cocostream::{BoundingBoxF64, DatasetF64, DetectionF64, GroundTruthF64, ImageId, ImageRecord};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const IMAGE_W: f64 = 640.0;
pub const IMAGE_H: f64 = 480.0;

/// Box with a log-uniform area drawn from the small / medium / large mix of
/// natural scenes, random aspect ratio, placed inside the image.
pub fn natural_box(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let u: f64 = rng.random();
    let (lo, hi): (f64, f64) = if u < 0.41 {
        (16.0, 1024.0)
    } else if u < 0.75 {
        (1024.0, 9216.0)
    } else {
        (9216.0, 160_000.0)
    };
    let area = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let aspect = (rng.random_range(-1.1f64..1.1)).exp();
    let w = (area * aspect).sqrt().min(IMAGE_W);
    let h = (area / aspect).sqrt().min(IMAGE_H);
    let x = rng.random::<f64>() * (IMAGE_W - w);
    let y = rng.random::<f64>() * (IMAGE_H - h);
    [x, y, w, h]
}

/// Annotation document with `images` images over `classes` categories.
/// Object counts per image are geometric with mean about 7, category
/// frequencies fall off like 1/rank.
pub fn validation_like_ground_truth(images: usize, classes: usize, rng: &mut ChaCha8Rng) -> String {
    let weights: Vec<f64> = (1..=classes).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut annotations = Vec::new();
    for img in 1..=images {
        let mut count = 1;
        while count < 60 && rng.random::<f64>() < 0.86 {
            count += 1;
        }
        for _ in 0..count {
            let mut pick = rng.random::<f64>() * total;
            let mut cat = classes;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    cat = i + 1;
                    break;
                }
                pick -= w;
            }
            let bbox = natural_box(rng);
            annotations.push(json!({
                "id": annotations.len() + 1,
                "image_id": img,
                "category_id": cat,
                "bbox": bbox,
                "area": bbox[2] * bbox[3],
                "iscrowd": 0,
            }));
        }
    }
    json!({
        "images": (1..=images).map(|i| json!({"id": i, "width": IMAGE_W, "height": IMAGE_H})).collect::<Vec<_>>(),
        "annotations": annotations,
        "categories": (1..=classes).map(|i| json!({"id": i, "name": format!("class{i}")})).collect::<Vec<_>>(),
    })
    .to_string()
}

/// Small random dataset for exhaustive comparisons: each image gets up to
/// `max_boxes` ground truths and detections, detections mostly jittered
/// copies of ground truths plus some clutter. `confidence` draws each score.
pub fn random_dataset(
    rng: &mut ChaCha8Rng,
    max_images: usize,
    max_boxes: usize,
    classes: usize,
    mut confidence: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> DatasetF64 {
    let mut ds = DatasetF64 {
        categories: (0..classes)
            .map(|i| cocostream::Category {
                id: i as i64,
                name: format!("c{i}"),
            })
            .collect(),
        images: Vec::new(),
    };
    let n_images = rng.random_range(1..=max_images);
    for i in 0..n_images {
        let mut rec = ImageRecord::new(ImageId::Int(i as i64));
        let n_gt = rng.random_range(0..=max_boxes);
        for _ in 0..n_gt {
            let [x, y, w, h] = natural_box(rng);
            let bbox = BoundingBoxF64::from_xywh(x, y, w, h).unwrap();
            rec.ground_truths.push(GroundTruthF64::new(
                bbox,
                rng.random_range(0..classes) as i64,
            ));
        }
        let n_dt = rng.random_range(0..=max_boxes);
        for _ in 0..n_dt {
            let (bbox, class) = match rec.ground_truths.get(rng.random_range(0..n_gt.max(1))) {
                Some(g) if rng.random::<f64>() < 0.75 => {
                    let [x, y, w, h] = g.bbox.to_xywh();
                    let j = 0.25;
                    let bbox = BoundingBoxF64::from_xywh(
                        x + w * rng.random_range(-j..=j),
                        y + h * rng.random_range(-j..=j),
                        w * rng.random_range(1.0 - j..=1.0 + j),
                        h * rng.random_range(1.0 - j..=1.0 + j),
                    )
                    .unwrap();
                    let class = if rng.random::<f64>() < 0.9 {
                        g.class_id
                    } else {
                        rng.random_range(0..classes) as i64
                    };
                    (bbox, class)
                }
                _ => {
                    let [x, y, w, h] = natural_box(rng);
                    (
                        BoundingBoxF64::from_xywh(x, y, w, h).unwrap(),
                        rng.random_range(0..classes) as i64,
                    )
                }
            };
            let c = confidence(rng);
            rec.detections
                .push(DetectionF64::new(bbox, class, c).unwrap());
        }
        ds.images.push(rec);
    }
    ds
}
