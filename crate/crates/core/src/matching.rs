//! Greedy per-image assignment of detections to ground truths.
//!
//! Detections are visited in descending confidence (stable on ties). Each one
//! takes the unmatched same-class ground truth with the highest IoU, provided
//! that IoU is at least the threshold; equal IoUs go to the lowest
//! ground-truth index. Area filtering applies to both sides before matching,
//! and max-detection truncation happens after area filtering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::geometry::{box_area, iou, Detection, GroundTruth, Labeled, PADDING_CLASS};
use crate::Scalar;

/// Box-area interval `[min_area, max_area)`; `max_area = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct AreaRange<T> {
    min_area: T,
    max_area: Option<T>,
}

impl<T: Scalar> AreaRange<T> {
    pub fn new(min_area: T, max_area: Option<T>) -> Result<Self> {
        let r = Self { min_area, max_area };
        r.validate()?;
        Ok(r)
    }

    pub fn all() -> Self {
        Self {
            min_area: T::zero(),
            max_area: None,
        }
    }

    pub fn min_area(&self) -> T {
        self.min_area
    }

    pub fn max_area(&self) -> Option<T> {
        self.max_area
    }

    pub fn contains(&self, area: T) -> bool {
        area >= self.min_area && self.max_area.is_none_or(|m| area < m)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.min_area >= T::zero()) || !self.min_area.is_finite() {
            return Err(Error::Config(format!(
                "area range lower bound {} must be finite and non-negative",
                self.min_area
            )));
        }
        if let Some(max) = self.max_area {
            if !(max > self.min_area) {
                return Err(Error::Config(format!(
                    "area range upper bound {max} must exceed lower bound {}",
                    self.min_area
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict<T> {
    pub confidence: T,
    pub is_tp: bool,
}

/// Verdicts for one (image, class, IoU threshold, area range, max-dets) cell,
/// in descending confidence order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult<T> {
    pub verdicts: Vec<Verdict<T>>,
    pub gt_count: usize,
}

impl<T> MatchResult<T> {
    pub fn empty() -> Self {
        Self {
            verdicts: Vec::new(),
            gt_count: 0,
        }
    }

    pub fn tp_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_tp).count()
    }

    pub fn fp_count(&self) -> usize {
        self.verdicts.len() - self.tp_count()
    }
}

/// Area-filtered, confidence-sorted detections of one class in one image with
/// their IoU rows against the surviving ground truths. Matching at any
/// threshold and max-dets limit reuses the same matrix.
struct Candidates<T> {
    confidences: Vec<T>,
    // ious[d * gt_count + g]
    ious: Vec<T>,
    gt_count: usize,
}

impl<T: Scalar> Candidates<T> {
    fn prepare(dets: &[&Detection<T>], gts: &[&GroundTruth<T>], area: &AreaRange<T>) -> Self {
        let gts: Vec<_> = gts
            .iter()
            .filter(|g| area.contains(box_area(&g.bbox)))
            .collect();
        let mut dets: Vec<_> = dets
            .iter()
            .filter(|d| area.contains(box_area(&d.bbox)))
            .collect();
        // stable: ties keep input order
        dets.sort_by(|a, b| {
            b.confidence
                .partial_cmp(&a.confidence)
                .expect("validated confidence")
        });

        let mut ious = Vec::with_capacity(dets.len() * gts.len());
        for d in &dets {
            ious.extend(gts.iter().map(|g| iou(&d.bbox, &g.bbox)));
        }
        Self {
            confidences: dets.iter().map(|d| d.confidence).collect(),
            ious,
            gt_count: gts.len(),
        }
    }

    fn assign(&self, theta: T, max_dets: usize) -> MatchResult<T> {
        let mut taken = vec![false; self.gt_count];
        let verdicts = self
            .confidences
            .iter()
            .take(max_dets)
            .enumerate()
            .map(|(d, &confidence)| {
                let row = &self.ious[d * self.gt_count..(d + 1) * self.gt_count];
                let mut best: Option<(usize, T)> = None;
                for (g, &v) in row.iter().enumerate() {
                    if taken[g] || v < theta {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((g, v));
                    }
                }
                if let Some((g, _)) = best {
                    taken[g] = true;
                }
                Verdict {
                    confidence,
                    is_tp: best.is_some(),
                }
            })
            .collect();
        MatchResult {
            verdicts,
            gt_count: self.gt_count,
        }
    }
}

fn check_theta<T: Scalar>(theta: T) -> Result<()> {
    if theta > T::zero() && theta <= T::one() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "IoU threshold {theta} outside (0, 1]"
        )))
    }
}

/// Matches one class of one image at a single grid point.
///
/// All boxes must share one non-padding class id.
pub fn match_image_class<T: Scalar>(
    detections: &[Detection<T>],
    ground_truths: &[GroundTruth<T>],
    theta: T,
    max_dets: usize,
    area: &AreaRange<T>,
) -> Result<MatchResult<T>> {
    check_theta(theta)?;
    if max_dets == 0 {
        return Err(Error::Config(
            "max-detections limit must be positive".into(),
        ));
    }
    let mut classes = detections
        .iter()
        .map(Labeled::class_id)
        .chain(ground_truths.iter().map(Labeled::class_id));
    if let Some(first) = classes.next() {
        if first == PADDING_CLASS {
            return Err(Error::Contract(
                "padding boxes must be stripped before matching".into(),
            ));
        }
        if let Some(other) = classes.find(|&c| c != first) {
            return Err(Error::Contract(format!(
                "mixed class ids {first} and {other} in a single-class match"
            )));
        }
    }
    for d in detections {
        d.validate()?;
    }
    let dets: Vec<_> = detections.iter().collect();
    let gts: Vec<_> = ground_truths.iter().collect();
    Ok(Candidates::prepare(&dets, &gts, area).assign(theta, max_dets))
}

/// Match results of one image over the whole configuration grid.
///
/// Classes with no boxes in the image are not stored; looking them up yields
/// an empty result.
#[derive(Clone, Debug)]
pub struct ImageMatches<T> {
    thetas: usize,
    areas: usize,
    max_dets: usize,
    // per class: [theta][area][max_dets] flattened
    classes: BTreeMap<usize, Vec<MatchResult<T>>>,
    empty: MatchResult<T>,
}

impl<T> ImageMatches<T> {
    pub fn get(&self, class: usize, theta: usize, area: usize, max_dets: usize) -> &MatchResult<T> {
        match self.classes.get(&class) {
            Some(cells) => &cells[(theta * self.areas + area) * self.max_dets + max_dets],
            None => &self.empty,
        }
    }

    /// Classes that had at least one box in the image.
    pub fn classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes.keys().copied()
    }

    pub fn num_cells_per_class(&self) -> usize {
        self.thetas * self.areas * self.max_dets
    }

    /// Ground truths of `class` that survive the area filter; does not depend
    /// on the threshold or max-dets limit.
    pub fn gt_count(&self, class: usize, area: usize) -> usize {
        self.get(class, 0, area, 0).gt_count
    }
}

fn class_slot(class_id: i64, num_classes: usize) -> Result<usize> {
    usize::try_from(class_id)
        .ok()
        .filter(|&c| c < num_classes)
        .ok_or_else(|| {
            Error::Validation(format!(
                "class id {class_id} outside [0, {num_classes}) configured classes"
            ))
        })
}

/// Matches every class of one image at every (threshold, area, max-dets)
/// grid point. Padding boxes are dropped first.
pub fn match_image<T: Scalar>(
    detections: &[Detection<T>],
    ground_truths: &[GroundTruth<T>],
    config: &EvalConfig<T>,
) -> Result<ImageMatches<T>> {
    config.validate()?;

    let mut by_class: BTreeMap<usize, (Vec<&Detection<T>>, Vec<&GroundTruth<T>>)> = BTreeMap::new();
    for d in detections.iter().filter(|d| !d.is_padding()) {
        d.validate()?;
        let c = class_slot(d.class_id, config.num_classes)?;
        by_class.entry(c).or_default().0.push(d);
    }
    for g in ground_truths.iter().filter(|g| !g.is_padding()) {
        if g.class_id < PADDING_CLASS {
            return Err(Error::Validation(format!(
                "class id {} is below the padding marker",
                g.class_id
            )));
        }
        let c = class_slot(g.class_id, config.num_classes)?;
        by_class.entry(c).or_default().1.push(g);
    }

    let (nt, na, nm) = (
        config.iou_thresholds.len(),
        config.area_ranges.len(),
        config.max_dets.len(),
    );
    let largest = config.largest_max_dets();
    let mut classes = BTreeMap::new();
    for (class, (dets, gts)) in by_class {
        let mut cells = vec![MatchResult::empty(); nt * na * nm];
        for (a, named) in config.area_ranges.iter().enumerate() {
            let candidates = Candidates::prepare(&dets, &gts, &named.range);
            for (t, &theta) in config.iou_thresholds.iter().enumerate() {
                // greedy decisions for the top-k never depend on later
                // detections, so smaller limits are prefixes of the largest
                let full = candidates.assign(theta, largest);
                for (m, &limit) in config.max_dets.iter().enumerate() {
                    let keep = limit.min(full.verdicts.len());
                    cells[(t * na + a) * nm + m] = MatchResult {
                        verdicts: full.verdicts[..keep].to_vec(),
                        gt_count: full.gt_count,
                    };
                }
            }
        }
        classes.insert(class, cells);
    }

    Ok(ImageMatches {
        thetas: nt,
        areas: na,
        max_dets: nm,
        classes,
        empty: MatchResult::empty(),
    })
}
