//! Exact reference evaluation.
//!
//! Keeps every scored detection, sorts each cell globally by confidence and
//! builds the precision/recall curve one detection at a time. Matching,
//! interpolation and the final reduction are shared with the streaming path,
//! so the two differ only in bucketing versus exact sorting.

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::error::Result;
use crate::geometry::{Detection, GroundTruth};
use crate::matching::match_image;
use crate::report::{CellScores, MetricReport};
use crate::streaming::interpolate_ap;
use crate::Scalar;

/// One matched detection, tagged with where it was scored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredVerdict<T> {
    pub confidence: T,
    pub is_tp: bool,
    pub class_id: usize,
    /// `(iou_threshold, area_range, max_dets)` indices into the config.
    pub cell: (usize, usize, usize),
}

/// All verdicts of a dataset, grouped by flat cell index, plus ground-truth
/// totals per (class, area range).
pub struct VerdictLists<T> {
    pub cells: Vec<Vec<ScoredVerdict<T>>>,
    pub gt_counts: Vec<u64>,
}

pub fn collect_verdicts<'a, T, I>(dataset: I, config: &EvalConfig<T>) -> Result<VerdictLists<T>>
where
    T: Scalar,
    I: IntoIterator<Item = (&'a [Detection<T>], &'a [GroundTruth<T>])>,
{
    config.validate()?;
    let mut cells = vec![Vec::new(); config.num_cells()];
    let mut gt_counts = vec![0u64; config.num_classes * config.area_ranges.len()];

    for (detections, ground_truths) in dataset {
        let matches = match_image(detections, ground_truths, config)?;
        for class in matches.classes() {
            for a in 0..config.area_ranges.len() {
                gt_counts[config.gt_index(class, a)] += matches.gt_count(class, a) as u64;
                for t in 0..config.iou_thresholds.len() {
                    for m in 0..config.max_dets.len() {
                        let list = &mut cells[config.cell_index(t, class, a, m)];
                        list.extend(matches.get(class, t, a, m).verdicts.iter().map(|v| {
                            ScoredVerdict {
                                confidence: v.confidence,
                                is_tp: v.is_tp,
                                class_id: class,
                                cell: (t, a, m),
                            }
                        }));
                    }
                }
            }
        }
    }
    Ok(VerdictLists { cells, gt_counts })
}

pub fn exact_cell_scores<'a, T, I>(dataset: I, config: &EvalConfig<T>) -> Result<CellScores<T>>
where
    T: Scalar,
    I: IntoIterator<Item = (&'a [Detection<T>], &'a [GroundTruth<T>])>,
{
    let VerdictLists {
        mut cells,
        gt_counts,
    } = collect_verdicts(dataset, config)?;
    let mut scores = CellScores::new(config.num_cells());

    for (idx, verdicts) in cells.iter_mut().enumerate() {
        let (_, class, area, _) = config.cell_coords(idx);
        let gt = gt_counts[config.gt_index(class, area)];
        if gt == 0 {
            continue;
        }
        // stable, so equal scores keep dataset order
        verdicts.sort_by(|a, b| {
            b.confidence
                .partial_cmp(&a.confidence)
                .expect("validated confidence")
        });

        let gt_t = T::from_count(gt);
        let mut recalls = Vec::with_capacity(verdicts.len());
        let mut precisions = Vec::with_capacity(verdicts.len());
        let mut tp = 0u64;
        for (k, v) in verdicts.iter().enumerate() {
            if v.is_tp {
                tp += 1;
            }
            recalls.push(T::from_count(tp) / gt_t);
            precisions.push(T::from_count(tp) / T::from_count(k as u64 + 1));
        }
        scores.ap[idx] = Some(interpolate_ap(
            &recalls,
            &precisions,
            &config.recall_thresholds,
        )?);
        scores.recall[idx] = Some(T::from_count(tp) / gt_t);
    }
    Ok(scores)
}

/// Exact metrics over a whole dataset of `(detections, ground_truths)`
/// images.
pub fn evaluate_exact<'a, T, I>(dataset: I, config: &EvalConfig<T>) -> Result<MetricReport<T>>
where
    T: Scalar,
    I: IntoIterator<Item = (&'a [Detection<T>], &'a [GroundTruth<T>])>,
{
    Ok(exact_cell_scores(dataset, config)?.summarize(config))
}
