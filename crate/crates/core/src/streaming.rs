//! Fixed-size bucketed counters for streaming, mergeable evaluation.
//!
//! For every (IoU threshold, class, area range, max-dets) cell the state keeps
//! two confidence histograms: true positives and false positives per bucket.
//! Ground-truth totals are kept per (class, area range). Finalization sweeps
//! each histogram from the highest-confidence bucket down, so the running sums
//! at bucket `i` count the detections whose bucket index is at least `i`. Those
//! running sums give one (recall, precision) point per bucket, which is then
//! interpolated exactly like the sorted-detection curve.
//!
//! Counters are `u64`, so updates and merges commute and associate exactly.

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::error::{Error, Result};
use crate::geometry::{Detection, GroundTruth};
use crate::matching::match_image;
use crate::report::{CellScores, MetricReport};
use crate::Scalar;

pub const DEFAULT_BUCKETS: usize = 10_000;

const SNAPSHOT_FORMAT: &str = "cocostream-state";
const SNAPSHOT_VERSION: u32 = 1;

/// Histogram bin of a confidence: `floor(c * (buckets - δ))` in the limit
/// `δ → 0⁺`.
///
/// Scores on an exact bin edge therefore fall into the lower bin (0.5 with ten
/// buckets is bin 4), a score of 1 lands in the last bin and 0 in the first.
pub fn bucket_index<T: Scalar>(confidence: T, buckets: usize) -> Result<usize> {
    if buckets == 0 {
        return Err(Error::Config("buckets must be at least 1".into()));
    }
    if !(confidence >= T::zero() && confidence <= T::one()) {
        return Err(Error::Domain(format!(
            "confidence {confidence} outside [0, 1]"
        )));
    }
    let scaled = confidence * T::from_count(buckets as u64);
    let idx = (scaled.ceil() - T::one()).max(T::zero());
    Ok(idx.to_usize().unwrap_or(0).min(buckets - 1))
}

/// Area under the interpolated precision/recall curve, sampled at
/// `recall_thresholds`.
///
/// Precision is first replaced by its right-to-left running maximum. For each
/// threshold the envelope value at the first point whose recall reaches it is
/// taken (0 if none does), and the samples are averaged.
pub fn interpolate_ap<T: Scalar>(
    recalls: &[T],
    precisions: &[T],
    recall_thresholds: &[T],
) -> Result<T> {
    if recalls.len() != precisions.len() {
        return Err(Error::Contract(format!(
            "{} recall values but {} precision values",
            recalls.len(),
            precisions.len()
        )));
    }
    if recall_thresholds.is_empty() {
        return Err(Error::Contract("empty recall threshold set".into()));
    }
    if !recalls.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::Contract(
            "recall sequence must be non-decreasing".into(),
        ));
    }

    let mut envelope = precisions.to_vec();
    for i in (1..envelope.len()).rev() {
        if envelope[i] > envelope[i - 1] {
            envelope[i - 1] = envelope[i];
        }
    }

    let mut sum = T::zero();
    for &gamma in recall_thresholds {
        let first = recalls.partition_point(|&r| r < gamma);
        if let Some(&p) = envelope.get(first) {
            sum = sum + p;
        }
    }
    Ok(sum / T::from_count(recall_thresholds.len() as u64))
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Histogram {
    tp: Vec<u64>,
    fp: Vec<u64>,
}

impl Histogram {
    fn zeros(buckets: usize) -> Self {
        Self {
            tp: vec![0; buckets],
            fp: vec![0; buckets],
        }
    }

    fn is_zero(&self) -> bool {
        self.tp.iter().chain(&self.fp).all(|&c| c == 0)
    }
}

/// The streaming accumulator.
///
/// Its logical shape is fixed by the configuration. Histograms for cells
/// that have never received a detection are not allocated and read as zero.
#[derive(Clone, Debug)]
pub struct BucketedState<T> {
    config: EvalConfig<T>,
    cells: Vec<Option<Box<Histogram>>>,
    gt_counts: Vec<u64>,
}

impl<T: Scalar> PartialEq for BucketedState<T> {
    fn eq(&self, other: &Self) -> bool {
        if self.config != other.config || self.gt_counts != other.gt_counts {
            return false;
        }
        self.cells
            .iter()
            .zip(&other.cells)
            .all(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => a == b,
                (Some(h), None) | (None, Some(h)) => h.is_zero(),
                (None, None) => true,
            })
    }
}

impl<T: Scalar> BucketedState<T> {
    pub fn new(config: EvalConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            cells: vec![None; config.num_cells()],
            gt_counts: vec![0; config.num_classes * config.area_ranges.len()],
            config,
        })
    }

    pub fn config(&self) -> &EvalConfig<T> {
        &self.config
    }

    pub fn tp_count(
        &self,
        theta: usize,
        class: usize,
        area: usize,
        max_dets: usize,
        bucket: usize,
    ) -> u64 {
        self.histogram(theta, class, area, max_dets)
            .map_or(0, |(tp, _)| tp[bucket])
    }

    pub fn fp_count(
        &self,
        theta: usize,
        class: usize,
        area: usize,
        max_dets: usize,
        bucket: usize,
    ) -> u64 {
        self.histogram(theta, class, area, max_dets)
            .map_or(0, |(_, fp)| fp[bucket])
    }

    pub fn gt_count(&self, class: usize, area: usize) -> u64 {
        self.gt_counts[self.config.gt_index(class, area)]
    }

    /// `(tp, fp)` bucket counts of a cell, or `None` if the cell has never
    /// been touched.
    pub fn histogram(
        &self,
        theta: usize,
        class: usize,
        area: usize,
        max_dets: usize,
    ) -> Option<(&[u64], &[u64])> {
        self.cells[self.config.cell_index(theta, class, area, max_dets)]
            .as_deref()
            .map(|h| (h.tp.as_slice(), h.fp.as_slice()))
    }

    pub fn is_zero(&self) -> bool {
        self.gt_counts.iter().all(|&c| c == 0) && self.cells.iter().flatten().all(|h| h.is_zero())
    }

    /// Folds a mini-batch of `(detections, ground_truths)` images into the
    /// counters. Padding boxes are ignored. On error the state is left as it
    /// was.
    pub fn update<'a, I>(&mut self, batch: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a [Detection<T>], &'a [GroundTruth<T>])>,
        T: 'a,
    {
        let buckets = self.config.buckets;
        let mut hits: Vec<(usize, usize, bool)> = Vec::new();
        let mut gts: Vec<(usize, u64)> = Vec::new();

        for (detections, ground_truths) in batch {
            let matches = match_image(detections, ground_truths, &self.config)?;
            for class in matches.classes() {
                for a in 0..self.config.area_ranges.len() {
                    let n = matches.gt_count(class, a) as u64;
                    if n > 0 {
                        gts.push((self.config.gt_index(class, a), n));
                    }
                    for t in 0..self.config.iou_thresholds.len() {
                        for m in 0..self.config.max_dets.len() {
                            let cell = self.config.cell_index(t, class, a, m);
                            for v in &matches.get(class, t, a, m).verdicts {
                                hits.push((cell, bucket_index(v.confidence, buckets)?, v.is_tp));
                            }
                        }
                    }
                }
            }
        }

        for (idx, n) in gts {
            self.gt_counts[idx] += n;
        }
        for (cell, bucket, is_tp) in hits {
            let h = self.cells[cell].get_or_insert_with(|| Box::new(Histogram::zeros(buckets)));
            if is_tp {
                h.tp[bucket] += 1;
            } else {
                h.fp[bucket] += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum of two states built with the same configuration.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        if self.config != other.config {
            return Err(Error::Merge(describe_config_mismatch(
                &self.config,
                &other.config,
            )));
        }
        for (a, b) in self.gt_counts.iter_mut().zip(&other.gt_counts) {
            *a += b;
        }
        for (mine, theirs) in self.cells.iter_mut().zip(&other.cells) {
            let Some(theirs) = theirs else { continue };
            match mine {
                Some(h) => {
                    for (x, y) in h.tp.iter_mut().zip(&theirs.tp) {
                        *x += y;
                    }
                    for (x, y) in h.fp.iter_mut().zip(&theirs.fp) {
                        *x += y;
                    }
                }
                None => *mine = Some(theirs.clone()),
            }
        }
        Ok(())
    }

    /// Per-cell approximate AP and exact recall.
    pub fn cell_scores(&self) -> CellScores<T> {
        let cfg = &self.config;
        let mut scores = CellScores::new(cfg.num_cells());
        let mut recalls = Vec::new();
        let mut precisions = Vec::new();

        for (cell, hist) in self.cells.iter().enumerate() {
            let (_, class, area, _) = cfg.cell_coords(cell);
            let gt = self.gt_counts[cfg.gt_index(class, area)];
            if gt == 0 {
                continue;
            }
            let gt_t = T::from_count(gt);
            let Some(hist) = hist else {
                scores.ap[cell] = Some(T::zero());
                scores.recall[cell] = Some(T::zero());
                continue;
            };

            recalls.clear();
            precisions.clear();
            let (mut tp, mut fp) = (0u64, 0u64);
            for b in (0..cfg.buckets).rev() {
                if hist.tp[b] == 0 && hist.fp[b] == 0 {
                    // an empty bucket repeats the previous curve point and
                    // cannot change the interpolation
                    continue;
                }
                tp += hist.tp[b];
                fp += hist.fp[b];
                recalls.push(T::from_count(tp) / gt_t);
                precisions.push(T::from_count(tp) / T::from_count(tp + fp));
            }
            scores.ap[cell] = Some(
                interpolate_ap(&recalls, &precisions, &cfg.recall_thresholds)
                    .expect("bucket sweep yields non-decreasing recall"),
            );
            scores.recall[cell] = Some(T::from_count(tp) / gt_t);
        }
        scores
    }

    pub fn finalize(&self) -> MetricReport<T> {
        self.cell_scores().summarize(&self.config)
    }

    /// Canonical JSON snapshot: configuration, ground-truth totals and the
    /// non-zero buckets of every cell as `[bucket, tp, fp]` triples, cells in
    /// index order. Equal states serialize to identical bytes.
    pub fn to_snapshot(&self) -> String {
        let cfg = &self.config;
        let cells = self
            .cells
            .iter()
            .enumerate()
            .filter_map(|(i, h)| {
                let h = h.as_deref()?;
                let counts: Vec<[u64; 3]> = (0..cfg.buckets)
                    .filter(|&b| h.tp[b] != 0 || h.fp[b] != 0)
                    .map(|b| [b as u64, h.tp[b], h.fp[b]])
                    .collect();
                if counts.is_empty() {
                    return None;
                }
                let (theta, class, area, max_dets) = cfg.cell_coords(i);
                Some(SnapshotCell {
                    theta,
                    class,
                    area,
                    max_dets,
                    counts,
                })
            })
            .collect();
        let snap = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            config: cfg.clone(),
            gt_counts: self.gt_counts.clone(),
            cells,
        };
        serde_json::to_string(&snap).expect("state serializes")
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let snap: Snapshot<T> = serde_json::from_str(text)?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(Error::Validation(format!(
                "not a state snapshot (format {:?})",
                snap.format
            )));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        let mut state = Self::new(snap.config)?;
        if snap.gt_counts.len() != state.gt_counts.len() {
            return Err(Error::Validation(format!(
                "snapshot has {} ground-truth counters, configuration needs {}",
                snap.gt_counts.len(),
                state.gt_counts.len()
            )));
        }
        state.gt_counts = snap.gt_counts;

        let cfg = &state.config;
        for c in snap.cells {
            if c.theta >= cfg.iou_thresholds.len()
                || c.class >= cfg.num_classes
                || c.area >= cfg.area_ranges.len()
                || c.max_dets >= cfg.max_dets.len()
            {
                return Err(Error::Validation(format!(
                    "snapshot cell ({}, {}, {}, {}) outside the configured grid",
                    c.theta, c.class, c.area, c.max_dets
                )));
            }
            let idx = cfg.cell_index(c.theta, c.class, c.area, c.max_dets);
            if state.cells[idx].is_some() {
                return Err(Error::Validation(format!("snapshot repeats cell {idx}")));
            }
            let mut h = Histogram::zeros(cfg.buckets);
            for [b, tp, fp] in c.counts {
                let b = usize::try_from(b)
                    .ok()
                    .filter(|&b| b < cfg.buckets)
                    .ok_or_else(|| Error::Validation(format!("bucket {b} out of range")))?;
                h.tp[b] += tp;
                h.fp[b] += fp;
            }
            state.cells[idx] = Some(Box::new(h));
        }
        Ok(state)
    }
}

fn describe_config_mismatch<T: Scalar>(a: &EvalConfig<T>, b: &EvalConfig<T>) -> String {
    let mut diffs = Vec::new();
    if a.buckets != b.buckets {
        diffs.push(format!("buckets {} vs {}", a.buckets, b.buckets));
    }
    if a.num_classes != b.num_classes {
        diffs.push(format!(
            "num_classes {} vs {}",
            a.num_classes, b.num_classes
        ));
    }
    if a.iou_thresholds != b.iou_thresholds {
        diffs.push("IoU thresholds differ".into());
    }
    if a.recall_thresholds != b.recall_thresholds {
        diffs.push("recall thresholds differ".into());
    }
    if a.area_ranges != b.area_ranges {
        diffs.push("area ranges differ".into());
    }
    if a.max_dets != b.max_dets {
        diffs.push(format!("max_dets {:?} vs {:?}", a.max_dets, b.max_dets));
    }
    format!("configurations differ: {}", diffs.join(", "))
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct Snapshot<T> {
    format: String,
    version: u32,
    config: EvalConfig<T>,
    gt_counts: Vec<u64>,
    cells: Vec<SnapshotCell>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotCell {
    theta: usize,
    class: usize,
    area: usize,
    max_dets: usize,
    counts: Vec<[u64; 3]>,
}
