//! The twelve standard scalar metrics and the reduction from per-cell scores
//! to them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::Scalar;

/// Value reported for a metric with no ground truth to score against.
pub const UNDEFINED: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    MapStandard,
    Map50,
    Map75,
    MapSmall,
    MapMedium,
    MapLarge,
    RecallMaxDets1,
    RecallMaxDets10,
    RecallMaxDets100,
    RecallSmall,
    RecallMedium,
    RecallLarge,
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::MapStandard,
        Metric::Map50,
        Metric::Map75,
        Metric::MapSmall,
        Metric::MapMedium,
        Metric::MapLarge,
        Metric::RecallMaxDets1,
        Metric::RecallMaxDets10,
        Metric::RecallMaxDets100,
        Metric::RecallSmall,
        Metric::RecallMedium,
        Metric::RecallLarge,
    ];

    /// Machine-readable key, identical to the [`MetricReport`] field name.
    pub fn key(self) -> &'static str {
        match self {
            Metric::MapStandard => "map_standard",
            Metric::Map50 => "map_50",
            Metric::Map75 => "map_75",
            Metric::MapSmall => "map_small",
            Metric::MapMedium => "map_medium",
            Metric::MapLarge => "map_large",
            Metric::RecallMaxDets1 => "recall_maxdets_1",
            Metric::RecallMaxDets10 => "recall_maxdets_10",
            Metric::RecallMaxDets100 => "recall_maxdets_100",
            Metric::RecallSmall => "recall_small",
            Metric::RecallMedium => "recall_medium",
            Metric::RecallLarge => "recall_large",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::MapStandard => "Standard MaP",
            Metric::Map50 => "MaP IoU=0.5",
            Metric::Map75 => "MaP IoU=0.75",
            Metric::MapSmall => "MaP Small Objects",
            Metric::MapMedium => "MaP Medium Objects",
            Metric::MapLarge => "MaP Large Objects",
            Metric::RecallMaxDets1 => "Recall 1 Detection",
            Metric::RecallMaxDets10 => "Recall 10 Detections",
            Metric::RecallMaxDets100 => "Standard Recall",
            Metric::RecallSmall => "Recall Small Objects",
            Metric::RecallMedium => "Recall Medium Objects",
            Metric::RecallLarge => "Recall Large Objects",
        }
    }

    pub fn is_map(self) -> bool {
        matches!(
            self,
            Metric::MapStandard
                | Metric::Map50
                | Metric::Map75
                | Metric::MapSmall
                | Metric::MapMedium
                | Metric::MapLarge
        )
    }

    pub fn from_key(key: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.key() == key)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Each field is a ratio in `[0, 1]`, or [`UNDEFINED`] (-1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MetricReport<T> {
    pub map_standard: T,
    pub map_50: T,
    pub map_75: T,
    pub map_small: T,
    pub map_medium: T,
    pub map_large: T,
    pub recall_maxdets_1: T,
    pub recall_maxdets_10: T,
    pub recall_maxdets_100: T,
    pub recall_small: T,
    pub recall_medium: T,
    pub recall_large: T,
}

impl<T: Scalar> MetricReport<T> {
    pub fn undefined() -> Self {
        let u = T::lit(UNDEFINED);
        Self {
            map_standard: u,
            map_50: u,
            map_75: u,
            map_small: u,
            map_medium: u,
            map_large: u,
            recall_maxdets_1: u,
            recall_maxdets_10: u,
            recall_maxdets_100: u,
            recall_small: u,
            recall_medium: u,
            recall_large: u,
        }
    }

    pub fn get(&self, metric: Metric) -> T {
        *self.slot(metric)
    }

    /// `None` for the undefined sentinel.
    pub fn value(&self, metric: Metric) -> Option<T> {
        let v = self.get(metric);
        (v >= T::zero()).then_some(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Metric, T)> + '_ {
        Metric::ALL.into_iter().map(|m| (m, self.get(m)))
    }

    fn slot(&self, metric: Metric) -> &T {
        match metric {
            Metric::MapStandard => &self.map_standard,
            Metric::Map50 => &self.map_50,
            Metric::Map75 => &self.map_75,
            Metric::MapSmall => &self.map_small,
            Metric::MapMedium => &self.map_medium,
            Metric::MapLarge => &self.map_large,
            Metric::RecallMaxDets1 => &self.recall_maxdets_1,
            Metric::RecallMaxDets10 => &self.recall_maxdets_10,
            Metric::RecallMaxDets100 => &self.recall_maxdets_100,
            Metric::RecallSmall => &self.recall_small,
            Metric::RecallMedium => &self.recall_medium,
            Metric::RecallLarge => &self.recall_large,
        }
    }

    fn slot_mut(&mut self, metric: Metric) -> &mut T {
        match metric {
            Metric::MapStandard => &mut self.map_standard,
            Metric::Map50 => &mut self.map_50,
            Metric::Map75 => &mut self.map_75,
            Metric::MapSmall => &mut self.map_small,
            Metric::MapMedium => &mut self.map_medium,
            Metric::MapLarge => &mut self.map_large,
            Metric::RecallMaxDets1 => &mut self.recall_maxdets_1,
            Metric::RecallMaxDets10 => &mut self.recall_maxdets_10,
            Metric::RecallMaxDets100 => &mut self.recall_maxdets_100,
            Metric::RecallSmall => &mut self.recall_small,
            Metric::RecallMedium => &mut self.recall_medium,
            Metric::RecallLarge => &mut self.recall_large,
        }
    }
}

/// Average precision and recall for every grid cell, `None` where the
/// (class, area range) pair has no ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct CellScores<T> {
    pub(crate) ap: Vec<Option<T>>,
    pub(crate) recall: Vec<Option<T>>,
}

impl<T: Scalar> CellScores<T> {
    pub(crate) fn new(num_cells: usize) -> Self {
        Self {
            ap: vec![None; num_cells],
            recall: vec![None; num_cells],
        }
    }

    pub fn ap(&self, cell: usize) -> Option<T> {
        self.ap[cell]
    }

    pub fn recall(&self, cell: usize) -> Option<T> {
        self.recall[cell]
    }

    /// Reduces cells to the twelve metrics: mean over the selected IoU
    /// thresholds and over classes that have ground truth in the area range.
    pub fn summarize(&self, config: &EvalConfig<T>) -> MetricReport<T> {
        let all_thetas: Vec<usize> = (0..config.iou_thresholds.len()).collect();
        let all_area = config.area_index("all");
        let top_m = config.max_dets.len().checked_sub(1);

        let mut report = MetricReport::undefined();
        for metric in Metric::ALL {
            let thetas = match metric {
                Metric::Map50 => config.theta_index(0.5).into_iter().collect(),
                Metric::Map75 => config.theta_index(0.75).into_iter().collect(),
                _ => all_thetas.clone(),
            };
            let area = match metric {
                Metric::MapSmall | Metric::RecallSmall => config.area_index("small"),
                Metric::MapMedium | Metric::RecallMedium => config.area_index("medium"),
                Metric::MapLarge | Metric::RecallLarge => config.area_index("large"),
                _ => all_area,
            };
            let m = match metric {
                Metric::RecallMaxDets1 => config.max_dets_index(1),
                Metric::RecallMaxDets10 => config.max_dets_index(10),
                Metric::RecallMaxDets100 => config.max_dets_index(100),
                _ => top_m,
            };
            let values = if metric.is_map() {
                &self.ap
            } else {
                &self.recall
            };
            if let (Some(a), Some(m)) = (area, m) {
                *report.slot_mut(metric) = mean_over_classes(config, values, &thetas, a, m);
            }
        }
        report
    }
}

fn mean_over_classes<T: Scalar>(
    config: &EvalConfig<T>,
    values: &[Option<T>],
    thetas: &[usize],
    area: usize,
    m: usize,
) -> T {
    let mut sum = T::zero();
    let mut n = 0u64;
    for c in 0..config.num_classes {
        for &t in thetas {
            if let Some(v) = values[config.cell_index(t, c, area, m)] {
                sum = sum + v;
                n += 1;
            }
        }
    }
    if n == 0 {
        T::lit(UNDEFINED)
    } else {
        sum / T::from_count(n)
    }
}
