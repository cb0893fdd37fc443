//! Evaluation parameter grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::AreaRange;
use crate::streaming::DEFAULT_BUCKETS;
use crate::Scalar;

/// Threshold lookups by value accept this much slack so that `0.5` matches a
/// grid value computed as `50 / 100`.
const THRESHOLD_LOOKUP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct NamedAreaRange<T> {
    pub name: String,
    pub range: AreaRange<T>,
}

impl<T: Scalar> NamedAreaRange<T> {
    pub fn new(name: impl Into<String>, range: AreaRange<T>) -> Self {
        Self {
            name: name.into(),
            range,
        }
    }
}

/// The parameter grid every image is matched over.
///
/// Metrics are read back by name and value: the `"all"`, `"small"`,
/// `"medium"` and `"large"` area ranges, the IoU thresholds 0.5 and 0.75, and
/// the max-detection limits 1, 10, 100. Standard metrics use the largest
/// max-detection limit. A metric whose cell is missing from the grid is
/// reported as undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct EvalConfig<T> {
    pub iou_thresholds: Vec<T>,
    pub recall_thresholds: Vec<T>,
    pub buckets: usize,
    pub area_ranges: Vec<NamedAreaRange<T>>,
    pub max_dets: Vec<usize>,
    pub num_classes: usize,
}

impl<T: Scalar> EvalConfig<T> {
    /// Challenge defaults: IoU 0.50:0.05:0.95, 101 recall points, 10000
    /// buckets, all/small/medium/large areas, max detections 1/10/100.
    pub fn coco(num_classes: usize) -> Self {
        Self {
            iou_thresholds: default_iou_thresholds(),
            recall_thresholds: evenly_spaced(101),
            buckets: DEFAULT_BUCKETS,
            area_ranges: default_area_ranges(),
            max_dets: vec![1, 10, 100],
            num_classes,
        }
    }

    pub fn with_buckets(mut self, buckets: usize) -> Self {
        self.buckets = buckets;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.num_classes == 0 {
            return cfg("num_classes must be at least 1".into());
        }
        if self.buckets == 0 {
            return cfg("buckets must be at least 1".into());
        }
        if self.iou_thresholds.is_empty() {
            return cfg("IoU threshold set is empty".into());
        }
        if let Some(t) = self
            .iou_thresholds
            .iter()
            .find(|&&t| !(t > T::zero() && t <= T::one()))
        {
            return cfg(format!("IoU threshold {t} outside (0, 1]"));
        }
        if !strictly_increasing(&self.iou_thresholds) {
            return cfg("IoU thresholds must be strictly increasing".into());
        }
        if self.recall_thresholds.is_empty() {
            return cfg("recall threshold set is empty".into());
        }
        if let Some(r) = self
            .recall_thresholds
            .iter()
            .find(|&&r| !(r >= T::zero() && r <= T::one()))
        {
            return cfg(format!("recall threshold {r} outside [0, 1]"));
        }
        if !strictly_increasing(&self.recall_thresholds) {
            return cfg("recall thresholds must be strictly increasing".into());
        }
        if self.area_ranges.is_empty() {
            return cfg("no area ranges configured".into());
        }
        for (i, a) in self.area_ranges.iter().enumerate() {
            a.range.validate()?;
            if self.area_ranges[..i].iter().any(|b| b.name == a.name) {
                return cfg(format!("duplicate area range name {:?}", a.name));
            }
        }
        if self.max_dets.is_empty() {
            return cfg("max-detections list is empty".into());
        }
        if self.max_dets.contains(&0) {
            return cfg("max-detections limits must be positive".into());
        }
        if !self.max_dets.windows(2).all(|w| w[0] < w[1]) {
            return cfg("max-detections limits must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.iou_thresholds.len() * self.num_classes * self.area_ranges.len() * self.max_dets.len()
    }

    /// Flat index of an (IoU threshold, class, area range, max-dets) cell.
    pub fn cell_index(&self, theta: usize, class: usize, area: usize, max_dets: usize) -> usize {
        ((theta * self.num_classes + class) * self.area_ranges.len() + area) * self.max_dets.len()
            + max_dets
    }

    /// Inverse of [`cell_index`](Self::cell_index).
    pub fn cell_coords(&self, cell: usize) -> (usize, usize, usize, usize) {
        let m = cell % self.max_dets.len();
        let rest = cell / self.max_dets.len();
        let a = rest % self.area_ranges.len();
        let rest = rest / self.area_ranges.len();
        let c = rest % self.num_classes;
        (rest / self.num_classes, c, a, m)
    }

    pub fn gt_index(&self, class: usize, area: usize) -> usize {
        class * self.area_ranges.len() + area
    }

    pub fn theta_index(&self, value: f64) -> Option<usize> {
        self.iou_thresholds.iter().position(|t| {
            (t.to_f64().unwrap_or(f64::NAN) - value).abs() <= THRESHOLD_LOOKUP_TOLERANCE
        })
    }

    pub fn area_index(&self, name: &str) -> Option<usize> {
        self.area_ranges.iter().position(|a| a.name == name)
    }

    pub fn max_dets_index(&self, limit: usize) -> Option<usize> {
        self.max_dets.iter().position(|&m| m == limit)
    }

    pub fn largest_max_dets(&self) -> usize {
        self.max_dets.last().copied().unwrap_or(0)
    }
}

/// `n` points `k / (n - 1)` for `k = 0..n`, each a single correctly rounded
/// division so that grid points compare exactly against count ratios.
pub fn evenly_spaced<T: Scalar>(n: usize) -> Vec<T> {
    match n {
        0 => vec![],
        1 => vec![T::zero()],
        _ => (0..n)
            .map(|k| T::from_count(k as u64) / T::from_count((n - 1) as u64))
            .collect(),
    }
}

pub fn default_iou_thresholds<T: Scalar>() -> Vec<T> {
    (0..10)
        .map(|k| T::from_count(50 + 5 * k) / T::from_count(100))
        .collect()
}

pub fn default_area_ranges<T: Scalar>() -> Vec<NamedAreaRange<T>> {
    let small = T::lit(32.0 * 32.0);
    let medium = T::lit(96.0 * 96.0);
    vec![
        NamedAreaRange::new("all", AreaRange::all()),
        NamedAreaRange::new("small", AreaRange::new(T::zero(), Some(small)).unwrap()),
        NamedAreaRange::new("medium", AreaRange::new(small, Some(medium)).unwrap()),
        NamedAreaRange::new("large", AreaRange::new(medium, None).unwrap()),
    ]
}

fn strictly_increasing<T: Scalar>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}
