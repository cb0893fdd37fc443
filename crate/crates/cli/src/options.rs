use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use cocostream::{AreaRange, EvalConfigF64, NamedAreaRange};

/// Overrides for the evaluation grid. Unset flags keep the challenge
/// defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct GridArgs {
    /// Comma-separated IoU thresholds, e.g. `0.5,0.75`
    #[arg(long, value_name = "LIST")]
    pub iou_thresholds: Option<String>,

    /// Comma-separated recall sampling points in [0, 1]
    #[arg(long, value_name = "LIST")]
    pub recall_thresholds: Option<String>,

    /// Named box-area ranges `name=min:max`, comma separated; `inf` for no
    /// upper bound, e.g. `all=0:inf,small=0:1024`
    #[arg(long, value_name = "LIST")]
    pub area_ranges: Option<String>,

    /// Comma-separated, strictly increasing max-detection limits
    #[arg(long, value_name = "LIST")]
    pub max_dets: Option<String>,
}

impl GridArgs {
    pub fn build(&self, num_classes: usize, buckets: usize) -> Result<EvalConfigF64> {
        let mut cfg = EvalConfigF64::coco(num_classes).with_buckets(buckets);
        if let Some(s) = &self.iou_thresholds {
            cfg.iou_thresholds = parse_list(s).context("--iou-thresholds")?;
        }
        if let Some(s) = &self.recall_thresholds {
            cfg.recall_thresholds = parse_list(s).context("--recall-thresholds")?;
        }
        if let Some(s) = &self.area_ranges {
            cfg.area_ranges = parse_area_ranges(s).context("--area-ranges")?;
        }
        if let Some(s) = &self.max_dets {
            cfg.max_dets = parse_list(s).context("--max-dets")?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow!("bad value {t:?}: {e}")))
        .collect()
}

pub fn parse_area_ranges(s: &str) -> Result<Vec<NamedAreaRange<f64>>> {
    parse_list::<String>(s)?
        .into_iter()
        .map(|item| {
            let (name, bounds) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("area range {item:?} is not name=min:max"))?;
            let (lo, hi) = bounds
                .split_once(':')
                .ok_or_else(|| anyhow!("area range {item:?} is not name=min:max"))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .with_context(|| format!("lower bound in {item:?}"))?;
            let hi = match hi.trim() {
                "inf" | "" => None,
                v => Some(
                    v.parse::<f64>()
                        .with_context(|| format!("upper bound in {item:?}"))?,
                ),
            };
            if name.trim().is_empty() {
                bail!("area range {item:?} has no name");
            }
            Ok(NamedAreaRange::new(name.trim(), AreaRange::new(lo, hi)?))
        })
        .collect()
}
