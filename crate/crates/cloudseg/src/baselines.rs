//! Classical threshold segmentation baselines used for benchmarking: fixed
//! red/blue ratio, saturation threshold, and a hybrid fixed/adaptive
//! threshold on the normalized blue/red channel.
//!
//! The hybrid method is a faithful-variant reimplementation: the original
//! algorithm's internals are not fully published, so the adaptive branch uses
//! the Otsu criterion over a 256-bin histogram.

use crate::color::{pixel_channels, ChannelId, RATIO_EPSILON};
use crate::error::{Error, Result};
use crate::image::{GroundTruthMask, Image};

pub const DEFAULT_LONG_THRESHOLD: f64 = 0.6;
pub const DEFAULT_SOUZA_THRESHOLD: f64 = 0.2;
pub const DEFAULT_LI_FIXED_THRESHOLD: f64 = 0.25;
pub const DEFAULT_HYBRID_STD_CUTOFF: f64 = 0.03;
pub const OTSU_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    LongRatio,
    SouzaSaturation,
    LiHybrid,
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaselineMethod::LongRatio => write!(f, "long"),
            BaselineMethod::SouzaSaturation => write!(f, "souza"),
            BaselineMethod::LiHybrid => write!(f, "li"),
        }
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "long" => Ok(BaselineMethod::LongRatio),
            "souza" => Ok(BaselineMethod::SouzaSaturation),
            "li" => Ok(BaselineMethod::LiHybrid),
            other => Err(Error::InvalidArgument(format!(
                "unknown baseline method '{other}' (expected long, souza or li)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub fixed_threshold: f64,
    pub hybrid_std_cutoff: f64,
}

impl BaselineConfig {
    pub fn new(method: BaselineMethod, fixed_threshold: f64, hybrid_std_cutoff: f64) -> Result<Self> {
        let range = match method {
            BaselineMethod::LongRatio => 0.0..=(1.0 / RATIO_EPSILON),
            BaselineMethod::SouzaSaturation => 0.0..=1.0,
            BaselineMethod::LiHybrid => -1.0..=1.0,
        };
        if !range.contains(&fixed_threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold {fixed_threshold} outside {method} channel range {range:?}"
            )));
        }
        if hybrid_std_cutoff <= 0.0 {
            return Err(Error::InvalidArgument(
                "hybrid std cutoff must be positive".into(),
            ));
        }
        Ok(BaselineConfig {
            method,
            fixed_threshold,
            hybrid_std_cutoff,
        })
    }

    pub fn defaults(method: BaselineMethod) -> Self {
        let fixed = match method {
            BaselineMethod::LongRatio => DEFAULT_LONG_THRESHOLD,
            BaselineMethod::SouzaSaturation => DEFAULT_SOUZA_THRESHOLD,
            BaselineMethod::LiHybrid => DEFAULT_LI_FIXED_THRESHOLD,
        };
        BaselineConfig {
            method,
            fixed_threshold: fixed,
            hybrid_std_cutoff: DEFAULT_HYBRID_STD_CUTOFF,
        }
    }

    pub fn segment(&self, img: &Image) -> GroundTruthMask {
        match self.method {
            BaselineMethod::LongRatio => long_ratio(img, self.fixed_threshold),
            BaselineMethod::SouzaSaturation => souza_saturation(img, self.fixed_threshold),
            BaselineMethod::LiHybrid => li_hybrid(img, self),
        }
    }
}

fn per_pixel_mask(img: &Image, rule: impl Fn([f64; 3]) -> bool) -> GroundTruthMask {
    let labels = img.pixels().iter().map(|p| rule(*p) as u8).collect();
    GroundTruthMask::new(img.width(), img.height(), labels).expect("image dims are valid")
}

/// Cloud iff `R/(B+eps) >= thresh`: clouds are whiter, sky is blue-dominant.
pub fn long_ratio(img: &Image, thresh: f64) -> GroundTruthMask {
    per_pixel_mask(img, |p| {
        pixel_channels(p)[ChannelId::C13.index()] >= thresh
    })
}

/// Cloud iff `S <= thresh`: clouds are desaturated.
pub fn souza_saturation(img: &Image, thresh: f64) -> GroundTruthMask {
    per_pixel_mask(img, |p| pixel_channels(p)[ChannelId::C5.index()] <= thresh)
}

/// Otsu threshold over `bins` uniform bins spanning `[lo, hi]`: the split
/// maximizing between-class variance (equivalently minimizing intra-class
/// variance). Returns the upper edge of the chosen low bin, or None when the
/// histogram cannot be split (all mass in one bin).
pub fn otsu_threshold(values: &[f64], bins: usize, lo: f64, hi: f64) -> Option<f64> {
    assert!(bins >= 2 && hi > lo);
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0u64; bins];
    for v in values {
        let idx = (((v - lo) / width) as isize).clamp(0, bins as isize - 1) as usize;
        hist[idx] += 1;
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return None;
    }
    let centers: Vec<f64> = (0..bins)
        .map(|b| lo + (b as f64 + 0.5) * width)
        .collect();
    let total_sum: f64 = hist
        .iter()
        .zip(&centers)
        .map(|(h, c)| *h as f64 * c)
        .sum();

    let mut best: Option<(f64, usize)> = None;
    let mut low_count = 0u64;
    let mut low_sum = 0.0;
    for split in 0..bins - 1 {
        low_count += hist[split];
        low_sum += hist[split] as f64 * centers[split];
        let high_count = total - low_count;
        if low_count == 0 || high_count == 0 {
            continue;
        }
        let mu_low = low_sum / low_count as f64;
        let mu_high = (total_sum - low_sum) / high_count as f64;
        let between =
            low_count as f64 * high_count as f64 * (mu_low - mu_high) * (mu_low - mu_high);
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, split));
        }
    }
    best.map(|(_, split)| lo + (split as f64 + 1.0) * width)
}

/// Hybrid threshold on `n = (B-R)/(B+R+eps)`. A near-constant n distribution
/// (std below the cutoff) takes the fixed threshold; otherwise the Otsu
/// threshold over 256 bins of [-1,1] is used. Cloud iff `n <= t`.
pub fn li_hybrid(img: &Image, cfg: &BaselineConfig) -> GroundTruthMask {
    let n_values: Vec<f64> = img
        .pixels()
        .iter()
        .map(|p| pixel_channels(*p)[ChannelId::C15.index()])
        .collect();
    let count = n_values.len() as f64;
    let mean: f64 = n_values.iter().sum::<f64>() / count;
    let var: f64 = n_values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (count - 1.0).max(1.0);
    let threshold = if var.sqrt() < cfg.hybrid_std_cutoff {
        cfg.fixed_threshold
    } else {
        otsu_threshold(&n_values, OTSU_BINS, -1.0, 1.0).unwrap_or(cfg.fixed_threshold)
    };
    let labels = n_values.iter().map(|n| (*n <= threshold) as u8).collect();
    GroundTruthMask::new(img.width(), img.height(), labels).expect("image dims are valid")
}
