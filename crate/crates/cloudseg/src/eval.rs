//! Segmentation metrics, k-fold cross-validation, the ROC sweep of the
//! trained segmenter, and metadata breakdowns.
//!
//! Metrics are pixel-pooled per image; dataset scores are the unweighted
//! mean of per-image scores (a pooled aggregate is also reported). With zero
//! denominators, precision is 1 only when there are also no actual
//! positives (otherwise 0), and symmetrically for recall.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::color::ChannelId;
use crate::dataset::{EntryMetadata, SampleSource};
use crate::error::{Error, Result};
use crate::image::GroundTruthMask;
use crate::pls::{binarize, predict_image, train_from_images, PlsModel};

/// Confusion counts and the derived rates for one prediction/truth pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub misclassification: f64,
}

impl Metrics {
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Metrics {
        let precision = if tp + fp == 0 {
            if tp + fn_ == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            if tp + fp == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f_score = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let total = (tp + tn + fp + fn_) as f64;
        Metrics {
            true_positives: tp,
            true_negatives: tn,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f_score,
            misclassification: (fp + fn_) as f64 / total,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}

/// Scores a predicted mask against ground truth (cloud = positive).
pub fn score(pred: &GroundTruthMask, gt: &GroundTruthMask) -> Result<Metrics> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (p, g) in pred.labels().iter().zip(gt.labels()) {
        match (p, g) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, tn, fp, fn_))
}

/// Unweighted means of per-image rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanScores {
    pub images: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub misclassification: f64,
}

pub fn mean_scores(per_image: &[Metrics]) -> MeanScores {
    let n = per_image.len() as f64;
    MeanScores {
        images: per_image.len(),
        precision: per_image.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: per_image.iter().map(|m| m.recall).sum::<f64>() / n,
        f_score: per_image.iter().map(|m| m.f_score).sum::<f64>() / n,
        misclassification: per_image.iter().map(|m| m.misclassification).sum::<f64>() / n,
    }
}

/// Sums confusion counts over images into one pooled Metrics.
pub fn pooled_metrics(per_image: &[Metrics]) -> Metrics {
    let mut counts = (0u64, 0u64, 0u64, 0u64);
    for m in per_image {
        counts.0 += m.true_positives;
        counts.1 += m.true_negatives;
        counts.2 += m.false_positives;
        counts.3 += m.false_negatives;
    }
    Metrics::from_counts(counts.0, counts.1, counts.2, counts.3)
}

/// Deterministic fold assignment: every image in exactly one fold, fold
/// sizes differing by at most one.
#[derive(Debug, Clone)]
pub struct CvPlan {
    pub folds: usize,
    pub seed: u64,
    /// `assignments[image_index] = fold`.
    pub assignments: Vec<usize>,
}

pub fn make_cv_plan(n_images: usize, folds: usize, seed: u64) -> Result<CvPlan> {
    if folds < 2 || folds > n_images {
        return Err(Error::InvalidArgument(format!(
            "folds must satisfy 2 <= folds <= images, got folds={folds}, images={n_images}"
        )));
    }
    let mut order: Vec<usize> = (0..n_images).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n_images];
    for (pos, image) in order.into_iter().enumerate() {
        assignments[image] = pos % folds;
    }
    Ok(CvPlan {
        folds,
        seed,
        assignments,
    })
}

#[derive(Debug, Clone)]
pub struct ImageScore {
    pub index: usize,
    pub fold: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub plan: CvPlan,
    pub channels: Vec<ChannelId>,
    pub components: usize,
    pub threshold: f64,
    pub per_image: Vec<ImageScore>,
    pub fold_means: Vec<MeanScores>,
    /// Unweighted mean over all images (each tested exactly once).
    pub mean: MeanScores,
    /// Pixel-pooled aggregate over the whole run.
    pub pooled: Metrics,
    pub warnings: Vec<String>,
}

/// Trains on the complement of each fold and scores its images at the given
/// binarization threshold.
pub fn cross_validate(
    source: &dyn SampleSource,
    folds: usize,
    channels: &[ChannelId],
    components: usize,
    threshold: f64,
    seed: u64,
) -> Result<CvReport> {
    let n = source.len();
    let plan = make_cv_plan(n, folds, seed)?;
    let mut per_image = Vec::with_capacity(n);
    let mut fold_means = Vec::with_capacity(folds);
    let mut warnings = Vec::new();

    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..n).filter(|i| plan.assignments[*i] != fold).collect();
        let test_idx: Vec<usize> = (0..n).filter(|i| plan.assignments[*i] == fold).collect();
        let (model, summary) = train_from_images(
            train_idx.iter().map(|i| source.load(*i)),
            channels,
            components,
        )?;
        if !summary.has_both_classes() {
            warnings.push(format!(
                "fold {fold}: training pixels are single-class; model degenerates to a constant"
            ));
        }
        let scores: Vec<Result<Metrics>> = test_idx
            .par_iter()
            .map(|i| {
                let (img, gt) = source.load(*i)?;
                let prob = predict_image(&model, &img)?;
                let mask = binarize(&prob, threshold)?;
                score(&mask, &gt)
            })
            .collect();
        let mut fold_scores = Vec::with_capacity(test_idx.len());
        for (i, s) in test_idx.iter().zip(scores) {
            let metrics = s?;
            fold_scores.push(metrics);
            per_image.push(ImageScore {
                index: *i,
                fold,
                metrics,
            });
        }
        fold_means.push(mean_scores(&fold_scores));
    }

    per_image.sort_by_key(|s| s.index);
    let all: Vec<Metrics> = per_image.iter().map(|s| s.metrics).collect();
    Ok(CvReport {
        plan,
        channels: channels.to_vec(),
        components,
        threshold,
        mean: mean_scores(&all),
        pooled: pooled_metrics(&all),
        per_image,
        fold_means,
        warnings,
    })
}

/// One point of the proposed-method ROC sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub threshold: f64,
    pub mean_fpr: f64,
    pub mean_tpr: f64,
    pub stderr_fpr: f64,
    pub stderr_tpr: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub trials: usize,
    pub train_size: usize,
    pub points: Vec<SweepPoint>,
}

/// Customary train/test split sizes for the named databases; otherwise an
/// even split.
pub fn default_train_size(dataset_name: &str, n_images: usize) -> usize {
    match dataset_name.to_ascii_uppercase().as_str() {
        "HYTA" if n_images == 32 => 17,
        "SWIMSEG" if n_images == 1013 => 500,
        _ => (n_images / 2).max(1),
    }
}

pub fn default_sweep_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// For each trial, splits the images at random into train/test, trains once,
/// then pools test-set confusion counts at every threshold. Points aggregate
/// mean and standard error over trials.
pub fn roc_sweep(
    source: &dyn SampleSource,
    channels: &[ChannelId],
    components: usize,
    trials: usize,
    thresholds: &[f64],
    train_size: usize,
    seed: u64,
) -> Result<SweepReport> {
    let n = source.len();
    if n < 2 || train_size == 0 || train_size >= n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= train_size < images, got train_size={train_size}, images={n}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if thresholds.is_empty() || thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument(
            "thresholds must be a non-empty subset of [0,1]".into(),
        ));
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fprs = vec![Vec::with_capacity(trials); sorted.len()];
    let mut tprs = vec![Vec::with_capacity(trials); sorted.len()];

    for _ in 0..trials {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (train_idx, test_idx) = order.split_at(train_size);
        let (model, _) = train_from_images(
            train_idx.iter().map(|i| source.load(*i)),
            channels,
            components,
        )?;

        // Pooled confusion counts per threshold over the whole test set.
        type Counts = (u64, u64, u64, u64);
        let partials: Vec<Result<Vec<Counts>>> = test_idx
            .par_iter()
            .map(|i| {
                let (img, gt) = source.load(*i)?;
                let prob = predict_image(&model, &img)?;
                let mut counts = vec![(0u64, 0u64, 0u64, 0u64); sorted.len()];
                for (p, g) in prob.values.iter().zip(gt.labels()) {
                    for (ti, t) in sorted.iter().enumerate() {
                        let predicted = *p >= *t;
                        let c = &mut counts[ti];
                        match (predicted, *g == 1) {
                            (true, true) => c.0 += 1,
                            (false, false) => c.1 += 1,
                            (true, false) => c.2 += 1,
                            (false, true) => c.3 += 1,
                        }
                    }
                }
                Ok(counts)
            })
            .collect();
        let mut totals = vec![(0u64, 0u64, 0u64, 0u64); sorted.len()];
        for partial in partials {
            for (t, c) in partial?.into_iter().enumerate() {
                totals[t].0 += c.0;
                totals[t].1 += c.1;
                totals[t].2 += c.2;
                totals[t].3 += c.3;
            }
        }
        for (ti, (tp, tn, fp, fn_)) in totals.into_iter().enumerate() {
            let fpr = if fp + tn == 0 {
                0.0
            } else {
                fp as f64 / (fp + tn) as f64
            };
            let tpr = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            fprs[ti].push(fpr);
            tprs[ti].push(tpr);
        }
    }

    let stderr = |xs: &[f64]| {
        if xs.len() < 2 {
            return 0.0;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    let points = sorted
        .iter()
        .enumerate()
        .map(|(ti, t)| SweepPoint {
            threshold: *t,
            mean_fpr: fprs[ti].iter().sum::<f64>() / trials as f64,
            mean_tpr: tprs[ti].iter().sum::<f64>() / trials as f64,
            stderr_fpr: stderr(&fprs[ti]),
            stderr_tpr: stderr(&tprs[ti]),
        })
        .collect();
    Ok(SweepReport {
        trials,
        train_size,
        points,
    })
}

/// Metadata axis for F-score breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    TimeOfDay,
    CloudCoverage,
    SunDistance,
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Grouping::TimeOfDay => write!(f, "time_of_day"),
            Grouping::CloudCoverage => write!(f, "cloud_coverage"),
            Grouping::SunDistance => write!(f, "sun_distance"),
        }
    }
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "time_of_day" | "time" => Ok(Grouping::TimeOfDay),
            "cloud_coverage" | "coverage" => Ok(Grouping::CloudCoverage),
            "sun_distance" | "sun" => Ok(Grouping::SunDistance),
            other => Err(Error::InvalidArgument(format!(
                "unknown grouping '{other}' (expected time_of_day, cloud_coverage or sun_distance)"
            ))),
        }
    }
}

impl Grouping {
    fn value(&self, meta: &EntryMetadata) -> Option<f64> {
        match self {
            Grouping::TimeOfDay => meta.time_of_day,
            Grouping::CloudCoverage => meta.cloud_coverage,
            Grouping::SunDistance => meta.sun_distance,
        }
    }

    /// Bin key and its printable label. Hours for time of day, deciles for
    /// coverage, 10-degree rings for sun distance.
    fn bin(&self, v: f64) -> (i64, String) {
        match self {
            Grouping::TimeOfDay => {
                let h = (v / 60.0).floor() as i64;
                (h, format!("{h:02}h-{:02}h", h + 1))
            }
            Grouping::CloudCoverage => {
                let d = ((v * 10.0).floor() as i64).min(9);
                (d, format!("{:.1}-{:.1}", d as f64 / 10.0, (d + 1) as f64 / 10.0))
            }
            Grouping::SunDistance => {
                let b = (v / 10.0).floor() as i64;
                (b, format!("{}-{}deg", b * 10, (b + 1) * 10))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BreakdownRow {
    pub bin: String,
    pub images: usize,
    pub mean_f_score: f64,
}

#[derive(Debug, Clone)]
pub struct BreakdownReport {
    pub grouping: Grouping,
    pub rows: Vec<BreakdownRow>,
    /// Images skipped for missing metadata.
    pub skipped: usize,
}

/// Mean F-score per metadata bin; entries without the grouping field are
/// skipped (and counted).
pub fn breakdown(
    source: &dyn SampleSource,
    model: &PlsModel,
    grouping: Grouping,
    threshold: f64,
) -> Result<BreakdownReport> {
    let n = source.len();
    let mut skipped = 0usize;
    let mut tagged: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        match source.metadata(i).and_then(|m| grouping.value(&m)) {
            Some(v) => tagged.push((i, v)),
            None => skipped += 1,
        }
    }
    if tagged.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no manifest rows carry {grouping} metadata"
        )));
    }
    let f_scores: Vec<Result<f64>> = tagged
        .par_iter()
        .map(|(i, _)| {
            let (img, gt) = source.load(*i)?;
            let prob = predict_image(model, &img)?;
            let mask = binarize(&prob, threshold)?;
            Ok(score(&mask, &gt)?.f_score)
        })
        .collect();

    let mut bins: std::collections::BTreeMap<i64, (String, Vec<f64>)> =
        std::collections::BTreeMap::new();
    for ((_, v), f) in tagged.iter().zip(f_scores) {
        let f = f?;
        let (key, label) = grouping.bin(*v);
        bins.entry(key).or_insert_with(|| (label, Vec::new())).1.push(f);
    }
    let rows = bins
        .into_values()
        .map(|(bin, fs)| BreakdownRow {
            images: fs.len(),
            mean_f_score: fs.iter().sum::<f64>() / fs.len() as f64,
            bin,
        })
        .collect();
    Ok(BreakdownReport {
        grouping,
        rows,
        skipped,
    })
}

/// Evaluates a trained model over every sample, per-image and aggregated.
pub fn evaluate(
    source: &dyn SampleSource,
    model: &PlsModel,
    threshold: f64,
) -> Result<(Vec<Metrics>, MeanScores, Metrics)> {
    let scores: Vec<Result<Metrics>> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let (img, gt) = source.load(i)?;
            let prob = predict_image(model, &img)?;
            let mask = binarize(&prob, threshold)?;
            score(&mask, &gt)
        })
        .collect();
    let per_image: Vec<Metrics> = scores.into_iter().collect::<Result<_>>()?;
    let mean = mean_scores(&per_image);
    let pooled = pooled_metrics(&per_image);
    Ok((per_image, mean, pooled))
}
