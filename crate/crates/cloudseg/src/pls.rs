//! Probabilistic sky/cloud segmentation by partial least squares regression.
//!
//! Training runs the SIMPLS algorithm on centered features and labels,
//! extracting latent components that maximize the covariance between the
//! predictor and response scores; the regression coefficients come out as
//! `B = W (P'W)^-1 C'`. Prediction applies `B` to centered features and
//! min-max normalizes the raw values into a per-pixel cloud belongingness
//! map in [0,1].
//!
//! All of the training math runs on the sufficient statistics (X'X, X'y and
//! the column means), so datasets of any pixel count stream through without
//! materializing the pooled regression matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::color::{pixel_channels, ChannelId};
use crate::error::{Error, Result};
use crate::image::{GroundTruthMask, Image};

/// Pixel-rows by selected-channels feature matrix.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub channel_ids: Vec<ChannelId>,
    /// Row-major `rows x k`.
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, channel_ids: Vec<ChannelId>, data: Vec<f64>) -> Result<Self> {
        if channel_ids.is_empty() {
            return Err(Error::InvalidArgument("need at least one channel".into()));
        }
        if data.len() != rows * channel_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values vs {} rows x {} channels",
                data.len(),
                rows,
                channel_ids.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStack("non-finite feature".into()));
        }
        Ok(FeatureMatrix {
            rows,
            channel_ids,
            data,
        })
    }

    /// Extracts the selected channels of every pixel, row-major.
    pub fn from_image(img: &Image, channels: &[ChannelId]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidArgument("need at least one channel".into()));
        }
        let k = channels.len();
        let mut data = Vec::with_capacity(img.len() * k);
        for p in img.pixels() {
            let all = pixel_channels(*p);
            for ch in channels {
                data.push(all[ch.index()]);
            }
        }
        Ok(FeatureMatrix {
            rows: img.len(),
            channel_ids: channels.to_vec(),
            data,
        })
    }

    pub fn k(&self) -> usize {
        self.channel_ids.len()
    }
}

/// A trained PLS regression: coefficients plus the centering statistics
/// needed at prediction time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlsModel {
    pub channel_ids: Vec<ChannelId>,
    pub num_components: usize,
    /// Regression coefficients `B`, one per channel.
    pub coefficients: Vec<f64>,
    pub x_means: Vec<f64>,
    pub y_mean: f64,
    /// Free-form provenance (image counts, manifest hash, ...).
    #[serde(default)]
    pub training_meta: serde_json::Value,
}

/// Latent factors extracted during training, exposed for diagnostics and for
/// verifying the score-orthogonality property.
#[derive(Debug, Clone)]
pub struct PlsFactors {
    /// Weight vectors, one `k`-vector per component; scores are `t_a = Xc w_a`.
    pub weights: Vec<Vec<f64>>,
    /// X loadings `p_a = Xc' t_a`.
    pub x_loadings: Vec<Vec<f64>>,
    /// y loadings `q_a = yc' t_a`.
    pub y_loadings: Vec<f64>,
}

/// Per-pixel cloud belongingness in [0,1]. Unless `degenerate`, the map
/// attains 0 and 1 exactly (min-max normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// `(X'X, X'y, x_means, y_mean)` after centering.
type CenteredMoments = (DMatrix<f64>, DVector<f64>, Vec<f64>, f64);

/// Sufficient statistics of the pooled regression problem.
#[derive(Debug, Clone)]
struct Moments {
    k: usize,
    n: u64,
    sum_x: Vec<f64>,
    sum_y: f64,
    /// `X'X`, full symmetric `k x k`.
    xtx: Vec<f64>,
    /// `X'y`.
    xty: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            k,
            n: 0,
            sum_x: vec![0.0; k],
            sum_y: 0.0,
            xtx: vec![0.0; k * k],
            xty: vec![0.0; k],
        }
    }

    fn add_row(&mut self, x: &[f64], y: f64) {
        for a in 0..self.k {
            self.sum_x[a] += x[a];
            self.xty[a] += x[a] * y;
            for b in a..self.k {
                self.xtx[a * self.k + b] += x[a] * x[b];
            }
        }
        self.sum_y += y;
        self.n += 1;
    }

    /// Centered Gram matrix, centered cross-covariance vector and the means.
    fn centered(&self) -> Result<CenteredMoments> {
        if self.n < 2 {
            return Err(Error::InsufficientPixels(self.n as usize));
        }
        let n = self.n as f64;
        let k = self.k;
        let x_means: Vec<f64> = self.sum_x.iter().map(|s| s / n).collect();
        let y_mean = self.sum_y / n;
        let mut g = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = self.xtx[a * k + b] - n * x_means[a] * x_means[b];
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        let s = DVector::from_fn(k, |a, _| self.xty[a] - n * x_means[a] * y_mean);
        Ok((g, s, x_means, y_mean))
    }
}

/// SIMPLS on centered sufficient statistics.
fn simpls(
    g: &DMatrix<f64>,
    s0: &DVector<f64>,
    p: usize,
    channel_ids: &[ChannelId],
) -> Result<(Vec<f64>, PlsFactors)> {
    let k = g.nrows();
    // A feature with (numerically) zero variance poisons the deflation.
    for j in 0..k {
        if g[(j, j)] <= 1e-18 {
            return Err(Error::DegenerateFeature(format!(
                "channel {} has zero variance",
                channel_ids[j]
            )));
        }
    }
    let trace_g: f64 = (0..k).map(|j| g[(j, j)]).sum();

    let s0_norm = s0.norm();
    if s0_norm == 0.0 {
        // Response carries no covariance with any feature (e.g. single-class
        // labels): the regression is the constant y_mean.
        return Ok((
            vec![0.0; k],
            PlsFactors {
                weights: vec![],
                x_loadings: vec![],
                y_loadings: vec![],
            },
        ));
    }

    let mut s = s0.clone();
    let mut weights: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut x_loadings: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut y_loadings: Vec<f64> = Vec::with_capacity(p);
    let mut ortho_basis: Vec<DVector<f64>> = Vec::with_capacity(p);

    for a in 0..p {
        if s.norm() <= 1e-12 * s0_norm {
            return Err(Error::DegenerateFeature(format!(
                "deflation exhausted after {a} components (requested {p})"
            )));
        }
        // Univariate response: the dominant singular direction of the
        // cross-covariance is the deflated s itself.
        let mut r = s.clone();
        let tt = (r.transpose() * g * &r)[(0, 0)];
        if tt <= f64::EPSILON * trace_g {
            return Err(Error::DegenerateFeature(format!(
                "score variance vanished at component {}",
                a + 1
            )));
        }
        r /= tt.sqrt();
        let p_a = g * &r;
        let q_a = s0.dot(&r);

        // Orthogonal basis of the loading space, used to deflate s so later
        // scores stay orthogonal to earlier ones.
        let mut v = p_a.clone();
        for prev in &ortho_basis {
            let proj = prev.dot(&p_a);
            v -= prev * proj;
        }
        let v_norm = v.norm();
        if v_norm <= 1e-12 * p_a.norm() {
            return Err(Error::DegenerateFeature(format!(
                "singular deflation at component {}",
                a + 1
            )));
        }
        v /= v_norm;
        let vs = v.dot(&s);
        s -= &v * vs;

        weights.push(r);
        x_loadings.push(p_a);
        y_loadings.push(q_a);
        ortho_basis.push(v);
    }

    // B = W (P'W)^-1 C'
    let p_used = weights.len();
    let w = DMatrix::from_fn(k, p_used, |i, j| weights[j][i]);
    let pl = DMatrix::from_fn(k, p_used, |i, j| x_loadings[j][i]);
    let c = DVector::from_vec(y_loadings.clone());
    let ptw = pl.transpose() * &w;
    let solved = ptw
        .lu()
        .solve(&c)
        .ok_or_else(|| Error::Numerical("singular P'W in coefficient solve".into()))?;
    let b = &w * solved;

    Ok((
        b.iter().copied().collect(),
        PlsFactors {
            weights: weights.iter().map(|v| v.iter().copied().collect()).collect(),
            x_loadings: x_loadings
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
            y_loadings,
        },
    ))
}

/// Trains a PLS regression from features to 0/1 labels with `p` components,
/// returning the model together with its latent factors.
pub fn train_detailed(
    features: &FeatureMatrix,
    labels: &[f64],
    p: usize,
) -> Result<(PlsModel, PlsFactors)> {
    if labels.len() != features.rows {
        return Err(Error::DimensionMismatch(format!(
            "{} labels vs {} feature rows",
            labels.len(),
            features.rows
        )));
    }
    let k = features.k();
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "components must satisfy 1 <= p <= k, got p={p}, k={k}"
        )));
    }
    let mut m = Moments::new(k);
    for (r, y) in labels.iter().enumerate() {
        m.add_row(&features.data[r * k..r * k + k], *y);
    }
    let (g, s, x_means, y_mean) = m.centered()?;
    let (coefficients, factors) = simpls(&g, &s, p, &features.channel_ids)?;
    Ok((
        PlsModel {
            channel_ids: features.channel_ids.clone(),
            num_components: p,
            coefficients,
            x_means,
            y_mean,
            training_meta: serde_json::Value::Null,
        },
        factors,
    ))
}

/// See [`train_detailed`]; discards the factors.
pub fn train(features: &FeatureMatrix, labels: &[f64], p: usize) -> Result<PlsModel> {
    train_detailed(features, labels, p).map(|(m, _)| m)
}

/// Summary of a pooled training run.
#[derive(Debug, Clone, Copy)]
pub struct TrainSummary {
    pub images: usize,
    pub pixels: u64,
    pub cloud_pixels: u64,
    pub sky_pixels: u64,
}

impl TrainSummary {
    /// False when every training pixel carries the same label.
    pub fn has_both_classes(&self) -> bool {
        self.cloud_pixels > 0 && self.sky_pixels > 0
    }
}

/// Pools pixels of all annotated images into one regression and trains on it.
pub fn train_from_images<I>(
    pairs: I,
    channels: &[ChannelId],
    p: usize,
) -> Result<(PlsModel, TrainSummary)>
where
    I: IntoIterator<Item = Result<(Image, GroundTruthMask)>>,
{
    if channels.is_empty() {
        return Err(Error::InvalidArgument("need at least one channel".into()));
    }
    let k = channels.len();
    if p == 0 || p > k {
        return Err(Error::InvalidArgument(format!(
            "components must satisfy 1 <= p <= k, got p={p}, k={k}"
        )));
    }
    let mut m = Moments::new(k);
    let mut summary = TrainSummary {
        images: 0,
        pixels: 0,
        cloud_pixels: 0,
        sky_pixels: 0,
    };
    for pair in pairs {
        let (img, mask) = pair?;
        if img.len() != mask.len() {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} vs mask {}x{}",
                img.width(),
                img.height(),
                mask.width(),
                mask.height()
            )));
        }
        let features = FeatureMatrix::from_image(&img, channels)?;
        for (r, &label) in mask.labels().iter().enumerate() {
            m.add_row(&features.data[r * k..r * k + k], label as f64);
            if label == 1 {
                summary.cloud_pixels += 1;
            } else {
                summary.sky_pixels += 1;
            }
        }
        summary.images += 1;
        summary.pixels += mask.len() as u64;
    }
    if summary.images == 0 {
        return Err(Error::EmptyManifest);
    }
    let (g, s, x_means, y_mean) = m.centered()?;
    let (coefficients, _) = simpls(&g, &s, p, channels)?;
    let model = PlsModel {
        channel_ids: channels.to_vec(),
        num_components: p,
        coefficients,
        x_means,
        y_mean,
        training_meta: serde_json::json!({
            "images": summary.images,
            "pixels": summary.pixels,
        }),
    };
    Ok((model, summary))
}

/// Raw regression output `(X - x_means) B + y_mean` for one image's features.
pub fn predict_raw(model: &PlsModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.channel_ids != model.channel_ids {
        return Err(Error::ChannelMismatch {
            model: model
                .channel_ids
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
            features: features
                .channel_ids
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        });
    }
    let k = features.k();
    let mut out = Vec::with_capacity(features.rows);
    for row in features.data.chunks_exact(k) {
        let mut acc = model.y_mean;
        for ((v, mean), b) in row.iter().zip(&model.x_means).zip(&model.coefficients) {
            acc += (v - mean) * b;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Min-max normalization of raw predictions into [0,1]; a constant raw map
/// becomes the maximally uncertain 0.5 with the degenerate flag raised.
pub fn theta_normalize(raw: &[f64], width: usize, height: usize) -> Result<ProbabilityMap> {
    if raw.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} raw values vs {width}x{height}",
            raw.len()
        )));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() {
        return Err(Error::Numerical("non-finite raw prediction".into()));
    }
    if max == min {
        return Ok(ProbabilityMap {
            width,
            height,
            values: vec![0.5; raw.len()],
            degenerate: true,
        });
    }
    let range = max - min;
    Ok(ProbabilityMap {
        width,
        height,
        values: raw.iter().map(|v| (v - min) / range).collect(),
        degenerate: false,
    })
}

/// Predicts the belongingness map of an image given a trained model.
pub fn predict(
    model: &PlsModel,
    features: &FeatureMatrix,
    dims: (usize, usize),
) -> Result<ProbabilityMap> {
    let (width, height) = dims;
    if features.rows != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows vs {width}x{height}",
            features.rows
        )));
    }
    let raw = predict_raw(model, features)?;
    theta_normalize(&raw, width, height)
}

/// Convenience: extract the model's channels from an image and predict.
pub fn predict_image(model: &PlsModel, img: &Image) -> Result<ProbabilityMap> {
    let features = FeatureMatrix::from_image(img, &model.channel_ids)?;
    predict(model, &features, (img.width(), img.height()))
}

/// Thresholds a belongingness map: `value >= threshold` is cloud.
pub fn binarize(prob: &ProbabilityMap, threshold: f64) -> Result<GroundTruthMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in [0,1], got {threshold}"
        )));
    }
    let labels = prob
        .values
        .iter()
        .map(|v| (*v >= threshold) as u8)
        .collect();
    GroundTruthMask::new(prob.width, prob.height, labels)
}
