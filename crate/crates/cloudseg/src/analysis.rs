//! Statistical channel analysis: per-image standardization, PCA over channel
//! stacks (variance fractions, loading factors, biplot coordinates) and
//! ROC-area ranking of channels against ground truth.
//!
//! PCA internally works on the sample correlation matrix of the columns,
//! which equals the covariance matrix for a per-image standardized stack and
//! keeps concatenated stacks exactly scale-consistent.

use nalgebra::DMatrix;

use crate::color::{extract_stack, ChannelId};
use crate::error::{Error, Result};
use crate::image::{GroundTruthMask, Image};

/// Columns with sample standard deviation below this are treated as constant.
const DEGENERATE_STD: f64 = 1e-12;

/// A channel stack standardized column-wise to zero mean and unit sample
/// standard deviation. Constant columns are zeroed and flagged instead of
/// dropped so the report shape stays stable across images.
#[derive(Debug, Clone)]
pub struct StandardizedStack {
    pub rows: usize,
    /// Row-major `rows x 16`.
    pub data: Vec<f64>,
    pub means: [f64; 16],
    pub stds: [f64; 16],
    pub degenerate: Vec<ChannelId>,
}

impl StandardizedStack {
    pub fn column(&self, ch: ChannelId) -> Vec<f64> {
        let j = ch.index();
        (0..self.rows).map(|r| self.data[r * 16 + j]).collect()
    }
}

/// Column-wise `(x - mean) / std` with the sample (n-1) standard deviation.
pub fn standardize(stack: &crate::color::ChannelStack) -> Result<StandardizedStack> {
    let rows = stack.rows();
    if rows < 2 {
        return Err(Error::InsufficientPixels(rows));
    }
    let mut means = [0.0; 16];
    for row in stack.data.chunks_exact(16) {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= rows as f64;
    }
    let mut ss = [0.0; 16];
    for row in stack.data.chunks_exact(16) {
        for (j, acc) in ss.iter_mut().enumerate() {
            let d = row[j] - means[j];
            *acc += d * d;
        }
    }
    let mut stds = [0.0; 16];
    let mut degenerate = Vec::new();
    for j in 0..16 {
        let std = (ss[j] / (rows - 1) as f64).sqrt();
        if std <= DEGENERATE_STD {
            stds[j] = 0.0;
            degenerate.push(ChannelId::ALL[j]);
        } else {
            stds[j] = std;
        }
    }
    let mut data = vec![0.0; rows * 16];
    for r in 0..rows {
        for j in 0..16 {
            data[r * 16 + j] = if stds[j] == 0.0 {
                0.0
            } else {
                (stack.data[r * 16 + j] - means[j]) / stds[j]
            };
        }
    }
    Ok(StandardizedStack {
        rows,
        data,
        means,
        stds,
        degenerate,
    })
}

/// Row-wise concatenation of per-image standardized stacks. The per-image
/// standardization is kept as-is (no re-standardization), so the recorded
/// means/stds are the identity transform and a channel is degenerate only if
/// it was degenerate in every input.
pub fn concat_stacks(stacks: &[StandardizedStack]) -> Result<StandardizedStack> {
    if stacks.is_empty() {
        return Err(Error::InvalidArgument("empty stack list".into()));
    }
    let rows = stacks.iter().map(|s| s.rows).sum();
    let mut data = Vec::with_capacity(rows * 16);
    for s in stacks {
        data.extend_from_slice(&s.data);
    }
    let degenerate = ChannelId::ALL
        .iter()
        .copied()
        .filter(|ch| stacks.iter().all(|s| s.degenerate.contains(ch)))
        .collect();
    Ok(StandardizedStack {
        rows,
        data,
        means: [0.0; 16],
        stds: [1.0; 16],
        degenerate,
    })
}

/// PCA of a standardized stack.
#[derive(Debug, Clone)]
pub struct PcaReport {
    /// Non-negative, sorted descending.
    pub eigenvalues: [f64; 16],
    /// `eigenvalues / trace`; sums to 1.
    pub variance_fractions: [f64; 16],
    /// Absolute components of the primary eigenvector, per channel.
    pub loading_factors: [f64; 16],
    /// Per channel: components on the first and second principal axes.
    pub biplot_coords: [(f64, f64); 16],
    /// `eigenvectors[t][j]` is component j of the eigenvector for
    /// `eigenvalues[t]`. Rows form an orthonormal basis.
    pub eigenvectors: Vec<[f64; 16]>,
    pub degenerate: Vec<ChannelId>,
}

/// Streaming accumulator for PCA over many stacks without materializing the
/// concatenation. `pca` is a single-stack shorthand for it.
#[derive(Debug, Clone)]
pub struct PcaAccumulator {
    n: u64,
    sum: [f64; 16],
    /// Upper triangle of the second-moment matrix, `cross[a][b]` for a <= b.
    cross: [[f64; 16]; 16],
}

impl Default for PcaAccumulator {
    fn default() -> Self {
        PcaAccumulator {
            n: 0,
            sum: [0.0; 16],
            cross: [[0.0; 16]; 16],
        }
    }
}

impl PcaAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_stack(&mut self, stack: &StandardizedStack) -> Result<()> {
        if stack.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStack("non-finite value".into()));
        }
        for r in 0..stack.rows {
            let row = &stack.data[r * 16..r * 16 + 16];
            for a in 0..16 {
                self.sum[a] += row[a];
                for b in a..16 {
                    self.cross[a][b] += row[a] * row[b];
                }
            }
        }
        self.n += stack.rows as u64;
        Ok(())
    }

    pub fn rows(&self) -> u64 {
        self.n
    }

    #[allow(clippy::needless_range_loop)] // symmetric matrix fills read clearer indexed
    pub fn finish(&self) -> Result<PcaReport> {
        if self.n < 2 {
            return Err(Error::InsufficientPixels(self.n as usize));
        }
        let n = self.n as f64;
        // Sample covariance from pooled moments, then normalize to the
        // correlation matrix; zero-variance channels get zero rows.
        let mut cov = [[0.0; 16]; 16];
        for a in 0..16 {
            for b in a..16 {
                let c = (self.cross[a][b] - self.sum[a] * self.sum[b] / n) / (n - 1.0);
                cov[a][b] = c;
                cov[b][a] = c;
            }
        }
        let mut std = [0.0; 16];
        let mut degenerate = Vec::new();
        for j in 0..16 {
            let v = cov[j][j].max(0.0).sqrt();
            if v <= DEGENERATE_STD {
                std[j] = 0.0;
                degenerate.push(ChannelId::ALL[j]);
            } else {
                std[j] = v;
            }
        }
        if degenerate.len() == 16 {
            return Err(Error::InvalidStack("all channels degenerate".into()));
        }
        let corr = DMatrix::from_fn(16, 16, |a, b| {
            if std[a] == 0.0 || std[b] == 0.0 {
                0.0
            } else {
                cov[a][b] / (std[a] * std[b])
            }
        });
        let eig = corr.symmetric_eigen();

        let mut order: Vec<usize> = (0..16).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut eigenvalues = [0.0; 16];
        let mut eigenvectors = Vec::with_capacity(16);
        for (t, &src) in order.iter().enumerate() {
            eigenvalues[t] = eig.eigenvalues[src].max(0.0);
            let col = eig.eigenvectors.column(src);
            let mut v = [0.0; 16];
            for j in 0..16 {
                v[j] = col[j];
            }
            // Sign convention: largest-magnitude component positive.
            let lead = (0..16).fold(0, |best, j| {
                if v[j].abs() > v[best].abs() {
                    j
                } else {
                    best
                }
            });
            if v[lead] < 0.0 {
                for x in &mut v {
                    *x = -*x;
                }
            }
            eigenvectors.push(v);
        }

        let trace: f64 = eigenvalues.iter().sum();
        let mut variance_fractions = [0.0; 16];
        let mut loading_factors = [0.0; 16];
        let mut biplot_coords = [(0.0, 0.0); 16];
        for j in 0..16 {
            variance_fractions[j] = eigenvalues[j] / trace;
            loading_factors[j] = eigenvectors[0][j].abs();
            biplot_coords[j] = (eigenvectors[0][j], eigenvectors[1][j]);
        }
        Ok(PcaReport {
            eigenvalues,
            variance_fractions,
            loading_factors,
            biplot_coords,
            eigenvectors,
            degenerate,
        })
    }
}

/// Eigendecomposition of the channel correlation matrix of one stack.
pub fn pca(stack: &StandardizedStack) -> Result<PcaReport> {
    let mut acc = PcaAccumulator::new();
    acc.add_stack(stack)?;
    acc.finish()
}

/// Whether the scored channel or its negation separates the classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocOrientation {
    Direct,
    Inverted,
}

impl std::fmt::Display for RocOrientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RocOrientation::Direct => write!(f, "direct"),
            RocOrientation::Inverted => write!(f, "inverted"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RocPoint {
    /// Decision threshold; `+inf` is the all-negative sentinel.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone)]
pub struct RocReport {
    pub channel: Option<ChannelId>,
    pub points: Vec<RocPoint>,
    /// Trapezoidal area under the curve for "value >= t means cloud".
    pub auc: f64,
    /// `|auc - 0.5|`, the discriminability score.
    pub area_over_diagonal: f64,
    pub orientation: RocOrientation,
}

fn finish_roc(points: Vec<RocPoint>, channel: Option<ChannelId>) -> RocReport {
    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
    }
    let orientation = if auc < 0.5 {
        RocOrientation::Inverted
    } else {
        RocOrientation::Direct
    };
    RocReport {
        channel,
        points,
        auc,
        area_over_diagonal: (auc - 0.5).abs(),
        orientation,
    }
}

/// ROC of thresholding `values >= t` as cloud against binary labels.
/// Thresholds sweep all unique values plus a `+inf` sentinel.
pub fn roc_area(values: &[f64], labels: &[u8]) -> Result<RocReport> {
    if values.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values vs {} labels",
            values.len(),
            labels.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidStack("non-finite channel value".into()));
    }
    let pos = labels.iter().filter(|l| **l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateGroundTruth);
    }

    let mut pairs: Vec<(f64, u8)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            if pairs[i].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: v,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(finish_roc(points, None))
}

/// Number of histogram bins used by [`BinnedRoc`].
pub const ROC_BINS: usize = 65536;

/// Memory-bounded ROC accumulator for pooled datasets. Values go through the
/// strictly increasing map `v / (1 + |v|)` (which leaves the ROC unchanged)
/// and land in 65536 uniform bins over `(-1, 1)`.
pub struct BinnedRoc {
    pos: Vec<u64>,
    neg: Vec<u64>,
}

impl Default for BinnedRoc {
    fn default() -> Self {
        BinnedRoc {
            pos: vec![0; ROC_BINS],
            neg: vec![0; ROC_BINS],
        }
    }
}

impl BinnedRoc {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    fn bin(value: f64) -> usize {
        let t = value / (1.0 + value.abs());
        let idx = ((t + 1.0) / 2.0 * ROC_BINS as f64) as isize;
        idx.clamp(0, ROC_BINS as isize - 1) as usize
    }

    #[inline]
    pub fn push(&mut self, value: f64, cloud: bool) {
        let b = Self::bin(value);
        if cloud {
            self.pos[b] += 1;
        } else {
            self.neg[b] += 1;
        }
    }

    pub fn finish(&self, channel: Option<ChannelId>) -> Result<RocReport> {
        let pos: u64 = self.pos.iter().sum();
        let neg: u64 = self.neg.iter().sum();
        if pos == 0 || neg == 0 {
            return Err(Error::DegenerateGroundTruth);
        }
        let mut points = vec![RocPoint {
            threshold: f64::INFINITY,
            fpr: 0.0,
            tpr: 0.0,
        }];
        let mut tp = 0u64;
        let mut fp = 0u64;
        for b in (0..ROC_BINS).rev() {
            if self.pos[b] == 0 && self.neg[b] == 0 {
                continue;
            }
            tp += self.pos[b];
            fp += self.neg[b];
            // Map the bin's lower edge back to a representative threshold.
            let t = (b as f64 / ROC_BINS as f64) * 2.0 - 1.0;
            let threshold = t / (1.0 - t.abs());
            points.push(RocPoint {
                threshold,
                fpr: fp as f64 / neg as f64,
                tpr: tp as f64 / pos as f64,
            });
        }
        Ok(finish_roc(points, channel))
    }
}

#[derive(Debug, Clone)]
pub struct RankRow {
    pub channel: ChannelId,
    pub loading_factor: f64,
    pub roc_area: f64,
    pub orientation: RocOrientation,
}

/// Ranks the 16 channels over a dataset: loading factors from PCA of the
/// concatenated standardized stacks, ROC areas from the pooled raw channel
/// distribution (binned). Rows are sorted by ROC area, best first.
pub fn rank_channels<I>(pairs: I) -> Result<Vec<RankRow>>
where
    I: IntoIterator<Item = Result<(Image, GroundTruthMask)>>,
{
    let mut pca_acc = PcaAccumulator::new();
    let mut rocs: Vec<BinnedRoc> = (0..16).map(|_| BinnedRoc::new()).collect();
    let mut seen = false;
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
        let stack = extract_stack(&img);
        pca_acc.add_stack(&standardize(&stack)?)?;
        for (r, &label) in mask.labels().iter().enumerate() {
            let row = &stack.data[r * 16..r * 16 + 16];
            for j in 0..16 {
                rocs[j].push(row[j], label == 1);
            }
        }
        seen = true;
    }
    if !seen {
        return Err(Error::EmptyManifest);
    }
    let report = pca_acc.finish()?;
    let mut rows = Vec::with_capacity(16);
    for (j, ch) in ChannelId::ALL.iter().enumerate() {
        let roc = rocs[j].finish(Some(*ch))?;
        rows.push(RankRow {
            channel: *ch,
            loading_factor: report.loading_factors[j],
            roc_area: roc.area_over_diagonal,
            orientation: roc.orientation,
        });
    }
    rows.sort_by(|a, b| b.roc_area.partial_cmp(&a.roc_area).unwrap());
    Ok(rows)
}
