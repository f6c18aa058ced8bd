//! CSV report rendering. Every report starts with a `# config:` comment line
//! recording the parameters that produced it, so identical runs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{PcaReport, RankRow, RocReport};
use crate::color::ChannelId;
use crate::dataset::check_writable;
use crate::error::{Error, Result};
use crate::eval::{BreakdownReport, CvReport, MeanScores, Metrics, SweepReport};

pub fn write_report(path: impl AsRef<Path>, force: bool, content: &str) -> Result<()> {
    let path = path.as_ref();
    check_writable(path, force)?;
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn config_line(config: &str) -> String {
    format!("# config: {config}\n")
}

fn fmt_rate(v: f64) -> String {
    format!("{v:.6}")
}

pub fn pca_csv(config: &str, per_image: &[(String, PcaReport)], concatenated: &PcaReport) -> String {
    let mut out = config_line(config);
    out.push_str("image");
    for i in 1..=16 {
        let _ = write!(out, ",pc{i}");
    }
    out.push('\n');
    for (name, report) in per_image {
        out.push_str(name);
        for f in &report.variance_fractions {
            let _ = write!(out, ",{}", fmt_rate(*f));
        }
        out.push('\n');
    }
    out.push_str("concatenated");
    for f in &concatenated.variance_fractions {
        let _ = write!(out, ",{}", fmt_rate(*f));
    }
    out.push('\n');
    out
}

/// Channel/biplot coordinates of the concatenated PCA, one row per channel.
pub fn biplot_csv(config: &str, report: &PcaReport) -> String {
    let mut out = config_line(config);
    out.push_str("channel,name,pc1,pc2,loading_factor\n");
    for (j, ch) in ChannelId::ALL.iter().enumerate() {
        let (x, y) = report.biplot_coords[j];
        let _ = writeln!(
            out,
            "{ch},{},{},{},{}",
            ch.label(),
            fmt_rate(x),
            fmt_rate(y),
            fmt_rate(report.loading_factors[j])
        );
    }
    out
}

pub fn rank_csv(config: &str, rows: &[RankRow]) -> String {
    let mut out = config_line(config);
    out.push_str("channel,name,loading_factor,roc_area,orientation\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.channel,
            r.channel.label(),
            fmt_rate(r.loading_factor),
            fmt_rate(r.roc_area),
            r.orientation
        );
    }
    out
}

pub fn roc_csv(config: &str, report: &RocReport) -> String {
    let mut out = config_line(config);
    let _ = writeln!(
        out,
        "# auc={} area_over_diagonal={} orientation={}",
        fmt_rate(report.auc),
        fmt_rate(report.area_over_diagonal),
        report.orientation
    );
    out.push_str("threshold,fpr,tpr\n");
    for p in &report.points {
        let threshold = if p.threshold.is_finite() {
            fmt_rate(p.threshold)
        } else {
            "inf".to_string()
        };
        let _ = writeln!(out, "{threshold},{},{}", fmt_rate(p.fpr), fmt_rate(p.tpr));
    }
    out
}

fn metrics_fields(m: &Metrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        m.true_positives,
        m.true_negatives,
        m.false_positives,
        m.false_negatives,
        fmt_rate(m.precision),
        fmt_rate(m.recall),
        fmt_rate(m.f_score),
        fmt_rate(m.misclassification)
    )
}

fn mean_fields(m: &MeanScores) -> String {
    format!(
        ",,,,{},{},{},{}",
        fmt_rate(m.precision),
        fmt_rate(m.recall),
        fmt_rate(m.f_score),
        fmt_rate(m.misclassification)
    )
}

const METRIC_HEADER: &str = "tp,tn,fp,fn,precision,recall,f_score,misclassification";

pub fn eval_csv(
    config: &str,
    rows: &[(String, Metrics)],
    mean: &MeanScores,
    pooled: &Metrics,
) -> String {
    let mut out = config_line(config);
    let _ = writeln!(out, "image,{METRIC_HEADER}");
    for (name, m) in rows {
        let _ = writeln!(out, "{name},{}", metrics_fields(m));
    }
    let _ = writeln!(out, "mean,{}", mean_fields(mean));
    let _ = writeln!(out, "pooled,{}", metrics_fields(pooled));
    out
}

pub fn crossval_csv(config: &str, report: &CvReport, names: &[String]) -> String {
    let mut out = config_line(config);
    let _ = writeln!(out, "scope,fold,image,{METRIC_HEADER}");
    for s in &report.per_image {
        let _ = writeln!(
            out,
            "image,{},{},{}",
            s.fold,
            names[s.index],
            metrics_fields(&s.metrics)
        );
    }
    for (fold, fm) in report.fold_means.iter().enumerate() {
        let _ = writeln!(out, "fold,{fold},,{}", mean_fields(fm));
    }
    let _ = writeln!(out, "mean,,,{}", mean_fields(&report.mean));
    let _ = writeln!(out, "pooled,,,{}", metrics_fields(&report.pooled));
    out
}

pub fn sweep_csv(config: &str, report: &SweepReport) -> String {
    let mut out = config_line(config);
    out.push_str("threshold,mean_fpr,mean_tpr,stderr_fpr,stderr_tpr,trials\n");
    for p in &report.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_rate(p.threshold),
            fmt_rate(p.mean_fpr),
            fmt_rate(p.mean_tpr),
            fmt_rate(p.stderr_fpr),
            fmt_rate(p.stderr_tpr),
            report.trials
        );
    }
    out
}

pub fn breakdown_csv(config: &str, report: &BreakdownReport) -> String {
    let mut out = config_line(config);
    let _ = writeln!(out, "# grouping={} skipped={}", report.grouping, report.skipped);
    out.push_str("bin,images,mean_f_score\n");
    for r in &report.rows {
        let _ = writeln!(out, "{},{},{}", r.bin, r.images, fmt_rate(r.mean_f_score));
    }
    out
}

pub struct BenchRow {
    pub method: String,
    pub image: String,
    pub metrics: Metrics,
    pub runtime_ms: f64,
}

pub fn bench_csv(config: &str, rows: &[BenchRow], means: &[(String, MeanScores, f64)]) -> String {
    let mut out = config_line(config);
    let _ = writeln!(out, "method,image,{METRIC_HEADER},runtime_ms");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.3}",
            r.method,
            r.image,
            metrics_fields(&r.metrics),
            r.runtime_ms
        );
    }
    for (method, mean, ms) in means {
        let _ = writeln!(out, "{method},mean,{},{:.3}", mean_fields(mean), ms);
    }
    out
}
