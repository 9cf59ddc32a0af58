//! Evaluation metrics and report exports.
//!
//! Residual-error reports follow the convention of evaluating on spectra
//! re-normalized to unit Euclidean norm. Calibration reports carry one RMSE
//! per element in oxide wt.% plus a mean-predictor baseline, scatter pairs
//! and a least-squares line per element.
//!
//! Report CSV schema: `metric,split,element_or_bin,value,count`.
//! Scatter CSV schema: `element,truth,pred`.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataio::ShotRecord;
use crate::error::{Error, Result};
use crate::models::PreprocNet;
use crate::nn::{Scalar, Tensor2, Tensor3};
use crate::simulator::PreprocLevel;

/// Batch size used for eval-mode forward passes.
const EVAL_CHUNK: usize = 64;

/// Mean residual error over a split.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocReport {
    pub mean_residual_error: f64,
    pub count: usize,
}

/// Per-element calibration quality.
#[derive(Debug, Clone)]
pub struct CalibReport {
    pub element_names: Vec<String>,
    pub rmse: Vec<f64>,
    /// RMSE of predicting the training-set mean composition.
    pub baseline_rmse: Option<Vec<f64>>,
    /// `(truth, prediction)` pairs per element.
    pub scatter: Vec<Vec<(f64, f64)>>,
    /// Least-squares `(slope, intercept)` per element; `None` when the
    /// truths have zero variance.
    pub regression: Vec<Option<(f64, f64)>>,
}

/// Residual error binned by sensor-to-target distance.
#[derive(Debug, Clone)]
pub struct DistanceBinReport {
    pub bins: Vec<DistanceBin>,
    /// Shots outside the nominal [1, 7] m range; reported, never dropped.
    pub overflow: DistanceBin,
}

#[derive(Debug, Clone)]
pub struct DistanceBin {
    pub lo_m: f64,
    pub hi_m: f64,
    pub count: usize,
    pub rmse: Option<f64>,
}

impl DistanceBinReport {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum::<usize>() + self.overflow.count
    }

    /// Max/min RMSE ratio over bins with at least `min_count` shots.
    pub fn spread_ratio(&self, min_count: usize) -> Option<f64> {
        let vals: Vec<f64> = self
            .bins
            .iter()
            .filter(|b| b.count >= min_count)
            .filter_map(|b| b.rmse)
            .collect();
        if vals.len() < 2 {
            return None;
        }
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        (min > 0.0).then(|| max / min)
    }
}

fn clean_at(rec: &ShotRecord, level: PreprocLevel) -> Result<&crate::spectra::Spectrum> {
    match level {
        PreprocLevel::L1a => rec.clean_1a.as_ref(),
        PreprocLevel::L1b => rec.clean_1b.as_ref(),
    }
    .ok_or_else(|| {
        Error::MissingLabel(format!(
            "shot `{}` has no clean_{level} spectrum",
            rec.shot_id
        ))
    })
}

/// Per-shot residual errors `||(y - x) - R(y)||` with `y`, `x` re-normalized
/// to unit Euclidean norm first.
pub fn residual_errors<F: Scalar>(
    net: &PreprocNet<F>,
    records: &[ShotRecord],
    level: PreprocLevel,
) -> Result<Vec<f64>> {
    let mut errors = Vec::with_capacity(records.len());
    for chunk in records.chunks(EVAL_CHUNK) {
        let mut ys = Vec::with_capacity(chunk.len());
        let mut zs = Vec::with_capacity(chunk.len());
        for rec in chunk {
            let y = rec.raw.normalize_l2()?;
            let x = clean_at(rec, level)?.normalize_l2()?;
            let z: Vec<f64> = y
                .intensities()
                .iter()
                .zip(x.intensities())
                .map(|(a, b)| a - b)
                .collect();
            ys.push(y.intensities().iter().map(|&v| F::from_f64(v)).collect::<Vec<F>>());
            zs.push(z);
        }
        let refs: Vec<&[F]> = ys.iter().map(|v| v.as_slice()).collect();
        let batch = Tensor3::from_signals(&refs);
        let (z_hat, _) = net.forward_eval(&batch)?;
        for (i, z) in zs.iter().enumerate() {
            let err = z
                .iter()
                .zip(z_hat.row(i, 0))
                .map(|(&zt, &zp)| {
                    let d = zt - zp.as_f64();
                    d * d
                })
                .sum::<f64>()
                .sqrt();
            errors.push(err);
        }
    }
    Ok(errors)
}

/// Mean residual error of a trained denoiser on a labeled split.
pub fn eval_preproc<F: Scalar>(
    net: &PreprocNet<F>,
    records: &[ShotRecord],
    level: PreprocLevel,
) -> Result<PreprocReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let errors = residual_errors(net, records, level)?;
    Ok(PreprocReport {
        mean_residual_error: errors.iter().sum::<f64>() / errors.len() as f64,
        count: errors.len(),
    })
}

/// The identity-net baseline: mean normalized raw-vs-clean distance. Every
/// useful denoiser must beat this.
pub fn baseline_preproc(records: &[ShotRecord], level: PreprocLevel) -> Result<PreprocReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for rec in records {
        let y = rec.raw.normalize_l2()?;
        let x = clean_at(rec, level)?.normalize_l2()?;
        total += y.l2_distance(&x)?;
    }
    Ok(PreprocReport {
        mean_residual_error: total / records.len() as f64,
        count: records.len(),
    })
}

/// Per-element RMSE in oxide wt.%.
pub fn eval_calib_rmse(preds: &Tensor2<f64>, truths: &Tensor2<f64>) -> Result<Vec<f64>> {
    if preds.rows != truths.rows {
        return Err(Error::LengthMismatch {
            context: "calibration predictions vs truths",
            expected: truths.rows,
            got: preds.rows,
        });
    }
    if preds.cols != truths.cols {
        return Err(Error::LengthMismatch {
            context: "calibration element count",
            expected: truths.cols,
            got: preds.cols,
        });
    }
    if preds.rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut sums = vec![0.0; preds.cols];
    for r in 0..preds.rows {
        for (c, sum) in sums.iter_mut().enumerate() {
            let d = preds.row(r)[c] - truths.row(r)[c];
            *sum += d * d;
        }
    }
    Ok(sums
        .iter()
        .map(|s| (s / preds.rows as f64).sqrt())
        .collect())
}

/// RMSE of predicting the per-element mean of `train_truths` for every test
/// shot.
pub fn mean_predictor_baseline(
    train_truths: &Tensor2<f64>,
    test_truths: &Tensor2<f64>,
) -> Result<Vec<f64>> {
    if train_truths.cols != test_truths.cols {
        return Err(Error::LengthMismatch {
            context: "baseline element count",
            expected: train_truths.cols,
            got: test_truths.cols,
        });
    }
    if train_truths.rows == 0 || test_truths.rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let cols = train_truths.cols;
    let mut mean = vec![0.0; cols];
    for r in 0..train_truths.rows {
        for c in 0..cols {
            mean[c] += train_truths.row(r)[c];
        }
    }
    for m in &mut mean {
        *m /= train_truths.rows as f64;
    }
    let mut pred_data = Vec::with_capacity(test_truths.rows * cols);
    for _ in 0..test_truths.rows {
        pred_data.extend_from_slice(&mean);
    }
    let preds = Tensor2::from_vec(test_truths.rows, cols, pred_data);
    eval_calib_rmse(&preds, test_truths)
}

/// Ordinary least squares `pred ~ slope * truth + intercept`.
/// `None` when the truths have zero variance.
pub fn least_squares(truths: &[f64], preds: &[f64]) -> Option<(f64, f64)> {
    assert_eq!(truths.len(), preds.len(), "least_squares length");
    let n = truths.len() as f64;
    if truths.is_empty() {
        return None;
    }
    let mx = truths.iter().sum::<f64>() / n;
    let my = preds.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in truths.iter().zip(preds) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Assemble the full per-element report from prediction and truth matrices.
pub fn calib_report(
    element_names: &[String],
    preds: &Tensor2<f64>,
    truths: &Tensor2<f64>,
    train_truths: Option<&Tensor2<f64>>,
) -> Result<CalibReport> {
    let rmse = eval_calib_rmse(preds, truths)?;
    let baseline_rmse = train_truths
        .map(|tr| mean_predictor_baseline(tr, truths))
        .transpose()?;
    let mut scatter = Vec::with_capacity(preds.cols);
    let mut regression = Vec::with_capacity(preds.cols);
    for c in 0..preds.cols {
        let pairs: Vec<(f64, f64)> = (0..preds.rows)
            .map(|r| (truths.row(r)[c], preds.row(r)[c]))
            .collect();
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        regression.push(least_squares(&xs, &ys));
        scatter.push(pairs);
    }
    Ok(CalibReport {
        element_names: element_names.to_vec(),
        rmse,
        baseline_rmse,
        scatter,
        regression,
    })
}

/// Residual error binned by integer-meter distance, `[k, k+1)` with the last
/// bin closed at 7 m. Out-of-range shots land in the overflow bin.
pub fn eval_by_distance<F: Scalar>(
    net: &PreprocNet<F>,
    records: &[ShotRecord],
    level: PreprocLevel,
) -> Result<DistanceBinReport> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let errors = residual_errors(net, records, level)?;
    let mut binned: Vec<Vec<f64>> = vec![Vec::new(); 6];
    let mut overflow = Vec::new();
    for (rec, err) in records.iter().zip(&errors) {
        let d = rec.distance_m;
        let idx = if (1.0..7.0).contains(&d) {
            Some((d - 1.0).floor() as usize)
        } else if d == 7.0 {
            Some(5)
        } else {
            None
        };
        match idx {
            Some(i) => binned[i].push(*err),
            None => overflow.push(*err),
        }
    }
    let to_bin = |lo: f64, hi: f64, errs: &[f64]| DistanceBin {
        lo_m: lo,
        hi_m: hi,
        count: errs.len(),
        rmse: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
    };
    Ok(DistanceBinReport {
        bins: (0..6)
            .map(|k| to_bin(k as f64 + 1.0, k as f64 + 2.0, &binned[k]))
            .collect(),
        overflow: to_bin(f64::NEG_INFINITY, f64::INFINITY, &overflow),
    })
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

/// One row of the generic report schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: String,
    pub split: String,
    pub element_or_bin: String,
    pub value: f64,
    pub count: usize,
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::from("metric,split,element_or_bin,value,count\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.metric, r.split, r.element_or_bin, r.value, r.count
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "metric,split,element_or_bin,value,count" => {}
        other => {
            return Err(Error::Parse {
                path: origin,
                line: 1,
                msg: format!("bad report header: {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: origin,
                line: lineno,
                msg: format!("expected 5 columns, got {}", fields.len()),
            });
        }
        rows.push(ReportRow {
            metric: fields[0].to_string(),
            split: fields[1].to_string(),
            element_or_bin: fields[2].to_string(),
            value: fields[3].parse().map_err(|e| Error::Parse {
                path: origin.clone(),
                line: lineno,
                msg: format!("bad value: {e}"),
            })?,
            count: fields[4].parse().map_err(|e| Error::Parse {
                path: origin.clone(),
                line: lineno,
                msg: format!("bad count: {e}"),
            })?,
        });
    }
    Ok(rows)
}

pub fn preproc_report_rows(report: &PreprocReport, split: &str) -> Vec<ReportRow> {
    vec![ReportRow {
        metric: "preproc_rmse".into(),
        split: split.into(),
        element_or_bin: "all".into(),
        value: report.mean_residual_error,
        count: report.count,
    }]
}

pub fn calib_report_rows(report: &CalibReport, split: &str) -> Vec<ReportRow> {
    let count = report.scatter.first().map_or(0, |s| s.len());
    let mut rows = Vec::new();
    for (i, name) in report.element_names.iter().enumerate() {
        rows.push(ReportRow {
            metric: "calib_rmse".into(),
            split: split.into(),
            element_or_bin: name.clone(),
            value: report.rmse[i],
            count,
        });
    }
    if let Some(baseline) = &report.baseline_rmse {
        for (i, name) in report.element_names.iter().enumerate() {
            rows.push(ReportRow {
                metric: "mean_predictor_rmse".into(),
                split: split.into(),
                element_or_bin: name.clone(),
                value: baseline[i],
                count,
            });
        }
    }
    rows
}

pub fn distance_report_rows(report: &DistanceBinReport, split: &str) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for bin in &report.bins {
        rows.push(ReportRow {
            metric: "preproc_rmse_by_distance".into(),
            split: split.into(),
            element_or_bin: format!("{:.0}-{:.0}m", bin.lo_m, bin.hi_m),
            value: bin.rmse.unwrap_or(f64::NAN),
            count: bin.count,
        });
    }
    rows.push(ReportRow {
        metric: "preproc_rmse_by_distance".into(),
        split: split.into(),
        element_or_bin: "overflow".into(),
        value: report.overflow.rmse.unwrap_or(f64::NAN),
        count: report.overflow.count,
    });
    rows
}

/// Write `element,truth,pred` scatter pairs plus a `<stem>.regression.csv`
/// sidecar holding the least-squares line per element.
pub fn scatter_export(report: &CalibReport, path: &Path) -> Result<()> {
    let mut out = String::from("element,truth,pred\n");
    for (name, pairs) in report.element_names.iter().zip(&report.scatter) {
        for (truth, pred) in pairs {
            let _ = writeln!(out, "{name},{truth},{pred}");
        }
    }
    std::fs::write(path, out)?;

    let mut reg = String::from("element,slope,intercept,defined\n");
    for (name, line) in report.element_names.iter().zip(&report.regression) {
        match line {
            Some((slope, intercept)) => {
                let _ = writeln!(reg, "{name},{slope},{intercept},true");
            }
            None => {
                let _ = writeln!(reg, "{name},,,false");
            }
        }
    }
    let sidecar = path.with_extension("regression.csv");
    std::fs::write(sidecar, reg)?;
    Ok(())
}
