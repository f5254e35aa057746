//! Segmentation metrics: per-class confusion counts, intersection over union
//! (`TP / (TP + FP + FN)`), mean IOU, inference throughput, and report files.
//!
//! Classes are 0-based in code; reports print them 1-based as `Class_01`,
//! `Class_02`, ….

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Image, LabelMap};
use crate::error::{Error, Result};
use crate::network::Network;

/// Per-class true-positive, false-positive and false-negative pixel counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    tp: Vec<u64>,
    fp: Vec<u64>,
    #[serde(rename = "fn")]
    fn_: Vec<u64>,
}

impl ConfusionCounts {
    pub fn new(num_classes: usize) -> Self {
        ConfusionCounts {
            tp: vec![0; num_classes],
            fp: vec![0; num_classes],
            fn_: vec![0; num_classes],
        }
    }

    /// Counts built directly from per-class `(tp, fp, fn)` triples.
    pub fn from_triples(triples: &[(u64, u64, u64)]) -> Self {
        ConfusionCounts {
            tp: triples.iter().map(|t| t.0).collect(),
            fp: triples.iter().map(|t| t.1).collect(),
            fn_: triples.iter().map(|t| t.2).collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.tp.len()
    }

    pub fn tp(&self) -> &[u64] {
        &self.tp
    }

    pub fn fp(&self) -> &[u64] {
        &self.fp
    }

    pub fn fn_(&self) -> &[u64] {
        &self.fn_
    }

    pub fn triple(&self, class: usize) -> (u64, u64, u64) {
        (self.tp[class], self.fp[class], self.fn_[class])
    }

    /// Ground-truth pixels per class (`tp + fn`).
    pub fn ground_truth_totals(&self) -> Vec<u64> {
        self.tp.iter().zip(&self.fn_).map(|(t, f)| t + f).collect()
    }

    /// Predicted pixels per class (`tp + fp`).
    pub fn predicted_totals(&self) -> Vec<u64> {
        self.tp.iter().zip(&self.fp).map(|(t, f)| t + f).collect()
    }

    /// Adds the counts of one prediction/ground-truth pair.
    pub fn accumulate(&mut self, pred: &LabelMap, truth: &LabelMap) -> Result<()> {
        if pred.width() != truth.width() || pred.height() != truth.height() {
            return Err(Error::Data(format!(
                "prediction is {}x{} but ground truth is {}x{}",
                pred.width(),
                pred.height(),
                truth.width(),
                truth.height()
            )));
        }
        let c = self.num_classes();
        pred.check_classes(c)?;
        truth.check_classes(c)?;
        for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
            if p == t {
                self.tp[p as usize] += 1;
            } else {
                self.fp[p as usize] += 1;
                self.fn_[t as usize] += 1;
            }
        }
        Ok(())
    }

    /// Element-wise sum with counts over the same classes.
    pub fn merge(&mut self, other: &ConfusionCounts) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(Error::Data(format!(
                "cannot merge counts over {} and {} classes",
                self.num_classes(),
                other.num_classes()
            )));
        }
        for c in 0..self.num_classes() {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        Ok(())
    }

    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        (0..self.num_classes())
            .map(|c| iou(self.tp[c], self.fp[c], self.fn_[c]))
            .collect()
    }

    pub fn iou_report(&self) -> Result<IouReport> {
        mean_iou(&self.per_class_iou())
    }
}

/// Counts for a single prediction against its ground truth.
pub fn confusion_counts(pred: &LabelMap, truth: &LabelMap, num_classes: usize) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::new(num_classes);
    counts.accumulate(pred, truth)?;
    Ok(counts)
}

/// `tp / (tp + fp + fn)`, or `None` when the class appears in neither raster.
pub fn iou(tp: u64, fp: u64, fn_: u64) -> Option<f64> {
    let denom = tp + fp + fn_;
    (denom > 0).then(|| tp as f64 / denom as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    /// `None` marks a class absent from both prediction and ground truth.
    pub per_class: Vec<Option<f64>>,
    /// Mean over the classes that are not absent.
    pub mean_iou: f64,
    pub classes_counted: usize,
}

/// Averages the non-absent IOUs; absent classes are left out of the mean.
pub fn mean_iou(per_class: &[Option<f64>]) -> Result<IouReport> {
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::Data("every class is absent; mean IOU undefined".into()));
    }
    Ok(IouReport {
        per_class: per_class.to_vec(),
        mean_iou: present.iter().sum::<f64>() / present.len() as f64,
        classes_counted: present.len(),
    })
}

/// Where a throughput figure was measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub arch: String,
    pub os: String,
    pub logical_cpus: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        MachineInfo {
            arch: std::env::consts::ARCH.to_string(),
            os: std::env::consts::OS.to_string(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpsResult {
    pub images_processed: usize,
    pub wall_seconds: f64,
    /// Exactly `images_processed / wall_seconds`.
    pub fps: f64,
    pub warmup_iters: usize,
    pub repeats: usize,
    pub machine: MachineInfo,
}

impl FpsResult {
    pub fn from_measurement(images_processed: usize, wall_seconds: f64, warmup_iters: usize, repeats: usize) -> Self {
        FpsResult {
            images_processed,
            wall_seconds,
            fps: images_processed as f64 / wall_seconds,
            warmup_iters,
            repeats,
            machine: MachineInfo::current(),
        }
    }
}

pub const DEFAULT_WARMUP: usize = 10;
pub const DEFAULT_REPEATS: usize = 3;

/// Times `repeats` passes of `infer` over `images` after `warmup` untimed
/// calls, on the calling thread with a monotonic clock.
pub fn benchmark_with(
    images: &[Image],
    warmup: usize,
    repeats: usize,
    mut infer: impl FnMut(&Image) -> Result<()>,
) -> Result<FpsResult> {
    if images.is_empty() {
        return Err(Error::Data("benchmark needs at least one image".into()));
    }
    if repeats == 0 {
        return Err(Error::Parameter("benchmark repeats must be at least 1".into()));
    }
    let dims = (images[0].width(), images[0].height());
    if images.iter().any(|i| (i.width(), i.height()) != dims) {
        return Err(Error::Data("benchmark images must share one size".into()));
    }
    for img in images.iter().cycle().take(warmup) {
        infer(img)?;
    }
    let start = Instant::now();
    for _ in 0..repeats {
        for img in images {
            infer(img)?;
        }
    }
    let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(FpsResult::from_measurement(images.len() * repeats, seconds, warmup, repeats))
}

/// Batch-size-1 inference throughput of `net`.
pub fn fps_benchmark(net: &Network, images: &[Image], warmup: usize, repeats: usize) -> Result<FpsResult> {
    benchmark_with(images, warmup, repeats, |img| {
        std::hint::black_box(net.predict(img)?);
        Ok(())
    })
}

/// One class row of an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    /// Display id, `Class_01` for class index 0.
    pub class: String,
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `None` for an absent class.
    pub iou: Option<f64>,
}

/// Table-style evaluation result: class rows plus mean IOU, FPS and
/// parameter count summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassRow>,
    pub mean_iou: Option<f64>,
    pub fps: Option<f64>,
    pub param_millions: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Format implied by a file extension, CSV unless it is `.json`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn class_id(index: usize) -> String {
    format!("Class_{:02}", index + 1)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn fmt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

const CSV_HEADER: [&str; 6] = ["class", "name", "tp", "fp", "fn", "iou"];
const ABSENT: &str = "absent";

impl EvalReport {
    /// `names[c]` labels class `c`; missing names are left blank.
    pub fn new(
        counts: &ConfusionCounts,
        iou: &IouReport,
        fps: Option<&FpsResult>,
        param_millions: Option<f64>,
        names: &[String],
    ) -> Self {
        let classes = (0..counts.num_classes())
            .map(|c| {
                let (tp, fp, fn_) = counts.triple(c);
                ClassRow {
                    class: class_id(c),
                    name: names.get(c).cloned().unwrap_or_default(),
                    tp,
                    fp,
                    fn_,
                    iou: iou.per_class.get(c).copied().flatten(),
                }
            })
            .collect();
        EvalReport {
            classes,
            mean_iou: Some(iou.mean_iou),
            fps: fps.map(|f| f.fps),
            param_millions,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.classes {
            let iou = r.iou.map_or_else(|| ABSENT.to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(out, "{},{},{},{},{},{}", r.class, r.name, r.tp, r.fp, r.fn_, iou);
        }
        for (key, v) in [
            ("mean_iou", self.mean_iou),
            ("fps", self.fps),
            ("param_millions", self.param_millions),
        ] {
            let _ = writeln!(out, "{key},,,,,{}", fmt4(v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Data(format!("report csv: {msg}"));
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut report = EvalReport {
            classes: Vec::new(),
            mean_iou: None,
            fps: None,
            param_millions: None,
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(format!("bad number {s:?}")))
            }
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            match field(0) {
                "mean_iou" => report.mean_iou = opt(field(5))?,
                "fps" => report.fps = opt(field(5))?,
                "param_millions" => report.param_millions = opt(field(5))?,
                class => {
                    let count = |i: usize| -> Result<u64> {
                        field(i).parse().map_err(|_| bad(format!("bad count {:?}", field(i))))
                    };
                    report.classes.push(ClassRow {
                        class: class.to_string(),
                        name: field(1).to_string(),
                        tp: count(2)?,
                        fp: count(3)?,
                        fn_: count(4)?,
                        iou: if field(5) == ABSENT { None } else { opt(field(5))? },
                    });
                }
            }
        }
        Ok(report)
    }

    /// Same fields as the CSV, floats rounded to 4 decimals.
    pub fn to_json(&self) -> String {
        let rounded = EvalReport {
            classes: self
                .classes
                .iter()
                .map(|r| ClassRow {
                    iou: r.iou.map(round4),
                    ..r.clone()
                })
                .collect(),
            mean_iou: self.mean_iou.map(round4),
            fps: self.fps.map(round4),
            param_millions: self.param_millions.map(round4),
        };
        serde_json::to_string_pretty(&rounded).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("report json: {e}")))
    }

    /// Aligned plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let name_w = self.classes.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
        let mut out = format!(
            "{:<8}  {:<name_w$}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            "class", "name", "TP", "FP", "FN", "IOU"
        );
        for r in &self.classes {
            let iou = r.iou.map_or_else(|| ABSENT.to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                out,
                "{:<8}  {:<name_w$}  {:>9}  {:>9}  {:>9}  {:>7}",
                r.class, r.name, r.tp, r.fp, r.fn_, iou
            );
        }
        let _ = writeln!(out, "mean IOU        {}", fmt4(self.mean_iou));
        if let Some(f) = self.fps {
            let _ = writeln!(out, "FPS             {f:.4}");
        }
        if let Some(p) = self.param_millions {
            let _ = writeln!(out, "params (M)      {p:.4}");
        }
        out
    }
}

pub fn write_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json(),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Comparison of a published IOU column against values recomputed from
/// its own counts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrintedIouCheck {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub printed: f64,
    pub recomputed: Option<f64>,
    /// True when `printed` cannot be a rounding of `recomputed` to the
    /// printed number of decimals.
    pub flagged: bool,
}

/// Recomputes each row's IOU and flags rows whose printed value (given with
/// `decimals` digits) differs from the recomputed value by more than half a
/// unit in the last printed place.
pub fn audit_printed_ious(counts: &ConfusionCounts, printed: &[f64], decimals: i32) -> Vec<PrintedIouCheck> {
    let half_ulp = 0.5 * 10f64.powi(-decimals) + 1e-12;
    (0..counts.num_classes().min(printed.len()))
        .map(|c| {
            let (tp, fp, fn_) = counts.triple(c);
            let recomputed = iou(tp, fp, fn_);
            let flagged = recomputed.is_none_or(|r| (r - printed[c]).abs() > half_ulp);
            PrintedIouCheck {
                class: class_id(c),
                tp,
                fp,
                fn_,
                printed: printed[c],
                recomputed,
                flagged,
            }
        })
        .collect()
}

/// CSV rendering of an audit: `class,tp,fp,fn,printed_iou,recomputed_iou,flag`.
pub fn audit_to_csv(rows: &[PrintedIouCheck]) -> String {
    let mut out = String::from("class,tp,fp,fn,printed_iou,recomputed_iou,flag\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.class,
            r.tp,
            r.fp,
            r.fn_,
            r.printed,
            r.recomputed.map_or_else(|| ABSENT.to_string(), |v| format!("{v:.4}")),
            if r.flagged { "inconsistent" } else { "" }
        );
    }
    out
}
