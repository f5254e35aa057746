//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

#[path = "../../core/tests/support/gradcheck.rs"]
mod gradcheck;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use segpipe_core::clustering::{kmeans_fit, ClusterModel};
use segpipe_core::dataset::{
    augment, generate_synthetic_scene, load_image, load_labels, save_image, save_labels, AugmentOp, Image,
    LabelMap, Palette,
};
use segpipe_core::metrics::{
    audit_printed_ious, audit_to_csv, confusion_counts, fps_benchmark, iou, ConfusionCounts, EvalReport,
};
use segpipe_core::network::{
    encode_checkpoint, images_to_batch, load_checkpoint, pixel_accuracy, save_checkpoint, train, Network,
    NetworkConfig, Sample, TrainConfig,
};
use segpipe_core::optim::OptimizerConfig;
use segpipe_core::rng::seeded;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_labels(rng: &mut impl Rng, w: usize, h: usize, classes: u8) -> LabelMap {
    LabelMap::new(w, h, (0..w * h).map(|_| rng.random_range(0..classes)).collect()).unwrap()
}

fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> Image {
    Image::new(w, h, (0..w * h * 3).map(|_| rng.random()).collect()).unwrap()
}

// 1 ------------------------------------------------------------------------

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let per_op: [(&str, fn(u64) -> f64); 4] = [
        ("conv2d", gradcheck::check_conv),
        ("leaky_relu", gradcheck::check_leaky_relu),
        ("upsample", gradcheck::check_upsample),
        ("softmax_xent", gradcheck::check_softmax_cross_entropy),
    ];
    let mut worst_op: f64 = 0.0;
    let mut worst_net: f64 = 0.0;
    for seed in 0..20 {
        for (_, check) in per_op {
            worst_op = worst_op.max(check(seed));
        }
        worst_net = worst_net.max(gradcheck::check_network(seed));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_op < 1e-3 && worst_net < 5e-3 && secs < 60.0,
        format!("20 seeds, worst per-op {worst_op:.2e} (< 1e-3), end-to-end {worst_net:.2e} (< 5e-3), {secs:.1} s"),
    )
}

// 2 ------------------------------------------------------------------------

/// Class-at-a-time pixel loop, independent of the library's single pass.
fn brute_force(pred: &LabelMap, truth: &LabelMap, classes: u8) -> Vec<(u64, u64, u64, Option<f64>)> {
    (0..classes)
        .map(|c| {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for y in 0..truth.height() {
                for x in 0..truth.width() {
                    let (p, t) = (pred.get(x, y) == c, truth.get(x, y) == c);
                    tp += (p && t) as u64;
                    fp += (p && !t) as u64;
                    fn_ += (!p && t) as u64;
                }
            }
            let denom = tp + fp + fn_;
            (tp, fp, fn_, (denom != 0).then(|| tp as f64 / denom as f64))
        })
        .collect()
}

fn iou_oracle() -> Outcome {
    let mut rng = seeded(2);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let truth = random_labels(&mut rng, w, h, 12);
        let pred = random_labels(&mut rng, w, h, 12);
        let counts = confusion_counts(&pred, &truth, 12).unwrap();
        let ious = counts.per_class_iou();
        for (c, (tp, fp, fn_, expect)) in brute_force(&pred, &truth, 12).into_iter().enumerate() {
            if counts.triple(c) != (tp, fp, fn_) || ious[c] != expect || iou(tp, fp, fn_) != expect {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("200 pairs up to 32x32, 12 classes, {mismatches} mismatching class entries"))
}

// 3 ------------------------------------------------------------------------

const PRINTED_TP: [u64; 12] = [4, 3, 3, 3, 4, 3, 3, 4, 4, 3, 4, 3];
const PRINTED_FP: [u64; 12] = [0, 2, 2, 2, 2, 0, 2, 2, 0, 0, 0, 0];
const PRINTED_FN: [u64; 12] = [2, 0, 2, 0, 0, 2, 0, 0, 2, 2, 2, 2];
const PRINTED_IOU: [f64; 12] = [0.6, 0.6, 0.4, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6];

fn printed_table_replay() -> Outcome {
    let triples: Vec<(u64, u64, u64)> = (0..12).map(|c| (PRINTED_TP[c], PRINTED_FP[c], PRINTED_FN[c])).collect();
    let counts = ConfusionCounts::from_triples(&triples);
    let audit = audit_printed_ious(&counts, &PRINTED_IOU, 1);
    println!("{}", audit_to_csv(&audit).trim_end());

    let within: Vec<bool> = audit
        .iter()
        .map(|r| (r.recomputed.unwrap() - r.printed).abs() <= 0.05 + 1e-12)
        .collect();
    let n_within = within.iter().filter(|&&b| b).count();
    let consistent: Vec<usize> = (0..12).filter(|&c| !audit[c].flagged).collect();
    let exact = consistent.iter().all(|&c| {
        let (tp, fp, fn_) = triples[c];
        (audit[c].recomputed.unwrap() - tp as f64 / (tp + fp + fn_) as f64).abs() <= 1e-9
    });
    let flagged: Vec<&str> = audit.iter().filter(|r| r.flagged).map(|r| r.class.as_str()).collect();
    let flags_match_within = audit.iter().zip(&within).all(|(r, &w)| r.flagged != w);
    outcome(
        n_within == 12 && exact && consistent.len() == 8 && flagged.len() == 4 && flags_match_within,
        format!(
            "{n_within}/12 rows within ±0.05 of the printed IOU (need 12); formula exact on all {} consistent rows (expected 8); flagged {} rows {:?} (expected 4)",
            consistent.len(),
            flagged.len(),
            flagged
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn kmeans_invariants() -> Outcome {
    let mut rng = seeded(4);
    let mut increases = 0;
    let mut worst_mean_err: f64 = 0.0;
    let mut nondeterministic = 0;
    let dir = tempfile::tempdir().unwrap();
    for i in 0..50 {
        let (w, h) = (rng.random_range(4..=24), rng.random_range(4..=24));
        let base: Vec<[u8; 3]> = (0..rng.random_range(2..8)).map(|_| rng.random()).collect();
        let pixels: Vec<[u8; 3]> = (0..w * h)
            .map(|_| {
                let b = base[rng.random_range(0..base.len())];
                b.map(|v| v.saturating_add(rng.random_range(0..20)))
            })
            .collect();
        let k = rng.random_range(2..=6);
        let seed = rng.random();
        let model = kmeans_fit(&pixels, k, seed, 100, 0.5).unwrap();
        increases += model.inertia_history.windows(2).filter(|p| p[1] > p[0]).count();

        let mut sum = [0f64; 3];
        for p in &pixels {
            for ch in 0..3 {
                sum[ch] += p[ch] as f64;
            }
        }
        let one = kmeans_fit(&pixels, 1, seed, 100, 0.5).unwrap();
        for ch in 0..3 {
            worst_mean_err = worst_mean_err.max((one.centroids[0][ch] - sum[ch] / pixels.len() as f64).abs());
        }

        let (a, b) = (dir.path().join(format!("a{i}.km")), dir.path().join(format!("b{i}.km")));
        model.save(&a).unwrap();
        kmeans_fit(&pixels, k, seed, 100, 0.5).unwrap().save(&b).unwrap();
        if std::fs::read(&a).unwrap() != std::fs::read(&b).unwrap() || ClusterModel::load(&a).unwrap().k != model.k {
            nondeterministic += 1;
        }
    }
    outcome(
        increases == 0 && worst_mean_err <= 1e-4 && nondeterministic == 0,
        format!(
            "50 images: {increases} inertia increases, K=1 mean error {worst_mean_err:.1e} (<= 1e-4), {nondeterministic} differing model files"
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn scenes(n: u64, size: usize) -> Vec<Sample> {
    let palette = Palette::street();
    (0..n)
        .map(|seed| {
            let (image, labels) = generate_synthetic_scene(size, size, seed, &palette).unwrap();
            Sample { image, labels }
        })
        .collect()
}

fn overfit_run() -> Outcome {
    let data = scenes(4, 32);
    let start = Instant::now();
    let mut net = Network::build(NetworkConfig::default(), 42).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        optimizer: OptimizerConfig::adam(1e-3),
        ..TrainConfig::default()
    };
    let report = train(&mut net, &data, &[], &cfg).unwrap();
    let acc = pixel_accuracy(&net, &data).unwrap();
    let mut counts = ConfusionCounts::new(12);
    for s in &data {
        counts.accumulate(&net.predict(&s.image).unwrap(), &s.labels).unwrap();
    }
    let miou = counts.iou_report().unwrap().mean_iou;
    let secs = start.elapsed().as_secs_f64();
    let decreasing = report.epochs[49].mean_loss < report.epochs[0].mean_loss;
    outcome(
        acc >= 0.95 && miou >= 0.9 && secs < 300.0 && decreasing,
        format!(
            "4 scenes 32x32, Adam 1e-3, 300 epochs: pixel accuracy {acc:.4} (>= 0.95), MIoU {miou:.4} (>= 0.9), {secs:.1} s (< 300), loss epoch 50 {:.4} < epoch 1 {:.4}",
            report.epochs[49].mean_loss, report.epochs[0].mean_loss
        ),
    )
}

// 6 ------------------------------------------------------------------------

fn segpipe(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_segpipe"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn segpipe");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn pipeline() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let steps: [&[&str]; 6] = [
        &["gen", "--out", "d", "--count", "8"],
        &["labelgen", "--data", "d", "--k", "12"],
        &["split", "--data", "d", "--ratio", "0.8"],
        &["train", "--data", "d", "--split", "d/split.txt", "--epochs", "100", "--checkpoint", "m.segm"],
        &["eval", "--checkpoint", "m.segm", "--data", "d", "--split", "d/split.txt", "--subset", "train", "--report", "eval.csv"],
        &["bench", "--checkpoint", "m.segm", "--data", "d", "--report", "bench.json"],
    ];
    for step in steps {
        let (code, _) = segpipe(dir, step);
        if code != 0 {
            return outcome(false, format!("`segpipe {}` exited {code}", step.join(" ")));
        }
    }
    let csv = std::fs::read_to_string(dir.join("eval.csv")).unwrap();
    let report = EvalReport::from_csv(&csv).unwrap();
    let bench: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("bench.json")).unwrap()).unwrap();
    let fps = bench["fps"].as_f64().unwrap_or(f64::NAN);
    let miou = report.mean_iou.unwrap_or(f64::NAN);
    let has_mean_row = csv.lines().any(|l| l.starts_with("mean_iou,"));
    outcome(
        report.classes.len() == 12 && has_mean_row && fps.is_finite() && fps > 0.0 && miou >= 0.9,
        format!(
            "all steps exit 0; report has {} class rows, mean_iou row {has_mean_row}; training-portion MIoU {miou:.4}; bench fps {fps:.2}",
            report.classes.len()
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn loss_sanity() -> Outcome {
    let cfg = NetworkConfig {
        zero_init_head: true,
        ..NetworkConfig::default()
    };
    let net = Network::build(cfg, 7).unwrap();
    let data = scenes(2, 32);
    let images: Vec<&Image> = data.iter().map(|s| &s.image).collect();
    let targets: Vec<u8> = data.iter().flat_map(|s| s.labels.labels().to_vec()).collect();
    let loss = net.loss(&images_to_batch(&images, net.config().normalization).unwrap(), &targets).unwrap();
    let expected = 12f64.ln();
    outcome(
        (loss - expected).abs() <= 0.2,
        format!("zero-head initial loss {loss:.4}, ln 12 = {expected:.4}"),
    )
}

// 8 ------------------------------------------------------------------------

fn round_trips() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = seeded(8);
    let mut failures = Vec::new();

    for i in 0..20 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let img = random_image(&mut rng, w, h);
        let labels = random_labels(&mut rng, w, h, 12);
        let (pi, pl) = (tmp.path().join(format!("{i}.ppm")), tmp.path().join(format!("{i}.pgm")));
        save_image(&img, &pi).unwrap();
        save_labels(&labels, &pl).unwrap();
        if load_image(&pi).unwrap() != img || load_labels(&pl).unwrap() != labels {
            failures.push("pnm");
        }
    }

    let net = Network::build(NetworkConfig::default(), 3).unwrap();
    let ckpt = tmp.path().join("net.segm");
    save_checkpoint(&net, &ckpt).unwrap();
    let back = load_checkpoint(&ckpt).unwrap();
    let probe = scenes(1, 32).remove(0).image;
    if encode_checkpoint(&back) != std::fs::read(&ckpt).unwrap()
        || back != net
        || back.predict(&probe).unwrap() != net.predict(&probe).unwrap()
    {
        failures.push("checkpoint");
    }

    let mut counts = ConfusionCounts::new(12);
    for _ in 0..3 {
        let (a, b) = (random_labels(&mut rng, 16, 16, 12), random_labels(&mut rng, 16, 16, 12));
        counts.accumulate(&a, &b).unwrap();
    }
    let report = EvalReport::new(&counts, &counts.iou_report().unwrap(), None, Some(net.param_millions()), &[]);
    let parsed = EvalReport::from_csv(&report.to_csv()).unwrap();
    let to4 = |v: Option<f64>| v.map(|x| (x * 1e4).round() as i64);
    let values_match = parsed.classes.iter().zip(&report.classes).all(|(p, r)| {
        (p.tp, p.fp, p.fn_) == (r.tp, r.fp, r.fn_) && to4(p.iou) == to4(r.iou)
    }) && to4(parsed.mean_iou) == to4(report.mean_iou)
        && to4(parsed.param_millions) == to4(report.param_millions);
    if !values_match || parsed.to_csv() != report.to_csv() {
        failures.push("report csv");
    }

    let mut involution_failures = 0;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
        let img = random_image(&mut rng, w, h);
        let labels = random_labels(&mut rng, w, h, 12);
        let (fi, fl) = augment(&img, &labels, AugmentOp::HFlip).unwrap();
        let (fi, fl) = augment(&fi, &fl, AugmentOp::HFlip).unwrap();
        let mut r = (img.clone(), labels.clone());
        for _ in 0..4 {
            r = augment(&r.0, &r.1, AugmentOp::Rot90).unwrap();
        }
        if fi != img || fl != labels || r.0 != img || r.1 != labels {
            involution_failures += 1;
        }
    }
    if involution_failures > 0 {
        failures.push("augmentation");
    }
    outcome(
        failures.is_empty(),
        format!("PPM/PGM x20, checkpoint, report CSV, hflip^2 and rot90^4 x50; failures: {failures:?}"),
    )
}

// 9 ------------------------------------------------------------------------

fn fps_protocol() -> Outcome {
    let net = Network::build(NetworkConfig::default(), 9).unwrap();
    let images: Vec<Image> = scenes(4, 32).into_iter().map(|s| s.image).collect();
    let a = fps_benchmark(&net, &images, 10, 3).unwrap();
    let b = fps_benchmark(&net, &images, 10, 3).unwrap();
    let ratio = a.fps.max(b.fps) / a.fps.min(b.fps);
    let exact = [&a, &b].iter().all(|r| r.fps == r.images_processed as f64 / r.wall_seconds);
    outcome(
        a.images_processed == b.images_processed && ratio < 10.0 && exact && a.fps.is_finite() && a.fps > 0.0,
        format!(
            "runs {} / {} images, fps {:.1} / {:.1} (ratio {ratio:.2} < 10), fps = images/seconds exactly: {exact}",
            a.images_processed, b.images_processed, a.fps, b.fps
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient suite", gradient_suite),
        ("IOU oracle", iou_oracle),
        ("printed IOU table replay", printed_table_replay),
        ("K-means invariants", kmeans_invariants),
        ("overfit run", overfit_run),
        ("end-to-end pipeline", pipeline),
        ("loss sanity", loss_sanity),
        ("round trips", round_trips),
        ("FPS harness protocol", fps_protocol),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
