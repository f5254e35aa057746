//! Subcommand arguments and their implementations.

use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, ValueEnum};
use segpipe_core::clustering::{kmeans_assign, kmeans_fit, recolor as paint, ClusterModel};
use segpipe_core::dataset::{
    augment as transform, generate_synthetic_scene, load_image, load_labels, save_image, save_labels,
    split_dataset, AugmentOp, DatasetSplit, Image,
};
use segpipe_core::metrics::{
    fps_benchmark, write_report, ConfusionCounts, EvalReport, FpsResult, ReportFormat,
};
use segpipe_core::network::{
    load_checkpoint, save_checkpoint, train_with, Network, NetworkConfig, TrainConfig,
};
use segpipe_core::optim::OptimizerConfig;
use segpipe_core::Error;

use crate::config::{defaults, OptimizerChoice, PipelineConfig};
use crate::data::*;
use crate::error::{CliError, CliResult};
use crate::given;

/// Copies flag values the user typed into the config.
macro_rules! take {
    ($m:expr, $cfg:expr, $args:expr, $($field:ident),+ $(,)?) => {
        $(if given($m, stringify!($field)) {
            $cfg.$field = $args.$field.clone();
        })+
    };
}

fn require<'a>(value: Option<&'a PathBuf>, what: &str, flag: &str) -> CliResult<&'a Path> {
    value
        .map(PathBuf::as_path)
        .ok_or_else(|| CliError::Usage(format!("{what} not set: pass {flag} or set it in the config file")))
}

fn data_dir<'a>(flag: &'a Option<PathBuf>, cfg: &'a PipelineConfig) -> CliResult<&'a Path> {
    require(flag.as_ref().or(cfg.data_dir.as_ref()), "data directory", "--data")
}

fn checkpoint_path<'a>(flag: &'a Option<PathBuf>, cfg: &'a PipelineConfig) -> CliResult<&'a Path> {
    require(flag.as_ref().or(cfg.checkpoint.as_ref()), "checkpoint path", "--checkpoint")
}

// ---------------------------------------------------------------- gen

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory for <id>.ppm images and <id>.pgm label maps
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of scenes
    #[arg(long, default_value_t = defaults::SCENES)]
    pub count: usize,
    #[arg(long, default_value_t = defaults::SCENE_SIZE)]
    pub width: usize,
    #[arg(long, default_value_t = defaults::SCENE_SIZE)]
    pub height: usize,
    /// Scene i uses seed + i
    #[arg(long, default_value_t = defaults::SEED)]
    pub seed: u64,
    /// Palette CSV (class_index,name,r,g,b); the built-in street palette if omitted
    #[arg(long, value_name = "FILE")]
    pub palette: Option<PathBuf>,
}

impl GenArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(m, cfg, self, seed);
        if self.out.is_some() {
            cfg.data_dir = self.out.clone();
        }
        if self.palette.is_some() {
            cfg.palette = self.palette.clone();
        }
    }
}

pub fn gen(a: &GenArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let out = require(cfg.data_dir.as_ref(), "output directory", "--out")?;
    let palette = palette_or_street(cfg.palette.as_deref())?;
    create_dir(out)?;
    for i in 0..a.count {
        let id = format!("scene_{i:03}");
        let (image, labels) = generate_synthetic_scene(a.width, a.height, cfg.seed.wrapping_add(i as u64), &palette)?;
        save_image(&image, image_path(out, &id))?;
        save_labels(&labels, labels_path(out, &id))?;
    }
    println!(
        "gen: {} scenes {}x{} seed {} -> {}",
        a.count,
        a.width,
        a.height,
        cfg.seed,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- cluster

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Image(s) whose pixels are pooled for the fit
    #[arg(long, required = true, num_args = 1.., value_name = "PPM")]
    pub input: Vec<PathBuf>,
    /// Number of clusters
    #[arg(long, default_value_t = defaults::K)]
    pub k: usize,
    #[arg(long, default_value_t = defaults::SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = defaults::MAX_ITERS)]
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid move (RGB units)
    #[arg(long, default_value_t = defaults::TOL)]
    pub tol: f64,
    /// Output model file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

impl ClusterArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(m, cfg, self, k, seed, max_iters, tol);
    }
}

fn fit_shared(images: &[Image], cfg: &PipelineConfig) -> CliResult<ClusterModel> {
    let pixels: Vec<[u8; 3]> = images.iter().flat_map(Image::rgb_iter).collect();
    Ok(kmeans_fit(&pixels, cfg.k, cfg.seed, cfg.max_iters, cfg.tol)?)
}

pub fn cluster(a: &ClusterArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let images = a.input.iter().map(load_image).collect::<Result<Vec<_>, _>>()?;
    let model = fit_shared(&images, cfg)?;
    model.save(&a.out)?;
    println!(
        "cluster: k {} seed {} iterations {} inertia {:.4} -> {}",
        model.k,
        model.seed,
        model.iterations_run,
        model.inertia,
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- labelgen

#[derive(Args, Debug)]
pub struct LabelgenArgs {
    /// Directory of <id>.ppm images
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Where <id>.pgm label maps go; defaults to the image directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = defaults::K)]
    pub k: usize,
    #[arg(long, default_value_t = defaults::SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = defaults::MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = defaults::TOL)]
    pub tol: f64,
    /// Also save the fitted model here
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
}

impl LabelgenArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(m, cfg, self, k, seed, max_iters, tol);
    }
}

pub fn labelgen(a: &LabelgenArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let dir = data_dir(&a.data, cfg)?;
    let out = a.out.as_deref().unwrap_or(dir);
    let ids = ids_with_ext(dir, "ppm")?;
    if ids.is_empty() {
        return Err(Error::Data(format!("{}: no .ppm images", dir.display())).into());
    }
    let images = load_images(dir, &ids)?;
    let model = fit_shared(&images, cfg)?;
    create_dir(out)?;
    for (id, img) in ids.iter().zip(&images) {
        save_labels(&kmeans_assign(img, &model), labels_path(out, id))?;
    }
    if let Some(path) = &a.model {
        model.save(path)?;
    }
    println!(
        "labelgen: {} images k {} seed {} inertia {:.4} -> {}",
        ids.len(),
        model.k,
        model.seed,
        model.inertia,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- recolor

#[derive(Args, Debug)]
pub struct RecolorArgs {
    /// Label map (PGM)
    #[arg(long, value_name = "PGM")]
    pub labels: PathBuf,
    /// Output image (PPM)
    #[arg(long, value_name = "PPM")]
    pub out: PathBuf,
    /// Color label i with centroid i of this model instead of the palette
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Palette CSV; the built-in street palette if omitted
    #[arg(long, value_name = "FILE")]
    pub palette: Option<PathBuf>,
}

impl RecolorArgs {
    pub fn apply(&self, _m: &ArgMatches, cfg: &mut PipelineConfig) {
        if self.palette.is_some() {
            cfg.palette = self.palette.clone();
        }
    }
}

pub fn recolor(a: &RecolorArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let labels = load_labels(&a.labels)?;
    let (colors, source) = match &a.model {
        Some(path) => (ClusterModel::load(path)?.centroid_colors(), "centroids"),
        None => (palette_or_street(cfg.palette.as_deref())?.colors(), "palette"),
    };
    save_image(&paint(&labels, &colors)?, &a.out)?;
    println!("recolor: {}x{} from {source} -> {}", labels.width(), labels.height(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- augment

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OpName {
    Hflip,
    Vflip,
    Rot90,
    Rot180,
    Rot270,
}

impl From<OpName> for AugmentOp {
    fn from(op: OpName) -> Self {
        match op {
            OpName::Hflip => AugmentOp::HFlip,
            OpName::Vflip => AugmentOp::VFlip,
            OpName::Rot90 => AugmentOp::Rot90,
            OpName::Rot180 => AugmentOp::Rot180,
            OpName::Rot270 => AugmentOp::Rot270,
        }
    }
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Directory of labelled samples
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output directory; sample <id> becomes <id>_<op>
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Transforms to apply, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_value = "hflip,vflip,rot90,rot180,rot270")]
    pub ops: Vec<OpName>,
}

impl AugmentArgs {
    pub fn apply(&self, _m: &ArgMatches, _cfg: &mut PipelineConfig) {}
}

pub fn augment(a: &AugmentArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let dir = data_dir(&a.data, cfg)?;
    let ids = labelled_ids(dir)?;
    let samples = load_samples(dir, &ids)?;
    create_dir(&a.out)?;
    let mut written = 0;
    for (id, s) in ids.iter().zip(&samples) {
        for &op in &a.ops {
            let op = AugmentOp::from(op);
            let (img, labels) = transform(&s.image, &s.labels, op)?;
            let new_id = format!("{id}_{}", op.name());
            save_image(&img, image_path(&a.out, &new_id))?;
            save_labels(&labels, labels_path(&a.out, &new_id))?;
            written += 1;
        }
    }
    println!("augment: {} samples x {} ops = {written} -> {}", ids.len(), a.ops.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- split

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Directory of labelled samples
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Fraction of samples (rounded up) that go to training
    #[arg(long = "ratio", id = "split_ratio", default_value_t = defaults::SPLIT_RATIO)]
    pub split_ratio: f64,
    #[arg(long, default_value_t = defaults::SEED)]
    pub seed: u64,
    /// Split file; defaults to <data>/split.txt
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

impl SplitArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(m, cfg, self, split_ratio, seed);
    }
}

pub fn split(a: &SplitArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let dir = data_dir(&a.data, cfg)?;
    let ids = labelled_ids(dir)?;
    let split = split_dataset(&ids, cfg.split_ratio, cfg.seed)?;
    let out = a.out.clone().unwrap_or_else(|| dir.join("split.txt"));
    write_text(&out, &split.to_text())?;
    println!(
        "split: {} train {} val ratio {} seed {} -> {}",
        split.train.len(),
        split.val.len(),
        split.ratio,
        split.seed,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of labelled samples
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Split file; without one every sample is used for training
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Where to save the trained network
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = defaults::EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = defaults::BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long = "lr", id = "learning_rate", default_value_t = defaults::LEARNING_RATE)]
    pub learning_rate: f32,
    #[arg(long, value_enum, default_value_t = OptimizerChoice::Adam)]
    pub optimizer: OptimizerChoice,
    /// SGD momentum (ignored by Adam)
    #[arg(long, default_value_t = defaults::MOMENTUM)]
    pub momentum: f32,
    /// Clip the global gradient norm to this value
    #[arg(long)]
    pub max_grad_norm: Option<f32>,
    /// Number of output classes
    #[arg(long = "classes", id = "num_classes", default_value_t = defaults::NUM_CLASSES)]
    pub num_classes: usize,
    /// Encoder stage widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = defaults::STAGE_WIDTHS)]
    pub stage_widths: Vec<usize>,
    /// Seeds both weight initialisation and batch shuffling
    #[arg(long, default_value_t = defaults::SEED)]
    pub seed: u64,
    /// Start the classifier head at zero
    #[arg(long)]
    pub zero_init_head: bool,
    /// Per-epoch CSV log (epoch,mean_loss,val_miou); timing is left out
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

impl TrainArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(
            m,
            cfg,
            self,
            epochs,
            batch_size,
            learning_rate,
            optimizer,
            momentum,
            num_classes,
            stage_widths,
            seed
        );
        if self.max_grad_norm.is_some() {
            cfg.max_grad_norm = self.max_grad_norm;
        }
        if self.data.is_some() {
            cfg.data_dir = self.data.clone();
        }
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
    }
}

fn optimizer_config(cfg: &PipelineConfig) -> OptimizerConfig {
    let mut o = match cfg.optimizer {
        OptimizerChoice::Adam => OptimizerConfig::adam(cfg.learning_rate),
        OptimizerChoice::Sgd => OptimizerConfig::sgd(cfg.learning_rate, cfg.momentum),
    };
    o.max_grad_norm = cfg.max_grad_norm;
    o
}

fn load_split(path: Option<&Path>, ids: Vec<String>) -> CliResult<DatasetSplit> {
    match path {
        Some(p) => Ok(DatasetSplit::load(p)?),
        None => Ok(DatasetSplit {
            train: ids,
            val: Vec::new(),
            ratio: 1.0,
            seed: 0,
        }),
    }
}

pub fn train(a: &TrainArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let dir = data_dir(&a.data, cfg)?;
    let ckpt = checkpoint_path(&a.checkpoint, cfg)?;
    let split = load_split(a.split.as_deref(), labelled_ids(dir)?)?;
    let train_set = load_samples(dir, &split.train)?;
    let val_set = load_samples(dir, &split.val)?;
    let net_cfg = NetworkConfig {
        num_classes: cfg.num_classes,
        stage_widths: cfg.stage_widths.clone(),
        zero_init_head: a.zero_init_head,
        ..NetworkConfig::default()
    };
    let mut net = Network::build(net_cfg, cfg.seed)?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        optimizer: optimizer_config(cfg),
        seed: cfg.seed,
    };
    let report = train_with(&mut net, &train_set, &val_set, &train_cfg, |e| {
        if e.epoch == 1 || e.epoch % 10 == 0 || e.epoch == cfg.epochs {
            let val = e.val_miou.map_or_else(String::new, |v| format!(" val_miou {v:.4}"));
            eprintln!("epoch {:>4} loss {:.6}{val}", e.epoch, e.mean_loss);
        }
    })?;
    save_checkpoint(&net, ckpt)?;
    if let Some(log) = &a.log {
        let mut text = format!("# seed {} epochs {} optimizer {:?}\nepoch,mean_loss,val_miou\n", cfg.seed, cfg.epochs, cfg.optimizer);
        for e in &report.epochs {
            let val = e.val_miou.map_or_else(String::new, |v| format!("{v:.6}"));
            text.push_str(&format!("{},{:.8},{val}\n", e.epoch, e.mean_loss));
        }
        write_text(log, &text)?;
    }
    let final_loss = report.final_loss().map_or_else(|| "n/a".to_string(), |l| format!("{l:.6}"));
    println!(
        "train: {} epochs on {} samples ({} val) seed {} params {} final_loss {final_loss} -> {}",
        cfg.epochs,
        train_set.len(),
        val_set.len(),
        cfg.seed,
        net.param_count(),
        ckpt.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Val,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of predicted <id>.pgm label maps
    #[arg(long, value_name = "DIR", requires = "truth", conflicts_with = "checkpoint")]
    pub pred: Option<PathBuf>,
    /// Directory of ground-truth <id>.pgm label maps
    #[arg(long, value_name = "DIR")]
    pub truth: Option<PathBuf>,
    /// Predict with this network instead of reading --pred
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Labelled samples to predict on (with --checkpoint)
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Split file selecting the samples (with --checkpoint)
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Which part of the split to evaluate
    #[arg(long, value_enum, default_value_t = Subset::All)]
    pub subset: Subset,
    #[arg(long = "classes", id = "num_classes", default_value_t = defaults::NUM_CLASSES)]
    pub num_classes: usize,
    /// Report file; defaults to <report_dir>/eval.csv when report_dir is configured
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Report format; by default taken from the report file extension
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Palette CSV supplying class names for the report
    #[arg(long, value_name = "FILE")]
    pub palette: Option<PathBuf>,
    /// JSON written by `bench` whose FPS goes into the report
    #[arg(long, value_name = "FILE")]
    pub bench_report: Option<PathBuf>,
}

impl EvalArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(m, cfg, self, num_classes);
        if self.palette.is_some() {
            cfg.palette = self.palette.clone();
        }
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
    }
}

fn subset_ids(split: &DatasetSplit, subset: Subset) -> Vec<String> {
    match subset {
        Subset::Train => split.train.clone(),
        Subset::Val => split.val.clone(),
        Subset::All => split.train.iter().chain(&split.val).cloned().collect(),
    }
}

pub fn eval(a: &EvalArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let mut counts = ConfusionCounts::new(cfg.num_classes);
    let mut param_millions = None;
    let evaluated;
    if let Some(pred_dir) = &a.pred {
        let truth_dir = require(a.truth.as_ref(), "ground-truth directory", "--truth")?;
        let ids = ids_with_ext(truth_dir, "pgm")?;
        if ids.is_empty() {
            return Err(Error::Data(format!("{}: no .pgm label maps", truth_dir.display())).into());
        }
        for id in &ids {
            let truth = load_labels(labels_path(truth_dir, id))?;
            let pred = load_labels(labels_path(pred_dir, id))?;
            counts.accumulate(&pred, &truth)?;
        }
        evaluated = ids.len();
    } else {
        let ckpt = checkpoint_path(&a.checkpoint, cfg)?;
        let dir = data_dir(&a.data, cfg)?;
        let net = load_checkpoint(ckpt)?;
        if net.num_classes() != cfg.num_classes {
            return Err(Error::Data(format!(
                "checkpoint predicts {} classes but --classes is {}",
                net.num_classes(),
                cfg.num_classes
            ))
            .into());
        }
        let split = load_split(a.split.as_deref(), labelled_ids(dir)?)?;
        let ids = subset_ids(&split, a.subset);
        if ids.is_empty() {
            return Err(Error::Data("selected subset is empty".into()).into());
        }
        for s in load_samples(dir, &ids)? {
            counts.accumulate(&net.predict(&s.image)?, &s.labels)?;
        }
        param_millions = Some(net.param_millions());
        evaluated = ids.len();
    }
    let iou = counts.iou_report()?;
    let fps = match &a.bench_report {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            Some(serde_json::from_str::<FpsResult>(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let names: Vec<String> = match &cfg.palette {
        Some(p) => palette_or_street(Some(p))?.entries().iter().map(|e| e.name.clone()).collect(),
        None => Vec::new(),
    };
    let report = EvalReport::new(&counts, &iou, fps.as_ref(), param_millions, &names);
    print!("{}", report.to_table());
    let path = a
        .report
        .clone()
        .or_else(|| cfg.report_dir.as_ref().map(|d| d.join("eval.csv")));
    if let Some(path) = &path {
        let format = match a.format {
            Some(FormatArg::Csv) => ReportFormat::Csv,
            Some(FormatArg::Json) => ReportFormat::Json,
            None => ReportFormat::from_path(path),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_report(&report, path, format)?;
    }
    println!(
        "eval: {evaluated} samples mean_iou {:.4} over {} classes{}",
        iou.mean_iou,
        iou.classes_counted,
        path.map_or_else(String::new, |p| format!(" -> {}", p.display()))
    );
    Ok(())
}

// ---------------------------------------------------------------- bench

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Directory of <id>.ppm images to time
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Untimed predictions before measuring
    #[arg(long, default_value_t = defaults::WARMUP)]
    pub warmup: usize,
    /// Timed passes over the image set
    #[arg(long, default_value_t = defaults::REPEATS)]
    pub repeats: usize,
    /// JSON result file
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

impl BenchArgs {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut PipelineConfig) {
        take!(m, cfg, self, warmup, repeats);
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
    }
}

pub fn bench(a: &BenchArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let net = load_checkpoint(checkpoint_path(&a.checkpoint, cfg)?)?;
    let dir = data_dir(&a.data, cfg)?;
    let images = load_images(dir, &ids_with_ext(dir, "ppm")?)?;
    let result = fps_benchmark(&net, &images, cfg.warmup, cfg.repeats)?;
    if let Some(path) = &a.report {
        write_text(path, &(serde_json::to_string_pretty(&result).expect("result serializes") + "\n"))?;
    }
    println!(
        "bench: {} images in {:.4} s fps {:.4} (warmup {}, {} repeats, {} {}, {} cpus)",
        result.images_processed,
        result.wall_seconds,
        result.fps,
        result.warmup_iters,
        result.repeats,
        result.machine.os,
        result.machine.arch,
        result.machine.logical_cpus
    );
    Ok(())
}

// ---------------------------------------------------------------- infer

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// An image file or a directory of <id>.ppm images
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output directory for <id>.pgm predictions
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write <id>.color.ppm painted with the palette
    #[arg(long)]
    pub color: bool,
    /// Palette CSV for --color; the built-in street palette if omitted
    #[arg(long, value_name = "FILE")]
    pub palette: Option<PathBuf>,
}

impl InferArgs {
    pub fn apply(&self, _m: &ArgMatches, cfg: &mut PipelineConfig) {
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
        if self.palette.is_some() {
            cfg.palette = self.palette.clone();
        }
    }
}

pub fn infer(a: &InferArgs, cfg: &PipelineConfig) -> CliResult<()> {
    let net = load_checkpoint(checkpoint_path(&a.checkpoint, cfg)?)?;
    let inputs: Vec<(String, PathBuf)> = if a.input.is_dir() {
        ids_with_ext(&a.input, "ppm")?
            .into_iter()
            .map(|id| {
                let p = image_path(&a.input, &id);
                (id, p)
            })
            .collect()
    } else {
        let id = a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CliError::Usage(format!("bad input path {}", a.input.display())))?
            .to_string();
        vec![(id, a.input.clone())]
    };
    let colors = if a.color {
        Some(palette_or_street(cfg.palette.as_deref())?.colors())
    } else {
        None
    };
    create_dir(&a.out)?;
    for (id, path) in &inputs {
        let labels = net.predict(&load_image(path)?)?;
        save_labels(&labels, labels_path(&a.out, id))?;
        if let Some(colors) = &colors {
            save_image(&paint(&labels, colors)?, a.out.join(format!("{id}.color.ppm")))?;
        }
    }
    println!("infer: {} images -> {}", inputs.len(), a.out.display());
    Ok(())
}
