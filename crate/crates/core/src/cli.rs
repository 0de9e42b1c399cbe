//! Command-line front end: `extract`, `eval`, `grid` and `curve`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    Classifier, ClassifierSpec, Kernel, MlpParams, Model, Pipeline, SvmParams, TrainedPipeline, TreeParams,
};
use crate::dataset::{Layout, load_dataset, parse_size};
use crate::error::{Error, Result};
use crate::eval::report::{render_report, row_key, write_curve_csv, write_json, write_results_csv, write_summary_csv};
use crate::eval::{EvalReport, LearningCurve, accuracy, cross_validate, kfold_split, learning_curve};
use crate::featstore::{FeatureMatrix, read_features, write_features};
use crate::features::{Extractor, extract_dataset};
use crate::hog::HogParams;
use crate::lbp::LbpParams;

#[derive(Debug, Parser)]
#[command(
    name = "texturebench",
    version,
    about = "Texture feature extraction and classification benchmark"
)]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract features for every image of a dataset into a feature file.
    #[command(subcommand)]
    Extract(ExtractCommand),
    /// Cross-validate one classifier on a feature file.
    Eval(EvalArgs),
    /// Run every feature set against every classifier.
    Grid(GridArgs),
    /// Learning curve of one classifier on a feature file.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset root directory.
    #[arg(long, env = "TEXTUREBENCH_DATA")]
    pub data: PathBuf,

    #[arg(long, default_value = "prefix")]
    pub layout: Layout,

    /// Resize every image to WxH by area averaging.
    #[arg(long, value_parser = parse_size_arg)]
    pub resize: Option<(usize, usize)>,
}

fn parse_size_arg(s: &str) -> std::result::Result<(usize, usize), String> {
    parse_size(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct LbpArgs {
    #[arg(long, default_value_t = 14)]
    pub points: usize,

    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,

    /// L1-normalise histograms (default: raw counts).
    #[arg(long, overrides_with = "no_normalize")]
    pub normalize: bool,

    #[arg(long)]
    pub no_normalize: bool,
}

impl LbpArgs {
    fn extractor(&self) -> Result<Extractor> {
        Ok(Extractor::Lbp {
            params: LbpParams::new(self.points, self.radius)?,
            normalize: self.normalize && !self.no_normalize,
        })
    }
}

#[derive(Debug, Args)]
pub struct HogArgs {
    /// Cell side in pixels.
    #[arg(long, default_value_t = 18)]
    pub cell: usize,

    /// Block side in cells.
    #[arg(long, default_value_t = 1)]
    pub block: usize,

    #[arg(long, default_value_t = 8)]
    pub bins: usize,

    /// Use 0..360 degree orientations instead of 0..180.
    #[arg(long)]
    pub signed: bool,
}

impl HogArgs {
    fn extractor(&self) -> Result<Extractor> {
        let p = HogParams {
            cell_size: self.cell,
            block_size: self.block,
            orientation_bins: self.bins,
            signed: self.signed,
        };
        p.validate()?;
        Ok(Extractor::Hog(p))
    }
}

#[derive(Debug, Subcommand)]
pub enum ExtractCommand {
    /// Rotation-invariant local binary pattern histograms.
    Lbp {
        #[command(flatten)]
        params: LbpArgs,
        #[command(flatten)]
        io: ExtractIo,
    },
    /// Histograms of oriented gradients.
    Hog {
        #[command(flatten)]
        params: HogArgs,
        #[command(flatten)]
        io: ExtractIo,
    },
}

#[derive(Debug, Args)]
pub struct ExtractIo {
    #[command(flatten)]
    pub data: DataArgs,

    /// Output feature file (default `<extractor>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClfKind {
    Svm,
    Tree,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Rbf,
    Linear,
}

#[derive(Debug, Args)]
pub struct ClfArgs {
    #[arg(long, value_enum, default_value = "svm")]
    pub clf: ClfKind,

    #[arg(long, default_value_t = 2.5)]
    pub svm_c: f64,

    #[arg(long, default_value_t = 1.5e-6)]
    pub svm_gamma: f64,

    #[arg(long, value_enum, default_value = "rbf")]
    pub svm_kernel: KernelKind,

    #[arg(long, default_value_t = 1e-3)]
    pub svm_tol: f64,

    #[arg(long, default_value_t = 5e-4)]
    pub mlp_lr: f64,

    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "300,300")]
    pub mlp_hidden: Vec<usize>,

    #[arg(long, default_value_t = 32)]
    pub mlp_batch: usize,

    #[arg(long, default_value_t = 1000)]
    pub mlp_epochs: usize,

    #[arg(long)]
    pub tree_max_depth: Option<usize>,

    /// Z-score features with training-fold statistics before fitting.
    #[arg(long)]
    pub standardize: bool,
}

impl ClfArgs {
    pub fn pipeline(&self, seed: u64) -> Result<Pipeline> {
        let spec = match self.clf {
            ClfKind::Svm => {
                let p = SvmParams {
                    c: self.svm_c,
                    gamma: self.svm_gamma,
                    kernel: match self.svm_kernel {
                        KernelKind::Rbf => Kernel::Rbf,
                        KernelKind::Linear => Kernel::Linear,
                    },
                    tol: self.svm_tol,
                    ..SvmParams::default()
                };
                p.validate()?;
                ClassifierSpec::Svm(p)
            }
            ClfKind::Tree => ClassifierSpec::Tree(TreeParams {
                max_depth: self.tree_max_depth,
                seed: phase_seed(seed, Phase::Classifier),
                ..TreeParams::default()
            }),
            ClfKind::Mlp => {
                if self.mlp_hidden.is_empty() || self.mlp_hidden.contains(&0) {
                    return Err(Error::param("hidden layer widths must be at least 1"));
                }
                if self.mlp_lr.is_nan() || self.mlp_lr <= 0.0 {
                    return Err(Error::param("learning rate must be positive"));
                }
                ClassifierSpec::Mlp(MlpParams {
                    hidden_layers: self.mlp_hidden.clone(),
                    learning_rate: self.mlp_lr,
                    batch_size: self.mlp_batch,
                    max_epochs: self.mlp_epochs,
                    seed: phase_seed(seed, Phase::Classifier),
                    ..MlpParams::default()
                })
            }
        };
        Ok(Pipeline {
            standardize: self.standardize,
            classifier: spec,
        })
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Root seed; every random phase derives its own seed from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 3)]
    pub k: usize,

    /// Plain shuffled folds instead of class-stratified ones.
    #[arg(long)]
    pub no_stratify: bool,

    /// Write zero for every timing so reruns produce identical files.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Feature file to evaluate.
    #[arg(long)]
    pub features: PathBuf,

    #[command(flatten)]
    pub clf: ClfArgs,

    #[command(flatten)]
    pub run: RunArgs,

    /// Directory for results.csv, summary.csv and report.json.
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,

    /// After cross-validation, fit on all samples and save the model here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,

    /// Skip cross-validation and score a saved model on the feature file.
    #[arg(long, conflicts_with = "save_model")]
    pub model: Option<PathBuf>,

    /// Re-run the configuration echoed in a previous report.json.
    #[arg(long, conflicts_with_all = ["model", "save_model"])]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Directory holding exported deep feature files (fc1.csv, block5_pool.csv, ...).
    #[arg(long)]
    pub deep_dir: Option<PathBuf>,

    #[command(flatten)]
    pub run: RunArgs,

    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,

    /// Also write SVM and MLP learning curves on the LBP features.
    #[arg(long)]
    pub curve: bool,

    #[arg(long, value_delimiter = ',', default_value = "0.1,0.325,0.55,0.775,1.0")]
    pub fractions: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub features: PathBuf,

    #[command(flatten)]
    pub clf: ClfArgs,

    #[command(flatten)]
    pub run: RunArgs,

    /// Training-set fractions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.325,0.55,0.775,1.0")]
    pub fractions: Vec<f64>,

    /// Output CSV.
    #[arg(long, default_value = "curve.csv")]
    pub out: PathBuf,
}

/// Deep feature sets looked up by `grid --deep-dir`, in table order.
pub const DEEP_LAYERS: [&str; 4] = ["fc1", "block5_pool", "block4_pool", "block3_pool"];

#[derive(Clone, Copy, Debug)]
enum Phase {
    Folds,
    Classifier,
}

/// Per-phase seed derived from the root seed.
fn phase_seed(seed: u64, phase: Phase) -> u64 {
    match phase {
        Phase::Folds => seed,
        Phase::Classifier => seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1),
    }
}

/// A model saved by `eval --save-model`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedModel {
    pub extractor: String,
    pub extractor_params: String,
    pub class_names: Vec<String>,
    pub pipeline: Pipeline,
    pub model: TrainedPipeline,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::param(e.to_string()))?;
    }
    match cli.command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Grid(a) => cmd_grid(&a),
        Command::Curve(a) => cmd_curve(&a),
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(Error::Dataset(format!("{} is not a directory", path.display())));
    }
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    Ok(())
}

pub fn cmd_extract(cmd: &ExtractCommand) -> Result<()> {
    let (extractor, a) = match cmd {
        ExtractCommand::Lbp { params, io } => (params.extractor()?, io),
        ExtractCommand::Hog { params, io } => (params.extractor()?, io),
    };
    require_dir(&a.data.data)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", extractor.name())));
    let start = Instant::now();
    let set = load_dataset(&a.data.data, a.data.layout, a.data.resize)?;
    info!("loaded {} images in {} classes", set.len(), set.class_names.len());
    let features = extract_dataset(&set, &extractor)?;
    write_features(&out, &features)?;
    println!(
        "{}: n={} d={} in {:.2}s -> {}",
        extractor.name(),
        features.n_samples(),
        features.dim(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn strip_timing(report: &mut EvalReport) {
    report.wall_ms = 0.0;
    for f in &mut report.folds {
        f.train_ms = 0.0;
        f.predict_ms = 0.0;
    }
}

fn evaluate(features: &FeatureMatrix, clf: &dyn Classifier, run: &RunArgs) -> Result<EvalReport> {
    let (y, _) = features.encode_labels();
    let plan = kfold_split(
        features.n_samples(),
        &y,
        run.k,
        phase_seed(run.seed, Phase::Folds),
        !run.no_stratify,
    )?;
    let mut report = cross_validate(features, clf, &plan)?;
    // The echo records the root seed, from which every phase seed follows.
    report.config.seed = run.seed;
    if run.no_timing {
        strip_timing(&mut report);
    }
    Ok(report)
}

fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    create_dir(dir)?;
    write_results_csv(&dir.join("results.csv"), reports)?;
    write_summary_csv(&dir.join("summary.csv"), reports)?;
    write_json(&dir.join("report.json"), reports)
}

/// Rebuilds the evaluation settings from a `report.json` echo.
fn load_replay(path: &Path) -> Result<(Pipeline, RunArgs, Option<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let reports: Vec<EvalReport> = serde_json::from_str(&text)?;
    let first = reports
        .first()
        .ok_or_else(|| Error::param(format!("{} holds no reports", path.display())))?;
    let spec = first
        .config
        .classifier_spec
        .clone()
        .ok_or_else(|| Error::param("echo has no classifier specification"))?;
    let pipeline: Pipeline = serde_json::from_value(spec)?;
    let run = RunArgs {
        seed: first.config.seed,
        k: first.config.k,
        no_stratify: !first.config.stratified,
        no_timing: false,
    };
    Ok((pipeline, run, first.config.source.clone()))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    require_file(&a.features)?;
    if let Some(m) = &a.model {
        require_file(m)?;
    }
    let features = read_features(&a.features)?;

    if let Some(path) = &a.model {
        return score_saved_model(path, &features);
    }

    let (pipeline, run) = match &a.replay {
        Some(path) => {
            let (pipeline, mut run, source) = load_replay(path)?;
            if let (Some(want), Some(have)) = (&source, &features.meta.source)
                && want != have
            {
                return Err(Error::param(format!(
                    "feature file source {have} differs from the echoed source {want}"
                )));
            }
            run.no_timing = a.run.no_timing;
            (pipeline, run)
        }
        None => (
            a.clf.pipeline(a.run.seed)?,
            RunArgs {
                seed: a.run.seed,
                k: a.run.k,
                no_stratify: a.run.no_stratify,
                no_timing: a.run.no_timing,
            },
        ),
    };

    let report = evaluate(&features, &pipeline, &run)?;
    write_reports(&a.out_dir, std::slice::from_ref(&report))?;
    println!(
        "{} + {}: {}  folds {:?}",
        report.config.extractor,
        report.config.classifier,
        report.summary(),
        report
            .fold_accuracies()
            .iter()
            .map(|v| format!("{v:.2}"))
            .collect::<Vec<_>>()
    );

    if let Some(path) = &a.save_model {
        let (y, class_names) = features.encode_labels();
        let model = pipeline.train(features.data(), &y, class_names.len())?;
        let saved = SavedModel {
            extractor: features.meta.extractor.clone(),
            extractor_params: features.meta.params.clone(),
            class_names,
            pipeline,
            model,
        };
        let text = serde_json::to_string(&saved)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        info!("saved model to {}", path.display());
    }
    Ok(())
}

fn score_saved_model(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let saved: SavedModel = serde_json::from_str(&text)?;
    if saved.model.dim() != features.dim() {
        return Err(Error::Dimension {
            expected: saved.model.dim(),
            got: features.dim(),
        });
    }
    let predicted = saved.model.predict(features.data())?;
    // Labels the model never saw can never be predicted correctly.
    let truth: Vec<usize> = features
        .labels()
        .iter()
        .map(|l| saved.class_names.iter().position(|c| c == l).unwrap_or(usize::MAX))
        .collect();
    println!(
        "{} on {} samples: {:.2}%",
        saved.pipeline.name(),
        features.n_samples(),
        accuracy(&truth, &predicted)
    );
    Ok(())
}

/// The three classifiers with the hyperparameters used throughout the grid.
pub fn grid_classifiers(seed: u64) -> Vec<Pipeline> {
    let seed = phase_seed(seed, Phase::Classifier);
    vec![
        ClassifierSpec::Svm(SvmParams::default()).into(),
        ClassifierSpec::Tree(TreeParams {
            seed,
            ..TreeParams::default()
        })
        .into(),
        ClassifierSpec::Mlp(MlpParams {
            seed,
            ..MlpParams::default()
        })
        .into(),
    ]
}

/// Finds `<layer>.csv` or `vgg19_<layer>.csv` in `dir`.
pub fn find_deep_file(dir: &Path, layer: &str) -> Option<PathBuf> {
    [format!("{layer}.csv"), format!("vgg19_{layer}.csv")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

pub fn cmd_grid(a: &GridArgs) -> Result<()> {
    require_dir(&a.data.data)?;
    if let Some(d) = &a.deep_dir {
        require_dir(d)?;
    }
    create_dir(&a.out_dir)?;
    let start = Instant::now();
    let set = load_dataset(&a.data.data, a.data.layout, a.data.resize)?;
    info!("loaded {} images in {} classes", set.len(), set.class_names.len());

    let handcrafted = [
        Extractor::Lbp {
            params: LbpParams::default(),
            normalize: false,
        },
        Extractor::Hog(HogParams::default()),
    ];
    let mut feature_sets: Vec<FeatureMatrix> = Vec::new();
    for ex in &handcrafted {
        let fm = extract_dataset(&set, ex)?;
        write_features(&a.out_dir.join(format!("{}.csv", ex.name())), &fm)?;
        feature_sets.push(fm);
    }

    let mut absent = Vec::new();
    let expected_labels: Vec<&str> = (0..set.len()).map(|i| set.label_name(i)).collect();
    for layer in DEEP_LAYERS {
        match a.deep_dir.as_deref().and_then(|d| find_deep_file(d, layer)) {
            Some(path) => {
                let fm = read_features(&path)?;
                if fm
                    .labels()
                    .iter()
                    .map(String::as_str)
                    .ne(expected_labels.iter().copied())
                {
                    return Err(Error::Dataset(format!(
                        "{}: labels or sample order differ from the dataset",
                        path.display()
                    )));
                }
                feature_sets.push(fm);
            }
            None => absent.push(format!("vgg19 {layer}")),
        }
    }

    let classifiers = grid_classifiers(a.run.seed);
    let cells: Vec<(usize, usize)> = (0..feature_sets.len())
        .flat_map(|f| (0..classifiers.len()).map(move |c| (f, c)))
        .collect();
    let reports = cells
        .par_iter()
        .map(|&(f, c)| evaluate(&feature_sets[f], &classifiers[c], &a.run))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    write_reports(&a.out_dir, &reports)?;
    let md = render_report(&reports, &absent);
    let md_path = a.out_dir.join("report.md");
    std::fs::write(&md_path, &md).map_err(|e| Error::io(&md_path, e))?;
    for r in &reports {
        println!("{:<28} {:<5} {}", row_key(r), r.config.classifier, r.summary());
    }
    for name in &absent {
        println!("{name:<28} absent");
    }

    if a.curve {
        let lbp = &feature_sets[0];
        let curves = classifiers
            .iter()
            .filter(|c| c.name() != "tree")
            .map(|c| curve_for(lbp, c, &a.run, &a.fractions))
            .collect::<Result<Vec<_>>>()?;
        for c in &curves {
            write_curve_csv(
                &a.out_dir.join(format!("curve_{}_{}.csv", c.classifier, c.extractor)),
                std::slice::from_ref(c),
            )?;
        }
    }
    info!("grid finished in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn curve_for(
    features: &FeatureMatrix,
    clf: &dyn Classifier,
    run: &RunArgs,
    fractions: &[f64],
) -> Result<LearningCurve> {
    let (y, _) = features.encode_labels();
    let plan = kfold_split(
        features.n_samples(),
        &y,
        run.k,
        phase_seed(run.seed, Phase::Folds),
        !run.no_stratify,
    )?;
    learning_curve(features, clf, &plan, fractions)
}

pub fn cmd_curve(a: &CurveArgs) -> Result<()> {
    require_file(&a.features)?;
    let features = read_features(&a.features)?;
    let pipeline = a.clf.pipeline(a.run.seed)?;
    let curve = curve_for(&features, &pipeline, &a.run, &a.fractions)?;
    write_curve_csv(&a.out, std::slice::from_ref(&curve))?;
    for p in &curve.points {
        println!(
            "fraction {:.3} (n={}): train {:.2}% test {:.2} ± {:.2}%",
            p.fraction,
            p.train_size,
            p.train_mean(),
            p.test_mean(),
            p.test_std()
        );
    }
    Ok(())
}
