use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brixkit::data::SampleRecord;
use brixkit::features::write_feature_csv;
use brixkit::human::DEFAULT_SCORE_THRESHOLD;
use brixkit::metrics::HARVEST_THRESHOLD;
use brixkit::selection::{write_summary_csv, write_sweep_jsonl, DEFAULT_SEED};
use brixkit::{
    analyze_human_scores, bch_score, build_split, extract_features, features_with_flip, grid_search, harvest_metrics,
    hyperparam_correlation, load_manifest, mae, parse_human_scores, ridge_fit, ridge_predict, rmse, split_stats,
    write_synth_dataset, AtomicSplit, BchParams, DatasetSplit, Error, ErrorKind, FeatureConfig, PreparedSplit,
    RasterImage, Result, RidgeModel, SplitName, SweepGrid, SweepInput, SynthConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

mod config;

const DEFAULT_FEATURES: &str = "nx=16,ny=8,cross=none,space=hsv,res=low";

#[derive(Parser)]
#[command(name = "brixkit", version, about = "Grape °Brix estimation from bunch images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract grid color features for every manifest row (CSV)
    Features(FeaturesArgs),
    /// Fit a ridge model on a split's flip-augmented training set
    Train(TrainArgs),
    /// Predict °Brix for manifest rows with a saved model
    Predict(PredictArgs),
    /// Score a saved model on a split (MAE, RMSE, harvest decisions)
    Eval(EvalArgs),
    /// Cross-validated grid search over feature and ridge hyperparameters
    Sweep(SweepArgs),
    /// Label statistics of the experimental splits
    Stats(StatsArgs),
    /// Brix-color hinge model-selection score
    Bch(BchArgs),
    /// Correlations and harvest decisions from human assessment scores
    Human(HumanArgs),
    /// Write a synthetic planted-linear dataset
    Synth(SynthArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// JSON file or inline `nx=16,ny=8,cross=none,space=hsv,res=low`
    #[arg(long, default_value = DEFAULT_FEATURES)]
    config: String,
    /// CSV output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "Sm_j")]
    split: String,
    #[arg(long, default_value = DEFAULT_FEATURES)]
    config: String,
    #[arg(long, default_value_t = 9.0)]
    lambda: f64,
    /// Train on originals only
    #[arg(long)]
    no_augment: bool,
    /// Model JSON path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleSet {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Restrict to one experimental split (all manifest rows when absent)
    #[arg(long)]
    split: Option<String>,
    #[arg(long, value_enum, default_value = "all")]
    set: SampleSet,
    /// Clamp predictions to the refractometer range [9, 26]
    #[arg(long)]
    clamp: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "Sm_j")]
    split: String,
    #[arg(long, value_enum, default_value = "test")]
    set: SampleSet,
    /// °Brix cut for the harvest decision
    #[arg(long, default_value_t = HARVEST_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Standard split; its white-balanced counterpart is paired automatically
    #[arg(long, default_value = "Sm_j")]
    split: String,
    /// `full` or a JSON file with the value ranges to sweep
    #[arg(long, default_value = "full")]
    grid: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (0 = one per CPU)
    #[arg(long, env = "BRIXKIT_JOBS", default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value = "sweep-out")]
    out_dir: PathBuf,
    /// Share of best records used for the hyperparameter correlation report
    #[arg(long, default_value_t = 0.10)]
    top_fraction: f64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// One split only (all seven when absent)
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BchArgs {
    /// Color balanced accuracy in [0, 1]
    #[arg(long)]
    acolor: f64,
    /// °Brix mean absolute error
    #[arg(long)]
    lbrix: f64,
    #[arg(long, default_value_t = 2.0)]
    rho: f64,
    #[arg(long, default_value_t = 2.5)]
    t_brix: f64,
    #[arg(long, default_value_t = 0.8)]
    t_color: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HumanArgs {
    /// CSV with header sample_id,mean_brix,color_score,lignification,berry_shape
    #[arg(long)]
    scores: PathBuf,
    /// Color score at or above which a bunch is judged ready
    #[arg(long, default_value_t = DEFAULT_SCORE_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Label noise standard deviation (°Brix)
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value_t = 8)]
    ny: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Atomic split written in the manifest
    #[arg(long, default_value = "C")]
    atomic_split: String,
    /// Skip the raw_wb copies of each row
    #[arg(long)]
    no_wb: bool,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Bch(a) => cmd_bch(a),
        Command::Human(a) => cmd_human(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn emit<T: Serialize>(payload: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(payload)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn manifest_root(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or(Path::new("."))
}

fn load_image(root: &Path, record: &SampleRecord) -> Result<RasterImage> {
    RasterImage::load(&root.join(&record.image_path))
}

fn select(split: &DatasetSplit, set: SampleSet) -> Vec<SampleRecord> {
    match set {
        SampleSet::Train => split.train.clone(),
        SampleSet::Test => split.test.clone(),
        SampleSet::All => split.train.iter().chain(&split.test).cloned().collect(),
    }
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let cfg = config::parse_feature_config(&a.config)?;
    let records = load_manifest(&a.manifest)?;
    let root = manifest_root(&a.manifest);
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let f = extract_features(&load_image(root, r)?, &cfg)?;
        rows.push((r.sample_id.clone(), f.values));
    }
    match &a.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            write_feature_csv(std::io::BufWriter::new(file), &rows)?;
        }
        None => write_feature_csv(std::io::stdout().lock(), &rows)?,
    }
    eprintln!("{} rows x {} features ({cfg})", rows.len(), cfg.feature_len()?);
    Ok(())
}

fn training_matrix(
    records: &[SampleRecord],
    root: &Path,
    cfg: &FeatureConfig,
    augment: bool,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut x = Vec::with_capacity(2 * records.len());
    let mut flipped = Vec::with_capacity(records.len());
    for r in records {
        let (orig, flip) = features_with_flip(&load_image(root, r)?, cfg)?;
        x.push(orig);
        flipped.push(flip);
    }
    let mut y: Vec<f64> = records.iter().map(|r| r.brix_mean).collect();
    if augment {
        x.extend(flipped);
        y.extend_from_within(..);
    }
    Ok((x, y))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = config::parse_feature_config(&a.config)?;
    let records = load_manifest(&a.manifest)?;
    let split = build_split(&records, &a.split)?;
    if split.train.is_empty() {
        return Err(Error::EmptyInput("split has no training samples"));
    }
    let (x, y) = training_matrix(&split.train, manifest_root(&a.manifest), &cfg, !a.no_augment)?;
    let mut model = ridge_fit(&x, &y, a.lambda)?;
    model.feature_config = Some(cfg);
    let train_mae = mae(&ridge_predict(&model, &x)?, &y)?;
    match &a.out {
        Some(path) => model.save(path)?,
        None => emit(&model, None)?,
    }
    eprintln!(
        "trained on {} ({} rows, {} features), lambda {}, train MAE {train_mae:.4}",
        split.name,
        x.len(),
        model.n_features(),
        a.lambda
    );
    Ok(())
}

fn model_config(model: &RidgeModel) -> Result<FeatureConfig> {
    model
        .feature_config
        .ok_or_else(|| Error::InvalidConfig("model carries no feature configuration".into()))
}

fn predict_records(model: &RidgeModel, records: &[SampleRecord], root: &Path) -> Result<Vec<f64>> {
    let cfg = model_config(model)?;
    records
        .iter()
        .map(|r| model.predict_one(&extract_features(&load_image(root, r)?, &cfg)?.values))
        .collect()
}

#[derive(Serialize)]
struct Prediction {
    sample_id: String,
    brix_pred: f64,
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = RidgeModel::load(&a.model)?;
    let mut records = load_manifest(&a.manifest)?;
    if let Some(name) = &a.split {
        records = select(&build_split(&records, name)?, a.set);
    }
    let preds = predict_records(&model, &records, manifest_root(&a.manifest))?;
    let out: Vec<Prediction> = records
        .iter()
        .zip(preds)
        .map(|(r, p)| Prediction {
            sample_id: r.sample_id.clone(),
            brix_pred: if a.clamp {
                p.clamp(brixkit::data::BRIX_MIN, brixkit::data::BRIX_MAX)
            } else {
                p
            },
        })
        .collect();
    emit(&out, a.out.as_deref())?;
    eprintln!("{} predictions", out.len());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let model = RidgeModel::load(&a.model)?;
    let records = load_manifest(&a.manifest)?;
    let split = build_split(&records, &a.split)?;
    let set = select(&split, a.set);
    if set.is_empty() {
        return Err(Error::EmptyInput("selected sample set is empty"));
    }
    let pred = predict_records(&model, &set, manifest_root(&a.manifest))?;
    let truth: Vec<f64> = set.iter().map(|r| r.brix_mean).collect();
    let report = json!({
        "split": split.name,
        "n": set.len(),
        "mae": mae(&pred, &truth)?,
        "rmse": rmse(&pred, &truth)?,
        "harvest": harvest_metrics(&pred, &truth, a.threshold)?,
    });
    emit(&report, a.out.as_deref())?;
    eprintln!(
        "{}: n={} MAE {:.4} RMSE {:.4}",
        split.name, report["n"], report["mae"], report["rmse"]
    );
    Ok(())
}

fn load_grid(spec: &str) -> Result<SweepGrid> {
    if spec.eq_ignore_ascii_case("full") {
        return Ok(SweepGrid::full());
    }
    let text = fs::read_to_string(spec).map_err(|e| Error::Io {
        path: spec.into(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("grid file {spec}: {e}")))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let grid = load_grid(&a.grid)?;
    grid.validate()?;
    // Image decoding shares the sweep's worker budget.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build_global();
    let records = load_manifest(&a.manifest)?;
    let name: SplitName = a.split.parse()?;
    let (std_name, wb_name) = name.variants();
    let root = manifest_root(&a.manifest);
    let std = PreparedSplit::load(brixkit::build_named_split(&records, std_name), root, &grid.resolution)?;
    let wb_split = brixkit::build_named_split(&records, wb_name);
    let wb = if grid.variant.contains(&brixkit::Variant::Wb) && !wb_split.train.is_empty() {
        Some(PreparedSplit::load(wb_split, root, &grid.resolution)?)
    } else {
        None
    };
    let input = SweepInput { std, wb };
    let results = grid_search(&input, &grid, a.seed, a.jobs)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let jsonl = a.out_dir.join("sweep.jsonl");
    write_sweep_jsonl(create(&jsonl)?, &results)?;
    let summary = a.out_dir.join("summary.csv");
    write_summary_csv(create(&summary)?, &results)?;
    let correlation = match hyperparam_correlation(&results, a.top_fraction) {
        Ok(c) => {
            let path = a.out_dir.join("correlation.json");
            emit(&c, Some(&path))?;
            Some(path)
        }
        Err(Error::TooFewRecords { .. }) => None,
        Err(e) => return Err(e),
    };
    emit(
        &json!({
            "split": name,
            "seed": a.seed,
            "n_records": results.len(),
            "best": results.first(),
            "sweep_jsonl": jsonl,
            "summary_csv": summary,
            "correlation_json": correlation,
        }),
        None,
    )?;
    eprintln!("{:>4} {:>8} {:>8} {:>8}  config", "rank", "val_mae", "train", "test");
    for (i, r) in results.iter().take(10).enumerate() {
        let test = r.test_mae.map_or("-".to_string(), |t| format!("{t:.4}"));
        eprintln!(
            "{:>4} {:>8.4} {:>8.4} {test:>8}  {}",
            i + 1,
            r.val_mae,
            r.train_mae,
            r.config
        );
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let records = load_manifest(&a.manifest)?;
    let names: Vec<SplitName> = match &a.split {
        Some(s) => vec![s.parse()?],
        None => SplitName::ALL.to_vec(),
    };
    let mut out = Vec::new();
    for name in names {
        let split = brixkit::build_named_split(&records, name);
        let train = split_stats(&split.train).ok();
        let test = split_stats(&split.test).ok();
        for (set, s) in [("train", &train), ("test", &test)] {
            if let Some(s) = s {
                eprintln!(
                    "{name:<5} {set:<5} n={:<4} mean {:.2} std {:.2} MAD {:.2}",
                    s.count, s.mean, s.std, s.mad
                );
            }
        }
        out.push(json!({ "split": name, "train": train, "test": test }));
    }
    emit(&out, a.out.as_deref())
}

fn cmd_bch(a: BchArgs) -> Result<()> {
    let params = BchParams::new(a.rho, a.t_brix, a.t_color)?;
    if !a.acolor.is_finite() || !a.lbrix.is_finite() {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    let score = bch_score(a.acolor, a.lbrix, &params);
    emit(
        &json!({ "score": score, "a_color": a.acolor, "l_brix": a.lbrix, "params": params }),
        a.out.as_deref(),
    )?;
    eprintln!("BCH {score} (eta {})", params.eta());
    Ok(())
}

fn cmd_human(a: HumanArgs) -> Result<()> {
    let text = fs::read_to_string(&a.scores).map_err(|e| Error::Io {
        path: a.scores.clone(),
        source: e,
    })?;
    let analysis = analyze_human_scores(&parse_human_scores(&text)?, a.threshold)?;
    emit(&analysis, a.out.as_deref())?;
    eprint!("{:>14}", "");
    for name in &analysis.attributes {
        eprint!("{name:>14}");
    }
    eprintln!();
    for (name, row) in analysis.attributes.iter().zip(&analysis.correlation) {
        eprint!("{name:>14}");
        for r in row {
            match r {
                Some(r) => eprint!("{r:>14.3}"),
                None => eprint!("{:>14}", "-"),
            }
        }
        eprintln!();
    }
    let h = &analysis.harvest;
    eprintln!(
        "score >= {} vs brix >= {}: precision {:.2} recall {:.2} f1 {:.2}",
        analysis.score_threshold, analysis.brix_threshold, h.precision, h.recall, h.f1
    );
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let atomic: AtomicSplit = a.atomic_split.parse()?;
    let cfg = SynthConfig {
        width: a.width,
        height: a.height,
        n_bin_x: a.nx,
        n_bin_y: a.ny,
        samples: a.samples,
        noise_sigma: a.noise,
        ..Default::default()
    };
    let ds = brixkit::synth_generate(&cfg, a.seed)?;
    let records = write_synth_dataset(&a.out_dir, &cfg, a.seed, atomic, !a.no_wb)?;
    emit(
        &json!({
            "manifest": a.out_dir.join("manifest.csv"),
            "rows": records.len(),
            "samples": cfg.samples,
            "seed": a.seed,
            "bias": ds.bias,
            "weights": ds.weights,
        }),
        None,
    )?;
    eprintln!("wrote {} samples to {}", cfg.samples, a.out_dir.display());
    Ok(())
}
