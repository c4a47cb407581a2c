//! Cross-validated hyperparameter search for the grid-feature ridge model.
//!
//! Training images are augmented with horizontal flips (training folds only),
//! scored with 5-fold cross-validation, and the full hyperparameter grid is
//! evaluated exhaustively. Folds are drawn once per split and seed and shared
//! by every configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::{convert_image, ColorSpace, FloatImage};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::features::{cross_limits, resize, CellIntegral, CrossMode, FeatureConfig, Resolution};
use crate::metrics::{mae, pearson};
use crate::raster::RasterImage;
use crate::ridge::RidgeProblem;

pub const N_FOLDS: usize = 5;
pub const HFLIP_SUFFIX: &str = ":hflip";
pub const DEFAULT_SEED: u64 = 42;

/// Standard camera JPG or white-balanced image set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Std,
    Wb,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Std, Variant::Wb];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Std => "std",
            Variant::Wb => "wb",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "std" | "jpg" => Ok(Variant::Std),
            "wb" => Ok(Variant::Wb),
            other => Err(Error::InvalidConfig(format!("unknown dataset variant `{other}`"))),
        }
    }
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_bin_x: usize,
    pub n_bin_y: usize,
    pub cross: CrossMode,
    pub space: ColorSpace,
    pub resolution: Resolution,
    pub variant: Variant,
    pub lambda: f64,
}

impl SweepConfig {
    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            n_bin_x: self.n_bin_x,
            n_bin_y: self.n_bin_y,
            cross: self.cross,
            space: self.space,
            resolution: self.resolution,
        }
    }

    /// Dataset label in the `low_res` / `wb_low_res` style.
    pub fn dataset_name(&self) -> String {
        match self.variant {
            Variant::Std => format!("{}_res", self.resolution),
            Variant::Wb => format!("wb_{}_res", self.resolution),
        }
    }
}

impl fmt::Display for SweepConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nx={} ny={} cross={} space={} dataset={} lambda={}",
            self.n_bin_x,
            self.n_bin_y,
            self.cross,
            self.space,
            self.dataset_name(),
            self.lambda
        )
    }
}

/// Value ranges to sweep; the cartesian product is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_bin_x: Vec<usize>,
    pub n_bin_y: Vec<usize>,
    pub cross: Vec<CrossMode>,
    pub space: Vec<ColorSpace>,
    pub resolution: Vec<Resolution>,
    pub variant: Vec<Variant>,
    pub lambda: Vec<f64>,
}

pub const TABLE_LAMBDAS: [f64; 8] = [0.33, 1.0, 3.0, 9.0, 27.0, 81.0, 243.0, 729.0];

impl SweepGrid {
    /// The complete published search space (3888 points).
    pub fn full() -> Self {
        Self {
            n_bin_x: vec![4, 8, 16],
            n_bin_y: vec![8, 16, 32],
            cross: CrossMode::ALL.to_vec(),
            space: ColorSpace::ALL.to_vec(),
            resolution: Resolution::ALL.to_vec(),
            variant: Variant::ALL.to_vec(),
            lambda: TABLE_LAMBDAS.to_vec(),
        }
    }

    pub fn single(config: &SweepConfig) -> Self {
        Self {
            n_bin_x: vec![config.n_bin_x],
            n_bin_y: vec![config.n_bin_y],
            cross: vec![config.cross],
            space: vec![config.space],
            resolution: vec![config.resolution],
            variant: vec![config.variant],
            lambda: vec![config.lambda],
        }
    }

    pub fn len(&self) -> usize {
        self.n_bin_x.len()
            * self.n_bin_y.len()
            * self.cross.len()
            * self.space.len()
            * self.resolution.len()
            * self.variant.len()
            * self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("sweep grid has an empty range".into()));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid lambda {l}")));
        }
        for &nx in &self.n_bin_x {
            for &ny in &self.n_bin_y {
                for &cross in &self.cross {
                    cross_limits(nx, ny, cross)?;
                }
            }
        }
        Ok(())
    }

    /// Every grid point, in a fixed nesting order (variant outermost, λ innermost).
    pub fn configs(&self) -> Vec<SweepConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &variant in &self.variant {
            for &resolution in &self.resolution {
                for &space in &self.space {
                    for &n_bin_x in &self.n_bin_x {
                        for &n_bin_y in &self.n_bin_y {
                            for &cross in &self.cross {
                                for &lambda in &self.lambda {
                                    out.push(SweepConfig {
                                        n_bin_x,
                                        n_bin_y,
                                        cross,
                                        space,
                                        resolution,
                                        variant,
                                        lambda,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub config: SweepConfig,
    pub val_mae: f64,
    pub train_mae: f64,
    pub test_mae: Option<f64>,
    pub fold_maes: Vec<f64>,
    pub feature_len: usize,
}

/// Seeded shuffle followed by balanced contiguous chunking.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::TooFewSamples {
            needed: k.max(2),
            got: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// A labeled image with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub sample_id: String,
    pub image: RasterImage,
    pub brix: f64,
}

/// Originals followed by their mirrored copies; copies carry the `:hflip` suffix.
pub fn augment_hflip(samples: &[LabeledImage]) -> Vec<LabeledImage> {
    let mut out = samples.to_vec();
    out.extend(samples.iter().map(|s| LabeledImage {
        sample_id: format!("{}{HFLIP_SUFFIX}", s.sample_id),
        image: s.image.hflip(),
        brix: s.brix,
    }));
    out
}

/// Row of a CV design: index into the split's training samples and whether it is mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugRef {
    pub index: usize,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    /// Training rows: training-fold originals, then their flips.
    pub train: Vec<AugRef>,
    /// Validation rows: originals only.
    pub val: Vec<usize>,
}

pub fn fold_plans(n: usize, seed: u64) -> Result<Vec<FoldPlan>> {
    let folds = kfold_indices(n, N_FOLDS, seed)?;
    Ok((0..folds.len())
        .map(|v| {
            let originals: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != v)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let train = augmented_rows(&originals);
            FoldPlan {
                train,
                val: folds[v].clone(),
            }
        })
        .collect())
}

fn augmented_rows(originals: &[usize]) -> Vec<AugRef> {
    originals
        .iter()
        .map(|&index| AugRef { index, flipped: false })
        .chain(originals.iter().map(|&index| AugRef { index, flipped: true }))
        .collect()
}

impl FoldPlan {
    /// (training ids, validation ids), using the split's sample ids.
    pub fn sample_ids(&self, split: &DatasetSplit) -> (Vec<String>, Vec<String>) {
        let train = self
            .train
            .iter()
            .map(|r| {
                let id = &split.train[r.index].sample_id;
                if r.flipped {
                    format!("{id}{HFLIP_SUFFIX}")
                } else {
                    id.clone()
                }
            })
            .collect();
        let val = self.val.iter().map(|&i| split.train[i].sample_id.clone()).collect();
        (train, val)
    }
}

/// A split whose images are already resized to every working resolution needed.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub split: DatasetSplit,
    train: Vec<Vec<(Resolution, RasterImage)>>,
    test: Vec<Vec<(Resolution, RasterImage)>>,
}

fn resize_all(image: &RasterImage, resolutions: &[Resolution]) -> Result<Vec<(Resolution, RasterImage)>> {
    resolutions.iter().map(|&r| Ok((r, resize(image, r.dims())?))).collect()
}

fn unique_resolutions(resolutions: &[Resolution]) -> Vec<Resolution> {
    resolutions
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

impl PreparedSplit {
    pub fn from_images(
        split: DatasetSplit,
        train: &[RasterImage],
        test: &[RasterImage],
        resolutions: &[Resolution],
    ) -> Result<Self> {
        if train.len() != split.train.len() || test.len() != split.test.len() {
            return Err(Error::InvalidInput("image count does not match split records".into()));
        }
        let res = unique_resolutions(resolutions);
        let prep =
            |imgs: &[RasterImage]| -> Result<Vec<_>> { imgs.par_iter().map(|img| resize_all(img, &res)).collect() };
        Ok(Self {
            train: prep(train)?,
            test: prep(test)?,
            split,
        })
    }

    /// Decode every image (relative to `root`) and keep only the resized copies.
    pub fn load(split: DatasetSplit, root: &Path, resolutions: &[Resolution]) -> Result<Self> {
        let res = unique_resolutions(resolutions);
        let prep = |recs: &[crate::data::SampleRecord]| -> Result<Vec<_>> {
            recs.par_iter()
                .map(|r| resize_all(&RasterImage::load(&root.join(&r.image_path))?, &res))
                .collect()
        };
        Ok(Self {
            train: prep(&split.train)?,
            test: prep(&split.test)?,
            split,
        })
    }

    fn image(set: &[(Resolution, RasterImage)], res: Resolution) -> Result<&RasterImage> {
        set.iter()
            .find(|(r, _)| *r == res)
            .map(|(_, img)| img)
            .ok_or_else(|| Error::InvalidInput(format!("split was not prepared at {res} resolution")))
    }

    fn train_labels(&self) -> Vec<f64> {
        self.split.train.iter().map(|r| r.brix_mean).collect()
    }

    fn test_labels(&self) -> Vec<f64> {
        self.split.test.iter().map(|r| r.brix_mean).collect()
    }
}

/// Standard and (optionally) white-balanced versions of one experimental split.
#[derive(Debug, Clone)]
pub struct SweepInput {
    pub std: PreparedSplit,
    pub wb: Option<PreparedSplit>,
}

impl SweepInput {
    fn variant(&self, v: Variant) -> Result<&PreparedSplit> {
        match v {
            Variant::Std => Ok(&self.std),
            Variant::Wb => self
                .wb
                .as_ref()
                .ok_or_else(|| Error::MissingVariant(self.std.split.name.to_string())),
        }
    }
}

/// Per-image integral tables for one (variant, resolution, color space).
struct ConvertedSet {
    train: Vec<(CellIntegral, CellIntegral)>,
    test: Vec<CellIntegral>,
}

fn mirror(img: &FloatImage) -> FloatImage {
    let mut data = Vec::with_capacity(img.data.len());
    for row in img.data.chunks_exact(img.width * 3) {
        for px in row.chunks_exact(3).rev() {
            data.extend_from_slice(px);
        }
    }
    FloatImage {
        width: img.width,
        height: img.height,
        data,
    }
}

fn convert_set(split: &PreparedSplit, res: Resolution, space: ColorSpace) -> Result<ConvertedSet> {
    let train = split
        .train
        .par_iter()
        .map(|set| {
            let conv = convert_image(PreparedSplit::image(set, res)?, space);
            // Conversion is pixel-wise, so mirroring the converted image equals
            // converting the mirrored raster.
            let flipped = CellIntegral::new(&mirror(&conv));
            Ok((CellIntegral::new(&conv), flipped))
        })
        .collect::<Result<Vec<_>>>()?;
    let test = split
        .test
        .par_iter()
        .map(|set| {
            Ok(CellIntegral::new(&convert_image(
                PreparedSplit::image(set, res)?,
                space,
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvertedSet { train, test })
}

/// Features of an image and of its mirror image, computed exactly as in the
/// sweep (mirroring after the resize).
pub fn features_with_flip(image: &RasterImage, config: &FeatureConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    let conv = convert_image(&resize(image, config.resolution.dims())?, config.space);
    let (nx, ny, cross) = (config.n_bin_x, config.n_bin_y, config.cross);
    Ok((
        CellIntegral::new(&conv).features(nx, ny, cross)?,
        CellIntegral::new(&mirror(&conv)).features(nx, ny, cross)?,
    ))
}

struct GridFeatures {
    train: Vec<Vec<f64>>,
    train_flipped: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
}

impl GridFeatures {
    fn new(set: &ConvertedSet, nx: usize, ny: usize, cross: CrossMode) -> Result<Self> {
        let mut train = Vec::with_capacity(set.train.len());
        let mut train_flipped = Vec::with_capacity(set.train.len());
        for (orig, flip) in &set.train {
            train.push(orig.features(nx, ny, cross)?);
            train_flipped.push(flip.features(nx, ny, cross)?);
        }
        let test = set
            .test
            .iter()
            .map(|t| t.features(nx, ny, cross))
            .collect::<Result<_>>()?;
        Ok(Self {
            train,
            train_flipped,
            test,
        })
    }

    fn rows(&self, refs: &[AugRef]) -> Vec<&[f64]> {
        refs.iter()
            .map(|r| {
                if r.flipped {
                    self.train_flipped[r.index].as_slice()
                } else {
                    self.train[r.index].as_slice()
                }
            })
            .collect()
    }
}

/// Evaluate every λ for one feature configuration.
fn evaluate_group(
    split: &PreparedSplit,
    plans: &[FoldPlan],
    feats: &GridFeatures,
    base: SweepConfig,
    lambdas: &[f64],
) -> Result<Vec<SweepRecord>> {
    let labels = split.train_labels();
    let feature_len = feats.train.first().map_or(0, Vec::len);
    let mut fold_maes = vec![Vec::with_capacity(plans.len()); lambdas.len()];
    let mut train_maes = vec![0.0; lambdas.len()];

    for plan in plans {
        let x = feats.rows(&plan.train);
        let y: Vec<f64> = plan.train.iter().map(|r| labels[r.index]).collect();
        let x_val: Vec<&[f64]> = plan.val.iter().map(|&i| feats.train[i].as_slice()).collect();
        let y_val: Vec<f64> = plan.val.iter().map(|&i| labels[i]).collect();
        let problem = RidgeProblem::new(&x, &y)?;
        for (li, &lambda) in lambdas.iter().enumerate() {
            let model = problem.solve(lambda)?;
            let pred_val = crate::ridge::ridge_predict(&model, &x_val)?;
            fold_maes[li].push(mae(&pred_val, &y_val)?);
            let pred_tr = crate::ridge::ridge_predict(&model, &x)?;
            train_maes[li] += mae(&pred_tr, &y)?;
        }
    }

    let test_maes: Vec<Option<f64>> = if split.split.test.is_empty() {
        vec![None; lambdas.len()]
    } else {
        let all: Vec<usize> = (0..labels.len()).collect();
        let refs = augmented_rows(&all);
        let x = feats.rows(&refs);
        let y: Vec<f64> = refs.iter().map(|r| labels[r.index]).collect();
        let problem = RidgeProblem::new(&x, &y)?;
        let test_labels = split.test_labels();
        lambdas
            .iter()
            .map(|&lambda| {
                let model = problem.solve(lambda)?;
                let pred = crate::ridge::ridge_predict(&model, &feats.test)?;
                Ok(Some(mae(&pred, &test_labels)?))
            })
            .collect::<Result<_>>()?
    };

    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let folds = std::mem::take(&mut fold_maes[li]);
            SweepRecord {
                config: SweepConfig { lambda, ..base },
                val_mae: folds.iter().sum::<f64>() / folds.len() as f64,
                train_mae: train_maes[li] / plans.len() as f64,
                test_mae: test_maes[li],
                fold_maes: folds,
                feature_len,
            }
        })
        .collect())
}

/// Cross-validate a single configuration.
pub fn evaluate_config(input: &SweepInput, config: &SweepConfig, seed: u64) -> Result<SweepRecord> {
    let mut records = grid_search(input, &SweepGrid::single(config), seed, 1)?;
    Ok(records.remove(0))
}

/// Total ranking order: val MAE, then shorter features, then stronger regularization.
pub fn rank_cmp(a: &SweepRecord, b: &SweepRecord) -> std::cmp::Ordering {
    a.val_mae
        .total_cmp(&b.val_mae)
        .then(a.feature_len.cmp(&b.feature_len))
        .then(b.config.lambda.total_cmp(&a.config.lambda))
}

/// Evaluate the whole grid on a pool of `jobs` threads (0 = one per CPU) and
/// return the records ranked best first. Output does not depend on `jobs`.
pub fn grid_search(input: &SweepInput, grid: &SweepGrid, seed: u64, jobs: usize) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_grid(input, grid, seed))
}

fn run_grid(input: &SweepInput, grid: &SweepGrid, seed: u64) -> Result<Vec<SweepRecord>> {
    let mut records = Vec::with_capacity(grid.len());
    for &variant in &grid.variant {
        let split = input.variant(variant)?;
        if split.split.train.is_empty() {
            return Err(Error::EmptyInput("split has no training samples"));
        }
        let plans = fold_plans(split.split.train.len(), seed)?;
        for &resolution in &grid.resolution {
            for &space in &grid.space {
                let converted = convert_set(split, resolution, space)?;
                let groups: Vec<(usize, usize, CrossMode)> = grid
                    .n_bin_x
                    .iter()
                    .flat_map(|&nx| {
                        grid.n_bin_y
                            .iter()
                            .flat_map(move |&ny| grid.cross.iter().map(move |&c| (nx, ny, c)))
                    })
                    .collect();
                let chunk: Vec<Vec<SweepRecord>> = groups
                    .par_iter()
                    .map(|&(nx, ny, cross)| {
                        let base = SweepConfig {
                            n_bin_x: nx,
                            n_bin_y: ny,
                            cross,
                            space,
                            resolution,
                            variant,
                            lambda: 0.0,
                        };
                        let attach = |e: Error| Error::InConfig {
                            config: base.to_string(),
                            source: Box::new(e),
                        };
                        let feats = GridFeatures::new(&converted, nx, ny, cross).map_err(attach)?;
                        evaluate_group(split, &plans, &feats, base, &grid.lambda).map_err(attach)
                    })
                    .collect::<Result<_>>()?;
                records.extend(chunk.into_iter().flatten());
            }
        }
    }
    // Stable sort over the fixed enumeration order keeps the ranking total.
    records.sort_by(rank_cmp);
    Ok(records)
}

/// Correlation of one encoded hyperparameter column with validation MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCorrelation {
    pub column: String,
    pub r: f64,
    /// Set when either the column or val_mae is constant; r is then reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamCorrelation {
    pub top_fraction: f64,
    pub n_records: usize,
    pub columns: Vec<ColumnCorrelation>,
}

fn encode_columns(records: &[&SweepRecord]) -> Vec<(String, Vec<f64>)> {
    let col = |name: &str, f: &dyn Fn(&SweepRecord) -> f64| -> (String, Vec<f64>) {
        (name.to_string(), records.iter().map(|r| f(r)).collect())
    };
    let mut cols = vec![
        col("log_lambda", &|r| r.config.lambda.ln()),
        col("n_bin_x", &|r| r.config.n_bin_x as f64),
        col("n_bin_y", &|r| r.config.n_bin_y as f64),
        col("feature_len", &|r| r.feature_len as f64),
    ];
    for c in CrossMode::ALL {
        cols.push(col(&format!("cross={c}"), &|r| {
            f64::from(u8::from(r.config.cross == c))
        }));
    }
    for s in ColorSpace::ALL {
        cols.push(col(&format!("space={s}"), &|r| {
            f64::from(u8::from(r.config.space == s))
        }));
    }
    for res in Resolution::ALL {
        cols.push(col(&format!("resolution={res}"), &|r| {
            f64::from(u8::from(r.config.resolution == res))
        }));
    }
    for v in Variant::ALL {
        cols.push(col(&format!("variant={}", v.as_str()), &|r| {
            f64::from(u8::from(r.config.variant == v))
        }));
    }
    cols
}

/// Pearson correlation of each encoded hyperparameter with val MAE over the
/// best `top_fraction` of the records.
pub fn hyperparam_correlation(records: &[SweepRecord], top_fraction: f64) -> Result<HyperparamCorrelation> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "top fraction must be in (0, 1], got {top_fraction}"
        )));
    }
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| rank_cmp(a, b));
    let keep = ((records.len() as f64 * top_fraction).ceil() as usize).min(records.len());
    if keep < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: keep });
    }
    let top = &sorted[..keep];
    let val: Vec<f64> = top.iter().map(|r| r.val_mae).collect();
    let columns = encode_columns(top)
        .into_iter()
        .map(|(column, values)| match pearson(&values, &val) {
            Ok(r) => ColumnCorrelation {
                column,
                r,
                degenerate: false,
            },
            Err(_) => ColumnCorrelation {
                column,
                r: 0.0,
                degenerate: true,
            },
        })
        .collect();
    Ok(HyperparamCorrelation {
        top_fraction,
        n_records: keep,
        columns,
    })
}

/// One JSON document per line.
pub fn write_sweep_jsonl<W: Write>(mut out: W, records: &[SweepRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<sweep jsonl>", e))?;
    }
    Ok(())
}

/// Ranked summary table.
pub fn write_summary_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rank",
        "test_mae",
        "val_mae",
        "train_mae",
        "lambda",
        "n_bin_x",
        "n_bin_y",
        "cross",
        "color_space",
        "dataset",
        "feature_len",
    ])?;
    for (i, r) in records.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.test_mae.map(|v| format!("{v:.4}")).unwrap_or_default(),
            format!("{:.4}", r.val_mae),
            format!("{:.4}", r.train_mae),
            r.config.lambda.to_string(),
            r.config.n_bin_x.to_string(),
            r.config.n_bin_y.to_string(),
            r.config.cross.to_string(),
            r.config.space.to_string(),
            r.config.dataset_name(),
            r.feature_len.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<summary csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_features_match_flipped_image() {
        let data: Vec<u8> = (0..40 * 30 * 3).map(|i| (i * 37 % 251) as u8).collect();
        let img = RasterImage::new(40, 30, data).unwrap();
        let cfg = FeatureConfig {
            n_bin_x: 4,
            n_bin_y: 8,
            cross: CrossMode::Thin,
            space: ColorSpace::Lab,
            resolution: Resolution::Low,
        };
        let (orig, flip) = features_with_flip(&img, &cfg).unwrap();
        let direct = crate::features::extract_features(&img, &cfg).unwrap().values;
        let resized_flip = resize(&img, cfg.resolution.dims()).unwrap().hflip();
        let direct_flip = crate::features::extract_features(&resized_flip, &cfg).unwrap().values;
        for (a, b) in orig.iter().zip(&direct).chain(flip.iter().zip(&direct_flip)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn full_grid_has_3888_points() {
        let g = SweepGrid::full();
        assert_eq!(g.len(), 3888);
        assert_eq!(g.configs().len(), 3888);
        g.validate().unwrap();
    }

    #[test]
    fn kfold_examples() {
        let folds = kfold_indices(10, 5, 9).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let sizes: Vec<usize> = kfold_indices(7, 5, 1).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, [2, 2, 1, 1, 1]);

        assert_eq!(kfold_indices(23, 5, 4).unwrap(), kfold_indices(23, 5, 4).unwrap());
        assert_ne!(kfold_indices(23, 5, 4).unwrap(), kfold_indices(23, 5, 5).unwrap());
        assert!(matches!(kfold_indices(4, 5, 0), Err(Error::TooFewSamples { .. })));
        assert!(kfold_indices(4, 1, 0).is_err());
    }

    fn labeled(n: usize) -> Vec<LabeledImage> {
        (0..n)
            .map(|i| LabeledImage {
                sample_id: format!("s{i}"),
                image: RasterImage::new(2, 1, vec![i as u8, 0, 0, 0, 0, 255]).unwrap(),
                brix: 15.0 + i as f64 * 0.01,
            })
            .collect()
    }

    #[test]
    fn augmentation_doubles_and_labels_follow() {
        assert_eq!(augment_hflip(&labeled(89)).len(), 178);
        assert!(augment_hflip(&[]).is_empty());
        let aug = augment_hflip(&labeled(3));
        assert_eq!(aug[4].sample_id, "s1:hflip");
        assert_eq!(aug[4].brix, aug[1].brix);
        assert_eq!(aug[4].image.hflip(), aug[1].image);
    }

    #[test]
    fn fold_plans_never_leak_into_validation() {
        let plans = fold_plans(23, 7).unwrap();
        assert_eq!(plans.len(), 5);
        for p in &plans {
            let originals = p.train.iter().filter(|r| !r.flipped).count();
            assert_eq!(p.train.len(), 2 * originals);
            assert_eq!(originals + p.val.len(), 23);
            for r in &p.train {
                assert!(!p.val.contains(&r.index));
            }
        }
    }

    #[test]
    fn sub_grid_cardinality() {
        let mut g = SweepGrid::full();
        g.lambda = vec![1.0, 9.0];
        g.variant = vec![Variant::Std];
        g.resolution = vec![Resolution::Low];
        assert_eq!(g.len(), 3 * 3 * 3 * 3 * 2);
        assert_eq!(g.configs().len(), g.len());
    }

    fn record(val_mae: f64, lambda: f64, feature_len: usize) -> SweepRecord {
        SweepRecord {
            config: SweepConfig {
                n_bin_x: 4,
                n_bin_y: 8,
                cross: CrossMode::None,
                space: ColorSpace::Hsv,
                resolution: Resolution::Low,
                variant: Variant::Std,
                lambda,
            },
            val_mae,
            train_mae: 0.0,
            test_mae: None,
            fold_maes: vec![val_mae; 5],
            feature_len,
        }
    }

    #[test]
    fn ranking_breaks_ties_toward_simpler_models() {
        let mut v = [
            record(1.0, 1.0, 96),
            record(1.0, 9.0, 96),
            record(1.0, 1.0, 48),
            record(0.5, 0.33, 384),
        ];
        v.sort_by(rank_cmp);
        assert_eq!(v[0].val_mae, 0.5);
        assert_eq!(v[1].feature_len, 48);
        assert_eq!(v[2].config.lambda, 9.0);
    }

    #[test]
    fn correlation_with_log_lambda() {
        let recs: Vec<SweepRecord> = TABLE_LAMBDAS.iter().map(|&l| record(l.ln(), l, 96)).collect();
        let c = hyperparam_correlation(&recs, 1.0).unwrap();
        let col = c.columns.iter().find(|c| c.column == "log_lambda").unwrap();
        assert!((col.r - 1.0).abs() < 1e-12);
        // feature_len constant across records
        let fl = c.columns.iter().find(|c| c.column == "feature_len").unwrap();
        assert!(fl.degenerate && fl.r == 0.0);
    }

    #[test]
    fn correlation_constant_error_is_degenerate() {
        let recs: Vec<SweepRecord> = TABLE_LAMBDAS.iter().map(|&l| record(2.0, l, 96)).collect();
        let c = hyperparam_correlation(&recs, 1.0).unwrap();
        assert!(c.columns.iter().all(|c| c.degenerate && c.r == 0.0));
    }

    #[test]
    fn correlation_feature_len_positive_when_error_grows_with_it() {
        let recs: Vec<SweepRecord> = (1..=20).map(|k| record(1.0 + 0.05 * k as f64, 9.0, 24 * k)).collect();
        let c = hyperparam_correlation(&recs, 0.5).unwrap();
        assert_eq!(c.n_records, 10);
        let fl = c.columns.iter().find(|c| c.column == "feature_len").unwrap();
        assert!(fl.r > 0.99);
    }

    #[test]
    fn correlation_needs_three_records() {
        let recs: Vec<SweepRecord> = (0..10).map(|k| record(k as f64, 1.0, 96)).collect();
        assert!(matches!(
            hyperparam_correlation(&recs, 0.1),
            Err(Error::TooFewRecords { got: 1, .. })
        ));
    }

    #[test]
    fn summary_and_jsonl_outputs() {
        let recs = vec![record(1.25, 9.0, 96), record(1.5, 3.0, 96)];
        let mut buf = Vec::new();
        write_sweep_jsonl(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: SweepRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, recs[0]);

        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rank,test_mae,val_mae,train_mae,lambda"));
        assert!(text.contains("1,,1.2500"));
        assert!(text.contains("low_res"));
    }
}
