//! Grape ripeness estimation from bunch images.
//!
//! Images are resized, converted to RGB/HSV/CIELab, summarized by per-cell
//! color means over a regular grid (optionally restricted to a central cross),
//! and regressed onto °Brix with standardized ridge regression. Model
//! selection runs 5-fold cross-validation with flip augmentation over a
//! hyperparameter grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colorspace;
pub mod data;
pub mod error;
pub mod features;
pub mod human;
pub mod metrics;
pub mod raster;
pub mod ridge;
pub mod selection;
pub mod synth;

pub use colorspace::{convert_image, convert_pixel, ColorSpace, FloatImage};
pub use data::{
    build_named_split, build_split, load_manifest, parse_manifest, split_stats, AtomicSplit, DatasetSplit, ImageFormat,
    SampleRecord, SplitName, SplitStats,
};
pub use error::{Error, ErrorKind, Result};
pub use features::{
    cross_limits, extract_features, grid_partition, resize, CrossLimits, CrossMode, FeatureConfig, FeatureVector,
    Resolution,
};
pub use human::{analyze_human_scores, parse_human_scores, HumanAnalysis, HumanScore};
pub use metrics::{
    bch_score, correlation_report, fisher_ci, harvest_metrics, mae, pearson, rmse, BchParams, CorrelationReport,
    HarvestReport,
};
pub use raster::RasterImage;
pub use ridge::{ridge_fit, ridge_predict, RidgeModel, RidgeProblem};
pub use selection::{
    evaluate_config, features_with_flip, grid_search, hyperparam_correlation, kfold_indices, PreparedSplit,
    SweepConfig, SweepGrid, SweepInput, SweepRecord, Variant,
};
pub use synth::{synth_generate, write_synth_dataset, SynthConfig, SynthDataset};
