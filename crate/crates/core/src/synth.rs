//! Synthetic planted-linear datasets.
//!
//! Every image is piecewise constant over an `n_bin_x`×`n_bin_y` grid, so the
//! RGB cell means of the matching feature grid are exactly the drawn cell
//! colors / 255, and the label is an exact linear function of them (plus
//! optional Gaussian noise).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{manifest_to_string, AtomicSplit, ImageFormat, SampleRecord, BRIX_MAX, BRIX_MIN};
use crate::error::{Error, Result};
use crate::features::grid_partition;
use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub n_bin_x: usize,
    pub n_bin_y: usize,
    pub samples: usize,
    /// Label noise standard deviation in °Brix.
    pub noise_sigma: f64,
    /// Planted weights over the flattened cell means (y outer, x inner,
    /// channel innermost). Drawn from the seed when absent.
    pub weights: Option<Vec<f64>>,
    /// Intercept; when weights are drawn it defaults to centering labels on 17.
    pub bias: Option<f64>,
    /// Target label spread for drawn weights.
    pub label_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            n_bin_x: 4,
            n_bin_y: 8,
            samples: 50,
            noise_sigma: 0.0,
            weights: None,
            bias: None,
            label_std: 1.5,
        }
    }
}

impl SynthConfig {
    pub fn n_weights(&self) -> usize {
        3 * self.n_bin_x * self.n_bin_y
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_bin_x == 0 || self.n_bin_y == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.width < self.n_bin_x || self.height < self.n_bin_y {
            return bad(format!(
                "image {}x{} smaller than grid {}x{}",
                self.width, self.height, self.n_bin_x, self.n_bin_y
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n_weights() {
                return bad(format!(
                    "expected {} planted weights, got {}",
                    self.n_weights(),
                    w.len()
                ));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return bad("planted weights must be finite".into());
            }
        }
        if self.samples == 0 {
            return bad("sample count must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub images: Vec<RasterImage>,
    pub labels: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Random planted weights, averaged with their x-mirror so labels do not
/// change under horizontal flips.
fn draw_weights(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (nx, ny) = (config.n_bin_x, config.n_bin_y);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let raw: Vec<f64> = (0..config.n_weights()).map(|_| normal.sample(rng)).collect();
    let mut w = vec![0.0; raw.len()];
    for j in 0..ny {
        for i in 0..nx {
            for c in 0..3 {
                let a = raw[(j * nx + i) * 3 + c];
                let b = raw[(j * nx + (nx - 1 - i)) * 3 + c];
                w[(j * nx + i) * 3 + c] = 0.5 * (a + b);
            }
        }
    }
    // Cell means are uniform on [0, 1] (variance 1/12) and independent across cells.
    let var: f64 = w.iter().map(|v| v * v / 12.0).sum();
    let scale = if var > 0.0 { config.label_std / var.sqrt() } else { 0.0 };
    w.iter_mut().for_each(|v| *v *= scale);
    w
}

pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<SynthDataset> {
    config.validate()?;
    let mut color_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);

    let weights = match &config.weights {
        Some(w) => w.clone(),
        None => draw_weights(config, &mut color_rng),
    };
    let bias = config.bias.unwrap_or_else(|| 17.0 - 0.5 * weights.iter().sum::<f64>());
    let noise = (config.noise_sigma > 0.0).then(|| Normal::new(0.0, config.noise_sigma).expect("sigma validated"));

    let cells = grid_partition(config.width, config.height, config.n_bin_x, config.n_bin_y)?;
    let mut images = Vec::with_capacity(config.samples);
    let mut labels = Vec::with_capacity(config.samples);
    for _ in 0..config.samples {
        let colors: Vec<[u8; 3]> = (0..cells.len()).map(|_| color_rng.random()).collect();
        let mut data = vec![0u8; config.width * config.height * 3];
        for (cell, color) in cells.iter().zip(&colors) {
            for y in cell.y0..cell.y1 {
                for x in cell.x0..cell.x1 {
                    let i = (y * config.width + x) * 3;
                    data[i..i + 3].copy_from_slice(color);
                }
            }
        }
        let mut label = bias;
        for (k, w) in weights.iter().enumerate() {
            label += w * colors[k / 3][k % 3] as f64 / 255.0;
        }
        if let Some(n) = &noise {
            label += n.sample(&mut noise_rng);
        }
        labels.push(label.clamp(BRIX_MIN, BRIX_MAX));
        images.push(RasterImage::new(config.width, config.height, data)?);
    }
    Ok(SynthDataset {
        images,
        labels,
        weights,
        bias,
    })
}

/// Write `imgs/*.png` plus `manifest.csv` under `dir`. Each sample gets a
/// `jpg` row and, with `wb_variant`, a `raw_wb` row pointing at the same
/// pixels, so both sweep variants are populated.
pub fn write_synth_dataset(
    dir: &Path,
    config: &SynthConfig,
    seed: u64,
    atomic_split: AtomicSplit,
    wb_variant: bool,
) -> Result<Vec<SampleRecord>> {
    let ds = synth_generate(config, seed)?;
    let img_dir = dir.join("imgs");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut records = Vec::new();
    for (k, (img, label)) in ds.images.iter().zip(&ds.labels).enumerate() {
        let rel = format!("imgs/syn{k:04}.png");
        img.save_png(&dir.join(&rel))?;
        let base = SampleRecord {
            sample_id: format!("syn{k:04}"),
            image_path: rel,
            atomic_split,
            year: if matches!(
                atomic_split,
                AtomicSplit::A | AtomicSplit::B | AtomicSplit::C | AtomicSplit::D
            ) {
                2021
            } else {
                2022
            },
            device: "motog8".into(),
            image_format: ImageFormat::Jpg,
            brix_top: None,
            brix_mid: None,
            brix_bot: None,
            brix_mean: *label,
            color_class: None,
            gray_card: false,
        };
        if wb_variant {
            let mut wb = base.clone();
            wb.sample_id.push_str("-wb");
            wb.image_format = ImageFormat::RawWb;
            records.push(base);
            records.push(wb);
        } else {
            records.push(base);
        }
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, manifest_to_string(&records)).map_err(|e| Error::io(&manifest, e))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::ColorSpace;
    use crate::features::{extract_features, CrossMode, FeatureConfig, Resolution};
    use crate::ridge::{ridge_fit, ridge_predict};

    #[test]
    fn zero_weights_give_constant_labels() {
        let cfg = SynthConfig {
            weights: Some(vec![0.0; 96]),
            bias: Some(16.0),
            samples: 10,
            ..Default::default()
        };
        let ds = synth_generate(&cfg, 3).unwrap();
        assert!(ds.labels.iter().all(|l| *l == 16.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            noise_sigma: 0.5,
            ..Default::default()
        };
        let a = synth_generate(&cfg, 42).unwrap();
        let b = synth_generate(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&cfg, 43).unwrap();
        assert_ne!(a.images, c.images);
    }

    #[test]
    fn noise_does_not_change_images() {
        let quiet = synth_generate(&SynthConfig::default(), 7).unwrap();
        let noisy = synth_generate(
            &SynthConfig {
                noise_sigma: 1.0,
                ..Default::default()
            },
            7,
        )
        .unwrap();
        assert_eq!(quiet.images, noisy.images);
        assert_ne!(quiet.labels, noisy.labels);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SynthConfig {
                noise_sigma: -1.0,
                ..Default::default()
            },
            SynthConfig {
                width: 2,
                ..Default::default()
            },
            SynthConfig {
                weights: Some(vec![1.0; 5]),
                ..Default::default()
            },
            SynthConfig {
                samples: 0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(synth_generate(&cfg, 0), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn planted_relation_is_exact_in_extracted_features() {
        let cfg = SynthConfig {
            samples: 120,
            ..Default::default()
        };
        let ds = synth_generate(&cfg, 11).unwrap();
        let fc = FeatureConfig {
            n_bin_x: 4,
            n_bin_y: 8,
            cross: CrossMode::None,
            space: ColorSpace::Rgb,
            resolution: Resolution::Low,
        };
        let x: Vec<Vec<f64>> = ds
            .images
            .iter()
            .map(|img| extract_features(img, &fc).unwrap().values)
            .collect();
        for (row, label) in x.iter().zip(&ds.labels) {
            let direct: f64 = ds.bias + row.iter().zip(&ds.weights).map(|(f, w)| f * w).sum::<f64>();
            assert!((direct - label).abs() < 1e-9);
        }
        let model = ridge_fit(&x, &ds.labels, 0.0).unwrap();
        let pred = ridge_predict(&model, &x).unwrap();
        let mae = crate::metrics::mae(&pred, &ds.labels).unwrap();
        assert!(mae < 1e-6, "mae {mae}");
    }

    #[test]
    fn drawn_weights_are_mirror_symmetric() {
        let ds = synth_generate(&SynthConfig::default(), 5).unwrap();
        let (nx, ny) = (4, 8);
        for j in 0..ny {
            for i in 0..nx {
                for c in 0..3 {
                    assert_eq!(
                        ds.weights[(j * nx + i) * 3 + c],
                        ds.weights[(j * nx + nx - 1 - i) * 3 + c]
                    );
                }
            }
        }
    }

    #[test]
    fn writes_manifest_and_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            samples: 3,
            ..Default::default()
        };
        let recs = write_synth_dataset(dir.path(), &cfg, 1, AtomicSplit::C, true).unwrap();
        assert_eq!(recs.len(), 6);
        let loaded = crate::data::load_manifest(&dir.path().join("manifest.csv")).unwrap();
        assert_eq!(loaded, recs);
        let img = RasterImage::load(&dir.path().join(&recs[0].image_path)).unwrap();
        assert_eq!(img, synth_generate(&cfg, 1).unwrap().images[0]);
    }
}
