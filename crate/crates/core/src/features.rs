//! Grid color features: resize, color conversion, grid partition, cross-shaped
//! cell selection and per-cell channel means.
//!
//! The feature vector lists kept cells row-major (y outer, x inner) with the
//! three channels innermost.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::{convert_image, ColorSpace, FloatImage};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Which grid cells survive background removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossMode {
    /// Keep every cell.
    None,
    /// Drop the corner cells.
    Fat,
    /// Drop the corners and most of the lower half.
    Thin,
}

impl CrossMode {
    pub const ALL: [CrossMode; 3] = [CrossMode::None, CrossMode::Thin, CrossMode::Fat];

    pub fn as_str(self) -> &'static str {
        match self {
            CrossMode::None => "none",
            CrossMode::Fat => "fat",
            CrossMode::Thin => "thin",
        }
    }
}

impl FromStr for CrossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(CrossMode::None),
            "fat" => Ok(CrossMode::Fat),
            "thin" => Ok(CrossMode::Thin),
            other => Err(Error::InvalidConfig(format!("unknown cross mode `{other}`"))),
        }
    }
}

impl fmt::Display for CrossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Working resolution images are stretched to before feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Low,
    Med,
    High,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::Low, Resolution::Med, Resolution::High];

    /// (width, height) in pixels.
    pub fn dims(self) -> (usize, usize) {
        match self {
            Resolution::Low => (320, 240),
            Resolution::Med => (640, 480),
            Resolution::High => (1280, 720),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Low => "low",
            Resolution::Med => "med",
            Resolution::High => "high",
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" | "low_res" => Ok(Resolution::Low),
            "med" | "med_res" => Ok(Resolution::Med),
            "high" | "high_res" => Ok(Resolution::High),
            other => Err(Error::InvalidConfig(format!("unknown resolution `{other}`"))),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub n_bin_x: usize,
    pub n_bin_y: usize,
    pub cross: CrossMode,
    pub space: ColorSpace,
    pub resolution: Resolution,
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        cross_limits(self.n_bin_x, self.n_bin_y, self.cross).map(|_| ())
    }

    /// Length of the feature vector; depends on the grid only.
    pub fn feature_len(&self) -> Result<usize> {
        Ok(3 * cross_limits(self.n_bin_x, self.n_bin_y, self.cross)?.cell_count())
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nx={} ny={} cross={} space={} res={}",
            self.n_bin_x, self.n_bin_y, self.cross, self.space, self.resolution
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub config: FeatureConfig,
}

/// Inclusive bin-index bounds of the kept cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossLimits {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl CrossLimits {
    pub fn as_array(&self) -> [usize; 4] {
        [self.x0, self.x1, self.y0, self.y1]
    }

    pub fn cell_count(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.x0..=self.x1).contains(&i) && (self.y0..=self.y1).contains(&j)
    }
}

pub fn cross_limits(n_bin_x: usize, n_bin_y: usize, mode: CrossMode) -> Result<CrossLimits> {
    let invalid = |reason| Error::InvalidGrid {
        n_bin_x,
        n_bin_y,
        mode: mode.as_str(),
        reason,
    };
    if n_bin_x == 0 || n_bin_y == 0 {
        return Err(invalid("grid dimensions must be positive"));
    }
    let limits = match mode {
        CrossMode::None => CrossLimits {
            x0: 0,
            x1: n_bin_x - 1,
            y0: 0,
            y1: n_bin_y - 1,
        },
        CrossMode::Fat | CrossMode::Thin => {
            if n_bin_x < 4 || n_bin_y < 4 {
                return Err(invalid("fat and thin patterns need at least 4 bins per axis"));
            }
            let y1 = match mode {
                CrossMode::Fat => 3 * n_bin_y / 4,
                _ => n_bin_y / 2,
            };
            CrossLimits {
                x0: n_bin_x / 4,
                x1: 3 * n_bin_x / 4,
                y0: n_bin_y / 4,
                y1,
            }
        }
    };
    if limits.x0 > limits.x1 || limits.y0 > limits.y1 {
        return Err(invalid("empty bin range"));
    }
    Ok(limits)
}

/// Half-open pixel rectangle of one grid cell, tagged with its bin indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub bin_x: usize,
    pub bin_y: usize,
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Balanced floor partition of `len` pixels into `n` bins.
#[inline]
fn bin_edge(k: usize, len: usize, n: usize) -> usize {
    k * len / n
}

/// Row-major cells (y outer, x inner) tiling a `width`×`height` image.
pub fn grid_partition(width: usize, height: usize, n_bin_x: usize, n_bin_y: usize) -> Result<Vec<CellRect>> {
    if n_bin_x == 0 || n_bin_y == 0 || width < n_bin_x || height < n_bin_y {
        return Err(Error::ImageTooSmall {
            width,
            height,
            n_bin_x,
            n_bin_y,
        });
    }
    let mut cells = Vec::with_capacity(n_bin_x * n_bin_y);
    for j in 0..n_bin_y {
        for i in 0..n_bin_x {
            cells.push(CellRect {
                bin_x: i,
                bin_y: j,
                x0: bin_edge(i, width, n_bin_x),
                x1: bin_edge(i + 1, width, n_bin_x),
                y0: bin_edge(j, height, n_bin_y),
                y1: bin_edge(j + 1, height, n_bin_y),
            });
        }
    }
    Ok(cells)
}

/// Per-channel arithmetic mean of every cell.
pub fn cell_means(image: &FloatImage, cells: &[CellRect]) -> Vec<[f64; 3]> {
    cells
        .iter()
        .map(|c| {
            let mut acc = [0.0f64; 3];
            for y in c.y0..c.y1 {
                let row = &image.data[(y * image.width + c.x0) * 3..(y * image.width + c.x1) * 3];
                for px in row.chunks_exact(3) {
                    acc[0] += px[0];
                    acc[1] += px[1];
                    acc[2] += px[2];
                }
            }
            let n = c.area() as f64;
            acc.map(|s| s / n)
        })
        .collect()
}

/// Per-axis resampling taps: (source index, weight) lists for every output index.
fn axis_taps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if dst >= src {
        // nearest neighbour
        return (0..dst)
            .map(|i| {
                let s = ((2 * i + 1) * src / (2 * dst)).min(src - 1);
                vec![(s, 1.0)]
            })
            .collect();
    }
    // Box filter. Work in units of 1/dst source pixels so every overlap is an integer.
    (0..dst)
        .map(|i| {
            let lo = i * src;
            let hi = (i + 1) * src;
            let first = lo / dst;
            let last = (hi - 1) / dst;
            (first..=last)
                .map(|k| {
                    let overlap = hi.min((k + 1) * dst) - lo.max(k * dst);
                    (k, overlap as f64 / src as f64)
                })
                .collect()
        })
        .collect()
}

/// Area-average downscale (nearest-neighbour upscale), per axis, rounding half up.
pub fn resize(image: &RasterImage, target: (usize, usize)) -> Result<RasterImage> {
    let (tw, th) = target;
    if tw == 0 || th == 0 {
        return Err(Error::InvalidInput(format!(
            "resize target {tw}x{th} must be at least 1x1"
        )));
    }
    let (sw, sh) = (image.width(), image.height());
    if (sw, sh) == (tw, th) {
        return Ok(image.clone());
    }
    let xt = axis_taps(sw, tw);
    let yt = axis_taps(sh, th);
    let src = image.data();

    let mut horiz = vec![0.0f64; sh * tw * 3];
    for y in 0..sh {
        let row = &src[y * sw * 3..(y + 1) * sw * 3];
        let out = &mut horiz[y * tw * 3..(y + 1) * tw * 3];
        for (x, taps) in xt.iter().enumerate() {
            let mut acc = [0.0f64; 3];
            for &(k, w) in taps {
                acc[0] += w * row[k * 3] as f64;
                acc[1] += w * row[k * 3 + 1] as f64;
                acc[2] += w * row[k * 3 + 2] as f64;
            }
            out[x * 3..x * 3 + 3].copy_from_slice(&acc);
        }
    }

    let mut data = vec![0u8; tw * th * 3];
    for (y, taps) in yt.iter().enumerate() {
        let out = &mut data[y * tw * 3..(y + 1) * tw * 3];
        for (c, o) in out.iter_mut().enumerate() {
            let v: f64 = taps.iter().map(|&(k, w)| w * horiz[k * tw * 3 + c]).sum();
            *o = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
    }
    RasterImage::new(tw, th, data)
}

pub fn extract_features(image: &RasterImage, config: &FeatureConfig) -> Result<FeatureVector> {
    let limits = cross_limits(config.n_bin_x, config.n_bin_y, config.cross)?;
    let resized = resize(image, config.resolution.dims())?;
    let converted = convert_image(&resized, config.space);
    let kept: Vec<CellRect> = grid_partition(converted.width, converted.height, config.n_bin_x, config.n_bin_y)?
        .into_iter()
        .filter(|c| limits.contains(c.bin_x, c.bin_y))
        .collect();
    let values = cell_means(&converted, &kept).into_iter().flatten().collect();
    Ok(FeatureVector {
        values,
        config: *config,
    })
}

/// Summed-area table of a float image; answers any cell mean in O(1).
///
/// Used when many grids are evaluated on the same converted image.
#[derive(Debug, Clone)]
pub struct CellIntegral {
    width: usize,
    height: usize,
    // (width + 1) × (height + 1) × 3, zero first row and column
    sums: Vec<f64>,
}

impl CellIntegral {
    pub fn new(image: &FloatImage) -> Self {
        let (w, h) = (image.width, image.height);
        let stride = (w + 1) * 3;
        let mut sums = vec![0.0f64; stride * (h + 1)];
        for y in 0..h {
            let mut row_acc = [0.0f64; 3];
            for x in 0..w {
                let px = image.pixel(x, y);
                for c in 0..3 {
                    row_acc[c] += px[c];
                    sums[(y + 1) * stride + (x + 1) * 3 + c] = sums[y * stride + (x + 1) * 3 + c] + row_acc[c];
                }
            }
        }
        Self {
            width: w,
            height: h,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.sums[y * (self.width + 1) * 3 + x * 3 + c]
    }

    pub fn mean(&self, cell: &CellRect) -> [f64; 3] {
        let n = cell.area() as f64;
        std::array::from_fn(|c| {
            (self.at(cell.x1, cell.y1, c) - self.at(cell.x0, cell.y1, c) - self.at(cell.x1, cell.y0, c)
                + self.at(cell.x0, cell.y0, c))
                / n
        })
    }

    /// Feature vector for a grid on this (already resized and converted) image.
    pub fn features(&self, n_bin_x: usize, n_bin_y: usize, cross: CrossMode) -> Result<Vec<f64>> {
        let limits = cross_limits(n_bin_x, n_bin_y, cross)?;
        let cells = grid_partition(self.width, self.height, n_bin_x, n_bin_y)?;
        Ok(cells
            .iter()
            .filter(|c| limits.contains(c.bin_x, c.bin_y))
            .flat_map(|c| self.mean(c))
            .collect())
    }
}

/// Write one CSV row per sample: `sample_id` then the feature values.
pub fn write_feature_csv<W: Write>(out: W, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let len = rows.first().map_or(0, |(_, v)| v.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sample_id".to_string()];
    header.extend((0..len).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (id, values) in rows {
        let mut rec = Vec::with_capacity(values.len() + 1);
        rec.push(id.clone());
        rec.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<feature csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(n_bin_x: usize, n_bin_y: usize, cross: CrossMode, space: ColorSpace) -> FeatureConfig {
        FeatureConfig {
            n_bin_x,
            n_bin_y,
            cross,
            space,
            resolution: Resolution::Low,
        }
    }

    #[test]
    fn cross_limits_reference_cases() {
        let l = |nx, ny, m| cross_limits(nx, ny, m).unwrap().as_array();
        assert_eq!(l(5, 5, CrossMode::Fat), [1, 3, 1, 3]);
        assert_eq!(l(5, 5, CrossMode::Thin), [1, 3, 1, 2]);
        assert_eq!(l(16, 8, CrossMode::Fat), [4, 12, 2, 6]);
        assert_eq!(l(16, 8, CrossMode::Thin), [4, 12, 2, 4]);
        assert_eq!(l(7, 3, CrossMode::None), [0, 6, 0, 2]);
    }

    #[test]
    fn cross_limits_rejects_small_grids() {
        assert!(matches!(
            cross_limits(3, 8, CrossMode::Fat),
            Err(Error::InvalidGrid { .. })
        ));
        assert!(matches!(
            cross_limits(8, 2, CrossMode::Thin),
            Err(Error::InvalidGrid { .. })
        ));
        assert!(cross_limits(0, 4, CrossMode::None).is_err());
        assert!(cross_limits(1, 1, CrossMode::None).is_ok());
    }

    #[test]
    fn partition_examples() {
        let cells = grid_partition(10, 10, 2, 2).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.x1 - c.x0 == 5 && c.y1 - c.y0 == 5));

        let cells = grid_partition(5, 5, 2, 2).unwrap();
        let widths: Vec<_> = cells.iter().map(|c| c.x1 - c.x0).collect();
        assert_eq!(widths, [2, 3, 2, 3]);
        assert_eq!(cells.iter().map(CellRect::area).sum::<usize>(), 25);

        assert!(matches!(grid_partition(3, 8, 4, 2), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn cell_means_examples() {
        let img = FloatImage {
            width: 6,
            height: 4,
            data: [0.2, 0.4, 0.6].repeat(24),
        };
        let cells = grid_partition(6, 4, 3, 2).unwrap();
        for m in cell_means(&img, &cells) {
            assert!(m.iter().zip([0.2, 0.4, 0.6]).all(|(a, b)| (a - b).abs() < 1e-15));
        }

        let two = FloatImage {
            width: 2,
            height: 1,
            data: vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        };
        assert_eq!(cell_means(&two, &grid_partition(2, 1, 1, 1).unwrap()), vec![[0.5; 3]]);

        let checker = FloatImage {
            width: 4,
            height: 4,
            data: (0..16).flat_map(|i| [((i % 4 + i / 4) % 2) as f64; 3]).collect(),
        };
        assert_eq!(
            cell_means(&checker, &grid_partition(4, 4, 1, 1).unwrap()),
            vec![[0.5; 3]]
        );
    }

    #[test]
    fn resize_examples() {
        let c = RasterImage::filled(4, 4, [10, 20, 30]).unwrap();
        assert_eq!(
            resize(&c, (2, 2)).unwrap(),
            RasterImage::filled(2, 2, [10, 20, 30]).unwrap()
        );

        let two = RasterImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        assert_eq!(resize(&two, (1, 1)).unwrap().data(), &[128, 128, 128]);

        let img = RasterImage::new(3, 2, (0..18).map(|v| v * 13).collect()).unwrap();
        assert_eq!(resize(&img, (3, 2)).unwrap(), img);
        assert!(resize(&img, (0, 2)).is_err());
    }

    #[test]
    fn resize_fractional_box_and_upscale() {
        // 3 -> 2: output pixels average [0, 1.5) and [1.5, 3)
        let img = RasterImage::new(3, 1, vec![0, 0, 0, 90, 90, 90, 180, 180, 180]).unwrap();
        let out = resize(&img, (2, 1)).unwrap();
        assert_eq!(out.pixel(0, 0), [30; 3]);
        assert_eq!(out.pixel(1, 0), [150; 3]);

        let small = RasterImage::new(2, 1, vec![1, 1, 1, 2, 2, 2]).unwrap();
        let up = resize(&small, (4, 2)).unwrap();
        assert_eq!(
            up.data().chunks(3).map(|p| p[0]).collect::<Vec<_>>(),
            [1, 1, 2, 2, 1, 1, 2, 2]
        );
    }

    #[test]
    fn feature_lengths() {
        let gray = RasterImage::filled(50, 40, [100, 100, 100]).unwrap();
        let fv = extract_features(&gray, &config(4, 8, CrossMode::None, ColorSpace::Rgb)).unwrap();
        assert_eq!(fv.values.len(), 96);
        let expect = 100.0 / 255.0;
        assert!(fv.values.iter().all(|v| (v - expect).abs() < 1e-12));

        let fv = extract_features(&gray, &config(16, 8, CrossMode::None, ColorSpace::Hsv)).unwrap();
        assert_eq!(fv.values.len(), 384);
        let fv = extract_features(&gray, &config(16, 8, CrossMode::Fat, ColorSpace::Lab)).unwrap();
        assert_eq!(fv.values.len(), 135);
        assert_eq!(
            config(16, 8, CrossMode::Fat, ColorSpace::Lab).feature_len().unwrap(),
            135
        );
    }

    #[test]
    fn kept_cells_shrink_for_fat_and_thin() {
        for nx in 4..20 {
            for ny in 4..20 {
                assert_eq!(cross_limits(nx, ny, CrossMode::None).unwrap().cell_count(), nx * ny);
                for mode in [CrossMode::Fat, CrossMode::Thin] {
                    assert!(cross_limits(nx, ny, mode).unwrap().cell_count() < nx * ny);
                }
            }
        }
    }

    #[test]
    fn integral_matches_direct_means() {
        let data: Vec<u8> = (0..(37 * 23 * 3)).map(|i| ((i * 7919) % 251) as u8).collect();
        let img = RasterImage::new(37, 23, data).unwrap();
        let conv = convert_image(&img, ColorSpace::Lab);
        let table = CellIntegral::new(&conv);
        let cells = grid_partition(37, 23, 5, 4).unwrap();
        for (cell, direct) in cells.iter().zip(cell_means(&conv, &cells)) {
            let fast = table.mean(cell);
            for c in 0..3 {
                assert!((fast[c] - direct[c]).abs() < 1e-12);
            }
        }
    }

    fn block_image() -> impl Strategy<Value = RasterImage> {
        // 320x240 with 8x6 random color blocks, so no resampling happens at low res.
        proptest::collection::vec(any::<[u8; 3]>(), 48).prop_map(|blocks| {
            let mut data = Vec::with_capacity(320 * 240 * 3);
            for y in 0..240 {
                for x in 0..320 {
                    data.extend_from_slice(&blocks[(y / 40) * 8 + x / 40]);
                }
            }
            RasterImage::new(320, 240, data).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn hflip_mirrors_x_bins(img in block_image(), space in prop::sample::select(ColorSpace::ALL.to_vec())) {
            let cfg = config(8, 8, CrossMode::None, space);
            let a = extract_features(&img, &cfg).unwrap().values;
            let b = extract_features(&img.hflip(), &cfg).unwrap().values;
            for j in 0..8 {
                for i in 0..8 {
                    for c in 0..3 {
                        let lhs = a[(j * 8 + i) * 3 + c];
                        let rhs = b[(j * 8 + (7 - i)) * 3 + c];
                        prop_assert!((lhs - rhs).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn feature_len_depends_on_config_only(
            w in 16usize..64, h in 16usize..64,
            nx in prop::sample::select(vec![4usize, 8, 16]),
            ny in prop::sample::select(vec![8usize, 16, 32]),
            cross in prop::sample::select(CrossMode::ALL.to_vec()),
            seed in any::<u8>(),
        ) {
            let img = RasterImage::filled(w, h, [seed, seed / 2, 255 - seed]).unwrap();
            let cfg = config(nx, ny, cross, ColorSpace::Rgb);
            prop_assert_eq!(extract_features(&img, &cfg).unwrap().values.len(), cfg.feature_len().unwrap());
        }

        #[test]
        fn partition_tiles_exactly(w in 1usize..200, h in 1usize..200, nx in 1usize..20, ny in 1usize..20) {
            prop_assume!(w >= nx && h >= ny);
            let cells = grid_partition(w, h, nx, ny).unwrap();
            prop_assert_eq!(cells.iter().map(CellRect::area).sum::<usize>(), w * h);
            prop_assert!(cells.iter().all(|c| c.area() > 0));
        }
    }
}
