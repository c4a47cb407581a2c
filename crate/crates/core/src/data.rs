//! Labeled samples, the manifest CSV, and the experimental split compositions.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Refractometer measuring range in °Brix.
pub const BRIX_MIN: f64 = 9.0;
pub const BRIX_MAX: f64 = 26.0;

pub const MANIFEST_HEADER: [&str; 12] = [
    "sample_id",
    "image_path",
    "atomic_split",
    "year",
    "device",
    "image_format",
    "brix_top",
    "brix_mid",
    "brix_bot",
    "brix_mean",
    "color_class",
    "gray_card",
];

/// Minimal homogeneous acquisition group (season, device, processing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomicSplit {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl AtomicSplit {
    pub const ALL: [AtomicSplit; 9] = [
        AtomicSplit::A,
        AtomicSplit::B,
        AtomicSplit::C,
        AtomicSplit::D,
        AtomicSplit::E,
        AtomicSplit::F,
        AtomicSplit::G,
        AtomicSplit::H,
        AtomicSplit::I,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AtomicSplit::A => "A",
            AtomicSplit::B => "B",
            AtomicSplit::C => "C",
            AtomicSplit::D => "D",
            AtomicSplit::E => "E",
            AtomicSplit::F => "F",
            AtomicSplit::G => "G",
            AtomicSplit::H => "H",
            AtomicSplit::I => "I",
        }
    }
}

impl FromStr for AtomicSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AtomicSplit::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAtomicSplit(s.to_string()))
    }
}

impl fmt::Display for AtomicSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Jpg,
    RawWb,
}

impl ImageFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ImageFormat::Jpg => "jpg",
            ImageFormat::RawWb => "raw_wb",
        }
    }
}

impl FromStr for ImageFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jpg" => Ok(ImageFormat::Jpg),
            "raw_wb" => Ok(ImageFormat::RawWb),
            other => Err(format!("unknown image_format `{other}`")),
        }
    }
}

/// One labeled bunch image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub image_path: String,
    pub atomic_split: AtomicSplit,
    pub year: u16,
    pub device: String,
    pub image_format: ImageFormat,
    pub brix_top: Option<f64>,
    pub brix_mid: Option<f64>,
    pub brix_bot: Option<f64>,
    pub brix_mean: f64,
    pub color_class: Option<u8>,
    pub gray_card: bool,
}

impl SampleRecord {
    /// Check the labeling invariants. `line` is only used for error reporting.
    pub fn validate(&self, line: usize) -> Result<()> {
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        for v in [Some(self.brix_mean), self.brix_top, self.brix_mid, self.brix_bot]
            .into_iter()
            .flatten()
        {
            if !v.is_finite() {
                return Err(malformed(format!("non-finite °Brix value {v}")));
            }
            if !(BRIX_MIN..=BRIX_MAX).contains(&v) {
                return Err(Error::BrixOutOfRange { line, value: v });
            }
        }
        if let (Some(t), Some(m), Some(b)) = (self.brix_top, self.brix_mid, self.brix_bot) {
            let mean = (t + m + b) / 3.0;
            if (mean - self.brix_mean).abs() > 1e-9 {
                return Err(malformed(format!(
                    "brix_mean {} differs from the mean of the three readings {mean}",
                    self.brix_mean
                )));
            }
        }
        if let Some(c) = self.color_class {
            if !(1..=6).contains(&c) {
                return Err(malformed(format!("color_class {c} outside 1..6")));
            }
        }
        if self.sample_id.is_empty() {
            return Err(malformed("empty sample_id".into()));
        }
        Ok(())
    }

    pub fn is_phone(&self) -> bool {
        !matches!(self.device.as_str(), "reflex" | "d435i")
    }

    pub fn is_depth_camera(&self) -> bool {
        self.device == "d435i"
    }

    pub fn is_reflex(&self) -> bool {
        self.device == "reflex"
    }
}

fn parse_opt<T: FromStr>(cell: &str, field: &str, line: usize) -> Result<Option<T>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| Error::MalformedRow {
        line,
        reason: format!("cannot parse {field} from `{cell}`"),
    })
}

fn parse_req<T: FromStr>(cell: &str, field: &str, line: usize) -> Result<T> {
    parse_opt(cell, field, line)?.ok_or_else(|| Error::MalformedRow {
        line,
        reason: format!("missing required field {field}"),
    })
}

/// Parse manifest CSV text. Line numbers in errors are 1-based and count the header.
pub fn parse_manifest(text: &str) -> Result<Vec<SampleRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();

    let header = match rows.next() {
        Some(h) => h?,
        None => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    if header.iter().map(str::trim).ne(MANIFEST_HEADER.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        });
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in rows {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        if row.len() != MANIFEST_HEADER.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", MANIFEST_HEADER.len(), row.len()),
            });
        }
        let atomic_split: AtomicSplit = row[2].trim().parse()?;
        let image_format = row[5]
            .trim()
            .parse::<ImageFormat>()
            .map_err(|reason| Error::MalformedRow { line, reason })?;
        let gray_card = match row[11].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("gray_card must be true/false, got `{other}`"),
                })
            }
        };
        let record = SampleRecord {
            sample_id: row[0].trim().to_string(),
            image_path: row[1].trim().to_string(),
            atomic_split,
            year: parse_req(&row[3], "year", line)?,
            device: row[4].trim().to_string(),
            image_format,
            brix_top: parse_opt(&row[6], "brix_top", line)?,
            brix_mid: parse_opt(&row[7], "brix_mid", line)?,
            brix_bot: parse_opt(&row[8], "brix_bot", line)?,
            brix_mean: parse_req(&row[9], "brix_mean", line)?,
            color_class: parse_opt(&row[10], "color_class", line)?,
            gray_card,
        };
        record.validate(line)?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate sample_id `{}`", record.sample_id),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Serialize records back to the manifest CSV layout.
pub fn manifest_to_string(records: &[SampleRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.sample_id.clone(),
            r.image_path.clone(),
            r.atomic_split.to_string(),
            r.year.to_string(),
            r.device.clone(),
            r.image_format.as_str().to_string(),
            fmt_opt(r.brix_top),
            fmt_opt(r.brix_mid),
            fmt_opt(r.brix_bot),
            r.brix_mean.to_string(),
            fmt_opt(r.color_class),
            r.gray_card.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// The seven experimental split compositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitName {
    #[serde(rename = "Sm_j")]
    SmJ,
    #[serde(rename = "Sm_w")]
    SmW,
    #[serde(rename = "Ss_j")]
    SsJ,
    #[serde(rename = "Ss_w")]
    SsW,
    #[serde(rename = "Ss_a")]
    SsA,
    #[serde(rename = "Ms_j")]
    MsJ,
    #[serde(rename = "Ms_w")]
    MsW,
}

/// Which devices a split admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeviceRule {
    PhoneOnly,
    PhoneAndReflex,
    Any,
}

struct Composition {
    train: &'static [AtomicSplit],
    test: &'static [AtomicSplit],
    format: ImageFormat,
    devices: DeviceRule,
}

use AtomicSplit as At;

impl SplitName {
    pub const ALL: [SplitName; 7] = [
        SplitName::SmJ,
        SplitName::SmW,
        SplitName::SsJ,
        SplitName::SsW,
        SplitName::SsA,
        SplitName::MsJ,
        SplitName::MsW,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::SmJ => "Sm_j",
            SplitName::SmW => "Sm_w",
            SplitName::SsJ => "Ss_j",
            SplitName::SsW => "Ss_w",
            SplitName::SsA => "Ss_a",
            SplitName::MsJ => "Ms_j",
            SplitName::MsW => "Ms_w",
        }
    }

    /// Simple splits have no predefined train/test division.
    pub fn is_simple(self) -> bool {
        matches!(self, SplitName::SmJ | SplitName::SmW)
    }

    /// The (standard JPG, white-balanced) pair a split belongs to.
    pub fn variants(self) -> (SplitName, SplitName) {
        match self {
            SplitName::SmJ | SplitName::SmW => (SplitName::SmJ, SplitName::SmW),
            SplitName::SsJ | SplitName::SsW => (SplitName::SsJ, SplitName::SsW),
            SplitName::SsA => (SplitName::SsJ, SplitName::SsA),
            SplitName::MsJ | SplitName::MsW => (SplitName::MsJ, SplitName::MsW),
        }
    }

    fn composition(self) -> Composition {
        const CD: &[At] = &[At::C, At::D];
        const ACD: &[At] = &[At::A, At::C, At::D];
        const BCD: &[At] = &[At::B, At::C, At::D];
        const FHI: &[At] = &[At::F, At::H, At::I];
        const ACDHI: &[At] = &[At::A, At::C, At::D, At::H, At::I];
        const BCDHI: &[At] = &[At::B, At::C, At::D, At::H, At::I];
        const F: &[At] = &[At::F];
        let (train, test, format, devices) = match self {
            SplitName::SmJ => (CD, &[][..], ImageFormat::Jpg, DeviceRule::PhoneOnly),
            SplitName::SmW => (CD, &[][..], ImageFormat::RawWb, DeviceRule::PhoneOnly),
            SplitName::SsJ => (ACD, FHI, ImageFormat::Jpg, DeviceRule::PhoneOnly),
            SplitName::SsW => (BCD, FHI, ImageFormat::RawWb, DeviceRule::PhoneOnly),
            SplitName::SsA => (BCD, FHI, ImageFormat::RawWb, DeviceRule::PhoneAndReflex),
            SplitName::MsJ => (ACDHI, F, ImageFormat::Jpg, DeviceRule::Any),
            SplitName::MsW => (BCDHI, F, ImageFormat::RawWb, DeviceRule::Any),
        };
        Composition {
            train,
            test,
            format,
            devices,
        }
    }

    /// Whether a record of the right atomic split belongs to this split's image pool.
    fn admits(self, r: &SampleRecord) -> bool {
        let c = self.composition();
        let device_ok = match c.devices {
            DeviceRule::PhoneOnly => r.is_phone(),
            DeviceRule::PhoneAndReflex => r.is_phone() || r.is_reflex(),
            DeviceRule::Any => true,
        };
        // Depth-camera frames are plain RGB and have no white-balanced variant,
        // so the cross-device splits take them whatever the format column says.
        let format_ok = r.image_format == c.format || (c.devices == DeviceRule::Any && r.is_depth_camera());
        device_ok && format_ok
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSplitName(s.to_string()))
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named train/test composition. Simple splits keep everything in `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub train: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
}

pub fn build_split(records: &[SampleRecord], name: &str) -> Result<DatasetSplit> {
    let name: SplitName = name.parse()?;
    Ok(build_named_split(records, name))
}

pub fn build_named_split(records: &[SampleRecord], name: SplitName) -> DatasetSplit {
    let comp = name.composition();
    let pick = |parts: &[AtomicSplit]| -> Vec<SampleRecord> {
        records
            .iter()
            .filter(|r| parts.contains(&r.atomic_split) && name.admits(r))
            .cloned()
            .collect()
    };
    DatasetSplit {
        name,
        train: pick(comp.train),
        test: pick(comp.test),
    }
}

/// Label statistics of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single sample.
    pub std: f64,
    /// Mean absolute deviation about the mean: the error of the constant-mean predictor.
    pub mad: f64,
}

pub fn split_stats(samples: &[SampleRecord]) -> Result<SplitStats> {
    let values: Vec<f64> = samples.iter().map(|s| s.brix_mean).collect();
    brix_stats(&values)
}

pub fn brix_stats(values: &[f64]) -> Result<SplitStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput("split_stats needs at least one sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let std = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    let mad = values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    Ok(SplitStats {
        count: values.len(),
        mean,
        std,
        mad,
    })
}
