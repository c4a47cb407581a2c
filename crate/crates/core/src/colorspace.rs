//! Pixel-wise sRGB → HSV / CIE-Lab conversions, in double precision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Hsv,
    Lab,
}

impl ColorSpace {
    pub const ALL: [ColorSpace; 3] = [ColorSpace::Rgb, ColorSpace::Hsv, ColorSpace::Lab];

    pub fn as_str(self) -> &'static str {
        match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::Hsv => "hsv",
            ColorSpace::Lab => "lab",
        }
    }
}

impl FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" | "none" => Ok(ColorSpace::Rgb),
            "hsv" => Ok(ColorSpace::Hsv),
            "lab" | "cielab" | "cie-lab" => Ok(ColorSpace::Lab),
            other => Err(Error::InvalidConfig(format!("unknown color space `{other}`"))),
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hexcone HSV with all three components in [0, 1]; hue is degrees / 360.
/// Hue is 0 for achromatic input.
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return [0.0, s, v];
    }
    let sector = if max == r {
        (g - b) / delta
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h < 0.0 {
        h += 1.0;
    }
    if h >= 1.0 {
        h -= 1.0;
    }
    [h, s, v]
}

/// sRGB → linear light (IEC 61966-2-1).
#[inline]
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

// Linear sRGB → XYZ, D65 white, 2° observer.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// Reference white is the image of RGB (1,1,1), so neutral grays land on a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

/// sRGB in [0, 1] → CIE-Lab (L in [0, 100]).
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] =
        std::array::from_fn(|i| RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2]);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Rescale Lab to [0, 1] per channel: L/100, (a+128)/255, (b+128)/255, clamped.
#[inline]
pub fn lab_to_unit([l, a, b]: [f64; 3]) -> [f64; 3] {
    [
        (l / 100.0).clamp(0.0, 1.0),
        ((a + 128.0) / 255.0).clamp(0.0, 1.0),
        ((b + 128.0) / 255.0).clamp(0.0, 1.0),
    ]
}

/// Map one 8-bit pixel into the unit-scaled coordinates of `space`.
#[inline]
pub fn convert_pixel(px: [u8; 3], space: ColorSpace) -> [f64; 3] {
    let rgb = px.map(|c| c as f64 / 255.0);
    match space {
        ColorSpace::Rgb => rgb,
        ColorSpace::Hsv => rgb_to_hsv(rgb),
        ColorSpace::Lab => lab_to_unit(rgb_to_lab(rgb)),
    }
}

/// A 3-channel floating point image, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

pub fn convert_image(image: &RasterImage, space: ColorSpace) -> FloatImage {
    let mut data = Vec::with_capacity(image.data().len());
    for px in image.data().chunks_exact(3) {
        data.extend_from_slice(&convert_pixel([px[0], px[1], px[2]], space));
    }
    FloatImage {
        width: image.width(),
        height: image.height(),
        data,
    }
}
