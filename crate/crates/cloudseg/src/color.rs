//! The 16 color channels and components used for sky/cloud analysis.
//!
//! An sRGB image decomposes into channels c1..c16 covering the RGB, HSV, YIQ
//! and CIELAB spaces plus the red/blue combinations `R/B`, `R-B`,
//! `(B-R)/(B+R)` and chroma `C = max(R,G,B) - min(R,G,B)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Guard added to the denominators of c13 and c14/c15-style ratios so that
/// black or saturated pixels do not divide by zero.
pub const RATIO_EPSILON: f64 = 1e-4;

/// NTSC YIQ transform.
const YIQ: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
];

/// Linear sRGB to XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Identifier of one of the 16 channels, `C1` (R) through `C16` (chroma).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum ChannelId {
    #[serde(rename = "c1")]
    C1,
    #[serde(rename = "c2")]
    C2,
    #[serde(rename = "c3")]
    C3,
    #[serde(rename = "c4")]
    C4,
    #[serde(rename = "c5")]
    C5,
    #[serde(rename = "c6")]
    C6,
    #[serde(rename = "c7")]
    C7,
    #[serde(rename = "c8")]
    C8,
    #[serde(rename = "c9")]
    C9,
    #[serde(rename = "c10")]
    C10,
    #[serde(rename = "c11")]
    C11,
    #[serde(rename = "c12")]
    C12,
    #[serde(rename = "c13")]
    C13,
    #[serde(rename = "c14")]
    C14,
    #[serde(rename = "c15")]
    C15,
    #[serde(rename = "c16")]
    C16,
}

impl ChannelId {
    pub const ALL: [ChannelId; 16] = [
        ChannelId::C1,
        ChannelId::C2,
        ChannelId::C3,
        ChannelId::C4,
        ChannelId::C5,
        ChannelId::C6,
        ChannelId::C7,
        ChannelId::C8,
        ChannelId::C9,
        ChannelId::C10,
        ChannelId::C11,
        ChannelId::C12,
        ChannelId::C13,
        ChannelId::C14,
        ChannelId::C15,
        ChannelId::C16,
    ];

    /// Zero-based column index in a channel stack.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<ChannelId> {
        ChannelId::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::InvalidChannel(format!("index {index}")))
    }

    /// Parses `"c1"`..`"c16"` (case-insensitive).
    pub fn parse(s: &str) -> Result<ChannelId> {
        let lower = s.trim().to_ascii_lowercase();
        let digits = lower
            .strip_prefix('c')
            .ok_or_else(|| Error::InvalidChannel(s.to_string()))?;
        let n: usize = digits
            .parse()
            .map_err(|_| Error::InvalidChannel(s.to_string()))?;
        if (1..=16).contains(&n) {
            ChannelId::from_index(n - 1)
        } else {
            Err(Error::InvalidChannel(s.to_string()))
        }
    }

    /// The component name: R, G, B, H, S, V, Y, I, Q, L*, a*, b*, R/B, R-B,
    /// (B-R)/(B+R), C.
    pub fn label(self) -> &'static str {
        match self {
            ChannelId::C1 => "R",
            ChannelId::C2 => "G",
            ChannelId::C3 => "B",
            ChannelId::C4 => "H",
            ChannelId::C5 => "S",
            ChannelId::C6 => "V",
            ChannelId::C7 => "Y",
            ChannelId::C8 => "I",
            ChannelId::C9 => "Q",
            ChannelId::C10 => "L*",
            ChannelId::C11 => "a*",
            ChannelId::C12 => "b*",
            ChannelId::C13 => "R/B",
            ChannelId::C14 => "R-B",
            ChannelId::C15 => "(B-R)/(B+R)",
            ChannelId::C16 => "C",
        }
    }
}

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "c{}", self.index() + 1)
    }
}

impl std::str::FromStr for ChannelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<ChannelId> {
        ChannelId::parse(s)
    }
}

/// One channel of an image, same dimensions as its source.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap {
    pub width: usize,
    pub height: usize,
    pub channel: ChannelId,
    pub values: Vec<f64>,
}

/// Per-pixel 16-column feature matrix: row k holds the channel values of
/// pixel k (row-major), columns ordered c1..c16.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub width: usize,
    pub height: usize,
    /// Row-major `(width*height) x 16`.
    pub data: Vec<f64>,
}

impl ChannelStack {
    pub fn rows(&self) -> usize {
        self.width * self.height
    }

    pub fn value(&self, row: usize, ch: ChannelId) -> f64 {
        self.data[row * 16 + ch.index()]
    }

    /// Copies out one column.
    pub fn column(&self, ch: ChannelId) -> Vec<f64> {
        let j = ch.index();
        (0..self.rows()).map(|r| self.data[r * 16 + j]).collect()
    }
}

/// All 16 channel values of a single sRGB pixel, in c1..c16 order.
pub fn pixel_channels(rgb: [f64; 3]) -> [f64; 16] {
    let [r, g, b] = rgb;
    let (h, s, v) = rgb_to_hsv(r, g, b);
    let y = YIQ[0][0] * r + YIQ[0][1] * g + YIQ[0][2] * b;
    let i = YIQ[1][0] * r + YIQ[1][1] * g + YIQ[1][2] * b;
    let q = YIQ[2][0] * r + YIQ[2][1] * g + YIQ[2][2] * b;
    let (l, a, bb) = srgb_to_lab(r, g, b);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    [
        r,
        g,
        b,
        h,
        s,
        v,
        y,
        i,
        q,
        l,
        a,
        bb,
        r / (b + RATIO_EPSILON),
        r - b,
        (b - r) / (b + r + RATIO_EPSILON),
        chroma,
    ]
}

/// Hexcone HSV. H is scaled to `[0,1]` (degrees/360) and defined as 0 for
/// achromatic pixels; S = C/max with S = 0 when max = 0; V = max.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let v = max;
    let s = if max > 0.0 { chroma / max } else { 0.0 };
    let h = if chroma > 0.0 {
        let h6 = if max == r {
            ((g - b) / chroma).rem_euclid(6.0)
        } else if max == g {
            (b - r) / chroma + 2.0
        } else {
            (r - g) / chroma + 4.0
        };
        h6 / 6.0
    } else {
        0.0
    };
    (h, s, v)
}

/// sRGB (IEC 61966-2-1 transfer) to CIELAB under D65. L* keeps its native
/// `[0,100]` range. The white point is taken as the transform of RGB(1,1,1)
/// so that achromatic inputs map to a* = b* = 0 exactly.
pub fn srgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let rl = srgb_to_linear(r);
    let gl = srgb_to_linear(g);
    let bl = srgb_to_linear(b);
    let mut xyz = [0.0; 3];
    let mut white = [0.0; 3];
    for k in 0..3 {
        xyz[k] = RGB_TO_XYZ[k][0] * rl + RGB_TO_XYZ[k][1] * gl + RGB_TO_XYZ[k][2] * bl;
        white[k] = RGB_TO_XYZ[k][0] + RGB_TO_XYZ[k][1] + RGB_TO_XYZ[k][2];
    }
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Extracts a single channel of `img`.
pub fn extract_channel(img: &Image, ch: ChannelId) -> ChannelMap {
    let j = ch.index();
    let values = img.pixels().iter().map(|p| pixel_channels(*p)[j]).collect();
    ChannelMap {
        width: img.width(),
        height: img.height(),
        channel: ch,
        values,
    }
}

/// Builds the `(m*n) x 16` stack whose column j is channel c_{j+1} of `img`
/// flattened row-major.
pub fn extract_stack(img: &Image) -> ChannelStack {
    let mut data = Vec::with_capacity(img.len() * 16);
    for p in img.pixels() {
        data.extend_from_slice(&pixel_channels(*p));
    }
    ChannelStack {
        width: img.width(),
        height: img.height(),
        data,
    }
}
