//! Raster types: floating-point sRGB images and binary ground-truth masks.

use crate::error::{Error, Result};

/// An sRGB image with components in `[0,1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl Image {
    /// Builds an image, validating dimensions and component ranges.
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        for (i, p) in pixels.iter().enumerate() {
            for c in p {
                if !c.is_finite() || *c < 0.0 || *c > 1.0 {
                    return Err(Error::InvalidImage(format!(
                        "component {c} out of [0,1] at pixel {i}"
                    )));
                }
            }
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from 8-bit sRGB samples; each component is divided by 255.
    pub fn from_srgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "byte count {} does not match {width}x{height}x3",
                data.len()
            )));
        }
        let pixels = data
            .chunks_exact(3)
            .map(|c| {
                [
                    c[0] as f64 / 255.0,
                    c[1] as f64 / 255.0,
                    c[2] as f64 / 255.0,
                ]
            })
            .collect();
        Image::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample at continuous coordinates, clamped to the image border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let fx = x.clamp(0.0, (self.width - 1) as f64);
        let fy = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x1, y0);
        let p01 = self.pixel(x0, y1);
        let p11 = self.pixel(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] * (1.0 - tx) + p10[c] * tx;
            let bottom = p01[c] * (1.0 - tx) + p11[c] * tx;
            out[c] = top * (1.0 - ty) + bottom * ty;
        }
        out
    }
}

/// Per-pixel binary labels: 0 = sky, 1 = cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl GroundTruthMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask label count {} does not match {width}x{height}",
                labels.len()
            )));
        }
        if let Some(v) = labels.iter().find(|v| **v > 1) {
            return Err(Error::InvalidImage(format!(
                "mask labels must be 0 or 1, got {v}"
            )));
        }
        Ok(GroundTruthMask {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Fraction of cloud-labelled pixels.
    pub fn cloud_coverage(&self) -> f64 {
        let cloud: usize = self.labels.iter().map(|v| *v as usize).sum();
        cloud as f64 / self.labels.len() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let first = self.labels.first().copied();
        self.labels.iter().any(|v| Some(*v) != first)
    }
}
