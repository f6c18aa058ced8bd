//! Deterministic synthetic sky/cloud dataset generator for desk-scale
//! verification: smooth random cloud regions over a blue sky, with the
//! generating regions as ground truth.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{self, EntryMetadata, ManifestEntry};
use crate::error::{Error, Result};
use crate::image::{GroundTruthMask, Image};

/// Sky pixels scatter around this sRGB color: high (B-R)/(B+R), high S.
pub const SKY_BASE: [f64; 3] = [0.35, 0.55, 0.85];
/// Cloud pixels scatter around this near-achromatic color: low ratio, low S.
pub const CLOUD_BASE: [f64; 3] = [0.80, 0.80, 0.82];

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub images: usize,
    /// Square output size in pixels.
    pub size: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

struct Blob {
    cx: f64,
    cy: f64,
    sigma: f64,
    amplitude: f64,
}

/// Generates `images` image/mask pairs with per-image metadata (exact cloud
/// coverage, random capture time and sun distance). Pixels are quantized to
/// the 8-bit grid so in-memory data matches what lands on disk.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<(Image, GroundTruthMask, EntryMetadata)>> {
    if cfg.images < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 images, got {}",
            cfg.images
        )));
    }
    if cfg.size < 16 {
        return Err(Error::InvalidArgument(format!(
            "size must be at least 16, got {}",
            cfg.size
        )));
    }
    if !cfg.noise_sigma.is_finite() || cfg.noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be a non-negative real, got {}",
            cfg.noise_sigma
        )));
    }

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.images);
    for _ in 0..cfg.images {
        let sub_seed: u64 = master.random();
        out.push(generate_one(cfg, sub_seed)?);
    }
    Ok(out)
}

fn generate_one(cfg: &SynthConfig, seed: u64) -> Result<(Image, GroundTruthMask, EntryMetadata)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = cfg.size;

    // Smooth scalar field: a handful of Gaussian bumps.
    let n_blobs = rng.random_range(3..=6);
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| Blob {
            cx: rng.random_range(0.0..1.0),
            cy: rng.random_range(0.0..1.0),
            sigma: rng.random_range(0.10..0.35),
            amplitude: rng.random_range(0.5..1.5),
        })
        .collect();
    let mut field = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = (x as f64 + 0.5) / size as f64;
            let v = (y as f64 + 0.5) / size as f64;
            let mut acc = 0.0;
            for b in &blobs {
                let d2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
                acc += b.amplitude * (-d2 / (2.0 * b.sigma * b.sigma)).exp();
            }
            field.push(acc);
        }
    }

    // Threshold the field at a quantile for the target coverage, so both
    // classes are always present.
    let coverage_target = rng.random_range(0.15..0.85);
    let mut sorted = field.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cut_index = (((1.0 - coverage_target) * size as f64 * size as f64) as usize)
        .clamp(1, size * size - 1);
    let tau = sorted[cut_index];
    let labels: Vec<u8> = field.iter().map(|f| (*f >= tau) as u8).collect();

    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Numerical(e.to_string()))?)
    } else {
        None
    };
    let mut pixels = Vec::with_capacity(size * size);
    for label in &labels {
        let base = if *label == 1 { CLOUD_BASE } else { SKY_BASE };
        let mut px = [0.0; 3];
        for c in 0..3 {
            let mut v = base[c];
            if let Some(n) = &noise {
                v += n.sample(&mut rng);
            }
            // Quantize to the 8-bit grid written to disk.
            px[c] = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
        pixels.push(px);
    }

    let mask = GroundTruthMask::new(size, size, labels)?;
    let meta = EntryMetadata {
        time_of_day: Some(rng.random_range(420..1140) as f64),
        cloud_coverage: Some(mask.cloud_coverage()),
        sun_distance: Some((rng.random_range(5.0..140.0) * 10.0f64).round() / 10.0),
    };
    Ok((Image::new(size, size, pixels)?, mask, meta))
}

/// Writes the generated dataset into `dir` as `img_NNN.png` /
/// `img_NNN_GT.png` pairs plus a `manifest.json`, and returns the manifest
/// path. Identical configs produce identical files.
pub fn write_dataset(cfg: &SynthConfig, dir: impl AsRef<Path>, force: bool) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let trios = generate(cfg)?;
    let mut entries = Vec::with_capacity(trios.len());
    for (i, (img, mask, meta)) in trios.iter().enumerate() {
        let image_name = format!("img_{i:03}.png");
        let mask_name = format!("img_{i:03}_GT.png");
        dataset::save_image(img, dir.join(&image_name), force)?;
        dataset::save_mask(mask, dir.join(&mask_name), force)?;
        entries.push(ManifestEntry {
            image_path: image_name,
            mask_path: Some(mask_name),
            metadata: Some(*meta),
        });
    }
    let manifest_path = dir.join("manifest.json");
    dataset::save_manifest("synthetic", &entries, &manifest_path, force)?;
    Ok(manifest_path)
}
