//! Dataset manifests, image/mask loading and persistence of models, channel
//! maps, probability maps and masks.
//!
//! A manifest is a JSON file naming a dataset and its image/mask pairs; all
//! paths resolve relative to its `root` (or the manifest's own directory),
//! and the `CLOUDSEG_DATA_ROOT` environment variable overrides the root.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use image::{ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::color::{ChannelId, ChannelMap};
use crate::error::{Error, Result};
use crate::image::{GroundTruthMask, Image};
use crate::pls::{PlsModel, ProbabilityMap};

pub const MODEL_VERSION: u32 = 1;
pub const DATA_ROOT_ENV: &str = "CLOUDSEG_DATA_ROOT";

/// Optional per-image metadata used by the breakdown reports.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
pub struct EntryMetadata {
    /// Minutes since midnight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_of_day: Option<f64>,
    /// Fraction of cloud pixels in [0,1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_coverage: Option<f64>,
    /// Angular distance from the sun, degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sun_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<EntryMetadata>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root: Option<String>,
    entries: Vec<ManifestEntry>,
}

/// A validated manifest with its root resolved to an absolute directory.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn image_path(&self, index: usize) -> PathBuf {
        self.root.join(&self.entries[index].image_path)
    }

    pub fn mask_path(&self, index: usize) -> Option<PathBuf> {
        self.entries[index]
            .mask_path
            .as_ref()
            .map(|m| self.root.join(m))
    }

    /// Errors unless every entry carries a mask; returns the offender.
    pub fn require_masks(&self) -> Result<()> {
        for e in &self.entries {
            if e.mask_path.is_none() {
                return Err(Error::MissingMask(e.image_path.clone()));
            }
        }
        Ok(())
    }
}

fn validate_entries(entries: &[ManifestEntry]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.image_path.as_str()) {
            return Err(Error::BadManifestEntry {
                entry: e.image_path.clone(),
                problem: "duplicate image_path".into(),
            });
        }
        if let Some(meta) = &e.metadata {
            if let Some(c) = meta.cloud_coverage {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::BadManifestEntry {
                        entry: e.image_path.clone(),
                        problem: format!("cloud_coverage {c} outside [0,1]"),
                    });
                }
            }
            if let Some(d) = meta.sun_distance {
                if d < 0.0 {
                    return Err(Error::BadManifestEntry {
                        entry: e.image_path.clone(),
                        problem: format!("negative sun_distance {d}"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Root resolution order: `CLOUDSEG_DATA_ROOT` env override, then the
/// manifest's own root (relative to its directory), then that directory.
fn resolve_root(file_root: Option<&str>, manifest_dir: &Path, env_root: Option<&str>) -> PathBuf {
    if let Some(env) = env_root {
        return PathBuf::from(env);
    }
    match file_root {
        Some(r) => {
            let r = PathBuf::from(r);
            if r.is_absolute() {
                r
            } else {
                manifest_dir.join(r)
            }
        }
        None => manifest_dir.to_path_buf(),
    }
}

/// Loads, validates and resolves a manifest. Every referenced file must
/// exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), &e))?;
    validate_entries(&file.entries)?;

    let manifest_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let env_root = std::env::var(DATA_ROOT_ENV).ok().filter(|v| !v.is_empty());
    let root = resolve_root(file.root.as_deref(), &manifest_dir, env_root.as_deref());

    let manifest = DatasetManifest {
        name: file.name,
        root,
        entries: file.entries,
    };
    for (i, e) in manifest.entries.iter().enumerate() {
        let img = manifest.image_path(i);
        if !img.is_file() {
            return Err(Error::BadManifestEntry {
                entry: e.image_path.clone(),
                problem: format!("image not found at {}", img.display()),
            });
        }
        if let Some(mask) = manifest.mask_path(i) {
            if !mask.is_file() {
                return Err(Error::BadManifestEntry {
                    entry: e.image_path.clone(),
                    problem: format!("mask not found at {}", mask.display()),
                });
            }
        }
    }
    Ok(manifest)
}

/// Refuses to clobber an existing path unless `force` is set.
pub fn check_writable(path: impl AsRef<Path>, force: bool) -> Result<()> {
    let path = path.as_ref();
    if path.exists() && !force {
        return Err(Error::OutputExists(path.to_path_buf()));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    Ok(())
}

/// Writes a manifest with paths relative to `root_relative_to` (stored
/// without a root field, so it travels with its directory).
pub fn save_manifest(
    name: &str,
    entries: &[ManifestEntry],
    path: impl AsRef<Path>,
    force: bool,
) -> Result<()> {
    validate_entries(entries)?;
    let path = path.as_ref();
    check_writable(path, force)?;
    let file = ManifestFile {
        name: name.to_string(),
        root: None,
        entries: entries.to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).expect("manifest serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Builds a manifest from a directory of `X.png`/`X.jpg` images with masks
/// named `X_GT.png` alongside them (or in a `GT/` subdirectory).
pub fn convert_directory(dir: impl AsRef<Path>, name: &str) -> Result<Vec<ManifestEntry>> {
    let dir = dir.as_ref();
    let mut names: Vec<String> = Vec::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        let file_name = entry.file_name().to_string_lossy().into_owned();
        names.push(file_name);
    }
    names.sort();

    let mut entries = Vec::new();
    for file_name in &names {
        let lower = file_name.to_ascii_lowercase();
        let stem = match lower.strip_suffix(".png").or_else(|| lower.strip_suffix(".jpg")) {
            Some(s) => &file_name[..s.len()],
            None => continue,
        };
        if stem.to_ascii_lowercase().ends_with("_gt") {
            continue;
        }
        let candidates = [
            format!("{stem}_GT.png"),
            format!("GT/{stem}.png"),
            format!("GT/{stem}_GT.png"),
        ];
        let mask_path = candidates.iter().find(|c| dir.join(c).is_file()).cloned();
        entries.push(ManifestEntry {
            image_path: file_name.clone(),
            mask_path,
            metadata: None,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let _ = name;
    Ok(entries)
}

fn open_raster(path: &Path, allowed: &[ImageFormat]) -> Result<image::DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    match reader.format() {
        Some(f) if allowed.contains(&f) => {}
        Some(f) => {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported format {f:?}",
                path.display()
            )))
        }
        None => {
            return Err(Error::InvalidArgument(format!(
                "{}: unrecognized image format",
                path.display()
            )))
        }
    }
    reader.decode().map_err(|e| Error::ImageCodec {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a PNG or JPEG image and scales 8-bit samples into [0,1].
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let dynamic = open_raster(path, &[ImageFormat::Png, ImageFormat::Jpeg])?;
    let rgb = dynamic.to_rgb8();
    Image::from_srgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
}

/// Loads a PNG mask with strict {0, 255} values (0 = sky, 255 = cloud).
/// `binarize_gt` relaxes this: values >= the cutoff become cloud.
pub fn load_mask(path: impl AsRef<Path>, binarize_gt: Option<u8>) -> Result<GroundTruthMask> {
    let path = path.as_ref();
    let dynamic = open_raster(path, &[ImageFormat::Png])?;
    let gray = dynamic.to_luma8();
    let mut labels = Vec::with_capacity(gray.len());
    for v in gray.as_raw() {
        let label = match binarize_gt {
            Some(cutoff) => (*v >= cutoff) as u8,
            None => match v {
                0 => 0,
                255 => 1,
                other => {
                    return Err(Error::NonBinaryMask {
                        path: path.display().to_string(),
                        value: *other,
                    })
                }
            },
        };
        labels.push(label);
    }
    GroundTruthMask::new(gray.width() as usize, gray.height() as usize, labels)
}

/// Writes a mask as an 8-bit PNG with 0 = sky and 255 = cloud.
pub fn save_mask(mask: &GroundTruthMask, path: impl AsRef<Path>, force: bool) -> Result<()> {
    let path = path.as_ref();
    check_writable(path, force)?;
    let data: Vec<u8> = mask.labels().iter().map(|l| l * 255).collect();
    let buf = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data)
        .expect("mask dims are valid");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::ImageCodec {
            path: path.display().to_string(),
            source: e,
        })
}

/// Writes an sRGB image as an 8-bit PNG (components scaled by 255, rounded).
pub fn save_image(img: &Image, path: impl AsRef<Path>, force: bool) -> Result<()> {
    let path = path.as_ref();
    check_writable(path, force)?;
    let mut data = Vec::with_capacity(img.len() * 3);
    for p in img.pixels() {
        for c in p {
            data.push((c * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, data)
        .expect("image dims are valid");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::ImageCodec {
            path: path.display().to_string(),
            source: e,
        })
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_u16_png(path: &Path, width: usize, height: usize, data: Vec<u16>) -> Result<()> {
    let buf =
        image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(width as u32, height as u32, data)
            .expect("raster dims are valid");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::ImageCodec {
            path: path.display().to_string(),
            source: e,
        })
}

fn read_u16_png(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let dynamic = open_raster(path, &[ImageFormat::Png])?;
    let gray = dynamic.to_luma16();
    Ok((
        gray.width() as usize,
        gray.height() as usize,
        gray.as_raw().clone(),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelSidecar {
    channel: ChannelId,
    min: f64,
    max: f64,
}

/// Writes a channel map as a 16-bit PNG, affinely rescaled to [0,65535],
/// with a sidecar JSON recording (min, max) so the values round-trip.
pub fn save_channel_map(map: &ChannelMap, path: impl AsRef<Path>, force: bool) -> Result<()> {
    let path = path.as_ref();
    check_writable(path, force)?;
    let sidecar = sidecar_path(path);
    check_writable(&sidecar, force)?;
    let min = map.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = map.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let data: Vec<u16> = map
        .values
        .iter()
        .map(|v| {
            if range == 0.0 {
                0
            } else {
                ((v - min) / range * 65535.0).round() as u16
            }
        })
        .collect();
    write_u16_png(path, map.width, map.height, data)?;
    let meta = ChannelSidecar {
        channel: map.channel,
        min,
        max,
    };
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta).unwrap())
        .map_err(|e| Error::io(sidecar.display().to_string(), e))
}

/// Reads a channel map written by [`save_channel_map`].
pub fn load_channel_map(path: impl AsRef<Path>) -> Result<ChannelMap> {
    let path = path.as_ref();
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar)
        .map_err(|e| Error::io(sidecar.display().to_string(), e))?;
    let meta: ChannelSidecar =
        serde_json::from_str(&text).map_err(|e| Error::json(sidecar.display().to_string(), &e))?;
    let (width, height, raw) = read_u16_png(path)?;
    let range = meta.max - meta.min;
    let values = raw
        .iter()
        .map(|v| meta.min + *v as f64 / 65535.0 * range)
        .collect();
    Ok(ChannelMap {
        width,
        height,
        channel: meta.channel,
        values,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbSidecar {
    degenerate: bool,
}

/// Writes a probability map as a 16-bit PNG (`round(p * 65535)`) plus a
/// sidecar JSON carrying the degenerate flag.
pub fn save_prob_map(prob: &ProbabilityMap, path: impl AsRef<Path>, force: bool) -> Result<()> {
    let path = path.as_ref();
    check_writable(path, force)?;
    let sidecar = sidecar_path(path);
    check_writable(&sidecar, force)?;
    let data: Vec<u16> = prob
        .values
        .iter()
        .map(|p| (p * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    write_u16_png(path, prob.width, prob.height, data)?;
    let meta = ProbSidecar {
        degenerate: prob.degenerate,
    };
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta).unwrap())
        .map_err(|e| Error::io(sidecar.display().to_string(), e))
}

/// Reads a probability map written by [`save_prob_map`]. Values come back
/// within 1/65535 of the originals.
pub fn load_prob_map(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let path = path.as_ref();
    let (width, height, raw) = read_u16_png(path)?;
    let sidecar = sidecar_path(path);
    let degenerate = match std::fs::read_to_string(&sidecar) {
        Ok(text) => {
            let meta: ProbSidecar = serde_json::from_str(&text)
                .map_err(|e| Error::json(sidecar.display().to_string(), &e))?;
            meta.degenerate
        }
        Err(_) => false,
    };
    Ok(ProbabilityMap {
        width,
        height,
        values: raw.iter().map(|v| *v as f64 / 65535.0).collect(),
        degenerate,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    #[serde(flatten)]
    model: PlsModel,
}

/// Serializes a model to JSON. Coefficients survive the round-trip
/// bit-exactly (shortest-representation float encoding).
pub fn save_model(model: &PlsModel, path: impl AsRef<Path>, force: bool) -> Result<()> {
    let path = path.as_ref();
    check_writable(path, force)?;
    let file = ModelFile {
        version: MODEL_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&file).expect("model serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PlsModel> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), &e))?;
    if file.version != MODEL_VERSION {
        return Err(Error::ModelVersion {
            expected: MODEL_VERSION,
            found: file.version,
        });
    }
    Ok(file.model)
}

/// FNV-1a hash of a file's bytes, for provenance stamps in training metadata.
pub fn file_fingerprint(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    Ok(format!("{hash:016x}"))
}

/// Random access to the (image, mask) pairs of a dataset.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn load(&self, index: usize) -> Result<(Image, GroundTruthMask)>;
    fn metadata(&self, _index: usize) -> Option<EntryMetadata> {
        None
    }
}

/// Loads pairs lazily from a manifest; every entry must carry a mask.
pub struct ManifestSamples<'a> {
    manifest: &'a DatasetManifest,
    binarize_gt: Option<u8>,
}

impl<'a> ManifestSamples<'a> {
    pub fn new(manifest: &'a DatasetManifest, binarize_gt: Option<u8>) -> Result<Self> {
        manifest.require_masks()?;
        Ok(ManifestSamples {
            manifest,
            binarize_gt,
        })
    }
}

impl SampleSource for ManifestSamples<'_> {
    fn len(&self) -> usize {
        self.manifest.len()
    }

    fn load(&self, index: usize) -> Result<(Image, GroundTruthMask)> {
        let img = load_image(self.manifest.image_path(index))?;
        let mask = load_mask(
            self.manifest.mask_path(index).expect("masks checked"),
            self.binarize_gt,
        )?;
        if img.len() != mask.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}: image {}x{} vs mask {}x{}",
                self.manifest.entries[index].image_path,
                img.width(),
                img.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok((img, mask))
    }

    fn metadata(&self, index: usize) -> Option<EntryMetadata> {
        self.manifest.entries[index].metadata
    }
}

/// In-memory samples, used by the synthetic pipeline and tests.
pub struct MemorySamples {
    pub pairs: Vec<(Image, GroundTruthMask)>,
    pub metadata: Vec<Option<EntryMetadata>>,
}

impl MemorySamples {
    pub fn new(pairs: Vec<(Image, GroundTruthMask)>) -> Self {
        let metadata = vec![None; pairs.len()];
        MemorySamples { pairs, metadata }
    }
}

impl SampleSource for MemorySamples {
    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn load(&self, index: usize) -> Result<(Image, GroundTruthMask)> {
        Ok(self.pairs[index].clone())
    }

    fn metadata(&self, index: usize) -> Option<EntryMetadata> {
        self.metadata[index]
    }
}
