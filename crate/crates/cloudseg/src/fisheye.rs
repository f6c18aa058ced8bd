//! Perspective patch rendering from whole-sky fisheye captures.
//!
//! The source image is treated as an equidistant fisheye projection of the
//! upper hemisphere (`r = focal * theta`). A virtual pinhole camera sits at
//! the hemisphere center pointing at a requested azimuth/elevation; every
//! output pixel's ray is intersected with the hemisphere and mapped through
//! the fisheye model back to source coordinates, sampled bilinearly.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_FOV_DEG: f64 = 62.0;
pub const DEFAULT_OUT_SIZE: usize = 600;

/// Equidistant fisheye calibration: `focal` in pixels per radian, optical
/// center in source pixel coordinates, field of view half-angle `max_theta`.
#[derive(Debug, Clone, Copy)]
pub struct FisheyeCalibration {
    pub focal: f64,
    pub center: (f64, f64),
    pub max_theta: f64,
}

impl FisheyeCalibration {
    pub fn new(focal: f64, center: (f64, f64), max_theta: f64) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "focal must be positive, got {focal}"
            )));
        }
        if !(max_theta > 0.0 && max_theta <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "max_theta must lie in (0, pi/2], got {max_theta}"
            )));
        }
        if !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::InvalidArgument("non-finite center".into()));
        }
        Ok(FisheyeCalibration {
            focal,
            center,
            max_theta,
        })
    }
}

/// How the requested viewing angle maps onto the square output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FovConvention {
    /// The output diagonal spans the viewing angle (default).
    Diagonal,
    /// The output width spans the viewing angle.
    Horizontal,
}

impl std::str::FromStr for FovConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diagonal" => Ok(FovConvention::Diagonal),
            "horizontal" => Ok(FovConvention::Horizontal),
            other => Err(Error::InvalidArgument(format!(
                "unknown fov convention '{other}' (expected diagonal or horizontal)"
            ))),
        }
    }
}

/// Virtual camera pose and output geometry.
#[derive(Debug, Clone, Copy)]
pub struct ViewSpec {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub fov_deg: f64,
    pub out_size: usize,
    pub fov_convention: FovConvention,
}

impl ViewSpec {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, fov_deg: f64, out_size: usize) -> Result<Self> {
        if !(elevation_deg > 0.0 && elevation_deg <= 90.0) {
            return Err(Error::InvalidArgument(format!(
                "view pointing below horizon: elevation must lie in (0, 90], got {elevation_deg}"
            )));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(Error::InvalidArgument(format!(
                "fov must lie in (0, 180), got {fov_deg}"
            )));
        }
        if out_size < 16 {
            return Err(Error::InvalidArgument(format!(
                "output size must be at least 16, got {out_size}"
            )));
        }
        Ok(ViewSpec {
            azimuth_deg,
            elevation_deg,
            fov_deg,
            out_size,
            fov_convention: FovConvention::Diagonal,
        })
    }

    pub fn with_convention(mut self, convention: FovConvention) -> Self {
        self.fov_convention = convention;
        self
    }

    /// Camera basis: forward towards (azimuth, elevation), right along the
    /// horizon, up completing the right-handed frame. The right vector
    /// depends only on the azimuth, so the basis stays continuous up to the
    /// zenith.
    fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        let forward = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let right = Vector3::new(az.sin(), -az.cos(), 0.0);
        let up = right.cross(&forward);
        (forward, right, up)
    }

    /// Virtual focal length in output pixels.
    fn virtual_focal(&self) -> f64 {
        let half_span = match self.fov_convention {
            FovConvention::Diagonal => self.out_size as f64 * std::f64::consts::SQRT_2 / 2.0,
            FovConvention::Horizontal => self.out_size as f64 / 2.0,
        };
        half_span / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// World-space ray through continuous output coordinates (the image
    /// center is at `out_size/2`).
    pub fn pixel_ray(&self, x: f64, y: f64) -> Vector3<f64> {
        let (forward, right, up) = self.basis();
        let half = self.out_size as f64 / 2.0;
        let u = x - half;
        let v = half - y;
        (forward * self.virtual_focal() + right * u + up * v).normalize()
    }
}

/// Unit direction for an azimuth/elevation pair in degrees.
pub fn direction_from_angles(azimuth_deg: f64, elevation_deg: f64) -> Vector3<f64> {
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

/// Maps an upper-hemisphere direction onto source pixel coordinates through
/// the equidistant model.
pub fn project_ray(cal: &FisheyeCalibration, direction: &Vector3<f64>) -> Result<(f64, f64)> {
    let d = direction.normalize();
    if d.z < 0.0 {
        return Err(Error::InvalidArgument(
            "direction below horizon".into(),
        ));
    }
    let theta = d.xy().norm().atan2(d.z);
    if theta > cal.max_theta + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "direction at theta {theta:.6} outside the {:.6} field of view",
            cal.max_theta
        )));
    }
    let phi = d.y.atan2(d.x);
    let r = cal.focal * theta;
    Ok((cal.center.0 + r * phi.cos(), cal.center.1 + r * phi.sin()))
}

/// Inverse of [`project_ray`]: source pixel to unit direction.
pub fn back_project(cal: &FisheyeCalibration, x: f64, y: f64) -> Result<Vector3<f64>> {
    let dx = x - cal.center.0;
    let dy = y - cal.center.1;
    let r = (dx * dx + dy * dy).sqrt();
    let theta = r / cal.focal;
    if theta > cal.max_theta + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "pixel at radius {r:.3} outside the fisheye circle"
        )));
    }
    let phi = dy.atan2(dx);
    Ok(Vector3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ))
}

/// Renders the undistorted perspective patch. Rays beyond the fisheye field
/// of view (or off the source raster) come out black; all other pixels are
/// bilinear combinations of source pixels.
pub fn undistort(src: &Image, cal: &FisheyeCalibration, view: &ViewSpec) -> Result<Image> {
    let (cx, cy) = cal.center;
    if cx < 0.0 || cy < 0.0 || cx > (src.width() - 1) as f64 || cy > (src.height() - 1) as f64 {
        return Err(Error::InvalidArgument(format!(
            "fisheye center ({cx}, {cy}) outside the {}x{} source",
            src.width(),
            src.height()
        )));
    }
    let size = view.out_size;
    let (forward, right, up) = view.basis();
    let focal = view.virtual_focal();
    let half = size as f64 / 2.0;
    let max_x = (src.width() - 1) as f64;
    let max_y = (src.height() - 1) as f64;

    let rows: Vec<Vec<[f64; 3]>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(size);
            let v = half - (i as f64 + 0.5);
            for j in 0..size {
                let u = (j as f64 + 0.5) - half;
                let ray = forward * focal + right * u + up * v;
                let d = ray.normalize();
                if d.z < 0.0 {
                    row.push([0.0; 3]);
                    continue;
                }
                let theta = d.xy().norm().atan2(d.z);
                if theta > cal.max_theta {
                    row.push([0.0; 3]);
                    continue;
                }
                let phi = d.y.atan2(d.x);
                let r = cal.focal * theta;
                let sx = cal.center.0 + r * phi.cos();
                let sy = cal.center.1 + r * phi.sin();
                if sx < 0.0 || sy < 0.0 || sx > max_x || sy > max_y {
                    row.push([0.0; 3]);
                } else {
                    row.push(src.sample_bilinear(sx, sy));
                }
            }
            row
        })
        .collect();

    let mut pixels = Vec::with_capacity(size * size);
    for row in rows {
        pixels.extend(row);
    }
    Image::new(size, size, pixels)
}
