//! Forward rendering of a Lambertian sphere under a lighting environment.

use alloc::vec::Vec;

use crate::raster::GrayImage;
use crate::sh::{normal_from_pixel, radiance, Circle, LightingEnv};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct RenderSpec {
    /// Width and height of the square frame.
    pub size: usize,
    pub circle: Circle,
    /// Value of every pixel outside the disk, in display units.
    pub background: f64,
    /// Radiance range mapped onto display `[0, 1]`; `None` maps `[0, max]`.
    pub shared_scale: Option<(f64, f64)>,
}

impl RenderSpec {
    /// Sphere of radius `0.45 size` centered in the frame.
    pub fn centered(size: usize) -> Self {
        let half = (size as f64 - 1.0) / 2.0;
        Self {
            size,
            circle: Circle {
                cx: half,
                cy: half,
                r: 0.45 * size as f64,
            },
            background: 0.0,
            shared_scale: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidSpec("frame size must be positive"));
        }
        if !(self.circle.r > 0.0) || !self.circle.fits_within(self.size, self.size) {
            return Err(Error::InvalidSpec("circle does not fit inside the frame"));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::InvalidSpec("background must lie in [0, 1]"));
        }
        if let Some((lo, hi)) = self.shared_scale {
            if !(hi > lo) {
                return Err(Error::InvalidSpec("shared scale must have max > min"));
            }
        }
        Ok(())
    }
}

/// A rendered sphere before and after display scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    /// Clamped radiance inside the disk, `background` outside.
    pub radiance: GrayImage,
    inside: Vec<bool>,
    /// Pixels whose model radiance was negative and clamped to 0.
    pub clamped_pixels: usize,
    spec: RenderSpec,
}

impl Rendering {
    pub fn spec(&self) -> &RenderSpec {
        &self.spec
    }

    pub fn is_inside(&self, x: usize, y: usize) -> bool {
        self.inside[y * self.radiance.width() + x]
    }

    /// Minimum and maximum radiance over the disk.
    pub fn radiance_range(&self) -> (f64, f64) {
        self.radiance
            .data()
            .iter()
            .zip(&self.inside)
            .filter(|(_, &inside)| inside)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Display raster in `[0, 1]` using the spec's scale.
    pub fn display(&self) -> GrayImage {
        let (lo, hi) = match self.spec.shared_scale {
            Some(range) => range,
            None => (0.0, self.radiance_range().1),
        };
        let span = hi - lo;
        let w = self.radiance.width();
        GrayImage::from_fn(w, self.radiance.height(), |x, y| {
            if !self.inside[y * w + x] {
                self.spec.background
            } else if span > 0.0 {
                ((self.radiance.get(x, y) - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
    }
}

/// Evaluates the radiance model at every pixel inside `spec.circle`.
pub fn render_sphere(l: &LightingEnv, spec: &RenderSpec) -> Result<Rendering> {
    spec.validate()?;
    let n = spec.size;
    let mut inside = Vec::with_capacity(n * n);
    let mut clamped = 0;
    let radiance_img = GrayImage::from_fn(n, n, |x, y| match normal_from_pixel(x as f64, y as f64, &spec.circle) {
        Ok(normal) => {
            inside.push(true);
            let v = radiance(l, &normal);
            if v < 0.0 {
                clamped += 1;
                0.0
            } else {
                v
            }
        }
        Err(_) => {
            inside.push(false);
            spec.background
        }
    });
    Ok(Rendering {
        radiance: radiance_img,
        inside,
        clamped_pixels: clamped,
        spec: *spec,
    })
}

/// Joint radiance range of several renderings, for display on one scale.
pub fn shared_scale(renderings: &[Rendering]) -> Option<(f64, f64)> {
    let (lo, hi) = renderings
        .iter()
        .map(Rendering::radiance_range)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| {
            (a.min(lo), b.max(hi))
        });
    (hi > lo).then_some((lo.min(0.0), hi))
}
