//! Lighting estimation from a fitted circle.

use alloc::vec::Vec;

use crate::linalg::{cholesky_solve, symmetric_eigen};
use crate::raster::{GrayImage, RgbImage};
use crate::sh::{design_row, normal_from_pixel, Circle, LightingEnv, NormalizedLighting, UnitNormal, NUM_COEFFS};
use crate::{Error, Result};

/// Largest accepted condition number of `AᵀA`.
pub const MAX_CONDITION: f64 = 1e10;

/// Samples closer to the rim than this (as a fraction of `r²` in the
/// normal's z radicand) are skipped.
pub const RIM_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub normal: UnitNormal,
    pub intensity: f64,
}

/// Paired normals and intensities; each pair is one row of the lighting system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same normals with every intensity passed through `f`.
    pub fn map_intensity(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    normal: s.normal,
                    intensity: f(s.intensity),
                })
                .collect(),
        }
    }
}

impl FromIterator<Sample> for SampleSet {
    fn from_iter<T: IntoIterator<Item = Sample>>(iter: T) -> Self {
        Self {
            samples: iter.into_iter().collect(),
        }
    }
}

/// One environment per color channel plus one from the luma image.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelLighting {
    pub red: LightingEnv,
    pub green: LightingEnv,
    pub blue: LightingEnv,
    pub gray: LightingEnv,
}

impl ChannelLighting {
    pub const NAMES: [&'static str; 4] = ["red", "green", "blue", "gray"];

    /// Environments in the order of [`Self::NAMES`].
    pub fn as_array(&self) -> [&LightingEnv; 4] {
        [&self.red, &self.green, &self.blue, &self.gray]
    }

    pub fn by_name(&self, name: &str) -> Option<&LightingEnv> {
        match name {
            "red" => Some(&self.red),
            "green" => Some(&self.green),
            "blue" => Some(&self.blue),
            "gray" => Some(&self.gray),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", default))]
pub struct EstimateOptions {
    /// Sampling step in pixels along both axes.
    pub stride: usize,
    /// Undo a 2.2 display gamma before sampling.
    pub linearize_gamma: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            stride: 2,
            linearize_gamma: false,
        }
    }
}

/// 3x3 (nine-tap) median with edge replication.
pub fn median_filter_3x3(image: &GrayImage) -> Result<GrayImage> {
    if image.width() < 3 || image.height() < 3 {
        return Err(Error::InvalidInput("median filter needs at least a 3x3 image"));
    }
    Ok(GrayImage::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        let mut taps = [0.0; 9];
        let mut i = 0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                taps[i] = image.get_clamped(x + dx, y + dy);
                i += 1;
            }
        }
        taps.sort_unstable_by(f64::total_cmp);
        taps[4]
    }))
}

/// Collects `(normal, intensity)` pairs at every `stride`-th pixel of the
/// image lattice that falls strictly inside `c`.
pub fn sample_sphere(image: &GrayImage, c: &Circle, stride: usize) -> Result<SampleSet> {
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1"));
    }
    if !c.fits_within(image.width(), image.height()) {
        return Err(Error::InvalidInput("circle does not lie within the image"));
    }
    let step = stride as f64;
    let x0 = (libm::ceil((c.cx - c.r) / step) * step) as usize;
    let y0 = (libm::ceil((c.cy - c.r) / step) * step) as usize;
    let x1 = libm::floor(c.cx + c.r) as usize;
    let y1 = libm::floor(c.cy + c.r) as usize;
    let r2 = c.r * c.r;

    let mut samples = Vec::new();
    for y in (y0..=y1).step_by(stride) {
        for x in (x0..=x1).step_by(stride) {
            let (dx, dy) = (x as f64 - c.cx, y as f64 - c.cy);
            let radicand = r2 - dx * dx - dy * dy;
            if radicand < r2 * RIM_MARGIN || radicand <= 0.0 {
                continue;
            }
            let normal = normal_from_pixel(x as f64, y as f64, c)?;
            samples.push(Sample {
                normal,
                intensity: image.get(x, y),
            });
        }
    }
    if samples.len() < NUM_COEFFS {
        return Err(Error::InsufficientSamples {
            needed: NUM_COEFFS,
            got: samples.len(),
        });
    }
    Ok(SampleSet { samples })
}

/// Normal equations `(AᵀA, Aᵀb)` of the lighting system.
pub fn normal_equations(samples: &SampleSet) -> ([[f64; NUM_COEFFS]; NUM_COEFFS], [f64; NUM_COEFFS]) {
    let mut ata = [[0.0; NUM_COEFFS]; NUM_COEFFS];
    let mut atb = [0.0; NUM_COEFFS];
    for s in &samples.samples {
        let row = design_row(&s.normal);
        for i in 0..NUM_COEFFS {
            atb[i] += row[i] * s.intensity;
            for j in i..NUM_COEFFS {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..NUM_COEFFS {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    (ata, atb)
}

/// Ratio of the largest to the smallest eigenvalue of a symmetric matrix.
pub fn condition_number<const N: usize>(m: &[[f64; N]; N]) -> f64 {
    let (values, _) = symmetric_eigen(m);
    let (lo, hi) = (values[0], values[N - 1]);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Least-squares lighting environment for the sampled intensities.
pub fn solve_lighting(samples: &SampleSet) -> Result<LightingEnv> {
    if samples.len() < NUM_COEFFS {
        return Err(Error::InsufficientSamples {
            needed: NUM_COEFFS,
            got: samples.len(),
        });
    }
    let (ata, atb) = normal_equations(samples);
    let condition = condition_number(&ata);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let l = cholesky_solve(&ata, &atb).ok_or(Error::IllConditioned { condition })?;
    let env = LightingEnv(l);
    if !env.is_finite() {
        return Err(Error::IllConditioned { condition });
    }
    Ok(env)
}

fn estimate_plane(plane: &GrayImage, c: &Circle, opts: &EstimateOptions) -> Result<LightingEnv> {
    let plane = if opts.linearize_gamma {
        plane.map(|v| libm::pow(v.max(0.0), 2.2))
    } else {
        plane.clone()
    };
    let filtered = median_filter_3x3(&plane)?;
    solve_lighting(&sample_sphere(&filtered, c, opts.stride)?)
}

/// Median filter, sample and solve each color channel and the luma image.
pub fn estimate_all_channels(image: &RgbImage, c: &Circle, opts: &EstimateOptions) -> Result<ChannelLighting> {
    if !c.fits_within(image.width(), image.height()) {
        return Err(Error::InvalidInput("circle does not lie within the image"));
    }
    Ok(ChannelLighting {
        red: estimate_plane(&image.channel(0), c, opts)?,
        green: estimate_plane(&image.channel(1), c, opts)?,
        blue: estimate_plane(&image.channel(2), c, opts)?,
        gray: estimate_plane(&image.luma(), c, opts)?,
    })
}

/// Divides the eight higher-order coefficients by `|l(0,0)|`.
pub fn normalize_env(l: &LightingEnv) -> Result<NormalizedLighting> {
    let scale = libm::fabs(l.0[0]);
    if !(scale > 1e-12) {
        return Err(Error::DegenerateEnvironment);
    }
    Ok(NormalizedLighting(core::array::from_fn(|i| l.0[i + 1] / scale)))
}
