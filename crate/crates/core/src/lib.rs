//! Lighting-consistency analysis of imaged spheres.
//!
//! The crate is a pure algorithmic core (`no_std`, requires `alloc`):
//!
//! 1. [`sh`]: nine-term spherical-harmonic basis, sphere normals and the
//!    Lambertian radiance model.
//! 2. [`circle`]: edge preprocessing and the EM circle fit that locates the
//!    sphere boundary from a rough manual annotation.
//! 3. [`estimate`]: median filtering, normal/intensity sampling and the
//!    least-squares lighting solve.
//! 4. [`render`]: forward rendering of a sphere under a lighting environment.
//! 5. [`analysis`]: quantile summaries and R² statistics across image sets and
//!    between spheres within one image.
//!
//! File formats, image decoding, the CLI and the HTTP service live in the
//! `lumisphere` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod circle;
mod error;
pub mod estimate;
pub mod linalg;
pub mod raster;
pub mod render;
pub mod sh;

pub use error::{Error, Result};
pub use raster::{GrayImage, RgbImage};
pub use sh::{Circle, LightingEnv, NormalizedLighting, ShBasis9, UnitNormal};
