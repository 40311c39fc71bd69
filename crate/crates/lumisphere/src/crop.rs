//! Loose crop around a sphere followed by a bilinear resize.

use lumisphere_core::RgbImage;

use crate::schema::CropBox;
use crate::{Error, Result};

/// Side length of the analysis frame.
pub const ANALYSIS_SIZE: usize = 600;

/// Crops `image` to `crop` and resamples it to 600x600.
pub fn crop_resize(image: &RgbImage, crop: &CropBox) -> Result<RgbImage> {
    crop_resize_to(image, crop, ANALYSIS_SIZE)
}

/// Crops and bilinearly resamples to `size` x `size`, sampling at pixel
/// centers. A box already of the target size is copied verbatim.
pub fn crop_resize_to(image: &RgbImage, crop: &CropBox, size: usize) -> Result<RgbImage> {
    let (x, y, w, h) = (crop.x as usize, crop.y as usize, crop.w as usize, crop.h as usize);
    if w < 2 || h < 2 || x + w > image.width() || y + h > image.height() || size == 0 {
        return Err(Error::InvalidCrop(crop.to_string()));
    }
    let sx = w as f64 / size as f64;
    let sy = h as f64 / size as f64;
    let mut out = RgbImage::new(size, size, [0.0; 3]);
    for oy in 0..size {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for ox in 0..size {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            let p00 = image.get(x + x0, y + y0);
            let p10 = image.get(x + x1, y + y0);
            let p01 = image.get(x + x0, y + y1);
            let p11 = image.get(x + x1, y + y1);
            let px = std::array::from_fn(|c| {
                if tx == 0.0 && ty == 0.0 {
                    p00[c]
                } else {
                    (1.0 - ty) * ((1.0 - tx) * p00[c] + tx * p10[c]) + ty * ((1.0 - tx) * p01[c] + tx * p11[c])
                }
            });
            out.set(ox, oy, px);
        }
    }
    Ok(out)
}
