//! Generated ridge images with known geometry, for tests and smoke runs.
//! Ridges are dark on a light background. Pixels are sampled at their
//! centers, so a pattern aligned to the grid keeps its zero crossings on
//! pixel boundaries.

use std::f64::consts::PI;

use crate::image::GrayImage;

fn shade(phase: f64) -> u8 {
    (127.5 + 127.5 * (2.0 * PI * phase).cos()).round() as u8
}

/// Straight ridges of the given period; `angle` is the ridge direction.
/// Ridge centers lie where the across-ridge coordinate is a half period.
pub fn parallel_ridges(width: usize, height: usize, period: f64, angle: f64) -> GrayImage {
    let (s, c) = angle.sin_cos();
    GrayImage::from_fn(width, height, |x, y| {
        let across = -(x as f64 + 0.5) * s + (y as f64 + 0.5) * c;
        shade(across / period)
    })
    .expect("nonzero size")
}

/// Concentric ridges around `(cx, cy)`.
pub fn concentric_ridges(width: usize, height: usize, period: f64, cx: f64, cy: f64) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        let r = (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy);
        shade(r / period)
    })
    .expect("nonzero size")
}

/// A whorl-like print: concentric ridges around the image center with
/// valley-colored gaps of radius `gap_radius` cut at each point of `gaps`,
/// which produces ridge endings there.
pub fn synthetic_print(
    size: usize,
    period: f64,
    gaps: &[(f64, f64)],
    gap_radius: f64,
) -> GrayImage {
    let c = size as f64 / 2.0;
    GrayImage::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
        if gaps
            .iter()
            .any(|&(gx, gy)| (fx - gx).hypot(fy - gy) < gap_radius)
        {
            return 255;
        }
        shade((fx - c).hypot(fy - c) / period)
    })
    .expect("nonzero size")
}
