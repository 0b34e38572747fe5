//! Crossing-number minutiae on a thinned skeleton.

use biokey_core::template::{Minutia, MinutiaKind};

use crate::image::{BinaryImage, NEIGHBOR_OFFSETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinutiaeConfig {
    /// Pixels this close to the image edge are ignored.
    pub margin: usize,
    /// Endings whose ridge reaches another ending or a junction in fewer
    /// pixels than this are dropped as spurs. Zero disables the filter.
    pub min_ridge_len: usize,
}

impl Default for MinutiaeConfig {
    fn default() -> Self {
        MinutiaeConfig {
            margin: 8,
            min_ridge_len: 6,
        }
    }
}

pub fn detect_minutiae(skel: &BinaryImage) -> Vec<Minutia> {
    detect_minutiae_with(skel, &MinutiaeConfig::default())
}

/// Emits an ending for each ridge pixel with exactly one ridge neighbor and
/// a bifurcation for each with exactly three, in raster order.
pub fn detect_minutiae_with(skel: &BinaryImage, cfg: &MinutiaeConfig) -> Vec<Minutia> {
    let (w, h) = (skel.width(), skel.height());
    let inside = |x: usize, y: usize| {
        x >= cfg.margin && y >= cfg.margin && x + cfg.margin < w && y + cfg.margin < h
    };
    skel.ridge_pixels()
        .filter(|&(x, y)| inside(x, y))
        .filter_map(|(x, y)| match skel.degree(x, y) {
            1 if !is_spur(skel, x, y, cfg.min_ridge_len) => {
                Some(Minutia::new(x as f64, y as f64, MinutiaKind::Ending))
            }
            3 => Some(Minutia::new(x as f64, y as f64, MinutiaKind::Bifurcation)),
            _ => None,
        })
        .collect()
}

/// Walks from the ending at `(x, y)` along degree-2 pixels and reports
/// whether the ridge stops within `min_len` pixels.
fn is_spur(skel: &BinaryImage, x: usize, y: usize, min_len: usize) -> bool {
    if min_len == 0 {
        return false;
    }
    let mut prev: Option<(usize, usize)> = None;
    let mut cur = (x, y);
    let mut len = 1;
    loop {
        let next = NEIGHBOR_OFFSETS.iter().find_map(|&(dx, dy)| {
            let (nx, ny) = (cur.0 as isize + dx, cur.1 as isize + dy);
            let p = (nx as usize, ny as usize);
            (skel.get_signed(nx, ny) && Some(p) != prev).then_some(p)
        });
        let Some(next) = next else {
            // isolated pixel or end of an open segment
            return len < min_len;
        };
        prev = Some(cur);
        cur = next;
        match skel.degree(cur.0, cur.1) {
            2 => len += 1,
            1 => return len + 1 < min_len,
            _ => return len < min_len,
        }
        if len >= min_len {
            return false;
        }
    }
}
