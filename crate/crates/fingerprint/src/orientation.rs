//! Block-wise ridge orientation by gradient least squares.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// One ridge angle per `block_size` block, in `[0, pi)`, measured from the
/// +x axis toward +y (image rows grow downward).
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    block_size: usize,
    grid_w: usize,
    grid_h: usize,
    angles: Vec<f64>,
}

/// Wraps any angle into `[0, pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

impl OrientationField {
    /// Builds a field from row-major angles, normalizing each into `[0, pi)`.
    pub fn from_angles(
        block_size: usize,
        grid_w: usize,
        grid_h: usize,
        angles: Vec<f64>,
    ) -> Result<Self> {
        if block_size == 0 || grid_w == 0 || grid_h == 0 || angles.len() != grid_w * grid_h {
            return Err(Error::Config(
                "orientation grid does not match angle count".into(),
            ));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("non-finite orientation".into()));
        }
        Ok(OrientationField {
            block_size,
            grid_w,
            grid_h,
            angles: angles.into_iter().map(normalize_angle).collect(),
        })
    }

    /// Samples `f(cx, cy)` at every block center.
    pub fn from_fn(
        block_size: usize,
        grid_w: usize,
        grid_h: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let angles = (0..grid_h)
            .flat_map(|r| (0..grid_w).map(move |c| (r, c)))
            .map(|(r, c)| {
                let (x, y) = block_center(block_size, r, c);
                f(x, y)
            })
            .collect();
        OrientationField::from_angles(block_size, grid_w, grid_h, angles)
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angle(&self, row: usize, col: usize) -> f64 {
        self.angles[row * self.grid_w + col]
    }

    /// Angle of the block containing pixel `(x, y)`, clamped to the grid.
    pub fn angle_at_pixel(&self, x: usize, y: usize) -> f64 {
        let r = (y / self.block_size).min(self.grid_h - 1);
        let c = (x / self.block_size).min(self.grid_w - 1);
        self.angle(r, c)
    }

    pub fn block_center(&self, row: usize, col: usize) -> (f64, f64) {
        block_center(self.block_size, row, col)
    }

    /// Averages doubled-angle vectors over each 3x3 block neighborhood.
    pub fn smoothed(&self) -> OrientationField {
        let mut out = self.clone();
        for r in 0..self.grid_h {
            for c in 0..self.grid_w {
                let (mut sx, mut sy) = (0.0, 0.0);
                for rr in r.saturating_sub(1)..(r + 2).min(self.grid_h) {
                    for cc in c.saturating_sub(1)..(c + 2).min(self.grid_w) {
                        let a = 2.0 * self.angle(rr, cc);
                        sx += a.cos();
                        sy += a.sin();
                    }
                }
                if sx.abs() + sy.abs() > 1e-12 {
                    out.angles[r * self.grid_w + c] = normalize_angle(0.5 * sy.atan2(sx));
                }
            }
        }
        out
    }
}

fn block_center(block_size: usize, row: usize, col: usize) -> (f64, f64) {
    let b = block_size as f64;
    ((col as f64 + 0.5) * b, (row as f64 + 0.5) * b)
}

/// Forward-difference gradients on the 2x2 cell anchored at each pixel, so
/// even a period-2 pattern has a nonzero response. The last row/column
/// repeat the edge.
pub(crate) fn gradients(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let at = |x: usize, y: usize| img.get(x.min(w - 1), y.min(h - 1)) as f64;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (a, b, c, d) = (at(x, y), at(x + 1, y), at(x, y + 1), at(x + 1, y + 1));
            gx[y * w + x] = 0.5 * ((b - a) + (d - c));
            gy[y * w + x] = 0.5 * ((c - a) + (d - b));
        }
    }
    (gx, gy)
}

pub fn estimate_orientation_field(img: &GrayImage, block_size: usize) -> Result<OrientationField> {
    if block_size < 4 {
        return Err(Error::Config(format!("block size {block_size} is below 4")));
    }
    let (w, h) = (img.width(), img.height());
    if w < block_size || h < block_size {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            block: block_size,
        });
    }
    let (gx, gy) = gradients(img);
    let grid_w = w.div_ceil(block_size);
    let grid_h = h.div_ceil(block_size);
    let mut angles = Vec::with_capacity(grid_w * grid_h);
    for r in 0..grid_h {
        for c in 0..grid_w {
            let (mut vx, mut vy) = (0.0, 0.0);
            for y in r * block_size..((r + 1) * block_size).min(h) {
                for x in c * block_size..((c + 1) * block_size).min(w) {
                    let (a, b) = (gx[y * w + x], gy[y * w + x]);
                    vx += 2.0 * a * b;
                    vy += a * a - b * b;
                }
            }
            // dominant gradient direction, ridges run perpendicular to it
            let grad = 0.5 * vx.atan2(vy);
            angles.push(normalize_angle(grad + FRAC_PI_2));
        }
    }
    OrientationField::from_angles(block_size, grid_w, grid_h, angles)
}

/// Smallest difference between two axial angles, in `[0, pi/2]`.
pub fn axial_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}
