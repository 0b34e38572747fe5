//! Ridge frequency estimation, oriented Gabor filtering and binarization.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::{BinaryImage, GrayImage};
use crate::orientation::OrientationField;
use crate::thin::thin;

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementConfig {
    pub block_size: usize,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Filtered responses above this are ridge.
    pub threshold: f64,
    /// Accepted ridge period range in pixels.
    pub min_period: f64,
    pub max_period: f64,
    /// Blocks whose intensity standard deviation falls below this are
    /// background and skipped.
    pub background_std: f64,
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        EnhancementConfig {
            block_size: 16,
            sigma_x: 4.0,
            sigma_y: 4.0,
            threshold: 0.0,
            min_period: 3.0,
            max_period: 25.0,
            background_std: 10.0,
        }
    }
}

impl EnhancementConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.block_size >= 4
            && self.sigma_x > 0.0
            && self.sigma_y > 0.0
            && self.min_period >= 2.0
            && self.max_period > self.min_period
            && self.background_std >= 0.0
            && self.threshold.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{self:?}")))
        }
    }
}

/// Per-block ridge frequency (cycles per pixel); `None` marks background.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMap {
    pub freqs: Vec<Option<f64>>,
    pub failed: usize,
    pub foreground: usize,
}

/// Intensities inverted (ridges dark on input become positive) and scaled
/// to zero mean, unit variance over the whole image.
fn normalize(img: &GrayImage) -> Option<Vec<f64>> {
    let n = img.pixels().len() as f64;
    let mean = img.pixels().iter().map(|&p| p as f64).sum::<f64>() / n;
    let var = img
        .pixels()
        .iter()
        .map(|&p| (p as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    if var < 1e-9 {
        return None;
    }
    let sd = var.sqrt();
    Some(
        img.pixels()
            .iter()
            .map(|&p| (mean - p as f64) / sd)
            .collect(),
    )
}

fn block_std(img: &GrayImage, bs: usize, r: usize, c: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let (mut s, mut s2, mut n) = (0.0, 0.0, 0.0);
    for y in r * bs..((r + 1) * bs).min(h) {
        for x in c * bs..((c + 1) * bs).min(w) {
            let v = img.get(x, y) as f64;
            s += v;
            s2 += v * v;
            n += 1.0;
        }
    }
    let mean = s / n;
    (s2 / n - mean * mean).max(0.0).sqrt()
}

/// Projects an oriented window onto the ridge normal and measures the mean
/// distance between peaks of that signature.
fn block_frequency(
    norm: &[f64],
    w: usize,
    h: usize,
    center: (f64, f64),
    theta: f64,
    bs: usize,
    cfg: &EnhancementConfig,
) -> Option<f64> {
    let (dx, dy) = (theta.cos(), theta.sin());
    let (nx, ny) = (-dy, dx);
    let len = 2 * bs;
    let half_w = bs as f64 / 2.0;
    let mut sig = Vec::with_capacity(len);
    for k in 0..len {
        let off = k as f64 - len as f64 / 2.0;
        let (mut sum, mut cnt) = (0.0, 0);
        let mut t = -half_w;
        while t < half_w {
            let x = (center.0 + off * nx + t * dx).round();
            let y = (center.1 + off * ny + t * dy).round();
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                sum += norm[y as usize * w + x as usize];
                cnt += 1;
            }
            t += 1.0;
        }
        sig.push(if cnt > 0 {
            Some(sum / cnt as f64)
        } else {
            None
        });
    }
    // keep the longest run of samples that fell inside the image
    let sig: Vec<f64> = sig.into_iter().flatten().collect();
    if sig.len() < 5 {
        return None;
    }
    let smooth: Vec<f64> = (0..sig.len())
        .map(|i| {
            let a = sig[i.saturating_sub(1)];
            let b = sig[(i + 1).min(sig.len() - 1)];
            0.25 * a + 0.5 * sig[i] + 0.25 * b
        })
        .collect();
    let mean = smooth.iter().sum::<f64>() / smooth.len() as f64;
    let (lo, hi) = smooth
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < 0.1 {
        return None;
    }
    let peaks: Vec<usize> = (1..smooth.len() - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1] && smooth[i] > mean)
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    let period = (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64;
    // a ridge pattern has evenly spaced peaks; texture noise does not
    let spread = peaks
        .windows(2)
        .map(|p| ((p[1] - p[0]) as f64 - period).powi(2))
        .sum::<f64>()
        / (peaks.len() - 1) as f64;
    if spread.sqrt() > MAX_SPACING_SPREAD * period {
        return None;
    }
    (cfg.min_period..=cfg.max_period)
        .contains(&period)
        .then(|| 1.0 / period)
}

fn frequency_map(
    img: &GrayImage,
    norm: &[f64],
    field: &OrientationField,
    cfg: &EnhancementConfig,
) -> FrequencyMap {
    let bs = field.block_size();
    let (w, h) = (img.width(), img.height());
    let mut freqs = Vec::with_capacity(field.grid_w() * field.grid_h());
    let (mut failed, mut foreground) = (0, 0);
    for r in 0..field.grid_h() {
        for c in 0..field.grid_w() {
            if block_std(img, bs, r, c) < cfg.background_std {
                freqs.push(None);
                continue;
            }
            foreground += 1;
            let f = block_frequency(
                norm,
                w,
                h,
                field.block_center(r, c),
                field.angle(r, c),
                bs,
                cfg,
            );
            if f.is_none() {
                failed += 1;
            }
            freqs.push(f.or(Some(f64::NAN)));
        }
    }
    FrequencyMap {
        freqs,
        failed,
        foreground,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

const ANGLE_BINS: usize = 90;

/// Largest tolerated standard deviation of peak spacing, relative to the
/// mean spacing.
const MAX_SPACING_SPREAD: f64 = 0.25;

struct Kernel {
    radius: isize,
    weights: Vec<f64>,
}

fn gabor_kernel(theta: f64, freq: f64, cfg: &EnhancementConfig) -> Kernel {
    let radius = (3.0 * cfg.sigma_x.max(cfg.sigma_y)).ceil() as isize;
    let (s, c) = theta.sin_cos();
    let mut weights = Vec::with_capacity(((2 * radius + 1) * (2 * radius + 1)) as usize);
    for v in -radius..=radius {
        for u in -radius..=radius {
            let (u, v) = (u as f64, v as f64);
            // across the ridge, then along it
            let xr = -u * s + v * c;
            let yr = u * c + v * s;
            let env = (-0.5
                * (xr * xr / (cfg.sigma_x * cfg.sigma_x) + yr * yr / (cfg.sigma_y * cfg.sigma_y)))
                .exp();
            weights.push(env * (2.0 * PI * freq * xr).cos());
        }
    }
    Kernel { radius, weights }
}

/// Gabor-filters, binarizes and thins `img`. Background blocks stay empty;
/// an image with no foreground at all yields an empty result.
pub fn enhance_and_thin(
    img: &GrayImage,
    field: &OrientationField,
    cfg: &EnhancementConfig,
) -> Result<BinaryImage> {
    Ok(thin(&enhance(img, field, cfg)?))
}

/// The binarized ridge map before thinning.
pub fn enhance(
    img: &GrayImage,
    field: &OrientationField,
    cfg: &EnhancementConfig,
) -> Result<BinaryImage> {
    cfg.validate()?;
    let (w, h) = (img.width(), img.height());
    let bs = field.block_size();
    if bs != cfg.block_size || field.grid_w() != w.div_ceil(bs) || field.grid_h() != h.div_ceil(bs)
    {
        return Err(Error::Config(
            "orientation field does not match the image".into(),
        ));
    }
    let mut out = BinaryImage::new(w, h);
    let Some(norm) = normalize(img) else {
        return Ok(out);
    };
    let fmap = frequency_map(img, &norm, field, cfg);
    if fmap.foreground == 0 {
        return Ok(out);
    }
    if fmap.failed * 2 > fmap.foreground {
        return Err(Error::UnusableImage {
            failed: fmap.failed,
            total: fmap.foreground,
        });
    }
    let fill = median(
        fmap.freqs
            .iter()
            .flatten()
            .copied()
            .filter(|f| !f.is_nan())
            .collect(),
    );

    let mut cache: HashMap<(usize, i64), Kernel> = HashMap::new();
    let gw = field.grid_w();
    for r in 0..field.grid_h() {
        for c in 0..gw {
            let Some(f) = fmap.freqs[r * gw + c] else {
                continue;
            };
            let f = if f.is_nan() { fill } else { f };
            let bin = ((field.angle(r, c) / PI * ANGLE_BINS as f64).round() as usize) % ANGLE_BINS;
            let fkey = (f * 1000.0).round() as i64;
            let kernel = cache.entry((bin, fkey)).or_insert_with(|| {
                gabor_kernel(
                    bin as f64 * PI / ANGLE_BINS as f64,
                    fkey as f64 / 1000.0,
                    cfg,
                )
            });
            for y in r * bs..((r + 1) * bs).min(h) {
                for x in c * bs..((c + 1) * bs).min(w) {
                    let resp = convolve_at(&norm, w, h, x, y, kernel);
                    out.set(x, y, resp > cfg.threshold);
                }
            }
        }
    }
    Ok(out)
}

fn convolve_at(norm: &[f64], w: usize, h: usize, x: usize, y: usize, k: &Kernel) -> f64 {
    let r = k.radius;
    let side = (2 * r + 1) as usize;
    let mut acc = 0.0;
    for (j, v) in (-r..=r).enumerate() {
        let yy = (y as isize + v).clamp(0, h as isize - 1) as usize;
        let row = &norm[yy * w..(yy + 1) * w];
        let kr = &k.weights[j * side..(j + 1) * side];
        for (i, u) in (-r..=r).enumerate() {
            let xx = (x as isize + u).clamp(0, w as isize - 1) as usize;
            acc += kr[i] * row[xx];
        }
    }
    acc
}
