//! Rotation of minutiae into the core's reference frame.

use biokey_core::template::{Minutia, MinutiaTemplate};

use crate::error::Result;
use crate::singular::CorePoint;

/// Padding added around the aligned points to form the template bounds.
pub const ALIGN_MARGIN: f64 = 16.0;

/// `x' = cos(t)(x-cx) + sin(t)(y-cy)`, `y' = -sin(t)(x-cx) + cos(t)(y-cy)`.
pub fn rotate_about(m: &Minutia, cx: f64, cy: f64, theta: f64) -> Minutia {
    let (s, c) = theta.sin_cos();
    let (dx, dy) = (m.x - cx, m.y - cy);
    Minutia::new(c * dx + s * dy, -s * dx + c * dy, m.kind)
}

pub fn align_minutiae(minutiae: &[Minutia], core: &CorePoint) -> Result<MinutiaTemplate> {
    align_about(minutiae, core.x, core.y, core.theta)
}

pub fn align_about(minutiae: &[Minutia], cx: f64, cy: f64, theta: f64) -> Result<MinutiaTemplate> {
    let pts = minutiae
        .iter()
        .map(|m| rotate_about(m, cx, cy, theta))
        .collect();
    Ok(MinutiaTemplate::with_margin(pts, ALIGN_MARGIN)?)
}

/// Aligns about the centroid with no rotation, for prints without a core.
pub fn align_to_centroid(minutiae: &[Minutia]) -> Result<MinutiaTemplate> {
    if minutiae.is_empty() {
        return align_about(minutiae, 0.0, 0.0, 0.0);
    }
    let n = minutiae.len() as f64;
    let cx = minutiae.iter().map(|m| m.x).sum::<f64>() / n;
    let cy = minutiae.iter().map(|m| m.y).sum::<f64>() / n;
    align_about(minutiae, cx, cy, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use biokey_core::template::MinutiaKind::Ending;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn close(a: &Minutia, x: f64, y: f64) -> bool {
        (a.x - x).abs() < 1e-12 && (a.y - y).abs() < 1e-12
    }

    #[test]
    fn worked_rotations() {
        assert!(close(
            &rotate_about(&Minutia::new(5.0, 7.0, Ending), 0.0, 0.0, 0.0),
            5.0,
            7.0
        ));
        assert!(close(
            &rotate_about(&Minutia::new(1.0, 0.0, Ending), 0.0, 0.0, FRAC_PI_2),
            0.0,
            -1.0
        ));
        assert!(close(
            &rotate_about(&Minutia::new(3.0, 3.0, Ending), 2.0, 2.0, FRAC_PI_4),
            SQRT_2,
            0.0
        ));
    }

    #[test]
    fn empty_input_is_an_empty_template() {
        assert!(align_to_centroid(&[]).unwrap().is_empty());
    }

    #[test]
    fn centroid_alignment_centers_points() {
        let pts = [
            Minutia::new(10.0, 0.0, Ending),
            Minutia::new(20.0, 10.0, Ending),
        ];
        let t = align_to_centroid(&pts).unwrap();
        assert!(close(&t.minutiae()[0], -5.0, -5.0));
        assert!(t.bounds().contains(5.0, 5.0));
    }
}
