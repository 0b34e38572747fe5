//! Two-subpass skeletonization followed by a cleanup that strips
//! staircase corners, so every skeleton pixel's neighbor count reads
//! directly as ending / ridge / bifurcation.

use crate::image::{BinaryImage, NEIGHBOR_OFFSETS};

/// Thins ridges to one pixel wide. The result never contains a 2x2 block
/// of ridge pixels.
pub fn thin(img: &BinaryImage) -> BinaryImage {
    let mut out = img.clone();
    loop {
        let a = subpass(&mut out, 0);
        let b = subpass(&mut out, 1);
        if !a && !b {
            break;
        }
    }
    while prune_redundant(&mut out) {}
    out
}

fn subpass(img: &mut BinaryImage, pass: usize) -> bool {
    let mut remove = Vec::new();
    for (x, y) in img.ridge_pixels() {
        // p[0..8] = N, NE, E, SE, S, SW, W, NW
        let p = img.neighbors(x, y);
        let b = p.iter().filter(|&&v| v).count();
        if !(2..=6).contains(&b) {
            continue;
        }
        let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
        if a != 1 {
            continue;
        }
        let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
        let keep = if pass == 0 {
            (n && e && s) || (e && s && w)
        } else {
            (n && e && w) || (n && s && w)
        };
        if !keep {
            remove.push((x, y));
        }
    }
    for &(x, y) in &remove {
        img.set(x, y, false);
    }
    !remove.is_empty()
}

/// Removes, in raster order, pixels whose ridge neighbors stay 8-connected
/// without them and which touch background on a 4-side. One pass; returns
/// whether anything changed.
fn prune_redundant(img: &mut BinaryImage) -> bool {
    let mut changed = false;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) && is_redundant(img, x, y) {
                img.set(x, y, false);
                changed = true;
            }
        }
    }
    changed
}

fn is_redundant(img: &BinaryImage, x: usize, y: usize) -> bool {
    let p = img.neighbors(x, y);
    let degree = p.iter().filter(|&&v| v).count();
    if degree < 2 || (p[0] && p[2] && p[4] && p[6]) {
        return false;
    }
    // connectivity of the ring pixels among themselves, ignoring the center
    let set: Vec<usize> = (0..8).filter(|&i| p[i]).collect();
    let mut reached = vec![set[0]];
    let mut frontier = vec![set[0]];
    while let Some(i) = frontier.pop() {
        let (ax, ay) = NEIGHBOR_OFFSETS[i];
        for &j in &set {
            if reached.contains(&j) {
                continue;
            }
            let (bx, by) = NEIGHBOR_OFFSETS[j];
            if (ax - bx).abs() <= 1 && (ay - by).abs() <= 1 {
                reached.push(j);
                frontier.push(j);
            }
        }
    }
    reached.len() == set.len()
}

/// True if some 2x2 window is entirely ridge.
pub fn has_square(img: &BinaryImage) -> bool {
    (0..img.height().saturating_sub(1)).any(|y| {
        (0..img.width().saturating_sub(1)).any(|x| {
            img.get(x, y) && img.get(x + 1, y) && img.get(x, y + 1) && img.get(x + 1, y + 1)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thick_bar_becomes_a_line() {
        let mut img = BinaryImage::new(40, 12);
        for y in 4..9 {
            for x in 3..37 {
                img.set(x, y, true);
            }
        }
        let t = thin(&img);
        assert!(!has_square(&t));
        assert_eq!(t.components(), 1);
        let ends = t
            .ridge_pixels()
            .filter(|&(x, y)| t.degree(x, y) == 1)
            .count();
        assert_eq!(ends, 2);
        assert!(t.ridge_pixels().all(|(x, y)| t.degree(x, y) <= 2));
    }

    #[test]
    fn staircase_corners_are_removed() {
        let img = BinaryImage::from_ascii(&[
            "........", //
            ".#......", ".##.....", "..##....", "...##...", "....#...", "........",
        ]);
        let t = thin(&img);
        assert_eq!(t.components(), 1);
        assert!(t.ridge_pixels().all(|(x, y)| t.degree(x, y) <= 2));
        assert_eq!(
            t.ridge_pixels()
                .filter(|&(x, y)| t.degree(x, y) == 1)
                .count(),
            2
        );
    }

    #[test]
    fn one_pixel_lines_are_left_alone() {
        let img = BinaryImage::from_ascii(&[
            "..........",
            "..#.......",
            "..#.......",
            "..#####...",
            "..#.......",
            "...#......",
            "....#.....",
        ]);
        let t = thin(&img);
        assert_eq!(t.components(), 1);
        // only the T corner goes; the junction moves onto the bar
        assert_eq!(t.count(), img.count() - 1);
        assert_eq!(
            t.ridge_pixels()
                .filter(|&(x, y)| t.degree(x, y) == 3)
                .count(),
            1
        );
        assert_eq!(
            t.ridge_pixels()
                .filter(|&(x, y)| t.degree(x, y) == 1)
                .count(),
            3
        );
    }

    #[test]
    fn annulus_becomes_a_closed_loop() {
        let mut img = BinaryImage::new(30, 30);
        for y in 0..30 {
            for x in 0..30 {
                let (dx, dy) = (x as f64 - 14.5, y as f64 - 14.5);
                let r2 = dx * dx + dy * dy;
                img.set(x, y, (36.0..144.0).contains(&r2));
            }
        }
        let t = thin(&img);
        assert_eq!(t.components(), 1);
        assert!(!has_square(&t));
        assert!(t.ridge_pixels().all(|(x, y)| t.degree(x, y) == 2));
    }
}
