//! Singular points from the Poincare index of the orientation field.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::orientation::OrientationField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoreKind {
    Whorl,
    Loop,
    Delta,
}

impl CoreKind {
    /// Preference when choosing the alignment anchor; lower wins.
    pub fn rank(self) -> u8 {
        match self {
            CoreKind::Whorl => 0,
            CoreKind::Loop => 1,
            CoreKind::Delta => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorePoint {
    pub x: f64,
    pub y: f64,
    pub kind: CoreKind,
    /// Ridge orientation at the core cell, in `[0, pi)`.
    pub theta: f64,
    pub row: usize,
    pub col: usize,
    /// Poincare sum at the chosen cell.
    pub index: f64,
}

pub const POINCARE_TOLERANCE: f64 = 0.3;

/// Wraps an orientation difference into `(-pi/2, pi/2]`.
pub fn wrap_difference(d: f64) -> f64 {
    let mut d = d.rem_euclid(PI);
    if d > FRAC_PI_2 {
        d -= PI;
    }
    d
}

/// The 8-neighborhood walked once around, in the direction of increasing
/// polar angle in image coordinates.
const RING: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Sum of wrapped orientation differences around the 8-neighborhood of an
/// interior cell.
pub fn poincare_sum(field: &OrientationField, row: usize, col: usize) -> f64 {
    let at = |i: usize| {
        let (dc, dr) = RING[i % 8];
        field.angle((row as isize + dr) as usize, (col as isize + dc) as usize)
    };
    (0..8).map(|i| wrap_difference(at(i + 1) - at(i))).sum()
}

pub fn classify(sum: f64) -> Option<CoreKind> {
    let near = |t: f64| (sum - t).abs() < POINCARE_TOLERANCE;
    if near(2.0 * PI) {
        Some(CoreKind::Whorl)
    } else if near(PI) {
        Some(CoreKind::Loop)
    } else if near(-PI) {
        Some(CoreKind::Delta)
    } else {
        None
    }
}

/// Classifies every interior cell, then collapses each 8-connected group of
/// flagged cells into one point. A singularity makes all cells whose ring
/// passes near it fire, so a group is represented by its strongest index,
/// at the cell closest to the centroid of the cells carrying that index.
pub fn detect_core_points(field: &OrientationField) -> Vec<CorePoint> {
    let (gw, gh) = (field.grid_w(), field.grid_h());
    if gw < 3 || gh < 3 {
        return Vec::new();
    }
    let mut hits: Vec<Option<(f64, CoreKind)>> = vec![None; gw * gh];
    for r in 1..gh - 1 {
        for c in 1..gw - 1 {
            let s = poincare_sum(field, r, c);
            hits[r * gw + c] = classify(s).map(|k| (s, k));
        }
    }
    let mut seen = vec![false; gw * gh];
    let mut out = Vec::new();
    for start in 0..hits.len() {
        if hits[start].is_none() || seen[start] {
            continue;
        }
        let mut group = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < group.len() {
            let (r, c) = ((group[i] / gw) as isize, (group[i] % gw) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || cc < 0 || rr >= gh as isize || cc >= gw as isize {
                        continue;
                    }
                    let j = rr as usize * gw + cc as usize;
                    if hits[j].is_some() && !seen[j] {
                        seen[j] = true;
                        group.push(j);
                    }
                }
            }
            i += 1;
        }
        out.push(represent(field, &hits, &group));
    }
    out
}

fn represent(
    field: &OrientationField,
    hits: &[Option<(f64, CoreKind)>],
    group: &[usize],
) -> CorePoint {
    let gw = field.grid_w();
    let strongest = group
        .iter()
        .map(|&i| hits[i].expect("grouped cells are hits").0.abs())
        .fold(0.0, f64::max);
    let mut top: Vec<usize> = group
        .iter()
        .copied()
        .filter(|&i| hits[i].expect("hit").0.abs() > strongest - POINCARE_TOLERANCE)
        .collect();
    top.sort_unstable();
    let n = top.len() as f64;
    let mr = top.iter().map(|&i| (i / gw) as f64).sum::<f64>() / n;
    let mc = top.iter().map(|&i| (i % gw) as f64).sum::<f64>() / n;
    let dist = |i: usize| ((i / gw) as f64 - mr).powi(2) + ((i % gw) as f64 - mc).powi(2);
    let best = top
        .iter()
        .copied()
        .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
        .expect("nonempty group");
    let (row, col) = (best / gw, best % gw);
    let (x, y) = field.block_center(row, col);
    let (index, kind) = hits[best].expect("hit");
    CorePoint {
        x,
        y,
        kind,
        theta: field.angle(row, col),
        row,
        col,
        index,
    }
}

/// Whorl before loop before delta, then nearest to `center`.
pub fn select_core(cores: &[CorePoint], center: (f64, f64)) -> Option<CorePoint> {
    let d2 = |p: &CorePoint| (p.x - center.0).powi(2) + (p.y - center.1).powi(2);
    cores
        .iter()
        .min_by(|a, b| {
            a.kind
                .rank()
                .cmp(&b.kind.rank())
                .then(d2(a).total_cmp(&d2(b)))
        })
        .copied()
}
