//! Minutiae templates: the aligned biometric signal that enrollment and
//! matching consume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MinutiaKind {
    #[serde(rename = "E")]
    Ending,
    #[serde(rename = "B")]
    Bifurcation,
}

impl MinutiaKind {
    /// Byte used in canonical hash encodings.
    pub fn code(self) -> u8 {
        match self {
            MinutiaKind::Ending => 0,
            MinutiaKind::Bifurcation => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            MinutiaKind::Ending => MinutiaKind::Bifurcation,
            MinutiaKind::Bifurcation => MinutiaKind::Ending,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: f64, y: f64, kind: MinutiaKind) -> Self {
        Minutia { x, y, kind }
    }

    pub fn distance(&self, other: &Minutia) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle `[min_x, max_x] x [min_y, max_y]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let all_finite = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite());
        if !all_finite || max_x <= min_x || max_y <= min_y {
            return Err(Error::Format(format!(
                "degenerate bounds [{min_x}, {min_y}, {max_x}, {max_y}]"
            )));
        }
        Ok(Bounds {
            min_x,
            min_y,
            max_x,
            max_y,
        })
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x.clamp(self.min_x, self.max_x),
            y.clamp(self.min_y, self.max_y),
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.min_x, self.min_y, self.max_x, self.max_y]
    }
}

impl Serialize for Bounds {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bounds {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b, c, e] = <[f64; 4]>::deserialize(d)?;
        Bounds::new(a, b, c, e).map_err(serde::de::Error::custom)
    }
}

/// A set of minutiae together with the rectangle they live in.
///
/// Invariants: every minutia lies inside `bounds`, coordinates are finite,
/// and no two minutiae share the same `(x, y, kind)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinutiaTemplate {
    minutiae: Vec<Minutia>,
    bounds: Bounds,
}

impl MinutiaTemplate {
    pub fn new(minutiae: Vec<Minutia>, bounds: Bounds) -> Result<Self> {
        for m in &minutiae {
            if !m.x.is_finite() || !m.y.is_finite() {
                return Err(Error::Format("non-finite minutia coordinate".into()));
            }
            if !bounds.contains(m.x, m.y) {
                return Err(Error::Format(format!(
                    "minutia ({}, {}) outside template bounds",
                    m.x, m.y
                )));
            }
        }
        let mut keys: Vec<(u64, u64, MinutiaKind)> = minutiae
            .iter()
            .map(|m| (m.x.to_bits(), m.y.to_bits(), m.kind))
            .collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Format("duplicate minutia".into()));
        }
        Ok(MinutiaTemplate { minutiae, bounds })
    }

    /// Builds a template whose bounds are the bounding box of the points
    /// grown by `margin` on every side. An empty point set gets a
    /// `2*margin` square around the origin.
    pub fn with_margin(minutiae: Vec<Minutia>, margin: f64) -> Result<Self> {
        let margin = margin.max(0.5);
        let bounds = if minutiae.is_empty() {
            Bounds::new(-margin, -margin, margin, margin)?
        } else {
            let (mut lx, mut ly, mut hx, mut hy) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for m in &minutiae {
                lx = lx.min(m.x);
                ly = ly.min(m.y);
                hx = hx.max(m.x);
                hy = hy.max(m.y);
            }
            Bounds::new(lx - margin, ly - margin, hx + margin, hy + margin)?
        };
        MinutiaTemplate::new(minutiae, bounds)
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TemplateDoc {
            v: 1,
            bounds: self.bounds,
            minutiae: self.minutiae.clone(),
        })
        .expect("template serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TemplateDoc = serde_json::from_str(text)?;
        if doc.v != 1 {
            return Err(Error::Format(format!(
                "unsupported template version {}",
                doc.v
            )));
        }
        MinutiaTemplate::new(doc.minutiae, doc.bounds)
    }
}

#[derive(Serialize, Deserialize)]
struct TemplateDoc {
    v: u32,
    bounds: Bounds,
    minutiae: Vec<Minutia>,
}
