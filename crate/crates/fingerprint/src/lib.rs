//! Fingerprint preprocessing: orientation field, Gabor enhancement,
//! thinning, crossing-number minutiae, Poincare singular points and
//! core-relative alignment.
//!
//! ```no_run
//! use biokey_fingerprint::{extract_template, ExtractionConfig, GrayImage};
//!
//! let img = GrayImage::open("finger.png")?;
//! let template = extract_template(&img, &ExtractionConfig::default())?;
//! println!("{} minutiae", template.len());
//! # Ok::<(), biokey_fingerprint::Error>(())
//! ```

pub mod align;
pub mod enhance;
pub mod error;
pub mod image;
pub mod minutiae;
pub mod orientation;
pub mod pipeline;
pub mod singular;
pub mod synthetic;
pub mod thin;

pub use align::{align_minutiae, align_to_centroid};
pub use enhance::{enhance_and_thin, EnhancementConfig};
pub use error::{Error, Result};
pub use image::{BinaryImage, GrayImage};
pub use minutiae::{detect_minutiae, detect_minutiae_with, MinutiaeConfig};
pub use orientation::{estimate_orientation_field, OrientationField};
pub use pipeline::{extract, extract_template, Extraction, ExtractionConfig};
pub use singular::{detect_core_points, CoreKind, CorePoint};
