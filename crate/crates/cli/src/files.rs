//! File helpers: inputs by extension and all-or-nothing outputs.

use std::io::Write;
use std::path::Path;

use biokey_core::template::MinutiaTemplate;
use biokey_fingerprint::{extract_template, ExtractionConfig, GrayImage};

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path.display(), e))
}

/// A `.json` input is a minutiae template; anything else is decoded as a
/// fingerprint image and run through extraction.
pub fn load_template(path: &Path) -> Result<MinutiaTemplate, CliError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        return Ok(MinutiaTemplate::from_json(&read_text(path)?)?);
    }
    let img = GrayImage::open(path)?;
    Ok(extract_template(&img, &ExtractionConfig::default())?)
}

/// Writes through a temp file in the target directory and renames it into
/// place, so the destination either holds the full content or is untouched.
/// The temp file is created owner-only.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir.display(), e))?;
    tmp.write_all(content)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::io(path.display(), e))?;
    tmp.persist(path)
        .map_err(|e| CliError::io(path.display(), e.error))?;
    Ok(())
}

/// Key files hold the 32-byte private key as 64 hex digits.
pub fn write_key(path: &Path, key: &[u8]) -> Result<(), CliError> {
    write_atomic(path, format!("{}\n", hex::encode(key)).as_bytes())
}
