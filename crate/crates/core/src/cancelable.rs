//! Cartesian block transformation of minutiae templates, enrollment and
//! matching in the transformed domain.
//!
//! The template plane is cut into an `H x W` grid of blocks numbered 1..N in
//! row-major order. A 0/1 matrix `M` with exactly one 1 per column relocates
//! block `j` to block `f(j)`, the row of that 1, so `C' = C * M`. Minutiae
//! keep their offset inside the block. Several source blocks may collapse
//! onto one target block, which is what makes the map non-invertible without
//! the candidate's source blocks.
//!
//! Geometry runs on the quarter-pixel lattice used by [`hash_minutia`], so
//! block translations are exact integer shifts.

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::b64;
use crate::error::{Error, Result};
use crate::recovery::{
    build_recovery_bundle, fixed_point, hash_minutia, recover_master_candidates, sha256_parts,
    Digest32, ParityRates, RecoveryBundle,
};
use crate::template::{Bounds, Minutia, MinutiaKind, MinutiaTemplate};

/// Shared enrollment and matching settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateConfig {
    pub rows: usize,
    pub cols: usize,
    pub min_minutiae: usize,
    /// Matching radius in pixels.
    pub tau: f64,
    pub rates: ParityRates,
    /// How many candidate master hashes the matcher checks against the
    /// verifier before giving up.
    pub max_candidates: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            rows: 4,
            cols: 4,
            min_minutiae: 12,
            tau: 12.0,
            rates: ParityRates::default(),
            max_candidates: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransformParams {
    bounds: Bounds,
    rows: usize,
    cols: usize,
    /// `mapping[j - 1]` is the target block of source block `j` (1-based).
    mapping: Vec<usize>,
    seed: Option<u64>,
    // quarter-pixel lattice geometry derived from bounds
    origin_q: (i64, i64),
    cell_q: (i64, i64),
}

// the seed is not persisted, so it does not take part in equality
impl PartialEq for TransformParams {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds
            && self.rows == other.rows
            && self.cols == other.cols
            && self.mapping == other.mapping
    }
}

impl TransformParams {
    /// Builds parameters from an explicit block mapping (`f`, 1-based).
    pub fn from_mapping(
        bounds: Bounds,
        rows: usize,
        cols: usize,
        mapping: Vec<usize>,
    ) -> Result<Self> {
        let n = rows * cols;
        if rows == 0 || cols == 0 || n < 4 {
            return Err(Error::GridTooSmall(n));
        }
        if mapping.len() != n {
            return Err(Error::BadParams(format!(
                "mapping has {} entries, grid has {n}",
                mapping.len()
            )));
        }
        if let Some(bad) = mapping.iter().find(|&&t| t == 0 || t > n) {
            return Err(Error::BadParams(format!(
                "target block {bad} outside 1..={n}"
            )));
        }
        let q = |v: f64| (v * 4.0).round() as i64;
        let span_x = (q(bounds.max_x) - q(bounds.min_x)).max(1);
        let span_y = (q(bounds.max_y) - q(bounds.min_y)).max(1);
        let cell_x = (span_x + cols as i64 - 1) / cols as i64;
        let cell_y = (span_y + rows as i64 - 1) / rows as i64;
        Ok(TransformParams {
            bounds,
            rows,
            cols,
            mapping,
            seed: None,
            origin_q: (q(bounds.min_x), q(bounds.min_y)),
            cell_q: (cell_x, cell_y),
        })
    }

    /// Builds parameters from an `N x N` 0/1 matrix; every column must hold
    /// exactly one 1.
    pub fn from_matrix(
        bounds: Bounds,
        rows: usize,
        cols: usize,
        matrix: &[Vec<u8>],
    ) -> Result<Self> {
        let n = rows * cols;
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::BadParams(format!("matrix must be {n}x{n}")));
        }
        let mut mapping = Vec::with_capacity(n);
        for col in 0..n {
            let ones: Vec<usize> = matrix
                .iter()
                .enumerate()
                .filter(|(_, r)| r[col] != 0)
                .map(|(i, _)| i)
                .collect();
            if ones.len() != 1 || matrix[ones[0]][col] != 1 {
                return Err(Error::BadParams(format!(
                    "column {} must contain exactly one 1",
                    col + 1
                )));
            }
            mapping.push(ones[0] + 1);
        }
        TransformParams::from_mapping(bounds, rows, cols, mapping)
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `f(j)`: the block that source block `j` moves to.
    pub fn target_of(&self, source: usize) -> usize {
        self.mapping[source - 1]
    }

    /// The explicit 0/1 matrix `M`.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        let n = self.block_count();
        let mut m = vec![vec![0u8; n]; n];
        for (col, &row) in self.mapping.iter().enumerate() {
            m[row - 1][col] = 1;
        }
        m
    }

    /// Row vector times `M`, computed as a literal matrix product.
    pub fn multiply(&self, c: &[usize]) -> Vec<usize> {
        let m = self.matrix();
        (0..self.block_count())
            .map(|col| {
                c.iter()
                    .zip(&m)
                    .map(|(ci, row)| ci * row[col] as usize)
                    .sum()
            })
            .collect()
    }

    fn cell_index(q: i64, origin: i64, cell: i64, count: usize) -> usize {
        if q <= origin {
            return 0;
        }
        // half-open (lo, hi]: a point on a boundary goes to the lower cell
        let idx = (q - origin + cell - 1) / cell - 1;
        (idx.max(0) as usize).min(count - 1)
    }

    fn block_of_q(&self, qx: i64, qy: i64) -> usize {
        let col = Self::cell_index(qx, self.origin_q.0, self.cell_q.0, self.cols);
        let row = Self::cell_index(qy, self.origin_q.1, self.cell_q.1, self.rows);
        row * self.cols + col + 1
    }

    /// Top-left corner of block `b` in quarter-pixel units.
    fn block_origin_q(&self, block: usize) -> (i64, i64) {
        let row = ((block - 1) / self.cols) as i64;
        let col = ((block - 1) % self.cols) as i64;
        (
            self.origin_q.0 + col * self.cell_q.0,
            self.origin_q.1 + row * self.cell_q.1,
        )
    }

    /// Top-left corner of block `b` in pixels.
    pub fn block_origin(&self, block: usize) -> (f64, f64) {
        let (x, y) = self.block_origin_q(block);
        (x as f64 / 4.0, y as f64 / 4.0)
    }

    /// `(min_x, min_y, max_x, max_y)` of block `b` in pixels.
    pub fn block_rect(&self, block: usize) -> (f64, f64, f64, f64) {
        let (x, y) = self.block_origin(block);
        (
            x,
            y,
            x + self.cell_q.0 as f64 / 4.0,
            y + self.cell_q.1 as f64 / 4.0,
        )
    }

    fn shift_q(&self, from: usize, to: usize) -> (i64, i64) {
        let (fx, fy) = self.block_origin_q(from);
        let (tx, ty) = self.block_origin_q(to);
        (tx - fx, ty - fy)
    }
}

/// Row-major, 1-based block index of a point. Points outside the bounds
/// are clamped to the nearest edge block.
pub fn block_of(point: (f64, f64), params: &TransformParams) -> usize {
    params.block_of_q(fixed_point_i64(point.0), fixed_point_i64(point.1))
}

fn fixed_point_i64(v: f64) -> i64 {
    (v * 4.0).round() as i64
}

/// Draws a random block mapping. Deterministic in `seed`.
pub fn generate_transform(
    seed: u64,
    rows: usize,
    cols: usize,
    bounds: Bounds,
) -> Result<TransformParams> {
    let n = rows * cols;
    if n < 4 {
        return Err(Error::GridTooSmall(n));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mapping = (0..n).map(|_| rng.gen_range(1..=n)).collect();
    let mut params = TransformParams::from_mapping(bounds, rows, cols, mapping)?;
    params.seed = Some(seed);
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedMinutia {
    pub x: f64,
    pub y: f64,
    pub kind: MinutiaKind,
    pub target_block: usize,
    pub source_block: Option<usize>,
}

fn transform_one(m: &Minutia, params: &TransformParams, keep_source: bool) -> TransformedMinutia {
    let (qx, qy) = (fixed_point_i64(m.x), fixed_point_i64(m.y));
    let source = params.block_of_q(qx, qy);
    let target = params.target_of(source);
    let (dx, dy) = params.shift_q(source, target);
    TransformedMinutia {
        x: (qx + dx) as f64 / 4.0,
        y: (qy + dy) as f64 / 4.0,
        kind: m.kind,
        target_block: target,
        source_block: keep_source.then_some(source),
    }
}

/// Moves every minutia from its block `j` into block `f(j)`, keeping its
/// offset inside the block. Coordinates are snapped to quarter pixels.
pub fn apply_transform(
    tmpl: &MinutiaTemplate,
    params: &TransformParams,
    keep_source: bool,
) -> Vec<TransformedMinutia> {
    tmpl.minutiae()
        .iter()
        .map(|m| transform_one(m, params, keep_source))
        .collect()
}

/// Undoes the block move for a point claimed to come from
/// `claimed_source`.
pub fn reverse_point(
    p: &TransformedMinutia,
    claimed_source: usize,
    params: &TransformParams,
) -> Result<(f64, f64)> {
    let n = params.block_count();
    if claimed_source == 0 || claimed_source > n {
        return Err(Error::BadParams(format!(
            "block {claimed_source} outside 1..={n}"
        )));
    }
    let maps_to = params.target_of(claimed_source);
    if maps_to != p.target_block {
        return Err(Error::BlockClaimMismatch {
            claimed: claimed_source,
            maps_to,
            target: p.target_block,
        });
    }
    let (dx, dy) = params.shift_q(claimed_source, p.target_block);
    Ok((
        (fixed_point_i64(p.x) - dx) as f64 / 4.0,
        (fixed_point_i64(p.y) - dy) as f64 / 4.0,
    ))
}

/// A transformed minutia as persisted at enrollment: no source block, but
/// the position of its hash in its (hidden) source block's sorted hash list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoredMinutia {
    pub x: f64,
    pub y: f64,
    pub kind: MinutiaKind,
    #[serde(rename = "tb")]
    pub target_block: usize,
    #[serde(rename = "ix")]
    pub hash_index: usize,
}

impl StoredMinutia {
    fn as_transformed(&self) -> TransformedMinutia {
        TransformedMinutia {
            x: self.x,
            y: self.y,
            kind: self.kind,
            target_block: self.target_block,
            source_block: None,
        }
    }
}

/// The enrollment artifact. Holds no original-space coordinates, no source
/// blocks and no master hash.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredTemplate {
    pub transformed: Vec<StoredMinutia>,
    pub params: TransformParams,
    pub bundle: RecoveryBundle,
    pub verifier_salt: [u8; 16],
    pub verifier: Digest32,
    pub kdf_salt: [u8; 16],
}

pub fn verifier_digest(salt: &[u8; 16], master: &Digest32) -> Digest32 {
    sha256_parts(&[b"verify", salt, master.as_bytes()])
}

fn quantized(m: &Minutia) -> Minutia {
    Minutia::new(
        fixed_point(m.x) as f64 / 4.0,
        fixed_point(m.y) as f64 / 4.0,
        m.kind,
    )
}

/// Enrolls a template. Returns the storable registration and the master
/// hash, which the caller turns into a key and must not persist.
pub fn register<R: RngCore + CryptoRng>(
    tmpl: &MinutiaTemplate,
    seed: u64,
    cfg: &TemplateConfig,
    rng: &mut R,
) -> Result<(RegisteredTemplate, Digest32)> {
    if tmpl.len() < cfg.min_minutiae {
        return Err(Error::InsufficientMinutiae {
            have: tmpl.len(),
            need: cfg.min_minutiae,
        });
    }
    let params = generate_transform(seed, cfg.rows, cfg.cols, tmpl.bounds())?;
    let n = params.block_count();

    let mut per_block: Vec<Vec<(Digest32, usize)>> = vec![Vec::new(); n];
    let transformed = apply_transform(tmpl, &params, true);
    for (i, (m, t)) in tmpl.minutiae().iter().zip(&transformed).enumerate() {
        let source = t.source_block.expect("kept");
        per_block[source - 1].push((hash_minutia(&quantized(m)), i));
    }
    let mut hash_index = vec![0usize; tmpl.len()];
    let mut hashes: Vec<Vec<Digest32>> = Vec::with_capacity(n);
    for block in &mut per_block {
        block.sort_unstable();
        for (pos, (_, i)) in block.iter().enumerate() {
            hash_index[*i] = pos;
        }
        hashes.push(block.iter().map(|(h, _)| *h).collect());
    }
    let (bundle, master) = build_recovery_bundle(&hashes, cfg.rates)?;
    if bundle.exposes_master() {
        return Err(Error::WeakTemplate {
            public: bundle.public_blocks(),
            blocks: n,
        });
    }

    let mut stored: Vec<StoredMinutia> = transformed
        .iter()
        .zip(&hash_index)
        .map(|(t, &ix)| StoredMinutia {
            x: t.x,
            y: t.y,
            kind: t.kind,
            target_block: t.target_block,
            hash_index: ix,
        })
        .collect();
    // input order could leak the original layout
    stored.sort_by(|a, b| {
        (a.target_block, a.y, a.x, a.kind, a.hash_index)
            .partial_cmp(&(b.target_block, b.y, b.x, b.kind, b.hash_index))
            .expect("finite coordinates")
    });

    let mut verifier_salt = [0u8; 16];
    let mut kdf_salt = [0u8; 16];
    rng.fill_bytes(&mut verifier_salt);
    rng.fill_bytes(&mut kdf_salt);
    let reg = RegisteredTemplate {
        transformed: stored,
        params,
        bundle,
        verifier_salt,
        verifier: verifier_digest(&verifier_salt, &master),
        kdf_salt,
    };
    Ok((reg, master))
}

/// One matched pair from the per-block greedy assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub stored: usize,
    pub candidate: usize,
    pub distance: f64,
}

/// Greedy one-to-one pairing inside each target block: same kind, distance
/// at most `tau`, closest pairs first.
pub fn pair_minutiae(
    stored: &[StoredMinutia],
    candidate: &[TransformedMinutia],
    tau: f64,
) -> Vec<MatchedPair> {
    let mut edges: Vec<MatchedPair> = Vec::new();
    for (si, s) in stored.iter().enumerate() {
        for (ci, c) in candidate.iter().enumerate() {
            if s.target_block != c.target_block || s.kind != c.kind {
                continue;
            }
            let d = (s.x - c.x).hypot(s.y - c.y);
            if d <= tau {
                edges.push(MatchedPair {
                    stored: si,
                    candidate: ci,
                    distance: d,
                });
            }
        }
    }
    edges.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.stored.cmp(&b.stored))
            .then(a.candidate.cmp(&b.candidate))
    });
    let mut used_s = vec![false; stored.len()];
    let mut used_c = vec![false; candidate.len()];
    let mut out = Vec::new();
    for e in edges {
        if !used_s[e.stored] && !used_c[e.candidate] {
            used_s[e.stored] = true;
            used_c[e.candidate] = true;
            out.push(e);
        }
    }
    out
}

/// Matches a fresh template against a registration and regenerates the
/// master hash on success.
///
/// Each matched stored minutia is moved back using the candidate's source
/// block, hashed, and filed under that block at the stored hash index.
/// A pairing across colliding blocks produces a wrong hash; the bundle
/// decoder discards those when parity allows, and the verifier decides.
pub fn match_and_recover(
    reg: &RegisteredTemplate,
    candidate: &MinutiaTemplate,
    cfg: &TemplateConfig,
) -> Result<Digest32> {
    let params = &reg.params;
    let n = params.block_count();
    if reg.bundle.block_count() != n {
        return Err(Error::Format("bundle does not match the block grid".into()));
    }
    let cand = apply_transform(candidate, params, true);
    let pairs = pair_minutiae(&reg.transformed, &cand, cfg.tau);

    let mut known: Vec<Vec<(usize, Digest32)>> = vec![Vec::new(); n];
    for pair in pairs {
        let stored = &reg.transformed[pair.stored];
        let source = cand[pair.candidate].source_block.expect("kept");
        let (x, y) = reverse_point(&stored.as_transformed(), source, params)?;
        let h = hash_minutia(&Minutia::new(x, y, stored.kind));
        known[source - 1].push((stored.hash_index, h));
    }

    let candidates = recover_master_candidates(&known, &reg.bundle, cfg.max_candidates.max(1))?;
    candidates
        .into_iter()
        .find(|m| verifier_digest(&reg.verifier_salt, m) == reg.verifier)
        .ok_or(Error::NoMatch)
}

// ---- serialization ----

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    #[serde(rename = "H")]
    rows: usize,
    #[serde(rename = "W")]
    cols: usize,
    bounds: Bounds,
    #[serde(rename = "seed-omitted")]
    seed_omitted: bool,
    #[serde(rename = "M")]
    mapping: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RegisteredDoc {
    v: u32,
    params: ParamsDoc,
    minutiae: Vec<StoredMinutia>,
    bundle: RecoveryBundle,
    #[serde(with = "b64")]
    verifier_salt: [u8; 16],
    verifier: Digest32,
    #[serde(with = "b64")]
    kdf_salt: [u8; 16],
}

impl Serialize for RegisteredTemplate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RegisteredDoc {
            v: 1,
            params: ParamsDoc {
                rows: self.params.rows,
                cols: self.params.cols,
                bounds: self.params.bounds,
                seed_omitted: true,
                mapping: self.params.mapping.clone(),
            },
            minutiae: self.transformed.clone(),
            bundle: self.bundle.clone(),
            verifier_salt: self.verifier_salt,
            verifier: self.verifier,
            kdf_salt: self.kdf_salt,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegisteredTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = RegisteredDoc::deserialize(d)?;
        if doc.v != 1 {
            return Err(D::Error::custom(format!(
                "unsupported template version {}",
                doc.v
            )));
        }
        let p = doc.params;
        let params = TransformParams::from_mapping(p.bounds, p.rows, p.cols, p.mapping)
            .map_err(D::Error::custom)?;
        let n = params.block_count();
        if doc.bundle.blocks.len() != n {
            return Err(D::Error::custom("bundle block count differs from grid"));
        }
        if doc
            .minutiae
            .iter()
            .any(|m| m.target_block == 0 || m.target_block > n)
        {
            return Err(D::Error::custom(
                "stored minutia has an invalid target block",
            ));
        }
        Ok(RegisteredTemplate {
            transformed: doc.minutiae,
            params,
            bundle: doc.bundle,
            verifier_salt: doc.verifier_salt,
            verifier: doc.verifier,
            kdf_salt: doc.kdf_salt,
        })
    }
}

impl RegisteredTemplate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registered template serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
