//! Minutia hashing and the two-level recovery bundle.
//!
//! Every source block carries Reed-Solomon parity over the sorted SHA-256
//! hashes of the minutiae it contained at enrollment. The per-block digests
//! are in turn protected by an overall parity code, and the master hash is
//! the digest over all block digests. Only parity is stored, never the
//! hashes themselves.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::b64;
use crate::erasure::ReedSolomon;
use crate::error::{Error, Result};
use crate::template::Minutia;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest32(#[serde(with = "b64")] pub [u8; 32]);

impl Digest32 {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn from_slice(bytes: &[u8]) -> Self {
        let mut out = [0u8; 32];
        out.copy_from_slice(bytes);
        Digest32(out)
    }
}

impl std::fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Digest32({})", hex::encode(self.0))
    }
}

impl AsRef<[u8]> for Digest32 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn sha256_parts(parts: &[&[u8]]) -> Digest32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest32(h.finalize().into())
}

/// Canonical quarter-pixel fixed-point coordinate.
pub fn fixed_point(v: f64) -> i32 {
    (v * 4.0).round() as i32
}

/// SHA-256 over `"MIN1" || be32(round(4x)) || be32(round(4y)) || kind`.
pub fn hash_minutia(m: &Minutia) -> Digest32 {
    sha256_parts(&[
        b"MIN1",
        &fixed_point(m.x).to_be_bytes(),
        &fixed_point(m.y).to_be_bytes(),
        &[m.kind.code()],
    ])
}

pub fn block_digest(sorted_hashes: &[Digest32]) -> Digest32 {
    if sorted_hashes.is_empty() {
        return sha256_parts(&[b"BLK0"]);
    }
    let mut parts: Vec<&[u8]> = vec![b"BLK1"];
    parts.extend(sorted_hashes.iter().map(|h| h.0.as_slice()));
    sha256_parts(&parts)
}

pub fn master_digest(block_digests: &[Digest32]) -> Digest32 {
    let mut parts: Vec<&[u8]> = vec![b"ALL1"];
    parts.extend(block_digests.iter().map(|h| h.0.as_slice()));
    sha256_parts(&parts)
}

/// Parity sizing: `ceil(rate * count)` parity shards, at least one for a
/// non-empty block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityRates {
    pub block: f64,
    pub overall: f64,
}

impl Default for ParityRates {
    fn default() -> Self {
        ParityRates {
            block: 0.5,
            overall: 0.5,
        }
    }
}

impl ParityRates {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| r.is_finite() && r >= 0.0;
        if !ok(self.block) || !ok(self.overall) {
            return Err(Error::BadParams(
                "parity rates must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn block_parity(&self, m: usize) -> usize {
        if m == 0 {
            0
        } else {
            ((self.block * m as f64).ceil() as usize).max(1)
        }
    }

    pub fn overall_parity(&self, n_blocks: usize) -> usize {
        (self.overall * n_blocks as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockParity {
    pub m: usize,
    pub parity: Vec<Digest32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryBundle {
    pub blocks: Vec<BlockParity>,
    pub overall_parity: Vec<Digest32>,
}

impl RecoveryBundle {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Blocks whose digest follows from the stored parity alone: empty
    /// blocks, and blocks with at least as many parity shards as hashes.
    pub fn public_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.parity.len() >= b.m).count()
    }

    /// True when the public blocks plus the overall parity already pin
    /// down every block digest, i.e. the master hash needs no fingerprint.
    pub fn exposes_master(&self) -> bool {
        self.block_count() - self.public_blocks() <= self.overall_parity.len()
    }

    fn check_shape(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Format("bundle has no blocks".into()));
        }
        if self
            .blocks
            .iter()
            .any(|b| (b.m == 0) != b.parity.is_empty())
        {
            return Err(Error::Format(
                "block parity inconsistent with block size".into(),
            ));
        }
        Ok(())
    }
}

fn to_shards(hashes: &[Digest32]) -> Vec<Vec<u8>> {
    hashes.iter().map(|h| h.0.to_vec()).collect()
}

/// Builds the bundle from per-block minutia hashes (`per_block[b]` belongs to
/// block `b + 1`). Returns the bundle and the master hash.
pub fn build_recovery_bundle(
    per_block: &[Vec<Digest32>],
    rates: ParityRates,
) -> Result<(RecoveryBundle, Digest32)> {
    rates.validate()?;
    if per_block.is_empty() {
        return Err(Error::BadParams("no blocks".into()));
    }
    let mut blocks = Vec::with_capacity(per_block.len());
    let mut digests = Vec::with_capacity(per_block.len());
    for hashes in per_block {
        let mut sorted = hashes.clone();
        sorted.sort_unstable();
        let m = sorted.len();
        let parity = if m == 0 {
            Vec::new()
        } else {
            let set = ReedSolomon::new(m, rates.block_parity(m))?.encode(&to_shards(&sorted))?;
            set.parity()
                .into_iter()
                .map(|p| Digest32::from_slice(p.expect("fresh encode")))
                .collect()
        };
        blocks.push(BlockParity { m, parity });
        digests.push(block_digest(&sorted));
    }
    let overall = ReedSolomon::new(digests.len(), rates.overall_parity(digests.len()))?
        .encode(&to_shards(&digests))?;
    let overall_parity = overall
        .parity()
        .into_iter()
        .map(|p| Digest32::from_slice(p.expect("fresh encode")))
        .collect();
    Ok((
        RecoveryBundle {
            blocks,
            overall_parity,
        },
        master_digest(&digests),
    ))
}

/// Erasure-only recovery. `known[b]` lists `(canonical index, hash)` pairs
/// for block `b + 1`, all assumed correct.
pub fn recover_master_hash(
    known: &[Vec<(usize, Digest32)>],
    bundle: &RecoveryBundle,
) -> Result<Digest32> {
    bundle.check_shape()?;
    if known.len() != bundle.block_count() {
        return Err(Error::BadParams(
            "known hashes do not cover the block grid".into(),
        ));
    }
    let n = bundle.block_count();
    let mut present: Vec<(usize, Digest32)> = Vec::new();
    for (b, (block, entries)) in bundle.blocks.iter().zip(known).enumerate() {
        if let Some(d) = recover_block_exact(block, entries)? {
            present.push((b, d));
        }
    }
    for (i, p) in bundle.overall_parity.iter().enumerate() {
        present.push((n + i, *p));
    }
    let codec = ReedSolomon::new(n, bundle.overall_parity.len())?;
    let refs: Vec<(usize, &[u8])> = present.iter().map(|(i, d)| (*i, d.0.as_slice())).collect();
    match codec.reconstruct(&refs) {
        Ok(digests) => {
            let digests: Vec<Digest32> = digests.iter().map(|d| Digest32::from_slice(d)).collect();
            Ok(master_digest(&digests))
        }
        Err(Error::InsufficientShards { .. }) => Err(Error::RecoveryFailed),
        Err(e) => Err(e),
    }
}

fn recover_block_exact(
    block: &BlockParity,
    entries: &[(usize, Digest32)],
) -> Result<Option<Digest32>> {
    if block.m == 0 {
        return Ok(Some(block_digest(&[])));
    }
    let mut shards: Vec<(usize, &[u8])> = Vec::new();
    for (ix, h) in entries {
        if *ix >= block.m {
            return Err(Error::BadParams(format!(
                "hash index {ix} beyond block size {}",
                block.m
            )));
        }
        shards.push((*ix, h.0.as_slice()));
    }
    for (i, p) in block.parity.iter().enumerate() {
        shards.push((block.m + i, p.0.as_slice()));
    }
    let codec = ReedSolomon::new(block.m, block.parity.len())?;
    match codec.reconstruct(&shards) {
        Ok(data) => {
            let hashes: Vec<Digest32> = data.iter().map(|d| Digest32::from_slice(d)).collect();
            Ok(Some(block_digest(&hashes)))
        }
        Err(Error::InsufficientShards { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Upper bound on subset decodes attempted per code by the tolerant decoder.
pub const DECODE_BUDGET: usize = 4096;

/// One consistent decoding of a code: the data shards and how many of the
/// untrusted inputs agree with it.
#[derive(Debug, Clone)]
struct Decoding {
    data: Vec<Vec<u8>>,
    support: usize,
}

/// Decodes a code where `trusted` shards are known-good (stored parity) and
/// `untrusted` shards may carry wrong values. Every subset of untrusted shards
/// that completes the trusted ones to a full rank set is decoded; the
/// resulting codewords are ranked by how many untrusted shards they explain.
/// Returns `(candidates, confirmed)` where `confirmed` means the best
/// codeword is supported by at least one shard beyond the minimum needed.
fn decode_tolerant(
    codec: &ReedSolomon,
    trusted: &[(usize, Vec<u8>)],
    untrusted: &[(usize, Vec<u8>)],
) -> (Vec<Decoding>, bool) {
    let n = codec.data_count();
    if trusted.len() >= n {
        let refs: Vec<(usize, &[u8])> = trusted.iter().map(|(i, s)| (*i, s.as_slice())).collect();
        return match codec.reconstruct(&refs) {
            Ok(data) => (vec![Decoding { data, support: 0 }], true),
            Err(_) => (Vec::new(), false),
        };
    }
    let need = n - trusted.len();
    let mut pool: Vec<(usize, Vec<u8>)> = untrusted
        .iter()
        .filter(|(i, _)| *i < codec.total_count() && trusted.iter().all(|(t, _)| t != i))
        .cloned()
        .collect();
    pool.sort();
    pool.dedup();
    let mut distinct: Vec<usize> = pool.iter().map(|(i, _)| *i).collect();
    distinct.dedup();
    if distinct.len() < need {
        return (Vec::new(), false);
    }

    let support_of = |data: &[Vec<u8>]| {
        pool.iter()
            .filter(|(i, s)| {
                if *i < n {
                    data[*i] == *s
                } else {
                    codec.encode_row(*i, data) == *s
                }
            })
            .count()
    };

    let mut found: Vec<Decoding> = Vec::new();
    let mut chosen: Vec<usize> = Vec::with_capacity(need);
    let mut budget = DECODE_BUDGET;
    // depth-first over combinations of pool entries with distinct indices
    fn walk(
        start: usize,
        need: usize,
        pool: &[(usize, Vec<u8>)],
        chosen: &mut Vec<usize>,
        budget: &mut usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if *budget == 0 {
            return;
        }
        if chosen.len() == need {
            *budget -= 1;
            visit(chosen);
            return;
        }
        for p in start..pool.len() {
            if pool.len() - p < need - chosen.len() {
                break;
            }
            if chosen.iter().any(|&c| pool[c].0 == pool[p].0) {
                continue;
            }
            chosen.push(p);
            walk(p + 1, need, pool, chosen, budget, visit);
            chosen.pop();
        }
    }
    let mut visit = |combo: &[usize]| {
        let mut refs: Vec<(usize, &[u8])> =
            trusted.iter().map(|(i, s)| (*i, s.as_slice())).collect();
        refs.extend(combo.iter().map(|&c| (pool[c].0, pool[c].1.as_slice())));
        if let Ok(data) = codec.reconstruct(&refs) {
            if found.iter().all(|d| d.data != data) {
                let support = support_of(&data);
                found.push(Decoding { data, support });
            }
        }
    };
    walk(0, need, &pool, &mut chosen, &mut budget, &mut visit);
    // stable: ties keep enumeration order
    found.sort_by_key(|d| std::cmp::Reverse(d.support));
    let confirmed = found.first().is_some_and(|d| d.support > need)
        && found.get(1).is_none_or(|d| d.support < found[0].support);
    (found, confirmed)
}

/// Recovery from possibly-wrong hash claims, as produced by the matcher when
/// a block collision reverses a stored minutia into the wrong source block.
/// Returns candidate master hashes, most plausible first, at most `limit`.
pub fn recover_master_candidates(
    known: &[Vec<(usize, Digest32)>],
    bundle: &RecoveryBundle,
    limit: usize,
) -> Result<Vec<Digest32>> {
    bundle.check_shape()?;
    if known.len() != bundle.block_count() {
        return Err(Error::BadParams(
            "known hashes do not cover the block grid".into(),
        ));
    }
    let n = bundle.block_count();
    let mut trusted: Vec<(usize, Vec<u8>)> = Vec::new();
    let mut untrusted: Vec<(usize, Vec<u8>)> = Vec::new();
    for (b, (block, entries)) in bundle.blocks.iter().zip(known).enumerate() {
        if block.m == 0 {
            trusted.push((b, block_digest(&[]).0.to_vec()));
            continue;
        }
        let codec = ReedSolomon::new(block.m, block.parity.len())?;
        let parity: Vec<(usize, Vec<u8>)> = block
            .parity
            .iter()
            .enumerate()
            .map(|(i, p)| (block.m + i, p.0.to_vec()))
            .collect();
        let claims: Vec<(usize, Vec<u8>)> = entries
            .iter()
            .filter(|(ix, _)| *ix < block.m)
            .map(|(ix, h)| (*ix, h.0.to_vec()))
            .collect();
        let (decodings, confirmed) = decode_tolerant(&codec, &parity, &claims);
        let digest_of = |d: &Decoding| {
            let hashes: Vec<Digest32> = d.data.iter().map(|s| Digest32::from_slice(s)).collect();
            block_digest(&hashes).0.to_vec()
        };
        if confirmed {
            trusted.push((b, digest_of(&decodings[0])));
        } else {
            untrusted.extend(decodings.iter().map(|d| (b, digest_of(d))));
        }
    }
    for (i, p) in bundle.overall_parity.iter().enumerate() {
        trusted.push((n + i, p.0.to_vec()));
    }
    let codec = ReedSolomon::new(n, bundle.overall_parity.len())?;
    let (decodings, _) = decode_tolerant(&codec, &trusted, &untrusted);
    if decodings.is_empty() {
        return Err(Error::RecoveryFailed);
    }
    Ok(decodings
        .iter()
        .take(limit)
        .map(|d| {
            let digests: Vec<Digest32> = d.data.iter().map(|s| Digest32::from_slice(s)).collect();
            master_digest(&digests)
        })
        .collect())
}
