//! Byte-wise Shamir secret sharing over GF(256).
//!
//! Each secret byte is the constant term of its own random polynomial of
//! degree `k - 1`; share `i` holds the evaluations at `x = i`. Shares carry a
//! checksum so a steward that returns altered bytes is identified instead
//! of silently corrupting the interpolation.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::encoding::{b64, hex16};
use crate::error::{Error, Result};
use crate::gf256::{gf_div, gf_mul};
use crate::recovery::{sha256_parts, Digest32};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShareDoc", into = "ShareDoc")]
pub struct Share {
    pub recovery_id: [u8; 16],
    pub x: u8,
    pub n: u8,
    pub k: u8,
    pub payload: Vec<u8>,
    pub checksum: Digest32,
}

pub fn share_checksum(recovery_id: &[u8; 16], x: u8, payload: &[u8]) -> Digest32 {
    sha256_parts(&[recovery_id, &[x], payload])
}

impl Share {
    pub fn checksum_ok(&self) -> bool {
        share_checksum(&self.recovery_id, self.x, &self.payload) == self.checksum
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("share serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn recovery_id_hex(&self) -> String {
        hex::encode(self.recovery_id)
    }
}

/// `{"v":1,"rid":hex16,"x":int,"n":int,"k":int,"payload":b64,"sum":b64}`
#[derive(Serialize, Deserialize)]
struct ShareDoc {
    v: u32,
    #[serde(with = "hex16")]
    rid: [u8; 16],
    x: u8,
    n: u8,
    k: u8,
    #[serde(with = "b64")]
    payload: Vec<u8>,
    sum: Digest32,
}

impl From<Share> for ShareDoc {
    fn from(s: Share) -> Self {
        ShareDoc {
            v: 1,
            rid: s.recovery_id,
            x: s.x,
            n: s.n,
            k: s.k,
            payload: s.payload,
            sum: s.checksum,
        }
    }
}

impl TryFrom<ShareDoc> for Share {
    type Error = String;

    fn try_from(d: ShareDoc) -> std::result::Result<Self, String> {
        if d.v != 1 {
            return Err(format!("unsupported share version {}", d.v));
        }
        if d.x == 0 || d.k == 0 || d.k > d.n {
            return Err("share parameters out of range".into());
        }
        Ok(Share {
            recovery_id: d.rid,
            x: d.x,
            n: d.n,
            k: d.k,
            payload: d.payload,
            checksum: d.sum,
        })
    }
}

fn check_params(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n || n > 255 {
        return Err(Error::BadParams(format!(
            "need 1 <= k <= n <= 255, got n={n} k={k}"
        )));
    }
    Ok(())
}

/// Horner evaluation of `coeffs[0] + coeffs[1] x + ...` at `x`.
pub fn eval_poly(coeffs: &[u8], x: u8) -> u8 {
    coeffs.iter().rev().fold(0u8, |acc, &c| gf_mul(acc, x) ^ c)
}

/// Splits `secret` into `n` shares, any `k` of which reconstruct it.
pub fn split<R: RngCore + CryptoRng>(
    secret: &[u8],
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Share>> {
    check_params(n, k)?;
    if secret.is_empty() {
        return Err(Error::BadParams("secret is empty".into()));
    }
    let mut recovery_id = [0u8; 16];
    rng.fill_bytes(&mut recovery_id);
    let mut payloads = vec![Vec::with_capacity(secret.len()); n];
    let mut coeffs = vec![0u8; k];
    for &byte in secret {
        coeffs[0] = byte;
        rng.fill_bytes(&mut coeffs[1..]);
        for (i, p) in payloads.iter_mut().enumerate() {
            p.push(eval_poly(&coeffs, (i + 1) as u8));
        }
    }
    coeffs.iter_mut().for_each(|c| *c = 0);
    Ok(payloads
        .into_iter()
        .enumerate()
        .map(|(i, payload)| {
            let x = (i + 1) as u8;
            Share {
                recovery_id,
                x,
                n: n as u8,
                k: k as u8,
                checksum: share_checksum(&recovery_id, x, &payload),
                payload,
            }
        })
        .collect())
}

/// Interpolates the secret from at least `k` consistent shares, using the
/// `k` with the lowest `x`.
pub fn recover(shares: &[Share]) -> Result<Vec<u8>> {
    let first = shares
        .first()
        .ok_or(Error::BelowThreshold { have: 0, need: 1 })?;
    for s in shares {
        if !s.checksum_ok() {
            return Err(Error::CorruptShare(s.x));
        }
    }
    if shares.iter().any(|s| {
        s.recovery_id != first.recovery_id
            || s.n != first.n
            || s.k != first.k
            || s.payload.len() != first.payload.len()
    }) {
        return Err(Error::MixedSets);
    }
    let mut chosen: Vec<&Share> = shares.iter().collect();
    chosen.sort_by_key(|s| s.x);
    chosen.dedup_by(|a, b| a.x == b.x && a.payload == b.payload);
    if chosen.windows(2).any(|w| w[0].x == w[1].x) {
        return Err(Error::MixedSets);
    }
    let k = first.k as usize;
    if chosen.len() < k {
        return Err(Error::BelowThreshold {
            have: chosen.len(),
            need: k,
        });
    }
    chosen.truncate(k);

    // Lagrange basis at zero: l_i(0) = prod_{j != i} x_j / (x_j - x_i)
    let basis: Vec<u8> = chosen
        .iter()
        .enumerate()
        .map(|(i, si)| {
            chosen
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(1u8, |acc, (_, sj)| {
                    gf_mul(acc, gf_div(sj.x, sj.x ^ si.x).expect("distinct x"))
                })
        })
        .collect();
    let len = first.payload.len();
    Ok((0..len)
        .map(|pos| {
            chosen
                .iter()
                .zip(&basis)
                .fold(0u8, |acc, (s, &l)| acc ^ gf_mul(l, s.payload[pos]))
        })
        .collect())
}
