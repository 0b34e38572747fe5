//! Systematic Reed-Solomon erasure coding over GF(256).
//!
//! The coding matrix is the `(n+k) x n` Vandermonde matrix with rows
//! evaluated at `0, 1, ..., n+k-1`, multiplied on the right by the inverse of
//! its top `n x n` block. The top `n` rows therefore form the identity, so
//! the first `n` coded shards are the data itself, and any `n` rows of the
//! matrix stay invertible.

use crate::error::{Error, Result};
use crate::gf256::{gf_mul, Matrix};

#[derive(Debug, Clone)]
pub struct ReedSolomon {
    data_count: usize,
    parity_count: usize,
    matrix: Matrix,
}

impl ReedSolomon {
    pub fn new(data_count: usize, parity_count: usize) -> Result<Self> {
        if data_count == 0 {
            return Err(Error::BadShards("need at least one data shard"));
        }
        let total = data_count + parity_count;
        if total > 256 {
            return Err(Error::FieldExhausted(total));
        }
        let vm = Matrix::vandermonde(total, data_count);
        let top: Vec<usize> = (0..data_count).collect();
        let top_inv = vm
            .select_rows(&top)
            .invert()
            .expect("vandermonde rows at distinct points are independent");
        Ok(ReedSolomon {
            data_count,
            parity_count,
            matrix: vm.mul(&top_inv),
        })
    }

    pub fn data_count(&self) -> usize {
        self.data_count
    }

    pub fn parity_count(&self) -> usize {
        self.parity_count
    }

    pub fn total_count(&self) -> usize {
        self.data_count + self.parity_count
    }

    pub fn coding_matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Coded shard `row` for the given data shards.
    pub fn encode_row(&self, row: usize, data: &[Vec<u8>]) -> Vec<u8> {
        let len = data.first().map_or(0, Vec::len);
        let mut out = vec![0u8; len];
        for (coef, shard) in self.matrix.row(row).iter().zip(data) {
            if *coef == 0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(shard) {
                *o ^= gf_mul(*coef, b);
            }
        }
        out
    }

    /// All `n + k` shards: the data followed by `k` parity shards.
    pub fn encode(&self, data: &[Vec<u8>]) -> Result<ShardSet> {
        if data.len() != self.data_count {
            return Err(Error::BadShards("data shard count does not match codec"));
        }
        let shard_len = data[0].len();
        if data.iter().any(|s| s.len() != shard_len) {
            return Err(Error::BadShards("data shards differ in length"));
        }
        let mut shards: Vec<Option<Vec<u8>>> = data.iter().cloned().map(Some).collect();
        for row in self.data_count..self.total_count() {
            shards.push(Some(self.encode_row(row, data)));
        }
        Ok(ShardSet {
            shard_len,
            data_count: self.data_count,
            parity_count: self.parity_count,
            shards,
        })
    }

    /// Recovers the data shards from `(index, shard)` pairs. Uses the `n`
    /// lowest distinct indices present.
    pub fn reconstruct(&self, present: &[(usize, &[u8])]) -> Result<Vec<Vec<u8>>> {
        let mut chosen: Vec<(usize, &[u8])> = Vec::with_capacity(self.data_count);
        let mut sorted: Vec<(usize, &[u8])> = present.to_vec();
        sorted.sort_by_key(|(i, _)| *i);
        for (i, s) in sorted {
            if i >= self.total_count() {
                return Err(Error::BadShards("shard index out of range"));
            }
            if chosen.last().is_some_and(|(j, _)| *j == i) {
                continue;
            }
            chosen.push((i, s));
            if chosen.len() == self.data_count {
                break;
            }
        }
        if chosen.len() < self.data_count {
            return Err(Error::InsufficientShards {
                have: chosen.len(),
                need: self.data_count,
            });
        }
        let shard_len = chosen[0].1.len();
        if chosen.iter().any(|(_, s)| s.len() != shard_len) {
            return Err(Error::BadShards("present shards differ in length"));
        }
        if chosen.iter().enumerate().all(|(pos, (i, _))| pos == *i) {
            return Ok(chosen.iter().map(|(_, s)| s.to_vec()).collect());
        }
        let rows: Vec<usize> = chosen.iter().map(|(i, _)| *i).collect();
        let decode = self
            .matrix
            .select_rows(&rows)
            .invert()
            .expect("any n rows of a vandermonde-derived systematic matrix are independent");
        let mut data = vec![vec![0u8; shard_len]; self.data_count];
        for (r, out) in data.iter_mut().enumerate() {
            for (c, (_, shard)) in chosen.iter().enumerate() {
                let coef = decode.get(r, c);
                if coef == 0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(shard.iter()) {
                    *o ^= gf_mul(coef, b);
                }
            }
        }
        Ok(data)
    }
}

/// Indexed shards with presence flags. Indices `0..data_count` are data,
/// the rest parity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSet {
    pub shard_len: usize,
    pub data_count: usize,
    pub parity_count: usize,
    pub shards: Vec<Option<Vec<u8>>>,
}

impl ShardSet {
    pub fn erase(&mut self, index: usize) {
        if let Some(s) = self.shards.get_mut(index) {
            *s = None;
        }
    }

    pub fn present_count(&self) -> usize {
        self.shards.iter().filter(|s| s.is_some()).count()
    }

    pub fn data(&self) -> Vec<Option<&[u8]>> {
        self.shards[..self.data_count]
            .iter()
            .map(|s| s.as_deref())
            .collect()
    }

    pub fn parity(&self) -> Vec<Option<&[u8]>> {
        self.shards[self.data_count..]
            .iter()
            .map(|s| s.as_deref())
            .collect()
    }
}

/// Encodes `data` with `parity_count` parity shards.
pub fn rs_encode(data: &[Vec<u8>], parity_count: usize) -> Result<ShardSet> {
    ReedSolomon::new(data.len(), parity_count)?.encode(data)
}

/// Rebuilds the original data shards from whatever is present in `set`.
pub fn rs_reconstruct(set: &ShardSet) -> Result<Vec<Vec<u8>>> {
    let codec = ReedSolomon::new(set.data_count, set.parity_count)?;
    let present: Vec<(usize, &[u8])> = set
        .shards
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_deref().map(|s| (i, s)))
        .collect();
    if present.iter().any(|(_, s)| s.len() != set.shard_len) {
        return Err(Error::BadShards("present shard has the wrong length"));
    }
    codec.reconstruct(&present)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};

    fn split_message(msg: &[u8], n: usize) -> Vec<Vec<u8>> {
        msg.chunks(msg.len() / n).map(<[u8]>::to_vec).collect()
    }

    #[test]
    fn top_block_is_identity() {
        let rs = ReedSolomon::new(5, 3).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(rs.coding_matrix().get(r, c), u8::from(r == c));
            }
        }
    }

    #[test]
    fn zero_parity_is_identity_coding() {
        let data = split_message(b"ABCDEFGHIJKLMNOP", 4);
        let set = rs_encode(&data, 0).unwrap();
        assert_eq!(set.shards.len(), 4);
        assert_eq!(
            set.data(),
            data.iter().map(|d| Some(d.as_slice())).collect::<Vec<_>>()
        );
    }

    #[test]
    fn abcd_figure_scenario() {
        let data = split_message(b"ABCDEFGHIJKLMNOP", 4);
        let mut set = rs_encode(&data, 2).unwrap();
        assert_eq!(set.shards.len(), 6);
        for (i, d) in data.iter().enumerate() {
            assert_eq!(set.shards[i].as_ref(), Some(d));
        }
        set.erase(2);
        set.erase(4);
        assert_eq!(rs_reconstruct(&set).unwrap(), data);
    }

    #[test]
    fn field_exhausted_above_256_shards() {
        assert_eq!(
            ReedSolomon::new(200, 57).unwrap_err(),
            Error::FieldExhausted(257)
        );
        assert!(ReedSolomon::new(200, 56).is_ok());
    }

    #[test]
    fn insufficient_and_malformed_inputs() {
        let data = split_message(b"ABCDEFGHIJKLMNOP", 4);
        let mut set = rs_encode(&data, 2).unwrap();
        set.erase(0);
        set.erase(1);
        set.erase(5);
        assert_eq!(
            rs_reconstruct(&set).unwrap_err(),
            Error::InsufficientShards { have: 3, need: 4 }
        );
        assert!(rs_encode(&[b"AB".to_vec(), b"C".to_vec()], 1).is_err());
        let rs = ReedSolomon::new(2, 1).unwrap();
        assert!(rs.reconstruct(&[(0, b"ab"), (7, b"cd")]).is_err());
    }

    #[test]
    fn duplicate_indices_count_once() {
        let rs = ReedSolomon::new(2, 1).unwrap();
        let err = rs.reconstruct(&[(0, b"ab"), (0, b"ab")]).unwrap_err();
        assert_eq!(err, Error::InsufficientShards { have: 1, need: 2 });
    }

    #[test]
    fn perturbing_a_data_shard_touches_every_parity_shard() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let k = rng.gen_range(1..=6);
            let len = rng.gen_range(1..=16);
            let data: Vec<Vec<u8>> = (0..n)
                .map(|_| (0..len).map(|_| rng.gen()).collect())
                .collect();
            let before = rs_encode(&data, k).unwrap();
            let mut changed = data.clone();
            let which = rng.gen_range(0..n);
            let pos = rng.gen_range(0..len);
            changed[which][pos] ^= rng.gen_range(1..=255u8);
            let after = rs_encode(&changed, k).unwrap();
            for (a, b) in before.parity().iter().zip(after.parity()) {
                assert_ne!(*a, b);
            }
        }
    }

    #[test]
    fn random_erasures_up_to_parity_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(1..=20);
            let k = rng.gen_range(0..=10);
            let len = rng.gen_range(1..=8);
            let data: Vec<Vec<u8>> = (0..n)
                .map(|_| (0..len).map(|_| rng.gen()).collect())
                .collect();
            let mut set = rs_encode(&data, k).unwrap();
            let mut idx: Vec<usize> = (0..n + k).collect();
            idx.shuffle(&mut rng);
            for &i in &idx[..k] {
                set.erase(i);
            }
            assert_eq!(rs_reconstruct(&set).unwrap(), data);
            if n + k > k {
                set.erase(idx[k]);
                assert!(matches!(
                    rs_reconstruct(&set),
                    Err(Error::InsufficientShards { .. })
                ));
            }
        }
    }
}
