//! Arithmetic in GF(2^8) with reducing polynomial x^8 + x^4 + x^3 + x^2 + 1
//! (0x11D) and generator 2.
//!
//! Addition and subtraction are both XOR. Multiplication goes through
//! log/antilog tables built at compile time.

use crate::error::{Error, Result};

/// Reducing polynomial, including the x^8 term.
pub const POLY: u16 = 0x11D;

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

const TABLES: Tables = build_tables();

const fn build_tables() -> Tables {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    // doubled so that exp[log a + log b] never needs a modulo
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    Tables { exp, log }
}

#[inline]
pub fn gf_add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn gf_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let la = TABLES.log[a as usize] as usize;
    let lb = TABLES.log[b as usize] as usize;
    TABLES.exp[la + lb]
}

#[inline]
pub fn gf_inv(a: u8) -> Result<u8> {
    if a == 0 {
        return Err(Error::DivisionByZero);
    }
    Ok(TABLES.exp[255 - TABLES.log[a as usize] as usize])
}

#[inline]
pub fn gf_div(a: u8, b: u8) -> Result<u8> {
    Ok(gf_mul(a, gf_inv(b)?))
}

/// `a` raised to `e`, with the convention 0^0 = 1.
pub fn gf_pow(a: u8, e: usize) -> u8 {
    if e == 0 {
        return 1;
    }
    if a == 0 {
        return 0;
    }
    let l = TABLES.log[a as usize] as usize;
    TABLES.exp[(l * e) % 255]
}

/// Thin value wrapper for code that prefers operators over free functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn inv(self) -> Result<Gf256> {
        gf_inv(self.0).map(Gf256)
    }
}

// addition in characteristic 2 is xor
#[allow(clippy::suspicious_arithmetic_impl)]
impl std::ops::Add for Gf256 {
    type Output = Gf256;
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl std::ops::Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        Gf256(gf_mul(self.0, rhs.0))
    }
}

/// Dense row-major matrix over GF(256).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Rows are evaluation points 0..rows, entry (r, c) = r^c.
    pub fn vandermonde(rows: usize, cols: usize) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, gf_pow(r as u8, c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    let v = out.get(r, c) ^ gf_mul(a, rhs.get(k, c));
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            out.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(self.row(r));
        }
        out
    }

    /// Gauss-Jordan inversion. Returns `None` for singular or non-square input.
    pub fn invert(&self) -> Option<Matrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut work = self.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| work.get(r, col) != 0)?;
            if pivot != col {
                work.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let scale = gf_inv(work.get(col, col)).ok()?;
            work.scale_row(col, scale);
            inv.scale_row(col, scale);
            for r in 0..n {
                let factor = work.get(r, col);
                if r != col && factor != 0 {
                    work.add_scaled_row(col, r, factor);
                    inv.add_scaled_row(col, r, factor);
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, r: usize, s: u8) {
        for c in 0..self.cols {
            let v = gf_mul(self.get(r, c), s);
            self.set(r, c, v);
        }
    }

    // row[dst] += factor * row[src]
    fn add_scaled_row(&mut self, src: usize, dst: usize, factor: u8) {
        for c in 0..self.cols {
            let v = self.get(dst, c) ^ gf_mul(factor, self.get(src, c));
            self.set(dst, c, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Carry-less shift-and-add multiply, independent of the log tables.
    fn slow_mul(mut a: u8, mut b: u8) -> u8 {
        let mut acc = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                acc ^= a;
            }
            let carry = a & 0x80 != 0;
            a <<= 1;
            if carry {
                a ^= (POLY & 0xFF) as u8;
            }
            b >>= 1;
        }
        acc
    }

    #[test]
    fn small_products() {
        assert_eq!(gf_mul(2, 2), 4);
        assert_eq!(gf_mul(0x80, 2), 0x1D);
        assert_eq!(gf_mul(0, 0xAB), 0);
    }

    #[test]
    fn table_multiply_matches_shift_and_add() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(gf_mul(a, b), slow_mul(a, b), "{a} * {b}");
            }
        }
    }

    #[test]
    fn every_nonzero_element_has_an_inverse() {
        for a in 1..=255u8 {
            let inv = gf_inv(a).unwrap();
            assert_eq!(slow_mul(a, inv), 1, "a={a}");
            assert_eq!(gf_div(a, a).unwrap(), 1);
        }
        assert_eq!(gf_inv(0), Err(Error::DivisionByZero));
        assert_eq!(gf_div(7, 0), Err(Error::DivisionByZero));
    }

    #[test]
    fn field_axioms_on_random_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x11D);
        for _ in 0..10_000 {
            let (a, b, c) = (Gf256(rng.gen()), Gf256(rng.gen()), Gf256(rng.gen()));
            assert_eq!((a * b) * c, a * (b * c));
            assert_eq!(a * b, b * a);
            assert_eq!(a + b, b + a);
            assert_eq!(a * (b + c), a * b + a * c);
            assert_eq!(a + a, Gf256::ZERO);
        }
    }

    #[test]
    fn pow_agrees_with_repeated_multiply() {
        for a in 0..=255u8 {
            let mut acc = 1u8;
            for e in 0..10 {
                assert_eq!(gf_pow(a, e), acc);
                acc = gf_mul(acc, a);
            }
        }
    }

    #[test]
    fn matrix_inverse_round_trip() {
        let v = Matrix::vandermonde(6, 6);
        let inv = v.invert().expect("vandermonde with distinct points");
        assert_eq!(v.mul(&inv), Matrix::identity(6));
        assert!(Matrix::zeros(3, 3).invert().is_none());
    }
}
