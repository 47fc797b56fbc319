//! Fixed-length binary templates.
//!
//! Coordinate `i` is stored in byte `i / 8` at bit position `7 - (i % 8)`, so the
//! hex form reads left to right in coordinate order. Padding bits past `len` are
//! always zero.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Template {
    bytes: Vec<u8>,
    len: usize,
}

impl Template {
    pub fn zeros(len: usize) -> Self {
        Template {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut t = Template::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            t.set(i, b);
        }
        t
    }

    /// Parses a string of `0`/`1` characters, coordinate 0 first.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Malformed(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Template::from_bits(&bits))
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut t = Template::zeros(len);
        rng.fill(&mut t.bytes[..]);
        t.clear_padding();
        t
    }

    pub fn from_hex(s: &str, len: usize) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| Error::Malformed(format!("template hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: len.div_ceil(8) * 2,
                actual: s.trim().len(),
            });
        }
        let t = Template { bytes, len };
        let mut canonical = t.clone();
        canonical.clear_padding();
        if canonical != t {
            return Err(Error::Malformed("nonzero padding bits in template hex".into()));
        }
        Ok(t)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "coordinate {i} out of range {}", self.len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "coordinate {i} out of range {}", self.len);
        let mask = 1u8 << (7 - i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.get(i);
        self.set(i, !v);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut t = Template {
            bytes: self.bytes.iter().map(|b| !b).collect(),
            len: self.len,
        };
        t.clear_padding();
        t
    }

    pub fn xor(&self, other: &Template) -> Result<Self> {
        self.check_len(other)?;
        Ok(Template {
            bytes: self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect(),
            len: self.len,
        })
    }

    pub fn check_len(&self, other: &Template) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(())
    }

    /// Reads coordinates `start..end` as a big-endian integer, lowest coordinate
    /// most significant.
    pub fn range_to_uint(&self, start: usize, end: usize) -> BigUint {
        let mut v = BigUint::default();
        for i in start..end {
            v <<= 1u32;
            if self.get(i) {
                v |= BigUint::from(1u8);
            }
        }
        v
    }

    fn clear_padding(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - rem);
            }
        }
    }
}

/// Number of coordinates at which `x` and `y` differ.
pub fn hamming(x: &Template, y: &Template) -> Result<usize> {
    x.check_len(y)?;
    Ok(x.bytes
        .iter()
        .zip(&y.bytes)
        .map(|(a, b)| (a ^ b).count_ones() as usize)
        .sum())
}

impl fmt::Debug for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
            write!(f, "Template({s})")
        } else {
            write!(f, "Template[{}]({})", self.len, self.to_hex())
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    /// Accepts a bit string (`0`/`1` only).
    fn from_str(s: &str) -> Result<Self> {
        Template::from_bit_str(s)
    }
}
