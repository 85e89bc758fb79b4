//! Packed bit strings.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Fixed-length bit string, packed little-endian into `u64` words.
///
/// Bits past `len` in the last word are always zero, so equality and hashing
/// are content-based.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                out.set(i, true);
            }
        }
        out
    }

    /// Low `len` bits of `value`, least significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut out = Self::zeros(len);
        if len > 0 {
            let mask = if len == 64 {
                u64::MAX
            } else {
                (1u64 << len) - 1
            };
            out.words[0] = value & mask;
        }
        out
    }

    /// Inverse of [`BitString::from_u64`]; panics past 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let bit = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    /// Bits `[start, start + width)` as an integer, least significant first (`width <= 64`).
    pub fn get_bits(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64 && start + width <= self.len);
        if width == 0 {
            return 0;
        }
        let (w, off) = (start >> 6, start & 63);
        let mut v = self.words[w] >> off;
        if off + width > 64 {
            v |= self.words[w + 1] << (64 - off);
        }
        if width < 64 {
            v &= (1u64 << width) - 1;
        }
        v
    }

    /// Overwrite bits `[start, start + width)` with the low `width` bits of `value`.
    pub fn set_bits(&mut self, start: usize, width: usize, value: u64) {
        assert!(width <= 64 && start + width <= self.len);
        if width == 0 {
            return;
        }
        let mask = if width == 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        };
        let value = value & mask;
        let (w, off) = (start >> 6, start & 63);
        self.words[w] = (self.words[w] & !(mask << off)) | (value << off);
        if off + width > 64 {
            let spill = 64 - off;
            self.words[w + 1] = (self.words[w + 1] & !(mask >> spill)) | (value >> spill);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hamming distance; panics on length mismatch.
    pub fn distance(&self, other: &Self) -> usize {
        assert_eq!(
            self.len, other.len,
            "distance between strings of different length"
        );
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn xor(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len);
        Self {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.len);
        let mut out = Self::zeros(len);
        let mut i = 0;
        while i < len {
            let w = (len - i).min(64);
            out.set_bits(i, w, self.get_bits(start + i, w));
            i += w;
        }
        out
    }

    /// Write `src` at bit offset `start`.
    pub fn splice(&mut self, start: usize, src: &BitString) {
        let mut i = 0;
        while i < src.len {
            let w = (src.len - i).min(64);
            self.set_bits(start + i, w, src.get_bits(i, w));
            i += w;
        }
    }

    /// Number of set bits in `[start, start + len)`.
    pub fn count_ones_in(&self, start: usize, len: usize) -> usize {
        let mut i = 0;
        let mut total = 0;
        while i < len {
            let w = (len - i).min(64);
            total += self.get_bits(start + i, w).count_ones() as usize;
            i += w;
        }
        total
    }

    /// Bitwise AND.
    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len);
        Self {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// Bitwise AND with the complement of `other`.
    pub fn and_not(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len);
        Self {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    /// Extend with zero bits up to `len` (no-op if already that long).
    pub fn padded(&self, len: usize) -> Self {
        assert!(len >= self.len);
        let mut out = self.clone();
        out.len = len;
        out.words.resize(len.div_ceil(64), 0);
        out
    }

    /// Truncate to the first `len` bits.
    pub fn truncated(&self, len: usize) -> Self {
        assert!(len <= self.len);
        let mut out = self.clone();
        out.len = len;
        out.words.truncate(len.div_ceil(64));
        if !len.is_multiple_of(64) {
            let last = out.words.len() - 1;
            out.words[last] &= (1u64 << (len % 64)) - 1;
        }
        out
    }

    /// Bits packed LSB-first into bytes, rendered as lowercase hex.
    pub fn to_hex(&self) -> String {
        let nbytes = self.len.div_ceil(8);
        let mut s = String::with_capacity(nbytes * 2);
        for b in 0..nbytes {
            let byte = (self.words[b / 8] >> ((b % 8) * 8)) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let nbytes = len.div_ceil(8);
        if hex.len() != nbytes * 2 {
            return Err(Error::LengthMismatch {
                expected: nbytes * 2,
                actual: hex.len(),
            });
        }
        let mut out = Self::zeros(len);
        for b in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * b..2 * b + 2], 16)
                .map_err(|e| Error::InvalidArgument(format!("bad hex: {e}")))?;
            out.words[b / 8] |= (byte as u64) << ((b % 8) * 8);
        }
        if out.truncated(len) != out {
            return Err(Error::InvalidArgument(
                "hex has bits set past the length".into(),
            ));
        }
        Ok(out)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(")?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bits: std::result::Result<Vec<bool>, _> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("invalid bit {other:?}"))),
            })
            .collect();
        Ok(Self::from_bools(&bits?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_roundtrip_and_padding() {
        let b = BitString::from_bools(&[true, false, true, true, false, false, false, false, true]);
        assert_eq!(b.to_hex(), "0d01");
        assert_eq!(BitString::from_hex("0d01", 9).unwrap(), b);
        assert!(BitString::from_hex("0d03", 9).is_err());
    }

    #[test]
    fn truncate_clears_tail() {
        let mut b = BitString::zeros(70);
        b.set(69, true);
        b.set(3, true);
        let t = b.truncated(10);
        assert_eq!(t.count_ones(), 1);
        assert_eq!(t.padded(70).count_ones(), 1);
    }

    #[test]
    fn bit_windows_cross_word_boundaries() {
        let mut b = BitString::zeros(150);
        b.set_bits(60, 10, 0b10_1100_0111);
        assert_eq!(b.get_bits(60, 10), 0b10_1100_0111);
        assert_eq!(b.count_ones(), 6);
        let s = b.slice(58, 80);
        assert_eq!(s.get_bits(2, 10), 0b10_1100_0111);
        let mut c = BitString::zeros(150);
        c.splice(58, &s);
        assert_eq!(c, b);
        assert_eq!(b.count_ones_in(64, 6), 3);
    }

    #[test]
    fn u64_roundtrip() {
        let b = BitString::from_u64(0b1011, 6);
        assert_eq!(b.to_string(), "110100");
        assert_eq!(b.to_u64(), 0b1011);
    }
}
