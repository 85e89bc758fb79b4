//! Binary codes with relative distance at least 1/4 and erasure-aware decoding.
//!
//! The main construction concatenates an outer Reed–Solomon code with the
//! inner RM(1,5) code:
//!
//! - up to 192 message bits: outer RS over `GF(64)` with `K = ceil(k/6)` symbols
//!   and `N = 2K - 1` positions, each position an RM(1,5) block of 32 bits.
//!   Design distance `16K`, relative distance `K / (2(2K-1)) > 1/4`.
//! - up to 12288 bits: outer RS over `GF(4096)` with `K = ceil(k/12)` and
//!   `N = 4K - 3`, each position encoded with the 12-bit code above (96 bits,
//!   distance 32). Design distance `32(3K-2)`, relative distance `> 1/4`.
//!
//! Messages are zero-padded to a whole number of outer symbols; bit `6t + b`
//! (or `12t + b`) of the padded message is bit `b` of outer symbol `t`.
//!
//! Decoding runs the inner decoder per block, then generalized minimum
//! distance decoding on the outer code: the least reliable blocks are erased
//! in steps of two and each outer candidate is accepted only if its codeword
//! lies strictly within half the design distance of the received word, with
//! every erased position counted as a difference. A returned message is
//! therefore always the unique codeword within that radius.

pub mod gf2m;
pub mod rm;
pub mod rs;

use std::cmp::Reverse;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::field;
use crate::rng::SimRng;
use gf2m::{gf4096, gf64};
use rs::ReedSolomon;

/// Distance threshold of the equality test, as a fraction of the codeword length.
pub const EQUALITY_THRESHOLD: f64 = 0.06;
/// Fraction of a codeword that must arrive before a receiver attempts to decode.
pub const DECODE_FRACTION: f64 = 0.88;

const SMALL_MAX_BITS: usize = 6 * 32;
const LARGE_MAX_BITS: usize = 12 * 1024;
const BRUTEFORCE_MAX_BITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Construction {
    /// Reed–Solomon outer code over RM(1,5) (two levels for long messages).
    Concatenated,
    /// Each bit repeated `factor` times. A small fixture with known distance.
    Repetition { factor: usize },
}

#[derive(Clone, Copy, Debug)]
enum Layout {
    Small(ReedSolomon),
    Large(ReedSolomon),
    Repetition(usize),
}

/// Parameters of one code instance.
#[derive(Clone, Debug)]
pub struct CodeSpec {
    k: usize,
    len: usize,
    construction: Construction,
    layout: Layout,
}

impl PartialEq for CodeSpec {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.construction == other.construction
    }
}

impl CodeSpec {
    /// The concatenated code for `k`-bit messages, `1 <= k <= 12288`.
    pub fn concatenated(k: usize) -> Result<Self> {
        let layout = if k == 0 {
            return Err(Error::InvalidArgument(
                "message length must be positive".into(),
            ));
        } else if k <= SMALL_MAX_BITS {
            let ko = k.div_ceil(6);
            Layout::Small(ReedSolomon::new(gf64(), ko, 2 * ko - 1))
        } else if k <= LARGE_MAX_BITS {
            let ko = k.div_ceil(12);
            Layout::Large(ReedSolomon::new(gf4096(), ko, 4 * ko - 3))
        } else {
            return Err(Error::InvalidArgument(format!(
                "message length {k} exceeds the supported maximum {LARGE_MAX_BITS}"
            )));
        };
        let len = match layout {
            Layout::Small(rs) => rs.n() * rm::LEN,
            Layout::Large(rs) => rs.n() * SMALL_INNER_LEN,
            Layout::Repetition(_) => unreachable!(),
        };
        Ok(Self {
            k,
            len,
            construction: Construction::Concatenated,
            layout,
        })
    }

    pub fn repetition(k: usize, factor: usize) -> Result<Self> {
        if k == 0 || factor == 0 {
            return Err(Error::InvalidArgument(
                "repetition needs k, factor >= 1".into(),
            ));
        }
        Ok(Self {
            k,
            len: k * factor,
            construction: Construction::Repetition { factor },
            layout: Layout::Repetition(factor),
        })
    }

    pub fn new(k: usize, construction: Construction) -> Result<Self> {
        match construction {
            Construction::Concatenated => Self::concatenated(k),
            Construction::Repetition { factor } => Self::repetition(k, factor),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codeword_len(&self) -> usize {
        self.len
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Expansion ratio `codeword_len / k`.
    pub fn expansion(&self) -> f64 {
        self.len as f64 / self.k as f64
    }

    /// Proven lower bound on the minimum distance.
    pub fn design_distance(&self) -> usize {
        match self.layout {
            Layout::Small(rs) => rs.distance() * rm::DISTANCE,
            Layout::Large(rs) => rs.distance() * SMALL_INNER_DISTANCE,
            Layout::Repetition(f) => f,
        }
    }

    /// `design_distance / codeword_len`.
    pub fn guaranteed_relative_distance(&self) -> f64 {
        self.design_distance() as f64 / self.len as f64
    }

    /// Erasure-counted distance below which decoding is guaranteed.
    pub fn decoding_radius(&self) -> usize {
        self.design_distance().div_ceil(2)
    }

    fn check_message(&self, message: &BitString) -> Result<()> {
        if message.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                actual: message.len(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, message: &BitString) -> Result<BitString> {
        self.check_message(message)?;
        Ok(match self.layout {
            Layout::Small(rs) => small_encode(&rs, &symbols(message, 6, rs.k())),
            Layout::Large(rs) => {
                let outer = rs.encode(&symbols(message, 12, rs.k()));
                let mut out = BitString::zeros(self.len);
                for (j, &s) in outer.iter().enumerate() {
                    out.splice(
                        j * SMALL_INNER_LEN,
                        &small_encode(&small_inner(), &split12(s)),
                    );
                }
                out
            }
            Layout::Repetition(f) => {
                let mut out = BitString::zeros(self.len);
                for i in 0..self.k {
                    if message.get(i) {
                        for r in 0..f {
                            out.set(i * f + r, true);
                        }
                    }
                }
                out
            }
        })
    }

    /// Recover the message of the unique codeword within the decoding radius.
    pub fn decode(&self, received: &ReceivedWord) -> Result<BitString> {
        if received.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: received.len(),
            });
        }
        let design = self.design_distance();
        let accept = |msg: &BitString| -> bool {
            let cw = self.encode(msg).expect("decoded message has length k");
            2 * received.distance_to(&cw) < design
        };
        let found = match self.layout {
            Layout::Small(rs) => {
                small_decode(&rs, received, 0).map(|(syms, _)| join_symbols(&syms, 6, self.k))
            }
            Layout::Large(rs) => {
                let inner: Vec<Option<(u16, usize)>> = (0..rs.n())
                    .map(|j| {
                        small_decode(&small_inner(), received, j * SMALL_INNER_LEN)
                            .map(|(s, d)| (s[0] | (s[1] << 6), d))
                    })
                    .collect();
                gmd_decode(&rs, &inner, |syms| accept(&join_symbols(syms, 12, self.k)))
                    .map(|syms| join_symbols(&syms, 12, self.k))
            }
            Layout::Repetition(f) => {
                let mut msg = BitString::zeros(self.k);
                let mut ok = true;
                for i in 0..self.k {
                    let ones = received.values().count_ones_in(i * f, f);
                    let present = f - received.erasures().count_ones_in(i * f, f);
                    if 2 * ones == present {
                        ok = false;
                        break;
                    }
                    msg.set(i, 2 * ones > present);
                }
                ok.then_some(msg)
            }
        };
        match found {
            Some(msg) if accept(&msg) => Ok(msg),
            _ => Err(Error::DecodeFailed),
        }
    }

    /// Exact minimum distance by enumerating all nonzero messages (`k <= 16`).
    pub fn min_distance_bruteforce(&self) -> Result<usize> {
        if self.k > BRUTEFORCE_MAX_BITS {
            return Err(Error::InvalidArgument(format!(
                "brute force needs k <= {BRUTEFORCE_MAX_BITS}, got {}",
                self.k
            )));
        }
        let mut best = usize::MAX;
        for m in 1u64..(1u64 << self.k) {
            let cw = self.encode(&BitString::from_u64(m, self.k))?;
            best = best.min(cw.count_ones());
        }
        Ok(best)
    }
}

#[derive(Serialize, Deserialize)]
struct CodeSpecRepr {
    k: usize,
    #[serde(rename = "K")]
    expansion: f64,
    construction: Construction,
}

impl Serialize for CodeSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CodeSpecRepr {
            k: self.k,
            expansion: self.expansion(),
            construction: self.construction,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CodeSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CodeSpecRepr::deserialize(d)?;
        let spec = CodeSpec::new(repr.k, repr.construction).map_err(serde::de::Error::custom)?;
        if (spec.expansion() - repr.expansion).abs() > 1e-9 {
            return Err(serde::de::Error::custom(format!(
                "K = {} does not match the construction (expected {})",
                repr.expansion,
                spec.expansion()
            )));
        }
        Ok(spec)
    }
}

/// A codeword as seen by a receiver: each position a bit or erased.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReceivedWord {
    values: BitString,
    erasures: BitString,
}

impl ReceivedWord {
    pub fn all_erased(len: usize) -> Self {
        let mut erasures = BitString::zeros(len);
        for i in 0..len {
            erasures.set(i, true);
        }
        Self {
            values: BitString::zeros(len),
            erasures,
        }
    }

    pub fn from_codeword(word: &BitString) -> Self {
        Self {
            values: word.clone(),
            erasures: BitString::zeros(word.len()),
        }
    }

    pub fn from_symbols(symbols: &[Option<bool>]) -> Self {
        let mut out = Self::from_codeword(&BitString::zeros(symbols.len()));
        for (i, s) in symbols.iter().enumerate() {
            match s {
                Some(b) => out.values.set(i, *b),
                None => out.erasures.set(i, true),
            }
        }
        out
    }

    /// Values at erased positions are ignored.
    pub fn from_parts(values: BitString, erasures: BitString) -> Result<Self> {
        if values.len() != erasures.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: erasures.len(),
            });
        }
        Ok(Self {
            values: values.and_not(&erasures),
            erasures,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (!self.erasures.get(i)).then(|| self.values.get(i))
    }

    pub fn erase(&mut self, i: usize) {
        self.erasures.set(i, true);
        self.values.set(i, false);
    }

    pub fn erased_count(&self) -> usize {
        self.erasures.count_ones()
    }

    pub fn received_count(&self) -> usize {
        self.len() - self.erased_count()
    }

    pub fn values(&self) -> &BitString {
        &self.values
    }

    pub fn erasures(&self) -> &BitString {
        &self.erasures
    }

    /// Hamming distance to `word`, every erased position counted as a difference.
    pub fn distance_to(&self, word: &BitString) -> usize {
        self.erased_count() + word.and_not(&self.erasures).distance(&self.values)
    }

    pub fn to_symbols(&self) -> Vec<Option<bool>> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }
}

/// The 12-bit small code, used as the inner code of the large layout.
fn small_inner() -> ReedSolomon {
    ReedSolomon::new(gf64(), 2, 3)
}
const SMALL_INNER_LEN: usize = 3 * rm::LEN;
const SMALL_INNER_DISTANCE: usize = 2 * rm::DISTANCE;

fn split12(s: u16) -> [u16; 2] {
    [s & 63, s >> 6]
}

/// Outer symbols of the zero-padded message, `width` bits each.
fn symbols(message: &BitString, width: usize, count: usize) -> Vec<u16> {
    let padded = message.padded(width * count);
    (0..count)
        .map(|t| padded.get_bits(t * width, width) as u16)
        .collect()
}

fn join_symbols(syms: &[u16], width: usize, k: usize) -> BitString {
    let mut out = BitString::zeros(width * syms.len());
    for (t, &s) in syms.iter().enumerate() {
        out.set_bits(t * width, width, s as u64);
    }
    out.truncated(k)
}

fn small_encode(rs: &ReedSolomon, syms: &[u16]) -> BitString {
    let outer = rs.encode(syms);
    let mut out = BitString::zeros(outer.len() * rm::LEN);
    for (j, &s) in outer.iter().enumerate() {
        out.set_bits(j * rm::LEN, rm::LEN, rm::encode(s) as u64);
    }
    out
}

/// Decode the small-layout block starting at bit `start`; returns symbols and distance.
fn small_decode(rs: &ReedSolomon, rx: &ReceivedWord, start: usize) -> Option<(Vec<u16>, usize)> {
    let n = rs.n();
    let block = |j: usize| {
        let at = start + j * rm::LEN;
        (
            rx.values.get_bits(at, rm::LEN) as u32,
            rx.erasures.get_bits(at, rm::LEN) as u32,
        )
    };
    let inner: Vec<Option<(u16, usize)>> = (0..n)
        .map(|j| {
            let (v, e) = block(j);
            rm::decode(v, e)
        })
        .collect();
    let design = rs.distance() * rm::DISTANCE;
    let distance = |syms: &[u16]| -> usize {
        rs.encode(syms)
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                let (v, e) = block(j);
                (e.count_ones() + ((rm::encode(s) ^ v) & !e).count_ones()) as usize
            })
            .sum()
    };
    let syms = gmd_decode(rs, &inner, |syms| 2 * distance(syms) < design)?;
    let d = distance(&syms);
    Some((syms, d))
}

/// Generalized minimum distance decoding of the outer code.
///
/// `inner[j]` is the inner decision for block `j` with its distance (lower is
/// more reliable), or `None` for an inner failure.
fn gmd_decode(
    rs: &ReedSolomon,
    inner: &[Option<(u16, usize)>],
    mut accept: impl FnMut(&[u16]) -> bool,
) -> Option<Vec<u16>> {
    let mut order: Vec<usize> = (0..inner.len()).filter(|&j| inner[j].is_some()).collect();
    order.sort_by_key(|&j| Reverse(inner[j].map_or(0, |(_, d)| d)));
    let mut rx: Vec<Option<u16>> = inner.iter().map(|b| b.map(|(s, _)| s)).collect();
    let mut erased = 0;
    let mut step = 0;
    while step < rs.distance() && step <= order.len() {
        while erased < step {
            rx[order[erased]] = None;
            erased += 1;
        }
        if let Some(msg) = rs.decode(&rx) {
            if accept(&msg) {
                return Some(msg);
            }
        }
        step += 2;
    }
    None
}

/// Whether a `rows x k` matrix of fair bits has full column rank over `GF(q)`.
pub fn random_binary_matrix_rank(k: usize, rows: usize, q: u64, rng: &mut SimRng) -> Result<bool> {
    if k == 0 || k > 64 || rows < k {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= 64 and rows >= k (k = {k}, rows = {rows})"
        )));
    }
    let mask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let matrix: Vec<u64> = (0..rows).map(|_| rng.next_u64() & mask).collect();
    binary_matrix_rank(k, &matrix, q).map(|r| r == k)
}

/// Column rank over `GF(q)` of 0/1 rows given as bitmasks (bit `j` is column `j`).
pub fn binary_matrix_rank(k: usize, rows: &[u64], q: u64) -> Result<usize> {
    let fq = field::PrimeField::new(q)?;
    let dense: Vec<Vec<u64>> = rows
        .iter()
        .map(|&r| (0..k).map(|j| (r >> j) & 1).collect())
        .collect();
    Ok(fq.rank(dense))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_and_distances() {
        let c6 = CodeSpec::concatenated(6).unwrap();
        assert_eq!((c6.codeword_len(), c6.design_distance()), (32, 16));
        let c12 = CodeSpec::concatenated(12).unwrap();
        assert_eq!((c12.codeword_len(), c12.design_distance()), (96, 32));
        let c192 = CodeSpec::concatenated(192).unwrap();
        assert_eq!(c192.codeword_len(), 63 * 32);
        let c193 = CodeSpec::concatenated(193).unwrap();
        assert_eq!(c193.codeword_len(), (4 * 17 - 3) * 96);
        for k in [1, 5, 6, 7, 100, 192, 193, 1000, 4096] {
            let c = CodeSpec::concatenated(k).unwrap();
            assert!(4 * c.design_distance() >= c.codeword_len(), "k = {k}");
        }
        assert!(CodeSpec::concatenated(0).is_err());
        assert!(CodeSpec::concatenated(LARGE_MAX_BITS + 1).is_err());
    }

    #[test]
    fn small_inner_matches_public_12_bit_code() {
        let spec = CodeSpec::concatenated(12).unwrap();
        for s in [0u16, 1, 63, 64, 4095, 2730] {
            let direct = small_encode(&small_inner(), &split12(s));
            assert_eq!(
                spec.encode(&BitString::from_u64(s as u64, 12)).unwrap(),
                direct
            );
        }
    }

    #[test]
    fn roundtrip_without_erasures() {
        let mut rng = SimRng::new(3);
        for k in [1, 6, 13, 64, 192, 200, 500] {
            let spec = CodeSpec::concatenated(k).unwrap();
            let msg = BitString::from_bools(&(0..k).map(|_| rng.coin()).collect::<Vec<_>>());
            let cw = spec.encode(&msg).unwrap();
            assert_eq!(
                spec.decode(&ReceivedWord::from_codeword(&cw)).unwrap(),
                msg,
                "k = {k}"
            );
        }
    }

    #[test]
    fn large_layout_corrects_mixed_damage() {
        let mut rng = SimRng::new(8);
        let spec = CodeSpec::concatenated(300).unwrap();
        let msg = BitString::from_bools(&(0..300).map(|_| rng.coin()).collect::<Vec<_>>());
        let cw = spec.encode(&msg).unwrap();
        let mut rx = ReceivedWord::from_codeword(&cw);
        let budget = spec.decoding_radius() - 1;
        for _ in 0..budget {
            let i = rng.below(cw.len() as u64) as usize;
            if rng.coin() {
                rx.erase(i);
            } else if rx.get(i).is_some() {
                rx.values.set(i, !cw.get(i));
            }
        }
        assert!(2 * rx.distance_to(&cw) < spec.design_distance());
        assert_eq!(spec.decode(&rx).unwrap(), msg);
    }

    #[test]
    fn all_erased_fails() {
        let spec = CodeSpec::concatenated(12).unwrap();
        assert_eq!(
            spec.decode(&ReceivedWord::all_erased(96)),
            Err(Error::DecodeFailed)
        );
    }

    #[test]
    fn repetition_fixture() {
        let spec = CodeSpec::repetition(1, 3).unwrap();
        assert_eq!(spec.min_distance_bruteforce().unwrap(), 3);
        let rx = ReceivedWord::from_symbols(&[Some(true), None, Some(true)]);
        assert_eq!(spec.decode(&rx).unwrap(), BitString::from_bools(&[true]));
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = CodeSpec::concatenated(12).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"k":12,"K":8.0,"construction":{"name":"concatenated"}}"#
        );
        assert_eq!(serde_json::from_str::<CodeSpec>(&json).unwrap(), spec);
        assert!(serde_json::from_str::<CodeSpec>(
            r#"{"k":12,"K":9.0,"construction":{"name":"concatenated"}}"#
        )
        .is_err());
    }

    #[test]
    fn rank_identity_is_full() {
        let rows: Vec<u64> = (0..8).map(|j| 1u64 << j).collect();
        assert_eq!(binary_matrix_rank(8, &rows, 101).unwrap(), 8);
        assert_eq!(binary_matrix_rank(2, &[0b11, 0b11], 101).unwrap(), 1);
    }
}
