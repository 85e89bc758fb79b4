//! Constant-round Hamming weight, hence any symmetric function.
//!
//! Two phases. [`run_determine_interval`] estimates the weight from one
//! repeated broadcast and agrees, for each of three staggered interval
//! families, on the interval holding the estimate. [`run_pinpoint_weight`]
//! then recovers the exact weight inside an interval from the fraction of
//! processors whose noisy count clears the interval midpoint.
//! [`run_hamming_weight`] pinpoints inside all three intervals and takes the
//! majority.
//!
//! Agreement on a value (an interval label or a weight) uses the group-chunked
//! codeword scheme: with `g = ceil(log2 n)`, processor `i` sends chunk
//! `i mod g` of the encoding of its value; a receiver takes, per codeword
//! position, the majority of the bits it heard (ties and silence count as
//! erasures) and decodes when at least [`DECODE_FRACTION`] of the positions
//! came through, keeping its own value otherwise.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channel::Channel;
use crate::codes::{CodeSpec, ReceivedWord, DECODE_FRACTION};
use crate::error::{Error, Result};
use crate::learn_input::ceil_log2;
use crate::stats::{binomial_pmf, binomial_upper_tail};

/// Tolerated probability that a local weight estimate misses by more than `t sqrt(n)`.
pub const LOCAL_MISS: f64 = 0.01;

/// Inclusive integer interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

impl Interval {
    pub fn contains(&self, w: u64) -> bool {
        self.lo <= w && w <= self.hi
    }
}

/// Intervals `A_1..A_k` of length `L = floor(2 t sqrt(n)) + 1` covering
/// `[0, n]`, their triples `B_i = A_i ∪ A_{i+1} ∪ A_{i+2}` (out-of-range `A`s
/// empty) and the three families `{B_i : i ≡ s mod 3}`. A label is the
/// ordinal of a `B` inside its family.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalFamily {
    n: u64,
    t_scale: f64,
    piece: u64,
    pieces: i64,
}

impl IntervalFamily {
    /// Builds the family and checks coverage and the two-of-three margin exhaustively.
    pub fn new(n: usize, t_scale: f64) -> Result<Self> {
        if n == 0 || !(t_scale.is_finite() && t_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need n >= 1 and t > 0, got n = {n}, t = {t_scale}"
            )));
        }
        let n = n as u64;
        let piece = (2.0 * t_scale * (n as f64).sqrt()).floor() as u64 + 1;
        let fam = Self {
            n,
            t_scale,
            piece,
            pieces: (n / piece + 1) as i64,
        };
        fam.check()?;
        Ok(fam)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn t_scale(&self) -> f64 {
        self.t_scale
    }

    /// `L`, the length of every `A_i` but possibly the last.
    pub fn piece_len(&self) -> u64 {
        self.piece
    }

    /// Estimate tolerance `t sqrt(n)`.
    pub fn margin(&self) -> f64 {
        self.t_scale * (self.n as f64).sqrt()
    }

    fn first_index(s: usize) -> i64 {
        [0, 1, -1][s]
    }

    fn b_interval(&self, i: i64) -> Interval {
        let first = i.max(1);
        let last = (i + 2).min(self.pieces);
        Interval {
            lo: (first - 1) as u64 * self.piece,
            hi: (last as u64 * self.piece - 1).min(self.n),
        }
    }

    /// The intervals of family `s`, in label order.
    pub fn family(&self, s: usize) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut i = Self::first_index(s);
        while i <= self.pieces {
            out.push(self.b_interval(i));
            i += 3;
        }
        out
    }

    /// Label in family `s` of the interval containing `h` (clamped to `[0, n]`).
    pub fn locate(&self, s: usize, h: f64) -> u64 {
        let h = h.clamp(0.0, self.n as f64);
        let j = ((h / self.piece as f64).floor() as i64 + 1).min(self.pieces);
        let i = j - (j - s as i64).rem_euclid(3);
        ((i - Self::first_index(s)) / 3) as u64
    }

    pub fn interval(&self, s: usize, label: u64) -> Option<Interval> {
        let i = Self::first_index(s) + 3 * i64::try_from(label).ok()?;
        (i <= self.pieces).then(|| self.b_interval(i))
    }

    /// Bits of a label on the wire.
    pub fn label_bits(&self) -> usize {
        let max = (0..3)
            .map(|s| self.family(s).len() as u64 - 1)
            .max()
            .unwrap_or(0);
        ceil_log2(self.n as usize)
            .max(64 - max.leading_zeros() as usize)
            .max(1)
    }

    /// Families in which every estimate within `t sqrt(n)` of `w` lands in the `B` containing `w`.
    pub fn safe_families(&self, w: u64) -> usize {
        let m = self.margin();
        (0..3)
            .filter(|&s| {
                let b = self.interval(s, self.locate(s, w as f64)).expect("located");
                let below = b.lo == 0 || (w - b.lo) as f64 > m;
                let above = b.hi == self.n || (b.hi + 1 - w) as f64 > m;
                below && above
            })
            .count()
    }

    fn check(&self) -> Result<()> {
        for s in 0..3 {
            let fam = self.family(s);
            let mut next = 0;
            for b in &fam {
                if b.lo != next || b.hi < b.lo {
                    return Err(Error::Invariant(format!(
                        "family {s} is not a partition of [0, {}]",
                        self.n
                    )));
                }
                next = b.hi + 1;
            }
            if next != self.n + 1 {
                return Err(Error::Invariant(format!(
                    "family {s} does not reach {}",
                    self.n
                )));
            }
        }
        for w in 0..=self.n {
            if self.safe_families(w) < 2 {
                return Err(Error::Invariant(format!(
                    "weight {w} is near a boundary in two families"
                )));
            }
        }
        Ok(())
    }
}

/// Smallest `t = m / sqrt(n)` (integer `m >= 1`) with `P(|h - w| > m) <= miss`
/// at `w = floor(n / 2)`, where `h = Bin(w, 1 - p) / (1 - p)`.
pub fn calibrate_t_scale(n: usize, p: f64, miss: f64) -> Result<f64> {
    if n == 0 || !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and 0 <= p < 1, got {n}, {p}"
        )));
    }
    let w = (n / 2) as u64;
    let pmf = binomial_pmf(w, 1.0 - p);
    let dev: Vec<f64> = (0..=w)
        .map(|x| (x as f64 / (1.0 - p) - w as f64).abs())
        .collect();
    let mut m = 1u64;
    loop {
        let tail: f64 = pmf
            .iter()
            .zip(&dev)
            .filter(|(_, &d)| d > m as f64)
            .map(|(q, _)| q)
            .sum();
        if tail <= miss {
            return Ok(m as f64 / (n as f64).sqrt());
        }
        m += 1;
    }
}

/// `θ_ℓ = P(Bin(ℓ, 1 - p) >= (1 - p)(a + b) / 2)` for `ℓ` in `[a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaTable {
    pub interval: Interval,
    pub p: f64,
    /// Smallest success count meeting the threshold.
    pub threshold: u64,
    pub values: Vec<f64>,
}

impl ThetaTable {
    pub fn new(interval: Interval, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "θ needs 0 < p < 1, got {p}"
            )));
        }
        if interval.hi < interval.lo {
            return Err(Error::InvalidArgument(format!(
                "empty interval {interval:?}"
            )));
        }
        let threshold = threshold_count(interval, p);
        let values = (interval.lo..=interval.hi)
            .map(|l| binomial_upper_tail(l, 1.0 - p, threshold))
            .collect();
        Ok(Self {
            interval,
            p,
            threshold,
            values,
        })
    }

    pub fn theta(&self, l: u64) -> Option<f64> {
        l.checked_sub(self.interval.lo)
            .and_then(|k| self.values.get(k as usize))
            .copied()
    }

    /// `argmin_ℓ |θ_ℓ - estimate|`, ties to the smallest `ℓ`.
    pub fn nearest(&self, estimate: f64) -> u64 {
        let mut best = (f64::INFINITY, self.interval.lo);
        for (k, &v) in self.values.iter().enumerate() {
            let d = (v - estimate).abs();
            if d < best.0 {
                best = (d, self.interval.lo + k as u64);
            }
        }
        best.1
    }

    /// Smallest `θ_{ℓ+1} - θ_ℓ` in the table.
    pub fn min_gap(&self) -> Option<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }

    /// `l,theta` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,theta\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.interval.lo + k as u64, v));
        }
        out
    }
}

/// `ceil((1 - p)(a + b) / 2)`, rounding away float noise just above an integer.
fn threshold_count(interval: Interval, p: f64) -> u64 {
    let t = (1.0 - p) * (interval.lo + interval.hi) as f64 / 2.0;
    (t - 1e-9).ceil().max(0.0) as u64
}

/// θ tables for every interval on the family, for inspection.
pub fn theta_tables(family: &IntervalFamily, p: f64) -> Result<Vec<ThetaTable>> {
    let mut out = Vec::new();
    for s in 0..3 {
        for b in family.family(s) {
            out.push(ThetaTable::new(b, p)?);
        }
    }
    Ok(out)
}

/// Agree on one value per processor through the chunked codeword; see the module docs.
fn agree(channel: &mut Channel, values: &[u64], width: usize, max_value: u64) -> Result<Vec<u64>> {
    let n = values.len();
    let spec = CodeSpec::concatenated(width)?;
    let len = spec.codeword_len();
    let g = ceil_log2(n).max(1);
    let chunk = len.div_ceil(g);

    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut words: Vec<BitString> = Vec::new();
    let which: Vec<usize> = values
        .iter()
        .map(|&v| {
            *index.entry(v).or_insert_with(|| {
                words.push(
                    spec.encode(&BitString::from_u64(v, width))
                        .expect("width fits"),
                );
                words.len() - 1
            })
        })
        .collect::<Vec<_>>();

    let mut fused_values = vec![vec![false; len]; n];
    let mut fused_erased = vec![vec![true; len]; n];
    let mut ones = vec![0i64; g];
    let mut heard = vec![0i64; g];
    let mut delta_ones = vec![0i64; n * g];
    let mut delta_heard = vec![0i64; n * g];
    for t in 0..chunk {
        let sent: Vec<bool> = (0..n)
            .map(|j| {
                let pos = (j % g) * chunk + t;
                pos < len && words[which[j]].get(pos)
            })
            .collect();
        let grid = channel.broadcast(&sent)?;
        ones.fill(0);
        heard.fill(0);
        for (j, &b) in sent.iter().enumerate() {
            heard[j % g] += 1;
            ones[j % g] += b as i64;
        }
        delta_ones.fill(0);
        delta_heard.fill(0);
        for (s, r) in grid.erased_pairs() {
            delta_heard[r * g + s % g] += 1;
            delta_ones[r * g + s % g] += sent[s] as i64;
        }
        for r in 0..n {
            for ci in 0..g {
                let pos = ci * chunk + t;
                if pos >= len {
                    continue;
                }
                let h = heard[ci] - delta_heard[r * g + ci];
                let o = ones[ci] - delta_ones[r * g + ci];
                if 2 * o != h {
                    fused_values[r][pos] = 2 * o > h;
                    fused_erased[r][pos] = false;
                }
            }
        }
    }

    let need = DECODE_FRACTION * len as f64;
    let mut cache: HashMap<ReceivedWord, Option<u64>> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let rx = ReceivedWord::from_parts(
            BitString::from_bools(&fused_values[r]),
            BitString::from_bools(&fused_erased[r]),
        )?;
        let decoded = if rx.received_count() as f64 >= need {
            *cache.entry(rx).or_insert_with_key(|rx| {
                spec.decode(rx)
                    .ok()
                    .map(|m| m.to_u64())
                    .filter(|&v| v <= max_value)
            })
        } else {
            None
        };
        out.push(decoded.unwrap_or(values[r]));
    }
    Ok(out)
}

fn check_bits(channel: &Channel, bits: &[bool]) -> Result<()> {
    if bits.len() != channel.n() {
        return Err(Error::LengthMismatch {
            expected: channel.n(),
            actual: bits.len(),
        });
    }
    Ok(())
}

/// Per-processor labels `(C_{i,0}, C_{i,1}, C_{i,2})`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalOutcome {
    /// Local weight estimates `h_i`.
    pub estimates: Vec<f64>,
    pub labels: Vec<[u64; 3]>,
    pub rounds_used: u64,
}

impl IntervalOutcome {
    /// Families on which every processor agrees on an interval containing `w`.
    pub fn good_families(&self, family: &IntervalFamily, w: u64) -> usize {
        (0..3)
            .filter(|&s| {
                let first = self.labels[0][s];
                self.labels.iter().all(|l| l[s] == first)
                    && family.interval(s, first).is_some_and(|b| b.contains(w))
            })
            .count()
    }
}

/// One repeated broadcast of the inputs, then one agreement per family.
pub fn run_determine_interval(
    channel: &mut Channel,
    family: &IntervalFamily,
    bits: &[bool],
) -> Result<IntervalOutcome> {
    check_bits(channel, bits)?;
    if family.n() != bits.len() as u64 {
        return Err(Error::InvalidArgument(
            "interval family built for another n".into(),
        ));
    }
    let start = channel.rounds_used();
    let n = bits.len();
    let p = channel.config().effective_p();
    let weight = bits.iter().filter(|&&b| b).count();
    let grid = channel.broadcast(bits)?;
    let mut lost = vec![0usize; n];
    for (s, r) in grid.erased_pairs() {
        lost[r] += bits[s] as usize;
    }
    // A processor knows its own bit; the others' ones are rescaled.
    let estimates: Vec<f64> = (0..n)
        .map(|i| {
            let own = bits[i] as usize;
            own as f64 + (weight - own - lost[i]) as f64 / (1.0 - p)
        })
        .collect();
    let width = family.label_bits();
    let mut labels = vec![[0u64; 3]; n];
    for s in 0..3 {
        let local: Vec<u64> = estimates.iter().map(|&h| family.locate(s, h)).collect();
        let max = family.family(s).len() as u64 - 1;
        for (i, v) in agree(channel, &local, width, max)?.into_iter().enumerate() {
            labels[i][s] = v;
        }
    }
    Ok(IntervalOutcome {
        estimates,
        labels,
        rounds_used: channel.rounds_used() - start,
    })
}

/// Per-processor result of one pinpoint run.
#[derive(Clone, Debug, PartialEq)]
pub struct PinpointOutcome {
    pub outputs: Vec<u64>,
    /// `θ̂_i`, the fraction of received comparison bits that were 1.
    pub estimates: Vec<f64>,
    /// Processors that received no comparison bit at all (`θ̂_i` set to 1/2).
    pub silent: usize,
    pub rounds_used: u64,
}

/// Exact weight inside `interval`, the same interval for every processor.
pub fn run_pinpoint_weight(
    channel: &mut Channel,
    bits: &[bool],
    interval: Interval,
) -> Result<PinpointOutcome> {
    let intervals = vec![interval; bits.len()];
    pinpoint_each(channel, bits, &intervals, &mut HashMap::new())
}

/// Pinpoint where processor `i` works in `intervals[i]`.
///
/// The comparison step (inputs, then `β_i`) runs `gamma` times on single
/// unrepeated rounds with fresh erasures and `θ̂_i` pools all of them: the
/// statistic needs the raw erasure rate, and repetition only sharpens it.
fn pinpoint_each(
    channel: &mut Channel,
    bits: &[bool],
    intervals: &[Interval],
    tables: &mut HashMap<Interval, ThetaTable>,
) -> Result<PinpointOutcome> {
    check_bits(channel, bits)?;
    let n = bits.len();
    let cfg = *channel.config();
    let p = cfg.p;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "weight pinpointing needs 0 < p < 1, got {p}"
        )));
    }
    for b in intervals {
        if !tables.contains_key(b) {
            tables.insert(*b, ThetaTable::new(*b, p)?);
        }
    }
    let start = channel.rounds_used();
    let weight = bits.iter().filter(|&&b| b).count();
    let mut beta_ones = vec![0usize; n];
    let mut beta_heard = vec![0usize; n];
    let mut lost = vec![0usize; n];
    for _ in 0..cfg.gamma {
        let grid = channel.broadcast_round(bits)?;
        lost.fill(0);
        for (s, r) in grid.erased_pairs() {
            lost[r] += bits[s] as usize;
        }
        let beta: Vec<bool> = (0..n)
            .map(|i| (weight - lost[i]) as u64 >= tables[&intervals[i]].threshold)
            .collect();
        let total_ones = beta.iter().filter(|&&b| b).count();
        let grid = channel.broadcast_round(&beta)?;
        lost.fill(0);
        let mut lost_ones = vec![0usize; n];
        for (s, r) in grid.erased_pairs() {
            lost[r] += 1;
            lost_ones[r] += beta[s] as usize;
        }
        for i in 0..n {
            beta_heard[i] += n - 1 - lost[i];
            beta_ones[i] += total_ones - beta[i] as usize - lost_ones[i];
        }
    }
    let mut silent = 0;
    let estimates: Vec<f64> = (0..n)
        .map(|i| {
            if beta_heard[i] == 0 {
                silent += 1;
                0.5
            } else {
                beta_ones[i] as f64 / beta_heard[i] as f64
            }
        })
        .collect();
    let local: Vec<u64> = (0..n)
        .map(|i| tables[&intervals[i]].nearest(estimates[i]))
        .collect();
    let width = ceil_log2(n + 1).max(1);
    let outputs = agree(channel, &local, width, n as u64)?;
    Ok(PinpointOutcome {
        outputs,
        estimates,
        silent,
        rounds_used: channel.rounds_used() - start,
    })
}

/// Majority of three, `None` if all differ.
pub fn majority_of_three(v: [u64; 3]) -> Option<u64> {
    if v[0] == v[1] || v[0] == v[2] {
        Some(v[0])
    } else if v[1] == v[2] {
        Some(v[1])
    } else {
        None
    }
}

/// Result of the full weight protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightOutcome {
    /// Per processor: the majority of its three pinpoint results, `None` for FAIL.
    pub outputs: Vec<Option<u64>>,
    /// Per processor: the three pinpoint results.
    pub runs: Vec<[u64; 3]>,
    pub intervals: IntervalOutcome,
    /// At least two families agreed everywhere on an interval holding the true weight.
    pub interval_agreement: bool,
    /// Total processors across the three runs with no comparison bit received.
    pub silent: usize,
    pub all_correct: bool,
    pub rounds_used: u64,
}

/// Tuning of the weight protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub t_scale: f64,
}

impl WeightParams {
    /// `t` calibrated for the channel's repeated-broadcast erasure rate.
    pub fn for_channel(channel: &Channel) -> Result<Self> {
        Ok(Self {
            t_scale: calibrate_t_scale(channel.n(), channel.config().effective_p(), LOCAL_MISS)?,
        })
    }
}

pub fn run_hamming_weight(channel: &mut Channel, bits: &[bool]) -> Result<WeightOutcome> {
    let params = WeightParams::for_channel(channel)?;
    run_hamming_weight_with(channel, bits, params)
}

pub fn run_hamming_weight_with(
    channel: &mut Channel,
    bits: &[bool],
    params: WeightParams,
) -> Result<WeightOutcome> {
    check_bits(channel, bits)?;
    let n = bits.len();
    let family = IntervalFamily::new(n, params.t_scale)?;
    let start = channel.rounds_used();
    let intervals = run_determine_interval(channel, &family, bits)?;
    let mut tables = HashMap::new();
    let mut runs = vec![[0u64; 3]; n];
    let mut silent = 0;
    for s in 0..3 {
        let mine: Vec<Interval> = intervals
            .labels
            .iter()
            .map(|l| {
                family
                    .interval(s, l[s])
                    .expect("labels are decoded within range")
            })
            .collect();
        let out = pinpoint_each(channel, bits, &mine, &mut tables)?;
        silent += out.silent;
        for (i, v) in out.outputs.into_iter().enumerate() {
            runs[i][s] = v;
        }
    }
    let weight = bits.iter().filter(|&&b| b).count() as u64;
    let outputs: Vec<Option<u64>> = runs.iter().map(|&r| majority_of_three(r)).collect();
    Ok(WeightOutcome {
        all_correct: outputs.iter().all(|&o| o == Some(weight)),
        interval_agreement: intervals.good_families(&family, weight) >= 2,
        outputs,
        runs,
        intervals,
        silent,
        rounds_used: channel.rounds_used() - start,
    })
}

/// Value of a symmetric function given as its table over weights `0..=n`.
pub fn eval_symmetric_function<T: Copy>(table: &[T], weight: usize) -> Result<T> {
    table.get(weight).copied().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "weight {weight} outside a table over 0..{}",
            table.len()
        ))
    })
}

pub fn parity_table(n: usize) -> Vec<bool> {
    (0..=n).map(|w| w % 2 == 1).collect()
}

pub fn majority_table(n: usize) -> Vec<bool> {
    (0..=n).map(|w| 2 * w > n).collect()
}

pub fn threshold_table(n: usize, k: usize) -> Vec<bool> {
    (0..=n).map(|w| w >= k).collect()
}
