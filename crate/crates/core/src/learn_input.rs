//! The recursive protocol by which every processor learns the whole input.
//!
//! Instances with fewer than [`BASE_CASE_LIMIT`] processors broadcast their
//! bits [`BASE_CASE_ROUNDS`] times. Larger instances split into groups of
//! `ceil(log2 n)` consecutive processors (the last group may be short), solve
//! every group recursively, then:
//!
//! 1. broadcast the group-level verification flag `r'`;
//! 2. mark every index whose group sent only 1s (`R_i`);
//! 3. send the group codeword, one chunk per member cycled through a fixed budget of
//!    [`group_code_budget`] repeated broadcasts;
//! 4. let successful processors relay the bits of failed processors;
//! 5. assemble a candidate and verify it with the equality test.
//!
//! Every broadcast is repeated `gamma` times (taken from the channel
//! configuration). Groups run on forked sub-channels; the parent is charged
//! the longest group, which is what a round-synchronous execution of the
//! (oblivious) group runs costs.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channel::{Channel, Relay};
use crate::codes::{CodeSpec, ReceivedWord, DECODE_FRACTION};
use crate::core_protocols::run_equality_test;
use crate::error::{Error, Result};

/// Instances below this size take the base case.
pub const BASE_CASE_LIMIT: usize = 100;
/// Repeated broadcasts of the base case.
pub const BASE_CASE_ROUNDS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Success,
    FailWithKnowledge,
    FailWithoutKnowledge,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Success => "SUCCESS",
            Classification::FailWithKnowledge => "FAIL_WITH_KNOWLEDGE",
            Classification::FailWithoutKnowledge => "FAIL_WITHOUT_KNOWLEDGE",
        })
    }
}

/// Three-way outcome: every `(X_i, v_i) = (truth, 1)`; else every `v_i = 0`; else neither.
pub fn classify_outcome(
    truth: &BitString,
    outputs: &[BitString],
    verified: &[bool],
) -> Classification {
    if outputs.iter().all(|x| x == truth) && verified.iter().all(|&v| v) {
        Classification::Success
    } else if verified.iter().all(|&v| !v) {
        Classification::FailWithKnowledge
    } else {
        Classification::FailWithoutKnowledge
    }
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Iterated logarithm: how often `log2` must be applied to reach a value `<= 1`.
pub fn log_star(n: u64) -> usize {
    let mut x = n as f64;
    let mut k = 0;
    while x > 1.0 {
        x = x.log2();
        k += 1;
    }
    k
}

/// Instance sizes along the recursion (largest group at each depth), ending in a base case.
pub fn recursion_plan(n: usize) -> Vec<usize> {
    let mut plan = vec![n];
    while *plan.last().unwrap() >= BASE_CASE_LIMIT {
        let m = *plan.last().unwrap();
        plan.push(ceil_log2(m));
    }
    plan
}

/// Number of recursive levels above the base case.
pub fn recursion_depth(n: usize) -> usize {
    recursion_plan(n).len() - 1
}

/// Contiguous groups of `ceil(log2 n)` processors, the last possibly shorter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPartition {
    pub group_size: usize,
    pub groups: Vec<Range<usize>>,
}

impl GroupPartition {
    pub fn new(n: usize) -> Self {
        let group_size = ceil_log2(n).max(1);
        let groups = (0..n)
            .step_by(group_size)
            .map(|s| s..(s + group_size).min(n))
            .collect();
        Self { group_size, groups }
    }

    /// Group index of processor `j` (0-based).
    pub fn group_of(&self, j: usize) -> usize {
        j / self.group_size
    }

    /// 1-based position of `j` within its group (the chunk it transmits).
    pub fn position_in_group(&self, j: usize) -> usize {
        j % self.group_size + 1
    }
}

/// Helper slot `ceil(i z / n)` of processor `i` (1-based) when `z` indices failed.
pub fn helper_slot(n: usize, z: usize, i: usize) -> usize {
    (i * z).div_ceil(n)
}

/// Helpers `M_s = { t : n(s-1)/z < t <= n s / z }` (1-based, inclusive bounds).
pub fn helper_set(n: usize, z: usize, s: usize) -> std::ops::RangeInclusive<usize> {
    assert!(z >= 1 && s >= 1 && s <= z);
    (n * (s - 1) / z + 1)..=(n * s / z)
}

fn group_spec(size: usize) -> CodeSpec {
    CodeSpec::concatenated(size).expect("group sizes are small")
}

/// Repeated broadcasts reserved for the group codeword: the largest chunk
/// `ceil(len / s)` over all group sizes `s`, so every level costs the same.
pub fn group_code_budget() -> usize {
    (1..=64)
        .map(|s| group_spec(s).codeword_len().div_ceil(s))
        .max()
        .unwrap()
}

/// Own cost and shape of one recursion depth (maxima over parallel instances).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    pub depth: usize,
    pub instances: usize,
    pub instance_size: usize,
    pub base_case: bool,
    pub group_size: usize,
    pub groups: usize,
    /// Groups whose members did not all verify.
    pub failed_groups: usize,
    /// Physical rounds spent at this depth, excluding deeper levels.
    pub rounds: u64,
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnOutcome {
    pub outputs: Vec<BitString>,
    pub verified: Vec<bool>,
    pub classification: Classification,
    pub rounds_used: u64,
    pub depth: usize,
    pub levels: Vec<LevelReport>,
    /// Top-level groups whose members all verified (empty for a base case).
    pub group_success: Vec<bool>,
    /// The final equality test accepted strings that were not all equal.
    pub verification_false_accept: bool,
}

/// Machine-readable run summary (outputs omitted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub n: usize,
    pub p: f64,
    pub gamma: u32,
    pub seed: u64,
    pub classification: Classification,
    pub rounds_used: u64,
    pub depth: usize,
    pub levels: Vec<LevelReport>,
    pub group_success: Vec<bool>,
    pub verification_false_accept: bool,
}

impl LearnOutcome {
    pub fn report(&self, channel: &Channel) -> LearnReport {
        let c = channel.config();
        LearnReport {
            n: c.n,
            p: c.p,
            gamma: c.gamma,
            seed: c.seed,
            classification: self.classification,
            rounds_used: self.rounds_used,
            depth: self.depth,
            levels: self.levels.clone(),
            group_success: self.group_success.clone(),
            verification_false_accept: self.verification_false_accept,
        }
    }
}

/// Run the protocol on `bits` (one per processor) and classify the result.
pub fn run_learn_input(channel: &mut Channel, bits: &[bool]) -> Result<LearnOutcome> {
    if bits.len() != channel.n() {
        return Err(Error::LengthMismatch {
            expected: channel.n(),
            actual: bits.len(),
        });
    }
    let start = channel.rounds_used();
    let mut levels = Vec::new();
    let mut group_success = Vec::new();
    let (outputs, verified) = learn(channel, bits, 0, &mut levels, Some(&mut group_success))?;
    let truth = BitString::from_bools(bits);
    let classification = classify_outcome(&truth, &outputs, &verified);
    let all_equal = outputs.windows(2).all(|w| w[0] == w[1]);
    Ok(LearnOutcome {
        verification_false_accept: verified.iter().all(|&v| v) && !all_equal,
        outputs,
        verified,
        classification,
        rounds_used: channel.rounds_used() - start,
        depth: levels.len() - 1,
        levels,
        group_success,
    })
}

/// Candidate strings of the base case: bit `j` as heard from `j` in any of
/// [`BASE_CASE_ROUNDS`] broadcasts, else a fair coin.
pub fn run_base_case(channel: &mut Channel, bits: &[bool]) -> Result<Vec<BitString>> {
    let n = bits.len();
    let mut erasures = vec![0u16; n * n];
    for _ in 0..BASE_CASE_ROUNDS {
        let grid = channel.broadcast(bits)?;
        for (s, r) in grid.erased_pairs() {
            erasures[s * n + r] += 1;
        }
    }
    let truth = BitString::from_bools(bits);
    let mut out = vec![truth; n];
    for (r, s) in (0..n).flat_map(|r| (0..n).map(move |s| (r, s))) {
        if erasures[s * n + r] as usize == BASE_CASE_ROUNDS {
            let coin = channel.rng().coin();
            out[r].set(s, coin);
        }
    }
    Ok(out)
}

fn record(levels: &mut Vec<LevelReport>, entry: LevelReport) {
    if levels.len() <= entry.depth {
        levels.resize(entry.depth + 1, LevelReport::default());
    }
    let slot = &mut levels[entry.depth];
    slot.depth = entry.depth;
    slot.instances += 1;
    slot.instance_size = slot.instance_size.max(entry.instance_size);
    slot.base_case = entry.base_case;
    slot.group_size = slot.group_size.max(entry.group_size);
    slot.groups += entry.groups;
    slot.failed_groups += entry.failed_groups;
    slot.rounds = slot.rounds.max(entry.rounds);
}

fn verify(channel: &mut Channel, candidates: &[BitString]) -> Result<Vec<bool>> {
    let spec = CodeSpec::concatenated(candidates.len())?;
    run_equality_test(channel, &spec, candidates)
}

fn learn(
    ch: &mut Channel,
    bits: &[bool],
    depth: usize,
    levels: &mut Vec<LevelReport>,
    group_success: Option<&mut Vec<bool>>,
) -> Result<(Vec<BitString>, Vec<bool>)> {
    let n = bits.len();
    if n < BASE_CASE_LIMIT {
        let start = ch.rounds_used();
        let candidates = run_base_case(ch, bits)?;
        let verified = verify(ch, &candidates)?;
        record(
            levels,
            LevelReport {
                depth,
                instance_size: n,
                base_case: true,
                rounds: ch.rounds_used() - start,
                ..Default::default()
            },
        );
        return Ok((candidates, verified));
    }

    let part = GroupPartition::new(n);
    let ngroups = part.groups.len();

    // (a) recurse on every group, side by side.
    let mut sub_x: Vec<BitString> = Vec::with_capacity(n);
    let mut sub_r: Vec<bool> = Vec::with_capacity(n);
    let mut longest = 0;
    for range in &part.groups {
        let mut sub = ch.fork(range.len())?;
        let (x, r) = learn(&mut sub, &bits[range.clone()], depth + 1, levels, None)?;
        longest = longest.max(sub.rounds_used());
        sub_x.extend(x);
        sub_r.extend(r);
    }
    ch.advance(longest);
    let start = ch.rounds_used();

    // (b), (c) flags; a receiver marks group h failed unless every 0 from h was erased.
    let zeros_in: Vec<usize> = part
        .groups
        .iter()
        .map(|g| g.clone().filter(|&j| !sub_r[j]).count())
        .collect();
    if let Some(gs) = group_success {
        *gs = zeros_in.iter().map(|&z| z == 0).collect();
    }
    let flags = ch.broadcast(&sub_r)?;
    let mut hidden: HashMap<(usize, usize), usize> = HashMap::new();
    for (s, r) in flags.erased_pairs() {
        if !sub_r[s] {
            *hidden.entry((r, part.group_of(s))).or_default() += 1;
        }
    }
    let failed: Vec<usize> = (0..ngroups).filter(|&h| zeros_in[h] > 0).collect();
    // Groups with R_i = 0, per receiver, ascending.
    let zero_groups: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            failed
                .iter()
                .copied()
                .filter(|&h| hidden.get(&(i, h)).copied().unwrap_or(0) < zeros_in[h])
                .collect()
        })
        .collect();

    // (d) group codewords within a fixed budget of repeated broadcasts.
    let specs: Vec<CodeSpec> = part.groups.iter().map(|g| group_spec(g.len())).collect();
    let chunk: Vec<usize> = part
        .groups
        .iter()
        .zip(&specs)
        .map(|(g, s)| s.codeword_len().div_ceil(g.len()))
        .collect();
    let mut encoded: HashMap<(usize, &BitString), BitString> = HashMap::new();
    let codewords: Vec<BitString> = (0..n)
        .map(|j| {
            let h = part.group_of(j);
            encoded
                .entry((h, &sub_x[j]))
                .or_insert_with(|| specs[h].encode(&sub_x[j]).expect("group-sized string"))
                .clone()
        })
        .collect();
    let offset = |j: usize| (part.position_in_group(j) - 1) * chunk[part.group_of(j)];
    let mut assembly: Vec<BitString> = specs
        .iter()
        .map(|s| BitString::zeros(s.codeword_len()))
        .collect();
    for j in 0..n {
        let h = part.group_of(j);
        let len = specs[h].codeword_len();
        let at = offset(j);
        if at < len {
            let width = chunk[h].min(len - at);
            assembly[h].splice(at, &codewords[j].slice(at, width));
        }
    }
    // Message of each assembly when it is a codeword (all members agree).
    let agreed: Vec<Option<BitString>> = part
        .groups
        .iter()
        .map(|g| {
            let first = &sub_x[g.start];
            g.clone().all(|j| &sub_x[j] == first).then(|| first.clone())
        })
        .collect();
    // Members cycle through their chunk for the whole budget; a position is
    // lost only when every copy of it was erased.
    let budget = group_code_budget();
    let copies = |h: usize, pos: usize| (budget - pos % chunk[h]).div_ceil(chunk[h]);
    let mut missed: Vec<(u32, u32, u16)> = Vec::new();
    for t in 0..budget {
        let sent: Vec<bool> = (0..n)
            .map(|j| {
                let h = part.group_of(j);
                let pos = offset(j) + t % chunk[h];
                pos < specs[h].codeword_len() && codewords[j].get(pos)
            })
            .collect();
        let grid = ch.broadcast(&sent)?;
        for (s, r) in grid.erased_pairs() {
            let h = part.group_of(s);
            let pos = offset(s) + t % chunk[h];
            if pos < specs[h].codeword_len() {
                missed.push((r as u32, h as u32, pos as u16));
            }
        }
    }
    missed.sort_unstable();
    let mut lost: Vec<(u32, u32, u16)> = Vec::new();
    for run in missed.chunk_by(|a, b| a == b) {
        let (_, h, pos) = run[0];
        if run.len() == copies(h as usize, pos as usize) {
            lost.push(run[0]);
        }
    }

    // (e)-(g) helpers relay the bits of failed indices.
    let any_failed = zero_groups.iter().any(|z| !z.is_empty());
    let relays = if any_failed {
        let heard = ch.broadcast(bits)?;
        let relay: Vec<Relay> = (0..n)
            .map(|i| {
                let z: usize = zero_groups[i].iter().map(|&h| part.groups[h].len()).sum();
                if z == 0 {
                    return Relay::Pass;
                }
                let mut slot = helper_slot(n, z, i + 1);
                for &h in &zero_groups[i] {
                    let size = part.groups[h].len();
                    if slot <= size {
                        let target = part.groups[h].start + slot - 1;
                        return heard.get(target, i).map_or(Relay::Pass, Relay::from);
                    }
                    slot -= size;
                }
                unreachable!("helper slot lies within the failed indices")
            })
            .collect();
        Some(ch.broadcast(&relay)?)
    } else {
        ch.idle_broadcasts(bits, 1)?;
        ch.idle_broadcasts(&vec![Relay::Pass; n], 1)?;
        None
    };

    // (h) assemble candidates.
    let mut decoded: HashMap<(usize, Vec<u16>), Option<BitString>> = HashMap::new();
    let mut cursor = 0;
    let mut candidates = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = BitString::zeros(n);
        let zg = &zero_groups[i];
        let z: usize = zg.iter().map(|&h| part.groups[h].len()).sum();
        let mut failed_seen = 0;
        for (h, g) in part.groups.iter().enumerate() {
            let mut positions = Vec::new();
            while cursor < lost.len()
                && lost[cursor].0 as usize == i
                && lost[cursor].1 as usize == h
            {
                positions.push(lost[cursor].2);
                cursor += 1;
            }
            if zg.binary_search(&h).is_ok() {
                let relays = relays.as_ref().expect("failed groups imply a relay round");
                for j in g.clone() {
                    failed_seen += 1;
                    let bit = helper_set(n, z, failed_seen)
                        .any(|t| relays.get(t - 1, i) == Some(Relay::One));
                    x.set(j, bit);
                }
                continue;
            }
            let len = specs[h].codeword_len();
            let received = len - positions.len();
            let value = if received as f64 >= DECODE_FRACTION * len as f64 {
                decoded
                    .entry((h, positions))
                    .or_insert_with_key(|(_, pos)| {
                        decode_group(&specs[h], &assembly[h], agreed[h].as_ref(), pos)
                    })
                    .clone()
            } else {
                None
            };
            let value = value.unwrap_or_else(|| {
                let coins: Vec<bool> = (0..g.len()).map(|_| ch.rng().coin()).collect();
                BitString::from_bools(&coins)
            });
            x.splice(g.start, &value);
        }
        x.set(i, bits[i]);
        candidates.push(x);
    }
    debug_assert_eq!(cursor, lost.len());

    // (i) verification.
    let verified = verify(ch, &candidates)?;
    record(
        levels,
        LevelReport {
            depth,
            instance_size: n,
            base_case: false,
            group_size: part.group_size,
            groups: ngroups,
            failed_groups: failed.len(),
            rounds: ch.rounds_used() - start,
            ..Default::default()
        },
    );
    Ok((candidates, verified))
}

/// Decode group codeword `assembly` with the given positions erased.
///
/// When the assembly is the codeword of `agreed` and the erasures stay below
/// half the design distance, the decoder's guarantee already fixes the answer
/// (no other codeword is that close), so the decoder is not run.
fn decode_group(
    spec: &CodeSpec,
    assembly: &BitString,
    agreed: Option<&BitString>,
    erased: &[u16],
) -> Option<BitString> {
    if let Some(m) = agreed {
        if 2 * erased.len() < spec.design_distance() {
            return Some(m.clone());
        }
    }
    let mut rx = ReceivedWord::from_codeword(assembly);
    for &p in erased {
        rx.erase(p as usize);
    }
    spec.decode(&rx).ok()
}
