//! Constant-round input learning over a prime-field alphabet.
//!
//! Processors are split into blocks of at most `k = floor(6 log2 n)`
//! consecutive indices. Every processor broadcasts its value for `P` rounds
//! (`P` = [`PAIRS_PER_PROCESSOR`] by default). After round `t` it picks a
//! random subset `T` of its own block: each member heard in round `t` with
//! probability `1 / (2 (1 - p'))` (`p'` the per-broadcast erasure
//! probability), itself with probability 1/2, so every member is in `T` with
//! probability exactly 1/2. It then broadcasts, per `t`, the pair
//! `(sum of T's values, bitmask of T)` over two rounds. Receivers solve one
//! linear system per block from the complete pairs they heard.
//!
//! Total cost: `3P` repeated broadcasts.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::field::{smallest_prime_at_least, LinearSystem, PrimeField};
use crate::rng::SimRng;

pub const PAIRS_PER_PROCESSOR: usize = 10;

/// The field alphabet: a prime `q >= n^6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub q: u64,
}

impl FieldConfig {
    /// Checks primality and `q >= n^6`.
    pub fn new(q: u64, n: usize) -> Result<Self> {
        PrimeField::new(q)?;
        let bound = min_modulus(n)?;
        if q < bound {
            return Err(Error::InvalidArgument(format!(
                "q = {q} is below n^6 = {bound}"
            )));
        }
        Ok(Self { q })
    }

    /// Smallest admissible prime for `n` processors.
    pub fn for_processors(n: usize) -> Result<Self> {
        Ok(Self {
            q: smallest_prime_at_least(min_modulus(n)?)?,
        })
    }
}

fn min_modulus(n: usize) -> Result<u64> {
    (n as u64)
        .checked_pow(6)
        .filter(|&b| b < 1 << 63)
        .ok_or_else(|| Error::InvalidArgument(format!("n^6 does not fit below 2^63 for n = {n}")))
}

/// Consecutive blocks of at most `k = floor(6 log2 n)` processors, sizes within one of each other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    pub k: usize,
    pub blocks: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn new(n: usize) -> Self {
        let k = ((6.0 * (n as f64).log2()).floor() as usize).max(1);
        let count = n.div_ceil(k).max(1);
        let blocks = (0..count)
            .map(|b| b * n / count..(b + 1) * n / count)
            .collect();
        Self { k, blocks }
    }

    pub fn block_of(&self, j: usize) -> usize {
        self.blocks.partition_point(|b| b.end <= j)
    }

    pub fn max_block(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).max().unwrap_or(0)
    }
}

/// Bitmask of a subset of `{1..k}`: element `j` sets bit `j - 1`.
pub fn encode_subset(members: &[usize], k: usize) -> Result<u64> {
    if k > 64 {
        return Err(Error::InvalidArgument(format!(
            "subsets of [{k}] do not fit 64 bits"
        )));
    }
    members.iter().try_fold(0u64, |acc, &j| {
        if j == 0 || j > k {
            Err(Error::InvalidArgument(format!("{j} is not in [1, {k}]")))
        } else {
            Ok(acc | 1 << (j - 1))
        }
    })
}

pub fn decode_subset(element: u64, k: usize) -> Result<Vec<usize>> {
    if k < 64 && element >> k != 0 {
        return Err(Error::InvalidArgument(format!(
            "{element} is not a subset of [{k}]"
        )));
    }
    Ok((0..64)
        .filter(|b| (element >> b) & 1 == 1)
        .map(|b| b + 1)
        .collect())
}

/// One transmitted equation: `sum = sum_{j in mask} y_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationPair {
    pub sum: u64,
    pub mask: u64,
}

/// Solve a block system; free variables are drawn uniformly. Returns `(values, unique)`.
pub fn solve_block_system(
    field: &PrimeField,
    equations: &[EquationPair],
    block_size: usize,
    rng: &mut SimRng,
) -> Result<(Vec<u64>, bool)> {
    let mut sys = LinearSystem::new(*field, block_size);
    for e in equations {
        sys.add_mask_equation(e.mask, e.sum)?;
    }
    Ok(sys.solve(rng))
}

/// Result of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LargeAlphabetOutcome {
    /// Each processor's reconstruction of the whole input.
    pub outputs: Vec<Vec<u64>>,
    /// Whether every block system of the processor had a unique solution.
    pub solved: Vec<bool>,
    /// Every processor reconstructed the input exactly.
    pub all_correct: bool,
    /// The pairs each processor transmitted, in order.
    pub transmitted: Vec<Vec<EquationPair>>,
    pub rounds_used: u64,
}

pub fn run_large_alphabet(
    channel: &mut Channel,
    field: FieldConfig,
    inputs: &[u64],
) -> Result<LargeAlphabetOutcome> {
    run_large_alphabet_with(channel, field, inputs, PAIRS_PER_PROCESSOR)
}

/// As [`run_large_alphabet`] with `pairs` value rounds (and `2 * pairs` equation rounds).
pub fn run_large_alphabet_with(
    channel: &mut Channel,
    field: FieldConfig,
    inputs: &[u64],
    pairs: usize,
) -> Result<LargeAlphabetOutcome> {
    let n = channel.n();
    if inputs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: inputs.len(),
        });
    }
    let fq = PrimeField::new(field.q)?;
    if let Some(&bad) = inputs.iter().find(|&&x| x >= field.q) {
        return Err(Error::InvalidArgument(format!(
            "input {bad} is not below q = {}",
            field.q
        )));
    }
    let p_eff = channel.config().effective_p();
    if p_eff > 0.5 {
        return Err(Error::InvalidConfig(format!(
            "per-broadcast erasure probability {p_eff} exceeds 1/2; raise gamma"
        )));
    }
    let part = BlockPartition::new(n);
    let width = part.max_block();
    if width > 63 || 1u64 << width > field.q {
        return Err(Error::InvalidArgument(format!(
            "blocks of {width} do not fit masks below q"
        )));
    }
    let start = channel.rounds_used();
    let include = 1.0 / (2.0 * (1.0 - p_eff));

    // Value broadcasts, then each processor's equation for every round.
    let mut equations: Vec<Vec<EquationPair>> = vec![Vec::with_capacity(pairs); n];
    for _ in 0..pairs {
        let grid = channel.broadcast(inputs)?;
        for (i, eqs) in equations.iter_mut().enumerate() {
            let block = part.blocks[part.block_of(i)].clone();
            let (mut sum, mut mask) = (0u64, 0u64);
            for m in block.clone() {
                let chosen = if m == i {
                    channel.rng().coin()
                } else {
                    !grid.is_erased(m, i) && channel.rng().bernoulli(include)
                };
                if chosen {
                    sum = fq.add(sum, inputs[m]);
                    mask |= 1 << (m - block.start);
                }
            }
            eqs.push(EquationPair { sum, mask });
        }
    }

    // Pair t travels in two consecutive repeated broadcasts; a half pair is useless.
    let mut heard: Vec<Vec<(usize, EquationPair)>> = vec![Vec::new(); n];
    for t in 0..pairs {
        let sums: Vec<u64> = equations.iter().map(|e| e[t].sum).collect();
        let masks: Vec<u64> = equations.iter().map(|e| e[t].mask).collect();
        let g_sum = channel.broadcast(&sums)?;
        let g_mask = channel.broadcast(&masks)?;
        for (r, list) in heard.iter_mut().enumerate() {
            for s in 0..n {
                if !g_sum.is_erased(s, r) && !g_mask.is_erased(s, r) {
                    list.push((s, equations[s][t]));
                }
            }
        }
    }

    let mut outputs = Vec::with_capacity(n);
    let mut solved = Vec::with_capacity(n);
    for (i, list) in heard.iter().enumerate() {
        let mut systems: Vec<LinearSystem> = part
            .blocks
            .iter()
            .map(|b| LinearSystem::new(fq, b.len()))
            .collect();
        let own = part.block_of(i);
        systems[own].add_mask_equation(1 << (i - part.blocks[own].start), inputs[i])?;
        for &(s, eq) in list {
            systems[part.block_of(s)].add_mask_equation(eq.mask, eq.sum)?;
        }
        let mut x = Vec::with_capacity(n);
        let mut unique = true;
        for sys in &systems {
            let (values, u) = sys.solve(channel.rng());
            unique &= u;
            x.extend(values);
        }
        outputs.push(x);
        solved.push(unique);
    }
    let all_correct = outputs.iter().all(|x| x.as_slice() == inputs);
    Ok(LargeAlphabetOutcome {
        outputs,
        solved,
        all_correct,
        transmitted: equations,
        rounds_used: channel.rounds_used() - start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;

    #[test]
    fn subset_encoding() {
        assert_eq!(encode_subset(&[], 4).unwrap(), 0);
        assert_eq!(encode_subset(&[1], 4).unwrap(), 1);
        assert_eq!(encode_subset(&[1, 3], 4).unwrap(), 5);
        assert_eq!(decode_subset(5, 4).unwrap(), vec![1, 3]);
        assert!(decode_subset(16, 4).is_err());
        assert!(encode_subset(&[5], 4).is_err());
    }

    #[test]
    fn partition_shape() {
        let p = BlockPartition::new(64);
        assert_eq!(p.k, 36);
        assert_eq!(p.blocks, vec![0..32, 32..64]);
        assert_eq!(p.block_of(31), 0);
        assert_eq!(p.block_of(32), 1);
        let p = BlockPartition::new(8);
        assert_eq!((p.k, p.blocks.len()), (18, 1));
    }

    #[test]
    fn field_config_bounds() {
        assert_eq!(FieldConfig::for_processors(2).unwrap().q, 67);
        assert!(FieldConfig::new(61, 2).is_err());
        assert!(FieldConfig::new(65, 2).is_err());
    }

    #[test]
    fn noiseless_run_recovers_inputs() {
        let n = 8;
        let field = FieldConfig::for_processors(n).unwrap();
        let inputs: Vec<u64> = (0..n as u64).map(|j| (j * 7919) % field.q).collect();
        let mut ch = Channel::new(ChannelConfig::new(n, 0.0, 1, 2).unwrap()).unwrap();
        let out = run_large_alphabet(&mut ch, field, &inputs).unwrap();
        assert_eq!(out.rounds_used, 30);
        // Every reconstruction agrees with the input wherever the system was unique.
        for (x, &u) in out.outputs.iter().zip(&out.solved) {
            if u {
                assert_eq!(x, &inputs);
            }
        }
    }

    #[test]
    fn rejects_heavy_noise() {
        let field = FieldConfig::for_processors(4).unwrap();
        let mut ch = Channel::new(ChannelConfig::new(4, 0.6, 1, 0).unwrap()).unwrap();
        assert!(run_large_alphabet(&mut ch, field, &[0; 4]).is_err());
    }
}
