//! The constant-round AND protocol and the equality test built on it.

use std::collections::HashMap;

use crate::bits::BitString;
use crate::channel::Channel;
use crate::codes::{CodeSpec, EQUALITY_THRESHOLD};
use crate::error::{Error, Result};

/// Rounds of the AND protocol unless configured otherwise.
pub const AND_ROUNDS: usize = 100;

/// Local state of one processor in the AND protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AndState {
    pub my_bit: bool,
    /// Set once a 0 was received or `my_bit` is 0; never reset.
    pub seen_zero: bool,
}

impl AndState {
    pub fn new(my_bit: bool) -> Self {
        Self {
            my_bit,
            seen_zero: !my_bit,
        }
    }

    /// What this processor broadcasts.
    pub fn outgoing(&self) -> bool {
        self.my_bit && !self.seen_zero
    }

    pub fn output(&self) -> bool {
        !self.seen_zero
    }
}

fn check_len<T>(channel: &Channel, inputs: &[T]) -> Result<()> {
    if inputs.len() != channel.n() {
        return Err(Error::LengthMismatch {
            expected: channel.n(),
            actual: inputs.len(),
        });
    }
    Ok(())
}

/// AND of all inputs, [`AND_ROUNDS`] repeated broadcasts.
pub fn run_and(channel: &mut Channel, bits: &[bool]) -> Result<Vec<bool>> {
    run_and_rounds(channel, bits, AND_ROUNDS)
}

/// AND of all inputs over `rounds` repeated broadcasts.
///
/// Each round a processor sends 0 iff its bit is 0 or it has received a 0;
/// it outputs 1 iff it never saw a 0. Once every processor agrees (all sent
/// 0, or nobody did) the remaining rounds are charged without drawing
/// erasures, since no reception can change any state.
pub fn run_and_rounds(channel: &mut Channel, bits: &[bool], rounds: usize) -> Result<Vec<bool>> {
    check_len(channel, bits)?;
    let n = bits.len();
    let mut state: Vec<AndState> = bits.iter().map(|&b| AndState::new(b)).collect();
    let mut erased_zeros = vec![0usize; n];
    for round in 0..rounds {
        let sent: Vec<bool> = state.iter().map(AndState::outgoing).collect();
        let zeros = sent.iter().filter(|&&b| !b).count();
        if zeros == 0 || zeros == n {
            channel.idle_broadcasts(&sent, rounds - round)?;
            break;
        }
        let grid = channel.broadcast(&sent)?;
        erased_zeros.fill(0);
        for (s, r) in grid.erased_pairs() {
            if !sent[s] {
                erased_zeros[r] += 1;
            }
        }
        for (r, st) in state.iter_mut().enumerate() {
            // A processor still sending 1 is not among the zero senders.
            if !st.seen_zero && erased_zeros[r] < zeros {
                st.seen_zero = true;
            }
        }
    }
    Ok(state.iter().map(AndState::output).collect())
}

/// Per-processor detail of one equality test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqualityOutcome {
    /// Final output of each processor (the AND over `accepted`).
    pub outputs: Vec<bool>,
    /// `c_i`: whether processor `i` found its assembled word close to its own codeword.
    pub accepted: Vec<bool>,
    /// Distance from the assembled word to the processor's own codeword, erasures counted.
    pub distances: Vec<usize>,
    /// Bits per processor chunk (rounds of the transmission step).
    pub chunk: usize,
}

/// Whether all processors hold the same string; see [`run_equality_test_with`].
pub fn run_equality_test(
    channel: &mut Channel,
    spec: &CodeSpec,
    inputs: &[BitString],
) -> Result<Vec<bool>> {
    Ok(run_equality_test_with(channel, spec, inputs, EQUALITY_THRESHOLD)?.outputs)
}

/// Equality test with an explicit distance threshold (fraction of the codeword length).
///
/// Processor `i` sends chunk `i` (bits `[i c, (i+1) c)`, `c = ceil(len / n)`) of
/// the encoding of its string, one bit per repeated broadcast; positions past
/// the codeword length are zero padding and ignored by receivers. Each
/// processor assembles the word it heard, counts its distance to its own
/// codeword (erased positions count as differences) and feeds
/// `distance <= threshold * len` into [`run_and`].
pub fn run_equality_test_with(
    channel: &mut Channel,
    spec: &CodeSpec,
    inputs: &[BitString],
    threshold: f64,
) -> Result<EqualityOutcome> {
    check_len(channel, inputs)?;
    for s in inputs {
        if s.len() != spec.k() {
            return Err(Error::LengthMismatch {
                expected: spec.k(),
                actual: s.len(),
            });
        }
    }
    let n = inputs.len();
    let len = spec.codeword_len();
    let chunk = len.div_ceil(n);

    // Encode each distinct input once.
    let mut distinct: HashMap<&BitString, usize> = HashMap::new();
    let mut codewords: Vec<BitString> = Vec::new();
    let which: Vec<usize> = inputs
        .iter()
        .map(|s| {
            *distinct.entry(s).or_insert_with(|| {
                codewords.push(spec.encode(s).expect("length checked"));
                codewords.len() - 1
            })
        })
        .collect::<Vec<_>>();

    // The word every receiver would assemble with no erasures.
    let mut assembled = BitString::zeros(len);
    for (j, &w) in which.iter().enumerate() {
        let start = j * chunk;
        if start < len {
            let width = chunk.min(len - start);
            assembled.splice(start, &codewords[w].slice(start, width));
        }
    }
    let mismatch: Vec<BitString> = codewords.iter().map(|c| c.xor(&assembled)).collect();
    let mut distances: Vec<usize> = which.iter().map(|&w| mismatch[w].count_ones()).collect();

    for t in 0..chunk {
        let sent: Vec<bool> = (0..n)
            .map(|j| {
                let pos = j * chunk + t;
                pos < len && codewords[which[j]].get(pos)
            })
            .collect();
        let grid = channel.broadcast(&sent)?;
        for (s, r) in grid.erased_pairs() {
            let pos = s * chunk + t;
            if pos < len && !mismatch[which[r]].get(pos) {
                distances[r] += 1;
            }
        }
    }

    let limit = threshold * len as f64;
    let accepted: Vec<bool> = distances.iter().map(|&d| d as f64 <= limit).collect();
    let outputs = run_and(channel, &accepted)?;
    Ok(EqualityOutcome {
        outputs,
        accepted,
        distances,
        chunk,
    })
}
