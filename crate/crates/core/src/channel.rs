//! The synchronous broadcast round with independent per-pair erasures.
//!
//! # Draw order
//!
//! Erasures of one grid are sampled over the `n(n-1)` off-diagonal ordered
//! pairs enumerated sender-major (`(0,1), (0,2), .., (1,0), (1,2), ..`).
//! With erasure probability `q <= 1/2` the stream yields, one draw each, the
//! number of surviving pairs before the next erased pair
//! (`floor(ln U / ln(1-q))`, `U` uniform in `(0,1]`). With `q > 1/2` the roles
//! flip: the gaps count erased pairs before the next surviving pair. With
//! `q = 0` no draws are consumed. The diagonal is never erased: a processor
//! always knows what it sent.
//!
//! A repeated broadcast ([`Channel::broadcast`]) costs `gamma` physical
//! rounds. Unless the channel records a transcript or carries a scripted
//! adversary, the merged grid is sampled directly with erasure probability
//! `p^gamma`, which is the law of "erased in every one of the gamma copies".
//! Recording and scripted channels run the gamma physical rounds explicitly
//! and merge them with [`merge_repetitions`].

use std::cell::OnceCell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n: usize,
    pub p: f64,
    pub gamma: u32,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(n: usize, p: f64, gamma: u32, seed: u64) -> Result<Self> {
        let config = Self { n, p, gamma, seed };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::InvalidConfig(format!(
                "p = {} is outside [0, 1)",
                self.p
            )));
        }
        if self.gamma == 0 {
            return Err(Error::InvalidConfig("gamma must be at least 1".into()));
        }
        Ok(())
    }

    /// Per-pair erasure probability of a gamma-repeated broadcast.
    pub fn effective_p(&self) -> f64 {
        self.p.powi(self.gamma as i32)
    }
}

/// Least `gamma` with `p^gamma <= target`.
pub fn required_gamma(p: f64, target: f64) -> Result<u32> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} is outside [0, 1)")));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target = {target} is outside (0, 1)"
        )));
    }
    let mut gamma = 1u32;
    let mut pow = p;
    while pow > target {
        gamma += 1;
        pow *= p;
    }
    Ok(gamma)
}

/// A value that can travel over the channel.
pub trait Symbol: Clone + PartialEq + fmt::Debug {
    /// Text form used in transcript dumps. Must never be `?`.
    fn render(&self) -> String;
}

impl Symbol for bool {
    fn render(&self) -> String {
        if *self { "1" } else { "0" }.to_string()
    }
}

impl Symbol for u64 {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Symbol for String {
    fn render(&self) -> String {
        self.clone()
    }
}

/// Bit alphabet extended with a "nothing to relay" mark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relay {
    Zero,
    One,
    Pass,
}

impl From<bool> for Relay {
    fn from(b: bool) -> Self {
        if b {
            Relay::One
        } else {
            Relay::Zero
        }
    }
}

impl Symbol for Relay {
    fn render(&self) -> String {
        match self {
            Relay::Zero => "0",
            Relay::One => "1",
            Relay::Pass => "p",
        }
        .to_string()
    }
}

/// What every processor received in one (possibly merged) round.
///
/// Entry `(sender, receiver)` is either `sent[sender]` or erased.
#[derive(Clone)]
pub struct ReceptionGrid<T> {
    n: usize,
    sent: Vec<T>,
    /// Sorted pair indices `sender * n + receiver`.
    erased: Vec<usize>,
    mask: OnceCell<Vec<u64>>,
}

impl<T: Clone> ReceptionGrid<T> {
    /// Build a grid from explicit erasures; rejects diagonal or out-of-range pairs.
    pub fn from_erasures(
        sent: Vec<T>,
        erased: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = sent.len();
        let mut idx = Vec::new();
        for (s, r) in erased {
            if s >= n || r >= n {
                return Err(Error::InvalidArgument(format!(
                    "pair ({s},{r}) out of range for n = {n}"
                )));
            }
            if s == r {
                return Err(Error::InvalidArgument(
                    "diagonal entries are never erased".into(),
                ));
            }
            idx.push(s * n + r);
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(Self::from_sorted(sent, idx))
    }

    fn from_sorted(sent: Vec<T>, erased: Vec<usize>) -> Self {
        Self {
            n: sent.len(),
            sent,
            erased,
            mask: OnceCell::new(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sent(&self) -> &[T] {
        &self.sent
    }

    fn mask(&self) -> &[u64] {
        self.mask.get_or_init(|| {
            let mut m = vec![0u64; (self.n * self.n).div_ceil(64)];
            for &k in &self.erased {
                m[k >> 6] |= 1 << (k & 63);
            }
            m
        })
    }

    #[inline]
    pub fn is_erased(&self, sender: usize, receiver: usize) -> bool {
        if self.erased.is_empty() {
            return false;
        }
        let k = sender * self.n + receiver;
        (self.mask()[k >> 6] >> (k & 63)) & 1 == 1
    }

    /// Entry `(sender, receiver)`; `None` is the erasure mark.
    #[inline]
    pub fn get(&self, sender: usize, receiver: usize) -> Option<T> {
        if self.is_erased(sender, receiver) {
            None
        } else {
            Some(self.sent[sender].clone())
        }
    }

    /// Erased `(sender, receiver)` pairs in sender-major order.
    pub fn erased_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.erased.iter().map(move |&k| (k / n, k % n))
    }

    pub fn erased_count(&self) -> usize {
        self.erased.len()
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> ReceptionGrid<U> {
        ReceptionGrid::from_sorted(self.sent.iter().map(f).collect(), self.erased.clone())
    }
}

impl<T: Clone + fmt::Debug> fmt::Debug for ReceptionGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReceptionGrid")
            .field("n", &self.n)
            .field("sent", &self.sent)
            .field("erased", &self.erased)
            .finish()
    }
}

impl<T: PartialEq> PartialEq for ReceptionGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.sent == other.sent && self.erased == other.erased
    }
}

/// Merge physical copies of one broadcast: an entry is erased only if every copy erased it.
pub fn merge_repetitions<T: Clone + PartialEq>(
    copies: &[ReceptionGrid<T>],
) -> Result<ReceptionGrid<T>> {
    let first = copies
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to merge".into()))?;
    if copies.iter().any(|c| c.sent != first.sent) {
        return Err(Error::InvalidArgument(
            "copies carry different sent vectors".into(),
        ));
    }
    let mut erased = first.erased.clone();
    for c in &copies[1..] {
        erased.retain(|k| c.erased.binary_search(k).is_ok());
    }
    Ok(ReceptionGrid::from_sorted(first.sent.clone(), erased))
}

/// Every physical round of a recorded run, in order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    rounds: Vec<ReceptionGrid<String>>,
}

impl Transcript {
    pub fn rounds(&self) -> &[ReceptionGrid<String>] {
        &self.rounds
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Newline-delimited `round,sender,receiver,symbol` records, `?` for erased.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (round, grid) in self.rounds.iter().enumerate() {
            for s in 0..grid.n() {
                for r in 0..grid.n() {
                    let sym = grid.get(s, r).unwrap_or_else(|| "?".to_string());
                    out.push_str(&format!("{round},{s},{r},{sym}\n"));
                }
            }
        }
        out
    }
}

/// Scripted erasures: `(physical round, sender, receiver) -> erase?`.
pub type Adversary = Box<dyn FnMut(u64, usize, usize) -> bool + Send>;

/// A simulated network of `n` processors sharing one erasure channel.
///
/// The channel owns every random draw of a run: erasures and the processors'
/// local coins ([`Channel::rng`]).
pub struct Channel {
    config: ChannelConfig,
    rng: SimRng,
    rounds: u64,
    transcript: Option<Transcript>,
    adversary: Option<Adversary>,
}

impl fmt::Debug for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Channel")
            .field("config", &self.config)
            .field("rounds", &self.rounds)
            .field("recording", &self.transcript.is_some())
            .field("scripted", &self.adversary.is_some())
            .finish()
    }
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rng: SimRng::new(config.seed),
            rounds: 0,
            transcript: None,
            adversary: None,
        })
    }

    /// Channel that keeps every physical grid.
    pub fn recording(config: ChannelConfig) -> Result<Self> {
        let mut ch = Self::new(config)?;
        ch.transcript = Some(Transcript::default());
        Ok(ch)
    }

    /// Channel whose random erasures are augmented by `adversary`.
    pub fn with_adversary(config: ChannelConfig, adversary: Adversary) -> Result<Self> {
        let mut ch = Self::new(config)?;
        ch.adversary = Some(adversary);
        Ok(ch)
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn rounds_used(&self) -> u64 {
        self.rounds
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    /// Stream for the processors' local randomness.
    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Sub-network of `n` processors with its own stream and round counter.
    ///
    /// Used for groups that run sub-protocols side by side; the caller
    /// charges the parent with [`Channel::advance`].
    pub fn fork(&mut self, n: usize) -> Result<Channel> {
        let seed = self.rng.next_u64();
        Channel::new(ChannelConfig {
            n,
            seed,
            ..self.config
        })
    }

    /// Charge `rounds` physical rounds spent elsewhere (e.g. in forked groups).
    pub fn advance(&mut self, rounds: u64) {
        self.rounds += rounds;
    }

    fn check_len<T>(&self, sent: &[T]) -> Result<()> {
        if sent.len() != self.config.n {
            return Err(Error::LengthMismatch {
                expected: self.config.n,
                actual: sent.len(),
            });
        }
        Ok(())
    }

    /// One physical round.
    pub fn broadcast_round<T: Symbol>(&mut self, sent: &[T]) -> Result<ReceptionGrid<T>> {
        self.check_len(sent)?;
        let mut erased = sample_erasures(&mut self.rng, self.config.n, self.config.p);
        if let Some(adv) = self.adversary.as_mut() {
            let n = self.config.n;
            for s in 0..n {
                for r in 0..n {
                    if s != r && adv(self.rounds, s, r) {
                        erased.push(s * n + r);
                    }
                }
            }
            erased.sort_unstable();
            erased.dedup();
        }
        let grid = ReceptionGrid::from_sorted(sent.to_vec(), erased);
        if let Some(t) = self.transcript.as_mut() {
            t.rounds.push(grid.map(Symbol::render));
        }
        self.rounds += 1;
        Ok(grid)
    }

    /// Charge `count` repeated broadcasts of `sent` whose receptions cannot change any state.
    ///
    /// Recording and scripted channels still run them so transcripts stay
    /// complete; otherwise no erasures are drawn.
    pub fn idle_broadcasts<T: Symbol>(&mut self, sent: &[T], count: usize) -> Result<()> {
        self.check_len(sent)?;
        if self.transcript.is_some() || self.adversary.is_some() {
            for _ in 0..count {
                self.broadcast(sent)?;
            }
        } else {
            self.rounds += count as u64 * self.config.gamma as u64;
        }
        Ok(())
    }

    /// `gamma` physical rounds of the same vector, merged.
    pub fn broadcast<T: Symbol>(&mut self, sent: &[T]) -> Result<ReceptionGrid<T>> {
        let gamma = self.config.gamma;
        if gamma == 1 {
            return self.broadcast_round(sent);
        }
        if self.transcript.is_some() || self.adversary.is_some() {
            let copies = (0..gamma)
                .map(|_| self.broadcast_round(sent))
                .collect::<Result<Vec<_>>>()?;
            return merge_repetitions(&copies);
        }
        self.check_len(sent)?;
        let erased = sample_erasures(&mut self.rng, self.config.n, self.config.effective_p());
        self.rounds += gamma as u64;
        Ok(ReceptionGrid::from_sorted(sent.to_vec(), erased))
    }
}

/// Sorted erased pair indices for one grid; see the module docs for the draw order.
fn sample_erasures(rng: &mut SimRng, n: usize, q: f64) -> Vec<usize> {
    let pairs = (n * n.saturating_sub(1)) as u64;
    if q <= 0.0 || pairs == 0 {
        return Vec::new();
    }
    let to_pair = |k: u64| -> usize {
        let k = k as usize;
        let s = k / (n - 1);
        let r = k % (n - 1);
        let r = if r >= s { r + 1 } else { r };
        s * n + r
    };
    let skip_to_erasures = q <= 0.5;
    let ln_c = if skip_to_erasures {
        (1.0 - q).ln()
    } else {
        q.ln()
    };
    let mut hits = Vec::new();
    let mut pos = 0u64;
    loop {
        let gap = rng.geometric_gap(ln_c);
        pos = match pos.checked_add(gap) {
            Some(p) if p < pairs => p,
            _ => break,
        };
        hits.push(pos);
        pos += 1;
    }
    if skip_to_erasures {
        hits.into_iter().map(to_pair).collect()
    } else {
        let mut erased = Vec::with_capacity(pairs as usize - hits.len());
        let mut next = hits.into_iter().peekable();
        for k in 0..pairs {
            if next.peek() == Some(&k) {
                next.next();
            } else {
                erased.push(to_pair(k));
            }
        }
        erased
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, p: f64, gamma: u32, seed: u64) -> ChannelConfig {
        ChannelConfig::new(n, p, gamma, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(0, 0.1, 1, 0).is_err());
        assert!(ChannelConfig::new(3, 1.0, 1, 0).is_err());
        assert!(ChannelConfig::new(3, -0.1, 1, 0).is_err());
        assert!(ChannelConfig::new(3, 0.5, 0, 0).is_err());
        assert!(ChannelConfig::new(1, 0.0, 1, 0).is_ok());
    }

    #[test]
    fn required_gamma_examples() {
        assert_eq!(required_gamma(0.0, 0.3).unwrap(), 1);
        assert_eq!(required_gamma(0.01, 0.01).unwrap(), 1);
        // 0.5^6 = 0.0156 > 0.01 >= 0.5^7 = 0.0078
        assert_eq!(required_gamma(0.5, 0.01).unwrap(), 7);
        assert!(required_gamma(1.0, 0.01).is_err());
        assert!(required_gamma(0.5, 0.0).is_err());
    }

    #[test]
    fn zero_noise_grid_has_no_erasures() {
        let mut ch = Channel::new(cfg(6, 0.0, 3, 1)).unwrap();
        let grid = ch
            .broadcast(&[true, false, true, true, false, true])
            .unwrap();
        assert_eq!(grid.erased_count(), 0);
        assert_eq!(ch.rounds_used(), 3);
        assert_eq!(grid.get(1, 4), Some(false));
    }

    #[test]
    fn rejects_wrong_length() {
        let mut ch = Channel::new(cfg(3, 0.2, 1, 1)).unwrap();
        assert_eq!(
            ch.broadcast_round(&[true, false]).unwrap_err(),
            Error::LengthMismatch {
                expected: 3,
                actual: 2
            }
        );
    }

    #[test]
    fn diagonal_never_erased_even_at_high_p() {
        let mut ch = Channel::new(cfg(5, 0.99, 1, 9)).unwrap();
        for _ in 0..50 {
            let grid = ch.broadcast_round(&[1u64, 2, 3, 4, 5]).unwrap();
            for i in 0..5 {
                assert_eq!(grid.get(i, i), Some(i as u64 + 1));
            }
        }
    }

    #[test]
    fn gamma_one_matches_single_round() {
        let mut a = Channel::new(cfg(7, 0.3, 1, 42)).unwrap();
        let mut b = Channel::new(cfg(7, 0.3, 1, 42)).unwrap();
        let sent = vec![true; 7];
        for _ in 0..20 {
            assert_eq!(
                a.broadcast(&sent).unwrap(),
                b.broadcast_round(&sent).unwrap()
            );
        }
    }

    #[test]
    fn merge_is_exhaustively_all_or_nothing() {
        // n = 2, gamma = 3: every combination of per-copy erasures on both pairs.
        let pairs = [(0usize, 1usize), (1, 0)];
        for pattern in 0u32..64 {
            let copies: Vec<_> = (0..3)
                .map(|c| {
                    let erased = pairs
                        .iter()
                        .enumerate()
                        .filter(|(pi, _)| pattern >> (c * 2 + *pi as u32) & 1 == 1)
                        .map(|(_, &pair)| pair);
                    ReceptionGrid::from_erasures(vec![true, false], erased).unwrap()
                })
                .collect();
            let merged = merge_repetitions(&copies).unwrap();
            for (pi, &(s, r)) in pairs.iter().enumerate() {
                let all = (0..3).all(|c| pattern >> (c * 2 + pi as u32) & 1 == 1);
                assert_eq!(
                    merged.is_erased(s, r),
                    all,
                    "pattern {pattern:06b} pair {pi}"
                );
            }
        }
    }

    #[test]
    fn recording_counts_physical_rounds() {
        let mut ch = Channel::recording(cfg(3, 0.5, 4, 5)).unwrap();
        ch.broadcast(&[true, true, false]).unwrap();
        ch.broadcast_round(&[false, false, false]).unwrap();
        let t = ch.transcript().unwrap();
        assert_eq!(t.round_count(), 5);
        assert_eq!(ch.rounds_used(), 5);
        assert_eq!(t.to_records().lines().count(), 5 * 9);
    }

    #[test]
    fn adversary_erases_everything() {
        let adv: Adversary = Box::new(|_, _, _| true);
        let mut ch = Channel::with_adversary(cfg(4, 0.0, 2, 0), adv).unwrap();
        let grid = ch.broadcast(&[true; 4]).unwrap();
        assert_eq!(grid.erased_count(), 12);
        assert_eq!(ch.rounds_used(), 2);
    }

    #[test]
    fn from_erasures_rejects_diagonal() {
        assert!(ReceptionGrid::from_erasures(vec![true, true], [(1, 1)]).is_err());
    }
}
