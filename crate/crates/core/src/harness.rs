//! Seeded Monte Carlo experiments over grids of `(n, p, gamma)`.
//!
//! Trial `t` of cell `c` runs on the seed `derive_seed(master, [c, t])`, so a
//! report depends only on the plan, never on scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channel::{required_gamma, Channel, ChannelConfig, Transcript};
use crate::codes::CodeSpec;
use crate::core_protocols::{run_and, run_equality_test};
use crate::error::{Error, Result};
use crate::large_alphabet::{run_large_alphabet, BlockPartition, FieldConfig};
use crate::learn_input::{log_star, recursion_depth, run_learn_input, Classification};
use crate::rng::{derive_seed, SimRng};
use crate::stats::{wilson_interval, Z95};
use crate::symmetric::run_hamming_weight;

/// Message length of the equality-test experiment.
pub const EQUALITY_BITS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    And,
    Equality,
    LearnInput,
    LargeAlphabet,
    HammingWeight,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::And,
        Protocol::Equality,
        Protocol::LearnInput,
        Protocol::LargeAlphabet,
        Protocol::HammingWeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::And => "and",
            Protocol::Equality => "equality",
            Protocol::LearnInput => "learn-input",
            Protocol::LargeAlphabet => "large-alphabet",
            Protocol::HammingWeight => "hamming-weight",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown protocol {s:?}")))
    }
}

/// Repetitions per broadcast: fixed, or the least reaching an erasure target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    Fixed(u32),
    Target(f64),
}

impl GammaChoice {
    pub fn resolve(self, p: f64) -> Result<u32> {
        match self {
            GammaChoice::Fixed(g) => Ok(g),
            GammaChoice::Target(t) => required_gamma(p, t),
        }
    }
}

/// One grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub protocol: Protocol,
    pub n: usize,
    pub p: f64,
    pub gamma: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub protocol: Protocol,
    pub ns: Vec<usize>,
    pub ps: Vec<f64>,
    pub gamma: GammaChoice,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

impl ExperimentPlan {
    /// Cells in report order: `n` outer, `p` inner.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.ns.is_empty() || self.ps.is_empty() {
            return Err(Error::InvalidConfig("the grid is empty".into()));
        }
        let mut cells = Vec::new();
        for &n in &self.ns {
            for &p in &self.ps {
                let cell = Cell {
                    protocol: self.protocol,
                    n,
                    p,
                    gamma: self.gamma.resolve(p)?,
                };
                validate_cell(&cell)?;
                cells.push(cell);
            }
        }
        Ok(cells)
    }
}

/// Rejects cells the protocol cannot run, before any trial starts.
pub fn validate_cell(cell: &Cell) -> Result<()> {
    let cfg = ChannelConfig::new(cell.n, cell.p, cell.gamma, 0)?;
    match cell.protocol {
        Protocol::LearnInput => {
            CodeSpec::concatenated(cell.n)?;
        }
        Protocol::LargeAlphabet => {
            if cfg.effective_p() > 0.5 {
                return Err(Error::InvalidConfig(format!(
                    "large-alphabet needs p^gamma <= 1/2, got {}",
                    cfg.effective_p()
                )));
            }
            let field = FieldConfig::for_processors(cell.n)?;
            let width = BlockPartition::new(cell.n).max_block();
            if width > 63 || 1u64 << width > field.q {
                return Err(Error::InvalidConfig(format!(
                    "n = {} is too small for block masks",
                    cell.n
                )));
            }
        }
        Protocol::HammingWeight => {
            if cell.p <= 0.0 {
                return Err(Error::InvalidConfig("hamming-weight needs p > 0".into()));
            }
        }
        Protocol::And | Protocol::Equality => {}
    }
    Ok(())
}

/// Outcome of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub classification: Classification,
    pub rounds: u64,
}

fn classify_flags(wrong: impl Iterator<Item = bool>, any_wrong: bool) -> Classification {
    if !any_wrong {
        Classification::Success
    } else if wrong.into_iter().any(|confident| confident) {
        Classification::FailWithoutKnowledge
    } else {
        Classification::FailWithKnowledge
    }
}

/// Run one trial on its own seed.
///
/// Protocols without a verification flag (AND, equality) classify any wrong
/// output as a failure without knowledge. For large-alphabet and weight runs a
/// failure is "with knowledge" when every wrong processor flagged itself
/// (ambiguous system, or FAIL).
pub fn run_trial(cell: &Cell, seed: u64) -> Result<TrialResult> {
    let n = cell.n;
    let mut rng = SimRng::substream(seed, &[0]);
    let mut ch = Channel::new(ChannelConfig::new(
        n,
        cell.p,
        cell.gamma,
        derive_seed(seed, &[1]),
    )?)?;
    let classification = match cell.protocol {
        Protocol::And => {
            let mut bits = vec![true; n];
            if rng.coin() {
                bits[rng.below(n as u64) as usize] = false;
            }
            let truth = bits.iter().all(|&b| b);
            let out = run_and(&mut ch, &bits)?;
            let wrong = out.iter().any(|&o| o != truth);
            classify_flags(std::iter::once(wrong), wrong)
        }
        Protocol::Equality => {
            let spec = CodeSpec::concatenated(EQUALITY_BITS)?;
            let base = BitString::from_u64(rng.next_u64(), EQUALITY_BITS);
            let mut inputs = vec![base; n];
            let equal = rng.coin();
            if !equal {
                let who = rng.below(n as u64) as usize;
                let at = rng.below(EQUALITY_BITS as u64) as usize;
                let bit = inputs[who].get(at);
                inputs[who].set(at, !bit);
            }
            let out = run_equality_test(&mut ch, &spec, &inputs)?;
            let wrong = out.iter().any(|&o| o != equal);
            classify_flags(std::iter::once(wrong), wrong)
        }
        Protocol::LearnInput => {
            let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
            run_learn_input(&mut ch, &bits)?.classification
        }
        Protocol::LargeAlphabet => {
            let field = FieldConfig::for_processors(n)?;
            let inputs: Vec<u64> = (0..n).map(|_| rng.below(field.q)).collect();
            let out = run_large_alphabet(&mut ch, field, &inputs)?;
            let confident_wrong = out
                .outputs
                .iter()
                .zip(&out.solved)
                .map(|(x, &u)| u && x.as_slice() != inputs.as_slice());
            classify_flags(confident_wrong, !out.all_correct)
        }
        Protocol::HammingWeight => {
            let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
            let w = bits.iter().filter(|&&b| b).count() as u64;
            let out = run_hamming_weight(&mut ch, &bits)?;
            let confident_wrong = out.outputs.iter().map(|o| o.is_some_and(|v| v != w));
            classify_flags(confident_wrong, !out.all_correct)
        }
    };
    Ok(TrialResult {
        classification,
        rounds: ch.rounds_used(),
    })
}

/// One report row. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub protocol: Protocol,
    pub n: usize,
    pub p: f64,
    pub gamma: u32,
    pub trials: u64,
    pub successes: u64,
    pub fwk: u64,
    pub fwok: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_rounds: f64,
    pub max_rounds: u64,
}

impl TrialStats {
    pub fn from_results(cell: &Cell, results: &[TrialResult]) -> Self {
        let count = |c| results.iter().filter(|r| r.classification == c).count() as u64;
        let trials = results.len() as u64;
        let successes = count(Classification::Success);
        let (ci_lo, ci_hi) = wilson_interval(successes, trials, Z95);
        let total: u64 = results.iter().map(|r| r.rounds).sum();
        Self {
            protocol: cell.protocol,
            n: cell.n,
            p: cell.p,
            gamma: cell.gamma,
            trials,
            successes,
            fwk: count(Classification::FailWithKnowledge),
            fwok: count(Classification::FailWithoutKnowledge),
            rate: successes as f64 / trials.max(1) as f64,
            ci_lo,
            ci_hi,
            mean_rounds: total as f64 / trials.max(1) as f64,
            max_rounds: results.iter().map(|r| r.rounds).max().unwrap_or(0),
        }
    }
}

/// Run every cell of the plan; one row per cell, in [`ExperimentPlan::cells`] order.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<TrialStats>> {
    let cells = plan.cells()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = plan.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let mut results: Vec<(u64, TrialResult)> = (0..plan.trials)
                    .into_par_iter()
                    .map(|t| {
                        run_trial(cell, derive_seed(plan.seed, &[c as u64, t])).map(|r| (t, r))
                    })
                    .collect::<Result<_>>()?;
                results.sort_by_key(|(t, _)| *t);
                let results: Vec<TrialResult> = results.into_iter().map(|(_, r)| r).collect();
                Ok(TrialStats::from_results(cell, &results))
            })
            .collect()
    })
}

pub fn write_csv<W: Write>(rows: &[TrialStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

pub fn to_csv(rows: &[TrialStats]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn to_json(rows: &[TrialStats]) -> Result<String> {
    serde_json::to_string_pretty(rows).map_err(|e| Error::InvalidArgument(format!("json: {e}")))
}

/// One row of a round-count scaling measurement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub rounds: u64,
    pub depth: usize,
    pub log_star: usize,
}

/// Runs the input-learning protocol once per `n` and checks `depth <= log* n + 2`.
pub fn measure_logstar_scaling(
    ns: &[usize],
    p: f64,
    gamma: u32,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "n values must be strictly ascending".into(),
        ));
    }
    ns.iter()
        .map(|&n| {
            let mut rng = SimRng::substream(seed, &[n as u64, 0]);
            let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
            let mut ch = Channel::new(ChannelConfig::new(
                n,
                p,
                gamma,
                derive_seed(seed, &[n as u64, 1]),
            )?)?;
            let out = run_learn_input(&mut ch, &bits)?;
            let row = ScalingRow {
                n,
                rounds: out.rounds_used,
                depth: out.depth,
                log_star: log_star(n as u64),
            };
            if row.depth != recursion_depth(n) || row.depth > row.log_star + 2 {
                return Err(Error::Invariant(format!(
                    "recursion depth {} at n = {n}",
                    row.depth
                )));
            }
            Ok(row)
        })
        .collect()
}

/// A recorded run of one protocol, for golden fixtures.
pub fn record_transcript(
    protocol: Protocol,
    n: usize,
    p: f64,
    gamma: u32,
    seed: u64,
) -> Result<Transcript> {
    let mut rng = SimRng::substream(seed, &[0]);
    let mut ch = Channel::recording(ChannelConfig::new(n, p, gamma, derive_seed(seed, &[1]))?)?;
    match protocol {
        Protocol::And => {
            let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
            run_and(&mut ch, &bits)?;
        }
        Protocol::Equality => {
            let spec = CodeSpec::concatenated(EQUALITY_BITS)?;
            let inputs = vec![BitString::from_u64(rng.next_u64(), EQUALITY_BITS); n];
            run_equality_test(&mut ch, &spec, &inputs)?;
        }
        Protocol::LearnInput => {
            let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
            run_learn_input(&mut ch, &bits)?;
        }
        Protocol::LargeAlphabet => {
            let field = FieldConfig::for_processors(n)?;
            let inputs: Vec<u64> = (0..n).map(|_| rng.below(field.q)).collect();
            run_large_alphabet(&mut ch, field, &inputs)?;
        }
        Protocol::HammingWeight => {
            let bits: Vec<bool> = (0..n).map(|_| rng.coin()).collect();
            run_hamming_weight(&mut ch, &bits)?;
        }
    }
    Ok(ch.transcript().cloned().unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(protocol: Protocol, ns: Vec<usize>, ps: Vec<f64>, trials: u64) -> ExperimentPlan {
        ExperimentPlan {
            protocol,
            ns,
            ps,
            gamma: GammaChoice::Fixed(1),
            trials,
            seed: 7,
            jobs: Some(1),
        }
    }

    #[test]
    fn zero_noise_learning_always_succeeds() {
        let rows =
            run_experiment(&plan(Protocol::LearnInput, vec![16, 256], vec![0.0], 10)).unwrap();
        for r in &rows {
            assert_eq!((r.successes, r.rate, r.ci_hi), (10, 1.0, 1.0));
        }
    }

    #[test]
    fn counts_conserve_trials() {
        let rows = run_experiment(&plan(Protocol::And, vec![5], vec![0.6], 50)).unwrap();
        let r = &rows[0];
        assert_eq!(r.successes + r.fwk + r.fwok, r.trials);
    }

    #[test]
    fn invalid_cells_fail_up_front() {
        assert!(run_experiment(&plan(Protocol::HammingWeight, vec![16], vec![0.0], 1)).is_err());
        assert!(run_experiment(&plan(Protocol::And, vec![16], vec![1.0], 1)).is_err());
        assert!(run_experiment(&plan(Protocol::And, vec![16], vec![0.1], 0)).is_err());
    }

    #[test]
    fn csv_header_order() {
        let rows = run_experiment(&plan(Protocol::And, vec![4], vec![0.0], 2)).unwrap();
        let csv = to_csv(&rows).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "protocol,n,p,gamma,trials,successes,fwk,fwok,rate,ci_lo,ci_hi,mean_rounds,max_rounds"
        );
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("and,4,0.0,1,2,2,0,0,1.0,"));
    }

    #[test]
    fn protocol_names_roundtrip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
    }
}
