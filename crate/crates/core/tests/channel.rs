use noisy_bcast::channel::merge_repetitions;
use noisy_bcast::{Channel, ChannelConfig, ReceptionGrid};
use proptest::prelude::*;

fn erased_fraction(ch: &mut Channel, rounds: usize) -> f64 {
    let n = ch.n();
    let sent = vec![true; n];
    let mut erased = 0usize;
    for _ in 0..rounds {
        erased += ch.broadcast(&sent).unwrap().erased_count();
    }
    erased as f64 / (rounds * n * (n - 1)) as f64
}

fn assert_close(got: f64, want: f64, samples: usize) {
    let sd = (want * (1.0 - want) / samples as f64).sqrt();
    assert!(
        (got - want).abs() < 5.0 * sd + 1e-12,
        "got {got}, want {want} ± {sd}"
    );
}

#[test]
fn marginal_erasure_rate_both_sampling_branches() {
    for (p, gamma) in [(0.1, 1), (0.3, 1), (0.8, 1), (0.3, 2), (0.8, 3)] {
        let mut ch = Channel::new(ChannelConfig::new(20, p, gamma, 11).unwrap()).unwrap();
        let f = erased_fraction(&mut ch, 400);
        assert_close(f, f64::powi(p, gamma as i32), 400 * 380);
        assert_eq!(ch.rounds_used(), 400 * gamma as u64);
    }
}

#[test]
fn recorded_repetitions_follow_the_same_law() {
    let mut ch = Channel::recording(ChannelConfig::new(12, 0.5, 3, 5).unwrap()).unwrap();
    let f = erased_fraction(&mut ch, 300);
    assert_close(f, 0.125, 300 * 132);
    assert_eq!(ch.transcript().unwrap().round_count(), 900);
}

#[test]
fn pairs_are_independent() {
    // Reciprocal and same-sender neighbouring pairs of one round.
    let p = 0.3;
    let mut ch = Channel::new(ChannelConfig::new(6, p, 1, 3).unwrap()).unwrap();
    let rounds = 40_000;
    let (mut recip, mut neigh) = (0usize, 0usize);
    for _ in 0..rounds {
        let g = ch.broadcast_round(&[false; 6]).unwrap();
        recip += (g.is_erased(0, 1) && g.is_erased(1, 0)) as usize;
        neigh += (g.is_erased(2, 3) && g.is_erased(2, 4)) as usize;
    }
    assert_close(recip as f64 / rounds as f64, p * p, rounds);
    assert_close(neigh as f64 / rounds as f64, p * p, rounds);
}

#[test]
fn rounds_are_independent() {
    let p = 0.4;
    let mut ch = Channel::new(ChannelConfig::new(3, p, 1, 8).unwrap()).unwrap();
    let rounds = 40_000;
    let mut both = 0usize;
    let mut prev = false;
    for _ in 0..rounds {
        let now = ch.broadcast_round(&[1u64, 2, 3]).unwrap().is_erased(1, 2);
        both += (now && prev) as usize;
        prev = now;
    }
    assert_close(both as f64 / (rounds - 1) as f64, p * p, rounds);
}

#[test]
fn merge_keeps_only_pairs_erased_everywhere() {
    let a = ReceptionGrid::from_erasures(vec![1u64, 2, 3], [(0, 1), (1, 2), (2, 0)]).unwrap();
    let b = ReceptionGrid::from_erasures(vec![1u64, 2, 3], [(0, 1), (2, 0)]).unwrap();
    let m = merge_repetitions(&[a, b]).unwrap();
    assert_eq!(m.erased_pairs().collect::<Vec<_>>(), vec![(0, 1), (2, 0)]);
    assert_eq!(m.get(0, 1), None);
    assert_eq!(m.get(1, 2), Some(2));
}

proptest! {
    #[test]
    fn same_seed_same_erasures(n in 2usize..12, p in 0.0f64..0.99, gamma in 1u32..4, seed: u64) {
        let cfg = ChannelConfig::new(n, p, gamma, seed).unwrap();
        let mut a = Channel::new(cfg).unwrap();
        let mut b = Channel::new(cfg).unwrap();
        let sent: Vec<u64> = (0..n as u64).collect();
        for _ in 0..3 {
            prop_assert_eq!(a.broadcast(&sent).unwrap(), b.broadcast(&sent).unwrap());
        }
        prop_assert_eq!(a.rounds_used(), 3 * gamma as u64);
    }

    #[test]
    fn diagonal_is_never_erased(n in 1usize..16, p in 0.5f64..0.999, seed: u64) {
        let mut ch = Channel::new(ChannelConfig::new(n, p, 1, seed).unwrap()).unwrap();
        let g = ch.broadcast_round(&vec![true; n]).unwrap();
        for i in 0..n {
            prop_assert_eq!(g.get(i, i), Some(true));
        }
        prop_assert!(g.erased_pairs().all(|(s, r)| s != r && s < n && r < n));
    }

    #[test]
    fn receptions_are_the_sent_symbol_or_erased(n in 2usize..10, p in 0.0f64..0.9, seed: u64) {
        let mut ch = Channel::new(ChannelConfig::new(n, p, 1, seed).unwrap()).unwrap();
        let sent: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let g = ch.broadcast_round(&sent).unwrap();
        for s in 0..n {
            for r in 0..n {
                match g.get(s, r) {
                    Some(v) => prop_assert_eq!(&v, &sent[s]),
                    None => prop_assert!(g.is_erased(s, r)),
                }
            }
        }
    }
}
