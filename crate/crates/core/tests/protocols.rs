use noisy_bcast::channel::Adversary;
use noisy_bcast::core_protocols::{run_and, run_and_rounds, run_equality_test};
use noisy_bcast::large_alphabet::{
    run_large_alphabet, run_large_alphabet_with, BlockPartition, FieldConfig,
};
use noisy_bcast::learn_input::{recursion_depth, run_learn_input};
use noisy_bcast::{BitString, Channel, ChannelConfig, Classification, CodeSpec, SimRng};
use proptest::prelude::*;

fn channel(n: usize, p: f64, gamma: u32, seed: u64) -> Channel {
    Channel::new(ChannelConfig::new(n, p, gamma, seed).unwrap()).unwrap()
}

fn random_bits(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = SimRng::new(seed);
    (0..n).map(|_| rng.coin()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn and_never_invents_a_zero(n in 1usize..40, p in 0.0f64..0.99, seed: u64) {
        let mut ch = channel(n, p, 1, seed);
        prop_assert_eq!(run_and(&mut ch, &vec![true; n]).unwrap(), vec![true; n]);
    }

    #[test]
    fn and_zero_holders_output_zero(n in 2usize..40, p in 0.0f64..0.99, seed: u64, zero in 0usize..40) {
        let mut bits = vec![true; n];
        bits[zero % n] = false;
        let mut ch = channel(n, p, 1, seed);
        prop_assert!(!run_and(&mut ch, &bits).unwrap()[zero % n]);
    }

    #[test]
    fn learning_without_noise_is_exact(n in 1usize..140, seed: u64) {
        let bits = random_bits(n, seed);
        let mut ch = channel(n, 0.0, 1, seed);
        let out = run_learn_input(&mut ch, &bits).unwrap();
        prop_assert_eq!(out.classification, Classification::Success);
    }
}

#[test]
fn and_under_total_erasure() {
    let adv: Adversary = Box::new(|_, _, _| true);
    let mut ch = Channel::with_adversary(ChannelConfig::new(5, 0.0, 1, 0).unwrap(), adv).unwrap();
    assert_eq!(run_and(&mut ch, &[true; 5]).unwrap(), vec![true; 5]);
    assert_eq!(ch.rounds_used(), 100);
}

#[test]
fn and_relays_across_a_cut() {
    // 0 can only reach 1, and 1 can only reach 2: the zero needs two hops.
    let adv: Adversary = Box::new(|_, s, r| !(s == 0 && r == 1 || s == 1 && r == 2));
    let mut ch = Channel::with_adversary(ChannelConfig::new(3, 0.0, 1, 0).unwrap(), adv).unwrap();
    assert_eq!(
        run_and_rounds(&mut ch, &[false, true, true], 1).unwrap(),
        vec![false, false, true]
    );
    let adv: Adversary = Box::new(|_, s, r| !(s == 0 && r == 1 || s == 1 && r == 2));
    let mut ch = Channel::with_adversary(ChannelConfig::new(3, 0.0, 1, 0).unwrap(), adv).unwrap();
    assert_eq!(
        run_and_rounds(&mut ch, &[false, true, true], 2).unwrap(),
        vec![false; 3]
    );
}

#[test]
fn equality_under_noise() {
    let spec = CodeSpec::concatenated(24).unwrap();
    let s = BitString::from_u64(0xabcdef, 24);
    let mut t = s.clone();
    t.set(5, !t.get(5));
    for seed in 0..20 {
        let mut ch = channel(64, 0.1, 2, seed);
        assert_eq!(
            run_equality_test(&mut ch, &spec, &vec![s.clone(); 64]).unwrap(),
            vec![true; 64]
        );
        let mut inputs = vec![s.clone(); 64];
        inputs[(seed * 7) as usize % 64] = t.clone();
        let mut ch = channel(64, 0.1, 2, seed);
        assert_eq!(
            run_equality_test(&mut ch, &spec, &inputs).unwrap(),
            vec![false; 64]
        );
    }
}

#[test]
fn learning_at_noise_never_fails_silently() {
    for seed in 0..10 {
        let bits = random_bits(300, seed);
        let mut ch = channel(300, 0.5, 7, seed);
        let out = run_learn_input(&mut ch, &bits).unwrap();
        assert_ne!(out.classification, Classification::FailWithoutKnowledge);
        assert_eq!(out.depth, recursion_depth(300));
    }
}

#[test]
fn learning_heavy_noise_reports_failure() {
    // Without repetition most group codewords are lost, yet no processor may claim success wrongly.
    let mut seen_failure = false;
    for seed in 0..5 {
        let bits = random_bits(150, seed);
        let mut ch = channel(150, 0.6, 1, seed);
        let out = run_learn_input(&mut ch, &bits).unwrap();
        assert!(!out.verification_false_accept);
        seen_failure |= out.classification != Classification::Success;
    }
    assert!(seen_failure);
}

#[test]
fn large_alphabet_transmissions_are_honest() {
    let n = 64;
    let field = FieldConfig::for_processors(n).unwrap();
    let part = BlockPartition::new(n);
    let (mut own_in, mut own_total, mut other_in, mut other_total) =
        (0usize, 0usize, 0usize, 0usize);
    for seed in 0..20 {
        let mut rng = SimRng::new(seed);
        let inputs: Vec<u64> = (0..n).map(|_| rng.below(field.q)).collect();
        let mut ch = channel(n, 0.1, 1, seed);
        let out = run_large_alphabet(&mut ch, field, &inputs).unwrap();
        assert_eq!(out.rounds_used, 30);
        for (i, pairs) in out.transmitted.iter().enumerate() {
            let block = part.blocks[part.block_of(i)].clone();
            for eq in pairs {
                let sum = block
                    .clone()
                    .filter(|&m| eq.mask >> (m - block.start) & 1 == 1)
                    .fold(0u128, |s, m| (s + inputs[m] as u128) % field.q as u128);
                assert_eq!(sum as u64, eq.sum);
                for m in block.clone() {
                    let hit = (eq.mask >> (m - block.start) & 1) as usize;
                    if m == i {
                        own_in += hit;
                        own_total += 1;
                    } else {
                        other_in += hit;
                        other_total += 1;
                    }
                }
            }
        }
        for (x, &solved) in out.outputs.iter().zip(&out.solved) {
            if solved {
                assert_eq!(x, &inputs);
            }
        }
    }
    assert!((other_in as f64 / other_total as f64 - 0.5).abs() < 0.01);
    assert!((own_in as f64 / own_total as f64 - 0.5).abs() < 0.05);
}

#[test]
fn large_alphabet_ambiguity_is_flagged() {
    let n = 64;
    let field = FieldConfig::for_processors(n).unwrap();
    let mut ambiguous = 0;
    for seed in 0..5 {
        let mut ch = channel(n, 0.1, 1, seed);
        let out = run_large_alphabet_with(&mut ch, field, &vec![0; n], 1).unwrap();
        assert_eq!(out.rounds_used, 3);
        for (x, &solved) in out.outputs.iter().zip(&out.solved) {
            if solved {
                assert!(x.iter().all(|&v| v == 0));
            } else {
                ambiguous += 1;
            }
        }
    }
    assert!(ambiguous > 0);
}

#[test]
fn large_alphabet_rejects_bad_input() {
    let field = FieldConfig::for_processors(8).unwrap();
    let mut ch = channel(8, 0.1, 1, 0);
    assert!(run_large_alphabet(&mut ch, field, &[field.q; 8]).is_err());
    assert!(run_large_alphabet(&mut ch, field, &[0; 7]).is_err());
}
