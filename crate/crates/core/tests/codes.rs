use noisy_bcast::codes::{binary_matrix_rank, random_binary_matrix_rank, rm, CodeSpec};
use noisy_bcast::{BitString, ReceivedWord, SimRng};
use proptest::prelude::*;

fn words(spec: &CodeSpec) -> Vec<Vec<u64>> {
    (0..1u64 << spec.k())
        .map(|m| {
            let cw = spec.encode(&BitString::from_u64(m, spec.k())).unwrap();
            (0..spec.codeword_len())
                .step_by(64)
                .map(|i| cw.get_bits(i, 64.min(spec.codeword_len() - i)))
                .collect()
        })
        .collect()
}

/// Minimum over all pairs of distinct codewords, without assuming linearity.
fn pairwise_min_distance(spec: &CodeSpec) -> usize {
    let w = words(spec);
    let mut best = usize::MAX;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let d: u32 = w[i]
                .iter()
                .zip(&w[j])
                .map(|(a, b)| (a ^ b).count_ones())
                .sum();
            best = best.min(d as usize);
        }
    }
    best
}

#[test]
fn exhaustive_distances() {
    for k in [6, 12] {
        let spec = CodeSpec::concatenated(k).unwrap();
        let d = pairwise_min_distance(&spec);
        assert_eq!(d, spec.min_distance_bruteforce().unwrap(), "k = {k}");
        assert!(4 * d >= spec.codeword_len());
        assert!(d >= spec.design_distance());
    }
}

#[test]
fn inner_code_distance_is_sixteen() {
    let mut best = usize::MAX;
    for a in 0..64u16 {
        for b in a + 1..64 {
            best = best.min((rm::encode(a) ^ rm::encode(b)).count_ones() as usize);
        }
    }
    assert_eq!((rm::LEN, best), (32, 16));
}

#[test]
fn erasures_inside_the_radius_always_decode() {
    let spec = CodeSpec::concatenated(12).unwrap();
    let len = spec.codeword_len();
    let mut rng = SimRng::new(4);
    for _ in 0..3000 {
        let msg = BitString::from_u64(rng.below(1 << 12), 12);
        let mut rx = ReceivedWord::from_codeword(&spec.encode(&msg).unwrap());
        let e = rng.below(spec.decoding_radius() as u64) as usize;
        let mut order: Vec<usize> = (0..len).collect();
        for i in 0..e {
            let j = i + rng.below((len - i) as u64) as usize;
            order.swap(i, j);
            rx.erase(order[i]);
        }
        assert_eq!(spec.decode(&rx).unwrap(), msg);
    }
}

#[test]
fn large_layout_errors_and_erasures() {
    let spec = CodeSpec::concatenated(600).unwrap();
    let mut rng = SimRng::new(9);
    let msg = BitString::from_bools(&(0..600).map(|_| rng.coin()).collect::<Vec<_>>());
    let cw = spec.encode(&msg).unwrap();
    let budget = spec.decoding_radius() - 1;
    let mut symbols: Vec<Option<bool>> = cw.iter().map(Some).collect();
    let len = symbols.len();
    for i in 0..budget / 2 {
        let pos = (i * 7919) % len;
        symbols[pos] = Some(!cw.get(pos));
    }
    for i in 0..budget / 2 {
        symbols[(i * 104_729 + 13) % len] = None;
    }
    assert_eq!(
        spec.decode(&ReceivedWord::from_symbols(&symbols)).unwrap(),
        msg
    );
}

/// Rank over GF(q) by plain elimination on `u128`.
fn rank_oracle(k: usize, rows: &[u64], q: u64) -> usize {
    let q = q as u128;
    let mut m: Vec<Vec<u128>> = rows
        .iter()
        .map(|&r| (0..k).map(|j| ((r >> j) & 1) as u128).collect())
        .collect();
    let mut rank = 0;
    for col in 0..k {
        let Some(piv) = (rank..m.len()).find(|&i| m[i][col] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = (0..q).find(|&x| x * m[rank][col] % q == 1).unwrap();
        for i in 0..m.len() {
            if i != rank && m[i][col] != 0 {
                let f = m[i][col] * inv % q;
                for j in 0..k {
                    m[i][j] = (m[i][j] + q * q - f * m[rank][j] % q) % q;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn single_column_rank_matches_enumeration() {
    // All 32 choices of 5 one-bit rows: rank 1 unless every row is 0.
    let full = (0u64..32)
        .filter(|&bits| {
            let rows: Vec<u64> = (0..5).map(|i| (bits >> i) & 1).collect();
            binary_matrix_rank(1, &rows, 101).unwrap() == 1
        })
        .count();
    assert_eq!(full, 31);
    let mut rng = SimRng::new(1);
    let hits = (0..20_000)
        .filter(|_| random_binary_matrix_rank(1, 5, 101, &mut rng).unwrap())
        .count();
    assert!((hits as f64 / 20_000.0 - 0.96875).abs() < 0.01);
}

proptest! {
    #[test]
    fn rank_matches_oracle(rows in proptest::collection::vec(0u64..256, 1..12), q in prop::sample::select(vec![2u64, 3, 5, 101, 65_537])) {
        prop_assert_eq!(binary_matrix_rank(8, &rows, q).unwrap(), rank_oracle(8, &rows, q));
    }

    #[test]
    fn code_is_linear_over_gf2(a in 0u64..(1 << 40), b in 0u64..(1 << 40)) {
        let spec = CodeSpec::concatenated(40).unwrap();
        let ea = spec.encode(&BitString::from_u64(a, 40)).unwrap();
        let eb = spec.encode(&BitString::from_u64(b, 40)).unwrap();
        let eab = spec.encode(&BitString::from_u64(a ^ b, 40)).unwrap();
        prop_assert_eq!(ea.xor(&eb), eab);
    }

    #[test]
    fn roundtrip_any_length(k in 1usize..400, seed: u64) {
        let spec = CodeSpec::concatenated(k).unwrap();
        let mut rng = SimRng::new(seed);
        let msg = BitString::from_bools(&(0..k).map(|_| rng.coin()).collect::<Vec<_>>());
        let cw = spec.encode(&msg).unwrap();
        prop_assert_eq!(cw.len(), spec.codeword_len());
        prop_assert_eq!(spec.decode(&ReceivedWord::from_codeword(&cw)).unwrap(), msg);
    }
}
