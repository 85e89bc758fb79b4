//! First-order Reed–Muller code RM(1,5): length 32, dimension 6, distance 16.
//!
//! Symbol `s` (6 bits) encodes as `c[x] = (s & 1) ^ parity((s >> 1) & x)`
//! for `x in 0..32`. Bit `x` of the returned `u32` is `c[x]`.

pub const LEN: usize = 32;
pub const DIM: usize = 6;
pub const DISTANCE: usize = 16;

const TABLE: [u32; 64] = {
    let mut table = [0u32; 64];
    let mut s = 0;
    while s < 64 {
        let u = (s >> 1) as u32;
        let mut x = 0u32;
        while x < 32 {
            let bit = (s as u32 & 1) ^ ((u & x).count_ones() & 1);
            table[s] |= bit << x;
            x += 1;
        }
        s += 1;
    }
    table
};

#[inline]
pub fn encode(symbol: u16) -> u32 {
    TABLE[symbol as usize]
}

/// Nearest codeword under Hamming distance with erasures counted as 1.
///
/// Returns the symbol and its distance (erasures included), or `None` when the
/// nearest codeword is not unique.
pub fn decode(bits: u32, erased: u32) -> Option<(u16, usize)> {
    let mut f = [0i32; 32];
    for (x, v) in f.iter_mut().enumerate() {
        *v = if (erased >> x) & 1 == 1 {
            0
        } else if (bits >> x) & 1 == 1 {
            -1
        } else {
            1
        };
    }
    // Fast Hadamard transform: f[u] becomes sum_x f[x] (-1)^{u.x}.
    let mut h = 1;
    while h < 32 {
        for i in (0..32).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (f[j], f[j + h]);
                f[j] = a + b;
                f[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let best = f.iter().map(|v| v.abs()).max().unwrap();
    let mut winner = None;
    for (u, &v) in f.iter().enumerate() {
        if v.abs() == best {
            if winner.is_some() || best == 0 {
                return None;
            }
            winner = Some((u, v));
        }
    }
    let (u, corr) = winner?;
    let m0 = u16::from(corr < 0);
    let present = 32 - erased.count_ones() as i32;
    let disagreements = (present - corr.abs()) / 2;
    let symbol = ((u as u16) << 1) | m0;
    Some((
        symbol,
        disagreements as usize + erased.count_ones() as usize,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_generator_matrix() {
        // Rows: all-ones, then the five coordinate functions.
        let mut rows = [0u32; 6];
        rows[0] = u32::MAX;
        for i in 0..5 {
            for x in 0..32u32 {
                rows[i + 1] |= ((x >> i) & 1) << x;
            }
        }
        for s in 0..64u16 {
            let expect = (0..6)
                .filter(|&i| (s >> i) & 1 == 1)
                .fold(0u32, |acc, i| acc ^ rows[i]);
            assert_eq!(encode(s), expect);
        }
    }

    #[test]
    fn exact_minimum_distance() {
        let d = (1..64u16).map(|s| encode(s).count_ones()).min().unwrap();
        assert_eq!(d as usize, DISTANCE);
    }

    #[test]
    fn decodes_within_radius_and_reports_ties() {
        for s in 0..64u16 {
            let c = encode(s);
            // 5 flips plus 2 erasures: distance 7, below half the minimum distance.
            let flipped = c ^ 0b11111;
            let erased = 0b11 << 20;
            assert_eq!(decode(flipped, erased), Some((s, 7)));
        }
        assert_eq!(decode(0, u32::MAX), None);
    }
}
