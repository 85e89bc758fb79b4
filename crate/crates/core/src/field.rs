//! Prime fields `GF(q)` for `q < 2^63` and linear systems over them.

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[inline]
fn mulmod_u128(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod_u128(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod_u128(acc, base, m);
        }
        base = mulmod_u128(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin; the first twelve prime bases are exact for all `u64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &BASES {
        let mut x = powmod_u128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod_u128(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Least prime `>= m` (2 for `m <= 2`).
pub fn smallest_prime_at_least(m: u64) -> Result<u64> {
    let mut c = m.max(2);
    loop {
        if is_prime(c) {
            return Ok(c);
        }
        c = c
            .checked_add(1)
            .ok_or_else(|| Error::InvalidArgument(format!("no prime >= {m} fits in 64 bits")))?;
    }
}

/// Arithmetic modulo a prime `q < 2^63`.
///
/// Large odd moduli multiply through Montgomery reduction; moduli below
/// `2^32` use plain 64-bit remainders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    q: u64,
    /// `-q^{-1} mod 2^64`.
    qinv_neg: u64,
    /// `2^128 mod q`.
    r2: u64,
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self> {
        if q >= 1 << 63 || !is_prime(q) {
            return Err(Error::InvalidArgument(format!(
                "{q} is not a prime below 2^63"
            )));
        }
        let (qinv_neg, r2) = if q & 1 == 1 {
            // Newton iteration for q^{-1} mod 2^64.
            let mut inv = q;
            for _ in 0..6 {
                inv = inv.wrapping_mul(2u64.wrapping_sub(q.wrapping_mul(inv)));
            }
            let r = ((1u128 << 64) % q as u128) as u64;
            (inv.wrapping_neg(), mulmod_u128(r, r, q))
        } else {
            (0, 0)
        };
        Ok(Self { q, qinv_neg, r2 })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.qinv_neg);
        let u = ((t + m as u128 * self.q as u128) >> 64) as u64;
        if u >= self.q {
            u - self.q
        } else {
            u
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        self.sub(0, a)
    }

    #[inline]
    fn montgomery(&self) -> bool {
        self.q >= 1 << 32
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        if self.montgomery() {
            // redc(a b) = a b / R; a second pass with R^2 restores a b.
            let t = self.redc(a as u128 * b as u128);
            self.redc(t as u128 * self.r2 as u128)
        } else {
            (a * b) % self.q
        }
    }

    /// Into the working domain (Montgomery form `a R` for large moduli).
    #[inline]
    fn enc(&self, a: u64) -> u64 {
        if self.montgomery() {
            self.redc(a as u128 * self.r2 as u128)
        } else {
            a
        }
    }

    #[inline]
    fn dec(&self, a: u64) -> u64 {
        if self.montgomery() {
            self.redc(a as u128)
        } else {
            a
        }
    }

    /// Product of two working-domain values.
    #[inline]
    fn wmul(&self, a: u64, b: u64) -> u64 {
        if self.montgomery() {
            self.redc(a as u128 * b as u128)
        } else {
            (a * b) % self.q
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(!a.is_multiple_of(self.q), "inverse of zero");
        self.pow(a, self.q - 2)
    }

    /// Rank of a dense matrix by Gaussian elimination.
    pub fn rank(&self, mut rows: Vec<Vec<u64>>) -> usize {
        let cols = rows.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_multiple_of(self.q)) else {
                continue;
            };
            rows.swap(rank, p);
            let inv = self.inv(rows[rank][c]);
            for r in rank + 1..rows.len() {
                let f = self.mul(rows[r][c], inv);
                if f != 0 {
                    for j in c..cols {
                        let t = self.mul(f, rows[rank][j]);
                        rows[r][j] = self.sub(rows[r][j], t);
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

/// An incrementally built linear system `A y = b` over `GF(q)`.
///
/// Rows are kept in echelon form keyed by pivot column, each pivot row
/// normalized to a leading 1, all entries in the field's working domain.
/// Once the system reaches full rank the unique solution is fixed and later
/// equations are only checked for consistency.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    field: PrimeField,
    vars: usize,
    pivots: Vec<Option<(Vec<u64>, u64)>>,
    rank: usize,
    solution: Option<Vec<u64>>,
}

impl LinearSystem {
    pub fn new(field: PrimeField, vars: usize) -> Self {
        Self {
            field,
            vars,
            pivots: vec![None; vars],
            rank: 0,
            solution: None,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.vars
    }

    /// Add `sum_j coeffs[j] y_j = rhs`. An inconsistent equation is an invariant violation.
    pub fn add_equation(&mut self, coeffs: &[u64], rhs: u64) -> Result<()> {
        if coeffs.len() != self.vars {
            return Err(Error::LengthMismatch {
                expected: self.vars,
                actual: coeffs.len(),
            });
        }
        let f = self.field;
        let q = f.modulus();
        if let Some(sol) = &self.solution {
            let lhs = coeffs
                .iter()
                .zip(sol)
                .fold(0, |acc, (&c, &y)| f.add(acc, f.wmul(f.enc(c % q), y)));
            return self.check(lhs, rhs);
        }
        let row: Vec<u64> = coeffs.iter().map(|&c| f.enc(c % q)).collect();
        self.insert(row, f.enc(rhs % q))
    }

    fn insert(&mut self, mut row: Vec<u64>, mut rhs: u64) -> Result<()> {
        let f = self.field;
        for c in 0..self.vars {
            if row[c] == 0 {
                continue;
            }
            match &self.pivots[c] {
                Some((prow, prhs)) => {
                    let factor = row[c];
                    for j in c..self.vars {
                        if prow[j] != 0 {
                            row[j] = f.sub(row[j], f.wmul(factor, prow[j]));
                        }
                    }
                    rhs = f.sub(rhs, f.wmul(factor, *prhs));
                }
                None => {
                    let inv = f.enc(f.inv(f.dec(row[c])));
                    for v in row[c..].iter_mut() {
                        *v = f.wmul(*v, inv);
                    }
                    self.pivots[c] = Some((row, f.wmul(rhs, inv)));
                    self.rank += 1;
                    if self.is_full_rank() {
                        self.solution = Some(self.back_substitute(&[]));
                    }
                    return Ok(());
                }
            }
        }
        self.check(0, rhs)
    }

    /// Add an equation whose coefficients are the bits of `mask` (bit `j` for `y_j`).
    pub fn add_mask_equation(&mut self, mask: u64, rhs: u64) -> Result<()> {
        if self.vars < 64 && mask >> self.vars != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask {mask:#x} exceeds {} variables",
                self.vars
            )));
        }
        if let Some(sol) = &self.solution {
            let f = self.field;
            let mut lhs = 0;
            let mut m = mask;
            while m != 0 {
                lhs = f.add(lhs, sol[m.trailing_zeros() as usize]);
                m &= m - 1;
            }
            return self.check(lhs, rhs);
        }
        let f = self.field;
        let one = f.enc(1);
        let row: Vec<u64> = (0..self.vars)
            .map(|j| if (mask >> j) & 1 == 1 { one } else { 0 })
            .collect();
        self.insert(row, f.enc(rhs % f.modulus()))
    }

    /// `lhs` is in the working domain, `rhs` a plain value.
    fn check(&self, lhs: u64, rhs: u64) -> Result<()> {
        if lhs == self.field.enc(rhs % self.field.modulus()) {
            Ok(())
        } else {
            Err(Error::Invariant("inconsistent linear system".into()))
        }
    }

    /// Working-domain values for pivot variables given the free ones (`free[i]` for the i-th free column).
    fn back_substitute(&self, free: &[u64]) -> Vec<u64> {
        let f = self.field;
        let mut y = vec![0u64; self.vars];
        let mut free_iter = free.iter();
        for c in 0..self.vars {
            if self.pivots[c].is_none() {
                y[c] = *free_iter.next().expect("one value per free column");
            }
        }
        for c in (0..self.vars).rev() {
            if let Some((row, rhs)) = &self.pivots[c] {
                let mut v = *rhs;
                for j in c + 1..self.vars {
                    if row[j] != 0 {
                        v = f.sub(v, f.wmul(row[j], y[j]));
                    }
                }
                y[c] = v;
            }
        }
        y
    }

    /// A solution, uniform over the affine solution space; `true` if it is unique.
    pub fn solve(&self, rng: &mut SimRng) -> (Vec<u64>, bool) {
        let f = self.field;
        if let Some(sol) = &self.solution {
            return (sol.iter().map(|&v| f.dec(v)).collect(), true);
        }
        // Uniform free values map to uniform working-domain values (a bijection).
        let free: Vec<u64> = (0..self.vars - self.rank)
            .map(|_| f.enc(rng.below(f.modulus())))
            .collect();
        (
            self.back_substitute(&free)
                .iter()
                .map(|&v| f.dec(v))
                .collect(),
            false,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        for n in 0..5000 {
            assert_eq!(is_prime(n), trial_division(n), "{n}");
        }
        // Strong pseudoprime to bases 2..=11 but composite.
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn smallest_primes() {
        assert_eq!(smallest_prime_at_least(2).unwrap(), 2);
        assert_eq!(smallest_prime_at_least(90).unwrap(), 97);
        let p = smallest_prime_at_least(1 << 36).unwrap();
        assert!(trial_division(p));
        assert!(((1u64 << 36)..p).all(|c| !trial_division(c)));
    }

    #[test]
    fn montgomery_matches_u128() {
        let q = smallest_prime_at_least(1 << 62).unwrap();
        let f = PrimeField::new(q).unwrap();
        let mut rng = SimRng::new(4);
        for _ in 0..10_000 {
            let (a, b) = (rng.below(q), rng.below(q));
            assert_eq!(f.mul(a, b), mulmod_u128(a, b, q));
        }
        assert_eq!(f.mul(f.inv(12345), 12345), 1);
        assert!(PrimeField::new(91).is_err());
        let two = PrimeField::new(2).unwrap();
        assert_eq!(two.mul(1, 1), 1);
    }

    #[test]
    fn identity_system_is_unique() {
        let f = PrimeField::new(101).unwrap();
        let mut sys = LinearSystem::new(f, 3);
        for (j, v) in [5u64, 7, 9].iter().enumerate() {
            sys.add_mask_equation(1 << j, *v).unwrap();
        }
        let (y, unique) = sys.solve(&mut SimRng::new(0));
        assert!(unique);
        assert_eq!(y, vec![5, 7, 9]);
        assert!(sys.add_mask_equation(0b011, 12).is_ok());
        assert!(matches!(
            sys.add_mask_equation(0b011, 13),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn underdetermined_solution_is_consistent() {
        let f = PrimeField::new(7).unwrap();
        let mut sys = LinearSystem::new(f, 2);
        sys.add_mask_equation(0b11, 4).unwrap();
        let mut rng = SimRng::new(1);
        for _ in 0..50 {
            let (y, unique) = sys.solve(&mut rng);
            assert!(!unique);
            assert_eq!((y[0] + y[1]) % 7, 4);
        }
    }
}
