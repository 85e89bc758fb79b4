//! Binary extension fields `GF(2^m)` for `m <= 15`, via log/antilog tables.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Gf2m {
    m: u32,
    /// `2^m - 1`, the multiplicative order.
    order: usize,
    /// `exp[i] = alpha^i` for `i < 2 * order`, so products skip a reduction.
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Gf2m {
    /// Field defined by `poly` (degree `m`, bit `m` set). Fails unless `x` generates the group.
    pub fn new(m: u32, poly: u32) -> Result<Self> {
        if !(1..=15).contains(&m) || poly >> m != 1 {
            return Err(Error::InvalidArgument(format!(
                "bad field polynomial {poly:#x} for m = {m}"
            )));
        }
        let size = 1usize << m;
        let order = size - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        let mut x = 1u32;
        for (i, e) in exp.iter_mut().take(order).enumerate() {
            if x == 1 && i > 0 {
                return Err(Error::InvalidArgument(format!(
                    "{poly:#x} is not primitive"
                )));
            }
            *e = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x >> m == 1 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(Error::InvalidArgument(format!(
                "{poly:#x} is not primitive"
            )));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(Self { m, order, exp, log })
    }

    pub fn bits(&self) -> u32 {
        self.m
    }

    pub fn size(&self) -> usize {
        self.order + 1
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn inv(&self, a: u16) -> u16 {
        assert!(a != 0, "inverse of zero");
        self.exp[(self.order - self.log[a as usize] as usize) % self.order]
    }

    #[inline]
    pub fn div(&self, a: u16, b: u16) -> u16 {
        self.mul(a, self.inv(b))
    }
}

/// `GF(64)` modulo `x^6 + x + 1`.
pub fn gf64() -> &'static Gf2m {
    static F: OnceLock<Gf2m> = OnceLock::new();
    F.get_or_init(|| Gf2m::new(6, 0x43).expect("x^6+x+1 is primitive"))
}

/// `GF(4096)` modulo `x^12 + x^6 + x^4 + x + 1`.
pub fn gf4096() -> &'static Gf2m {
    static F: OnceLock<Gf2m> = OnceLock::new();
    F.get_or_init(|| Gf2m::new(12, 0x1053).expect("0x1053 is primitive"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Carry-less multiply then reduce, bit by bit.
    fn slow_mul(a: u32, b: u32, m: u32, poly: u32) -> u32 {
        let mut acc = 0u32;
        for i in 0..m {
            if (b >> i) & 1 == 1 {
                acc ^= a << i;
            }
        }
        for i in (m..2 * m).rev() {
            if (acc >> i) & 1 == 1 {
                acc ^= poly << (i - m);
            }
        }
        acc
    }

    #[test]
    fn tables_match_schoolbook_gf64() {
        let f = gf64();
        for a in 0..64u16 {
            for b in 0..64u16 {
                assert_eq!(f.mul(a, b) as u32, slow_mul(a as u32, b as u32, 6, 0x43));
            }
        }
    }

    #[test]
    fn inverses_gf4096() {
        let f = gf4096();
        for a in 1..4096u16 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
        assert_eq!(f.mul(1234, 567) as u32, slow_mul(1234, 567, 12, 0x1053));
    }

    #[test]
    fn rejects_non_primitive() {
        // x^4 + x^3 + x^2 + x + 1 is irreducible but x has order 5.
        assert!(Gf2m::new(4, 0x1f).is_err());
        assert!(Gf2m::new(4, 0x13).is_ok());
    }
}
