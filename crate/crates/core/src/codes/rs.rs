//! Reed–Solomon evaluation codes with errors-and-erasures decoding.
//!
//! A message `(m_0, .., m_{k-1})` is the polynomial `f(x) = sum m_t x^t`;
//! position `j` carries `f(a_j)` where `a_j` is the field element whose
//! integer representation is `j`. Decoding follows Gao's algorithm restricted
//! to the non-erased positions.

use super::gf2m::Gf2m;

/// Polynomials are coefficient vectors, lowest degree first, without trailing zeros.
type Poly = Vec<u16>;

fn trim(p: &mut Poly) {
    while p.last() == Some(&0) {
        p.pop();
    }
}

fn degree(p: &Poly) -> isize {
    p.len() as isize - 1
}

fn add(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0u16; a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] ^= c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] ^= c;
    }
    trim(&mut out);
    out
}

fn mul(f: &Gf2m, a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u16; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] ^= f.mul(x, y);
        }
    }
    trim(&mut out);
    out
}

fn divmod(f: &Gf2m, a: &Poly, b: &Poly) -> (Poly, Poly) {
    assert!(!b.is_empty(), "division by the zero polynomial");
    let mut rem = a.clone();
    if a.len() < b.len() {
        return (Vec::new(), rem);
    }
    let lead_inv = f.inv(*b.last().unwrap());
    let mut quot = vec![0u16; a.len() - b.len() + 1];
    for i in (0..quot.len()).rev() {
        let c = f.mul(rem[i + b.len() - 1], lead_inv);
        quot[i] = c;
        if c != 0 {
            for (j, &bj) in b.iter().enumerate() {
                rem[i + j] ^= f.mul(c, bj);
            }
        }
    }
    trim(&mut quot);
    trim(&mut rem);
    (quot, rem)
}

/// Lowest-degree polynomial through `(xs[i], ys[i])`, by Newton divided differences.
fn interpolate(f: &Gf2m, xs: &[u16], ys: &[u16]) -> Poly {
    let n = xs.len();
    let mut coef = ys.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            let num = coef[i] ^ coef[i - 1];
            let den = xs[i] ^ xs[i - level];
            coef[i] = f.div(num, den);
        }
    }
    // Horner in the Newton basis: p = c_{n-1}; p = p (x - x_i) + c_i.
    let mut p: Poly = Vec::with_capacity(n);
    for i in (0..n).rev() {
        // p *= (x + xs[i])
        p.insert(0, 0);
        for j in 0..p.len() - 1 {
            let t = f.mul(p[j + 1], xs[i]);
            p[j] ^= t;
        }
        if p.is_empty() {
            p.push(0);
        }
        p[0] ^= coef[i];
    }
    trim(&mut p);
    p
}

#[derive(Clone, Copy, Debug)]
pub struct ReedSolomon {
    field: &'static Gf2m,
    k: usize,
    n: usize,
}

impl ReedSolomon {
    pub fn new(field: &'static Gf2m, k: usize, n: usize) -> Self {
        assert!(
            k >= 1 && k <= n && n <= field.size(),
            "invalid RS parameters"
        );
        Self { field, k, n }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn distance(&self) -> usize {
        self.n - self.k + 1
    }

    pub fn encode(&self, msg: &[u16]) -> Vec<u16> {
        assert_eq!(msg.len(), self.k);
        (0..self.n as u16)
            .map(|x| {
                msg.iter()
                    .rev()
                    .fold(0u16, |acc, &c| self.field.mul(acc, x) ^ c)
            })
            .collect()
    }

    /// Recover the message when `2 * errors + erasures < distance`; `None` marks an erasure.
    pub fn decode(&self, received: &[Option<u16>]) -> Option<Vec<u16>> {
        assert_eq!(received.len(), self.n);
        let f = self.field;
        let (xs, ys): (Vec<u16>, Vec<u16>) = received
            .iter()
            .enumerate()
            .filter_map(|(j, s)| s.map(|v| (j as u16, v)))
            .unzip();
        let m = xs.len();
        if m < self.k {
            return None;
        }
        let g1 = interpolate(f, &xs, &ys);
        let mut g0: Poly = vec![1];
        for &x in &xs {
            g0 = mul(f, &g0, &vec![x, 1]);
        }
        // Partial extended Euclid on (g0, g1) until deg r < (m + k) / 2.
        let (mut r0, mut r1) = (g0, g1);
        let (mut v0, mut v1): (Poly, Poly) = (Vec::new(), vec![1]);
        while 2 * degree(&r1) >= (m + self.k) as isize {
            let (q, r) = divmod(f, &r0, &r1);
            let v = add(&v0, &mul(f, &q, &v1));
            r0 = std::mem::replace(&mut r1, r);
            v0 = std::mem::replace(&mut v1, v);
        }
        let (quot, rem) = divmod(f, &r1, &v1);
        if !rem.is_empty() || quot.len() > self.k {
            return None;
        }
        let mut msg = quot;
        msg.resize(self.k, 0);
        Some(msg)
    }
}
