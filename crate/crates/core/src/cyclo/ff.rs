//! Finite fields `GF(p^d)` and the reduction map from p-integral cyclotomics.

use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{mod_inv, Cyc, CycError};
use crate::perm::split_prime;

const MAX_FIELD: u64 = 1 << 20;

/// `GF(p^d)` in the polynomial basis of its defining polynomial.
///
/// Elements are encoded as `Σ a_i p^i` with coordinates `a_i` of `x^i`.
#[derive(Debug)]
pub struct GaloisField {
    p: u32,
    d: u32,
    q: u32,
    /// Coefficients `c_0..c_{d-1}` of the monic defining polynomial.
    poly: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl GaloisField {
    /// Uses the lexicographically smallest primitive polynomial, comparing `(c_{d-1}, …, c_0)`.
    pub fn new(p: u32, d: u32) -> Self {
        let q64 = (p as u64).pow(d);
        assert!(q64 <= MAX_FIELD, "field too large");
        let q = q64 as u32;
        for t in 0..q {
            // digits of t, most significant is c_{d-1}
            let mut poly = vec![0u32; d as usize];
            let mut r = t;
            for c in poly.iter_mut() {
                *c = r % p;
                r /= p;
            }
            if poly[0] == 0 && !(d == 1 && q == 2) {
                continue;
            }
            if let Some((exp, log)) = Self::powers(p, d, &poly) {
                return GaloisField {
                    p,
                    d,
                    q,
                    poly,
                    exp,
                    log,
                };
            }
        }
        unreachable!("a primitive polynomial always exists")
    }

    fn powers(p: u32, d: u32, poly: &[u32]) -> Option<(Vec<u32>, Vec<u32>)> {
        let q = p.pow(d);
        let d = d as usize;
        let mut cur = vec![0u32; d];
        cur[0] = 1;
        let mut exp = Vec::with_capacity(q as usize - 1);
        let mut log = vec![u32::MAX; q as usize];
        let enc = |v: &[u32]| v.iter().rev().fold(0u32, |a, &x| a * p + x);
        for k in 0..q - 1 {
            let e = enc(&cur);
            if log[e as usize] != u32::MAX || (k > 0 && e == 1) {
                return None;
            }
            log[e as usize] = k;
            exp.push(e);
            // multiply by x
            let top = cur[d - 1];
            for i in (1..d).rev() {
                cur[i] = cur[i - 1];
            }
            cur[0] = 0;
            for i in 0..d {
                cur[i] = (cur[i] + (p - poly[i]) % p * top) % p;
            }
        }
        if enc(&cur) != 1 {
            return None;
        }
        Some((exp, log))
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn d(&self) -> u32 {
        self.d
    }
    pub fn size(&self) -> u32 {
        self.q
    }
    pub fn poly(&self) -> &[u32] {
        &self.poly
    }

    pub fn coords(&self, mut a: u32) -> Vec<u32> {
        (0..self.d)
            .map(|_| {
                let r = a % self.p;
                a /= self.p;
                r
            })
            .collect()
    }

    pub fn from_coords(&self, c: &[u32]) -> u32 {
        c.iter().rev().fold(0u32, |a, &x| a * self.p + x % self.p)
    }

    #[inline]
    pub fn add(&self, mut a: u32, mut b: u32) -> u32 {
        if self.d == 1 {
            return (a + b) % self.p;
        }
        let mut r = 0;
        let mut m = 1;
        for _ in 0..self.d {
            r += ((a % self.p + b % self.p) % self.p) * m;
            a /= self.p;
            b /= self.p;
            m *= self.p;
        }
        r
    }

    #[inline]
    pub fn neg(&self, mut a: u32) -> u32 {
        let mut r = 0;
        let mut m = 1;
        for _ in 0..self.d {
            r += ((self.p - a % self.p) % self.p) * m;
            a /= self.p;
            m *= self.p;
        }
        r
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let l = (self.log[a as usize] as u64 + self.log[b as usize] as u64) % (self.q as u64 - 1);
        self.exp[l as usize]
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let l = (self.q - 1 - self.log[a as usize]) % (self.q - 1);
        Some(self.exp[l as usize])
    }

    /// `x^k` for the generator `x`.
    pub fn gen_pow(&self, k: u64) -> u32 {
        self.exp[(k % (self.q as u64 - 1)) as usize]
    }

    pub fn from_int(&self, a: &BigInt) -> u32 {
        a.mod_floor(&BigInt::from(self.p)).to_u32().unwrap()
    }
}

/// Element of `GF(p^d)` in coordinates over the prime field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FqElement {
    pub p: u32,
    pub d: u32,
    pub coords: Vec<u32>,
}

/// Ring homomorphism from p-integral elements of `Q(ζ_N)` onto `GF(p^d)`.
#[derive(Debug, Clone)]
pub struct ReductionMap {
    p: u64,
    exponent: u64,
    m: u64,
    field: Arc<GaloisField>,
    /// ξ = x^(root_power · (q-1)/m).
    root_power: u64,
}

impl ReductionMap {
    /// The standard map with `ξ = x^((q-1)/m)`.
    pub fn new(p: u64, exponent: u64) -> Self {
        Self::with_root(p, exponent, 1)
    }

    /// Uses `ξ^k` as the image of `ζ_m`; `k` must be a unit mod `m`.
    pub fn with_root(p: u64, exponent: u64, k: u64) -> Self {
        let m = split_prime(exponent, p).1;
        assert_eq!(num_integer::gcd(k, m), 1, "root power must be a unit mod m");
        let mut d = 1;
        let mut t = p % m;
        while m > 1 && t != 1 {
            t = t * p % m;
            d += 1;
        }
        let field = Arc::new(GaloisField::new(p as u32, d));
        ReductionMap {
            p,
            exponent,
            m,
            field,
            root_power: k % m.max(1),
        }
    }

    /// A second primitive root: the least `k ≥ 2` prime to `m` outside `⟨p⟩ mod m`, else the least unit `k ≥ 2`, else 1.
    pub fn alternative(p: u64, exponent: u64) -> Self {
        let m = split_prime(exponent, p).1;
        let mut frob = vec![false; m as usize];
        let mut t = 1 % m.max(1);
        for _ in 0..m {
            frob[t as usize] = true;
            t = t * p % m;
        }
        let units: Vec<u64> = (2..m).filter(|&k| num_integer::gcd(k, m) == 1).collect();
        let k = units
            .iter()
            .copied()
            .find(|&k| !frob[k as usize])
            .or(units.first().copied())
            .unwrap_or(1);
        Self::with_root(p, exponent, k)
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn exponent(&self) -> u64 {
        self.exponent
    }
    pub fn m(&self) -> u64 {
        self.m
    }
    pub fn root_power(&self) -> u64 {
        self.root_power
    }
    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    fn xi_log(&self) -> u64 {
        let q1 = self.field.size() as u64 - 1;
        (q1 / self.m) * self.root_power % q1
    }

    /// Image of `ζ_n^k`.
    pub fn root_image(&self, n: u64, k: u64) -> Result<u32, CycError> {
        let (np, nq) = split_prime(n, self.p);
        if !self.m.is_multiple_of(nq) {
            return Err(CycError::Conductor(n as u32, self.exponent));
        }
        let e = (k % n) * mod_inv(np % nq.max(1), nq.max(1)) % nq.max(1) * (self.m / nq);
        Ok(self.field.gen_pow(self.xi_log() * e))
    }

    pub fn reduce_q(&self, a: &super::Q) -> Result<u32, CycError> {
        let f = &self.field;
        let pb = BigInt::from(self.p);
        if a.denom().is_multiple_of(&pb) {
            return Err(CycError::NotIntegral(a.to_string(), self.p));
        }
        let num = f.from_int(a.numer());
        let den = f.from_int(a.denom());
        Ok(f.mul(num, f.inv(den).unwrap()))
    }

    pub fn reduce(&self, x: &Cyc) -> Result<u32, CycError> {
        if !x.is_p_integral(self.p) {
            return Err(CycError::NotIntegral(x.pretty(), self.p));
        }
        let f = &self.field;
        let n = x.conductor() as u64;
        let mut acc = 0u32;
        for (k, a) in x.terms() {
            let c = self.reduce_q(a)?;
            if c.is_zero() {
                continue;
            }
            acc = f.add(acc, f.mul(c, self.root_image(n, *k as u64)?));
        }
        Ok(acc)
    }

    pub fn to_element(&self, a: u32) -> FqElement {
        FqElement {
            p: self.p as u32,
            d: self.field.d(),
            coords: self.field.coords(a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclo::Q;
    use proptest::prelude::*;

    #[test]
    fn smallest_primitive_polynomials() {
        assert_eq!(GaloisField::new(2, 2).poly(), &[1, 1]);
        assert_eq!(GaloisField::new(3, 2).poly(), &[2, 1]);
        assert_eq!(GaloisField::new(2, 3).poly(), &[1, 1, 0]);
        assert_eq!(GaloisField::new(5, 1).poly(), &[2]);
    }

    #[test]
    fn field_axioms_exhaustive() {
        for (p, d) in [(2, 2), (3, 2), (2, 3), (5, 1), (7, 1)] {
            let f = GaloisField::new(p, d);
            let q = f.size();
            for a in 0..q {
                assert_eq!(f.add(a, f.neg(a)), 0);
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
                }
                for b in 0..q {
                    for c in [0, 1, q - 1] {
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn reduction_examples() {
        let r2 = ReductionMap::new(2, 12);
        assert_eq!(r2.reduce(&Cyc::from_frac(1, 3)).unwrap(), 1);
        assert_eq!(r2.reduce(&Cyc::root(4, 1)).unwrap(), 1);
        let w = r2.reduce(&Cyc::root(3, 1)).unwrap();
        let f = r2.field();
        assert_eq!(f.size(), 4);
        assert_ne!(w, 1);
        assert_eq!(f.add(f.add(f.mul(w, w), w), 1), 0);
        assert!(r2.reduce(&Cyc::from_frac(1, 2)).is_err());
    }

    #[test]
    fn alternative_root_differs_when_possible() {
        let a = ReductionMap::alternative(2, 12);
        assert_eq!(a.m(), 3);
        // ⟨2⟩ = (Z/3)^*, so the alternative is a Frobenius twist
        assert_eq!(a.root_power(), 2);
        let b = ReductionMap::alternative(2, 7);
        assert_eq!(b.root_power(), 3);
    }

    proptest! {
        #[test]
        fn reduction_is_a_ring_hom(
            a in prop::collection::vec((0i64..24, -4i64..5, prop::sample::select(vec![1i64, 5, 7, 25])), 0..4),
            b in prop::collection::vec((0i64..24, -4i64..5, prop::sample::select(vec![1i64, 5, 7, 25])), 0..4),
            p in prop::sample::select(vec![2u64, 3]),
        ) {
            let mk = |ts: &Vec<(i64, i64, i64)>| -> Cyc {
                ts.iter().map(|&(k, x, y)| Cyc::root(24, k).scale(&Q::new(x.into(), y.into()))).sum()
            };
            let (x, y) = (mk(&a), mk(&b));
            let r = ReductionMap::new(p, 24);
            let f = r.field();
            prop_assert_eq!(r.reduce(&(&x + &y)).unwrap(), f.add(r.reduce(&x).unwrap(), r.reduce(&y).unwrap()));
            prop_assert_eq!(r.reduce(&(&x * &y)).unwrap(), f.mul(r.reduce(&x).unwrap(), r.reduce(&y).unwrap()));
        }

        #[test]
        fn roots_reduce_to_roots(n in prop::sample::select(vec![1u64, 2, 3, 4, 6, 8, 12, 24]), k in 0u64..24, p in prop::sample::select(vec![2u64, 3])) {
            let r = ReductionMap::new(p, 24);
            let f = r.field();
            let x = r.reduce(&Cyc::root(n as u32, k as i64)).unwrap();
            let mut y = 1;
            for _ in 0..n { y = f.mul(y, x); }
            prop_assert_eq!(y, 1);
        }
    }
}
