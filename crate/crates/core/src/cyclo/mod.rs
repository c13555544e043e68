//! Exact cyclotomic numbers.
//!
//! Values are stored sparsely in the Zumbroich basis of `Q(ζ_n)` with `n`
//! the minimal conductor, so structural equality is field equality. The
//! basis is integral, which makes p-integrality a coefficient test.

pub mod ff;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ff::{FqElement, GaloisField, ReductionMap};

pub type Q = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CycError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("value {0} is not {1}-integral")]
    NotIntegral(String, u64),
    #[error("conductor {0} is not compatible with the reduction exponent {1}")]
    Conductor(u32, u64),
    #[error("malformed cyclotomic literal: {0}")]
    Parse(String),
}

/// `Σ c_k ζ_n^k` in canonical form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Cyc {
    n: u32,
    c: Vec<(u32, Q)>,
}

pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn mod_inv(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let (g, x, _) = ext_gcd(a as i64 % m as i64, m as i64);
    assert_eq!(g, 1, "{a} not invertible mod {m}");
    x.rem_euclid(m as i64) as u64
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Rewrites a dense coefficient vector over `ζ_n` (`n ≢ 2 mod 4`) into the Zumbroich basis.
fn zumbroich(n: u32, mut v: Vec<Q>) -> Vec<Q> {
    let nn = n as u64;
    for (p, e) in factorize(nn) {
        let q = p.pow(e);
        let cof = mod_inv((nn / q) % q, q);
        let step = nn / p;
        let top = q / p;
        for k in 0..nn {
            if v[k as usize].is_zero() {
                continue;
            }
            let c = (k * cof) % q;
            let b = c / top;
            if p == 2 {
                if b == 1 {
                    let a = std::mem::take(&mut v[k as usize]);
                    let t = ((k + nn - nn / 2) % nn) as usize;
                    v[t] -= a;
                }
            } else if b == 0 {
                let a = std::mem::take(&mut v[k as usize]);
                for j in 1..p {
                    let t = ((k + j * step) % nn) as usize;
                    v[t] -= &a;
                }
            }
        }
    }
    v
}

impl Cyc {
    pub fn zero() -> Self {
        Cyc { n: 1, c: Vec::new() }
    }
    pub fn one() -> Self {
        Self::from_q(Q::one())
    }
    pub fn from_int(a: i64) -> Self {
        Self::from_q(Q::from_integer(BigInt::from(a)))
    }
    pub fn from_frac(a: i64, b: i64) -> Self {
        Self::from_q(Q::new(BigInt::from(a), BigInt::from(b)))
    }
    pub fn from_q(q: Q) -> Self {
        if q.is_zero() {
            Self::zero()
        } else {
            Cyc { n: 1, c: vec![(0, q)] }
        }
    }

    /// `ζ_n^k`.
    pub fn root(n: u32, k: i64) -> Self {
        assert!(n > 0);
        let k = k.rem_euclid(n as i64) as u64;
        if n % 4 == 2 {
            let m = n / 2;
            // ζ_{2m} = -ζ_m^{(m+1)/2}
            let e = (k * (m as u64 + 1) / 2) % m as u64;
            let r = Self::root(m, e as i64);
            return if k % 2 == 1 { -r } else { r };
        }
        let mut v = vec![Q::zero(); n as usize];
        v[k as usize] = Q::one();
        Self::from_dense(n, v)
    }

    /// `Σ v[k] ζ_n^k` for a dense vector; `n` may be any positive integer.
    pub fn from_dense(n: u32, v: Vec<Q>) -> Self {
        if n % 4 == 2 {
            let mut acc = Cyc::zero();
            for (k, a) in v.into_iter().enumerate() {
                if !a.is_zero() {
                    acc += Cyc::root(n, k as i64).scale(&a);
                }
            }
            return acc;
        }
        let v = zumbroich(n, v);
        let c = v
            .into_iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(k, a)| (k as u32, a))
            .collect();
        Cyc { n, c }.minimized()
    }

    fn minimized(mut self) -> Self {
        loop {
            if self.c.is_empty() {
                return Self::zero();
            }
            if self.n == 1 {
                return self;
            }
            let mut changed = false;
            for (p, e) in factorize(self.n as u64) {
                let p32 = p as u32;
                let div = match (p, e) {
                    (2, e) if e >= 3 => Some(2),
                    (2, _) => Some(4),
                    (_, e) if e >= 2 => Some(p32),
                    _ => None,
                };
                if let Some(div) = div {
                    if self.c.iter().all(|(k, _)| k % div == 0) {
                        self.n /= div;
                        for t in self.c.iter_mut() {
                            t.0 /= div;
                        }
                        changed = true;
                        break;
                    }
                    continue;
                }
                // p exactly divides n, p odd
                let n = self.n as u64;
                let m = n / p;
                let inv = mod_inv(m % p, p);
                let mut groups: BTreeMap<u64, Vec<&Q>> = BTreeMap::new();
                for (k, a) in &self.c {
                    let k = *k as u64;
                    let c = (k * inv) % p;
                    let kp = ((k + n - (c * m) % n) % n) / p;
                    groups.entry(kp).or_default().push(a);
                }
                if groups
                    .values()
                    .all(|g| g.len() == (p - 1) as usize && g.iter().all(|a| *a == g[0]))
                {
                    let c: Vec<(u32, Q)> = groups.into_iter().map(|(k, g)| (k as u32, -g[0].clone())).collect();
                    self = Cyc { n: m as u32, c };
                    self.c.sort_by_key(|t| t.0);
                    changed = true;
                    break;
                }
            }
            if !changed {
                self.c.sort_by_key(|t| t.0);
                return self;
            }
        }
    }

    pub fn conductor(&self) -> u32 {
        self.n
    }
    pub fn terms(&self) -> &[(u32, Q)] {
        &self.c
    }
    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }
    pub fn is_rational(&self) -> bool {
        self.n == 1
    }
    pub fn to_rational(&self) -> Option<Q> {
        match (self.n, self.c.len()) {
            (_, 0) => Some(Q::zero()),
            (1, _) => Some(self.c[0].1.clone()),
            _ => None,
        }
    }
    pub fn to_integer(&self) -> Option<BigInt> {
        self.to_rational().filter(|q| q.is_integer()).map(|q| q.to_integer())
    }
    pub fn to_i64(&self) -> Option<i64> {
        self.to_integer().and_then(|z| z.to_i64())
    }

    pub fn scale(&self, a: &Q) -> Self {
        if a.is_zero() {
            return Self::zero();
        }
        Cyc {
            n: self.n,
            c: self.c.iter().map(|(k, b)| (*k, b * a)).collect(),
        }
    }

    fn embed(&self, l: u32) -> Vec<Q> {
        let s = l / self.n;
        let mut v = vec![Q::zero(); l as usize];
        for (k, a) in &self.c {
            v[(k * s) as usize] += a;
        }
        v
    }

    fn add_ref(&self, o: &Cyc) -> Cyc {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        if self.n == o.n {
            let mut out: Vec<(u32, Q)> = Vec::with_capacity(self.c.len() + o.c.len());
            let (mut i, mut j) = (0, 0);
            while i < self.c.len() || j < o.c.len() {
                if j == o.c.len() || (i < self.c.len() && self.c[i].0 < o.c[j].0) {
                    out.push(self.c[i].clone());
                    i += 1;
                } else if i == self.c.len() || o.c[j].0 < self.c[i].0 {
                    out.push(o.c[j].clone());
                    j += 1;
                } else {
                    let s = &self.c[i].1 + &o.c[j].1;
                    if !s.is_zero() {
                        out.push((self.c[i].0, s));
                    }
                    i += 1;
                    j += 1;
                }
            }
            return Cyc { n: self.n, c: out }.minimized();
        }
        let l = num_integer::lcm(self.n, o.n);
        let mut v = self.embed(l);
        for (k, a) in o.c.iter() {
            v[(k * (l / o.n)) as usize] += a;
        }
        Self::from_dense(l, v)
    }

    fn mul_ref(&self, o: &Cyc) -> Cyc {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        if self.n == 1 {
            return o.scale(&self.c[0].1);
        }
        if o.n == 1 {
            return self.scale(&o.c[0].1);
        }
        let l = num_integer::lcm(self.n, o.n);
        let (s1, s2) = (l / self.n, l / o.n);
        let mut v = vec![Q::zero(); l as usize];
        for (k1, a) in &self.c {
            for (k2, b) in &o.c {
                v[((k1 * s1 + k2 * s2) % l) as usize] += a * b;
            }
        }
        Self::from_dense(l, v)
    }

    /// The Galois automorphism `ζ ↦ ζ^a` (`a` coprime to the conductor).
    pub fn galois(&self, a: i64) -> Self {
        if self.n == 1 {
            return self.clone();
        }
        let n = self.n as i64;
        let a = a.rem_euclid(n);
        assert_eq!(num_integer::gcd(a, n), 1, "Galois exponent not coprime to conductor");
        let mut v = vec![Q::zero(); self.n as usize];
        for (k, c) in &self.c {
            v[((*k as i64 * a) % n) as usize] += c;
        }
        Self::from_dense(self.n, v)
    }

    /// Complex conjugation `ζ ↦ ζ⁻¹`.
    pub fn conj(&self) -> Self {
        self.galois(-1)
    }

    pub fn inv(&self) -> Result<Self, CycError> {
        if self.is_zero() {
            return Err(CycError::DivisionByZero);
        }
        if self.n == 1 {
            return Ok(Self::from_q(self.c[0].1.recip()));
        }
        let n = self.n as i64;
        let mut y = Self::one();
        for a in 2..n {
            if num_integer::gcd(a, n) == 1 {
                y = &y * &self.galois(a);
            }
        }
        let norm = (self * &y).to_rational().expect("norm is rational");
        Ok(y.scale(&norm.recip()))
    }

    pub fn div(&self, o: &Cyc) -> Result<Self, CycError> {
        Ok(self * &o.inv()?)
    }

    pub fn is_p_integral(&self, p: u64) -> bool {
        let p = BigInt::from(p);
        self.c.iter().all(|(_, a)| !a.denom().is_multiple_of(&p))
    }

    pub fn is_algebraic_integer(&self) -> bool {
        self.c.iter().all(|(_, a)| a.is_integer())
    }

    /// Least common denominator of the coefficients.
    pub fn denominator(&self) -> BigInt {
        self.c.iter().fold(BigInt::one(), |d, (_, a)| d.lcm(a.denom()))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    /// Human-readable form such as `-1/2 + 3*z12^5`.
    pub fn pretty(&self) -> String {
        if self.c.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, a) in &self.c {
            let coef = if a.is_integer() {
                a.to_integer().to_string()
            } else {
                format!("{}/{}", a.numer(), a.denom())
            };
            if self.n == 1 {
                parts.push(coef);
            } else if a.is_one() {
                parts.push(format!("z{}^{}", self.n, k));
            } else if (-a).is_one() {
                parts.push(format!("-z{}^{}", self.n, k));
            } else {
                parts.push(format!("{}*z{}^{}", coef, self.n, k));
            }
        }
        parts.join(" + ").replace("+ -", "- ")
    }

    pub fn to_literal(&self) -> CycLiteral {
        CycLiteral {
            n: self.n,
            c: self
                .c
                .iter()
                .map(|(k, a)| {
                    (
                        k.to_string(),
                        if a.is_integer() {
                            a.numer().to_string()
                        } else {
                            format!("{}/{}", a.numer(), a.denom())
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn from_literal(l: &CycLiteral) -> Result<Self, CycError> {
        if l.n == 0 {
            return Err(CycError::Parse("conductor 0".into()));
        }
        let mut v = vec![Q::zero(); l.n as usize];
        for (k, a) in &l.c {
            let k: u32 = k.parse().map_err(|_| CycError::Parse(format!("exponent {k}")))?;
            if k >= l.n {
                return Err(CycError::Parse(format!("exponent {k} not below conductor {}", l.n)));
            }
            v[k as usize] += parse_q(a)?;
        }
        Ok(Self::from_dense(l.n, v))
    }
}

pub fn parse_q(s: &str) -> Result<Q, CycError> {
    let s = s.trim();
    let bad = || CycError::Parse(format!("rational {s}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| bad())?;
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            if b.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(a, b))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// JSON literal `{"n": conductor, "c": {"k": "a/b"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycLiteral {
    pub n: u32,
    pub c: BTreeMap<String, String>,
}

impl Serialize for Cyc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_literal().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cyc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let l = CycLiteral::deserialize(d)?;
        Cyc::from_literal(&l).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Cyc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty())
    }
}

impl fmt::Debug for Cyc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty())
    }
}

impl Default for Cyc {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for Cyc {
    fn from(a: i64) -> Self {
        Cyc::from_int(a)
    }
}

impl From<Q> for Cyc {
    fn from(a: Q) -> Self {
        Cyc::from_q(a)
    }
}

impl Add<&Cyc> for &Cyc {
    type Output = Cyc;
    fn add(self, o: &Cyc) -> Cyc {
        self.add_ref(o)
    }
}
impl Add for Cyc {
    type Output = Cyc;
    fn add(self, o: Cyc) -> Cyc {
        self.add_ref(&o)
    }
}
impl AddAssign<&Cyc> for Cyc {
    fn add_assign(&mut self, o: &Cyc) {
        *self = self.add_ref(o);
    }
}
impl AddAssign for Cyc {
    fn add_assign(&mut self, o: Cyc) {
        *self = self.add_ref(&o);
    }
}
impl Neg for &Cyc {
    type Output = Cyc;
    fn neg(self) -> Cyc {
        Cyc {
            n: self.n,
            c: self.c.iter().map(|(k, a)| (*k, -a)).collect(),
        }
    }
}
impl Neg for Cyc {
    type Output = Cyc;
    fn neg(self) -> Cyc {
        -&self
    }
}
impl Sub<&Cyc> for &Cyc {
    type Output = Cyc;
    fn sub(self, o: &Cyc) -> Cyc {
        self.add_ref(&-o)
    }
}
impl Sub for Cyc {
    type Output = Cyc;
    fn sub(self, o: Cyc) -> Cyc {
        self.add_ref(&-o)
    }
}
impl Mul<&Cyc> for &Cyc {
    type Output = Cyc;
    fn mul(self, o: &Cyc) -> Cyc {
        self.mul_ref(o)
    }
}
impl Mul for Cyc {
    type Output = Cyc;
    fn mul(self, o: Cyc) -> Cyc {
        self.mul_ref(&o)
    }
}
impl std::iter::Sum for Cyc {
    fn sum<I: Iterator<Item = Cyc>>(it: I) -> Cyc {
        let mut acc = Cyc::zero();
        for x in it {
            acc += x;
        }
        acc
    }
}

/// Sum of many terms, accumulated in one dense vector over a common conductor.
pub fn sum_all<'a>(xs: impl IntoIterator<Item = &'a Cyc>) -> Cyc {
    let xs: Vec<&Cyc> = xs.into_iter().filter(|x| !x.is_zero()).collect();
    if xs.is_empty() {
        return Cyc::zero();
    }
    let l = xs.iter().fold(1u32, |l, x| num_integer::lcm(l, x.n));
    if l == 1 {
        return Cyc::from_q(xs.iter().map(|x| x.c[0].1.clone()).sum());
    }
    let mut v = vec![Q::zero(); l as usize];
    for x in xs {
        let s = l / x.n;
        for (k, a) in &x.c {
            v[(k * s) as usize] += a;
        }
    }
    Cyc::from_dense(l, v)
}
