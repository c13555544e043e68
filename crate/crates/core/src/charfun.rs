//! Class functions, character tables and generalized decomposition maps.
//!
//! A [`ClassFunction`] lives on one [`Subgroup`] and stores a value per class
//! of that subgroup. Moving between groups is always explicit through
//! [`ClassFunction::restrict`], [`ClassFunction::induce`] or
//! [`ClassFunction::conjugate`].

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::cyclo::{sum_all, Cyc, Q};
use crate::perm::{p1, p2, product_subgroup, Classes, Subgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CharError {
    #[error("class functions live on different groups")]
    GroupMismatch,
    #[error("{0} is not a subgroup of {1}")]
    NotSubgroup(String, String),
    #[error("character table computation failed: {0}")]
    Table(String),
    #[error("orthogonality fails: {0}")]
    Orthogonality(String),
    #[error("coordinate {index} is {value}, not an integer")]
    NonIntegral { index: usize, value: String },
    #[error("{0} is not a p-element")]
    NotPElement(String),
    #[error("element outside the group")]
    Support,
}

fn q(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

/// A `K`-valued class function on a subgroup.
#[derive(Clone, PartialEq, Eq)]
pub struct ClassFunction {
    group: Subgroup,
    values: Vec<Cyc>,
}

impl std::fmt::Debug for ClassFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v: Vec<String> = self.values.iter().map(|x| x.pretty()).collect();
        write!(f, "[{}] on {:?}", v.join(", "), self.group)
    }
}

impl ClassFunction {
    pub fn new(group: &Subgroup, values: Vec<Cyc>) -> Self {
        assert_eq!(values.len(), group.classes().len());
        ClassFunction {
            group: group.clone(),
            values,
        }
    }
    pub fn zero(group: &Subgroup) -> Self {
        Self::new(group, vec![Cyc::zero(); group.classes().len()])
    }
    pub fn constant(group: &Subgroup, c: Cyc) -> Self {
        Self::new(group, vec![c; group.classes().len()])
    }
    pub fn trivial(group: &Subgroup) -> Self {
        Self::constant(group, Cyc::one())
    }
    pub fn regular(group: &Subgroup) -> Self {
        Self::from_fn(group, |x| {
            if x == 0 {
                Cyc::from_int(group.order() as i64)
            } else {
                Cyc::zero()
            }
        })
    }
    /// Evaluates `f` on class representatives; `f` must be a class function.
    pub fn from_fn(group: &Subgroup, mut f: impl FnMut(u32) -> Cyc) -> Self {
        let cl = group.classes();
        Self::new(group, cl.reps.iter().map(|&x| f(x)).collect())
    }

    pub fn group(&self) -> &Subgroup {
        &self.group
    }
    pub fn values(&self) -> &[Cyc] {
        &self.values
    }
    pub fn classes(&self) -> Arc<Classes> {
        self.group.classes()
    }
    /// Value at an element of the group.
    pub fn at(&self, x: u32) -> &Cyc {
        &self.values[self.group.classes().of(x)]
    }
    pub fn try_at(&self, x: u32) -> Option<&Cyc> {
        self.group.classes().try_of(x).map(|c| &self.values[c])
    }
    pub fn degree(&self) -> &Cyc {
        &self.values[0]
    }
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    fn check(&self, o: &Self) -> Result<(), CharError> {
        if self.group == o.group {
            Ok(())
        } else {
            Err(CharError::GroupMismatch)
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, CharError> {
        self.check(o)?;
        Ok(Self::new(
            &self.group,
            self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect(),
        ))
    }
    pub fn sub(&self, o: &Self) -> Result<Self, CharError> {
        self.check(o)?;
        Ok(Self::new(
            &self.group,
            self.values.iter().zip(&o.values).map(|(a, b)| a - b).collect(),
        ))
    }
    pub fn mul(&self, o: &Self) -> Result<Self, CharError> {
        self.check(o)?;
        Ok(Self::new(
            &self.group,
            self.values.iter().zip(&o.values).map(|(a, b)| a * b).collect(),
        ))
    }
    pub fn scale(&self, c: &Cyc) -> Self {
        Self::new(&self.group, self.values.iter().map(|a| a * c).collect())
    }
    pub fn scale_q(&self, c: &Q) -> Self {
        Self::new(&self.group, self.values.iter().map(|a| a.scale(c)).collect())
    }
    pub fn neg(&self) -> Self {
        Self::new(&self.group, self.values.iter().map(|a| -a).collect())
    }

    /// `(χ,ψ)_G = 1/|G| Σ χ(g)ψ(g⁻¹)`.
    pub fn inner(&self, o: &Self) -> Result<Cyc, CharError> {
        self.check(o)?;
        let cl = self.classes();
        let terms: Vec<Cyc> = (0..cl.len())
            .filter(|&i| !self.values[i].is_zero() && !o.values[cl.inverse[i]].is_zero())
            .map(|i| (&self.values[i] * &o.values[cl.inverse[i]]).scale(&q(cl.sizes[i] as i64, 1)))
            .collect();
        Ok(sum_all(&terms).scale(&q(1, self.group.order() as i64)))
    }

    /// `χ°(g) = χ(g⁻¹)`.
    pub fn dual(&self) -> Self {
        let cl = self.classes();
        Self::new(
            &self.group,
            (0..cl.len()).map(|i| self.values[cl.inverse[i]].clone()).collect(),
        )
    }

    /// `Res^G_H`.
    pub fn restrict(&self, h: &Subgroup) -> Result<Self, CharError> {
        if !h.is_subgroup_of(&self.group) {
            return Err(CharError::NotSubgroup(format!("{h:?}"), format!("{:?}", self.group)));
        }
        Ok(Self::from_fn(h, |x| self.at(x).clone()))
    }

    /// `Ind_H^G`.
    pub fn induce(&self, g: &Subgroup) -> Result<Self, CharError> {
        if !self.group.is_subgroup_of(g) {
            return Err(CharError::NotSubgroup(format!("{:?}", self.group), format!("{g:?}")));
        }
        let cl = g.classes();
        let h = &self.group;
        let hcl = h.classes();
        let mut vals = Vec::with_capacity(cl.len());
        for i in 0..cl.len() {
            // |G| / (|K| |H|) Σ_{h ∈ K ∩ H} χ(h), grouped by H-class
            let mut counts: BTreeMap<usize, i64> = BTreeMap::new();
            for &x in &cl.members[i] {
                if let Some(c) = hcl.try_of(x) {
                    *counts.entry(c).or_default() += 1;
                }
            }
            let terms: Vec<Cyc> = counts.iter().map(|(&c, &k)| self.values[c].scale(&q(k, 1))).collect();
            vals.push(sum_all(&terms).scale(&q(g.order() as i64, (cl.sizes[i] * h.order()) as i64)));
        }
        Ok(Self::new(g, vals))
    }

    /// `^gχ` on `^gH`, with `(^gχ)(^g h) = χ(h)`.
    pub fn conjugate(&self, g: u32) -> Self {
        let amb = self.group.amb().clone();
        let target = self.group.conjugate(g);
        let gi = amb.inv(g);
        Self::from_fn(&target, |y| self.at(amb.conj(gi, y)).clone())
    }

    /// `χ(α) = Σ a_m χ(m)`.
    pub fn evaluate(&self, a: &AlgebraElement) -> Result<Cyc, CharError> {
        let cl = self.classes();
        let mut per_class: Vec<Vec<&Cyc>> = vec![Vec::new(); cl.len()];
        for (&m, c) in &a.coeffs {
            let k = cl.try_of(m).ok_or(CharError::Support)?;
            per_class[k].push(c);
        }
        let terms: Vec<Cyc> = per_class
            .iter()
            .enumerate()
            .filter(|(i, v)| !v.is_empty() && !self.values[*i].is_zero())
            .map(|(i, v)| &sum_all(v.iter().copied()) * &self.values[i])
            .collect();
        Ok(sum_all(&terms))
    }

    /// `(z·χ)(g) = χ(gz)` for a central element `z`.
    pub fn act(&self, z: &AlgebraElement) -> Result<Self, CharError> {
        let amb = self.group.amb().clone();
        let cl = self.classes();
        let mut vals = Vec::with_capacity(cl.len());
        for &g in &cl.reps {
            let shifted = AlgebraElement {
                group: self.group.clone(),
                coeffs: z.coeffs.iter().map(|(&m, c)| (amb.mul(g, m), c.clone())).collect(),
            };
            vals.push(self.evaluate(&shifted)?);
        }
        Ok(Self::new(&self.group, vals))
    }

    /// Coordinates `(χ, ψ_i)` against the irreducibles.
    pub fn coordinates(&self) -> Vec<Cyc> {
        let t = character_table(&self.group);
        t.irr
            .iter()
            .map(|psi| self.inner(&psi.dual()).expect("same group"))
            .collect()
    }

    /// Coordinates, required to be integers.
    pub fn to_virtual(&self) -> Result<VirtualCharacter, CharError> {
        let cs = self.coordinates();
        let mut coords = Vec::with_capacity(cs.len());
        for (i, c) in cs.iter().enumerate() {
            match c.to_integer() {
                Some(z) => coords.push(z),
                None => {
                    return Err(CharError::NonIntegral {
                        index: i,
                        value: c.pretty(),
                    })
                }
            }
        }
        Ok(VirtualCharacter {
            table: character_table(&self.group),
            coords,
        })
    }

    pub fn is_virtual_character(&self) -> bool {
        self.coordinates().iter().all(|c| c.to_integer().is_some())
    }

    pub fn is_character(&self) -> bool {
        self.coordinates()
            .iter()
            .all(|c| c.to_integer().is_some_and(|z| z >= BigInt::zero()))
    }

    /// Whether `P` lies in the kernel of every constituent.
    pub fn constituents_contain_in_kernel(&self, p: &Subgroup) -> bool {
        let t = character_table(&self.group);
        let cs = self.coordinates();
        t.irr
            .iter()
            .zip(&cs)
            .all(|(chi, c)| c.is_zero() || p.elems().iter().all(|&x| chi.at(x) == chi.degree()))
    }

    /// `χ(xy) = χ(x)` for all `y ∈ P`.
    pub fn constant_on_cosets(&self, p: &Subgroup) -> bool {
        let amb = self.group.amb();
        self.group
            .elems()
            .iter()
            .all(|&x| p.elems().iter().all(|&y| self.at(amb.mul(x, y)) == self.at(x)))
    }
}

/// `(χ × ψ)(g, h) = χ(g)ψ(h)` on `A × B`.
pub fn outer_product(chi: &ClassFunction, psi: &ClassFunction) -> ClassFunction {
    let x = product_subgroup(chi.group(), psi.group());
    let amb = x.amb().clone();
    ClassFunction::from_fn(&x, |z| {
        let (a, b) = amb.split(z);
        chi.at(a) * psi.at(b)
    })
}

/// `(μ ⊗_H ν)(g) = 1/|H| Σ_h μ(g,h) ν(h)` for `μ` on `A × H` and `ν` on `H`.
pub fn contract(mu: &ClassFunction, nu: &ClassFunction) -> Result<ClassFunction, CharError> {
    let x = mu.group();
    let (a, h) = (p1(x), p2(x));
    if product_subgroup(&a, &h) != *x || h != *nu.group() {
        return Err(CharError::GroupMismatch);
    }
    let amb = x.amb().clone();
    let hcl = h.classes();
    Ok(ClassFunction::from_fn(&a, |g| {
        let terms: Vec<Cyc> = (0..hcl.len())
            .filter(|&c| !nu.values[c].is_zero())
            .map(|c| {
                let vals: Vec<&Cyc> = hcl.members[c].iter().map(|&y| mu.at(amb.pair(g, y))).collect();
                &sum_all(vals) * &nu.values[c]
            })
            .collect();
        sum_all(&terms).scale(&q(1, h.order() as i64))
    }))
}

/// `^{(x,y)}μ` for `μ` on a subgroup of `G × H`.
pub fn conjugate_pair(mu: &ClassFunction, x: u32, y: u32) -> ClassFunction {
    let amb = mu.group().amb().clone();
    mu.conjugate(amb.pair(x, y))
}

/// An element of the group algebra `K[S]`, keyed by ambient element indices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AlgebraElement {
    pub group: Subgroup,
    pub coeffs: BTreeMap<u32, Cyc>,
}

impl AlgebraElement {
    pub fn zero(group: &Subgroup) -> Self {
        AlgebraElement {
            group: group.clone(),
            coeffs: BTreeMap::new(),
        }
    }
    pub fn one(group: &Subgroup) -> Self {
        Self::basis(group, 0)
    }
    pub fn basis(group: &Subgroup, x: u32) -> Self {
        AlgebraElement {
            group: group.clone(),
            coeffs: BTreeMap::from([(x, Cyc::one())]),
        }
    }
    pub fn from_map(group: &Subgroup, coeffs: BTreeMap<u32, Cyc>) -> Self {
        AlgebraElement {
            group: group.clone(),
            coeffs: coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }
    /// The central element `Σ_g f(g) g` for a class function `f`.
    pub fn from_class_function(f: &ClassFunction) -> Self {
        let coeffs = f
            .group
            .elems()
            .iter()
            .map(|&x| (x, f.at(x).clone()))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        AlgebraElement {
            group: f.group.clone(),
            coeffs,
        }
    }
    pub fn coeff(&self, x: u32) -> Cyc {
        self.coeffs.get(&x).cloned().unwrap_or_default()
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut c = self.coeffs.clone();
        for (&k, v) in &o.coeffs {
            let e = c.entry(k).or_default();
            *e = &*e + v;
        }
        Self::from_map(&self.group, c)
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&Cyc::from_int(-1)))
    }
    pub fn scale(&self, a: &Cyc) -> Self {
        Self::from_map(&self.group, self.coeffs.iter().map(|(&k, v)| (k, v * a)).collect())
    }
    pub fn mul(&self, o: &Self) -> Self {
        let amb = self.group.amb();
        let mut acc: BTreeMap<u32, Vec<Cyc>> = BTreeMap::new();
        for (&x, a) in &self.coeffs {
            for (&y, b) in &o.coeffs {
                acc.entry(amb.mul(x, y)).or_default().push(a * b);
            }
        }
        let group = if self.group.is_subgroup_of(&o.group) {
            o.group.clone()
        } else {
            self.group.clone()
        };
        Self::from_map(&group, acc.into_iter().map(|(k, v)| (k, sum_all(&v))).collect())
    }
    /// The antipode `Σ a_g g ↦ Σ a_g g⁻¹`.
    pub fn star(&self) -> Self {
        let amb = self.group.amb();
        Self::from_map(
            &self.group,
            self.coeffs.iter().map(|(&k, v)| (amb.inv(k), v.clone())).collect(),
        )
    }
    /// `^g α`.
    pub fn conjugate(&self, g: u32) -> Self {
        let amb = self.group.amb();
        AlgebraElement {
            group: self.group.conjugate(g),
            coeffs: self.coeffs.iter().map(|(&k, v)| (amb.conj(g, k), v.clone())).collect(),
        }
    }
    /// Fixed by conjugation with every element of `s`.
    pub fn is_stable_under(&self, s: &Subgroup) -> bool {
        let amb = self.group.amb();
        s.gens().iter().all(|&g| {
            self.coeffs
                .iter()
                .all(|(&k, v)| self.coeffs.get(&amb.conj(g, k)) == Some(v))
        })
    }
    pub fn is_central(&self) -> bool {
        self.is_stable_under(&self.group)
    }
    pub fn is_idempotent(&self) -> bool {
        self.mul(self) == *self
    }
    pub fn is_p_integral(&self, p: u64) -> bool {
        self.coeffs.values().all(|c| c.is_p_integral(p))
    }
    pub fn with_group(&self, g: &Subgroup) -> Self {
        AlgebraElement {
            group: g.clone(),
            coeffs: self.coeffs.clone(),
        }
    }
}

/// `d^u(χ)` or, with `e`, `d^{u,e}(χ)` on `C_G(u)`.
pub fn gen_decomp(chi: &ClassFunction, u: u32, e: Option<&AlgebraElement>, p: u64) -> Result<ClassFunction, CharError> {
    let g = chi.group();
    let amb = g.amb().clone();
    if !amb.is_p_element(u, p) || !g.contains(u) {
        return Err(CharError::NotPElement(amb.elem(u).to_string()));
    }
    let c = g.centralizer_of(&[u]);
    let mut out = Vec::new();
    for &s in &c.classes().reps {
        if !amb.is_p_regular(s, p) {
            out.push(Cyc::zero());
            continue;
        }
        let us = amb.mul(u, s);
        out.push(match e {
            None => chi.at(us).clone(),
            Some(e) => {
                let shifted =
                    AlgebraElement::from_map(g, e.coeffs.iter().map(|(&m, v)| (amb.mul(us, m), v.clone())).collect());
                chi.evaluate(&shifted)?
            }
        });
    }
    Ok(ClassFunction::new(&c, out))
}

/// `Irr(G)` with exact orthogonality certified.
#[derive(Debug)]
pub struct CharTable {
    pub group: Subgroup,
    pub classes: Arc<Classes>,
    pub irr: Vec<ClassFunction>,
}

impl CharTable {
    pub fn len(&self) -> usize {
        self.irr.len()
    }
    pub fn is_empty(&self) -> bool {
        self.irr.is_empty()
    }
    pub fn degrees(&self) -> Vec<i64> {
        self.irr.iter().map(|c| c.degree().to_i64().unwrap()).collect()
    }

    /// Both orthogonality relations, exactly.
    pub fn verify(&self) -> Result<(), CharError> {
        let cl = &self.classes;
        let n = self.group.order() as i64;
        if self.irr.len() != cl.len() {
            return Err(CharError::Orthogonality(format!(
                "{} rows for {} classes",
                self.irr.len(),
                cl.len()
            )));
        }
        for (a, x) in self.irr.iter().enumerate() {
            if x.degree().to_i64().is_none_or(|d| d <= 0) {
                return Err(CharError::Orthogonality(format!("row {a} has degree {}", x.degree())));
            }
            for (b, y) in self.irr.iter().enumerate().skip(a) {
                let ip = x.inner(y)?;
                let want = if a == b { Cyc::one() } else { Cyc::zero() };
                if ip != want {
                    return Err(CharError::Orthogonality(format!("rows {a},{b}: {ip}")));
                }
            }
        }
        for i in 0..cl.len() {
            for j in i..cl.len() {
                let terms: Vec<Cyc> = self
                    .irr
                    .iter()
                    .map(|c| &c.values[i] * &c.values[cl.inverse[j]])
                    .collect();
                let s = sum_all(&terms);
                let want = if i == j {
                    Cyc::from_int(n / cl.sizes[i] as i64)
                } else {
                    Cyc::zero()
                };
                if s != want {
                    return Err(CharError::Orthogonality(format!("columns {i},{j}: {s}")));
                }
            }
        }
        Ok(())
    }

    /// Builds and certifies a table from given rows, reordering into canonical order.
    pub fn from_rows(group: &Subgroup, rows: Vec<Vec<Cyc>>) -> Result<Self, CharError> {
        let mut irr: Vec<ClassFunction> = rows.into_iter().map(|r| ClassFunction::new(group, r)).collect();
        sort_irr(&mut irr);
        let t = CharTable {
            group: group.clone(),
            classes: group.classes(),
            irr,
        };
        t.verify()?;
        Ok(t)
    }
}

fn cyc_key(c: &Cyc) -> (u32, Vec<(u32, BigInt, BigInt)>) {
    (
        c.conductor(),
        c.terms()
            .iter()
            .map(|(k, a)| (*k, a.numer().clone(), a.denom().clone()))
            .collect(),
    )
}

fn sort_irr(irr: &mut [ClassFunction]) {
    irr.sort_by_cached_key(|c| {
        let nontrivial = c.values.iter().any(|v| !v.is_one_value());
        (
            c.degree().to_i64().unwrap_or(i64::MAX),
            nontrivial,
            c.values.iter().map(cyc_key).collect::<Vec<_>>(),
        )
    });
}

trait OneValue {
    fn is_one_value(&self) -> bool;
}
impl OneValue for Cyc {
    fn is_one_value(&self) -> bool {
        self.to_rational().is_some_and(|q| q.is_one())
    }
}

/// Character table of a subgroup, memoized on the subgroup handle.
pub fn character_table(g: &Subgroup) -> Arc<CharTable> {
    g.memo("irr", || {
        dixon(g).unwrap_or_else(|e| panic!("character table of {g:?}: {e}"))
    })
}

/// Installs a precomputed table after certification.
pub fn install_table(g: &Subgroup, rows: Vec<Vec<Cyc>>) -> Result<Arc<CharTable>, CharError> {
    let t = CharTable::from_rows(g, rows)?;
    Ok(g.memo("irr", || t))
}

fn modpow(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn primitive_root(q: u64) -> u64 {
    let fs = crate::cyclo::factorize(q - 1);
    (2..q)
        .find(|&g| fs.iter().all(|&(f, _)| modpow(g, (q - 1) / f, q) != 1))
        .unwrap()
}

fn inv_mod(a: u64, q: u64) -> u64 {
    modpow(a, q - 2, q)
}

/// Dixon–Schneider over `F_q` followed by exact lifting and certification.
fn dixon(g: &Subgroup) -> Result<CharTable, CharError> {
    let cl = g.classes();
    let r = cl.len();
    let n = g.order() as u64;
    let amb = g.amb().clone();
    let e = g.exponent();
    let mut qq = e + 1;
    while !(is_prime(qq) && qq > 2 * n) {
        qq += e;
    }
    let q = qq;
    // class matrices: A_j[l][m] = #{x ∈ K_j : x⁻¹ g_m ∈ K_l}
    let mats: Vec<Vec<Vec<u64>>> = (0..r)
        .map(|j| {
            let mut a = vec![vec![0u64; r]; r];
            for (m, &gm) in cl.reps.iter().enumerate() {
                for &x in &cl.members[j] {
                    let l = cl.of(amb.mul(amb.inv(x), gm));
                    a[l][m] += 1;
                }
            }
            a
        })
        .collect();
    let mut spaces: Vec<Vec<Vec<u64>>> = vec![(0..r).map(|i| (0..r).map(|k| (i == k) as u64).collect()).collect()];
    for a in mats.iter().skip(1) {
        if spaces.iter().all(|s| s.len() == 1) {
            break;
        }
        let mut next = Vec::new();
        for s in spaces {
            if s.len() == 1 {
                next.push(s);
                continue;
            }
            next.extend(split_space(&s, a, q)?);
        }
        spaces = next;
    }
    if spaces.len() != r {
        return Err(CharError::Table(format!(
            "found {} eigenspaces for {r} classes",
            spaces.len()
        )));
    }
    let gamma = primitive_root(q);
    let mut rows = Vec::with_capacity(r);
    for s in spaces {
        let v = &s[0];
        let c = inv_mod(v[0], q);
        let w: Vec<u64> = v.iter().map(|x| x * c % q).collect();
        let mut sum = 0u64;
        for i in 0..r {
            sum = (sum + w[i] * w[cl.inverse[i]] % q * inv_mod(cl.sizes[i] as u64 % q, q)) % q;
        }
        let d2 = n % q * inv_mod(sum, q) % q;
        let d = (1..=n)
            .take_while(|d| d * d <= n)
            .find(|d| d * d % q == d2)
            .ok_or_else(|| CharError::Table("no degree".into()))?;
        let vals: Vec<u64> = (0..r)
            .map(|i| d * w[i] % q * inv_mod(cl.sizes[i] as u64 % q, q) % q)
            .collect();
        let mut row = Vec::with_capacity(r);
        for i in 0..r {
            let x = cl.reps[i];
            let o = cl.orders[i] as u64;
            let z = modpow(gamma, (q - 1) / o, q);
            let powvals: Vec<u64> = (0..o).map(|j| vals[cl.of(amb.pow(x, j as i64))]).collect();
            let oinv = inv_mod(o % q, q);
            let mut dense = vec![Q::zero(); o as usize];
            for k in 0..o {
                let mut m = 0u64;
                for j in 0..o {
                    m = (m + powvals[j as usize] * modpow(z, (q - 1 - (j * k) % (q - 1)) % (q - 1), q)) % q;
                }
                m = m * oinv % q;
                if m > d {
                    return Err(CharError::Table(format!(
                        "eigenvalue multiplicity {m} exceeds degree {d}"
                    )));
                }
                dense[k as usize] = Q::from_integer(BigInt::from(m));
            }
            row.push(Cyc::from_dense(o as u32, dense));
        }
        rows.push(row);
    }
    CharTable::from_rows(g, rows)
}

/// Splits an invariant subspace (rows form an RREF basis) into eigenspaces of `a`.
fn split_space(basis: &[Vec<u64>], a: &[Vec<u64>], q: u64) -> Result<Vec<Vec<Vec<u64>>>, CharError> {
    let k = basis.len();
    let r = a.len();
    let piv: Vec<usize> = basis.iter().map(|b| b.iter().position(|&x| x != 0).unwrap()).collect();
    // m[t][i] = (A b_i)[piv t]
    let mut m = vec![vec![0u64; k]; k];
    for (i, b) in basis.iter().enumerate() {
        for (t, &pt) in piv.iter().enumerate() {
            let mut s = 0;
            for c in 0..r {
                s = (s + a[pt][c] * b[c]) % q;
            }
            m[t][i] = s;
        }
    }
    let cp = charpoly(&m, q);
    let mut out = Vec::new();
    let mut total = 0;
    for lam in 0..q {
        let mut val = 0u64;
        for c in cp.iter().rev() {
            val = (val * lam + c) % q;
        }
        if val != 0 {
            continue;
        }
        let mut ml = m.clone();
        for (t, row) in ml.iter_mut().enumerate() {
            row[t] = (row[t] + q - lam) % q;
        }
        let ker = nullspace(&ml, q);
        let vecs: Vec<Vec<u64>> = ker
            .iter()
            .map(|c| {
                let mut v = vec![0u64; r];
                for (i, b) in basis.iter().enumerate() {
                    for x in 0..r {
                        v[x] = (v[x] + c[i] * b[x]) % q;
                    }
                }
                v
            })
            .collect();
        total += vecs.len();
        out.push(rref(vecs, q));
    }
    if total != k {
        return Err(CharError::Table("class matrix not diagonalizable over F_q".into()));
    }
    Ok(out)
}

/// Characteristic polynomial coefficients `c_0..c_k` (monic) by Faddeev–LeVerrier.
fn charpoly(m: &[Vec<u64>], q: u64) -> Vec<u64> {
    let k = m.len();
    let mut c = vec![0u64; k + 1];
    c[k] = 1;
    let mut mk = vec![vec![0u64; k]; k];
    for step in 1..=k {
        // M_step = A M_{step-1} + c_{k-step+1} I
        let mut next = vec![vec![0u64; k]; k];
        for i in 0..k {
            for j in 0..k {
                let mut s = 0;
                for t in 0..k {
                    s = (s + m[i][t] * mk[t][j]) % q;
                }
                next[i][j] = s;
            }
            next[i][i] = (next[i][i] + c[k - step + 1]) % q;
        }
        mk = next;
        // c_{k-step} = -1/step tr(A M_step)
        let mut tr = 0;
        for i in 0..k {
            for t in 0..k {
                tr = (tr + m[i][t] * mk[t][i]) % q;
            }
        }
        c[k - step] = (q - tr) % q * inv_mod(step as u64, q) % q;
    }
    c
}

fn rref(mut rows: Vec<Vec<u64>>, q: u64) -> Vec<Vec<u64>> {
    if rows.is_empty() {
        return rows;
    }
    let ncols = rows[0].len();
    let mut out_rank = 0;
    for col in 0..ncols {
        if out_rank == rows.len() {
            break;
        }
        let Some(p) = (out_rank..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(out_rank, p);
        let inv = inv_mod(rows[out_rank][col], q);
        for x in rows[out_rank].iter_mut() {
            *x = *x * inv % q;
        }
        let pivot = rows[out_rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != out_rank && row[col] != 0 {
                let f = row[col];
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x = (*x + q - f * y % q) % q;
                }
            }
        }
        out_rank += 1;
    }
    rows.truncate(out_rank);
    rows
}

fn nullspace(m: &[Vec<u64>], q: u64) -> Vec<Vec<u64>> {
    let k = m[0].len();
    let r = rref(m.to_vec(), q);
    let pivs: Vec<usize> = r.iter().map(|row| row.iter().position(|&x| x != 0).unwrap()).collect();
    let mut out = Vec::new();
    for free in 0..k {
        if pivs.contains(&free) {
            continue;
        }
        let mut v = vec![0u64; k];
        v[free] = 1;
        for (row, &pc) in r.iter().zip(&pivs) {
            v[pc] = (q - row[free]) % q;
        }
        out.push(v);
    }
    out
}

/// Integer coordinates over `Irr(G)`.
#[derive(Debug, Clone)]
pub struct VirtualCharacter {
    pub table: Arc<CharTable>,
    pub coords: Vec<BigInt>,
}

impl VirtualCharacter {
    pub fn to_class_function(&self) -> ClassFunction {
        let g = &self.table.group;
        let mut acc = ClassFunction::zero(g);
        for (c, chi) in self.coords.iter().zip(&self.table.irr) {
            if !c.is_zero() {
                acc = acc.add(&chi.scale_q(&Q::from_integer(c.clone()))).unwrap();
            }
        }
        acc
    }
}
