//! Permutation groups by full enumeration.
//!
//! A [`PermGroup`] owns its sorted element list together with multiplication,
//! inverse and order tables. Elements are addressed by `u32` indices into that
//! list; index 0 is always the identity because image sequences are ordered
//! lexicographically. Subgroups are [`Subgroup`] handles sharing one canonical
//! `SubData` per element set.

use std::any::Any;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Largest group this crate will enumerate.
pub const MAX_ORDER: usize = 100_000;
const TABLE_LIMIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("generator {index}: {reason}")]
    BadGenerator { index: usize, reason: String },
    #[error("group has more than {0} elements")]
    TooLarge(usize),
    #[error("not a group isomorphism: {0}")]
    NotIsomorphism(String),
    #[error("ambient groups differ")]
    AmbientMismatch,
    #[error("group is not a direct product")]
    NotProduct,
}

/// A permutation of `{0..n}` stored by images. Ordering is lexicographic on images.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm(Vec<u16>);

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm((0..n as u16).collect())
    }

    /// Builds from 1-based images.
    pub fn from_images(images: &[usize]) -> Result<Self, String> {
        let n = images.len();
        if n > u16::MAX as usize {
            return Err(format!("degree {n} too large"));
        }
        let mut seen = vec![false; n];
        let mut v = Vec::with_capacity(n);
        for (i, &x) in images.iter().enumerate() {
            if x == 0 || x > n {
                return Err(format!("image {x} of point {} out of range 1..{n}", i + 1));
            }
            if seen[x - 1] {
                return Err(format!("image {x} repeated"));
            }
            seen[x - 1] = true;
            v.push((x - 1) as u16);
        }
        Ok(Perm(v))
    }

    /// Builds from 1-based cycles.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self, String> {
        let mut v: Vec<u16> = (0..n as u16).collect();
        let mut touched = vec![false; n];
        for c in cycles {
            for (i, &x) in c.iter().enumerate() {
                if x == 0 || x > n {
                    return Err(format!("point {x} out of range 1..{n}"));
                }
                if touched[x - 1] {
                    return Err(format!("point {x} appears twice"));
                }
                touched[x - 1] = true;
                let y = c[(i + 1) % c.len()];
                v[x - 1] = (y - 1) as u16;
            }
        }
        Ok(Perm(v))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// 1-based images.
    pub fn images(&self) -> Vec<usize> {
        self.0.iter().map(|&x| x as usize + 1).collect()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.0[x] as usize
    }

    /// `(self * h)(x) = self(h(x))`.
    pub fn compose(&self, h: &Perm) -> Perm {
        Perm(h.0.iter().map(|&x| self.0[x as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut v = vec![0u16; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            v[x as usize] = i as u16;
        }
        Perm(v)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    /// Action on the disjoint union of both point sets.
    pub fn concat(&self, other: &Perm) -> Perm {
        let off = self.0.len() as u16;
        let mut v = self.0.clone();
        v.extend(other.0.iter().map(|&x| x + off));
        Perm(v)
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.0.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] || self.0[s] as usize == s {
                continue;
            }
            let mut c = vec![s + 1];
            seen[s] = true;
            let mut x = self.0[s] as usize;
            while x != s {
                seen[x] = true;
                c.push(x + 1);
                x = self.0[x] as usize;
            }
            out.push(c);
        }
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs = self.cycles();
        if cs.is_empty() {
            return write!(f, "()");
        }
        for c in cs {
            let s: Vec<String> = c.iter().map(|x| x.to_string()).collect();
            write!(f, "({})", s.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Splits `n = p^a * m` with `p ∤ m`.
pub fn split_prime(n: u64, p: u64) -> (u64, u64) {
    let mut q = 1;
    let mut m = n;
    while m.is_multiple_of(p) {
        m /= p;
        q *= p;
    }
    (q, m)
}

/// A finite permutation group with all elements enumerated.
pub struct PermGroup {
    degree: usize,
    gens: Vec<Perm>,
    elems: Vec<Perm>,
    index: HashMap<Perm, u32>,
    mul: Vec<u32>,
    inv: Vec<u32>,
    ord: Vec<u32>,
    factors: Option<(Arc<PermGroup>, Arc<PermGroup>)>,
    subs: Mutex<HashMap<Vec<u32>, Arc<SubData>>>,
}

impl fmt::Debug for PermGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PermGroup(degree {}, order {}, gens {:?})",
            self.degree,
            self.elems.len(),
            self.gens
        )
    }
}

impl PermGroup {
    pub fn from_generators(degree: usize, gens: Vec<Perm>) -> Result<Arc<Self>, PermError> {
        for (i, g) in gens.iter().enumerate() {
            if g.degree() != degree {
                return Err(PermError::BadGenerator {
                    index: i,
                    reason: format!("has degree {} but group degree is {degree}", g.degree()),
                });
            }
        }
        let id = Perm::identity(degree);
        let mut elems = vec![id.clone()];
        let mut seen: HashSet<Perm> = HashSet::from([id]);
        let mut i = 0;
        while i < elems.len() {
            for s in &gens {
                let y = elems[i].compose(s);
                if !seen.contains(&y) {
                    if elems.len() >= MAX_ORDER {
                        return Err(PermError::TooLarge(MAX_ORDER));
                    }
                    seen.insert(y.clone());
                    elems.push(y);
                }
            }
            i += 1;
        }
        elems.sort();
        Ok(Arc::new(Self::from_sorted(degree, gens, elems, None)))
    }

    fn from_sorted(
        degree: usize,
        gens: Vec<Perm>,
        elems: Vec<Perm>,
        factors: Option<(Arc<PermGroup>, Arc<PermGroup>)>,
    ) -> Self {
        let n = elems.len();
        let index: HashMap<Perm, u32> = elems.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        let inv: Vec<u32> = elems.iter().map(|p| index[&p.inverse()]).collect();
        let mut g = PermGroup {
            degree,
            gens,
            elems,
            index,
            mul: Vec::new(),
            inv,
            ord: Vec::new(),
            factors,
            subs: Mutex::new(HashMap::new()),
        };
        if n <= TABLE_LIMIT {
            g.mul = match &g.factors {
                Some((a, b)) => {
                    let (na, nb) = (a.order(), b.order());
                    let mut t = vec![0u32; n * n];
                    for x in 0..n {
                        let (xa, xb) = (x / nb, x % nb);
                        for y in 0..n {
                            let (ya, yb) = (y / nb, y % nb);
                            let za = a.mul(xa as u32, ya as u32) as usize;
                            let zb = b.mul(xb as u32, yb as u32) as usize;
                            t[x * n + y] = (za * nb + zb) as u32;
                        }
                    }
                    let _ = na;
                    t
                }
                None => g.build_table(),
            };
        }
        g.ord = (0..n as u32).map(|x| g.compute_order(x)).collect();
        g
    }

    /// Right-multiplication words: `b = c * s` gives `a * b = (a * c) * s`.
    fn build_table(&self) -> Vec<u32> {
        let n = self.elems.len();
        let right: Vec<Vec<u32>> = self
            .gens
            .iter()
            .map(|s| self.elems.iter().map(|x| self.index[&x.compose(s)]).collect())
            .collect();
        let mut parent: Vec<Option<(u32, usize)>> = vec![None; n];
        let mut order = vec![0u32];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut q = VecDeque::from([0u32]);
        while let Some(c) = q.pop_front() {
            for (si, r) in right.iter().enumerate() {
                let b = r[c as usize];
                if !seen[b as usize] {
                    seen[b as usize] = true;
                    parent[b as usize] = Some((c, si));
                    order.push(b);
                    q.push_back(b);
                }
            }
        }
        let mut t = vec![0u32; n * n];
        for a in 0..n {
            t[a * n] = a as u32;
        }
        for &b in &order[1..] {
            let (c, si) = parent[b as usize].unwrap();
            for a in 0..n {
                t[a * n + b as usize] = right[si][t[a * n + c as usize] as usize];
            }
        }
        t
    }

    fn compute_order(&self, x: u32) -> u32 {
        let mut k = 1;
        let mut y = x;
        while y != 0 {
            y = self.mul(y, x);
            k += 1;
        }
        k
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn order(&self) -> usize {
        self.elems.len()
    }
    pub fn generators(&self) -> &[Perm] {
        &self.gens
    }
    pub fn elem(&self, x: u32) -> &Perm {
        &self.elems[x as usize]
    }
    pub fn index_of(&self, p: &Perm) -> Option<u32> {
        self.index.get(p).copied()
    }
    pub fn factors(&self) -> Option<&(Arc<PermGroup>, Arc<PermGroup>)> {
        self.factors.as_ref()
    }

    #[inline]
    pub fn mul(&self, x: u32, y: u32) -> u32 {
        if self.mul.is_empty() {
            self.index[&self.elems[x as usize].compose(&self.elems[y as usize])]
        } else {
            let n = self.elems.len();
            self.mul[x as usize * n + y as usize]
        }
    }
    #[inline]
    pub fn inv(&self, x: u32) -> u32 {
        self.inv[x as usize]
    }
    #[inline]
    pub fn elem_order(&self, x: u32) -> u32 {
        self.ord[x as usize]
    }
    /// `^g x = g x g⁻¹`.
    #[inline]
    pub fn conj(&self, g: u32, x: u32) -> u32 {
        self.mul(self.mul(g, x), self.inv(g))
    }
    pub fn pow(&self, x: u32, k: i64) -> u32 {
        let o = self.ord[x as usize] as i64;
        let mut e = k.rem_euclid(o);
        let mut r = 0;
        let mut b = x;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        r
    }
    pub fn commute(&self, x: u32, y: u32) -> bool {
        self.mul(x, y) == self.mul(y, x)
    }

    /// `(x_p, x_{p'})`, both powers of `x`.
    pub fn p_part(&self, x: u32, p: u64) -> (u32, u32) {
        let o = self.ord[x as usize] as u64;
        let (q, m) = split_prime(o, p);
        if m == 1 {
            return (x, 0);
        }
        if q == 1 {
            return (0, x);
        }
        // s ≡ 1 mod q, s ≡ 0 mod m
        let s = (0..o).step_by(m as usize).find(|s| s % q == 1).unwrap();
        (self.pow(x, s as i64), self.pow(x, (1 + o - s) as i64 % o as i64))
    }

    pub fn is_p_element(&self, x: u32, p: u64) -> bool {
        split_prime(self.ord[x as usize] as u64, p).1 == 1
    }

    pub fn is_p_regular(&self, x: u32, p: u64) -> bool {
        !(self.ord[x as usize] as u64).is_multiple_of(p)
    }

    pub fn exponent(&self) -> u64 {
        self.ord.iter().fold(1u64, |a, &o| lcm(a, o as u64))
    }

    /// Index of the pair `(a, b)` in a direct product.
    pub fn pair(&self, a: u32, b: u32) -> u32 {
        let (_, h) = self.factors.as_ref().expect("not a direct product");
        a * h.order() as u32 + b
    }

    pub fn split(&self, x: u32) -> (u32, u32) {
        let (_, h) = self.factors.as_ref().expect("not a direct product");
        let nh = h.order() as u32;
        (x / nh, x % nh)
    }

    pub fn full(self: &Arc<Self>) -> Subgroup {
        self.subgroup((0..self.order() as u32).collect())
    }

    pub fn trivial(self: &Arc<Self>) -> Subgroup {
        self.subgroup(vec![0])
    }

    /// Canonical handle for a set of elements that is known to be a subgroup.
    pub fn subgroup(self: &Arc<Self>, mut elems: Vec<u32>) -> Subgroup {
        elems.sort_unstable();
        elems.dedup();
        let mut cache = self.subs.lock().unwrap();
        if let Some(d) = cache.get(&elems) {
            return Subgroup {
                amb: self.clone(),
                d: d.clone(),
            };
        }
        let mut mask = vec![false; self.order()];
        for &x in &elems {
            mask[x as usize] = true;
        }
        let gens = small_generating_set(self, &elems);
        let d = Arc::new(SubData {
            elems: elems.clone(),
            mask,
            gens,
            classes: OnceLock::new(),
            memo: Mutex::new(HashMap::new()),
        });
        cache.insert(elems, d.clone());
        Subgroup { amb: self.clone(), d }
    }

    /// Subgroup generated by the given elements.
    pub fn generate(self: &Arc<Self>, gens: &[u32]) -> Subgroup {
        let mut seen = vec![false; self.order()];
        seen[0] = true;
        let mut elems = vec![0u32];
        let mut i = 0;
        while i < elems.len() {
            for &s in gens {
                let y = self.mul(elems[i], s);
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    elems.push(y);
                }
            }
            i += 1;
        }
        self.subgroup(elems)
    }

    pub fn subgroup_from_perms(self: &Arc<Self>, perms: &[Perm]) -> Result<Subgroup, PermError> {
        let mut ix = Vec::new();
        for (i, p) in perms.iter().enumerate() {
            match self.index_of(p) {
                Some(x) => ix.push(x),
                None => {
                    return Err(PermError::BadGenerator {
                        index: i,
                        reason: format!("{p} is not in the ambient group"),
                    })
                }
            }
        }
        Ok(self.generate(&ix))
    }

    pub fn is_product(&self) -> bool {
        self.factors.is_some()
    }
}

fn small_generating_set(g: &PermGroup, elems: &[u32]) -> Vec<u32> {
    let mut gens = Vec::new();
    let mut seen = vec![false; g.order()];
    seen[0] = true;
    let mut cur = vec![0u32];
    for &x in elems {
        if seen[x as usize] {
            continue;
        }
        gens.push(x);
        // closure of cur ∪ {gens}
        let mut i = 0;
        let mut list = cur.clone();
        if !seen[x as usize] {
            seen[x as usize] = true;
            list.push(x);
        }
        while i < list.len() {
            for &s in &gens {
                let y = g.mul(list[i], s);
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    list.push(y);
                }
            }
            i += 1;
        }
        cur = list;
        if cur.len() == elems.len() {
            break;
        }
    }
    gens
}

type ProductRegistry = Mutex<HashMap<(usize, usize), Arc<PermGroup>>>;

static PRODUCTS: OnceLock<ProductRegistry> = OnceLock::new();

/// `G × H` acting on the disjoint union of the point sets. Results are shared per factor pair.
pub fn direct_product(g: &Arc<PermGroup>, h: &Arc<PermGroup>) -> Arc<PermGroup> {
    let key = (Arc::as_ptr(g) as usize, Arc::as_ptr(h) as usize);
    let reg = PRODUCTS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(x) = reg.lock().unwrap().get(&key) {
        return x.clone();
    }
    let mut elems = Vec::with_capacity(g.order() * h.order());
    for a in &g.elems {
        for b in &h.elems {
            elems.push(a.concat(b));
        }
    }
    let mut gens: Vec<Perm> = g.gens.iter().map(|a| a.concat(&Perm::identity(h.degree))).collect();
    gens.extend(h.gens.iter().map(|b| Perm::identity(g.degree).concat(b)));
    let gh = Arc::new(PermGroup::from_sorted(
        g.degree + h.degree,
        gens,
        elems,
        Some((g.clone(), h.clone())),
    ));
    reg.lock().unwrap().entry(key).or_insert(gh).clone()
}

/// Conjugacy classes of a subgroup, ordered by (element order, size, minimal element).
#[derive(Debug)]
pub struct Classes {
    pub reps: Vec<u32>,
    pub sizes: Vec<usize>,
    pub orders: Vec<u32>,
    pub members: Vec<Vec<u32>>,
    /// Indexed by ambient element; `u32::MAX` outside the subgroup.
    pub class_of: Vec<u32>,
    pub inverse: Vec<usize>,
}

impl Classes {
    pub fn len(&self) -> usize {
        self.reps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
    #[inline]
    pub fn of(&self, x: u32) -> usize {
        let c = self.class_of[x as usize];
        debug_assert!(c != u32::MAX, "element outside subgroup");
        c as usize
    }
    pub fn try_of(&self, x: u32) -> Option<usize> {
        let c = self.class_of[x as usize];
        (c != u32::MAX).then_some(c as usize)
    }
}

pub struct SubData {
    elems: Vec<u32>,
    mask: Vec<bool>,
    gens: Vec<u32>,
    classes: OnceLock<Arc<Classes>>,
    memo: Mutex<HashMap<String, Arc<dyn Any + Send + Sync>>>,
}

/// A subgroup of an enumerated ambient group.
#[derive(Clone)]
pub struct Subgroup {
    amb: Arc<PermGroup>,
    d: Arc<SubData>,
}

impl PartialEq for Subgroup {
    fn eq(&self, o: &Self) -> bool {
        Arc::ptr_eq(&self.amb, &o.amb) && self.d.elems == o.d.elems
    }
}
impl Eq for Subgroup {}

impl std::hash::Hash for Subgroup {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.d.elems.hash(state)
    }
}

impl PartialOrd for Subgroup {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Subgroup {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.order(), &self.d.elems).cmp(&(o.order(), &o.d.elems))
    }
}

impl fmt::Debug for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g: Vec<String> = self.d.gens.iter().map(|&x| self.amb.elem(x).to_string()).collect();
        write!(f, "<{}> (order {})", g.join(", "), self.order())
    }
}

impl Subgroup {
    pub fn amb(&self) -> &Arc<PermGroup> {
        &self.amb
    }
    pub fn order(&self) -> usize {
        self.d.elems.len()
    }
    pub fn elems(&self) -> &[u32] {
        &self.d.elems
    }
    pub fn gens(&self) -> &[u32] {
        &self.d.gens
    }
    #[inline]
    pub fn contains(&self, x: u32) -> bool {
        self.d.mask[x as usize]
    }
    pub fn is_trivial(&self) -> bool {
        self.order() == 1
    }
    pub fn same_ambient(&self, o: &Subgroup) -> bool {
        Arc::ptr_eq(&self.amb, &o.amb)
    }
    pub fn is_subgroup_of(&self, o: &Subgroup) -> bool {
        self.same_ambient(o) && o.order().is_multiple_of(self.order()) && self.d.gens.iter().all(|&x| o.contains(x))
    }
    pub fn exponent(&self) -> u64 {
        self.elems()
            .iter()
            .fold(1u64, |a, &x| lcm(a, self.amb.elem_order(x) as u64))
    }

    /// Memoized derived data keyed by name.
    pub fn memo<T: Any + Send + Sync>(&self, key: &str, f: impl FnOnce() -> T) -> Arc<T> {
        if let Some(v) = self.d.memo.lock().unwrap().get(key) {
            return v.clone().downcast::<T>().expect("memo type");
        }
        let v: Arc<T> = Arc::new(f());
        let mut m = self.d.memo.lock().unwrap();
        let e = m
            .entry(key.to_string())
            .or_insert_with(|| v.clone() as Arc<dyn Any + Send + Sync>);
        e.clone().downcast::<T>().expect("memo type")
    }

    pub fn classes(&self) -> Arc<Classes> {
        self.d.classes.get_or_init(|| Arc::new(self.compute_classes())).clone()
    }

    fn compute_classes(&self) -> Classes {
        let g = &self.amb;
        let mut class_of = vec![u32::MAX; g.order()];
        let mut raw: Vec<Vec<u32>> = Vec::new();
        for &x in self.elems() {
            if class_of[x as usize] != u32::MAX {
                continue;
            }
            let id = raw.len() as u32;
            let mut orbit = vec![x];
            class_of[x as usize] = id;
            let mut i = 0;
            while i < orbit.len() {
                for &s in self.gens() {
                    let y = g.conj(s, orbit[i]);
                    if class_of[y as usize] == u32::MAX {
                        class_of[y as usize] = id;
                        orbit.push(y);
                    }
                }
                i += 1;
            }
            orbit.sort_unstable();
            raw.push(orbit);
        }
        raw.sort_by_key(|c| (g.elem_order(c[0]), c.len(), c[0]));
        for (i, c) in raw.iter().enumerate() {
            for &x in c {
                class_of[x as usize] = i as u32;
            }
        }
        let inverse = raw.iter().map(|c| class_of[g.inv(c[0]) as usize] as usize).collect();
        Classes {
            reps: raw.iter().map(|c| c[0]).collect(),
            sizes: raw.iter().map(|c| c.len()).collect(),
            orders: raw.iter().map(|c| g.elem_order(c[0])).collect(),
            members: raw,
            class_of,
            inverse,
        }
    }

    /// `^g S`.
    pub fn conjugate(&self, g: u32) -> Subgroup {
        if g == 0 {
            return self.clone();
        }
        self.amb
            .subgroup(self.elems().iter().map(|&x| self.amb.conj(g, x)).collect())
    }

    /// Elements of `self` commuting with every element of `set`.
    pub fn centralizer_of(&self, set: &[u32]) -> Subgroup {
        let g = &self.amb;
        self.amb.subgroup(
            self.elems()
                .iter()
                .copied()
                .filter(|&x| set.iter().all(|&s| g.commute(x, s)))
                .collect(),
        )
    }

    /// `C_self(H)`.
    pub fn centralizer(&self, h: &Subgroup) -> Subgroup {
        self.centralizer_of(h.gens())
    }

    /// `N_self(H)`.
    pub fn normalizer(&self, h: &Subgroup) -> Subgroup {
        let g = &self.amb;
        self.amb.subgroup(
            self.elems()
                .iter()
                .copied()
                .filter(|&x| h.gens().iter().all(|&s| h.contains(g.conj(x, s))))
                .collect(),
        )
    }

    pub fn normalizes(&self, x: u32) -> bool {
        self.gens().iter().all(|&s| self.contains(self.amb.conj(x, s)))
    }

    pub fn is_normal_in(&self, o: &Subgroup) -> bool {
        self.is_subgroup_of(o) && o.gens().iter().all(|&x| self.normalizes(x))
    }

    pub fn intersect(&self, o: &Subgroup) -> Subgroup {
        assert!(self.same_ambient(o));
        self.amb
            .subgroup(self.elems().iter().copied().filter(|&x| o.contains(x)).collect())
    }

    pub fn join(&self, o: &Subgroup) -> Subgroup {
        let mut gens = self.gens().to_vec();
        gens.extend_from_slice(o.gens());
        self.amb.generate(&gens)
    }

    pub fn join_elem(&self, x: u32) -> Subgroup {
        if self.contains(x) {
            return self.clone();
        }
        let mut gens = self.gens().to_vec();
        gens.push(x);
        self.amb.generate(&gens)
    }

    /// Left transversal of `h` in `self` (first entry is the identity).
    pub fn transversal(&self, h: &Subgroup) -> Vec<u32> {
        let g = &self.amb;
        let mut covered = vec![false; g.order()];
        let mut reps = Vec::new();
        for &x in self.elems() {
            if covered[x as usize] {
                continue;
            }
            reps.push(x);
            for &y in h.elems() {
                covered[g.mul(x, y) as usize] = true;
            }
        }
        reps
    }

    pub fn index_in(&self, o: &Subgroup) -> usize {
        o.order() / self.order()
    }

    pub fn is_p_group(&self, p: u64) -> bool {
        split_prime(self.order() as u64, p).1 == 1
    }

    /// Elements of `self` that are `p`-regular.
    pub fn p_regular(&self, p: u64) -> Vec<u32> {
        self.elems()
            .iter()
            .copied()
            .filter(|&x| self.amb.is_p_regular(x, p))
            .collect()
    }

    /// A Sylow `p`-subgroup, grown one element at a time inside normalizers.
    pub fn sylow(&self, p: u64) -> Subgroup {
        let target = split_prime(self.order() as u64, p).0 as usize;
        let g = &self.amb;
        let mut s = g.trivial();
        while s.order() < target {
            let n = self.normalizer(&s);
            let x = n
                .elems()
                .iter()
                .copied()
                .find(|&x| !s.contains(x) && g.is_p_element(x, p) && s.contains(g.pow(x, p as i64)))
                .expect("Cauchy element");
            s = s.join_elem(x);
        }
        s
    }

    /// All subgroups of a `p`-group by cyclic extension.
    pub fn p_group_subgroups(&self, p: u64) -> Vec<Subgroup> {
        assert!(self.is_p_group(p));
        let g = &self.amb;
        let mut found: BTreeSet<Subgroup> = BTreeSet::new();
        let mut layer = vec![g.trivial()];
        found.insert(g.trivial());
        while !layer.is_empty() {
            let mut next = Vec::new();
            for h in &layer {
                let n = self.normalizer(h);
                for &x in n.elems() {
                    if !h.contains(x) && h.contains(g.pow(x, p as i64)) {
                        let k = h.join_elem(x);
                        if found.insert(k.clone()) {
                            next.push(k);
                        }
                    }
                }
            }
            layer = next;
        }
        found.into_iter().collect()
    }

    /// All subgroups by joining cyclic subgroups; intended for small groups.
    pub fn all_subgroups(&self) -> Vec<Subgroup> {
        let g = &self.amb;
        let mut cyclic: BTreeSet<Subgroup> = BTreeSet::new();
        for &x in self.elems() {
            cyclic.insert(g.generate(&[x]));
        }
        let cyclic: Vec<Subgroup> = cyclic.into_iter().collect();
        let mut found: BTreeSet<Subgroup> = cyclic.iter().cloned().collect();
        let mut layer: Vec<Subgroup> = cyclic.clone();
        while !layer.is_empty() {
            let mut next = Vec::new();
            for h in &layer {
                for c in &cyclic {
                    if c.is_subgroup_of(h) {
                        continue;
                    }
                    let k = h.join(c);
                    if found.insert(k.clone()) {
                        next.push(k);
                    }
                }
            }
            layer = next;
        }
        found.into_iter().collect()
    }

    /// Representatives of `self`-conjugacy classes among `subs`, with the orbit of each.
    pub fn fuse_up_to_conj(&self, subs: &[Subgroup]) -> Vec<Subgroup> {
        let mut reps: Vec<Subgroup> = Vec::new();
        let mut covered: HashSet<Subgroup> = HashSet::new();
        let mut sorted = subs.to_vec();
        sorted.sort();
        for h in sorted {
            if covered.contains(&h) {
                continue;
            }
            for x in self.transversal(&self.normalizer(&h)) {
                covered.insert(h.conjugate(x));
            }
            reps.push(h);
        }
        reps
    }

    /// One representative per conjugacy class of `p`-subgroups, taken inside a fixed Sylow subgroup.
    pub fn p_subgroups_up_to_conj(&self, p: u64) -> Vec<Subgroup> {
        let s = self.sylow(p);
        self.fuse_up_to_conj(&s.p_group_subgroups(p))
    }

    /// Some `g ∈ self` with `^g a = b`.
    pub fn conjugating_element(&self, a: &Subgroup, b: &Subgroup) -> Option<u32> {
        if a.order() != b.order() {
            return None;
        }
        self.transversal(&self.normalizer(a))
            .into_iter()
            .find(|&x| a.conjugate(x) == *b)
    }

    /// Whether `^g self ≤ other`.
    pub fn conj_within(&self, g: u32, other: &Subgroup) -> bool {
        self.gens().iter().all(|&s| other.contains(self.amb.conj(g, s)))
    }
}

fn product_parts(x: &Subgroup) -> Result<(Arc<PermGroup>, Arc<PermGroup>), PermError> {
    x.amb.factors.clone().ok_or(PermError::NotProduct)
}

/// `p₁(X)`.
pub fn p1(x: &Subgroup) -> Subgroup {
    let (g, _) = product_parts(x).expect("product ambient");
    g.subgroup(x.elems().iter().map(|&z| x.amb.split(z).0).collect())
}

/// `p₂(X)`.
pub fn p2(x: &Subgroup) -> Subgroup {
    let (_, h) = product_parts(x).expect("product ambient");
    h.subgroup(x.elems().iter().map(|&z| x.amb.split(z).1).collect())
}

/// `k₁(X) = {g : (g,1) ∈ X}`.
pub fn k1(x: &Subgroup) -> Subgroup {
    let (g, _) = product_parts(x).expect("product ambient");
    g.subgroup(
        x.elems()
            .iter()
            .map(|&z| x.amb.split(z))
            .filter(|&(_, b)| b == 0)
            .map(|(a, _)| a)
            .collect(),
    )
}

/// `k₂(X) = {h : (1,h) ∈ X}`.
pub fn k2(x: &Subgroup) -> Subgroup {
    let (_, h) = product_parts(x).expect("product ambient");
    h.subgroup(
        x.elems()
            .iter()
            .map(|&z| x.amb.split(z))
            .filter(|&(a, _)| a == 0)
            .map(|(_, b)| b)
            .collect(),
    )
}

/// `A × B ≤ G × H`.
pub fn product_subgroup(a: &Subgroup, b: &Subgroup) -> Subgroup {
    let gh = direct_product(a.amb(), b.amb());
    let mut v = Vec::with_capacity(a.order() * b.order());
    for &x in a.elems() {
        for &y in b.elems() {
            v.push(gh.pair(x, y));
        }
    }
    gh.subgroup(v)
}

/// `X° = {(h,g) : (g,h) ∈ X} ≤ H × G`.
pub fn opposite(x: &Subgroup) -> Subgroup {
    let (g, h) = product_parts(x).expect("product ambient");
    let hg = direct_product(&h, &g);
    hg.subgroup(
        x.elems()
            .iter()
            .map(|&z| {
                let (a, b) = x.amb.split(z);
                hg.pair(b, a)
            })
            .collect(),
    )
}

pub fn is_twisted_diagonal(x: &Subgroup) -> bool {
    k1(x).is_trivial() && k2(x).is_trivial()
}

/// Extends generator images to a map on all of `q`; `images` pairs `(y, φ(y))` for generators of `q`.
pub fn extend_hom(
    q: &Subgroup,
    target: &Arc<PermGroup>,
    images: &[(u32, u32)],
) -> Result<HashMap<u32, u32>, PermError> {
    let src = q.amb();
    let mut map: HashMap<u32, u32> = HashMap::from([(0, 0)]);
    let mut list = vec![0u32];
    let mut i = 0;
    while i < list.len() {
        let y = list[i];
        let fy = map[&y];
        for &(s, fs) in images {
            if !q.contains(s) {
                return Err(PermError::NotIsomorphism(format!(
                    "{} is not in the source",
                    src.elem(s)
                )));
            }
            let z = src.mul(y, s);
            let fz = target.mul(fy, fs);
            match map.get(&z) {
                Some(&w) if w != fz => {
                    return Err(PermError::NotIsomorphism(format!(
                        "image of {} is not well defined",
                        src.elem(z)
                    )))
                }
                Some(_) => {}
                None => {
                    map.insert(z, fz);
                    list.push(z);
                }
            }
        }
        i += 1;
    }
    if map.len() != q.order() {
        return Err(PermError::NotIsomorphism(
            "generator images do not generate the source".into(),
        ));
    }
    Ok(map)
}

/// `Δ(P, φ, Q) = {(φ(y), y) : y ∈ Q}`; `phi` gives images of generators of `Q`.
pub fn twisted_diagonal(p: &Subgroup, phi: &[(u32, u32)], q: &Subgroup) -> Result<Subgroup, PermError> {
    let map = extend_hom(q, p.amb(), phi)?;
    let img: HashSet<u32> = map.values().copied().collect();
    if img.len() != q.order() || img.len() != p.order() || !img.iter().all(|&x| p.contains(x)) {
        return Err(PermError::NotIsomorphism("map is not a bijection onto P".into()));
    }
    let gh = direct_product(p.amb(), q.amb());
    Ok(gh.subgroup(map.iter().map(|(&y, &fy)| gh.pair(fy, y)).collect()))
}

/// The diagonal `Δ(P) ≤ G × G`.
pub fn diagonal(p: &Subgroup) -> Subgroup {
    let id: Vec<(u32, u32)> = p.gens().iter().map(|&x| (x, x)).collect();
    twisted_diagonal(p, &id, p).expect("identity is an isomorphism")
}

/// `X * Y = {(g,k) : ∃h, (g,h) ∈ X, (h,k) ∈ Y}`.
pub fn star_product(x: &Subgroup, y: &Subgroup) -> Result<Subgroup, PermError> {
    let (g, h) = product_parts(x)?;
    let (h2, k) = product_parts(y)?;
    if !Arc::ptr_eq(&h, &h2) {
        return Err(PermError::AmbientMismatch);
    }
    let mut by_h: HashMap<u32, Vec<u32>> = HashMap::new();
    for &z in y.elems() {
        let (b, c) = y.amb.split(z);
        by_h.entry(b).or_default().push(c);
    }
    let gk = direct_product(&g, &k);
    let mut out = HashSet::new();
    for &z in x.elems() {
        let (a, b) = x.amb.split(z);
        if let Some(cs) = by_h.get(&b) {
            for &c in cs {
                out.insert(gk.pair(a, c));
            }
        }
    }
    Ok(gk.subgroup(out.into_iter().collect()))
}

/// Explicit matching of cosets `X/(k₁×k₂)` with `p_i(X)/k_i(X)`.
#[derive(Debug, Clone)]
pub struct QuotientCertificate {
    /// `(coset representative in X, representative in p₁(X), representative in p₂(X))`.
    pub matching: Vec<(u32, u32, u32)>,
}

pub fn quotient_certificate(x: &Subgroup) -> Result<QuotientCertificate, PermError> {
    let gh = x.amb().clone();
    let (a1, a2) = (p1(x), p2(x));
    let (b1, b2) = (k1(x), k2(x));
    let kk = product_subgroup(&b1, &b2);
    if !kk.is_normal_in(x) {
        return Err(PermError::NotIsomorphism("k1 x k2 is not normal".into()));
    }
    let reps = x.transversal(&kk);
    let g = a1.amb().clone();
    let h = a2.amb().clone();
    // canonical coset label: minimal element of the coset
    let label = |grp: &Arc<PermGroup>, k: &Subgroup, z: u32| k.elems().iter().map(|&t| grp.mul(z, t)).min().unwrap();
    let mut matching = Vec::new();
    let mut seen1 = HashSet::new();
    let mut seen2 = HashSet::new();
    for &r in &reps {
        let (u, v) = gh.split(r);
        let l1 = label(&g, &b1, u);
        let l2 = label(&h, &b2, v);
        if !seen1.insert(l1) || !seen2.insert(l2) {
            return Err(PermError::NotIsomorphism("coset map not injective".into()));
        }
        matching.push((r, l1, l2));
    }
    if seen1.len() * b1.order() != a1.order() || seen2.len() * b2.order() != a2.order() {
        return Err(PermError::NotIsomorphism("coset map not surjective".into()));
    }
    // homomorphism check on pairs of representatives
    let lx = |z: u32| kk.elems().iter().map(|&t| gh.mul(z, t)).min().unwrap();
    let pos: HashMap<u32, usize> = reps.iter().enumerate().map(|(i, &r)| (lx(r), i)).collect();
    for &(r, l1, l2) in &matching {
        for &(s, m1, m2) in &matching {
            let t = pos[&lx(gh.mul(r, s))];
            let (_, n1, n2) = matching[t];
            if label(&g, &b1, g.mul(l1, m1)) != n1 || label(&h, &b2, h.mul(l2, m2)) != n2 {
                return Err(PermError::NotIsomorphism("coset map not multiplicative".into()));
            }
        }
    }
    Ok(QuotientCertificate { matching })
}

/// Standard small groups used throughout tests and examples.
pub mod named {
    use super::*;

    fn mk(n: usize, gens: &[&[&[usize]]]) -> Arc<PermGroup> {
        let gs = gens.iter().map(|c| Perm::from_cycles(n, c).unwrap()).collect();
        PermGroup::from_generators(n, gs).unwrap()
    }

    pub fn cyclic(n: usize) -> Arc<PermGroup> {
        let c: Vec<usize> = (1..=n).collect();
        if n == 1 {
            return PermGroup::from_generators(1, vec![]).unwrap();
        }
        mk(n, &[&[&c]])
    }
    pub fn s3() -> Arc<PermGroup> {
        mk(3, &[&[&[1, 2, 3]], &[&[1, 2]]])
    }
    pub fn v4() -> Arc<PermGroup> {
        mk(4, &[&[&[1, 2], &[3, 4]], &[&[1, 3], &[2, 4]]])
    }
    pub fn d8() -> Arc<PermGroup> {
        mk(4, &[&[&[1, 2, 3, 4]], &[&[1, 3]]])
    }
    pub fn q8() -> Arc<PermGroup> {
        mk(8, &[&[&[1, 2, 4, 7], &[3, 6, 8, 5]], &[&[1, 3, 4, 8], &[2, 5, 7, 6]]])
    }
    pub fn a4() -> Arc<PermGroup> {
        mk(4, &[&[&[1, 2, 3]], &[&[1, 2], &[3, 4]]])
    }
    pub fn s4() -> Arc<PermGroup> {
        mk(4, &[&[&[1, 2, 3, 4]], &[&[1, 2]]])
    }
    pub fn s5() -> Arc<PermGroup> {
        mk(5, &[&[&[1, 2, 3, 4, 5]], &[&[1, 2]]])
    }

    pub fn by_name(name: &str) -> Option<Arc<PermGroup>> {
        Some(match name {
            "C1" => cyclic(1),
            "C2" => cyclic(2),
            "C3" => cyclic(3),
            "C4" => cyclic(4),
            "C6" => cyclic(6),
            "S3" => s3(),
            "V4" => v4(),
            "D8" => d8(),
            "Q8" => q8(),
            "A4" => a4(),
            "S4" => s4(),
            "S5" => s5(),
            "S3xS3" => {
                let g = s3();
                direct_product(&g, &g)
            }
            "A4xA4" => {
                let g = a4();
                direct_product(&g, &g)
            }
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::named::*;
    use super::*;
    use proptest::prelude::*;

    fn cyc(n: usize, c: &[&[usize]]) -> Perm {
        Perm::from_cycles(n, c).unwrap()
    }

    #[test]
    fn orders() {
        assert_eq!(s3().order(), 6);
        assert_eq!(PermGroup::from_generators(4, vec![]).unwrap().order(), 1);
        assert_eq!(d8().order(), 8);
        assert_eq!(q8().order(), 8);
        assert_eq!(s4().order(), 24);
        assert_eq!(s5().order(), 120);
    }

    #[test]
    fn identity_is_first_and_table_matches_composition() {
        let g = s4();
        assert!(g.elem(0).is_identity());
        for x in 0..24 {
            for y in 0..24 {
                assert_eq!(g.elem(g.mul(x, y)), &g.elem(x).compose(g.elem(y)));
            }
        }
    }

    #[test]
    fn bad_images_rejected() {
        assert!(Perm::from_images(&[1, 1, 2]).is_err());
        assert!(Perm::from_images(&[0, 1]).is_err());
        assert!(Perm::from_images(&[2, 3, 1]).is_ok());
    }

    #[test]
    fn class_sizes() {
        let s = |g: Arc<PermGroup>| g.full().classes().sizes.clone();
        assert_eq!(s(s3()), vec![1, 3, 2]);
        assert_eq!(s(cyclic(4)), vec![1, 1, 1, 1]);
        assert_eq!(s(s4()), vec![1, 3, 6, 8, 6]);
    }

    #[test]
    fn classes_match_brute_force() {
        for g in [s4(), q8(), a4(), d8()] {
            let cl = g.full().classes();
            for x in 0..g.order() as u32 {
                for y in 0..g.order() as u32 {
                    let conj = (0..g.order() as u32).any(|t| g.conj(t, x) == y);
                    assert_eq!(conj, cl.of(x) == cl.of(y));
                }
            }
            assert_eq!(cl.sizes.iter().sum::<usize>(), g.order());
        }
    }

    #[test]
    fn centralizer_normalizer_s3() {
        let g = s3();
        let full = g.full();
        let c3 = g.subgroup_from_perms(&[cyc(3, &[&[1, 2, 3]])]).unwrap();
        assert_eq!(full.centralizer(&c3), c3);
        assert_eq!(full.normalizer(&c3), full);
        assert_eq!(full.centralizer(&g.trivial()), full);
    }

    #[test]
    fn p_part_examples() {
        let g = s5();
        let x = g.index_of(&cyc(5, &[&[1, 2], &[3, 4, 5]])).unwrap();
        let (a, b) = g.p_part(x, 2);
        assert_eq!(g.elem(a), &cyc(5, &[&[1, 2]]));
        assert_eq!(g.elem(b), &cyc(5, &[&[3, 4, 5]]));
        let c6 = cyclic(6);
        let z = c6.full().gens()[0];
        let (a, b) = c6.p_part(z, 2);
        assert_eq!(a, c6.pow(z, 3));
        assert_eq!(b, c6.pow(z, 4));
        let y = g.index_of(&cyc(5, &[&[3, 4, 5]])).unwrap();
        assert_eq!(g.p_part(y, 2), (0, y));
    }

    // Oracle: every subgroup generated by at most two elements.
    fn two_generated_subgroups(g: &Arc<PermGroup>) -> BTreeSet<Subgroup> {
        let n = g.order() as u32;
        let mut out = BTreeSet::new();
        for x in 0..n {
            for y in x..n {
                out.insert(g.generate(&[x, y]));
            }
        }
        out
    }

    #[test]
    fn p_subgroup_classes() {
        let count = |g: Arc<PermGroup>, p| g.full().p_subgroups_up_to_conj(p).len();
        assert_eq!(count(s3(), 3), 2);
        assert_eq!(count(s3(), 2), 2);
        assert_eq!(count(s4(), 2), 7);
        assert_eq!(count(s4(), 3), 2);
    }

    #[test]
    fn p_subgroups_exhaustive() {
        for g in [s3(), s4(), d8(), q8(), a4(), cyclic(6), v4()] {
            for p in [2u64, 3] {
                let full = g.full();
                let reps = full.p_subgroups_up_to_conj(p);
                let mut union = BTreeSet::new();
                for r in &reps {
                    for &x in full.elems() {
                        union.insert(r.conjugate(x));
                    }
                }
                let oracle: BTreeSet<Subgroup> = two_generated_subgroups(&g)
                    .into_iter()
                    .filter(|h| h.is_p_group(p))
                    .collect();
                assert_eq!(union, oracle);
            }
        }
    }

    #[test]
    fn all_subgroups_s4() {
        let g = s4();
        let all = g.full().all_subgroups();
        assert_eq!(all.len(), 30);
        assert_eq!(g.full().fuse_up_to_conj(&all).len(), 11);
    }

    #[test]
    fn products_and_projections() {
        let g = s3();
        let gg = direct_product(&g, &g);
        assert_eq!(gg.order(), 36);
        assert!(Arc::ptr_eq(&gg, &direct_product(&g, &g)));
        let c3 = g.subgroup_from_perms(&[cyc(3, &[&[1, 2, 3]])]).unwrap();
        let d = diagonal(&c3);
        assert_eq!(d.order(), 3);
        assert!(k1(&d).is_trivial());
        assert_eq!(p1(&d), c3);
        assert!(is_twisted_diagonal(&d));
        let t = twisted_diagonal(&g.trivial(), &[], &g.trivial()).unwrap();
        assert!(t.is_trivial());
        let c2 = g.subgroup_from_perms(&[cyc(3, &[&[1, 2]])]).unwrap();
        assert!(!is_twisted_diagonal(&product_subgroup(&c2, &c2)));
        quotient_certificate(&product_subgroup(&c3, &g.full())).unwrap();
        quotient_certificate(&diagonal(&g.full())).unwrap();
    }

    #[test]
    fn twisted_diagonal_rejects_non_homomorphism() {
        let g = s3();
        let c3 = g.subgroup_from_perms(&[cyc(3, &[&[1, 2, 3]])]).unwrap();
        let c2 = g.subgroup_from_perms(&[cyc(3, &[&[1, 2]])]).unwrap();
        let r = twisted_diagonal(&c2, &[(c3.gens()[0], c2.gens()[0])], &c3);
        assert!(r.is_err());
    }

    #[test]
    fn star_products() {
        let g = s3();
        let full = g.full();
        let gg = direct_product(&g, &g);
        let d = diagonal(&full);
        assert_eq!(star_product(&d, &d).unwrap(), d);
        assert_eq!(star_product(&gg.full(), &gg.full()).unwrap(), gg.full());
    }

    #[test]
    fn twisted_diagonal_closure_exhaustive() {
        for g in [s3(), cyclic(4), v4(), cyclic(6)] {
            let gg = direct_product(&g, &g);
            for x in gg.full().all_subgroups().into_iter().filter(is_twisted_diagonal) {
                for y in x.all_subgroups() {
                    assert!(is_twisted_diagonal(&y));
                }
                for &t in gg.full().elems() {
                    assert!(is_twisted_diagonal(&x.conjugate(t)));
                }
            }
        }
    }

    #[test]
    fn transversal_realizes_index() {
        let g = s4();
        for h in g.full().all_subgroups() {
            let t = g.full().transversal(&h);
            assert_eq!(t.len() * h.order(), 24);
        }
    }

    proptest! {
        #[test]
        fn conjugation_is_an_action(a in 0u32..24, b in 0u32..24, s in 0usize..30) {
            let g = s4();
            let subs = g.full().all_subgroups();
            let h = &subs[s % subs.len()];
            prop_assert_eq!(h.conjugate(b).conjugate(a), h.conjugate(g.mul(a, b)));
        }

        #[test]
        fn star_product_associative(i in 0usize..1000, j in 0usize..1000, k in 0usize..1000) {
            let g = s3();
            let gg = direct_product(&g, &g);
            let subs = gg.full().all_subgroups();
            let (x, y, z) = (&subs[i % subs.len()], &subs[j % subs.len()], &subs[k % subs.len()]);
            let l = star_product(&star_product(x, y).unwrap(), z).unwrap();
            let r = star_product(x, &star_product(y, z).unwrap()).unwrap();
            prop_assert_eq!(l, r);
        }
    }
}
