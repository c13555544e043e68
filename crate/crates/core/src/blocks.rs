//! Blocks, block idempotents, the Brauer homomorphism and Brauer pairs.
//!
//! Every construction is relative to a subgroup `G` of some ambient
//! permutation group, so the same code serves `G`, `N_G(P,e)` and `G × H`.
//! Idempotents are kept in `K`-form as [`AlgebraElement`]s and reduced to
//! [`FAlg`] only for Brauer-homomorphism tests.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use thiserror::Error;

use crate::charfun::{character_table, AlgebraElement, ClassFunction};
use crate::cyclo::{sum_all, Cyc, CycError, ReductionMap, Q};
use crate::perm::{p1, p2, product_subgroup, PermGroup, Subgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockError {
    #[error(transparent)]
    Arithmetic(#[from] CycError),
    #[error("central character value {0} is not an algebraic integer")]
    NonIntegralCentral(String),
    #[error("element is not stable under {0}")]
    Unstable(String),
    #[error("subgroup {0} is not contained in {1}")]
    NotContained(String, String),
    #[error("unique subpair violated at {sub}: {count} candidates")]
    Subpair { sub: String, count: usize },
    #[error("orbit sum is not idempotent")]
    OrbitSum,
    #[error("idempotent is not a block of {0}")]
    NotABlock(String),
    #[error("projections do not match: {0}")]
    Projection(String),
}

type Result<T> = std::result::Result<T, BlockError>;

type MapRegistry = Mutex<HashMap<(u64, u64), Arc<ReductionMap>>>;

static MAPS: OnceLock<MapRegistry> = OnceLock::new();

/// The standard reduction map for an ambient group.
pub fn reduction(amb: &PermGroup, p: u64) -> Arc<ReductionMap> {
    let key = (p, amb.exponent());
    let mut m = MAPS.get_or_init(Default::default).lock().unwrap();
    m.entry(key)
        .or_insert_with(|| Arc::new(ReductionMap::new(p, key.1)))
        .clone()
}

/// A `p`-block of a subgroup, given by the indices of its irreducible characters.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Block {
    group: Subgroup,
    p: u64,
    irr: Vec<usize>,
}

impl std::fmt::Debug for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "B{:?} of {:?} at p={}", self.irr, self.group, self.p)
    }
}

impl PartialOrd for Block {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Block {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (&self.group, self.p, &self.irr).cmp(&(&o.group, o.p, &o.irr))
    }
}

impl Block {
    pub fn group(&self) -> &Subgroup {
        &self.group
    }
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn irr(&self) -> &[usize] {
        &self.irr
    }
    /// Canonical label: the least irreducible index.
    pub fn id(&self) -> usize {
        self.irr[0]
    }
    pub fn contains(&self, chi: usize) -> bool {
        self.irr.binary_search(&chi).is_ok()
    }
    pub fn characters(&self) -> Vec<ClassFunction> {
        let t = character_table(&self.group);
        self.irr.iter().map(|&i| t.irr[i].clone()).collect()
    }
    pub fn is_principal(&self) -> bool {
        self.irr[0] == 0
    }

    /// `e_B = Σ_{χ∈B} χ(1)/|G| Σ_g χ(g⁻¹) g`.
    pub fn idempotent(&self) -> Arc<AlgebraElement> {
        let key = format!("idem{}:{:?}", self.p, self.irr);
        self.group.memo(&key, || {
            let chars = self.characters();
            let mut f = ClassFunction::zero(&self.group);
            for chi in &chars {
                f = f.add(&chi.dual().scale(chi.degree())).unwrap();
            }
            let f = f.scale_q(&Q::new(BigInt::from(1), BigInt::from(self.group.order())));
            AlgebraElement::from_class_function(&f)
        })
    }

    /// Reduced idempotent `ē_B`.
    pub fn reduced(&self) -> Arc<FAlg> {
        let key = format!("idembar{}:{:?}", self.p, self.irr);
        self.group.memo(&key, || {
            FAlg::reduce(&self.idempotent(), self.p).expect("block idempotents are p-integral")
        })
    }

    /// The dual block `B*`.
    pub fn dual(&self) -> Block {
        let t = character_table(&self.group);
        let mut irr: Vec<usize> = self
            .irr
            .iter()
            .map(|&i| {
                let d = t.irr[i].dual();
                t.irr.iter().position(|c| *c == d).unwrap()
            })
            .collect();
        irr.sort();
        Block {
            group: self.group.clone(),
            p: self.p,
            irr,
        }
    }

    /// `^g B` as a block of `^g G`.
    pub fn conjugate(&self, g: u32) -> Block {
        let target = self.group.conjugate(g);
        let t = character_table(&target);
        let mut irr: Vec<usize> = self
            .characters()
            .iter()
            .map(|c| {
                let d = c.conjugate(g);
                t.irr.iter().position(|x| *x == d).unwrap()
            })
            .collect();
        irr.sort();
        Block {
            group: target,
            p: self.p,
            irr,
        }
    }

    /// Whether `b e_B ≠ 0` for a block `b` of a subgroup of `self.group`.
    pub fn covers(&self, c: &Block) -> bool {
        !self.idempotent().mul(&c.idempotent()).is_zero()
    }
}

/// An element of `F[S]` over the field of a [`ReductionMap`].
#[derive(Clone)]
pub struct FAlg {
    group: Subgroup,
    map: Arc<ReductionMap>,
    coeffs: BTreeMap<u32, u32>,
}

impl std::fmt::Debug for FAlg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(&k, &c)| format!("{c}*{}", self.group.amb().elem(k)))
            .collect();
        write!(
            f,
            "{}",
            if parts.is_empty() {
                "0".into()
            } else {
                parts.join(" + ")
            }
        )
    }
}

impl PartialEq for FAlg {
    fn eq(&self, o: &Self) -> bool {
        self.group == o.group && self.coeffs == o.coeffs
    }
}
impl Eq for FAlg {}

impl FAlg {
    pub fn reduce(a: &AlgebraElement, p: u64) -> Result<FAlg> {
        let map = reduction(a.group.amb(), p);
        Self::reduce_with(a, &map)
    }
    pub fn reduce_with(a: &AlgebraElement, map: &Arc<ReductionMap>) -> Result<FAlg> {
        let mut coeffs = BTreeMap::new();
        for (&k, c) in &a.coeffs {
            let r = map.reduce(c)?;
            if r != 0 {
                coeffs.insert(k, r);
            }
        }
        Ok(FAlg {
            group: a.group.clone(),
            map: map.clone(),
            coeffs,
        })
    }
    pub fn group(&self) -> &Subgroup {
        &self.group
    }
    pub fn coeffs(&self) -> &BTreeMap<u32, u32> {
        &self.coeffs
    }
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn mul(&self, o: &FAlg) -> FAlg {
        let f = self.map.field();
        let amb = self.group.amb();
        let mut out: BTreeMap<u32, u32> = BTreeMap::new();
        for (&x, &a) in &self.coeffs {
            for (&y, &b) in &o.coeffs {
                let e = out.entry(amb.mul(x, y)).or_insert(0);
                *e = f.add(*e, f.mul(a, b));
            }
        }
        out.retain(|_, v| *v != 0);
        let group = if self.group.is_subgroup_of(&o.group) {
            o.group.clone()
        } else {
            self.group.clone()
        };
        FAlg {
            group,
            map: self.map.clone(),
            coeffs: out,
        }
    }
    pub fn star(&self) -> FAlg {
        let amb = self.group.amb();
        FAlg {
            group: self.group.clone(),
            map: self.map.clone(),
            coeffs: self.coeffs.iter().map(|(&k, &v)| (amb.inv(k), v)).collect(),
        }
    }
    /// Same coefficients, compared regardless of the carrier subgroup.
    pub fn same_element(&self, o: &FAlg) -> bool {
        self.coeffs == o.coeffs
    }
}

/// `br_P : (K S)^P → F C_S(P)`, truncation followed by reduction.
pub fn brauer_hom(a: &AlgebraElement, p_sub: &Subgroup, p: u64) -> Result<FAlg> {
    if !a.is_stable_under(p_sub) {
        return Err(BlockError::Unstable(format!("{p_sub:?}")));
    }
    let c = a.group.centralizer(p_sub);
    let trunc = AlgebraElement::from_map(
        &c,
        a.coeffs
            .iter()
            .filter(|(k, _)| c.contains(**k))
            .map(|(&k, v)| (k, v.clone()))
            .collect(),
    );
    FAlg::reduce(&trunc, p)
}

/// Blocks of `g` at `p`, ordered by least irreducible index.
pub fn block_partition(g: &Subgroup, p: u64) -> Arc<Vec<Block>> {
    g.memo(&format!("blocks{p}"), || {
        let map = reduction(g.amb(), p);
        partition_with(g, p, &map).unwrap_or_else(|e| panic!("block partition of {g:?}: {e}"))
    })
}

/// Block partition computed under an explicit reduction map.
pub fn partition_with(g: &Subgroup, p: u64, map: &ReductionMap) -> Result<Vec<Block>> {
    let t = character_table(g);
    let cl = g.classes();
    let mut groups: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for (i, chi) in t.irr.iter().enumerate() {
        let d = chi.degree().clone();
        let dinv = d.inv().map_err(BlockError::Arithmetic)?;
        let mut sig = Vec::with_capacity(cl.len());
        for c in 0..cl.len() {
            let w = (&chi.values()[c] * &dinv).scale(&Q::from_integer(BigInt::from(cl.sizes[c])));
            if !w.is_algebraic_integer() {
                return Err(BlockError::NonIntegralCentral(w.pretty()));
            }
            sig.push(map.reduce(&w)?);
        }
        groups.entry(sig).or_default().push(i);
    }
    let mut blocks: Vec<Block> = groups
        .into_values()
        .map(|irr| Block {
            group: g.clone(),
            p,
            irr,
        })
        .collect();
    blocks.sort_by_key(|b| b.irr[0]);
    Ok(blocks)
}

/// The block of `g` whose idempotent is `e`.
pub fn block_of_idempotent(g: &Subgroup, p: u64, e: &AlgebraElement) -> Result<Block> {
    block_partition(g, p)
        .iter()
        .find(|b| b.idempotent().coeffs == e.coeffs)
        .cloned()
        .ok_or_else(|| BlockError::NotABlock(format!("{g:?}")))
}

/// The block of `g` containing the irreducible with index `chi`.
pub fn block_of_character(g: &Subgroup, p: u64, chi: usize) -> Block {
    block_partition(g, p).iter().find(|b| b.contains(chi)).unwrap().clone()
}

/// Every `p`-subgroup of `g`.
pub fn p_subgroups(g: &Subgroup, p: u64) -> Arc<Vec<Subgroup>> {
    g.memo(&format!("psubs{p}"), || {
        let mut all = BTreeSet::new();
        for r in g.p_subgroups_up_to_conj(p) {
            for x in g.transversal(&g.normalizer(&r)) {
                all.insert(r.conjugate(x));
            }
        }
        all.into_iter().collect()
    })
}

/// `(P, e)` with `e` a block of `C_G(P)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BrauerPair {
    over: Subgroup,
    sub: Subgroup,
    block: Block,
}

impl std::fmt::Debug for BrauerPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:?}, e{:?})", self.sub, self.block.irr)
    }
}

impl BrauerPair {
    pub fn new(over: &Subgroup, sub: &Subgroup, block: Block) -> Result<Self> {
        if !sub.is_subgroup_of(over) {
            return Err(BlockError::NotContained(format!("{sub:?}"), format!("{over:?}")));
        }
        if *block.group() != over.centralizer(sub) {
            return Err(BlockError::NotABlock(format!("{:?}", over.centralizer(sub))));
        }
        Ok(BrauerPair {
            over: over.clone(),
            sub: sub.clone(),
            block,
        })
    }
    pub fn over(&self) -> &Subgroup {
        &self.over
    }
    pub fn sub(&self) -> &Subgroup {
        &self.sub
    }
    pub fn block(&self) -> &Block {
        &self.block
    }
    pub fn p(&self) -> u64 {
        self.block.p
    }
    pub fn idempotent(&self) -> Arc<AlgebraElement> {
        self.block.idempotent()
    }
    pub fn centralizer(&self) -> &Subgroup {
        self.block.group()
    }

    /// `^x(P, e)`.
    pub fn conjugate(&self, x: u32) -> BrauerPair {
        BrauerPair {
            over: self.over.conjugate(x),
            sub: self.sub.conjugate(x),
            block: self.block.conjugate(x),
        }
    }

    /// `N_G(P, e)`.
    pub fn normalizer(&self) -> Subgroup {
        let key = format!("pairnorm{}:{:?}:{:?}", self.p(), self.sub.elems(), self.block.irr);
        let r = self.over.memo(&key, || {
            let n = self.over.normalizer(&self.sub);
            let c = self.block.group();
            let keep: Vec<u32> = n
                .elems()
                .iter()
                .copied()
                .filter(|&g| c.contains(g) || self.block.conjugate(g) == self.block)
                .collect();
            n.amb().subgroup(keep)
        });
        (*r).clone()
    }

    /// The dual pair `(P, e*)`.
    pub fn dual(&self) -> BrauerPair {
        BrauerPair {
            over: self.over.clone(),
            sub: self.sub.clone(),
            block: self.block.dual(),
        }
    }

    /// The same pair regarded inside a larger group `h ≥ over` with `C_h(P) = C_over(P)`.
    pub fn reparent(&self, h: &Subgroup) -> Result<BrauerPair> {
        BrauerPair::new(h, &self.sub, self.block.clone())
    }
}

/// One pair per block of `C_G(P)`.
pub fn blocks_of_centralizer(g: &Subgroup, sub: &Subgroup, p: u64) -> Vec<BrauerPair> {
    let c = g.centralizer(sub);
    block_partition(&c, p)
        .iter()
        .map(|b| BrauerPair {
            over: g.clone(),
            sub: sub.clone(),
            block: b.clone(),
        })
        .collect()
}

/// All Brauer pairs of `g`.
pub fn all_pairs(g: &Subgroup, p: u64) -> Vec<BrauerPair> {
    p_subgroups(g, p)
        .iter()
        .flat_map(|s| blocks_of_centralizer(g, s, p))
        .collect()
}

/// `br_P(a) x̄ = x̄` for `x̄` an element of `F C_G(P)`.
fn br_fixes(a: &AlgebraElement, p_sub: &Subgroup, xbar: &FAlg, p: u64) -> Result<bool> {
    let b = brauer_hom(a, p_sub, p)?;
    Ok(b.mul(xbar).same_element(xbar))
}

/// `(Q,f) ⊴ (P,e)`.
pub fn normal_containment(qf: &BrauerPair, pe: &BrauerPair) -> bool {
    if qf.over != pe.over || !qf.sub.is_subgroup_of(&pe.sub) {
        return false;
    }
    let f = qf.idempotent();
    let stable = pe.sub.gens().iter().all(|&x| qf.sub.normalizes(x)) && f.is_stable_under(&pe.sub);
    if !stable {
        return false;
    }
    let f_in = f.with_group(&qf.over.centralizer(&qf.sub));
    br_fixes(&f_in, &pe.sub, &pe.block.reduced(), pe.p()).unwrap_or(false)
}

/// `(Q,f) ≤ (P,e)` via the unique subpair of `(P,e)` at `Q`.
pub fn contained(qf: &BrauerPair, pe: &BrauerPair) -> Result<bool> {
    if qf.over != pe.over || !qf.sub.is_subgroup_of(&pe.sub) {
        return Ok(false);
    }
    Ok(unique_subpair(pe, &qf.sub)? == *qf)
}

/// `(Q,f) ≤ (P,e)` as the transitive closure of `⊴` over all pairs between them.
pub fn contained_exhaustive(qf: &BrauerPair, pe: &BrauerPair) -> bool {
    if qf.over != pe.over || !qf.sub.is_subgroup_of(&pe.sub) {
        return false;
    }
    let p = pe.p();
    let between: Vec<BrauerPair> = pe
        .sub
        .p_group_subgroups(p)
        .into_iter()
        .filter(|r| qf.sub.is_subgroup_of(r))
        .flat_map(|r| blocks_of_centralizer(&pe.over, &r, p))
        .collect();
    let mut seen: BTreeSet<&BrauerPair> = BTreeSet::new();
    let mut stack = vec![qf];
    while let Some(x) = stack.pop() {
        if x == pe {
            return true;
        }
        for y in &between {
            if !seen.contains(y) && y.sub.order() > x.sub.order() && normal_containment(x, y) {
                seen.insert(y);
                stack.push(y);
            }
        }
    }
    false
}

/// Every `f` of `C_G(Q)` with `(Q,f) ≤ (P,e)`, by exhaustive search.
pub fn subpairs_exhaustive(pe: &BrauerPair, q: &Subgroup) -> Vec<BrauerPair> {
    if q == &pe.sub {
        return vec![pe.clone()];
    }
    blocks_of_centralizer(&pe.over, q, pe.p())
        .into_iter()
        .filter(|c| contained_exhaustive(c, pe))
        .collect()
}

/// The unique `(Q,f) ≤ (P,e)`, by descending the chain `Q ⊴ N_P(Q) ⊴ …`.
pub fn unique_subpair(pe: &BrauerPair, q: &Subgroup) -> Result<BrauerPair> {
    if !q.is_subgroup_of(&pe.sub) {
        return Err(BlockError::NotContained(format!("{q:?}"), format!("{:?}", pe.sub)));
    }
    let mut chain = vec![q.clone()];
    while chain.last().unwrap() != &pe.sub {
        let next = pe.sub.normalizer(chain.last().unwrap());
        chain.push(next);
    }
    let mut cur = pe.clone();
    for r in chain.iter().rev().skip(1) {
        let found: Vec<BrauerPair> = blocks_of_centralizer(&pe.over, r, pe.p())
            .into_iter()
            .filter(|c| normal_containment(c, &cur))
            .collect();
        if found.len() != 1 {
            return Err(BlockError::Subpair {
                sub: format!("{r:?}"),
                count: found.len(),
            });
        }
        cur = found.into_iter().next().unwrap();
    }
    Ok(cur)
}

/// `(P,e)` belongs to `B`.
pub fn belongs_to(pe: &BrauerPair, b: &Block) -> bool {
    b.group() == &pe.over && br_fixes(&b.idempotent(), &pe.sub, &pe.block.reduced(), b.p).unwrap_or(false)
}

/// The block of `over` that a pair belongs to.
pub fn block_of_pair(pe: &BrauerPair) -> Block {
    block_partition(&pe.over, pe.p())
        .iter()
        .find(|b| belongs_to(pe, b))
        .expect("every pair belongs to a block")
        .clone()
}

/// `(u, e)` with `e` a block of `C_G(u)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BrauerElement {
    pub u: u32,
    pub pair: BrauerPair,
}

impl BrauerElement {
    pub fn idempotent(&self) -> Arc<AlgebraElement> {
        self.pair.idempotent()
    }
    pub fn conjugate(&self, x: u32) -> BrauerElement {
        BrauerElement {
            u: self.pair.over.amb().conj(x, self.u),
            pair: self.pair.conjugate(x),
        }
    }
}

/// Brauer elements of `g` up to conjugacy, one per `p`-class and block of `C_G(u)`.
pub fn all_brauer_elements(g: &Subgroup, p: u64) -> Vec<BrauerElement> {
    let amb = g.amb().clone();
    let mut out = Vec::new();
    for &u in &g.classes().reps {
        if !amb.is_p_element(u, p) {
            continue;
        }
        let cu = amb.generate(&[u]);
        for pair in blocks_of_centralizer(g, &cu, p) {
            out.push(BrauerElement { u, pair });
        }
    }
    out
}

/// Representatives of `BE(B)`.
pub fn brauer_elements(b: &Block) -> Vec<BrauerElement> {
    all_brauer_elements(b.group(), b.p)
        .into_iter()
        .filter(|x| belongs_to(&x.pair, b))
        .collect()
}

/// A maximal pair `(D, e_D)` of a block with its subpairs `e_P` for all `P ≤ D`.
#[derive(Debug)]
pub struct DefectData {
    pub block: Block,
    pub max: BrauerPair,
    pub subpairs: BTreeMap<Subgroup, BrauerPair>,
}

impl DefectData {
    pub fn defect_group(&self) -> &Subgroup {
        &self.max.sub
    }
    /// `(P, e_P)` for `P ≤ D`.
    pub fn pair(&self, p: &Subgroup) -> &BrauerPair {
        &self.subpairs[p]
    }
    pub fn idempotent(&self, p: &Subgroup) -> Arc<AlgebraElement> {
        self.subpairs[p].idempotent()
    }
    /// `I_P = N_G(P, e_P)`.
    pub fn inertia(&self, p: &Subgroup) -> Subgroup {
        self.subpairs[p].normalizer()
    }
}

/// Canonical maximal pair: largest `D` with `br_D(e_B) ≠ 0`, then least subgroup and least block.
pub fn defect_pairs(b: &Block) -> Arc<DefectData> {
    let key = format!("defect{}:{:?}", b.p, b.irr);
    b.group().memo(&key, || {
        let g = b.group();
        let p = b.p;
        let e = b.idempotent();
        let mut best: Option<BrauerPair> = None;
        for d in p_subgroups(g, p).iter() {
            if best.as_ref().is_some_and(|x| x.sub.order() > d.order()) {
                continue;
            }
            if brauer_hom(&e, d, p).map(|x| x.is_zero()).unwrap_or(true) {
                continue;
            }
            let cand = blocks_of_centralizer(g, d, p).into_iter().find(|pe| belongs_to(pe, b));
            if let Some(c) = cand {
                let better = match &best {
                    None => true,
                    Some(x) => (c.sub.order(), std::cmp::Reverse(&c.sub)) > (x.sub.order(), std::cmp::Reverse(&x.sub)),
                };
                if better {
                    best = Some(c);
                }
            }
        }
        let max = best.expect("the trivial pair always qualifies");
        let subpairs = max
            .sub
            .p_group_subgroups(p)
            .into_iter()
            .map(|q| {
                let sp = unique_subpair(&max, &q).unwrap_or_else(|e| panic!("{e}"));
                (q, sp)
            })
            .collect();
        DefectData {
            block: b.clone(),
            max,
            subpairs,
        }
    })
}

/// `tr(e) = Σ` of the distinct `acting`-conjugates of `e`, placed in `K[target]`.
pub fn orbit_sum(e: &AlgebraElement, acting: &Subgroup, target: &Subgroup) -> Result<AlgebraElement> {
    let mut seen: Vec<AlgebraElement> = vec![e.clone()];
    let mut i = 0;
    while i < seen.len() {
        for &x in acting.gens() {
            let c = seen[i].conjugate(x);
            if !seen.iter().any(|s| s.coeffs == c.coeffs) {
                seen.push(c);
            }
        }
        i += 1;
    }
    let mut acc = AlgebraElement::zero(target);
    for s in &seen {
        acc = acc.add(&s.with_group(target));
    }
    if !acc.is_idempotent() {
        return Err(BlockError::OrbitSum);
    }
    Ok(acc)
}

/// Blocks of `C_I(Q)` covering a given block `c` of a normal subgroup.
pub fn covering_blocks(c: &Block, over: &Subgroup) -> Vec<Block> {
    block_partition(over, c.p)
        .iter()
        .filter(|b| b.covers(c))
        .cloned()
        .collect()
}

/// `(R, e ⊗ f*)` for pairs of `G` and `H` with `p₁R = P`, `p₂R = Q`.
pub fn pair_join(pe: &BrauerPair, qf: &BrauerPair, r: &Subgroup) -> Result<BrauerPair> {
    let over = product_subgroup(&pe.over, &qf.over);
    if p1(r) != pe.sub || p2(r) != qf.sub || !r.is_subgroup_of(&over) {
        return Err(BlockError::Projection(format!("{r:?}")));
    }
    let t = tensor_dual(&pe.idempotent(), &qf.idempotent(), &over.centralizer(r));
    let block = block_of_idempotent(&over.centralizer(r), pe.p(), &t)?;
    Ok(BrauerPair {
        over,
        sub: r.clone(),
        block,
    })
}

/// `(R, e ⊗ f*) ↦ ((p₁R, e), (p₂R, f))`.
pub fn pair_split(x: &BrauerPair) -> Result<(BrauerPair, BrauerPair)> {
    let (ga, ha) = (p1(&x.over), p2(&x.over));
    let (pr, qr) = (p1(&x.sub), p2(&x.sub));
    let target = x.idempotent();
    for a in blocks_of_centralizer(&ga, &pr, x.p()) {
        for b in blocks_of_centralizer(&ha, &qr, x.p()) {
            if tensor_dual(&a.idempotent(), &b.idempotent(), x.centralizer()).coeffs == target.coeffs {
                return Ok((a, b));
            }
        }
    }
    Err(BlockError::Projection(format!("{x:?}")))
}

/// `e ⊗ f*` as an element of `K[target]` for `target ≤ G × H`.
pub fn tensor_dual(e: &AlgebraElement, f: &AlgebraElement, target: &Subgroup) -> AlgebraElement {
    let amb = target.amb().clone();
    let fs = f.star();
    let mut coeffs = BTreeMap::new();
    for (&a, x) in &e.coeffs {
        for (&b, y) in &fs.coeffs {
            coeffs.insert(amb.pair(a, b), x * y);
        }
    }
    AlgebraElement::from_map(target, coeffs)
}

/// `(Q, c⊗d*) ≤ (P, e⊗f*)` decided componentwise.
pub fn product_pair_contained(a: &BrauerPair, b: &BrauerPair) -> Result<bool> {
    if !a.sub.is_subgroup_of(&b.sub) {
        return Ok(false);
    }
    let (a1, a2) = pair_split(a)?;
    let (b1, b2) = pair_split(b)?;
    Ok(contained(&a1, &b1)? && contained(&a2, &b2)?)
}

/// Sum of a list of algebra elements.
pub fn sum_elements(group: &Subgroup, xs: &[AlgebraElement]) -> AlgebraElement {
    let mut acc: BTreeMap<u32, Vec<Cyc>> = BTreeMap::new();
    for x in xs {
        for (&k, v) in &x.coeffs {
            acc.entry(k).or_default().push(v.clone());
        }
    }
    AlgebraElement::from_map(group, acc.into_iter().map(|(k, v)| (k, sum_all(&v))).collect())
}
