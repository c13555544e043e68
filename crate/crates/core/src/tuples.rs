//! Coherent character tuples and the maps between their three indexings.
//!
//! * [`GlobalTuple`]: one class function on `N_G(P)` per `p`-subgroup `P`.
//! * [`PairTuple`]: one class function on `I_{(P,e)}` per Brauer pair of a block.
//! * [`SubgroupTuple`]: one class function on `I_P` per subgroup of a defect group.
//!
//! Every entry is stored, and fixedness under conjugation is checked rather
//! than assumed. Checks return a [`Verdict`] carrying the first failed identity.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::blocks::{
    all_brauer_elements, all_pairs, belongs_to, blocks_of_centralizer, normal_containment, orbit_sum, p_subgroups,
    sum_elements, Block, BlockError, BrauerPair,
};
use crate::charfun::{character_table, AlgebraElement, CharError, ClassFunction};
use crate::cyclo::Cyc;
use crate::fusion::FusionSystem;
use crate::perm::{is_twisted_diagonal, Subgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TupleError {
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("no entry at {0}")]
    Missing(String),
    #[error("unexpected entry at {0}")]
    Extra(String),
    #[error("entry at {index} lives on {found}, expected {expected}")]
    WrongGroup {
        index: String,
        found: String,
        expected: String,
    },
    #[error("tuple is not fixed: {0:?}")]
    NotFixed(Box<Witness>),
    #[error("no conjugate of {0} lies under the maximal pair")]
    NoWitness(String),
    #[error("{0} is not a direct product")]
    NotProduct(String),
}

type Result<T> = std::result::Result<T, TupleError>;

/// A failed identity: where it was tested, at which elements, and both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub condition: String,
    pub index: String,
    pub elements: Vec<u32>,
    pub perms: Vec<String>,
    pub lhs: String,
    pub rhs: String,
}

/// `Ok(n)` when all `n` tested identities hold.
pub type Verdict = std::result::Result<usize, Witness>;

/// Quantifier range of the coherence checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Range {
    /// Conjugacy-class and orbit representatives only.
    #[default]
    Representatives,
    /// Every element and every index.
    Full,
}

struct Tally {
    count: usize,
}

impl Tally {
    fn new() -> Self {
        Tally { count: 0 }
    }
    fn compare(
        &mut self,
        cond: &str,
        index: &dyn std::fmt::Debug,
        g: &Subgroup,
        els: &[u32],
        lhs: &Cyc,
        rhs: &Cyc,
    ) -> Verdict {
        self.count += 1;
        if lhs == rhs {
            return Ok(self.count);
        }
        Err(Witness {
            condition: cond.to_string(),
            index: format!("{index:?}"),
            elements: els.to_vec(),
            perms: els.iter().map(|&x| g.amb().elem(x).to_string()).collect(),
            lhs: lhs.pretty(),
            rhs: rhs.pretty(),
        })
    }
}

fn check_group(index: &dyn std::fmt::Debug, chi: &ClassFunction, expected: &Subgroup) -> Result<()> {
    if chi.group() != expected {
        return Err(TupleError::WrongGroup {
            index: format!("{index:?}"),
            found: format!("{:?}", chi.group()),
            expected: format!("{expected:?}"),
        });
    }
    Ok(())
}

fn fixed_failure(index: &dyn std::fmt::Debug, g: &Subgroup, x: u32) -> Witness {
    Witness {
        condition: "fixed".into(),
        index: format!("{index:?}"),
        elements: vec![x],
        perms: vec![g.amb().elem(x).to_string()],
        lhs: "conjugated entry".into(),
        rhs: "entry at conjugate index".into(),
    }
}

/// `χ(x·ε) = Σ ε_m χ(xm)`.
fn eval_shifted(chi: &ClassFunction, x: u32, eps: &AlgebraElement) -> Result<Cyc> {
    let amb = chi.group().amb().clone();
    let shifted = AlgebraElement::from_map(
        chi.group(),
        eps.coeffs.iter().map(|(&m, c)| (amb.mul(x, m), c.clone())).collect(),
    );
    Ok(chi.evaluate(&shifted)?)
}

fn p_regular_points(h: &Subgroup, p: u64, range: Range) -> Vec<u32> {
    let amb = h.amb();
    match range {
        Range::Representatives => h
            .classes()
            .reps
            .iter()
            .copied()
            .filter(|&s| amb.is_p_regular(s, p))
            .collect(),
        Range::Full => h.p_regular(p),
    }
}

fn p_element_points(h: &Subgroup, p: u64, range: Range) -> Vec<u32> {
    let amb = h.amb();
    let pool: Vec<u32> = match range {
        Range::Representatives => h.classes().reps.clone(),
        Range::Full => h.elems().to_vec(),
    };
    pool.into_iter().filter(|&u| amb.is_p_element(u, p)).collect()
}

/// `R_K(H/P, e)`: integral coordinates, `P` in every kernel, and `e·χ = χ`.
fn lattice_test(
    index: &dyn std::fmt::Debug,
    chi: &ClassFunction,
    p_sub: &Subgroup,
    e: Option<&AlgebraElement>,
) -> Verdict {
    let fail = |what: &str| Witness {
        condition: "lattice".into(),
        index: format!("{index:?}"),
        elements: vec![],
        perms: vec![],
        lhs: what.into(),
        rhs: String::new(),
    };
    if !chi.is_virtual_character() {
        return Err(fail("coordinates are not integers"));
    }
    if !chi.constituents_contain_in_kernel(p_sub) {
        return Err(fail("a constituent does not contain P in its kernel"));
    }
    if let Some(e) = e {
        let cut = chi
            .act(&e.with_group(chi.group()))
            .map_err(|_| fail("idempotent outside the group"))?;
        if cut != *chi {
            return Err(fail("entry does not lie over the block"));
        }
    }
    Ok(1)
}

/// `Σ e` over the blocks `e` of `C_G(P)` with `(P,e)` belonging to `b`, as a lift of `br_P(e_B)`.
pub fn brauer_cut(b: &Block, p_sub: &Subgroup) -> AlgebraElement {
    let c = b.group().centralizer(p_sub);
    let parts: Vec<AlgebraElement> = blocks_of_centralizer(b.group(), p_sub, b.p())
        .into_iter()
        .filter(|pe| belongs_to(pe, b))
        .map(|pe| (*pe.idempotent()).clone())
        .collect();
    sum_elements(&c, &parts)
}

/// `(χ_P)` indexed by all `p`-subgroups, `χ_P` a class function on `N_G(P)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalTuple {
    group: Subgroup,
    p: u64,
    entries: BTreeMap<Subgroup, ClassFunction>,
}

impl GlobalTuple {
    pub fn new(group: &Subgroup, p: u64, entries: BTreeMap<Subgroup, ClassFunction>) -> Result<Self> {
        let subs = p_subgroups(group, p);
        for s in subs.iter() {
            let chi = entries.get(s).ok_or_else(|| TupleError::Missing(format!("{s:?}")))?;
            check_group(s, chi, &group.normalizer(s))?;
        }
        if entries.len() != subs.len() {
            let extra = entries.keys().find(|k| subs.binary_search(k).is_err()).unwrap();
            return Err(TupleError::Extra(format!("{extra:?}")));
        }
        Ok(GlobalTuple {
            group: group.clone(),
            p,
            entries,
        })
    }
    pub fn zero(group: &Subgroup, p: u64) -> Self {
        let entries = p_subgroups(group, p)
            .iter()
            .map(|s| (s.clone(), ClassFunction::zero(&group.normalizer(s))))
            .collect();
        GlobalTuple {
            group: group.clone(),
            p,
            entries,
        }
    }
    pub fn group(&self) -> &Subgroup {
        &self.group
    }
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn entries(&self) -> &BTreeMap<Subgroup, ClassFunction> {
        &self.entries
    }
    pub fn entry(&self, s: &Subgroup) -> &ClassFunction {
        &self.entries[s]
    }

    fn zip(&self, o: &Self, f: impl Fn(&ClassFunction, &ClassFunction) -> ClassFunction) -> Self {
        assert_eq!(self.group, o.group);
        let entries = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), f(v, &o.entries[k])))
            .collect();
        GlobalTuple {
            group: self.group.clone(),
            p: self.p,
            entries,
        }
    }
    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b).unwrap())
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b).unwrap())
    }

    /// Replaces the entries on the `G`-orbit of `s` by the conjugates of `chi`.
    pub fn set_orbit(&mut self, s: &Subgroup, chi: ClassFunction) -> Result<()> {
        check_group(s, &chi, &self.group.normalizer(s))?;
        for x in self.group.transversal(&self.group.normalizer(s)) {
            self.entries.insert(s.conjugate(x), chi.conjugate(x));
        }
        Ok(())
    }

    /// `^gχ_P = χ_{^gP}` for the generators `g` of `G`.
    pub fn fixedness(&self) -> Verdict {
        let mut n = 0;
        for &g in self.group.gens() {
            for (s, chi) in &self.entries {
                n += 1;
                if chi.conjugate(g) != self.entries[&s.conjugate(g)] {
                    return Err(fixed_failure(s, &self.group, g));
                }
            }
        }
        Ok(n)
    }

    /// Entries lie in `R_K(N_G(P)/P)`, or in `R_K(N_G(P)/P, br_P(e_B))` when a block is given.
    pub fn lattice(&self, b: Option<&Block>) -> Verdict {
        let mut n = 0;
        for (s, chi) in &self.entries {
            let cut = b.map(|b| brauer_cut(b, s));
            n += lattice_test(s, chi, s, cut.as_ref())?;
        }
        Ok(n)
    }

    /// `χ_P ↦ br_P(e_B)·χ_P`.
    pub fn cut(&self, b: &Block) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (s, chi) in &self.entries {
            let e = brauer_cut(b, s).with_group(chi.group());
            entries.insert(s.clone(), chi.act(&e)?);
        }
        Ok(GlobalTuple {
            group: self.group.clone(),
            p: self.p,
            entries,
        })
    }
}

/// Fixed-point tuple of the permutation module on `G/K`: `χ_P` is the permutation
/// character of `N_G(P)` on the `P`-fixed cosets.
pub fn beta_perm_module(g: &Subgroup, p: u64, k: &Subgroup) -> GlobalTuple {
    let amb = g.amb().clone();
    let cosets = g.transversal(k);
    let fixes = |r: u32, x: u32| k.contains(amb.conj(amb.inv(r), x));
    let entries = p_subgroups(g, p)
        .iter()
        .map(|s| {
            let fixed: Vec<u32> = cosets
                .iter()
                .copied()
                .filter(|&r| s.gens().iter().all(|&x| fixes(r, x)))
                .collect();
            let n = g.normalizer(s);
            let chi = ClassFunction::from_fn(&n, |x| {
                Cyc::from_int(fixed.iter().filter(|&&r| fixes(r, x)).count() as i64)
            });
            (s.clone(), chi)
        })
        .collect();
    GlobalTuple {
        group: g.clone(),
        p,
        entries,
    }
}

/// `χ_P(x) = χ_{P⟨x_p⟩}(x)` for all `P` and `x ∈ N_G(P)`, after checking fixedness.
pub fn check_beta(t: &GlobalTuple, range: Range) -> Verdict {
    let mut tally = Tally::new();
    tally.count += t.fixedness()?;
    let amb = t.group.amb().clone();
    for (s, chi) in &t.entries {
        let pts: Vec<u32> = match range {
            Range::Representatives => chi.classes().reps.clone(),
            Range::Full => chi.group().elems().to_vec(),
        };
        for x in pts {
            let (u, _) = amb.p_part(x, t.p);
            let r = s.join_elem(u);
            tally.compare("beta", s, &t.group, &[x], chi.at(x), t.entries[&r].at(x))?;
        }
    }
    Ok(tally.count)
}

/// Brauer pairs of `b`, sorted.
pub fn block_pairs(b: &Block) -> Arc<Vec<BrauerPair>> {
    b.group().memo(&format!("bpairs{}:{:?}", b.p(), b.irr()), || {
        all_pairs(b.group(), b.p())
            .into_iter()
            .filter(|pe| belongs_to(pe, b))
            .collect()
    })
}

/// One representative per `G`-orbit on the Brauer pairs of `b`.
pub fn pair_orbit_reps(b: &Block) -> Arc<Vec<BrauerPair>> {
    b.group().memo(&format!("bpairreps{}:{:?}", b.p(), b.irr()), || {
        let g = b.group();
        let mut seen = BTreeSet::new();
        let mut reps = Vec::new();
        for pe in block_pairs(b).iter() {
            if seen.contains(pe) {
                continue;
            }
            reps.push(pe.clone());
            for x in g.transversal(&pe.normalizer()) {
                seen.insert(pe.conjugate(x));
            }
        }
        reps
    })
}

/// `(χ_{(P,e)})` over the Brauer pairs of a block, `χ_{(P,e)}` on `I_{(P,e)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairTuple {
    block: Block,
    entries: BTreeMap<BrauerPair, ClassFunction>,
}

impl PairTuple {
    pub fn new(block: &Block, entries: BTreeMap<BrauerPair, ClassFunction>) -> Result<Self> {
        let pairs = block_pairs(block);
        for pe in pairs.iter() {
            let chi = entries.get(pe).ok_or_else(|| TupleError::Missing(format!("{pe:?}")))?;
            check_group(pe, chi, &pe.normalizer())?;
        }
        if let Some(extra) = entries.keys().find(|k| pairs.binary_search(k).is_err()) {
            return Err(TupleError::Extra(format!("{extra:?}")));
        }
        Ok(PairTuple {
            block: block.clone(),
            entries,
        })
    }
    pub fn zero(block: &Block) -> Self {
        let entries = block_pairs(block)
            .iter()
            .map(|pe| (pe.clone(), ClassFunction::zero(&pe.normalizer())))
            .collect();
        PairTuple {
            block: block.clone(),
            entries,
        }
    }
    /// Spreads entries given on orbit representatives to the full orbits.
    pub fn from_representatives(block: &Block, reps: &BTreeMap<BrauerPair, ClassFunction>) -> Result<Self> {
        let mut t = PairTuple::zero(block);
        for (pe, chi) in reps {
            t.set_orbit(pe, chi.clone())?;
        }
        Ok(t)
    }
    pub fn block(&self) -> &Block {
        &self.block
    }
    pub fn entries(&self) -> &BTreeMap<BrauerPair, ClassFunction> {
        &self.entries
    }
    pub fn entry(&self, pe: &BrauerPair) -> Option<&ClassFunction> {
        self.entries.get(pe)
    }

    pub fn set_orbit(&mut self, pe: &BrauerPair, chi: ClassFunction) -> Result<()> {
        let i = pe.normalizer();
        check_group(pe, &chi, &i)?;
        if !self.entries.contains_key(pe) {
            return Err(TupleError::Extra(format!("{pe:?}")));
        }
        for x in self.block.group().transversal(&i) {
            self.entries.insert(pe.conjugate(x), chi.conjugate(x));
        }
        Ok(())
    }

    fn zip(&self, o: &Self, f: impl Fn(&ClassFunction, &ClassFunction) -> ClassFunction) -> Self {
        assert_eq!(self.block, o.block);
        let entries = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), f(v, &o.entries[k])))
            .collect();
        PairTuple {
            block: self.block.clone(),
            entries,
        }
    }
    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b).unwrap())
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b).unwrap())
    }

    pub fn fixedness(&self) -> Verdict {
        let g = self.block.group();
        let mut n = 0;
        for &x in g.gens() {
            for (pe, chi) in &self.entries {
                n += 1;
                if self.entries.get(&pe.conjugate(x)) != Some(&chi.conjugate(x)) {
                    return Err(fixed_failure(pe, g, x));
                }
            }
        }
        Ok(n)
    }

    pub fn lattice(&self) -> Verdict {
        let mut n = 0;
        for (pe, chi) in &self.entries {
            n += lattice_test(pe, chi, pe.sub(), Some(&pe.idempotent()))?;
        }
        Ok(n)
    }

    fn indices(&self, range: Range) -> Vec<BrauerPair> {
        match range {
            Range::Representatives => pair_orbit_reps(&self.block).to_vec(),
            Range::Full => self.entries.keys().cloned().collect(),
        }
    }

    /// Irreducibles of `I_{(P,e)}` spanning `R_K(I_{(P,e)}/P, e)`.
    pub fn basis_characters(pe: &BrauerPair) -> Vec<ClassFunction> {
        let i = pe.normalizer();
        let e = pe.idempotent().with_group(&i);
        character_table(&i)
            .irr
            .iter()
            .filter(|chi| pe.sub().elems().iter().all(|&x| chi.at(x) == chi.degree()))
            .filter(|chi| chi.evaluate(&e).map(|v| &v == chi.degree()).unwrap_or(false))
            .cloned()
            .collect()
    }
}

/// `ρ`: `χ_{(P,e)} = e·Res_{I_{(P,e)}} χ_P`.
pub fn rho(t: &GlobalTuple, b: &Block) -> Result<PairTuple> {
    t.fixedness().map_err(|w| TupleError::NotFixed(Box::new(w)))?;
    let mut entries = BTreeMap::new();
    for pe in block_pairs(b).iter() {
        let i = pe.normalizer();
        let chi = t.entry(pe.sub()).restrict(&i)?.act(&pe.idempotent().with_group(&i))?;
        entries.insert(pe.clone(), chi);
    }
    Ok(PairTuple {
        block: b.clone(),
        entries,
    })
}

/// `ρ⁻¹`: `ψ_P = Σ Ind_{I_{(P,e)}}^{N_G(P)} χ_{(P,e)}` over `N_G(P)`-orbit representatives.
pub fn rho_inverse(t: &PairTuple) -> Result<GlobalTuple> {
    t.fixedness().map_err(|w| TupleError::NotFixed(Box::new(w)))?;
    let g = t.block.group();
    let p = t.block.p();
    let mut by_sub: BTreeMap<&Subgroup, Vec<&BrauerPair>> = BTreeMap::new();
    for pe in t.entries.keys() {
        by_sub.entry(pe.sub()).or_default().push(pe);
    }
    let mut out = GlobalTuple::zero(g, p);
    for (s, pairs) in by_sub {
        let n = g.normalizer(s);
        let mut seen = BTreeSet::new();
        let mut acc = ClassFunction::zero(&n);
        for pe in pairs {
            if seen.contains(pe) {
                continue;
            }
            let i = pe.normalizer();
            for x in n.transversal(&i) {
                seen.insert(pe.conjugate(x));
            }
            acc = acc.add(&t.entries[pe].induce(&n)?)?;
        }
        out.entries.insert(s.clone(), acc);
    }
    Ok(out)
}

/// `χ_P` for `P ≤ D`, on `I_P = N_G(P, e_P)`.
#[derive(Clone, Debug)]
pub struct SubgroupTuple {
    fusion: Arc<FusionSystem>,
    entries: BTreeMap<Subgroup, ClassFunction>,
}

impl PartialEq for SubgroupTuple {
    fn eq(&self, o: &Self) -> bool {
        Arc::ptr_eq(&self.fusion, &o.fusion) && self.entries == o.entries
    }
}

impl SubgroupTuple {
    pub fn new(fusion: &Arc<FusionSystem>, entries: BTreeMap<Subgroup, ClassFunction>) -> Result<Self> {
        for s in fusion.subgroups() {
            let chi = entries.get(s).ok_or_else(|| TupleError::Missing(format!("{s:?}")))?;
            check_group(s, chi, &fusion.inertia(s))?;
        }
        if entries.len() != fusion.subgroups().count() {
            let extra = entries.keys().find(|k| !fusion.subgroups().any(|s| s == *k)).unwrap();
            return Err(TupleError::Extra(format!("{extra:?}")));
        }
        Ok(SubgroupTuple {
            fusion: fusion.clone(),
            entries,
        })
    }
    pub fn zero(fusion: &Arc<FusionSystem>) -> Self {
        let entries = fusion
            .subgroups()
            .map(|s| (s.clone(), ClassFunction::zero(&fusion.inertia(s))))
            .collect();
        SubgroupTuple {
            fusion: fusion.clone(),
            entries,
        }
    }
    pub fn fusion(&self) -> &Arc<FusionSystem> {
        &self.fusion
    }
    pub fn entries(&self) -> &BTreeMap<Subgroup, ClassFunction> {
        &self.entries
    }
    pub fn entry(&self, s: &Subgroup) -> &ClassFunction {
        &self.entries[s]
    }
    pub fn set(&mut self, s: &Subgroup, chi: ClassFunction) -> Result<()> {
        check_group(s, &chi, &self.fusion.inertia(s))?;
        self.entries.insert(s.clone(), chi);
        Ok(())
    }

    /// `^φχ_P = χ_{φ(P)}` for every `F`-isomorphism, via its witness.
    pub fn fixedness(&self) -> Verdict {
        let mut n = 0;
        for (s, chi) in &self.entries {
            for f in self.fusion.isos_from(s) {
                n += 1;
                if chi.conjugate(f.witness) != self.entries[&f.target] {
                    return Err(fixed_failure(s, self.fusion.group(), f.witness));
                }
            }
        }
        Ok(n)
    }

    pub fn lattice(&self) -> Verdict {
        let mut n = 0;
        for (s, chi) in &self.entries {
            n += lattice_test(s, chi, s, Some(&self.fusion.pair(s).idempotent()))?;
        }
        Ok(n)
    }
}

/// `π`: keeps the entries at `(P, e_P)` for `P ≤ D`.
pub fn pi_projection(t: &PairTuple, fusion: &Arc<FusionSystem>) -> Result<SubgroupTuple> {
    let mut entries = BTreeMap::new();
    for s in fusion.subgroups() {
        let pe = fusion.pair(s);
        let chi = t.entry(pe).ok_or_else(|| TupleError::Missing(format!("{pe:?}")))?;
        entries.insert(s.clone(), chi.clone());
    }
    Ok(SubgroupTuple {
        fusion: fusion.clone(),
        entries,
    })
}

/// `π⁻¹`: `χ_{(P,e)} = ^{g⁻¹}χ_{^gP}` for `^g(P,e) ≤ (D,e_D)`; every such `g` must agree.
pub fn pi_inverse(t: &SubgroupTuple) -> Result<PairTuple> {
    t.fixedness().map_err(|w| TupleError::NotFixed(Box::new(w)))?;
    let fs = &t.fusion;
    let g = fs.group();
    let amb = g.amb().clone();
    let d = fs.defect_group();
    let mut entries = BTreeMap::new();
    for pe in block_pairs(fs.block()).iter() {
        let mut value: Option<ClassFunction> = None;
        for &x in g.elems() {
            let c = pe.sub().conjugate(x);
            if !c.is_subgroup_of(d) || pe.conjugate(x) != *fs.pair(&c) {
                continue;
            }
            let chi = t.entries[&c].conjugate(amb.inv(x));
            match &value {
                None => value = Some(chi),
                Some(v) if *v != chi => return Err(TupleError::NotFixed(Box::new(fixed_failure(pe, g, x)))),
                Some(_) => {}
            }
        }
        let chi = value.ok_or_else(|| TupleError::NoWitness(format!("{pe:?}")))?;
        entries.insert(pe.clone(), chi);
    }
    Ok(PairTuple {
        block: fs.block().clone(),
        entries,
    })
}

/// The block of `I_{(P,e)}` with idempotent `e`.
fn inertial_block(pe: &BrauerPair) -> Result<Block> {
    let i = pe.normalizer();
    Ok(crate::blocks::block_of_idempotent(
        &i,
        pe.p(),
        &pe.idempotent().with_group(&i),
    )?)
}

/// Brauer elements `(u, ε)` of `I_{(P,e)}` belonging to `e`.
fn inertial_brauer_elements(pe: &BrauerPair, range: Range) -> Result<Vec<(u32, BrauerPair)>> {
    let eb = inertial_block(pe)?;
    let i = pe.normalizer();
    let p = pe.p();
    let all: Vec<(u32, BrauerPair)> = match range {
        Range::Representatives => all_brauer_elements(&i, p)
            .into_iter()
            .map(|be| (be.u, be.pair))
            .collect(),
        Range::Full => {
            let amb = i.amb().clone();
            i.elems()
                .iter()
                .filter(|&&u| amb.is_p_element(u, p))
                .flat_map(|&u| {
                    blocks_of_centralizer(&i, &amb.generate(&[u]), p)
                        .into_iter()
                        .map(move |pr| (u, pr))
                })
                .collect()
        }
    };
    Ok(all.into_iter().filter(|(_, pr)| belongs_to(pr, &eb)).collect())
}

/// Condition (C1) on a pair tuple.
pub fn check_c1(t: &PairTuple, range: Range) -> Result<Verdict> {
    let mut tally = Tally::new();
    if let Err(w) = t.fixedness() {
        return Ok(Err(w));
    }
    let g = t.block.group();
    let p = t.block.p();
    let zero_on = |h: &Subgroup| ClassFunction::zero(h);
    for pe in t.indices(range) {
        let chi = &t.entries[&pe];
        let i = pe.normalizer();
        for (u, eps_pair) in inertial_brauer_elements(&pe, range)? {
            let cu = eps_pair.centralizer().clone();
            let eps = eps_pair.idempotent();
            let r = pe.sub().join_elem(u);
            for f in blocks_of_centralizer(g, &r, p) {
                if eps.mul(&f.idempotent()).is_zero() {
                    continue;
                }
                let rhs = match t.entry(&f) {
                    Some(theta) => {
                        let h = cu.intersect(&f.normalizer());
                        theta.restrict(&h)?.induce(&cu)?
                    }
                    None => zero_on(&cu),
                };
                for s in p_regular_points(&cu, p, range) {
                    let us = g.amb().mul(u, s);
                    let lhs = eval_shifted(chi, us, &eps)?;
                    if let Err(w) = tally.compare("C1", &(&pe, &f), &i, &[u, s], &lhs, rhs.at(s)) {
                        return Ok(Err(w));
                    }
                }
            }
        }
    }
    Ok(Ok(tally.count))
}

/// Condition (C2) on a pair tuple.
pub fn check_c2(t: &PairTuple, range: Range) -> Result<Verdict> {
    let mut tally = Tally::new();
    if let Err(w) = t.fixedness() {
        return Ok(Err(w));
    }
    let g = t.block.group();
    let amb = g.amb().clone();
    let p = t.block.p();
    for pe in t.indices(range) {
        let chi = &t.entries[&pe];
        let i = pe.normalizer();
        for u in p_element_points(&i, p, range) {
            let cu = i.centralizer_of(&[u]);
            let r = pe.sub().join_elem(u);
            let above: Vec<(Subgroup, Option<&ClassFunction>)> = blocks_of_centralizer(g, &r, p)
                .into_iter()
                .filter(|f| normal_containment(&pe, f))
                .map(|f| (f.normalizer(), t.entry(&f)))
                .collect();
            for s in p_regular_points(&cu, p, range) {
                let terms: Vec<Cyc> = above
                    .iter()
                    .filter(|(n, _)| n.contains(s))
                    .filter_map(|(_, th)| th.map(|th| th.at(s).clone()))
                    .collect();
                let rhs = crate::cyclo::sum_all(&terms);
                if let Err(w) = tally.compare("C2", &pe, &i, &[u, s], chi.at(amb.mul(u, s)), &rhs) {
                    return Ok(Err(w));
                }
            }
        }
    }
    Ok(Ok(tally.count))
}

/// Condition (C3) on a subgroup tuple. With `diagonal`, the right side is
/// replaced by zero whenever `P⟨u⟩` is not twisted diagonal.
fn c3_core(t: &SubgroupTuple, range: Range, diagonal: bool) -> Result<Verdict> {
    let mut tally = Tally::new();
    if let Err(w) = t.fixedness() {
        return Ok(Err(w));
    }
    let fs = &t.fusion;
    let g = fs.group();
    let amb = g.amb().clone();
    let p = fs.p();
    let d = fs.defect_group();
    for (s_sub, chi) in &t.entries {
        let ip = fs.inertia(s_sub);
        let us: Vec<u32> = match range {
            Range::Representatives => {
                let nd = d.normalizer(s_sub);
                let mut reps: Vec<u32> = Vec::new();
                let mut seen = BTreeSet::new();
                for &u in nd.elems() {
                    if seen.contains(&u) {
                        continue;
                    }
                    reps.push(u);
                    for &x in ip.intersect(&nd).elems() {
                        seen.insert(amb.conj(x, u));
                    }
                }
                reps
            }
            Range::Full => d.normalizer(s_sub).elems().to_vec(),
        };
        for u in us {
            let r = s_sub.join_elem(u);
            let cu = ip.centralizer_of(&[u]);
            let eps = orbit_sum(&fs.pair(&r).idempotent(), &cu, &cu)?;
            let dropped = diagonal && !is_twisted_diagonal(&r);
            let rhs = if dropped {
                ClassFunction::zero(&cu)
            } else {
                let h = cu.intersect(&fs.inertia(&r));
                t.entries[&r].restrict(&h)?.induce(&cu)?
            };
            for s in p_regular_points(&cu, p, range) {
                let lhs = eval_shifted(chi, amb.mul(u, s), &eps)?;
                if let Err(w) = tally.compare("C3", s_sub, g, &[u, s], &lhs, rhs.at(s)) {
                    return Ok(Err(w));
                }
            }
        }
    }
    Ok(Ok(tally.count))
}

/// Condition (C3) on a subgroup tuple.
pub fn check_c3(t: &SubgroupTuple, range: Range) -> Result<Verdict> {
    c3_core(t, range, false)
}

/// `ψ_{(P,e)}(usf) = ψ_{(P⟨u⟩,f)}(s)` for `ψ_{(P,e)} = Res_{C_G(P)} χ_{(P,e)}`.
pub fn check_centralizer_restriction(t: &PairTuple) -> Result<Verdict> {
    let mut tally = Tally::new();
    let g = t.block.group();
    let amb = g.amb().clone();
    let p = t.block.p();
    for pe in t.indices(Range::Representatives) {
        let c = pe.centralizer().clone();
        let psi = t.entries[&pe].restrict(&c)?;
        for u in p_element_points(&c, p, Range::Representatives) {
            let r = pe.sub().join_elem(u);
            for f in blocks_of_centralizer(g, &r, p) {
                let cr = f.centralizer().clone();
                let rhs = match t.entry(&f) {
                    Some(th) => th.restrict(&cr)?,
                    None => ClassFunction::zero(&cr),
                };
                let fe = f.idempotent();
                for s in p_regular_points(&cr, p, Range::Representatives) {
                    let lhs = eval_shifted(&psi, amb.mul(u, s), &fe)?;
                    if let Err(w) = tally.compare("centralizer", &(&pe, &f), g, &[u, s], &lhs, rhs.at(s)) {
                        return Ok(Err(w));
                    }
                }
            }
        }
    }
    Ok(Ok(tally.count))
}

/// `α = ρ∘β` for the permutation module on `G/K`.
pub fn alpha_perm_module(b: &Block, k: &Subgroup) -> Result<PairTuple> {
    rho(&beta_perm_module(b.group(), b.p(), k), b)
}

/// `δ = π∘α` for the permutation module on `G/K`.
pub fn delta_perm_module(b: &Block, k: &Subgroup, fusion: &Arc<FusionSystem>) -> Result<SubgroupTuple> {
    pi_projection(&alpha_perm_module(b, k)?, fusion)
}

/// The block `A ⊗ B*` of `G × H`.
pub fn product_block(a: &Block, b: &Block) -> Result<Block> {
    let gh = crate::perm::product_subgroup(a.group(), b.group());
    let e = crate::blocks::tensor_dual(&a.idempotent(), &b.idempotent(), &gh);
    Ok(crate::blocks::block_of_idempotent(&gh, a.p(), &e)?)
}

/// A tuple for `A ⊗ B*` in one of the three indexings.
#[derive(Clone, Debug)]
pub enum DiagonalTuple {
    Global(GlobalTuple, Block),
    Pairs(PairTuple),
    Subgroups(SubgroupTuple),
}

fn vanishing<'a, K: std::fmt::Debug + 'a>(
    items: impl Iterator<Item = (&'a K, &'a Subgroup, &'a ClassFunction)>,
) -> Verdict {
    let mut n = 0;
    for (k, r, chi) in items {
        n += 1;
        if !is_twisted_diagonal(r) && !chi.is_zero() {
            return Err(Witness {
                condition: "twisted diagonal".into(),
                index: format!("{k:?}"),
                elements: vec![],
                perms: vec![],
                lhs: format!("{:?}", chi.values().iter().map(|v| v.pretty()).collect::<Vec<_>>()),
                rhs: "0".into(),
            });
        }
    }
    Ok(n)
}

/// Coherence plus vanishing off twisted diagonal subgroups.
pub fn check_diagonal(t: &DiagonalTuple, range: Range) -> Result<Verdict> {
    let group = match t {
        DiagonalTuple::Global(g, _) => g.group.clone(),
        DiagonalTuple::Pairs(x) => x.block.group().clone(),
        DiagonalTuple::Subgroups(x) => x.fusion.group().clone(),
    };
    if !group.amb().is_product() {
        return Err(TupleError::NotProduct(format!("{group:?}")));
    }
    Ok(match t {
        DiagonalTuple::Global(g, b) => {
            let v = vanishing(g.entries.iter().map(|(k, chi)| (k, k, chi)));
            let v = v.and_then(|n| g.lattice(Some(b)).map(|m| n + m));
            v.and_then(|n| check_beta(g, range).map(|m| n + m))
        }
        DiagonalTuple::Pairs(x) => match vanishing(x.entries.iter().map(|(k, chi)| (k, k.sub(), chi))) {
            Err(w) => Err(w),
            Ok(n) => check_c1(x, range)?.map(|m| n + m),
        },
        DiagonalTuple::Subgroups(x) => match vanishing(x.entries.iter().map(|(k, chi)| (k, k, chi))) {
            Err(w) => Err(w),
            Ok(n) => c3_core(x, range, true)?.map(|m| n + m),
        },
    })
}
