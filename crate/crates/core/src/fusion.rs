//! Block fusion systems and the product and isomorphism tests built on them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::blocks::{belongs_to, defect_pairs, unique_subpair, Block, BlockError, BrauerPair};
use crate::perm::{direct_product, p1, p2, product_subgroup, PermGroup, Subgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FusionError {
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("pair does not belong to the block")]
    NotABlockPair,
    #[error("{0} is not a subgroup of the defect group")]
    NotInDefect(String),
}

/// A map between subgroups stored on every element of the source.
pub type Map = BTreeMap<u32, u32>;

type HomCache = HashMap<(Subgroup, Subgroup), Arc<Vec<FMorphism>>>;

/// `c_g : P → Q` with a witness `g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FMorphism {
    pub source: Subgroup,
    pub target: Subgroup,
    pub map: Map,
    pub witness: u32,
}

impl FMorphism {
    pub fn is_iso(&self) -> bool {
        self.source.order() == self.target.order()
    }
    pub fn image(&self) -> Subgroup {
        self.target.amb().subgroup(self.map.values().copied().collect())
    }
}

/// `F_{(D,e_D)}(G,B)` with the family `(P, e_P)` of subpairs.
pub struct FusionSystem {
    block: Block,
    max: BrauerPair,
    pairs: BTreeMap<Subgroup, BrauerPair>,
    homs: Mutex<HomCache>,
}

impl std::fmt::Debug for FusionSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F over {:?} for {:?}", self.max.sub(), self.block)
    }
}

impl FusionSystem {
    /// The fusion system of the canonical maximal pair of `b`.
    pub fn of_block(b: &Block) -> Arc<FusionSystem> {
        let key = format!("fusion{}:{:?}", b.p(), b.irr());
        b.group().memo(&key, || {
            let d = defect_pairs(b);
            FusionSystem {
                block: b.clone(),
                max: d.max.clone(),
                pairs: d.subpairs.clone(),
                homs: Mutex::default(),
            }
        })
    }

    /// The fusion system attached to an explicit maximal pair.
    pub fn new(b: &Block, max: BrauerPair) -> Result<FusionSystem, FusionError> {
        if !belongs_to(&max, b) {
            return Err(FusionError::NotABlockPair);
        }
        let mut pairs = BTreeMap::new();
        for q in max.sub().p_group_subgroups(b.p()) {
            let sp = unique_subpair(&max, &q)?;
            pairs.insert(q, sp);
        }
        Ok(FusionSystem {
            block: b.clone(),
            max,
            pairs,
            homs: Mutex::default(),
        })
    }

    pub fn block(&self) -> &Block {
        &self.block
    }
    pub fn group(&self) -> &Subgroup {
        self.block.group()
    }
    pub fn p(&self) -> u64 {
        self.block.p()
    }
    pub fn defect_group(&self) -> &Subgroup {
        self.max.sub()
    }
    pub fn max_pair(&self) -> &BrauerPair {
        &self.max
    }
    /// Subgroups of `D`.
    pub fn subgroups(&self) -> impl Iterator<Item = &Subgroup> {
        self.pairs.keys()
    }
    /// `(P, e_P)`.
    pub fn pair(&self, p: &Subgroup) -> &BrauerPair {
        self.pairs
            .get(p)
            .unwrap_or_else(|| panic!("{p:?} is not a subgroup of the defect group"))
    }
    /// `I_P = N_G(P, e_P)`.
    pub fn inertia(&self, p: &Subgroup) -> Subgroup {
        self.pair(p).normalizer()
    }

    /// All `g ∈ G` with `^g(P, e_P) ≤ (Q, e_Q)`.
    pub fn transporter(&self, p: &Subgroup, q: &Subgroup) -> Vec<u32> {
        let g = self.group();
        let pe = self.pair(p);
        let ip = pe.normalizer();
        let mut out = Vec::new();
        for x in g.transversal(&ip) {
            let c = p.conjugate(x);
            if !c.is_subgroup_of(q) {
                continue;
            }
            if pe.conjugate(x) == *self.pair(&c) {
                out.extend(ip.elems().iter().map(|&i| g.amb().mul(x, i)));
            }
        }
        out
    }

    /// `Hom_F(P, Q)`, deduplicated as maps.
    pub fn hom_set(&self, p: &Subgroup, q: &Subgroup) -> Arc<Vec<FMorphism>> {
        let key = (p.clone(), q.clone());
        if let Some(h) = self.homs.lock().unwrap().get(&key) {
            return h.clone();
        }
        let amb = self.group().amb().clone();
        let mut seen: BTreeMap<Map, u32> = BTreeMap::new();
        for g in self.transporter(p, q) {
            let m: Map = p.elems().iter().map(|&x| (x, amb.conj(g, x))).collect();
            seen.entry(m).or_insert(g);
        }
        let v: Vec<FMorphism> = seen
            .into_iter()
            .map(|(map, witness)| FMorphism {
                source: p.clone(),
                target: q.clone(),
                map,
                witness,
            })
            .collect();
        let v = Arc::new(v);
        self.homs.lock().unwrap().insert(key, v.clone());
        v
    }

    pub fn aut(&self, p: &Subgroup) -> Arc<Vec<FMorphism>> {
        self.hom_set(p, p)
    }

    pub fn contains(&self, p: &Subgroup, q: &Subgroup, m: &Map) -> bool {
        self.hom_set(p, q).iter().any(|f| &f.map == m)
    }

    /// `φ` is an `F`-isomorphism.
    pub fn is_iso(&self, p: &Subgroup, q: &Subgroup, m: &Map) -> bool {
        p.order() == q.order() && self.contains(p, q, m)
    }

    /// A witness `g` with `c_g : ⟨x⟩ → ⟨y⟩` an `F`-isomorphism sending `x` to `y`.
    pub fn conjugate_elements(&self, x: u32, y: u32) -> Option<u32> {
        let amb = self.group().amb();
        let (cx, cy) = (amb.generate(&[x]), amb.generate(&[y]));
        if !self.pairs.contains_key(&cx) || !self.pairs.contains_key(&cy) || cx.order() != cy.order() {
            return None;
        }
        self.hom_set(&cx, &cy)
            .iter()
            .find(|f| f.map[&x] == y)
            .map(|f| f.witness)
    }

    /// All `F`-isomorphisms out of `P`.
    pub fn isos_from(&self, p: &Subgroup) -> Vec<FMorphism> {
        let targets: Vec<Subgroup> = self.pairs.keys().filter(|q| q.order() == p.order()).cloned().collect();
        targets
            .iter()
            .flat_map(|q| self.hom_set(p, q).iter().cloned().collect::<Vec<_>>())
            .collect()
    }

    /// The `F`-isomorphism class of `P`.
    pub fn iso_class(&self, p: &Subgroup) -> Vec<Subgroup> {
        let s: BTreeSet<Subgroup> = self.isos_from(p).into_iter().map(|f| f.target).collect();
        s.into_iter().collect()
    }

    pub fn fully_normalized(&self, p: &Subgroup) -> bool {
        let d = self.defect_group();
        let n = d.normalizer(p).order();
        self.iso_class(p).iter().all(|q| d.normalizer(q).order() <= n)
    }

    pub fn fully_centralized(&self, p: &Subgroup) -> bool {
        let d = self.defect_group();
        let n = d.centralizer(p).order();
        self.iso_class(p).iter().all(|q| d.centralizer(q).order() <= n)
    }

    /// `C_D(Q) ≤ Q` for every `Q` that is `F`-isomorphic to `P`.
    pub fn is_centric(&self, p: &Subgroup) -> bool {
        let d = self.defect_group();
        self.iso_class(p).iter().all(|q| d.centralizer(q).is_subgroup_of(q))
    }

    /// `|Out_F(P)|`.
    pub fn out_order(&self, p: &Subgroup) -> usize {
        out_group(&self.aut(p), p).len()
    }

    /// Proper, fully normalized, centric, and `Out_F(P)` has a strongly `p`-embedded subgroup.
    pub fn is_essential(&self, p: &Subgroup) -> bool {
        if p == self.defect_group() || !self.fully_normalized(p) || !self.is_centric(p) {
            return false;
        }
        has_strongly_embedded(&out_group(&self.aut(p), p), self.p())
    }

    /// Morphisms `Q → R` of `N_F(P)` for `Q, R ≤ N_D(P)`.
    pub fn normalizer_hom_set(&self, p: &Subgroup, q: &Subgroup, r: &Subgroup) -> BTreeSet<Map> {
        let (pq, pr) = (p.join(q), p.join(r));
        let mut out = BTreeSet::new();
        for f in self.hom_set(&pq, &pr).iter() {
            if p.elems().iter().all(|x| p.contains(f.map[x])) && q.elems().iter().all(|x| r.contains(f.map[x])) {
                out.insert(q.elems().iter().map(|&x| (x, f.map[&x])).collect());
            }
        }
        out
    }
}

/// Cosets of `Inn(P)` in a set of automorphisms, as a closed multiplication table.
struct OutGroup {
    /// `mul[a][b]` is the class of `a ∘ b`; class 0 is the identity.
    mul: Vec<Vec<usize>>,
}

impl OutGroup {
    fn len(&self) -> usize {
        self.mul.len()
    }
    fn order_of(&self, a: usize) -> usize {
        let mut k = 1;
        let mut x = a;
        while x != 0 {
            x = self.mul[x][a];
            k += 1;
        }
        k
    }
}

fn out_group(aut: &[FMorphism], p: &Subgroup) -> OutGroup {
    let elems = p.elems();
    let pos: HashMap<u32, usize> = elems.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let amb = p.amb();
    let inn: Vec<Vec<usize>> = elems
        .iter()
        .map(|&x| elems.iter().map(|&y| pos[&amb.conj(x, y)]).collect())
        .collect();
    let compose = |a: &[usize], b: &[usize]| -> Vec<usize> { b.iter().map(|&i| a[i]).collect() };
    let canon = |a: &[usize]| -> Vec<usize> { inn.iter().map(|c| compose(a, c)).min().unwrap() };
    let mut reps: Vec<Vec<usize>> = vec![canon(&(0..elems.len()).collect::<Vec<_>>())];
    for f in aut {
        let a: Vec<usize> = elems.iter().map(|x| pos[&f.map[x]]).collect();
        let c = canon(&a);
        if !reps.contains(&c) {
            reps.push(c);
        }
    }
    let index: HashMap<&Vec<usize>, usize> = reps.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let mul = reps
        .iter()
        .map(|a| reps.iter().map(|b| index[&canon(&compose(a, b))]).collect())
        .collect();
    OutGroup { mul }
}

/// Subgroups of order `p` form a disconnected commuting graph (and there is at least one).
fn has_strongly_embedded(g: &OutGroup, p: u64) -> bool {
    let p = p as usize;
    let mut subs: Vec<Vec<usize>> = Vec::new();
    for a in 1..g.len() {
        if g.order_of(a) != p {
            continue;
        }
        let mut s = vec![0, a];
        let mut x = a;
        for _ in 2..p {
            x = g.mul[x][a];
            s.push(x);
        }
        s.sort();
        if !subs.contains(&s) {
            subs.push(s);
        }
    }
    if subs.is_empty() {
        return false;
    }
    let commute = |a: usize, b: usize| g.mul[a][b] == g.mul[b][a];
    let mut seen = vec![false; subs.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..subs.len() {
            if !seen[j] && commute(subs[i][1], subs[j][1]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().any(|s| !s)
}

/// `F₁ × F₂` over `D × E`.
pub struct ProductFusion {
    pub left: Arc<FusionSystem>,
    pub right: Arc<FusionSystem>,
    amb: Arc<PermGroup>,
}

impl ProductFusion {
    pub fn new(left: Arc<FusionSystem>, right: Arc<FusionSystem>) -> Self {
        let amb = direct_product(left.group().amb(), right.group().amb());
        ProductFusion { left, right, amb }
    }
    pub fn ambient(&self) -> &Arc<PermGroup> {
        &self.amb
    }
    pub fn defect_group(&self) -> Subgroup {
        product_subgroup(self.left.defect_group(), self.right.defect_group())
    }

    /// `Hom_{F₁×F₂}(U, V)` as the restrictions `(ψ₁, ψ₂)|_U` landing in `V`.
    pub fn hom_set(&self, u: &Subgroup, v: &Subgroup) -> BTreeSet<Map> {
        let (u1, u2) = (p1(u), p2(u));
        let (v1, v2) = (p1(v), p2(v));
        let mut out = BTreeSet::new();
        let a = self.left.hom_set(&u1, &v1);
        let b = self.right.hom_set(&u2, &v2);
        for f in a.iter() {
            for g in b.iter() {
                let m: Option<Map> = u
                    .elems()
                    .iter()
                    .map(|&z| {
                        let (x, y) = self.amb.split(z);
                        let w = self.amb.pair(f.map[&x], g.map[&y]);
                        v.contains(w).then_some((z, w))
                    })
                    .collect();
                if let Some(m) = m {
                    out.insert(m);
                }
            }
        }
        out
    }

    pub fn contains(&self, u: &Subgroup, v: &Subgroup, m: &Map) -> bool {
        self.hom_set(u, v).contains(m)
    }

    /// `F₁ × F₂`-isomorphic images of `U`.
    pub fn iso_class(&self, u: &Subgroup) -> Vec<Subgroup> {
        let mut out = BTreeSet::new();
        for f in self.left.isos_from(&p1(u)) {
            for g in self.right.isos_from(&p2(u)) {
                let img: Vec<u32> = u
                    .elems()
                    .iter()
                    .map(|&z| {
                        let (x, y) = self.amb.split(z);
                        self.amb.pair(f.map[&x], g.map[&y])
                    })
                    .collect();
                out.insert(self.amb.subgroup(img));
            }
        }
        out.into_iter().collect()
    }

    pub fn fully_normalized(&self, u: &Subgroup) -> bool {
        let de = self.defect_group();
        let n = de.normalizer(u).order();
        self.iso_class(u).iter().all(|v| de.normalizer(v).order() <= n)
    }
}

/// `φ : E → D` given on every element of `E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupIso {
    pub source: Subgroup,
    pub target: Subgroup,
    pub map: Map,
}

impl GroupIso {
    /// Extends generator images `(y, φ(y))`.
    pub fn from_images(source: &Subgroup, target: &Subgroup, images: &[(u32, u32)]) -> Result<GroupIso, String> {
        let m = crate::perm::extend_hom(source, target.amb(), images).map_err(|e| e.to_string())?;
        let map: Map = m.into_iter().collect();
        let img: BTreeSet<u32> = map.values().copied().collect();
        if img.len() != source.order() || img.len() != target.order() || !img.iter().all(|&x| target.contains(x)) {
            return Err("not a bijection onto the target".into());
        }
        Ok(GroupIso {
            source: source.clone(),
            target: target.clone(),
            map,
        })
    }
    pub fn identity(s: &Subgroup) -> GroupIso {
        GroupIso {
            source: s.clone(),
            target: s.clone(),
            map: s.elems().iter().map(|&x| (x, x)).collect(),
        }
    }
    pub fn apply(&self, x: u32) -> u32 {
        self.map[&x]
    }
    pub fn image(&self, q: &Subgroup) -> Subgroup {
        self.target
            .amb()
            .subgroup(q.elems().iter().map(|&x| self.map[&x]).collect())
    }
    pub fn inverse(&self) -> GroupIso {
        GroupIso {
            source: self.target.clone(),
            target: self.source.clone(),
            map: self.map.iter().map(|(&a, &b)| (b, a)).collect(),
        }
    }
    /// `Δ(φ(Q), φ, Q) ≤ G × H`.
    pub fn twisted_diagonal(&self, q: &Subgroup) -> Subgroup {
        let gh = direct_product(self.target.amb(), self.source.amb());
        gh.subgroup(q.elems().iter().map(|&y| gh.pair(self.map[&y], y)).collect())
    }
    /// Generator images on `Q`.
    pub fn images_on(&self, q: &Subgroup) -> Vec<(u32, u32)> {
        q.gens().iter().map(|&y| (y, self.map[&y])).collect()
    }
}

/// A hom-set pair `(P, Q)` of `E` at which `φ` fails to transport fusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionMismatch {
    pub p: Subgroup,
    pub q: Subgroup,
}

/// `Hom_A(φP, φQ) = φ ∘ Hom_B(P, Q) ∘ φ⁻¹` for all `P, Q ≤ E`.
pub fn phi_is_fusion_isomorphism(phi: &GroupIso, fa: &FusionSystem, fb: &FusionSystem) -> Result<(), FusionMismatch> {
    let e: Vec<Subgroup> = fb.subgroups().cloned().collect();
    for p in &e {
        for q in &e {
            let (pp, qq) = (phi.image(p), phi.image(q));
            let lhs: BTreeSet<Map> = fa.hom_set(&pp, &qq).iter().map(|f| f.map.clone()).collect();
            let rhs: BTreeSet<Map> = fb
                .hom_set(p, q)
                .iter()
                .map(|f| f.map.iter().map(|(&y, &z)| (phi.apply(y), phi.apply(z))).collect())
                .collect();
            if lhs != rhs {
                return Err(FusionMismatch {
                    p: p.clone(),
                    q: q.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Normalizer sizes certifying that `Δ(φQ, φ, Q)` is fully normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistedCertificate {
    pub normalizer_order: usize,
    pub n_e_q: usize,
    pub c_d_p: usize,
    pub class_size: usize,
    pub max_in_class: usize,
}

impl TwistedCertificate {
    pub fn holds(&self) -> bool {
        self.normalizer_order == self.n_e_q * self.c_d_p && self.normalizer_order == self.max_in_class
    }
}

pub fn twisted_diag_fully_normalized(
    fa: &Arc<FusionSystem>,
    fb: &Arc<FusionSystem>,
    phi: &GroupIso,
    q: &Subgroup,
) -> TwistedCertificate {
    let prod = ProductFusion::new(fa.clone(), fb.clone());
    let delta = phi.twisted_diagonal(q);
    let de = prod.defect_group();
    let p = phi.image(q);
    let class = prod.iso_class(&delta);
    TwistedCertificate {
        normalizer_order: de.normalizer(&delta).order(),
        n_e_q: fb.defect_group().normalizer(q).order(),
        c_d_p: fa.defect_group().centralizer(&p).order(),
        class_size: class.len(),
        max_in_class: class.iter().map(|v| de.normalizer(v).order()).max().unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{block_of_idempotent, block_partition, pair_join};
    use crate::perm::named::*;
    use crate::perm::Perm;

    fn el(g: &Arc<PermGroup>, cycles: &[&[usize]]) -> u32 {
        g.index_of(&Perm::from_cycles(g.degree(), cycles).unwrap()).unwrap()
    }

    fn principal(g: &Arc<PermGroup>, p: u64) -> Arc<FusionSystem> {
        FusionSystem::of_block(&block_partition(&g.full(), p)[0])
    }

    #[test]
    fn essential_subgroups() {
        let g = s4();
        let f = principal(&g, 2);
        let ess: Vec<&Subgroup> = f.subgroups().filter(|q| f.is_essential(q)).collect();
        assert_eq!(ess.len(), 1);
        let v = g.generate(&[el(&g, &[&[1, 2], &[3, 4]]), el(&g, &[&[1, 3], &[2, 4]])]);
        assert_eq!(ess[0], &v);
        assert_eq!(f.out_order(&v), 6);
        for g in [a4(), d8(), s3(), q8()] {
            let f = principal(&g, 2);
            assert!(f.subgroups().all(|q| !f.is_essential(q)), "{g:?}");
        }
        let g = a4();
        let f = principal(&g, 2);
        assert_eq!(f.out_order(f.defect_group()), 3);
        assert!(f.is_centric(f.defect_group()));
        assert!(!f.is_centric(&g.trivial()));
    }

    fn corpus_systems() -> Vec<(String, Arc<FusionSystem>)> {
        let mut out = Vec::new();
        for name in ["S3", "C4", "C6", "V4", "Q8", "D8", "A4", "S4"] {
            let g = by_name(name).unwrap();
            for p in [2, 3] {
                for b in block_partition(&g.full(), p).iter() {
                    out.push((format!("{name}/{p}/{:?}", b.irr()), FusionSystem::of_block(b)));
                }
            }
        }
        out
    }

    #[test]
    fn principal_fusion_is_group_fusion() {
        let g = s4();
        let f = principal(&g, 2);
        let full = g.full();
        let subs: Vec<Subgroup> = f.subgroups().cloned().collect();
        for p in &subs {
            for q in &subs {
                let by_group: BTreeSet<Map> = full
                    .elems()
                    .iter()
                    .filter(|&&x| p.conjugate(x).is_subgroup_of(q))
                    .map(|&x| p.elems().iter().map(|&y| (y, g.conj(x, y))).collect())
                    .collect();
                let by_pairs: BTreeSet<Map> = f.hom_set(p, q).iter().map(|m| m.map.clone()).collect();
                assert_eq!(by_group, by_pairs);
            }
        }
    }

    #[test]
    fn inner_automorphisms_present() {
        for (name, f) in corpus_systems() {
            let g = f.group().amb().clone();
            for p in f.subgroups() {
                for &x in p.elems() {
                    let m: Map = p.elems().iter().map(|&y| (y, g.conj(x, y))).collect();
                    assert!(f.contains(p, p, &m), "{name}");
                }
                let id: Map = p.elems().iter().map(|&y| (y, y)).collect();
                assert!(f.is_iso(p, p, &id));
            }
        }
    }

    #[test]
    fn a4_automizer() {
        let g = a4();
        let f = principal(&g, 2);
        let d = f.defect_group().clone();
        assert_eq!(d.order(), 4);
        assert_eq!(f.aut(&d).len(), 3);
    }

    #[test]
    fn s3_elements_fuse() {
        let g = s3();
        let f = principal(&g, 3);
        let x = el(&g, &[&[1, 2, 3]]);
        let w = f.conjugate_elements(x, g.inv(x)).unwrap();
        assert_eq!(g.conj(w, x), g.inv(x));
        assert_eq!(g.elem_order(w), 2);
    }

    #[test]
    fn full_normalization_in_d8() {
        let g = s4();
        let f = principal(&g, 2);
        let d = f.defect_group().clone();
        assert!(f.fully_normalized(&d));
        let z = d.centralizer(&d);
        assert!(f.fully_normalized(&z));
        let dt = d
            .elems()
            .iter()
            .copied()
            .find(|&x| g.elem_order(x) == 2 && !z.contains(x) && g.elem(x).cycles().len() == 2)
            .unwrap();
        let c = g.generate(&[dt]);
        assert!(!f.fully_normalized(&c));
        let t = d
            .elems()
            .iter()
            .copied()
            .find(|&x| g.elem(x).cycles().len() == 1 && g.elem_order(x) == 2)
            .unwrap();
        assert!(f.fully_normalized(&g.generate(&[t])));
        let a = principal(&a4(), 2);
        for q in a.subgroups() {
            assert!(a.fully_normalized(q));
        }
    }

    #[test]
    fn saturation_consequences() {
        for (name, f) in corpus_systems() {
            let subs: Vec<Subgroup> = f.subgroups().cloned().collect();
            for p in &subs {
                assert!(f.iso_class(p).iter().any(|q| f.fully_normalized(q)), "{name}");
                if f.fully_normalized(p) {
                    assert!(f.fully_centralized(p), "{name}");
                }
            }
        }
    }

    #[test]
    fn composition_closure() {
        let g = s4();
        let f = principal(&g, 2);
        let subs: Vec<Subgroup> = f.subgroups().cloned().collect();
        for p in &subs {
            for q in &subs {
                let a = f.hom_set(p, q);
                if a.is_empty() {
                    continue;
                }
                for r in &subs {
                    for x in a.iter() {
                        for y in f.hom_set(q, r).iter() {
                            let m: Map = x.map.iter().map(|(&k, v)| (k, y.map[v])).collect();
                            assert!(f.contains(p, r, &m));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dual_block_same_fusion() {
        for (name, f) in corpus_systems() {
            let b = f.block().dual();
            let fd = FusionSystem::new(&b, f.max_pair().dual()).unwrap();
            let subs: Vec<Subgroup> = f.subgroups().cloned().collect();
            for p in &subs {
                for q in &subs {
                    let a: BTreeSet<Map> = f.hom_set(p, q).iter().map(|m| m.map.clone()).collect();
                    let b: BTreeSet<Map> = fd.hom_set(p, q).iter().map(|m| m.map.clone()).collect();
                    assert_eq!(a, b, "{name}");
                }
            }
        }
    }

    #[test]
    fn normalizer_subsystems() {
        for (name, f) in corpus_systems() {
            let p_ = f.p();
            let d = f.defect_group().clone();
            let subs: Vec<Subgroup> = f.subgroups().cloned().collect();
            for p in subs.iter().filter(|p| f.fully_normalized(p)) {
                let ip = f.inertia(p);
                let ep = block_of_idempotent(&ip, p_, &f.pair(p).idempotent().with_group(&ip)).unwrap();
                let nd = d.normalizer(p);
                let top = f.pair(&nd).reparent(&ip).unwrap();
                let local = FusionSystem::new(&ep, top).unwrap();
                let inner: Vec<Subgroup> = nd.p_group_subgroups(p_);
                for q in &inner {
                    for r in &inner {
                        let a = f.normalizer_hom_set(p, q, r);
                        let b: BTreeSet<Map> = local.hom_set(q, r).iter().map(|m| m.map.clone()).collect();
                        assert_eq!(a, b, "{name} {p:?} {q:?} {r:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn product_fusion_matches_tensor_block() {
        let g = s3();
        let full = g.full();
        let b = &block_partition(&full, 3)[0];
        let fa = FusionSystem::of_block(b);
        let fb = Arc::new(FusionSystem::new(&b.dual(), fa.max_pair().dual()).unwrap());
        let prod = ProductFusion::new(fa.clone(), fb.clone());
        let x = prod.ambient().full();
        let d = fa.max_pair();
        let de = prod.defect_group();
        let joint = pair_join(d, d, &de).unwrap();
        let blk = block_partition(&x, 3)
            .iter()
            .find(|c| belongs_to(&joint, c))
            .unwrap()
            .clone();
        let ft = FusionSystem::new(&blk, joint).unwrap();
        let subs: Vec<Subgroup> = ft.subgroups().cloned().collect();
        assert_eq!(subs.len(), 6);
        for u in &subs {
            for v in &subs {
                let a: BTreeSet<Map> = ft.hom_set(u, v).iter().map(|m| m.map.clone()).collect();
                assert_eq!(a, prod.hom_set(u, v));
            }
        }
        let q = d.sub().clone();
        let phi = GroupIso::identity(&q);
        let delta = phi.twisted_diagonal(&q);
        let w = el(&g, &[&[1, 2]]);
        let m: Map = delta
            .elems()
            .iter()
            .map(|&z| (z, prod.ambient().conj(prod.ambient().pair(w, w), z)))
            .collect();
        assert!(prod.contains(&delta, &delta, &m));
    }

    #[test]
    fn phi_isomorphisms() {
        let s = s3();
        let f = principal(&s, 3);
        let d = f.defect_group().clone();
        assert!(phi_is_fusion_isomorphism(&GroupIso::identity(&d), &f, &f).is_ok());
        let g = s4();
        let f = principal(&g, 2);
        let d = f.defect_group().clone();
        let r = d.elems().iter().copied().find(|&x| g.elem_order(x) == 4).unwrap();
        let refl = |pred: usize| {
            d.elems()
                .iter()
                .copied()
                .find(|&x| g.elem_order(x) == 2 && g.elem(x).cycles().len() == pred)
                .unwrap()
        };
        let (t, dt) = (
            refl(1),
            d.elems()
                .iter()
                .copied()
                .find(|&x| g.elem_order(x) == 2 && g.elem(x).cycles().len() == 2 && g.mul(r, r) != x)
                .unwrap(),
        );
        let outer = GroupIso::from_images(&d, &d, &[(r, r), (t, dt)]).unwrap();
        let err = phi_is_fusion_isomorphism(&outer, &f, &f).unwrap_err();
        assert_eq!(err.p.order(), 2);
        let s3f = FusionSystem::of_block(&block_partition(&s.full(), 2)[1]);
        let c3 = cyclic(3);
        let c3f = principal(&c3, 2);
        let triv = GroupIso::identity(&c3.trivial());
        let to_s3 = GroupIso {
            source: c3.trivial(),
            target: s.trivial(),
            map: triv.map.clone(),
        };
        assert!(s3f.defect_group().is_trivial() && c3f.defect_group().is_trivial());
        assert!(phi_is_fusion_isomorphism(&to_s3, &s3f, &c3f).is_ok());
    }

    #[test]
    fn twisted_diagonals_fully_normalized() {
        let g = s3();
        let f = principal(&g, 3);
        let d = f.defect_group().clone();
        let phi = GroupIso::identity(&d);
        for q in [d.clone(), g.trivial()] {
            let c = twisted_diag_fully_normalized(&f, &f, &phi, &q);
            assert!(c.holds(), "{c:?}");
        }
        let c = twisted_diag_fully_normalized(&f, &f, &phi, &d);
        assert_eq!(c.normalizer_order, 9);
        let h = s4();
        let fh = principal(&h, 2);
        let dh = fh.defect_group().clone();
        let phi = GroupIso::identity(&dh);
        for q in fh.subgroups().filter(|q| fh.fully_normalized(q)) {
            assert!(twisted_diag_fully_normalized(&fh, &fh, &phi, q).holds());
        }
    }
}
