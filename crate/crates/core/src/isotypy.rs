//! Strong isotypies, isotypies and perfect isometries.
//!
//! A [`Setup`] fixes blocks `A` of `G` and `B` of `H`, their fusion systems on
//! maximal pairs `(D, e_D)` and `(E, f_E)`, and a fusion isomorphism
//! `φ : E → D`. A [`StrongIsotypy`] carries one class function on
//! `Y_Q = N_{G×H}(Δ(φQ,φ,Q), e_{φQ} ⊗ f_Q*)` per `Q ≤ E`, an [`Isotypy`] one
//! on `C_G(φQ) × C_H(Q)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::blocks::{
    block_of_idempotent, block_partition, blocks_of_centralizer, brauer_elements, orbit_sum, pair_join, tensor_dual,
    Block, BlockError, BrauerPair,
};
use crate::charfun::{contract, gen_decomp, outer_product, AlgebraElement, CharError, ClassFunction};
use crate::cyclo::{sum_all, Cyc, Q};
use crate::fusion::{phi_is_fusion_isomorphism, FusionSystem, GroupIso};
use crate::perm::{diagonal, k1, k2, opposite, p2, product_subgroup, star_product, PermError, Subgroup};
use crate::tuples::{check_diagonal, product_block, DiagonalTuple, Range, SubgroupTuple, TupleError, Verdict, Witness};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsotypyError {
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error(transparent)]
    Tuple(#[from] TupleError),
    #[error("malformed setup: {0}")]
    Setup(String),
    #[error("no entry at {0}")]
    Missing(String),
    #[error("entry at {index} lives on {found}, expected {expected}")]
    WrongGroup {
        index: String,
        found: String,
        expected: String,
    },
    #[error("precondition failed: {0}")]
    Rejected(String),
}

type Result<T> = std::result::Result<T, IsotypyError>;

fn witness(cond: &str, index: &dyn std::fmt::Debug, g: &Subgroup, els: &[u32], lhs: String, rhs: String) -> Witness {
    Witness {
        condition: cond.into(),
        index: format!("{index:?}"),
        elements: els.to_vec(),
        perms: els.iter().map(|&x| g.amb().elem(x).to_string()).collect(),
        lhs,
        rhs,
    }
}

/// First class where two class functions differ, or a group mismatch.
fn difference(cond: &str, index: &dyn std::fmt::Debug, a: &ClassFunction, b: &ClassFunction) -> Option<Witness> {
    if a.group() != b.group() {
        return Some(witness(
            cond,
            index,
            a.group(),
            &[],
            format!("on {:?}", a.group()),
            format!("on {:?}", b.group()),
        ));
    }
    let cl = a.classes();
    (0..cl.len()).find(|&i| a.values()[i] != b.values()[i]).map(|i| {
        witness(
            cond,
            index,
            a.group(),
            &[cl.reps[i]],
            a.values()[i].pretty(),
            b.values()[i].pretty(),
        )
    })
}

fn first_failure(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut n = 0;
    for v in verdicts {
        n += v?;
    }
    Ok(n)
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

fn q(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

/// Hypotheses shared by strong isotypies and isotypies between `A` and `B`.
pub struct Setup {
    fa: Arc<FusionSystem>,
    fb: Arc<FusionSystem>,
    phi: GroupIso,
    locals: Mutex<BTreeMap<Subgroup, (BrauerPair, Subgroup)>>,
    product: OnceLock<std::result::Result<Arc<FusionSystem>, IsotypyError>>,
}

impl std::fmt::Debug for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Setup({:?} -> {:?})", self.phi.source, self.phi.target)
    }
}

impl Setup {
    /// `φ : E → D` must be an isomorphism `F_B → F_A`.
    pub fn new(fa: Arc<FusionSystem>, fb: Arc<FusionSystem>, phi: GroupIso) -> Result<Arc<Setup>> {
        if phi.source != *fb.defect_group() || phi.target != *fa.defect_group() {
            return Err(IsotypyError::Setup(
                "φ must map the defect group of B onto that of A".into(),
            ));
        }
        if fa.p() != fb.p() {
            return Err(IsotypyError::Setup("blocks at different primes".into()));
        }
        phi_is_fusion_isomorphism(&phi, &fa, &fb)
            .map_err(|m| IsotypyError::Setup(format!("φ does not transport fusion at ({:?}, {:?})", m.p, m.q)))?;
        Ok(Arc::new(Setup {
            fa,
            fb,
            phi,
            locals: Mutex::new(BTreeMap::new()),
            product: OnceLock::new(),
        }))
    }

    /// `A = B`, `φ = id`, on the canonical maximal pair.
    pub fn identity(b: &Block) -> Arc<Setup> {
        let f = FusionSystem::of_block(b);
        let phi = GroupIso::identity(f.defect_group());
        Setup::new(f.clone(), f, phi).expect("the identity transports fusion")
    }

    pub fn fusion_a(&self) -> &Arc<FusionSystem> {
        &self.fa
    }
    pub fn fusion_b(&self) -> &Arc<FusionSystem> {
        &self.fb
    }
    pub fn phi(&self) -> &GroupIso {
        &self.phi
    }
    pub fn p(&self) -> u64 {
        self.fa.p()
    }
    /// Subgroups `Q ≤ E`.
    pub fn subgroups(&self) -> Vec<Subgroup> {
        self.fb.subgroups().cloned().collect()
    }
    /// `G × H`.
    pub fn product_group(&self) -> Subgroup {
        product_subgroup(self.fa.group(), self.fb.group())
    }

    fn local(&self, q: &Subgroup) -> Result<(BrauerPair, Subgroup)> {
        if let Some(x) = self.locals.lock().unwrap().get(q) {
            return Ok(x.clone());
        }
        let p = self.phi.image(q);
        let pair = pair_join(self.fa.pair(&p), self.fb.pair(q), &self.phi.twisted_diagonal(q))?;
        let y = pair.normalizer();
        self.locals.lock().unwrap().insert(q.clone(), (pair.clone(), y.clone()));
        Ok((pair, y))
    }

    /// `(Δ(φQ,φ,Q), e_{φQ} ⊗ f_Q*)`.
    pub fn pair(&self, q: &Subgroup) -> Result<BrauerPair> {
        Ok(self.local(q)?.0)
    }
    /// `Y_Q`.
    pub fn y(&self, q: &Subgroup) -> Result<Subgroup> {
        Ok(self.local(q)?.1)
    }
    /// `C_G(φQ) × C_H(Q)`.
    pub fn centralizer(&self, q: &Subgroup) -> Subgroup {
        product_subgroup(
            self.fa.pair(&self.phi.image(q)).centralizer(),
            self.fb.pair(q).centralizer(),
        )
    }

    /// `F_{(D×E, e_D⊗f_E*)}(G×H, A⊗B*)`.
    pub fn product_fusion(&self) -> Result<Arc<FusionSystem>> {
        self.product
            .get_or_init(|| {
                let ab = product_block(self.fa.block(), self.fb.block())?;
                let de = product_subgroup(self.fa.defect_group(), self.fb.defect_group());
                let max = pair_join(self.fa.max_pair(), self.fb.max_pair(), &de)?;
                let f = FusionSystem::new(&ab, max).map_err(|e| IsotypyError::Setup(e.to_string()))?;
                Ok(Arc::new(f))
            })
            .clone()
    }

    /// An `A`-morphism on `φ(Q₁)` equal to `φ c_h φ⁻¹` for an `F_B`-isomorphism with witness `h`.
    fn matching_witness(&self, beta: &crate::fusion::FMorphism) -> Result<u32> {
        let (p1, p2) = (self.phi.image(&beta.source), self.phi.image(&beta.target));
        let want: BTreeMap<u32, u32> = beta
            .map
            .iter()
            .map(|(&y, &z)| (self.phi.apply(y), self.phi.apply(z)))
            .collect();
        self.fa
            .hom_set(&p1, &p2)
            .iter()
            .find(|f| f.map == want)
            .map(|f| f.witness)
            .ok_or_else(|| IsotypyError::Setup(format!("no A-morphism matches φ c_h φ⁻¹ on {p1:?}")))
    }

    /// `u ∈ N_D(P)` and `u'` are conjugate by an `A`-isomorphism `P⟨u⟩ → P⟨u'⟩` fixing `P`.
    fn normalizer_conjugate(&self, p: &Subgroup, u: u32, u2: u32) -> bool {
        let (pu, pu2) = (p.join_elem(u), p.join_elem(u2));
        if pu.order() != pu2.order() {
            return false;
        }
        self.fa
            .hom_set(&pu, &pu2)
            .iter()
            .any(|f| f.map[&u] == u2 && p.elems().iter().all(|&x| f.map[&x] == x))
    }
}

/// `(h,g) ↦ χ(g⁻¹, h⁻¹)` on `Y°`.
pub fn flip_dual(chi: &ClassFunction) -> ClassFunction {
    let y = chi.group();
    let gh = y.amb().clone();
    let yo = opposite(y);
    let hg = yo.amb().clone();
    let (g, h) = gh.factors().expect("product ambient").clone();
    ClassFunction::from_fn(&yo, |z| {
        let (b, a) = hg.split(z);
        chi.at(gh.pair(g.inv(a), h.inv(b))).clone()
    })
}

/// `(χ ⊗̂ ψ)(g,k) = 1/|k₂(Y) ∩ k₁(Y')| · Σ_{h : (g,h) ∈ Y, (h,k) ∈ Y'} χ(g,h) ψ(h,k)` on `Y * Y'`.
pub fn extended_tensor(chi: &ClassFunction, psi: &ClassFunction) -> Result<ClassFunction> {
    let (x, y) = (chi.group(), psi.group());
    let xy = star_product(x, y)?;
    let l = k2(x).intersect(&k1(y));
    let (xa, ya, za) = (x.amb().clone(), y.amb().clone(), xy.amb().clone());
    let mids = p2(x);
    Ok(ClassFunction::from_fn(&xy, |z| {
        let (g, k) = za.split(z);
        let terms: Vec<Cyc> = mids
            .elems()
            .iter()
            .filter_map(|&h| {
                let (s, t) = (xa.pair(g, h), ya.pair(h, k));
                (x.contains(s) && y.contains(t)).then(|| chi.at(s) * psi.at(t))
            })
            .collect();
        sum_all(&terms).scale(&q(1, l.order() as i64))
    }))
}

/// Character of `K[C]e` as a module for `X ≤ G × G` acting by `x ↦ a x b⁻¹`.
pub fn bimodule_character(x: &Subgroup, c: &Subgroup, e: &AlgebraElement) -> ClassFunction {
    let amb = x.amb().clone();
    let g = c.amb().clone();
    ClassFunction::from_fn(x, |z| {
        let (a, b) = amb.split(z);
        let ai = g.inv(a);
        let terms: Vec<Cyc> = c
            .elems()
            .iter()
            .map(|&y| e.coeff(g.mul(g.mul(b, g.inv(y)), g.mul(ai, y))))
            .collect();
        sum_all(&terms)
    })
}

/// `[K C_G(P) e_P]` on `N_{G×G}(ΔP, e_P ⊗ e_P*)`.
pub fn char_of_block_algebra(pe: &BrauerPair) -> Result<ClassFunction> {
    let n = pair_join(pe, pe, &diagonal(pe.sub()))?.normalizer();
    Ok(bimodule_character(&n, pe.centralizer(), &pe.idempotent()))
}

/// Trace on `K[C₁]e₁ ⊗_{KL} K[C₂]e₂`, `L = k₂(X) ∩ k₁(Y)`, computed on the balanced
/// permutation basis `(C₁ × C₂)/L` with both idempotent cuts applied explicitly.
pub fn tensor_oracle(
    x: &Subgroup,
    (c1, e1): (&Subgroup, &AlgebraElement),
    y: &Subgroup,
    (c2, e2): (&Subgroup, &AlgebraElement),
) -> Result<ClassFunction> {
    let xy = star_product(x, y)?;
    let l = k2(x).intersect(&k1(y));
    let g = c1.amb().clone();
    let mut orbit: HashMap<(u32, u32), usize> = HashMap::new();
    let mut reps = Vec::new();
    for &a in c1.elems() {
        for &b in c2.elems() {
            if orbit.contains_key(&(a, b)) {
                continue;
            }
            let id = reps.len();
            reps.push((a, b));
            for &t in l.elems() {
                orbit.insert((g.mul(a, g.inv(t)), g.mul(t, b)), id);
            }
        }
    }
    let (xa, ya, za) = (x.amb().clone(), y.amb().clone(), xy.amb().clone());
    let mids = p2(x);
    let e1s: Vec<(u32, Cyc)> = e1.coeffs.iter().map(|(&k, v)| (k, v.clone())).collect();
    let e2s: Vec<(u32, Cyc)> = e2.coeffs.iter().map(|(&k, v)| (k, v.clone())).collect();
    let mut vals = Vec::new();
    for &z in &xy.classes().reps {
        let (a0, k) = za.split(z);
        let h = *mids
            .elems()
            .iter()
            .find(|&&h| x.contains(xa.pair(a0, h)) && y.contains(ya.pair(h, k)))
            .expect("star product element has a middle");
        let (hi, ki) = (g.inv(h), g.inv(k));
        let mut terms = Vec::new();
        for (id, &(a, b)) in reps.iter().enumerate() {
            for (c, ec) in &e1s {
                let left = g.mul(g.mul(a0, g.mul(a, *c)), hi);
                for (d, ed) in &e2s {
                    let right = g.mul(g.mul(h, g.mul(b, *d)), ki);
                    if orbit.get(&(left, right)) == Some(&id) {
                        terms.push(ec * ed);
                    }
                }
            }
        }
        vals.push(sum_all(&terms));
    }
    Ok(ClassFunction::new(&xy, vals))
}

/// Outcome of the extended-tensor validation gate.
#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub instances: usize,
    pub checks: usize,
    pub normalization: String,
    pub failure: Option<Witness>,
}

impl GateReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Blocks of small groups whose identity families feed the gate.
pub fn gate_blocks() -> Vec<Block> {
    let mut out = Vec::new();
    for name in ["S3", "C4", "C6", "V4", "Q8", "D8", "A4"] {
        let g = crate::perm::named::by_name(name).expect("named group");
        for p in [2, 3] {
            out.extend(block_partition(&g.full(), p).iter().cloned());
        }
    }
    out
}

fn run_gate(blocks: &[Block]) -> GateReport {
    let mut report = GateReport {
        instances: 0,
        checks: 0,
        normalization: "1/|k2(Y) ∩ k1(Y')|".into(),
        failure: None,
    };
    let mut run = || -> Result<()> {
        for b in blocks {
            let s = Setup::identity(b);
            let g = b.group().clone();
            report.instances += 1;
            for qq in s.subgroups() {
                let pe = s.fusion_a().pair(&qq).clone();
                let (c, e) = (pe.centralizer().clone(), (*pe.idempotent()).clone());
                let x = s.y(&qq)?;
                let xo = opposite(&x);
                let chi = bimodule_character(&x, &c, &e);
                let chio = flip_dual(&chi);
                let tag = format!("{b:?} Q={qq:?}");
                report.checks += 1;
                if let Some(w) = difference("gate: flipped dual", &tag, &chio, &bimodule_character(&xo, &c, &e)) {
                    report.failure = Some(w);
                    return Ok(());
                }
                for (l, r, m, n) in [(&chi, &chio, &x, &xo), (&chio, &chi, &xo, &x)] {
                    report.checks += 1;
                    let formula = extended_tensor(l, r)?;
                    let oracle = tensor_oracle(m, (&c, &e), n, (&c, &e))?;
                    if let Some(w) = difference("gate: module oracle", &tag, &formula, &oracle) {
                        report.failure = Some(w);
                        return Ok(());
                    }
                }
                if qq.is_trivial() {
                    let full = g.clone();
                    for nu in crate::charfun::character_table(&full).irr.iter() {
                        report.checks += 1;
                        let ext = extended_tensor(&chi, &outer_product(nu, &ClassFunction::trivial(&full)))?;
                        let con = contract(&chi, nu)?;
                        let amb = ext.group().amb().clone();
                        let lifted = ClassFunction::from_fn(ext.group(), |z| con.at(amb.split(z).0).clone());
                        if let Some(w) = difference("gate: full products", &tag, &ext, &lifted) {
                            report.failure = Some(w);
                            return Ok(());
                        }
                    }
                }
            }
        }
        Ok(())
    };
    if let Err(e) = run() {
        report.failure = Some(Witness {
            condition: "gate".into(),
            index: String::new(),
            elements: vec![],
            perms: vec![],
            lhs: e.to_string(),
            rhs: String::new(),
        });
    }
    report
}

/// The gate over [`gate_blocks`], computed once per process.
pub fn extended_tensor_gate() -> &'static GateReport {
    static GATE: OnceLock<GateReport> = OnceLock::new();
    GATE.get_or_init(|| run_gate(&gate_blocks()))
}

/// `χ_Q ∈ R_K(Y_Q/Δ(φQ,φ,Q), e_{φQ} ⊗ f_Q*)` for `Q ≤ E`.
#[derive(Clone, Debug)]
pub struct StrongIsotypy {
    setup: Arc<Setup>,
    entries: BTreeMap<Subgroup, ClassFunction>,
}

impl StrongIsotypy {
    pub fn new(setup: &Arc<Setup>, entries: BTreeMap<Subgroup, ClassFunction>) -> Result<Self> {
        for qq in setup.subgroups() {
            let chi = entries
                .get(&qq)
                .ok_or_else(|| IsotypyError::Missing(format!("{qq:?}")))?;
            let y = setup.y(&qq)?;
            if *chi.group() != y {
                return Err(IsotypyError::WrongGroup {
                    index: format!("{qq:?}"),
                    found: format!("{:?}", chi.group()),
                    expected: format!("{y:?}"),
                });
            }
        }
        if entries.len() != setup.subgroups().len() {
            return Err(IsotypyError::Rejected("entries outside the defect group".into()));
        }
        Ok(StrongIsotypy {
            setup: setup.clone(),
            entries,
        })
    }

    /// `χ_Q = [K C_G(Q) e_Q]` on `Y_Q` for `A = B`, `φ = id`.
    pub fn identity(b: &Block) -> Result<Self> {
        let s = Setup::identity(b);
        let mut entries = BTreeMap::new();
        for qq in s.subgroups() {
            let pe = s.fusion_a().pair(&qq);
            entries.insert(
                qq.clone(),
                bimodule_character(&s.y(&qq)?, pe.centralizer(), &pe.idempotent()),
            );
        }
        StrongIsotypy::new(&s, entries)
    }

    pub fn setup(&self) -> &Arc<Setup> {
        &self.setup
    }
    pub fn entries(&self) -> &BTreeMap<Subgroup, ClassFunction> {
        &self.entries
    }
    pub fn entry(&self, qq: &Subgroup) -> &ClassFunction {
        &self.entries[qq]
    }
    pub fn set(&mut self, qq: &Subgroup, chi: ClassFunction) -> Result<()> {
        let y = self.setup.y(qq)?;
        if *chi.group() != y {
            return Err(IsotypyError::WrongGroup {
                index: format!("{qq:?}"),
                found: format!("{:?}", chi.group()),
                expected: format!("{y:?}"),
            });
        }
        self.entries.insert(qq.clone(), chi);
        Ok(())
    }
}

/// Per-axiom verdicts of [`check_strong_isotypy`].
#[derive(Debug, Clone, Serialize)]
pub struct StrongReport {
    pub lattice: Verdict,
    pub axiom1: Verdict,
    pub axiom2a: Verdict,
    pub axiom2b: Verdict,
    pub axiom3: Verdict,
}

impl StrongReport {
    pub fn accepted(&self) -> bool {
        [&self.lattice, &self.axiom1, &self.axiom2a, &self.axiom2b, &self.axiom3]
            .iter()
            .all(|v| v.is_ok())
    }
}

fn lattice(s: &StrongIsotypy) -> Result<Verdict> {
    let mut n = 0;
    for (qq, chi) in &s.entries {
        let pair = s.setup.pair(qq)?;
        n += 1;
        let fail = |what: &str| {
            Ok(Err(witness(
                "lattice",
                qq,
                chi.group(),
                &[],
                what.into(),
                String::new(),
            )))
        };
        if !chi.is_virtual_character() {
            return fail("coordinates are not integers");
        }
        if !chi.constituents_contain_in_kernel(pair.sub()) {
            return fail("a constituent does not contain Δ in its kernel");
        }
        if chi.act(&pair.idempotent().with_group(chi.group()))? != *chi {
            return fail("entry does not lie over e ⊗ f*");
        }
    }
    Ok(Ok(n))
}

fn axiom1(s: &StrongIsotypy) -> Result<Verdict> {
    let mut n = 0;
    for (q1, chi) in &s.entries {
        for beta in s.setup.fb.isos_from(q1) {
            let g = s.setup.matching_witness(&beta)?;
            let h = beta.witness;
            n += 1;
            let moved = crate::charfun::conjugate_pair(chi, g, h);
            if let Some(mut w) = difference("(1)", &(q1, &beta.target), &moved, &s.entries[&beta.target]) {
                let amb = chi.group().amb().clone();
                w.elements.insert(0, amb.pair(g, h));
                w.perms.insert(0, amb.elem(amb.pair(g, h)).to_string());
                return Ok(Err(w));
            }
        }
    }
    Ok(Ok(n))
}

/// `ε_{⟨(u,v)⟩}`: the `C_{Y_Q}(u,v)`-orbit sum of `e_{P⟨u⟩} ⊗ f_{Q⟨v⟩}*`.
fn epsilon(setup: &Setup, p: &Subgroup, qq: &Subgroup, z: u32, cy: &Subgroup) -> Result<AlgebraElement> {
    let (u, v) = cy.amb().split(z);
    let (pu, qv) = (p.join_elem(u), qq.join_elem(v));
    let (ea, fb) = (setup.fa.pair(&pu), setup.fb.pair(&qv));
    let t = tensor_dual(
        &ea.idempotent(),
        &fb.idempotent(),
        &product_subgroup(ea.centralizer(), fb.centralizer()),
    );
    Ok(orbit_sum(&t, cy, cy)?)
}

/// `N_{D×E}(Δ(φQ,φ,Q))`.
fn normalizer_points(setup: &Setup, qq: &Subgroup) -> Subgroup {
    let de = product_subgroup(setup.fa.defect_group(), setup.fb.defect_group());
    de.normalizer(&setup.phi.twisted_diagonal(qq))
}

fn points(n: &Subgroup, range: Range) -> Vec<u32> {
    match range {
        Range::Representatives => n.classes().reps.clone(),
        Range::Full => n.elems().to_vec(),
    }
}

fn p_regular(h: &Subgroup, p: u64, range: Range) -> Vec<u32> {
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

/// `Ind_{C_{Y_Q ∩ Y_{Q⟨v⟩}}(u,v)}^{target} Res χ_{Q⟨v⟩}`.
fn induced_local(s: &StrongIsotypy, qq: &Subgroup, z: u32, target: &Subgroup) -> Result<ClassFunction> {
    let v = s.setup.product_group().amb().split(z).1;
    let qv = qq.join_elem(v);
    let inter = s.setup.y(qq)?.intersect(&s.setup.y(&qv)?).centralizer_of(&[z]);
    Ok(s.entries[&qv].restrict(&inter)?.induce(target)?)
}

fn axiom2(s: &StrongIsotypy, range: Range) -> Result<(Verdict, Verdict)> {
    let setup = &s.setup;
    let p = setup.p();
    let (mut na, mut nb) = (0, 0);
    let mut fail_a: Option<Witness> = None;
    let mut fail_b: Option<Witness> = None;
    for (qq, chi) in &s.entries {
        let pp = setup.phi.image(qq);
        let y = setup.y(qq)?;
        let amb = y.amb().clone();
        let n = normalizer_points(setup, qq);
        for z in points(&n, range) {
            let (u, v) = amb.split(z);
            let cy = y.centralizer_of(&[z]);
            let eps = epsilon(setup, &pp, qq, z, &cy)?;
            let diagonal = u == setup.phi.apply(v);
            let rhs = if diagonal {
                Some(induced_local(s, qq, z, &cy)?)
            } else {
                None
            };
            let mut conj: Option<bool> = None;
            for st in p_regular(&cy, p, range) {
                let lhs = eval_shifted(chi, amb.mul(z, st), &eps)?;
                if let Some(rhs) = &rhs {
                    na += 1;
                    if fail_a.is_none() && &lhs != rhs.at(st) {
                        fail_a = Some(witness("(2a)", qq, &y, &[z, st], lhs.pretty(), rhs.at(st).pretty()));
                    }
                } else {
                    nb += 1;
                    if !lhs.is_zero() {
                        let ok = *conj.get_or_insert_with(|| setup.normalizer_conjugate(&pp, u, setup.phi.apply(v)));
                        if !ok && fail_b.is_none() {
                            fail_b = Some(witness("(2b)", qq, &y, &[z, st], lhs.pretty(), "0".into()));
                        }
                    }
                }
            }
        }
    }
    Ok((fail_a.map_or(Ok(na), Err), fail_b.map_or(Ok(nb), Err)))
}

fn axiom3(s: &StrongIsotypy, gate: &GateReport) -> Result<Verdict> {
    if let Some(w) = &gate.failure {
        let mut w = w.clone();
        w.condition = format!("(3) blocked by gate: {}", w.condition);
        return Ok(Err(w));
    }
    let mut n = 0;
    for (qq, chi) in &s.entries {
        let pp = s.setup.phi.image(qq);
        let chio = flip_dual(chi);
        let sides = [
            (
                extended_tensor(chi, &chio)?,
                char_of_block_algebra(s.setup.fa.pair(&pp))?,
                "(3) G side",
            ),
            (
                extended_tensor(&chio, chi)?,
                char_of_block_algebra(s.setup.fb.pair(qq))?,
                "(3) H side",
            ),
        ];
        for (lhs, rhs, cond) in sides {
            n += 1;
            if let Some(w) = difference(cond, qq, &lhs, &rhs) {
                return Ok(Err(w));
            }
        }
    }
    Ok(Ok(n))
}

/// Lattice test, then axioms (1), (2a), (2b) and (3), each reported on its own.
pub fn check_strong_isotypy(s: &StrongIsotypy, range: Range) -> Result<StrongReport> {
    check_strong_isotypy_gated(s, range, extended_tensor_gate())
}

/// As [`check_strong_isotypy`], with axiom (3) refused whenever `gate` records a failure.
pub fn check_strong_isotypy_gated(s: &StrongIsotypy, range: Range, gate: &GateReport) -> Result<StrongReport> {
    let (axiom2a, axiom2b) = axiom2(s, range)?;
    Ok(StrongReport {
        lattice: lattice(s)?,
        axiom1: axiom1(s)?,
        axiom2a,
        axiom2b,
        axiom3: axiom3(s, gate)?,
    })
}

/// For `(u,v) ∈ N_{D×E}(Δ)`, the orbit sum `ε` is the unique block of `C_{Y_Q}(u,v)`
/// with nonzero product against `e_{P⟨u⟩} ⊗ f_{Q⟨v⟩}*`.
pub fn check_epsilon_pinning(setup: &Setup) -> Result<Verdict> {
    let mut n = 0;
    for qq in setup.subgroups() {
        let pp = setup.phi.image(&qq);
        let y = setup.y(&qq)?;
        let amb = y.amb().clone();
        for &z in normalizer_points(setup, &qq).elems() {
            let (u, v) = amb.split(z);
            let cy = y.centralizer_of(&[z]);
            let eps = epsilon(setup, &pp, &qq, z, &cy)?;
            let (ea, fb) = (setup.fa.pair(&pp.join_elem(u)), setup.fb.pair(&qq.join_elem(v)));
            let t = tensor_dual(&ea.idempotent(), &fb.idempotent(), &cy);
            let hits: Vec<BrauerPair> = blocks_of_centralizer(&y, &amb.generate(&[z]), setup.p())
                .into_iter()
                .filter(|b| !b.idempotent().with_group(&cy).mul(&t).is_zero())
                .collect();
            n += 1;
            if hits.len() != 1 || hits[0].idempotent().coeffs != eps.coeffs {
                return Ok(Err(witness(
                    "epsilon pinning",
                    &qq,
                    &y,
                    &[z],
                    format!("{} covering blocks", hits.len()),
                    "1, equal to the orbit sum".into(),
                )));
            }
        }
    }
    Ok(Ok(n))
}

/// For every `(u,v)` with `u ≁ φ(v)` in `N_A(P)`, `(s,t) ↦ χ_Q((us,vt)ε)` vanishes.
pub fn check_2b_corollary(s: &StrongIsotypy) -> Result<Verdict> {
    let setup = &s.setup;
    let mut n = 0;
    for (qq, chi) in &s.entries {
        let pp = setup.phi.image(qq);
        let y = setup.y(qq)?;
        let amb = y.amb().clone();
        for &z in normalizer_points(setup, qq).elems() {
            let (u, v) = amb.split(z);
            if setup.normalizer_conjugate(&pp, u, setup.phi.apply(v)) {
                continue;
            }
            let cy = y.centralizer_of(&[z]);
            let eps = epsilon(setup, &pp, qq, z, &cy)?;
            for st in cy.p_regular(setup.p()) {
                n += 1;
                let val = eval_shifted(chi, amb.mul(z, st), &eps)?;
                if !val.is_zero() {
                    return Ok(Err(witness("2b corollary", qq, &y, &[z, st], val.pretty(), "0".into())));
                }
            }
        }
    }
    Ok(Ok(n))
}

/// Verdicts of the three perfect-isometry sub-checks.
#[derive(Debug, Clone, Serialize)]
pub struct PerfectReport {
    pub bijection: Verdict,
    pub integrality: Verdict,
    pub separation: Verdict,
}

impl PerfectReport {
    pub fn accepted(&self) -> bool {
        self.bijection.is_ok() && self.integrality.is_ok() && self.separation.is_ok()
    }
}

/// `μ` on `G × H` between blocks `c` of `G` and `d` of `H`.
///
/// (i) `μ = Σ a_{χψ} χ × ψ°` over `Irr(c) × Irr(d)` with `(a_{χψ})` a signed permutation matrix;
/// (ii) `μ(g,h)/|C_G(g)|` and `μ(g,h)/|C_H(h)|` are `p`-integral;
/// (iii) `μ(g,h) = 0` unless `g`, `h` are both `p`-regular or both `p`-singular.
pub fn check_perfect_isometry(mu: &ClassFunction, c: &Block, d: &Block) -> Result<PerfectReport> {
    let gh = product_subgroup(c.group(), d.group());
    if *mu.group() != gh {
        return Err(IsotypyError::WrongGroup {
            index: "μ".into(),
            found: format!("{:?}", mu.group()),
            expected: format!("{gh:?}"),
        });
    }
    let p = c.p();
    let amb = gh.amb().clone();
    let (ci, di) = (c.characters(), d.characters());
    let tag = format!("{:?} x {:?}", c.irr(), d.irr());
    let bijection = (|| -> Result<Verdict> {
        let mut rest = mu.clone();
        let mut matrix = vec![vec![Cyc::zero(); di.len()]; ci.len()];
        for (i, chi) in ci.iter().enumerate() {
            for (j, psi) in di.iter().enumerate() {
                let a = mu.inner(&outer_product(chi, &psi.dual()))?;
                rest = rest.sub(&outer_product(chi, &psi.dual()).scale(&a))?;
                matrix[i][j] = a;
            }
        }
        let fail = |what: String| {
            Ok(Err(witness(
                "perfect (i)",
                &tag,
                &gh,
                &[],
                what,
                "signed bijection".into(),
            )))
        };
        if !rest.is_zero() {
            return fail("μ has constituents outside Irr(c) x Irr(d)".into());
        }
        if ci.len() != di.len() {
            return fail(format!("{} x {} coefficient matrix", ci.len(), di.len()));
        }
        let unit = |x: &Cyc| *x == Cyc::one() || *x == -&Cyc::one();
        for i in 0..ci.len() {
            let row: Vec<&Cyc> = matrix[i].iter().filter(|x| !x.is_zero()).collect();
            let col: Vec<&Cyc> = matrix.iter().map(|r| &r[i]).filter(|x| !x.is_zero()).collect();
            if row.len() != 1 || col.len() != 1 || !unit(row[0]) || !unit(col[0]) {
                return fail(format!(
                    "row/column {i}: {:?}",
                    matrix[i].iter().map(|x| x.pretty()).collect::<Vec<_>>()
                ));
            }
        }
        Ok(Ok(ci.len() * di.len()))
    })()?;
    let cl = gh.classes();
    let mut integrality = Ok(0);
    let mut separation = Ok(0);
    for (k, &z) in cl.reps.iter().enumerate() {
        let (g, h) = amb.split(z);
        let val = &mu.values()[k];
        let cg = c.group().centralizer_of(&[g]).order() as i64;
        let ch = d.group().centralizer_of(&[h]).order() as i64;
        if integrality.is_ok() {
            let ok = val.scale(&q(1, cg)).is_p_integral(p) && val.scale(&q(1, ch)).is_p_integral(p);
            integrality = if ok {
                integrality.map(|n| n + 1)
            } else {
                Err(witness(
                    "perfect (ii)",
                    &tag,
                    &gh,
                    &[z],
                    format!("{} / ({cg}, {ch})", val.pretty()),
                    "p-integral".into(),
                ))
            };
        }
        if separation.is_ok() {
            let mixed = amb.is_p_regular(g, p) != amb.is_p_regular(h, p);
            separation = if mixed && !val.is_zero() {
                Err(witness("perfect (iii)", &tag, &gh, &[z], val.pretty(), "0".into()))
            } else {
                separation.map(|n| n + 1)
            };
        }
    }
    Ok(PerfectReport {
        bijection,
        integrality,
        separation,
    })
}

/// `μ_Q ∈ CF(C_G(φQ) × C_H(Q), e_{φQ} ⊗ f_Q*)` for `Q ≤ E`.
#[derive(Clone, Debug)]
pub struct Isotypy {
    setup: Arc<Setup>,
    entries: BTreeMap<Subgroup, ClassFunction>,
}

impl Isotypy {
    pub fn new(setup: &Arc<Setup>, entries: BTreeMap<Subgroup, ClassFunction>) -> Result<Self> {
        for qq in setup.subgroups() {
            let mu = entries
                .get(&qq)
                .ok_or_else(|| IsotypyError::Missing(format!("{qq:?}")))?;
            let c = setup.centralizer(&qq);
            if *mu.group() != c {
                return Err(IsotypyError::WrongGroup {
                    index: format!("{qq:?}"),
                    found: format!("{:?}", mu.group()),
                    expected: format!("{c:?}"),
                });
            }
        }
        Ok(Isotypy {
            setup: setup.clone(),
            entries,
        })
    }
    pub fn setup(&self) -> &Arc<Setup> {
        &self.setup
    }
    pub fn entries(&self) -> &BTreeMap<Subgroup, ClassFunction> {
        &self.entries
    }
    pub fn entry(&self, qq: &Subgroup) -> &ClassFunction {
        &self.entries[qq]
    }
    pub fn set(&mut self, qq: &Subgroup, mu: ClassFunction) {
        self.entries.insert(qq.clone(), mu);
    }
}

/// `μ_Q = Res^{Y_Q}_{C_G(φQ) × C_H(Q)} χ_Q`.
pub fn restrict_to_isotypy(s: &StrongIsotypy) -> Result<Isotypy> {
    let report = check_strong_isotypy(s, Range::Representatives)?;
    if !report.accepted() {
        return Err(IsotypyError::Rejected("the family is not a strong isotypy".into()));
    }
    let mut entries = BTreeMap::new();
    for (qq, chi) in &s.entries {
        entries.insert(qq.clone(), chi.restrict(&s.setup.centralizer(qq))?);
    }
    Isotypy::new(&s.setup, entries)
}

/// Verdicts of [`check_isotypy`].
#[derive(Debug, Clone, Serialize)]
pub struct IsotypyReport {
    pub bijection: Verdict,
    pub integrality: Verdict,
    pub separation: Verdict,
    pub equivariance: Verdict,
    pub compatibility: Verdict,
}

impl IsotypyReport {
    pub fn accepted(&self) -> bool {
        [
            &self.bijection,
            &self.integrality,
            &self.separation,
            &self.equivariance,
            &self.compatibility,
        ]
        .iter()
        .all(|v| v.is_ok())
    }
}

/// Perfect-isometry sub-checks on every `μ_Q`, equivariance, and compatibility with
/// the decomposition maps `d^{u,e_{P⟨u⟩}}` and `d^{v,f_{Q⟨v⟩}}` for `v ∈ C_E(Q)`.
pub fn check_isotypy(iso: &Isotypy) -> Result<IsotypyReport> {
    let setup = &iso.setup;
    let p = setup.p();
    let (mut bij, mut int, mut sep) = (Vec::new(), Vec::new(), Vec::new());
    for (qq, mu) in &iso.entries {
        let pp = setup.phi.image(qq);
        let r = check_perfect_isometry(mu, setup.fa.pair(&pp).block(), setup.fb.pair(qq).block())?;
        bij.push(r.bijection);
        int.push(r.integrality);
        sep.push(r.separation);
    }
    let equivariance = (|| -> Result<Verdict> {
        let mut n = 0;
        for (q1, mu) in &iso.entries {
            for beta in setup.fb.isos_from(q1) {
                let g = setup.matching_witness(&beta)?;
                n += 1;
                let moved = crate::charfun::conjugate_pair(mu, g, beta.witness);
                if let Some(w) = difference("equivariance", &(q1, &beta.target), &moved, &iso.entries[&beta.target]) {
                    return Ok(Err(w));
                }
            }
        }
        Ok(Ok(n))
    })()?;
    let compatibility = (|| -> Result<Verdict> {
        let mut n = 0;
        for (qq, mu) in &iso.entries {
            let pp = setup.phi.image(qq);
            let fq = setup.fb.pair(qq).block().clone();
            let ce = setup.fb.defect_group().centralizer(qq);
            for &v in ce.elems() {
                let u = setup.phi.apply(v);
                let qv = qq.join_elem(v);
                let e_pu = setup.fa.pair(&pp.join_elem(u)).idempotent();
                let f_qv = setup.fb.pair(&qv).idempotent();
                for nu in fq.characters() {
                    n += 1;
                    let lhs = gen_decomp(&contract(mu, &nu)?, u, Some(&e_pu), p)?;
                    let rhs = contract(&iso.entries[&qv], &gen_decomp(&nu, v, Some(&f_qv), p)?)?;
                    if let Some(w) = difference("compatibility", &(qq, v), &lhs, &rhs) {
                        return Ok(Err(w));
                    }
                }
            }
        }
        Ok(Ok(n))
    })()?;
    Ok(IsotypyReport {
        bijection: first_failure(bij),
        integrality: first_failure(int),
        separation: first_failure(sep),
        equivariance,
        compatibility,
    })
}

/// `d_G^{u,e}(μ ⊗_H ν) = Σ_{(v,f)} d^{(u,v),e⊗f*}(μ) ⊗_{C_H(v)} d_H^{v,f}(ν)` for every
/// `(u,e) ∈ BE(A)` up to conjugacy and every `ν ∈ Irr(B)`.
pub fn decomposition_diagram_check(mu: &ClassFunction, a: &Block, b: &Block) -> Result<Verdict> {
    let p = a.p();
    let amb = mu.group().amb().clone();
    let (bea, beb) = (brauer_elements(a), brauer_elements(b));
    let nus = b.characters();
    let mut n = 0;
    for ue in &bea {
        let mut pieces = Vec::new();
        for vf in &beb {
            let c = product_subgroup(ue.pair.centralizer(), vf.pair.centralizer());
            let t = tensor_dual(&ue.idempotent(), &vf.idempotent(), &c);
            pieces.push((gen_decomp(mu, amb.pair(ue.u, vf.u), Some(&t), p)?, vf));
        }
        for nu in &nus {
            n += 1;
            let lhs = gen_decomp(&contract(mu, nu)?, ue.u, Some(&ue.idempotent()), p)?;
            let mut rhs = ClassFunction::zero(lhs.group());
            for (dmu, vf) in &pieces {
                rhs = rhs.add(&contract(dmu, &gen_decomp(nu, vf.u, Some(&vf.idempotent()), p)?)?)?;
            }
            if let Some(w) = difference("decomposition diagram", &ue.u, &lhs, &rhs) {
                return Ok(Err(w));
            }
        }
    }
    Ok(Ok(n))
}

/// A subgroup tuple for `A ⊗ B*` on `F_{(D×E, e_D⊗f_E*)}`.
#[derive(Clone, Debug)]
pub struct PpermTuple {
    pub tuple: SubgroupTuple,
}

impl PpermTuple {
    pub fn check(&self, range: Range) -> Result<Verdict> {
        Ok(check_diagonal(&DiagonalTuple::Subgroups(self.tuple.clone()), range)?)
    }
}

/// `θ_R = ^ψχ_Q` when some `(F_A × F_B*)`-isomorphism `ψ : Δ(φQ,φ,Q) → R` exists, else `0`.
pub fn strong_to_pperm(s: &StrongIsotypy) -> Result<PpermTuple> {
    let f = s.setup.product_fusion()?;
    let mut diag = Vec::new();
    for qq in s.setup.subgroups() {
        let d = s.setup.phi.twisted_diagonal(&qq);
        if f.inertia(&d) != s.setup.y(&qq)? {
            return Err(IsotypyError::Setup(format!(
                "product pair at {d:?} differs from (Δ, e ⊗ f*)"
            )));
        }
        diag.push((qq, d));
    }
    let mut entries = BTreeMap::new();
    for r in f.subgroups() {
        let found = diag
            .iter()
            .filter(|(_, d)| d.order() == r.order())
            .find_map(|(qq, d)| f.hom_set(d, r).first().map(|m| s.entries[qq].conjugate(m.witness)));
        entries.insert(r.clone(), found.unwrap_or_else(|| ClassFunction::zero(&f.inertia(r))));
    }
    Ok(PpermTuple {
        tuple: SubgroupTuple::new(&f, entries)?,
    })
}

/// `χ_Q = θ_{Δ(φQ,φ,Q)}`, after checking that every maximal `R` with `θ_R ≠ 0` is
/// isomorphic to `Δ(D,φ,E)`.
pub fn pperm_to_strong(t: &PpermTuple, setup: &Arc<Setup>) -> Result<StrongIsotypy> {
    let f = t.tuple.fusion();
    let top = setup.phi.twisted_diagonal(setup.fusion_b().defect_group());
    let support: Vec<&Subgroup> = t
        .tuple
        .entries()
        .iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(r, _)| r)
        .collect();
    if support.is_empty() {
        return Err(IsotypyError::Rejected("zero tuple".into()));
    }
    for r in &support {
        let maximal = !support.iter().any(|s| s.order() > r.order() && r.is_subgroup_of(s));
        if maximal && (r.order() != top.order() || f.hom_set(r, &top).is_empty()) {
            return Err(IsotypyError::Rejected(format!(
                "maximal support {r:?} is not isomorphic to Δ(D,φ,E)"
            )));
        }
    }
    let mut entries = BTreeMap::new();
    for qq in setup.subgroups() {
        let d = setup.phi.twisted_diagonal(&qq);
        let theta = t
            .tuple
            .entries()
            .get(&d)
            .ok_or_else(|| IsotypyError::Missing(format!("{d:?}")))?;
        entries.insert(qq, theta.clone());
    }
    StrongIsotypy::new(setup, entries)
}

/// Verdicts of [`normalizer_diagram_check`].
#[derive(Debug, Clone, Serialize)]
pub struct NormalizerReport {
    pub induced_perfect: Verdict,
    pub local_perfect: Verdict,
    pub diagram: Verdict,
    pub cube: Option<Verdict>,
}

impl NormalizerReport {
    pub fn accepted(&self) -> bool {
        self.induced_perfect.is_ok()
            && self.local_perfect.is_ok()
            && self.diagram.is_ok()
            && self.cube.as_ref().is_none_or(|c| c.is_ok())
    }
}

fn perfect_verdict(r: PerfectReport) -> Verdict {
    first_failure([r.bijection, r.integrality, r.separation])
}

fn p_truncate(chi: &ClassFunction, p: u64) -> ClassFunction {
    let amb = chi.group().amb().clone();
    ClassFunction::from_fn(chi.group(), |s| {
        if amb.is_p_regular(s, p) {
            chi.at(s).clone()
        } else {
            Cyc::zero()
        }
    })
}

/// The normalizer-level diagram at `(Q, v)`, `v ∈ N_E(Q)`, and the cube when `v ∈ C_E(Q)`.
pub fn normalizer_diagram_check(s: &StrongIsotypy, qq: &Subgroup, v: u32) -> Result<NormalizerReport> {
    let setup = &s.setup;
    let p = setup.p();
    let (ea, fb) = (&setup.fa, &setup.fb);
    if !fb.defect_group().normalizer(qq).contains(v) {
        return Err(IsotypyError::Rejected("v does not normalize Q".into()));
    }
    let u = setup.phi.apply(v);
    let pp = setup.phi.image(qq);
    let (pe, qf) = (ea.pair(&pp), fb.pair(qq));
    let (ip, jq) = (pe.normalizer(), qf.normalizer());
    let ib = block_of_idempotent(&ip, p, &pe.idempotent().with_group(&ip))?;
    let jb = block_of_idempotent(&jq, p, &qf.idempotent().with_group(&jq))?;
    let (cu, cv) = (ip.centralizer_of(&[u]), jq.centralizer_of(&[v]));
    let (pu, qv) = (pp.join_elem(u), qq.join_elem(v));
    let eps = orbit_sum(&ea.pair(&pu).idempotent(), &cu, &cu)?;
    let vphi = orbit_sum(&fb.pair(&qv).idempotent(), &cv, &cv)?;
    let eb = block_of_idempotent(&cu, p, &eps)?;
    let fbl = block_of_idempotent(&cv, p, &vphi)?;

    let theta = s.entries[qq].induce(&product_subgroup(&ip, &jq))?;
    let z = setup.product_group().amb().pair(u, v);
    let local = induced_local(s, qq, z, &product_subgroup(&cu, &cv))?;
    let induced_perfect = perfect_verdict(check_perfect_isometry(&theta, &ib, &jb)?);
    let local_perfect = perfect_verdict(check_perfect_isometry(&local, &eb, &fbl)?);

    let nus = jb.characters();
    let mut n = 0;
    let mut diagram = Ok(0);
    for nu in &nus {
        n += 1;
        let lhs = gen_decomp(&contract(&theta, nu)?, u, Some(&eps), p)?;
        let rhs = contract(&local, &gen_decomp(nu, v, Some(&vphi), p)?)?;
        if let Some(w) = difference("normalizer diagram", &(qq, v), &lhs, &rhs) {
            diagram = Err(w);
            break;
        }
        diagram = Ok(n);
    }

    let cube = if fb.defect_group().centralizer(qq).contains(v) {
        Some(cube_faces(s, qq, v, &theta, &local, (&ib, &eps), (&jb, &vphi, &fbl))?)
    } else {
        None
    };
    Ok(NormalizerReport {
        induced_perfect,
        local_perfect,
        diagram,
        cube,
    })
}

fn cube_faces(
    s: &StrongIsotypy,
    qq: &Subgroup,
    v: u32,
    theta: &ClassFunction,
    local: &ClassFunction,
    (ib, eps): (&Block, &AlgebraElement),
    (jb, vphi, fbl): (&Block, &AlgebraElement, &Block),
) -> Result<Verdict> {
    let setup = &s.setup;
    let p = setup.p();
    let u = setup.phi.apply(v);
    let pp = setup.phi.image(qq);
    let (pu, qv) = (pp.join_elem(u), qq.join_elem(v));
    let (pe, qf) = (setup.fa.pair(&pp), setup.fb.pair(qq));
    let (cgp, chq) = (pe.centralizer().clone(), qf.centralizer().clone());
    let (e_pu, f_qv) = (setup.fa.pair(&pu).idempotent(), setup.fb.pair(&qv).idempotent());
    let (cgpu, chqv) = (
        setup.fa.pair(&pu).centralizer().clone(),
        setup.fb.pair(&qv).centralizer().clone(),
    );
    let mu_q = s.entries[qq].restrict(&setup.centralizer(qq))?;
    let mu_qv = s.entries[&qv].restrict(&setup.centralizer(&qv))?;
    let mut n = 0;
    let mut cmp = |face: &str, lhs: ClassFunction, rhs: ClassFunction| -> Option<Witness> {
        n += 1;
        difference(face, &(qq, v), &lhs, &rhs)
    };
    for nu in jb.characters() {
        let top_l = contract(theta, &nu)?.restrict(&cgp)?;
        let top_r = contract(&mu_q, &nu.restrict(&chq)?)?;
        if let Some(w) = cmp("cube top", top_l, top_r) {
            return Ok(Err(w));
        }
        let left_l = gen_decomp(&nu.restrict(&chq)?, v, Some(&f_qv), p)?;
        let left_r = gen_decomp(&nu, v, Some(vphi), p)?
            .restrict(&chqv)?
            .act(&f_qv.with_group(&chqv))?;
        if let Some(w) = cmp("cube left", left_l, left_r) {
            return Ok(Err(w));
        }
        let back_l = gen_decomp(&contract(&mu_q, &nu.restrict(&chq)?)?, u, Some(&e_pu), p)?;
        let back_r = contract(&mu_qv, &gen_decomp(&nu.restrict(&chq)?, v, Some(&f_qv), p)?)?;
        if let Some(w) = cmp("cube back", back_l, back_r) {
            return Ok(Err(w));
        }
    }
    for eta in ib.characters() {
        let right_l = gen_decomp(&eta.restrict(&cgp)?, u, Some(&e_pu), p)?;
        let right_r = gen_decomp(&eta, u, Some(eps), p)?
            .restrict(&cgpu)?
            .act(&e_pu.with_group(&cgpu))?;
        if let Some(w) = cmp("cube right", right_l, right_r) {
            return Ok(Err(w));
        }
    }
    for th in fbl.characters() {
        let th = p_truncate(&th, p);
        let bottom_l = contract(local, &th)?.restrict(&cgpu)?.act(&e_pu.with_group(&cgpu))?;
        let bottom_r = contract(&mu_qv, &th.restrict(&chqv)?.act(&f_qv.with_group(&chqv))?)?;
        if let Some(w) = cmp("cube bottom", bottom_l, bottom_r) {
            return Ok(Err(w));
        }
    }
    Ok(Ok(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfun::character_table;
    use crate::perm::named::*;
    use crate::perm::PermGroup;

    fn principal(g: &Arc<PermGroup>, p: u64) -> Block {
        block_partition(&g.full(), p)[0].clone()
    }

    fn el(g: &Arc<PermGroup>, cycles: &[&[usize]]) -> u32 {
        g.index_of(&crate::perm::Perm::from_cycles(g.degree(), cycles).unwrap())
            .unwrap()
    }

    #[test]
    fn gate_passes() {
        let r = extended_tensor_gate();
        assert!(r.passed(), "{:?}", r.failure);
        assert!(r.instances >= 10 && r.checks > r.instances);
    }

    #[test]
    fn block_algebra_character_at_trivial_pair() {
        let g = s3();
        let b = principal(&g, 3);
        let pe = crate::blocks::defect_pairs(&b).pair(&g.trivial()).clone();
        let chi = char_of_block_algebra(&pe).unwrap();
        let amb = chi.group().amb().clone();
        let full = g.full();
        for &z in &chi.classes().reps {
            let (a, c) = amb.split(z);
            let conj = full.elems().iter().any(|&x| g.conj(x, a) == c);
            let expect = if conj {
                full.centralizer_of(&[a]).order() as i64
            } else {
                0
            };
            assert_eq!(chi.at(z), &Cyc::from_int(expect));
        }
    }

    #[test]
    fn zero_tensor_is_zero() {
        let g = s3();
        let gg = product_subgroup(&g.full(), &g.full());
        let z = ClassFunction::zero(&gg);
        assert!(extended_tensor(&z, &flip_dual(&z)).unwrap().is_zero());
    }

    #[test]
    fn identity_families_are_strong_isotypies() {
        for (g, p) in [(s3(), 3), (a4(), 2)] {
            let s = StrongIsotypy::identity(&principal(&g, p)).unwrap();
            let r = check_strong_isotypy(&s, Range::Representatives).unwrap();
            assert!(r.accepted(), "{r:?}");
            let iso = restrict_to_isotypy(&s).unwrap();
            let ir = check_isotypy(&iso).unwrap();
            assert!(ir.accepted(), "{ir:?}");
            assert!(check_2b_corollary(&s).unwrap().is_ok());
            assert!(check_epsilon_pinning(s.setup()).unwrap().is_ok());
        }
    }

    #[test]
    fn full_range_agrees() {
        let s = StrongIsotypy::identity(&principal(&s3(), 3)).unwrap();
        let r = check_strong_isotypy(&s, Range::Full).unwrap();
        assert!(r.accepted(), "{r:?}");
    }

    #[test]
    fn sign_flip_fails_2a() {
        let g = s3();
        let mut s = StrongIsotypy::identity(&principal(&g, 3)).unwrap();
        let c3 = g.generate(&[el(&g, &[&[1, 2, 3]])]);
        let neg = s.entry(&c3).neg();
        s.set(&c3, neg).unwrap();
        let r = check_strong_isotypy(&s, Range::Representatives).unwrap();
        assert!(r.axiom2a.is_err());
        assert!(r.axiom3.is_ok());
    }

    #[test]
    fn vanishing_violation_fails_2b() {
        let g = s3();
        let mut s = StrongIsotypy::identity(&principal(&g, 3)).unwrap();
        let one = g.trivial();
        let bumped = s
            .entry(&one)
            .add(&ClassFunction::trivial(s.entry(&one).group()))
            .unwrap();
        s.set(&one, bumped).unwrap();
        let r = check_strong_isotypy(&s, Range::Representatives).unwrap();
        let w = r.axiom2b.unwrap_err();
        assert_eq!(w.condition, "(2b)");
    }

    #[test]
    fn perfect_isometry_examples() {
        let g = s3();
        let b = principal(&g, 3);
        let gg = product_subgroup(&g.full(), &g.full());
        let mut id = ClassFunction::zero(&gg);
        for chi in b.characters() {
            id = id.add(&outer_product(&chi, &chi.dual())).unwrap();
        }
        assert!(check_perfect_isometry(&id, &b, &b).unwrap().accepted());
        let two = id.scale(&Cyc::from_int(2));
        assert!(check_perfect_isometry(&two, &b, &b).unwrap().bijection.is_err());
        let chi = &b.characters()[0];
        let single = outer_product(chi, &chi.dual());
        assert!(check_perfect_isometry(&single, &b, &b).unwrap().bijection.is_err());
    }

    #[test]
    fn identity_bimodules_are_perfect_on_corpus() {
        for name in ["S3", "C4", "V4", "D8", "A4", "S4"] {
            let g = by_name(name).unwrap();
            for p in [2, 3] {
                for b in block_partition(&g.full(), p).iter() {
                    let gg = product_subgroup(&g.full(), &g.full());
                    let mut id = ClassFunction::zero(&gg);
                    for chi in b.characters() {
                        id = id.add(&outer_product(&chi, &chi.dual())).unwrap();
                    }
                    let r = check_perfect_isometry(&id, b, b).unwrap();
                    assert!(r.accepted(), "{name} {p} {r:?}");
                }
            }
        }
    }

    #[test]
    fn compatibility_sign_perturbation_is_caught() {
        let g = s3();
        let s = StrongIsotypy::identity(&principal(&g, 3)).unwrap();
        let mut iso = restrict_to_isotypy(&s).unwrap();
        let c3 = g.generate(&[el(&g, &[&[1, 2, 3]])]);
        let neg = iso.entry(&c3).neg();
        iso.set(&c3, neg);
        let r = check_isotypy(&iso).unwrap();
        assert!(r.compatibility.is_err());
    }

    #[test]
    fn decomposition_diagram_on_identity_and_zero() {
        let g = s3();
        let b = principal(&g, 3);
        let gg = product_subgroup(&g.full(), &g.full());
        let s = StrongIsotypy::identity(&b).unwrap();
        let mu = s.entry(&g.trivial()).clone();
        assert!(decomposition_diagram_check(&mu, &b, &b).unwrap().is_ok());
        assert!(decomposition_diagram_check(&ClassFunction::zero(&gg), &b, &b)
            .unwrap()
            .is_ok());
    }

    #[test]
    fn pperm_round_trip() {
        let s = StrongIsotypy::identity(&principal(&s3(), 3)).unwrap();
        let t = strong_to_pperm(&s).unwrap();
        assert!(t.check(Range::Representatives).unwrap().is_ok());
        let back = pperm_to_strong(&t, s.setup()).unwrap();
        assert_eq!(back.entries(), s.entries());
    }

    #[test]
    fn normalizer_diagrams_on_s3() {
        let g = s3();
        let s = StrongIsotypy::identity(&principal(&g, 3)).unwrap();
        let d = s.setup().fusion_b().defect_group().clone();
        for qq in s.setup().subgroups() {
            for &v in d.normalizer(&qq).elems() {
                let r = normalizer_diagram_check(&s, &qq, v).unwrap();
                assert!(r.accepted(), "{qq:?} {v} {r:?}");
            }
        }
    }

    #[test]
    fn tensor_formula_on_direct_products_matches_contract() {
        let g = s3();
        let full = g.full();
        let t = character_table(&full);
        let mu = outer_product(&t.irr[2], &t.irr[2].dual());
        let ext = extended_tensor(&mu, &outer_product(&t.irr[2], &ClassFunction::trivial(&full))).unwrap();
        let amb = ext.group().amb().clone();
        let con = contract(&mu, &t.irr[2]).unwrap();
        for &z in &ext.classes().reps {
            assert_eq!(ext.at(z), con.at(amb.split(z).0));
        }
    }

    fn corpus_blocks() -> Vec<Block> {
        let mut out = Vec::new();
        for name in ["S3", "C4", "C6", "V4", "Q8", "D8", "A4", "S4"] {
            let g = by_name(name).unwrap();
            for p in [2, 3] {
                out.extend(block_partition(&g.full(), p).iter().cloned());
            }
        }
        out
    }

    #[test]
    fn identity_families_on_corpus() {
        for b in corpus_blocks() {
            let s = StrongIsotypy::identity(&b).unwrap();
            let r = check_strong_isotypy(&s, Range::Representatives).unwrap();
            assert!(r.accepted(), "{b:?} {r:?}");
            let ir = check_isotypy(&restrict_to_isotypy(&s).unwrap()).unwrap();
            assert!(ir.accepted(), "{b:?} {ir:?}");
            assert!(check_2b_corollary(&s).unwrap().is_ok(), "{b:?}");
        }
    }

    #[test]
    fn pperm_bijection_on_corpus() {
        for b in corpus_blocks().into_iter().filter(|b| b.group().order() <= 12) {
            let s = StrongIsotypy::identity(&b).unwrap();
            let t = strong_to_pperm(&s).unwrap();
            assert!(t.check(Range::Representatives).unwrap().is_ok(), "{b:?}");
            let back = pperm_to_strong(&t, s.setup()).unwrap();
            assert_eq!(back.entries(), s.entries(), "{b:?}");
            let again = strong_to_pperm(&back).unwrap();
            assert_eq!(again.tuple.entries(), t.tuple.entries());
        }
    }

    #[test]
    fn forward_vanishes_off_twisted_diagonals_of_d() {
        let s = StrongIsotypy::identity(&principal(&s3(), 3)).unwrap();
        let t = strong_to_pperm(&s).unwrap();
        let f = t.tuple.fusion().clone();
        let top = s.setup().phi().twisted_diagonal(s.setup().fusion_b().defect_group());
        for (r, theta) in t.tuple.entries() {
            let into = f
                .subgroups()
                .any(|x| x.is_subgroup_of(&top) && x.order() == r.order() && !f.hom_set(r, x).is_empty());
            assert_eq!(theta.is_zero(), !into, "{r:?}");
        }
    }

    #[test]
    fn zero_family_is_rejected() {
        let s = StrongIsotypy::identity(&principal(&s3(), 3)).unwrap();
        let zero: BTreeMap<Subgroup, ClassFunction> = s
            .entries()
            .iter()
            .map(|(k, v)| (k.clone(), ClassFunction::zero(v.group())))
            .collect();
        let z = StrongIsotypy::new(s.setup(), zero).unwrap();
        assert!(check_strong_isotypy(&z, Range::Representatives)
            .unwrap()
            .axiom3
            .is_err());
        assert!(restrict_to_isotypy(&z).is_err());
        let t = PpermTuple {
            tuple: SubgroupTuple::zero(&s.setup().product_fusion().unwrap()),
        };
        assert!(pperm_to_strong(&t, s.setup()).is_err());
    }

    /// Swaps the coefficients of a present and an absent linear constituent of one `χ_Q`, `|Q| = 2`, of A4 at 2.
    fn a4_swapped() -> StrongIsotypy {
        let g = a4();
        let mut s = StrongIsotypy::identity(&principal(&g, 2)).unwrap();
        let qq = s.setup().subgroups().into_iter().find(|x| x.order() == 2).unwrap();
        let chi = s.entry(&qq).clone();
        let t = character_table(chi.group());
        let c = chi.coordinates();
        let linear = |i: &usize| t.irr[*i].degree() == &Cyc::one();
        let i = (0..c.len()).filter(linear).find(|&i| !c[i].is_zero()).unwrap();
        let j = (0..c.len()).filter(linear).find(|&j| c[j].is_zero()).unwrap();
        let swapped = chi
            .sub(&t.irr[i].scale(&c[i]))
            .unwrap()
            .add(&t.irr[j].scale(&c[i]))
            .unwrap();
        s.set(&qq, swapped).unwrap();
        s
    }

    #[test]
    fn failed_gate_blocks_axiom_3() {
        let g = s3();
        let s = StrongIsotypy::identity(&principal(&g, 3)).unwrap();
        let mut gate = extended_tensor_gate().clone();
        gate.failure = Some(Witness {
            condition: "gate: module oracle".into(),
            index: "planted".into(),
            elements: vec![],
            perms: vec![],
            lhs: "1".into(),
            rhs: "0".into(),
        });
        let r = check_strong_isotypy_gated(&s, Range::Representatives, &gate).unwrap();
        assert!(r.axiom2a.is_ok() && r.axiom1.is_ok());
        assert!(r.axiom3.unwrap_err().condition.starts_with("(3) blocked by gate"));
    }

    #[test]
    fn entry_swap_fails_1() {
        let s = a4_swapped();
        let r = check_strong_isotypy(&s, Range::Representatives).unwrap();
        assert!(r.axiom1.is_err(), "{r:?}");
    }

    #[test]
    fn a4_normalizer_diagrams() {
        let g = a4();
        let s = StrongIsotypy::identity(&principal(&g, 2)).unwrap();
        let d = s.setup().fusion_b().defect_group().clone();
        for qq in s.setup().subgroups() {
            for &v in d.normalizer(&qq).elems() {
                let r = normalizer_diagram_check(&s, &qq, v).unwrap();
                assert!(r.accepted(), "{qq:?} {v} {r:?}");
            }
        }
    }

    #[test]
    fn perturbed_local_entry_breaks_normalizer_diagram() {
        let g = s3();
        let mut s = StrongIsotypy::identity(&principal(&g, 3)).unwrap();
        let c3 = g.generate(&[el(&g, &[&[1, 2, 3]])]);
        let neg = s.entry(&c3).neg();
        s.set(&c3, neg).unwrap();
        let r = normalizer_diagram_check(&s, &g.trivial(), el(&g, &[&[1, 2, 3]])).unwrap();
        assert!(r.diagram.is_err());
    }

    #[test]
    fn trivial_level_diagram_and_isometry_identity() {
        for b in corpus_blocks().into_iter().filter(|b| b.group().order() <= 12) {
            let s = StrongIsotypy::identity(&b).unwrap();
            let mu = s.entry(&b.group().amb().trivial()).clone();
            assert!(decomposition_diagram_check(&mu, &b, &b).unwrap().is_ok());
            let chars = b.characters();
            for x in &chars {
                for y in &chars {
                    let lhs = contract(&mu, x).unwrap().inner(&contract(&mu, y).unwrap()).unwrap();
                    assert_eq!(lhs, x.inner(y).unwrap());
                }
            }
        }
    }

    fn block_pair_cases() -> Vec<(Block, Block)> {
        let mut out = Vec::new();
        for name in ["S3", "C4", "V4", "D8", "A4"] {
            let g = by_name(name).unwrap();
            for p in [2, 3] {
                let bl = block_partition(&g.full(), p);
                for a in bl.iter() {
                    for b in bl.iter() {
                        out.push((a.clone(), b.clone()));
                    }
                }
            }
        }
        out
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn decomposition_diagram_commutes_for_random_mu(case in 0usize..1000, coeffs in proptest::collection::vec(-3i64..=3, 64)) {
            let cases = block_pair_cases();
            let (a, b) = &cases[case % cases.len()];
            let gh = product_subgroup(a.group(), b.group());
            let mut mu = ClassFunction::zero(&gh);
            let mut k = 0;
            for chi in a.characters() {
                for psi in b.characters() {
                    mu = mu.add(&outer_product(&chi, &psi.dual()).scale(&Cyc::from_int(coeffs[k % coeffs.len()]))).unwrap();
                    k += 1;
                }
            }
            proptest::prop_assert!(decomposition_diagram_check(&mu, a, b).unwrap().is_ok());
        }
    }
}
