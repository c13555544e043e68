#![allow(clippy::mutable_key_type, clippy::result_large_err)]

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blockforge::blocks::{all_brauer_elements, belongs_to, block_partition, brauer_elements, p_subgroups, Block};
use blockforge::charfun::{character_table, gen_decomp, outer_product, AlgebraElement, ClassFunction};
use blockforge::cyclo::Cyc;
use blockforge::fusion::FusionSystem;
use blockforge::io::{second_root_verdict, subpair_verdict, CORPUS};
use blockforge::isotypy::{
    check_isotypy, check_strong_isotypy, check_strong_isotypy_gated, decomposition_diagram_check, extended_tensor_gate,
    normalizer_diagram_check, pperm_to_strong, restrict_to_isotypy, strong_to_pperm, StrongIsotypy,
};
use blockforge::perm::named::by_name;
use blockforge::perm::{diagonal, direct_product, is_twisted_diagonal, product_subgroup, PermGroup, Subgroup};
use blockforge::tuples::{
    alpha_perm_module, beta_perm_module, check_beta, check_c1, check_c2, check_c3, check_diagonal, pair_orbit_reps,
    pi_inverse, pi_projection, product_block, rho, rho_inverse, DiagonalTuple, GlobalTuple, PairTuple, Range, Witness,
};
use std::sync::Arc;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(usize) -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn group(name: &str) -> Subgroup {
    by_name(name).expect("corpus group").full()
}

fn principal(g: &Arc<PermGroup>, p: u64) -> Block {
    block_partition(&g.full(), p)[0].clone()
}

fn corpus_blocks(names: &[&str]) -> Vec<Block> {
    let mut out = Vec::new();
    for name in names {
        let g = group(name);
        for p in [2, 3] {
            out.extend(block_partition(&g, p).iter().cloned());
        }
    }
    out
}

fn c1(n: usize) -> Outcome {
    let mut slowest = Duration::ZERO;
    for name in CORPUS {
        let g = group(name);
        let t0 = Instant::now();
        let t = character_table(&g);
        t.verify().map_err(|e| format!("{name}: {e}"))?;
        let dt = t0.elapsed();
        slowest = slowest.max(dt);
        let sq: i64 = t.degrees().iter().map(|d| d * d).sum();
        ensure(sq as usize == g.order(), || {
            format!("{name}: sum of squared degrees {sq}")
        })?;
        ensure(dt < Duration::from_secs(10), || format!("{name}: {dt:?}"))?;
    }
    Ok(format!("{n} tables certified, slowest {} ms", slowest.as_millis()))
}

/// Minimal nonempty sets of characters whose central idempotents sum to a p-integral element.
fn oracle_blocks(g: &Subgroup, p: u64) -> Vec<Vec<usize>> {
    let t = character_table(g);
    let cl = g.classes();
    let amb = g.amb();
    let order = Cyc::from_frac(1, g.order() as i64);
    let e: Vec<Vec<Cyc>> = t
        .irr
        .iter()
        .map(|chi| {
            cl.reps
                .iter()
                .map(|&r| &(chi.degree() * chi.at(amb.inv(r))) * &order)
                .collect()
        })
        .collect();
    let k = t.irr.len();
    let mut minimal: Vec<u32> = Vec::new();
    let mut masks: Vec<u32> = (1..1u32 << k).collect();
    masks.sort_by_key(|m| m.count_ones());
    for m in masks {
        if minimal.iter().any(|&s| s & !m == 0) {
            continue;
        }
        let integral = (0..cl.len()).all(|c| {
            let s: Cyc = (0..k).filter(|i| m >> i & 1 == 1).map(|i| e[i][c].clone()).sum();
            s.is_p_integral(p)
        });
        if integral {
            minimal.push(m);
        }
    }
    let mut out: Vec<Vec<usize>> = minimal
        .iter()
        .map(|m| (0..k).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

fn partition_of(g: &Subgroup, p: u64) -> Vec<Vec<usize>> {
    block_partition(g, p).iter().map(|b| b.irr().to_vec()).collect()
}

fn c2(_: usize) -> Outcome {
    let frozen: [(&str, u64, Vec<Vec<usize>>); 3] = [
        ("S3", 2, vec![vec![0, 1], vec![2]]),
        ("S3", 3, vec![vec![0, 1, 2]]),
        ("A4", 2, vec![vec![0, 1, 2, 3]]),
    ];
    for (name, p, want) in &frozen {
        let got = partition_of(&group(name), *p);
        ensure(&got == want, || format!("{name} p={p}: {got:?}"))?;
    }
    let mut oracle = 0;
    for name in CORPUS {
        let g = group(name);
        for p in [2, 3] {
            let bl = block_partition(&g, p);
            if g.classes().len() <= 10 {
                let mut got = partition_of(&g, p);
                got.sort();
                let want = oracle_blocks(&g, p);
                ensure(got == want, || format!("{name} p={p}: {got:?} vs oracle {want:?}"))?;
                oracle += 1;
            }
            let es: Vec<Arc<AlgebraElement>> = bl.iter().map(|b| b.idempotent()).collect();
            let mut sum = AlgebraElement::zero(&g);
            for (i, e) in es.iter().enumerate() {
                ensure(e.is_central() && e.is_p_integral(p) && e.is_idempotent(), || {
                    format!("{name} p={p} block {i}")
                })?;
                for f in &es[i + 1..] {
                    ensure(e.mul(f).is_zero(), || {
                        format!("{name} p={p}: idempotents not orthogonal")
                    })?;
                }
                sum = sum.add(e);
            }
            ensure(sum == AlgebraElement::one(&g), || {
                format!("{name} p={p}: idempotents do not sum to 1")
            })?;
        }
    }
    Ok(format!(
        "3 frozen partitions, {oracle} oracle partitions, idempotents on {} groups",
        CORPUS.len()
    ))
}

fn c3(_: usize) -> Outcome {
    let mut n = 0;
    for name in CORPUS {
        let g = group(name);
        for p in [2, 3] {
            second_root_verdict(&g, p)
                .0
                .map_err(|w| format!("{name} p={p}: {w:?}"))?;
            n += 1;
        }
    }
    Ok(format!("{n} partitions agree under both roots"))
}

fn c4(_: usize) -> Outcome {
    let mut n = 0;
    let blocks = corpus_blocks(&CORPUS);
    for b in &blocks {
        n += subpair_verdict(b).map_err(|w| format!("{b:?}: {w:?}"))?;
    }
    Ok(format!("{n} subpairs over {} blocks", blocks.len()))
}

fn p_regular_zero(f: &ClassFunction, p: u64) -> bool {
    let amb = f.group().amb().clone();
    f.classes()
        .reps
        .iter()
        .filter(|&&r| amb.is_p_regular(r, p))
        .all(|&r| f.at(r).is_zero())
}

fn c5(_: usize) -> Outcome {
    let mut n = 0;
    for name in CORPUS {
        let g = group(name);
        for p in [2, 3] {
            let bes = all_brauer_elements(&g, p);
            for b in block_partition(&g, p).iter() {
                let chars = b.characters();
                for x in bes.iter().filter(|x| !belongs_to(&x.pair, b)) {
                    for chi in &chars {
                        let d = gen_decomp(chi, x.u, Some(&x.idempotent()), p).map_err(|e| e.to_string())?;
                        ensure(p_regular_zero(&d, p), || format!("{name} p={p} u={} {b:?}", x.u))?;
                        n += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{n} vanishing generalized decomposition maps"))
}

fn c6(_: usize) -> Outcome {
    let (mut n1, mut n2) = (0, 0);
    for name in CORPUS {
        let g = group(name);
        let amb = g.amb().clone();
        let irr = character_table(&g).irr.clone();
        for p in [2, 3] {
            let us: Vec<u32> = g
                .classes()
                .reps
                .iter()
                .copied()
                .filter(|&u| amb.is_p_element(u, p))
                .collect();
            let d = |chi: &ClassFunction, u: u32| gen_decomp(chi, u, None, p).unwrap();
            let fwd: Vec<Vec<ClassFunction>> = irr.iter().map(|chi| us.iter().map(|&u| d(chi, u)).collect()).collect();
            let back: Vec<Vec<ClassFunction>> = irr
                .iter()
                .map(|chi| us.iter().map(|&u| d(chi, amb.inv(u))).collect())
                .collect();
            for (i, chi) in irr.iter().enumerate() {
                for (j, psi) in irr.iter().enumerate() {
                    let lhs = chi.inner(psi).unwrap();
                    let rhs: Cyc = (0..us.len()).map(|k| fwd[i][k].inner(&back[j][k]).unwrap()).sum();
                    ensure(lhs == rhs, || format!("{name} p={p} ({i},{j}): {lhs} vs {rhs}"))?;
                    n1 += 1;
                }
            }
            for b in block_partition(&g, p).iter() {
                let be = brauer_elements(b);
                let chars = b.characters();
                for chi in &chars {
                    for psi in &chars {
                        let lhs = chi.inner(psi).unwrap();
                        let mut rhs = Cyc::zero();
                        for x in &be {
                            let e = x.idempotent();
                            let a = gen_decomp(chi, x.u, Some(&e), p).unwrap();
                            let c = gen_decomp(psi, amb.inv(x.u), Some(&e), p).unwrap();
                            rhs += a.inner(&c).unwrap();
                        }
                        ensure(lhs == rhs, || format!("{name} p={p} {b:?}: {lhs} vs {rhs}"))?;
                        n2 += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{n1} unrefined and {n2} block-refined inner products"))
}

fn linear_mod(n: &Subgroup, s: &Subgroup) -> Vec<ClassFunction> {
    character_table(n)
        .irr
        .iter()
        .filter(|chi| chi.degree() == &Cyc::one() && chi.constant_on_cosets(s))
        .cloned()
        .collect()
}

fn c7(_: usize) -> Outcome {
    let g = group("S4");
    let ks = g.fuse_up_to_conj(&g.all_subgroups());
    let mut tuples: Vec<GlobalTuple> = Vec::new();
    for p in [2, 3] {
        for k in &ks {
            let t = beta_perm_module(&g, p, k);
            check_beta(&t, Range::Representatives).map_err(|w| format!("p={p} K={k:?}: {w:?}"))?;
            tuples.push(t);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xb10c);
    let mut conditions = std::collections::BTreeSet::new();
    for i in 0..20 {
        let t = &tuples[rng.gen_range(0..tuples.len())];
        let subs = p_subgroups(&g, t.p());
        let s = subs[rng.gen_range(0..subs.len())].clone();
        let chi = t.entry(&s).clone();
        let n = g.normalizer(&s);
        let replaced = if i % 2 == 0 && !chi.is_zero() {
            chi.neg()
        } else {
            let lin = linear_mod(&n, &s);
            let m = [-2, -1, 1, 2][rng.gen_range(0..4)];
            chi.add(&lin[rng.gen_range(0..lin.len())].scale(&Cyc::from_int(m)))
                .unwrap()
        };
        let mut bad = t.clone();
        bad.set_orbit(&s, replaced).unwrap();
        match check_beta(&bad, Range::Representatives) {
            Ok(_) => return Err(format!("perturbation {i} at {s:?} accepted")),
            Err(w) => {
                ensure(!w.condition.is_empty(), || format!("perturbation {i}: empty witness"))?;
                conditions.insert(w.condition);
            }
        }
    }
    Ok(format!(
        "{} tuples accepted, 20 perturbations rejected via {conditions:?}",
        tuples.len()
    ))
}

fn random_pair_tuple(b: &Block, rng: &mut ChaCha8Rng) -> PairTuple {
    let mut reps = BTreeMap::new();
    for pe in pair_orbit_reps(b).iter() {
        let mut chi = ClassFunction::zero(&pe.normalizer());
        for psi in PairTuple::basis_characters(pe) {
            chi = chi.add(&psi.scale(&Cyc::from_int(rng.gen_range(-2..=2)))).unwrap();
        }
        reps.insert(pe.clone(), chi);
    }
    PairTuple::from_representatives(b, &reps).unwrap()
}

fn c8(_: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut generated, mut random, mut accepted) = (0, 0, 0);
    for name in CORPUS {
        let g = group(name);
        let ks = g.fuse_up_to_conj(&g.all_subgroups());
        for p in [2, 3] {
            for b in block_partition(&g, p).iter() {
                let fs = FusionSystem::of_block(b);
                let mut set = Vec::new();
                for k in &ks {
                    let beta = beta_perm_module(&g, p, k);
                    let pt = rho(&beta, b).map_err(|e| e.to_string())?;
                    ensure(
                        rho_inverse(&pt).map_err(|e| e.to_string())? == beta.cut(b).unwrap(),
                        || format!("{name} p={p} K={k:?}: rho round trip"),
                    )?;
                    ensure(pt == alpha_perm_module(b, k).unwrap(), || {
                        format!("{name} p={p} K={k:?}: alpha")
                    })?;
                    set.push(pt);
                }
                generated += set.len();
                for i in 0..50 {
                    let t = if i % 2 == 0 {
                        random_pair_tuple(b, &mut rng)
                    } else {
                        let mut t = PairTuple::zero(b);
                        for x in &set {
                            let m: i32 = rng.gen_range(-2..=2);
                            for _ in 0..m.abs() {
                                t = if m > 0 { t.add(x) } else { t.sub(x) };
                            }
                        }
                        t
                    };
                    set.push(t);
                }
                random += 50;
                for (i, t) in set.iter().enumerate() {
                    let st = pi_projection(t, &fs).map_err(|e| e.to_string())?;
                    ensure(&pi_inverse(&st).map_err(|e| e.to_string())? == t, || {
                        format!("{name} p={p}: pi round trip {i}")
                    })?;
                    let a = check_c1(t, Range::Representatives).unwrap().is_ok();
                    let c = check_c2(t, Range::Representatives).unwrap().is_ok();
                    let d = check_c3(&st, Range::Representatives).unwrap().is_ok();
                    ensure(a == c && a == d, || {
                        format!("{name} p={p} {b:?} tuple {i}: C1 {a} C2 {c} C3 {d}")
                    })?;
                    ensure(a || i >= ks.len(), || {
                        format!("{name} p={p} {b:?}: perm module {i} rejected")
                    })?;
                    accepted += a as usize;
                }
            }
        }
    }
    Ok(format!(
        "{generated} perm-module and {random} random tuples, {accepted} accepted, C1 = C2 = C3∘π"
    ))
}

fn c9(_: usize) -> Outcome {
    let g = by_name("S3").unwrap();
    let a = principal(&g, 3);
    let ab = product_block(&a, &a).unwrap();
    let gg = direct_product(&g, &g).full();
    let t = beta_perm_module(&gg, 3, &diagonal(&g.full())).cut(&ab).unwrap();
    let n = check_diagonal(&DiagonalTuple::Global(t.clone(), ab.clone()), Range::Representatives)
        .unwrap()
        .map_err(|w| format!("diagonal tuple rejected: {w:?}"))?;
    let r = p_subgroups(&gg, 3)
        .iter()
        .find(|r| !is_twisted_diagonal(r))
        .unwrap()
        .clone();
    let mut bad = t;
    bad.set_orbit(&r, ClassFunction::trivial(&gg.normalizer(&r))).unwrap();
    match check_diagonal(&DiagonalTuple::Global(bad, ab), Range::Representatives).unwrap() {
        Ok(_) => Err("planted entry accepted".into()),
        Err(w) => {
            ensure(w.condition == "twisted diagonal", || format!("{w:?}"))?;
            Ok(format!(
                "{n} checks accepted, planted entry rejected at {}",
                w.condition
            ))
        }
    }
}

fn c10(_: usize) -> Outcome {
    let gate = extended_tensor_gate();
    if let Some(w) = &gate.failure {
        return Err(format!("{w:?}"));
    }
    let s = StrongIsotypy::identity(&principal(&by_name("S3").unwrap(), 3)).unwrap();
    let mut failed = gate.clone();
    failed.failure = Some(Witness {
        condition: "gate: module oracle".into(),
        index: "planted".into(),
        elements: vec![],
        perms: vec![],
        lhs: "1".into(),
        rhs: "0".into(),
    });
    let r = check_strong_isotypy_gated(&s, Range::Representatives, &failed).unwrap();
    let blocked = matches!(&r.axiom3, Err(w) if w.condition.starts_with("(3) blocked by gate"));
    ensure(blocked, || format!("axiom 3 not blocked: {:?}", r.axiom3))?;
    Ok(format!(
        "{} instances, {} checks, failed gate blocks axiom 3",
        gate.instances, gate.checks
    ))
}

fn swapped(s: &mut StrongIsotypy) {
    let qq = s.setup().subgroups().into_iter().find(|x| x.order() == 2).unwrap();
    let chi = s.entry(&qq).clone();
    let t = character_table(chi.group());
    let c = chi.coordinates();
    let linear = |i: &usize| t.irr[*i].degree() == &Cyc::one();
    let i = (0..c.len()).filter(linear).find(|&i| !c[i].is_zero()).unwrap();
    let j = (0..c.len()).filter(linear).find(|&j| c[j].is_zero()).unwrap();
    let moved = chi
        .sub(&t.irr[i].scale(&c[i]))
        .unwrap()
        .add(&t.irr[j].scale(&c[i]))
        .unwrap();
    s.set(&qq, moved).unwrap();
}

fn c11(_: usize) -> Outcome {
    let mut diagrams = 0;
    for (name, p) in [("S3", 3), ("A4", 2)] {
        let g = by_name(name).unwrap();
        let s = StrongIsotypy::identity(&principal(&g, p)).unwrap();
        let r = check_strong_isotypy(&s, Range::Representatives).unwrap();
        ensure(r.accepted(), || format!("{name}: {r:?}"))?;
        let ir = check_isotypy(&restrict_to_isotypy(&s).unwrap()).unwrap();
        ensure(ir.accepted(), || format!("{name}: {ir:?}"))?;
        let t = strong_to_pperm(&s).unwrap();
        ensure(t.check(Range::Representatives).unwrap().is_ok(), || {
            format!("{name}: pperm tuple")
        })?;
        let back = pperm_to_strong(&t, s.setup()).unwrap();
        ensure(back.entries() == s.entries(), || format!("{name}: pperm round trip"))?;
        let d = s.setup().fusion_b().defect_group().clone();
        for qq in s.setup().subgroups() {
            for &v in d.normalizer(&qq).elems() {
                let nr = normalizer_diagram_check(&s, &qq, v).unwrap();
                ensure(nr.accepted(), || format!("{name} {qq:?} {v}: {nr:?}"))?;
                diagrams += 1;
            }
        }
    }

    let s3 = by_name("S3").unwrap();
    let mut flip = StrongIsotypy::identity(&principal(&s3, 3)).unwrap();
    let top = flip.setup().fusion_b().defect_group().clone();
    let neg = flip.entry(&top).neg();
    flip.set(&top, neg).unwrap();
    let r = check_strong_isotypy(&flip, Range::Representatives).unwrap();
    ensure(r.axiom2a.is_err(), || format!("sign flip: {r:?}"))?;

    let mut swap = StrongIsotypy::identity(&principal(&by_name("A4").unwrap(), 2)).unwrap();
    swapped(&mut swap);
    let r = check_strong_isotypy(&swap, Range::Representatives).unwrap();
    ensure(r.axiom1.is_err(), || format!("entry swap: {r:?}"))?;

    let mut bump = StrongIsotypy::identity(&principal(&s3, 3)).unwrap();
    let one = s3.trivial();
    let bumped = bump
        .entry(&one)
        .add(&ClassFunction::trivial(bump.entry(&one).group()))
        .unwrap();
    bump.set(&one, bumped).unwrap();
    let r = check_strong_isotypy(&bump, Range::Representatives).unwrap();
    ensure(matches!(&r.axiom2b, Err(w) if w.condition == "(2b)"), || {
        format!("vanishing: {r:?}")
    })?;

    Ok(format!(
        "2 families accepted, {diagrams} normalizer diagrams, 3 perturbations rejected at 2a, 1, 2b"
    ))
}

const C12_GROUPS: [&str; 9] = ["S3", "C4", "C6", "V4", "Q8", "D8", "A4", "S4", "S3xS3"];

fn c12(_: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut pairs, mut checks) = (0, 0);
    for name in C12_GROUPS {
        let g = group(name);
        for p in [2, 3] {
            let bl = block_partition(&g, p);
            for a in bl.iter() {
                for b in bl.iter() {
                    let gh = product_subgroup(a.group(), b.group());
                    let (ca, cb) = (a.characters(), b.characters());
                    for _ in 0..10 {
                        let mut mu = ClassFunction::zero(&gh);
                        for chi in &ca {
                            for psi in &cb {
                                let c = Cyc::from_int(rng.gen_range(-3..=3));
                                mu = mu.add(&outer_product(chi, &psi.dual()).scale(&c)).unwrap();
                            }
                        }
                        checks += decomposition_diagram_check(&mu, a, b)
                            .unwrap()
                            .map_err(|w| format!("{name} p={p} {a:?} {b:?}: {w:?}"))?;
                    }
                    pairs += 1;
                }
            }
        }
    }
    Ok(format!(
        "{pairs} block pairs, 10 random μ each, {checks} diagram checks"
    ))
}

fn float_free() -> Result<usize, String> {
    let mut n = 0;
    let mut stack = vec![Path::new(env!("CARGO_MANIFEST_DIR")).join("src")];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "rs") {
                let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
                for (i, line) in text.lines().enumerate() {
                    let hit = line
                        .split(|c: char| !c.is_alphanumeric() && c != '_')
                        .any(|w| w == "f32" || w == "f64");
                    ensure(!hit, || format!("{}:{}", path.display(), i + 1))?;
                }
                n += 1;
            }
        }
    }
    Ok(n)
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let criteria: [Criterion; 12] = [
        ("character tables", |_| c1(CORPUS.len())),
        ("block partitions", c2),
        ("second primitive root", c3),
        ("unique subpairs", c4),
        ("second main theorem", c5),
        ("local class functions", c6),
        ("beta coherence on S4", c7),
        ("C1, C2, C3 and round trips", c8),
        ("diagonal tuples", c9),
        ("extended tensor gate", c10),
        ("strong isotypy families", c11),
        ("decomposition diagram", c12),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(i + 1)))
            .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panic".into())));
        let ms = t0.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({ms} ms)", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why} ({ms} ms)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    let elapsed = start.elapsed();
    let last = float_free().and_then(|files| {
        ensure(elapsed < Duration::from_secs(600), || format!("elapsed {elapsed:?}"))?;
        Ok(format!(
            "{files} source files float-free, total {} ms",
            elapsed.as_millis()
        ))
    });
    match last {
        Ok(detail) => println!("PASS 13 runtime and exactness: {detail}"),
        Err(why) => {
            println!("FAIL 13 runtime and exactness: {why}");
            failed.push(13);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
