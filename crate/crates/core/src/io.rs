//! JSON file formats, the character-table cache, and command reports.
//!
//! Points are 1-based in every file. Elements are written as image lists in the
//! degree of their ambient group, subgroups as lists of generators, and class
//! functions as `(representative, value)` pairs, one per conjugacy class.
//! Blocks are referred to by their position in [`block_partition`].

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blocks::{
    all_pairs, block_of_pair, block_partition, defect_pairs, partition_with, reduction, subpairs_exhaustive,
    unique_subpair, Block, BlockError, BrauerPair,
};
use crate::charfun::{character_table, install_table, AlgebraElement, CharError, CharTable, ClassFunction};
use crate::cyclo::{Cyc, ReductionMap};
use crate::fusion::{FusionSystem, GroupIso};
use crate::isotypy::{
    check_2b_corollary, check_epsilon_pinning, check_isotypy, check_strong_isotypy, extended_tensor_gate,
    pperm_to_strong, restrict_to_isotypy, strong_to_pperm, IsotypyError, Setup, StrongIsotypy,
};
use crate::perm::{direct_product, named, Perm, PermGroup, Subgroup};
use crate::tuples::{
    alpha_perm_module, beta_perm_module, check_beta, check_c1, check_c2, check_c3, check_diagonal, delta_perm_module,
    pi_projection, rho, DiagonalTuple, GlobalTuple, PairTuple, Range, SubgroupTuple, TupleError, Verdict, Witness,
};

/// Environment variable naming the table cache directory.
pub const CACHE_ENV: &str = "BLOCKFORGE_CACHE_DIR";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}: at `{path}`: {message}")]
    Schema {
        file: String,
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}: `{field}`: {message}")]
    Field {
        file: String,
        field: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Fs { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Tuple(#[from] TupleError),
    #[error(transparent)]
    Isotypy(#[from] IsotypyError),
}

impl IoError {
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Schema { .. } => "schema",
            IoError::Field { .. } => "field",
            IoError::Fs { .. } => "filesystem",
            IoError::Usage(_) => "usage",
            IoError::Char(_) => "character",
            IoError::Block(_) => "block",
            IoError::Tuple(_) => "tuple",
            IoError::Isotypy(_) => "isotypy",
        }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;

fn field_err(file: &str, field: impl Into<String>, message: impl ToString) -> IoError {
    IoError::Field {
        file: file.into(),
        field: field.into(),
        message: message.to_string(),
    }
}

/// Deserializes with the JSON path of the first schema violation.
pub fn decode<T: DeserializeOwned>(file: &str, text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let v = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        IoError::Schema {
            file: file.into(),
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| IoError::Schema {
        file: file.into(),
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(v)
}

/// Pretty JSON with a trailing newline.
pub fn encode<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| IoError::Fs {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| IoError::Fs {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------- groups

/// `{"degree": n, "generators": [[images], ...]}`, optionally a direct product of two factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    pub degree: usize,
    pub generators: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Box<(GroupFile, GroupFile)>>,
}

/// Generators of a subgroup of the ambient group given alongside it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupFile {
    pub generators: Vec<Vec<usize>>,
}

pub fn emit_group(g: &PermGroup) -> GroupFile {
    GroupFile {
        degree: g.degree(),
        generators: g.generators().iter().map(|p| p.images()).collect(),
        factors: g.factors().map(|(a, b)| Box::new((emit_group(a), emit_group(b)))),
    }
}

fn parse_perm(file: &str, field: &str, degree: usize, images: &[usize]) -> Result<Perm> {
    if images.len() != degree {
        return Err(field_err(
            file,
            field,
            format!("has {} images but the degree is {degree}", images.len()),
        ));
    }
    Perm::from_images(images).map_err(|m| field_err(file, field, m))
}

pub fn element(file: &str, field: &str, amb: &PermGroup, images: &[usize]) -> Result<u32> {
    let p = parse_perm(file, field, amb.degree(), images)?;
    amb.index_of(&p)
        .ok_or_else(|| field_err(file, field, format!("{p} is not in the group")))
}

pub fn images(amb: &PermGroup, x: u32) -> Vec<usize> {
    amb.elem(x).images()
}

pub fn parse_subgroup(file: &str, field: &str, amb: &Arc<PermGroup>, gens: &[Vec<usize>]) -> Result<Subgroup> {
    let mut xs = Vec::with_capacity(gens.len());
    for (i, g) in gens.iter().enumerate() {
        xs.push(element(file, &format!("{field}[{i}]"), amb, g)?);
    }
    Ok(amb.generate(&xs))
}

pub fn emit_subgroup(s: &Subgroup) -> Vec<Vec<usize>> {
    s.gens().iter().map(|&x| images(s.amb(), x)).collect()
}

/// Canonical encoding: degree, product flag, and the sorted element list.
pub fn canonical_encoding(g: &PermGroup) -> String {
    let mut s = format!("degree={};product={};", g.degree(), g.is_product());
    for x in 0..g.order() as u32 {
        let im: Vec<String> = g.elem(x).images().iter().map(|i| i.to_string()).collect();
        s.push_str(&im.join(","));
        s.push(';');
    }
    s
}

pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

// ---------------------------------------------------------------- class functions

/// One class of a class function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassValue {
    pub rep: Vec<usize>,
    pub value: Cyc,
}

pub fn emit_class_function(chi: &ClassFunction) -> Vec<ClassValue> {
    let cl = chi.classes();
    let amb = chi.group().amb();
    cl.reps
        .iter()
        .zip(chi.values())
        .map(|(&r, v)| ClassValue {
            rep: images(amb, r),
            value: v.clone(),
        })
        .collect()
}

pub fn parse_class_function(file: &str, field: &str, group: &Subgroup, vals: &[ClassValue]) -> Result<ClassFunction> {
    let cl = group.classes();
    let mut out: Vec<Option<Cyc>> = vec![None; cl.len()];
    for (i, cv) in vals.iter().enumerate() {
        let f = format!("{field}[{i}].rep");
        let x = element(file, &f, group.amb(), &cv.rep)?;
        let c = cl
            .try_of(x)
            .ok_or_else(|| field_err(file, &f, "not in the entry's group"))?;
        if out[c].replace(cv.value.clone()).is_some() {
            return Err(field_err(file, &f, "class given twice"));
        }
    }
    if let Some(c) = out.iter().position(|v| v.is_none()) {
        let rep = group.amb().elem(cl.reps[c]).to_string();
        return Err(field_err(file, field, format!("no value for the class of {rep}")));
    }
    Ok(ClassFunction::new(group, out.into_iter().map(Option::unwrap).collect()))
}

// ---------------------------------------------------------------- character tables

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRecord {
    pub rep: Vec<usize>,
    pub size: usize,
}

/// Classes and the irreducible value matrix, rows in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    pub group: GroupFile,
    pub classes: Vec<ClassRecord>,
    pub irr: Vec<Vec<Cyc>>,
}

pub fn emit_table(t: &CharTable) -> TableFile {
    let amb = t.group.amb();
    TableFile {
        group: emit_group(amb),
        classes: t
            .classes
            .reps
            .iter()
            .zip(&t.classes.sizes)
            .map(|(&r, &size)| ClassRecord {
                rep: images(amb, r),
                size,
            })
            .collect(),
        irr: t.irr.iter().map(|c| c.values().to_vec()).collect(),
    }
}

/// Reorders columns to the group's classes and installs the table after certification.
pub fn load_table(file: &str, f: &TableFile, g: &Subgroup) -> Result<Arc<CharTable>> {
    let cl = g.classes();
    if f.classes.len() != cl.len() {
        return Err(field_err(
            file,
            "classes",
            format!("{} classes listed, the group has {}", f.classes.len(), cl.len()),
        ));
    }
    let mut col = vec![usize::MAX; cl.len()];
    for (i, c) in f.classes.iter().enumerate() {
        let fld = format!("classes[{i}].rep");
        let x = element(file, &fld, g.amb(), &c.rep)?;
        let k = cl.of(x);
        if col[k] != usize::MAX {
            return Err(field_err(file, fld, "class given twice"));
        }
        if cl.sizes[k] != c.size {
            return Err(field_err(
                file,
                format!("classes[{i}].size"),
                format!("{} but the class has {}", c.size, cl.sizes[k]),
            ));
        }
        col[k] = i;
    }
    let mut rows = Vec::with_capacity(f.irr.len());
    for (i, r) in f.irr.iter().enumerate() {
        if r.len() != cl.len() {
            return Err(field_err(
                file,
                format!("irr[{i}]"),
                format!("{} values for {} classes", r.len(), cl.len()),
            ));
        }
        rows.push(col.iter().map(|&j| r[j].clone()).collect());
    }
    Ok(install_table(g, rows)?)
}

// ---------------------------------------------------------------- realization record

/// Parameters of the reduction map `O → GF(p^d)` that fix the arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub p: u64,
    pub exponent: u64,
    pub m: u64,
    pub root_power: u64,
    pub field_degree: u32,
    /// Coefficients `c_0, ..., c_{d-1}` of the monic defining polynomial.
    pub field_polynomial: Vec<u32>,
}

impl Realization {
    pub fn of(map: &ReductionMap) -> Self {
        Realization {
            p: map.p(),
            exponent: map.exponent(),
            m: map.m(),
            root_power: map.root_power(),
            field_degree: map.field().d(),
            field_polynomial: map.field().poly().to_vec(),
        }
    }
    fn key(&self) -> String {
        format!(
            "p={};e={};m={};k={};poly={:?}",
            self.p, self.exponent, self.m, self.root_power, self.field_polynomial
        )
    }
}

// ---------------------------------------------------------------- table cache

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    /// A cached file failed to parse or certify and was replaced.
    Replaced,
}

/// Directory of certified character tables keyed by group digest, `p` and realization.
#[derive(Clone, Debug)]
pub struct TableCache {
    dir: PathBuf,
}

impl TableCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TableCache { dir: dir.into() }
    }

    pub fn key(g: &PermGroup, real: Option<&Realization>) -> String {
        let r = real.map(|r| r.key()).unwrap_or_else(|| "none".into());
        digest(&[b"table-v1", canonical_encoding(g).as_bytes(), r.as_bytes()])
    }

    pub fn path(&self, g: &PermGroup, real: Option<&Realization>) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(g, real)))
    }

    /// Loads and revalidates, or computes and stores.
    pub fn table(&self, g: &Arc<PermGroup>, real: Option<&Realization>) -> Result<(Arc<CharTable>, CacheStatus)> {
        let path = self.path(g, real);
        let full = g.full();
        let mut status = CacheStatus::Miss;
        if let Ok(text) = std::fs::read_to_string(&path) {
            let label = path.display().to_string();
            let loaded = decode::<TableFile>(&label, &text).and_then(|f| {
                if f.group != emit_group(g) && canonical_group_of(&f.group) != Some(canonical_encoding(g)) {
                    return Err(field_err(&label, "group", "cached table belongs to another group"));
                }
                load_table(&label, &f, &full)
            });
            match loaded {
                Ok(t) => return Ok((t, CacheStatus::Hit)),
                Err(e) => {
                    eprintln!("blockforge: discarding cached table {label}: {e}");
                    status = CacheStatus::Replaced;
                }
            }
        }
        let t = character_table(&full);
        std::fs::create_dir_all(&self.dir).map_err(|e| IoError::Fs {
            path: self.dir.display().to_string(),
            message: e.to_string(),
        })?;
        write(&path, &encode(&emit_table(&t)))?;
        Ok((t, status))
    }
}

fn canonical_group_of(f: &GroupFile) -> Option<String> {
    Session::new(None)
        .group("cache", f)
        .ok()
        .map(|g| canonical_encoding(&g))
}

// ---------------------------------------------------------------- session

/// Groups parsed so far (identical files share one handle) and the optional table cache.
pub struct Session {
    groups: Mutex<HashMap<GroupFile, Arc<PermGroup>>>,
    cache: Option<TableCache>,
}

impl Session {
    pub fn new(cache: Option<TableCache>) -> Self {
        Session {
            groups: Mutex::new(HashMap::new()),
            cache,
        }
    }

    /// `--cache-dir` if given, else the environment variable.
    pub fn from_env(flag: Option<&Path>) -> Self {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from));
        Session::new(dir.map(TableCache::new))
    }

    pub fn group(&self, file: &str, f: &GroupFile) -> Result<Arc<PermGroup>> {
        if let Some(g) = self.groups.lock().unwrap().get(f) {
            return Ok(g.clone());
        }
        let g = match &f.factors {
            Some(ab) => {
                let a = self.group(file, &ab.0)?;
                let b = self.group(file, &ab.1)?;
                let gh = direct_product(&a, &b);
                if f.degree != gh.degree() {
                    return Err(field_err(
                        file,
                        "degree",
                        format!("{} but the factors give {}", f.degree, gh.degree()),
                    ));
                }
                let mut xs = Vec::new();
                for (i, im) in f.generators.iter().enumerate() {
                    xs.push(element(file, &format!("generators[{i}]"), &gh, im)?);
                }
                if gh.generate(&xs).order() != gh.order() {
                    return Err(field_err(
                        file,
                        "generators",
                        "do not generate the product of the factors",
                    ));
                }
                gh
            }
            None => {
                let mut gens = Vec::with_capacity(f.generators.len());
                for (i, im) in f.generators.iter().enumerate() {
                    gens.push(parse_perm(file, &format!("generators[{i}]"), f.degree, im)?);
                }
                PermGroup::from_generators(f.degree, gens).map_err(|e| field_err(file, "generators", e))?
            }
        };
        Ok(self.groups.lock().unwrap().entry(f.clone()).or_insert(g).clone())
    }

    pub fn group_from_path(&self, path: &Path) -> Result<(Arc<PermGroup>, String)> {
        let text = read(path)?;
        let label = path.display().to_string();
        let f: GroupFile = decode(&label, &text)?;
        Ok((self.group(&label, &f)?, text))
    }

    /// Character table of the whole group, through the cache when one is configured.
    pub fn table(&self, g: &Arc<PermGroup>, real: Option<&Realization>) -> Result<(Arc<CharTable>, CacheStatus)> {
        match &self.cache {
            Some(c) => c.table(g, real),
            None => Ok((character_table(&g.full()), CacheStatus::Disabled)),
        }
    }
}

pub fn parse_group(file: &str, text: &str) -> Result<Arc<PermGroup>> {
    Session::new(None).group(file, &decode(file, text)?)
}

fn block_index(b: &Block) -> usize {
    block_partition(b.group(), b.p())
        .iter()
        .position(|x| x == b)
        .expect("block of its own group")
}

fn select_block(file: &str, g: &Subgroup, p: u64, i: usize) -> Result<Block> {
    let bs = block_partition(g, p);
    bs.get(i).cloned().ok_or_else(|| {
        field_err(
            file,
            "block",
            format!("{i} out of range, there are {} blocks", bs.len()),
        )
    })
}

// ---------------------------------------------------------------- Brauer pair references

/// `(P, e)` with `e` given by position among the blocks of `C_G(P)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRef {
    pub subgroup: Vec<Vec<usize>>,
    pub block: usize,
}

pub fn emit_pair(pe: &BrauerPair) -> PairRef {
    PairRef {
        subgroup: emit_subgroup(pe.sub()),
        block: block_index(pe.block()),
    }
}

pub fn parse_pair(file: &str, field: &str, g: &Subgroup, p: u64, r: &PairRef) -> Result<BrauerPair> {
    let s = parse_subgroup(file, &format!("{field}.subgroup"), g.amb(), &r.subgroup)?;
    if !s.is_p_group(p) || !s.is_subgroup_of(g) {
        return Err(field_err(
            file,
            format!("{field}.subgroup"),
            format!("not a {p}-subgroup"),
        ));
    }
    let c = g.centralizer(&s);
    let b = select_block(file, &c, p, r.block)
        .map_err(|_| field_err(file, format!("{field}.block"), "no such block of the centralizer"))?;
    Ok(BrauerPair::new(g, &s, b)?)
}

fn fusion_for(file: &str, b: &Block, max: Option<&PairRef>) -> Result<Arc<FusionSystem>> {
    let canonical = FusionSystem::of_block(b);
    let Some(r) = max else { return Ok(canonical) };
    let pe = parse_pair(file, "max_pair", b.group(), b.p(), r)?;
    if &pe == canonical.max_pair() {
        return Ok(canonical);
    }
    FusionSystem::new(b, pe)
        .map(Arc::new)
        .map_err(|e| field_err(file, "max_pair", e))
}

// ---------------------------------------------------------------- tuples

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TupleKind {
    /// Indexed by `p`-subgroups of `G`, entries on `N_G(P)`.
    Global,
    /// Indexed by Brauer pairs of a block, entries on `I_(P,e)`.
    Pairs,
    /// Indexed by subgroups of a defect group, entries on `I_P`.
    Subgroups,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleEntry {
    pub subgroup: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_block: Option<usize>,
    pub values: Vec<ClassValue>,
}

/// A character tuple in one of the three indexings. Missing entries are zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TupleFile {
    pub group: GroupFile,
    pub prime: u64,
    pub kind: TupleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pair: Option<PairRef>,
    pub entries: Vec<TupleEntry>,
}

/// A parsed tuple, with the block of a global tuple when one was named.
#[derive(Clone, Debug)]
pub enum AnyTuple {
    Global(GlobalTuple, Option<Block>),
    Pairs(PairTuple),
    Subgroups(SubgroupTuple),
}

pub fn emit_tuple(t: &AnyTuple) -> TupleFile {
    match t {
        AnyTuple::Global(x, b) => TupleFile {
            group: emit_group(x.group().amb()),
            prime: x.p(),
            kind: TupleKind::Global,
            block: b.as_ref().map(block_index),
            max_pair: None,
            entries: x
                .entries()
                .iter()
                .map(|(s, chi)| TupleEntry {
                    subgroup: emit_subgroup(s),
                    pair_block: None,
                    values: emit_class_function(chi),
                })
                .collect(),
        },
        AnyTuple::Pairs(x) => TupleFile {
            group: emit_group(x.block().group().amb()),
            prime: x.block().p(),
            kind: TupleKind::Pairs,
            block: Some(block_index(x.block())),
            max_pair: None,
            entries: x
                .entries()
                .iter()
                .map(|(pe, chi)| TupleEntry {
                    subgroup: emit_subgroup(pe.sub()),
                    pair_block: Some(block_index(pe.block())),
                    values: emit_class_function(chi),
                })
                .collect(),
        },
        AnyTuple::Subgroups(x) => {
            let f = x.fusion();
            TupleFile {
                group: emit_group(f.group().amb()),
                prime: f.p(),
                kind: TupleKind::Subgroups,
                block: Some(block_index(f.block())),
                max_pair: Some(emit_pair(f.max_pair())),
                entries: x
                    .entries()
                    .iter()
                    .map(|(s, chi)| TupleEntry {
                        subgroup: emit_subgroup(s),
                        pair_block: None,
                        values: emit_class_function(chi),
                    })
                    .collect(),
            }
        }
    }
}

impl Session {
    pub fn tuple(&self, file: &str, f: &TupleFile) -> Result<AnyTuple> {
        let amb = self.group(&format!("{file}: group"), &f.group)?;
        let g = amb.full();
        let p = f.prime;
        let block = f.block.map(|i| select_block(file, &g, p, i)).transpose()?;
        let need_block = || {
            block
                .clone()
                .ok_or_else(|| field_err(file, "block", "required for this kind"))
        };
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut dup = |s: String, i: usize| match seen.insert(s, i) {
            Some(j) => Err(field_err(
                file,
                format!("entries[{i}]"),
                format!("same index as entries[{j}]"),
            )),
            None => Ok(()),
        };
        match f.kind {
            TupleKind::Global => {
                let mut t = GlobalTuple::zero(&g, p);
                let mut entries = t.entries().clone();
                for (i, e) in f.entries.iter().enumerate() {
                    let s = parse_subgroup(file, &format!("entries[{i}].subgroup"), &amb, &e.subgroup)?;
                    dup(format!("{s:?}"), i)?;
                    if !entries.contains_key(&s) {
                        return Err(field_err(
                            file,
                            format!("entries[{i}].subgroup"),
                            format!("not a {p}-subgroup"),
                        ));
                    }
                    let chi =
                        parse_class_function(file, &format!("entries[{i}].values"), &g.normalizer(&s), &e.values)?;
                    entries.insert(s, chi);
                }
                t = GlobalTuple::new(&g, p, entries)?;
                Ok(AnyTuple::Global(t, block))
            }
            TupleKind::Pairs => {
                let b = need_block()?;
                let mut entries: BTreeMap<BrauerPair, ClassFunction> = PairTuple::zero(&b).entries().clone();
                for (i, e) in f.entries.iter().enumerate() {
                    let fld = format!("entries[{i}]");
                    let r = PairRef {
                        subgroup: e.subgroup.clone(),
                        block: e
                            .pair_block
                            .ok_or_else(|| field_err(file, format!("{fld}.pair_block"), "missing"))?,
                    };
                    let pe = parse_pair(file, &fld, &g, p, &r)?;
                    dup(format!("{pe:?}"), i)?;
                    if !entries.contains_key(&pe) {
                        return Err(field_err(file, fld, "not a Brauer pair of the block"));
                    }
                    let chi = parse_class_function(file, &format!("{fld}.values"), &pe.normalizer(), &e.values)?;
                    entries.insert(pe, chi);
                }
                Ok(AnyTuple::Pairs(PairTuple::new(&b, entries)?))
            }
            TupleKind::Subgroups => {
                let b = need_block()?;
                let fusion = fusion_for(file, &b, f.max_pair.as_ref())?;
                let mut entries = SubgroupTuple::zero(&fusion).entries().clone();
                for (i, e) in f.entries.iter().enumerate() {
                    let fld = format!("entries[{i}]");
                    let s = parse_subgroup(file, &format!("{fld}.subgroup"), &amb, &e.subgroup)?;
                    dup(format!("{s:?}"), i)?;
                    if !entries.contains_key(&s) {
                        return Err(field_err(
                            file,
                            format!("{fld}.subgroup"),
                            "not a subgroup of the defect group",
                        ));
                    }
                    let chi = parse_class_function(file, &format!("{fld}.values"), &fusion.inertia(&s), &e.values)?;
                    entries.insert(s, chi);
                }
                Ok(AnyTuple::Subgroups(SubgroupTuple::new(&fusion, entries)?))
            }
        }
    }
}

// ---------------------------------------------------------------- candidate families

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    /// Generators of `Q ≤ E`.
    pub q: Vec<Vec<usize>>,
    /// `χ_Q` on `Y_Q ≤ G × H`.
    pub values: Vec<ClassValue>,
}

/// Setup of a candidate strong isotypy between block `A` of `G` and block `B` of `H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySetup {
    pub group_a: GroupFile,
    pub group_b: GroupFile,
    pub prime: u64,
    pub block_a: usize,
    pub block_b: usize,
    pub max_pair_a: PairRef,
    pub max_pair_b: PairRef,
    /// Images `(y, φ(y))` of generators of `E` under `φ : E → D`.
    pub phi: Vec<(Vec<usize>, Vec<usize>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub setup: FamilySetup,
    pub entries: Vec<FamilyEntry>,
}

pub fn emit_setup(s: &Setup) -> FamilySetup {
    let (fa, fb) = (s.fusion_a(), s.fusion_b());
    let (ga, gb) = (fa.group().amb(), fb.group().amb());
    FamilySetup {
        group_a: emit_group(ga),
        group_b: emit_group(gb),
        prime: s.p(),
        block_a: block_index(fa.block()),
        block_b: block_index(fb.block()),
        max_pair_a: emit_pair(fa.max_pair()),
        max_pair_b: emit_pair(fb.max_pair()),
        phi: s
            .phi()
            .images_on(fb.defect_group())
            .into_iter()
            .map(|(y, x)| (images(gb, y), images(ga, x)))
            .collect(),
    }
}

pub fn emit_family(s: &StrongIsotypy) -> FamilyFile {
    FamilyFile {
        setup: emit_setup(s.setup()),
        entries: s
            .entries()
            .iter()
            .map(|(q, chi)| FamilyEntry {
                q: emit_subgroup(q),
                values: emit_class_function(chi),
            })
            .collect(),
    }
}

impl Session {
    pub fn setup(&self, file: &str, f: &FamilySetup) -> Result<Arc<Setup>> {
        let ga = self.group(&format!("{file}: setup.group_a"), &f.group_a)?;
        let gb = self.group(&format!("{file}: setup.group_b"), &f.group_b)?;
        let p = f.prime;
        let a = select_block(file, &ga.full(), p, f.block_a)
            .map_err(|_| field_err(file, "setup.block_a", "no such block"))?;
        let b = select_block(file, &gb.full(), p, f.block_b)
            .map_err(|_| field_err(file, "setup.block_b", "no such block"))?;
        let fa = fusion_for(file, &a, Some(&f.max_pair_a))?;
        let fb = if Arc::ptr_eq(&ga, &gb) && f.block_a == f.block_b && f.max_pair_a == f.max_pair_b {
            fa.clone()
        } else {
            fusion_for(file, &b, Some(&f.max_pair_b))?
        };
        let mut ims = Vec::new();
        for (i, (y, x)) in f.phi.iter().enumerate() {
            let y = element(file, &format!("setup.phi[{i}][0]"), &gb, y)?;
            let x = element(file, &format!("setup.phi[{i}][1]"), &ga, x)?;
            ims.push((y, x));
        }
        let phi = GroupIso::from_images(fb.defect_group(), fa.defect_group(), &ims)
            .map_err(|m| field_err(file, "setup.phi", m))?;
        Ok(Setup::new(fa, fb, phi)?)
    }

    pub fn family(&self, file: &str, f: &FamilyFile) -> Result<StrongIsotypy> {
        let setup = self.setup(file, &f.setup)?;
        let gb = setup.fusion_b().group().amb().clone();
        let mut entries = BTreeMap::new();
        for (i, e) in f.entries.iter().enumerate() {
            let fld = format!("entries[{i}]");
            let q = parse_subgroup(file, &format!("{fld}.q"), &gb, &e.q)?;
            let y = setup
                .y(&q)
                .map_err(|_| field_err(file, format!("{fld}.q"), "not a subgroup of the defect group"))?;
            let chi = parse_class_function(file, &format!("{fld}.values"), &y, &e.values)?;
            if entries.insert(q, chi).is_some() {
                return Err(field_err(file, fld, "Q given twice"));
            }
        }
        Ok(StrongIsotypy::new(&setup, entries)?)
    }
}

// ---------------------------------------------------------------- reports

/// One named verdict of a report.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictRecord {
    pub name: String,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerdictRecord {
    pub fn verdict(name: impl Into<String>, v: &Verdict) -> Self {
        match v {
            Ok(n) => VerdictRecord {
                name: name.into(),
                accepted: true,
                checks: Some(*n),
                witness: None,
                note: None,
            },
            Err(w) => VerdictRecord {
                name: name.into(),
                accepted: false,
                checks: None,
                witness: Some(w.clone()),
                note: None,
            },
        }
    }
    pub fn flag(name: impl Into<String>, ok: bool, note: Option<String>) -> Self {
        VerdictRecord {
            name: name.into(),
            accepted: ok,
            checks: None,
            witness: None,
            note,
        }
    }
}

/// Result of one command. Identical inputs give identical JSON apart from `timing_ms`.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub inputs_digest: String,
    pub realization: Vec<Realization>,
    pub verdicts: Vec<VerdictRecord>,
    pub data: serde_json::Value,
    pub timing_ms: u64,
    #[serde(skip)]
    pub matrix: Option<String>,
}

impl Report {
    pub fn accepted(&self) -> bool {
        self.verdicts.iter().all(|v| v.accepted)
    }

    pub fn to_json(&self) -> String {
        encode(self)
    }

    /// Human-readable rendering for `--format table`.
    pub fn render_table(&self) -> String {
        let mut s = format!("{}  inputs {}\n", self.command, &self.inputs_digest[..16]);
        for r in &self.realization {
            s += &format!(
                "  p={} exponent={} m={} root power {} over GF({}^{}) poly {:?}\n",
                r.p, r.exponent, r.m, r.root_power, r.p, r.field_degree, r.field_polynomial
            );
        }
        if let Some(m) = &self.matrix {
            s.push('\n');
            s += m;
        }
        s.push('\n');
        let w = self.verdicts.iter().map(|v| v.name.len()).max().unwrap_or(0);
        for v in &self.verdicts {
            let detail = match (&v.checks, &v.witness, &v.note) {
                (_, Some(wt), _) => format!(
                    "{} at {} {:?}: {} != {}",
                    wt.condition, wt.index, wt.perms, wt.lhs, wt.rhs
                ),
                (Some(n), _, _) => format!("{n} checks"),
                (_, _, Some(n)) => n.clone(),
                _ => String::new(),
            };
            s += format!(
                "{:w$}  {}  {}",
                v.name,
                if v.accepted { "accept" } else { "REJECT" },
                detail
            )
            .trim_end();
            s.push('\n');
        }
        s
    }
}

/// Column-aligned text grid.
pub fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut w = vec![0; n];
    for r in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(c.chars().count());
        }
    }
    let line = |r: &[String]| {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:>width$}", width = w[i]))
            .collect();
        cells.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header);
    for r in rows {
        s += &line(r);
    }
    s
}

// ---------------------------------------------------------------- command line

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    #[value(name = "C1")]
    C1,
    #[value(name = "C2")]
    C2,
    #[value(name = "C3")]
    C3,
    Beta,
    Diag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PermKind {
    /// `β` over all `p`-subgroups of `G`.
    Beta,
    /// `α` over the Brauer pairs of the block.
    Alpha,
    /// `δ` over the subgroups of the defect group.
    Delta,
}

#[derive(Parser, Debug)]
#[command(
    name = "blockforge",
    version,
    about = "Exact p-block invariants of small finite groups"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Table cache directory; overrides the BLOCKFORGE_CACHE_DIR environment variable.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Quantify over every element and index, and run the slow cross-checks.
    #[arg(long, global = true)]
    pub slow: bool,
    /// Write the command's artifact (table, tuple, family or isotypy file) here.
    #[arg(long, global = true)]
    pub emit: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct BlockArgs {
    #[arg(long)]
    pub group: PathBuf,
    #[arg(long)]
    pub prime: u64,
    /// Block position in the partition; defaults to the principal block where one is needed.
    #[arg(long)]
    pub block: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// Candidate-family file.
    #[arg(long, conflicts_with = "group")]
    pub family: Option<PathBuf>,
    /// Build the identity family of a block instead.
    #[arg(long, requires = "prime")]
    pub group: Option<PathBuf>,
    #[arg(long)]
    pub prime: Option<u64>,
    #[arg(long)]
    pub block: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Character table with both orthogonality relations certified.
    Chartab {
        #[arg(long)]
        group: PathBuf,
        /// Records the realization for this prime and keys the cache by it.
        #[arg(long)]
        prime: Option<u64>,
    },
    /// Block partition, idempotents and defect pairs.
    Blocks(BlockArgs),
    /// All Brauer pairs, and chain descent against exhaustive search under each maximal pair.
    BrauerPairs(BlockArgs),
    /// The fusion system of a block.
    Fusion(BlockArgs),
    /// Character tuple of a permutation module `K[G/K]`.
    PermModuleTuple {
        #[command(flatten)]
        args: BlockArgs,
        /// Subgroup file; defaults to the whole group.
        #[arg(long)]
        subgroup: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "beta")]
        kind: PermKind,
    },
    /// Coherence conditions of a tuple file.
    CoherenceCheck {
        #[arg(long)]
        tuple: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Axioms of a strong isotypy.
    StrongIsotypyCheck(FamilyArgs),
    /// The isotypy obtained by restriction, with its perfect-isometry checks.
    IsotypyDerive(FamilyArgs),
    /// Strong isotypy to p-permutation tuple and back.
    PpermRoundtrip(FamilyArgs),
    /// Arithmetic and oracle gates over the built-in corpus.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Chartab { .. } => "chartab",
            Command::Blocks(_) => "blocks",
            Command::BrauerPairs(_) => "brauer-pairs",
            Command::Fusion(_) => "fusion",
            Command::PermModuleTuple { .. } => "perm-module-tuple",
            Command::CoherenceCheck { .. } => "coherence-check",
            Command::StrongIsotypyCheck(_) => "strong-isotypy-check",
            Command::IsotypyDerive(_) => "isotypy-derive",
            Command::PpermRoundtrip(_) => "pperm-roundtrip",
            Command::Selftest => "selftest",
        }
    }
}

/// Failure output when a command cannot produce verdicts.
#[derive(Clone, Debug, Serialize)]
pub struct FailureReport {
    pub command: String,
    pub version: String,
    pub error: FailureDetail,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureDetail {
    pub kind: String,
    pub message: String,
}

/// Runs the CLI: prints the report and returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let session = Session::from_env(cli.cache_dir.as_deref());
    match run(&session, &cli) {
        Ok(r) => {
            match cli.format {
                Format::Json => print!("{}", r.to_json()),
                Format::Table => print!("{}", r.render_table()),
            }
            if r.accepted() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let f = FailureReport {
                command: cli.command.name().into(),
                version: env!("CARGO_PKG_VERSION").into(),
                error: FailureDetail {
                    kind: e.kind().into(),
                    message: e.to_string(),
                },
            };
            match cli.format {
                Format::Json => print!("{}", encode(&f)),
                Format::Table => println!("{} failed ({}): {}", f.command, f.error.kind, f.error.message),
            }
            2
        }
    }
}

struct Inputs {
    parts: Vec<Vec<u8>>,
}

impl Inputs {
    fn new(cmd: &str) -> Self {
        Inputs {
            parts: vec![cmd.as_bytes().to_vec()],
        }
    }
    fn add(&mut self, label: &str, bytes: &[u8]) {
        self.parts.push(label.as_bytes().to_vec());
        self.parts.push(bytes.to_vec());
    }
    fn digest(&self) -> String {
        let refs: Vec<&[u8]> = self.parts.iter().map(|p| p.as_slice()).collect();
        digest(&refs)
    }
}

struct Out {
    realization: Vec<Realization>,
    verdicts: Vec<VerdictRecord>,
    data: serde_json::Value,
    matrix: Option<String>,
    artifact: Option<String>,
}

impl Out {
    fn new(data: serde_json::Value) -> Self {
        Out {
            realization: vec![],
            verdicts: vec![],
            data,
            matrix: None,
            artifact: None,
        }
    }
}

fn check_prime(p: u64) -> Result<()> {
    if p < 2 || (2..p).take_while(|d| d * d <= p).any(|d| p.is_multiple_of(d)) {
        return Err(IoError::Usage(format!("{p} is not prime")));
    }
    Ok(())
}

fn range_of(slow: bool) -> Range {
    if slow {
        Range::Full
    } else {
        Range::Representatives
    }
}

/// Executes one command.
pub fn run(session: &Session, cli: &Cli) -> Result<Report> {
    let start = Instant::now();
    let name = cli.command.name();
    let mut inputs = Inputs::new(name);
    inputs.add("slow", &[cli.slow as u8]);
    let out = match &cli.command {
        Command::Chartab { group, prime } => cmd_chartab(session, &mut inputs, group, *prime)?,
        Command::Blocks(a) => cmd_blocks(session, &mut inputs, a)?,
        Command::BrauerPairs(a) => cmd_brauer_pairs(session, &mut inputs, a)?,
        Command::Fusion(a) => cmd_fusion(session, &mut inputs, a)?,
        Command::PermModuleTuple { args, subgroup, kind } => {
            cmd_perm_module(session, &mut inputs, args, subgroup.as_deref(), *kind, cli.slow)?
        }
        Command::CoherenceCheck { tuple, mode } => cmd_coherence(session, &mut inputs, tuple, *mode, cli.slow)?,
        Command::StrongIsotypyCheck(a) => cmd_strong(session, &mut inputs, a, cli.slow)?,
        Command::IsotypyDerive(a) => cmd_isotypy(session, &mut inputs, a)?,
        Command::PpermRoundtrip(a) => cmd_pperm(session, &mut inputs, a, cli.slow)?,
        Command::Selftest => cmd_selftest()?,
    };
    if let (Some(path), Some(text)) = (&cli.emit, &out.artifact) {
        write(path, text)?;
    }
    let mut realization: Vec<Realization> = Vec::new();
    for r in out.realization {
        if !realization.contains(&r) {
            realization.push(r);
        }
    }
    Ok(Report {
        command: name.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs_digest: inputs.digest(),
        realization,
        verdicts: out.verdicts,
        data: out.data,
        timing_ms: start.elapsed().as_millis() as u64,
        matrix: out.matrix,
    })
}

fn load_group(session: &Session, inputs: &mut Inputs, path: &Path) -> Result<Arc<PermGroup>> {
    let (g, text) = session.group_from_path(path)?;
    inputs.add("group", text.as_bytes());
    Ok(g)
}

fn realization(g: &PermGroup, p: u64) -> Realization {
    Realization::of(&reduction(g, p))
}

fn pretty_row(chi: &ClassFunction) -> Vec<String> {
    chi.values().iter().map(|v| v.pretty()).collect()
}

fn class_header(g: &Subgroup) -> Vec<String> {
    g.classes().reps.iter().map(|&r| g.amb().elem(r).to_string()).collect()
}

fn cmd_chartab(session: &Session, inputs: &mut Inputs, path: &Path, prime: Option<u64>) -> Result<Out> {
    let g = load_group(session, inputs, path)?;
    let real = prime.map(|p| check_prime(p).map(|_| realization(&g, p))).transpose()?;
    inputs.add("prime", &prime.unwrap_or(0).to_le_bytes());
    let (t, status) = session.table(&g, real.as_ref())?;
    if status != CacheStatus::Disabled {
        eprintln!("blockforge: table cache {status:?}");
    }
    let file = emit_table(&t);
    let mut out = Out::new(serde_json::json!({
        "order": g.order(),
        "degrees": t.degrees(),
        "table": file,
    }));
    out.verdicts.push(VerdictRecord::flag(
        "orthogonality",
        t.verify().is_ok(),
        t.verify().err().map(|e| e.to_string()),
    ));
    let mut header = vec![String::new()];
    header.extend(class_header(&t.group));
    let mut rows = vec![{
        let mut r = vec!["size".to_string()];
        r.extend(t.classes.sizes.iter().map(|s| s.to_string()));
        r
    }];
    for (i, chi) in t.irr.iter().enumerate() {
        let mut r = vec![format!("χ{i}")];
        r.extend(pretty_row(chi));
        rows.push(r);
    }
    out.matrix = Some(grid(&header, &rows));
    out.realization.extend(real);
    out.artifact = Some(encode(&file));
    Ok(out)
}

fn idempotent_values(e: &AlgebraElement, g: &Subgroup) -> Vec<ClassValue> {
    let cl = g.classes();
    cl.reps
        .iter()
        .map(|&r| ClassValue {
            rep: images(g.amb(), r),
            value: e.coeff(r),
        })
        .collect()
}

fn defect_of(order: usize, p: u64) -> u32 {
    let mut n = order as u64;
    let mut d = 0;
    while n.is_multiple_of(p) {
        n /= p;
        d += 1;
    }
    d
}

fn cmd_blocks(session: &Session, inputs: &mut Inputs, a: &BlockArgs) -> Result<Out> {
    check_prime(a.prime)?;
    let g = load_group(session, inputs, &a.group)?;
    inputs.add("prime", &a.prime.to_le_bytes());
    let real = realization(&g, a.prime);
    session.table(&g, Some(&real))?;
    let full = g.full();
    let p = a.prime;
    let bs = block_partition(&full, p);
    let es: Vec<Arc<AlgebraElement>> = bs.iter().map(|b| b.idempotent()).collect();
    let mut sum = AlgebraElement::zero(&full);
    for e in &es {
        sum = sum.add(e);
    }
    let mut orth = true;
    for (i, x) in es.iter().enumerate() {
        for (j, y) in es.iter().enumerate() {
            let prod = x.mul(y);
            orth &= if i == j {
                prod.coeffs == x.coeffs
            } else {
                prod.is_zero()
            };
        }
    }
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (i, b) in bs.iter().enumerate() {
        let d = defect_pairs(b);
        let dg = d.defect_group();
        records.push(serde_json::json!({
            "index": i,
            "irr": b.irr(),
            "degrees": b.characters().iter().map(|c| c.degree().pretty()).collect::<Vec<_>>(),
            "defect": defect_of(dg.order(), p),
            "defect_group": { "order": dg.order(), "generators": emit_subgroup(dg) },
            "max_pair": emit_pair(&d.max),
            "idempotent": idempotent_values(&es[i], &full),
        }));
        let irr: Vec<String> = b.irr().iter().map(|k| format!("χ{k}")).collect();
        rows.push(vec![
            format!("B{i}"),
            irr.join(" "),
            dg.order().to_string(),
            defect_of(dg.order(), p).to_string(),
        ]);
    }
    let mut out = Out::new(serde_json::json!({ "order": g.order(), "prime": p, "blocks": records }));
    out.verdicts.push(VerdictRecord::flag(
        "idempotents sum to 1",
        sum.coeffs == AlgebraElement::one(&full).coeffs,
        None,
    ));
    out.verdicts
        .push(VerdictRecord::flag("orthogonal idempotents", orth, None));
    out.verdicts.push(VerdictRecord::flag(
        "p-integral",
        es.iter().all(|e| e.is_p_integral(p)),
        None,
    ));
    out.verdicts
        .push(VerdictRecord::flag("central", es.iter().all(|e| e.is_central()), None));
    out.matrix = Some(grid(
        &["block".into(), "characters".into(), "|D|".into(), "defect".into()],
        &rows,
    ));
    out.realization.push(real);
    Ok(out)
}

fn blocks_to_check(full: &Subgroup, p: u64, sel: Option<usize>) -> Result<Vec<Block>> {
    Ok(match sel {
        Some(i) => vec![select_block("--block", full, p, i)?],
        None => block_partition(full, p).to_vec(),
    })
}

/// Chain descent against exhaustive search for every `Q ≤ D` under the chosen maximal pair.
pub fn subpair_verdict(b: &Block) -> Verdict {
    let d = defect_pairs(b);
    let mut n = 0;
    for q in d.max.sub().p_group_subgroups(b.p()) {
        n += 1;
        let chain = unique_subpair(&d.max, &q);
        let all = subpairs_exhaustive(&d.max, &q);
        let ok = matches!(&chain, Ok(x) if all.len() == 1 && &all[0] == x && x == d.pair(&q));
        if !ok {
            return Err(Witness {
                condition: "unique subpair".into(),
                index: format!("{q:?}"),
                elements: q.gens().to_vec(),
                perms: q.gens().iter().map(|&x| q.amb().elem(x).to_string()).collect(),
                lhs: format!("{chain:?}"),
                rhs: format!("{all:?}"),
            });
        }
    }
    Ok(n)
}

fn cmd_brauer_pairs(session: &Session, inputs: &mut Inputs, a: &BlockArgs) -> Result<Out> {
    check_prime(a.prime)?;
    let g = load_group(session, inputs, &a.group)?;
    inputs.add("prime", &a.prime.to_le_bytes());
    inputs.add("block", &a.block.map(|b| b as u64 + 1).unwrap_or(0).to_le_bytes());
    let real = realization(&g, a.prime);
    session.table(&g, Some(&real))?;
    let full = g.full();
    let p = a.prime;
    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    let chosen = blocks_to_check(&full, p, a.block)?;
    for pe in all_pairs(&full, p) {
        let owner = block_of_pair(&pe);
        if !chosen.contains(&owner) {
            continue;
        }
        pairs.push(serde_json::json!({
            "subgroup": emit_subgroup(pe.sub()),
            "order": pe.sub().order(),
            "pair_block": block_index(pe.block()),
            "block": block_index(&owner),
        }));
        rows.push(vec![
            format!("{:?}", pe.sub()),
            format!("e{}", block_index(pe.block())),
            format!("B{}", block_index(&owner)),
        ]);
    }
    let mut out = Out::new(serde_json::json!({ "prime": p, "pairs": pairs }));
    for b in &chosen {
        out.verdicts.push(VerdictRecord::verdict(
            format!("unique subpairs in B{}", block_index(b)),
            &subpair_verdict(b),
        ));
    }
    out.matrix = Some(grid(&["P".into(), "e".into(), "block".into()], &rows));
    out.realization.push(real);
    Ok(out)
}

fn cmd_fusion(session: &Session, inputs: &mut Inputs, a: &BlockArgs) -> Result<Out> {
    check_prime(a.prime)?;
    let g = load_group(session, inputs, &a.group)?;
    let bi = a.block.unwrap_or(0);
    inputs.add("prime", &a.prime.to_le_bytes());
    inputs.add("block", &(bi as u64).to_le_bytes());
    let real = realization(&g, a.prime);
    session.table(&g, Some(&real))?;
    let full = g.full();
    let p = a.prime;
    let b = select_block("--block", &full, p, bi)?;
    let f = FusionSystem::of_block(&b);
    let d = f.defect_group().clone();
    let mut subs = Vec::new();
    let mut rows = Vec::new();
    for q in f.subgroups() {
        let aut = f.aut(q).len();
        let inn = q.order() / q.centralizer(q).order();
        let rec = serde_json::json!({
            "subgroup": emit_subgroup(q),
            "order": q.order(),
            "pair_block": block_index(f.pair(q).block()),
            "aut_order": aut,
            "inn_order": inn,
            "fully_normalized": f.fully_normalized(q),
            "fully_centralized": f.fully_centralized(q),
            "centric": f.is_centric(q),
            "essential": f.is_essential(q),
        });
        rows.push(vec![
            format!("{q:?}"),
            aut.to_string(),
            inn.to_string(),
            f.is_centric(q).to_string(),
            f.is_essential(q).to_string(),
        ]);
        subs.push(rec);
    }
    let aut_d = f.aut(&d).len();
    let inn_d = d.order() / d.centralizer(&d).order();
    let p_part = |mut n: usize| {
        let mut r = 1;
        while n.is_multiple_of(p as usize) {
            n /= p as usize;
            r *= p as usize;
        }
        r
    };
    let mut out = Out::new(serde_json::json!({
        "prime": p,
        "block": bi,
        "defect_group": { "order": d.order(), "generators": emit_subgroup(&d) },
        "max_pair": emit_pair(f.max_pair()),
        "subgroups": subs,
        "essential": f.subgroups().filter(|q| f.is_essential(q)).map(emit_subgroup).collect::<Vec<_>>(),
    }));
    out.verdicts
        .push(VerdictRecord::verdict("unique subpairs", &subpair_verdict(&b)));
    out.verdicts.push(VerdictRecord::flag(
        "Inn(D) is Sylow in Aut_F(D)",
        p_part(aut_d) == p_part(inn_d),
        Some(format!("|Aut_F(D)| = {aut_d}, |Inn(D)| = {inn_d}")),
    ));
    out.matrix = Some(grid(
        &[
            "P".into(),
            "|Aut_F|".into(),
            "|Inn|".into(),
            "centric".into(),
            "essential".into(),
        ],
        &rows,
    ));
    out.realization.push(real);
    Ok(out)
}

fn cmd_perm_module(
    session: &Session,
    inputs: &mut Inputs,
    a: &BlockArgs,
    sub: Option<&Path>,
    kind: PermKind,
    slow: bool,
) -> Result<Out> {
    check_prime(a.prime)?;
    let g = load_group(session, inputs, &a.group)?;
    inputs.add("prime", &a.prime.to_le_bytes());
    inputs.add("kind", format!("{kind:?}").as_bytes());
    let real = realization(&g, a.prime);
    session.table(&g, Some(&real))?;
    let full = g.full();
    let p = a.prime;
    let k = match sub {
        Some(path) => {
            let text = read(path)?;
            inputs.add("subgroup", text.as_bytes());
            let label = path.display().to_string();
            let f: SubgroupFile = decode(&label, &text)?;
            parse_subgroup(&label, "generators", &g, &f.generators)?
        }
        None => full.clone(),
    };
    let range = range_of(slow);
    let block = a.block.map(|i| select_block("--block", &full, p, i)).transpose()?;
    inputs.add("block", &a.block.map(|b| b as u64 + 1).unwrap_or(0).to_le_bytes());
    let principal = || block.clone().unwrap_or_else(|| block_partition(&full, p)[0].clone());
    let (tuple, verdict) = match kind {
        PermKind::Beta => {
            let t = beta_perm_module(&full, p, &k);
            let v = check_beta(&t, range);
            (AnyTuple::Global(t, block.clone()), ("beta", v))
        }
        PermKind::Alpha => {
            let t = alpha_perm_module(&principal(), &k)?;
            let v = check_c1(&t, range)?;
            (AnyTuple::Pairs(t), ("C1", v))
        }
        PermKind::Delta => {
            let b = principal();
            let t = delta_perm_module(&b, &k, &FusionSystem::of_block(&b))?;
            let v = check_c3(&t, range)?;
            (AnyTuple::Subgroups(t), ("C3", v))
        }
    };
    let file = emit_tuple(&tuple);
    let mut out = Out::new(serde_json::json!({ "subgroup_order": k.order(), "tuple": file }));
    out.verdicts.push(VerdictRecord::verdict(verdict.0, &verdict.1));
    out.realization.push(real);
    out.artifact = Some(encode(&file));
    Ok(out)
}

fn cmd_coherence(session: &Session, inputs: &mut Inputs, path: &Path, mode: Mode, slow: bool) -> Result<Out> {
    let text = read(path)?;
    inputs.add("tuple", text.as_bytes());
    inputs.add("mode", format!("{mode:?}").as_bytes());
    let label = path.display().to_string();
    let f: TupleFile = decode(&label, &text)?;
    check_prime(f.prime)?;
    let g = session.group(&label, &f.group)?;
    let real = realization(&g, f.prime);
    session.table(&g, Some(&real))?;
    let t = session.tuple(&label, &f)?;
    let range = range_of(slow);
    let need_block = |b: &Option<Block>| {
        b.clone()
            .ok_or_else(|| field_err(&label, "block", "required for this mode"))
    };
    let pairs = |t: &AnyTuple| -> Result<PairTuple> {
        match t {
            AnyTuple::Global(x, b) => Ok(rho(x, &need_block(b)?)?),
            AnyTuple::Pairs(x) => Ok(x.clone()),
            AnyTuple::Subgroups(_) => Err(IoError::Usage("C1 and C2 need a global or pair tuple".into())),
        }
    };
    let (name, v) = match mode {
        Mode::Beta => match &t {
            AnyTuple::Global(x, _) => ("beta", check_beta(x, range)),
            _ => return Err(IoError::Usage("beta needs a global tuple".into())),
        },
        Mode::C1 => ("C1", check_c1(&pairs(&t)?, range)?),
        Mode::C2 => ("C2", check_c2(&pairs(&t)?, range)?),
        Mode::C3 => {
            let s = match &t {
                AnyTuple::Subgroups(x) => x.clone(),
                other => {
                    let pt = pairs(other)?;
                    pi_projection(&pt, &FusionSystem::of_block(pt.block()))?
                }
            };
            ("C3", check_c3(&s, range)?)
        }
        Mode::Diag => {
            let d = match &t {
                AnyTuple::Global(x, b) => DiagonalTuple::Global(x.clone(), need_block(b)?),
                AnyTuple::Pairs(x) => DiagonalTuple::Pairs(x.clone()),
                AnyTuple::Subgroups(x) => DiagonalTuple::Subgroups(x.clone()),
            };
            ("diag", check_diagonal(&d, range)?)
        }
    };
    let kind = f.kind;
    let mut out =
        Out::new(serde_json::json!({ "kind": kind, "entries": f.entries.len(), "range": format!("{range:?}") }));
    out.verdicts.push(VerdictRecord::verdict(name, &v));
    out.realization.push(real);
    Ok(out)
}

fn family_from_args(session: &Session, inputs: &mut Inputs, a: &FamilyArgs) -> Result<StrongIsotypy> {
    match (&a.family, &a.group) {
        (Some(path), _) => {
            let text = read(path)?;
            inputs.add("family", text.as_bytes());
            let label = path.display().to_string();
            let f: FamilyFile = decode(&label, &text)?;
            check_prime(f.setup.prime)?;
            session.family(&label, &f)
        }
        (None, Some(gp)) => {
            let p = a
                .prime
                .ok_or_else(|| IoError::Usage("--prime is required with --group".into()))?;
            check_prime(p)?;
            let g = load_group(session, inputs, gp)?;
            inputs.add("prime", &p.to_le_bytes());
            let bi = a.block.unwrap_or(0);
            inputs.add("block", &(bi as u64).to_le_bytes());
            session.table(&g, Some(&realization(&g, p)))?;
            let b = select_block("--block", &g.full(), p, bi)?;
            Ok(StrongIsotypy::identity(&b)?)
        }
        (None, None) => Err(IoError::Usage("give --family or --group with --prime".into())),
    }
}

fn setup_realizations(s: &Setup) -> Vec<Realization> {
    let ga = s.fusion_a().group().amb();
    let gb = s.fusion_b().group().amb();
    let mut v = vec![realization(ga, s.p())];
    if !Arc::ptr_eq(ga, gb) {
        v.push(realization(gb, s.p()));
    }
    v.push(realization(s.product_group().amb(), s.p()));
    v
}

fn setup_summary(s: &Setup) -> serde_json::Value {
    serde_json::json!({
        "prime": s.p(),
        "defect_a": s.fusion_a().defect_group().order(),
        "defect_b": s.fusion_b().defect_group().order(),
        "subgroups": s.subgroups().len(),
    })
}

fn cmd_strong(session: &Session, inputs: &mut Inputs, a: &FamilyArgs, slow: bool) -> Result<Out> {
    let s = family_from_args(session, inputs, a)?;
    let r = check_strong_isotypy(&s, range_of(slow))?;
    let gate = extended_tensor_gate();
    let mut out = Out::new(serde_json::json!({ "setup": setup_summary(s.setup()) }));
    out.verdicts.push(VerdictRecord::flag(
        "extended tensor gate",
        gate.passed(),
        Some(format!(
            "{} instances, {} checks, normalization {}",
            gate.instances, gate.checks, gate.normalization
        )),
    ));
    out.verdicts.push(VerdictRecord::verdict("lattice", &r.lattice));
    out.verdicts
        .push(VerdictRecord::verdict("axiom 1 (equivariance)", &r.axiom1));
    out.verdicts
        .push(VerdictRecord::verdict("axiom 2a (local compatibility)", &r.axiom2a));
    out.verdicts
        .push(VerdictRecord::verdict("axiom 2b (vanishing)", &r.axiom2b));
    out.verdicts
        .push(VerdictRecord::verdict("axiom 3 (invertibility)", &r.axiom3));
    if slow {
        out.verdicts.push(VerdictRecord::verdict(
            "epsilon pinning",
            &check_epsilon_pinning(s.setup())?,
        ));
        out.verdicts
            .push(VerdictRecord::verdict("axiom 2b corollary", &check_2b_corollary(&s)?));
    }
    out.realization = setup_realizations(s.setup());
    out.artifact = Some(encode(&emit_family(&s)));
    Ok(out)
}

/// `μ_Q` on `C_G(φQ) × C_H(Q)` for each `Q ≤ E`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsotypyFile {
    pub setup: FamilySetup,
    pub entries: Vec<FamilyEntry>,
}

fn cmd_isotypy(session: &Session, inputs: &mut Inputs, a: &FamilyArgs) -> Result<Out> {
    let s = family_from_args(session, inputs, a)?;
    let iso = restrict_to_isotypy(&s)?;
    let r = check_isotypy(&iso)?;
    let file = IsotypyFile {
        setup: emit_setup(s.setup()),
        entries: iso
            .entries()
            .iter()
            .map(|(q, mu)| FamilyEntry {
                q: emit_subgroup(q),
                values: emit_class_function(mu),
            })
            .collect(),
    };
    let mut out = Out::new(serde_json::json!({ "setup": setup_summary(s.setup()), "isotypy": file }));
    out.verdicts
        .push(VerdictRecord::verdict("bijective isometry", &r.bijection));
    out.verdicts.push(VerdictRecord::verdict("integrality", &r.integrality));
    out.verdicts.push(VerdictRecord::verdict("separation", &r.separation));
    out.verdicts
        .push(VerdictRecord::verdict("equivariance", &r.equivariance));
    out.verdicts
        .push(VerdictRecord::verdict("compatibility", &r.compatibility));
    out.realization = setup_realizations(s.setup());
    out.artifact = Some(encode(&file));
    Ok(out)
}

fn cmd_pperm(session: &Session, inputs: &mut Inputs, a: &FamilyArgs, slow: bool) -> Result<Out> {
    let s = family_from_args(session, inputs, a)?;
    let t = strong_to_pperm(&s)?;
    let coherent = t.check(range_of(slow))?;
    let back = pperm_to_strong(&t, s.setup())?;
    let file = emit_tuple(&AnyTuple::Subgroups(t.tuple.clone()));
    let support = t.tuple.entries().values().filter(|c| !c.is_zero()).count();
    let mut out = Out::new(serde_json::json!({
        "setup": setup_summary(s.setup()),
        "support": support,
        "tuple": file,
    }));
    out.verdicts
        .push(VerdictRecord::verdict("twisted-diagonal coherence", &coherent));
    out.verdicts.push(VerdictRecord::flag(
        "round trip is the identity",
        back.entries() == s.entries(),
        None,
    ));
    out.realization = setup_realizations(s.setup());
    out.artifact = Some(encode(&file));
    Ok(out)
}

/// Corpus groups used by `selftest`.
pub const CORPUS: [&str; 10] = ["S3", "C4", "C6", "V4", "Q8", "D8", "A4", "S4", "S3xS3", "A4xA4"];

/// Block partitions under the standard and the alternative primitive root, as character index sets.
pub fn second_root_verdict(g: &Subgroup, p: u64) -> (Verdict, Realization, Realization) {
    let std_map = reduction(g.amb(), p);
    let alt = ReductionMap::alternative(p, g.amb().exponent());
    let a: Vec<Vec<usize>> = block_partition(g, p).iter().map(|b| b.irr().to_vec()).collect();
    let v = match partition_with(g, p, &alt) {
        Ok(bs) => {
            let b: Vec<Vec<usize>> = bs.iter().map(|b| b.irr().to_vec()).collect();
            if a == b {
                Ok(a.len())
            } else {
                Err(Witness {
                    condition: "second primitive root".into(),
                    index: format!("{g:?} at p={p}"),
                    elements: vec![],
                    perms: vec![],
                    lhs: format!("{a:?}"),
                    rhs: format!("{b:?}"),
                })
            }
        }
        Err(e) => Err(Witness {
            condition: "second primitive root".into(),
            index: format!("{g:?} at p={p}"),
            elements: vec![],
            perms: vec![],
            lhs: format!("{a:?}"),
            rhs: e.to_string(),
        }),
    };
    (v, Realization::of(&std_map), Realization::of(&alt))
}

type CorpusResult = (String, Vec<(String, Verdict)>, Vec<Realization>);

fn cmd_selftest() -> Result<Out> {
    let results: Vec<CorpusResult> = std::thread::scope(|sc| {
        let handles: Vec<_> = CORPUS
            .iter()
            .map(|&name| {
                sc.spawn(move || {
                    let g = named::by_name(name).expect("corpus group").full();
                    let mut vs = Vec::new();
                    let mut reals = Vec::new();
                    for p in [2, 3] {
                        let (v, a, b) = second_root_verdict(&g, p);
                        vs.push((format!("second root {name} p={p}"), v));
                        reals.push(a);
                        reals.push(b);
                        for (i, b) in block_partition(&g, p).iter().enumerate() {
                            vs.push((format!("unique subpairs {name} p={p} B{i}"), subpair_verdict(b)));
                        }
                    }
                    (name.to_string(), vs, reals)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("selftest worker"))
            .collect()
    });
    let gate = extended_tensor_gate();
    let mut out = Out::new(serde_json::json!({
        "corpus": CORPUS,
        "extended_tensor_gate": { "instances": gate.instances, "checks": gate.checks, "normalization": gate.normalization },
    }));
    for (_, vs, reals) in results {
        for (n, v) in vs {
            out.verdicts.push(VerdictRecord::verdict(n, &v));
        }
        out.realization.extend(reals);
    }
    out.verdicts.push(VerdictRecord {
        name: "extended tensor gate".into(),
        accepted: gate.passed(),
        checks: Some(gate.checks),
        witness: gate.failure.clone(),
        note: None,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::named::*;

    const S3: &str = r#"{"degree": 3, "generators": [[2, 3, 1], [2, 1, 3]]}"#;

    #[test]
    fn s3_group_file() {
        let g = parse_group("s3.json", S3).unwrap();
        assert_eq!(g.order(), 6);
        let f = emit_group(&g);
        assert_eq!(encode(&f), encode(&emit_group(&parse_group("x", &encode(&f)).unwrap())));
    }

    #[test]
    fn malformed_generator_is_named() {
        let e = parse_group("bad.json", r#"{"degree": 3, "generators": [[2, 3, 1], [2, 2, 3]]}"#).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("generators[1]") && msg.contains("repeated"), "{msg}");
        let e = parse_group("bad.json", r#"{"degree": 3, "generators": [[2, 3]]}"#).unwrap_err();
        assert!(e.to_string().contains("generators[0]"));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let e = parse_group("bad.json", "{\"degree\": 3,\n \"generators\": [[2, 3, \"x\"]]}").unwrap_err();
        match e {
            IoError::Schema { path, line, .. } => {
                assert_eq!(path, "generators[0][2]");
                assert_eq!(line, 2);
            }
            other => panic!("{other}"),
        }
        assert!(matches!(
            parse_group("bad.json", r#"{"degree": 3, "gens": []}"#),
            Err(IoError::Schema { .. })
        ));
    }

    #[test]
    fn table_round_trip_recertifies() {
        let g = parse_group("s3.json", S3).unwrap();
        let t = character_table(&g.full());
        let f = emit_table(&t);
        let text = encode(&f);
        let g2 = parse_group("s3.json", S3).unwrap();
        let f2: TableFile = decode("t", &text).unwrap();
        let t2 = load_table("t", &f2, &g2.full()).unwrap();
        t2.verify().unwrap();
        assert_eq!(encode(&emit_table(&t2)), text);
        let mut bad = f2.clone();
        bad.irr[1][0] = Cyc::from_int(2);
        let g3 = parse_group("s3.json", S3).unwrap();
        assert!(matches!(load_table("t", &bad, &g3.full()), Err(IoError::Char(_))));
    }

    #[test]
    fn table_columns_follow_representatives() {
        let g = parse_group("s3.json", S3).unwrap();
        let mut f = emit_table(&character_table(&g.full()));
        f.classes.reverse();
        for r in f.irr.iter_mut() {
            r.reverse();
        }
        let g2 = parse_group("s3.json", S3).unwrap();
        let t = load_table("t", &f, &g2.full()).unwrap();
        assert_eq!(t.degrees(), vec![1, 1, 2]);
    }

    #[test]
    fn tuple_round_trip_all_kinds() {
        let session = Session::new(None);
        let g = session.group("g", &emit_group(&a4())).unwrap();
        let full = g.full();
        let b = block_partition(&full, 2)[0].clone();
        let k = full.sylow(3);
        let f = FusionSystem::of_block(&b);
        let tuples = vec![
            AnyTuple::Global(beta_perm_module(&full, 2, &k), Some(b.clone())),
            AnyTuple::Pairs(alpha_perm_module(&b, &k).unwrap()),
            AnyTuple::Subgroups(delta_perm_module(&b, &k, &f).unwrap()),
        ];
        for t in tuples {
            let text = encode(&emit_tuple(&t));
            let parsed = session.tuple("t", &decode("t", &text).unwrap()).unwrap();
            assert_eq!(encode(&emit_tuple(&parsed)), text);
        }
    }

    #[test]
    fn family_round_trip() {
        let session = Session::new(None);
        let g = session.group("g", &emit_group(&s3())).unwrap();
        let b = block_partition(&g.full(), 3)[0].clone();
        let s = StrongIsotypy::identity(&b).unwrap();
        let text = encode(&emit_family(&s));
        let back = session.family("f", &decode("f", &text).unwrap()).unwrap();
        assert_eq!(back.entries(), s.entries());
        assert_eq!(encode(&emit_family(&back)), text);
    }

    #[test]
    fn product_group_files() {
        let session = Session::new(None);
        let gh = direct_product(&s3(), &s3());
        let f = emit_group(&gh);
        assert!(f.factors.is_some());
        let g = session.group("gh", &f).unwrap();
        assert!(g.is_product());
        assert_eq!(g.order(), 36);
        let mut bad = f.clone();
        bad.generators.truncate(1);
        assert!(matches!(
            Session::new(None).group("gh", &bad),
            Err(IoError::Field { .. })
        ));
    }

    #[test]
    fn cache_keys_depend_on_realization() {
        let g = s3();
        let r2 = Realization::of(&reduction(&g, 2));
        let r3 = Realization::of(&reduction(&g, 3));
        let k = TableCache::key(&g, Some(&r2));
        assert_ne!(k, TableCache::key(&g, Some(&r3)));
        assert_ne!(k, TableCache::key(&g, None));
        assert_eq!(k, TableCache::key(&parse_group("s", S3).unwrap(), Some(&r2)));
    }

    #[test]
    fn second_root_on_small_groups() {
        for g in [s3(), a4(), cyclic(6)] {
            for p in [2, 3] {
                let (v, a, b) = second_root_verdict(&g.full(), p);
                assert!(v.is_ok());
                assert_eq!(a.m, b.m);
            }
        }
    }
}
