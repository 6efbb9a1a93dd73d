//! Modular vocabularies of a decorated point: reduced, signed, derived, secondary and
//! third-order vocabularies, depth functions, admissibility and criticality.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, CoreDescriptor, Layout, WeightedDualGraph};
use crate::vocab::{
    excellent_indices, factored_form, initials, is_linear, minimal_indices, perfect_indices, AlphabetId, EntryKey,
    IndexedVocabulary, Sign, VocabEntry, Word,
};

/// Home vertex and parent root of one unit of weight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexInfo {
    pub home: usize,
    pub home_id: String,
    pub home_is_root: bool,
    pub root_pos: usize,
}

/// Graph data shared by every point over the same graph.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub graph: WeightedDualGraph,
    pub core: CoreDescriptor,
    pub layout: Layout,
    pub indices: Vec<IndexInfo>,
    pub names: Vec<String>,
    reduced: Vec<Word>,
}

impl GraphContext {
    pub fn new(g: &WeightedDualGraph) -> Result<Self> {
        graph::validate(g).map_err(|e| match e {
            Error::InvalidGraph(m) => Error::InvalidGraph(m),
            other => Error::InvalidGraph(other.to_string()),
        })?;
        let layout = Layout::new(g)?;
        let core = graph::core(g)?;
        let names = g.vertices().iter().map(|v| v.id.clone()).collect();
        let mut indices = Vec::new();
        let mut reduced = Vec::new();
        for (pos, &r) in layout.roots.iter().enumerate() {
            let rv = &g.vertices()[r];
            for _ in 0..rv.weight {
                indices.push(IndexInfo { home: r, home_id: rv.id.clone(), home_is_root: true, root_pos: pos });
                reduced.push(Word::empty());
            }
            let mut longest: Vec<Word> = vec![Word::empty(); g.vertices().len()];
            for v in layout.tail_preorder(r) {
                let chain = layout.chain_to(v);
                let base = layout.parent[v]
                    .filter(|p| !layout.is_root[*p])
                    .map(|p| longest[p].clone())
                    .unwrap_or_default();
                let seg = Word::new(chain.iter().map(|&u| AlphabetId::tail(u as u32)).collect());
                let vv = &g.vertices()[v];
                let mut last = base.clone();
                for k in 1..=vv.weight as usize {
                    let w = base.concat(&seg.power(k));
                    indices.push(IndexInfo { home: v, home_id: vv.id.clone(), home_is_root: false, root_pos: pos });
                    reduced.push(w.clone());
                    last = w;
                }
                longest[v] = last;
            }
        }
        Ok(GraphContext { graph: g.clone(), core, layout, indices, names, reduced })
    }

    pub fn root_count(&self) -> usize {
        self.layout.roots.len()
    }

    pub fn weight(&self) -> usize {
        self.indices.len()
    }

    pub fn root_home_count(&self) -> usize {
        self.indices.iter().filter(|i| i.home_is_root).count()
    }

    pub fn reduced_words(&self) -> &[Word] {
        &self.reduced
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DegeneracyFlags {
    pub chi: Option<bool>,
    pub hyperelliptic_core: Option<bool>,
    pub core_conjugate_pair: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalKind {
    NoSecondary,
    BothUnique,
}

/// The two distinguished entries of a critical point; `second` receives the new letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CriticalPair {
    pub kind: CriticalKind,
    pub first: EntryKey,
    pub second: EntryKey,
}

/// Matrix cells whose words carry a bookkeeping letter, and that letter's current image.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bookkeeping {
    pub pair: (usize, usize),
    pub cells: Vec<EntryKey>,
    pub image: Word,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThirdOrder {
    pub letter: AlphabetId,
    pub vocabulary: IndexedVocabulary,
}

#[derive(Clone, Debug)]
pub struct DecoratedPoint {
    pub ctx: Arc<GraphContext>,
    pub registry: BTreeSet<AlphabetId>,
    pub s_minus: Vec<Word>,
    pub s_plus: Vec<Word>,
    pub t3: Option<ThirdOrder>,
    pub flags: DegeneracyFlags,
    pub critical: Option<CriticalPair>,
    pub hyper_pair: Option<(EntryKey, EntryKey)>,
    pub lambda: Option<Bookkeeping>,
    pub theta: Option<Bookkeeping>,
}

impl DecoratedPoint {
    /// The unmodified point over a graph.
    pub fn ground(g: &WeightedDualGraph) -> Result<Self> {
        let ctx = Arc::new(GraphContext::new(g)?);
        Ok(Self::from_context(ctx))
    }

    pub fn from_context(ctx: Arc<GraphContext>) -> Self {
        let (s_minus, s_plus) = signed_words(&ctx);
        let mut registry = BTreeSet::new();
        for w in s_minus.iter().chain(&s_plus) {
            registry.extend(w.letters().iter().copied());
        }
        for i in 0..ctx.graph.vertices().len() {
            if !ctx.layout.is_root[i] {
                registry.insert(AlphabetId::tail(i as u32));
            }
        }
        DecoratedPoint {
            ctx,
            registry,
            s_minus,
            s_plus,
            t3: None,
            flags: DegeneracyFlags::default(),
            critical: None,
            hyper_pair: None,
            lambda: None,
            theta: None,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.ctx.names
    }

    pub fn is_single_root(&self) -> bool {
        self.ctx.root_count() == 1
    }

    pub fn signed(&self) -> (IndexedVocabulary, IndexedVocabulary) {
        let mk = |ws: &[Word], sign: Sign| IndexedVocabulary {
            entries: ws
                .iter()
                .enumerate()
                .map(|(index, w)| VocabEntry { key: EntryKey { sign, index }, word: w.clone() })
                .collect(),
        };
        (mk(&self.s_minus, Sign::Minus), mk(&self.s_plus, Sign::Plus))
    }

    /// Word at an entry of the derived vocabulary.
    pub fn word_at(&self, key: EntryKey) -> &Word {
        match key.sign {
            Sign::Plus => &self.s_plus[key.index],
            _ => &self.s_minus[key.index],
        }
    }

    pub fn letters(&self) -> BTreeSet<AlphabetId> {
        let mut out = BTreeSet::new();
        for w in self.s_minus.iter().chain(&self.s_plus) {
            out.extend(w.letters().iter().copied());
        }
        if let Some(t) = &self.t3 {
            for e in &t.vocabulary.entries {
                out.extend(e.word.letters().iter().copied());
            }
        }
        out
    }
}

fn signed_words(ctx: &GraphContext) -> (Vec<Word>, Vec<Word>) {
    let n = ctx.root_count();
    let mut sm = Vec::new();
    let mut sp = Vec::new();
    for (info, w) in ctx.indices.iter().zip(&ctx.reduced) {
        match n {
            1 => {
                sm.push(w.clone());
                sp.push(w.clone());
            }
            2 => {
                if info.root_pos == 0 {
                    sm.push(w.clone());
                    sp.push(w.push(AlphabetId::edge(0)));
                } else {
                    sm.push(w.push(AlphabetId::edge(0)));
                    sp.push(w.clone());
                }
            }
            _ => {
                let l = (n - 2) as u32;
                let i = info.root_pos as u32;
                let qm = Word::new((1..=i).map(AlphabetId::edge).collect());
                let qp = Word::new(((i + 1)..=(l + 1)).rev().map(AlphabetId::edge).collect());
                sm.push(qm.concat(w));
                sp.push(qp.concat(w));
            }
        }
    }
    (sm, sp)
}

pub fn reduced_vocabulary(g: &WeightedDualGraph) -> Result<IndexedVocabulary> {
    let ctx = GraphContext::new(g)?;
    Ok(IndexedVocabulary::from_words(ctx.reduced.clone()))
}

pub fn signed_vocabularies(g: &WeightedDualGraph) -> Result<(IndexedVocabulary, IndexedVocabulary)> {
    Ok(DecoratedPoint::ground(g)?.signed())
}

/// One root: the single copy of the signed vocabulary; otherwise the sign-tagged union.
pub fn derived_vocabulary(p: &DecoratedPoint) -> IndexedVocabulary {
    if p.is_single_root() {
        let entries = p
            .s_minus
            .iter()
            .enumerate()
            .map(|(index, w)| VocabEntry { key: EntryKey { sign: Sign::Neutral, index }, word: w.clone() })
            .collect();
        return IndexedVocabulary { entries };
    }
    let (m, pl) = p.signed();
    let mut entries = m.entries;
    entries.extend(pl.entries);
    IndexedVocabulary { entries }
}

/// Initials of the residual, empty when the residual contains a trivial word.
pub fn residual_initials(v: &IndexedVocabulary) -> BTreeSet<AlphabetId> {
    if v.is_empty() || !excellent_indices(v).is_empty() {
        return BTreeSet::new();
    }
    let (_, r) = factored_form(v).expect("nonempty");
    initials(&r)
}

pub fn depth1(p: &DecoratedPoint) -> u32 {
    residual_initials(&derived_vocabulary(p)).len() as u32
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecondarySelection {
    /// One root: the unique excellent entry is removed.
    UniqueExcellent { removed: EntryKey },
    /// All perfect words on `side`; the opposite side minus index `a0` remains.
    OneSided { side: Sign, a0: usize },
    /// Two perfect words at the same index, one per side, both removed.
    PairedPerfect { a0: usize },
}

/// The secondary derived vocabulary, or `None` outside its three defining situations
/// and when it would be empty.
pub fn secondary_derived(p: &DecoratedPoint) -> Option<(IndexedVocabulary, SecondarySelection)> {
    let t = derived_vocabulary(p);
    if t.is_empty() {
        return None;
    }
    let out = if p.is_single_root() {
        let ex = excellent_indices(&t);
        if ex.len() != 1 {
            return None;
        }
        (t.without(&ex), SecondarySelection::UniqueExcellent { removed: t.entries[ex[0]].key })
    } else {
        let pf = perfect_indices(&t);
        if pf.is_empty() {
            return None;
        }
        let sides: BTreeSet<Sign> = pf.iter().map(|&i| t.entries[i].key.sign).collect();
        if sides.len() == 1 {
            let side = *sides.iter().next().unwrap();
            let pos = |i: &usize| p.ctx.indices[t.entries[*i].key.index].root_pos;
            let a0_pos = match side {
                Sign::Plus => *pf
                    .iter()
                    .min_by(|x, y| pos(y).cmp(&pos(x)).then(t.entries[**x].key.index.cmp(&t.entries[**y].key.index)))
                    .unwrap(),
                _ => *pf
                    .iter()
                    .min_by(|x, y| pos(x).cmp(&pos(y)).then(t.entries[**x].key.index.cmp(&t.entries[**y].key.index)))
                    .unwrap(),
            };
            let a0 = t.entries[a0_pos].key.index;
            let other = side.opposite();
            let entries = t
                .entries
                .iter()
                .filter(|e| e.key.sign == other && e.key.index != a0)
                .cloned()
                .collect();
            (IndexedVocabulary { entries }, SecondarySelection::OneSided { side, a0 })
        } else if pf.len() == 2 && t.entries[pf[0]].key.index == t.entries[pf[1]].key.index {
            let a0 = t.entries[pf[0]].key.index;
            (t.without(&pf), SecondarySelection::PairedPerfect { a0 })
        } else {
            return None;
        }
    };
    if out.0.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Largest number of distinguished-letter occurrences in a minimal residual word that is not a tail word.
pub fn epsilon_count(v: &IndexedVocabulary) -> u32 {
    let Ok((_, r)) = factored_form(v) else { return 0 };
    minimal_indices(&r)
        .into_iter()
        .map(|i| r.entries[i].word.letters().iter().filter(|a| a.is_distinguished()).count() as u32)
        .max()
        .unwrap_or(0)
}

/// Element of the second depth poset, ordered by `i` ascending then `j` descending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepthPair {
    pub i: u32,
    pub j: u32,
}

impl Ord for DepthPair {
    fn cmp(&self, other: &Self) -> Ordering {
        self.i.cmp(&other.i).then(other.j.cmp(&self.j))
    }
}

impl PartialOrd for DepthPair {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Display for DepthPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

pub fn depth2_of(t2: &IndexedVocabulary) -> DepthPair {
    DepthPair { i: residual_initials(t2).len() as u32, j: epsilon_count(t2) }
}

pub fn depth2(p: &DecoratedPoint) -> Option<DepthPair> {
    secondary_derived(p).map(|(t2, _)| depth2_of(&t2))
}

/// Combined depth triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthValue {
    pub level1: u32,
    pub level2: Option<DepthPair>,
    pub level3: Option<u32>,
}

pub fn depth(p: &DecoratedPoint) -> DepthValue {
    DepthValue { level1: depth1(p), level2: depth2(p), level3: depth3(p) }
}

pub fn third_derived(p: &DecoratedPoint) -> Option<&IndexedVocabulary> {
    p.t3.as_ref().map(|t| &t.vocabulary)
}

pub fn depth3(p: &DecoratedPoint) -> Option<u32> {
    third_derived(p).map(|v| residual_initials(v).len() as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admissibility {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub p4: bool,
    pub stable: bool,
}

impl Admissibility {
    pub fn all(&self) -> bool {
        self.p1 && self.p2 && self.p3 && self.p4 && self.stable
    }
    pub fn failures(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (ok, name) in [(self.p1, "P1"), (self.p2, "P2"), (self.p3, "P3"), (self.p4, "P4"), (self.stable, "stable")] {
            if !ok {
                v.push(name);
            }
        }
        v
    }
}

/// (P1)-(P4) on the nonempty minimal words of the residual of `v`.
pub fn admissibility_of(v: &IndexedVocabulary) -> Admissibility {
    let mut a = Admissibility { p1: true, p2: true, p3: true, p4: true, stable: true };
    let Ok((_, r)) = factored_form(v) else { return a };
    let mins: Vec<&Word> = minimal_indices(&r)
        .into_iter()
        .map(|i| &r.entries[i].word)
        .filter(|w| !w.is_empty())
        .collect();
    let original: Vec<&Word> = mins.iter().copied().filter(|w| w.letters().iter().all(|x| x.is_original())).collect();
    a.p1 = original.iter().all(|w| is_linear(w));
    for (i, u) in original.iter().enumerate() {
        for w in &original[i + 1..] {
            if u.pivot() != w.pivot() && u.letters().iter().any(|x| w.letters().contains(x)) {
                a.p2 = false;
            }
        }
    }
    for w in &mins {
        let ls = w.letters();
        let head = ls.iter().take_while(|x| !x.is_tail()).count();
        if ls[head..].iter().any(|x| !x.is_tail()) {
            a.p3 = false;
        }
    }
    for w in &original {
        if w.len() >= 2 {
            let (p, v) = (w.letters()[0], w.letters()[1]);
            let partner = original
                .iter()
                .any(|u| u.len() >= 2 && u.letters()[0] == p && u.letters()[1] != v);
            if !partner {
                a.p4 = false;
            }
        }
    }
    a
}

/// Which vocabulary the inductive assumptions constrain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Derived,
    Secondary,
    Third,
}

pub fn admissibility(p: &DecoratedPoint, stage: Stage) -> Admissibility {
    let stable = graph::validate(&p.ctx.graph).is_ok();
    let mut a = match stage {
        Stage::Derived => admissibility_of(&derived_vocabulary(p)),
        Stage::Secondary => secondary_derived(p).map(|(v, _)| admissibility_of(&v)).unwrap_or(Admissibility {
            p1: true,
            p2: true,
            p3: true,
            p4: true,
            stable: true,
        }),
        Stage::Third => third_derived(p).map(admissibility_of).unwrap_or(Admissibility {
            p1: true,
            p2: true,
            p3: true,
            p4: true,
            stable: true,
        }),
    };
    a.stable = stable;
    a
}

pub fn critical_pair(p: &DecoratedPoint) -> Option<CriticalPair> {
    let t = derived_vocabulary(p);
    if t.is_empty() {
        return None;
    }
    match secondary_derived(p) {
        None => {
            let pf = perfect_indices(&t);
            if pf.len() == 2 {
                Some(CriticalPair {
                    kind: CriticalKind::NoSecondary,
                    first: t.entries[pf[0]].key,
                    second: t.entries[pf[1]].key,
                })
            } else {
                None
            }
        }
        Some((t2, _)) => {
            let ex = excellent_indices(&t);
            let ex2 = excellent_indices(&t2);
            if ex.len() == 1 && ex2.len() == 1 {
                Some(CriticalPair {
                    kind: CriticalKind::BothUnique,
                    first: t.entries[ex[0]].key,
                    second: t2.entries[ex2[0]].key,
                })
            } else {
                None
            }
        }
    }
}

pub fn is_critical(p: &DecoratedPoint) -> bool {
    critical_pair(p).is_some()
}

pub fn is_first_order_critical(p: &DecoratedPoint) -> bool {
    let t = derived_vocabulary(p);
    if t.entries.iter().any(|e| e.word.letters().iter().any(|a| a.is_exceptional())) {
        return false;
    }
    let pf = perfect_indices(&t);
    pf.len() == 2 && pf.iter().all(|&i| t.entries[i].word.is_empty())
}

/// Both home vertices of the critical pair lie off the core.
pub fn chi_allowed(p: &DecoratedPoint, c: &CriticalPair) -> bool {
    !p.ctx.indices[c.first.index].home_is_root && !p.ctx.indices[c.second.index].home_is_root
}
