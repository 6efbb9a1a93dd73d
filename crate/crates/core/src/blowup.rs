//! Symbolic execution of the four blowup rounds by alphabet substitution.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{self, WeightedDualGraph};
use crate::modular::{
    chi_allowed, critical_pair, depth1, depth2_of, derived_vocabulary, is_first_order_critical, residual_initials,
    secondary_derived, Bookkeeping, CriticalPair, DecoratedPoint, DepthPair, ThirdOrder,
};
use crate::vocab::{excellent_indices, perfect_indices, AlphabetId, EntryKey, IndexedVocabulary, Kind, Sign, VocabEntry, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Round {
    Ground,
    A,
    B,
    C,
    D,
}

impl Round {
    pub fn name(self) -> &'static str {
        match self {
            Round::Ground => "ground",
            Round::A => "A",
            Round::B => "B",
            Round::C => "C",
            Round::D => "D",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounds {
    A,
    AB,
    ABC,
    ABCD,
}

impl Rounds {
    pub fn includes(self, r: Round) -> bool {
        let n = match self {
            Rounds::A => 1,
            Rounds::AB => 2,
            Rounds::ABC => 3,
            Rounds::ABCD => 4,
        };
        match r {
            Round::Ground => true,
            Round::A => n >= 1,
            Round::B => n >= 2,
            Round::C => n >= 3,
            Round::D => n >= 4,
        }
    }

    pub fn parse(s: &str) -> Option<Rounds> {
        match s {
            "A" => Some(Rounds::A),
            "AB" => Some(Rounds::AB),
            "ABC" => Some(Rounds::ABC),
            "ABCD" => Some(Rounds::ABCD),
            _ => None,
        }
    }
}

/// Which values of the geometric flags are explored. `None` inside `Explicit` means both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagPolicy {
    All,
    None,
    Explicit { chi: Option<bool>, hyperelliptic: Option<bool> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub rounds: Rounds,
    pub flags: FlagPolicy,
    pub budget: Option<u32>,
    /// Abort on the first regression instead of recording it.
    pub strict: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { rounds: Rounds::ABCD, flags: FlagPolicy::All, budget: None, strict: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchChoice {
    pub round: Round,
    pub step: String,
    pub initials: Vec<AlphabetId>,
    pub kept: Vec<AlphabetId>,
    pub fresh: Option<AlphabetId>,
    pub flag: Option<(String, bool)>,
}

#[derive(Debug)]
struct HistoryNode {
    choice: BranchChoice,
    prev: Option<Arc<HistoryNode>>,
}

/// Branch choices from the ground state, shared between descendants.
#[derive(Clone, Debug, Default)]
pub struct History {
    head: Option<Arc<HistoryNode>>,
    len: usize,
}

impl History {
    fn push(&self, choice: BranchChoice) -> History {
        History { head: Some(Arc::new(HistoryNode { choice, prev: self.head.clone() })), len: self.len + 1 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Oldest choice first.
    pub fn to_vec(&self) -> Vec<BranchChoice> {
        let mut out = Vec::with_capacity(self.len);
        let mut cur = self.head.as_deref();
        while let Some(n) = cur {
            out.push(n.choice.clone());
            cur = n.prev.as_deref();
        }
        out.reverse();
        out
    }
}

pub type StateRef = Arc<BlowupState>;

#[derive(Clone, Debug)]
pub struct BlowupState {
    pub id: String,
    pub point: DecoratedPoint,
    pub round: Round,
    pub step: u32,
    pub next_exceptional_index: u32,
    pub history: History,
    /// Left behind by a failed depth schedule; never processed again.
    pub stalled: bool,
}

fn hash_word(h: &mut Sha256, w: &Word) {
    for a in w.letters() {
        h.update([a.kind as u8]);
        h.update(a.index.to_le_bytes());
    }
    h.update([0xff]);
}

fn hash_flag(h: &mut Sha256, f: Option<bool>) {
    h.update([match f {
        None => 0,
        Some(false) => 1,
        Some(true) => 2,
    }]);
}

/// Content hash chained through the parent id, so equal ids mean equal branch paths.
fn state_id(p: &DecoratedPoint, parent: Option<(&str, &BranchChoice)>) -> String {
    let mut h = Sha256::new();
    match parent {
        None => h.update(graph::canonical_form(&p.ctx.graph)),
        Some((id, c)) => {
            h.update(id.as_bytes());
            h.update(c.round.name().as_bytes());
            h.update(c.step.as_bytes());
            for set in [&c.initials, &c.kept] {
                for a in set.iter() {
                    h.update([a.kind as u8]);
                    h.update(a.index.to_le_bytes());
                }
                h.update([0xfe]);
            }
            if let Some(f) = c.fresh {
                hash_word(&mut h, &Word::new(vec![f]));
            }
            if let Some((k, v)) = &c.flag {
                h.update(k.as_bytes());
                hash_flag(&mut h, Some(*v));
            }
        }
    }
    for w in p.s_minus.iter().chain(&p.s_plus) {
        hash_word(&mut h, w);
    }
    if let Some(t) = &p.t3 {
        for e in &t.vocabulary.entries {
            h.update([e.key.sign as u8]);
            h.update((e.key.index as u64).to_le_bytes());
            hash_word(&mut h, &e.word);
        }
    }
    hash_flag(&mut h, p.flags.chi);
    hash_flag(&mut h, p.flags.hyperelliptic_core);
    hash_flag(&mut h, p.flags.core_conjugate_pair);
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl BlowupState {
    pub fn ground(p: DecoratedPoint) -> Self {
        let id = state_id(&p, None);
        BlowupState { id, point: p, round: Round::Ground, step: 0, next_exceptional_index: 1, history: History::default(), stalled: false }
    }

    fn child(&self, point: DecoratedPoint, round: Round, step: u32, choice: BranchChoice) -> BlowupState {
        let id = state_id(&point, Some((&self.id, &choice)));
        let history = self.history.push(choice);
        BlowupState { id, point, round, step, next_exceptional_index: step + 1, history, stalled: false }
    }
}

pub fn subst_word(w: &Word, initials: &BTreeSet<AlphabetId>, kept: &BTreeSet<AlphabetId>, fresh: AlphabetId) -> Word {
    let mut out = Vec::with_capacity(w.len() + 2);
    for &a in w.letters() {
        if initials.contains(&a) {
            out.push(fresh);
            if kept.contains(&a) {
                out.push(a);
            }
        } else {
            out.push(a);
        }
    }
    Word::new(out)
}

/// Replaces every initial `p` by `fresh` (when `p` is not kept) or by `fresh.p` (when kept),
/// in both signed vocabularies, the stored third-order words and the bookkeeping images.
pub fn substitute(
    p: &DecoratedPoint,
    initials: &BTreeSet<AlphabetId>,
    kept: &BTreeSet<AlphabetId>,
    fresh: AlphabetId,
) -> Result<DecoratedPoint> {
    if !kept.is_subset(initials) || kept.len() == initials.len() {
        return Err(Error::NotProperSubset);
    }
    if p.registry.contains(&fresh) || initials.contains(&fresh) {
        return Err(Error::FreshCollision(fresh.render(p.names())));
    }
    let f = |w: &Word| subst_word(w, initials, kept, fresh);
    let mut n = p.clone();
    n.s_minus = p.s_minus.iter().map(f).collect();
    n.s_plus = p.s_plus.iter().map(f).collect();
    if let Some(t) = &mut n.t3 {
        for e in &mut t.vocabulary.entries {
            e.word = f(&e.word);
        }
    }
    for b in [&mut n.lambda, &mut n.theta].into_iter().flatten() {
        b.image = f(&b.image);
    }
    n.registry.insert(fresh);
    for a in initials.difference(kept) {
        n.registry.remove(a);
    }
    Ok(n)
}

/// Proper subsets ordered by size, then lexicographically.
pub fn proper_subsets(set: &BTreeSet<AlphabetId>) -> Vec<BTreeSet<AlphabetId>> {
    let items: Vec<AlphabetId> = set.iter().copied().collect();
    let n = items.len();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for mask in 0u64..(1u64 << n) {
        if mask.count_ones() as usize == n {
            continue;
        }
        out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out.into_iter().map(|ix| ix.into_iter().map(|i| items[i]).collect()).collect()
}

/// Records the chi value at a critical point.
pub fn set_chi(p: &DecoratedPoint, value: bool) -> Result<DecoratedPoint> {
    let c = critical_pair(p).ok_or(Error::FlagOnNonCritical)?;
    if value && !chi_allowed(p, &c) {
        return Err(Error::ChiOnForcedZero);
    }
    let mut n = p.clone();
    n.flags.chi = Some(value);
    n.critical = Some(c);
    Ok(n)
}

/// Appends the new letter to the second word of the critical pair and installs the
/// third-order vocabulary.
pub fn apply_lambda(p: &DecoratedPoint) -> Result<DecoratedPoint> {
    let c: CriticalPair = p
        .critical
        .filter(|_| p.flags.chi == Some(true))
        .ok_or_else(|| Error::InconsistentFlags("lambda requires chi = 1 at a critical point".into()))?;
    let l = AlphabetId::LAMBDA;
    if p.registry.contains(&l) {
        return Err(Error::FreshCollision("L".into()));
    }
    let before = derived_vocabulary(p);
    let a2 = c.second.index;
    let w2 = p.word_at(c.second).push(l);
    let mut n = p.clone();
    let cells = if p.is_single_root() || c.second.sign == Sign::Neutral {
        n.s_minus[a2] = w2.clone();
        n.s_plus[a2] = w2.clone();
        vec![EntryKey { sign: Sign::Minus, index: a2 }, EntryKey { sign: Sign::Plus, index: a2 }]
    } else {
        if c.second.sign == Sign::Minus {
            n.s_minus[a2] = w2.clone();
        } else {
            n.s_plus[a2] = w2.clone();
        }
        vec![c.second]
    };
    let vocabulary = match c.kind {
        crate::modular::CriticalKind::NoSecondary => {
            let mut entries: Vec<VocabEntry> = before
                .entries
                .iter()
                .filter(|e| e.key != c.first && e.key != c.second)
                .cloned()
                .collect();
            entries.push(VocabEntry { key: c.second, word: w2 });
            IndexedVocabulary { entries }
        }
        crate::modular::CriticalKind::BothUnique => {
            let after = derived_vocabulary(&n);
            IndexedVocabulary { entries: after.entries.into_iter().filter(|e| e.key != c.first).collect() }
        }
    };
    n.t3 = Some(ThirdOrder { letter: l, vocabulary });
    n.lambda = Some(Bookkeeping { pair: (c.first.index, a2), cells, image: Word::new(vec![l]) });
    n.registry.insert(l);
    Ok(n)
}

/// The two trivial perfect entries of a first-order critical point with core weight 2, by index.
pub fn hyperelliptic_pair(p: &DecoratedPoint) -> Option<(EntryKey, EntryKey)> {
    if !is_first_order_critical(p) || p.ctx.root_home_count() != 2 {
        return None;
    }
    let t = derived_vocabulary(p);
    let mut pf: Vec<EntryKey> = perfect_indices(&t).into_iter().map(|i| t.entries[i].key).collect();
    pf.sort_by_key(|k| (k.index, k.sign));
    Some((pf[0], pf[1]))
}

pub fn set_hyperelliptic(p: &DecoratedPoint, value: bool) -> Result<DecoratedPoint> {
    let pair = hyperelliptic_pair(p).ok_or(Error::FlagOnNonCritical)?;
    let mut n = p.clone();
    n.flags.hyperelliptic_core = Some(value);
    if p.is_single_root() {
        n.flags.core_conjugate_pair = Some(value);
    }
    n.hyper_pair = Some(pair);
    Ok(n)
}

/// Deletes one trivial word and turns the other into the new letter.
pub fn apply_theta(p: &DecoratedPoint) -> Result<DecoratedPoint> {
    let (e1, e2) = p
        .hyper_pair
        .filter(|_| p.flags.hyperelliptic_core == Some(true))
        .ok_or_else(|| Error::InconsistentFlags("theta requires the hyperelliptic flag".into()))?;
    let th = AlphabetId::THETA;
    if p.registry.contains(&th) {
        return Err(Error::FreshCollision("T".into()));
    }
    let t = derived_vocabulary(p);
    let a2 = e2.index;
    let w2 = p.word_at(e2).push(th);
    let mut n = p.clone();
    let cells = if p.is_single_root() {
        n.s_minus[a2] = w2.clone();
        n.s_plus[a2] = w2.clone();
        vec![EntryKey { sign: Sign::Minus, index: a2 }, EntryKey { sign: Sign::Plus, index: a2 }]
    } else {
        if e2.sign == Sign::Minus {
            n.s_minus[a2] = w2.clone();
        } else {
            n.s_plus[a2] = w2.clone();
        }
        vec![e2]
    };
    let mut entries: Vec<VocabEntry> = t.entries.iter().filter(|e| e.key != e1 && e.key != e2).cloned().collect();
    entries.push(VocabEntry { key: e2, word: w2 });
    n.t3 = Some(ThirdOrder { letter: th, vocabulary: IndexedVocabulary { entries } });
    n.theta = Some(Bookkeeping { pair: (e1.index, a2), cells, image: Word::new(vec![th]) });
    n.registry.insert(th);
    Ok(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    ExcellentAfterA,
    ExcellentAfterB,
    LambdaNotInitial,
    ThetaNotInitial,
    DepthJump,
    OrderRegression,
    Stranded,
    BudgetExceeded,
    Admissibility,
    Diagonalization,
    NegativeControl,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::ExcellentAfterA => "excellent-after-A",
            ViolationKind::ExcellentAfterB => "excellent-after-B",
            ViolationKind::LambdaNotInitial => "lambda-not-initial",
            ViolationKind::ThetaNotInitial => "theta-not-initial",
            ViolationKind::DepthJump => "depth-jump",
            ViolationKind::OrderRegression => "order-regression",
            ViolationKind::Stranded => "stranded-center",
            ViolationKind::BudgetExceeded => "budget-exceeded",
            ViolationKind::Admissibility => "admissibility",
            ViolationKind::Diagonalization => "diagonalization",
            ViolationKind::NegativeControl => "negative-control",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub graph: String,
    pub state: String,
    pub round: Round,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Child {
    pub parent: String,
    pub choice: BranchChoice,
    pub state: StateRef,
}

/// One blowup step (or flag branching) of one round.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub round: Round,
    pub step: u32,
    pub alpha: Option<DepthPair>,
    pub centers: Vec<String>,
    pub children: Vec<Child>,
}

impl StepRecord {
    pub fn label(&self) -> String {
        match (self.round, self.alpha) {
            (_, Some(a)) => format!("{}{}", self.round.name(), a),
            (Round::C, None) if self.step == 0 => "C:chi".into(),
            (Round::D, None) if self.step == 0 => "D:hyperelliptic".into(),
            _ => format!("{}{}", self.round.name(), self.step),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub population: BTreeMap<String, usize>,
    pub centers: BTreeMap<String, usize>,
    pub steps: BTreeMap<String, u32>,
    pub max_depth1: u32,
    pub max_depth2: Option<DepthPair>,
    pub max_depth3: u32,
}

#[derive(Clone, Debug)]
pub struct TerminalForest {
    pub graph: String,
    pub ground: BlowupState,
    pub steps: Vec<StepRecord>,
    pub frontiers: Vec<(Round, Vec<StateRef>)>,
    pub terminals: Vec<StateRef>,
    pub pre_lambda: Vec<StateRef>,
    pub anomalies: Vec<Violation>,
    pub stats: RunStats,
}

impl TerminalForest {
    pub fn frontier(&self, r: Round) -> Option<&[StateRef]> {
        self.frontiers.iter().find(|(x, _)| *x == r).map(|(_, v)| v.as_slice())
    }
}

fn in_p_a(p: &DecoratedPoint) -> Option<u32> {
    let d = depth1(p);
    (d > 0).then_some(d)
}

fn in_p_b(p: &DecoratedPoint) -> Option<(DepthPair, IndexedVocabulary)> {
    let (t2, _) = secondary_derived(p)?;
    if !excellent_indices(&t2).is_empty() {
        return None;
    }
    Some((depth2_of(&t2), t2))
}

fn in_p_third(p: &DecoratedPoint, letter: AlphabetId) -> Option<BTreeSet<AlphabetId>> {
    let t = p.t3.as_ref()?;
    if t.letter != letter {
        return None;
    }
    let ini = residual_initials(&t.vocabulary);
    ini.contains(&letter).then_some(ini)
}

pub fn in_center_a(p: &DecoratedPoint) -> bool {
    in_p_a(p).is_some()
}

pub fn in_center_b(p: &DecoratedPoint) -> Option<DepthPair> {
    in_p_b(p).map(|x| x.0)
}

pub fn in_center_third(p: &DecoratedPoint, letter: AlphabetId) -> Option<u32> {
    in_p_third(p, letter).map(|s| s.len() as u32)
}

struct Runner<'a> {
    opts: &'a EngineOptions,
    graph: String,
    weight: u32,
    steps: Vec<StepRecord>,
    anomalies: Vec<Violation>,
    pre_lambda: Vec<StateRef>,
    stats: RunStats,
}

impl Runner<'_> {
    fn budget(&self, default: u32) -> u32 {
        self.opts.budget.unwrap_or(default)
    }

    fn round_a(&mut self, mut states: Vec<StateRef>) -> Result<Vec<StateRef>> {
        let budget = self.budget(2 * self.weight + 2);
        let mut k = 0u32;
        loop {
            let pending = states.iter().filter_map(|s| in_p_a(&s.point)).any(|d| d > k);
            if !pending {
                break;
            }
            if k >= budget {
                if self.opts.strict {
                    return Err(Error::StepBudgetExceeded { round: "A".into(), budget });
                }
                for s in states.iter().filter(|s| in_p_a(&s.point).is_some_and(|d| d > k)) {
                    self.anomalies.push(Violation {
                        kind: ViolationKind::BudgetExceeded,
                        graph: self.graph.clone(),
                        state: s.id.clone(),
                        round: Round::A,
                        detail: format!("budget {budget}"),
                    });
                }
                break;
            }
            let mut rec = StepRecord { round: Round::A, step: k + 1, alpha: None, centers: vec![], children: vec![] };
            let mut next = Vec::with_capacity(states.len());
            for st in states {
                if in_p_a(&st.point) != Some(k + 1) {
                    next.push(st);
                    continue;
                }
                rec.centers.push(st.id.clone());
                if k == 0 {
                    next.push(st);
                    continue;
                }
                let ini = residual_initials(&derived_vocabulary(&st.point));
                let fresh = AlphabetId::new(Kind::Exc1, k + 1);
                for kept in proper_subsets(&ini) {
                    let pt = substitute(&st.point, &ini, &kept, fresh)?;
                    let d = depth1(&pt);
                    if self.opts.strict && d != 0 && d < k + 2 {
                        return Err(Error::DepthRegression { round: "A".into(), step: k + 1, depth: d });
                    }
                    self.stats.max_depth1 = self.stats.max_depth1.max(d);
                    let choice = BranchChoice {
                        round: Round::A,
                        step: format!("A{}", k + 1),
                        initials: ini.iter().copied().collect(),
                        kept: kept.iter().copied().collect(),
                        fresh: Some(fresh),
                        flag: None,
                    };
                    let child = Arc::new(st.child(pt, Round::A, k + 1, choice.clone()));
                    rec.children.push(Child { parent: st.id.clone(), choice, state: child.clone() });
                    next.push(child);
                }
            }
            if !rec.centers.is_empty() {
                *self.stats.centers.entry("A".into()).or_default() += rec.centers.len();
                self.steps.push(rec);
            }
            states = next;
            k += 1;
        }
        self.stats.steps.insert("A".into(), k);
        for s in &mut states {
            if let Some(d) = in_p_a(&s.point) {
                if d <= k && !s.stalled {
                    Arc::make_mut(s).stalled = true;
                }
            }
        }
        let stranded: Vec<(String, u32)> =
            states.iter().filter_map(|s| in_p_a(&s.point).map(|d| (s.id.clone(), d))).collect();
        for (id, d) in stranded {
            self.anomalies.push(Violation {
                kind: ViolationKind::Stranded,
                graph: self.graph.clone(),
                state: id,
                round: Round::A,
                detail: format!("depth {d} below schedule"),
            });
        }
        Ok(states)
    }

    fn round_b(&mut self, mut states: Vec<StateRef>) -> Result<Vec<StateRef>> {
        let w = self.weight + 2;
        let budget = self.budget(4 * w * w);
        let mut rank = 0u32;
        let mut current: Option<DepthPair> = None;
        let mut passed: HashSet<String> = HashSet::new();
        let mut order: HashMap<String, Option<DepthPair>> =
            states.iter().map(|s| (s.id.clone(), in_p_b(&s.point).map(|x| x.0))).collect();
        loop {
            let alpha = states
                .iter()
                .filter(|s| !s.stalled && !passed.contains(&s.id))
                .filter_map(|s| order[&s.id])
                .min();
            let Some(alpha) = alpha else { break };
            if let Some(c) = current {
                if alpha <= c {
                    if self.opts.strict {
                        return Err(Error::OrderRegression { center: c.to_string(), child: alpha.to_string() });
                    }
                    for s in states.iter_mut() {
                        if !s.stalled && order[&s.id] == Some(alpha) {
                            Arc::make_mut(s).stalled = true;
                        }
                    }
                    continue;
                }
            }
            if rank >= budget {
                if self.opts.strict {
                    return Err(Error::StepBudgetExceeded { round: "B".into(), budget });
                }
                for s in states.iter().filter(|s| !s.stalled && order[&s.id].is_some()) {
                    self.anomalies.push(Violation {
                        kind: ViolationKind::BudgetExceeded,
                        graph: self.graph.clone(),
                        state: s.id.clone(),
                        round: Round::B,
                        detail: format!("budget {budget}"),
                    });
                }
                break;
            }
            current = Some(alpha);
            rank += 1;
            let mut rec = StepRecord { round: Round::B, step: rank, alpha: Some(alpha), centers: vec![], children: vec![] };
            let mut next = Vec::with_capacity(states.len());
            for st in states {
                if st.stalled || passed.contains(&st.id) || order[&st.id] != Some(alpha) {
                    next.push(st);
                    continue;
                }
                rec.centers.push(st.id.clone());
                if alpha.i == 1 {
                    passed.insert(st.id.clone());
                    next.push(st);
                    continue;
                }
                let (_, t2) = in_p_b(&st.point).expect("center state lies in the round-B locus");
                let ini = residual_initials(&t2);
                let fresh = AlphabetId::new(Kind::Exc2, rank);
                for kept in proper_subsets(&ini) {
                    let pt = substitute(&st.point, &ini, &kept, fresh)?;
                    let d = in_p_b(&pt).map(|x| x.0);
                    if let Some(d) = d {
                        if self.opts.strict && d <= alpha {
                            return Err(Error::OrderRegression { center: alpha.to_string(), child: d.to_string() });
                        }
                        if self.stats.max_depth2.is_none_or(|m| d > m) {
                            self.stats.max_depth2 = Some(d);
                        }
                    }
                    let choice = BranchChoice {
                        round: Round::B,
                        step: format!("B{alpha}"),
                        initials: ini.iter().copied().collect(),
                        kept: kept.iter().copied().collect(),
                        fresh: Some(fresh),
                        flag: None,
                    };
                    let child = Arc::new(st.child(pt, Round::B, rank, choice.clone()));
                    order.insert(child.id.clone(), d);
                    rec.children.push(Child { parent: st.id.clone(), choice, state: child.clone() });
                    next.push(child);
                }
            }
            *self.stats.centers.entry("B".into()).or_default() += rec.centers.len();
            self.steps.push(rec);
            states = next;
        }
        self.stats.steps.insert("B".into(), rank);
        Ok(states)
    }

    fn flag_values(&self, chi: bool, forced: bool) -> Result<Vec<bool>> {
        let explicit = match self.opts.flags {
            FlagPolicy::All => None,
            FlagPolicy::None => Some(false),
            FlagPolicy::Explicit { chi: c, hyperelliptic: h } => {
                if chi {
                    c
                } else {
                    h
                }
            }
        };
        match explicit {
            None if forced => Ok(vec![false]),
            None => Ok(vec![false, true]),
            Some(true) if forced => {
                if chi && self.opts.strict {
                    Err(Error::ChiOnForcedZero)
                } else {
                    Ok(vec![false])
                }
            }
            Some(v) => Ok(vec![v]),
        }
    }

    fn round_c(&mut self, states: Vec<StateRef>) -> Result<Vec<StateRef>> {
        let mut rec = StepRecord { round: Round::C, step: 0, alpha: None, centers: vec![], children: vec![] };
        let mut out = Vec::with_capacity(states.len());
        for st in states {
            let Some(c) = critical_pair(&st.point) else {
                out.push(st);
                continue;
            };
            rec.centers.push(st.id.clone());
            let forced = !chi_allowed(&st.point, &c);
            for v in self.flag_values(true, forced)? {
                let marked = set_chi(&st.point, v)?;
                let choice = BranchChoice {
                    round: Round::C,
                    step: "C:chi".into(),
                    initials: vec![],
                    kept: vec![],
                    fresh: if v { Some(AlphabetId::LAMBDA) } else { None },
                    flag: Some(("chi".into(), v)),
                };
                let pt = if v {
                    let snap = Arc::new(st.child(marked.clone(), Round::C, 0, choice.clone()));
                    self.pre_lambda.push(snap);
                    apply_lambda(&marked)?
                } else {
                    marked
                };
                let child = Arc::new(st.child(pt, Round::C, 0, choice.clone()));
                rec.children.push(Child { parent: st.id.clone(), choice, state: child.clone() });
                out.push(child);
            }
        }
        *self.stats.centers.entry("C:chi".into()).or_default() += rec.centers.len();
        if !rec.centers.is_empty() {
            self.steps.push(rec);
        }
        self.round_inductive(out, Round::C, AlphabetId::LAMBDA, Kind::Exc3)
    }

    fn round_d(&mut self, states: Vec<StateRef>) -> Result<Vec<StateRef>> {
        let mut rec = StepRecord { round: Round::D, step: 0, alpha: None, centers: vec![], children: vec![] };
        let mut out = Vec::with_capacity(states.len());
        for st in states {
            if hyperelliptic_pair(&st.point).is_none() {
                out.push(st);
                continue;
            }
            rec.centers.push(st.id.clone());
            for v in self.flag_values(false, false)? {
                let marked = set_hyperelliptic(&st.point, v)?;
                let pt = if v { apply_theta(&marked)? } else { marked };
                let choice = BranchChoice {
                    round: Round::D,
                    step: "D:hyperelliptic".into(),
                    initials: vec![],
                    kept: vec![],
                    fresh: if v { Some(AlphabetId::THETA) } else { None },
                    flag: Some(("hyperelliptic".into(), v)),
                };
                let child = Arc::new(st.child(pt, Round::D, 0, choice.clone()));
                rec.children.push(Child { parent: st.id.clone(), choice, state: child.clone() });
                out.push(child);
            }
        }
        *self.stats.centers.entry("D:hyperelliptic".into()).or_default() += rec.centers.len();
        if !rec.centers.is_empty() {
            self.steps.push(rec);
        }
        self.round_inductive(out, Round::D, AlphabetId::THETA, Kind::Exc4)
    }

    /// Inner induction of rounds C and D, driven by the initials of the third-order vocabulary.
    fn round_inductive(
        &mut self,
        mut states: Vec<StateRef>,
        round: Round,
        letter: AlphabetId,
        kind: Kind,
    ) -> Result<Vec<StateRef>> {
        let budget = self.budget(2 * self.weight + 4);
        let mut k = 0u32;
        loop {
            let pending = states
                .iter()
                .filter_map(|s| in_p_third(&s.point, letter))
                .any(|ini| ini.len() as u32 > k);
            if !pending {
                break;
            }
            if k >= budget {
                if self.opts.strict {
                    return Err(Error::StepBudgetExceeded { round: round.name().into(), budget });
                }
                for s in states.iter().filter(|s| in_p_third(&s.point, letter).is_some()) {
                    self.anomalies.push(Violation {
                        kind: ViolationKind::BudgetExceeded,
                        graph: self.graph.clone(),
                        state: s.id.clone(),
                        round,
                        detail: format!("budget {budget}"),
                    });
                }
                break;
            }
            let mut rec = StepRecord { round, step: k + 1, alpha: None, centers: vec![], children: vec![] };
            let mut next = Vec::with_capacity(states.len());
            for st in states {
                let Some(ini) = in_p_third(&st.point, letter).filter(|i| i.len() as u32 == k + 1) else {
                    next.push(st);
                    continue;
                };
                rec.centers.push(st.id.clone());
                if k == 0 {
                    next.push(st);
                    continue;
                }
                let fresh = AlphabetId::new(kind, k + 1);
                for kept in proper_subsets(&ini) {
                    let pt = substitute(&st.point, &ini, &kept, fresh)?;
                    if let Some(ci) = in_p_third(&pt, letter) {
                        let d = ci.len() as u32;
                        if self.opts.strict && d < k + 2 {
                            return Err(Error::DepthRegression { round: round.name().into(), step: k + 1, depth: d });
                        }
                        self.stats.max_depth3 = self.stats.max_depth3.max(d);
                    }
                    let choice = BranchChoice {
                        round,
                        step: format!("{}{}", round.name(), k + 1),
                        initials: ini.iter().copied().collect(),
                        kept: kept.iter().copied().collect(),
                        fresh: Some(fresh),
                        flag: None,
                    };
                    let child = Arc::new(st.child(pt, round, k + 1, choice.clone()));
                    rec.children.push(Child { parent: st.id.clone(), choice, state: child.clone() });
                    next.push(child);
                }
            }
            if !rec.centers.is_empty() {
                *self.stats.centers.entry(round.name().into()).or_default() += rec.centers.len();
                self.steps.push(rec);
            }
            states = next;
            k += 1;
        }
        self.stats.steps.insert(round.name().into(), k);
        let stranded: Vec<(String, usize)> = states
            .iter()
            .filter_map(|s| in_p_third(&s.point, letter).map(|i| (s.id.clone(), i.len())))
            .collect();
        for (id, d) in stranded {
            self.anomalies.push(Violation {
                kind: ViolationKind::Stranded,
                graph: self.graph.clone(),
                state: id,
                round,
                detail: format!("depth {d} below schedule"),
            });
        }
        Ok(states)
    }
}

fn sorted(mut v: Vec<StateRef>) -> Vec<StateRef> {
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// Runs the requested rounds over one graph.
pub fn run_all(g: &WeightedDualGraph, opts: &EngineOptions) -> Result<TerminalForest> {
    let ground = BlowupState::ground(DecoratedPoint::ground(g)?);
    let mut r = Runner {
        opts,
        graph: graph::to_notation(g),
        weight: g.total_weight(),
        steps: Vec::new(),
        anomalies: Vec::new(),
        pre_lambda: Vec::new(),
        stats: RunStats::default(),
    };
    r.stats.max_depth1 = depth1(&ground.point);
    let mut frontiers = Vec::new();
    let mut states = vec![Arc::new(ground.clone())];
    frontiers.push((Round::Ground, states.clone()));
    for round in [Round::A, Round::B, Round::C, Round::D] {
        if !opts.rounds.includes(round) {
            break;
        }
        states = match round {
            Round::A => r.round_a(states)?,
            Round::B => r.round_b(states)?,
            Round::C => r.round_c(states)?,
            _ => r.round_d(states)?,
        };
        states = sorted(states);
        r.stats.population.insert(round.name().into(), states.len());
        frontiers.push((round, states.clone()));
    }
    let mut pre_lambda = std::mem::take(&mut r.pre_lambda);
    pre_lambda.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(TerminalForest {
        graph: r.graph,
        ground,
        steps: r.steps,
        frontiers,
        terminals: states,
        pre_lambda,
        anomalies: r.anomalies,
        stats: r.stats,
    })
}

/// Designated vocabulary check and depth schedule for every generated state, plus the
/// anomalies recorded during the run.
pub fn verify_assumptions(forest: &TerminalForest) -> Vec<Violation> {
    use crate::modular::{admissibility, Stage};
    let mut out = forest.anomalies.clone();
    let graph = forest.graph.clone();
    let mut push = |kind, st: &BlowupState, round, detail: String| {
        out.push(Violation { kind, graph: graph.clone(), state: st.id.clone(), round, detail });
    };
    let check_adm = |st: &BlowupState, stage: Stage, round: Round, push: &mut dyn FnMut(ViolationKind, &BlowupState, Round, String)| {
        let a = admissibility(&st.point, stage);
        if !a.all() {
            push(ViolationKind::Admissibility, st, round, a.failures().join(","));
        }
    };
    check_adm(&forest.ground, Stage::Derived, Round::Ground, &mut push);
    for rec in &forest.steps {
        for c in &rec.children {
            let st = &c.state;
            match rec.round {
                Round::A => {
                    check_adm(st, Stage::Derived, Round::A, &mut push);
                    let d = depth1(&st.point);
                    if d != 0 && d < rec.step + 1 {
                        push(ViolationKind::DepthJump, st, Round::A, format!("step {} child depth {}", rec.step, d));
                    }
                }
                Round::B => {
                    check_adm(st, Stage::Secondary, Round::B, &mut push);
                    if let (Some(alpha), Some(d)) = (rec.alpha, in_center_b(&st.point)) {
                        if d <= alpha {
                            push(ViolationKind::OrderRegression, st, Round::B, format!("center {alpha} child {d}"));
                        }
                    }
                }
                Round::C | Round::D => {
                    check_adm(st, Stage::Third, rec.round, &mut push);
                    let letter = if rec.round == Round::C { AlphabetId::LAMBDA } else { AlphabetId::THETA };
                    if rec.step > 0 {
                        if let Some(d) = in_center_third(&st.point, letter) {
                            if d < rec.step + 1 {
                                push(ViolationKind::DepthJump, st, rec.round, format!("step {} child depth {}", rec.step, d));
                            }
                        }
                    }
                }
                Round::Ground => {}
            }
        }
    }
    out
}

/// The terminal propositions of each completed round, diagonalizability of the final
/// states and failure on every pre-blowup snapshot.
pub fn terminal_checks(forest: &TerminalForest, rounds: Rounds) -> Vec<Violation> {
    use crate::diag::{check_presentation, diagonalize, structural_matrix};
    let mut out = Vec::new();
    let mut push = |kind, st: &BlowupState, round, detail: String| {
        out.push(Violation { kind, graph: forest.graph.clone(), state: st.id.clone(), round, detail });
    };
    if let Some(states) = forest.frontier(Round::A) {
        for st in states {
            let t = derived_vocabulary(&st.point);
            if !t.is_empty() && excellent_indices(&t).is_empty() {
                push(ViolationKind::ExcellentAfterA, st, Round::A, "no excellent word".into());
            }
        }
    }
    if let Some(states) = forest.frontier(Round::B) {
        for st in states {
            let t = derived_vocabulary(&st.point);
            if !t.is_empty() && excellent_indices(&t).is_empty() {
                push(ViolationKind::ExcellentAfterB, st, Round::B, "derived vocabulary has no excellent word".into());
            }
            if let Some((t2, _)) = secondary_derived(&st.point) {
                if excellent_indices(&t2).is_empty() {
                    push(ViolationKind::ExcellentAfterB, st, Round::B, "secondary vocabulary has no excellent word".into());
                }
            }
        }
    }
    for (round, letter, kind) in [
        (Round::C, AlphabetId::LAMBDA, ViolationKind::LambdaNotInitial),
        (Round::D, AlphabetId::THETA, ViolationKind::ThetaNotInitial),
    ] {
        if let Some(states) = forest.frontier(round) {
            for st in states {
                if in_p_third(&st.point, letter).is_some() {
                    push(kind, st, round, "new letter still initial".into());
                }
            }
        }
    }
    if rounds == Rounds::ABCD {
        for st in &forest.terminals {
            let ok = structural_matrix(&st.point)
                .map(|m| {
                    let r = diagonalize(&m);
                    r.success && check_presentation(&r)
                })
                .unwrap_or(false);
            if !ok {
                push(ViolationKind::Diagonalization, st, Round::D, "no admissible pivot pair".into());
            }
        }
    }
    if rounds.includes(Round::C) {
        for st in &forest.pre_lambda {
            let ok = structural_matrix(&st.point).map(|m| diagonalize(&m).success).unwrap_or(false);
            if ok {
                push(ViolationKind::NegativeControl, st, Round::C, "diagonalizable before the blowup".into());
            }
        }
    }
    out
}

/// Rebuilds the signed vocabularies from the sign and index tags of the derived vocabulary.
pub fn signed_from_derived(p: &DecoratedPoint, t: &IndexedVocabulary) -> (Vec<Word>, Vec<Word>) {
    let n = p.s_minus.len();
    let mut sm = vec![Word::empty(); n];
    let mut sp = vec![Word::empty(); n];
    for e in &t.entries {
        match e.key.sign {
            Sign::Minus => sm[e.key.index] = e.word.clone(),
            Sign::Plus => sp[e.key.index] = e.word.clone(),
            Sign::Neutral => {
                sm[e.key.index] = e.word.clone();
                sp[e.key.index] = e.word.clone();
            }
        }
    }
    (sm, sp)
}
