//! Words, indexed vocabularies and their order-theoretic predicates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    TailVertex,
    RootEdge,
    Exc1,
    Exc2,
    Lambda,
    Exc3,
    Theta,
    Exc4,
}

/// A letter. For tail vertices `index` is the vertex position in the graph; for root
/// edges `0` denotes the single edge `q` and `i >= 1` denotes `q_i`; for exceptional
/// kinds it is the step that created the letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AlphabetId {
    pub kind: Kind,
    pub index: u32,
}

impl AlphabetId {
    pub const LAMBDA: AlphabetId = AlphabetId { kind: Kind::Lambda, index: 0 };
    pub const THETA: AlphabetId = AlphabetId { kind: Kind::Theta, index: 0 };

    pub fn new(kind: Kind, index: u32) -> Self {
        AlphabetId { kind, index }
    }
    pub fn tail(index: u32) -> Self {
        AlphabetId { kind: Kind::TailVertex, index }
    }
    pub fn edge(index: u32) -> Self {
        AlphabetId { kind: Kind::RootEdge, index }
    }
    pub fn is_distinguished(&self) -> bool {
        self.kind != Kind::TailVertex
    }
    pub fn is_original(&self) -> bool {
        matches!(self.kind, Kind::TailVertex | Kind::RootEdge)
    }
    pub fn is_tail(&self) -> bool {
        self.kind == Kind::TailVertex
    }
    pub fn is_exceptional(&self) -> bool {
        !self.is_original()
    }

    /// Printed token; tail letters are looked up in `names`.
    pub fn render(&self, names: &[String]) -> String {
        let i = self.index;
        match self.kind {
            Kind::TailVertex => names.get(i as usize).cloned().unwrap_or_else(|| format!("v#{i}")),
            Kind::RootEdge if i == 0 => "q".to_string(),
            Kind::RootEdge => format!("q{i}"),
            Kind::Exc1 => format!("e{i}"),
            Kind::Exc2 => format!("e'{i}"),
            Kind::Exc3 => format!("e''{i}"),
            Kind::Exc4 => format!("e'''{i}"),
            Kind::Lambda => "L".to_string(),
            Kind::Theta => "T".to_string(),
        }
    }

    /// Inverse of [`render`] for non-tail tokens.
    pub fn parse_special(tok: &str) -> Option<Self> {
        let num = |s: &str| -> Option<u32> {
            if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) {
                s.parse().ok()
            } else {
                None
            }
        };
        match tok {
            "q" => return Some(AlphabetId::edge(0)),
            "L" => return Some(AlphabetId::LAMBDA),
            "T" => return Some(AlphabetId::THETA),
            _ => {}
        }
        if let Some(r) = tok.strip_prefix("e'''") {
            return num(r).map(|i| AlphabetId::new(Kind::Exc4, i));
        }
        if let Some(r) = tok.strip_prefix("e''") {
            return num(r).map(|i| AlphabetId::new(Kind::Exc3, i));
        }
        if let Some(r) = tok.strip_prefix("e'") {
            return num(r).map(|i| AlphabetId::new(Kind::Exc2, i));
        }
        if let Some(r) = tok.strip_prefix('e') {
            return num(r).map(|i| AlphabetId::new(Kind::Exc1, i));
        }
        if let Some(r) = tok.strip_prefix('q') {
            return num(r).map(AlphabetId::edge);
        }
        None
    }
}

/// Finitely supported map from letters to multiplicities.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExponentVector(pub BTreeMap<AlphabetId, u32>);

impl ExponentVector {
    pub fn zero() -> Self {
        ExponentVector(BTreeMap::new())
    }
    pub fn get(&self, a: &AlphabetId) -> u32 {
        self.0.get(a).copied().unwrap_or(0)
    }
    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    pub fn total(&self) -> u32 {
        self.0.values().sum()
    }
    /// Componentwise `self <= other`, i.e. the monomial `self` divides `other`.
    pub fn divides(&self, other: &ExponentVector) -> bool {
        self.0.iter().all(|(k, &v)| other.get(k) >= v)
    }
    pub fn add(&self, other: &ExponentVector) -> ExponentVector {
        let mut out = self.0.clone();
        for (k, &v) in &other.0 {
            *out.entry(*k).or_insert(0) += v;
        }
        ExponentVector(out)
    }
    /// `self - other`, or `None` when `other` does not divide `self`.
    pub fn checked_sub(&self, other: &ExponentVector) -> Option<ExponentVector> {
        if !other.divides(self) {
            return None;
        }
        let mut out = BTreeMap::new();
        for (k, &v) in &self.0 {
            let r = v - other.get(k);
            if r > 0 {
                out.insert(*k, r);
            }
        }
        Some(ExponentVector(out))
    }
    pub fn render(&self, names: &[String]) -> String {
        if self.0.is_empty() {
            return "1".to_string();
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(k, &v)| if v == 1 { k.render(names) } else { format!("{}^{}", k.render(names), v) })
            .collect();
        parts.join("*")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<AlphabetId>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }
    pub fn new(letters: Vec<AlphabetId>) -> Self {
        Word(letters)
    }
    pub fn letters(&self) -> &[AlphabetId] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn pivot(&self) -> Option<AlphabetId> {
        self.0.first().copied()
    }
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
    pub fn push(&self, a: AlphabetId) -> Word {
        let mut v = self.0.clone();
        v.push(a);
        Word(v)
    }
    pub fn power(&self, k: usize) -> Word {
        Word(self.0.iter().copied().cycle().take(self.0.len() * k).collect())
    }
    pub fn starts_with(&self, p: &Word) -> bool {
        self.0.starts_with(&p.0)
    }
    pub fn render(&self, names: &[String]) -> String {
        if self.0.is_empty() {
            return "~".to_string();
        }
        self.0.iter().map(|a| a.render(names)).collect::<Vec<_>>().join(".")
    }

    /// Parses `~`, dot-separated tokens, or a run of single-character tail names.
    pub fn parse(text: &str, names: &[String]) -> Option<Word> {
        let text = text.trim();
        if text == "~" || text.is_empty() {
            return Some(Word::empty());
        }
        let lookup = |tok: &str| -> Option<AlphabetId> {
            if let Some(i) = names.iter().position(|n| n == tok) {
                return Some(AlphabetId::tail(i as u32));
            }
            AlphabetId::parse_special(tok)
        };
        let mut out = Vec::new();
        for tok in text.split('.') {
            if let Some(a) = lookup(tok) {
                out.push(a);
            } else {
                for ch in tok.chars() {
                    out.push(lookup(&ch.to_string())?);
                }
            }
        }
        Some(Word(out))
    }
}

pub fn multiplicity(w: &Word) -> ExponentVector {
    let mut m = BTreeMap::new();
    for a in &w.0 {
        *m.entry(*a).or_insert(0) += 1;
    }
    ExponentVector(m)
}

pub fn word_leq(w1: &Word, w2: &Word) -> bool {
    multiplicity(w1).divides(&multiplicity(w2))
}

pub fn is_linear(w: &Word) -> bool {
    let set: BTreeSet<_> = w.0.iter().collect();
    set.len() == w.0.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Minus,
    Neutral,
    Plus,
}

impl Sign {
    pub fn opposite(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
            Sign::Neutral => Sign::Neutral,
        }
    }
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Minus => "-",
            Sign::Neutral => "0",
            Sign::Plus => "+",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntryKey {
    pub sign: Sign,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VocabEntry {
    pub key: EntryKey,
    pub word: Word,
}

/// Words attached to indices. Positions returned by the predicates refer to `entries`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexedVocabulary {
    pub entries: Vec<VocabEntry>,
}

impl IndexedVocabulary {
    pub fn from_words(words: Vec<Word>) -> Self {
        let entries = words
            .into_iter()
            .enumerate()
            .map(|(index, word)| VocabEntry { key: EntryKey { sign: Sign::Neutral, index }, word })
            .collect();
        IndexedVocabulary { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn words(&self) -> Vec<&Word> {
        self.entries.iter().map(|e| &e.word).collect()
    }
    pub fn find(&self, key: EntryKey) -> Option<usize> {
        self.entries.iter().position(|e| e.key == key)
    }
    pub fn without(&self, positions: &[usize]) -> IndexedVocabulary {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .filter(|(i, _)| !positions.contains(i))
            .map(|(_, e)| e.clone())
            .collect();
        IndexedVocabulary { entries }
    }
    /// Words as a sorted list, for multiset comparison.
    pub fn multiset(&self) -> Vec<Word> {
        let mut v: Vec<Word> = self.entries.iter().map(|e| e.word.clone()).collect();
        v.sort();
        v
    }
    pub fn render(&self, names: &[String]) -> String {
        let (p, r) = match factored_form(self) {
            Ok(x) => x,
            Err(_) => return "{}".to_string(),
        };
        let body: Vec<String> = r.entries.iter().map(|e| e.word.render(names)).collect();
        if p.is_empty() {
            format!("{{{}}}", body.join(", "))
        } else {
            format!("{}{{{}}}", p.render(names), body.join(", "))
        }
    }
}

pub fn common_prefix(v: &IndexedVocabulary) -> Result<Word> {
    let first = v.entries.first().ok_or(Error::EmptyVocabulary)?;
    let mut n = first.word.len();
    for e in &v.entries[1..] {
        let m = first.word.0.iter().zip(&e.word.0).take_while(|(a, b)| a == b).count();
        n = n.min(m);
    }
    Ok(Word(first.word.0[..n].to_vec()))
}

pub fn factored_form(v: &IndexedVocabulary) -> Result<(Word, IndexedVocabulary)> {
    let p = common_prefix(v)?;
    let entries = v
        .entries
        .iter()
        .map(|e| VocabEntry { key: e.key, word: Word(e.word.0[p.len()..].to_vec()) })
        .collect();
    Ok((p, IndexedVocabulary { entries }))
}

pub fn excellent_indices(v: &IndexedVocabulary) -> Vec<usize> {
    match common_prefix(v) {
        Ok(p) => (0..v.len()).filter(|&i| v.entries[i].word.len() == p.len()).collect(),
        Err(_) => Vec::new(),
    }
}

fn mults(v: &IndexedVocabulary) -> Vec<ExponentVector> {
    v.entries.iter().map(|e| multiplicity(&e.word)).collect()
}

pub fn minimal_indices(v: &IndexedVocabulary) -> Vec<usize> {
    let m = mults(v);
    (0..m.len())
        .filter(|&i| !(0..m.len()).any(|j| m[j].divides(&m[i]) && !m[i].divides(&m[j])))
        .collect()
}

pub fn perfect_indices(v: &IndexedVocabulary) -> Vec<usize> {
    // a global minimum has the least total degree
    let Some(least) = v.entries.iter().map(|e| e.word.len()).min() else { return Vec::new() };
    let m = mults(v);
    (0..m.len())
        .filter(|&i| v.entries[i].word.len() == least)
        .filter(|&i| (0..m.len()).all(|j| j == i || m[i].divides(&m[j])))
        .collect()
}

/// Some `a != b` with `w_a <= w_b <= w_c` for every `c` other than `a`.
pub fn is_perfect(v: &IndexedVocabulary) -> bool {
    let m = mults(v);
    let n = m.len();
    (0..n).any(|a| {
        (0..n).all(|c| c == a || m[a].divides(&m[c]))
            && (0..n).any(|b| b != a && (0..n).all(|c| c == a || m[b].divides(&m[c])))
    })
}

/// Pivots of the nonempty words. Callers pass a residual vocabulary.
pub fn initials(residual: &IndexedVocabulary) -> BTreeSet<AlphabetId> {
    residual.entries.iter().filter_map(|e| e.word.pivot()).collect()
}

pub fn secondary_excellent(v: &IndexedVocabulary) -> Option<usize> {
    let ex = excellent_indices(v);
    if ex.len() != 1 {
        return None;
    }
    let rest = v.without(&ex);
    let ex2 = excellent_indices(&rest);
    let first = *ex2.first()?;
    let key = rest.entries[first].key;
    v.entries.iter().position(|e| e.key == key)
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&[]))
    }
}
