//! Graph notation parser, JSON artifacts, DOT rendering and the exhaustive verifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::blowup::{
    run_all, terminal_checks, verify_assumptions, BlowupState, StateRef, EngineOptions, Round, Rounds, TerminalForest, Violation,
    ViolationKind,
};
use crate::diag::{check_presentation, diagonalize, local_equations, structural_matrix, DiagonalReport};
use crate::error::{Error, Result};
use crate::graph::{self, enumerate_graphs, Vertex, WeightedDualGraph};
use crate::modular::{
    depth, derived_vocabulary, secondary_derived, DecoratedPoint, GraphContext,
};
use crate::vocab::{factored_form, ExponentVector, IndexedVocabulary, Word};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: &str) -> Result<T> {
        Err(Error::SyntaxError { position: self.pos, message: message.to_string() })
    }
    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }
    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected '{}'", c as char))
        }
    }
    fn int(&mut self) -> Result<u32> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a weight");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("weight out of range"))
    }
    fn name(&mut self) -> Result<String> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let ok = if self.pos == start { c.is_ascii_alphabetic() || c == b'_' } else { c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' };
            if !ok {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a name");
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }
    fn weight(&mut self) -> Result<u32> {
        self.expect(b'(')?;
        let w = self.int()?;
        self.expect(b')')?;
        Ok(w)
    }
    fn tails(&mut self, parent: usize, out: &mut Vec<(String, u32, Option<usize>)>) -> Result<()> {
        if self.peek() != Some(b'[') {
            return Ok(());
        }
        self.pos += 1;
        loop {
            let nm = self.name()?;
            let w = self.weight()?;
            out.push((nm, w, Some(parent)));
            let me = out.len() - 1;
            self.tails(me, out)?;
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return self.err("expected ',' or ']'"),
            }
        }
    }
    fn core_head(&mut self) -> Result<u8> {
        self.ws();
        let rest = &self.src[self.pos..];
        let (genus, len) = if rest.starts_with(b"g2") {
            (2, 2)
        } else if rest.starts_with(b"g1") {
            (1, 2)
        } else if rest.starts_with(b"g0") {
            (0, 2)
        } else if rest.starts_with(b"0") {
            (0, 1)
        } else {
            return self.err("expected g2, g1 or 0");
        };
        self.pos += len;
        Ok(genus)
    }
}

/// Parses `g2(0)[a(2), b(0)[c(3), d(2)]]` or `g1(0)[...] - 0(1) - g1(0)[...]` and validates.
pub fn parse_graph(text: &str) -> Result<WeightedDualGraph> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    // (name, weight, parent) with core vertices first recorded separately
    let mut core: Vec<(u8, u32)> = Vec::new();
    let mut tails: Vec<(String, u32, Option<usize>)> = Vec::new();
    let mut tail_roots: Vec<usize> = Vec::new();
    loop {
        let genus = p.core_head()?;
        let w = p.weight()?;
        core.push((genus, w));
        let before = tails.len();
        if p.peek() == Some(b'[') {
            // top-level tails get a placeholder parent resolved below
            let mut local = Vec::new();
            p.tails(usize::MAX, &mut local)?;
            for (nm, wt, par) in local {
                let par = match par {
                    Some(usize::MAX) => None,
                    Some(i) => Some(before + i),
                    None => None,
                };
                tails.push((nm, wt, par));
                tail_roots.push(core.len() - 1);
            }
        }
        match p.peek() {
            Some(b'-') => p.pos += 1,
            None => break,
            Some(_) => return p.err("expected '-' or end of input"),
        }
    }
    let n = core.len();
    if n == 1 && core[0].0 != 2 {
        return Err(Error::BadCoreShape("a single core vertex must have genus 2".into()));
    }
    if n > 1 && (core[0].0 != 1 || core[n - 1].0 != 1 || core[1..n - 1].iter().any(|c| c.0 != 0)) {
        return Err(Error::BadCoreShape("a core chain runs from g1 through genus-0 vertices to g1".into()));
    }
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for (i, (g, w)) in core.iter().enumerate() {
        let id = if n == 1 {
            "o".to_string()
        } else if i == 0 {
            "o-".to_string()
        } else if i == n - 1 {
            "o+".to_string()
        } else {
            format!("o{i}")
        };
        vertices.push(Vertex { id, genus: *g, weight: *w });
        if i > 0 {
            edges.push((i - 1, i));
        }
    }
    for (k, (nm, w, par)) in tails.iter().enumerate() {
        vertices.push(Vertex { id: nm.clone(), genus: 0, weight: *w });
        let parent = match par {
            Some(j) => n + j,
            None => tail_roots[k],
        };
        edges.push((parent, n + k));
    }
    let g = WeightedDualGraph::from_indexed(vertices, edges)?;
    graph::validate(&g)?;
    Ok(g)
}

/// Dot-separated letter tokens.
pub fn word_tokens(w: &Word, names: &[String]) -> Vec<String> {
    w.letters().iter().map(|a| a.render(names)).collect()
}

pub fn vocabulary_json(v: &IndexedVocabulary, names: &[String]) -> Value {
    let (prefix, residual) = match factored_form(v) {
        Ok(x) => x,
        Err(_) => (Word::empty(), IndexedVocabulary::default()),
    };
    let words: Vec<Value> = residual
        .entries
        .iter()
        .map(|e| json!({"index": e.key.index, "sign": e.key.sign.symbol(), "letters": word_tokens(&e.word, names)}))
        .collect();
    json!({"prefix": word_tokens(&prefix, names), "words": words})
}

fn exponent_json(e: &ExponentVector, names: &[String]) -> Value {
    let m: serde_json::Map<String, Value> = e.0.iter().map(|(k, v)| (k.render(names), json!(v))).collect();
    Value::Object(m)
}

pub fn state_json(st: &BlowupState) -> Value {
    let p = &st.point;
    let names = p.names();
    let render = |ws: &[Word]| ws.iter().map(|w| w.render(names)).collect::<Vec<_>>();
    let history: Vec<Value> = st
        .history
        .to_vec()
        .iter()
        .map(|c| {
            json!({
                "round": c.round.name(),
                "step": c.step,
                "initials": c.initials.iter().map(|a| a.render(names)).collect::<Vec<_>>(),
                "T": c.kept.iter().map(|a| a.render(names)).collect::<Vec<_>>(),
                "fresh": c.fresh.map(|a| a.render(names)),
                "flag": c.flag.as_ref().map(|(k, v)| json!({k.clone(): v})),
            })
        })
        .collect();
    let dv = depth(p);
    json!({
        "id": st.id,
        "round": st.round.name(),
        "step": st.step,
        "stalled": st.stalled,
        "s_minus": render(&p.s_minus),
        "s_plus": render(&p.s_plus),
        "t": vocabulary_json(&derived_vocabulary(p), names),
        "t2": secondary_derived(p).map(|(v, _)| vocabulary_json(&v, names)),
        "t3": p.t3.as_ref().map(|t| vocabulary_json(&t.vocabulary, names)),
        "flags": {
            "chi": p.flags.chi,
            "hyperelliptic_core": p.flags.hyperelliptic_core,
            "core_conjugate_pair": p.flags.core_conjugate_pair,
        },
        "depth": {
            "level1": dv.level1,
            "level2": dv.level2.map(|d| vec![d.i, d.j]),
            "level3": dv.level3,
        },
        "history": history,
    })
}

pub fn forest_json(f: &TerminalForest) -> Value {
    let names = f.ground.point.names();
    let rounds: Vec<Value> = f
        .steps
        .iter()
        .map(|r| {
            let children: Vec<Value> = r
                .children
                .iter()
                .map(|c| {
                    json!({
                        "parent": c.parent,
                        "T": c.choice.kept.iter().map(|a| a.render(names)).collect::<Vec<_>>(),
                        "fresh": c.choice.fresh.map(|a| a.render(names)),
                        "flag": c.choice.flag.as_ref().map(|(k, v)| json!({k.clone(): v})),
                        "state": c.state.id,
                    })
                })
                .collect();
            json!({"round": r.round.name(), "step": r.label(), "centers": r.centers, "children": children})
        })
        .collect();
    json!({
        "graph": f.graph,
        "ground": state_json(&f.ground),
        "rounds": rounds,
        "terminals": f.terminals.iter().map(|s| state_json(s)).collect::<Vec<_>>(),
        "stats": serde_json::to_value(&f.stats).unwrap(),
    })
}

pub fn forest_dot(f: &TerminalForest) -> String {
    let names = f.ground.point.names();
    let mut out = String::from("digraph forest {\n  rankdir=LR;\n");
    out.push_str(&format!("  \"{}\" [label=\"{}\"];\n", f.ground.id, f.graph.replace('"', "'")));
    for r in &f.steps {
        for c in &r.children {
            let mut label = r.label();
            if let Some(fr) = c.choice.fresh {
                let t: Vec<String> = c.choice.kept.iter().map(|a| a.render(names)).collect();
                label.push_str(&format!(" {} T={{{}}}", fr.render(names), t.join(",")));
            }
            if let Some((k, v)) = &c.choice.flag {
                label.push_str(&format!(" {k}={}", *v as u8));
            }
            out.push_str(&format!("  \"{}\" -> \"{}\" [label=\"{}\"];\n", c.parent, c.state.id, label.replace('"', "'")));
        }
    }
    out.push_str("}\n");
    out
}

pub fn diag_json(st: &BlowupState, r: &DiagonalReport, n: Option<u32>, d: u32) -> Value {
    let names = st.point.names();
    let local = n.and_then(|n| local_equations(r, n, d, names).ok());
    json!({
        "state-id": st.id,
        "success": r.success,
        "pivots": r.pivots.iter().map(|p| exponent_json(p, names)).collect::<Vec<_>>(),
        "chain_ok": check_presentation(r),
        "trace": r.trace,
        "failure_witness": r.failure_witness,
        "local_model": local.map(|m| json!({
            "n": m.n,
            "equations": m.equations,
            "primary_equations": m.primary_equations,
            "primary_dim": m.primary_dim,
            "components": m.components,
        })),
    })
}

/// Reduced, signed and derived vocabularies of the ground point, with its depth.
pub fn vocab_json(g: &WeightedDualGraph) -> Result<Value> {
    let ctx = GraphContext::new(g)?;
    let names = ctx.names.clone();
    let p = DecoratedPoint::ground(g)?;
    let (m, pl) = p.signed();
    let reduced = IndexedVocabulary::from_words(ctx.reduced_words().to_vec());
    Ok(json!({
        "graph": graph::to_notation(g),
        "reduced": vocabulary_json(&reduced, &names),
        "s_minus": vocabulary_json(&m, &names),
        "s_plus": vocabulary_json(&pl, &names),
        "t": vocabulary_json(&derived_vocabulary(&p), &names),
        "depth1": crate::modular::depth1(&p),
    }))
}

/// Graphs whose core chain has an interior vertex of weight 0.
pub fn has_interior_zero_root(g: &WeightedDualGraph) -> bool {
    match graph::Layout::new(g) {
        Ok(l) if l.roots.len() > 2 => l.roots[1..l.roots.len() - 1].iter().any(|&r| g.vertices()[r].weight == 0),
        _ => false,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphSummary {
    pub graph: String,
    pub weight: u32,
    pub interior_zero_root: bool,
    pub population: BTreeMap<String, usize>,
    pub pre_lambda: usize,
    pub violations: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub d_max: u32,
    pub rounds: String,
    pub graphs: Vec<GraphSummary>,
    pub totals: BTreeMap<String, usize>,
    pub totals_excluding_interior_zero: BTreeMap<String, usize>,
    pub examples: BTreeMap<String, Vec<Violation>>,
}

impl VerifyReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.totals.get(kind.name()).copied().unwrap_or(0)
    }
    pub fn is_clean(&self) -> bool {
        self.totals.values().all(|&c| c == 0)
    }
}

/// Runs and checks one graph.
pub fn verify_graph(g: &WeightedDualGraph, opts: &EngineOptions) -> Result<(TerminalForest, Vec<Violation>)> {
    let f = run_all(g, opts)?;
    let mut v = verify_assumptions(&f);
    v.extend(terminal_checks(&f, opts.rounds));
    v.sort();
    Ok((f, v))
}

const EXAMPLES_PER_KIND: usize = 5;

/// Exhaustive verification over every graph of weight at most `d_max`.
pub fn verify(d_max: u32, opts: &EngineOptions) -> Result<VerifyReport> {
    let graphs: Vec<WeightedDualGraph> = (0..=d_max).flat_map(|d| enumerate_graphs(d, d)).collect();
    let results = parallel_map(&graphs, |g| {
        verify_graph(g, opts).map(|(f, vs)| {
            let mut summary = GraphSummary {
                graph: f.graph.clone(),
                weight: g.total_weight(),
                interior_zero_root: has_interior_zero_root(g),
                population: f.stats.population.clone(),
                pre_lambda: f.pre_lambda.len(),
                violations: BTreeMap::new(),
            };
            let mut examples: BTreeMap<String, Vec<Violation>> = BTreeMap::new();
            for v in vs {
                *summary.violations.entry(v.kind.name().into()).or_default() += 1;
                let ex = examples.entry(v.kind.name().into()).or_default();
                if ex.len() < EXAMPLES_PER_KIND {
                    ex.push(v);
                }
            }
            (summary, examples)
        })
    });
    let mut report = VerifyReport {
        d_max,
        rounds: format!("{:?}", opts.rounds),
        graphs: Vec::new(),
        totals: BTreeMap::new(),
        totals_excluding_interior_zero: BTreeMap::new(),
        examples: BTreeMap::new(),
    };
    for kind in ALL_KINDS {
        report.totals.insert(kind.name().into(), 0);
        report.totals_excluding_interior_zero.insert(kind.name().into(), 0);
    }
    for r in results {
        let (summary, examples) = r?;
        for (kind, count) in &summary.violations {
            *report.totals.get_mut(kind).unwrap() += count;
            if !summary.interior_zero_root {
                *report.totals_excluding_interior_zero.get_mut(kind).unwrap() += count;
            }
        }
        for (kind, vs) in examples {
            let ex = report.examples.entry(kind).or_default();
            let room = EXAMPLES_PER_KIND.saturating_sub(ex.len());
            ex.extend(vs.into_iter().take(room));
        }
        report.graphs.push(summary);
    }
    Ok(report)
}

pub const ALL_KINDS: [ViolationKind; 11] = [
    ViolationKind::ExcellentAfterA,
    ViolationKind::ExcellentAfterB,
    ViolationKind::LambdaNotInitial,
    ViolationKind::ThetaNotInitial,
    ViolationKind::DepthJump,
    ViolationKind::OrderRegression,
    ViolationKind::Stranded,
    ViolationKind::BudgetExceeded,
    ViolationKind::Admissibility,
    ViolationKind::Diagonalization,
    ViolationKind::NegativeControl,
];

/// Order-preserving map over scoped worker threads.
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(16).max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every item processed")).collect()
}

pub fn report_json(r: &VerifyReport) -> String {
    serde_json::to_string_pretty(r).expect("serializable") + "\n"
}

/// Diagonalizes every terminal of a graph run.
pub fn diagonalize_terminals(f: &TerminalForest) -> Vec<(StateRef, DiagonalReport)> {
    f.terminals
        .iter()
        .map(|st| {
            let r = structural_matrix(&st.point).map(|m| diagonalize(&m)).unwrap_or(DiagonalReport {
                success: false,
                pivots: vec![],
                choice: None,
                trace: vec![],
                failure_witness: Some("inconsistent flags".into()),
            });
            (st.clone(), r)
        })
        .collect()
}

pub fn round_from_name(s: &str) -> Option<Round> {
    match s {
        "A" => Some(Round::A),
        "B" => Some(Round::B),
        "C" => Some(Round::C),
        "D" => Some(Round::D),
        _ => None,
    }
}

pub fn rounds_from_name(s: &str) -> Option<Rounds> {
    Rounds::parse(s)
}
