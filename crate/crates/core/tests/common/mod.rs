#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use modcalc_core::blowup::{run_all, EngineOptions, Round, Rounds};
use modcalc_core::graph::{enumerate_graphs, WeightedDualGraph};
use modcalc_core::modular::{derived_vocabulary, secondary_derived, DecoratedPoint};
use modcalc_core::report::parse_graph;
use modcalc_core::vocab::{factored_form, perfect_indices, IndexedVocabulary};

pub const TREE: &str = "g2(0)[a(2), b(0)[c(3), d(2)]]";
pub const PAIR: &str = "g1(0)[a(2)] - g1(0)[b(2)]";
pub const MIDDLE: &str = "g1(0)[a1(1), a2(1)] - 0(1) - g1(0)[b(1)]";

pub fn graph(text: &str) -> WeightedDualGraph {
    parse_graph(text).unwrap()
}

pub fn ground(text: &str) -> DecoratedPoint {
    DecoratedPoint::ground(&graph(text)).unwrap()
}

pub fn rendered(words: &[modcalc_core::vocab::Word], names: &[String]) -> Vec<String> {
    let mut v: Vec<String> = words.iter().map(|w| w.render(names)).collect();
    v.sort();
    v
}

pub fn sorted(words: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = words.iter().map(|s| s.to_string()).collect();
    v.sort();
    v
}

/// Prefix and sorted residual words of a vocabulary, rendered.
pub type Factored = (String, Vec<String>);

pub fn factored(v: &IndexedVocabulary, names: &[String]) -> Factored {
    let (p, r) = factored_form(v).unwrap();
    let words: Vec<_> = r.entries.iter().map(|e| e.word.clone()).collect();
    (p.render(names), rendered(&words, names))
}

/// Derived vocabulary and, when defined, the secondary one.
pub type Shape = (Factored, Option<Factored>);

pub fn shape(p: &DecoratedPoint) -> Shape {
    let t = derived_vocabulary(p);
    (factored(&t, p.names()), secondary_derived(p).map(|(t2, _)| factored(&t2, p.names())))
}

/// Round-A terminals whose derived vocabulary has exactly one perfect word.
pub fn unique_perfect_frontier(text: &str) -> BTreeSet<Shape> {
    let opts = EngineOptions { rounds: Rounds::A, ..Default::default() };
    let f = run_all(&graph(text), &opts).unwrap();
    f.frontier(Round::A)
        .unwrap()
        .iter()
        .filter(|s| perfect_indices(&derived_vocabulary(&s.point)).len() == 1)
        .map(|s| shape(&s.point))
        .collect()
}

fn case(prefix: &str, words: &[&str]) -> Factored {
    (prefix.to_string(), sorted(words))
}

/// Rename letters token by token.
pub fn swap(f: &Factored, x: &str, y: &str) -> Factored {
    let sw = |w: &String| {
        w.split('.')
            .map(|t| if t == x { y } else if t == y { x } else { t })
            .collect::<Vec<_>>()
            .join(".")
    };
    let mut words: Vec<String> = f.1.iter().map(sw).collect();
    words.sort();
    (sw(&f.0), words)
}

pub fn tree_cases() -> Vec<Factored> {
    vec![
        case("e2", &["~", "e2", "b.c", "b.c.e2.b.c", "b.c.e2.b.c.e2.b.c", "b.d", "b.d.e2.b.d"]),
        case("e2.e3", &["~", "e2.e3", "c", "c.e2.e3.c", "c.e2.e3.c.e2.e3.c", "d", "d.e2.e3.d"]),
        case("e2.e3", &["a", "a.e2.e3.a", "~", "e2.e3", "e2.e3.e2.e3", "d", "d.e2.e3.d"]),
        case("e2.e3", &["a", "a.e2.e3.a", "c", "c.e2.e3.c", "c.e2.e3.c.e2.e3.c", "~", "e2.e3"]),
    ]
}

pub fn pair_cases() -> Vec<Shape> {
    vec![(
        case("e2", &["~", "e2", "b.q", "b.e2.b.q", "q", "e2.q", "b", "b.e2.b"]),
        Some(case("e2", &["e2.q", "b", "b.e2.b"])),
    )]
}

pub fn middle_cases() -> Vec<Shape> {
    vec![
        (
            case("e5", &["~", "a2", "q1", "q1.e5.q2.e5.b", "q2.e5.q1.e5", "q2.e5.q1.e5.a2", "q2", "b"]),
            Some(case("e5", &["q2.e5.q1.e5.a2", "q2", "b"])),
        ),
        (
            case("e5", &["a1", "a2", "~", "e5.q2.e5.b", "q2.e5.e5.a1", "q2.e5.e5.a2", "q2", "b"]),
            Some(case("e5", &["q2.e5.e5.a1", "q2.e5.e5.a2", "b"])),
        ),
        (
            case("e5", &["a1", "a2", "q1", "q1.e5.q2.e5", "q2.e5.q1.e5.a1", "q2.e5.q1.e5.a2", "q2", "~"]),
            Some(case("e5", &["a1", "a2", "q1"])),
        ),
        (
            case("e5", &["a1", "a2", "q1", "q1.e5.e5.b", "e5.q1.e5.a1", "e5.q1.e5.a2", "~", "b"]),
            Some(case("e5", &["a1", "a2", "q1.e5.e5.b"])),
        ),
    ]
}

/// Closure of a list of shapes under one letter swap.
pub fn with_swap(cases: &[Shape], x: &str, y: &str) -> BTreeSet<Shape> {
    let mut out = BTreeSet::new();
    for (t, t2) in cases {
        out.insert((t.clone(), t2.clone()));
        out.insert((swap(t, x, y), t2.as_ref().map(|v| swap(v, x, y))));
    }
    out
}

/// Residual words of `extra` are those of `base` with some nonempty set of the given
/// original letters deleted.
pub fn is_unit_specialization(extra: &Factored, base: &Factored, letters: &[&str]) -> bool {
    (1u32..1 << letters.len()).any(|mask| {
        let gone: Vec<&str> = (0..letters.len()).filter(|i| mask & (1 << i) != 0).map(|i| letters[i]).collect();
        let strip = |w: &String| {
            let kept: Vec<&str> = w.split('.').filter(|t| *t != "~" && !gone.contains(t)).collect();
            if kept.is_empty() {
                "~".to_string()
            } else {
                kept.join(".")
            }
        };
        let mut words: Vec<String> = base.1.iter().map(strip).collect();
        words.sort();
        extra.0 == base.0 && words == extra.1
    })
}

// Independent oracle: free trees by leaf attachment, every genus/weight labeling,
// stability filter, and a center-rooted AHU encoding for isomorphism.

type Adj = Vec<Vec<usize>>;

fn centers(adj: &Adj) -> Vec<usize> {
    let n = adj.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&v| deg[v] == 1).collect();
    let mut left = n;
    while left > 2 {
        left -= layer.len();
        let mut next = Vec::new();
        for &v in &layer {
            for &w in &adj[v] {
                if deg[w] == 0 {
                    continue;
                }
                deg[w] -= 1;
                if deg[w] == 1 {
                    next.push(w);
                }
            }
            deg[v] = 0;
        }
        layer = next;
    }
    layer
}

fn ahu(adj: &Adj, labels: &[String], v: usize, parent: usize) -> String {
    let mut kids: Vec<String> = adj[v].iter().filter(|&&w| w != parent).map(|&w| ahu(adj, labels, w, v)).collect();
    kids.sort();
    format!("({}{})", labels[v], kids.concat())
}

fn tree_code(adj: &Adj, labels: &[String]) -> String {
    centers(adj).into_iter().map(|c| ahu(adj, labels, c, usize::MAX)).min().unwrap()
}

fn free_trees(n: usize) -> Vec<Adj> {
    let mut level: Vec<Adj> = vec![vec![vec![]]];
    for _ in 1..n {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for t in &level {
            for v in 0..t.len() {
                let mut u = t.clone();
                let new = u.len();
                u.push(vec![v]);
                u[v].push(new);
                let blank = vec![String::new(); u.len()];
                if seen.insert(tree_code(&u, &blank)) {
                    next.push(u);
                }
            }
        }
        level = next;
    }
    level
}

fn compositions(total: u32, parts: usize, out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>) {
    if cur.len() == parts {
        if total == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for w in 0..=total {
        cur.push(w);
        compositions(total - w, parts, out, cur);
        cur.pop();
    }
}

pub fn oracle(d: u32) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    for n in 1..=(2 * d as usize + 3) {
        let mut weights = Vec::new();
        compositions(d, n, &mut weights, &mut Vec::new());
        for t in free_trees(n) {
            let mut genera: Vec<Vec<u8>> = Vec::new();
            for i in 0..n {
                let mut g = vec![0u8; n];
                g[i] = 2;
                genera.push(g);
                for j in i + 1..n {
                    let mut g = vec![0u8; n];
                    g[i] = 1;
                    g[j] = 1;
                    genera.push(g);
                }
            }
            for g in &genera {
                for w in &weights {
                    let stable = (0..n).all(|v| g[v] > 0 || w[v] > 0 || t[v].len() >= 3);
                    if stable {
                        let labels: Vec<String> = (0..n).map(|v| format!("{}.{}", g[v], w[v])).collect();
                        found.insert(tree_code(&t, &labels));
                    }
                }
            }
        }
    }
    found
}

pub fn library_codes(d: u32) -> BTreeSet<String> {
    enumerate_graphs(d, d)
        .iter()
        .map(|g| {
            let n = g.vertices().len();
            let mut adj: Adj = vec![vec![]; n];
            for &(a, b) in g.edges() {
                adj[a].push(b);
                adj[b].push(a);
            }
            let labels: Vec<String> = g.vertices().iter().map(|v| format!("{}.{}", v.genus, v.weight)).collect();
            tree_code(&adj, &labels)
        })
        .collect()
}

