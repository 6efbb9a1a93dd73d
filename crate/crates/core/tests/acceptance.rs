mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::{
    tree_cases, pair_cases, middle_cases, ground, rendered, sorted, unique_perfect_frontier, with_swap, TREE, PAIR,
    MIDDLE,
};
use modcalc_core::blowup::EngineOptions;
use modcalc_core::diag::primary_dimension;
use modcalc_core::graph::enumerate_graphs;
use modcalc_core::modular::{depth1, derived_vocabulary, reduced_vocabulary};
use modcalc_core::report::{report_json, verify, VerifyReport};
use modcalc_core::vocab::Word;

struct Line {
    ok: bool,
    detail: String,
}

fn line(n: u32, name: &str, l: Line) -> bool {
    println!("criterion {n:>2} {} {name}: {}", if l.ok { "PASS" } else { "FAIL" }, l.detail);
    l.ok
}

fn goldens() -> Line {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let p = ground(TREE);
    let reduced: Vec<Word> = reduced_vocabulary(&p.ctx.graph).unwrap().entries.into_iter().map(|e| e.word).collect();
    let want_tree = sorted(&["a", "a.a", "b.c", "b.c.b.c", "b.c.b.c.b.c", "b.d", "b.d.b.d"]);
    if rendered(&reduced, p.names()) != want_tree {
        bad.push("tree example reduced");
    }
    if rendered(&p.s_minus, p.names()) != want_tree || rendered(&p.s_plus, p.names()) != want_tree {
        bad.push("tree example signed");
    }
    let rows = [
        (PAIR, ["a", "a.a", "b.q", "b.b.q"], ["a.q", "a.a.q", "b", "b.b"]),
        (MIDDLE, ["a1", "a2", "q1", "q1.q2.b"], ["q2.q1.a1", "q2.q1.a2", "q2", "b"]),
    ];
    for (g, m, pl) in rows {
        let p = ground(g);
        let r = |ws: &[Word]| ws.iter().map(|w| w.render(p.names())).collect::<Vec<_>>();
        if r(&p.s_minus) != m || r(&p.s_plus) != pl {
            bad.push("signed rows");
        }
        let t: Vec<Word> = derived_vocabulary(&p).entries.into_iter().map(|e| e.word).collect();
        let all: Vec<&str> = m.iter().chain(pl.iter()).copied().collect();
        if rendered(&t, p.names()) != sorted(&all) {
            bad.push("derived");
        }
    }
    let t: Vec<Word> = derived_vocabulary(&p).entries.into_iter().map(|e| e.word).collect();
    if rendered(&t, p.names()) != want_tree {
        bad.push("tree example derived");
    }
    let dt = t0.elapsed();
    Line {
        ok: bad.is_empty() && dt < Duration::from_secs(1),
        detail: format!("mismatches {:?}, {:.3} s", bad, dt.as_secs_f64()),
    }
}

fn depth() -> Line {
    let d = depth1(&ground(MIDDLE));
    Line { ok: d == 5, detail: format!("middle-vertex example has {d} initials") }
}

fn frontier() -> Line {
    let t0 = Instant::now();
    let f_pair = unique_perfect_frontier(PAIR);
    let ok_pair = f_pair == with_swap(&pair_cases(), "a", "b");
    let f_middle = unique_perfect_frontier(MIDDLE);
    let ok_middle = f_middle == with_swap(&middle_cases(), "a1", "a2");
    let f_tree: BTreeSet<_> = unique_perfect_frontier(TREE).into_iter().map(|(t, _)| t).collect();
    let listed: BTreeSet<_> = tree_cases().into_iter().collect();
    let missing = listed.difference(&f_tree).count();
    let extra = f_tree.difference(&listed).count();
    let ok_tree = missing == 0 && extra == 0;
    let dt = t0.elapsed();
    Line {
        ok: ok_tree && ok_pair && ok_middle && dt < Duration::from_secs(10),
        detail: format!(
            "tree example {} (missing {missing}, extra {extra}), pair example {} ({} shapes), middle-vertex example {} ({} shapes), {:.2} s",
            verdict(ok_tree),
            verdict(ok_pair),
            f_pair.len(),
            verdict(ok_middle),
            f_middle.len(),
            dt.as_secs_f64()
        ),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "equal"
    } else {
        "differs"
    }
}

fn counts(r: &VerifyReport, kinds: &[&str]) -> Line {
    let total: usize = kinds.iter().map(|k| r.totals[*k]).sum();
    let parts: Vec<String> = kinds
        .iter()
        .map(|k| format!("{k} {} ({} outside interior-zero cores)", r.totals[*k], r.totals_excluding_interior_zero[*k]))
        .collect();
    Line { ok: total == 0, detail: parts.join(", ") }
}

fn local_model() -> Line {
    let dims: Vec<i64> = [(1, 3), (4, 3), (2, 5)].iter().map(|&(n, d)| primary_dimension(n, d)).collect();
    let formula: Vec<i64> = [(1i64, 3i64), (4, 3), (2, 5)].iter().map(|&(n, d)| d * (n + 1) - n + 3).collect();
    let listed = [8, 14, 13];
    let note = if dims[..] != listed[..] {
        format!(", listed values {listed:?} differ from the formula at (2,5)")
    } else {
        String::new()
    };
    Line { ok: dims == formula, detail: format!("primary dimensions {dims:?}{note}") }
}

fn oracle() -> Line {
    let mut sizes = Vec::new();
    let mut ok = true;
    for d in 0..=3 {
        let lib = common::library_codes(d);
        ok &= lib.len() == enumerate_graphs(d, d).len() && lib == common::oracle(d);
        sizes.push(lib.len());
    }
    Line { ok, detail: format!("graph counts for d = 0..3: {sizes:?}") }
}

fn determinism() -> Line {
    let opts = EngineOptions::default();
    let a = report_json(&verify(3, &opts).unwrap());
    let b = report_json(&verify(3, &opts).unwrap());
    Line { ok: a == b, detail: format!("two reports of {} bytes, identical: {}", a.len(), a == b) }
}

fn main() {
    let mut passed = 0;
    passed += line(1, "golden vocabularies", goldens()) as u32;
    passed += line(2, "golden depth", depth()) as u32;
    passed += line(3, "golden round-A frontier", frontier()) as u32;

    let t0 = Instant::now();
    let r = verify(4, &EngineOptions::default()).unwrap();
    let dt = t0.elapsed();
    println!("exhaustive run: {} graphs with d <= 4 in {:.1} s", r.graphs.len(), dt.as_secs_f64());
    let mut l = counts(&r, &["excellent-after-A", "excellent-after-B"]);
    l.ok &= dt < Duration::from_secs(600);
    passed += line(4, "excellent words after rounds A and B", l) as u32;
    passed += line(5, "new letters leave the initials", counts(&r, &["lambda-not-initial", "theta-not-initial"])) as u32;
    passed += line(
        6,
        "depth schedule and admissibility",
        counts(&r, &["depth-jump", "stranded-center", "order-regression", "budget-exceeded", "admissibility"]),
    ) as u32;
    passed += line(7, "diagonalizability", counts(&r, &["diagonalization", "negative-control"])) as u32;
    drop(r);

    passed += line(8, "local model dimension", local_model()) as u32;
    passed += line(9, "enumeration oracle", oracle()) as u32;
    passed += line(10, "determinism", determinism()) as u32;
    println!("{passed}/10 criteria pass");
}
