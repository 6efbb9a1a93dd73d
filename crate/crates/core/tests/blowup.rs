mod common;

use std::collections::BTreeSet;

use common::{
    tree_cases, pair_cases, middle_cases, factored, graph, ground, is_unit_specialization, unique_perfect_frontier,
    with_swap, TREE, PAIR, MIDDLE,
};
use modcalc_core::blowup::{
    proper_subsets, run_all, substitute, EngineOptions, FlagPolicy, Round, Rounds,
};
use modcalc_core::modular::{depth1, derived_vocabulary, residual_initials, DecoratedPoint};
use modcalc_core::vocab::{AlphabetId, Kind, Word};
use modcalc_core::Error;

fn exc(i: u32) -> AlphabetId {
    AlphabetId::new(Kind::Exc1, i)
}

fn set_words(p: &DecoratedPoint, words: &[&str]) -> DecoratedPoint {
    let names = p.names().to_vec();
    let ws: Vec<Word> = words.iter().map(|s| Word::parse(s, &names).unwrap()).collect();
    let mut x = p.clone();
    x.s_minus = ws.clone();
    x.s_plus = ws;
    for w in &x.s_minus {
        x.registry.extend(w.letters().iter().copied());
    }
    x
}

fn letters(p: &DecoratedPoint, names: &[&str]) -> BTreeSet<AlphabetId> {
    names.iter().map(|s| Word::parse(s, p.names()).unwrap().letters()[0]).collect()
}

fn t_of(p: &DecoratedPoint) -> common::Factored {
    factored(&derived_vocabulary(p), p.names())
}

#[test]
fn ground_blowup_keeping_b_gives_case_1() {
    let p = ground(TREE);
    let ini = residual_initials(&derived_vocabulary(&p));
    assert_eq!(ini, letters(&p, &["a", "b"]));
    let x = substitute(&p, &ini, &letters(&p, &["b"]), exc(2)).unwrap();
    assert_eq!(t_of(&x), tree_cases()[0]);
}

#[test]
fn intermediate_blowups_give_cases_2_and_3() {
    let p = ground(TREE);
    let half = set_words(
        &p,
        &["e2.a", "e2.a.e2.a", "e2.c", "e2.c.e2.c", "e2.c.e2.c.e2.c", "e2.d", "e2.d.e2.d"],
    );
    let ini = residual_initials(&derived_vocabulary(&half));
    assert_eq!(ini, letters(&p, &["a", "c", "d"]));
    let x = substitute(&half, &ini, &letters(&p, &["c", "d"]), exc(3)).unwrap();
    assert_eq!(t_of(&x), tree_cases()[1]);
    let x = substitute(&half, &ini, &letters(&p, &["a", "d"]), exc(3)).unwrap();
    assert_eq!(t_of(&x), tree_cases()[2]);
    let x = substitute(&half, &ini, &letters(&p, &["a", "c"]), exc(3)).unwrap();
    assert_eq!(t_of(&x), tree_cases()[3]);
}

#[test]
fn substitution_errors() {
    let p = ground(TREE);
    let ini = letters(&p, &["a", "b"]);
    assert!(matches!(substitute(&p, &ini, &ini, exc(2)), Err(Error::NotProperSubset)));
    assert!(matches!(substitute(&p, &ini, &letters(&p, &["c"]), exc(2)), Err(Error::NotProperSubset)));
    let c = letters(&p, &["c"]).into_iter().next().unwrap();
    assert!(matches!(substitute(&p, &ini, &BTreeSet::new(), c), Err(Error::FreshCollision(_))));
}

#[test]
fn proper_subsets_are_complete() {
    let p = ground(MIDDLE);
    let ini = residual_initials(&derived_vocabulary(&p));
    let subs = proper_subsets(&ini);
    assert_eq!(subs.len(), 31);
    assert!(subs[0].is_empty());
    assert!(subs.iter().all(|s| s.is_subset(&ini) && s.len() < ini.len()));
    assert_eq!(subs.iter().collect::<BTreeSet<_>>().len(), 31);
}

#[test]
fn round_a_frontier_of_pair_example() {
    assert_eq!(unique_perfect_frontier(PAIR), with_swap(&pair_cases(), "a", "b"));
}

#[test]
fn round_a_frontier_of_middle_example() {
    assert_eq!(unique_perfect_frontier(MIDDLE), with_swap(&middle_cases(), "a1", "a2"));
}

#[test]
fn round_a_frontier_of_tree_example_contains_listed_cases() {
    let found: BTreeSet<_> = unique_perfect_frontier(TREE).into_iter().map(|(t, _)| t).collect();
    let listed = tree_cases();
    for c in &listed {
        assert!(found.contains(c), "missing {c:?}");
    }
    for extra in found.iter().filter(|f| !listed.contains(f)) {
        assert!(
            listed.iter().any(|c| is_unit_specialization(extra, c, &["a", "b", "c", "d"])),
            "unexplained {extra:?}"
        );
    }
}

#[test]
fn every_center_has_an_empty_kept_child() {
    for g in [TREE, PAIR, MIDDLE] {
        let f = run_all(&graph(g), &EngineOptions::default()).unwrap();
        for rec in f.steps.iter().filter(|r| !r.children.is_empty()) {
            for c in &rec.centers {
                let kids: Vec<_> = rec.children.iter().filter(|k| &k.parent == c).collect();
                if kids.iter().any(|k| k.choice.fresh.is_some()) {
                    assert!(kids.iter().any(|k| k.choice.kept.is_empty()), "{g} {}", rec.label());
                }
            }
        }
    }
}

#[test]
fn step_five_children_of_middle_example_jump() {
    let f = run_all(&graph(MIDDLE), &EngineOptions { rounds: Rounds::A, ..Default::default() }).unwrap();
    let rec = f.steps.iter().find(|r| r.round == Round::A && r.step == 5).unwrap();
    assert_eq!(rec.children.len(), 31);
    for c in &rec.children {
        let d = depth1(&c.state.point);
        assert!(d == 0 || d >= 6, "depth {d}");
    }
}

#[test]
fn runs_are_deterministic() {
    let opts = EngineOptions::default();
    let a = run_all(&graph(PAIR), &opts).unwrap();
    let b = run_all(&graph(PAIR), &opts).unwrap();
    let ids = |f: &modcalc_core::blowup::TerminalForest| f.terminals.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&a), ids(&b));
    let reversed = run_all(&graph("g1(0)[b(2)] - g1(0)[a(2)]"), &opts).unwrap();
    assert_eq!(a.terminals.len(), reversed.terminals.len());
}

#[test]
fn flag_policy_none_skips_flag_branches() {
    let all = run_all(&graph(PAIR), &EngineOptions::default()).unwrap();
    let none = run_all(&graph(PAIR), &EngineOptions { flags: FlagPolicy::None, ..Default::default() }).unwrap();
    assert!(none.terminals.len() <= all.terminals.len());
    assert!(none.terminals.iter().all(|s| s.point.flags.chi != Some(true)));
}

// Independent recursive round-A enumerator over plain token lists.

type Toks = Vec<String>;

#[derive(Clone)]
struct Pt {
    minus: Vec<Toks>,
    plus: Vec<Toks>,
    single: bool,
}

impl Pt {
    fn derived(&self) -> Vec<Toks> {
        if self.single {
            self.minus.clone()
        } else {
            self.minus.iter().chain(&self.plus).cloned().collect()
        }
    }
}

fn prefix_len(ws: &[Toks]) -> usize {
    let mut n = 0;
    while ws.iter().all(|w| w.len() > n && w[n] == ws[0][n]) {
        n += 1;
    }
    n
}

fn oracle_depth(p: &Pt) -> (usize, BTreeSet<String>) {
    let t = p.derived();
    let n = prefix_len(&t);
    if t.iter().any(|w| w.len() == n) {
        return (n, BTreeSet::new());
    }
    (n, t.iter().map(|w| w[n].clone()).collect())
}

fn oracle_sub(p: &Pt, ini: &BTreeSet<String>, kept: &BTreeSet<String>, fresh: &str) -> Pt {
    let f = |w: &Toks| -> Toks {
        let mut out = Vec::new();
        for x in w {
            if ini.contains(x) {
                out.push(fresh.to_string());
                if kept.contains(x) {
                    out.push(x.clone());
                }
            } else {
                out.push(x.clone());
            }
        }
        out
    };
    Pt { minus: p.minus.iter().map(f).collect(), plus: p.plus.iter().map(f).collect(), single: p.single }
}

fn oracle_leaves(p: &Pt, created_at: usize, out: &mut Vec<(String, Vec<String>)>) {
    let (n, ini) = oracle_depth(p);
    let d = ini.len();
    if d <= 1 || d <= created_at {
        let t = p.derived();
        let render = |w: &[String]| if w.is_empty() { "~".to_string() } else { w.join(".") };
        let mut res: Vec<String> = t.iter().map(|w| render(&w[n..])).collect();
        res.sort();
        out.push((render(&t[0][..n]), res));
        return;
    }
    let items: Vec<String> = ini.iter().cloned().collect();
    for mask in 0..(1u32 << d) - 1 {
        let kept: BTreeSet<String> = (0..d).filter(|i| mask & (1 << i) != 0).map(|i| items[i].clone()).collect();
        oracle_leaves(&oracle_sub(p, &ini, &kept, &format!("e{d}")), d, out);
    }
}

fn engine_leaves(g: &str) -> Vec<(String, Vec<String>)> {
    let f = run_all(&graph(g), &EngineOptions { rounds: Rounds::A, ..Default::default() }).unwrap();
    let mut v: Vec<_> = f.frontier(Round::A).unwrap().iter().map(|s| t_of(&s.point)).collect();
    v.sort();
    v
}

#[test]
fn round_a_frontier_matches_recursive_oracle() {
    for g in [TREE, PAIR, MIDDLE, "g2(0)[a(1), b(1), c(1)]", "g1(0)[a(1)[b(1)]] - g1(1)"] {
        let p = ground(g);
        let toks = |ws: &[Word]| -> Vec<Toks> {
            ws.iter().map(|w| w.letters().iter().map(|a| a.render(p.names())).collect()).collect()
        };
        let pt = Pt { minus: toks(&p.s_minus), plus: toks(&p.s_plus), single: p.is_single_root() };
        let mut want = Vec::new();
        oracle_leaves(&pt, 0, &mut want);
        want.sort();
        assert_eq!(engine_leaves(g), want, "{g}");
    }
}
