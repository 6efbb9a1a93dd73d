//! Weighted genus-2 dual graphs: validation, core extraction, tail order,
//! canonical encodings and exhaustive enumeration.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = String;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub genus: u8,
    pub weight: u32,
}

impl Vertex {
    pub fn new(id: &str, genus: u8, weight: u32) -> Self {
        Vertex { id: id.to_string(), genus, weight }
    }
}

/// A labeled tree of components. Edges are stored as vertex positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedDualGraph {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
}

/// The root chain `o_-, o_1, ..., o_+` (or a single root) and its edges `q_1, ..., q_{l+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreDescriptor {
    pub root_vertices: Vec<VertexId>,
    pub root_edges: Vec<(VertexId, VertexId)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailOrder {
    Less,
    Greater,
    Incomparable,
}

impl WeightedDualGraph {
    /// Builds a graph from vertices and edges given by vertex id. Only checks that the
    /// ids resolve; use [`validate`] for the stability invariants.
    pub fn from_parts(vertices: Vec<Vertex>, edges: &[(&str, &str)]) -> Result<Self> {
        let mut pos = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if pos.insert(v.id.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut es = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *pos
                .get(*a)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown vertex {a}")))?;
            let ib = *pos
                .get(*b)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown vertex {b}")))?;
            es.push((ia, ib));
        }
        Ok(WeightedDualGraph { vertices, edges: es })
    }

    pub fn from_indexed(vertices: Vec<Vertex>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = vertices.len();
        if edges.iter().any(|&(a, b)| a >= n || b >= n) {
            return Err(Error::InvalidGraph("edge endpoint out of range".into()));
        }
        let names: Vec<&str> = vertices.iter().map(|v| v.id.as_str()).collect();
        let mut seen = std::collections::HashSet::new();
        for nm in &names {
            if !seen.insert(*nm) {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {nm}")));
            }
        }
        Ok(WeightedDualGraph { vertices, edges })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn valence(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn total_weight(&self) -> u32 {
        self.vertices.iter().map(|v| v.weight).sum()
    }
}

fn is_tree(g: &WeightedDualGraph) -> bool {
    let n = g.vertices.len();
    if n == 0 || g.edges.len() != n - 1 {
        return false;
    }
    if g.edges.iter().any(|&(a, b)| a == b) {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == n
}

pub fn validate(g: &WeightedDualGraph) -> Result<()> {
    if !is_tree(g) {
        return Err(Error::NotATree);
    }
    if let Some(v) = g.vertices.iter().find(|v| v.genus > 2) {
        return Err(Error::BadCoreShape(format!("vertex {} has genus {}", v.id, v.genus)));
    }
    let sum: u32 = g.vertices.iter().map(|v| v.genus as u32).sum();
    if sum != 2 {
        return Err(Error::GenusSumNot2(sum));
    }
    for (i, v) in g.vertices.iter().enumerate() {
        if v.genus == 0 && v.weight == 0 && g.valence(i) < 3 {
            return Err(Error::Unstable(v.id.clone()));
        }
    }
    let chain = root_chain(g)?;
    if chain.len() > 1 && chain[1..chain.len() - 1].iter().any(|&i| g.vertices[i].genus != 0) {
        return Err(Error::BadCoreShape("interior core vertex of positive genus".into()));
    }
    Ok(())
}

fn path(g: &WeightedDualGraph, from: usize, to: usize) -> Option<Vec<usize>> {
    let n = g.vertices.len();
    let mut parent = vec![usize::MAX; n];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for w in g.neighbors(v) {
            if parent[w] == usize::MAX {
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    if parent[to] == usize::MAX {
        return None;
    }
    let mut out = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        out.push(cur);
    }
    out.reverse();
    Some(out)
}

/// Root positions ordered from `o_-` to `o_+`; the first genus-1 vertex in storage order is `o_-`.
pub(crate) fn root_chain(g: &WeightedDualGraph) -> Result<Vec<usize>> {
    if let Some(i) = g.vertices.iter().position(|v| v.genus == 2) {
        return Ok(vec![i]);
    }
    let ones: Vec<usize> = (0..g.vertices.len()).filter(|&i| g.vertices[i].genus == 1).collect();
    if ones.len() != 2 {
        return Err(Error::BadCoreShape(format!("{} vertices of genus 1", ones.len())));
    }
    path(g, ones[0], ones[1]).ok_or(Error::NotATree)
}

pub fn core(g: &WeightedDualGraph) -> Result<CoreDescriptor> {
    let chain = root_chain(g)?;
    let ids: Vec<VertexId> = chain.iter().map(|&i| g.vertices[i].id.clone()).collect();
    let edges = ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    Ok(CoreDescriptor { root_vertices: ids, root_edges: edges })
}

/// Rooted view of a valid graph: chain positions, tail parents and children.
#[derive(Clone, Debug)]
pub struct Layout {
    pub roots: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub root_pos: Vec<usize>,
    pub is_root: Vec<bool>,
}

impl Layout {
    pub fn new(g: &WeightedDualGraph) -> Result<Self> {
        let roots = root_chain(g)?;
        let n = g.vertices.len();
        let mut is_root = vec![false; n];
        for &r in &roots {
            is_root[r] = true;
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut root_pos = vec![usize::MAX; n];
        for (p, &r) in roots.iter().enumerate() {
            root_pos[r] = p;
            let mut stack = vec![r];
            while let Some(v) = stack.pop() {
                for w in g.neighbors(v) {
                    if is_root[w] || root_pos[w] != usize::MAX {
                        continue;
                    }
                    root_pos[w] = p;
                    parent[w] = Some(v);
                    children[v].push(w);
                    stack.push(w);
                }
            }
        }
        for c in children.iter_mut() {
            c.sort_unstable();
        }
        Ok(Layout { roots, parent, children, root_pos, is_root })
    }

    /// Tail vertices from the root (exclusive) down to `v` (inclusive).
    pub fn chain_to(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        while !self.is_root[cur] {
            out.push(cur);
            cur = self.parent[cur].expect("tail vertex has a parent");
        }
        out.reverse();
        out
    }

    pub fn tail_preorder(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.children[root].iter().rev().copied().collect();
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children[v].iter().rev().copied());
        }
        out
    }
}

pub fn tail_order(g: &WeightedDualGraph, v: &str, w: &str) -> Result<TailOrder> {
    let layout = Layout::new(g)?;
    let iv = g.index_of(v).ok_or_else(|| Error::NotATailVertex(v.to_string()))?;
    let iw = g.index_of(w).ok_or_else(|| Error::NotATailVertex(w.to_string()))?;
    if layout.is_root[iv] {
        return Err(Error::NotATailVertex(v.to_string()));
    }
    if layout.is_root[iw] {
        return Err(Error::NotATailVertex(w.to_string()));
    }
    if iv == iw {
        return Ok(TailOrder::Incomparable);
    }
    if layout.chain_to(iw).contains(&iv) {
        Ok(TailOrder::Less)
    } else if layout.chain_to(iv).contains(&iw) {
        Ok(TailOrder::Greater)
    } else {
        Ok(TailOrder::Incomparable)
    }
}

fn encode_tail(g: &WeightedDualGraph, l: &Layout, v: usize) -> String {
    let mut kids: Vec<String> = l.children[v].iter().map(|&c| encode_tail(g, l, c)).collect();
    kids.sort();
    format!("({}{})", g.vertices[v].weight, kids.concat())
}

fn encode_root(g: &WeightedDualGraph, l: &Layout, r: usize) -> String {
    let mut kids: Vec<String> = l.children[r].iter().map(|&c| encode_tail(g, l, c)).collect();
    kids.sort();
    format!("[{}:{}{}]", g.vertices[r].genus, g.vertices[r].weight, kids.concat())
}

/// Encoding equal for isomorphic graphs (core chain reversal allowed).
pub fn canonical_form(g: &WeightedDualGraph) -> Vec<u8> {
    let l = Layout::new(g).expect("canonical_form requires a valid graph");
    let parts: Vec<String> = l.roots.iter().map(|&r| encode_root(g, &l, r)).collect();
    let fwd = parts.concat();
    let rev: String = parts.iter().rev().cloned().collect();
    fwd.min(rev).into_bytes()
}

/// Prints the graph in bracket notation, e.g. `g2(0)[a(2), b(0)[c(3), d(2)]]`.
pub fn to_notation(g: &WeightedDualGraph) -> String {
    let l = Layout::new(g).expect("to_notation requires a valid graph");
    fn tails(g: &WeightedDualGraph, l: &Layout, v: usize) -> String {
        if l.children[v].is_empty() {
            return String::new();
        }
        let items: Vec<String> = l.children[v]
            .iter()
            .map(|&c| format!("{}({}){}", g.vertices[c].id, g.vertices[c].weight, tails(g, l, c)))
            .collect();
        format!("[{}]", items.join(", "))
    }
    let parts: Vec<String> = l
        .roots
        .iter()
        .map(|&r| {
            let v = &g.vertices[r];
            let head = match v.genus {
                2 => format!("g2({})", v.weight),
                1 => format!("g1({})", v.weight),
                _ => format!("0({})", v.weight),
            };
            format!("{}{}", head, tails(g, &l, r))
        })
        .collect();
    parts.join(" - ")
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct TailTree {
    weight: u32,
    children: Vec<TailTree>,
}

#[derive(Default)]
struct TreeCatalog {
    trees: HashMap<(u32, u32), Vec<TailTree>>,
    forests: HashMap<(u32, u32), Vec<Vec<TailTree>>>,
}

impl TreeCatalog {
    /// Stable tail trees of total weight `w` and height at most `h`.
    fn trees(&mut self, w: u32, h: u32) -> Vec<TailTree> {
        if w == 0 || h == 0 {
            return Vec::new();
        }
        if let Some(t) = self.trees.get(&(w, h)) {
            return t.clone();
        }
        let mut out = Vec::new();
        for r in 0..=w {
            for kids in self.forests(w - r, h - 1) {
                if r == 0 && kids.len() < 2 {
                    continue;
                }
                out.push(TailTree { weight: r, children: kids });
            }
        }
        out.sort();
        out.dedup();
        self.trees.insert((w, h), out.clone());
        out
    }

    /// Multisets of tail trees (sorted vectors) with total weight `w`, each of height at most `h`.
    fn forests(&mut self, w: u32, h: u32) -> Vec<Vec<TailTree>> {
        if w == 0 {
            return vec![Vec::new()];
        }
        if h == 0 {
            return Vec::new();
        }
        if let Some(f) = self.forests.get(&(w, h)) {
            return f.clone();
        }
        let mut pool = Vec::new();
        for x in 1..=w {
            pool.extend(self.trees(x, h));
        }
        pool.sort();
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(pool: &[TailTree], start: usize, left: u32, cur: &mut Vec<TailTree>, out: &mut Vec<Vec<TailTree>>) {
            if left == 0 {
                out.push(cur.clone());
                return;
            }
            for i in start..pool.len() {
                let tw = tree_weight(&pool[i]);
                if tw <= left {
                    cur.push(pool[i].clone());
                    rec(pool, i, left - tw, cur, out);
                    cur.pop();
                }
            }
        }
        rec(&pool, 0, w, &mut cur, &mut out);
        self.forests.insert((w, h), out.clone());
        out
    }
}

fn tree_weight(t: &TailTree) -> u32 {
    t.weight + t.children.iter().map(tree_weight).sum::<u32>()
}

struct CoreSpec {
    genus: u8,
    weight: u32,
    tails: Vec<TailTree>,
}

fn build_graph(core: &[CoreSpec]) -> WeightedDualGraph {
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let n = core.len();
    for (p, c) in core.iter().enumerate() {
        let id = if n == 1 {
            "o".to_string()
        } else if p == 0 {
            "o-".to_string()
        } else if p == n - 1 {
            "o+".to_string()
        } else {
            format!("o{p}")
        };
        vertices.push(Vertex { id, genus: c.genus, weight: c.weight });
    }
    for p in 1..n {
        edges.push((p - 1, p));
    }
    let mut counter = 0;
    fn add(t: &TailTree, parent: usize, vertices: &mut Vec<Vertex>, edges: &mut Vec<(usize, usize)>, counter: &mut u32) {
        *counter += 1;
        let me = vertices.len();
        vertices.push(Vertex { id: format!("v{counter}"), genus: 0, weight: t.weight });
        edges.push((parent, me));
        for c in &t.children {
            add(c, me, vertices, edges, counter);
        }
    }
    for (p, c) in core.iter().enumerate() {
        for t in &c.tails {
            add(t, p, &mut vertices, &mut edges, &mut counter);
        }
    }
    WeightedDualGraph { vertices, edges }
}

/// All isomorphism classes of valid graphs of total weight `d` whose tails have height
/// at most `max_tail_depth`, sorted by canonical form.
pub fn enumerate_graphs(d: u32, max_tail_depth: u32) -> Vec<WeightedDualGraph> {
    let mut cat = TreeCatalog::default();
    let mut found: BTreeMap<Vec<u8>, WeightedDualGraph> = BTreeMap::new();
    let mut insert = |core: Vec<CoreSpec>| {
        let g = build_graph(&core);
        debug_assert!(validate(&g).is_ok());
        found.entry(canonical_form(&g)).or_insert(g);
    };
    for w0 in 0..=d {
        for ts in cat.forests(d - w0, max_tail_depth) {
            insert(vec![CoreSpec { genus: 2, weight: w0, tails: ts }]);
        }
    }
    // Each interior vertex carries at least one unit of weight.
    for interior in 0..=d {
        let len = interior as usize + 2;
        let mut per_vertex: HashMap<u32, Vec<(u32, Vec<TailTree>)>> = HashMap::new();
        for w in 0..=d {
            let mut opts = Vec::new();
            for r in 0..=w {
                for ts in cat.forests(w - r, max_tail_depth) {
                    opts.push((r, ts));
                }
            }
            per_vertex.insert(w, opts);
        }
        let mut cur: Vec<CoreSpec> = Vec::new();
        fn rec(
            pos: usize,
            len: usize,
            left: u32,
            per_vertex: &HashMap<u32, Vec<(u32, Vec<TailTree>)>>,
            cur: &mut Vec<CoreSpec>,
            sink: &mut dyn FnMut(Vec<CoreSpec>),
        ) {
            if pos == len {
                if left == 0 {
                    let copy = cur
                        .iter()
                        .map(|c| CoreSpec { genus: c.genus, weight: c.weight, tails: c.tails.clone() })
                        .collect();
                    sink(copy);
                }
                return;
            }
            let genus = if pos == 0 || pos == len - 1 { 1 } else { 0 };
            for w in 0..=left {
                for (r, ts) in &per_vertex[&w] {
                    if genus == 0 && *r == 0 && ts.is_empty() {
                        continue;
                    }
                    cur.push(CoreSpec { genus, weight: *r, tails: ts.clone() });
                    rec(pos + 1, len, left - w, per_vertex, cur, sink);
                    cur.pop();
                }
            }
        }
        rec(0, len, d, &per_vertex, &mut cur, &mut insert);
    }
    found.into_values().collect()
}
