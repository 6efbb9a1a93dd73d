//! The 2 x m structural matrix of a point, its symbolic elimination and the local model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modular::DecoratedPoint;
use crate::vocab::{multiplicity, AlphabetId, EntryKey, ExponentVector, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VanishReason {
    ConjugatePoints,
    WeierstrassChain,
    ConjugateChains,
    Hyperelliptic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinorTag {
    GenericUnit,
    VanishesAtOrigin(VanishReason),
    /// A unit times the monomial of the principalizing letter's current image.
    UnitTimes(ExponentVector),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixColumn {
    pub index: usize,
    pub exp_minus: ExponentVector,
    pub exp_plus: ExponentVector,
}

/// Exponents equal the multiplicities of the current signed words. Cells listed in
/// `absorbed` carry the determinant factor of a principalized minor, which the
/// elimination removes again.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialMatrix {
    pub columns: Vec<MatrixColumn>,
    pub minors: BTreeMap<(usize, usize), MinorTag>,
    pub absorbed: Vec<(EntryKey, ExponentVector)>,
}

impl MonomialMatrix {
    pub fn minor(&self, a: usize, b: usize) -> MinorTag {
        let k = (a.min(b), a.max(b));
        self.minors.get(&k).cloned().unwrap_or(MinorTag::GenericUnit)
    }

    pub fn entry(&self, side: Sign, col: usize) -> &ExponentVector {
        match side {
            Sign::Plus => &self.columns[col].exp_plus,
            _ => &self.columns[col].exp_minus,
        }
    }
}

fn mark_minor(
    m: &mut MonomialMatrix,
    pair: (usize, usize),
    tag: MinorTag,
) {
    if pair.0 != pair.1 {
        m.minors.insert((pair.0.min(pair.1), pair.0.max(pair.1)), tag);
    }
}

pub fn structural_matrix(p: &DecoratedPoint) -> Result<MonomialMatrix> {
    let columns = (0..p.s_minus.len())
        .map(|i| MatrixColumn {
            index: i,
            exp_minus: multiplicity(&p.s_minus[i]),
            exp_plus: multiplicity(&p.s_plus[i]),
        })
        .collect();
    let mut m = MonomialMatrix { columns, minors: BTreeMap::new(), absorbed: Vec::new() };

    if p.lambda.is_some() && p.flags.chi != Some(true) {
        return Err(Error::InconsistentFlags("lambda present without chi = 1".into()));
    }
    if p.flags.chi == Some(true) {
        let c = p
            .critical
            .ok_or_else(|| Error::InconsistentFlags("chi = 1 without a critical pair".into()))?;
        let pair = (c.first.index, c.second.index);
        match &p.lambda {
            Some(b) => {
                let mu = multiplicity(&b.image);
                for cell in &b.cells {
                    m.absorbed.push((*cell, mu.clone()));
                }
                mark_minor(&mut m, pair, MinorTag::UnitTimes(mu));
            }
            None => {
                let h1 = p.ctx.indices[c.first.index].home;
                let h2 = p.ctx.indices[c.second.index].home;
                let reason = if h1 == h2 { VanishReason::WeierstrassChain } else { VanishReason::ConjugateChains };
                mark_minor(&mut m, pair, MinorTag::VanishesAtOrigin(reason));
            }
        }
    }

    if p.theta.is_some() && p.flags.hyperelliptic_core != Some(true) {
        return Err(Error::InconsistentFlags("theta present without the hyperelliptic flag".into()));
    }
    if p.flags.core_conjugate_pair == Some(true) && p.flags.hyperelliptic_core == Some(false) {
        return Err(Error::InconsistentFlags("conjugate core pair on a non-hyperelliptic core".into()));
    }
    if p.flags.hyperelliptic_core == Some(true) || p.flags.core_conjugate_pair == Some(true) {
        let (e1, e2) = p
            .hyper_pair
            .ok_or_else(|| Error::InconsistentFlags("hyperelliptic flag without a core pair".into()))?;
        let pair = (e1.index, e2.index);
        match &p.theta {
            Some(b) => {
                let mu = multiplicity(&b.image);
                for cell in &b.cells {
                    m.absorbed.push((*cell, mu.clone()));
                }
                mark_minor(&mut m, pair, MinorTag::UnitTimes(mu));
            }
            None => {
                let reason = if p.flags.hyperelliptic_core == Some(true) {
                    VanishReason::Hyperelliptic
                } else {
                    VanishReason::ConjugatePoints
                };
                mark_minor(&mut m, pair, MinorTag::VanishesAtOrigin(reason));
            }
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotChoice {
    pub side: Sign,
    pub first: usize,
    pub second: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub success: bool,
    pub pivots: Vec<ExponentVector>,
    pub choice: Option<PivotChoice>,
    pub trace: Vec<String>,
    pub failure_witness: Option<String>,
}

#[derive(Clone, Debug)]
enum Residual {
    /// Both terms share a monomial; the surviving coefficient is the minor.
    Equal(ExponentVector, MinorTag),
    Mono(ExponentVector),
    Binomial(ExponentVector, ExponentVector),
}

fn fmt_ev(e: &ExponentVector) -> String {
    e.render(&[])
}

/// Elimination: pick a pivot entry dividing every entry, reduce the other row, and pick a
/// second pivot among the reduced monomials that divides all remaining reduced entries
/// and whose coefficient minor is not vanishing.
pub fn diagonalize(m: &MonomialMatrix) -> DiagonalReport {
    let n = m.columns.len();
    let mut trace = Vec::new();
    let mut rows: BTreeMap<Sign, Vec<ExponentVector>> = BTreeMap::new();
    rows.insert(Sign::Minus, m.columns.iter().map(|c| c.exp_minus.clone()).collect());
    rows.insert(Sign::Plus, m.columns.iter().map(|c| c.exp_plus.clone()).collect());
    for (cell, mu) in &m.absorbed {
        let side = if cell.sign == Sign::Plus { Sign::Plus } else { Sign::Minus };
        let slot = &mut rows.get_mut(&side).unwrap()[cell.index];
        match slot.checked_sub(mu) {
            Some(r) => *slot = r,
            None => {
                return DiagonalReport {
                    success: false,
                    pivots: vec![],
                    choice: None,
                    trace,
                    failure_witness: Some(format!("absorbed factor does not divide cell {}", cell.index)),
                }
            }
        }
    }
    let fail = |trace: Vec<String>, why: String| DiagonalReport {
        success: false,
        pivots: vec![],
        choice: None,
        trace,
        failure_witness: Some(why),
    };
    if n == 0 {
        return DiagonalReport { success: true, pivots: vec![], choice: None, trace, failure_witness: None };
    }
    if n == 1 {
        let (a, b) = (&rows[&Sign::Minus][0], &rows[&Sign::Plus][0]);
        let p = if a.divides(b) {
            a.clone()
        } else if b.divides(a) {
            b.clone()
        } else {
            return fail(trace, format!("entries {} and {} are incomparable", fmt_ev(a), fmt_ev(b)));
        };
        trace.push(format!("single column, pivot {}", fmt_ev(&p)));
        return DiagonalReport { success: true, pivots: vec![p], choice: None, trace, failure_witness: None };
    }
    let all: Vec<&ExponentVector> = rows.values().flatten().collect();
    let mut saw_divisor = false;
    for ai in 0..n {
        for aj in 0..n {
            if aj == ai {
                continue;
            }
            for side in [Sign::Minus, Sign::Plus] {
                let s = &rows[&side];
                let o = &rows[&side.opposite()];
                let p = &s[ai];
                if !all.iter().all(|e| p.divides(e)) {
                    continue;
                }
                saw_divisor = true;
                let tag = m.minor(ai, aj);
                let f = match &tag {
                    MinorTag::VanishesAtOrigin(_) => continue,
                    MinorTag::GenericUnit => ExponentVector::zero(),
                    MinorTag::UnitTimes(mu) => mu.clone(),
                };
                let residual = |b: usize| -> Residual {
                    let a = o[b].clone();
                    let bb = s[b].add(&o[ai]).checked_sub(p).expect("pivot divides every entry");
                    if a == bb {
                        Residual::Equal(a, m.minor(ai, b))
                    } else if a.divides(&bb) {
                        Residual::Mono(a)
                    } else if bb.divides(&a) {
                        Residual::Mono(bb)
                    } else {
                        Residual::Binomial(a, bb)
                    }
                };
                let q = match residual(aj) {
                    Residual::Equal(a, _) => a.add(&f),
                    Residual::Mono(a) => a,
                    Residual::Binomial(..) => continue,
                };
                let ok = (0..n).filter(|&b| b != ai && b != aj).all(|b| match residual(b) {
                    Residual::Mono(x) => q.divides(&x),
                    Residual::Binomial(x, y) => q.divides(&x) && q.divides(&y),
                    Residual::Equal(x, g) => match g {
                        MinorTag::VanishesAtOrigin(_) => false,
                        MinorTag::GenericUnit => q.divides(&x),
                        MinorTag::UnitTimes(mu) => q.divides(&x.add(&mu)),
                    },
                });
                if ok {
                    trace.push(format!("pivot {} at row {} column {}", fmt_ev(p), side.symbol(), ai));
                    trace.push(format!("second pivot {} at column {}", fmt_ev(&q), aj));
                    return DiagonalReport {
                        success: true,
                        pivots: vec![p.clone(), q],
                        choice: Some(PivotChoice { side, first: ai, second: aj }),
                        trace,
                        failure_witness: None,
                    };
                }
            }
        }
    }
    let why = if saw_divisor {
        "no second pivot with a nonvanishing minor divides the reduced row".to_string()
    } else {
        "no entry divides every entry".to_string()
    };
    fail(trace, why)
}

/// Successful and `p_1 | p_2 | ...`.
pub fn check_presentation(r: &DiagonalReport) -> bool {
    r.success && r.pivots.windows(2).all(|w| w[0].divides(&w[1]))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalModel {
    pub n: u32,
    pub d: u32,
    pub equations: Vec<String>,
    pub primary_equations: Vec<String>,
    pub primary_dim: i64,
    pub nonunit_pivots: Vec<usize>,
    /// Irreducible components as sets of vanishing coordinates.
    pub components: Vec<Vec<String>>,
}

pub fn primary_dimension(n: u32, d: u32) -> i64 {
    d as i64 * (n as i64 + 1) - n as i64 + 3
}

pub fn local_equations(r: &DiagonalReport, n: u32, d: u32, names: &[String]) -> Result<LocalModel> {
    if !r.success {
        return Err(Error::NotDiagonalized);
    }
    let mut equations = Vec::new();
    let mut primary = Vec::new();
    for i in 1..=n {
        for (k, z) in r.pivots.iter().enumerate() {
            let zs = z.render(names);
            if z.is_zero() {
                equations.push(format!("w{}^{} = 0", k + 1, i));
            } else {
                equations.push(format!("{}*w{}^{} = 0", zs, k + 1, i));
            }
            primary.push(format!("w{}^{} = 0", k + 1, i));
        }
    }
    let nonunit: Vec<usize> = (0..r.pivots.len()).filter(|&k| !r.pivots[k].is_zero()).collect();
    // Each pivot row vanishes via its w-block or via one letter of its pivot.
    let mut options: Vec<Vec<String>> = Vec::new();
    for (k, z) in r.pivots.iter().enumerate() {
        let mut o = vec![format!("w{}", k + 1)];
        o.extend(z.0.keys().map(|a: &AlphabetId| a.render(names)));
        options.push(o);
    }
    let mut sets: Vec<BTreeSet<String>> = vec![BTreeSet::new()];
    for o in &options {
        let mut next = Vec::new();
        for s in &sets {
            for x in o {
                let mut t = s.clone();
                t.insert(x.clone());
                next.push(t);
            }
        }
        sets = next;
    }
    sets.sort();
    sets.dedup();
    let minimal: Vec<Vec<String>> = sets
        .iter()
        .filter(|s| !sets.iter().any(|t| t != *s && t.is_subset(s)))
        .map(|s| s.iter().cloned().collect())
        .collect();
    Ok(LocalModel {
        n,
        d,
        equations,
        primary_equations: primary,
        primary_dim: primary_dimension(n, d),
        nonunit_pivots: nonunit,
        components: minimal,
    })
}

/// Node-path vector from the home vertex of `index` to the core, extended along the
/// root chain toward `side`.
pub fn first_order_form(p: &DecoratedPoint, index: usize, side: Sign) -> ExponentVector {
    let info = &p.ctx.indices[index];
    let mut m = BTreeMap::new();
    if !info.home_is_root {
        for v in p.ctx.layout.chain_to(info.home) {
            m.insert(AlphabetId::tail(v as u32), 1);
        }
    }
    let roots = p.ctx.root_count();
    if roots == 2 {
        let far = (info.root_pos == 0 && side == Sign::Plus) || (info.root_pos == 1 && side == Sign::Minus);
        if far {
            m.insert(AlphabetId::edge(0), 1);
        }
    } else if roots > 2 {
        let l = (roots - 2) as u32;
        let i = info.root_pos as u32;
        let range: Vec<u32> = match side {
            Sign::Plus => ((i + 1)..=(l + 1)).collect(),
            _ => (1..=i).collect(),
        };
        for q in range {
            m.insert(AlphabetId::edge(q), 1);
        }
    }
    ExponentVector(m)
}
