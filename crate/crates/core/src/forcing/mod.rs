//! Finite forcing conditions `(w, n, M, η̄, t̄, r̄, h̄, ḡ)`: validation, the
//! order, the derived structure family, and the extension, amalgamation and
//! chain constructions.
//!
//! Ordinals are naturals. The family of structures attached to a condition
//! is never stored; [`cal_m`] recomputes it. The clauses that mention the
//! background model read their rank data from a [`RankOracle`].

mod amalgamate;
mod chain;
mod extend;
mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::forest::Forest;
use crate::gf2::{is_independent, solve_translate, BitVec};
use crate::structures::{pair_key, split_key, MStruct, PairWitness};
use crate::SCHEMA;

pub use amalgamate::{amalgamate, amalgamation_sizes, check_twin, theta_index, AmalgamationSizes};
pub use chain::{build_chain, verify_run, GenericRun, ScheduleStep};
pub use extend::{bootstrap, extend_add_element, extend_dense};
pub use oracle::RankOracle;

/// Largest `|w|` for which the structure family is enumerated.
pub const MAX_CAL_M_WIDTH: usize = 20;

// Diagnostics kept per clause before the rest are summarized.
const DIAG_CAP: usize = 25;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConditionDoc", into = "ConditionDoc")]
pub struct Condition {
    pub iota: usize,
    /// Sorted, without repetitions.
    pub w: Vec<usize>,
    pub n: usize,
    pub eta: BTreeMap<usize, BitVec>,
    /// The trees `t_m`; `M` is their number.
    pub forest: Forest,
    pub r: Vec<usize>,
    /// `h_i(α,β)` and `g_i(α,β)` for every ordered pair of distinct ordinals.
    pub pairs: BTreeMap<(usize, usize), PairWitness>,
}

#[derive(Serialize, Deserialize)]
struct ConditionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    iota: usize,
    w: Vec<usize>,
    n: usize,
    #[serde(rename = "M")]
    big_m: usize,
    eta: BTreeMap<String, BitVec>,
    trees: Forest,
    r: Vec<usize>,
    h: BTreeMap<String, Vec<usize>>,
    g: BTreeMap<String, Vec<BitVec>>,
}

fn parse_ordinal(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(format!("{s:?} is not an ordinal")))
}

impl TryFrom<ConditionDoc> for Condition {
    type Error = Error;

    fn try_from(doc: ConditionDoc) -> Result<Condition> {
        if let Some(s) = &doc.schema {
            if s != SCHEMA {
                return Err(Error::parse(format!("unknown schema {s:?}")));
            }
        }
        if doc.big_m != doc.trees.len() {
            return Err(Error::parse(format!(
                "M = {} but {} trees are listed",
                doc.big_m,
                doc.trees.len()
            )));
        }
        let eta = doc
            .eta
            .into_iter()
            .map(|(k, v)| Ok((parse_ordinal(&k)?, v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let mut pairs = BTreeMap::new();
        for (key, h) in doc.h {
            let (a, b) = split_key(&key)?;
            let g = doc
                .g
                .get(&key)
                .cloned()
                .ok_or_else(|| Error::parse(format!("h has key {key} but g does not")))?;
            pairs.insert((parse_ordinal(a)?, parse_ordinal(b)?), PairWitness { h, g });
        }
        if doc.g.len() != pairs.len() {
            return Err(Error::parse("g has keys missing from h"));
        }
        Ok(Condition {
            iota: doc.iota,
            w: doc.w,
            n: doc.n,
            eta,
            forest: doc.trees,
            r: doc.r,
            pairs,
        })
    }
}

impl From<Condition> for ConditionDoc {
    fn from(p: Condition) -> ConditionDoc {
        let mut h = BTreeMap::new();
        let mut g = BTreeMap::new();
        for ((a, b), wit) in p.pairs {
            h.insert(pair_key(a, b), wit.h);
            g.insert(pair_key(a, b), wit.g);
        }
        ConditionDoc {
            schema: Some(SCHEMA.to_string()),
            iota: p.iota,
            w: p.w,
            n: p.n,
            big_m: p.forest.len(),
            eta: p.eta.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            trees: p.forest,
            r: p.r,
            h,
            g,
        }
    }
}

/// One member of the structure family: `m = m^p(ℓ*, w*)` for every listed
/// `w*`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalMEntry {
    pub m: MStruct,
    pub ell: usize,
    pub witnesses: Vec<Vec<usize>>,
}

/// For one pair `α < β`: `|(B_n + η_α) ∩ (B_n + η_β)|` and the `2ι` points
/// `η_α + g_i(α,β)`, `η_α + g_i(β,α)` of the intersection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCertificate {
    pub alpha: usize,
    pub beta: usize,
    pub overlap: usize,
    pub points: Vec<BitVec>,
}

impl Condition {
    /// `M`, the number of trees.
    pub fn tree_count(&self) -> usize {
        self.forest.len()
    }

    pub fn witness(&self, alpha: usize, beta: usize) -> Option<&PairWitness> {
        self.pairs.get(&(alpha, beta))
    }

    /// Ordered pairs of distinct elements of `w`.
    pub fn ordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.w
            .iter()
            .flat_map(move |&a| self.w.iter().filter(move |&&b| b != a).map(move |&b| (a, b)))
    }

    /// `m^p(ℓ, w*)` when the level and set qualify and the result is a valid
    /// structure over the trees. Assumes the basic clauses hold.
    pub fn structure(&self, ell: usize, wstar: &[usize]) -> Option<MStruct> {
        if ell == 0 || ell > self.n || wstar.len() < 5 {
            return None;
        }
        let mut map = BTreeMap::new();
        for &a in wstar {
            for &b in wstar {
                if a == b {
                    continue;
                }
                let wit = self.pairs.get(&(a, b))?;
                if wit.h.iter().any(|&m| self.r.get(m).is_none_or(|&r| r > ell)) {
                    return None;
                }
                let key = (self.eta.get(&a)?.prefix(ell), self.eta.get(&b)?.prefix(ell));
                if key.0 == key.1 {
                    return None;
                }
                let restricted = PairWitness {
                    h: wit.h.clone(),
                    g: wit.g.iter().map(|g| g.prefix(ell)).collect(),
                };
                map.insert(key, restricted);
            }
        }
        let u: Vec<BitVec> = wstar.iter().map(|a| self.eta[a].prefix(ell)).collect();
        let m = MStruct::new(ell, self.iota, u, map).ok()?;
        m.is_valid(&self.forest).then_some(m)
    }

    /// Overlap certificates for all pairs of `w`.
    pub fn certificates(&self) -> Result<Vec<OverlapCertificate>> {
        let mut out = Vec::new();
        for (i, &a) in self.w.iter().enumerate() {
            for &b in &self.w[i + 1..] {
                let (ea, eb) = (&self.eta[&a], &self.eta[&b]);
                let fwd = &self.pairs[&(a, b)];
                let bwd = &self.pairs[&(b, a)];
                let mut points: Vec<BitVec> = fwd.g.iter().chain(bwd.g.iter()).map(|g| ea + g).collect();
                points.sort();
                out.push(OverlapCertificate {
                    alpha: a,
                    beta: b,
                    overlap: self.forest.overlap(ea, eb)?,
                    points,
                });
            }
        }
        Ok(out)
    }
}

fn push_capped(out: &mut Vec<Diagnostic>, count: &mut usize, clause: &str, detail: String) {
    *count += 1;
    if *count <= DIAG_CAP {
        out.push(Diagnostic::new(clause, detail));
    }
}

fn summarize(out: &mut Vec<Diagnostic>, count: usize, clause: &str) {
    if count > DIAG_CAP {
        out.push(Diagnostic::new(
            clause,
            format!("{} further violations omitted", count - DIAG_CAP),
        ));
    }
}

/// The clauses that do not involve the structure family or the oracle:
/// `(*)_1` through `(*)_7`, plus the requirement `ι ≥ 3`.
pub fn validate_basic(p: &Condition) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let d = |c: &str, s: String| Diagnostic::new(c, s);
    if p.iota < 3 {
        out.push(d("iota", format!("iota = {} is below 3", p.iota)));
    }
    // (*)_1
    if p.w.len() < 5 {
        out.push(d("(*)_1", format!("|w| = {} is below 5", p.w.len())));
    }
    if p.w.windows(2).any(|x| x[0] >= x[1]) {
        out.push(d("(*)_1", "w is not strictly increasing".into()));
    }
    if p.n == 0 {
        out.push(d("(*)_1", "n must be positive".into()));
    }
    if p.forest.is_empty() {
        out.push(d("(*)_1", "M must be positive".into()));
    }
    // (*)_2
    let keys: Vec<usize> = p.eta.keys().copied().collect();
    if keys != p.w {
        out.push(d("(*)_2", "η is not indexed exactly by w".into()));
    }
    let bad_len: Vec<String> = p
        .eta
        .iter()
        .filter(|(_, v)| v.len() != p.n)
        .map(|(a, v)| format!("η_{a} has length {}", v.len()))
        .collect();
    if !bad_len.is_empty() {
        out.push(d("(*)_2", format!("{} but n = {}", bad_len.join(", "), p.n)));
    } else {
        let etas: Vec<BitVec> = p.eta.values().cloned().collect();
        if !matches!(is_independent(&etas), Ok(true)) {
            out.push(d("(*)_2", "the vectors η_α are not linearly independent".into()));
        }
    }
    // (*)_3
    if p.forest.height() != p.n {
        out.push(d(
            "(*)_3",
            format!("trees have height {} but n = {}", p.forest.height(), p.n),
        ));
    }
    if !p.forest.disjoint_tops() {
        out.push(d("(*)_3", "two trees share a node of length n".into()));
    }
    // (*)_4
    if p.r.len() != p.forest.len() {
        out.push(d(
            "(*)_4",
            format!("{} values of r for {} trees", p.r.len(), p.forest.len()),
        ));
    }
    for (m, &r) in p.r.iter().enumerate() {
        if r == 0 || r > p.n {
            out.push(d("(*)_4", format!("r_{m} = {r} is outside [1, {}]", p.n)));
        }
    }
    // (*)_5
    let expected: BTreeSet<(usize, usize)> = p.ordered_pairs().collect();
    let present: BTreeSet<(usize, usize)> = p.pairs.keys().copied().collect();
    if expected != present {
        out.push(d(
            "(*)_5",
            "h and g are not defined exactly on the ordered pairs of w".into(),
        ));
    }
    for ((a, b), wit) in &p.pairs {
        if wit.h.len() != p.iota {
            out.push(d("(*)_5", format!("({a},{b}) has {} values of h", wit.h.len())));
        }
        if let Some(m) = wit.h.iter().find(|&&m| m >= p.forest.len()) {
            out.push(d(
                "(*)_5",
                format!("h({a},{b}) = {m} is not below M = {}", p.forest.len()),
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }
    // (*)_6
    for ((a, b), wit) in &p.pairs {
        if wit.g.len() != p.iota {
            out.push(d("(*)_6", format!("({a},{b}) has {} values of g", wit.g.len())));
            continue;
        }
        for (i, g) in wit.g.iter().enumerate() {
            if g.len() != p.n {
                out.push(d("(*)_6", format!("g_{i}({a},{b}) has length {}", g.len())));
            } else if !p.forest.tree(wit.h[i]).contains(g) {
                out.push(d("(*)_6", format!("g_{i}({a},{b}) = {g} is not in tree {}", wit.h[i])));
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    for ((a, b), wit) in &p.pairs {
        if a > b {
            continue;
        }
        let back = &p.pairs[&(*b, *a)];
        for i in 0..p.iota {
            if &p.eta[a] + &wit.g[i] != &p.eta[b] + &back.g[i] {
                out.push(d("(*)_6", format!("η_{a} + g_{i}({a},{b}) ≠ η_{b} + g_{i}({b},{a})")));
            }
        }
    }
    // (*)_7
    let mut seen: HashMap<&BitVec, (usize, usize, usize)> = HashMap::new();
    for ((a, b), wit) in &p.pairs {
        for (i, g) in wit.g.iter().enumerate() {
            if let Some((a0, b0, i0)) = seen.insert(g, (*a, *b, i)) {
                out.push(d("(*)_7", format!("g_{i}({a},{b}) = g_{i0}({a0},{b0}) = {g}")));
            }
        }
    }
    out
}

/// Every member `m^p(ℓ*, w*)` of the structure family, sorted by level and
/// then by structure, each with all of its witness sets `w*`.
pub fn cal_m(p: &Condition) -> Result<Vec<CalMEntry>> {
    if let Some(d) = validate_basic(p).first() {
        return Err(Error::usage(format!("condition fails a basic clause: {d}")));
    }
    let s = p.w.len();
    if s > MAX_CAL_M_WIDTH {
        return Err(Error::Resource(format!(
            "|w| = {s} exceeds the enumeration bound {MAX_CAL_M_WIDTH}"
        )));
    }
    let subsets: Vec<Vec<usize>> = (0u32..1 << s)
        .filter(|m| m.count_ones() >= 5)
        .map(|mask| (0..s).filter(|&i| mask >> i & 1 == 1).map(|i| p.w[i]).collect())
        .collect();
    let mut index: HashMap<MStruct, usize> = HashMap::new();
    let mut entries: Vec<CalMEntry> = Vec::new();
    for wstar in subsets {
        for ell in 1..=p.n {
            if let Some(m) = p.structure(ell, &wstar) {
                match index.get(&m) {
                    Some(&i) => entries[i].witnesses.push(wstar.clone()),
                    None => {
                        index.insert(m.clone(), entries.len());
                        entries.push(CalMEntry {
                            m,
                            ell,
                            witnesses: vec![wstar.clone()],
                        });
                    }
                }
            }
        }
    }
    entries.sort_by(|x, y| (x.ell, &x.m).cmp(&(y.ell, &y.m)));
    Ok(entries)
}

// A translation-invariant key for a node set: the least of the sets u + x,
// x ∈ u, each of which contains 0.
fn translation_class(u: &[BitVec]) -> Vec<BitVec> {
    u.iter()
        .map(|x| {
            let mut v: Vec<BitVec> = u.iter().map(|y| y + x).collect();
            v.sort();
            v
        })
        .min()
        .unwrap_or_default()
}

/// All `ρ` with `m0 ≐ m1 + ρ`.
pub fn matching_shifts(m0: &MStruct, m1: &MStruct) -> Vec<BitVec> {
    if m0.ell() != m1.ell() || m0.u().len() != m1.u().len() || m0.u().is_empty() {
        return Vec::new();
    }
    m1.u()
        .iter()
        .map(|x| &m0.u()[0] + x)
        .filter(|rho| m1.translate(rho).map(|t| m0.essentially_same(&t)).unwrap_or(false))
        .collect()
}

fn check_shift_clause(p: &Condition, entries: &[CalMEntry], o: &RankOracle, out: &mut Vec<Diagnostic>) {
    let mut groups: BTreeMap<(usize, Vec<BitVec>), Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        groups.entry((e.ell, translation_class(e.m.u()))).or_default().push(i);
    }
    let mut count = 0;
    for group in groups.values() {
        for (a, &i0) in group.iter().enumerate() {
            for &i1 in &group[a..] {
                let (e0, e1) = (&entries[i0], &entries[i1]);
                for rho in matching_shifts(&e0.m, &e1.m) {
                    for w0 in &e0.witnesses {
                        for w1 in &e1.witnesses {
                            if let Err(detail) = shift_consequences(p, e0.ell, w0, w1, &rho, o) {
                                push_capped(out, &mut count, "(*)_9", detail);
                            }
                        }
                    }
                }
            }
        }
    }
    summarize(out, count, "(*)_9");
}

fn shift_consequences(
    p: &Condition,
    ell: usize,
    w0: &[usize],
    w1: &[usize],
    rho: &BitVec,
    o: &RankOracle,
) -> std::result::Result<(), String> {
    let t0 = o.triple(w0).map_err(|e| format!("oracle: {e}"))?;
    let t1 = o.triple(w1).map_err(|e| format!("oracle: {e}"))?;
    if t0 != t1 {
        return Err(format!(
            "m({ell},{w0:?}) ≐ m({ell},{w1:?}) + {rho} but the rank data differ: ({}, {}, {}) vs ({}, {}, {})",
            t0.rk, t0.zeta, t0.k, t1.rk, t1.zeta, t1.k
        ));
    }
    let (a, b) = (w0[t0.k], w1[t1.k]);
    if &p.eta[&a].prefix(ell) + rho != p.eta[&b].prefix(ell) {
        return Err(format!(
            "m({ell},{w0:?}) ≐ m({ell},{w1:?}) + {rho} but η_{a}↾{ell} + ρ ≠ η_{b}↾{ell}"
        ));
    }
    Ok(())
}

fn check_rank_clause(p: &Condition, entries: &[CalMEntry], o: &RankOracle, out: &mut Vec<Diagnostic>) {
    let mut count = 0;
    // (level, node set) of a rank -1 member -> (entry, witness, node above
    // which no branching is allowed).
    let mut targets: HashMap<(usize, Vec<BitVec>), Vec<(usize, usize, BitVec)>> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        for (j, wstar) in e.witnesses.iter().enumerate() {
            match o.triple(wstar) {
                Err(err) => push_capped(out, &mut count, "(*)_10", format!("oracle: {err}")),
                Ok(t) if t.rk == crate::model_rank::Rank::NegOne => {
                    let node = p.eta[&wstar[t.k]].prefix(e.ell);
                    targets.entry((e.ell, e.m.u().to_vec())).or_default().push((i, j, node));
                }
                Ok(_) => {}
            }
        }
    }
    let levels: BTreeSet<usize> = targets.keys().map(|k| k.0).collect();
    for n in entries {
        for &ell in levels.range(..n.ell) {
            let mut proj: Vec<BitVec> = n.m.u().iter().map(|v| v.prefix(ell)).collect();
            proj.sort();
            proj.dedup();
            let Some(list) = targets.get(&(ell, proj)) else {
                continue;
            };
            for (i, j, node) in list {
                let m = &entries[*i];
                if !m.m.essentially_extends(&n.m) {
                    continue;
                }
                let above = n.m.branching_at(node);
                if above != 1 {
                    push_capped(
                        out,
                        &mut count,
                        "(*)_10",
                        format!(
                            "rk({:?}) = -1 but a member at level {} has {above} nodes above {node}",
                            m.witnesses[*j], n.ell
                        ),
                    );
                }
            }
        }
    }
    summarize(out, count, "(*)_10");
}

/// The sum-collision clause `(*)_11`: every `ι` pairwise disjoint pairs of
/// top nodes with a common sum form the family of some `(α,β)`.
pub fn check_sum_classes(p: &Condition) -> Vec<Diagnostic> {
    let unordered = |x: &BitVec, y: &BitVec| {
        if x <= y {
            (x.clone(), y.clone())
        } else {
            (y.clone(), x.clone())
        }
    };
    let mut families: HashMap<BitVec, Vec<BTreeSet<(BitVec, BitVec)>>> = HashMap::new();
    for (i, &a) in p.w.iter().enumerate() {
        for &b in &p.w[i + 1..] {
            let (fwd, bwd) = (&p.pairs[&(a, b)], &p.pairs[&(b, a)]);
            let fam = (0..p.iota).map(|i| unordered(&fwd.g[i], &bwd.g[i])).collect();
            families.entry(&p.eta[&a] + &p.eta[&b]).or_default().push(fam);
        }
    }
    let top = p.forest.top_level();
    let mut classes: HashMap<BitVec, Vec<(usize, usize)>> = HashMap::new();
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            classes.entry(&top[i] + &top[j]).or_default().push((i, j));
        }
    }
    let mut out = Vec::new();
    let mut count = 0;
    let mut sums: Vec<&BitVec> = classes.keys().filter(|s| classes[*s].len() >= p.iota).collect();
    sums.sort();
    for s in sums {
        let class = &classes[s];
        let allowed = families.get(s).map(Vec::as_slice).unwrap_or(&[]);
        let mut chosen = Vec::new();
        if let Some(bad) = find_stray_family(&top, class, p.iota, 0, &mut chosen, allowed) {
            let shown: Vec<String> = bad.iter().map(|(x, y)| format!("{{{x},{y}}}")).collect();
            push_capped(
                &mut out,
                &mut count,
                "(*)_11",
                format!(
                    "pairs {} share the sum {s} but are not a family g(α,β)",
                    shown.join(" ")
                ),
            );
        }
    }
    summarize(&mut out, count, "(*)_11");
    out
}

// Depth-first search for `need` element-disjoint pairs of the class that do
// not form one of the allowed families.
fn find_stray_family(
    top: &[BitVec],
    class: &[(usize, usize)],
    need: usize,
    from: usize,
    chosen: &mut Vec<(usize, usize)>,
    allowed: &[BTreeSet<(BitVec, BitVec)>],
) -> Option<Vec<(BitVec, BitVec)>> {
    if chosen.len() == need {
        let fam: BTreeSet<(BitVec, BitVec)> = chosen.iter().map(|&(i, j)| (top[i].clone(), top[j].clone())).collect();
        return (!allowed.contains(&fam)).then(|| fam.into_iter().collect());
    }
    for k in from..class.len() {
        if class.len() - k < need - chosen.len() {
            break;
        }
        let (i, j) = class[k];
        if chosen.iter().any(|&(a, b)| a == i || a == j || b == i || b == j) {
            continue;
        }
        chosen.push((i, j));
        let found = find_stray_family(top, class, need, k + 1, chosen, allowed);
        chosen.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Checks `(*)_1` through `(*)_11`. The family of `(*)_8` is built rather
/// than checked; when a basic clause fails the later clauses are skipped.
pub fn validate_condition(p: &Condition, o: &RankOracle) -> Vec<Diagnostic> {
    let mut out = validate_basic(p);
    if !out.is_empty() {
        return out;
    }
    let entries = match cal_m(p) {
        Ok(e) => e,
        Err(e) => {
            out.push(Diagnostic::new("(*)_8", e.to_string()));
            return out;
        }
    };
    check_shift_clause(p, &entries, o, &mut out);
    check_rank_clause(p, &entries, o, &mut out);
    out.extend(check_sum_classes(p));
    out
}

/// `p ≤ q`: `q` is stronger than `p`.
pub fn leq(p: &Condition, q: &Condition) -> bool {
    if p.iota != q.iota || p.n > q.n || p.forest.len() > q.forest.len() {
        return false;
    }
    if !p.w.iter().all(|a| q.w.binary_search(a).is_ok()) {
        return false;
    }
    if q.forest.height() < p.n || p.r.len() != p.forest.len() || q.r.len() < p.r.len() {
        return false;
    }
    for m in 0..p.forest.len() {
        if q.forest.tree(m).truncate(p.n) != *p.forest.tree(m) || p.r[m] != q.r[m] {
            return false;
        }
    }
    for a in &p.w {
        match (p.eta.get(a), q.eta.get(a)) {
            (Some(x), Some(y)) if x.is_prefix_of(y) => {}
            _ => return false,
        }
    }
    p.pairs.iter().all(|(key, wp)| match q.pairs.get(key) {
        Some(wq) => wq.h == wp.h && wp.g.len() == wq.g.len() && wp.g.iter().zip(&wq.g).all(|(x, y)| x.is_prefix_of(y)),
        None => false,
    })
}

/// For a structure `m` at level `n` with at least five nodes, a shift `ρ`
/// and the member `m^p(n, w0)` essentially equal to `m + ρ`.
pub fn capture_translate(p: &Condition, m: &MStruct) -> Result<(BitVec, MStruct)> {
    if let Some(d) = validate_basic(p).into_iter().chain(check_sum_classes(p)).next() {
        return Err(Error::usage(format!("condition is not valid: {d}")));
    }
    if m.iota() != p.iota {
        return Err(Error::usage(format!(
            "structure has iota {} but the condition {}",
            m.iota(),
            p.iota
        )));
    }
    if m.ell() != p.n || m.u().len() < 5 {
        return Err(Error::usage(format!(
            "need level n = {} and at least 5 nodes, got level {} with {}",
            p.n,
            m.ell(),
            m.u().len()
        )));
    }
    if let Some(d) = m.validate(&p.forest).first() {
        return Err(Error::usage(format!("structure is not valid over the trees: {d}")));
    }
    let etas: Vec<BitVec> = p.eta.values().cloned().collect();
    let rho = solve_translate(m.u(), &etas)?.ok_or_else(|| Error::internal("no shift carries u into the η family"))?;
    let w0: Vec<usize> =
        p.w.iter()
            .copied()
            .filter(|a| m.position(&(&p.eta[a] + &rho)).is_some())
            .collect();
    let n = p
        .structure(p.n, &w0)
        .ok_or_else(|| Error::internal(format!("m(n, {w0:?}) is not a member")))?;
    if !m.translate(&rho)?.essentially_same(&n) {
        return Err(Error::internal(
            "the shifted structure differs from the captured member",
        ));
    }
    Ok((rho, n))
}
