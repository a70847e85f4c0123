//! Threshold ranks `rk` and `rk*` on finite relational models.
//!
//! "Uncountable" is replaced by "of size at least θ". Every quantifier-free
//! formula satisfied by a tuple is implied by the tuple's complete
//! quantifier-free type, so both rank clauses are evaluated against that one
//! type. The values computed here are θ-ranks of a finite model.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gf2::BitVec;

/// A rank value: `-1`, a natural number, or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rank {
    NegOne,
    Fin(usize),
    Infinite,
}

impl Rank {
    fn succ(self) -> Rank {
        match self {
            Rank::NegOne => Rank::Fin(0),
            Rank::Fin(n) => Rank::Fin(n + 1),
            Rank::Infinite => Rank::Infinite,
        }
    }

    pub fn as_i64(self) -> Option<i64> {
        match self {
            Rank::NegOne => Some(-1),
            Rank::Fin(n) => Some(n as i64),
            Rank::Infinite => None,
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::NegOne => f.write_str("-1"),
            Rank::Fin(n) => write!(f, "{n}"),
            Rank::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.as_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(-1) => Ok(Rank::NegOne),
            Raw::Int(n) if n >= 0 => Ok(Rank::Fin(n as usize)),
            Raw::Str(s) if s == "inf" => Ok(Rank::Infinite),
            _ => Err(serde::de::Error::custom("rank must be -1, a natural number or \"inf\"")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    pub tuples: BTreeSet<Vec<usize>>,
}

/// A model on the universe `0..size` with finitely many named relations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct FiniteModel {
    size: usize,
    relations: Vec<Relation>,
    // Dense membership tables, indexed in base `size`.
    dense: Vec<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    size: usize,
    relations: Vec<Relation>,
}

impl TryFrom<ModelDoc> for FiniteModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<FiniteModel> {
        FiniteModel::new(doc.size, doc.relations)
    }
}

impl From<FiniteModel> for ModelDoc {
    fn from(m: FiniteModel) -> ModelDoc {
        ModelDoc {
            size: m.size,
            relations: m.relations,
        }
    }
}

const MAX_DENSE: usize = 1 << 24;

impl FiniteModel {
    pub fn new(size: usize, relations: Vec<Relation>) -> Result<FiniteModel> {
        let mut names = BTreeSet::new();
        let mut dense = Vec::new();
        for r in &relations {
            if !names.insert(r.name.as_str()) {
                return Err(Error::usage(format!("relation {} declared twice", r.name)));
            }
            let cells = size
                .checked_pow(r.arity as u32)
                .filter(|&c| c <= MAX_DENSE)
                .ok_or_else(|| Error::Resource(format!("relation {} is too large", r.name)))?;
            let mut table = vec![false; cells];
            for t in &r.tuples {
                if t.len() != r.arity {
                    return Err(Error::usage(format!(
                        "tuple {t:?} of relation {} has arity {} not {}",
                        r.name,
                        t.len(),
                        r.arity
                    )));
                }
                if let Some(&bad) = t.iter().find(|&&a| a >= size) {
                    return Err(Error::usage(format!(
                        "element {bad} of relation {} is outside the universe 0..{size}",
                        r.name
                    )));
                }
                table[t.iter().fold(0, |acc, &a| acc * size + a)] = true;
            }
            dense.push(table);
        }
        Ok(FiniteModel { size, relations, dense })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    fn holds_at(&self, rel: usize, args: impl Iterator<Item = usize>) -> bool {
        self.dense[rel][args.fold(0, |acc, a| acc * self.size + a)]
    }

    pub fn holds(&self, name: &str, args: &[usize]) -> Option<bool> {
        let rel = self.relations.iter().position(|r| r.name == name)?;
        (args.len() == self.relations[rel].arity && args.iter().all(|&a| a < self.size))
            .then(|| self.holds_at(rel, args.iter().copied()))
    }
}

/// The universe `0..n` with `Q` the strict order.
pub fn order_model(n: usize) -> Result<FiniteModel> {
    if n == 0 {
        return Err(Error::usage("the order model needs at least one element"));
    }
    let tuples = (0..n).flat_map(|a| (a + 1..n).map(move |b| vec![a, b])).collect();
    FiniteModel::new(
        n,
        vec![Relation {
            name: "Q".into(),
            arity: 2,
            tuples,
        }],
    )
}

/// The complete quantifier-free type of a tuple: the truth value of every
/// equality `x_i = x_j` and every relational atom over its variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QfType {
    len: usize,
    eq: BitVec,
    atoms: Vec<BitVec>,
}

impl QfType {
    pub fn arity(&self) -> usize {
        self.len
    }

    /// Truth of `x_i = x_j`.
    pub fn eq(&self, i: usize, j: usize) -> bool {
        self.eq.get(i * self.len + j)
    }

    /// Truth of `R(x_{v_0}, …)` for the relation at position `rel`.
    pub fn atom(&self, rel: usize, vars: &[usize]) -> bool {
        let idx = vars.iter().fold(0, |acc, &v| acc * self.len + v);
        self.atoms[rel].get(idx)
    }

    /// A canonical text form; equal strings mean equal types.
    pub fn fingerprint(&self, model: &FiniteModel) -> String {
        let mut s = format!("n={};eq={}", self.len, self.eq);
        for (r, bits) in model.relations.iter().zip(&self.atoms) {
            s.push_str(&format!(";{}={}", r.name, bits));
        }
        s
    }
}

fn type_of(model: &FiniteModel, tuple: &[usize]) -> QfType {
    let n = tuple.len();
    let eq = BitVec::from_fn(n * n, |k| tuple[k / n] == tuple[k % n]);
    let atoms = model
        .relations
        .iter()
        .enumerate()
        .map(|(r, rel)| {
            let cells = n.pow(rel.arity as u32);
            BitVec::from_fn(cells, |mut idx| {
                let mut vars = vec![0; rel.arity];
                for slot in vars.iter_mut().rev() {
                    *slot = tuple[idx % n];
                    idx /= n;
                }
                model.holds_at(r, vars.into_iter())
            })
        })
        .collect();
    QfType { len: n, eq, atoms }
}

pub fn qf_type(model: &FiniteModel, tuple: &[usize]) -> Result<QfType> {
    if let Some(&bad) = tuple.iter().find(|&&a| a >= model.size) {
        return Err(Error::usage(format!(
            "element {bad} is outside the universe 0..{}",
            model.size
        )));
    }
    Ok(type_of(model, tuple))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankParams {
    /// Sets of at least this size count as large.
    pub theta: usize,
    /// Largest `|w|` reported in tables.
    pub max_w: usize,
}

impl RankParams {
    pub fn new(theta: usize, max_w: usize) -> Result<RankParams> {
        if theta < 1 {
            return Err(Error::usage("theta must be at least 1"));
        }
        Ok(RankParams { theta, max_w })
    }
}

/// `rk(v)`, the type fingerprint `ζ(v)` of the increasing enumeration of `v`,
/// and the position `k(v)` witnessing that the rank does not grow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTriple {
    pub rk: Rank,
    pub zeta: String,
    pub k: usize,
}

/// Memoized θ-rank evaluation on one model.
pub struct RankEngine<'a> {
    model: &'a FiniteModel,
    theta: usize,
    rk_memo: HashMap<Vec<usize>, Rank>,
    star_memo: HashMap<Vec<usize>, Rank>,
}

impl<'a> RankEngine<'a> {
    pub fn new(model: &'a FiniteModel, theta: usize) -> Result<RankEngine<'a>> {
        if theta < 1 {
            return Err(Error::usage("theta must be at least 1"));
        }
        Ok(RankEngine {
            model,
            theta,
            rk_memo: HashMap::new(),
            star_memo: HashMap::new(),
        })
    }

    pub fn model(&self) -> &FiniteModel {
        self.model
    }

    pub fn theta(&self) -> usize {
        self.theta
    }

    fn normalize(&self, w: &[usize]) -> Result<Vec<usize>> {
        if w.is_empty() {
            return Err(Error::usage("ranks are defined for nonempty sets only"));
        }
        let mut v = w.to_vec();
        v.sort_unstable();
        v.dedup();
        if let Some(&bad) = v.iter().find(|&&a| a >= self.model.size) {
            return Err(Error::usage(format!(
                "element {bad} is outside the universe 0..{}",
                self.model.size
            )));
        }
        Ok(v)
    }

    /// Elements `a` with `type(w[k := a]) = type(w)`, in increasing order.
    pub fn realizers(&self, w: &[usize], k: usize) -> Vec<usize> {
        let base = type_of(self.model, w);
        let mut t = w.to_vec();
        (0..self.model.size)
            .filter(|&a| {
                t[k] = a;
                type_of(self.model, &t) == base
            })
            .collect()
    }

    fn large_everywhere(&self, w: &[usize]) -> bool {
        (0..w.len()).all(|k| self.realizers(w, k).len() >= self.theta)
    }

    pub fn rk(&mut self, w: &[usize]) -> Result<Rank> {
        let w = self.normalize(w)?;
        Ok(self.rk_sorted(&w))
    }

    fn rk_sorted(&mut self, w: &[usize]) -> Rank {
        if let Some(&r) = self.rk_memo.get(w) {
            return r;
        }
        let r = if !self.large_everywhere(w) {
            Rank::NegOne
        } else {
            (0..w.len())
                .map(|k| self.best_extension(w, k).succ())
                .min()
                .expect("w is nonempty")
        };
        self.rk_memo.insert(w.to_vec(), r);
        r
    }

    // max rk(w ∪ {a}) over a ∉ w realizing the type at k; -1 if none.
    fn best_extension(&mut self, w: &[usize], k: usize) -> Rank {
        let mut best = Rank::NegOne;
        for a in self.realizers(w, k) {
            if w.binary_search(&a).is_ok() {
                continue;
            }
            let mut v = w.to_vec();
            v.insert(v.partition_point(|&x| x < a), a);
            best = best.max(self.rk_sorted(&v));
        }
        best
    }

    pub fn rk_star(&mut self, w: &[usize]) -> Result<Rank> {
        let w = self.normalize(w)?;
        Ok(self.star_sorted(&w))
    }

    fn star_sorted(&mut self, w: &[usize]) -> Rank {
        if let Some(&r) = self.star_memo.get(w) {
            return r;
        }
        let r = if !self.large_everywhere(w) {
            Rank::NegOne
        } else {
            (0..w.len())
                .map(|k| self.best_clique(w, k).succ())
                .min()
                .expect("w is nonempty")
        };
        self.star_memo.insert(w.to_vec(), r);
        r
    }

    // The largest α admitting θ pairwise distinct realizers at k, the first
    // being w[k], with rk*(w ∖ {w[k]} ∪ {x, y}) ≥ α for every two of them;
    // -1 if no α ≥ 0 works.
    fn best_clique(&mut self, w: &[usize], k: usize) -> Rank {
        if self.theta == 1 {
            return Rank::Infinite;
        }
        let anchor = w[k];
        let rest: Vec<usize> = w.iter().copied().filter(|&a| a != anchor).collect();
        let pool = self.realizers(w, k);
        if pool.len() < self.theta {
            return Rank::NegOne;
        }
        let m = pool.len();
        let mut weight = vec![vec![Rank::NegOne; m]; m];
        for i in 0..m {
            for j in i + 1..m {
                let mut v = rest.clone();
                v.push(pool[i]);
                v.push(pool[j]);
                v.sort_unstable();
                let r = self.star_sorted(&v);
                weight[i][j] = r;
                weight[j][i] = r;
            }
        }
        let a0 = pool
            .iter()
            .position(|&a| a == anchor)
            .expect("w[k] realizes its own type");
        let mut levels: Vec<Rank> = weight
            .iter()
            .flatten()
            .copied()
            .filter(|&r| r >= Rank::Fin(0))
            .collect();
        levels.sort();
        levels.dedup();
        for &alpha in levels.iter().rev() {
            let adj: Vec<Vec<bool>> = weight
                .iter()
                .map(|row| row.iter().map(|&r| r >= alpha).collect())
                .collect();
            if has_clique(&adj, a0, self.theta) {
                return alpha;
            }
        }
        Rank::NegOne
    }

    /// `(rk(v), ζ(v), k(v))`.
    pub fn triple(&mut self, v: &[usize]) -> Result<RankTriple> {
        let v = self.normalize(v)?;
        let rk = self.rk_sorted(&v);
        let zeta = type_of(self.model, &v).fingerprint(self.model);
        let k = match rk {
            Rank::NegOne => (0..v.len())
                .find(|&k| self.realizers(&v, k).len() < self.theta)
                .expect("rank -1 means some position has few realizers"),
            _ => (0..v.len())
                .find(|&k| self.best_extension(&v, k) < rk)
                .expect("a finite rank is attained at some position"),
        };
        Ok(RankTriple { rk, zeta, k })
    }
}

// Is there a clique of `size` vertices containing `v0`?
fn has_clique(adj: &[Vec<bool>], v0: usize, size: usize) -> bool {
    let cand: Vec<usize> = (0..adj.len()).filter(|&x| x != v0 && adj[v0][x]).collect();
    fn extend(adj: &[Vec<bool>], cand: &[usize], need: usize) -> bool {
        if need == 0 {
            return true;
        }
        if cand.len() < need {
            return false;
        }
        for (i, &x) in cand.iter().enumerate() {
            if cand.len() - i < need {
                break;
            }
            let next: Vec<usize> = cand[i + 1..].iter().copied().filter(|&y| adj[x][y]).collect();
            if extend(adj, &next, need - 1) {
                return true;
            }
        }
        false
    }
    extend(adj, &cand, size - 1)
}

pub fn rk(model: &FiniteModel, w: &[usize], p: &RankParams) -> Result<Rank> {
    if w.len() > p.max_w {
        return Err(Error::usage(format!("|w| = {} exceeds max_w = {}", w.len(), p.max_w)));
    }
    RankEngine::new(model, p.theta)?.rk(w)
}

pub fn rk_star(model: &FiniteModel, w: &[usize], p: &RankParams) -> Result<Rank> {
    if w.len() > p.max_w {
        return Err(Error::usage(format!("|w| = {} exceeds max_w = {}", w.len(), p.max_w)));
    }
    RankEngine::new(model, p.theta)?.rk_star(w)
}

/// Every nonempty `w ⊆ 0..n` with `|w| ≤ max_w`, by size then lexicographically.
pub fn subsets_up_to(n: usize, max_w: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=max_w.min(n) {
        let mut cur: Vec<usize> = (0..size).collect();
        loop {
            out.push(cur.clone());
            let Some(i) = (0..size).rev().find(|&i| cur[i] < n - size + i) else {
                break;
            };
            cur[i] += 1;
            for j in i + 1..size {
                cur[j] = cur[j - 1] + 1;
            }
        }
    }
    out
}

/// True iff every nonempty `w` with `|w| ≤ max_w` has θ-rank below `eps`.
pub fn npr_check(model: &FiniteModel, eps: usize, p: &RankParams) -> Result<bool> {
    let mut engine = RankEngine::new(model, p.theta)?;
    for w in subsets_up_to(model.size, p.max_w) {
        if engine.rk(&w)? >= Rank::Fin(eps) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The expansion of `m` (universe `0..l`) to the universe `0..lp`.
///
/// `f[γ − l]` maps `0..γ` onto `0..l` for each `γ ∈ [l, lp)`, and `f[0]` must
/// be the identity. Relations: each `R` copied; `Q_R` of one higher arity
/// holding `(a_0, …, a_{r−1}, γ)` when `l ≤ γ`, every `a_i < γ` and
/// `(f_γ(a_0), …) ∈ R`; `S` the strict order; `T` the unary set `[l, lp)`.
///
/// Finite `γ > l` admit no bijection onto `l`, so surjections stand in for
/// the bijections of the infinite construction.
pub fn build_successor_model(m: &FiniteModel, l: usize, lp: usize, f: &[Vec<usize>]) -> Result<FiniteModel> {
    if m.size != l {
        return Err(Error::usage(format!("model has size {} but L = {l}", m.size)));
    }
    if lp < l {
        return Err(Error::usage(format!("L' = {lp} is below L = {l}")));
    }
    if f.len() != lp - l {
        return Err(Error::usage(format!(
            "expected {} maps for γ in [{l}, {lp}), got {}",
            lp - l,
            f.len()
        )));
    }
    for (off, fg) in f.iter().enumerate() {
        let gamma = l + off;
        if fg.len() != gamma {
            return Err(Error::usage(format!("f_{gamma} must have domain 0..{gamma}")));
        }
        if fg.iter().any(|&v| v >= l) {
            return Err(Error::usage(format!("f_{gamma} leaves 0..{l}")));
        }
        let image: BTreeSet<usize> = fg.iter().copied().collect();
        if image.len() != l {
            return Err(Error::usage(format!("f_{gamma} is not onto 0..{l}")));
        }
        if gamma == l && fg.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(Error::usage(format!("f_{l} must be the identity")));
        }
    }
    let mut names: BTreeSet<String> = m.relations.iter().map(|r| r.name.clone()).collect();
    let mut relations = m.relations.clone();
    for (ri, r) in m.relations.iter().enumerate() {
        let mut tuples = BTreeSet::new();
        for (off, fg) in f.iter().enumerate() {
            let gamma = l + off;
            if gamma == 0 && r.arity > 0 {
                continue;
            }
            let mut args = vec![0usize; r.arity];
            loop {
                if m.holds_at(ri, args.iter().map(|&a| fg[a])) {
                    let mut t = args.clone();
                    t.push(gamma);
                    tuples.insert(t);
                }
                let Some(i) = (0..r.arity).rev().find(|&i| args[i] + 1 < gamma) else {
                    break;
                };
                args[i] += 1;
                for a in &mut args[i + 1..] {
                    *a = 0;
                }
            }
        }
        relations.push(Relation {
            name: format!("Q_{}", r.name),
            arity: r.arity + 1,
            tuples,
        });
    }
    relations.push(Relation {
        name: "S".into(),
        arity: 2,
        tuples: (0..lp).flat_map(|a| (a + 1..lp).map(move |b| vec![a, b])).collect(),
    });
    relations.push(Relation {
        name: "T".into(),
        arity: 1,
        tuples: (l..lp).map(|g| vec![g]).collect(),
    });
    for r in &relations[m.relations.len()..] {
        if !names.insert(r.name.clone()) {
            return Err(Error::usage(format!("relation name {} is already taken", r.name)));
        }
    }
    FiniteModel::new(lp, relations)
}
