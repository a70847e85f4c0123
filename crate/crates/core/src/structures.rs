//! Overlap structures `(ℓ, u, h̄, ḡ)` over a forest, their relations, and
//! bounded enumeration.
//!
//! A structure stores `u` sorted and one [`PairWitness`] per ordered pair of
//! distinct positions in `u`. The pair `(a, b)` with `a ≠ b` lives at index
//! `a·(s−1) + b'` where `s = |u|` and `b' = b` if `b < a`, `b − 1` otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::forest::Forest;
use crate::gf2::BitVec;

/// The values `h_i(η,ν)` and `g_i(η,ν)` for `i < ι` at one ordered pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairWitness {
    pub h: Vec<usize>,
    pub g: Vec<BitVec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "StructDoc", into = "StructDoc")]
pub struct MStruct {
    ell: usize,
    iota: usize,
    u: Vec<BitVec>,
    pairs: Vec<PairWitness>,
}

#[inline]
fn pair_index(s: usize, a: usize, b: usize) -> usize {
    debug_assert!(a != b && a < s && b < s);
    a * (s - 1) + if b < a { b } else { b - 1 }
}

impl MStruct {
    /// Builds a structure from a witness for every ordered pair of `u`.
    ///
    /// Only typing is enforced here (ι ≥ 2, lengths, distinct `u`, complete
    /// pair maps). The defining clauses are checked by [`MStruct::validate`].
    pub fn new(
        ell: usize,
        iota: usize,
        u: impl IntoIterator<Item = BitVec>,
        mut witness: BTreeMap<(BitVec, BitVec), PairWitness>,
    ) -> Result<MStruct> {
        if iota < 2 {
            return Err(Error::usage(format!("iota must be at least 2, got {iota}")));
        }
        let mut u: Vec<BitVec> = u.into_iter().collect();
        u.sort();
        let before = u.len();
        u.dedup();
        if u.len() != before {
            return Err(Error::usage("u lists a node twice"));
        }
        if let Some(bad) = u.iter().find(|v| v.len() != ell) {
            return Err(Error::usage(format!(
                "node {bad} of u has length {} not {ell}",
                bad.len()
            )));
        }
        let s = u.len();
        let mut pairs = vec![
            PairWitness {
                h: Vec::new(),
                g: Vec::new()
            };
            s * s.saturating_sub(1)
        ];
        for a in 0..s {
            for b in 0..s {
                if a == b {
                    continue;
                }
                let key = (u[a].clone(), u[b].clone());
                let w = witness
                    .remove(&key)
                    .ok_or_else(|| Error::usage(format!("missing witness for pair ({},{})", key.0, key.1)))?;
                if w.h.len() != iota || w.g.len() != iota {
                    return Err(Error::usage(format!(
                        "pair ({},{}) needs {iota} values of h and g",
                        key.0, key.1
                    )));
                }
                if let Some(bad) = w.g.iter().find(|g| g.len() != ell) {
                    return Err(Error::usage(format!(
                        "g-value {bad} has length {} not {ell}",
                        bad.len()
                    )));
                }
                pairs[pair_index(s, a, b)] = w;
            }
        }
        if let Some((k, _)) = witness.into_iter().next() {
            return Err(Error::usage(format!("witness for ({},{}) outside u", k.0, k.1)));
        }
        Ok(MStruct { ell, iota, u, pairs })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn iota(&self) -> usize {
        self.iota
    }

    /// The node set, sorted.
    pub fn u(&self) -> &[BitVec] {
        &self.u
    }

    pub fn position(&self, eta: &BitVec) -> Option<usize> {
        self.u.binary_search(eta).ok()
    }

    /// The witness at positions `(a, b)` of `u`.
    pub fn pair(&self, a: usize, b: usize) -> &PairWitness {
        &self.pairs[pair_index(self.u.len(), a, b)]
    }

    pub fn witness(&self, eta: &BitVec, nu: &BitVec) -> Option<&PairWitness> {
        let a = self.position(eta)?;
        let b = self.position(nu)?;
        (a != b).then(|| self.pair(a, b))
    }

    /// All ordered pairs of positions, in index order.
    pub fn ordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let s = self.u.len();
        (0..s).flat_map(move |a| (0..s).filter(move |&b| b != a).map(move |b| (a, b)))
    }

    /// Checks the defining clauses against `forest`. Each diagnostic is
    /// labelled with its clause letter, or `finite` for the depth and
    /// tree-range bounds.
    pub fn validate(&self, forest: &Forest) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.ell == 0 {
            out.push(Diagnostic::new("(a)", "level must be positive"));
        }
        if self.u.len() < 2 {
            out.push(Diagnostic::new("(a)", format!("|u| = {} is below 2", self.u.len())));
        }
        if self.ell > forest.height() {
            out.push(Diagnostic::new(
                "finite",
                format!("level {} exceeds forest height {}", self.ell, forest.height()),
            ));
        }
        for (a, b) in self.ordered_pairs() {
            let (eta, nu) = (&self.u[a], &self.u[b]);
            let w = self.pair(a, b);
            for i in 0..self.iota {
                let m = w.h[i];
                if m >= forest.len() {
                    out.push(Diagnostic::new(
                        "finite",
                        format!("h_{i}({eta},{nu}) = {m} but the forest has {} trees", forest.len()),
                    ));
                } else if self.ell <= forest.height() && !forest.tree(m).contains(&w.g[i]) {
                    out.push(Diagnostic::new(
                        "(c)",
                        format!("g_{i}({eta},{nu}) = {} is not a node of tree {m}", w.g[i]),
                    ));
                }
            }
            if a < b {
                let back = self.pair(b, a);
                for i in 0..self.iota {
                    if &(eta + &w.g[i]) != &(nu + &back.g[i]) {
                        out.push(Diagnostic::new(
                            "(d)",
                            format!("η + g_{i}(η,ν) ≠ ν + g_{i}(ν,η) at ({eta},{nu})"),
                        ));
                    }
                }
                let mut seen: Vec<&BitVec> = w.g.iter().chain(back.g.iter()).collect();
                seen.sort();
                if seen.windows(2).any(|p| p[0] == p[1]) {
                    out.push(Diagnostic::new("(e)", format!("repeated g-value at pair ({eta},{nu})")));
                }
            }
        }
        out
    }

    pub fn is_valid(&self, forest: &Forest) -> bool {
        self.validate(forest).is_empty()
    }

    /// `m + ρ`, using `ρ↾ℓ`.
    pub fn translate(&self, rho: &BitVec) -> Result<MStruct> {
        if rho.len() < self.ell {
            return Err(Error::usage(format!(
                "shift of length {} is shorter than level {}",
                rho.len(),
                self.ell
            )));
        }
        let rho = rho.prefix(self.ell);
        let shifted: Vec<BitVec> = self.u.iter().map(|v| v + &rho).collect();
        let mut map = BTreeMap::new();
        for (a, b) in self.ordered_pairs() {
            map.insert((shifted[a].clone(), shifted[b].clone()), self.pair(a, b).clone());
        }
        MStruct::new(self.ell, self.iota, shifted, map)
    }

    /// `m ⊑ n`: `n` extends `self`.
    pub fn extends(&self, n: &MStruct) -> Result<bool> {
        if self.iota != n.iota {
            return Err(Error::usage(format!(
                "comparing structures with iota {} and {}",
                self.iota, n.iota
            )));
        }
        if !self.covered_by(n) {
            return Ok(false);
        }
        for (a, b) in n.ordered_pairs() {
            let (x, y) = (n.u[a].prefix(self.ell), n.u[b].prefix(self.ell));
            if x == y {
                continue;
            }
            let Some(mine) = self.witness(&x, &y) else {
                return Ok(false);
            };
            let theirs = n.pair(a, b);
            for i in 0..self.iota {
                if mine.h[i] != theirs.h[i] || mine.g[i] != theirs.g[i].prefix(self.ell) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    // ℓ_m ≤ ℓ_n and u_m = {η↾ℓ_m : η ∈ u_n}.
    fn covered_by(&self, n: &MStruct) -> bool {
        if self.ell > n.ell {
            return false;
        }
        let mut proj: Vec<BitVec> = n.u.iter().map(|v| v.prefix(self.ell)).collect();
        proj.sort();
        proj.dedup();
        proj == self.u
    }

    /// The unique structure at level `ell` that `self` could extend, if the
    /// restricted witnesses are consistent and every pair is represented.
    pub fn project(&self, ell: usize) -> Option<MStruct> {
        if ell > self.ell {
            return None;
        }
        let mut map: BTreeMap<(BitVec, BitVec), PairWitness> = BTreeMap::new();
        for (a, b) in self.ordered_pairs() {
            let (x, y) = (self.u[a].prefix(ell), self.u[b].prefix(ell));
            if x == y {
                continue;
            }
            let w = self.pair(a, b);
            let restricted = PairWitness {
                h: w.h.clone(),
                g: w.g.iter().map(|g| g.prefix(ell)).collect(),
            };
            match map.get(&(x.clone(), y.clone())) {
                Some(prev) if *prev != restricted => return None,
                Some(_) => {}
                None => {
                    map.insert((x, y), restricted);
                }
            }
        }
        let mut u: Vec<BitVec> = self.u.iter().map(|v| v.prefix(ell)).collect();
        u.sort();
        u.dedup();
        MStruct::new(ell, self.iota, u, map).ok()
    }

    /// `m ≐ n`. Structures with different ι are never essentially the same.
    pub fn essentially_same(&self, n: &MStruct) -> bool {
        if self.iota != n.iota || self.ell != n.ell || self.u != n.u {
            return false;
        }
        self.ordered_pairs().all(|(a, b)| {
            family_match(
                self.iota,
                self.pair(a, b),
                self.pair(b, a),
                n.pair(a, b),
                n.pair(b, a),
                |g| g.clone(),
            )
        })
    }

    /// `m ⊑* n`: `n` essentially extends `self`.
    pub fn essentially_extends(&self, n: &MStruct) -> bool {
        if self.iota != n.iota || !self.covered_by(n) {
            return false;
        }
        n.ordered_pairs().all(|(a, b)| {
            let (x, y) = (n.u[a].prefix(self.ell), n.u[b].prefix(self.ell));
            if x == y {
                return true;
            }
            let (Some(pa), Some(pb)) = (self.position(&x), self.position(&y)) else {
                return false;
            };
            family_match(
                self.iota,
                self.pair(pa, pb),
                self.pair(pb, pa),
                n.pair(a, b),
                n.pair(b, a),
                |g| g.prefix(self.ell),
            )
        })
    }

    /// `m↾u'` for `u' ⊆ u` with at least two elements.
    pub fn restrict(&self, u2: &[BitVec]) -> Result<MStruct> {
        let mut sub: Vec<BitVec> = u2.to_vec();
        sub.sort();
        sub.dedup();
        if sub.len() < 2 {
            return Err(Error::usage("a restriction needs at least two nodes"));
        }
        let pos: Vec<usize> = sub
            .iter()
            .map(|v| {
                self.position(v)
                    .ok_or_else(|| Error::usage(format!("node {v} is not in u")))
            })
            .collect::<Result<_>>()?;
        let mut map = BTreeMap::new();
        for (i, &a) in pos.iter().enumerate() {
            for (j, &b) in pos.iter().enumerate() {
                if i != j {
                    map.insert((sub[i].clone(), sub[j].clone()), self.pair(a, b).clone());
                }
            }
        }
        MStruct::new(self.ell, self.iota, sub, map)
    }

    /// Number of elements of `u` extending `nu`.
    pub fn branching_at(&self, nu: &BitVec) -> usize {
        self.u.iter().filter(|v| nu.is_prefix_of(v)).count()
    }
}

// The family comparison shared by ≐ and ⊑*. `fwd_m`/`bwd_m` are the witnesses
// of the smaller structure at (η,ν) and (ν,η); `cut` maps a g-value of the
// larger structure to the smaller level.
fn family_match(
    iota: usize,
    fwd_m: &PairWitness,
    bwd_m: &PairWitness,
    fwd_n: &PairWitness,
    bwd_n: &PairWitness,
    cut: impl Fn(&BitVec) -> BitVec,
) -> bool {
    let unordered = |x: BitVec, y: BitVec| if x <= y { (x, y) } else { (y, x) };
    let fam_m: BTreeSet<(BitVec, BitVec)> = (0..iota)
        .map(|i| unordered(fwd_m.g[i].clone(), bwd_m.g[i].clone()))
        .collect();
    let gf: Vec<BitVec> = fwd_n.g.iter().map(&cut).collect();
    let gb: Vec<BitVec> = bwd_n.g.iter().map(&cut).collect();
    let fam_n: BTreeSet<(BitVec, BitVec)> = (0..iota).map(|i| unordered(gf[i].clone(), gb[i].clone())).collect();
    if fam_m != fam_n {
        return false;
    }
    for i in 0..iota {
        for j in 0..iota {
            if fwd_m.g[i] == gf[j] && fwd_m.h[i] != fwd_n.h[j] {
                return false;
            }
            if fwd_m.g[i] == gb[j] && fwd_m.h[i] != bwd_n.h[j] {
                return false;
            }
        }
    }
    true
}

#[derive(Serialize, Deserialize)]
struct StructDoc {
    ell: usize,
    iota: usize,
    u: Vec<BitVec>,
    h: BTreeMap<String, Vec<usize>>,
    g: BTreeMap<String, Vec<BitVec>>,
}

pub(crate) fn pair_key(a: impl std::fmt::Display, b: impl std::fmt::Display) -> String {
    format!("{a},{b}")
}

pub(crate) fn split_key(key: &str) -> Result<(&str, &str)> {
    key.split_once(',')
        .ok_or_else(|| Error::parse(format!("pair key {key:?} is not of the form \"x,y\"")))
}

impl TryFrom<StructDoc> for MStruct {
    type Error = Error;

    fn try_from(doc: StructDoc) -> Result<MStruct> {
        let mut map = BTreeMap::new();
        for (key, h) in doc.h {
            let (a, b) = split_key(&key)?;
            let g = doc
                .g
                .get(&key)
                .cloned()
                .ok_or_else(|| Error::parse(format!("h has key {key} but g does not")))?;
            map.insert((a.parse()?, b.parse()?), PairWitness { h, g });
        }
        if doc.g.len() != map.len() {
            return Err(Error::parse("g has keys missing from h"));
        }
        MStruct::new(doc.ell, doc.iota, doc.u, map)
    }
}

impl From<MStruct> for StructDoc {
    fn from(m: MStruct) -> StructDoc {
        let mut h = BTreeMap::new();
        let mut g = BTreeMap::new();
        for (a, b) in m.ordered_pairs() {
            let key = pair_key(&m.u[a], &m.u[b]);
            let w = m.pair(a, b);
            h.insert(key.clone(), w.h.clone());
            g.insert(key, w.g.clone());
        }
        StructDoc {
            ell: m.ell,
            iota: m.iota,
            u: m.u,
            h,
            g,
        }
    }
}

/// Witness choices for an unordered pair `{η, ν}` with `η < ν`.
#[derive(Clone, Debug)]
struct PairOption {
    fwd: PairWitness,
    bwd: PairWitness,
}

/// Largest level [`enumerate`] accepts; the first node of `u` ranges over
/// all of `2^ℓ`.
pub const MAX_ENUM_LEVEL: usize = 24;

/// Every valid structure over `forest` at level `ell` with `ι = iota` and
/// `2 ≤ |u| ≤ max_u`, each once.
///
/// Order: by `|u|`, then `u` lexicographically, then by an odometer over the
/// per-pair witness choices with the last pair varying fastest.
pub fn enumerate(forest: &Forest, iota: usize, ell: usize, max_u: usize) -> Result<Enumeration> {
    if iota < 2 {
        return Err(Error::usage(format!("iota must be at least 2, got {iota}")));
    }
    if ell > forest.height() {
        return Err(Error::usage(format!(
            "level {ell} exceeds forest height {}",
            forest.height()
        )));
    }
    if ell > MAX_ENUM_LEVEL {
        return Err(Error::Resource(format!(
            "enumeration at level {ell} exceeds the supported maximum {MAX_ENUM_LEVEL}"
        )));
    }
    let index = forest.level_index(ell);
    let nodes: Vec<&BitVec> = index.keys().collect();
    let mut options: HashMap<BitVec, Arc<Vec<PairOption>>> = HashMap::new();
    if ell > 0 {
        for (i, x) in nodes.iter().enumerate() {
            for y in &nodes[i + 1..] {
                let d = *x + *y;
                if !options.contains_key(&d) {
                    let opts = pair_options(&index, &d, iota);
                    options.insert(d, Arc::new(opts));
                }
            }
        }
        options.retain(|_, v| !v.is_empty());
    }
    let mut us = Vec::new();
    if !options.is_empty() {
        let mut diffs: Vec<&BitVec> = options.keys().collect();
        diffs.sort();
        for size in 2..=max_u {
            for first in 0..1u64 << ell {
                let eta0 = BitVec::from_u64(ell, first);
                let mut cands: Vec<BitVec> = diffs.iter().map(|d| &eta0 + d).filter(|v| *v > eta0).collect();
                cands.sort();
                let mut chosen = vec![eta0];
                grow(&cands, 0, size, &mut chosen, &options, &mut us);
            }
        }
    }
    Ok(Enumeration {
        ell,
        iota,
        us,
        options,
        cursor: 0,
        current: None,
    })
}

fn grow(
    cands: &[BitVec],
    from: usize,
    size: usize,
    chosen: &mut Vec<BitVec>,
    options: &HashMap<BitVec, Arc<Vec<PairOption>>>,
    out: &mut Vec<Vec<BitVec>>,
) {
    if chosen.len() == size {
        out.push(chosen.clone());
        return;
    }
    for k in from..cands.len() {
        let c = &cands[k];
        if chosen[1..].iter().all(|v| options.contains_key(&(v + c))) {
            chosen.push(c.clone());
            grow(cands, k + 1, size, chosen, options, out);
            chosen.pop();
        }
    }
}

fn pair_options(index: &BTreeMap<BitVec, Vec<usize>>, d: &BitVec, iota: usize) -> Vec<PairOption> {
    let cosets: Vec<(&BitVec, BitVec)> = index
        .keys()
        .filter_map(|x| {
            let y = x + d;
            (x < &y && index.contains_key(&y)).then_some((x, y))
        })
        .collect();
    let mut out = Vec::new();
    if cosets.len() < iota {
        return out;
    }
    let mut pick = Vec::with_capacity(iota);
    let mut used = vec![false; cosets.len()];
    select(&cosets, iota, &mut pick, &mut used, &mut |sel| {
        for orient in 0..1u32 << iota {
            let (gf, gb): (Vec<BitVec>, Vec<BitVec>) = sel
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let (x, y) = (cosets[c].0.clone(), cosets[c].1.clone());
                    if orient >> (iota - 1 - i) & 1 == 0 {
                        (x, y)
                    } else {
                        (y, x)
                    }
                })
                .unzip();
            let tree_lists: Vec<&Vec<usize>> = gf.iter().chain(gb.iter()).map(|g| &index[g]).collect();
            let mut digits = vec![0usize; tree_lists.len()];
            loop {
                let hs: Vec<usize> = digits.iter().zip(&tree_lists).map(|(&k, l)| l[k]).collect();
                out.push(PairOption {
                    fwd: PairWitness {
                        h: hs[..iota].to_vec(),
                        g: gf.clone(),
                    },
                    bwd: PairWitness {
                        h: hs[iota..].to_vec(),
                        g: gb.clone(),
                    },
                });
                if !odometer(&mut digits, |k| tree_lists[k].len()) {
                    break;
                }
            }
        }
    });
    out
}

fn select(
    cosets: &[(&BitVec, BitVec)],
    iota: usize,
    pick: &mut Vec<usize>,
    used: &mut [bool],
    visit: &mut dyn FnMut(&[usize]),
) {
    if pick.len() == iota {
        visit(pick);
        return;
    }
    for c in 0..cosets.len() {
        if !used[c] {
            used[c] = true;
            pick.push(c);
            select(cosets, iota, pick, used, visit);
            pick.pop();
            used[c] = false;
        }
    }
}

// Advances a mixed-radix counter, last digit fastest. Returns false on wrap.
fn odometer(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < radix(k) {
            return true;
        }
        digits[k] = 0;
    }
    false
}

/// Streaming output of [`enumerate`].
pub struct Enumeration {
    ell: usize,
    iota: usize,
    us: Vec<Vec<BitVec>>,
    options: HashMap<BitVec, Arc<Vec<PairOption>>>,
    cursor: usize,
    current: Option<(Vec<Arc<Vec<PairOption>>>, Vec<usize>)>,
}

impl Enumeration {
    /// The candidate node sets, in output order.
    pub fn node_sets(&self) -> &[Vec<BitVec>] {
        &self.us
    }

    /// Number of structures still to come, without producing them.
    pub fn count_remaining(&self) -> u128 {
        let mut total: u128 = 0;
        for u in &self.us[self.cursor..] {
            let mut prod: u128 = 1;
            for a in 0..u.len() {
                for b in a + 1..u.len() {
                    prod = prod.saturating_mul(self.options[&(&u[a] + &u[b])].len() as u128);
                }
            }
            total = total.saturating_add(prod);
        }
        total
    }

    fn build(&self, u: &[BitVec], lists: &[Arc<Vec<PairOption>>], digits: &[usize]) -> MStruct {
        let s = u.len();
        let mut pairs = vec![
            PairWitness {
                h: Vec::new(),
                g: Vec::new()
            };
            s * (s - 1)
        ];
        let mut k = 0;
        for a in 0..s {
            for b in a + 1..s {
                let opt = &lists[k][digits[k]];
                pairs[pair_index(s, a, b)] = opt.fwd.clone();
                pairs[pair_index(s, b, a)] = opt.bwd.clone();
                k += 1;
            }
        }
        MStruct {
            ell: self.ell,
            iota: self.iota,
            u: u.to_vec(),
            pairs,
        }
    }
}

impl Iterator for Enumeration {
    type Item = MStruct;

    fn next(&mut self) -> Option<MStruct> {
        if self.cursor >= self.us.len() {
            return None;
        }
        if self.current.is_none() {
            let u = &self.us[self.cursor];
            let mut lists = Vec::new();
            for a in 0..u.len() {
                for b in a + 1..u.len() {
                    lists.push(Arc::clone(&self.options[&(&u[a] + &u[b])]));
                }
            }
            let digits = vec![0; lists.len()];
            self.current = Some((lists, digits));
        }
        let (lists, digits) = self.current.as_ref().expect("set above");
        let out = self.build(&self.us[self.cursor], lists, digits);
        let (lists, digits) = self.current.as_mut().expect("set above");
        if !odometer(digits, |k| lists[k].len()) {
            self.current = None;
            self.cursor += 1;
        }
        Some(out)
    }
}
