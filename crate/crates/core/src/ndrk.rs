//! The branching rank on the finite poset of structures over a forest.
//!
//! The poset holds every valid structure at levels `1..=n` with
//! `|u| ≤ max_u`. Ranks are exact for that finite system and are lower bounds
//! for the rank in any taller or wider system containing it. Levels strictly
//! increase along extensions, so every rank is finite and limit stages never
//! arise.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::forest::{Forest, Tree};
use crate::gf2::BitVec;
use crate::structures::{enumerate, MStruct};

/// Upper bound on the poset size accepted by [`RankTable::build`].
pub const DEFAULT_MAX_STRUCTURES: u128 = 2_000_000;

/// One successor step: for every `ν ∈ u_from`, an extension of rank at least
/// `rank − 1` branching above `ν`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankStep {
    pub rank: usize,
    pub from: MStruct,
    pub choices: Vec<(BitVec, MStruct)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub value: usize,
    pub steps: Vec<RankStep>,
}

pub struct RankTable {
    forest: Forest,
    iota: usize,
    max_u: usize,
    structs: Vec<MStruct>,
    index: HashMap<MStruct, usize>,
    // For each structure: its proper extensions with the positions of u at
    // which each one branches.
    ext: Vec<Vec<(usize, Vec<usize>)>>,
    ranks: Vec<usize>,
}

impl RankTable {
    pub fn build(forest: &Forest, iota: usize, max_u: usize) -> Result<RankTable> {
        Self::build_with_limit(forest, iota, max_u, DEFAULT_MAX_STRUCTURES)
    }

    pub fn build_with_limit(forest: &Forest, iota: usize, max_u: usize, limit: u128) -> Result<RankTable> {
        let mut structs = Vec::new();
        let mut total: u128 = 0;
        for ell in 1..=forest.height() {
            let e = enumerate(forest, iota, ell, max_u)?;
            total = total.saturating_add(e.count_remaining());
            if total > limit {
                return Err(Error::Resource(format!(
                    "structure poset exceeds {limit} elements at level {ell}"
                )));
            }
            structs.extend(e);
        }
        let index: HashMap<MStruct, usize> = structs.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let links: Vec<Vec<(usize, usize, Vec<usize>)>> = structs
            .par_iter()
            .enumerate()
            .map(|(j, n)| {
                (1..n.ell())
                    .filter_map(|ell| {
                        let m = n.project(ell)?;
                        let &i = index.get(&m)?;
                        let br = (0..m.u().len()).filter(|&p| n.branching_at(&m.u()[p]) >= 2).collect();
                        Some((i, j, br))
                    })
                    .collect()
            })
            .collect();
        let mut ext = vec![Vec::new(); structs.len()];
        for (i, j, br) in links.into_iter().flatten() {
            ext[i].push((j, br));
        }
        let mut table = RankTable {
            forest: forest.clone(),
            iota,
            max_u,
            structs,
            index,
            ext,
            ranks: Vec::new(),
        };
        table.ranks = table.fixpoint();
        Ok(table)
    }

    // Level sets S_β = {m : rank(m) ≥ β}, each cut from the last by the
    // successor clause, until one is empty.
    fn fixpoint(&self) -> Vec<usize> {
        let n = self.structs.len();
        let mut ranks = vec![0usize; n];
        let mut alive = vec![true; n];
        let mut beta = 0;
        loop {
            let next: Vec<bool> = (0..n)
                .into_par_iter()
                .map(|m| alive[m] && self.succeeds(m, |k| alive[k]))
                .collect();
            if !next.iter().any(|&b| b) {
                break;
            }
            beta += 1;
            for m in 0..n {
                if next[m] {
                    ranks[m] = beta;
                }
            }
            alive = next;
        }
        ranks
    }

    // Every ν ∈ u_m has a branching extension inside `ok`.
    fn succeeds(&self, m: usize, ok: impl Fn(usize) -> bool) -> bool {
        let s = self.structs[m].u().len();
        let mut covered = vec![false; s];
        for (n, br) in &self.ext[m] {
            if ok(*n) {
                for &p in br {
                    covered[p] = true;
                }
            }
        }
        covered.iter().all(|&c| c)
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn iota(&self) -> usize {
        self.iota
    }

    pub fn max_u(&self) -> usize {
        self.max_u
    }

    pub fn structures(&self) -> &[MStruct] {
        &self.structs
    }

    pub fn len(&self) -> usize {
        self.structs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structs.is_empty()
    }

    pub fn index_of(&self, m: &MStruct) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Proper extensions of the `i`-th structure, each with the positions of
    /// `u` it branches above.
    pub fn extensions(&self, i: usize) -> &[(usize, Vec<usize>)] {
        &self.ext[i]
    }

    pub fn rank_at(&self, i: usize) -> usize {
        self.ranks[i]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Max of `rank + 1` over the poset, 0 if it is empty.
    pub fn sup(&self) -> usize {
        self.ranks.iter().map(|r| r + 1).max().unwrap_or(0)
    }

    // Extensions of an arbitrary structure, looked up through projections.
    fn extensions_of(&self, m: &MStruct) -> Vec<(usize, Vec<usize>)> {
        if let Some(i) = self.index_of(m) {
            return self.ext[i].clone();
        }
        self.structs
            .iter()
            .enumerate()
            .filter(|(_, n)| n.ell() > m.ell() && n.project(m.ell()).as_ref() == Some(m))
            .map(|(j, n)| {
                let br = (0..m.u().len()).filter(|&p| n.branching_at(&m.u()[p]) >= 2).collect();
                (j, br)
            })
            .collect()
    }

    /// The rank of `m`, with one witness step per rank level.
    pub fn rank_of(&self, m: &MStruct) -> Result<RankResult> {
        if m.iota() != self.iota {
            return Err(Error::usage(format!(
                "structure has iota {} but the table uses {}",
                m.iota(),
                self.iota
            )));
        }
        let diags = m.validate(&self.forest);
        if let Some(d) = diags.first() {
            return Err(Error::usage(format!("structure is not valid: {d}")));
        }
        let ext = self.extensions_of(m);
        let s = m.u().len();
        let mut best = vec![None::<usize>; s];
        for (n, br) in &ext {
            for &p in br {
                let r = self.ranks[*n];
                if best[p].is_none_or(|b| r > b) {
                    best[p] = Some(r);
                }
            }
        }
        let value = if best.iter().all(Option::is_some) {
            best.iter().map(|b| b.expect("checked") + 1).min().unwrap_or(0)
        } else {
            0
        };
        let steps = (1..=value)
            .map(|rank| {
                let choices = (0..s)
                    .map(|p| {
                        let &(n, _) = ext
                            .iter()
                            .filter(|(n, br)| br.contains(&p) && self.ranks[*n] + 1 >= rank)
                            .max_by_key(|(n, _)| (self.ranks[*n], std::cmp::Reverse(*n)))
                            .expect("rank value guarantees a choice");
                        (m.u()[p].clone(), self.structs[n].clone())
                    })
                    .collect();
                RankStep {
                    rank,
                    from: m.clone(),
                    choices,
                }
            })
            .collect();
        Ok(RankResult { value, steps })
    }

    /// A longest chain in which each element extends the previous one and
    /// branches above every node of it.
    pub fn longest_branching_chain(&self) -> Vec<MStruct> {
        let n = self.structs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.structs[i].ell()));
        let mut best = vec![(1usize, None::<usize>); n];
        for &i in &order {
            let s = self.structs[i].u().len();
            for (j, br) in &self.ext[i] {
                if br.len() == s && best[*j].0 + 1 > best[i].0 {
                    best[i] = (best[*j].0 + 1, Some(*j));
                }
            }
        }
        let Some(start) = (0..n).max_by_key(|&i| (best[i].0, std::cmp::Reverse(i))) else {
            return Vec::new();
        };
        let mut chain = vec![self.structs[start].clone()];
        let mut cur = start;
        while let Some(next) = best[cur].1 {
            chain.push(self.structs[next].clone());
            cur = next;
        }
        chain
    }
}

/// Rank of `m` in the poset over `forest` with `|u| ≤ max_u`.
pub fn ndrk_bounded(m: &MStruct, forest: &Forest, max_u: usize) -> Result<RankResult> {
    RankTable::build(forest, m.iota(), max_u)?.rank_of(m)
}

/// `sup {rank(m) + 1}` over the poset, 0 when it is empty.
pub fn ndrk_sup(forest: &Forest, iota: usize, max_u: usize) -> Result<usize> {
    Ok(RankTable::build(forest, iota, max_u)?.sup())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainWitness {
    pub chain: Vec<MStruct>,
    pub forest: Forest,
}

/// Diagnostics for a branching chain: `valid` for a structure failing its
/// clauses, `(i)` for a broken extension, `level` for non-increasing levels
/// and `(iii)` for a node with fewer than two successors.
pub fn check_chain(c: &ChainWitness) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if c.chain.is_empty() {
        out.push(Diagnostic::new("valid", "the chain is empty"));
    }
    for (j, m) in c.chain.iter().enumerate() {
        for d in m.validate(&c.forest) {
            out.push(Diagnostic::new("valid", format!("j={j}: {d}")));
        }
    }
    for (j, pair) in c.chain.windows(2).enumerate() {
        let (m, n) = (&pair[0], &pair[1]);
        if !m.extends(n).unwrap_or(false) {
            out.push(Diagnostic::new(
                "(i)",
                format!("j={j}: element {} does not extend element {j}", j + 1),
            ));
        }
        if n.ell() <= m.ell() {
            out.push(Diagnostic::new(
                "level",
                format!("j={j}: level {} does not exceed {}", n.ell(), m.ell()),
            ));
        }
        for nu in m.u() {
            let b = n.branching_at(nu);
            if b < 2 {
                out.push(Diagnostic::new("(iii)", format!("j={j}, ν={nu}: {b} successor(s)")));
            }
        }
    }
    out
}

/// Checked data for one pair of distinct branches `η < ν` of the witness tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCertificate {
    pub eta: BitVec,
    pub nu: BitVec,
    /// First chain index at which the two branches differ.
    pub split: usize,
    pub h_fwd: Vec<usize>,
    pub h_bwd: Vec<usize>,
    /// `G_i(η,ν)` for `i < ι`.
    pub g_fwd: Vec<BitVec>,
    /// `G_i(ν,η)` for `i < ι`.
    pub g_bwd: Vec<BitVec>,
    pub overlap: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfectWitness {
    /// The finite tree of branches, of height `ℓ` of the last chain element.
    pub tree: Forest,
    pub certificates: Vec<PairCertificate>,
}

/// The finite perfect tree and per-pair overlap certificates of a chain.
pub fn extract_perfect_witness(c: &ChainWitness) -> Result<PerfectWitness> {
    if let Some(d) = check_chain(c).first() {
        return Err(Error::usage(format!("chain check failed: {d}")));
    }
    let last = c.chain.last().expect("non-empty after check");
    let height = last.ell();
    let iota = last.iota();
    let top = c.forest.truncate(height)?;
    let tree = Forest::new(height, vec![Tree::from_leaves(height, last.u().iter().cloned())?])?;
    let s = last.u().len();
    let mut certificates = Vec::new();
    for a in 0..s {
        for b in a + 1..s {
            let (eta, nu) = (&last.u()[a], &last.u()[b]);
            let split = c
                .chain
                .iter()
                .position(|m| eta.prefix(m.ell()) != nu.prefix(m.ell()))
                .expect("distinct branches split by the last element");
            let (fwd, bwd) = (last.pair(a, b), last.pair(b, a));
            for m in &c.chain[split..] {
                let (x, y) = (eta.prefix(m.ell()), nu.prefix(m.ell()));
                let (wf, wb) = (
                    m.witness(&x, &y).expect("chain restriction"),
                    m.witness(&y, &x).expect("chain restriction"),
                );
                for i in 0..iota {
                    if !wf.g[i].is_prefix_of(&fwd.g[i]) || !wb.g[i].is_prefix_of(&bwd.g[i]) {
                        return Err(Error::internal(format!(
                            "g-values along the chain are not coherent at ({eta},{nu})"
                        )));
                    }
                }
            }
            let first = &c.chain[split];
            let (x, y) = (eta.prefix(first.ell()), nu.prefix(first.ell()));
            let h_fwd = first.witness(&x, &y).expect("chain restriction").h.clone();
            let h_bwd = first.witness(&y, &x).expect("chain restriction").h.clone();
            let mut values: Vec<&BitVec> = fwd.g.iter().chain(&bwd.g).collect();
            values.sort();
            values.dedup();
            let mut ok = values.len() == 2 * iota;
            for i in 0..iota {
                ok &= &(eta + &fwd.g[i]) == &(nu + &bwd.g[i]);
                ok &= top.tree(h_fwd[i]).contains(&fwd.g[i]);
                ok &= top.tree(h_bwd[i]).contains(&bwd.g[i]);
            }
            let overlap = top.overlap(eta, nu)?;
            ok &= overlap >= 2 * iota;
            if !ok {
                return Err(Error::internal(format!(
                    "certificate for ({eta},{nu}) fails on a checked chain"
                )));
            }
            certificates.push(PairCertificate {
                eta: eta.clone(),
                nu: nu.clone(),
                split,
                h_fwd,
                h_bwd,
                g_fwd: fwd.g.clone(),
                g_bwd: bwd.g.clone(),
                overlap,
            });
        }
    }
    Ok(PerfectWitness { tree, certificates })
}
