//! Finite tree families of uniform height and their translation overlaps.
//!
//! A Σ⁰₂ set `B = ⋃ lim(T_m)` is only ever seen through its depth-`n`
//! approximation `B_n = ⋃_m (T_m ∩ 2^n)`. Every overlap count below is taken
//! at depth `n`. Such a count bounds from above the count for any deeper
//! refinement of the same forest, and it can exceed the size of the true
//! intersection `(B+x) ∩ (B+y)` of the limit sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitVec;

/// A finite binary tree in which every maximal node has length `height`.
///
/// Only the maximal nodes are stored, sorted. A node belongs to the tree iff
/// it is an initial segment of some stored leaf.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tree {
    height: usize,
    leaves: Vec<BitVec>,
}

impl Tree {
    /// The prefix closure of `leaves`. Fails on an empty leaf set or on a
    /// leaf of the wrong length.
    pub fn from_leaves(height: usize, leaves: impl IntoIterator<Item = BitVec>) -> Result<Tree> {
        let mut leaves: Vec<BitVec> = leaves.into_iter().collect();
        if leaves.is_empty() {
            return Err(Error::usage("a tree needs at least one node of full height"));
        }
        if let Some(bad) = leaves.iter().find(|l| l.len() != height) {
            return Err(Error::usage(format!(
                "top node {bad} has length {} but the tree height is {height}",
                bad.len()
            )));
        }
        leaves.sort();
        leaves.dedup();
        Ok(Tree { height, leaves })
    }

    /// Builds a tree from an explicit node set, checking that it is closed
    /// under initial segments and that all maximal nodes have full height.
    pub fn from_nodes(height: usize, nodes: impl IntoIterator<Item = BitVec>) -> Result<Tree> {
        let mut nodes: Vec<BitVec> = nodes.into_iter().collect();
        nodes.sort();
        nodes.dedup();
        if let Some(bad) = nodes.iter().find(|v| v.len() > height) {
            return Err(Error::usage(format!("node {bad} is longer than height {height}")));
        }
        for v in &nodes {
            if !v.is_empty() && nodes.binary_search(&v.prefix(v.len() - 1)).is_err() {
                return Err(Error::usage(format!("node set is not prefix closed at {v}")));
            }
        }
        let leaves: Vec<BitVec> = nodes.iter().filter(|v| v.len() == height).cloned().collect();
        let tree = Tree::from_leaves(height, leaves)?;
        if tree.node_count() != nodes.len() {
            return Err(Error::usage("node set has a maximal node shorter than the tree height"));
        }
        Ok(tree)
    }

    /// The full binary tree `2^{≤height}`. Intended for small heights.
    pub fn full(height: usize) -> Tree {
        assert!(height < 32, "full tree of height {height} is too large");
        Tree {
            height,
            leaves: (0..1u64 << height).map(|v| BitVec::from_u64(height, v)).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// The nodes of length `height`, sorted.
    pub fn leaves(&self) -> &[BitVec] {
        &self.leaves
    }

    pub fn contains(&self, node: &BitVec) -> bool {
        if node.len() > self.height {
            return false;
        }
        if node.len() == self.height {
            return self.leaves.binary_search(node).is_ok();
        }
        // The zero-padded node is the least extension of `node`, so the first
        // leaf not below it is the only candidate.
        let probe = node.pad_to(self.height);
        let at = self.leaves.partition_point(|l| l < &probe);
        self.leaves.get(at).is_some_and(|l| node.is_prefix_of(l))
    }

    /// The nodes of length `level`, sorted.
    pub fn level(&self, level: usize) -> Vec<BitVec> {
        assert!(level <= self.height);
        let mut out: Vec<BitVec> = self.leaves.iter().map(|l| l.prefix(level)).collect();
        out.dedup();
        out
    }

    /// Every node, shortest first.
    pub fn nodes(&self) -> Vec<BitVec> {
        (0..=self.height).flat_map(|l| self.level(l)).collect()
    }

    pub fn node_count(&self) -> usize {
        (0..=self.height).map(|l| self.level(l).len()).sum()
    }

    /// `self ∩ 2^{≤height}`.
    pub fn truncate(&self, height: usize) -> Tree {
        Tree {
            height,
            leaves: self.level(height),
        }
    }

    /// The tree `{v + x↾|v| : v ∈ self}`.
    pub fn translate(&self, x: &BitVec) -> Tree {
        assert_eq!(x.len(), self.height);
        let mut leaves: Vec<BitVec> = self.leaves.iter().map(|l| l + x).collect();
        leaves.sort();
        Tree {
            height: self.height,
            leaves,
        }
    }

    /// The tree padded with `extra` zero coordinates below every leaf.
    pub fn pad_zeros(&self, extra: usize) -> Tree {
        Tree {
            height: self.height + extra,
            leaves: self.leaves.iter().map(|l| l.pad_to(self.height + extra)).collect(),
        }
    }
}

/// A finite sequence of trees of a common height.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ForestDoc", into = "ForestDoc")]
pub struct Forest {
    height: usize,
    trees: Vec<Tree>,
}

#[derive(Serialize, Deserialize)]
struct ForestDoc {
    n: usize,
    trees: Vec<Vec<BitVec>>,
}

impl TryFrom<ForestDoc> for Forest {
    type Error = Error;

    fn try_from(doc: ForestDoc) -> Result<Forest> {
        let trees = doc
            .trees
            .into_iter()
            .map(|leaves| Tree::from_leaves(doc.n, leaves))
            .collect::<Result<Vec<_>>>()?;
        Forest::new(doc.n, trees)
    }
}

impl From<Forest> for ForestDoc {
    fn from(f: Forest) -> ForestDoc {
        ForestDoc {
            n: f.height,
            trees: f.trees.into_iter().map(|t| t.leaves).collect(),
        }
    }
}

impl Forest {
    pub fn new(height: usize, trees: Vec<Tree>) -> Result<Forest> {
        if let Some(t) = trees.iter().find(|t| t.height != height) {
            return Err(Error::usage(format!(
                "tree of height {} in a forest of height {height}",
                t.height
            )));
        }
        Ok(Forest { height, trees })
    }

    /// Convenience constructor from per-tree top-level node strings.
    pub fn from_strs(height: usize, trees: &[&[&str]]) -> Result<Forest> {
        let trees = trees
            .iter()
            .map(|leaves| {
                let leaves = leaves.iter().map(|s| s.parse::<BitVec>()).collect::<Result<Vec<_>>>()?;
                Tree::from_leaves(height, leaves)
            })
            .collect::<Result<Vec<_>>>()?;
        Forest::new(height, trees)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn tree(&self, m: usize) -> &Tree {
        &self.trees[m]
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// True iff no node of full height lies in two trees.
    pub fn disjoint_tops(&self) -> bool {
        let mut all: Vec<&BitVec> = self.trees.iter().flat_map(|t| t.leaves.iter()).collect();
        let total = all.len();
        all.sort();
        all.dedup();
        all.len() == total
    }

    /// `B_n`, the union of the trees' full-height levels, sorted.
    pub fn top_level(&self) -> Vec<BitVec> {
        let mut all: Vec<BitVec> = self.trees.iter().flat_map(|t| t.leaves.iter().cloned()).collect();
        all.sort();
        all.dedup();
        all
    }

    /// Indices of the trees containing `node`.
    pub fn trees_containing(&self, node: &BitVec) -> Vec<usize> {
        (0..self.trees.len())
            .filter(|&m| self.trees[m].contains(node))
            .collect()
    }

    /// Maps each node of length `level` to the indices of the trees holding it.
    pub fn level_index(&self, level: usize) -> BTreeMap<BitVec, Vec<usize>> {
        let mut index: BTreeMap<BitVec, Vec<usize>> = BTreeMap::new();
        for (m, t) in self.trees.iter().enumerate() {
            for v in t.level(level) {
                index.entry(v).or_default().push(m);
            }
        }
        index
    }

    fn check_len(&self, x: &BitVec, y: &BitVec) -> Result<()> {
        if x.len() != self.height || y.len() != self.height {
            return Err(Error::usage(format!(
                "translations of lengths {} and {} against a forest of height {}",
                x.len(),
                y.len(),
                self.height
            )));
        }
        Ok(())
    }

    /// `|(B_n + x) ∩ (B_n + y)|`.
    pub fn overlap(&self, x: &BitVec, y: &BitVec) -> Result<usize> {
        self.check_len(x, y)?;
        let top = self.top_level();
        let d = x + y;
        // z ranges over the intersection iff b = z + x ∈ B_n and b + d ∈ B_n.
        Ok(top.iter().filter(|b| top.binary_search(&(*b + &d)).is_ok()).count())
    }

    /// Searches for `k` distinct points `z` with `z + x ∈ t_{a}` and
    /// `z + y ∈ t_{b}`, returning them as `(z, a, b)`.
    pub fn stnd_witness(&self, k: usize, x: &BitVec, y: &BitVec) -> Result<Option<Vec<(BitVec, usize, usize)>>> {
        self.check_len(x, y)?;
        let mut found = Vec::new();
        if k == 0 {
            return Ok(Some(found));
        }
        for z in self.translate_points(x) {
            let zx = &z + x;
            let zy = &z + y;
            let a = self.trees.iter().position(|t| t.contains(&zx));
            let b = self.trees.iter().position(|t| t.contains(&zy));
            if let (Some(a), Some(b)) = (a, b) {
                found.push((z, a, b));
                if found.len() == k {
                    return Ok(Some(found));
                }
            }
        }
        Ok(None)
    }

    /// Whether `(x, y)` lies in the depth-`n` spectrum of `k`-fold overlap.
    pub fn stnd_at_depth(&self, k: usize, x: &BitVec, y: &BitVec) -> Result<bool> {
        Ok(self.stnd_witness(k, x, y)?.is_some())
    }

    // Candidates z with z + x ∈ B_n, in sorted order.
    fn translate_points(&self, x: &BitVec) -> Vec<BitVec> {
        let mut pts: Vec<BitVec> = self.top_level().iter().map(|b| b + x).collect();
        pts.sort();
        pts
    }

    /// Every tree cut down to `height`.
    pub fn truncate(&self, height: usize) -> Result<Forest> {
        if height > self.height {
            return Err(Error::usage(format!(
                "cannot truncate a forest of height {} to {height}",
                self.height
            )));
        }
        Ok(Forest {
            height,
            trees: self.trees.iter().map(|t| t.truncate(height)).collect(),
        })
    }

    /// The forest for `B_n + x`: each tree translated by `x`.
    pub fn translate(&self, x: &BitVec) -> Result<Forest> {
        if x.len() != self.height {
            return Err(Error::usage("translation length differs from the forest height"));
        }
        Ok(Forest {
            height: self.height,
            trees: self.trees.iter().map(|t| t.translate(x)).collect(),
        })
    }

    /// True iff `self` is an initial part of `longer`: no greater height,
    /// no more trees, and `t_m = t'_m ∩ 2^{≤n}` for every tree of `self`.
    pub fn is_restriction_of(&self, longer: &Forest) -> bool {
        self.height <= longer.height
            && self.trees.len() <= longer.trees.len()
            && self
                .trees
                .iter()
                .zip(&longer.trees)
                .all(|(t, u)| u.truncate(self.height) == *t)
    }

    /// Adds trees, checking their height.
    pub fn with_trees(&self, extra: impl IntoIterator<Item = Tree>) -> Result<Forest> {
        let mut trees = self.trees.clone();
        trees.extend(extra);
        Forest::new(self.height, trees)
    }
}
