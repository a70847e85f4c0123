//! Twin conditions and their common extension.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Forest, Tree};
use crate::gf2::BitVec;
use crate::structures::PairWitness;

use super::{validate_basic, Condition, RankOracle};

/// Block sizes of the amalgamation for `k` common and `ell` private
/// ordinals on each side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmalgamationSizes {
    pub k: usize,
    pub ell: usize,
    /// `N0 = ι·ℓ(ℓ+k) + ι·ℓ(ℓ−1)/2 + 1`.
    pub n0: usize,
    /// `N = N0 + ℓ + 1`, the number of new coordinates.
    pub n: usize,
}

pub fn amalgamation_sizes(iota: usize, k: usize, ell: usize) -> AmalgamationSizes {
    let n0 = iota * ell * (ell + k) + iota * ell * ell.saturating_sub(1) / 2 + 1;
    AmalgamationSizes {
        k,
        ell,
        n0,
        n: n0 + ell + 1,
    }
}

/// The indexing bijection onto `N0 − 1`, listed in order: entry `d` is the
/// tuple `(x, y, i, tag)` sent to `d`. Tag 0 ranges over `k × ℓ × ι`, tag 1
/// over `x < y < ℓ` and `ι`, tag 2 over `ℓ × ℓ × ι`, each lexicographically.
pub fn theta_index(iota: usize, k: usize, ell: usize) -> Vec<(usize, usize, usize, u8)> {
    let mut out = Vec::new();
    for a in 0..k {
        for c in 0..ell {
            for i in 0..iota {
                out.push((a, c, i, 0));
            }
        }
    }
    for b in 0..ell {
        for c in b + 1..ell {
            for i in 0..iota {
                out.push((b, c, i, 1));
            }
        }
    }
    for b in 0..ell {
        for c in 0..ell {
            for i in 0..iota {
                out.push((b, c, i, 2));
            }
        }
    }
    out
}

/// The order isomorphism `π : w1 → w2` when `p1`, `p2` are twins: equal
/// sizes, trees and `r`, `π` fixing `w1 ∩ w2`, rank data preserved by `π` on
/// every nonempty `v ⊆ w1`, and `η`, `g`, `h` transported by `π`.
pub fn check_twin(p1: &Condition, p2: &Condition, o: &RankOracle) -> Result<Option<BTreeMap<usize, usize>>> {
    if p1.iota != p2.iota || p1.w.len() != p2.w.len() || p1.n != p2.n || p1.forest != p2.forest || p1.r != p2.r {
        return Ok(None);
    }
    let pi: BTreeMap<usize, usize> = p1.w.iter().copied().zip(p2.w.iter().copied()).collect();
    if pi.iter().any(|(a, b)| a != b && p2.w.binary_search(a).is_ok()) {
        return Ok(None);
    }
    for (a, b) in &pi {
        if p1.eta.get(a) != p2.eta.get(b) {
            return Ok(None);
        }
    }
    for ((a, b), wit) in &p1.pairs {
        let (Some(x), Some(y)) = (pi.get(a), pi.get(b)) else {
            return Ok(None);
        };
        if p2.pairs.get(&(*x, *y)) != Some(wit) {
            return Ok(None);
        }
    }
    let s = p1.w.len();
    if s > super::MAX_CAL_M_WIDTH {
        return Err(Error::Resource(format!("|w| = {s} is too large to compare rank data")));
    }
    for mask in 1u32..(1 << s) {
        let v: Vec<usize> = (0..s).filter(|&i| mask >> i & 1 == 1).map(|i| p1.w[i]).collect();
        let image: Vec<usize> = v.iter().map(|a| pi[a]).collect();
        if o.triple(&v)? != o.triple(&image)? {
            return Ok(None);
        }
    }
    Ok(Some(pi))
}

fn runs(zeros: usize, ones: usize) -> BitVec {
    BitVec::zeros(zeros).with_run(true, ones)
}

/// A common extension of twins `p1`, `p2`: `w = w1 ∪ w2`, `n = n1 + N`,
/// `M = M1 + 1`, with the new pairs separated by the vectors `ν_d` and
/// `1 + ν_d` on a block of `N0` coordinates.
///
/// When `w1 = w2` no pair uses the new tree; it then holds the single node
/// `0^{n1}⌢1^N`, which no pair sum can reach.
pub fn amalgamate(p1: &Condition, p2: &Condition, o: &RankOracle) -> Result<Condition> {
    if let Some(d) = validate_basic(p1).first() {
        return Err(Error::usage(format!("first condition fails a basic clause: {d}")));
    }
    if check_twin(p1, p2, o)?.is_none() {
        return Err(Error::usage("the conditions are not twins"));
    }
    let common: Vec<usize> = p1.w.iter().copied().filter(|a| p2.w.binary_search(a).is_ok()).collect();
    let betas: Vec<usize> =
        p1.w.iter()
            .copied()
            .filter(|a| p2.w.binary_search(a).is_err())
            .collect();
    let gammas: Vec<usize> =
        p2.w.iter()
            .copied()
            .filter(|a| p1.w.binary_search(a).is_err())
            .collect();
    let (iota, k, ell) = (p1.iota, common.len(), betas.len());
    let sz = amalgamation_sizes(iota, k, ell);
    let (n1, n0, big_n) = (p1.n, sz.n0, sz.n);
    let n = n1 + big_n;
    let big_m = p1.forest.len();
    let theta: HashMap<(usize, usize, usize, u8), usize> = theta_index(iota, k, ell)
        .into_iter()
        .enumerate()
        .map(|(d, key)| (key, d))
        .collect();
    debug_assert_eq!(theta.len(), n0 - 1);
    let nu = |key: (usize, usize, usize, u8)| BitVec::unit(n0, theta[&key]);
    let nu_star = |key: (usize, usize, usize, u8)| &BitVec::ones(n0) + &nu(key);
    let tail = |c: usize| runs(c, ell - c);
    let one = BitVec::ones(1);
    // x ⌢ 1 ⌢ v ⌢ t
    let join = |x: &BitVec, v: &BitVec, t: &BitVec| x.concat(&one).concat(v).concat(t);

    let mut eta: BTreeMap<usize, BitVec> = p1.eta.iter().map(|(&a, v)| (a, v.pad_to(n))).collect();
    for (c, &g) in gammas.iter().enumerate() {
        let tail_c = BitVec::zeros(1).with_run(true, n0).concat(&tail(c));
        eta.insert(g, p2.eta[&g].concat(&tail_c));
    }

    let mut pairs: BTreeMap<(usize, usize), PairWitness> = p1
        .pairs
        .iter()
        .map(|(&key, wit)| {
            let g = wit.g.iter().map(|g| g.pad_to(n)).collect();
            (key, PairWitness { h: wit.h.clone(), g })
        })
        .collect();
    let zeros_ell = BitVec::zeros(ell);
    let mut put = |x: usize, y: usize, h: Vec<usize>, g: Vec<BitVec>| {
        pairs.insert((x, y), PairWitness { h, g });
    };
    for (a, &alpha) in common.iter().enumerate() {
        for (c, &gamma) in gammas.iter().enumerate() {
            let f2 = &p2.pairs[&(alpha, gamma)];
            let b2 = &p2.pairs[&(gamma, alpha)];
            let gf = (0..iota)
                .map(|i| join(&f2.g[i], &nu((a, c, i, 0)), &zeros_ell))
                .collect();
            let gb = (0..iota)
                .map(|i| join(&b2.g[i], &nu_star((a, c, i, 0)), &tail(c)))
                .collect();
            put(alpha, gamma, f2.h.clone(), gf);
            put(gamma, alpha, b2.h.clone(), gb);
        }
    }
    for b in 0..ell {
        for c in b + 1..ell {
            let (gb_, gc_) = (gammas[b], gammas[c]);
            let f2 = &p2.pairs[&(gb_, gc_)];
            let b2 = &p2.pairs[&(gc_, gb_)];
            let gf = (0..iota).map(|i| join(&f2.g[i], &nu((b, c, i, 1)), &tail(b))).collect();
            let gb = (0..iota).map(|i| join(&b2.g[i], &nu((b, c, i, 1)), &tail(c))).collect();
            put(gb_, gc_, f2.h.clone(), gf);
            put(gc_, gb_, b2.h.clone(), gb);
        }
    }
    for b in 0..ell {
        for c in 0..ell {
            let (beta, gamma) = (betas[b], gammas[c]);
            let (gf, gb): (Vec<BitVec>, Vec<BitVec>) = if b != c {
                let f1 = &p1.pairs[&(beta, betas[c])];
                let b2 = &p2.pairs[&(gamma, gammas[b])];
                (
                    (0..iota).map(|i| join(&f1.g[i], &nu((b, c, i, 2)), &tail(c))).collect(),
                    (0..iota)
                        .map(|i| join(&b2.g[i], &nu_star((b, c, i, 2)), &zeros_ell))
                        .collect(),
                )
            } else {
                (
                    (0..iota)
                        .map(|i| join(&p1.eta[&beta], &nu((b, b, i, 2)), &tail(b)))
                        .collect(),
                    (0..iota)
                        .map(|i| join(&p2.eta[&gamma], &nu_star((b, b, i, 2)), &zeros_ell))
                        .collect(),
                )
            };
            put(beta, gamma, vec![big_m; iota], gf);
            put(gamma, beta, vec![big_m; iota], gb);
        }
    }

    let mut leaves: Vec<Vec<BitVec>> = p1
        .forest
        .trees()
        .iter()
        .map(|t| t.leaves().iter().map(|l| l.pad_to(n)).collect())
        .collect();
    leaves.push(Vec::new());
    for wit in pairs.values() {
        for (h, g) in wit.h.iter().zip(&wit.g) {
            leaves[*h].push(g.clone());
        }
    }
    if leaves[big_m].is_empty() {
        leaves[big_m].push(BitVec::zeros(n1).with_run(true, big_n));
    }
    let trees = leaves
        .into_iter()
        .map(|l| Tree::from_leaves(n, l))
        .collect::<Result<Vec<_>>>()?;
    let mut r = p1.r.clone();
    r.push(n);
    let mut w = p1.w.clone();
    w.extend(gammas.iter().copied());
    w.sort_unstable();
    Ok(Condition {
        iota,
        w,
        n,
        eta,
        forest: Forest::new(n, trees)?,
        r,
        pairs,
    })
}
