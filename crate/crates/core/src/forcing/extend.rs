//! The starting condition and one-point extensions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forest::{Forest, Tree};
use crate::gf2::BitVec;
use crate::structures::PairWitness;

use super::{validate_basic, Condition};

/// A condition on `w` built from private coordinate blocks.
///
/// With `s = |w|` and `P = s(s-1)/2`: `n = s + Pι`, `M = Pι` and
/// `η_{w[j]} = e_j`. The `p`-th pair `a < b` (in lexicographic order of
/// positions) owns coordinates `c = s + pι + i` for `i < ι`, with
/// `g_i(w[a],w[b]) = e_c`, `g_i(w[b],w[a]) = e_a + e_b + e_c`, both in tree
/// `pι + i`, and `r = n` for every tree.
pub fn bootstrap(w: &[usize], iota: usize) -> Result<Condition> {
    let mut w = w.to_vec();
    w.sort_unstable();
    w.dedup();
    if w.len() < 5 {
        return Err(Error::usage(format!("bootstrap needs |w| >= 5, got {}", w.len())));
    }
    if iota < 3 {
        return Err(Error::usage(format!("bootstrap needs iota >= 3, got {iota}")));
    }
    let s = w.len();
    let big_m = s * (s - 1) / 2 * iota;
    let n = s + big_m;
    let eta: BTreeMap<usize, BitVec> = w.iter().enumerate().map(|(j, &a)| (a, BitVec::unit(n, j))).collect();
    let mut pairs = BTreeMap::new();
    let mut trees = Vec::with_capacity(big_m);
    let mut block = 0;
    for a in 0..s {
        for b in a + 1..s {
            let mut fwd = PairWitness {
                h: Vec::new(),
                g: Vec::new(),
            };
            let mut bwd = PairWitness {
                h: Vec::new(),
                g: Vec::new(),
            };
            for i in 0..iota {
                let m = block * iota + i;
                let e = BitVec::unit(n, s + m);
                let back = &(&e + &eta[&w[a]]) + &eta[&w[b]];
                trees.push(Tree::from_leaves(n, [e.clone(), back.clone()])?);
                fwd.h.push(m);
                fwd.g.push(e);
                bwd.h.push(m);
                bwd.g.push(back);
            }
            pairs.insert((w[a], w[b]), fwd);
            pairs.insert((w[b], w[a]), bwd);
            block += 1;
        }
    }
    Ok(Condition {
        iota,
        w,
        n,
        eta,
        forest: Forest::new(n, trees)?,
        r: vec![n; big_m],
        pairs,
    })
}

/// Adds `beta` to `w`, with `N = |w|·ι + 2` new coordinates and `N − 2` new
/// trees, one for each `(α, i)`.
pub fn extend_add_element(p: &Condition, beta: usize) -> Result<Condition> {
    if let Some(d) = validate_basic(p).first() {
        return Err(Error::usage(format!("condition fails a basic clause: {d}")));
    }
    if p.w.binary_search(&beta).is_ok() {
        return Err(Error::usage(format!("{beta} is already in w")));
    }
    let (n, iota, big_m) = (p.n, p.iota, p.forest.len());
    let big_n = p.w.len() * iota + 2;
    let nq = n + big_n;

    let mut eta: BTreeMap<usize, BitVec> = p.eta.iter().map(|(&a, v)| (a, v.pad_to(nq))).collect();
    eta.insert(beta, BitVec::zeros(n + 1).with_run(true, big_n - 1));

    let mut pairs: BTreeMap<(usize, usize), PairWitness> = p
        .pairs
        .iter()
        .map(|(&k, wit)| {
            let g = wit.g.iter().map(|g| g.pad_to(nq)).collect();
            (k, PairWitness { h: wit.h.clone(), g })
        })
        .collect();
    let mut trees: Vec<Tree> = p.forest.trees().iter().map(|t| t.pad_zeros(big_n)).collect();
    let mut r = p.r.clone();
    for (j, &alpha) in p.w.iter().enumerate() {
        let mut fwd = PairWitness {
            h: Vec::new(),
            g: Vec::new(),
        };
        let mut bwd = PairWitness {
            h: Vec::new(),
            g: Vec::new(),
        };
        for i in 0..iota {
            let c = j * iota + i;
            let g_ab = BitVec::zeros(n)
                .with_run(true, 1)
                .with_run(false, c + 1)
                .with_run(true, big_n - c - 2);
            let g_ba = p.eta[&alpha]
                .clone()
                .with_run(true, c + 2)
                .with_run(false, big_n - c - 2);
            trees.push(Tree::from_leaves(nq, [g_ab.clone(), g_ba.clone()])?);
            r.push(nq);
            fwd.h.push(big_m + c);
            fwd.g.push(g_ab);
            bwd.h.push(big_m + c);
            bwd.g.push(g_ba);
        }
        pairs.insert((alpha, beta), fwd);
        pairs.insert((beta, alpha), bwd);
    }
    let mut w = p.w.clone();
    w.push(beta);
    w.sort_unstable();
    Ok(Condition {
        iota,
        w,
        n: nq,
        eta,
        forest: Forest::new(nq, trees)?,
        r,
        pairs,
    })
}

/// A condition above `p` with `beta ∈ w`, `n > n0` and `M > m0`. Further
/// ordinals are drawn from `fresh`, skipping those already in `w`.
pub fn extend_dense(
    p: &Condition,
    beta: usize,
    n0: usize,
    m0: usize,
    fresh: &mut dyn Iterator<Item = usize>,
) -> Result<Condition> {
    let mut q = if p.w.binary_search(&beta).is_ok() {
        p.clone()
    } else {
        extend_add_element(p, beta)?
    };
    while q.n <= n0 || q.forest.len() <= m0 {
        let next = loop {
            match fresh.next() {
                Some(a) if q.w.binary_search(&a).is_err() => break a,
                Some(_) => {}
                None => return Err(Error::Resource("the supply of fresh ordinals ran out".into())),
            }
        };
        q = extend_add_element(&q, next)?;
    }
    Ok(q)
}
