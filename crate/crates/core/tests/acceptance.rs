//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! test on any unexpected FAIL.
//!
//! Criterion 6 includes the claim that the order model on ten elements at
//! θ = 9 gives every pair rank −1 and every singleton rank 0. The endpoints
//! 0 and 9 have nine realizers at each position, so `{0, 9}` has rank 0 and
//! `{0}`, `{9}` have rank 1. That sub-check is reported as FAIL and is the
//! only one allowed to fail.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use overlap_lab::forcing::{
    amalgamate, amalgamation_sizes, bootstrap, build_chain, check_twin, extend_add_element, leq, validate_condition,
    Condition, GenericRun, RankOracle, ScheduleStep,
};
use overlap_lab::forest::{Forest, Tree};
use overlap_lab::gf2::{check_pair_family, solve_translate, BitVec};
use overlap_lab::model_rank::{order_model, subsets_up_to, FiniteModel, Rank, RankEngine, Relation};
use overlap_lab::ndrk::RankTable;
use overlap_lab::structures::MStruct;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

struct Report {
    lines: Vec<String>,
    unexpected: Vec<usize>,
}

impl Report {
    fn record(&mut self, id: usize, name: &str, started: Instant, outcome: Outcome, allowed_fail: bool) {
        let secs = started.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!("criterion {id} {name}: PASS ({detail}; {secs:.1}s)"),
            Err(detail) => format!("criterion {id} {name}: FAIL ({detail}; {secs:.1}s)"),
        };
        // Written to the handle directly so the harness does not capture it.
        let _ = writeln!(std::io::stderr(), "{line}");
        if outcome.is_err() && !allowed_fail {
            self.unexpected.push(id);
        }
        self.lines.push(line);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bits(len: usize, v: u64) -> BitVec {
    BitVec::from_u64(len, v)
}

fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> BitVec {
    bits(len, rng.gen_range(0..1u64 << len))
}

// Rank of integer vectors by elimination on u64 words.
fn int_rank(vs: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &v in vs {
        let mut x = v;
        for &b in &basis {
            x = x.min(x ^ b);
        }
        if x != 0 {
            basis.push(x);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

fn subsets_of_size<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let n = items.len();
    let mut out = Vec::new();
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize == k {
            out.push(
                (0..n)
                    .filter(|&i| mask >> i & 1 == 1)
                    .map(|i| items[i].clone())
                    .collect(),
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// 1. translation recovery

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4301);
    let (mut cases, mut calls) = (0usize, 0usize);
    while cases < 10_000 {
        let ell = rng.gen_range(5..=9usize);
        let size = rng.gen_range(5..=7usize.min(ell));
        let b: Vec<u64> = (0..size).map(|_| rng.gen_range(1..1u64 << ell)).collect();
        if int_rank(&b) != size {
            continue;
        }
        cases += 1;
        let x = rng.gen_range(0..1u64 << ell);
        let bset: HashSet<u64> = b.iter().copied().collect();
        let bv: Vec<BitVec> = b.iter().map(|&v| bits(ell, v)).collect();
        let shifted: Vec<u64> = b.iter().map(|&v| v ^ x).collect();
        for k in 5..=size {
            for a in subsets_of_size(&shifted, k) {
                calls += 1;
                // A + A ⊆ B + B
                for &p in &a {
                    for &q in &a {
                        let s = p ^ q;
                        let ok = b.iter().any(|&u| bset.contains(&(u ^ s)));
                        ensure(ok, || format!("A+A not inside B+B at ell={ell}"))?;
                    }
                }
                let sweep: Vec<u64> = (0..1u64 << ell)
                    .filter(|t| a.iter().all(|&v| bset.contains(&(v ^ t))))
                    .collect();
                ensure(sweep == vec![x], || format!("sweep found {sweep:?}, expected [{x}]"))?;
                let av: Vec<BitVec> = a.iter().map(|&v| bits(ell, v)).collect();
                let got = solve_translate(&av, &bv).map_err(|e| e.to_string())?;
                ensure(got == Some(bits(ell, x)), || {
                    format!("solve_translate gave {got:?} for x = {}", bits(ell, x))
                })?;
            }
        }
    }
    Ok(format!("{cases} bases, {calls} subsets A"))
}

// ---------------------------------------------------------------------------
// 2. pair families

// All triples of disjoint unordered pairs from `cands` with a common sum.
fn pair_triples(cands: &[u64]) -> Vec<[(u64, u64); 3]> {
    let mut by_sum: HashMap<u64, Vec<(u64, u64)>> = HashMap::new();
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            by_sum
                .entry(cands[i] ^ cands[j])
                .or_default()
                .push((cands[i], cands[j]));
        }
    }
    let mut out = Vec::new();
    for pairs in by_sum.values() {
        // Pairs with the same nonzero sum are automatically disjoint.
        for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                for c in b + 1..pairs.len() {
                    out.push([pairs[a], pairs[b], pairs[c]]);
                }
            }
        }
    }
    out
}

fn check_basis(ell: usize, b: &[u64], counts: &mut (usize, usize)) -> Result<(), String> {
    let bset: HashSet<u64> = b.iter().copied().collect();
    let bv: Vec<BitVec> = b.iter().map(|&v| bits(ell, v)).collect();
    for &star in b {
        let mut cands: BTreeSet<u64> = BTreeSet::new();
        for &v in b {
            cands.insert(v);
            cands.insert(v ^ star);
        }
        cands.remove(&0);
        cands.remove(&star);
        let cands: Vec<u64> = cands.into_iter().collect();
        counts.0 += 1;
        for t in pair_triples(&cands) {
            counts.1 += 1;
            // The conclusion, read off directly.
            let expected = t
                .iter()
                .all(|&(x, y)| x ^ y == star && ((x != star && bset.contains(&x)) || (y != star && bset.contains(&y))));
            ensure(expected, || format!("counterexample at ell={ell}: b*={star:b}, {t:?}"))?;
            let pairs: Vec<(BitVec, BitVec)> = t.iter().map(|&(x, y)| (bits(ell, x), bits(ell, y))).collect();
            let got = check_pair_family(&bits(ell, star), &bv, &pairs).map_err(|e| e.to_string())?;
            ensure(got, || format!("check_pair_family rejected {t:?} at ell={ell}"))?;
        }
    }
    Ok(())
}

fn criterion_2() -> Outcome {
    let mut counts = (0usize, 0usize);
    let mut bases = 0usize;
    // Every independent B for ell ≤ 4.
    for ell in 1..=4usize {
        let nonzero: Vec<u64> = (1..1u64 << ell).collect();
        for size in 1..=ell {
            for b in subsets_of_size(&nonzero, size) {
                if int_rank(&b) == size {
                    bases += 1;
                    check_basis(ell, &b, &mut counts)?;
                }
            }
        }
    }
    // For 5 ≤ ell ≤ 7 the question depends only on the GL(ell, 2)-orbit of
    // B, and independent sets of one size form one orbit. Each size is run
    // on the standard basis and on random images of it.
    let mut rng = ChaCha8Rng::seed_from_u64(0x4302);
    for ell in 5..=7usize {
        for size in 1..=6usize.min(ell) {
            let std: Vec<u64> = (0..size).map(|i| 1u64 << i).collect();
            bases += 1;
            check_basis(ell, &std, &mut counts)?;
            let mut done = 0;
            while done < 20 {
                let b: Vec<u64> = (0..size).map(|_| rng.gen_range(1..1u64 << ell)).collect();
                if int_rank(&b) == size {
                    done += 1;
                    bases += 1;
                    check_basis(ell, &b, &mut counts)?;
                }
            }
        }
    }
    Ok(format!(
        "{bases} bases, {} choices of b*, {} triples",
        counts.0, counts.1
    ))
}

// ---------------------------------------------------------------------------
// 3. parity and the depth-n spectrum

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4303);
    let mut checks = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=8usize);
        let trees: Vec<Tree> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let count = rng.gen_range(1..=(1usize << n).min(12));
                let leaves: Vec<BitVec> = (0..count).map(|_| random_bits(&mut rng, n)).collect();
                Tree::from_leaves(n, leaves).expect("leaves have length n")
            })
            .collect();
        let f = Forest::new(n, trees).map_err(|e| e.to_string())?;
        let top: HashSet<u64> = f
            .trees()
            .iter()
            .flat_map(|t| t.leaves().iter().map(|v| v.to_u64()))
            .collect();
        for _ in 0..4 {
            let x = rng.gen_range(0..1u64 << n);
            let mut y = rng.gen_range(0..1u64 << n);
            if n == 0 || x == y {
                y = x ^ 1;
            }
            let brute = (0..1u64 << n)
                .filter(|z| top.contains(&(z ^ x)) && top.contains(&(z ^ y)))
                .count();
            let (xv, yv) = (bits(n, x), bits(n, y));
            let o = f.overlap(&xv, &yv).map_err(|e| e.to_string())?;
            ensure(o == brute, || format!("overlap {o} but brute force {brute}"))?;
            ensure(o % 2 == 0, || format!("odd overlap {o} at n={n}"))?;
            for k in 0..=o + 2 {
                let s = f.stnd_at_depth(k, &xv, &yv).map_err(|e| e.to_string())?;
                ensure(s == (o >= k), || format!("stnd_{k} is {s} with overlap {o}"))?;
                checks += 1;
            }
        }
    }
    Ok(format!("1000 forests, {checks} spectrum checks"))
}

// ---------------------------------------------------------------------------
// 4 and 5. structure posets

struct Poset {
    forest: Forest,
    max_u: usize,
    table: RankTable,
    // Proper extensions by the defining relation.
    above: Vec<Vec<usize>>,
    // Whether `above` came from testing every pair.
    pairwise: bool,
}

fn pairwise_poset(forest: Forest, max_u: usize, limit: u128) -> Result<Option<Poset>, String> {
    let Ok(table) = RankTable::build_with_limit(&forest, 2, max_u, limit) else {
        return Ok(None);
    };
    let all = table.structures();
    let mut above = vec![Vec::new(); all.len()];
    for (i, m) in all.iter().enumerate() {
        for (j, k) in all.iter().enumerate() {
            if i != j && m.extends(k).map_err(|e| e.to_string())? {
                above[i].push(j);
            }
        }
    }
    Ok(Some(Poset {
        forest,
        max_u,
        table,
        above,
        pairwise: true,
    }))
}

// For posets too large for the pairwise test: candidates are grouped by the
// projection of their node set, then tested with the defining relation.
fn grouped_poset(forest: Forest, max_u: usize) -> Result<Poset, String> {
    let table = RankTable::build(&forest, 2, max_u).map_err(|e| e.to_string())?;
    let all = table.structures();
    let mut by_proj: HashMap<(usize, Vec<BitVec>), Vec<usize>> = HashMap::new();
    for (j, n) in all.iter().enumerate() {
        for ell in 1..n.ell() {
            let mut p: Vec<BitVec> = n.u().iter().map(|v| v.prefix(ell)).collect();
            p.sort();
            p.dedup();
            by_proj.entry((ell, p)).or_default().push(j);
        }
    }
    let mut above = vec![Vec::new(); all.len()];
    for (i, m) in all.iter().enumerate() {
        for &j in by_proj.get(&(m.ell(), m.u().to_vec())).into_iter().flatten() {
            if m.extends(&all[j]).map_err(|e| e.to_string())? {
                above[i].push(j);
            }
        }
    }
    Ok(Poset {
        forest,
        max_u,
        table,
        above,
        pairwise: false,
    })
}

// Twenty random forests of height 2 or 3, each with the largest max_u ≤ 3
// that keeps the poset within 2000 structures.
fn corpus() -> Result<Vec<Poset>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3900);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    while out.len() < 20 {
        let n = rng.gen_range(2..=3usize);
        let trees: Vec<Tree> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let mut all: Vec<u64> = (0..1u64 << n).collect();
                all.shuffle(&mut rng);
                let count = rng.gen_range(2..=all.len());
                Tree::from_leaves(n, all[..count].iter().map(|&v| bits(n, v))).expect("length n")
            })
            .collect();
        let forest = Forest::new(n, trees).map_err(|e| e.to_string())?;
        if !seen.insert(forest.clone()) {
            continue;
        }
        for max_u in [3, 2] {
            if let Some(p) = pairwise_poset(forest.clone(), max_u, 2000)? {
                if !p.table.is_empty() {
                    out.push(p);
                }
                break;
            }
        }
    }
    Ok(out)
}

// Posets with |u| = 3 present, all above 2000 structures: the full tree of
// height 2 tested pairwise, two of height 3 by projection groups. Ranks
// reach 1 only in the last, of 55,632 structures.
fn wide_posets() -> Result<Vec<Poset>, String> {
    let f = |n: usize, leaves: &[&str]| Forest::from_strs(n, &[leaves]).map_err(|e| e.to_string());
    Ok(vec![
        pairwise_poset(f(2, &["00", "01", "10", "11"])?, 3, 10_000)?.ok_or("poset over the limit")?,
        grouped_poset(f(3, &["000", "001", "010", "011"])?, 3)?,
        grouped_poset(f(3, &["000", "001", "010", "011", "100", "110"])?, 3)?,
    ])
}

fn criterion_4(posets: &[&Poset]) -> Outcome {
    let (mut total, mut shifts, mut restrictions) = (0usize, 0usize, 0usize);
    let (mut same_triples, mut same_breaks) = (0usize, 0usize);
    for p in posets {
        let all = p.table.structures();
        total += all.len();
        let rank = p.table.ranks();
        let index: HashMap<&MStruct, usize> = all.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let ext: Vec<HashSet<usize>> = p.above.iter().map(|v| v.iter().copied().collect()).collect();
        for (i, m) in all.iter().enumerate() {
            ensure(m.extends(m).unwrap_or(false), || "⊑ is not reflexive".into())?;
            for &j in &p.above[i] {
                if p.pairwise {
                    ensure(!ext[j].contains(&i), || "⊑ is not antisymmetric".into())?;
                    for &k in &p.above[j] {
                        ensure(ext[i].contains(&k), || "⊑ is not transitive".into())?;
                    }
                }
                ensure(rank[i] >= rank[j], || {
                    format!("rank {} below rank {} of an extension", rank[i], rank[j])
                })?;
            }
            if m.u().len() == 3 {
                for sub in subsets_of_size(m.u(), 2) {
                    let r = m.restrict(&sub).map_err(|e| e.to_string())?;
                    let &ri = index.get(&r).ok_or("restriction missing from the poset")?;
                    ensure(rank[ri] >= rank[i], || "rank drops under restriction".into())?;
                    restrictions += 1;
                }
            }
        }
        let n = p.forest.height();
        let mut by_level: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, m) in all.iter().enumerate() {
            by_level.entry(m.ell()).or_default().push(i);
        }
        for rho in 0..1u64 << n {
            let rho = bits(n, rho);
            for members in by_level.values() {
                let mut image = HashSet::new();
                for &i in members {
                    let t = all[i].translate(&rho).map_err(|e| e.to_string())?;
                    ensure(t.is_valid(&p.forest), || format!("translate by {rho} breaks validity"))?;
                    let &j = index.get(&t).ok_or("translate leaves the poset")?;
                    ensure(all[j].ell() == all[i].ell(), || "translate changes the level".into())?;
                    image.insert(j);
                    shifts += 1;
                }
                ensure(image.len() == members.len(), || "translate is not injective".into())?;
            }
        }
        if !p.pairwise {
            continue;
        }
        // ≐ within each (level, u) class.
        let mut classes: HashMap<(usize, Vec<BitVec>), Vec<usize>> = HashMap::new();
        for (i, m) in all.iter().enumerate() {
            classes.entry((m.ell(), m.u().to_vec())).or_default().push(i);
        }
        for members in classes.values() {
            let k = members.len();
            let mut same = vec![vec![false; k]; k];
            for (x, &a) in members.iter().enumerate() {
                for (y, &b) in members.iter().enumerate() {
                    same[x][y] = all[a].essentially_same(&all[b]);
                }
            }
            for x in 0..k {
                ensure(same[x][x], || "≐ is not reflexive".into())?;
                for y in 0..k {
                    ensure(same[x][y] == same[y][x], || "≐ is not symmetric".into())?;
                    if !same[x][y] {
                        continue;
                    }
                    for z in 0..k {
                        if same[y][z] {
                            same_triples += 1;
                            if !same[x][z] {
                                same_breaks += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let max_u: BTreeSet<usize> = posets.iter().map(|p| p.max_u).collect();
    Ok(format!(
        "{} posets, {total} structures, max_u {max_u:?}, {shifts} translates, {restrictions} restrictions; \
         ≐ transitivity census: {same_breaks} failures in {same_triples} chained triples",
        posets.len()
    ))
}

fn naive_rank(all: &[MStruct], above: &[Vec<usize>], i: usize, memo: &mut HashMap<usize, usize>) -> usize {
    if let Some(&r) = memo.get(&i) {
        return r;
    }
    let m = &all[i];
    let mut best = usize::MAX;
    for nu in m.u() {
        let top = above[i]
            .iter()
            .filter(|&&j| all[j].ell() > m.ell() && all[j].branching_at(nu) >= 2)
            .map(|&j| naive_rank(all, above, j, memo) + 1)
            .max()
            .unwrap_or(0);
        best = best.min(top);
    }
    let r = if best == usize::MAX { 0 } else { best };
    memo.insert(i, r);
    r
}

// The corpus posets first, then the wide ones.
fn criterion_5(corpus: &[Poset], wide: &[Poset]) -> Outcome {
    let histogram = |posets: &[Poset]| -> Result<Vec<(usize, usize)>, String> {
        let mut hist: HashMap<usize, usize> = HashMap::new();
        for p in posets {
            let all = p.table.structures();
            let mut memo = HashMap::new();
            for i in 0..all.len() {
                let r = naive_rank(all, &p.above, i, &mut memo);
                ensure(r == p.table.rank_at(i), || {
                    format!("fixpoint rank {} but recursive rank {r}", p.table.rank_at(i))
                })?;
                *hist.entry(r).or_default() += 1;
            }
        }
        let mut hist: Vec<_> = hist.into_iter().collect();
        hist.sort();
        Ok(hist)
    };
    for p in corpus {
        ensure(p.table.len() <= 2000, || {
            format!("poset of {} structures", p.table.len())
        })?;
    }
    let small = histogram(corpus)?;
    let large = histogram(wide)?;
    Ok(format!(
        "{} corpus posets, rank histogram {small:?}; {} wide posets, rank histogram {large:?}",
        corpus.len(),
        wide.len()
    ))
}

// ---------------------------------------------------------------------------
// 6. model ranks

// Rank by quantification over every quantifier-free formula. For a tuple and
// a position, a formula matters only through the set of elements it allows
// at that position; the sets reachable from atomic formulas by ¬ and ∧ are
// closed off to a fixpoint.
struct FormulaOracle<'a> {
    model: &'a FiniteModel,
    theta: usize,
    memo: HashMap<(Vec<usize>, usize), bool>,
}

impl<'a> FormulaOracle<'a> {
    fn definable(&self, w: &[usize], k: usize) -> Vec<u32> {
        let n = self.model.size();
        let m = w.len();
        let eval = |f: &dyn Fn(&[usize]) -> bool| -> u32 {
            let mut t = w.to_vec();
            (0..n).fold(0u32, |acc, a| {
                t[k] = a;
                if f(&t) {
                    acc | 1 << a
                } else {
                    acc
                }
            })
        };
        let mut atoms: BTreeSet<u32> = BTreeSet::new();
        for i in 0..m {
            for j in 0..m {
                atoms.insert(eval(&|t| t[i] == t[j]));
            }
        }
        for r in self.model.relations() {
            let mut vars = vec![0usize; r.arity];
            loop {
                atoms.insert(eval(&|t| {
                    let args: Vec<usize> = vars.iter().map(|&v| t[v]).collect();
                    self.model.holds(&r.name, &args).expect("arity matches")
                }));
                let Some(p) = (0..r.arity).rev().find(|&p| vars[p] + 1 < m) else {
                    break;
                };
                vars[p] += 1;
                for v in &mut vars[p + 1..] {
                    *v = 0;
                }
            }
        }
        let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let mut sets: BTreeSet<u32> = atoms;
        loop {
            let cur: Vec<u32> = sets.iter().copied().collect();
            let mut next = sets.clone();
            for &a in &cur {
                next.insert(full & !a);
                for &b in &cur {
                    next.insert(a & b);
                }
            }
            if next.len() == sets.len() {
                break;
            }
            sets = next;
        }
        let own = 1u32 << w[k];
        sets.into_iter().filter(|s| s & own != 0).collect()
    }

    // rk(w) ≥ alpha for sorted w, from the clauses.
    fn at_least(&mut self, w: &[usize], alpha: usize) -> bool {
        if let Some(&b) = self.memo.get(&(w.to_vec(), alpha)) {
            return b;
        }
        let result = if alpha == 0 {
            (0..w.len()).all(|k| {
                self.definable(w, k)
                    .iter()
                    .all(|s| s.count_ones() as usize >= self.theta)
            })
        } else {
            self.at_least(w, alpha - 1)
                && (0..w.len()).all(|k| {
                    self.definable(w, k).iter().all(|&s| {
                        (0..self.model.size()).any(|a| {
                            if s >> a & 1 == 0 || w.contains(&a) {
                                return false;
                            }
                            let mut v = w.to_vec();
                            v.push(a);
                            v.sort_unstable();
                            self.at_least(&v, alpha - 1)
                        })
                    })
                })
        };
        self.memo.insert((w.to_vec(), alpha), result);
        result
    }

    fn rank(&mut self, w: &[usize]) -> Rank {
        if !self.at_least(w, 0) {
            return Rank::NegOne;
        }
        let mut a = 0;
        while a <= self.model.size() && self.at_least(w, a + 1) {
            a += 1;
        }
        Rank::Fin(a)
    }
}

fn all_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |a| {
                    let mut t = t.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

fn model_from_masks(n: usize, arities: (usize, usize), masks: (u64, u64)) -> FiniteModel {
    let rel = |name: &str, arity: usize, mask: u64| Relation {
        name: name.into(),
        arity,
        tuples: all_tuples(n, arity)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, t)| t)
            .collect(),
    };
    FiniteModel::new(n, vec![rel("R", arities.0, masks.0), rel("S", arities.1, masks.1)]).expect("valid model")
}

fn criterion_6() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x2100);
    let mut models = Vec::new();
    for n in 1..=5usize {
        for arities in [(1, 1), (1, 2), (2, 2)] {
            let cells = n.pow(arities.0 as u32) + n.pow(arities.1 as u32);
            if cells <= 12 {
                let c0 = n.pow(arities.0 as u32);
                for all in 0..1u64 << cells {
                    models.push(model_from_masks(n, arities, (all & ((1 << c0) - 1), all >> c0)));
                }
            } else {
                for _ in 0..60 {
                    let m0 = rng.gen_range(0..1u64 << n.pow(arities.0 as u32));
                    let m1 = rng.gen_range(0..1u64 << n.pow(arities.1 as u32));
                    models.push(model_from_masks(n, arities, (m0, m1)));
                }
            }
        }
    }
    let mut sets = 0usize;
    let main = (|| -> Outcome {
        for model in &models {
            let n = model.size();
            for theta in 1..=n + 1 {
                let mut engine = RankEngine::new(model, theta).map_err(|e| e.to_string())?;
                let mut oracle = FormulaOracle {
                    model,
                    theta,
                    memo: HashMap::new(),
                };
                let ws = subsets_up_to(n, 3);
                let mut ranks: HashMap<Vec<usize>, Rank> = HashMap::new();
                for w in &ws {
                    let r = engine.rk(w).map_err(|e| e.to_string())?;
                    let o = oracle.rank(w);
                    ensure(r == o, || {
                        format!("N={n} θ={theta} w={w:?}: rk {r} but formula oracle {o}")
                    })?;
                    if theta >= 2 {
                        let s = engine.rk_star(w).map_err(|e| e.to_string())?;
                        ensure(s <= r, || format!("N={n} θ={theta} w={w:?}: rk* {s} above rk {r}"))?;
                    }
                    ranks.insert(w.clone(), r);
                    sets += 1;
                }
                for w in &ws {
                    for k in 1..w.len() {
                        for v in subsets_of_size(w, k) {
                            ensure(ranks[&v] >= ranks[w], || {
                                format!("N={n} θ={theta}: rk{v:?} = {} below rk{w:?} = {}", ranks[&v], ranks[w])
                            })?;
                        }
                    }
                }
            }
        }
        Ok(format!("{} models, {sets} (model, θ, w) cases", models.len()))
    })();
    let claim = (|| -> Outcome {
        let m = order_model(10).map_err(|e| e.to_string())?;
        let mut engine = RankEngine::new(&m, 9).map_err(|e| e.to_string())?;
        let mut bad = Vec::new();
        for w in subsets_up_to(10, 2) {
            let r = engine.rk(&w).map_err(|e| e.to_string())?;
            let want = if w.len() == 1 { Rank::Fin(0) } else { Rank::NegOne };
            if r != want {
                bad.push(format!("rk{w:?} = {r}"));
            }
        }
        if bad.is_empty() {
            Ok("pairs -1, singletons 0".into())
        } else {
            Err(format!("order model N=10 θ=9: {}", bad.join(", ")))
        }
    })();
    (main, claim)
}

// ---------------------------------------------------------------------------
// 7. forcing constructions

fn recount_overlap(p: &Condition, a: usize, b: usize) -> usize {
    let top: HashSet<BitVec> = p.forest.top_level().into_iter().collect();
    let d = &p.eta[&a] + &p.eta[&b];
    top.iter().filter(|z| top.contains(&(*z + &d))).count()
}

fn check_overlaps(p: &Condition) -> Result<usize, String> {
    let certs = p.certificates().map_err(|e| e.to_string())?;
    let s = p.w.len();
    ensure(certs.len() == s * (s - 1) / 2, || "missing certificates".into())?;
    let mut least = usize::MAX;
    for c in &certs {
        let o = recount_overlap(p, c.alpha, c.beta);
        ensure(o == c.overlap, || {
            format!("certificate says {} but recount {o}", c.overlap)
        })?;
        ensure(o >= 2 * p.iota, || format!("overlap {o} below {}", 2 * p.iota))?;
        least = least.min(o);
    }
    Ok(least)
}

fn require_valid(p: &Condition, o: &RankOracle, what: &str) -> Result<(), String> {
    let d = validate_condition(p, o);
    ensure(d.is_empty(), || format!("{what}: {}", d[0]))
}

fn criterion_7() -> Outcome {
    let iota = 3;
    let o = RankOracle::order(16, 16).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut least = usize::MAX;
    for w in [vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3, 4, 5]] {
        let s = w.len();
        let p = bootstrap(&w, iota).map_err(|e| e.to_string())?;
        require_valid(&p, &o, "bootstrap")?;
        least = least.min(check_overlaps(&p)?);

        let beta = w[s - 1] + 1;
        let q = extend_add_element(&p, beta).map_err(|e| e.to_string())?;
        ensure(leq(&p, &q), || "extension is not above p".into())?;
        require_valid(&q, &o, "extension")?;
        ensure(q.n - p.n == s * iota + 2, || format!("n grew by {}", q.n - p.n))?;
        ensure(q.tree_count() - p.tree_count() == s * iota, || {
            format!("M grew by {}", q.tree_count() - p.tree_count())
        })?;
        least = least.min(check_overlaps(&q)?);

        // Twins sharing all but the top ℓ ordinals.
        for ell in 1..=2usize {
            let common: Vec<usize> = w[..s - ell].to_vec();
            let w1: Vec<usize> = common.iter().copied().chain((0..ell).map(|i| 8 + i)).collect();
            let w2: Vec<usize> = common.iter().copied().chain((0..ell).map(|i| 8 + ell + i)).collect();
            let p1 = bootstrap(&w1, iota).map_err(|e| e.to_string())?;
            let p2 = bootstrap(&w2, iota).map_err(|e| e.to_string())?;
            ensure(check_twin(&p1, &p2, &o).map_err(|e| e.to_string())?.is_some(), || {
                format!("{w1:?} and {w2:?} are not twins")
            })?;
            let r = amalgamate(&p1, &p2, &o).map_err(|e| e.to_string())?;
            require_valid(&r, &o, "amalgamation")?;
            ensure(leq(&p1, &r) && leq(&p2, &r), || "amalgamation is not above both".into())?;
            let k = s - ell;
            let n0 = iota * ell * (ell + k) + iota * ell * (ell - 1) / 2 + 1;
            let sz = amalgamation_sizes(iota, k, ell);
            ensure(sz.n0 == n0 && sz.n == n0 + ell + 1, || format!("sizes {sz:?}"))?;
            ensure(r.n == p1.n + n0 + ell + 1, || format!("n grew by {}", r.n - p1.n))?;
            ensure(r.tree_count() == p1.tree_count() + 1, || "M did not grow by one".into())?;
            least = least.min(check_overlaps(&r)?);
            notes.push(format!("|w|={s} ℓ={ell}: N0={n0}"));
        }
        notes.push(format!("|w|={s}: n={} M={}", p.n, p.tree_count()));
    }
    Ok(format!("{}; least overlap {least}", notes.join(", ")))
}

// ---------------------------------------------------------------------------
// 8. generic runs

fn three_step_run() -> Result<(GenericRun, RankOracle), String> {
    let seed = bootstrap(&[0, 1, 2, 3, 4], 3).map_err(|e| e.to_string())?;
    let schedule = [
        ScheduleStep { beta: 5, n0: 0, m0: 0 },
        ScheduleStep { beta: 6, n0: 0, m0: 0 },
        ScheduleStep { beta: 9, n0: 0, m0: 0 },
    ];
    let o = RankOracle::order(10, 10).map_err(|e| e.to_string())?;
    let run = build_chain(&seed, &schedule, &o).map_err(|e| e.to_string())?;
    Ok((run, o))
}

// Reads a run document with no library types and recounts every overlap.
fn independent_reader(text: &str) -> Result<usize, String> {
    let doc: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let strs = |v: &Value| -> Vec<String> {
        v.as_array()
            .into_iter()
            .flatten()
            .filter_map(|s| s.as_str().map(String::from))
            .collect()
    };
    let forest = &doc["forest"];
    let n = forest["n"].as_u64().ok_or("forest.n missing")? as usize;
    let top: HashSet<String> = forest["trees"]
        .as_array()
        .ok_or("forest.trees missing")?
        .iter()
        .flat_map(strs)
        .collect();
    ensure(top.iter().all(|s| s.len() == n), || "node of wrong length".into())?;
    let eta: HashMap<String, String> = doc["eta"]
        .as_object()
        .ok_or("eta missing")?
        .iter()
        .map(|(k, v)| (k.clone(), v.as_str().unwrap_or_default().to_string()))
        .collect();
    let xor = |a: &str, b: &str| -> String {
        a.bytes()
            .zip(b.bytes())
            .map(|(x, y)| if x == y { '0' } else { '1' })
            .collect()
    };
    let mut ordinals: Vec<&String> = eta.keys().collect();
    ordinals.sort_by_key(|k| k.parse::<usize>().unwrap_or(usize::MAX));
    let mut least = usize::MAX;
    for (i, a) in ordinals.iter().enumerate() {
        for b in &ordinals[i + 1..] {
            let d = xor(&eta[*a], &eta[*b]);
            let o = top.iter().filter(|z| top.contains(&xor(z, &d))).count();
            ensure(o >= 6, || format!("overlap of {a},{b} is {o}"))?;
            least = least.min(o);
        }
    }
    let certs = doc["certificates"].as_array().ok_or("certificates missing")?;
    ensure(certs.len() == ordinals.len() * (ordinals.len() - 1) / 2, || {
        "certificate count".into()
    })?;
    Ok(least)
}

fn criterion_8() -> Outcome {
    let (run, _) = three_step_run()?;
    ensure(run.chain.len() == 4, || format!("chain of {}", run.chain.len()))?;
    for pair in run.chain.windows(2) {
        ensure(leq(&pair[0], &pair[1]), || "chain is not increasing".into())?;
    }
    let last = run.chain.last().expect("nonempty");
    for a in &last.w {
        for b in &last.w {
            if a < b {
                let o = recount_overlap(last, *a, *b);
                ensure(o >= 6, || format!("overlap({a},{b}) = {o}"))?;
            }
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&run).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let least = independent_reader(&text)?;
    let out = Command::new(env!("CARGO_BIN_EXE_overlap-lab"))
        .args(["validate", "--kind", "run", "--format", "json", "--input"])
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("reader process exited with {}", out.status)
    })?;
    let report: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    ensure(report["ok"] == Value::Bool(true), || {
        "reader process reports failure".into()
    })?;
    Ok(format!(
        "final |w| = {}, n = {}, least overlap {least}",
        last.w.len(),
        last.n
    ))
}

// ---------------------------------------------------------------------------
// 9. rank against branching rank along a chain

fn criterion_9() -> Outcome {
    let (run, _) = three_step_run()?;
    let universe = 10;
    // Structures of the chain's conditions on five-element subsets of w.
    let mut nodes: Vec<(usize, Vec<usize>, MStruct)> = Vec::new();
    for (j, p) in run.chain.iter().enumerate() {
        for wstar in subsets_of_size(&p.w, 5) {
            if let Some(m) = p.structure(p.n, &wstar) {
                nodes.push((j, wstar, m));
            }
        }
    }
    ensure(!nodes.is_empty(), || "the chain has no structures".into())?;
    // Branching rank within this family: the longest branching descent.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(nodes[i].2.ell()));
    let mut ndrk = vec![0usize; nodes.len()];
    for &i in &order {
        let m = &nodes[i].2;
        let exts: Vec<usize> = (0..nodes.len())
            .filter(|&k| nodes[k].2.ell() > m.ell() && m.extends(&nodes[k].2).unwrap_or(false))
            .collect();
        ndrk[i] = m
            .u()
            .iter()
            .map(|nu| {
                exts.iter()
                    .filter(|&&k| nodes[k].2.branching_at(nu) >= 2)
                    .map(|&k| ndrk[k] + 1)
                    .max()
                    .unwrap_or(0)
            })
            .min()
            .unwrap_or(0);
    }
    let mut csv = String::from("instance,theta,rk,ndrk\n");
    let mut holds = 0;
    for theta in [universe, universe - 1] {
        let o = RankOracle::order(universe, theta).map_err(|e| e.to_string())?;
        for (i, (j, wstar, _)) in nodes.iter().enumerate() {
            let rk = o.triple(wstar).map_err(|e| e.to_string())?.rk;
            let label = wstar.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("-");
            writeln!(csv, "step{j}:{label},{theta},{rk},{}", ndrk[i]).expect("string write");
            if rk.as_i64().is_some_and(|r| r <= ndrk[i] as i64) {
                holds += 1;
            }
        }
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("rk_vs_ndrk.csv");
    std::fs::write(&path, &csv).map_err(|e| e.to_string())?;
    // Well-formedness: header plus four columns with integer tails.
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        ensure(cols.len() == 4, || format!("bad row {row}"))?;
        ensure(cols[1..].iter().all(|c| c.parse::<i64>().is_ok()), || {
            format!("bad row {row}")
        })?;
    }
    Ok(format!(
        "{} rows written to {}; rk ≤ ndrk on {holds} of them",
        rows.len(),
        path.display()
    ))
}

#[test]
fn acceptance() {
    let mut report = Report {
        lines: Vec::new(),
        unexpected: Vec::new(),
    };

    let t = Instant::now();
    report.record(1, "translation recovery", t, criterion_1(), false);
    let t = Instant::now();
    report.record(2, "pair families", t, criterion_2(), false);
    let t = Instant::now();
    report.record(3, "overlap parity and spectrum", t, criterion_3(), false);

    let t = Instant::now();
    match corpus().and_then(|c| Ok((c, wide_posets()?))) {
        Ok((corpus, wide)) => {
            let all: Vec<&Poset> = corpus.iter().chain(&wide).collect();
            report.record(4, "structure relations", t, criterion_4(&all), false);
            let t = Instant::now();
            report.record(
                5,
                "fixpoint rank against recursion",
                t,
                criterion_5(&corpus, &wide),
                false,
            );
        }
        Err(e) => {
            report.record(4, "structure relations", t, Err(e.clone()), false);
            report.record(5, "fixpoint rank against recursion", t, Err(e), false);
        }
    }

    let t = Instant::now();
    let (main, claim) = criterion_6();
    let allowed = main.is_ok() && claim.is_err();
    let combined = match (main, claim) {
        (Ok(a), Ok(b)) => Ok(format!("{a}; {b}")),
        (Err(a), _) => Err(a),
        (Ok(a), Err(b)) => Err(format!("{a}; {b}")),
    };
    // Only the order-model claim may fail here.
    report.record(6, "model ranks", t, combined, allowed);

    let t = Instant::now();
    report.record(7, "forcing constructions", t, criterion_7(), false);
    let t = Instant::now();
    report.record(8, "generic run", t, criterion_8(), false);
    let t = Instant::now();
    report.record(9, "rank cross-check", t, criterion_9(), false);

    assert!(
        report.unexpected.is_empty(),
        "unexpected failures: {:?}",
        report.unexpected
    );
}
