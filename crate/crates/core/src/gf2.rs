//! Vectors in `2^len` with coordinate-wise addition modulo 2.
//!
//! Bits are packed most-significant-first into `u64` words, so comparing the
//! word vectors of two equal-length vectors is the same as comparing their
//! `0`/`1` strings lexicographically. Index 0 is the leftmost character of the
//! string form.

use std::collections::HashMap;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    // `len` first: the derived order is shortlex, and lexicographic within a
    // length class.
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(WORD)
}

#[inline]
fn mask(i: usize) -> u64 {
    1u64 << (WORD - 1 - i % WORD)
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        Self::from_fn(len, |_| true)
    }

    /// The standard basis vector with a single 1 at `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        assert!(index < len, "unit index {index} out of range for length {len}");
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                v.words[i / WORD] |= mask(i);
            }
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_fn(bits.len(), |i| bits[i])
    }

    /// Builds a vector of length `len` from the low `len` bits of `value`,
    /// most significant first. Handy for enumerating `2^len` with `len <= 64`.
    pub fn from_u64(len: usize, value: u64) -> Self {
        assert!(len <= WORD);
        Self::from_fn(len, |i| (value >> (len - 1 - i)) & 1 == 1)
    }

    /// Inverse of [`BitVec::from_u64`].
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= WORD);
        (0..self.len).fold(0u64, |acc, i| (acc << 1) | u64::from(self.get(i)))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / WORD] & mask(i) != 0
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        if value {
            self.words[i / WORD] |= mask(i);
        } else {
            self.words[i / WORD] &= !mask(i);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the first 1, if any.
    pub fn leading_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(k, w)| k * WORD + w.leading_zeros() as usize)
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Coordinate-wise sum; fails on a length mismatch.
    pub fn add(&self, other: &BitVec) -> Result<BitVec> {
        if self.len != other.len {
            return Err(Error::usage(format!(
                "cannot add vectors of lengths {} and {}",
                self.len, other.len
            )));
        }
        Ok(self.xor_unchecked(other))
    }

    fn xor_unchecked(&self, other: &BitVec) -> BitVec {
        BitVec {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "length mismatch in xor_assign");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// The initial segment `self|len`.
    pub fn prefix(&self, len: usize) -> BitVec {
        assert!(len <= self.len, "prefix {len} longer than vector {}", self.len);
        let mut words: Vec<u64> = self.words[..word_count(len)].to_vec();
        if len % WORD != 0 {
            let keep = !0u64 << (WORD - len % WORD);
            if let Some(last) = words.last_mut() {
                *last &= keep;
            }
        }
        BitVec { len, words }
    }

    /// `self` is an initial segment of `other`.
    pub fn is_prefix_of(&self, other: &BitVec) -> bool {
        self.len <= other.len && other.prefix(self.len) == *self
    }

    /// Coordinates `[start, end)` as a new vector.
    pub fn slice(&self, start: usize, end: usize) -> BitVec {
        assert!(start <= end && end <= self.len);
        Self::from_fn(end - start, |i| self.get(start + i))
    }

    pub fn concat(&self, other: &BitVec) -> BitVec {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    pub fn extend_from(&mut self, other: &BitVec) {
        let old = self.len;
        self.len += other.len;
        self.words.resize(word_count(self.len), 0);
        for i in 0..other.len {
            if other.get(i) {
                let j = old + i;
                self.words[j / WORD] |= mask(j);
            }
        }
    }

    /// Appends `count` copies of `bit`.
    pub fn push_run(&mut self, bit: bool, count: usize) {
        let old = self.len;
        self.len += count;
        self.words.resize(word_count(self.len), 0);
        if bit {
            for j in old..self.len {
                self.words[j / WORD] |= mask(j);
            }
        }
    }

    /// Builder form of [`BitVec::push_run`].
    pub fn with_run(mut self, bit: bool, count: usize) -> BitVec {
        self.push_run(bit, count);
        self
    }

    /// The vector padded with zeros up to `len`.
    pub fn pad_to(&self, len: usize) -> BitVec {
        assert!(len >= self.len);
        self.clone().with_run(false, len - self.len)
    }
}

impl Add for &BitVec {
    type Output = BitVec;

    /// Panics on a length mismatch; use [`BitVec::add`] for a checked sum.
    fn add(self, rhs: &BitVec) -> BitVec {
        assert_eq!(self.len, rhs.len, "length mismatch in GF(2) addition");
        self.xor_unchecked(rhs)
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl FromStr for BitVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut v = BitVec::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                other => return Err(Error::parse(format!("invalid bit {other:?} at position {i} in {s:?}"))),
            }
        }
        Ok(v)
    }
}

impl Serialize for BitVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn common_len(vectors: &[BitVec]) -> Result<Option<usize>> {
    let Some(first) = vectors.first() else {
        return Ok(None);
    };
    if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
        return Err(Error::usage(format!(
            "mixed vector lengths {} and {}",
            first.len(),
            bad.len()
        )));
    }
    Ok(Some(first.len()))
}

/// Rank over GF(2) by Gaussian elimination with a pivot table keyed by the
/// leading coordinate of each reduced vector.
pub fn rank(vectors: &[BitVec]) -> Result<usize> {
    common_len(vectors)?;
    let mut pivots: HashMap<usize, BitVec> = HashMap::new();
    for v in vectors {
        let mut r = v.clone();
        while let Some(lead) = r.leading_one() {
            match pivots.get(&lead) {
                Some(p) => r.xor_assign(p),
                None => {
                    pivots.insert(lead, r);
                    break;
                }
            }
        }
    }
    Ok(pivots.len())
}

/// True iff no nonempty subfamily sums to zero. The input is read as a
/// family, so a repeated vector makes it dependent.
pub fn is_independent(vectors: &[BitVec]) -> Result<bool> {
    Ok(rank(vectors)? == vectors.len())
}

fn dedup_sorted(vectors: &[BitVec]) -> Vec<BitVec> {
    let mut v = vectors.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Finds the unique `x` with `A + x ⊆ B` for an independent `B` and `|A| >= 5`.
///
/// Only the `|B|` candidates `a0 + b` for a fixed anchor `a0 ∈ A` are tried.
/// Returns `Ok(None)` when no shift works (in particular whenever
/// `A + A ⊄ B + B`).
pub fn solve_translate(a: &[BitVec], b: &[BitVec]) -> Result<Option<BitVec>> {
    let a = dedup_sorted(a);
    let b = dedup_sorted(b);
    if a.len() < 5 {
        return Err(Error::usage(format!("solve_translate needs |A| >= 5, got {}", a.len())));
    }
    let mut all = a.clone();
    all.extend(b.iter().cloned());
    common_len(&all)?;
    if !is_independent(&b)? {
        return Err(Error::usage("solve_translate needs an independent B"));
    }
    let anchor = &a[0];
    let mut found: Option<BitVec> = None;
    for target in &b {
        let x = anchor + target;
        let fits = a.iter().all(|y| b.binary_search(&(y + &x)).is_ok());
        if fits {
            if let Some(prev) = &found {
                return Err(Error::internal(format!(
                    "two translations {prev} and {x} carry A into an independent B"
                )));
            }
            found = Some(x);
        }
    }
    Ok(found)
}

/// Decides whether every pair in `pairs` has the form `{b, b + bstar}` with
/// `b ∈ B \ {bstar}`.
///
/// The pair list must meet the two hypotheses: (a) its `2·|pairs|` entries
/// are pairwise distinct, and (b) every pair has the same sum. Each entry must
/// lie in `(B ∪ (bstar + B)) \ {0, bstar}`.
pub fn check_pair_family(bstar: &BitVec, b: &[BitVec], pairs: &[(BitVec, BitVec)]) -> Result<bool> {
    let b = dedup_sorted(b);
    let mut all = b.clone();
    all.push(bstar.clone());
    all.extend(pairs.iter().flat_map(|(x, y)| [x.clone(), y.clone()]));
    common_len(&all)?;
    if b.binary_search(bstar).is_err() {
        return Err(Error::usage("b* must belong to B"));
    }
    if !is_independent(&b)? {
        return Err(Error::usage("B must be linearly independent"));
    }
    let zero = BitVec::zeros(bstar.len());
    let admissible =
        |x: &BitVec| *x != zero && x != bstar && (b.binary_search(x).is_ok() || b.binary_search(&(x + bstar)).is_ok());
    for (x, y) in pairs {
        for e in [x, y] {
            if !admissible(e) {
                return Err(Error::usage(format!(
                    "pair entry {e} lies outside (B ∪ (b*+B)) minus {{0, b*}}"
                )));
            }
        }
    }
    let mut entries: Vec<&BitVec> = pairs.iter().flat_map(|(x, y)| [x, y]).collect();
    entries.sort();
    if entries.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::usage("hypothesis (a) violated: repeated pair entry"));
    }
    if let Some((x0, y0)) = pairs.first() {
        let s = x0 + y0;
        if pairs.iter().any(|(x, y)| &(x + y) != &s) {
            return Err(Error::usage("hypothesis (b) violated: pair sums differ"));
        }
    }
    Ok(pairs
        .iter()
        .all(|(x, y)| &(x + y) == bstar && [x, y].iter().any(|e| *e != bstar && b.binary_search(e).is_ok())))
}
