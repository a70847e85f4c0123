//! Increasing chains of conditions meeting scheduled dense sets, and the
//! trees and reals they determine at finite depth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};
use crate::forest::Forest;
use crate::gf2::BitVec;
use crate::SCHEMA;

use super::{extend_dense, leq, validate_condition, Condition, OverlapCertificate, RankOracle};

/// Meet the dense set of conditions with `beta ∈ w`, `n > n0`, `M > m0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub beta: usize,
    pub n0: usize,
    pub m0: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RunDoc", into = "RunDoc")]
pub struct GenericRun {
    pub chain: Vec<Condition>,
    /// The trees `T_m ∩ 2^{≤n}` at the depth of the last condition.
    pub forest: Forest,
    /// `η_α↾n` for every ordinal reached.
    pub eta: BTreeMap<usize, BitVec>,
    pub certificates: Vec<OverlapCertificate>,
    pub oracle: String,
}

#[derive(Serialize, Deserialize)]
struct RunDoc {
    schema: String,
    chain: Vec<Condition>,
    forest: Forest,
    eta: BTreeMap<String, BitVec>,
    certificates: Vec<OverlapCertificate>,
    oracle: String,
}

impl TryFrom<RunDoc> for GenericRun {
    type Error = Error;

    fn try_from(doc: RunDoc) -> Result<GenericRun> {
        if doc.schema != SCHEMA {
            return Err(Error::parse(format!("unknown schema {:?}", doc.schema)));
        }
        let eta = doc
            .eta
            .into_iter()
            .map(|(k, v)| Ok((super::parse_ordinal(&k)?, v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(GenericRun {
            chain: doc.chain,
            forest: doc.forest,
            eta,
            certificates: doc.certificates,
            oracle: doc.oracle,
        })
    }
}

impl From<GenericRun> for RunDoc {
    fn from(run: GenericRun) -> RunDoc {
        RunDoc {
            schema: SCHEMA.to_string(),
            chain: run.chain,
            forest: run.forest,
            eta: run.eta.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            certificates: run.certificates,
            oracle: run.oracle,
        }
    }
}

/// Extends `seed` through `schedule`, validating every condition against
/// `o`. Ordinals needed beyond the scheduled ones are taken in increasing
/// order above everything mentioned so far.
pub fn build_chain(seed: &Condition, schedule: &[ScheduleStep], o: &RankOracle) -> Result<GenericRun> {
    if let Some(d) = validate_condition(seed, o).first() {
        return Err(Error::usage(format!("seed is not a condition: {d}")));
    }
    let top = seed
        .w
        .iter()
        .chain(schedule.iter().map(|s| &s.beta))
        .max()
        .copied()
        .unwrap_or(0);
    let mut fresh = top + 1..;
    let mut chain = vec![seed.clone()];
    for step in schedule {
        let last = chain.last().expect("chain starts with the seed");
        let q = extend_dense(last, step.beta, step.n0, step.m0, &mut fresh)?;
        if !leq(last, &q) {
            return Err(Error::internal(format!("step for {} is not an extension", step.beta)));
        }
        if let Some(d) = validate_condition(&q, o).first() {
            return Err(Error::internal(format!(
                "step for {} fails against the {} oracle: {d}",
                step.beta,
                o.describe()
            )));
        }
        chain.push(q);
    }
    let last = chain.last().expect("nonempty");
    Ok(GenericRun {
        forest: last.forest.clone(),
        eta: last.eta.clone(),
        certificates: last.certificates()?,
        oracle: o.describe(),
        chain,
    })
}

/// Re-checks a run from its data alone: the chain increases, the final
/// trees and reals agree with the last condition and with every earlier one,
/// and each certificate lists `2ι` distinct points of
/// `(B_n + η_α) ∩ (B_n + η_β)` with the recorded overlap.
pub fn verify_run(run: &GenericRun) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let Some(last) = run.chain.last() else {
        out.push(Diagnostic::new("chain", "the chain is empty"));
        return out;
    };
    for (j, pair) in run.chain.windows(2).enumerate() {
        if !leq(&pair[0], &pair[1]) {
            out.push(Diagnostic::new(
                "chain",
                format!("condition {} is not above condition {j}", j + 1),
            ));
        }
    }
    if run.forest != last.forest || run.eta != last.eta {
        out.push(Diagnostic::new(
            "final",
            "final trees or reals differ from the last condition",
        ));
    }
    for p in &run.chain {
        for m in 0..p.forest.len() {
            if m >= run.forest.len() || run.forest.tree(m).truncate(p.n) != *p.forest.tree(m) {
                out.push(Diagnostic::new(
                    "final",
                    format!("tree {m} is not an end extension at depth {}", p.n),
                ));
            }
        }
    }
    let iota = last.iota;
    let top = run.forest.top_level();
    let mut covered = 0;
    for c in &run.certificates {
        let (Some(ea), Some(eb)) = (run.eta.get(&c.alpha), run.eta.get(&c.beta)) else {
            out.push(Diagnostic::new(
                "certificate",
                format!("({},{}) names an unknown ordinal", c.alpha, c.beta),
            ));
            continue;
        };
        covered += 1;
        let d = ea + eb;
        let overlap = top.iter().filter(|b| top.binary_search(&(*b + &d)).is_ok()).count();
        if overlap != c.overlap {
            out.push(Diagnostic::new(
                "certificate",
                format!(
                    "({},{}) records overlap {} but the trees give {overlap}",
                    c.alpha, c.beta, c.overlap
                ),
            ));
        }
        if overlap < 2 * iota {
            out.push(Diagnostic::new(
                "certificate",
                format!("({},{}) has overlap {overlap} below {}", c.alpha, c.beta, 2 * iota),
            ));
        }
        let mut pts = c.points.clone();
        pts.sort();
        pts.dedup();
        if pts.len() != 2 * iota {
            out.push(Diagnostic::new(
                "certificate",
                format!("({},{}) lists {} distinct points", c.alpha, c.beta, pts.len()),
            ));
        }
        for z in &pts {
            if top.binary_search(&(z + ea)).is_err() || top.binary_search(&(z + eb)).is_err() {
                out.push(Diagnostic::new(
                    "certificate",
                    format!("point {z} is not in both translates for ({},{})", c.alpha, c.beta),
                ));
            }
        }
    }
    let s = run.eta.len();
    if covered != s * s.saturating_sub(1) / 2 {
        out.push(Diagnostic::new(
            "certificate",
            format!("{covered} certificates for {s} ordinals"),
        ));
    }
    out
}
