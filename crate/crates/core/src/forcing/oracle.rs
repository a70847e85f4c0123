//! Sources of the rank data `(rk(v), ζ(v), k(v))` consulted by the
//! condition clauses that refer to the background model.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_rank::{order_model, FiniteModel, Rank, RankEngine, RankTriple};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Backing {
    Model {
        model: FiniteModel,
        theta: usize,
        embed: Option<BTreeMap<usize, usize>>,
    },
    Table(BTreeMap<Vec<usize>, RankTriple>),
}

/// Rank data for finite sets of ordinals, backed either by a finite model
/// with a threshold θ or by an explicit table.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "OracleDoc", into = "OracleDoc")]
pub struct RankOracle {
    backing: Backing,
    cache: Mutex<HashMap<Vec<usize>, RankTriple>>,
}

impl Clone for RankOracle {
    fn clone(&self) -> Self {
        RankOracle::with_backing(self.backing.clone())
    }
}

impl PartialEq for RankOracle {
    fn eq(&self, other: &Self) -> bool {
        self.backing == other.backing
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum OracleDoc {
    Model {
        model: FiniteModel,
        theta: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embed: Option<BTreeMap<String, usize>>,
    },
    Table {
        entries: Vec<TableEntry>,
    },
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    v: Vec<usize>,
    rk: Rank,
    zeta: String,
    k: usize,
}

impl TryFrom<OracleDoc> for RankOracle {
    type Error = Error;

    fn try_from(doc: OracleDoc) -> Result<RankOracle> {
        match doc {
            OracleDoc::Model { model, theta, embed } => {
                let embed = embed
                    .map(|e| {
                        e.into_iter()
                            .map(|(k, v)| {
                                k.parse::<usize>()
                                    .map(|k| (k, v))
                                    .map_err(|_| Error::parse(format!("embedding key {k:?} is not a natural")))
                            })
                            .collect::<Result<BTreeMap<_, _>>>()
                    })
                    .transpose()?;
                RankOracle::from_model(model, theta, embed)
            }
            OracleDoc::Table { entries } => RankOracle::from_table(entries.into_iter().map(|e| {
                (
                    e.v,
                    RankTriple {
                        rk: e.rk,
                        zeta: e.zeta,
                        k: e.k,
                    },
                )
            })),
        }
    }
}

impl From<RankOracle> for OracleDoc {
    fn from(o: RankOracle) -> OracleDoc {
        match o.backing {
            Backing::Model { model, theta, embed } => OracleDoc::Model {
                model,
                theta,
                embed: embed.map(|e| e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
            },
            Backing::Table(t) => OracleDoc::Table {
                entries: t
                    .into_iter()
                    .map(|(v, t)| TableEntry {
                        v,
                        rk: t.rk,
                        zeta: t.zeta,
                        k: t.k,
                    })
                    .collect(),
            },
        }
    }
}

impl RankOracle {
    fn with_backing(backing: Backing) -> RankOracle {
        RankOracle {
            backing,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Model-backed oracle. Without an embedding every ordinal is read as the
    /// universe element of the same number. An embedding must be strictly
    /// increasing so that positions in `v` are positions in its image.
    pub fn from_model(model: FiniteModel, theta: usize, embed: Option<BTreeMap<usize, usize>>) -> Result<RankOracle> {
        if theta < 1 {
            return Err(Error::usage("theta must be at least 1"));
        }
        if let Some(e) = &embed {
            let img: Vec<usize> = e.values().copied().collect();
            if img.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::usage("the embedding must be strictly increasing"));
            }
            if let Some(&bad) = img.iter().find(|&&a| a >= model.size()) {
                return Err(Error::usage(format!(
                    "embedding target {bad} is outside the universe 0..{}",
                    model.size()
                )));
            }
        }
        Ok(RankOracle::with_backing(Backing::Model { model, theta, embed }))
    }

    /// The order model on `size` elements with threshold `theta`.
    pub fn order(size: usize, theta: usize) -> Result<RankOracle> {
        RankOracle::from_model(order_model(size)?, theta, None)
    }

    /// Table-backed oracle. Keys are sorted and deduplicated; each `k` must be
    /// below `|v|`, and a set listed twice must carry the same triple.
    pub fn from_table(entries: impl IntoIterator<Item = (Vec<usize>, RankTriple)>) -> Result<RankOracle> {
        let mut table = BTreeMap::new();
        for (mut v, t) in entries {
            v.sort_unstable();
            v.dedup();
            if v.is_empty() {
                return Err(Error::usage("oracle table lists the empty set"));
            }
            if t.k >= v.len() {
                return Err(Error::usage(format!(
                    "k = {} is not below |v| = {} for {v:?}",
                    t.k,
                    v.len()
                )));
            }
            if let Some(prev) = table.get(&v) {
                if *prev != t {
                    return Err(Error::usage(format!("oracle table gives two triples for {v:?}")));
                }
            }
            table.insert(v, t);
        }
        Ok(RankOracle::with_backing(Backing::Table(table)))
    }

    /// Tabulates `inner` on every nonempty subset of `w`.
    pub fn tabulate(inner: &RankOracle, w: &[usize]) -> Result<RankOracle> {
        if w.len() > 20 {
            return Err(Error::Resource(format!("cannot tabulate {} ordinals", w.len())));
        }
        let mut entries = Vec::new();
        for mask in 1u32..(1 << w.len()) {
            let v: Vec<usize> = (0..w.len()).filter(|&i| mask >> i & 1 == 1).map(|i| w[i]).collect();
            let t = inner.triple(&v)?;
            entries.push((v, t));
        }
        RankOracle::from_table(entries)
    }

    pub fn describe(&self) -> String {
        match &self.backing {
            Backing::Model { model, theta, embed } => format!(
                "model-backed (universe {}, theta {}, {})",
                model.size(),
                theta,
                if embed.is_some() {
                    "explicit embedding"
                } else {
                    "identity embedding"
                }
            ),
            Backing::Table(t) => format!("table-backed ({} entries)", t.len()),
        }
    }

    /// `(rk(v), ζ(v), k(v))` for a nonempty set of ordinals.
    pub fn triple(&self, v: &[usize]) -> Result<RankTriple> {
        let mut v = v.to_vec();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::usage("rank data is defined for nonempty sets only"));
        }
        if let Some(t) = self.cache.lock().expect("oracle cache poisoned").get(&v) {
            return Ok(t.clone());
        }
        let t = match &self.backing {
            Backing::Table(table) => table
                .get(&v)
                .cloned()
                .ok_or_else(|| Error::usage(format!("oracle table has no entry for {v:?}")))?,
            Backing::Model { model, theta, embed } => {
                let image = match embed {
                    None => v.clone(),
                    Some(e) => v
                        .iter()
                        .map(|a| {
                            e.get(a)
                                .copied()
                                .ok_or_else(|| Error::usage(format!("ordinal {a} is not embedded")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                };
                RankEngine::new(model, *theta)?.triple(&image)?
            }
        };
        self.cache.lock().expect("oracle cache poisoned").insert(v, t.clone());
        Ok(t)
    }
}
