use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use overlap_lab::error::{Diagnostic, Error};
use overlap_lab::forcing::{
    amalgamate, bootstrap, build_chain, check_twin, extend_add_element, extend_dense, leq, validate_condition,
    verify_run, Condition, GenericRun, RankOracle, ScheduleStep,
};
use overlap_lab::forest::Forest;
use overlap_lab::gf2::{check_pair_family, is_independent, solve_translate, BitVec};
use overlap_lab::model_rank::{npr_check, order_model, subsets_up_to, FiniteModel, RankEngine, RankParams};
use overlap_lab::ndrk::{check_chain, extract_perfect_witness, ChainWitness, RankTable};
use overlap_lab::SCHEMA;

#[derive(Parser)]
#[command(
    name = "overlap-lab",
    version,
    about = "Finite-depth overlap, rank and forcing-condition tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// Output format for the report on standard output.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Seed for commands that sample.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Condition,
    Chain,
    Run,
}

#[derive(Subcommand)]
enum Command {
    /// Write the block-construction condition for a set of ordinals.
    Bootstrap {
        #[arg(long, value_delimiter = ',', required = true)]
        w: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        iota: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a condition, a branching chain or a generic run.
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Condition)]
        kind: Kind,
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Threshold of the default order-model oracle.
        #[arg(long)]
        theta: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Decide whether `--other` is stronger than `--input`.
    Leq {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        other: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Add an ordinal, optionally continuing until n > min-n and M > min-M.
    Extend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        beta: usize,
        #[arg(long = "min-n")]
        min_n: Option<usize>,
        #[arg(long = "min-M")]
        min_m: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Common extension of two twin conditions.
    Amalgamate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        other: PathBuf,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        theta: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Build an increasing chain from a seed condition.
    Chain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "add")]
        add: Vec<usize>,
        #[arg(long = "min-n")]
        min_n: Option<usize>,
        #[arg(long = "min-M")]
        min_m: Option<usize>,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        theta: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Branching rank of the structures over a forest.
    Ndrk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        iota: usize,
        #[arg(long = "max-u", default_value_t = 3)]
        max_u: usize,
        #[arg(long = "per-structure")]
        per_structure: bool,
        /// Write a longest branching chain here.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Overlap of two translates of a forest's top level, or of every pair
    /// of a generic run.
    Overlap {
        #[arg(long, required_unless_present = "run")]
        input: Option<PathBuf>,
        #[arg(long, requires = "input")]
        x: Option<BitVec>,
        #[arg(long, requires = "input")]
        y: Option<BitVec>,
        #[arg(long, conflicts_with = "input")]
        run: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Search for k common points of two translates.
    Stnd {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        x: BitVec,
        #[arg(long)]
        y: BitVec,
        /// Truncate the forest to this depth first; x and y are cut to match.
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Threshold ranks of all small subsets of a model.
    Rank {
        #[arg(long, required_unless_present = "order")]
        input: Option<PathBuf>,
        /// Use the order model on this many elements.
        #[arg(long, conflicts_with = "input")]
        order: Option<usize>,
        #[arg(long)]
        theta: usize,
        #[arg(long = "max-w", default_value_t = 2)]
        max_w: usize,
        #[arg(long)]
        star: bool,
        #[arg(long)]
        eps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Translation recovery and pair-family checks over GF(2).
    Lemma43 {
        #[command(subcommand)]
        part: LemmaPart,
    },
}

#[derive(Subcommand)]
enum LemmaPart {
    /// Find x with A + x ⊆ B.
    Translate {
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<BitVec>,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<BitVec>,
        #[command(flatten)]
        common: Common,
    },
    /// Check that each pair x:y has the form {b, b + b*}.
    Pairs {
        #[arg(long)]
        bstar: BitVec,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<BitVec>,
        #[arg(long, value_delimiter = ',', required = true)]
        pairs: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Random trials of translation recovery against a full sweep.
    Sample {
        #[arg(long, default_value_t = 8)]
        ell: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Report assembly shared by every subcommand.
struct Ctx {
    common: Common,
    command: Vec<String>,
    inputs: BTreeMap<String, String>,
    started: Instant,
}

enum Outcome {
    Ok(Value, Vec<String>),
    Fail(Value, Vec<String>),
}

impl Ctx {
    fn read_bytes(&mut self, path: &Path) -> Result<Vec<u8>, Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::parse(format!("cannot read {}: {e}", path.display())))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }

    fn read_json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T, Error> {
        let bytes = self.read_bytes(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::parse(format!("{}: {e}", path.display())))
    }

    fn emit(&self, outcome: &Outcome) {
        let (ok, result, lines) = match outcome {
            Outcome::Ok(v, l) => (true, v, l),
            Outcome::Fail(v, l) => (false, v, l),
        };
        match self.common.format {
            Format::Text => {
                for l in lines {
                    println!("{l}");
                }
                if self.common.timing {
                    println!("elapsed_ms: {}", self.started.elapsed().as_millis());
                }
            }
            Format::Json => {
                let mut report = json!({
                    "schema": SCHEMA,
                    "tool": format!("overlap-lab {}", env!("CARGO_PKG_VERSION")),
                    "command": self.command,
                    "inputs": self.inputs,
                    "ok": ok,
                    "result": result,
                });
                if self.common.timing {
                    report["elapsed_ms"] = json!(self.started.elapsed().as_millis() as u64);
                }
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::usage(format!("cannot write {}: {e}", path.display())))
}

fn diag_lines(d: &[Diagnostic]) -> Vec<String> {
    d.iter().map(|d| d.to_string()).collect()
}

// The order model on `size` elements, threshold `size` unless given.
fn default_oracle(size: usize, theta: Option<usize>) -> Result<RankOracle, Error> {
    RankOracle::order(size, theta.unwrap_or(size))
}

fn load_oracle(
    ctx: &mut Ctx,
    path: &Option<PathBuf>,
    theta: Option<usize>,
    ordinals: impl Iterator<Item = usize>,
) -> Result<RankOracle, Error> {
    match path {
        Some(p) => ctx.read_json(p),
        None => default_oracle(ordinals.max().map_or(1, |m| m + 1), theta),
    }
}

fn condition_summary(p: &Condition) -> Value {
    json!({ "w": p.w, "n": p.n, "M": p.tree_count(), "iota": p.iota })
}

fn run(cmd: Command, ctx: &mut Ctx) -> Result<Outcome, Error> {
    match cmd {
        Command::Bootstrap { w, iota, output, .. } => {
            let p = bootstrap(&w, iota)?;
            if let Some(out) = &output {
                write_json(out, &p)?;
            }
            let lines = vec![format!(
                "bootstrap: |w| = {}, iota = {}, n = {}, M = {}",
                p.w.len(),
                p.iota,
                p.n,
                p.tree_count()
            )];
            let mut v = condition_summary(&p);
            if output.is_none() {
                v["condition"] = serde_json::to_value(&p).expect("serializes");
                if ctx.common.format == Format::Text {
                    return Ok(Outcome::Ok(
                        v,
                        vec![serde_json::to_string_pretty(&p).expect("serializes")],
                    ));
                }
            }
            Ok(Outcome::Ok(v, lines))
        }
        Command::Validate {
            input,
            kind,
            oracle,
            theta,
            ..
        } => match kind {
            Kind::Condition => {
                let p: Condition = ctx.read_json(&input)?;
                let o = load_oracle(ctx, &oracle, theta, p.w.iter().copied())?;
                let d = validate_condition(&p, &o);
                let mut lines = vec![format!("oracle: {}", o.describe())];
                lines.extend(diag_lines(&d));
                lines.push(if d.is_empty() {
                    "valid".into()
                } else {
                    format!("invalid ({} diagnostics)", d.len())
                });
                let v = json!({ "valid": d.is_empty(), "oracle": o.describe(), "diagnostics": d });
                Ok(if d.is_empty() {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                })
            }
            Kind::Chain => {
                let c: ChainWitness = ctx.read_json(&input)?;
                let d = check_chain(&c);
                let mut lines = diag_lines(&d);
                lines.push(if d.is_empty() {
                    "valid chain".into()
                } else {
                    "invalid chain".into()
                });
                let v = json!({ "valid": d.is_empty(), "diagnostics": d });
                Ok(if d.is_empty() {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                })
            }
            Kind::Run => {
                let r: GenericRun = ctx.read_json(&input)?;
                let d = verify_run(&r);
                let mut lines = diag_lines(&d);
                lines.push(if d.is_empty() {
                    "valid run".into()
                } else {
                    "invalid run".into()
                });
                let v = json!({ "valid": d.is_empty(), "diagnostics": d });
                Ok(if d.is_empty() {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                })
            }
        },
        Command::Leq { input, other, .. } => {
            let p: Condition = ctx.read_json(&input)?;
            let q: Condition = ctx.read_json(&other)?;
            let b = leq(&p, &q);
            let v = json!({ "leq": b });
            let lines = vec![format!("leq: {b}")];
            Ok(if b {
                Outcome::Ok(v, lines)
            } else {
                Outcome::Fail(v, lines)
            })
        }
        Command::Extend {
            input,
            beta,
            min_n,
            min_m,
            output,
            ..
        } => {
            let p: Condition = ctx.read_json(&input)?;
            let q = if min_n.is_some() || min_m.is_some() {
                let start = p.w.iter().copied().chain([beta]).max().unwrap_or(0) + 1;
                extend_dense(&p, beta, min_n.unwrap_or(0), min_m.unwrap_or(0), &mut (start..))?
            } else {
                extend_add_element(&p, beta)?
            };
            if let Some(out) = &output {
                write_json(out, &q)?;
            }
            let lines = vec![format!(
                "extended: w = {:?}, n = {} (+{}), M = {} (+{})",
                q.w,
                q.n,
                q.n - p.n,
                q.tree_count(),
                q.tree_count() - p.tree_count()
            )];
            Ok(Outcome::Ok(condition_summary(&q), lines))
        }
        Command::Amalgamate {
            input,
            other,
            oracle,
            theta,
            output,
            ..
        } => {
            let p1: Condition = ctx.read_json(&input)?;
            let p2: Condition = ctx.read_json(&other)?;
            let o = load_oracle(ctx, &oracle, theta, p1.w.iter().chain(&p2.w).copied())?;
            if check_twin(&p1, &p2, &o)?.is_none() {
                return Err(Error::usage("the conditions are not twins"));
            }
            let q = amalgamate(&p1, &p2, &o)?;
            if let Some(out) = &output {
                write_json(out, &q)?;
            }
            let lines = vec![format!(
                "amalgamated: w = {:?}, n = {}, M = {}",
                q.w,
                q.n,
                q.tree_count()
            )];
            Ok(Outcome::Ok(condition_summary(&q), lines))
        }
        Command::Chain {
            input,
            add,
            min_n,
            min_m,
            oracle,
            theta,
            output,
            ..
        } => {
            let seed: Condition = ctx.read_json(&input)?;
            let mut schedule: Vec<ScheduleStep> = add.iter().map(|&beta| ScheduleStep { beta, n0: 0, m0: 0 }).collect();
            if min_n.is_some() || min_m.is_some() {
                let beta = match schedule.pop() {
                    Some(s) => s.beta,
                    None => seed.w.iter().chain(&add).max().copied().unwrap_or(0) + 1,
                };
                schedule.push(ScheduleStep {
                    beta,
                    n0: min_n.unwrap_or(0),
                    m0: min_m.unwrap_or(0),
                });
            }
            // The ordinals the chain will use, found by running the schedule
            // once without validation.
            let mut reach: Vec<usize> = seed.w.clone();
            {
                let top = seed
                    .w
                    .iter()
                    .chain(schedule.iter().map(|s| &s.beta))
                    .max()
                    .copied()
                    .unwrap_or(0);
                let mut fresh = top + 1..;
                let mut cur = seed.clone();
                for s in &schedule {
                    cur = extend_dense(&cur, s.beta, s.n0, s.m0, &mut fresh)?;
                }
                reach.extend(cur.w);
            }
            let o = load_oracle(ctx, &oracle, theta, reach.into_iter())?;
            let run = build_chain(&seed, &schedule, &o)?;
            if let Some(out) = &output {
                write_json(out, &run)?;
            }
            let last = run.chain.last().expect("nonempty");
            let min_overlap = run.certificates.iter().map(|c| c.overlap).min();
            let mut lines = vec![
                format!(
                    "chain of {} conditions; final w = {:?}, n = {}, M = {}",
                    run.chain.len(),
                    last.w,
                    last.n,
                    last.tree_count()
                ),
                format!("oracle: {}", run.oracle),
            ];
            for c in &run.certificates {
                lines.push(format!("overlap({}, {}) = {}", c.alpha, c.beta, c.overlap));
            }
            let v = json!({
                "length": run.chain.len(),
                "final": condition_summary(last),
                "oracle": run.oracle,
                "min_overlap": min_overlap,
                "certificates": run.certificates.iter().map(|c| json!([c.alpha, c.beta, c.overlap])).collect::<Vec<_>>(),
            });
            Ok(Outcome::Ok(v, lines))
        }
        Command::Ndrk {
            input,
            iota,
            max_u,
            per_structure,
            witness,
            ..
        } => {
            let f: Forest = ctx.read_json(&input)?;
            let table = RankTable::build(&f, iota, max_u)?;
            let mut lines = vec![format!("structures: {}", table.len()), format!("NDRK: {}", table.sup())];
            let mut v = json!({ "structures": table.len(), "ndrk": table.sup() });
            if per_structure {
                let rows: Vec<Value> = table
                    .structures()
                    .iter()
                    .zip(table.ranks())
                    .map(|(m, r)| json!({ "ell": m.ell(), "u": m.u(), "rank": r }))
                    .collect();
                for (m, r) in table.structures().iter().zip(table.ranks()) {
                    let u: Vec<String> = m.u().iter().map(|x| x.to_string()).collect();
                    lines.push(format!("ell={} u={{{}}} rank={r}", m.ell(), u.join(",")));
                }
                v["per_structure"] = json!(rows);
            }
            if let Some(out) = &witness {
                let c = ChainWitness {
                    chain: table.longest_branching_chain(),
                    forest: f.clone(),
                };
                let certs = extract_perfect_witness(&c)?;
                write_json(out, &c)?;
                lines.push(format!(
                    "witness chain of length {} with {} pair certificates",
                    c.chain.len(),
                    certs.certificates.len()
                ));
                v["witness_length"] = json!(c.chain.len());
            }
            Ok(Outcome::Ok(v, lines))
        }
        Command::Overlap { input, x, y, run, .. } => {
            if let Some(path) = run {
                let r: GenericRun = ctx.read_json(&path)?;
                let d = verify_run(&r);
                let mut lines: Vec<String> = r
                    .certificates
                    .iter()
                    .map(|c| format!("overlap({}, {}) = {}", c.alpha, c.beta, c.overlap))
                    .collect();
                lines.extend(diag_lines(&d));
                let v = json!({ "valid": d.is_empty(), "diagnostics": d });
                return Ok(if d.is_empty() {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                });
            }
            let path = input.expect("clap enforces input");
            let f: Forest = ctx.read_json(&path)?;
            let (Some(x), Some(y)) = (x, y) else {
                return Err(Error::usage("--x and --y are required with --input"));
            };
            let o = f.overlap(&x, &y)?;
            Ok(Outcome::Ok(
                json!({ "overlap": o, "even": o % 2 == 0 }),
                vec![format!("overlap: {o}")],
            ))
        }
        Command::Stnd {
            input, k, x, y, depth, ..
        } => {
            let mut f: Forest = ctx.read_json(&input)?;
            let (mut x, mut y) = (x, y);
            if let Some(d) = depth {
                f = f.truncate(d)?;
                if x.len() < d || y.len() < d {
                    return Err(Error::usage("x and y must be at least as long as the depth"));
                }
                x = x.prefix(d);
                y = y.prefix(d);
            }
            let w = f.stnd_witness(k, &x, &y)?;
            let holds = w.is_some();
            let mut lines = vec![format!("stnd_{k}: {holds}")];
            if let Some(pts) = &w {
                for (z, a, b) in pts {
                    lines.push(format!("z = {z} via trees {a}, {b}"));
                }
            }
            let v = json!({ "holds": holds, "witness": w });
            Ok(Outcome::Ok(v, lines))
        }
        Command::Rank {
            input,
            order,
            theta,
            max_w,
            star,
            eps,
            ..
        } => {
            let model: FiniteModel = match (input, order) {
                (Some(p), _) => ctx.read_json(&p)?,
                (None, Some(n)) => order_model(n)?,
                (None, None) => return Err(Error::usage("give --input or --order")),
            };
            let params = RankParams::new(theta, max_w)?;
            let mut engine = RankEngine::new(&model, theta)?;
            let mut rows = Vec::new();
            let mut lines = vec![format!("θ-ranks with θ = {theta} on a model of size {}", model.size())];
            for w in subsets_up_to(model.size(), max_w) {
                let rk = engine.rk(&w)?;
                let mut row = json!({ "w": w, "rk": rk });
                let mut line = format!("{w:?}\trk={rk}");
                if star {
                    let s = engine.rk_star(&w)?;
                    row["rk_star"] = json!(s);
                    line.push_str(&format!("\trk*={s}"));
                }
                rows.push(row);
                lines.push(line);
            }
            let mut v = json!({ "semantics": "theta-rank", "theta": theta, "max_w": max_w, "rows": rows });
            if let Some(e) = eps {
                let npr = npr_check(&model, e, &params)?;
                v["npr"] = json!(npr);
                lines.push(format!("all ranks below {e}: {npr}"));
            }
            Ok(Outcome::Ok(v, lines))
        }
        Command::Lemma43 { part } => match part {
            LemmaPart::Translate { a, b, .. } => {
                let x = solve_translate(&a, &b)?;
                let lines = vec![match &x {
                    Some(x) => format!("x = {x}"),
                    None => "no translation".into(),
                }];
                let v = json!({ "x": x });
                Ok(if x.is_some() {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                })
            }
            LemmaPart::Pairs { bstar, b, pairs, .. } => {
                let parsed = pairs
                    .iter()
                    .map(|s| {
                        let (x, y) = s
                            .split_once(':')
                            .ok_or_else(|| Error::parse(format!("pair {s:?} is not of the form x:y")))?;
                        Ok((x.parse()?, y.parse()?))
                    })
                    .collect::<Result<Vec<(BitVec, BitVec)>, Error>>()?;
                let ok = check_pair_family(&bstar, &b, &parsed)?;
                let v = json!({ "family": ok });
                let lines = vec![format!("pairs of the form {{b, b + b*}}: {ok}")];
                Ok(if ok {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                })
            }
            LemmaPart::Sample { ell, trials, common } => {
                if !(1..=16).contains(&ell) {
                    return Err(Error::usage("--ell must be between 1 and 16"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
                let (mut run, mut agree) = (0usize, 0usize);
                while run < trials {
                    let size = rng.gen_range(5..=7.min(ell));
                    if size > ell || ell < 5 {
                        return Err(Error::usage("--ell must be at least 5"));
                    }
                    let b: Vec<BitVec> = (0..size).map(|_| BitVec::from_fn(ell, |_| rng.gen_bool(0.5))).collect();
                    if !is_independent(&b)? {
                        continue;
                    }
                    let x = BitVec::from_fn(ell, |_| rng.gen_bool(0.5));
                    let a: Vec<BitVec> = b.iter().map(|v| v + &x).collect();
                    let sweep: Vec<BitVec> = (0..1u64 << ell)
                        .map(|v| BitVec::from_u64(ell, v))
                        .filter(|t| a.iter().all(|v| b.contains(&(v + t))))
                        .collect();
                    run += 1;
                    if solve_translate(&a, &b)? == Some(x.clone()) && sweep == vec![x] {
                        agree += 1;
                    }
                }
                let v = json!({ "trials": trials, "agree": agree, "seed": common.seed });
                let lines = vec![format!(
                    "{agree}/{trials} trials recovered the shift (seed {})",
                    common.seed
                )];
                Ok(if agree == trials {
                    Outcome::Ok(v, lines)
                } else {
                    Outcome::Fail(v, lines)
                })
            }
        },
    }
}

fn common_of(cmd: &Command) -> Common {
    match cmd {
        Command::Bootstrap { common, .. }
        | Command::Validate { common, .. }
        | Command::Leq { common, .. }
        | Command::Extend { common, .. }
        | Command::Amalgamate { common, .. }
        | Command::Chain { common, .. }
        | Command::Ndrk { common, .. }
        | Command::Overlap { common, .. }
        | Command::Stnd { common, .. }
        | Command::Rank { common, .. } => common.clone(),
        Command::Lemma43 { part } => match part {
            LemmaPart::Translate { common, .. }
            | LemmaPart::Pairs { common, .. }
            | LemmaPart::Sample { common, .. } => common.clone(),
        },
    }
}

fn main() -> ExitCode {
    if let Ok(t) = std::env::var("OVERLAP_LAB_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("OVERLAP_LAB_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let common = common_of(&cli.command);
    let mut ctx = Ctx {
        common,
        command: std::env::args().skip(1).collect(),
        inputs: BTreeMap::new(),
        started: Instant::now(),
    };
    match run(cli.command, &mut ctx) {
        Ok(outcome) => {
            ctx.emit(&outcome);
            match outcome {
                Outcome::Ok(..) => ExitCode::SUCCESS,
                Outcome::Fail(..) => ExitCode::from(1),
            }
        }
        Err(e) => {
            let code = match e {
                Error::Internal(_) => 1,
                _ => 2,
            };
            if ctx.common.format == Format::Json {
                let report = json!({
                    "schema": SCHEMA,
                    "command": ctx.command,
                    "ok": false,
                    "error": e.to_string(),
                });
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            eprintln!("{e}");
            ExitCode::from(code)
        }
    }
}
