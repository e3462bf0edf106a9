//! Command-line front end: absorption and extraction sweeps, analytic
//! bounds, multi-set composition and state-set export.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::absorption::{absorb, log2};
use crate::cache::{Block, Observation, Policy};
use crate::error::{Error, Result};
use crate::extraction::{
    cache_leakage, compose_sets, leakage_bound, max_leakage, AttackerKind, SearchLimits,
    DEFAULT_MAX_NODES,
};
use crate::mealy::ToyMachine;
use crate::statesets::{generate, import_stateset, InitialStatus, StateSet};

pub const BUDGET_ENV: &str = "CACHELEAK_BUDGET_NODES";

pub const EXIT_OK: i32 = 0;
pub const EXIT_LOWER_BOUND: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

pub const EXTRACT_HEADER: &str =
    "policy,assoc,initial,attacker,footprint,absorption_count,absorption_bits,\
extraction_count,extraction_bits,bound_count,exact,runtime_ms";

#[derive(Parser, Debug)]
#[command(
    name = "cacheleak",
    version,
    about = "Information absorption and extraction of cache replacement policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count the cache states a victim footprint can leave behind.
    Absorb(AbsorbArgs),
    /// Compute the maximum number of knowledge sets a prober can obtain.
    Extract(ExtractArgs),
    /// Multiply per-set counts of independent cache sets.
    Compose(ComposeArgs),
    /// Print the analytic extraction bounds.
    Bound(BoundArgs),
    /// Write a reachable state set as JSON.
    States(StatesArgs),
    /// Map an address to its cache set index.
    SetIndex(SetIndexArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PolicyChoice {
    Fifo,
    Lru,
    Plru,
    All,
}

impl PolicyChoice {
    fn expand(self) -> Vec<Policy> {
        match self {
            PolicyChoice::Fifo => vec![Policy::Fifo],
            PolicyChoice::Lru => vec![Policy::Lru],
            PolicyChoice::Plru => vec![Policy::Plru],
            PolicyChoice::All => Policy::ALL.to_vec(),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum InitialChoice {
    Filled,
    Empty,
    Both,
}

impl InitialChoice {
    fn expand(self) -> Vec<InitialStatus> {
        match self {
            InitialChoice::Filled => vec![InitialStatus::Filled],
            InitialChoice::Empty => vec![InitialStatus::Empty],
            InitialChoice::Both => vec![InitialStatus::Filled, InitialStatus::Empty],
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AttackerChoice {
    Shared,
    Disjoint,
    Both,
}

impl AttackerChoice {
    fn expand(self) -> Vec<AttackerKind> {
        match self {
            AttackerChoice::Shared => vec![AttackerKind::Shared],
            AttackerChoice::Disjoint => vec![AttackerKind::Disjoint],
            AttackerChoice::Both => vec![AttackerKind::Shared, AttackerKind::Disjoint],
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MachineChoice {
    Cache,
    Toy,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "all")]
    policy: PolicyChoice,
    #[arg(long, default_value_t = 4)]
    assoc: usize,
    #[arg(long, default_value_t = 0)]
    fp_min: usize,
    #[arg(long, default_value_t = 7)]
    fp_max: usize,
    #[arg(long, value_enum, default_value = "both")]
    initial: InitialChoice,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl SweepArgs {
    fn footprints(&self) -> Result<std::ops::RangeInclusive<usize>> {
        if self.fp_min > self.fp_max {
            return Err(Error::InvalidConfig(format!(
                "--fp-min {} exceeds --fp-max {}",
                self.fp_min, self.fp_max
            )));
        }
        Ok(self.fp_min..=self.fp_max)
    }
}

#[derive(Args, Debug)]
struct AbsorbArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    /// Also count reachable states by simulation and compare.
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, value_enum, default_value = "both")]
    attacker: AttackerChoice,
    /// Check closed-form absorption against the generated state set.
    #[arg(long)]
    verify: bool,
    /// Cap on expanded knowledge sets per sweep point.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget_nodes: Option<u64>,
    /// Cap on probe length; defaults to 4 * assoc * (fp + 1).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: Option<u64>,
    #[arg(long, value_enum, default_value = "cache")]
    machine: MachineChoice,
    /// Analyze a state set document instead of generating one.
    #[arg(long, value_name = "FILE")]
    import: Option<PathBuf>,
    /// Include an optimal strategy tree per row (JSON output only).
    #[arg(long)]
    witness: bool,
    /// Probe blocks owned by the attacker besides the fillers; defaults to assoc.
    #[arg(long)]
    fresh: Option<usize>,
    /// Report runtime_ms as 0 so output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    /// JSON array or whitespace/comma separated counts; `-` reads stdin.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, value_enum, default_value = "all")]
    policy: PolicyChoice,
    #[arg(long, default_value_t = 4)]
    assoc: usize,
    #[arg(long, value_enum, default_value = "both")]
    attacker: AttackerChoice,
    #[arg(long, default_value_t = 0)]
    fp_min: usize,
    #[arg(long, default_value_t = 7)]
    fp_max: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct StatesArgs {
    #[arg(long, value_enum)]
    policy: PolicyChoice,
    #[arg(long, default_value_t = 4)]
    assoc: usize,
    #[arg(long)]
    fp: usize,
    #[arg(long, value_enum, default_value = "filled")]
    initial: InitialChoice,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SetIndexArgs {
    /// Byte address, decimal or 0x-prefixed hex.
    #[arg(value_parser = parse_address)]
    address: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    line_size: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    sets: u64,
}

fn parse_address(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid address '{s}': {e}"))
}

/// Cache set holding `address` under modular set indexing.
pub fn set_index(address: u64, line_size: u64, sets: u64) -> u64 {
    (address / line_size) % sets
}

/// Node budget resolution: flag, then environment, then the default.
pub fn resolve_budget(flag: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match env {
        None => Ok(DEFAULT_MAX_NODES),
        Some(raw) => match raw.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidConfig(format!(
                "{BUDGET_ENV}='{raw}' is not a positive integer"
            ))),
        },
    }
}

/// Parses a counts document: a JSON array of positive integers, or integers
/// separated by whitespace and commas.
pub fn parse_counts(text: &str) -> Result<Vec<BigUint>> {
    let trimmed = text.trim();
    let tokens: Vec<String> = if trimmed.starts_with('[') {
        let value: Value = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let items = value.as_array().ok_or_else(|| Error::Parse {
            location: "document".into(),
            message: "expected an array".into(),
        })?;
        items
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Number(n) => Ok(n.to_string()),
                Value::String(s) => Ok(s.clone()),
                _ => Err(Error::Parse {
                    location: format!("[{i}]"),
                    message: format!("expected an integer, found {v}"),
                }),
            })
            .collect::<Result<_>>()?
    } else {
        trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::to_owned)
            .collect()
    };
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.parse::<BigUint>().map_err(|_| Error::Parse {
                location: format!("item {i}"),
                message: format!("'{t}' is not a non-negative integer"),
            })
        })
        .collect()
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvariantViolation(_) => EXIT_INVARIANT,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Runs the tool with explicit arguments and budget environment value,
/// writing to the given streams. Returns the process exit code.
pub fn run<I, T>(args: I, env_budget: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Absorb(a) => cmd_absorb(&a, out),
        Command::Extract(a) => cmd_extract(&a, env_budget, out, err),
        Command::Compose(a) => cmd_compose(&a, out),
        Command::Bound(a) => cmd_bound(&a, out),
        Command::States(a) => cmd_states(&a, out),
        Command::SetIndex(a) => writeln!(out, "{}", set_index(a.address, a.line_size, a.sets))
            .map(|_| EXIT_OK)
            .map_err(|e| Error::from(e).into()),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn bits4(x: f64) -> String {
    format!("{x:.4}")
}

fn json_bits(x: f64) -> Value {
    json!((x * 1e4).round() / 1e4)
}

fn json_count(n: &BigUint) -> Value {
    match n.to_u64() {
        Some(v) => json!(v),
        None => json!(n.to_string()),
    }
}

fn emit_json(out: &mut dyn Write, rows: &[Value]) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(rows).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{text}").map_err(Error::from)?;
    Ok(())
}

// policy, initial, footprint, count, bits, simulated count
type AbsorbRow = (Policy, InitialStatus, usize, BigUint, f64, Option<usize>);

fn cmd_absorb(args: &AbsorbArgs, out: &mut dyn Write) -> CliResult {
    let sweep = &args.sweep;
    let fps = sweep.footprints()?;
    let mut points = Vec::new();
    for policy in sweep.policy.expand() {
        policy.validate_assoc(sweep.assoc)?;
        for initial in sweep.initial.expand() {
            for fp in fps.clone() {
                points.push((policy, initial, fp));
            }
        }
    }
    let rows: Vec<Result<AbsorbRow>> = points
        .par_iter()
        .map(|&(policy, initial, fp)| {
            let r = absorb(policy, sweep.assoc, fp, initial)?;
            let oracle = if args.verify {
                Some(generate(policy, sweep.assoc, fp, initial)?.len())
            } else {
                None
            };
            Ok((policy, initial, fp, r.count, r.bits, oracle))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut mismatch = false;
    match sweep.format {
        Format::Csv => {
            let mut header =
                "policy,assoc,initial,footprint,absorption_count,absorption_bits".to_string();
            if args.verify {
                header.push_str(",oracle_count,match");
            }
            writeln!(out, "{header}").map_err(Error::from)?;
            for (policy, initial, fp, count, bits, oracle) in &rows {
                write!(
                    out,
                    "{policy},{},{initial},{fp},{count},{}",
                    sweep.assoc,
                    bits4(*bits)
                )
                .map_err(Error::from)?;
                if let Some(o) = oracle {
                    let ok = BigUint::from(*o) == *count;
                    mismatch |= !ok;
                    write!(out, ",{o},{ok}").map_err(Error::from)?;
                }
                writeln!(out).map_err(Error::from)?;
            }
        }
        Format::Json => {
            let values: Vec<Value> = rows
                .iter()
                .map(|(policy, initial, fp, count, bits, oracle)| {
                    let mut v = json!({
                        "policy": policy.name(),
                        "assoc": sweep.assoc,
                        "initial": initial.name(),
                        "footprint": fp,
                        "absorption_count": json_count(count),
                        "absorption_bits": json_bits(*bits),
                    });
                    if let Some(o) = oracle {
                        let ok = BigUint::from(*o) == *count;
                        mismatch |= !ok;
                        v["oracle_count"] = json!(o);
                        v["match"] = json!(ok);
                    }
                    v
                })
                .collect();
            emit_json(out, &values)?;
        }
    }
    if mismatch {
        return Err(Failure {
            code: EXIT_INVARIANT,
            message: "closed-form count differs from the simulated reachable set".into(),
        });
    }
    Ok(EXIT_OK)
}

#[derive(Debug)]
struct ExtractRow {
    policy: String,
    assoc: Option<usize>,
    initial: String,
    attacker: String,
    footprint: Option<usize>,
    absorption: BigUint,
    extraction: u64,
    bound: Option<BigUint>,
    exact: bool,
    runtime_ms: u128,
    witness: Option<Value>,
    oracle: Option<usize>,
}

impl ExtractRow {
    fn csv(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            opt(self.assoc),
            self.initial,
            self.attacker,
            opt(self.footprint),
            self.absorption,
            bits4(log2(&self.absorption)),
            self.extraction,
            bits4((self.extraction as f64).log2()),
            self.bound
                .as_ref()
                .map(|b| b.to_string())
                .unwrap_or_default(),
            self.exact,
            self.runtime_ms
        )
    }

    fn json(&self) -> Value {
        let mut v = json!({
            "policy": self.policy,
            "assoc": self.assoc,
            "initial": self.initial,
            "attacker": self.attacker,
            "footprint": self.footprint,
            "absorption_count": json_count(&self.absorption),
            "absorption_bits": json_bits(log2(&self.absorption)),
            "extraction_count": self.extraction,
            "extraction_bits": json_bits((self.extraction as f64).log2()),
            "bound_count": self.bound.as_ref().map(json_count),
            "exact": self.exact,
            "runtime_ms": self.runtime_ms as u64,
        });
        if let Some(o) = self.oracle {
            v["oracle_count"] = json!(o);
        }
        if let Some(w) = &self.witness {
            v["witness"] = w.clone();
        }
        v
    }

    fn check(&self) -> std::result::Result<(), String> {
        let extraction = BigUint::from(self.extraction);
        if extraction > self.absorption {
            return Err(format!(
                "extraction {} exceeds absorption {} ({})",
                self.extraction,
                self.absorption,
                self.label()
            ));
        }
        if let Some(b) = &self.bound {
            if extraction > *b {
                return Err(format!(
                    "extraction {} exceeds bound {b} ({})",
                    self.extraction,
                    self.label()
                ));
            }
        }
        if let Some(o) = self.oracle {
            if BigUint::from(o) != self.absorption {
                return Err(format!(
                    "closed-form absorption {} differs from {o} reachable states ({})",
                    self.absorption,
                    self.label()
                ));
            }
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!(
            "{} assoc={:?} {} {} fp={:?}",
            self.policy, self.assoc, self.initial, self.attacker, self.footprint
        )
    }
}

enum Source {
    Generated(Policy, InitialStatus, usize),
    Imported(std::sync::Arc<StateSet>),
}

fn cache_row(
    source: &Source,
    assoc: usize,
    kind: AttackerKind,
    args: &ExtractArgs,
    budget: u64,
) -> Result<ExtractRow> {
    let started = Instant::now();
    let (set, initial, absorption) = match source {
        Source::Generated(policy, initial, fp) => {
            let set = generate(*policy, assoc, *fp, *initial)?;
            let absorption = absorb(*policy, assoc, *fp, *initial)?.count;
            (std::borrow::Cow::Owned(set), initial.name(), absorption)
        }
        Source::Imported(set) => {
            let n = BigUint::from(set.len());
            (std::borrow::Cow::Borrowed(set.as_ref()), "imported", n)
        }
    };
    let fp = set.universe().footprint();
    let mut limits = SearchLimits::for_cache(assoc, fp);
    limits.max_nodes = budget;
    if let Some(d) = args.max_depth {
        limits.max_depth = Some(d as usize);
    }
    limits.witness = args.witness;
    let fresh = args.fresh.unwrap_or(assoc);
    let (result, machine, _) = cache_leakage(&set, kind, fresh, &limits)?;
    let witness = result.witness.as_ref().map(|w| {
        let u = machine.universe();
        w.to_json(&|b: &Block| u.name(*b).to_owned(), &|o: &Observation| {
            o.to_string()
        })
    });
    let bound = leakage_bound(set.policy(), assoc, kind, fp)?
        .finite()
        .cloned();
    let oracle = match source {
        Source::Generated(..) if args.verify => Some(set.len()),
        _ => None,
    };
    Ok(ExtractRow {
        policy: set.policy().name().to_owned(),
        assoc: Some(assoc),
        initial: initial.to_owned(),
        attacker: kind.name().to_owned(),
        footprint: Some(fp),
        absorption,
        extraction: result.r_max,
        bound,
        exact: result.exact,
        runtime_ms: if args.no_timing {
            0
        } else {
            started.elapsed().as_millis()
        },
        witness,
        oracle,
    })
}

fn toy_row(args: &ExtractArgs, budget: u64) -> Result<ExtractRow> {
    let started = Instant::now();
    let limits = SearchLimits {
        max_nodes: budget,
        max_depth: args.max_depth.map(|d| d as usize),
        witness: args.witness,
        shortest: true,
        ..SearchLimits::default()
    };
    let states = ToyMachine.states();
    let result = max_leakage(&ToyMachine, &states, &ToyMachine.inputs(), &limits)?;
    let witness = result
        .witness
        .as_ref()
        .map(|w| w.to_json(&|i: &u8| i.to_string(), &|o: &u8| o.to_string()));
    Ok(ExtractRow {
        policy: "toy".into(),
        assoc: None,
        initial: String::new(),
        attacker: String::new(),
        footprint: None,
        absorption: BigUint::from(states.len()),
        extraction: result.r_max,
        bound: None,
        exact: result.exact,
        runtime_ms: if args.no_timing {
            0
        } else {
            started.elapsed().as_millis()
        },
        witness,
        oracle: None,
    })
}

fn cmd_extract(
    args: &ExtractArgs,
    env_budget: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult {
    let sweep = &args.sweep;
    if args.witness && sweep.format != Format::Json {
        return Err(Error::InvalidConfig("--witness requires --format json".into()).into());
    }
    if args.machine == MachineChoice::Toy && args.import.is_some() {
        return Err(
            Error::InvalidConfig("--import applies to the cache machine only".into()).into(),
        );
    }
    let budget = resolve_budget(args.budget_nodes, env_budget)?;

    let rows: Vec<ExtractRow> = match (args.machine, &args.import) {
        (MachineChoice::Toy, _) => vec![toy_row(args, budget)?],
        (MachineChoice::Cache, Some(path)) => {
            let set = std::sync::Arc::new(import_stateset(path)?);
            let assoc = set.assoc();
            let source = Source::Imported(set);
            args.attacker
                .expand()
                .into_iter()
                .map(|kind| cache_row(&source, assoc, kind, args, budget))
                .collect::<Result<_>>()?
        }
        (MachineChoice::Cache, None) => {
            let fps = sweep.footprints()?;
            let mut points = Vec::new();
            for policy in sweep.policy.expand() {
                policy.validate_assoc(sweep.assoc)?;
                for initial in sweep.initial.expand() {
                    for kind in args.attacker.expand() {
                        for fp in fps.clone() {
                            points.push((Source::Generated(policy, initial, fp), kind));
                        }
                    }
                }
            }
            let rows: Vec<Result<ExtractRow>> = points
                .par_iter()
                .map(|(source, kind)| cache_row(source, sweep.assoc, *kind, args, budget))
                .collect();
            rows.into_iter().collect::<Result<_>>()?
        }
    };

    match sweep.format {
        Format::Csv => {
            writeln!(out, "{EXTRACT_HEADER}").map_err(Error::from)?;
            for row in &rows {
                writeln!(out, "{}", row.csv()).map_err(Error::from)?;
            }
        }
        Format::Json => {
            let values: Vec<Value> = rows.iter().map(ExtractRow::json).collect();
            emit_json(out, &values)?;
        }
    }

    let violations: Vec<String> = rows.iter().filter_map(|r| r.check().err()).collect();
    if !violations.is_empty() {
        for v in &violations {
            let _ = writeln!(err, "invariant violation: {v}");
        }
        return Ok(EXIT_INVARIANT);
    }
    let inexact: Vec<&ExtractRow> = rows.iter().filter(|r| !r.exact).collect();
    if !inexact.is_empty() {
        for r in inexact {
            let _ = writeln!(err, "lower bound only (budget exhausted): {}", r.label());
        }
        return Ok(EXIT_LOWER_BOUND);
    }
    Ok(EXIT_OK)
}

fn cmd_compose(args: &ComposeArgs, out: &mut dyn Write) -> CliResult {
    let mut text = String::new();
    if args.input.as_os_str() == "-" {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(Error::from)?;
    } else {
        text = std::fs::read_to_string(&args.input)
            .map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    }
    let counts = parse_counts(&text)?;
    let total = compose_sets(&counts)?;
    let bits = log2(&total);
    match args.format {
        Format::Csv => {
            writeln!(out, "sets,total_count,total_bits").map_err(Error::from)?;
            writeln!(out, "{},{total},{}", counts.len(), bits4(bits)).map_err(Error::from)?;
        }
        Format::Json => {
            let v = json!({
                "sets": counts.len(),
                "total_count": json_count(&total),
                "total_bits": json_bits(bits),
            });
            writeln!(out, "{v}").map_err(Error::from)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_bound(args: &BoundArgs, out: &mut dyn Write) -> CliResult {
    if args.fp_min > args.fp_max {
        return Err(Error::InvalidConfig(format!(
            "--fp-min {} exceeds --fp-max {}",
            args.fp_min, args.fp_max
        ))
        .into());
    }
    let mut rows = Vec::new();
    for policy in args.policy.expand() {
        for kind in args.attacker.expand() {
            for fp in args.fp_min..=args.fp_max {
                let bound = leakage_bound(policy, args.assoc, kind, fp)?;
                rows.push((policy, kind, fp, bound.finite().cloned()));
            }
        }
    }
    match args.format {
        Format::Csv => {
            writeln!(
                out,
                "policy,assoc,attacker,footprint,bound_count,bound_bits"
            )
            .map_err(Error::from)?;
            for (policy, kind, fp, bound) in &rows {
                let (count, bits) = match bound {
                    Some(b) => (b.to_string(), bits4(log2(b))),
                    None => (String::new(), String::new()),
                };
                writeln!(out, "{policy},{},{kind},{fp},{count},{bits}", args.assoc)
                    .map_err(Error::from)?;
            }
        }
        Format::Json => {
            let values: Vec<Value> = rows
                .iter()
                .map(|(policy, kind, fp, bound)| {
                    json!({
                        "policy": policy.name(),
                        "assoc": args.assoc,
                        "attacker": kind.name(),
                        "footprint": fp,
                        "bound_count": bound.as_ref().map(json_count),
                        "bound_bits": bound.as_ref().map(|b| json_bits(log2(b))),
                    })
                })
                .collect();
            emit_json(out, &values)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_states(args: &StatesArgs, out: &mut dyn Write) -> CliResult {
    let policies = args.policy.expand();
    let initials = args.initial.expand();
    let (&[policy], &[initial]) = (policies.as_slice(), initials.as_slice()) else {
        return Err(
            Error::InvalidConfig("states needs a single --policy and --initial".into()).into(),
        );
    };
    let set = generate(policy, args.assoc, args.fp, initial)?;
    match &args.output {
        Some(path) => crate::statesets::export_stateset(&set, path)?,
        None => writeln!(out, "{}", set.to_json()).map_err(Error::from)?,
    }
    Ok(EXIT_OK)
}
