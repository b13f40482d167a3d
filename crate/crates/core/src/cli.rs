//! Batch front end: `generate`, `construct`, `chain` and `verify`.
//!
//! Every command writes JSON (atomically, via a temporary file and rename)
//! and is reproducible from its flags and seed. Exit codes: 0 success,
//! 1 validation or construction-check failure, 2 configuration error, 3 I/O error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::NestAlgebra;
use crate::chain::{chain_family, normalize_chain, stabilized_b, stabilized_report, FamilyEntryJson, StabilizedReport};
use crate::construct::{build_b, verify, ConstructError, ConstructionArtifacts, ConstructionChoices, VerifyOptions};
use crate::derivation::{DerivationError, DerivationTable, ValidationReport};
use crate::linalg::CMatrix;
use crate::random;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("derivation table failed validation (max residual {:e})", .0.max_residual)]
    Validation(Box<ValidationReport>),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<ConstructError> for CliError {
    fn from(e: ConstructError) -> Self {
        match e {
            ConstructError::Derivation(DerivationError::Invalid(report)) => CliError::Validation(report),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nestderiv", version, about = "Implementing operators for derivations on nest algebras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random inner derivation table (and its generator).
    Generate(GenerateArgs),
    /// Build b1, c1, b2, c2, b and write the verification report.
    Construct(RunArgs),
    /// Run the per-projection construction along the chain.
    Chain(RunArgs),
    /// Re-check previously written artifacts against a table.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct AlgebraArgs {
    /// Dimension of the space.
    #[arg(long)]
    pub n: Option<usize>,
    /// Invariant subspace dimensions, e.g. `1,2,4`; defaults to `1,2,...,n`.
    #[arg(long, value_delimiter = ',')]
    pub chain: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub algebra: AlgebraArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the zero generator.
    #[arg(long)]
    pub zero: bool,
    /// Validation tolerance stored in the table (default scales with the table).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the generator matrix; defaults next to `--out`.
    #[arg(long)]
    pub generator_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub algebra: AlgebraArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Derivation table JSON; without it an inner derivation is used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Generator matrix JSON: source of the inner derivation when no
    /// `--input` is given, otherwise used for norm bounds and the gauge check.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Chain index of `p` (1-based, interior); defaults to the middle.
    #[arg(long)]
    pub k: Option<usize>,
    /// `xi0` is the basis vector of `p⊥` with this index.
    #[arg(long, default_value_t = 0)]
    pub xi0_index: usize,
    /// `eta1` is the basis vector of `p` with this index.
    #[arg(long, default_value_t = 0)]
    pub eta1_index: usize,
    #[arg(long, default_value_t = 32)]
    pub norm_samples: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Artifacts path (construct only); defaults next to `--out`.
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
    /// Also fail (exit 1) when the triple-rule check fails.
    #[arg(long)]
    pub gate_thm13: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Artifacts JSON as written by `construct`.
    #[arg(long)]
    pub artifacts: PathBuf,
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub norm_samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub gate_thm13: bool,
}

/// Where the derivation of a run comes from.
#[derive(Debug, Clone)]
pub enum Source {
    InnerRandom,
    InnerFile(PathBuf),
    TableFile(PathBuf),
}

/// A resolved run: algebra, derivation, optional generator and tolerance.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub table: DerivationTable,
    pub generator: Option<CMatrix>,
    pub tol: f64,
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Construct(args) => cmd_construct(&args),
        Command::Chain(args) => cmd_chain(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

fn resolve_algebra(args: &AlgebraArgs, fallback_n: Option<usize>) -> Result<NestAlgebra, CliError> {
    let n = args
        .n
        .or(fallback_n)
        .ok_or_else(|| CliError::Config("--n is required".into()))?;
    if n < 2 {
        return Err(CliError::Config(format!("n must be at least 2, got {n}")));
    }
    let chain = args.chain.clone().unwrap_or_else(|| (1..=n).collect());
    NestAlgebra::new(n, chain).map_err(|e| CliError::Config(e.to_string()))
}

fn check_tol(tol: Option<f64>) -> Result<Option<f64>, CliError> {
    match tol {
        Some(t) if !(t.is_finite() && t > 0.0) => Err(CliError::Config(format!("tol must be positive, got {t}"))),
        other => Ok(other),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline, written via temp file and rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    match out {
        Some(path) => write_json_atomic(path, value),
        None => {
            let text = serde_json::to_string_pretty(value).expect("report types serialize");
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }),
                _ => Ok(()),
            }
        }
    }
}

/// `dir/stem.suffix.json` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

fn resolve_run(args: &RunArgs) -> Result<RunConfig, CliError> {
    let tol = check_tol(args.tol)?;
    let generator: Option<CMatrix> = args.generator.as_deref().map(read_json).transpose()?;
    let (source, table, generator) = match (&args.input, generator) {
        (Some(path), generator) => {
            let table: DerivationTable = read_json(path)?;
            if let Some(n) = args.algebra.n {
                if n != table.dim() {
                    return Err(CliError::Config(format!("--n {n} disagrees with table dimension {}", table.dim())));
                }
            }
            (Source::TableFile(path.clone()), table, generator)
        }
        (None, Some(c)) => {
            if !c.is_square() {
                return Err(CliError::Config("generator must be square".into()));
            }
            let alg = resolve_algebra(&args.algebra, Some(c.rows()))?;
            let table = DerivationTable::inner_from(alg, &c).map_err(|e| CliError::Config(e.to_string()))?;
            let path = args.generator.clone().expect("generator path present");
            (Source::InnerFile(path), table, Some(c))
        }
        (None, None) => {
            let alg = resolve_algebra(&args.algebra, None)?;
            let c = random::gaussian_matrix(&mut random::rng(args.seed), alg.dim());
            let table = DerivationTable::inner_from(alg, &c).map_err(|e| CliError::Config(e.to_string()))?;
            (Source::InnerRandom, table, Some(c))
        }
    };
    if let Some(c) = &generator {
        if c.rows() != table.dim() || c.cols() != table.dim() {
            return Err(CliError::Config("generator dimension disagrees with the table".into()));
        }
    }
    if table.dim() < 2 {
        return Err(CliError::Config("n must be at least 2".into()));
    }
    let table = match tol {
        Some(t) => table.with_tol(t),
        None => table,
    };
    let tol = tol.unwrap_or_else(|| VerifyOptions::for_table(&table).tol);
    let table = validated(table)?;
    Ok(RunConfig {
        source,
        table,
        generator,
        tol,
        seed: args.seed,
    })
}

fn validated(table: DerivationTable) -> Result<DerivationTable, CliError> {
    table.into_validated().map_err(|e| match e {
        DerivationError::Invalid(report) => {
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            CliError::Validation(report)
        }
        other => CliError::Config(other.to_string()),
    })
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let tol = check_tol(args.tol)?;
    let alg = resolve_algebra(&args.algebra, None)?;
    let n = alg.dim();
    let c = if args.zero {
        CMatrix::zeros(n, n)
    } else {
        random::gaussian_matrix(&mut random::rng(args.seed), n)
    };
    let mut table = DerivationTable::inner_from(alg, &c).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(t) = tol {
        table = table.with_tol(t);
    }
    let report = table.validate();
    if !report.valid {
        return Err(CliError::Validation(Box::new(report)));
    }
    let generator_path = args.generator_out.clone().unwrap_or_else(|| sibling(&args.out, "generator"));
    write_json_atomic(&args.out, &table)?;
    write_json_atomic(&generator_path, &c)?;
    println!("table: {}", args.out.display());
    println!("generator: {}", generator_path.display());
    println!("basis entries: {}", table.units().len());
    println!("validation max residual: {:e}", report.max_residual);
    Ok(())
}

fn choices_for(table: &DerivationTable, args: &RunArgs) -> Result<ConstructionChoices, CliError> {
    let alg = table.algebra();
    let k = match args.k {
        Some(k) => k,
        None => crate::construct::default_level(alg)?,
    };
    Ok(ConstructionChoices::standard(alg, k, args.xi0_index, args.eta1_index)?)
}

fn gate(report: &crate::construct::VerificationReport, gate_thm13: bool) -> Result<(), CliError> {
    let mut failed = Vec::new();
    if !report.pass.thm11 {
        failed.push("thm11");
    }
    if !report.pass.thm12 {
        failed.push("thm12");
    }
    if gate_thm13 && !report.pass.thm13 {
        failed.push("thm13");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

pub fn cmd_construct(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_run(args)?;
    let choices = choices_for(&cfg.table, args)?;
    let artifacts = build_b(&cfg.table, &choices)?;
    let opts = VerifyOptions {
        tol: cfg.tol,
        generator: cfg.generator.clone(),
        norm_samples: args.norm_samples,
        seed: cfg.seed,
    };
    let report = verify(&cfg.table, &artifacts, &opts)?;
    emit(args.out.as_deref(), &report)?;
    let artifacts_path = args
        .artifacts
        .clone()
        .or_else(|| args.out.as_deref().map(|p| sibling(p, "artifacts")));
    if let Some(path) = artifacts_path {
        write_json_atomic(&path, &artifacts)?;
    }
    gate(&report, args.gate_thm13)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let tol = check_tol(args.tol)?;
    let table: DerivationTable = read_json(&args.input)?;
    let table = match tol {
        Some(t) => table.with_tol(t),
        None => table,
    };
    let tol = tol.unwrap_or_else(|| VerifyOptions::for_table(&table).tol);
    let table = validated(table)?;
    let artifacts: ConstructionArtifacts = read_json(&args.artifacts)?;
    let generator: Option<CMatrix> = args.generator.as_deref().map(read_json).transpose()?;
    let opts = VerifyOptions {
        tol,
        generator,
        norm_samples: args.norm_samples,
        seed: args.seed,
    };
    let report = verify(&table, &artifacts, &opts).map_err(|e| match e {
        ConstructError::Mismatch => CliError::Config("artifacts do not match the table's algebra".into()),
        other => other.into(),
    })?;
    emit(args.out.as_deref(), &report)?;
    gate(&report, args.gate_thm13)
}

#[derive(Debug, Serialize)]
struct StabilizedJson {
    b: CMatrix,
    #[serde(flatten)]
    report: StabilizedReport,
}

#[derive(Debug, Serialize)]
struct ChainOutput {
    family: Vec<FamilyEntryJson>,
    pre_normalization: Vec<FamilyEntryJson>,
    stabilized: StabilizedJson,
    delta_upper: Option<f64>,
    note: Option<String>,
    pass: bool,
}

pub fn cmd_chain(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_run(args)?;
    let family = chain_family(&cfg.table).map_err(|e| match e {
        ConstructError::Irreducible => CliError::Config(e.to_string()),
        other => other.into(),
    })?;
    let normalized = normalize_chain(&family);
    let stabilized = stabilized_report(&cfg.table, &normalized)?;
    let delta_upper = cfg
        .generator
        .as_ref()
        .map(|c| 2.0 * crate::linalg::distance_to_scalars(c, 1e-10).distance);

    let tol = cfg.tol;
    let bounded = delta_upper.is_none_or(|ub| family.max_scalar_modulus() <= ub + tol);
    let pass = normalized.max_pair_gap() <= tol
        && family.max_scalar_residual() <= tol
        && stabilized.residual <= tol
        && stabilized.gauge_residual <= tol
        && bounded;
    let note = (family.members().len() == 1)
        .then(|| "single-member family: no consistency pairs to check".to_string());
    if let Some(n) = &note {
        eprintln!("{n}");
    }
    let output = ChainOutput {
        family: normalized.to_json(),
        pre_normalization: family.to_json(),
        stabilized: StabilizedJson {
            b: stabilized_b(&normalized),
            report: stabilized,
        },
        delta_upper,
        note,
        pass,
    };
    emit(args.out.as_deref(), &output)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Check("chain consistency".into()))
    }
}
