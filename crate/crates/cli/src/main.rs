use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cptensor::fixtures;
use cptensor::generate::{cp_random, notcp_random};
use cptensor::io::{CertificateRecord, Metadata, ResultFile, TensorFile};
use cptensor::pipeline::{check_cp, verify_outcome, CpOptions, CpStatus};

const EXIT_CP: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;
const EXIT_NOT_CP: u8 = 10;
const EXIT_INDETERMINATE: u8 = 20;

/// Decide whether a symmetric tensor is completely positive.
#[derive(Parser)]
#[command(name = "cptensor", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct OutputFlags {
    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Suppress the summary on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Pretty,
}

#[derive(Args)]
struct SolveFlags {
    /// Even degree of the generic objective (default: smallest even number above the order).
    #[arg(long)]
    degree: Option<u32>,
    /// Largest relaxation order to try.
    #[arg(long)]
    kmax: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Singular values below this count as zero in rank tests.
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Tolerance on the localizing conditions of a flat truncation.
    #[arg(long)]
    tol_feas: Option<f64>,
    /// Accepted reconstruction error relative to max(1, largest entry).
    #[arg(long)]
    tol_residual: Option<f64>,
    /// Run the relaxations even when an entry is negative.
    #[arg(long)]
    no_fast_path: bool,
}

impl SolveFlags {
    fn options(&self) -> CpOptions {
        let mut o = CpOptions { degree: self.degree, k_max: self.kmax, seed: self.seed, ..CpOptions::default() };
        if let Some(t) = self.tol_rank {
            o.rank.threshold = t;
        }
        if let Some(t) = self.tol_feas {
            o.tol_feas = t;
        }
        if let Some(t) = self.tol_residual {
            o.tol_residual = t;
        }
        o.fast_path = !self.no_fast_path;
        o
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a tensor file and report a decomposition or a certificate.
    Check {
        /// Tensor file, or `-` for standard input.
        input: PathBuf,
        #[command(flatten)]
        solve: SolveFlags,
    },
    /// Re-check a result file against its tensor.
    Verify { tensor: PathBuf, result: PathBuf },
    /// Write a tensor file.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Args)]
struct Shape {
    #[arg(long, short = 'm', default_value_t = 3)]
    order: usize,
    #[arg(long, short = 'n', default_value_t = 3)]
    dim: usize,
    /// Number of rank-one terms.
    #[arg(long, short = 'r', default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum GenKind {
    /// Sum of outer powers of random nonnegative vectors.
    CpRandom(Shape),
    /// Sum of outer powers of random mixed-sign vectors, never CP.
    NotcpRandom(Shape),
    /// A bundled reference tensor.
    PaperFixture {
        /// Fixture id; `list` prints the known ids.
        id: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: message.into() }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|e| input_error(format!("stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn emit(out: &OutputFlags, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| input_error(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn status_code(s: CpStatus) -> u8 {
    match s {
        CpStatus::CompletelyPositive => EXIT_CP,
        CpStatus::NotCompletelyPositive => EXIT_NOT_CP,
        CpStatus::Indeterminate => EXIT_INDETERMINATE,
    }
}

fn pretty(r: &ResultFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status: {:?}", r.status);
    let _ = writeln!(s, "tensor: order {}, dimension {}, objective degree {}", r.order, r.dim, r.degree);
    if let Some(f) = r.flat_level {
        let _ = writeln!(s, "flat truncation: k = {}, t = {}", f.k, f.t);
    }
    if let Some(res) = r.residual {
        let _ = writeln!(s, "residual: {res:.3e}");
    }
    if let Some(reason) = &r.reason {
        let _ = writeln!(s, "reason: {reason}");
    }
    if let Some(terms) = &r.decomposition {
        let _ = writeln!(s, "decomposition ({} terms):", terms.len());
        for (i, t) in terms.iter().enumerate() {
            let atom: Vec<String> = t.atom.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(s, "  {:>3}  weight {:<12.6}  atom [{}]", i + 1, t.weight, atom.join(", "));
        }
    }
    match &r.certificate {
        Some(CertificateRecord::NegativeEntry { index, value }) => {
            let _ = writeln!(s, "certificate: negative entry A{index:?} = {value:e}");
        }
        Some(CertificateRecord::DualRay { k, verification, .. }) => {
            let _ = writeln!(s, "certificate: dual ray at k = {k}; {verification}");
        }
        None => {}
    }
    if let Some(c) = &r.check {
        let _ = writeln!(s, "check: {} ({})", if c.passed { "passed" } else { "FAILED" }, c.detail);
    }
    let _ = writeln!(s, "levels:");
    for l in &r.levels {
        let _ = writeln!(
            s,
            "  k = {:<2} {:<13} {:>4} iterations {:>8.2} s  {} variables",
            l.k,
            format!("{:?}", l.status),
            l.stats.iterations,
            l.stats.seconds,
            l.num_vars
        );
    }
    s.trim_end().to_string()
}

fn cmd_check(input: &Path, solve: &SolveFlags, out: &OutputFlags) -> Result<u8, Failure> {
    let a = TensorFile::parse(&read_text(input)?)
        .and_then(|f| f.to_tensor())
        .map_err(|e| input_error(format!("{}: {e}", input.display())))?;
    let outcome = check_cp(&a, &solve.options()).map_err(|e| input_error(e.to_string()))?;
    let mut file = ResultFile::from_outcome(&outcome);
    file.check = Some(verify_outcome(&a, &outcome));
    let body = match out.format {
        Format::Json => file.to_json(),
        Format::Pretty => pretty(&file),
    };
    emit(out, &body)?;
    if !out.quiet && (out.format == Format::Json || out.out.is_some()) {
        let extra = match (&file.decomposition, &file.certificate) {
            (Some(d), _) => format!(", {} terms, residual {:.2e}", d.len(), file.residual.unwrap_or(f64::NAN)),
            (_, Some(c)) => format!(", {} certificate", match c {
                CertificateRecord::NegativeEntry { .. } => "negative-entry",
                CertificateRecord::DualRay { .. } => "dual-ray",
            }),
            _ => String::new(),
        };
        eprintln!("{:?}{extra}", file.status);
    }
    Ok(status_code(outcome.status))
}

fn cmd_verify(tensor: &Path, result: &Path, out: &OutputFlags) -> Result<u8, Failure> {
    let a = TensorFile::parse(&read_text(tensor)?)
        .and_then(|f| f.to_tensor())
        .map_err(|e| input_error(format!("{}: {e}", tensor.display())))?;
    let res = ResultFile::parse(&read_text(result)?).map_err(|e| input_error(format!("{}: {e}", result.display())))?;
    if (res.order, res.dim) != (a.order(), a.dim()) {
        return Err(input_error(format!(
            "result is for order {} dimension {}, tensor has order {} dimension {}",
            res.order,
            res.dim,
            a.order(),
            a.dim()
        )));
    }
    let outcome = res.to_outcome().map_err(|e| input_error(format!("{}: {e}", result.display())))?;
    let check = verify_outcome(&a, &outcome);
    let body = match out.format {
        Format::Json => serde_json::to_string_pretty(&check).expect("check serializes"),
        Format::Pretty => format!("{:?}: {} ({})", res.status, if check.passed { "verified" } else { "NOT verified" }, check.detail),
    };
    emit(out, &body)?;
    if !out.quiet && out.format == Format::Json {
        eprintln!("{}", check.detail);
    }
    Ok(if check.passed { 0 } else { EXIT_VERIFY_FAILED })
}

fn cmd_gen(kind: &GenKind, out: &OutputFlags) -> Result<u8, Failure> {
    let file = match kind {
        GenKind::CpRandom(s) | GenKind::NotcpRandom(s) => {
            let cp = matches!(kind, GenKind::CpRandom(_));
            let t = if cp { cp_random(s.order, s.dim, s.rank, s.seed) } else { notcp_random(s.order, s.dim, s.rank, s.seed) }
                .map_err(|e| input_error(e.to_string()))?;
            let name = format!("{} m={} n={} r={} seed={}", if cp { "cp-random" } else { "notcp-random" }, s.order, s.dim, s.rank, s.seed);
            TensorFile::from_tensor(&t, Metadata { name: Some(name), provenance: None })
        }
        GenKind::PaperFixture { id } if id == "list" => {
            emit(out, &fixtures::ids().join("\n"))?;
            return Ok(0);
        }
        GenKind::PaperFixture { id } => {
            let fx = fixtures::load(id).map_err(|e| input_error(e.to_string()))?;
            let t = fx.tensor().map_err(|e| input_error(e.to_string()))?;
            TensorFile::from_tensor(&t, Metadata { name: Some(fx.id.clone()), provenance: Some(fx.description.clone()) })
        }
    };
    emit(out, &file.to_json())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Check { input, solve } => cmd_check(input, solve, &cli.output),
        Command::Verify { tensor, result } => cmd_verify(tensor, result, &cli.output),
        Command::Gen { kind } => cmd_gen(kind, &cli.output),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
