//! Command-line driver: parses flags, runs the library checks and writes a
//! versioned JSON (or text) report.
//!
//! Exit codes: 0 when every check meets its expectation, 1 when a check
//! fails unexpectedly, 2 on usage or configuration errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::axioms::{run_axiom_suite, Builder, CheckConfig, CheckReport, Status};
use crate::choi::{choi_of, min_choi_eigenvalue, teleport_kit};
use crate::error::GptError;
use crate::framework::operational_norm_state;
use crate::linalg::{self, CMat};
use crate::models::{load_model, Model, QuantumModel, TheoryModel};
use crate::reconstruct::{dump, matrix_from_json, matrix_to_json, run_pipeline};
use crate::structure::spectral_decompose;

pub const SCHEMA: &str = "gpt-kit/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "gpt-kit", version, about = "Checks operational-probabilistic models and reconstructs their density-matrix representation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Model descriptor: inline JSON (starting with '{') or a file path.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the axiom and postulate checks on a model.
    CheckAxioms,
    /// Probabilistic teleportation on the canonical maximally entangled state.
    Teleport {
        #[arg(long)]
        d: usize,
    },
    /// Build, fix axes, and verify the standard matrix representation.
    Reconstruct {
        /// Dimension; defaults to the d of a quantum --model.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 5)]
        cap: usize,
        /// Write the fixed representation as JSON to this path.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Spectral decomposition of a density matrix.
    Spectral {
        /// Matrix payload (inline JSON or path).
        #[arg(long)]
        state: String,
    },
    /// Operational norm of a Hermitian matrix viewed as a state-space vector.
    Norm {
        #[arg(long)]
        state: String,
    },
    /// Choi state of a quantum operation given by Kraus operators.
    Choi {
        /// `{"kraus": [matrix, ...]}` (inline JSON or path).
        #[arg(long)]
        channel: String,
    },
}

/// Validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model_descriptor: Option<String>,
    pub check: CheckConfig,
    pub output: Option<PathBuf>,
    pub format: Format,
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl From<GptError> for CliError {
    fn from(e: GptError) -> Self {
        CliError::Failure(e.to_string())
    }
}

fn usage(e: GptError) -> CliError {
    CliError::Usage(e.to_string())
}

/// What a check is expected to report for a given model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Expect {
    Pass,
    FailsPostulate,
    /// Partial results on custom models are reported but not judged.
    Any,
}

impl Expect {
    fn label(self) -> &'static str {
        match self {
            Expect::Pass => "pass",
            Expect::FailsPostulate => "fails-postulate",
            Expect::Any => "any",
        }
    }

    fn met_by(self, r: &CheckReport) -> bool {
        match self {
            Expect::Pass => r.status == Status::Pass,
            Expect::FailsPostulate => r.status == Status::FailsPostulate,
            Expect::Any => true,
        }
    }
}

fn expectation(model: &Model, r: &CheckReport) -> Expect {
    match (model, r.check_name.as_str(), r.status) {
        (Model::Classical(_), "purification", _) => Expect::FailsPostulate,
        (Model::Custom(_), _, Status::Partial) => Expect::Any,
        _ => Expect::Pass,
    }
}

fn read_payload(arg: &str) -> Result<String, CliError> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Usage(format!("cannot read {arg}: {e}")))
    }
}

fn load(cfg: &RunConfig) -> Result<Model, CliError> {
    let Some(desc) = &cfg.model_descriptor else {
        return Err(CliError::Usage("--model is required for this command".into()));
    };
    load_model(&read_payload(desc)?).map_err(usage)
}

fn parse_json(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid JSON payload: {e}")))
}

fn hermitian_payload(arg: &str) -> Result<(QuantumModel, CMat), CliError> {
    let m = matrix_from_json(&parse_json(&read_payload(arg)?)?).map_err(usage)?;
    if !linalg::is_hermitian(&m, 1e-12) {
        return Err(CliError::Usage("matrix payload is not Hermitian".into()));
    }
    if m.nrows() < 2 {
        return Err(CliError::Usage("matrix payload must be at least 2×2".into()));
    }
    Ok((QuantumModel::new(m.nrows()), m))
}

/// One labelled report plus the expectation it was judged against.
struct Judged {
    report: CheckReport,
    expect: Expect,
}

impl Judged {
    fn plain(report: CheckReport) -> Self {
        Judged {
            report,
            expect: Expect::Pass,
        }
    }

    fn ok(&self) -> bool {
        self.expect.met_by(&self.report)
    }

    fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(&self.report).unwrap_or(Value::Null);
        v["expected"] = json!(self.expect.label());
        v
    }
}

fn cmd_check_axioms(cfg: &RunConfig) -> Result<Vec<Judged>, CliError> {
    let model = load(cfg)?;
    Ok(run_axiom_suite(&model, &cfg.check)
        .into_iter()
        .map(|report| Judged {
            expect: expectation(&model, &report),
            report,
        })
        .collect())
}

fn cmd_teleport(cfg: &RunConfig, d: usize) -> Result<Vec<Judged>, CliError> {
    if d < 2 {
        return Err(CliError::Usage(format!("teleportation needs d ≥ 2, got {d}")));
    }
    let b = Builder::new("teleportation", &cfg.check);
    let kit = teleport_kit(d)?;
    let expected = 1.0 / (d * d) as f64;
    let gap = (kit.p - expected).abs();
    let status = if gap <= cfg.check.tol && kit.wiring_residual < 1e-8 {
        Status::Pass
    } else {
        Status::Fail
    };
    let report = b.finish(
        status,
        gap.max(kit.wiring_residual),
        json!({
            "d": d,
            "p": kit.p,
            "expected": expected,
            "wiring_residual": kit.wiring_residual,
        }),
        "success probability and wiring residual",
    );
    Ok(vec![Judged::plain(report)])
}

fn cmd_reconstruct(
    cfg: &RunConfig,
    d: Option<usize>,
    cap: usize,
    dump_path: Option<&Path>,
) -> Result<Vec<Judged>, CliError> {
    let d = match (d, &cfg.model_descriptor) {
        (Some(d), _) => d,
        (None, Some(_)) => match load(cfg)? {
            Model::Quantum(q) => q.d(),
            _ => return Err(CliError::Usage("reconstruction needs a quantum model".into())),
        },
        (None, None) => return Err(CliError::Usage("give --d or a quantum --model".into())),
    };
    if d < 2 {
        return Err(CliError::Usage(format!("reconstruction needs d ≥ 2, got {d}")));
    }
    if d > cap {
        return Err(CliError::Usage(format!("d = {d} exceeds the cap {cap}")));
    }
    let pipeline = run_pipeline(d, &cfg.check)?;
    if let Some(path) = dump_path {
        let text = serde_json::to_string_pretty(&dump(&pipeline.fix.rep)).map_err(GptError::from)?;
        fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(pipeline.reports.into_iter().map(Judged::plain).collect())
}

fn cmd_spectral(cfg: &RunConfig, state: &str) -> Result<Vec<Judged>, CliError> {
    let (q, m) = hermitian_payload(state)?;
    let model = Model::Quantum(q.clone());
    let rho = q.state_from_matrix(&m).map_err(usage)?;
    if !q.contains_state(&rho.coords, 1e-9) || !rho.is_normalized(1e-9) {
        return Err(CliError::Usage("payload is not a density matrix".into()));
    }
    let b = Builder::new("spectral", &cfg.check);
    let dec = spectral_decompose(&model, &rho).map_err(usage)?;
    let residual = dec.reconstruct().distance(&rho);
    let pairs: Vec<Value> = dec
        .probs
        .iter()
        .zip(&dec.pures.states)
        .map(|(p, s)| json!({"p": p, "state": matrix_to_json(&q.matrix(&s.coords))}))
        .collect();
    let witness = json!({
        "eigenpairs": pairs,
        "delta_residual": dec.pures.delta_residual(),
    });
    Ok(vec![Judged::plain(b.verdict(
        residual.max(dec.pures.delta_residual()),
        witness,
        "reconstruction from the decomposition",
    ))])
}

fn cmd_norm(cfg: &RunConfig, state: &str) -> Result<Vec<Judged>, CliError> {
    let (q, m) = hermitian_payload(state)?;
    let coords = q.vectorize(&m).map_err(usage)?;
    let b = Builder::new("norm", &cfg.check);
    let norm = operational_norm_state(&q, &coords)?;
    Ok(vec![Judged::plain(b.finish(
        Status::Pass,
        0.0,
        json!({"d": q.d(), "norm": norm}),
        "sup over effects of |(a|δ)| - (e-a|δ)|",
    ))])
}

fn cmd_choi(cfg: &RunConfig, channel: &str) -> Result<Vec<Judged>, CliError> {
    let v = parse_json(&read_payload(channel)?)?;
    let list = v
        .get("kraus")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Usage("channel payload needs a \"kraus\" array".into()))?;
    let kraus = list
        .iter()
        .map(matrix_from_json)
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let d = kraus.first().map(|k| k.nrows()).ok_or_else(|| CliError::Usage("empty Kraus list".into()))?;
    if d < 2 || kraus.iter().any(|k| k.nrows() != d) {
        return Err(CliError::Usage("Kraus operators must share one dimension ≥ 2".into()));
    }
    let q = QuantumModel::new(d);
    let t = q.kraus_map(&q, &kraus);
    let b = Builder::new("choi", &cfg.check);
    let choi = choi_of(&t)?;
    let mat = choi.matrix()?;
    let min_eig = min_choi_eigenvalue(&t)?;
    let tp = t.channel_residual();
    let witness = json!({
        "d": d,
        "rank": choi.rank(1e-9)?,
        "min_eigenvalue": min_eig,
        "trace_preservation_residual": tp,
        "choi": matrix_to_json(&mat),
    });
    Ok(vec![Judged::plain(b.verdict(
        (-min_eig).max(0.0),
        witness,
        "complete positivity of the Choi state",
    ))])
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::CheckAxioms => "check-axioms",
        Command::Teleport { .. } => "teleport",
        Command::Reconstruct { .. } => "reconstruct",
        Command::Spectral { .. } => "spectral",
        Command::Norm { .. } => "norm",
        Command::Choi { .. } => "choi",
    }
}

fn render(cli_cmd: &str, cfg: &RunConfig, judged: &[Judged]) -> String {
    match cfg.format {
        Format::Json => {
            let v = json!({
                "schema": SCHEMA,
                "command": cli_cmd,
                "seed": cfg.check.seed,
                "reports": judged.iter().map(Judged::to_json).collect::<Vec<_>>(),
            });
            let mut s = serde_json::to_string_pretty(&v).unwrap_or_default();
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = format!("{SCHEMA} {cli_cmd} seed={}\n", cfg.check.seed);
            for j in judged {
                let r = &j.report;
                let mark = if j.ok() { "ok" } else { "UNEXPECTED" };
                s.push_str(&format!(
                    "{:<28} {:<16} residual={:.3e} expected={} {}\n",
                    r.check_name,
                    serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    r.max_residual,
                    j.expect.label(),
                    mark
                ));
            }
            s
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    if cli.tol.is_nan() || cli.tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    if cli.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let cfg = RunConfig {
        model_descriptor: cli.model.clone(),
        check: CheckConfig {
            trials: cli.trials,
            seed: cli.seed,
            tol: cli.tol,
        },
        output: cli.out.clone(),
        format: cli.format,
    };
    let judged = match &cli.command {
        Command::CheckAxioms => cmd_check_axioms(&cfg)?,
        Command::Teleport { d } => cmd_teleport(&cfg, *d)?,
        Command::Reconstruct { d, cap, dump } => cmd_reconstruct(&cfg, *d, *cap, dump.as_deref())?,
        Command::Spectral { state } => cmd_spectral(&cfg, state)?,
        Command::Norm { state } => cmd_norm(&cfg, state)?,
        Command::Choi { channel } => cmd_choi(&cfg, channel)?,
    };
    let text = render(command_name(&cli.command), &cfg, &judged);
    match &cfg.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(judged.iter().all(Judged::ok))
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
