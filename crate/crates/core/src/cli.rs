//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Budget, ControlModel, SystemSpec};
use crate::error::{Error, Result};
use crate::exterior::{additive_compound, compound_matrix, CompoundMatrix};
use crate::linalg::{from_rows, Matrix, TRACE_TOL};
use crate::orthant::{family_invariant_orthants, ORTHANT_TOL};
use crate::verdict::{analyze_degrees, AnalysisReport, Verdict};

pub const DEFAULT_SEED: u64 = 42;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// On-disk description of a system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub d: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default = "unbounded")]
    pub u_model: ControlModel,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
}

fn unbounded() -> ControlModel {
    ControlModel::Unbounded
}

fn field_matrix(name: &str, rows: &[Vec<f64>], d: usize) -> Result<Matrix> {
    if rows.len() != d {
        return Err(Error::Input(format!("field {name}: expected {d} rows, got {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Input(format!(
                "field {name}, row {}: expected {d} entries, got {}",
                i + 1,
                r.len()
            )));
        }
    }
    let m = from_rows(rows).map_err(|e| Error::Input(format!("field {name}: {e}")))?;
    let tr = m.trace();
    if tr.abs() > TRACE_TOL {
        return Err(Error::Input(format!(
            "field {name}: trace is {tr:e}, must be 0 within {TRACE_TOL:e} (A and B live in sl(d,R))"
        )));
    }
    Ok(m)
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("{e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        if self.d < 2 {
            return Err(Error::Input(format!("field d: must be at least 2, got {}", self.d)));
        }
        let a = field_matrix("A", &self.a, self.d)?;
        let b = field_matrix("B", &self.b, self.d)?;
        SystemSpec::new(a, b, self.u_model.clone(), self.seed).map_err(|e| Error::Input(format!("{e}")))
    }

    pub fn budget(&self) -> Result<Budget> {
        let b = self.budget.clone().unwrap_or_default();
        b.validate().map_err(|e| Error::Input(format!("field budget: {e}")))?;
        Ok(b)
    }
}

/// Machine-readable output of `analyze --json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool_version: String,
    pub elapsed_seconds: f64,
    pub report: AnalysisReport,
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("{e}")))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "conelab",
    version,
    about = "Invariant cones in exterior powers and controllability of bilinear systems x' = Ax + uBx",
    after_help = "Default budget: 8 seeds, 400 words per seed, words of length <= 6, t_max = 2,\n\
                  20% heavy-tailed controls, 15% control-flow letters, 25% attractor-refined points\n\
                  (60 iterations), 200 attractor iterations. Override with a \"budget\" object in the system file."
)]
struct Cli {
    /// Override the RNG seed of the system file (file default: 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "CONELAB_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lie algebra rank condition: incremental bracket search and bracket-closure dimension.
    Larc { file: PathBuf },
    /// Print the degree-K compound matrices of A and B.
    Compound {
        file: PathBuf,
        #[arg(long)]
        k: usize,
        /// Additive (Lie algebra) compounds instead of multiplicative ones.
        #[arg(long)]
        additive: bool,
    },
    /// Invariant orthants of the degree-K exterior power.
    Orthants {
        file: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Full analysis and verdict.
    Analyze {
        file: PathBuf,
        /// Analyse a single degree only.
        #[arg(long)]
        k: Option<usize>,
        /// Write the full report with certificates to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Exit with status 1 when the verdict is inconclusive.
        #[arg(long)]
        strict: bool,
    },
    /// Re-check every certificate of a JSON report.
    Verify { report: PathBuf },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::InvalidArgument(_) | Error::Json(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Run the tool on `argv` (program name first). Returns the exit status.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            let _ = writeln!(err, "error: thread count must be positive");
            return 2;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return 1;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(&cli, &mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<(SystemSpec, Budget)> {
    let mut file = SystemFile::load(path)?;
    if let Some(s) = cli.seed {
        file.seed = s;
    }
    Ok((file.to_spec()?, file.budget()?))
}

fn check_k(spec: &SystemSpec, k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        return Err(Error::Input(format!("--k must lie in 1..={max} for d = {}, got {k}", spec.d)));
    }
    Ok(())
}

fn print_compound(out: &mut dyn Write, name: &str, c: &CompoundMatrix) -> Result<()> {
    let labels: Vec<String> = c.table().list().iter().map(|i| i.to_string()).collect();
    writeln!(out, "{name} ({:?}, basis {})", c.kind(), labels.join(" "))?;
    for row in c.entries().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Larc { file } => {
            let (spec, _) = load(cli, file)?;
            let larc = crate::verdict::LarcSummary::compute(&spec)?;
            writeln!(
                out,
                "algorithm1: {}; closure dim: {}/{}",
                larc.algorithm1, larc.closure_dim, larc.target
            )?;
            if larc.disagreement() {
                writeln!(out, "warning: the incremental bracket search and the bracket closure disagree")?;
            }
            Ok(0)
        }
        Command::Compound { file, k, additive } => {
            let (spec, _) = load(cli, file)?;
            check_k(&spec, *k, spec.d)?;
            for (name, m) in [("A", &spec.a), ("B", &spec.b)] {
                let c = if *additive {
                    additive_compound(m, *k)?
                } else {
                    compound_matrix(m, *k)?
                };
                print_compound(out, name, &c)?;
            }
            Ok(0)
        }
        Command::Orthants { file, k } => {
            let (spec, _) = load(cli, file)?;
            check_k(&spec, *k, spec.d - 1)?;
            let certs = family_invariant_orthants(&spec, *k, ORTHANT_TOL)?;
            if certs.is_empty() {
                writeln!(out, "no invariant orthant at k = {k}")?;
            }
            for c in &certs {
                writeln!(out, "invariant orthant at k = {k}: {} (slack {:e})", c.pattern, c.slack)?;
            }
            Ok(0)
        }
        Command::Analyze { file, k, json, strict } => {
            let (spec, budget) = load(cli, file)?;
            let ks: Vec<usize> = match k {
                Some(k) => {
                    check_k(&spec, *k, spec.d - 1)?;
                    vec![*k]
                }
                None => (1..spec.d).collect(),
            };
            let start = Instant::now();
            let report = analyze_degrees(&spec, &budget, &ks)?;
            let elapsed_seconds = start.elapsed().as_secs_f64();
            write!(out, "{}", report.render_text())?;
            if let Some(path) = json {
                let file = ReportFile {
                    tool_version: TOOL_VERSION.to_string(),
                    elapsed_seconds,
                    report: report.clone(),
                };
                std::fs::write(path, file.to_json()?)?;
            }
            Ok(if *strict && report.verdict == Verdict::Inconclusive { 1 } else { 0 })
        }
        Command::Verify { report } => {
            let text = std::fs::read_to_string(report)
                .map_err(|e| Error::Input(format!("cannot read {}: {e}", report.display())))?;
            let file = ReportFile::parse(&text).map_err(|e| Error::Input(format!("{}: {e}", report.display())))?;
            let summary = file.report.verify()?;
            writeln!(
                out,
                "verified: {} orthant and {} non-pointedness certificates; verdict {:?} follows",
                summary.orthant, summary.nonpointed, file.report.verdict
            )?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_errors_name_the_field() {
        let text = r#"{"d": 2, "A": [[0, 1], [1]], "B": [[1, 0], [0, -1]]}"#;
        let err = SystemFile::parse(text).unwrap().to_spec().unwrap_err();
        assert!(err.to_string().contains("field A, row 2"), "{err}");
    }

    #[test]
    fn trace_errors_name_the_field() {
        let text = r#"{"d": 2, "A": [[0, 1], [1, 0]], "B": [[1, 0], [0, 1]]}"#;
        let err = SystemFile::parse(text).unwrap().to_spec().unwrap_err();
        assert!(err.to_string().contains("field B: trace"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = SystemFile::parse("{\n  \"d\": 2,\n  \"A\": [[0, 1] [1, 0]]\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn defaults_fill_in() {
        let f = SystemFile::parse(r#"{"d": 2, "A": [[0, 1], [1, 0]], "B": [[1, 0], [0, -1]]}"#).unwrap();
        assert_eq!(f.seed, 42);
        assert_eq!(f.u_model, ControlModel::Unbounded);
        assert_eq!(f.budget().unwrap(), Budget::default());
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run_cli(["conelab", "frobnicate"], &mut out, &mut err), 2);
        assert_eq!(run_cli(["conelab", "larc", "/nonexistent.json"], &mut out, &mut err), 2);
    }
}
