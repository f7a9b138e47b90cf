//! `idmcov`: batch front-end for the IDM coverage pipeline.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use idmcov_core::eval::{self, Connection, CoverageReport, DbSnapshot};
use idmcov_core::idm::{emit_ddl, parse_schema};
use idmcov_core::mcdc::{derive_all, render_bundle, DeriveOptions};
use idmcov_core::rules::{kind_tally, load_rules, BusinessRule, RuleKind};
use idmcov_core::IdmSchema;

const USAGE: u8 = 1;
const PIPELINE: u8 = 2;
const UNCOVERED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "idmcov", version, about = "Test adequacy of database applications against business rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// IDM schema file
    #[arg(long, global = true, value_name = "FILE")]
    schema: Option<PathBuf>,
    /// Business-rule file; repeat for several assignments
    #[arg(long, global = true, value_name = "FILE")]
    rules: Vec<PathBuf>,
    /// Directory of <Entity>.csv test inputs
    #[arg(long, global = true, value_name = "DIR")]
    dataset: Option<PathBuf>,
    /// IDM database (SQLite path, optionally prefixed with sqlite:)
    #[arg(long, global = true, env = "IDMCOV_DB", value_name = "CONN")]
    db: Option<String>,
    /// Also derive boundary-value coverage rules
    #[arg(long, global = true)]
    boundaries: bool,
    /// Drop existing tables in the target database before loading
    #[arg(long, global = true)]
    replace: bool,
    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    report: Format,
    /// Write the main output here instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Validate the schema and print its DDL
    Schema,
    /// Parse and bind rules, print each rule's kind
    Check,
    /// Write the coverage-rule bundle
    Derive,
    /// Create the IDM database and load the dataset into it
    Load,
    /// Execute coverage rules against the database and report
    Eval,
    /// Schema, rules, dataset and evaluation in one run
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Text,
}

/// Exit status plus message.
struct Failure(u8, String);

fn usage(msg: impl Display) -> Failure {
    Failure(USAGE, msg.to_string())
}

fn pipeline(msg: impl Display) -> Failure {
    Failure(PIPELINE, msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("idmcov: {msg}");
            ExitCode::from(code)
        }
    }
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, cmd: Command) -> Result<&'a T, Failure> {
    v.as_ref().ok_or_else(|| usage(format!("{} needs --{flag}", name(cmd))))
}

fn name(cmd: Command) -> &'static str {
    match cmd {
        Command::Schema => "schema",
        Command::Check => "check",
        Command::Derive => "derive",
        Command::Load => "load",
        Command::Eval => "eval",
        Command::All => "all",
    }
}

/// Checks flags and paths before anything is written.
fn validate_flags(cli: &Cli) -> Result<(), Failure> {
    let cmd = cli.command;
    require(&cli.schema, "schema", cmd)?;
    let needs_rules = matches!(cmd, Command::Check | Command::Derive | Command::Eval | Command::All);
    if needs_rules && cli.rules.is_empty() {
        return Err(usage(format!("{} needs --rules", name(cmd))));
    }
    if matches!(cmd, Command::Load | Command::All) {
        require(&cli.dataset, "dataset", cmd)?;
    }
    if cmd == Command::Load {
        require(&cli.db, "db", cmd)?;
    }
    if cmd == Command::Eval && cli.db.is_none() && cli.dataset.is_none() {
        return Err(usage("eval needs --db or --dataset"));
    }
    let mut files: Vec<&Path> = cli.schema.iter().map(PathBuf::as_path).collect();
    files.extend(cli.rules.iter().map(PathBuf::as_path));
    for f in files {
        if !f.is_file() {
            return Err(usage(format!("{}: no such file", f.display())));
        }
    }
    if let Some(d) = &cli.dataset {
        if !d.is_dir() {
            return Err(usage(format!("{}: no such directory", d.display())));
        }
    }
    if let Some(out) = &cli.out {
        let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(usage(format!("{}: no such directory", parent.display())));
        }
    }
    if cmd == Command::Eval && cli.dataset.is_none() {
        let db = cli.db.as_deref().unwrap_or_default();
        let path = eval::database_path(db);
        if path != ":memory:" && !Path::new(path).is_file() {
            return Err(usage(format!("{db}: database does not exist; run load first or pass --dataset")));
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| pipeline(format!("{}: {e}", path.display())))
}

fn load_schema(path: &Path) -> Result<IdmSchema, Failure> {
    parse_schema(&read(path)?).map_err(|e| pipeline(format!("{}: {e}", path.display())))
}

fn load_business_rules(paths: &[PathBuf], schema: &IdmSchema) -> Result<Vec<BusinessRule>, Failure> {
    let mut all: Vec<(BusinessRule, &Path)> = Vec::new();
    for p in paths {
        let rules = load_rules(&read(p)?, schema).map_err(|e| pipeline(format!("{}: {e}", p.display())))?;
        for r in rules {
            if let Some((_, other)) = all.iter().find(|(o, _)| o.name == r.name) {
                return Err(pipeline(format!("{}: rule {} is also defined in {}", p.display(), r.name, other.display())));
            }
            all.push((r, p));
        }
    }
    Ok(all.into_iter().map(|(r, _)| r).collect())
}

/// Writes to `--out` through a temporary file so a failed run leaves no
/// partial output, or to stdout.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| pipeline(format!("stdout: {e}")))
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| pipeline(format!("{}: {e}", dir.display())))?;
            tmp.write_all(text.as_bytes()).map_err(|e| pipeline(format!("{}: {e}", path.display())))?;
            tmp.persist(path).map_err(|e| pipeline(format!("{}: {}", path.display(), e.error)))?;
            Ok(())
        }
    }
}

/// Materializes the dataset at `target`. A database file created by this
/// call is deleted again if loading fails.
fn load_into(schema: &IdmSchema, dataset: &Path, target: &str, replace: bool) -> Result<(Connection, DbSnapshot), Failure> {
    let snap = eval::load_dataset(schema, dataset).map_err(pipeline)?;
    let path = eval::database_path(target);
    let fresh = path != ":memory:" && !Path::new(path).exists();
    match eval::materialize(schema, &snap, target, replace) {
        Ok(conn) => Ok((conn, snap)),
        Err(e) => {
            if fresh {
                let _ = std::fs::remove_file(path);
            }
            Err(match e {
                eval::DbError::NotEmpty { .. } => usage(e),
                e => pipeline(e),
            })
        }
    }
}

fn tally_line(rules: &[BusinessRule]) -> String {
    RuleKind::ALL.iter().zip(kind_tally(rules)).map(|(k, n)| format!("{}={n}", k.name())).collect::<Vec<_>>().join(" ")
}

fn render(report: &CoverageReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json_pretty(),
        Format::Text => report.to_text(),
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    validate_flags(cli)?;
    let schema = load_schema(cli.schema.as_deref().expect("validated"))?;
    match cli.command {
        Command::Schema => {
            let ddl = emit_ddl(&schema).map_err(pipeline)?;
            emit(&cli.out, &ddl)?;
            Ok(0)
        }
        Command::Check => {
            let rules = load_business_rules(&cli.rules, &schema)?;
            let width = rules.iter().map(|r| r.name.as_str().len()).max().unwrap_or(0);
            let mut text = String::new();
            for r in &rules {
                text.push_str(&format!("{:<width$}  {:<22}  {}\n", r.name.as_str(), r.kind.name(), r.text));
            }
            text.push_str(&format!("{} rules: {}\n", rules.len(), tally_line(&rules)));
            emit(&cli.out, &text)?;
            Ok(0)
        }
        Command::Derive => {
            let rules = load_business_rules(&cli.rules, &schema)?;
            let derivation = derive_all(&rules, &schema, DeriveOptions { boundaries: cli.boundaries }).map_err(pipeline)?;
            for r in &derivation.removed {
                eprintln!("idmcov: dropped {}: {}", r.id, r.reason);
            }
            emit(&cli.out, &render_bundle(&derivation.rules))?;
            Ok(0)
        }
        Command::Load => {
            let target = cli.db.as_deref().expect("validated");
            let (_, snap) = load_into(&schema, cli.dataset.as_deref().expect("validated"), target, cli.replace)?;
            let c = snap.by_level(&schema);
            emit(&cli.out, &format!("loaded {} tuples into {target}: testcase={} ui={} database={}\n", snap.total(), c.testcase, c.ui, c.database))?;
            Ok(0)
        }
        Command::Eval | Command::All => {
            let rules = load_business_rules(&cli.rules, &schema)?;
            let derivation = derive_all(&rules, &schema, DeriveOptions { boundaries: cli.boundaries }).map_err(pipeline)?;
            let target = cli.db.as_deref().unwrap_or(":memory:");
            let (conn, snap) = match &cli.dataset {
                Some(dir) => load_into(&schema, dir, target, cli.replace)?,
                None => {
                    let conn = eval::open(target).map_err(pipeline)?;
                    let snap = eval::read_snapshot(&conn, &schema).map_err(pipeline)?;
                    (conn, snap)
                }
            };
            let outcomes = eval::evaluate_coverage(&derivation.rules, &conn).map_err(pipeline)?;
            let report = eval::build_report(&rules, &outcomes, &schema, &snap);
            emit(&cli.out, &render(&report, cli.report))?;
            Ok(if report.all_covered() { 0 } else { UNCOVERED })
        }
    }
}
