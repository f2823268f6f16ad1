//! Command line interface.
//!
//! Exit codes: 0 scan complete without definite findings, 1 at least one
//! definite finding, 2 usage or configuration error, 3 unreadable corpus
//! or unwritable output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analyzer::Config;
use crate::catalog::{Catalog, RuleId};
use crate::corpus::{scan, CorpusError, CorpusLayout, ScanOptions};
use crate::report::{aggregate, render, Format};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_DEFINITE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNREADABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cryptoscan", version, about = "Find cryptographic API misuses in Python code")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan project directories and report misuses.
    Scan(ScanArgs),
    /// Print the call-pattern catalog as TOML.
    Catalog {
        /// Extra patterns to merge into the embedded catalog.
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Project directories; each one is a project.
    paths: Vec<PathBuf>,
    /// Corpus manifest listing projects and their dependency roots.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Rules to check, e.g. R1,R3.
    #[arg(long, value_delimiter = ',', value_parser = parse_rule)]
    rules: Option<Vec<RuleId>>,
    /// Keep test files.
    #[arg(long)]
    include_tests: bool,
    /// Report every raw finding as unique.
    #[arg(long)]
    no_dedupe: bool,
    /// Maximum number of slicing steps.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    max_depth: Option<u32>,
    /// Do not report an omitted block mode that defaults to ECB.
    #[arg(long)]
    no_implicit_ecb: bool,
    /// Also match callees whose module is not imported.
    #[arg(long)]
    bare_name_match: bool,
    /// Extra patterns to merge into the embedded catalog.
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Analyze files one at a time.
    #[arg(long)]
    sequential: bool,
}

fn parse_rule(s: &str) -> Result<RuleId, String> {
    s.parse::<RuleId>().map_err(|e| e.to_string())
}

/// Runs the CLI with process stdout and stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let text = err.render().to_string();
            if err.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_CLEAN;
        }
    };
    match cli.command {
        Command::Scan(args) => run_scan(args, stdout, stderr),
        Command::Catalog { catalog } => {
            let catalog = match load_catalog(catalog.as_ref()) {
                Ok(c) => c,
                Err((code, msg)) => return fail(stderr, code, &msg),
            };
            match catalog.to_toml_string() {
                Ok(text) => {
                    let _ = write!(stdout, "{text}");
                    EXIT_CLEAN
                }
                Err(e) => fail(stderr, EXIT_USAGE, &e.to_string()),
            }
        }
    }
}

fn fail(stderr: &mut dyn Write, code: i32, message: &str) -> i32 {
    let _ = writeln!(stderr, "cryptoscan: {message}");
    code
}

fn load_catalog(path: Option<&PathBuf>) -> Result<Catalog, (i32, String)> {
    let embedded = Catalog::embedded();
    let Some(path) = path else { return Ok(embedded.clone()) };
    let text = fs::read_to_string(path).map_err(|e| (EXIT_USAGE, format!("{}: {e}", path.display())))?;
    embedded.extended_with(&text).map_err(|e| (EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn corpus_exit(err: &CorpusError) -> i32 {
    match err {
        CorpusError::Manifest { .. } | CorpusError::UnsupportedVersion(_) | CorpusError::DuplicateProject(_) => {
            EXIT_USAGE
        }
        CorpusError::Empty => EXIT_USAGE,
        CorpusError::Io { .. } | CorpusError::NotADirectory(_) => EXIT_UNREADABLE,
    }
}

fn run_scan(args: ScanArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if args.paths.is_empty() && args.manifest.is_none() {
        return fail(stderr, EXIT_USAGE, "nothing to scan: give project directories or --manifest");
    }
    let catalog = match load_catalog(args.catalog.as_ref()) {
        Ok(c) => c,
        Err((code, msg)) => return fail(stderr, code, &msg),
    };
    let mut config = Config::default();
    if let Some(rules) = &args.rules {
        config.rules = rules.iter().copied().collect();
    }
    if let Some(depth) = args.max_depth {
        config.depth_limit = depth as usize;
    }
    config.implicit_ecb = !args.no_implicit_ecb;
    config.bare_name_match = args.bare_name_match;

    let mut layout = match &args.manifest {
        Some(path) => match CorpusLayout::from_manifest(path) {
            Ok(l) => l,
            Err(e) => return fail(stderr, corpus_exit(&e), &e.to_string()),
        },
        None => CorpusLayout::default(),
    };
    match CorpusLayout::infer(&args.paths) {
        Ok(inferred) => layout.projects.extend(inferred.projects),
        Err(e) => return fail(stderr, corpus_exit(&e), &e.to_string()),
    }
    let options = ScanOptions {
        include_tests: args.include_tests,
        dedupe: !args.no_dedupe,
        mode: if args.sequential {
            crate::corpus::ExecutionMode::Sequential
        } else {
            crate::corpus::ExecutionMode::Parallel
        },
        ..ScanOptions::default()
    };
    let layout = layout.with_options(options);
    let result = match scan(&layout, &catalog, &config) {
        Ok(r) => r,
        Err(e) => return fail(stderr, corpus_exit(&e), &e.to_string()),
    };
    for failure in &result.failures {
        let _ = writeln!(stderr, "cryptoscan: skipped {}/{}: {}", failure.project, failure.path.display(), failure.message);
    }
    let report = aggregate(&result);
    let bytes = render(&report, args.format.into());
    let written = match &args.out {
        Some(path) => fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(&bytes).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        return fail(stderr, EXIT_UNREADABLE, &msg);
    }
    if report.definite_count > 0 {
        EXIT_DEFINITE
    } else {
        EXIT_CLEAN
    }
}
