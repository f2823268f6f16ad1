//! Corpus-level metrics and rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{Confidence, Finding};
use crate::catalog::{LibraryId, RuleId};
use crate::corpus::{FileFailure, FileNote, ScanResult, ScanStats, UniqueFinding};
use crate::syntax::Origin;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported format `{0}` (expected json, csv or text)")]
pub struct UnsupportedFormat(pub String);

impl FromStr for Format {
    type Err = UnsupportedFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" | "txt" => Ok(Format::Text),
            _ => Err(UnsupportedFormat(s.to_string())),
        }
    }
}

/// Library by rule counts. Rows follow [`LibraryId::ALL`], columns
/// [`RuleId::ALL`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatrix {
    pub libraries: Vec<LibraryId>,
    pub rules: Vec<RuleId>,
    pub counts: Vec<Vec<usize>>,
}

impl Default for RuleMatrix {
    fn default() -> Self {
        RuleMatrix {
            libraries: LibraryId::ALL.to_vec(),
            rules: RuleId::ALL.to_vec(),
            counts: vec![vec![0; RuleId::ALL.len()]; LibraryId::ALL.len()],
        }
    }
}

impl RuleMatrix {
    fn add(&mut self, library: LibraryId, rule: RuleId, n: usize) {
        self.counts[library.index()][rule.index()] += n;
    }

    pub fn get(&self, library: LibraryId, rule: RuleId) -> usize {
        self.counts[library.index()][rule.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn rule_total(&self, rule: RuleId) -> usize {
        self.counts.iter().map(|row| row[rule.index()]).sum()
    }

    /// (library, rule) cells with a nonzero count.
    pub fn nonzero(&self) -> BTreeSet<(LibraryId, RuleId)> {
        LibraryId::ALL
            .iter()
            .flat_map(|&l| RuleId::ALL.iter().map(move |&r| (l, r)))
            .filter(|&(l, r)| self.get(l, r) > 0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub project: String,
    pub total: usize,
    pub application: usize,
    pub dependency: usize,
    pub definite: usize,
    pub potential: usize,
    pub files_analyzed: usize,
    pub crypto_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleShare {
    pub rule: RuleId,
    pub projects: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub schema_version: u32,
    pub total_findings: usize,
    pub unique_findings: usize,
    pub definite_count: usize,
    pub potential_count: usize,
    pub unique_definite_count: usize,
    pub application_findings: usize,
    pub dependency_findings: usize,
    pub per_rule_per_library: RuleMatrix,
    pub unique_per_rule_per_library: RuleMatrix,
    pub per_project: Vec<ProjectSummary>,
    pub projects_scanned: usize,
    /// Projects with at least one matched crypto call site.
    pub projects_with_crypto: usize,
    pub projects_with_misuse: usize,
    pub pct_projects_with_misuse: f64,
    pub pct_app_code_misuses: f64,
    pub per_rule_project_pct: Vec<RuleShare>,
    pub scan_stats: ScanStats,
    pub findings: Vec<Finding>,
    pub unique: Vec<UniqueFinding>,
    pub failures: Vec<FileFailure>,
    pub notes: Vec<FileNote>,
}

impl Default for CorpusReport {
    fn default() -> Self {
        aggregate(&ScanResult::default())
    }
}

/// `part / whole` in percent; 0 for an empty whole.
pub fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 * 100.0 / whole as f64
    }
}

pub fn aggregate(scan: &ScanResult) -> CorpusReport {
    let findings = &scan.findings;
    let mut matrix = RuleMatrix::default();
    for f in findings {
        matrix.add(f.library, f.rule, 1);
    }
    let mut unique_matrix = RuleMatrix::default();
    for u in &scan.unique {
        unique_matrix.add(u.finding.library, u.finding.rule, 1);
    }
    let count = |c: Confidence| findings.iter().filter(|f| f.confidence == c).count();
    let application = findings.iter().filter(|f| f.file.origin == Origin::Application).count();

    let per_project: Vec<ProjectSummary> = scan
        .projects
        .iter()
        .map(|p| {
            let own = || p.application.iter().chain(&p.dependency).map(|&i| &findings[i]);
            ProjectSummary {
                project: p.name.clone(),
                total: p.application.len() + p.dependency.len(),
                application: p.application.len(),
                dependency: p.dependency.len(),
                definite: own().filter(|f| f.confidence == Confidence::Definite).count(),
                potential: own().filter(|f| f.confidence == Confidence::Potential).count(),
                files_analyzed: p.files_analyzed,
                crypto_calls: p.crypto_calls,
            }
        })
        .collect();
    let with_crypto: Vec<_> = scan.projects.iter().filter(|p| p.crypto_calls > 0).collect();
    let with_misuse = with_crypto.iter().filter(|p| !p.application.is_empty() || !p.dependency.is_empty()).count();
    let per_rule_project_pct = RuleId::ALL
        .iter()
        .map(|&rule| {
            let projects = with_crypto
                .iter()
                .filter(|p| p.application.iter().chain(&p.dependency).any(|&i| findings[i].rule == rule))
                .count();
            RuleShare { rule, projects, pct: percent(projects, with_crypto.len()) }
        })
        .collect();

    CorpusReport {
        schema_version: SCHEMA_VERSION,
        total_findings: findings.len(),
        unique_findings: scan.unique.len(),
        definite_count: count(Confidence::Definite),
        potential_count: count(Confidence::Potential),
        unique_definite_count: scan.unique.iter().filter(|u| u.finding.confidence == Confidence::Definite).count(),
        application_findings: application,
        dependency_findings: findings.len() - application,
        per_rule_per_library: matrix,
        unique_per_rule_per_library: unique_matrix,
        per_project,
        projects_scanned: scan.projects.len(),
        projects_with_crypto: with_crypto.len(),
        projects_with_misuse: with_misuse,
        pct_projects_with_misuse: percent(with_misuse, with_crypto.len()),
        pct_app_code_misuses: percent(application, findings.len()),
        per_rule_project_pct,
        scan_stats: scan.stats,
        findings: findings.clone(),
        unique: scan.unique.clone(),
        failures: scan.failures.clone(),
        notes: scan.notes.clone(),
    }
}

pub fn render(report: &CorpusReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => render_csv(report),
        Format::Text => render_text(report).into_bytes(),
    }
}

pub const CSV_FINDING_HEADER: [&str; 15] = [
    "project",
    "file",
    "line",
    "column",
    "rule",
    "library",
    "confidence",
    "resolved",
    "origin",
    "package",
    "callee",
    "argument",
    "implicit_default",
    "reason",
    "content_hash",
];

fn render_csv(report: &CorpusReport) -> Vec<u8> {
    let mut findings = csv::Writer::from_writer(Vec::new());
    findings.write_record(CSV_FINDING_HEADER).expect("in-memory write");
    for f in &report.findings {
        findings
            .write_record([
                f.file.project.clone(),
                f.file.path.display().to_string(),
                f.position.line.to_string(),
                f.position.column.to_string(),
                f.rule.to_string(),
                f.library.to_string(),
                f.confidence.to_string(),
                f.resolved_text().unwrap_or_default(),
                f.file.origin.to_string(),
                f.file.package_name.clone().unwrap_or_default(),
                f.callee.clone(),
                f.argument.clone(),
                f.implicit_default.to_string(),
                f.reason.map(|r| r.to_string()).unwrap_or_default(),
                f.file.content_hash.clone(),
            ])
            .expect("in-memory write");
    }
    let mut out = findings.into_inner().expect("in-memory flush");
    out.push(b'\n');
    let mut summary = csv::Writer::from_writer(out);
    summary.write_record(["metric", "value"]).expect("in-memory write");
    for (metric, value) in summary_rows(report) {
        summary.write_record([metric, value]).expect("in-memory write");
    }
    summary.into_inner().expect("in-memory flush")
}

fn summary_rows(r: &CorpusReport) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> = vec![
        ("schema_version".into(), r.schema_version.to_string()),
        ("total_findings".into(), r.total_findings.to_string()),
        ("unique_findings".into(), r.unique_findings.to_string()),
        ("definite_count".into(), r.definite_count.to_string()),
        ("potential_count".into(), r.potential_count.to_string()),
        ("application_findings".into(), r.application_findings.to_string()),
        ("dependency_findings".into(), r.dependency_findings.to_string()),
        ("projects_scanned".into(), r.projects_scanned.to_string()),
        ("projects_with_crypto".into(), r.projects_with_crypto.to_string()),
        ("projects_with_misuse".into(), r.projects_with_misuse.to_string()),
        ("pct_projects_with_misuse".into(), format!("{:.2}", r.pct_projects_with_misuse)),
        ("pct_app_code_misuses".into(), format!("{:.2}", r.pct_app_code_misuses)),
    ];
    for share in &r.per_rule_project_pct {
        rows.push((format!("pct_projects_{}", share.rule), format!("{:.2}", share.pct)));
    }
    let s = &r.scan_stats;
    for (name, value) in [
        ("files_seen", s.files_seen),
        ("excluded_tests", s.excluded_tests),
        ("excluded_no_token", s.excluded_no_token),
        ("unreadable", s.unreadable),
        ("files_candidate", s.files_candidate),
        ("files_parsed", s.files_parsed),
        ("parse_failures", s.parse_failures),
        ("depth_failures", s.depth_failures),
    ] {
        rows.push((name.into(), value.to_string()));
    }
    rows
}

/// Left-aligns the first column and right-aligns the rest.
fn table(out: &mut String, rows: &[Vec<String>]) {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

fn render_text(r: &CorpusReport) -> String {
    let mut out = String::new();
    out.push_str("Summary\n");
    let summary: Vec<Vec<String>> = summary_rows(r).into_iter().map(|(k, v)| vec![k, v]).collect();
    table(&mut out, &summary);

    out.push_str("\nMisuses per project\n");
    let mut rows = vec![
        ["project", "total", "application", "dependency", "definite", "potential", "crypto calls"]
            .map(String::from)
            .to_vec(),
    ];
    for p in &r.per_project {
        rows.push(vec![
            p.project.clone(),
            p.total.to_string(),
            p.application.to_string(),
            p.dependency.to_string(),
            p.definite.to_string(),
            p.potential.to_string(),
            p.crypto_calls.to_string(),
        ]);
    }
    table(&mut out, &rows);

    for (title, matrix) in
        [("Misuses per rule", &r.per_rule_per_library), ("Unique misuses per rule", &r.unique_per_rule_per_library)]
    {
        let _ = writeln!(out, "\n{title}");
        let mut rows = vec![std::iter::once("library".to_string())
            .chain(matrix.rules.iter().map(|x| x.to_string()))
            .collect::<Vec<_>>()];
        for &library in &matrix.libraries {
            rows.push(
                std::iter::once(library.to_string())
                    .chain(matrix.rules.iter().map(|&rule| matrix.get(library, rule).to_string()))
                    .collect(),
            );
        }
        rows.push(
            std::iter::once("total".to_string())
                .chain(matrix.rules.iter().map(|&rule| matrix.rule_total(rule).to_string()))
                .collect(),
        );
        table(&mut out, &rows);
    }

    if !r.findings.is_empty() {
        out.push_str("\nFindings\n");
        for f in &r.findings {
            let value = match (&f.resolved_text(), f.implicit_default, f.reason) {
                (Some(v), _, _) => format!(" = {v}"),
                (None, true, _) => " (library default)".to_string(),
                (None, false, Some(reason)) => format!(" ({reason})"),
                _ => String::new(),
            };
            let _ = writeln!(
                out,
                "{}/{}:{} {} {} {} {} {}{}",
                f.file.project,
                f.file.path.display(),
                f.position,
                f.rule,
                f.confidence,
                f.library,
                f.callee,
                f.argument,
                value
            );
        }
    }
    if !r.failures.is_empty() {
        out.push_str("\nUnparsed files\n");
        for failure in &r.failures {
            let _ = writeln!(out, "{}/{}: {}", failure.project, failure.path.display(), failure.message);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{analyze_source, Config};
    use crate::catalog::Catalog;
    use crate::corpus::{dedupe, ProjectIndex};
    use crate::syntax::SourceFile;

    fn scan_of(files: &[(&str, &str, bool)]) -> ScanResult {
        let mut scan = ScanResult::default();
        let mut names: Vec<&str> = files.iter().map(|f| f.0).collect();
        names.dedup();
        scan.projects = names.iter().map(|n| ProjectIndex { name: n.to_string(), ..Default::default() }).collect();
        for &(project, text, dependency) in files {
            let file = if dependency {
                SourceFile::dependency("d.py", project, "dep", text.as_bytes())
            } else {
                SourceFile::application("a.py", project, text.as_bytes())
            };
            let analysis = analyze_source(&file, text.as_bytes(), Catalog::embedded(), &Config::default()).unwrap();
            let index = scan.projects.iter_mut().find(|p| p.name == project).unwrap();
            index.crypto_calls += analysis.matched_calls;
            for f in analysis.findings {
                let slot = if dependency { &mut index.dependency } else { &mut index.application };
                slot.push(scan.findings.len());
                scan.findings.push(f);
            }
        }
        scan.unique = dedupe(&scan.findings);
        scan
    }

    const M2_ECB: &str = "import os\nfrom M2Crypto import EVP\nc = EVP.Cipher('aes_128_ecb', os.urandom(16), os.urandom(16), 1)\n";
    const PY_R5: &str = "import os\nfrom Crypto.Protocol.KDF import PBKDF2\nk = PBKDF2('pw', os.urandom(16), 16, 10)\n";
    const CLEAN: &str = "import os\nfrom Crypto.Cipher import AES\nc = AES.new(os.urandom(16), AES.MODE_CBC, os.urandom(16))\n";

    #[test]
    fn empty_report() {
        let r = CorpusReport::default();
        assert_eq!(r.total_findings, 0);
        assert_eq!(r.pct_projects_with_misuse, 0.0);
        let json = render(&r, Format::Json);
        let back: CorpusReport = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn matrix_cells() {
        let r = aggregate(&scan_of(&[("a", M2_ECB, false), ("b", PY_R5, false)]));
        let expected: BTreeSet<_> =
            [(LibraryId::M2Crypto, RuleId::R1), (LibraryId::PyCrypto, RuleId::R5)].into_iter().collect();
        assert_eq!(r.per_rule_per_library.nonzero(), expected);
        assert_eq!(r.per_rule_per_library.total(), r.total_findings);
    }

    #[test]
    fn percentages() {
        let r = aggregate(&scan_of(&[
            ("a", M2_ECB, false),
            ("b", PY_R5, true),
            ("c", CLEAN, false),
            ("d", CLEAN, false),
        ]));
        assert_eq!(r.projects_with_crypto, 4);
        assert_eq!(r.pct_projects_with_misuse, 50.0);
        assert_eq!(r.pct_app_code_misuses, 50.0);
        let r5 = r.per_rule_project_pct.iter().find(|s| s.rule == RuleId::R5).unwrap();
        assert_eq!((r5.projects, r5.pct), (1, 25.0));
        let deps_only = aggregate(&scan_of(&[("a", M2_ECB, true)]));
        assert_eq!(deps_only.pct_app_code_misuses, 0.0);
    }

    #[test]
    fn csv_rows() {
        let r = aggregate(&scan_of(&[("a", M2_ECB, false), ("b", PY_R5, false)]));
        let text = String::from_utf8(render(&r, Format::Csv)).unwrap();
        let (findings, summary) = text.split_once("\n\n").unwrap();
        assert_eq!(findings.lines().count(), r.total_findings + 1);
        assert!(findings.lines().nth(1).unwrap().starts_with("a,a.py,3,4,R1,M2Crypto,definite,'aes_128_ecb',"));
        assert!(summary.starts_with("metric,value\n"));
    }

    #[test]
    fn render_is_deterministic() {
        let r = aggregate(&scan_of(&[("a", M2_ECB, false), ("b", PY_R5, false)]));
        for format in [Format::Json, Format::Csv, Format::Text] {
            assert_eq!(render(&r, format), render(&r.clone(), format));
        }
        let json = render(&r, Format::Json);
        assert_eq!(serde_json::from_slice::<CorpusReport>(&json).unwrap(), r);
    }

    #[test]
    fn text_tables() {
        let r = aggregate(&scan_of(&[("a", M2_ECB, false)]));
        let text = String::from_utf8(render(&r, Format::Text)).unwrap();
        assert!(text.contains("Misuses per rule"));
        assert!(text.contains("a/a.py:3:4 R1 definite M2Crypto M2Crypto.EVP.Cipher #0/alg = 'aes_128_ecb'"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("JSON".parse::<Format>(), Ok(Format::Json));
        assert!("xml".parse::<Format>().is_err());
    }
}
