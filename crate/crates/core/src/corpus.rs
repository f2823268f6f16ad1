//! Corpus layout, file collection, scanning and deduplication.
//!
//! A corpus is a list of projects. Each project has an application root
//! and any number of dependency roots (installed or vendored packages).
//! Discovery is sequential and sorted; per-file parsing and analysis fan
//! out over a thread pool when the `parallel` feature is enabled.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::analyzer::{analyze_source, Config, Finding};
use crate::catalog::{Catalog, Note, RuleId};
use crate::syntax::{Origin, ParseFailure, Position, SourceFile};

pub const MANIFEST_VERSION: u32 = 1;

/// Directories never descended into.
const SKIPPED_DIRS: &[&str] = &[".git", ".hg", ".svn", "__pycache__", "node_modules"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest {path}: {source}")]
    Manifest { path: PathBuf, source: toml::de::Error },
    #[error("unsupported manifest version {0} (expected {MANIFEST_VERSION})")]
    UnsupportedVersion(u32),
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("duplicate project name `{0}`")]
    DuplicateProject(String),
    #[error("corpus has no projects")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencyRoot {
    pub package: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectRoot {
    pub name: String,
    pub path: PathBuf,
    #[serde(default, rename = "dependency")]
    pub dependencies: Vec<DependencyRoot>,
}

/// Which paths count as test code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestFilter {
    pub dir_names: Vec<String>,
    pub file_prefixes: Vec<String>,
    pub file_suffixes: Vec<String>,
    pub file_names: Vec<String>,
}

impl Default for TestFilter {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        TestFilter {
            dir_names: owned(&["test", "tests", "testing"]),
            file_prefixes: owned(&["test_"]),
            file_suffixes: owned(&["_test.py"]),
            file_names: owned(&["conftest.py"]),
        }
    }
}

impl TestFilter {
    /// `path` is taken relative to the root it was found under.
    pub fn matches(&self, path: &Path) -> bool {
        let segments: Vec<&str> = path.iter().filter_map(|s| s.to_str()).collect();
        let Some((file, dirs)) = segments.split_last() else { return false };
        if dirs.iter().any(|d| self.dir_names.iter().any(|n| n == d)) {
            return true;
        }
        let py = file.ends_with(".py");
        self.file_names.iter().any(|n| n == file)
            || (py && self.file_prefixes.iter().any(|p| file.starts_with(p.as_str())))
            || self.file_suffixes.iter().any(|s| file.ends_with(s.as_str()))
    }
}

pub fn is_test_file(path: &Path) -> bool {
    TestFilter::default().matches(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    Sequential,
    /// Per-file work on the rayon pool; sequential without the `parallel`
    /// feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanOptions {
    pub include_tests: bool,
    pub dedupe: bool,
    pub test_filter: TestFilter,
    pub mode: ExecutionMode,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { include_tests: false, dedupe: true, test_filter: TestFilter::default(), mode: ExecutionMode::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusLayout {
    pub projects: Vec<ProjectRoot>,
    pub options: ScanOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    #[serde(default, rename = "project")]
    projects: Vec<ProjectRoot>,
}

impl CorpusLayout {
    /// Reads a manifest; relative paths are resolved against its directory.
    pub fn from_manifest(path: &Path) -> Result<CorpusLayout, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        CorpusLayout::from_manifest_str(&text, base)
            .map_err(|e| match e {
                CorpusError::Manifest { source, .. } => CorpusError::Manifest { path: path.to_path_buf(), source },
                other => other,
            })
    }

    pub fn from_manifest_str(text: &str, base: &Path) -> Result<CorpusLayout, CorpusError> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|source| CorpusError::Manifest { path: PathBuf::new(), source })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CorpusError::UnsupportedVersion(manifest.version));
        }
        let mut projects = manifest.projects;
        for project in &mut projects {
            project.path = base.join(&project.path);
            for dep in &mut project.dependencies {
                dep.path = base.join(&dep.path);
            }
        }
        Ok(CorpusLayout { projects, options: ScanOptions::default() })
    }

    /// One project per directory. Every entry of a `site-packages`
    /// directory below a project root is a dependency of that project.
    pub fn infer(roots: &[PathBuf]) -> Result<CorpusLayout, CorpusError> {
        let mut projects = Vec::new();
        let mut names: HashMap<String, usize> = HashMap::new();
        for root in roots {
            if !root.is_dir() {
                return Err(CorpusError::NotADirectory(root.clone()));
            }
            let base = root
                .canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_else(|| root.display().to_string());
            let seen = names.entry(base.clone()).or_insert(0);
            *seen += 1;
            let name = if *seen == 1 { base } else { format!("{base}-{seen}") };
            let dependencies = site_packages_entries(root)?;
            projects.push(ProjectRoot { name, path: root.clone(), dependencies });
        }
        Ok(CorpusLayout { projects, options: ScanOptions::default() })
    }

    pub fn with_options(mut self, options: ScanOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.projects.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut names = BTreeSet::new();
        for project in &self.projects {
            if !names.insert(project.name.as_str()) {
                return Err(CorpusError::DuplicateProject(project.name.clone()));
            }
            for path in std::iter::once(&project.path).chain(project.dependencies.iter().map(|d| &d.path)) {
                if !path.is_dir() {
                    return Err(CorpusError::NotADirectory(path.clone()));
                }
            }
        }
        Ok(())
    }
}

fn site_packages_entries(root: &Path) -> Result<Vec<DependencyRoot>, CorpusError> {
    let mut out = Vec::new();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| !skipped(e));
    for entry in walker {
        let entry = entry.map_err(|e| walk_error(root, e))?;
        if !entry.file_type().is_dir() || entry.file_name() != "site-packages" {
            continue;
        }
        let mut children: Vec<_> = fs::read_dir(entry.path())
            .map_err(|source| CorpusError::Io { path: entry.path().to_path_buf(), source })?
            .filter_map(Result::ok)
            .filter(|c| c.path().is_dir())
            .collect();
        children.sort_by_key(|c| c.file_name());
        for child in children {
            let name = child.file_name().to_string_lossy().into_owned();
            if name.ends_with(".dist-info") || name.ends_with(".egg-info") || SKIPPED_DIRS.contains(&name.as_str()) {
                continue;
            }
            out.push(DependencyRoot { package: name, path: child.path() });
        }
    }
    Ok(out)
}

fn skipped(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0
        && entry.file_type().is_dir()
        && entry.file_name().to_str().is_some_and(|n| SKIPPED_DIRS.contains(&n))
}

fn walk_error(root: &Path, err: walkdir::Error) -> CorpusError {
    let path = err.path().unwrap_or(root).to_path_buf();
    let source = err.into_io_error().unwrap_or_else(|| std::io::Error::other("filesystem loop"));
    CorpusError::Io { path, source }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    /// Every `.py` file discovered.
    pub files_seen: usize,
    pub excluded_tests: usize,
    /// Files without any catalog callee token.
    pub excluded_no_token: usize,
    pub unreadable: usize,
    pub files_candidate: usize,
    pub files_parsed: usize,
    pub parse_failures: usize,
    pub depth_failures: usize,
}

impl ScanStats {
    pub fn is_consistent(&self) -> bool {
        self.files_parsed + self.parse_failures + self.depth_failures == self.files_candidate
            && self.excluded_tests + self.excluded_no_token + self.unreadable + self.files_candidate == self.files_seen
    }
}

/// A file that passed both filters, with its bytes.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub file: SourceFile,
    pub absolute_path: PathBuf,
    pub bytes: Vec<u8>,
}

/// Textual pre-filter on final callee names.
#[derive(Debug, Clone)]
pub struct TokenFilter {
    regex: Regex,
}

impl TokenFilter {
    pub fn new(catalog: &Catalog) -> TokenFilter {
        let names: Vec<String> = catalog.callee_names().into_iter().map(regex::escape).collect();
        let regex = Regex::new(&format!(r"\b(?:{})\b", names.join("|"))).expect("escaped alternation");
        TokenFilter { regex }
    }

    pub fn admits(&self, bytes: &[u8]) -> bool {
        self.regex.is_match(&String::from_utf8_lossy(bytes))
    }
}

/// Discovers the candidate files of a layout in deterministic order.
pub fn collect_files(layout: &CorpusLayout, catalog: &Catalog) -> Result<(Vec<Candidate>, ScanStats), CorpusError> {
    layout.validate()?;
    let filter = TokenFilter::new(catalog);
    let mut stats = ScanStats::default();
    let mut out = Vec::new();
    for project in &layout.projects {
        let dep_roots: Vec<PathBuf> = project.dependencies.iter().map(|d| d.path.clone()).collect();
        let mut roots: Vec<(&Path, Option<&str>)> = vec![(project.path.as_path(), None)];
        roots.extend(project.dependencies.iter().map(|d| (d.path.as_path(), Some(d.package.as_str()))));
        for (root, package) in roots {
            let walker = WalkDir::new(root)
                .sort_by_file_name()
                .into_iter()
                .filter_entry(|e| !skipped(e) && (package.is_some() || !is_dependency_dir(e, &dep_roots)));
            for entry in walker {
                let entry = match entry {
                    Ok(e) => e,
                    Err(_) => {
                        stats.unreadable += 1;
                        stats.files_seen += 1;
                        continue;
                    }
                };
                let path = entry.path();
                if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "py") {
                    continue;
                }
                stats.files_seen += 1;
                let relative = path.strip_prefix(root).unwrap_or(path);
                if !layout.options.include_tests && layout.options.test_filter.matches(relative) {
                    stats.excluded_tests += 1;
                    continue;
                }
                let Ok(bytes) = fs::read(path) else {
                    stats.unreadable += 1;
                    continue;
                };
                if !filter.admits(&bytes) {
                    stats.excluded_no_token += 1;
                    continue;
                }
                stats.files_candidate += 1;
                let display = display_path(path, &project.path, package);
                let file = match package {
                    None => SourceFile::application(display, &project.name, &bytes),
                    Some(pkg) => SourceFile::dependency(display, &project.name, pkg, &bytes),
                };
                out.push(Candidate { file, absolute_path: path.to_path_buf(), bytes });
            }
        }
    }
    Ok((out, stats))
}

/// Application walks skip dependency roots and any `site-packages` tree.
fn is_dependency_dir(entry: &walkdir::DirEntry, dep_roots: &[PathBuf]) -> bool {
    entry.file_type().is_dir()
        && (entry.file_name() == "site-packages" || dep_roots.iter().any(|d| d.as_path() == entry.path()))
}

fn display_path(path: &Path, project_root: &Path, package: Option<&str>) -> PathBuf {
    match path.strip_prefix(project_root) {
        Ok(rel) => rel.to_path_buf(),
        Err(_) => match package {
            Some(pkg) => Path::new("<dependency>").join(pkg).join(path.file_name().unwrap_or_default()),
            None => path.to_path_buf(),
        },
    }
}

/// A deduplicated finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueFinding {
    pub finding: Finding,
    /// Raw findings collapsed into this one.
    pub multiplicity: usize,
    /// Distinct projects the finding occurs in.
    pub projects: Vec<String>,
}

/// Collapses findings with equal (content hash, position, rule). The first
/// finding of each group in input order represents it.
pub fn dedupe(findings: &[Finding]) -> Vec<UniqueFinding> {
    let mut index: HashMap<(&str, Position, RuleId), usize> = HashMap::new();
    let mut groups: Vec<(usize, BTreeSet<&str>, usize)> = Vec::new();
    for (i, f) in findings.iter().enumerate() {
        let key = (f.file.content_hash.as_str(), f.position, f.rule);
        let slot = *index.entry(key).or_insert_with(|| {
            groups.push((i, BTreeSet::new(), 0));
            groups.len() - 1
        });
        groups[slot].1.insert(f.file.project.as_str());
        groups[slot].2 += 1;
    }
    groups
        .into_iter()
        .map(|(i, projects, count)| UniqueFinding {
            finding: findings[i].clone(),
            multiplicity: count,
            projects: projects.into_iter().map(str::to_string).collect(),
        })
        .collect()
}

/// Every finding as its own entry.
pub fn without_dedupe(findings: &[Finding]) -> Vec<UniqueFinding> {
    findings
        .iter()
        .map(|f| UniqueFinding { finding: f.clone(), multiplicity: 1, projects: vec![f.file.project.clone()] })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Syntax,
    Depth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFailure {
    pub project: String,
    pub path: PathBuf,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileNote {
    pub project: String,
    pub path: PathBuf,
    #[serde(flatten)]
    pub note: Note,
}

/// Findings of one project, as indices into [`ScanResult::findings`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectIndex {
    pub name: String,
    pub application: Vec<usize>,
    pub dependency: Vec<usize>,
    /// Candidate files that parsed.
    pub files_analyzed: usize,
    /// Matched crypto call sites.
    pub crypto_calls: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ScanResult {
    pub findings: Vec<Finding>,
    pub unique: Vec<UniqueFinding>,
    pub stats: ScanStats,
    pub projects: Vec<ProjectIndex>,
    pub failures: Vec<FileFailure>,
    pub notes: Vec<FileNote>,
}

enum FileOutcome {
    Analyzed(crate::analyzer::FileAnalysis),
    Failed(ParseFailure),
}

fn analyze_candidate(candidate: &Candidate, catalog: &Catalog, config: &Config) -> FileOutcome {
    match analyze_source(&candidate.file, &candidate.bytes, catalog, config) {
        Ok(analysis) => FileOutcome::Analyzed(analysis),
        Err(failure) => FileOutcome::Failed(failure),
    }
}

#[cfg(feature = "parallel")]
fn analyze_all(candidates: &[Candidate], catalog: &Catalog, config: &Config, mode: ExecutionMode) -> Vec<FileOutcome> {
    use rayon::prelude::*;
    match mode {
        ExecutionMode::Parallel => candidates.par_iter().map(|c| analyze_candidate(c, catalog, config)).collect(),
        ExecutionMode::Sequential => candidates.iter().map(|c| analyze_candidate(c, catalog, config)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn analyze_all(candidates: &[Candidate], catalog: &Catalog, config: &Config, _mode: ExecutionMode) -> Vec<FileOutcome> {
    candidates.iter().map(|c| analyze_candidate(c, catalog, config)).collect()
}

pub fn scan(layout: &CorpusLayout, catalog: &Catalog, config: &Config) -> Result<ScanResult, CorpusError> {
    let (candidates, stats) = collect_files(layout, catalog)?;
    Ok(scan_candidates(layout, &candidates, stats, catalog, config))
}

/// Analyzes already collected candidates. Results follow candidate order.
pub fn scan_candidates(
    layout: &CorpusLayout,
    candidates: &[Candidate],
    mut stats: ScanStats,
    catalog: &Catalog,
    config: &Config,
) -> ScanResult {
    let outcomes = analyze_all(candidates, catalog, config, layout.options.mode);
    let mut projects: BTreeMap<&str, ProjectIndex> = layout
        .projects
        .iter()
        .map(|p| (p.name.as_str(), ProjectIndex { name: p.name.clone(), ..ProjectIndex::default() }))
        .collect();
    let mut result = ScanResult::default();
    for (candidate, outcome) in candidates.iter().zip(outcomes) {
        let file = &candidate.file;
        let project = projects.get_mut(file.project.as_str()).expect("candidate of a layout project");
        match outcome {
            FileOutcome::Analyzed(analysis) => {
                stats.files_parsed += 1;
                project.files_analyzed += 1;
                project.crypto_calls += analysis.matched_calls;
                for finding in analysis.findings {
                    let slot = match finding.file.origin {
                        Origin::Application => &mut project.application,
                        Origin::Dependency => &mut project.dependency,
                    };
                    slot.push(result.findings.len());
                    result.findings.push(finding);
                }
                result.notes.extend(analysis.notes.into_iter().map(|note| FileNote {
                    project: file.project.clone(),
                    path: file.path.clone(),
                    note,
                }));
            }
            FileOutcome::Failed(failure) => {
                let kind = match failure {
                    ParseFailure::Syntax { .. } => {
                        stats.parse_failures += 1;
                        FailureKind::Syntax
                    }
                    ParseFailure::DepthExceeded { .. } => {
                        stats.depth_failures += 1;
                        FailureKind::Depth
                    }
                };
                result.failures.push(FileFailure {
                    project: file.project.clone(),
                    path: file.path.clone(),
                    kind,
                    message: failure.to_string(),
                });
            }
        }
    }
    result.unique = if layout.options.dedupe { dedupe(&result.findings) } else { without_dedupe(&result.findings) };
    result.stats = stats;
    result.projects = layout.projects.iter().map(|p| projects.remove(p.name.as_str()).unwrap_or_default()).collect();
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::Confidence;
    use std::fs;

    fn write(root: &Path, rel: &str, text: &str) {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }

    const ECB: &str = "from Crypto.Cipher import AES\nc = AES.new(b'k' * 16, AES.MODE_ECB)\n";

    #[test]
    fn test_file_heuristic() {
        assert!(is_test_file(Path::new("pkg/tests/helper.py")));
        assert!(is_test_file(Path::new("tests/test_cipher.py")));
        assert!(is_test_file(Path::new("pkg/test_cipher.py")));
        assert!(is_test_file(Path::new("pkg/cipher_test.py")));
        assert!(is_test_file(Path::new("conftest.py")));
        assert!(is_test_file(Path::new("a/testing/x.py")));
        assert!(!is_test_file(Path::new("pkg/contest.py")));
        assert!(!is_test_file(Path::new("src/crypto.py")));
        assert!(!is_test_file(Path::new("latest/testament.py")));
    }

    #[test]
    fn token_filter() {
        let filter = TokenFilter::new(Catalog::embedded());
        assert!(filter.admits(b"c = AES.new(k)"));
        assert!(filter.admits(b"from x import PBKDF2HMAC"));
        assert!(filter.admits(b"SecretBox(k)"));
        assert!(!filter.admits(b"print('hello')\nrenew = 1\n"));
    }

    #[test]
    fn dedupe_examples() {
        assert!(dedupe(&[]).is_empty());
        let file = |project: &str, text: &str| SourceFile::application("u.py", project, text.as_bytes());
        let analyze = |f: &SourceFile, text: &str| {
            analyze_source(f, text.as_bytes(), Catalog::embedded(), &Config::default()).unwrap().findings
        };
        let text = "from nacl.secret import SecretBox\nb = SecretBox(b'k' * 32)\n";
        let mut all = Vec::new();
        for p in ["a", "b", "c"] {
            all.extend(analyze(&file(p, text), text));
        }
        let unique = dedupe(&all);
        assert_eq!(unique.len(), 1);
        assert_eq!(unique[0].multiplicity, 3);
        assert_eq!(unique[0].projects, vec!["a", "b", "c"]);
        // Same span, different content.
        let other = "from nacl.secret import SecretBox\nb = SecretBox(b'j' * 32)\n";
        all.extend(analyze(&file("d", other), other));
        assert_eq!(dedupe(&all).len(), 2);
        assert_eq!(dedupe(&all).iter().map(|u| u.multiplicity).sum::<usize>(), all.len());
    }

    #[test]
    fn infer_and_scan() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("proj");
        write(&root, "app/main.py", ECB);
        write(&root, "app/plain.py", "print('no crypto')\n");
        write(&root, "tests/test_main.py", ECB);
        write(&root, "venv/lib/python3.11/site-packages/vend/util.py", ECB);
        write(&root, "venv/lib/python3.11/site-packages/vend-1.0.dist-info/RECORD.py", ECB);
        write(&root, "app/broken.py", "from Crypto.Cipher import AES\ndef f(:\n");
        let layout = CorpusLayout::infer(std::slice::from_ref(&root)).unwrap();
        assert_eq!(layout.projects[0].name, "proj");
        assert_eq!(layout.projects[0].dependencies.len(), 1);
        assert_eq!(layout.projects[0].dependencies[0].package, "vend");
        let result = scan(&layout, Catalog::embedded(), &Config::default()).unwrap();
        let s = result.stats;
        assert_eq!(
            (s.files_seen, s.excluded_tests, s.excluded_no_token, s.files_candidate, s.parse_failures),
            (5, 1, 1, 3, 1)
        );
        assert!(s.is_consistent());
        let p = &result.projects[0];
        assert_eq!((p.application.len(), p.dependency.len()), (2, 2));
        assert!(result.findings.iter().all(|f| f.confidence == Confidence::Definite));
        let dep = &result.findings[p.dependency[0]];
        assert_eq!(dep.file.package_name.as_deref(), Some("vend"));
        assert_eq!(result.failures[0].path, Path::new("app/broken.py"));
    }

    #[test]
    fn include_tests_option() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "tests/test_main.py", ECB);
        let layout = CorpusLayout::infer(&[dir.path().to_path_buf()]).unwrap();
        let result = scan(&layout, Catalog::embedded(), &Config::default()).unwrap();
        assert_eq!((result.stats.files_candidate, result.findings.len()), (0, 0));
        let options = ScanOptions { include_tests: true, ..ScanOptions::default() };
        let result = scan(&layout.with_options(options), Catalog::embedded(), &Config::default()).unwrap();
        assert_eq!(result.findings.len(), 2);
    }

    #[test]
    fn manifest_parsing() {
        let text = r#"
version = 1

[[project]]
name = "alpha"
path = "projects/alpha"

[[project.dependency]]
package = "shared"
path = "deps/shared"
"#;
        let layout = CorpusLayout::from_manifest_str(text, Path::new("/corpus")).unwrap();
        assert_eq!(layout.projects[0].path, Path::new("/corpus/projects/alpha"));
        assert_eq!(layout.projects[0].dependencies[0].path, Path::new("/corpus/deps/shared"));
        assert!(matches!(
            CorpusLayout::from_manifest_str("version = 2\n", Path::new(".")),
            Err(CorpusError::UnsupportedVersion(2))
        ));
        assert!(CorpusLayout::from_manifest_str(text, Path::new("/nowhere")).unwrap().validate().is_err());
    }

    #[test]
    fn sequential_matches_parallel() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..20 {
            write(dir.path(), &format!("m{i:02}.py"), ECB);
        }
        let layout = CorpusLayout::infer(&[dir.path().to_path_buf()]).unwrap();
        let run = |mode| {
            let options = ScanOptions { mode, ..ScanOptions::default() };
            let r = scan(&layout.clone().with_options(options), Catalog::embedded(), &Config::default()).unwrap();
            serde_json::to_string(&r.findings).unwrap()
        };
        assert_eq!(run(ExecutionMode::Sequential), run(ExecutionMode::Parallel));
    }
}
