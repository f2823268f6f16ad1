//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cryptoscan::analyzer::{analyze_source, Confidence, Config, FileAnalysis};
use cryptoscan::catalog::{
    match_call_sites, ArgumentLookup, Catalog, LibraryId, PredicateId, RuleId,
};
use cryptoscan::slicer::{SliceOutcome, Slicer, DEFAULT_DEPTH_LIMIT};
use cryptoscan::syntax::{parse_source, resolve_imports, ImportTable, SourceFile};
use serde_json::Value;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures_dir().join(rel)
}

/// `.py` files below `dir`, sorted.
pub fn python_files(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "py"))
        .map(|e| e.into_path())
        .collect();
    out.sort();
    out
}

pub fn analyze_path(path: &Path) -> FileAnalysis {
    analyze_path_with(path, &Config::default())
}

pub fn analyze_path_with(path: &Path, config: &Config) -> FileAnalysis {
    let bytes = fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let file = SourceFile::application(path, "fixtures", &bytes);
    analyze_source(&file, &bytes, Catalog::embedded(), config).unwrap_or_else(|e| panic!("{e}"))
}

/// One expected or observed finding, compared on these fields only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Outcome {
    pub line: u32,
    pub rule: RuleId,
    pub confidence: Confidence,
    pub reason: Option<String>,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}", self.line, self.rule, self.confidence)?;
        if let Some(reason) = &self.reason {
            write!(f, "({reason})")?;
        }
        Ok(())
    }
}

/// Reads `# expect: R3 definite, R5 potential(no_callers)` comments.
/// Potential entries must name their reason.
pub fn expectations(text: &str) -> Vec<Outcome> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some((_, wanted)) = line.split_once("# expect:") else { continue };
        for item in wanted.split(',') {
            let mut words = item.split_whitespace();
            let rule: RuleId = words.next().expect("rule").parse().expect("rule id");
            let word = words.next().expect("confidence");
            let (confidence, reason) = match word.split_once('(') {
                Some(("potential", reason)) => (Confidence::Potential, Some(reason.trim_end_matches(')').to_string())),
                None if word == "definite" => (Confidence::Definite, None),
                _ => panic!("bad expectation `{item}`"),
            };
            out.push(Outcome { line: i as u32 + 1, rule, confidence, reason });
        }
    }
    out.sort();
    out
}

pub fn observed(analysis: &FileAnalysis) -> Vec<Outcome> {
    let mut out: Vec<Outcome> = analysis
        .findings
        .iter()
        .map(|f| Outcome {
            line: f.position.line,
            rule: f.rule,
            confidence: f.confidence,
            reason: match f.confidence {
                Confidence::Potential => f.reason.map(|r| r.to_string()),
                Confidence::Definite => None,
            },
        })
        .collect();
    out.sort();
    out
}

/// Compares a fixture's findings with its expectation comments.
pub fn check_expectations(path: &Path) -> Result<(), String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let expected = expectations(&text);
    let actual = observed(&analyze_path(path));
    if expected == actual {
        return Ok(());
    }
    let show = |xs: &[Outcome]| xs.iter().map(|o| o.to_string()).collect::<Vec<_>>().join("; ");
    Err(format!("{}: expected [{}], got [{}]", path.display(), show(&expected), show(&actual)))
}

pub fn covered_cells() -> BTreeSet<(LibraryId, RuleId)> {
    LibraryId::ALL
        .iter()
        .flat_map(|&l| cryptoscan::catalog::applicable_rules(l).into_iter().map(move |r| (l, r)))
        .collect()
}

/// Source text of a call that violates exactly `pattern`'s rule.
/// Every other inspected argument of the callee gets a secure value.
pub fn generated_violation(catalog: &Catalog, index: usize) -> String {
    let pattern = &catalog.patterns()[index];
    let siblings: Vec<_> = catalog.patterns_for_callee(&pattern.callee).collect();
    let positions = siblings.iter().filter_map(|p| p.position).max().unwrap_or(0);
    let module = pattern.callee.rsplit_once('.').map(|(m, _)| m).unwrap_or(&pattern.callee);
    let mut imports: BTreeSet<String> = ["os".to_string()].into_iter().collect();
    let mut value = |predicate: PredicateId, insecure: bool| -> String {
        match predicate {
            PredicateId::IsEcbModeConstant => match pattern.library {
                LibraryId::PyCrypto => format!("{module}.{}", if insecure { "MODE_ECB" } else { "MODE_CBC" }),
                LibraryId::Cryptography => {
                    imports.insert("cryptography.hazmat.primitives.ciphers.modes".into());
                    let modes = "cryptography.hazmat.primitives.ciphers.modes";
                    if insecure { format!("{modes}.ECB()") } else { format!("{modes}.CTR(os.urandom(16))") }
                }
                LibraryId::M2Crypto => if insecure { "'aes_128_ecb'" } else { "'aes_128_cbc'" }.into(),
                _ => if insecure { "1" } else { "2" }.into(),
            },
            PredicateId::IsLowIterationCount => if insecure { "1" } else { "100000" }.into(),
            PredicateId::IsConstantBytes | PredicateId::IsConstantOrMissingSalt => {
                if insecure { "b'\\x00' * 16" } else { "os.urandom(16)" }.into()
            }
        }
    };
    let mut args = Vec::new();
    match pattern.position {
        Some(p) => {
            for i in 0..=positions.max(p) {
                let arg = match siblings.iter().find(|s| s.position == Some(i)) {
                    Some(s) => value(s.predicate, i == p),
                    None => "os.urandom(16)".to_string(),
                };
                args.push(arg);
            }
        }
        None => {
            let keyword = &pattern.keywords[0];
            args.push(format!("{keyword}={}", value(pattern.predicate, true)));
        }
    }
    imports.insert(module.to_string());
    let mut text = String::new();
    for import in &imports {
        let _ = writeln!(text, "import {import}");
    }
    let _ = writeln!(text, "\nresult = {}({})  # expect: {} definite", pattern.callee, args.join(", "), pattern.rule);
    text
}

/// Writes one generated violation per catalog pattern into `dir`.
pub fn write_generated_fixtures(dir: &Path) -> Vec<PathBuf> {
    let catalog = Catalog::embedded();
    (0..catalog.patterns().len())
        .map(|i| {
            let path = dir.join(format!("{}.py", catalog.patterns()[i].id));
            fs::write(&path, generated_violation(catalog, i)).unwrap();
            path
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct OracleReport {
    /// Resolved arguments compared against an intercepted call.
    pub checked: usize,
    pub mismatches: Vec<String>,
    /// Resolved arguments whose call never executed.
    pub unobserved: Vec<String>,
    pub errors: Vec<String>,
}

/// Executes `paths` under the Python interpreter with recording fakes for
/// the crypto libraries and compares every slicer-resolved argument with
/// the intercepted value.
pub fn run_oracle(paths: &[PathBuf]) -> Result<OracleReport, String> {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/oracle/intercept.py");
    let output = Command::new("python3")
        .arg(&script)
        .args(paths)
        .output()
        .map_err(|e| format!("python3: {e}"))?;
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).into_owned());
    }
    let doc: Value = serde_json::from_slice(&output.stdout).map_err(|e| e.to_string())?;
    let mut calls: BTreeMap<(String, u64, String), Vec<&Value>> = BTreeMap::new();
    for record in doc["records"].as_array().into_iter().flatten() {
        let key = (
            record["file"].as_str().unwrap_or_default().to_string(),
            record["line"].as_u64().unwrap_or_default(),
            record["callee"].as_str().unwrap_or_default().to_string(),
        );
        calls.entry(key).or_default().push(record);
    }
    let mut report = OracleReport::default();
    let catalog = Catalog::embedded();
    for path in paths {
        let bytes = fs::read(path).map_err(|e| e.to_string())?;
        let file = SourceFile::application(path, "oracle", &bytes);
        let Ok(tree) = parse_source(&file, &bytes) else { continue };
        let key = path.display().to_string();
        if let Some(err) = doc["errors"].get(&key) {
            report.errors.push(format!("{key}: {}", err.as_str().unwrap_or_default()));
        }
        let imports = ImportTable::new(&resolve_imports(&tree)).with_known_roots(catalog.known_roots());
        let sites = match_call_sites(&tree, &imports, catalog, false);
        for site in &sites.matches {
            let ArgumentLookup::Present(expr) = site.argument else { continue };
            let slice = Slicer::new(&tree, &imports).with_depth_limit(DEFAULT_DEPTH_LIMIT).resolve_expr(expr);
            let SliceOutcome::Resolved { value } = slice.outcome else { continue };
            let expected = serde_json::to_value(&value.constant).unwrap();
            let line = site.call.span().line as u64;
            let label = format!("{key}:{line} {} {}", site.callee, site.pattern.selector());
            let Some(records) = calls.get(&(key.clone(), line, site.callee.to_string())) else {
                report.unobserved.push(label);
                continue;
            };
            for record in records {
                let by_position = site.pattern.position.and_then(|p| record["args"].get(p));
                let by_keyword = site.pattern.keywords.iter().find_map(|k| record["kwargs"].get(k));
                let Some(actual) = by_position.or(by_keyword) else {
                    report.mismatches.push(format!("{label}: argument missing at run time"));
                    continue;
                };
                report.checked += 1;
                if *actual != expected {
                    report.mismatches.push(format!("{label}: slicer {expected}, interpreter {actual}"));
                }
            }
        }
    }
    Ok(report)
}

pub const CORPUS_PROJECTS: [&str; 6] = ["keystore", "ledger", "mailer", "notes", "uploader", "webshop"];

pub fn corpus_dir() -> PathBuf {
    fixture("corpus")
}

pub fn corpus_project_paths() -> Vec<PathBuf> {
    CORPUS_PROJECTS.iter().map(|p| corpus_dir().join(p)).collect()
}

/// Copies a directory tree.
pub fn copy_tree(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from).into_iter().filter_map(Result::ok) {
        let rel = entry.path().strip_prefix(from).unwrap();
        let target = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target).unwrap();
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// A synthetic project of `files` modules, each about 100 lines with one
/// crypto call.
pub fn write_synthetic_project(root: &Path, files: usize) {
    for i in 0..files {
        let dir = root.join(format!("pkg{:02}", i / 100));
        fs::create_dir_all(&dir).unwrap();
        let mut text = String::from("import os\nimport json\nfrom Crypto.Cipher import AES\n\n");
        text.push_str(&format!("KEY = b'{:016}'\n\n", i));
        for f in 0..11 {
            let _ = write!(
                text,
                "\ndef helper_{f}(items, scale={f}):\n    total = 0\n    for item in items:\n        total += item * scale\n    data = {{'total': total, 'n': len(items)}}\n    text = json.dumps(data)\n    return text.upper()\n\n"
            );
        }
        text.push_str("\ndef seal(payload):\n    iv = os.urandom(16)\n    return AES.new(KEY, AES.MODE_CBC, iv).encrypt(payload)\n");
        fs::write(dir.join(format!("module_{i:04}.py")), text).unwrap();
    }
}
