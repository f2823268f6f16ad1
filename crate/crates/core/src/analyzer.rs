//! Per-file analysis: match call sites, slice their arguments and classify.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use crate::catalog::{
    match_call_sites, AbsentPolicy, ArgumentLookup, CallMatch, Catalog, LibraryId, Note, PredicateId, RuleId,
    Verdict,
};
use crate::slicer::{
    CallerEvidence, ConstValue, SliceOutcome, SliceResult, SliceStep, Slicer, UnresolvedReason, DEFAULT_DEPTH_LIMIT,
};
use crate::syntax::{
    parse_source_with_limit, resolve_imports, ImportTable, ParseFailure, Position, SourceFile, SyntaxTree,
    DEFAULT_MAX_TREE_DEPTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confidence {
    /// The value could not be resolved; needs manual triage.
    Potential,
    /// The value provably folds to an insecure constant.
    Definite,
}

impl std::fmt::Display for Confidence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Confidence::Potential => "potential",
            Confidence::Definite => "definite",
        })
    }
}

/// Outcome of applying a predicate to a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Definite,
    Potential,
    Compliant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: RuleId,
    pub library: LibraryId,
    /// Id of the catalog pattern that matched.
    pub pattern: String,
    pub file: SourceFile,
    /// Start of the call expression.
    pub position: Position,
    /// Qualified callee path.
    pub callee: String,
    /// The argument the pattern inspects, e.g. `#1/mode`.
    pub argument: String,
    pub confidence: Confidence,
    pub resolved: Option<ConstValue>,
    /// The argument is omitted and the library default is insecure.
    pub implicit_default: bool,
    pub trace: Vec<SliceStep>,
    /// Why a potential finding could not be resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<UnresolvedReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub callers: Vec<CallerEvidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Finding {
    /// Python-style rendering of the resolved value.
    pub fn resolved_text(&self) -> Option<String> {
        self.resolved.as_ref().map(|v| v.constant.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub rules: BTreeSet<RuleId>,
    /// Match callees whose leading name is not bound by an import.
    pub bare_name_match: bool,
    /// Report an omitted block mode that defaults to ECB.
    pub implicit_ecb: bool,
    pub depth_limit: usize,
    pub max_tree_depth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            rules: RuleId::ALL.into_iter().collect(),
            bare_name_match: false,
            implicit_ecb: true,
            depth_limit: DEFAULT_DEPTH_LIMIT,
            max_tree_depth: DEFAULT_MAX_TREE_DEPTH,
        }
    }
}

/// Findings and diagnostics of one file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileAnalysis {
    pub findings: Vec<Finding>,
    pub notes: Vec<Note>,
    /// Number of (call, pattern) pairs examined.
    pub matched_calls: usize,
}

pub fn classify(slice: &SliceResult, predicate: PredicateId) -> Classification {
    match &slice.outcome {
        SliceOutcome::Resolved { value } => match predicate.evaluate(&value.constant) {
            Ok(Verdict::Insecure) => Classification::Definite,
            Ok(Verdict::Secure) => Classification::Compliant,
            Err(_) => Classification::Potential,
        },
        SliceOutcome::Runtime { .. } if predicate.runtime_value_is_secure() => Classification::Compliant,
        SliceOutcome::Runtime { .. } | SliceOutcome::Unresolved { .. } => Classification::Potential,
        // Omitted arguments are decided by the pattern's absent policy.
        SliceOutcome::Absent => Classification::Compliant,
    }
}

/// Parses and analyzes one file.
pub fn analyze_source(
    file: &SourceFile,
    bytes: &[u8],
    catalog: &Catalog,
    config: &Config,
) -> Result<FileAnalysis, ParseFailure> {
    let tree = parse_source_with_limit(file, bytes, config.max_tree_depth)?;
    Ok(analyze_file(&tree, file, catalog, config))
}

pub fn analyze_file(tree: &SyntaxTree, file: &SourceFile, catalog: &Catalog, config: &Config) -> FileAnalysis {
    let imports = ImportTable::new(&resolve_imports(tree)).with_known_roots(catalog.known_roots());
    let sites = match_call_sites(tree, &imports, catalog, config.bare_name_match);
    let mut out = FileAnalysis { notes: sites.notes, ..FileAnalysis::default() };
    for site in sites.matches.iter().filter(|m| config.rules.contains(&m.pattern.rule)) {
        out.matched_calls += 1;
        let position = site.call.span().position();
        let result = panic::catch_unwind(AssertUnwindSafe(|| analyze_match(tree, &imports, site, file, config)));
        match result {
            Ok(Some(finding)) => {
                if let Some(note) = &finding.note {
                    out.notes.push(Note { position, message: format!("{}: {note}", finding.pattern) });
                }
                out.findings.push(finding);
            }
            Ok(None) => {}
            Err(_) => {
                let mut finding = base_finding(site, file, Confidence::Potential);
                finding.reason = Some(UnresolvedReason::DynamicValue);
                finding.note = Some("internal fault while slicing".to_string());
                out.notes.push(Note { position, message: format!("{}: slicer fault", site.pattern.id) });
                out.findings.push(finding);
            }
        }
    }
    out.findings.sort_by(|a, b| {
        (a.position, a.rule, &a.pattern, &a.argument).cmp(&(b.position, b.rule, &b.pattern, &b.argument))
    });
    out.notes.sort();
    out.notes.dedup();
    out
}

fn base_finding(site: &CallMatch<'_, '_>, file: &SourceFile, confidence: Confidence) -> Finding {
    Finding {
        rule: site.pattern.rule,
        library: site.pattern.library,
        pattern: site.pattern.id.clone(),
        file: file.clone(),
        position: site.call.span().position(),
        callee: site.callee.to_string(),
        argument: site.pattern.selector().to_string(),
        confidence,
        resolved: None,
        implicit_default: false,
        trace: Vec::new(),
        reason: None,
        callers: Vec::new(),
        note: None,
    }
}

fn analyze_match(
    tree: &SyntaxTree,
    imports: &ImportTable,
    site: &CallMatch<'_, '_>,
    file: &SourceFile,
    config: &Config,
) -> Option<Finding> {
    let pattern = site.pattern;
    if site.argument == ArgumentLookup::Absent {
        let flag = match pattern.on_absent {
            AbsentPolicy::Skip => false,
            AbsentPolicy::Flag => pattern.rule != RuleId::R1 || config.implicit_ecb,
        };
        return flag.then(|| {
            let mut finding = base_finding(site, file, Confidence::Definite);
            finding.implicit_default = true;
            finding
        });
    }
    let slice = match site.argument {
        ArgumentLookup::Present(expr) => {
            Slicer::new(tree, imports).with_depth_limit(config.depth_limit).resolve_expr(expr)
        }
        _ => SliceResult {
            outcome: SliceOutcome::Unresolved { reason: UnresolvedReason::DynamicValue },
            trace: Vec::new(),
            callers: Vec::new(),
        },
    };
    let confidence = match classify(&slice, pattern.predicate) {
        Classification::Compliant => return None,
        Classification::Definite => Confidence::Definite,
        Classification::Potential => Confidence::Potential,
    };
    let mut finding = base_finding(site, file, confidence);
    finding.trace = slice.trace;
    finding.callers = slice.callers;
    match slice.outcome {
        SliceOutcome::Resolved { value } => match pattern.predicate.evaluate(&value.constant) {
            Ok(_) => finding.resolved = Some(value),
            Err(mismatch) => {
                finding.reason = Some(UnresolvedReason::DynamicValue);
                finding.note = Some(format!("{mismatch}: {}", value.constant));
            }
        },
        SliceOutcome::Runtime { expr } => {
            finding.reason = Some(UnresolvedReason::DynamicValue);
            finding.note = Some(format!("computed at run time: {expr}"));
        }
        SliceOutcome::Unresolved { reason } => finding.reason = Some(reason),
        SliceOutcome::Absent => {}
    }
    Some(finding)
}
