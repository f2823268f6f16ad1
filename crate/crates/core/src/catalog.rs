//! Rule and library definitions plus the declarative call-pattern catalog.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::slicer::Constant;
use crate::syntax::{qualify_callee, Callee, ImportTable, NodeKind, Position, SyntaxNode, SyntaxTree};

pub const CATALOG_VERSION: u32 = 1;

static EMBEDDED_SOURCE: &str = include_str!("../catalog/default.toml");

static EMBEDDED: Lazy<Catalog> =
    Lazy::new(|| Catalog::from_toml_str(EMBEDDED_SOURCE).expect("embedded catalog is valid"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
}

impl RuleId {
    pub const ALL: [RuleId; 6] = [RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5, RuleId::R6];

    pub fn description(self) -> &'static str {
        match self {
            RuleId::R1 => "Do not use electronic code book (ECB) mode for encryption.",
            RuleId::R2 => {
                "Do not use a non-random initialization vector (IV) for ciphertext block chaining (CBC) encryption."
            }
            RuleId::R3 => "Do not use constant encryption keys.",
            RuleId::R4 => "Do not use constant salts for password-based encryption (PBE).",
            RuleId::R5 => "Do not use fewer than 1,000 iterations for PBE.",
            RuleId::R6 => "Do not use static seeds to initialize secure random generator.",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", self.index() + 1)
    }
}

impl FromStr for RuleId {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CatalogError::UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LibraryId {
    #[serde(rename = "cryptography")]
    Cryptography,
    M2Crypto,
    PyCrypto,
    PyNaCl,
    #[serde(rename = "ucryptolib")]
    Ucryptolib,
}

impl LibraryId {
    pub const ALL: [LibraryId; 5] = [
        LibraryId::Cryptography,
        LibraryId::M2Crypto,
        LibraryId::PyCrypto,
        LibraryId::PyNaCl,
        LibraryId::Ucryptolib,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LibraryId::Cryptography => "cryptography",
            LibraryId::M2Crypto => "M2Crypto",
            LibraryId::PyCrypto => "PyCrypto",
            LibraryId::PyNaCl => "PyNaCl",
            LibraryId::Ucryptolib => "ucryptolib",
        }
    }

    /// Dotted module prefixes used to attribute a callee to this library.
    pub fn module_prefixes(self) -> &'static [&'static str] {
        match self {
            LibraryId::Cryptography => &["cryptography"],
            LibraryId::M2Crypto => &["M2Crypto"],
            LibraryId::PyCrypto => &["Crypto"],
            LibraryId::PyNaCl => &["nacl"],
            LibraryId::Ucryptolib => &["ucryptolib", "cryptolib"],
        }
    }

    pub fn owns(self, callee: &str) -> bool {
        self.module_prefixes()
            .iter()
            .any(|p| callee == *p || callee.strip_prefix(p).is_some_and(|rest| rest.starts_with('.')))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LibraryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Library/rule coverage matrix. R6 is structurally impossible through
/// every supported Python API.
pub fn applicable_rules(library: LibraryId) -> BTreeSet<RuleId> {
    use RuleId::*;
    let rules: &[RuleId] = match library {
        LibraryId::Cryptography | LibraryId::M2Crypto | LibraryId::PyCrypto => &[R1, R2, R3, R4, R5],
        LibraryId::PyNaCl => &[R3, R4],
        LibraryId::Ucryptolib => &[R1, R2, R3],
    };
    rules.iter().copied().collect()
}

pub fn is_covered(rule: RuleId, library: LibraryId) -> bool {
    applicable_rules(library).contains(&rule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredicateId {
    IsEcbModeConstant,
    IsConstantBytes,
    IsLowIterationCount,
    IsConstantOrMissingSalt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Insecure,
    Secure,
}

/// The predicate was handed a constant of a kind it cannot judge.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("predicate {predicate:?} expects {expected}, got {found}")]
pub struct KindMismatch {
    pub predicate: PredicateId,
    pub expected: &'static str,
    pub found: &'static str,
}

/// Iteration counts strictly below this are insecure.
pub const MIN_ITERATIONS: i64 = 1000;

impl PredicateId {
    pub fn evaluate(self, value: &Constant) -> Result<Verdict, KindMismatch> {
        let mismatch = |expected| KindMismatch { predicate: self, expected, found: value.kind_name() };
        match self {
            PredicateId::IsEcbModeConstant => match value {
                Constant::EnumConst(path) => {
                    let last = path.rsplit('.').next().unwrap_or(path);
                    Ok(if last == "MODE_ECB" || last == "ECB" { Verdict::Insecure } else { Verdict::Secure })
                }
                // MODE_ECB is 1 in both PyCrypto and ucryptolib.
                Constant::Int(mode) => Ok(if *mode == 1 { Verdict::Insecure } else { Verdict::Secure }),
                // M2Crypto cipher names, e.g. "aes_128_ecb".
                Constant::Str(name) => Ok(if name.to_ascii_lowercase().contains("ecb") {
                    Verdict::Insecure
                } else {
                    Verdict::Secure
                }),
                Constant::Bytes(_) => Err(mismatch("a mode constant, integer or cipher name")),
            },
            PredicateId::IsConstantBytes | PredicateId::IsConstantOrMissingSalt => match value {
                Constant::Bytes(_) | Constant::Str(_) => Ok(Verdict::Insecure),
                _ => Err(mismatch("bytes")),
            },
            PredicateId::IsLowIterationCount => match value {
                Constant::Int(n) => Ok(if *n < MIN_ITERATIONS { Verdict::Insecure } else { Verdict::Secure }),
                _ => Err(mismatch("an integer")),
            },
        }
    }

    /// Whether a value computed at run time (a call result, a subscript, ...)
    /// satisfies the predicate. Only constancy predicates can tell.
    pub fn runtime_value_is_secure(self) -> bool {
        matches!(self, PredicateId::IsConstantBytes | PredicateId::IsConstantOrMissingSalt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsentPolicy {
    /// An omitted argument is not a finding.
    #[default]
    Skip,
    /// An omitted argument falls back to an insecure library default.
    Flag,
}

/// Selects the security-relevant argument of a call.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArgSelector {
    pub position: Option<usize>,
    pub keywords: Vec<String>,
}

impl fmt::Display for ArgSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.position, self.keywords.first()) {
            (Some(p), Some(k)) => write!(f, "#{p}/{k}"),
            (Some(p), None) => write!(f, "#{p}"),
            (None, Some(k)) => write!(f, "{k}"),
            (None, None) => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallPattern {
    pub id: String,
    pub rule: RuleId,
    pub library: LibraryId,
    pub callee: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    pub predicate: PredicateId,
    #[serde(default)]
    pub on_absent: AbsentPolicy,
    #[serde(default)]
    pub signature: String,
}

impl CallPattern {
    pub fn selector(&self) -> ArgSelector {
        ArgSelector { position: self.position, keywords: self.keywords.clone() }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("catalog serialization: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported catalog version {0} (expected {CATALOG_VERSION})")]
    UnsupportedVersion(u32),
    #[error("pattern `{id}`: {library} cannot express {rule}")]
    UncoveredCell { id: String, rule: RuleId, library: LibraryId },
    #[error("pattern `{id}`: callee `{callee}` is outside the {library} modules")]
    ForeignCallee { id: String, callee: String, library: LibraryId },
    #[error("callee `{callee}` is claimed by both {first} and {second}")]
    AmbiguousCallee { callee: String, first: LibraryId, second: LibraryId },
    #[error("duplicate pattern id `{0}`")]
    DuplicateId(String),
    #[error("pattern `{0}` selects no argument")]
    NoSelector(String),
    #[error("{library} has no patterns for {rule}: the API does not expose this misuse")]
    EmptyCoverage { rule: RuleId, library: LibraryId },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDocument {
    version: u32,
    #[serde(default, rename = "pattern")]
    patterns: Vec<CallPattern>,
}

/// Immutable set of call patterns with a callee index.
#[derive(Debug, Clone)]
pub struct Catalog {
    patterns: Vec<CallPattern>,
    by_callee: HashMap<String, Vec<usize>>,
}

impl Catalog {
    /// The catalog compiled into the binary.
    pub fn embedded() -> &'static Catalog {
        &EMBEDDED
    }

    pub fn from_toml_str(text: &str) -> Result<Catalog, CatalogError> {
        let doc: CatalogDocument = toml::from_str(text)?;
        if doc.version != CATALOG_VERSION {
            return Err(CatalogError::UnsupportedVersion(doc.version));
        }
        Catalog::from_patterns(doc.patterns)
    }

    pub fn from_patterns(patterns: Vec<CallPattern>) -> Result<Catalog, CatalogError> {
        let mut ids = BTreeSet::new();
        let mut owner: HashMap<&str, LibraryId> = HashMap::new();
        for p in &patterns {
            if !ids.insert(p.id.as_str()) {
                return Err(CatalogError::DuplicateId(p.id.clone()));
            }
            if !is_covered(p.rule, p.library) {
                return Err(CatalogError::UncoveredCell { id: p.id.clone(), rule: p.rule, library: p.library });
            }
            if !p.library.owns(&p.callee) {
                return Err(CatalogError::ForeignCallee {
                    id: p.id.clone(),
                    callee: p.callee.clone(),
                    library: p.library,
                });
            }
            if p.position.is_none() && p.keywords.is_empty() {
                return Err(CatalogError::NoSelector(p.id.clone()));
            }
            if let Some(&first) = owner.get(p.callee.as_str()) {
                if first != p.library {
                    return Err(CatalogError::AmbiguousCallee {
                        callee: p.callee.clone(),
                        first,
                        second: p.library,
                    });
                }
            }
            owner.insert(&p.callee, p.library);
        }
        let mut by_callee: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, p) in patterns.iter().enumerate() {
            by_callee.entry(p.callee.clone()).or_default().push(i);
        }
        Ok(Catalog { patterns, by_callee })
    }

    /// The embedded catalog plus the patterns of `text`.
    pub fn extended_with(&self, text: &str) -> Result<Catalog, CatalogError> {
        let doc: CatalogDocument = toml::from_str(text)?;
        if doc.version != CATALOG_VERSION {
            return Err(CatalogError::UnsupportedVersion(doc.version));
        }
        let mut patterns = self.patterns.clone();
        patterns.extend(doc.patterns);
        Catalog::from_patterns(patterns)
    }

    pub fn to_toml_string(&self) -> Result<String, CatalogError> {
        let doc = CatalogDocument { version: CATALOG_VERSION, patterns: self.patterns.clone() };
        Ok(toml::to_string(&doc)?)
    }

    pub fn patterns(&self) -> &[CallPattern] {
        &self.patterns
    }

    pub fn patterns_for(&self, rule: RuleId, library: LibraryId) -> Result<Vec<&CallPattern>, CatalogError> {
        if !is_covered(rule, library) {
            return Err(CatalogError::EmptyCoverage { rule, library });
        }
        Ok(self.patterns.iter().filter(|p| p.rule == rule && p.library == library).collect())
    }

    pub fn patterns_for_callee(&self, callee: &str) -> impl Iterator<Item = &CallPattern> {
        self.by_callee
            .get(callee)
            .into_iter()
            .flatten()
            .map(move |&i| &self.patterns[i])
    }

    /// First segments of every library prefix (`Crypto`, `nacl`, ...).
    pub fn known_roots(&self) -> BTreeSet<&'static str> {
        LibraryId::ALL
            .iter()
            .flat_map(|l| l.module_prefixes().iter())
            .map(|p| p.split('.').next().unwrap_or(p))
            .collect()
    }

    /// Final callee segments, used by the textual candidate pre-filter.
    pub fn callee_names(&self) -> BTreeSet<&str> {
        self.patterns
            .iter()
            .map(|p| p.callee.rsplit('.').next().unwrap_or(&p.callee))
            .collect()
    }

    /// Callees whose dotted suffix equals `dotted` (bare-name matching).
    fn callees_with_suffix<'a>(&'a self, dotted: &str) -> impl Iterator<Item = &'a str> + 'a {
        let dotted = dotted.to_string();
        self.by_callee.keys().map(String::as_str).filter(move |c| {
            let dotted = dotted.as_str();
            *c == dotted || c.strip_suffix(dotted).is_some_and(|head| head.ends_with('.'))
        })
    }
}

/// How the selected argument appears at a call site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgumentLookup<'t> {
    Present(SyntaxNode<'t>),
    /// Omitted; the library default applies.
    Absent,
    /// Possibly supplied through `*args` / `**kwargs`.
    Unknown,
}

#[derive(Debug, Clone, Copy)]
pub struct CallMatch<'t, 'c> {
    pub call: SyntaxNode<'t>,
    pub callee: &'c str,
    pub pattern: &'c CallPattern,
    pub argument: ArgumentLookup<'t>,
}

/// Diagnostic attached to a file without producing a finding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Note {
    pub position: Position,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct CallSites<'t, 'c> {
    pub matches: Vec<CallMatch<'t, 'c>>,
    pub notes: Vec<Note>,
}

/// The call passes the selected argument both positionally and by keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("argument passed both positionally and by keyword")]
pub struct ArgumentConflict;

/// Locates the argument `selector` picks out of `call`.
pub fn select_argument<'t>(
    call: SyntaxNode<'t>,
    selector: &ArgSelector,
) -> Result<ArgumentLookup<'t>, ArgumentConflict> {
    let mut positional = Vec::new();
    let mut list_splat_at = None;
    let mut has_dict_splat = false;
    let mut keyword = None;
    for arg in call.arguments() {
        match (arg.field(), arg.raw_kind()) {
            (Some("arg"), "list_splat") => {
                list_splat_at.get_or_insert(positional.len());
            }
            (Some("arg"), _) => positional.push(arg),
            (Some("kwarg"), "dictionary_splat") => has_dict_splat = true,
            (Some("kwarg"), _) if arg.kind() == NodeKind::Keyword => {
                let name = arg.child_by_field("name").map(|n| n.text());
                if name.is_some_and(|n| selector.keywords.iter().any(|k| k == n)) {
                    keyword = arg.child_by_field("value");
                }
            }
            _ => {}
        }
    }
    let by_position = selector.position.and_then(|p| match list_splat_at {
        Some(splat) if splat <= p => None,
        _ => positional.get(p).copied(),
    });
    match (keyword, by_position) {
        (Some(_), Some(_)) => Err(ArgumentConflict),
        (Some(value), None) | (None, Some(value)) => Ok(ArgumentLookup::Present(value)),
        (None, None) => {
            let splat_covers_position =
                selector.position.is_some_and(|p| list_splat_at.is_some_and(|s| s <= p));
            let splat_covers_keyword = has_dict_splat && !selector.keywords.is_empty();
            if splat_covers_position || splat_covers_keyword {
                Ok(ArgumentLookup::Unknown)
            } else {
                Ok(ArgumentLookup::Absent)
            }
        }
    }
}

/// Finds every call site of the tree that a catalog pattern applies to.
///
/// Callees are matched on their import-qualified path. With `bare_names`
/// set, callees whose leading name is not bound by an import are matched by
/// dotted suffix instead, provided the suffix names a single library.
pub fn match_call_sites<'t, 'c>(
    tree: &'t SyntaxTree,
    imports: &ImportTable,
    catalog: &'c Catalog,
    bare_names: bool,
) -> CallSites<'t, 'c> {
    let mut out = CallSites::default();
    for call in tree.calls() {
        let callees: Vec<&'c str> = match qualify_callee(call, imports) {
            Callee::Qualified(q) => catalog
                .by_callee
                .get_key_value(q.as_str())
                .map(|(k, _)| k.as_str())
                .into_iter()
                .collect(),
            Callee::Unqualified(Some(dotted)) if bare_names => {
                let found: Vec<&'c str> = catalog.callees_with_suffix(&dotted).collect();
                let libraries: BTreeSet<LibraryId> = found
                    .iter()
                    .flat_map(|c| catalog.patterns_for_callee(c).map(|p| p.library))
                    .collect();
                if libraries.len() > 1 {
                    out.notes.push(Note {
                        position: call.span().position(),
                        message: format!("bare callee `{dotted}` is ambiguous across libraries; skipped"),
                    });
                    continue;
                }
                found
            }
            Callee::Unqualified(_) => continue,
        };
        for callee in callees {
            for pattern in catalog.patterns_for_callee(callee) {
                match select_argument(call, &pattern.selector()) {
                    Ok(argument) => out.matches.push(CallMatch { call, callee, pattern, argument }),
                    Err(ArgumentConflict) => out.notes.push(Note {
                        position: call.span().position(),
                        message: format!(
                            "`{}` passes argument {} both positionally and by keyword; skipped",
                            callee,
                            pattern.selector()
                        ),
                    }),
                }
            }
        }
    }
    out
}
