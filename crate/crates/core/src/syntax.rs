//! Python source model.
//!
//! Files are parsed with tree-sitter and lowered into an owned, immutable
//! arena tree. The lowered tree keeps only named nodes, unwraps
//! parentheses and single-expression statements, and normalizes calls,
//! assignments and keyword arguments so that downstream passes never have
//! to look at grammar-specific field layouts.

use std::borrow::Cow;
use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default nesting limit applied while lowering a parse tree.
pub const DEFAULT_MAX_TREE_DEPTH: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    Application,
    Dependency,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Application => f.write_str("application"),
            Origin::Dependency => f.write_str("dependency"),
        }
    }
}

/// One Python file taking part in a scan.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    /// Project the file was collected for.
    pub project: String,
    pub origin: Origin,
    /// Distribution name, present for dependency files.
    pub package_name: Option<String>,
    /// Hex SHA-256 of the raw file bytes.
    pub content_hash: String,
}

impl SourceFile {
    pub fn application(path: impl Into<PathBuf>, project: impl Into<String>, bytes: &[u8]) -> Self {
        SourceFile {
            path: path.into(),
            project: project.into(),
            origin: Origin::Application,
            package_name: None,
            content_hash: content_hash(bytes),
        }
    }

    pub fn dependency(
        path: impl Into<PathBuf>,
        project: impl Into<String>,
        package: impl Into<String>,
        bytes: &[u8],
    ) -> Self {
        SourceFile {
            path: path.into(),
            project: project.into(),
            origin: Origin::Dependency,
            package_name: Some(package.into()),
            content_hash: content_hash(bytes),
        }
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("{path}: syntax error: {diagnostic}")]
    Syntax { path: PathBuf, diagnostic: String },
    #[error("{path}: syntax tree nesting exceeds {limit}")]
    DepthExceeded { path: PathBuf, limit: usize },
}

impl ParseFailure {
    pub fn path(&self) -> &Path {
        match self {
            ParseFailure::Syntax { path, .. } | ParseFailure::DepthExceeded { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Module,
    FunctionDef,
    Call,
    Assignment,
    Name,
    Attribute,
    Literal,
    BinaryOp,
    Keyword,
    Import,
    Other,
}

/// Source extent of a node. `line` is 1-based, `column` is a 0-based byte
/// offset within the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub line: u32,
    pub column: u32,
    pub end_line: u32,
    pub end_column: u32,
    pub start_byte: usize,
    pub end_byte: usize,
}

impl Span {
    pub fn position(&self) -> Position {
        Position { line: self.line, column: self.column }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start_byte <= other.start_byte && other.end_byte <= self.end_byte
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeData {
    kind: NodeKind,
    raw: &'static str,
    field: Option<&'static str>,
    op: Option<&'static str>,
    span: Span,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
}

/// Lowered syntax tree of a single file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    path: PathBuf,
    source: String,
    lossy: bool,
    nodes: Vec<NodeData>,
}

impl SyntaxTree {
    pub fn root(&self) -> SyntaxNode<'_> {
        self.node(NodeId(0))
    }

    pub fn node(&self, id: NodeId) -> SyntaxNode<'_> {
        SyntaxNode { tree: self, id }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the file bytes were not valid UTF-8 and were decoded lossily.
    pub fn lossy(&self) -> bool {
        self.lossy
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All nodes in pre-order.
    pub fn nodes(&self) -> impl Iterator<Item = SyntaxNode<'_>> + '_ {
        (0..self.nodes.len()).map(move |i| self.node(NodeId(i as u32)))
    }

    pub fn calls(&self) -> impl Iterator<Item = SyntaxNode<'_>> + '_ {
        self.nodes().filter(|n| n.kind() == NodeKind::Call)
    }
}

/// Borrowed view of one node.
#[derive(Clone, Copy)]
pub struct SyntaxNode<'t> {
    tree: &'t SyntaxTree,
    id: NodeId,
}

impl PartialEq for SyntaxNode<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.tree, other.tree) && self.id == other.id
    }
}

impl Eq for SyntaxNode<'_> {}

impl fmt::Debug for SyntaxNode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({}) @{}", self.kind(), self.raw_kind(), self.span().position())
    }
}

impl<'t> SyntaxNode<'t> {
    fn data(&self) -> &'t NodeData {
        &self.tree.nodes[self.id.index()]
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tree(&self) -> &'t SyntaxTree {
        self.tree
    }

    pub fn kind(&self) -> NodeKind {
        self.data().kind
    }

    /// Grammar node type this node was lowered from.
    pub fn raw_kind(&self) -> &'static str {
        self.data().raw
    }

    /// Role of this node inside its parent (`"callee"`, `"value"`, `"body"`, ...).
    pub fn field(&self) -> Option<&'static str> {
        self.data().field
    }

    /// Operator token for binary, unary and augmented-assignment nodes.
    pub fn operator(&self) -> Option<&'static str> {
        self.data().op
    }

    pub fn span(&self) -> Span {
        self.data().span
    }

    pub fn text(&self) -> &'t str {
        let span = self.data().span;
        &self.tree.source[span.start_byte..span.end_byte]
    }

    pub fn is_leaf(&self) -> bool {
        self.data().children.is_empty()
    }

    pub fn parent(&self) -> Option<SyntaxNode<'t>> {
        self.data().parent.map(|id| self.tree.node(id))
    }

    pub fn ancestors(&self) -> impl Iterator<Item = SyntaxNode<'t>> + 't {
        let tree = self.tree;
        std::iter::successors(self.parent(), move |n| n.data().parent.map(|id| tree.node(id)))
    }

    pub fn children(&self) -> impl DoubleEndedIterator<Item = SyntaxNode<'t>> + ExactSizeIterator + 't {
        let tree = self.tree;
        self.data().children.iter().map(move |&id| tree.node(id))
    }

    pub fn child(&self, index: usize) -> Option<SyntaxNode<'t>> {
        self.data().children.get(index).map(|&id| self.tree.node(id))
    }

    pub fn child_by_field(&self, field: &str) -> Option<SyntaxNode<'t>> {
        self.children().find(|c| c.field() == Some(field))
    }

    pub fn children_by_field<'a>(&self, field: &'a str) -> impl Iterator<Item = SyntaxNode<'t>> + 'a
    where
        't: 'a,
    {
        self.children().filter(move |c| c.field() == Some(field))
    }

    /// Pre-order traversal of this subtree, including `self`.
    pub fn descendants(&self) -> impl Iterator<Item = SyntaxNode<'t>> + 't {
        // Nodes are stored in pre-order, so a subtree is a contiguous range.
        let tree = self.tree;
        let start = self.id.index();
        let end = self.subtree_end();
        (start..end).map(move |i| tree.node(NodeId(i as u32)))
    }

    fn subtree_end(&self) -> usize {
        let mut node = *self;
        loop {
            match node.data().children.last() {
                Some(&last) => node = self.tree.node(last),
                None => return node.id.index() + 1,
            }
        }
    }

    pub fn is_ancestor_of(&self, other: &SyntaxNode<'_>) -> bool {
        let start = self.id.index();
        let idx = other.id.index();
        idx > start && idx < self.subtree_end()
    }

    pub fn callee(&self) -> Option<SyntaxNode<'t>> {
        if self.kind() != NodeKind::Call {
            return None;
        }
        self.child_by_field("callee")
    }

    /// Call arguments in order: positional (including `*splat`) first, then
    /// keyword arguments and `**splat`.
    pub fn arguments(&self) -> impl Iterator<Item = SyntaxNode<'t>> + 't {
        self.children().filter(|c| matches!(c.field(), Some("arg") | Some("kwarg")))
    }

    /// Dotted form of a name or attribute chain (`Crypto.Cipher.AES.new`).
    pub fn dotted_path(&self) -> Option<String> {
        match self.kind() {
            NodeKind::Name => Some(self.text().to_string()),
            NodeKind::Attribute => {
                let object = self.child_by_field("object")?;
                let attr = self.child_by_field("attr")?;
                let mut path = object.dotted_path()?;
                path.push('.');
                path.push_str(attr.text());
                Some(path)
            }
            _ => None,
        }
    }
}

thread_local! {
    static PARSER: RefCell<Option<tree_sitter::Parser>> = const { RefCell::new(None) };
}

/// Parses a Python file. Invalid UTF-8 is decoded lossily and the event is
/// visible through [`SyntaxTree::lossy`].
pub fn parse_source(file: &SourceFile, bytes: &[u8]) -> Result<SyntaxTree, ParseFailure> {
    parse_source_with_limit(file, bytes, DEFAULT_MAX_TREE_DEPTH)
}

pub fn parse_source_with_limit(
    file: &SourceFile,
    bytes: &[u8],
    max_depth: usize,
) -> Result<SyntaxTree, ParseFailure> {
    let (source, lossy) = match String::from_utf8_lossy(bytes) {
        Cow::Borrowed(s) => (s.to_string(), false),
        Cow::Owned(s) => (s, true),
    };
    let ts_tree = PARSER.with(|cell| {
        let mut slot = cell.borrow_mut();
        let parser = slot.get_or_insert_with(|| {
            let mut parser = tree_sitter::Parser::new();
            parser
                .set_language(&tree_sitter_python::LANGUAGE.into())
                .expect("tree-sitter-python grammar is ABI compatible");
            parser
        });
        parser.parse(source.as_bytes(), None)
    });
    let Some(ts_tree) = ts_tree else {
        return Err(ParseFailure::Syntax {
            path: file.path.clone(),
            diagnostic: "parser produced no tree".into(),
        });
    };
    let root = ts_tree.root_node();
    if root.has_error() {
        return Err(ParseFailure::Syntax {
            path: file.path.clone(),
            diagnostic: describe_error(root),
        });
    }
    let mut lower = Lowering { nodes: Vec::new(), max_depth };
    match lower.lower(root, None, None, 0) {
        Ok(_) => Ok(SyntaxTree { path: file.path.clone(), source, lossy, nodes: lower.nodes }),
        Err(TooDeep) => Err(ParseFailure::DepthExceeded { path: file.path.clone(), limit: max_depth }),
    }
}

fn describe_error(root: tree_sitter::Node<'_>) -> String {
    let mut cursor = root.walk();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() || node.is_missing() {
            let pos = node.start_position();
            let what = if node.is_missing() {
                format!("missing `{}`", node.kind())
            } else {
                "unexpected input".to_string()
            };
            return format!("{} at line {}, column {}", what, pos.row + 1, pos.column);
        }
        if node.has_error() {
            let children: Vec<_> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    "invalid syntax".to_string()
}

struct TooDeep;

struct Lowering {
    nodes: Vec<NodeData>,
    max_depth: usize,
}

fn ts_span(node: tree_sitter::Node<'_>) -> Span {
    let start = node.start_position();
    let end = node.end_position();
    Span {
        line: start.row as u32 + 1,
        column: start.column as u32,
        end_line: end.row as u32 + 1,
        end_column: end.column as u32,
        start_byte: node.start_byte(),
        end_byte: node.end_byte(),
    }
}

fn named_children<'a>(node: tree_sitter::Node<'a>) -> Vec<(Option<&'static str>, tree_sitter::Node<'a>)> {
    let mut cursor = node.walk();
    let mut out = Vec::new();
    if cursor.goto_first_child() {
        loop {
            let child = cursor.node();
            if child.is_named() && child.kind() != "comment" {
                out.push((cursor.field_name(), child));
            }
            if !cursor.goto_next_sibling() {
                break;
            }
        }
    }
    out
}

impl Lowering {
    fn push(
        &mut self,
        kind: NodeKind,
        ts: tree_sitter::Node<'_>,
        field: Option<&'static str>,
        parent: Option<NodeId>,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeData {
            kind,
            raw: ts.kind(),
            field,
            op: None,
            span: ts_span(ts),
            parent,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p.index()].children.push(id);
        }
        id
    }

    fn lower(
        &mut self,
        ts: tree_sitter::Node<'_>,
        field: Option<&'static str>,
        parent: Option<NodeId>,
        depth: usize,
    ) -> Result<Option<NodeId>, TooDeep> {
        if depth > self.max_depth {
            return Err(TooDeep);
        }
        let next = depth + 1;
        let raw = ts.kind();
        match raw {
            "comment" => Ok(None),
            "expression_statement" | "parenthesized_expression" => {
                let inner = named_children(ts);
                if inner.len() == 1 {
                    return self.lower(inner[0].1, field, parent, next);
                }
                self.generic(NodeKind::Other, ts, field, parent, next).map(Some)
            }
            "module" => self.generic(NodeKind::Module, ts, field, parent, next).map(Some),
            "function_definition" => self.generic(NodeKind::FunctionDef, ts, field, parent, next).map(Some),
            "identifier" => Ok(Some(self.push(NodeKind::Name, ts, field, parent))),
            "integer" | "float" | "true" | "false" | "none" => {
                Ok(Some(self.push(NodeKind::Literal, ts, field, parent)))
            }
            "string" => {
                let id = self.push(NodeKind::Literal, ts, field, parent);
                // Only f-string interpolations carry children worth keeping.
                for (_, child) in named_children(ts) {
                    if child.kind() == "interpolation" {
                        for (_, expr) in named_children(child) {
                            if expr.kind() != "format_specifier" && expr.kind() != "type_conversion" {
                                self.lower(expr, Some("interpolation"), Some(id), next)?;
                            }
                        }
                    }
                }
                Ok(Some(id))
            }
            "concatenated_string" => {
                let id = self.push(NodeKind::Literal, ts, field, parent);
                for (_, child) in named_children(ts) {
                    self.lower(child, Some("part"), Some(id), next)?;
                }
                Ok(Some(id))
            }
            "attribute" => {
                let id = self.push(NodeKind::Attribute, ts, field, parent);
                if let Some(object) = ts.child_by_field_name("object") {
                    self.lower(object, Some("object"), Some(id), next)?;
                }
                if let Some(attr) = ts.child_by_field_name("attribute") {
                    self.lower(attr, Some("attr"), Some(id), next)?;
                }
                Ok(Some(id))
            }
            "call" => self.lower_call(ts, field, parent, next).map(Some),
            "keyword_argument" => {
                let id = self.push(NodeKind::Keyword, ts, field, parent);
                if let Some(name) = ts.child_by_field_name("name") {
                    self.lower(name, Some("name"), Some(id), next)?;
                }
                if let Some(value) = ts.child_by_field_name("value") {
                    self.lower(value, Some("value"), Some(id), next)?;
                }
                Ok(Some(id))
            }
            "binary_operator" => {
                let id = self.push(NodeKind::BinaryOp, ts, field, parent);
                self.nodes[id.index()].op = ts.child_by_field_name("operator").map(|o| o.kind());
                if let Some(left) = ts.child_by_field_name("left") {
                    self.lower(left, Some("left"), Some(id), next)?;
                }
                if let Some(right) = ts.child_by_field_name("right") {
                    self.lower(right, Some("right"), Some(id), next)?;
                }
                Ok(Some(id))
            }
            "unary_operator" => {
                let id = self.push(NodeKind::Other, ts, field, parent);
                self.nodes[id.index()].op = ts.child_by_field_name("operator").map(|o| o.kind());
                if let Some(arg) = ts.child_by_field_name("argument") {
                    self.lower(arg, Some("argument"), Some(id), next)?;
                }
                Ok(Some(id))
            }
            "assignment" => self.lower_assignment(ts, field, parent, next).map(Some),
            "augmented_assignment" => {
                let id = self.push(NodeKind::Assignment, ts, field, parent);
                self.nodes[id.index()].op = ts.child_by_field_name("operator").map(|o| o.kind());
                if let Some(left) = ts.child_by_field_name("left") {
                    self.lower(left, Some("target"), Some(id), next)?;
                }
                if let Some(right) = ts.child_by_field_name("right") {
                    self.lower(right, Some("value"), Some(id), next)?;
                }
                Ok(Some(id))
            }
            "import_statement" | "import_from_statement" | "future_import_statement" => {
                self.generic(NodeKind::Import, ts, field, parent, next).map(Some)
            }
            _ => self.generic(NodeKind::Other, ts, field, parent, next).map(Some),
        }
    }

    fn generic(
        &mut self,
        kind: NodeKind,
        ts: tree_sitter::Node<'_>,
        field: Option<&'static str>,
        parent: Option<NodeId>,
        depth: usize,
    ) -> Result<NodeId, TooDeep> {
        let id = self.push(kind, ts, field, parent);
        for (child_field, child) in named_children(ts) {
            self.lower(child, child_field, Some(id), depth)?;
        }
        Ok(id)
    }

    fn lower_call(
        &mut self,
        ts: tree_sitter::Node<'_>,
        field: Option<&'static str>,
        parent: Option<NodeId>,
        depth: usize,
    ) -> Result<NodeId, TooDeep> {
        let id = self.push(NodeKind::Call, ts, field, parent);
        if let Some(function) = ts.child_by_field_name("function") {
            self.lower(function, Some("callee"), Some(id), depth)?;
        }
        if let Some(args) = ts.child_by_field_name("arguments") {
            if args.kind() == "argument_list" {
                let children = named_children(args);
                let (keywords, positional): (Vec<_>, Vec<_>) = children
                    .into_iter()
                    .partition(|(_, c)| matches!(c.kind(), "keyword_argument" | "dictionary_splat"));
                for (_, arg) in positional {
                    self.lower(arg, Some("arg"), Some(id), depth)?;
                }
                for (_, arg) in keywords {
                    self.lower(arg, Some("kwarg"), Some(id), depth)?;
                }
            } else {
                // Bare generator argument: `f(x for x in y)`.
                self.lower(args, Some("arg"), Some(id), depth)?;
            }
        }
        Ok(id)
    }

    fn lower_assignment(
        &mut self,
        ts: tree_sitter::Node<'_>,
        field: Option<&'static str>,
        parent: Option<NodeId>,
        depth: usize,
    ) -> Result<NodeId, TooDeep> {
        let Some(mut right) = ts.child_by_field_name("right") else {
            // Bare annotation (`x: int`) binds nothing.
            let id = self.push(NodeKind::Other, ts, field, parent);
            if let Some(left) = ts.child_by_field_name("left") {
                self.lower(left, Some("target"), Some(id), depth)?;
            }
            return Ok(id);
        };
        let id = self.push(NodeKind::Assignment, ts, field, parent);
        let mut targets = Vec::new();
        if let Some(left) = ts.child_by_field_name("left") {
            targets.push(left);
        }
        // `a = b = value` nests in the grammar; flatten it.
        while right.kind() == "assignment" {
            match (right.child_by_field_name("left"), right.child_by_field_name("right")) {
                (Some(l), Some(r)) => {
                    targets.push(l);
                    right = r;
                }
                _ => break,
            }
        }
        for target in targets {
            self.lower(target, Some("target"), Some(id), depth)?;
        }
        self.lower(right, Some("value"), Some(id), depth)?;
        Ok(id)
    }
}

/// `local_name` bound by an import to `qualified_path`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImportBinding {
    pub local_name: String,
    pub qualified_path: String,
}

fn compact(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace() && *c != '\\').collect()
}

/// Collects import bindings of the file. Later imports of the same local
/// name replace earlier ones; wildcard imports bind nothing.
pub fn resolve_imports(tree: &SyntaxTree) -> Vec<ImportBinding> {
    let mut bindings: Vec<ImportBinding> = Vec::new();
    let mut bind = |local: String, qualified: String| {
        if local.is_empty() || qualified.is_empty() {
            return;
        }
        if let Some(existing) = bindings.iter_mut().find(|b| b.local_name == local) {
            existing.qualified_path = qualified;
        } else {
            bindings.push(ImportBinding { local_name: local, qualified_path: qualified });
        }
    };
    for node in tree.nodes().filter(|n| n.kind() == NodeKind::Import) {
        match node.raw_kind() {
            "import_statement" => {
                for item in node.children_by_field("name") {
                    match item.raw_kind() {
                        "aliased_import" => {
                            let (Some(name), Some(alias)) =
                                (item.child_by_field("name"), item.child_by_field("alias"))
                            else {
                                continue;
                            };
                            bind(alias.text().to_string(), compact(name.text()));
                        }
                        _ => {
                            // `import a.b.c` binds only `a`.
                            let path = compact(item.text());
                            let head = path.split('.').next().unwrap_or_default().to_string();
                            bind(head.clone(), head);
                        }
                    }
                }
            }
            "import_from_statement" => {
                let Some(module) = node.child_by_field("module_name") else { continue };
                let module = compact(module.text());
                let join = |name: &str| {
                    if module.ends_with('.') {
                        format!("{module}{name}")
                    } else {
                        format!("{module}.{name}")
                    }
                };
                for item in node.children_by_field("name") {
                    match item.raw_kind() {
                        "aliased_import" => {
                            let (Some(name), Some(alias)) =
                                (item.child_by_field("name"), item.child_by_field("alias"))
                            else {
                                continue;
                            };
                            bind(alias.text().to_string(), join(&compact(name.text())));
                        }
                        _ => {
                            let name = compact(item.text());
                            bind(name.clone(), join(&name));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    bindings
}

/// Lookup structure over a file's import bindings.
#[derive(Debug, Clone, Default)]
pub struct ImportTable {
    bindings: HashMap<String, String>,
    known_roots: HashSet<String>,
}

impl ImportTable {
    pub fn new(bindings: &[ImportBinding]) -> Self {
        ImportTable {
            bindings: bindings
                .iter()
                .map(|b| (b.local_name.clone(), b.qualified_path.clone()))
                .collect(),
            known_roots: HashSet::new(),
        }
    }

    /// Top-level module names that qualify to themselves even without an
    /// import (e.g. fully spelled `Crypto.Cipher.AES.new`).
    pub fn with_known_roots<I, S>(mut self, roots: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.known_roots.extend(roots.into_iter().map(Into::into));
        self
    }

    pub fn lookup(&self, local: &str) -> Option<&str> {
        self.bindings.get(local).map(String::as_str)
    }

    /// Rewrites the leading identifier of a dotted path through the bindings.
    pub fn qualify(&self, dotted: &str) -> Option<String> {
        let (head, rest) = match dotted.split_once('.') {
            Some((h, r)) => (h, Some(r)),
            None => (dotted, None),
        };
        let base = match self.bindings.get(head) {
            Some(q) => q.as_str(),
            None if self.known_roots.contains(head) => head,
            None => return None,
        };
        Some(match rest {
            Some(rest) => format!("{base}.{rest}"),
            None => base.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Callee {
    Qualified(String),
    /// The leading name is not bound by an import; carries the raw dotted text
    /// when the callee is a plain name or attribute chain.
    Unqualified(Option<String>),
}

impl Callee {
    pub fn qualified(&self) -> Option<&str> {
        match self {
            Callee::Qualified(q) => Some(q),
            Callee::Unqualified(_) => None,
        }
    }
}

pub fn qualify_callee(call: SyntaxNode<'_>, imports: &ImportTable) -> Callee {
    let Some(dotted) = call.callee().and_then(|c| c.dotted_path()) else {
        return Callee::Unqualified(None);
    };
    match imports.qualify(&dotted) {
        Some(q) => Callee::Qualified(q),
        None => Callee::Unqualified(Some(dotted)),
    }
}
