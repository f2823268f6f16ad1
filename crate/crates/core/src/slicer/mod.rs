//! Backward slicing of call arguments.
//!
//! Starting at the argument of a matched call, the slicer tries in order:
//! the expression itself as a hard-coded constant, the latest assignment in
//! the enclosing function, an assignment at module scope, and finally the
//! intra-file callers of the enclosing function when the value is a
//! parameter. A slice never errors: every failure is an
//! [`UnresolvedReason`].

mod fold;
pub mod scope;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{select_argument, ArgSelector, ArgumentLookup};
use crate::syntax::{ImportTable, NodeId, NodeKind, Position, SyntaxNode, SyntaxTree};

pub use fold::{apply_binary, fold_constant, parse_int, parse_string, MAX_FOLDED_LEN};
pub use scope::{enumerate_callers, CallerSite, ParamBinding};

use scope::{BinderKind, ParamKind};

pub const DEFAULT_DEPTH_LIMIT: usize = 16;

/// A folded constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Constant {
    Bytes(#[serde(with = "hex::serde")] Vec<u8>),
    Int(i64),
    Str(String),
    /// Fully qualified mode constant, e.g. `Crypto.Cipher.AES.MODE_ECB`.
    EnumConst(String),
}

impl Constant {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Constant::Bytes(_) => "bytes",
            Constant::Int(_) => "int",
            Constant::Str(_) => "str",
            Constant::EnumConst(_) => "enum constant",
        }
    }
}

const MAX_RENDERED: usize = 64;

fn escape_into(out: &mut String, c: char) {
    match c {
        '\\' => out.push_str("\\\\"),
        '\'' => out.push_str("\\'"),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        '\t' => out.push_str("\\t"),
        c => out.push(c),
    }
}

/// Python-style rendering; long values are truncated with their length.
impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Bytes(bytes) => {
                let mut s = String::from("b'");
                for &b in bytes.iter().take(MAX_RENDERED) {
                    match b {
                        0x20..=0x7e | b'\n' | b'\r' | b'\t' => escape_into(&mut s, b as char),
                        _ => s.push_str(&format!("\\x{b:02x}")),
                    }
                }
                s.push('\'');
                if bytes.len() > MAX_RENDERED {
                    s.push_str(&format!("...({} bytes)", bytes.len()));
                }
                f.write_str(&s)
            }
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Str(text) => {
                let mut s = String::from("'");
                for c in text.chars().take(MAX_RENDERED) {
                    escape_into(&mut s, c);
                }
                s.push('\'');
                let len = text.chars().count();
                if len > MAX_RENDERED {
                    s.push_str(&format!("...({len} chars)"));
                }
                f.write_str(&s)
            }
            Constant::EnumConst(path) => f.write_str(path),
        }
    }
}

/// A constant together with the source text it was folded from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstValue {
    pub constant: Constant,
    pub provenance_expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnresolvedReason {
    /// The value is a parameter and the function has no intra-file caller.
    NoCallers,
    /// The slice ran past the configured step limit.
    DepthExceeded,
    /// Control flow, unpacking, disagreeing callers or other forms the
    /// slicer does not model.
    DynamicValue,
    /// Read from the environment, files, stdin or the command line.
    ExternalInput,
}

impl fmt::Display for UnresolvedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnresolvedReason::NoCallers => "no_callers",
            UnresolvedReason::DepthExceeded => "depth_exceeded",
            UnresolvedReason::DynamicValue => "dynamic_value",
            UnresolvedReason::ExternalInput => "external_input",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    HardCoded,
    LocalAssign,
    GlobalAssign,
    CallerParam,
    /// The value is computed at run time by an expression that is neither
    /// constant nor a name (a call, a subscript, ...).
    RuntimeValue,
    ExternalInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SliceStep {
    pub kind: StepKind,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SliceOutcome {
    Resolved { value: ConstValue },
    /// Traced to a run-time computation rather than a constant.
    Runtime { expr: String },
    /// The argument is omitted at the call site.
    Absent,
    Unresolved { reason: UnresolvedReason },
}

/// Value one caller supplies when several callers disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallerEvidence {
    pub position: Position,
    pub outcome: SliceOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceResult {
    pub outcome: SliceOutcome,
    pub trace: Vec<SliceStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub callers: Vec<CallerEvidence>,
}

impl SliceResult {
    fn terminal(outcome: SliceOutcome, step: Option<SliceStep>) -> SliceResult {
        SliceResult { outcome, trace: step.into_iter().collect(), callers: Vec::new() }
    }

    fn unresolved(reason: UnresolvedReason) -> SliceResult {
        SliceResult::terminal(SliceOutcome::Unresolved { reason }, None)
    }

    pub fn resolved(&self) -> Option<&ConstValue> {
        match &self.outcome {
            SliceOutcome::Resolved { value } => Some(value),
            _ => None,
        }
    }

    pub fn unresolved_reason(&self) -> Option<UnresolvedReason> {
        match self.outcome {
            SliceOutcome::Unresolved { reason } => Some(reason),
            _ => None,
        }
    }

    fn prepend(mut self, step: SliceStep) -> SliceResult {
        self.trace.insert(0, step);
        self
    }
}

/// Qualified callees whose result is external input.
const EXTERNAL_CALLS: &[&str] = &[
    "os.getenv",
    "os.getenvb",
    "os.environ.get",
    "os.environb.get",
    "getpass.getpass",
    "io.open",
    "sys.stdin.read",
    "sys.stdin.readline",
    "sys.stdin.buffer.read",
];
/// Builtins reading external input.
const EXTERNAL_BUILTINS: &[&str] = &["input", "raw_input", "open"];
const EXTERNAL_MAPPINGS: &[&str] = &["os.environ", "os.environb", "sys.argv"];

/// Backward slicer over one tree.
pub struct Slicer<'t, 'i> {
    tree: &'t SyntaxTree,
    imports: &'i ImportTable,
    depth_limit: usize,
    active: HashSet<(NodeId, &'t str)>,
    cycle_hit: bool,
}

impl<'t, 'i> Slicer<'t, 'i> {
    pub fn new(tree: &'t SyntaxTree, imports: &'i ImportTable) -> Self {
        Slicer { tree, imports, depth_limit: DEFAULT_DEPTH_LIMIT, active: HashSet::new(), cycle_hit: false }
    }

    pub fn with_depth_limit(mut self, limit: usize) -> Self {
        self.depth_limit = limit.max(1);
        self
    }

    pub fn tree(&self) -> &'t SyntaxTree {
        self.tree
    }

    /// Slices the argument `selector` picks out of `call`.
    pub fn resolve_argument(&mut self, call: SyntaxNode<'t>, selector: &ArgSelector) -> SliceResult {
        match select_argument(call, selector) {
            Ok(ArgumentLookup::Present(expr)) => self.resolve_expr(expr),
            Ok(ArgumentLookup::Absent) => SliceResult::terminal(SliceOutcome::Absent, None),
            Ok(ArgumentLookup::Unknown) | Err(_) => SliceResult::unresolved(UnresolvedReason::DynamicValue),
        }
    }

    /// Slices an expression evaluated where it appears in the source.
    pub fn resolve_expr(&mut self, expr: SyntaxNode<'t>) -> SliceResult {
        self.active.clear();
        self.cycle_hit = false;
        self.slice(expr, expr, 0)
    }

    fn step(kind: StepKind, node: SyntaxNode<'_>) -> SliceStep {
        SliceStep { kind, position: node.span().position() }
    }

    /// `expr` is evaluated at `at`; `depth` steps are already on the trace.
    fn slice(&mut self, expr: SyntaxNode<'t>, at: SyntaxNode<'t>, depth: usize) -> SliceResult {
        if depth >= self.depth_limit {
            return SliceResult::unresolved(UnresolvedReason::DepthExceeded);
        }
        if let Some(value) = fold_constant(expr, self.imports) {
            return SliceResult::terminal(
                SliceOutcome::Resolved { value },
                Some(Self::step(StepKind::HardCoded, expr)),
            );
        }
        if expr.kind() == NodeKind::Name {
            return self.slice_name(expr.text(), at, depth);
        }
        if expr.kind() == NodeKind::BinaryOp {
            if let Some(result) = self.slice_binary(expr, at, depth) {
                return result;
            }
        }
        if self.is_external(expr) {
            return SliceResult::terminal(
                SliceOutcome::Unresolved { reason: UnresolvedReason::ExternalInput },
                Some(Self::step(StepKind::ExternalInput, expr)),
            );
        }
        SliceResult::terminal(
            SliceOutcome::Runtime { expr: expr.text().to_string() },
            Some(Self::step(StepKind::RuntimeValue, expr)),
        )
    }

    /// `a + b` or `a * b` over named operands. `None` when neither operand
    /// needs slicing.
    fn slice_binary(&mut self, expr: SyntaxNode<'t>, at: SyntaxNode<'t>, depth: usize) -> Option<SliceResult> {
        let op = expr.operator()?;
        if !matches!(op, "+" | "-" | "*") {
            return None;
        }
        let (left, right) = (expr.child_by_field("left")?, expr.child_by_field("right")?);
        let mut left = self.slice(left, at, depth);
        let right = self.slice(right, at, depth);
        let outcome = match (&left.outcome, &right.outcome) {
            (SliceOutcome::Resolved { value: a }, SliceOutcome::Resolved { value: b }) => {
                match apply_binary(op, a.constant.clone(), b.constant.clone()) {
                    Some(constant) => SliceOutcome::Resolved {
                        value: ConstValue { constant, provenance_expr: expr.text().to_string() },
                    },
                    None => SliceOutcome::Unresolved { reason: UnresolvedReason::DynamicValue },
                }
            }
            (SliceOutcome::Unresolved { reason }, _) | (_, SliceOutcome::Unresolved { reason }) => {
                SliceOutcome::Unresolved { reason: *reason }
            }
            (SliceOutcome::Absent, _) | (_, SliceOutcome::Absent) => {
                SliceOutcome::Unresolved { reason: UnresolvedReason::DynamicValue }
            }
            _ => SliceOutcome::Runtime { expr: expr.text().to_string() },
        };
        left.trace.extend(right.trace);
        Some(SliceResult { outcome, trace: left.trace, callers: Vec::new() })
    }

    fn slice_name(&mut self, name: &'t str, reference: SyntaxNode<'t>, depth: usize) -> SliceResult {
        if scope::bound_privately(reference, name) {
            return SliceResult::unresolved(UnresolvedReason::DynamicValue);
        }
        let mut scope = scope::enclosing_scope(reference);
        let mut via = reference;
        let mut innermost = true;
        loop {
            match scope.raw_kind() {
                "module" => return self.slice_module_name(name, via, innermost, depth),
                "class_definition" if !innermost => {}
                _ if scope.kind() == NodeKind::FunctionDef && scope::declares_nonlocal(scope, name) => {}
                _ => {
                    if let Some(result) = self.slice_in_scope(name, scope, via, depth) {
                        return result;
                    }
                }
            }
            innermost = false;
            via = scope;
            scope = scope::enclosing_scope(scope);
        }
    }

    /// Lookup of `name` in a function or class scope, as seen from `via`.
    /// `None` means the name is not local to the scope.
    fn slice_in_scope(
        &mut self,
        name: &'t str,
        scope: SyntaxNode<'t>,
        via: SyntaxNode<'t>,
        depth: usize,
    ) -> Option<SliceResult> {
        let binders = scope::binders_in(scope, name);
        let is_param = scope.kind() == NodeKind::FunctionDef
            && scope::function_params(scope).iter().any(|p| p.name == name);
        if (is_param || !binders.is_empty()) && scope::rebound_from_nested(scope, name) {
            return Some(SliceResult::unresolved(UnresolvedReason::DynamicValue));
        }
        let preceding = binders
            .iter().rfind(|b| b.node.span().start_byte < via.span().start_byte && !b.node.is_ancestor_of(&via));
        if let Some(binder) = preceding {
            return Some(self.follow_binder(binder, scope, via, StepKind::LocalAssign, depth));
        }
        if scope.kind() == NodeKind::FunctionDef {
            let params = scope::function_params(scope);
            if let Some(param) = params.iter().find(|p| p.name == name) {
                if matches!(param.kind, ParamKind::VarArgs | ParamKind::VarKeywords) {
                    return Some(SliceResult::unresolved(UnresolvedReason::DynamicValue));
                }
                return Some(self.slice_callers(scope, param.name, depth));
            }
        }
        if !binders.is_empty() {
            // Local to the scope but not assigned before use.
            return Some(SliceResult::unresolved(UnresolvedReason::DynamicValue));
        }
        None
    }

    fn follow_binder(
        &mut self,
        binder: &scope::Binder<'t>,
        scope: SyntaxNode<'t>,
        via: SyntaxNode<'t>,
        kind: StepKind,
        depth: usize,
    ) -> SliceResult {
        match binder.kind {
            BinderKind::Plain { value } if scope::reaches(binder.node, via, scope) => {
                if depth + 1 >= self.depth_limit {
                    return SliceResult::unresolved(UnresolvedReason::DepthExceeded);
                }
                self.slice(value, binder.node, depth + 1).prepend(Self::step(kind, binder.node))
            }
            _ => SliceResult::unresolved(UnresolvedReason::DynamicValue),
        }
    }

    fn slice_module_name(
        &mut self,
        name: &'t str,
        via: SyntaxNode<'t>,
        innermost: bool,
        depth: usize,
    ) -> SliceResult {
        let root = self.tree.root();
        let binders = scope::binders_in(root, name);
        if scope::rebound_from_nested(root, name) {
            return SliceResult::unresolved(UnresolvedReason::DynamicValue);
        }
        if innermost {
            let preceding = binders
                .iter().rfind(|b| b.node.span().start_byte < via.span().start_byte && !b.node.is_ancestor_of(&via));
            return match preceding {
                Some(binder) => self.follow_binder(binder, root, via, StepKind::GlobalAssign, depth),
                None => SliceResult::unresolved(UnresolvedReason::DynamicValue),
            };
        }
        // Seen from inside a function: the value at call time may come from
        // any module-level assignment, so all of them have to agree.
        if binders.is_empty() {
            return SliceResult::unresolved(UnresolvedReason::DynamicValue);
        }
        let mut results = Vec::with_capacity(binders.len());
        for binder in &binders {
            let top_level = binder.node.parent() == Some(root);
            if !top_level {
                return SliceResult::unresolved(UnresolvedReason::DynamicValue);
            }
            results.push(self.follow_binder(binder, root, binder.node, StepKind::GlobalAssign, depth));
        }
        let last = results.pop().expect("at least one binder");
        if results.iter().all(|r| r.outcome == last.outcome || same_value(&r.outcome, &last.outcome)) {
            last
        } else {
            SliceResult::unresolved(UnresolvedReason::DynamicValue)
        }
    }

    fn slice_callers(&mut self, function: SyntaxNode<'t>, param: &'t str, depth: usize) -> SliceResult {
        if !self.active.insert((function.id(), param)) {
            // Recursion back into a parameter already being sliced.
            self.cycle_hit = true;
            return SliceResult::unresolved(UnresolvedReason::NoCallers);
        }
        if scope::escapes(function) {
            self.active.remove(&(function.id(), param));
            return SliceResult::unresolved(UnresolvedReason::DynamicValue);
        }
        let callers = enumerate_callers(function);
        let mut results: Vec<(Position, SliceResult)> = Vec::new();
        for site in &callers {
            let step = Self::step(StepKind::CallerParam, site.call);
            if depth + 1 >= self.depth_limit {
                results.push((step.position, SliceResult::unresolved(UnresolvedReason::DepthExceeded)));
                continue;
            }
            let outer_cycle = std::mem::replace(&mut self.cycle_hit, false);
            let result = match site.mapping.get(param) {
                Some(ParamBinding::Argument(expr)) => self.slice(*expr, site.call, depth + 1),
                Some(ParamBinding::Default(expr)) => self.slice(*expr, function, depth + 1),
                _ => SliceResult::unresolved(UnresolvedReason::DynamicValue),
            };
            let cyclic = std::mem::replace(&mut self.cycle_hit, outer_cycle)
                && result.unresolved_reason() == Some(UnresolvedReason::NoCallers);
            // Call sites that only feed the parameter back into itself add
            // no information.
            if !cyclic {
                results.push((step.position, result.prepend(step)));
            }
        }
        self.active.remove(&(function.id(), param));
        merge_callers(results)
    }

    fn is_external(&self, expr: SyntaxNode<'t>) -> bool {
        match expr.kind() {
            NodeKind::Call => {
                let Some(callee) = expr.callee() else { return false };
                if let Some(dotted) = callee.dotted_path() {
                    let qualified = self.imports.qualify(&dotted);
                    if qualified.as_deref().is_some_and(|q| EXTERNAL_CALLS.contains(&q)) {
                        return true;
                    }
                    if qualified.is_none() && EXTERNAL_BUILTINS.contains(&dotted.as_str()) {
                        return true;
                    }
                }
                // Method calls on external values and wrappers around them.
                let receiver_external = callee.kind() == NodeKind::Attribute
                    && callee.child_by_field("object").is_some_and(|o| self.is_external(o));
                receiver_external
                    || expr.arguments().any(|a| {
                        let value = if a.kind() == NodeKind::Keyword { a.child_by_field("value") } else { Some(a) };
                        value.is_some_and(|v| self.is_external(v))
                    })
            }
            NodeKind::Attribute => expr.child_by_field("object").is_some_and(|o| self.is_external(o)),
            NodeKind::Other if expr.raw_kind() == "subscript" => {
                expr.child_by_field("value").is_some_and(|v| {
                    v.dotted_path()
                        .and_then(|d| self.imports.qualify(&d))
                        .is_some_and(|q| EXTERNAL_MAPPINGS.contains(&q.as_str()))
                        || self.is_external(v)
                })
            }
            _ => false,
        }
    }
}

fn same_value(a: &SliceOutcome, b: &SliceOutcome) -> bool {
    match (a, b) {
        (SliceOutcome::Resolved { value: x }, SliceOutcome::Resolved { value: y }) => x.constant == y.constant,
        (SliceOutcome::Runtime { .. }, SliceOutcome::Runtime { .. }) => true,
        _ => false,
    }
}

/// Combines the slices of all callers of a function. A single caller passes
/// through unchanged; several callers must agree on one constant (or all be
/// run-time values), otherwise the value is dynamic and every caller's
/// outcome is kept as evidence.
fn merge_callers(mut results: Vec<(Position, SliceResult)>) -> SliceResult {
    match results.len() {
        0 => SliceResult::unresolved(UnresolvedReason::NoCallers),
        1 => results.pop().expect("one result").1,
        _ => {
            let first = &results[0].1.outcome;
            let agree = results.iter().all(|(_, r)| r.outcome == *first || same_value(&r.outcome, first));
            if agree {
                return results.swap_remove(0).1;
            }
            SliceResult {
                outcome: SliceOutcome::Unresolved { reason: UnresolvedReason::DynamicValue },
                trace: Vec::new(),
                callers: results
                    .into_iter()
                    .map(|(position, r)| CallerEvidence { position, outcome: r.outcome })
                    .collect(),
            }
        }
    }
}

/// Slices the argument `selector` picks out of `call`.
pub fn resolve_argument<'t>(
    tree: &'t SyntaxTree,
    imports: &ImportTable,
    call: SyntaxNode<'t>,
    selector: &ArgSelector,
    depth_limit: usize,
) -> SliceResult {
    debug_assert!(std::ptr::eq(call.tree(), tree));
    Slicer::new(tree, imports).with_depth_limit(depth_limit).resolve_argument(call, selector)
}
