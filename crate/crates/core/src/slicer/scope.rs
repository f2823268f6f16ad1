//! Name binding and call-site discovery within one file.

use std::collections::BTreeMap;

use crate::syntax::{NodeKind, SyntaxNode};

/// Grammar nodes that open a new name scope of their own.
const SCOPE_KINDS: &[&str] = &["function_definition", "class_definition", "module"];

/// Expression-level constructs whose bound names are private to them.
const PRIVATE_BINDERS: &[&str] = &[
    "lambda",
    "list_comprehension",
    "set_comprehension",
    "dictionary_comprehension",
    "generator_expression",
];

/// Statements whose bodies may be skipped at run time.
const CONDITIONAL_PARENTS: &[&str] = &[
    "if_statement",
    "elif_clause",
    "else_clause",
    "for_statement",
    "while_statement",
    "try_statement",
    "except_clause",
    "except_group_clause",
    "case_clause",
];

pub fn is_scope(node: SyntaxNode<'_>) -> bool {
    SCOPE_KINDS.contains(&node.raw_kind())
}

/// Innermost scope (function, class or module) containing `node`.
pub fn enclosing_scope<'t>(node: SyntaxNode<'t>) -> SyntaxNode<'t> {
    let mut child = node;
    for ancestor in node.ancestors() {
        if is_scope(ancestor) && !is_header_of(ancestor, child) {
            return ancestor;
        }
        child = ancestor;
    }
    node.tree().root()
}

/// Decorators, default values and annotations of a definition are evaluated
/// in the surrounding scope, not in the definition's own.
fn is_header_of(scope: SyntaxNode<'_>, child: SyntaxNode<'_>) -> bool {
    match scope.raw_kind() {
        "function_definition" | "class_definition" => child.field() != Some("body"),
        _ => false,
    }
}

pub fn definition_name<'t>(def: SyntaxNode<'t>) -> Option<&'t str> {
    def.child_by_field("name").map(|n| n.text())
}

/// True when `name` is bound by a lambda parameter or comprehension target
/// between `reference` and its enclosing scope.
pub fn bound_privately(reference: SyntaxNode<'_>, name: &str) -> bool {
    let scope = enclosing_scope(reference);
    for ancestor in reference.ancestors() {
        if ancestor == scope {
            break;
        }
        if !PRIVATE_BINDERS.contains(&ancestor.raw_kind()) {
            continue;
        }
        let bound = if ancestor.raw_kind() == "lambda" {
            ancestor
                .child_by_field("parameters")
                .is_some_and(|params| parameters_of(params).iter().any(|p| p.name == name))
        } else {
            ancestor
                .children()
                .filter(|c| c.raw_kind() == "for_in_clause")
                .filter_map(|c| c.child_by_field("left"))
                .any(|target| binds_name(target, name))
        };
        if bound {
            return true;
        }
    }
    false
}

/// True when the assignment target pattern binds `name`.
fn binds_name(target: SyntaxNode<'_>, name: &str) -> bool {
    match target.raw_kind() {
        "identifier" => target.text() == name,
        "pattern_list" | "tuple_pattern" | "list_pattern" | "list_splat_pattern" | "expression_list"
        | "tuple" | "list" | "list_splat" | "as_pattern_target" => {
            target.children().any(|c| binds_name(c, name))
        }
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinderKind<'t> {
    /// `name = value`
    Plain { value: SyntaxNode<'t> },
    /// Any other binding form: augmented or unpacking assignment, loop or
    /// `with` target, walrus, import, `def`/`class`, `del`.
    Complex,
}

#[derive(Debug, Clone, Copy)]
pub struct Binder<'t> {
    pub node: SyntaxNode<'t>,
    pub kind: BinderKind<'t>,
}

/// All bindings of `name` that belong to `scope`, in source order.
pub fn binders_in<'t>(scope: SyntaxNode<'t>, name: &str) -> Vec<Binder<'t>> {
    let mut out = Vec::new();
    let body: Vec<SyntaxNode<'t>> = match scope.raw_kind() {
        "module" => scope.children().collect(),
        _ => scope.child_by_field("body").into_iter().collect(),
    };
    for node in body {
        collect_binders(node, name, &mut out);
    }
    out
}

fn collect_binders<'t>(node: SyntaxNode<'t>, name: &str, out: &mut Vec<Binder<'t>>) {
    match node.raw_kind() {
        "function_definition" | "class_definition" => {
            if definition_name(node) == Some(name) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
            // Decorators and defaults run in this scope.
            for child in node.children().filter(|c| c.field() != Some("body")) {
                collect_binders(child, name, out);
            }
            return;
        }
        k if PRIVATE_BINDERS.contains(&k) => return,
        "assignment" if node.kind() == NodeKind::Assignment => {
            let value = node.child_by_field("value");
            for target in node.children_by_field("target") {
                if target.kind() == NodeKind::Name && target.text() == name {
                    match value {
                        Some(value) => out.push(Binder { node, kind: BinderKind::Plain { value } }),
                        None => out.push(Binder { node, kind: BinderKind::Complex }),
                    }
                } else if binds_name(target, name) {
                    out.push(Binder { node, kind: BinderKind::Complex });
                }
            }
        }
        "augmented_assignment" => {
            if node.child_by_field("target").is_some_and(|t| binds_name(t, name)) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
        }
        "for_statement" => {
            if node.child_by_field("left").is_some_and(|t| binds_name(t, name)) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
        }
        "as_pattern_target" => {
            if binds_name(node, name) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
            return;
        }
        "named_expression" => {
            if node.child_by_field("name").is_some_and(|n| n.text() == name) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
        }
        "delete_statement" => {
            if node.descendants().any(|d| d.kind() == NodeKind::Name && d.text() == name) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
            return;
        }
        _ if node.kind() == NodeKind::Import => {
            if import_binds(node, name) {
                out.push(Binder { node, kind: BinderKind::Complex });
            }
            return;
        }
        _ => {}
    }
    for child in node.children() {
        collect_binders(child, name, out);
    }
}

fn import_binds(import: SyntaxNode<'_>, name: &str) -> bool {
    import.children_by_field("name").any(|item| {
        let local = match item.raw_kind() {
            "aliased_import" => item.child_by_field("alias").map(|a| a.text()),
            _ => item.text().split('.').next(),
        };
        local.map(str::trim) == Some(name)
    }) || import.children().any(|c| c.raw_kind() == "wildcard_import")
}

/// `global name` / `nonlocal name` declared directly in `scope`.
pub fn declares_nonlocal(scope: SyntaxNode<'_>, name: &str) -> bool {
    let Some(body) = scope.child_by_field("body") else { return false };
    let mut stack = vec![body];
    while let Some(node) = stack.pop() {
        match node.raw_kind() {
            "global_statement" | "nonlocal_statement" => {
                if node.children().any(|c| c.text() == name) {
                    return true;
                }
            }
            "function_definition" | "class_definition" => continue,
            _ => {}
        }
        stack.extend(node.children());
    }
    false
}

/// True when a function nested in `scope` rebinds `name` of that scope,
/// through `global` for the module and `nonlocal` for a function.
pub fn rebound_from_nested(scope: SyntaxNode<'_>, name: &str) -> bool {
    let statement = if scope.kind() == NodeKind::Module { "global_statement" } else { "nonlocal_statement" };
    scope
        .descendants()
        .filter(|n| n.kind() == NodeKind::FunctionDef && n.id() != scope.id())
        .any(|f| {
            f.child_by_field("body").is_some_and(|b| {
                b.descendants().any(|s| s.raw_kind() == statement && s.children().any(|c| c.text() == name))
            }) && !binders_in(f, name).is_empty()
        })
}

/// True when every conditionally executed block around `binder` (within
/// `scope`) also contains `reference`.
pub fn reaches(binder: SyntaxNode<'_>, reference: SyntaxNode<'_>, scope: SyntaxNode<'_>) -> bool {
    for ancestor in binder.ancestors() {
        if ancestor == scope {
            break;
        }
        let conditional = match ancestor.raw_kind() {
            "block" => ancestor
                .parent()
                .is_some_and(|p| CONDITIONAL_PARENTS.contains(&p.raw_kind())),
            "elif_clause" | "else_clause" | "except_clause" | "except_group_clause" | "case_clause" => true,
            _ => false,
        };
        if conditional && !ancestor.is_ancestor_of(&reference) && ancestor != reference {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Positional,
    VarArgs,
    KeywordOnly,
    VarKeywords,
}

#[derive(Debug, Clone, Copy)]
pub struct Param<'t> {
    pub name: &'t str,
    pub kind: ParamKind,
    pub default: Option<SyntaxNode<'t>>,
}

pub fn parameters_of<'t>(params: SyntaxNode<'t>) -> Vec<Param<'t>> {
    let mut out = Vec::new();
    let mut keyword_only = false;
    for p in params.children() {
        let plain = if keyword_only { ParamKind::KeywordOnly } else { ParamKind::Positional };
        match p.raw_kind() {
            "identifier" => out.push(Param { name: p.text(), kind: plain, default: None }),
            "typed_parameter" => {
                if let Some(n) = p.children().find(|c| c.kind() == NodeKind::Name) {
                    out.push(Param { name: n.text(), kind: plain, default: None });
                }
            }
            "default_parameter" | "typed_default_parameter" => {
                if let Some(n) = p.child_by_field("name") {
                    out.push(Param { name: n.text(), kind: plain, default: p.child_by_field("value") });
                }
            }
            "list_splat_pattern" => {
                keyword_only = true;
                if let Some(n) = p.children().find(|c| c.kind() == NodeKind::Name) {
                    out.push(Param { name: n.text(), kind: ParamKind::VarArgs, default: None });
                }
            }
            "keyword_separator" => keyword_only = true,
            "dictionary_splat_pattern" => {
                if let Some(n) = p.children().find(|c| c.kind() == NodeKind::Name) {
                    out.push(Param { name: n.text(), kind: ParamKind::VarKeywords, default: None });
                }
            }
            _ => {}
        }
    }
    out
}

pub fn function_params<'t>(def: SyntaxNode<'t>) -> Vec<Param<'t>> {
    def.child_by_field("parameters").map(parameters_of).unwrap_or_default()
}

/// What a caller supplies for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBinding<'t> {
    /// An argument expression at the call site.
    Argument(SyntaxNode<'t>),
    /// The declared default, evaluated where the function is defined.
    Default(SyntaxNode<'t>),
    /// Possibly supplied through `*args` / `**kwargs`, or collected by a
    /// variadic parameter.
    Unknown,
    /// Required but not supplied.
    Missing,
}

#[derive(Debug, Clone)]
pub struct CallerSite<'t> {
    pub call: SyntaxNode<'t>,
    pub mapping: BTreeMap<&'t str, ParamBinding<'t>>,
}

fn decorated_with(def: SyntaxNode<'_>, decorator: &str) -> bool {
    def.parent().is_some_and(|p| {
        p.raw_kind() == "decorated_definition"
            && p.children()
                .filter(|c| c.raw_kind() == "decorator")
                .any(|d| d.children().any(|e| e.text() == decorator))
    })
}

/// Class a function is a method of, if any.
pub fn owning_class<'t>(def: SyntaxNode<'t>) -> Option<SyntaxNode<'t>> {
    let scope = enclosing_scope(def);
    (scope.raw_kind() == "class_definition").then_some(scope)
}

/// True when `def` may be called from places the caller walk cannot see:
/// it carries a decorator that may wrap it, or its name is used other than
/// as a callee (passed as a callback, stored or aliased).
pub fn escapes(def: SyntaxNode<'_>) -> bool {
    let Some(name) = definition_name(def) else { return true };
    if let Some(decorated) = def.parent().filter(|p| p.raw_kind() == "decorated_definition") {
        let wrapping = decorated
            .children()
            .filter(|c| c.raw_kind() == "decorator")
            .any(|d| !matches!(d.text().trim_start_matches('@').trim(), "staticmethod" | "classmethod"));
        if wrapping {
            return true;
        }
    }
    let mut names = vec![name];
    if name == "__init__" {
        names.extend(owning_class(def).and_then(definition_name));
    }
    def.tree().nodes().any(|n| {
        let referenced = match n.kind() {
            NodeKind::Name => {
                let declared = n.field() == Some("name")
                    && n.parent().is_some_and(|p| {
                        matches!(p.kind(), NodeKind::FunctionDef | NodeKind::Keyword)
                            || p.raw_kind() == "class_definition"
                    });
                n.field() != Some("attr") && !declared && names.contains(&n.text())
            }
            NodeKind::Attribute => n.child_by_field("attr").is_some_and(|a| names.contains(&a.text())),
            _ => false,
        };
        referenced && n.field() != Some("callee")
    })
}

/// Intra-file call sites of `def`, each with its parameter mapping.
///
/// Module-level and nested functions are found through bare-name calls;
/// methods through `self.name(...)` / `cls.name(...)` inside the same class,
/// and `__init__` additionally through `ClassName(...)`.
pub fn enumerate_callers<'t>(def: SyntaxNode<'t>) -> Vec<CallerSite<'t>> {
    let Some(name) = definition_name(def) else { return Vec::new() };
    let params = function_params(def);
    let tree = def.tree();
    let class = owning_class(def);
    let mut sites = Vec::new();
    match class {
        None => {
            for call in tree.calls() {
                let callee = call.callee();
                if callee.is_some_and(|c| c.kind() == NodeKind::Name && c.text() == name) {
                    sites.push(call);
                }
            }
        }
        Some(class) => {
            let class_name = definition_name(class);
            for call in tree.calls() {
                let Some(callee) = call.callee() else { continue };
                let via_self = class.is_ancestor_of(&call)
                    && callee.kind() == NodeKind::Attribute
                    && callee.child_by_field("attr").is_some_and(|a| a.text() == name)
                    && callee
                        .child_by_field("object")
                        .is_some_and(|o| o.kind() == NodeKind::Name && matches!(o.text(), "self" | "cls"));
                let via_constructor = name == "__init__"
                    && callee.kind() == NodeKind::Name
                    && Some(callee.text()) == class_name;
                if via_self || via_constructor {
                    sites.push(call);
                }
            }
        }
    }
    let skip_receiver = class.is_some() && !decorated_with(def, "staticmethod");
    let params: &[Param<'t>] = if skip_receiver && !params.is_empty() { &params[1..] } else { &params };
    sites.into_iter().map(|call| CallerSite { call, mapping: map_arguments(call, params) }).collect()
}

fn map_arguments<'t>(call: SyntaxNode<'t>, params: &[Param<'t>]) -> BTreeMap<&'t str, ParamBinding<'t>> {
    let mut positional = Vec::new();
    let mut list_splat = false;
    let mut dict_splat = false;
    let mut keywords = BTreeMap::new();
    for arg in call.arguments() {
        match (arg.field(), arg.raw_kind()) {
            (Some("arg"), "list_splat") => list_splat = true,
            (Some("arg"), _) if !list_splat => positional.push(arg),
            (Some("arg"), _) => {}
            (Some("kwarg"), "dictionary_splat") => dict_splat = true,
            (Some("kwarg"), _) => {
                if let (Some(n), Some(v)) = (arg.child_by_field("name"), arg.child_by_field("value")) {
                    keywords.insert(n.text(), v);
                }
            }
            _ => {}
        }
    }
    let mut mapping = BTreeMap::new();
    let mut next_positional = positional.into_iter();
    for param in params {
        let binding = match param.kind {
            ParamKind::VarArgs | ParamKind::VarKeywords => ParamBinding::Unknown,
            ParamKind::Positional | ParamKind::KeywordOnly => {
                let by_position = if param.kind == ParamKind::Positional { next_positional.next() } else { None };
                match (by_position, keywords.get(param.name)) {
                    (Some(arg), _) => ParamBinding::Argument(arg),
                    (None, Some(&value)) => ParamBinding::Argument(value),
                    (None, None) if list_splat || dict_splat => ParamBinding::Unknown,
                    (None, None) => match param.default {
                        Some(default) => ParamBinding::Default(default),
                        None => ParamBinding::Missing,
                    },
                }
            }
        };
        mapping.insert(param.name, binding);
    }
    mapping
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_source, SourceFile, SyntaxTree};

    fn parse(src: &str) -> SyntaxTree {
        let file = SourceFile::application("t.py", "p", src.as_bytes());
        parse_source(&file, src.as_bytes()).unwrap()
    }

    fn function<'t>(tree: &'t SyntaxTree, name: &str) -> SyntaxNode<'t> {
        tree.nodes()
            .find(|n| n.kind() == NodeKind::FunctionDef && definition_name(*n) == Some(name))
            .unwrap()
    }

    fn rendered(site: &CallerSite<'_>) -> Vec<(String, String)> {
        site.mapping
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    ParamBinding::Argument(n) => format!("arg {}", n.text()),
                    ParamBinding::Default(n) => format!("default {}", n.text()),
                    ParamBinding::Unknown => "unknown".into(),
                    ParamBinding::Missing => "missing".into(),
                };
                (k.to_string(), v)
            })
            .collect()
    }

    #[test]
    fn one_caller_maps_parameter() {
        let tree = parse("def enc(k):\n    AES.new(k, MODE)\n\nenc(b'\\0'*16)\n");
        let callers = enumerate_callers(function(&tree, "enc"));
        assert_eq!(callers.len(), 1);
        assert_eq!(rendered(&callers[0]), vec![("k".into(), "arg b'\\0'*16".into())]);
    }

    #[test]
    fn uncalled_function_has_no_callers() {
        let tree = parse("def enc(k):\n    AES.new(k, MODE)\n");
        assert!(enumerate_callers(function(&tree, "enc")).is_empty());
    }

    #[test]
    fn omitted_argument_binds_default() {
        let tree = parse("def kdf(pw, salt=b'fixed', n=10):\n    pass\n\nkdf('pw', n=5)\n");
        let callers = enumerate_callers(function(&tree, "kdf"));
        assert_eq!(
            rendered(&callers[0]),
            vec![
                ("n".into(), "arg 5".into()),
                ("pw".into(), "arg 'pw'".into()),
                ("salt".into(), "default b'fixed'".into()),
            ]
        );
    }

    #[test]
    fn splats_and_variadics() {
        let tree = parse("def f(a, b=1, *rest, c, **kw):\n    pass\n\nf(*xs, c=2)\nf(1)\n");
        let callers = enumerate_callers(function(&tree, "f"));
        assert_eq!(
            rendered(&callers[0]),
            vec![
                ("a".into(), "unknown".into()),
                ("b".into(), "unknown".into()),
                ("c".into(), "arg 2".into()),
                ("kw".into(), "unknown".into()),
                ("rest".into(), "unknown".into()),
            ]
        );
        assert_eq!(rendered(&callers[1])[2], ("c".into(), "missing".into()));
    }

    #[test]
    fn methods_via_self_and_constructor() {
        let tree = parse(
            "class Box:\n    def __init__(self, key):\n        self.k = key\n\
             \x20   def seal(self, iv):\n        pass\n\
             \x20   def run(self):\n        self.seal(b'iv')\n\
             \x20   @staticmethod\n    def helper(x):\n        pass\n\
             \x20   def go(self):\n        self.helper(3)\n\
             Box(b'k')\nother.seal(1)\n",
        );
        let init = enumerate_callers(function(&tree, "__init__"));
        assert_eq!(init.len(), 1);
        assert_eq!(rendered(&init[0]), vec![("key".into(), "arg b'k'".into())]);
        let seal = enumerate_callers(function(&tree, "seal"));
        assert_eq!(seal.len(), 1);
        assert_eq!(rendered(&seal[0]), vec![("iv".into(), "arg b'iv'".into())]);
        let helper = enumerate_callers(function(&tree, "helper"));
        assert_eq!(rendered(&helper[0]), vec![("x".into(), "arg 3".into())]);
    }

    #[test]
    fn binder_forms() {
        let tree = parse(
            "def f():\n    k = b'a'\n    k += b'b'\n    a, k = 1, 2\n    for k in x: pass\n\
             \x20   with o as k: pass\n    import k\n    (k := 3)\n    def k(): pass\n    g = lambda k: k\n",
        );
        let f = function(&tree, "f");
        let kinds: Vec<_> = binders_in(f, "k")
            .iter()
            .map(|b| matches!(b.kind, BinderKind::Plain { .. }))
            .collect();
        assert_eq!(kinds, vec![true, false, false, false, false, false, false, false]);
    }

    #[test]
    fn conditional_reach() {
        let tree = parse("if c:\n    k = 1\n    use(k)\nuse(k)\nk = 2\nuse(k)\n");
        let root = tree.root();
        let binders = binders_in(root, "k");
        let uses: Vec<_> = tree.calls().collect();
        assert!(reaches(binders[0].node, uses[0], root));
        assert!(!reaches(binders[0].node, uses[1], root));
        assert!(reaches(binders[1].node, uses[2], root));
    }

    #[test]
    fn scopes() {
        let tree = parse("class C:\n    X = f()\n    def m(self, a=g()):\n        h()\n");
        let calls: Vec<_> = tree.calls().collect();
        let scope_kinds: Vec<_> = calls.iter().map(|c| enclosing_scope(*c).raw_kind()).collect();
        assert_eq!(scope_kinds, vec!["class_definition", "class_definition", "function_definition"]);
    }

    #[test]
    fn private_bindings() {
        let tree = parse("f(lambda k: g(k))\n[h(k) for k in ks]\nz(k)\n");
        let calls: Vec<_> = tree.calls().collect();
        let arg = |i: usize| calls[i].arguments().next().unwrap();
        assert!(bound_privately(arg(1), "k"));
        assert!(bound_privately(arg(2), "k"));
        assert!(!bound_privately(arg(3), "k"));
    }
}
