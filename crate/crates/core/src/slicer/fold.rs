use once_cell::sync::Lazy;
use regex::Regex;

use super::{ConstValue, Constant};
use crate::syntax::{ImportTable, NodeKind, SyntaxNode};

/// Upper bound on folded byte/string lengths.
pub const MAX_FOLDED_LEN: usize = 1 << 20;

const CRYPTOGRAPHY_MODES: &str = "cryptography.hazmat.primitives.ciphers.modes.";
const CRYPTOGRAPHY_MODE_CLASSES: &[&str] =
    &["ECB", "CBC", "CTR", "OFB", "CFB", "CFB8", "GCM", "XTS"];

static MODE_CONSTANT: Lazy<Regex> = Lazy::new(|| Regex::new(r"^MODE_[A-Z0-9_]+$").unwrap());

/// Folds an expression to a constant. Handles literals, repetition of a
/// bytes/str literal by an integer, concatenation, unary minus on integers,
/// block-mode constants (`AES.MODE_ECB`) and cryptography mode objects
/// (`modes.ECB()`). Anything else is not constant.
pub fn fold_constant(expr: SyntaxNode<'_>, imports: &ImportTable) -> Option<ConstValue> {
    fold(expr, imports).map(|constant| ConstValue { constant, provenance_expr: expr.text().to_string() })
}

fn fold(expr: SyntaxNode<'_>, imports: &ImportTable) -> Option<Constant> {
    match expr.kind() {
        NodeKind::Literal => fold_literal(expr),
        NodeKind::BinaryOp => {
            let left = fold(expr.child_by_field("left")?, imports)?;
            let right = fold(expr.child_by_field("right")?, imports)?;
            apply_binary(expr.operator()?, left, right)
        }
        NodeKind::Other if expr.raw_kind() == "unary_operator" => {
            match (expr.operator()?, fold(expr.child_by_field("argument")?, imports)?) {
                ("-", Constant::Int(n)) => n.checked_neg().map(Constant::Int),
                ("+", Constant::Int(n)) => Some(Constant::Int(n)),
                _ => None,
            }
        }
        NodeKind::Name | NodeKind::Attribute => {
            let dotted = expr.dotted_path()?;
            let last = dotted.rsplit('.').next()?;
            if !MODE_CONSTANT.is_match(last) {
                return None;
            }
            match imports.qualify(&dotted) {
                Some(q) => Some(Constant::EnumConst(q)),
                // A bare name must come from an import to count as a constant.
                None if expr.kind() == NodeKind::Attribute => Some(Constant::EnumConst(dotted)),
                None => None,
            }
        }
        NodeKind::Call => {
            let dotted = expr.callee()?.dotted_path()?;
            let qualified = imports.qualify(&dotted)?;
            let class = qualified.strip_prefix(CRYPTOGRAPHY_MODES)?;
            CRYPTOGRAPHY_MODE_CLASSES
                .contains(&class)
                .then_some(Constant::EnumConst(qualified))
        }
        _ => None,
    }
}

/// Folds `left op right` for the operators the slicer models.
pub fn apply_binary(op: &str, left: Constant, right: Constant) -> Option<Constant> {
    match (op, left, right) {
        ("+", Constant::Int(a), Constant::Int(b)) => a.checked_add(b).map(Constant::Int),
        ("-", Constant::Int(a), Constant::Int(b)) => a.checked_sub(b).map(Constant::Int),
        ("*", Constant::Int(a), Constant::Int(b)) => a.checked_mul(b).map(Constant::Int),
        ("*", Constant::Bytes(b), Constant::Int(n)) | ("*", Constant::Int(n), Constant::Bytes(b)) => {
            repeat_len(b.len(), n).map(|count| Constant::Bytes(b.repeat(count)))
        }
        ("*", Constant::Str(s), Constant::Int(n)) | ("*", Constant::Int(n), Constant::Str(s)) => {
            repeat_len(s.len(), n).map(|count| Constant::Str(s.repeat(count)))
        }
        ("+", Constant::Bytes(mut a), Constant::Bytes(b)) => {
            (a.len() + b.len() <= MAX_FOLDED_LEN).then(|| {
                a.extend_from_slice(&b);
                Constant::Bytes(a)
            })
        }
        ("+", Constant::Str(a), Constant::Str(b)) => {
            (a.len() + b.len() <= MAX_FOLDED_LEN).then(|| Constant::Str(a + &b))
        }
        _ => None,
    }
}

fn repeat_len(unit: usize, count: i64) -> Option<usize> {
    let count = usize::try_from(count.max(0)).ok()?;
    (unit.saturating_mul(count) <= MAX_FOLDED_LEN).then_some(count)
}

fn fold_literal(lit: SyntaxNode<'_>) -> Option<Constant> {
    match lit.raw_kind() {
        "integer" => parse_int(lit.text()).map(Constant::Int),
        "string" => {
            if !lit.is_leaf() {
                return None;
            }
            parse_string(lit.text())
        }
        "concatenated_string" => {
            let mut parts = lit.children().map(fold_literal);
            let mut acc = parts.next()??;
            for part in parts {
                acc = match (acc, part?) {
                    (Constant::Bytes(mut a), Constant::Bytes(b)) => {
                        a.extend_from_slice(&b);
                        Constant::Bytes(a)
                    }
                    (Constant::Str(a), Constant::Str(b)) => Constant::Str(a + &b),
                    _ => return None,
                };
            }
            Some(acc)
        }
        _ => None,
    }
}

/// Parses a Python integer literal (`10_000`, `0x10`, `0o7`, `0b1`).
pub fn parse_int(text: &str) -> Option<i64> {
    let cleaned: String = text.chars().filter(|&c| c != '_').collect();
    let lower = cleaned.to_ascii_lowercase();
    let (digits, radix) = if let Some(d) = lower.strip_prefix("0x") {
        (d, 16)
    } else if let Some(d) = lower.strip_prefix("0o") {
        (d, 8)
    } else if let Some(d) = lower.strip_prefix("0b") {
        (d, 2)
    } else {
        if lower.len() > 1 && lower.starts_with('0') && lower.chars().any(|c| c != '0') {
            return None;
        }
        (lower.as_str(), 10)
    };
    if digits.is_empty() {
        return None;
    }
    i64::from_str_radix(digits, radix).ok()
}

/// Decodes a Python string or bytes literal, including its prefix and
/// quotes. Returns `None` for f-strings and unsupported escapes.
pub fn parse_string(text: &str) -> Option<Constant> {
    let quote_at = text.find(['\'', '"'])?;
    let prefix = text[..quote_at].to_ascii_lowercase();
    if prefix.contains('f') || prefix.contains('t') {
        return None;
    }
    let is_bytes = prefix.contains('b');
    let is_raw = prefix.contains('r');
    let rest = &text[quote_at..];
    let delim = if rest.starts_with("'''") || rest.starts_with("\"\"\"") {
        &rest[..3]
    } else {
        &rest[..1]
    };
    if rest.len() < 2 * delim.len() || !rest.ends_with(delim) {
        return None;
    }
    let body = &rest[delim.len()..rest.len() - delim.len()];
    if is_bytes {
        decode_bytes(body, is_raw).map(Constant::Bytes)
    } else {
        decode_str(body, is_raw).map(Constant::Str)
    }
}

enum Escape {
    Byte(u8),
    Char(char),
    Skip,
    Literal(char),
}

fn decode_escape(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, bytes: bool) -> Option<Escape> {
    let c = chars.next()?;
    Some(match c {
        '\n' => Escape::Skip,
        '\r' => {
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
            Escape::Skip
        }
        '\\' => Escape::Byte(b'\\'),
        '\'' => Escape::Byte(b'\''),
        '"' => Escape::Byte(b'"'),
        'a' => Escape::Byte(0x07),
        'b' => Escape::Byte(0x08),
        'f' => Escape::Byte(0x0c),
        'n' => Escape::Byte(b'\n'),
        'r' => Escape::Byte(b'\r'),
        't' => Escape::Byte(b'\t'),
        'v' => Escape::Byte(0x0b),
        '0'..='7' => {
            let mut value = c.to_digit(8)?;
            for _ in 0..2 {
                match chars.peek().and_then(|d| d.to_digit(8)) {
                    Some(d) => {
                        value = value * 8 + d;
                        chars.next();
                    }
                    None => break,
                }
            }
            if bytes {
                Escape::Byte(u8::try_from(value).ok()?)
            } else {
                Escape::Char(char::from_u32(value)?)
            }
        }
        'x' => {
            let hi = chars.next()?.to_digit(16)?;
            let lo = chars.next()?.to_digit(16)?;
            let value = hi * 16 + lo;
            if bytes {
                Escape::Byte(value as u8)
            } else {
                Escape::Char(char::from_u32(value)?)
            }
        }
        'u' | 'U' if !bytes => {
            let width = if c == 'u' { 4 } else { 8 };
            let mut value = 0u32;
            for _ in 0..width {
                value = value.checked_mul(16)? + chars.next()?.to_digit(16)?;
            }
            Escape::Char(char::from_u32(value)?)
        }
        // \N{...} needs the Unicode name table.
        'N' if !bytes => return None,
        other => Escape::Literal(other),
    })
}

fn decode_bytes(body: &str, raw: bool) -> Option<Vec<u8>> {
    if raw {
        return Some(body.as_bytes().to_vec());
    }
    let mut out = Vec::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match decode_escape(&mut chars, true)? {
            Escape::Byte(b) => out.push(b),
            Escape::Char(_) => return None,
            Escape::Skip => {}
            Escape::Literal(other) => {
                out.push(b'\\');
                let mut buf = [0u8; 4];
                out.extend_from_slice(other.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    Some(out)
}

fn decode_str(body: &str, raw: bool) -> Option<String> {
    if raw {
        return Some(body.to_string());
    }
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match decode_escape(&mut chars, false)? {
            Escape::Byte(b) => out.push(b as char),
            Escape::Char(ch) => out.push(ch),
            Escape::Skip => {}
            Escape::Literal(other) => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_source, resolve_imports, SourceFile};

    fn fold_rhs(src: &str) -> Option<Constant> {
        let file = SourceFile::application("t.py", "p", src.as_bytes());
        let tree = parse_source(&file, src.as_bytes()).unwrap();
        let imports = ImportTable::new(&resolve_imports(&tree));
        let assign = tree.nodes().filter(|n| n.kind() == NodeKind::Assignment).last()?;
        fold_constant(assign.child_by_field("value")?, &imports).map(|v| v.constant)
    }

    #[test]
    fn integers() {
        assert_eq!(parse_int("10_000"), Some(10_000));
        assert_eq!(parse_int("0x10"), Some(16));
        assert_eq!(parse_int("0O17"), Some(15));
        assert_eq!(parse_int("0b101"), Some(5));
        assert_eq!(parse_int("000"), Some(0));
        assert_eq!(parse_int("0777"), None);
        assert_eq!(parse_int("99999999999999999999999"), None);
        assert_eq!(fold_rhs("x = 1"), Some(Constant::Int(1)));
        assert_eq!(fold_rhs("x = -5"), Some(Constant::Int(-5)));
    }

    #[test]
    fn string_literals() {
        assert_eq!(parse_string(r"b'\0'"), Some(Constant::Bytes(vec![0])));
        assert_eq!(parse_string(r"b'\x00\xffA'"), Some(Constant::Bytes(vec![0, 255, 65])));
        assert_eq!(parse_string(r"rb'\0'"), Some(Constant::Bytes(b"\\0".to_vec())));
        assert_eq!(parse_string(r#"'a\'b'"#), Some(Constant::Str("a'b".into())));
        assert_eq!(parse_string("'''x\ny'''"), Some(Constant::Str("x\ny".into())));
        assert_eq!(parse_string(r"u'é'"), Some(Constant::Str("é".into())));
        assert_eq!(parse_string(r"'\q'"), Some(Constant::Str("\\q".into())));
        assert_eq!(parse_string(r"b'\101\7'"), Some(Constant::Bytes(vec![65, 7])));
        assert_eq!(parse_string("f'x'"), None);
        assert_eq!(parse_string(r"'\N{BULLET}'"), None);
    }

    #[test]
    fn repetition_and_concatenation() {
        assert_eq!(fold_rhs(r"x = b'\0' * 16"), Some(Constant::Bytes(vec![0; 16])));
        assert_eq!(fold_rhs(r"x = 4 * b'ab'"), Some(Constant::Bytes(b"abababab".to_vec())));
        assert_eq!(fold_rhs("x = ('a' + 'b') * 2"), Some(Constant::Str("abab".into())));
        assert_eq!(fold_rhs("x = b'a' b'b'"), Some(Constant::Bytes(b"ab".to_vec())));
        assert_eq!(fold_rhs("x = b'a' * -3"), Some(Constant::Bytes(vec![])));
        assert_eq!(fold_rhs("x = b'a' + 'b'"), None);
        assert_eq!(fold_rhs("x = 2 * 3 - 1 + 10_000"), Some(Constant::Int(10_005)));
        assert_eq!(fold_rhs("x = 9223372036854775807 + 1"), None);
        assert_eq!(fold_rhs("x = b'a' * 100000000"), None);
        assert_eq!(fold_rhs("x = os.urandom(16)"), None);
        assert_eq!(fold_rhs("x = f'{k}'"), None);
    }

    #[test]
    fn mode_constants() {
        assert_eq!(
            fold_rhs("from Crypto.Cipher import AES\nx = AES.MODE_ECB"),
            Some(Constant::EnumConst("Crypto.Cipher.AES.MODE_ECB".into()))
        );
        assert_eq!(
            fold_rhs("from Crypto.Cipher.AES import MODE_CBC\nx = MODE_CBC"),
            Some(Constant::EnumConst("Crypto.Cipher.AES.MODE_CBC".into()))
        );
        assert_eq!(fold_rhs("x = MODE_CBC"), None);
        assert_eq!(fold_rhs("x = AES.block_size"), None);
        assert_eq!(
            fold_rhs("from cryptography.hazmat.primitives.ciphers import modes\nx = modes.ECB()"),
            Some(Constant::EnumConst("cryptography.hazmat.primitives.ciphers.modes.ECB".into()))
        );
        assert_eq!(fold_rhs("x = modes.ECB()"), None);
    }
}
