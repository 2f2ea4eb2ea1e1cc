//! Code-aware tokenization for Java-like source.

/// Multi-character operators, longest first so the scan is maximal munch.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>",
];

/// Tokens of a code fragment plus whether a literal ran off the end of a line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CodeTokens {
    pub tokens: Vec<String>,
    pub unterminated_literal: bool,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Splits source into identifiers, literals and maximal operators.
///
/// Case is preserved; comments are dropped. An unterminated string or char
/// literal extends to the end of its line and sets the warning flag.
pub fn tokenize_code_checked(text: &str) -> CodeTokens {
    let chars: Vec<char> = text.chars().collect();
    let mut out = CodeTokens::default();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i = (i + 2).min(chars.len());
        } else if c == '"' || c == '\'' {
            let start = i;
            i += 1;
            let mut closed = false;
            while i < chars.len() && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 2;
                    continue;
                }
                if chars[i] == c {
                    i += 1;
                    closed = true;
                    break;
                }
                i += 1;
            }
            let end = i.min(chars.len());
            if !closed {
                out.unterminated_literal = true;
            }
            out.tokens.push(chars[start..end].iter().collect());
            i = end;
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_part(chars[i]) {
                i += 1;
            }
            out.tokens.push(chars[start..i].iter().collect());
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exponent_sign = (d == '+' || d == '-')
                    && matches!(chars[i - 1], 'e' | 'E')
                    && !chars[start..i].iter().any(|&x| x == 'x' || x == 'X');
                if d.is_ascii_alphanumeric() || d == '.' || d == '_' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.tokens.push(chars[start..i].iter().collect());
        } else {
            let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
            let op = OPERATORS
                .iter()
                .find(|op| rest.starts_with(**op))
                .map(|op| op.to_string())
                .unwrap_or_else(|| c.to_string());
            i += op.chars().count();
            out.tokens.push(op);
        }
    }
    out
}

pub fn tokenize_code(text: &str) -> Vec<String> {
    tokenize_code_checked(text).tokens
}

/// Per-line flag: true when the line holds code rather than only comments or blanks.
pub fn code_line_mask<S: AsRef<str>>(lines: &[S]) -> Vec<bool> {
    let mut in_block = false;
    lines
        .iter()
        .map(|line| {
            let chars: Vec<char> = line.as_ref().chars().collect();
            let mut has_code = false;
            let mut i = 0;
            let mut quote: Option<char> = None;
            while i < chars.len() {
                let c = chars[i];
                if in_block {
                    if c == '*' && chars.get(i + 1) == Some(&'/') {
                        in_block = false;
                        i += 2;
                    } else {
                        i += 1;
                    }
                    continue;
                }
                if let Some(q) = quote {
                    if c == '\\' {
                        i += 2;
                        continue;
                    }
                    if c == q {
                        quote = None;
                    }
                    i += 1;
                    continue;
                }
                if c == '/' && chars.get(i + 1) == Some(&'/') {
                    break;
                }
                if c == '/' && chars.get(i + 1) == Some(&'*') {
                    in_block = true;
                    i += 2;
                    continue;
                }
                if !c.is_whitespace() {
                    has_code = true;
                    if c == '"' || c == '\'' {
                        quote = Some(c);
                    }
                }
                i += 1;
            }
            has_code
        })
        .collect()
}

/// Drops blank and comment-only lines. Returns the kept lines and, for each
/// kept position, the index of that line in the input.
pub fn strip_noncode_lines<S: AsRef<str>>(lines: &[S]) -> (Vec<String>, Vec<usize>) {
    let mask = code_line_mask(lines);
    lines
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (_, keep))| *keep)
        .map(|(i, (line, _))| (line.as_ref().to_string(), i))
        .unzip()
}
