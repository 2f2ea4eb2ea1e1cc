use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::{code_line_mask, tokenize_code};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeKind {
    FileRoot,
    TypeDecl,
    Method,
    IfElse,
    Switch,
    Loop,
    TryCatch,
}

impl ScopeKind {
    /// Control-flow blocks whose header decides whether the body runs.
    pub fn is_control(self) -> bool {
        matches!(
            self,
            ScopeKind::IfElse | ScopeKind::Switch | ScopeKind::Loop | ScopeKind::TryCatch
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeNode {
    pub kind: ScopeKind,
    /// 1-based inclusive line span, header line through closing brace.
    pub start_line: usize,
    pub end_line: usize,
    /// Code lines in the span (blank and comment-only lines excluded).
    pub size: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Scope hierarchy of one source file. Node 0 is the file root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeTree {
    pub nodes: Vec<ScopeNode>,
}

impl ScopeTree {
    pub fn root(&self) -> &ScopeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &ScopeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Root-only tree over `lines` lines.
    pub fn whole_file(lines: usize) -> Self {
        ScopeTree {
            nodes: vec![ScopeNode {
                kind: ScopeKind::FileRoot,
                start_line: 1,
                end_line: lines.max(1),
                size: lines,
                depth: 0,
                parent: None,
                children: Vec::new(),
            }],
        }
    }

    /// Ids of nodes whose span contains `start..=end`, outermost first.
    pub fn enclosing(&self, start: usize, end: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut current = Some(0);
        while let Some(id) = current {
            out.push(id);
            current = self.nodes[id]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].start_line <= start && self.nodes[c].end_line >= end);
        }
        out
    }

    /// Innermost node of `kind` containing the line, if any.
    pub fn innermost_of_kind(&self, line: usize, kind: ScopeKind) -> Option<usize> {
        self.enclosing(line, line)
            .into_iter()
            .rev()
            .find(|&id| self.nodes[id].kind == kind)
    }

    /// Closest enclosing scope: the enclosing node with the fewest code
    /// lines, the deepest one on ties. The root always qualifies.
    pub fn closest_enclosing(&self, start: usize, end: usize) -> usize {
        let chain = self.enclosing(start, end);
        let mut best = chain[0];
        for &id in &chain[1..] {
            if self.nodes[id].size <= self.nodes[best].size {
                best = id;
            }
        }
        best
    }
}

const TYPE_KEYWORDS: [&str; 3] = ["class", "interface", "enum"];

pub(crate) const JAVA_KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "true", "false", "null",
];

pub(crate) fn is_identifier(token: &str) -> bool {
    let mut chars = token.chars();
    chars
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
        && !JAVA_KEYWORDS.contains(&token)
}

/// Drops leading annotations such as `@Override` or `@SuppressWarnings("x")`.
fn strip_annotations(tokens: &[String]) -> &[String] {
    let mut i = 0;
    while i + 1 < tokens.len() && tokens[i] == "@" && tokens[i + 1] != "interface" {
        i += 2;
        while i + 1 < tokens.len() && tokens[i] == "." {
            i += 2;
        }
        if tokens.get(i).is_some_and(|t| t == "(") {
            let mut depth = 0;
            while i < tokens.len() {
                match tokens[i].as_str() {
                    "(" => depth += 1,
                    ")" => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
        }
    }
    &tokens[i.min(tokens.len())..]
}

fn looks_like_method(tokens: &[String]) -> bool {
    if tokens.iter().any(|t| t == "=" || t == "new" || t == "->") {
        return false;
    }
    let Some(open) = tokens.iter().position(|t| t == "(") else {
        return false;
    };
    if open == 0 || !is_identifier(&tokens[open - 1]) {
        return false;
    }
    let mut depth = 0;
    let mut close = None;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        match t.as_str() {
            "(" => depth += 1,
            ")" => {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    match close {
        Some(c) => {
            let rest = &tokens[c + 1..];
            rest.is_empty() || rest[0] == "throws"
        }
        None => false,
    }
}

/// Scope kind of a block from the code preceding its opening brace.
pub(crate) fn classify_header(header: &str) -> Option<ScopeKind> {
    let all = tokenize_code(header);
    let tokens = strip_annotations(&all);
    let first = tokens.first()?.as_str();
    match first {
        "if" | "else" => return Some(ScopeKind::IfElse),
        "switch" => return Some(ScopeKind::Switch),
        "for" | "while" | "do" => return Some(ScopeKind::Loop),
        "try" | "catch" | "finally" => return Some(ScopeKind::TryCatch),
        _ => {}
    }
    let type_decl = tokens.iter().enumerate().any(|(i, t)| {
        TYPE_KEYWORDS.contains(&t.as_str()) && (i == 0 || tokens[i - 1] != ".")
    }) || (all.first().is_some_and(|t| t == "@") && all.get(1).is_some_and(|t| t == "interface"));
    if type_decl && !tokens.iter().any(|t| t == "new" || t == "=" || t == "->") {
        return Some(ScopeKind::TypeDecl);
    }
    if looks_like_method(tokens) {
        return Some(ScopeKind::Method);
    }
    None
}

struct Open {
    node: Option<usize>,
}

/// Brace-matching scope parser for Java-like source.
///
/// Strings, char literals and comments are skipped. Each `{` is classified
/// by the code since the previous `;`, `{` or `}` (outside parentheses);
/// braces of unrecognised blocks are matched but create no node.
pub fn parse_scopes(source: &str) -> Result<ScopeTree> {
    let lines: Vec<&str> = source.lines().collect();
    let mask = code_line_mask(&lines);
    let size_of = |start: usize, end: usize| mask[start - 1..end].iter().filter(|m| **m).count();
    let total = lines.len().max(1);
    let mut nodes = vec![ScopeNode {
        kind: ScopeKind::FileRoot,
        start_line: 1,
        end_line: total,
        size: if lines.is_empty() { 0 } else { size_of(1, lines.len()) },
        depth: 0,
        parent: None,
        children: Vec::new(),
    }];
    let mut stack: Vec<Open> = Vec::new();
    let mut header = String::new();
    let mut header_line: Option<usize> = None;
    let mut paren = 0i32;
    let chars: Vec<char> = source.chars().collect();
    let mut line = 1;
    let mut i = 0;
    let parent_of = |stack: &[Open]| stack.iter().rev().find_map(|o| o.node).unwrap_or(0);
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c == '\n' {
            line += 1;
            header.push(' ');
            i += 1;
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && next == Some('*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i += 2;
            header.push(' ');
            continue;
        }
        if c == '"' || c == '\'' {
            header_line.get_or_insert(line);
            header.push(c);
            header.push(c);
            i += 1;
            while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            if i < chars.len() && chars[i] == c {
                i += 1;
            }
            continue;
        }
        match c {
            '(' => paren += 1,
            ')' => paren -= 1,
            _ => {}
        }
        if c == '{' {
            let kind = classify_header(&header);
            let node = kind.map(|kind| {
                let parent = parent_of(&stack);
                let id = nodes.len();
                nodes.push(ScopeNode {
                    kind,
                    start_line: header_line.unwrap_or(line),
                    end_line: line,
                    size: 0,
                    depth: nodes[parent].depth + 1,
                    parent: Some(parent),
                    children: Vec::new(),
                });
                nodes[parent].children.push(id);
                id
            });
            stack.push(Open { node });
            header.clear();
            header_line = None;
            paren = 0;
        } else if c == '}' {
            let open = stack.pop().ok_or_else(|| Error::Parse {
                line,
                message: "unmatched closing brace".into(),
            })?;
            if let Some(id) = open.node {
                nodes[id].end_line = line;
                nodes[id].size = size_of(nodes[id].start_line, line);
            }
            header.clear();
            header_line = None;
            paren = 0;
        } else if c == ';' && paren <= 0 {
            header.clear();
            header_line = None;
        } else if c == ':' && paren <= 0 && next != Some(':') && (i == 0 || chars[i - 1] != ':') {
            // `case x:`, `default:` and statement labels end a header
            header.clear();
            header_line = None;
        } else {
            if !c.is_whitespace() {
                header_line.get_or_insert(line);
            }
            header.push(c);
        }
        i += 1;
    }
    if !stack.is_empty() {
        let unclosed = stack.iter().rev().find_map(|o| o.node).map_or(line, |id| nodes[id].start_line);
        return Err(Error::Parse {
            line: unclosed,
            message: format!("{} unclosed brace(s)", stack.len()),
        });
    }
    Ok(ScopeTree { nodes })
}

/// Closest enclosing scope of a 1-based inclusive hunk range.
pub fn extract_ces(tree: &ScopeTree, start: usize, end: usize) -> &ScopeNode {
    tree.node(tree.closest_enclosing(start, end))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NESTED: &str = "\
package a;

public class Foo {
    private int x = 1;

    public void run(int n) throws Exception {
        // comment
        if (n > 0) {
            x++;
        }
    }
}
";

    #[test]
    fn nested_chain() {
        let t = parse_scopes(NESTED).unwrap();
        let kinds: Vec<_> = t.enclosing(9, 9).iter().map(|&id| t.node(id).kind).collect();
        assert_eq!(
            kinds,
            [ScopeKind::FileRoot, ScopeKind::TypeDecl, ScopeKind::Method, ScopeKind::IfElse]
        );
        let m = t.node(t.enclosing(9, 9)[2]);
        assert_eq!((m.start_line, m.end_line, m.size), (6, 11, 5));
        assert_eq!(extract_ces(&t, 9, 9).kind, ScopeKind::IfElse);
        assert_eq!(extract_ces(&t, 4, 4).kind, ScopeKind::TypeDecl);
        assert_eq!(extract_ces(&t, 1, 12).kind, ScopeKind::FileRoot);
    }

    #[test]
    fn braces_in_strings_and_comments() {
        let src = "class A {\n  String s = \"{{\";\n  char c = '}';\n  // }\n  /* { */\n}\n";
        let t = parse_scopes(src).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.node(1).end_line, 6);
    }

    #[test]
    fn top_level_only() {
        let t = parse_scopes("int a = 1;\nfoo(a);\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.root().end_line, 2);
    }

    #[test]
    fn unbalanced() {
        match parse_scopes("class A {\n void f() {\n}\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_scopes("}\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_classification() {
        assert_eq!(classify_header("for (int i = 0; i < n; i++)"), Some(ScopeKind::Loop));
        assert_eq!(classify_header("else if (x)"), Some(ScopeKind::IfElse));
        assert_eq!(classify_header("@Override public String toString()"), Some(ScopeKind::Method));
        assert_eq!(classify_header("Foo(int a) throws IOException"), Some(ScopeKind::Method));
        assert_eq!(classify_header("Runnable r = new Runnable()"), None);
        assert_eq!(classify_header("int[] a ="), None);
        assert_eq!(classify_header("synchronized (lock)"), None);
        assert_eq!(classify_header("public static enum Mode"), Some(ScopeKind::TypeDecl));
        assert_eq!(classify_header("x -> "), None);
        assert_eq!(classify_header("Class<?> c = Foo.class;"), None);
    }

    #[test]
    fn for_header_semicolons_do_not_reset() {
        let t = parse_scopes("void f() {\n  for (int i = 0;\n       i < 3; i++) {\n    g(i);\n  }\n}\n").unwrap();
        let lp = t.node(2);
        assert_eq!((lp.kind, lp.start_line, lp.end_line), (ScopeKind::Loop, 2, 5));
    }

    #[test]
    fn labels_end_the_header() {
        let src = "void f(int x) {\n  switch (x) {\n    default: while (x > 0) {\n      x--;\n    }\n  }\n  outer: for (;;) { break outer; }\n}\n";
        let t = parse_scopes(src).unwrap();
        let kinds: Vec<_> = t.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(kinds, [ScopeKind::FileRoot, ScopeKind::Method, ScopeKind::Switch, ScopeKind::Loop, ScopeKind::Loop]);
        assert_eq!(t.node(3).start_line, 3);
    }
}
