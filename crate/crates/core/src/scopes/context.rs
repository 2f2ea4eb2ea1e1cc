use std::collections::{BTreeSet, HashSet};

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tree::{is_identifier, parse_scopes, ScopeKind, ScopeTree};
use crate::corpus::FunctionRecord;
use crate::error::{Error, Result};
use crate::sampling::seeded;
use crate::textprep::{code_line_mask, tokenize_code};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub surrounding_n: usize,
    pub within_function_only: bool,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            surrounding_n: 6,
            within_function_only: true,
        }
    }
}

fn code_indices(record: &FunctionRecord) -> Vec<usize> {
    code_line_mask(&record.lines)
        .into_iter()
        .enumerate()
        .filter_map(|(i, keep)| keep.then_some(i))
        .collect()
}

fn function_tree(record: &FunctionRecord) -> Option<ScopeTree> {
    parse_scopes(&record.lines.join("\n")).ok()
}

/// 0-based inclusive bounds of the method enclosing `line`, or the whole record.
fn function_bounds(record: &FunctionRecord, tree: Option<&ScopeTree>, line: usize) -> (usize, usize) {
    let whole = (0, record.lines.len().saturating_sub(1));
    let Some(tree) = tree else { return whole };
    match tree.innermost_of_kind(line + 1, ScopeKind::Method) {
        Some(id) => {
            let n = tree.node(id);
            (n.start_line - 1, n.end_line - 1)
        }
        None => whole,
    }
}

/// Up to `n` code lines on each side of every vulnerable line, vulnerable
/// lines excluded. Vulnerable lines take up window positions like any other
/// code line; blank and comment-only lines do not.
pub fn surrounding_context(record: &FunctionRecord, config: &ContextConfig) -> BTreeSet<usize> {
    let code = code_indices(record);
    let tree = if config.within_function_only {
        function_tree(record)
    } else {
        None
    };
    let mut out = BTreeSet::new();
    for &v in &record.vulnerable_line_indices {
        let (lo, hi) = if config.within_function_only {
            function_bounds(record, tree.as_ref(), v)
        } else {
            (0, record.lines.len().saturating_sub(1))
        };
        let before = code.iter().rev().filter(|&&i| i < v && i >= lo).take(config.surrounding_n);
        let after = code.iter().filter(|&&i| i > v && i <= hi).take(config.surrounding_n);
        out.extend(before.chain(after).copied());
    }
    out.retain(|i| !record.vulnerable_line_indices.contains(i));
    out
}

/// Every code line of the function except the vulnerable ones.
pub fn function_context(record: &FunctionRecord) -> BTreeSet<usize> {
    code_indices(record)
        .into_iter()
        .filter(|i| !record.vulnerable_line_indices.contains(i))
        .collect()
}

const ASSIGN_OPS: [&str; 12] = ["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="];

/// Variables used and defined on one line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LineVars {
    pub uses: BTreeSet<String>,
    pub defs: BTreeSet<String>,
}

/// Identifier roles on a line of code.
///
/// A variable is a non-keyword identifier not followed by `(` and not
/// preceded by `.`. It is defined when it precedes an assignment operator,
/// sits next to `++`/`--`, follows a type in a declaration, or is the
/// receiver of a method call (`sb.append(..)` mutates `sb`).
pub fn line_vars(line: &str) -> LineVars {
    let t = tokenize_code(line);
    let mut out = LineVars::default();
    let tok = |i: usize| t.get(i).map(String::as_str).unwrap_or("");
    for i in 0..t.len() {
        if !is_identifier(&t[i]) || tok(i + 1) == "(" || (i > 0 && tok(i - 1) == ".") {
            continue;
        }
        out.uses.insert(t[i].clone());
        let next = tok(i + 1);
        let prev = if i > 0 { tok(i - 1) } else { "" };
        let declared = i > 0
            && (is_identifier(prev) || matches!(prev, ">" | "]" | "int" | "long" | "short" | "byte" | "char" | "boolean" | "float" | "double"))
            && matches!(next, "=" | ";" | "," | ":" | ")" | "");
        let receiver = next == "." && is_identifier(tok(i + 2)) && tok(i + 3) == "(";
        if ASSIGN_OPS.contains(&next)
            || matches!(next, "++" | "--")
            || matches!(prev, "++" | "--")
            || declared
            || receiver
        {
            out.defs.insert(t[i].clone());
        }
    }
    out
}

/// Line-level def-use approximation of a program slice.
///
/// Backward: earlier lines defining a variable used by a vulnerable line,
/// plus headers of control blocks enclosing it. Forward: later lines using
/// a variable the vulnerable line defines. One more hop is then taken from
/// every collected line in the same direction.
pub fn defuse_slice(record: &FunctionRecord) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let code = code_indices(record);
    let vars: Vec<LineVars> = record.lines.iter().map(|l| line_vars(l)).collect();
    let vuln = &record.vulnerable_line_indices;
    let tree = function_tree(record);
    let intersects = |a: &BTreeSet<String>, b: &BTreeSet<String>| a.iter().any(|x| b.contains(x));
    let defining_before = |line: usize| -> Vec<usize> {
        code.iter()
            .copied()
            .filter(|&l| l < line && !vuln.contains(&l) && intersects(&vars[l].defs, &vars[line].uses))
            .collect()
    };
    let using_after = |line: usize| -> Vec<usize> {
        code.iter()
            .copied()
            .filter(|&l| l > line && !vuln.contains(&l) && intersects(&vars[l].uses, &vars[line].defs))
            .collect()
    };
    let mut backward = BTreeSet::new();
    let mut forward = BTreeSet::new();
    for &v in vuln {
        if vars[v].uses.is_empty() {
            continue;
        }
        backward.extend(defining_before(v));
        if let Some(tree) = &tree {
            for id in tree.enclosing(v + 1, v + 1) {
                let node = tree.node(id);
                let header = node.start_line - 1;
                if node.kind.is_control() && header < v && !vuln.contains(&header) {
                    backward.insert(header);
                }
            }
        }
        forward.extend(using_after(v));
    }
    let first_hop_back: Vec<usize> = backward.iter().copied().collect();
    for b in first_hop_back {
        backward.extend(defining_before(b));
    }
    let first_hop_fwd: Vec<usize> = forward.iter().copied().collect();
    for f in first_hop_fwd {
        forward.extend(using_after(f));
    }
    (backward, forward)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    Slice,
    Surrounding,
    Function,
}

/// Which lines of a vulnerable function feed the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum InputMode {
    VulnOnly,
    /// As many randomly chosen non-vulnerable code lines as there are vulnerable ones.
    NonvulnRandom { seed: u64 },
    NonvulnAll,
    /// Vulnerable lines plus a context; `separate` keeps them as two inputs.
    WithContext { context: ContextKind, separate: bool },
}

impl InputMode {
    /// Parses `vuln_only`, `nonvuln_random`, `nonvuln_all`, `vuln+slice`,
    /// `vuln+surrounding`, `vuln+function`, with a `:double` suffix for
    /// two separate inputs.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let (base, separate) = match text.strip_suffix(":double") {
            Some(b) => (b, true),
            None => (text, false),
        };
        let context = match base {
            "vuln_only" if !separate => return Ok(InputMode::VulnOnly),
            "nonvuln_random" if !separate => return Ok(InputMode::NonvulnRandom { seed }),
            "nonvuln_all" if !separate => return Ok(InputMode::NonvulnAll),
            "vuln+slice" => ContextKind::Slice,
            "vuln+surrounding" => ContextKind::Surrounding,
            "vuln+function" => ContextKind::Function,
            _ => return Err(Error::Config(format!("unknown input mode `{text}`"))),
        };
        Ok(InputMode::WithContext { context, separate })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltInput {
    /// Selected line indices in code order.
    pub indices: Vec<usize>,
    pub tokens: Vec<String>,
    /// Context tokens when the mode keeps two separate inputs.
    pub context_tokens: Option<Vec<String>>,
}

fn tokens_of(record: &FunctionRecord, lines: impl IntoIterator<Item = usize>) -> Vec<String> {
    lines
        .into_iter()
        .flat_map(|i| tokenize_code(&record.lines[i]))
        .collect()
}

pub fn context_lines(record: &FunctionRecord, kind: ContextKind, config: &ContextConfig) -> BTreeSet<usize> {
    match kind {
        ContextKind::Slice => {
            let (b, f) = defuse_slice(record);
            b.union(&f).copied().collect()
        }
        ContextKind::Surrounding => surrounding_context(record, config),
        ContextKind::Function => function_context(record),
    }
}

/// Assembles the token input(s) of one function for a given mode.
pub fn build_input(record: &FunctionRecord, mode: InputMode, config: &ContextConfig) -> BuiltInput {
    let vuln: Vec<usize> = record.vulnerable_line_indices.iter().copied().collect();
    match mode {
        InputMode::VulnOnly => BuiltInput {
            tokens: tokens_of(record, vuln.iter().copied()),
            indices: vuln,
            context_tokens: None,
        },
        InputMode::NonvulnAll => {
            let idx: Vec<usize> = function_context(record).into_iter().collect();
            BuiltInput {
                tokens: tokens_of(record, idx.iter().copied()),
                indices: idx,
                context_tokens: None,
            }
        }
        InputMode::NonvulnRandom { seed } => {
            let mut pool: Vec<usize> = function_context(record).into_iter().collect();
            if pool.len() < vuln.len() {
                warn!(
                    "{}: only {} non-vulnerable lines for {} vulnerable ones; taking all",
                    record.id,
                    pool.len(),
                    vuln.len()
                );
            } else {
                pool.shuffle(&mut seeded(seed));
                pool.truncate(vuln.len());
                pool.sort_unstable();
            }
            BuiltInput {
                tokens: tokens_of(record, pool.iter().copied()),
                indices: pool,
                context_tokens: None,
            }
        }
        InputMode::WithContext { context, separate } => {
            let ctx = context_lines(record, context, config);
            if separate {
                let mut indices: Vec<usize> = vuln.iter().copied().chain(ctx.iter().copied()).collect();
                indices.sort_unstable();
                BuiltInput {
                    tokens: tokens_of(record, vuln.iter().copied()),
                    context_tokens: Some(tokens_of(record, ctx.iter().copied())),
                    indices,
                }
            } else {
                let all: BTreeSet<usize> = vuln.iter().copied().chain(ctx).collect();
                let indices: Vec<usize> = all.into_iter().collect();
                BuiltInput {
                    tokens: tokens_of(record, indices.iter().copied()),
                    indices,
                    context_tokens: None,
                }
            }
        }
    }
}

/// Unique identifiers on the vulnerable lines (useful for reporting).
pub fn vulnerable_identifiers(record: &FunctionRecord) -> HashSet<String> {
    record
        .vulnerable_line_indices
        .iter()
        .flat_map(|&i| line_vars(&record.lines[i]).uses)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Labels;
    use chrono::NaiveDate;

    pub(crate) fn record(lines: &[&str], vuln: &[usize]) -> FunctionRecord {
        FunctionRecord {
            id: "f".into(),
            lines: lines.iter().map(|s| s.to_string()).collect(),
            vulnerable_line_indices: vuln.iter().copied().collect(),
            labels: Labels::new(),
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        }
    }

    const PREAMBLE: [&str; 11] = [
        "protected String getExecutionPreamble()",
        "{",
        "    if (getWorkingDirectoryAsString() == null)",
        "    {return null;}",
        "    String dir = getWorkingDirectoryAsString();",
        "    StringBuilder sb = new StringBuilder();",
        "    sb.append(\"cd\");",
        "    sb.append(unifyQuotes(dir));",
        "    sb.append(\"&&\");",
        "    return sb.toString();",
        "}",
    ];

    #[test]
    fn preamble_slice() {
        let r = record(&PREAMBLE, &[7]);
        let (b, f) = defuse_slice(&r);
        assert_eq!(b, BTreeSet::from([4, 5, 6]));
        assert_eq!(f, BTreeSet::from([8, 9]));
    }

    #[test]
    fn literal_only_line() {
        let r = record(&["int a = 1;", "\"hello\";", "a++;"], &[1]);
        assert_eq!(defuse_slice(&r), (BTreeSet::new(), BTreeSet::new()));
    }

    #[test]
    fn straight_chain() {
        let r = record(&["int a = 1;", "int b = a + 1;", "print(b);"], &[1]);
        assert_eq!(defuse_slice(&r), (BTreeSet::from([0]), BTreeSet::from([2])));
    }

    #[test]
    fn control_header_in_backward() {
        let r = record(&["void f(int n) {", "  if (n > 0) {", "    g(n);", "  }", "}"], &[2]);
        let (b, _) = defuse_slice(&r);
        assert!(b.contains(&1));
        assert!(b.iter().all(|&l| l < 2));
    }

    #[test]
    fn surrounding_saturates_and_zero() {
        let r = record(&["a();", "b();", "c();", "d();", "e();"], &[2]);
        let cfg = ContextConfig::default();
        assert_eq!(surrounding_context(&r, &cfg), BTreeSet::from([0, 1, 3, 4]));
        let zero = ContextConfig {
            surrounding_n: 0,
            ..cfg
        };
        assert!(surrounding_context(&r, &zero).is_empty());
    }

    #[test]
    fn surrounding_skips_comments() {
        let r = record(&["a();", "b();", "// note", "", "v();", "/* x */", "c();", "d();"], &[4]);
        let cfg = ContextConfig {
            surrounding_n: 1,
            within_function_only: true,
        };
        assert_eq!(surrounding_context(&r, &cfg), BTreeSet::from([1, 6]));
    }

    #[test]
    fn function_context_complement() {
        let r = record(&PREAMBLE, &[7]);
        let f = function_context(&r);
        let mut all: BTreeSet<usize> = f.clone();
        all.insert(7);
        assert_eq!(all, (0..11).collect());
        let huge = ContextConfig {
            surrounding_n: 1000,
            within_function_only: true,
        };
        assert_eq!(surrounding_context(&r, &huge), f);
    }

    #[test]
    fn input_modes() {
        let r = record(&PREAMBLE, &[7]);
        let cfg = ContextConfig::default();
        let v = build_input(&r, InputMode::VulnOnly, &cfg);
        assert_eq!(v.indices, [7]);
        assert_eq!(v.tokens, tokenize_code(PREAMBLE[7]));
        let single = build_input(
            &r,
            InputMode::WithContext {
                context: ContextKind::Function,
                separate: false,
            },
            &cfg,
        );
        assert_eq!(single.tokens, tokenize_code(&PREAMBLE.join("\n")));
        let double = build_input(
            &r,
            InputMode::WithContext {
                context: ContextKind::Function,
                separate: true,
            },
            &cfg,
        );
        assert_eq!(double.tokens, v.tokens);
        assert_eq!(double.tokens.len() + double.context_tokens.unwrap().len(), single.tokens.len());
        let rnd = build_input(&r, InputMode::NonvulnRandom { seed: 1 }, &cfg);
        assert_eq!(rnd.indices.len(), 1);
        assert_ne!(rnd.indices[0], 7);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(InputMode::parse("vuln_only", 0).unwrap(), InputMode::VulnOnly);
        assert_eq!(
            InputMode::parse("vuln+slice:double", 0).unwrap(),
            InputMode::WithContext {
                context: ContextKind::Slice,
                separate: true
            }
        );
        assert!(InputMode::parse("vuln_only:double", 0).is_err());
        assert!(InputMode::parse("bogus", 0).is_err());
    }
}
