use std::collections::HashSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::tree::{parse_scopes, ScopeTree};
use crate::corpus::{CommitRecord, FileChange};
use crate::textprep::tokenize_code;

/// The four token streams of one commit, before id mapping.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitTokens {
    pub pre_hunk: Vec<String>,
    pub post_hunk: Vec<String>,
    pub pre_ces: Vec<String>,
    pub post_ces: Vec<String>,
}

impl CommitTokens {
    pub fn streams(&self) -> [&[String]; 4] {
        [&self.pre_hunk, &self.post_hunk, &self.pre_ces, &self.post_ces]
    }
}

fn tree_or_root(source: &str, path: &str) -> ScopeTree {
    parse_scopes(source).unwrap_or_else(|e| {
        warn!("{path}: {e}; using the whole file as scope");
        let n = source.lines().count().max(1);
        ScopeTree::whole_file(n)
    })
}

/// Tokens of the closest enclosing scopes of `ranges` in `source`, each
/// distinct span emitted once, in order of first appearance.
pub fn ces_tokens(source: &str, path: &str, ranges: &[(usize, usize)]) -> Vec<String> {
    let tree = tree_or_root(source, path);
    let lines: Vec<&str> = source.lines().collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &(start, end) in ranges {
        let node = tree.node(tree.closest_enclosing(start, end));
        if !seen.insert((node.start_line, node.end_line)) {
            continue;
        }
        let hi = node.end_line.min(lines.len());
        for line in lines.iter().take(hi).skip(node.start_line.saturating_sub(1)) {
            out.extend(tokenize_code(line));
        }
    }
    out
}

fn file_tokens(file: &FileChange, out: &mut CommitTokens) {
    for h in &file.hunks {
        for l in &h.deleted {
            out.pre_hunk.extend(tokenize_code(l));
        }
        for l in &h.added {
            out.post_hunk.extend(tokenize_code(l));
        }
    }
    if let Some(src) = &file.pre_source {
        let ranges: Vec<_> = file.hunks.iter().filter(|h| h.pre_len > 0).map(|h| h.pre_change_range()).collect();
        out.pre_ces.extend(ces_tokens(src, &file.path, &ranges));
    }
    if let Some(src) = &file.post_source {
        let ranges: Vec<_> = file.hunks.iter().filter(|h| h.post_len > 0).map(|h| h.post_change_range()).collect();
        out.post_ces.extend(ces_tokens(src, &file.path, &ranges));
    }
}

/// Deleted lines, added lines and the pre/post closest enclosing scopes
/// over all files of a commit. A file without the matching source
/// contributes nothing to that side's scope stream.
pub fn commit_inputs(commit: &CommitRecord) -> CommitTokens {
    let mut out = CommitTokens::default();
    for f in &commit.files {
        file_tokens(f, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_unified_diff;
    use chrono::NaiveDate;

    const PRE: &str = "class A {\n  int x = 1;\n  void f() {\n    if (x > 0) {\n      g();\n    }\n  }\n}\n";
    const POST: &str = "class A {\n  int x = 1;\n  void f() {\n    if (x > 0) {\n      h();\n    }\n  }\n}\n";
    const DIFF: &str = "--- a/A.java\n+++ b/A.java\n@@ -5,1 +5,1 @@\n-      g();\n+      h();\n";

    fn commit(with_sources: bool) -> CommitRecord {
        let mut files = parse_unified_diff(DIFF).unwrap();
        if with_sources {
            files[0].pre_source = Some(PRE.into());
            files[0].post_source = Some(POST.into());
        }
        CommitRecord {
            id: "c".into(),
            project: "p".into(),
            date: NaiveDate::from_ymd_opt(2019, 3, 1).unwrap(),
            files,
            labels: Default::default(),
        }
    }

    #[test]
    fn four_streams() {
        let t = commit_inputs(&commit(true));
        assert_eq!(t.pre_hunk, ["g", "(", ")", ";"]);
        assert_eq!(t.post_hunk, ["h", "(", ")", ";"]);
        assert_eq!(t.pre_ces, tokenize_code("if (x > 0) {\n g();\n }"));
        assert_eq!(t.post_ces, tokenize_code("if (x > 0) {\n h();\n }"));
    }

    #[test]
    fn missing_sources() {
        let t = commit_inputs(&commit(false));
        assert!(t.pre_ces.is_empty() && t.post_ces.is_empty());
        assert!(!t.pre_hunk.is_empty());
    }

    #[test]
    fn duplicate_scopes_once() {
        assert_eq!(ces_tokens(PRE, "A", &[(5, 5), (5, 5)]), ces_tokens(PRE, "A", &[(5, 5)]));
    }

    #[test]
    fn unparseable_falls_back_to_file() {
        let src = "class A {\n  x();\n";
        assert_eq!(ces_tokens(src, "A", &[(2, 2)]), tokenize_code(src));
    }
}
