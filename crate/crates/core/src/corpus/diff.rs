//! Unified diff parsing.
//!
//! Only the parts of the format needed for commit analysis are modelled:
//! `---`/`+++` file headers, `@@ -a,b +c,d @@` hunk headers and hunk bodies.
//! Git extended headers (`diff --git`, `index`, mode lines) are skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One body line of a hunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HunkLine {
    Context(String),
    Deleted(String),
    Added(String),
}

/// A contiguous block of deletions and/or additions.
///
/// Line numbers are 1-based. A start of 0 only occurs together with a
/// length of 0 (the file did not exist on that side).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub pre_start: usize,
    pub pre_len: usize,
    pub post_start: usize,
    pub post_len: usize,
    pub deleted: Vec<String>,
    pub added: Vec<String>,
    /// Full body in order, context lines included.
    pub body: Vec<HunkLine>,
}

impl Hunk {
    /// Builds a hunk from its body, deriving lengths and the deleted/added lists.
    pub fn from_body(pre_start: usize, post_start: usize, body: Vec<HunkLine>) -> Self {
        let mut deleted = Vec::new();
        let mut added = Vec::new();
        let (mut pre_len, mut post_len) = (0, 0);
        for line in &body {
            match line {
                HunkLine::Context(_) => {
                    pre_len += 1;
                    post_len += 1;
                }
                HunkLine::Deleted(text) => {
                    pre_len += 1;
                    deleted.push(text.clone());
                }
                HunkLine::Added(text) => {
                    post_len += 1;
                    added.push(text.clone());
                }
            }
        }
        Hunk {
            pre_start,
            pre_len,
            post_start,
            post_len,
            deleted,
            added,
            body,
        }
    }

    /// Pre-file line numbers of the deleted lines.
    pub fn deleted_line_numbers(&self) -> Vec<usize> {
        let mut line = self.pre_start;
        let mut out = Vec::new();
        for entry in &self.body {
            match entry {
                HunkLine::Context(_) => line += 1,
                HunkLine::Deleted(_) => {
                    out.push(line);
                    line += 1;
                }
                HunkLine::Added(_) => {}
            }
        }
        out
    }

    /// Post-file line numbers of the added lines.
    pub fn added_line_numbers(&self) -> Vec<usize> {
        let mut line = self.post_start;
        let mut out = Vec::new();
        for entry in &self.body {
            match entry {
                HunkLine::Context(_) => line += 1,
                HunkLine::Added(_) => {
                    out.push(line);
                    line += 1;
                }
                HunkLine::Deleted(_) => {}
            }
        }
        out
    }

    /// Inclusive pre-file line range touched by this hunk.
    ///
    /// The span of the deleted lines when there are any, otherwise the
    /// hunk's whole pre-side span (the insertion point for pure additions).
    pub fn pre_change_range(&self) -> (usize, usize) {
        change_range(&self.deleted_line_numbers(), self.pre_start, self.pre_len)
    }

    /// Inclusive post-file line range touched by this hunk.
    pub fn post_change_range(&self) -> (usize, usize) {
        change_range(&self.added_line_numbers(), self.post_start, self.post_len)
    }
}

fn change_range(lines: &[usize], start: usize, len: usize) -> (usize, usize) {
    match (lines.first(), lines.last()) {
        (Some(&first), Some(&last)) => (first, last),
        _ => {
            let start = start.max(1);
            (start, start + len.saturating_sub(1))
        }
    }
}

/// All hunks of one file in a diff, plus optional full sources.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub hunks: Vec<Hunk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_source: Option<String>,
}

impl FileChange {
    pub fn new(path: impl Into<String>) -> Self {
        FileChange {
            path: path.into(),
            hunks: Vec::new(),
            pre_source: None,
            post_source: None,
        }
    }

    /// Invariant violations of this file section, as human-readable strings.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut last_start = 0;
        for (i, hunk) in self.hunks.iter().enumerate() {
            if hunk.deleted.is_empty() && hunk.added.is_empty() {
                out.push(format!("{}: hunk {i} has no deleted or added line", self.path));
            }
            if (hunk.pre_start == 0 && hunk.pre_len > 0) || (hunk.post_start == 0 && hunk.post_len > 0)
            {
                out.push(format!("{}: hunk {i} has line number 0", self.path));
            }
            if hunk.pre_start < last_start {
                out.push(format!("{}: hunk {i} out of order", self.path));
            }
            last_start = hunk.pre_start;
            if let Some(src) = &self.pre_source {
                let n = src.lines().count();
                if hunk.pre_len > 0 && hunk.pre_start + hunk.pre_len - 1 > n {
                    out.push(format!("{}: hunk {i} exceeds pre source ({n} lines)", self.path));
                }
            }
            if let Some(src) = &self.post_source {
                let n = src.lines().count();
                if hunk.post_len > 0 && hunk.post_start + hunk.post_len - 1 > n {
                    out.push(format!("{}: hunk {i} exceeds post source ({n} lines)", self.path));
                }
            }
        }
        out
    }
}

fn header_path(raw: &str) -> &str {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    raw.strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw)
}

fn parse_range(token: &str, sign: char, line: usize) -> Result<(usize, usize)> {
    let body = token.strip_prefix(sign).ok_or_else(|| Error::Parse {
        line,
        message: format!("expected `{sign}` range, found `{token}`"),
    })?;
    let number = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("bad number `{s}` in hunk header"),
        })
    };
    match body.split_once(',') {
        Some((start, len)) => Ok((number(start)?, number(len)?)),
        None => Ok((number(body)?, 1)),
    }
}

fn parse_hunk_header(text: &str, line: usize) -> Result<(usize, usize, usize, usize)> {
    let malformed = || Error::Parse {
        line,
        message: format!("malformed hunk header `{text}`"),
    };
    let rest = text.strip_prefix("@@ ").ok_or_else(malformed)?;
    let end = rest.find(" @@").ok_or_else(malformed)?;
    let mut parts = rest[..end].split_whitespace();
    let pre = parts.next().ok_or_else(malformed)?;
    let post = parts.next().ok_or_else(malformed)?;
    if parts.next().is_some() {
        return Err(malformed());
    }
    let (a, b) = parse_range(pre, '-', line)?;
    let (c, d) = parse_range(post, '+', line)?;
    Ok((a, b, c, d))
}

/// Parses a unified diff into one [`FileChange`] per file section, in header order.
///
/// Context lines are kept in [`Hunk::body`] for line-number bookkeeping.
/// `\ No newline at end of file` markers are dropped.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileChange>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files: Vec<FileChange> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(pre) = line.strip_prefix("--- ") {
            let post = lines
                .get(i + 1)
                .and_then(|l| l.strip_prefix("+++ "))
                .ok_or_else(|| Error::Parse {
                    line: i + 2,
                    message: "`---` header not followed by `+++` header".into(),
                })?;
            let (pre, post) = (header_path(pre), header_path(post));
            let path = if post == "/dev/null" { pre } else { post };
            files.push(FileChange::new(path));
            i += 2;
        } else if line.starts_with("@@") {
            let header_line = i + 1;
            let file = files.last_mut().ok_or_else(|| Error::Parse {
                line: header_line,
                message: "hunk header before any file header".into(),
            })?;
            let (pre_start, pre_len, post_start, post_len) = parse_hunk_header(line, header_line)?;
            i += 1;
            let (mut pre_left, mut post_left) = (pre_len, post_len);
            let mut body = Vec::new();
            while pre_left > 0 || post_left > 0 {
                let Some(&raw) = lines.get(i) else {
                    return Err(Error::Structural(format!(
                        "hunk at line {header_line} ends early: {pre_left} pre and {post_left} post lines missing"
                    )));
                };
                let mismatch = || {
                    Error::Structural(format!(
                        "hunk at line {header_line} does not match its header (line {})",
                        i + 1
                    ))
                };
                match raw.chars().next() {
                    Some('\\') => {}
                    Some(' ') | None => {
                        if pre_left == 0 || post_left == 0 {
                            return Err(mismatch());
                        }
                        pre_left -= 1;
                        post_left -= 1;
                        body.push(HunkLine::Context(raw.get(1..).unwrap_or("").to_string()));
                    }
                    Some('-') => {
                        if pre_left == 0 {
                            return Err(mismatch());
                        }
                        pre_left -= 1;
                        body.push(HunkLine::Deleted(raw[1..].to_string()));
                    }
                    Some('+') => {
                        if post_left == 0 {
                            return Err(mismatch());
                        }
                        post_left -= 1;
                        body.push(HunkLine::Added(raw[1..].to_string()));
                    }
                    Some(_) => return Err(mismatch()),
                }
                i += 1;
            }
            while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                i += 1;
            }
            let hunk = Hunk::from_body(pre_start, post_start, body);
            if hunk.deleted.is_empty() && hunk.added.is_empty() {
                return Err(Error::Structural(format!(
                    "hunk at line {header_line} has no deleted or added lines"
                )));
            }
            if let Some(prev) = file.hunks.last() {
                if prev.pre_start > hunk.pre_start {
                    return Err(Error::Structural(format!(
                        "hunk at line {header_line} is out of order"
                    )));
                }
            }
            file.hunks.push(hunk);
        } else if !files.is_empty()
            && (line.starts_with('+') || line.starts_with('-') || line.starts_with(' '))
            && files.last().is_some_and(|f| !f.hunks.is_empty())
        {
            return Err(Error::Structural(format!(
                "line {} lies outside any hunk (hunk length mismatch)",
                i + 1
            )));
        } else {
            i += 1;
        }
    }
    Ok(files)
}

/// Renders file changes back into unified diff text.
pub fn render_unified_diff(files: &[FileChange]) -> String {
    let mut out = String::new();
    for file in files {
        out.push_str(&format!("--- a/{}\n+++ b/{}\n", file.path, file.path));
        for hunk in &file.hunks {
            out.push_str(&format!(
                "@@ -{},{} +{},{} @@\n",
                hunk.pre_start, hunk.pre_len, hunk.post_start, hunk.post_len
            ));
            for line in &hunk.body {
                let (sign, text) = match line {
                    HunkLine::Context(t) => (' ', t),
                    HunkLine::Deleted(t) => ('-', t),
                    HunkLine::Added(t) => ('+', t),
                };
                out.push(sign);
                out.push_str(text);
                out.push('\n');
            }
        }
    }
    out
}

/// Applies hunks to the lines of a pre-change file, returning the post-change lines.
///
/// Context and deleted lines must match the source exactly.
pub fn apply_hunks(pre_source: &str, hunks: &[Hunk]) -> Result<Vec<String>> {
    let pre: Vec<&str> = pre_source.lines().collect();
    let mut out: Vec<String> = Vec::with_capacity(pre.len());
    let mut cursor = 0usize;
    for (h, hunk) in hunks.iter().enumerate() {
        // pre_start is 1-based; a zero-length hunk inserts after line pre_start
        let begin = if hunk.pre_len == 0 {
            hunk.pre_start
        } else {
            hunk.pre_start - 1
        };
        if begin < cursor || begin > pre.len() {
            return Err(Error::Structural(format!(
                "hunk {h} starts at line {} outside the source",
                hunk.pre_start
            )));
        }
        out.extend(pre[cursor..begin].iter().map(|s| s.to_string()));
        cursor = begin;
        for line in &hunk.body {
            match line {
                HunkLine::Context(text) | HunkLine::Deleted(text) => {
                    if pre.get(cursor) != Some(&text.as_str()) {
                        return Err(Error::Structural(format!(
                            "hunk {h} does not match source at line {}",
                            cursor + 1
                        )));
                    }
                    if let HunkLine::Context(text) = line {
                        out.push(text.clone());
                    }
                    cursor += 1;
                }
                HunkLine::Added(text) => out.push(text.clone()),
            }
        }
    }
    out.extend(pre[cursor..].iter().map(|s| s.to_string()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_DIFF: &str = "\
diff --git a/src/main/java/org/codehaus/plexus/util/cli/shell/BourneShell.java b/src/main/java/org/codehaus/plexus/util/cli/shell/BourneShell.java
index 1b2c3d4..5e6f7a8 100644
--- a/src/main/java/org/codehaus/plexus/util/cli/shell/BourneShell.java
+++ b/src/main/java/org/codehaus/plexus/util/cli/shell/BourneShell.java
@@ -5,7 +5,7 @@ protected String getExecutionPreamble()
     String dir = getWorkingDirectoryAsString();
     StringBuilder sb = new StringBuilder();
     sb.append(\"cd\");
-    sb.append(unifyQuotes(dir));
+    sb.append(quoteOneItem(dir, false));
     sb.append(\"&&\");
     return sb.toString();
 }
";

    #[test]
    fn single_hunk_fixture() {
        let files = parse_unified_diff(FIG_DIFF).unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[0].path.ends_with("BourneShell.java"));
        let hunk = &files[0].hunks[0];
        assert_eq!(hunk.deleted, vec!["    sb.append(unifyQuotes(dir));"]);
        assert_eq!(hunk.added, vec!["    sb.append(quoteOneItem(dir, false));"]);
        assert_eq!(hunk.deleted[0].trim(), "sb.append(unifyQuotes(dir));");
        assert_eq!(hunk.deleted_line_numbers(), vec![8]);
        assert_eq!(hunk.added_line_numbers(), vec![8]);
    }

    #[test]
    fn header_without_hunks() {
        let files = parse_unified_diff("--- a/x.java\n+++ b/x.java\n").unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[0].hunks.is_empty());
    }

    #[test]
    fn two_files_in_header_order() {
        let text = "--- a/b.java\n+++ b/b.java\n@@ -1 +1 @@\n-x\n+y\n--- a/a.java\n+++ b/a.java\n@@ -2,0 +3,1 @@\n+z\n";
        let files = parse_unified_diff(text).unwrap();
        let paths: Vec<_> = files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["b.java", "a.java"]);
        assert_eq!(files[1].hunks[0].added, vec!["z"]);
        assert_eq!(files[1].hunks[0].pre_len, 0);
    }

    #[test]
    fn malformed_header_names_line() {
        let err = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,x +1 @@\n-a\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn short_hunk_is_structural() {
        let err = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n-b\n").unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
    }

    #[test]
    fn extra_hunk_line_is_structural() {
        let err = parse_unified_diff("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n+c\n").unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
    }

    #[test]
    fn no_newline_marker_dropped() {
        let text = "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+b\n\\ No newline at end of file\n";
        let files = parse_unified_diff(text).unwrap();
        assert_eq!(files[0].hunks[0].body.len(), 2);
    }

    #[test]
    fn dev_null_uses_pre_path() {
        let files = parse_unified_diff("--- a/gone.c\n+++ /dev/null\n@@ -1 +0,0 @@\n-x\n").unwrap();
        assert_eq!(files[0].path, "gone.c");
    }

    #[test]
    fn reconstructs_post_file() {
        let pre = "a\nb\nc\nd\ne\n";
        let post = "a\nB\nc\nd\ne\nf\n";
        let text = "--- a/f\n+++ b/f\n@@ -1,3 +1,3 @@\n a\n-b\n+B\n c\n@@ -5 +5,2 @@\n e\n+f\n";
        let files = parse_unified_diff(text).unwrap();
        let rebuilt = apply_hunks(pre, &files[0].hunks).unwrap();
        assert_eq!(rebuilt, post.lines().collect::<Vec<_>>());
    }

    #[test]
    fn render_then_parse_is_identity() {
        let files = parse_unified_diff(FIG_DIFF).unwrap();
        let again = parse_unified_diff(&render_unified_diff(&files)).unwrap();
        assert_eq!(files[0].hunks, again[0].hunks);
    }
}
