//! Dataset schemas for the three assessment granularities and Q&A posts.
//!
//! Every dataset is JSONL, one record per line. Field names on disk are
//! fixed (see [`Record`] implementations); dates are ISO-8601 calendar
//! dates and any time-of-day suffix is ignored.

mod diff;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub use diff::{
    apply_hunks, parse_unified_diff, render_unified_diff, FileChange, Hunk, HunkLine,
};

use crate::error::{Error, Result};

/// The seven CVSS v2 base characteristics used as prediction targets.
pub const CVSS_TASKS: [&str; 7] = [
    "confidentiality",
    "integrity",
    "availability",
    "access_vector",
    "access_complexity",
    "authentication",
    "severity",
];

pub fn cvss_tasks() -> Vec<String> {
    CVSS_TASKS.iter().map(|t| t.to_string()).collect()
}

/// Task name to class label.
pub type Labels = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvReport {
    pub id: String,
    pub description: String,
    pub published_date: NaiveDate,
    pub labels: Labels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub id: String,
    pub lines: Vec<String>,
    /// 0-based indices into `lines`.
    pub vulnerable_line_indices: BTreeSet<usize>,
    pub labels: Labels,
    pub date: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    pub project: String,
    pub date: NaiveDate,
    pub files: Vec<FileChange>,
    pub labels: Labels,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Site {
    #[serde(rename = "SO")]
    StackOverflow,
    #[serde(rename = "SSE")]
    SecurityStackExchange,
}

impl Site {
    pub fn code(self) -> &'static str {
        match self {
            Site::StackOverflow => "SO",
            Site::SecurityStackExchange => "SSE",
        }
    }

    pub fn parse(code: &str) -> Option<Site> {
        match code {
            "SO" => Some(Site::StackOverflow),
            "SSE" => Some(Site::SecurityStackExchange),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostLabel {
    Positive,
    Unlabeled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaPost {
    pub id: String,
    pub site: Site,
    pub title: String,
    pub body: String,
    pub answers: String,
    pub tags: BTreeSet<String>,
    pub word_count: usize,
    pub label: PostLabel,
}

impl QaPost {
    /// Title, body and answers joined by single spaces.
    pub fn full_text(&self) -> String {
        [self.title.as_str(), self.body.as_str(), self.answers.as_str()]
            .iter()
            .filter(|s| !s.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Records carrying an id and a calendar date, as needed by the split protocols.
pub trait Dated {
    fn record_id(&self) -> &str;
    fn record_date(&self) -> NaiveDate;
}

impl Dated for SvReport {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn record_date(&self) -> NaiveDate {
        self.published_date
    }
}

impl Dated for FunctionRecord {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn record_date(&self) -> NaiveDate {
        self.date
    }
}

impl Dated for CommitRecord {
    fn record_id(&self) -> &str {
        &self.id
    }
    fn record_date(&self) -> NaiveDate {
        self.date
    }
}

impl Dated for (String, NaiveDate) {
    fn record_id(&self) -> &str {
        &self.0
    }
    fn record_date(&self) -> NaiveDate {
        self.1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Report,
    Function,
    Commit,
    Post,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "report" => Ok(DatasetKind::Report),
            "function" => Ok(DatasetKind::Function),
            "commit" => Ok(DatasetKind::Commit),
            "post" => Ok(DatasetKind::Post),
            other => Err(Error::Config(format!("unknown dataset kind `{other}`"))),
        }
    }
}

/// A JSONL-serializable record of one of the four dataset kinds.
pub trait Record: Sized {
    const KIND: DatasetKind;
    fn id(&self) -> &str;
    fn from_json(value: &Value, index: usize) -> Result<Self>;
    fn to_json(&self) -> Value;
    /// Invariants of this record alone, given the dataset's task list.
    fn violations(&self, tasks: &[String]) -> Vec<String>;
}

/// A single (record id, violated invariant) finding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub invariant: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<R> {
    pub tasks: Vec<String>,
    pub records: Vec<R>,
}

impl<R: Record> Dataset<R> {
    pub fn new(tasks: Vec<String>, records: Vec<R>) -> Self {
        Dataset { tasks, records }
    }

    /// Reads a JSONL dataset labelled with the seven CVSS tasks.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_tasks(path, cvss_tasks())
    }

    pub fn load_with_tasks(path: impl AsRef<Path>, tasks: Vec<String>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text, tasks)
    }

    /// Parses JSONL text and validates every record. Blank lines are skipped.
    pub fn parse_jsonl(text: &str, tasks: Vec<String>) -> Result<Self> {
        let mut records = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let index = records.len();
            let value: Value = serde_json::from_str(line).map_err(|e| Error::Schema {
                index,
                field: "<record>".into(),
                message: e.to_string(),
            })?;
            records.push(R::from_json(&value, index)?);
        }
        let dataset = Dataset { tasks, records };
        let mut seen = HashSet::new();
        for (index, record) in dataset.records.iter().enumerate() {
            if !seen.insert(record.id()) {
                return Err(Error::DuplicateId(record.id().to_string()));
            }
            if let Some(first) = record.violations(&dataset.tasks).into_iter().next() {
                return Err(Error::Schema {
                    index,
                    field: "<invariant>".into(),
                    message: first,
                });
            }
        }
        Ok(dataset)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&record.to_json().to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Lists every invariant violation; empty iff the dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for record in &self.records {
            if !seen.insert(record.id()) {
                out.push(Violation {
                    record_id: record.id().to_string(),
                    invariant: "id unique within dataset".into(),
                });
            }
            for invariant in record.violations(&self.tasks) {
                out.push(Violation {
                    record_id: record.id().to_string(),
                    invariant,
                });
            }
        }
        out
    }
}

/// A dataset of any kind, as returned by [`load_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub enum AnyDataset {
    Reports(Dataset<SvReport>),
    Functions(Dataset<FunctionRecord>),
    Commits(Dataset<CommitRecord>),
    Posts(Dataset<QaPost>),
}

impl AnyDataset {
    pub fn len(&self) -> usize {
        match self {
            AnyDataset::Reports(d) => d.records.len(),
            AnyDataset::Functions(d) => d.records.len(),
            AnyDataset::Commits(d) => d.records.len(),
            AnyDataset::Posts(d) => d.records.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            AnyDataset::Reports(_) => DatasetKind::Report,
            AnyDataset::Functions(_) => DatasetKind::Function,
            AnyDataset::Commits(_) => DatasetKind::Commit,
            AnyDataset::Posts(_) => DatasetKind::Post,
        }
    }

    pub fn to_jsonl(&self) -> String {
        match self {
            AnyDataset::Reports(d) => d.to_jsonl(),
            AnyDataset::Functions(d) => d.to_jsonl(),
            AnyDataset::Commits(d) => d.to_jsonl(),
            AnyDataset::Posts(d) => d.to_jsonl(),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, kind: DatasetKind) -> Result<AnyDataset> {
    Ok(match kind {
        DatasetKind::Report => AnyDataset::Reports(Dataset::load(path)?),
        DatasetKind::Function => AnyDataset::Functions(Dataset::load(path)?),
        DatasetKind::Commit => AnyDataset::Commits(Dataset::load(path)?),
        DatasetKind::Post => AnyDataset::Posts(Dataset::load(path)?),
    })
}

pub fn validate_dataset(dataset: &AnyDataset) -> Vec<Violation> {
    match dataset {
        AnyDataset::Reports(d) => d.validate(),
        AnyDataset::Functions(d) => d.validate(),
        AnyDataset::Commits(d) => d.validate(),
        AnyDataset::Posts(d) => d.validate(),
    }
}

/// Parses an ISO-8601 date, ignoring anything after the calendar part.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let head = text.get(..10).unwrap_or(text);
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
    index: usize,
}

impl<'a> Fields<'a> {
    fn of(value: &'a Value, index: usize) -> Result<Self> {
        let map = value.as_object().ok_or_else(|| Error::Schema {
            index,
            field: "<record>".into(),
            message: "record is not a JSON object".into(),
        })?;
        Ok(Fields { map, index })
    }

    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Schema {
            index: self.index,
            field: field.into(),
            message: message.into(),
        }
    }

    fn get(&self, field: &str) -> Result<&'a Value> {
        self.map
            .get(field)
            .ok_or_else(|| self.err(field, "missing field"))
    }

    fn string(&self, field: &str) -> Result<String> {
        self.get(field)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| self.err(field, "expected a string"))
    }

    fn date(&self, field: &str) -> Result<NaiveDate> {
        let raw = self.string(field)?;
        parse_date(&raw).ok_or_else(|| self.err(field, format!("unparseable date `{raw}`")))
    }

    fn strings(&self, field: &str) -> Result<Vec<String>> {
        let arr = self
            .get(field)?
            .as_array()
            .ok_or_else(|| self.err(field, "expected an array"))?;
        arr.iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| self.err(field, "expected an array of strings"))
            })
            .collect()
    }

    fn labels(&self) -> Result<Labels> {
        let map = self
            .get("labels")?
            .as_object()
            .ok_or_else(|| self.err("labels", "expected an object"))?;
        map.iter()
            .map(|(task, class)| {
                class
                    .as_str()
                    .map(|c| (task.clone(), c.to_string()))
                    .ok_or_else(|| self.err("labels", format!("label of `{task}` is not a string")))
            })
            .collect()
    }
}

fn label_violations(labels: &Labels, tasks: &[String]) -> Vec<String> {
    labels
        .keys()
        .filter(|task| !tasks.contains(task))
        .map(|task| format!("label task `{task}` not in the declared task list"))
        .collect()
}

impl Record for SvReport {
    const KIND: DatasetKind = DatasetKind::Report;

    fn id(&self) -> &str {
        &self.id
    }

    fn from_json(value: &Value, index: usize) -> Result<Self> {
        let f = Fields::of(value, index)?;
        Ok(SvReport {
            id: f.string("id")?,
            description: f.string("description")?,
            published_date: f.date("date")?,
            labels: f.labels()?,
        })
    }

    fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "description": self.description,
            "date": self.published_date.to_string(),
            "labels": self.labels,
        })
    }

    fn violations(&self, tasks: &[String]) -> Vec<String> {
        let mut out = label_violations(&self.labels, tasks);
        if self.description.trim().is_empty() {
            out.push("description non-empty".into());
        }
        out
    }
}

impl Record for FunctionRecord {
    const KIND: DatasetKind = DatasetKind::Function;

    fn id(&self) -> &str {
        &self.id
    }

    fn from_json(value: &Value, index: usize) -> Result<Self> {
        let f = Fields::of(value, index)?;
        let vuln = f
            .get("vuln_idx")?
            .as_array()
            .ok_or_else(|| f.err("vuln_idx", "expected an array"))?
            .iter()
            .map(|v| {
                v.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| f.err("vuln_idx", "expected non-negative integers"))
            })
            .collect::<Result<BTreeSet<_>>>()?;
        Ok(FunctionRecord {
            id: f.string("id")?,
            lines: f.strings("lines")?,
            vulnerable_line_indices: vuln,
            labels: f.labels()?,
            date: f.date("date")?,
        })
    }

    fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "lines": self.lines,
            "vuln_idx": self.vulnerable_line_indices,
            "date": self.date.to_string(),
            "labels": self.labels,
        })
    }

    fn violations(&self, tasks: &[String]) -> Vec<String> {
        let mut out = label_violations(&self.labels, tasks);
        if self.vulnerable_line_indices.is_empty() {
            out.push("vulnerable line indices non-empty".into());
        }
        if let Some(&bad) = self
            .vulnerable_line_indices
            .iter()
            .find(|&&i| i >= self.lines.len())
        {
            out.push(format!(
                "vulnerable line index {bad} out of bounds ({} lines)",
                self.lines.len()
            ));
        }
        if self.vulnerable_line_indices.len() >= self.lines.len() {
            out.push("at least one non-vulnerable line".into());
        }
        out
    }
}

impl Record for CommitRecord {
    const KIND: DatasetKind = DatasetKind::Commit;

    fn id(&self) -> &str {
        &self.id
    }

    /// The diff is embedded as a string under `diff`. An optional `sources`
    /// object maps a file path to `{"pre": text, "post": text}` full sources,
    /// which closest-enclosing-scope extraction needs.
    fn from_json(value: &Value, index: usize) -> Result<Self> {
        let f = Fields::of(value, index)?;
        let diff_text = f.string("diff")?;
        let mut files = parse_unified_diff(&diff_text).map_err(|e| f.err("diff", e.to_string()))?;
        if let Some(sources) = f.map.get("sources") {
            let sources = sources
                .as_object()
                .ok_or_else(|| f.err("sources", "expected an object"))?;
            for file in &mut files {
                if let Some(entry) = sources.get(&file.path) {
                    file.pre_source = entry.get("pre").and_then(Value::as_str).map(str::to_string);
                    file.post_source =
                        entry.get("post").and_then(Value::as_str).map(str::to_string);
                }
            }
        }
        Ok(CommitRecord {
            id: f.string("id")?,
            project: f.string("project")?,
            date: f.date("date")?,
            files,
            labels: f.labels()?,
        })
    }

    fn to_json(&self) -> Value {
        let mut value = json!({
            "id": self.id,
            "project": self.project,
            "date": self.date.to_string(),
            "diff": render_unified_diff(&self.files),
            "labels": self.labels,
        });
        let sources: Map<String, Value> = self
            .files
            .iter()
            .filter(|f| f.pre_source.is_some() || f.post_source.is_some())
            .map(|f| {
                (
                    f.path.clone(),
                    json!({"pre": f.pre_source, "post": f.post_source}),
                )
            })
            .collect();
        if !sources.is_empty() {
            value["sources"] = Value::Object(sources);
        }
        value
    }

    fn violations(&self, tasks: &[String]) -> Vec<String> {
        let mut out = label_violations(&self.labels, tasks);
        if self.files.is_empty() {
            out.push("files non-empty".into());
        }
        for file in &self.files {
            out.extend(file.violations());
        }
        out
    }
}

/// Whitespace-separated token count of a post's title, body and answers.
pub fn post_word_count(title: &str, body: &str, answers: &str) -> usize {
    [title, body, answers]
        .iter()
        .map(|s| s.split_whitespace().count())
        .sum()
}

impl Record for QaPost {
    const KIND: DatasetKind = DatasetKind::Post;

    fn id(&self) -> &str {
        &self.id
    }

    fn from_json(value: &Value, index: usize) -> Result<Self> {
        let f = Fields::of(value, index)?;
        let site_code = f.string("site")?;
        let site = Site::parse(&site_code)
            .ok_or_else(|| f.err("site", format!("unknown site `{site_code}`")))?;
        let label = match f.string("label")?.as_str() {
            "positive" => PostLabel::Positive,
            "unlabeled" => PostLabel::Unlabeled,
            other => return Err(f.err("label", format!("unknown label `{other}`"))),
        };
        let title = f.string("title")?;
        let body = f.string("body")?;
        let answers = f.string("answers")?;
        Ok(QaPost {
            id: f.string("id")?,
            site,
            word_count: post_word_count(&title, &body, &answers),
            title,
            body,
            answers,
            tags: f.strings("tags")?.into_iter().collect(),
            label,
        })
    }

    fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "site": self.site.code(),
            "title": self.title,
            "body": self.body,
            "answers": self.answers,
            "tags": self.tags,
            "label": self.label,
        })
    }

    fn violations(&self, _tasks: &[String]) -> Vec<String> {
        if self.word_count == 0 {
            vec!["word_count > 0".into()]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","description":"Buffer overflow in input.c","date":"2015-03-01","labels":{{"severity":"HIGH"}}}}"#
        )
    }

    #[test]
    fn one_valid_report() {
        let ds = Dataset::<SvReport>::parse_jsonl(&report_line("CVE-1"), cvss_tasks()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].published_date.to_string(), "2015-03-01");
    }

    #[test]
    fn missing_description_is_schema_error_at_zero() {
        let line = r#"{"id":"a","date":"2015-01-01","labels":{}}"#;
        let err = Dataset::<SvReport>::parse_jsonl(line, cvss_tasks()).unwrap_err();
        match err {
            Error::Schema { index, field, .. } => {
                assert_eq!(index, 0);
                assert_eq!(field, "description");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = format!("{}\n{}\n", report_line("x"), report_line("x"));
        let err = Dataset::<SvReport>::parse_jsonl(&text, cvss_tasks()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(ref id) if id == "x"));
    }

    #[test]
    fn datetime_suffix_ignored() {
        assert_eq!(
            parse_date("2019-07-04T10:11:12Z"),
            NaiveDate::from_ymd_opt(2019, 7, 4)
        );
    }

    #[test]
    fn commit_embeds_diff() {
        let line = r#"{"id":"c1","project":"p","date":"2020-02-02","diff":"--- a/A.java\n+++ b/A.java\n@@ -1 +1 @@\n-int a=1;\n+int a=2;\n","labels":{"severity":"LOW"}}"#;
        let ds = Dataset::<CommitRecord>::parse_jsonl(line, cvss_tasks()).unwrap();
        let commit = &ds.records[0];
        assert_eq!(commit.files[0].hunks[0].deleted, vec!["int a=1;"]);
        let again = Dataset::<CommitRecord>::parse_jsonl(&ds.to_jsonl(), cvss_tasks()).unwrap();
        assert_eq!(ds, again);
    }

    fn function(id: &str, vuln: &[usize]) -> FunctionRecord {
        FunctionRecord {
            id: id.into(),
            lines: vec!["void f() {".into(), "x = 1;".into(), "}".into()],
            vulnerable_line_indices: vuln.iter().copied().collect(),
            labels: Labels::new(),
            date: NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(),
        }
    }

    #[test]
    fn validate_reports() {
        let ok = Dataset::new(cvss_tasks(), vec![function("a", &[1]), function("b", &[1])]);
        assert!(ok.validate().is_empty());

        let out_of_range = Dataset::new(cvss_tasks(), vec![function("a", &[7])]);
        assert_eq!(out_of_range.validate().len(), 1);

        let dup = Dataset::new(cvss_tasks(), vec![function("a", &[1]), function("a", &[1])]);
        let v = dup.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].record_id, "a");
    }

    #[test]
    fn all_vulnerable_function_invalid() {
        let ds = Dataset::new(cvss_tasks(), vec![function("a", &[0, 1, 2])]);
        assert!(ds
            .validate()
            .iter()
            .any(|v| v.invariant.contains("non-vulnerable")));
    }

    #[test]
    fn unknown_task_flagged() {
        let mut r = function("a", &[1]);
        r.labels.insert("colour".into(), "red".into());
        let ds = Dataset::new(cvss_tasks(), vec![r]);
        assert_eq!(ds.validate().len(), 1);
    }

    #[test]
    fn post_word_count_and_roundtrip() {
        let line = r#"{"id":"p1","site":"SSE","title":"sql injection","body":"how to escape input","answers":"use prepared statements","tags":["sql","security"],"label":"positive"}"#;
        let ds = Dataset::<QaPost>::parse_jsonl(line, vec![]).unwrap();
        assert_eq!(ds.records[0].word_count, 9);
        assert_eq!(ds.records[0].site, Site::SecurityStackExchange);
        let again = Dataset::<QaPost>::parse_jsonl(&ds.to_jsonl(), vec![]).unwrap();
        assert_eq!(ds, again);
    }
}
