//! Seeded synthetic datasets for demos, smoke tests and the bundled sample.
//!
//! Labels follow a latent vulnerability type with a little noise, so the
//! classical models have something to learn. Product names rotate by year,
//! which gives later years terms the earlier ones never saw.

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{
    cvss_tasks, CommitRecord, Dataset, FileChange, FunctionRecord, Hunk, HunkLine, Labels, PostLabel, QaPost, Site,
    SvReport, CVSS_TASKS,
};
use crate::sampling::{gaussian, seeded, SeededRng};

pub const BUNDLED_REPORTS: &str = include_str!("../data/synthetic_reports.jsonl");
pub const BUNDLED_SEED: u64 = 42;
pub const BUNDLED_SIZE: usize = 200;

/// Class sets of the seven CVSS tasks, in task order.
pub const CLASSES: [[&str; 3]; 7] = [
    ["None", "Partial", "Complete"],
    ["None", "Partial", "Complete"],
    ["None", "Partial", "Complete"],
    ["Local", "Adjacent", "Network"],
    ["Low", "Medium", "High"],
    ["None", "Single", "Multiple"],
    ["Low", "Medium", "High"],
];

struct Kind {
    phrase: &'static [&'static str],
    actor: &'static str,
    impact: &'static [&'static str],
    vector: &'static [&'static str],
    /// Class index per task.
    labels: [usize; 7],
    code: &'static str,
}

const KINDS: [Kind; 8] = [
    Kind {
        phrase: &["SQL injection vulnerability", "SQL injection flaw"],
        actor: "remote attackers",
        impact: &["execute arbitrary SQL commands", "read database records"],
        vector: &["the id parameter", "a crafted query string", "the search field"],
        labels: [1, 1, 1, 2, 0, 0, 2],
        code: "stmt.executeQuery(\"SELECT * FROM t WHERE id=\" + value);",
    },
    Kind {
        phrase: &["Cross-site scripting (XSS) vulnerability", "Reflected XSS issue"],
        actor: "remote attackers",
        impact: &["inject arbitrary web script or HTML"],
        vector: &["the name parameter", "a crafted URL", "the comment form"],
        labels: [0, 1, 0, 2, 1, 0, 1],
        code: "response.getWriter().print(\"<p>\" + value + \"</p>\");",
    },
    Kind {
        phrase: &["Buffer overflow", "Heap-based buffer overflow", "Stack-based buffer overflow"],
        actor: "remote attackers",
        impact: &["execute arbitrary code", "cause a denial of service or execute arbitrary code"],
        vector: &["a crafted image file", "a long header", "a malformed packet"],
        labels: [2, 2, 2, 2, 1, 0, 2],
        code: "System.arraycopy(data, 0, buf, 0, value.length());",
    },
    Kind {
        phrase: &["NULL pointer dereference", "Infinite loop", "Resource exhaustion issue"],
        actor: "remote attackers",
        impact: &["cause a denial of service (crash)", "cause a denial of service (CPU consumption)"],
        vector: &["a malformed request", "crafted input", "a truncated message"],
        labels: [0, 0, 1, 2, 0, 0, 1],
        code: "while (reader.ready()) { count++; }",
    },
    Kind {
        phrase: &["Information disclosure vulnerability", "Directory traversal vulnerability"],
        actor: "remote attackers",
        impact: &["obtain sensitive information", "read arbitrary files"],
        vector: &["a .. (dot dot) in the path", "an error message", "a crafted filename"],
        labels: [1, 0, 0, 2, 0, 0, 1],
        code: "File f = new File(baseDir + value);",
    },
    Kind {
        phrase: &["Race condition", "Untrusted search path vulnerability"],
        actor: "local users",
        impact: &["gain privileges", "overwrite arbitrary files"],
        vector: &["a symlink attack on a temporary file", "a Trojan horse library"],
        labels: [2, 2, 2, 0, 1, 0, 1],
        code: "File tmp = new File(\"/tmp/\" + value);",
    },
    Kind {
        phrase: &["Cross-site request forgery (CSRF) vulnerability", "Improper access control"],
        actor: "remote authenticated users",
        impact: &["hijack the authentication of administrators", "modify settings"],
        vector: &["a crafted form submission", "the admin panel"],
        labels: [0, 1, 0, 2, 1, 1, 1],
        code: "settings.update(request.getParameter(value));",
    },
    Kind {
        phrase: &["Weak permissions issue", "Improper input validation"],
        actor: "local users",
        impact: &["cause a denial of service", "bypass intended restrictions"],
        vector: &["a crafted configuration file", "unspecified vectors"],
        labels: [0, 0, 1, 0, 0, 0, 0],
        code: "config.load(value);",
    },
];

const COMPONENTS: [&str; 8] = [
    "the login module",
    "the image parser",
    "the web interface",
    "the XML handler",
    "the session manager",
    "the plugin loader",
    "the REST API",
    "the file upload feature",
];

/// Product names by era; later eras introduce unseen terms.
const PRODUCTS: [&[&str]; 4] = [
    &["phpBB", "Joomla", "Mambo", "OpenSSL", "Firefox"],
    &["WordPress", "Drupal", "Chrome", "Tomcat", "Struts"],
    &["Jenkins", "Android", "Docker", "Elasticsearch", "Magento"],
    &["Kubernetes", "Grafana", "GitLab", "Nextcloud", "Confluence"],
];

fn labels_for(kind: &Kind, rng: &mut SeededRng) -> Labels {
    let mut idx = kind.labels;
    if rng.gen::<f64>() < 0.12 {
        let t = rng.gen_range(0..7);
        idx[t] = rng.gen_range(0..3);
    }
    CVSS_TASKS
        .iter()
        .enumerate()
        .map(|(t, name)| (name.to_string(), CLASSES[t][idx[t]].to_string()))
        .collect()
}

fn pick<'a>(items: &[&'a str], rng: &mut SeededRng) -> &'a str {
    items.choose(rng).copied().expect("non-empty choices")
}

/// Days spread evenly over 2008..2020 with jitter, non-decreasing.
fn dates(n: usize, rng: &mut SeededRng) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2008, 1, 1).expect("valid date");
    let span = 12 * 365;
    let mut out: Vec<NaiveDate> = (0..n)
        .map(|i| {
            let base = (i * span / n.max(1)) as i64;
            start + Duration::days(base + rng.gen_range(0..5))
        })
        .collect();
    out.sort();
    out
}

fn era(date: NaiveDate) -> usize {
    use chrono::Datelike;
    ((date.year() - 2008) / 3).clamp(0, 3) as usize
}

/// Vulnerability descriptions with CVSS labels.
pub fn synthetic_reports(n: usize, seed: u64) -> Dataset<SvReport> {
    let mut rng = seeded(seed);
    let days = dates(n, &mut rng);
    let records = days
        .into_iter()
        .enumerate()
        .map(|(i, date)| {
            let kind = &KINDS[rng.gen_range(0..KINDS.len())];
            let product = pick(PRODUCTS[era(date)], &mut rng);
            let description = format!(
                "{} in {} in {} {}.{}.{} allows {} to {} via {}.",
                pick(kind.phrase, &mut rng),
                pick(&COMPONENTS, &mut rng),
                product,
                rng.gen_range(1..10),
                rng.gen_range(0..20),
                rng.gen_range(0..10),
                kind.actor,
                pick(kind.impact, &mut rng),
                pick(kind.vector, &mut rng),
            );
            SvReport {
                id: format!("SYN-{:04}", i + 1),
                description,
                published_date: date,
                labels: labels_for(kind, &mut rng),
            }
        })
        .collect();
    Dataset::new(cvss_tasks(), records)
}

/// The 200-record report sample shipped with the crate.
pub fn bundled_reports() -> Dataset<SvReport> {
    Dataset::parse_jsonl(BUNDLED_REPORTS, cvss_tasks()).expect("bundled sample is valid")
}

const NAMES: [&str; 6] = ["value", "input", "name", "path", "token", "query"];

fn function_lines(kind: &Kind, var: &str, rng: &mut SeededRng) -> (Vec<String>, usize) {
    let method = pick(&["handle", "process", "render", "load", "update"], rng);
    let body = kind.code.replace("value", var);
    let lines = vec![
        format!("public String {method}(String raw) {{"),
        "    // normalise the request value".to_string(),
        format!("    String {var} = raw.trim();"),
        "    StringBuilder sb = new StringBuilder();".to_string(),
        format!("    if ({var}.length() > 0) {{"),
        format!("        {body}"),
        "    }".to_string(),
        String::new(),
        format!("    sb.append({var});"),
        "    return sb.toString();".to_string(),
        "}".to_string(),
    ];
    (lines, 5)
}

/// Java-like functions with one vulnerable statement each.
pub fn synthetic_functions(n: usize, seed: u64) -> Dataset<FunctionRecord> {
    let mut rng = seeded(seed);
    let days = dates(n, &mut rng);
    let records = days
        .into_iter()
        .enumerate()
        .map(|(i, date)| {
            let kind = &KINDS[rng.gen_range(0..KINDS.len())];
            let var = pick(&NAMES, &mut rng);
            let (lines, vuln) = function_lines(kind, var, &mut rng);
            FunctionRecord {
                id: format!("FN-{:04}", i + 1),
                lines,
                vulnerable_line_indices: BTreeSet::from([vuln]),
                labels: labels_for(kind, &mut rng),
                date,
            }
        })
        .collect();
    Dataset::new(cvss_tasks(), records)
}

/// Commits that introduce a vulnerable statement into a small class.
pub fn synthetic_commits(n: usize, seed: u64) -> Dataset<CommitRecord> {
    let mut rng = seeded(seed);
    let days = dates(n, &mut rng);
    let records = days
        .into_iter()
        .enumerate()
        .map(|(i, date)| {
            let kind = &KINDS[rng.gen_range(0..KINDS.len())];
            let var = pick(&NAMES, &mut rng);
            let (method, vuln) = function_lines(kind, var, &mut rng);
            let class = pick(&["Handler", "Service", "Controller", "Util"], &mut rng);
            let mut post: Vec<String> = vec![
                "package app;".into(),
                String::new(),
                format!("public class {class} {{"),
                "    private int count = 0;".into(),
                String::new(),
            ];
            let offset = post.len();
            post.extend(method.iter().map(|l| format!("    {l}")));
            post.push("}".into());
            let mut pre = post.clone();
            let safe = format!("            log.debug({var});");
            pre[offset + vuln] = safe.clone();
            // one-line replacement with up to three context lines each side
            let at = offset + vuln;
            let lo = at.saturating_sub(3);
            let hi = (at + 3).min(post.len() - 1);
            let mut body = Vec::new();
            for (j, line) in post.iter().enumerate().take(hi + 1).skip(lo) {
                if j == at {
                    body.push(HunkLine::Deleted(safe.clone()));
                    body.push(HunkLine::Added(line.clone()));
                } else {
                    body.push(HunkLine::Context(line.clone()));
                }
            }
            let mut file = FileChange::new(format!("src/app/{class}.java"));
            file.hunks.push(Hunk::from_body(lo + 1, lo + 1, body));
            file.pre_source = Some(pre.join("\n") + "\n");
            file.post_source = Some(post.join("\n") + "\n");
            CommitRecord {
                id: format!("{:040x}", (seed as u128) << 64 | i as u128),
                project: format!("project-{}", i % 5),
                date,
                files: vec![file],
                labels: labels_for(kind, &mut rng),
            }
        })
        .collect();
    Dataset::new(cvss_tasks(), records)
}

const SECURITY_WORDS: [&str; 10] = [
    "exploit", "vulnerability", "injection", "xss", "password", "attack", "malicious", "csrf", "overflow",
    "encryption",
];
const GENERAL_WORDS: [&str; 16] = [
    "list", "button", "layout", "compile", "array", "function", "loop", "string", "date", "format", "install",
    "version", "python", "java", "table", "query",
];

/// Q&A posts: security discussions labelled positive, and an unlabeled
/// pool in which `contamination` of the posts are security ones too.
pub fn synthetic_posts(positives: usize, unlabeled: usize, contamination: f64, seed: u64) -> Vec<QaPost> {
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(positives + unlabeled);
    for i in 0..positives + unlabeled {
        let is_pos = i < positives;
        let security = is_pos || rng.gen::<f64>() < contamination;
        let words: Vec<&str> = (0..rng.gen_range(40..80))
            .map(|_| {
                if security && rng.gen::<f64>() < 0.25 {
                    pick(&SECURITY_WORDS, &mut rng)
                } else {
                    pick(&GENERAL_WORDS, &mut rng)
                }
            })
            .collect();
        let (title, rest) = words.split_at(6);
        let (body, answers) = rest.split_at(rest.len() / 2);
        let (title, body, answers) = (title.join(" "), body.join(" "), answers.join(" "));
        out.push(QaPost {
            id: format!("post-{i}"),
            site: if i % 3 == 0 {
                Site::SecurityStackExchange
            } else {
                Site::StackOverflow
            },
            word_count: crate::corpus::post_word_count(&title, &body, &answers),
            title,
            body,
            answers,
            tags: BTreeSet::from([if security { "security" } else { "general" }.to_string()]),
            label: if is_pos {
                PostLabel::Positive
            } else {
                PostLabel::Unlabeled
            },
        });
    }
    out
}

/// Two Gaussian clouds centred at `+mu` and `−mu` along every axis.
/// Returns (positives, unlabeled, unlabeled-is-positive flags).
pub fn mirrored_gaussians(
    dim: usize,
    positives: usize,
    unlabeled: usize,
    contamination: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = seeded(seed);
    let point = |sign: f64, rng: &mut SeededRng| -> Vec<f64> { (0..dim).map(|_| sign + 0.5 * gaussian(rng)).collect() };
    let p = (0..positives).map(|_| point(1.0, &mut rng)).collect();
    let mut u = Vec::with_capacity(unlabeled);
    let mut flags = Vec::with_capacity(unlabeled);
    for _ in 0..unlabeled {
        let pos = rng.gen::<f64>() < contamination;
        u.push(point(if pos { 1.0 } else { -1.0 }, &mut rng));
        flags.push(pos);
    }
    (p, u, flags)
}

/// English-like documents: pseudo-words built from a fixed syllable set.
pub fn english_like_docs(n: usize, words_per_doc: usize, seed: u64) -> Vec<Vec<String>> {
    const SYLLABLES: [&str; 24] = [
        "ar", "be", "con", "de", "el", "fo", "ga", "in", "ter", "ly", "ment", "na", "or", "pre", "qu", "re", "st",
        "tion", "un", "ve", "wa", "ex", "ing", "ous",
    ];
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            (0..words_per_doc)
                .map(|_| {
                    let k = rng.gen_range(1..4);
                    (0..k).map(|_| pick(&SYLLABLES, &mut rng)).collect::<String>()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sample_matches_generator() {
        let generated = synthetic_reports(BUNDLED_SIZE, BUNDLED_SEED);
        assert_eq!(generated.to_jsonl(), BUNDLED_REPORTS);
        assert_eq!(bundled_reports().records.len(), 200);
    }

    #[test]
    fn deterministic_and_valid() {
        assert_eq!(synthetic_reports(30, 1), synthetic_reports(30, 1));
        assert!(synthetic_reports(50, 3).validate().is_empty());
        assert!(synthetic_functions(20, 3).validate().is_empty());
        let commits = synthetic_commits(10, 3);
        assert!(commits.validate().is_empty());
        let text = commits.to_jsonl();
        assert_eq!(Dataset::<CommitRecord>::parse_jsonl(&text, cvss_tasks()).unwrap().records, commits.records);
    }

    #[test]
    fn later_years_bring_new_products() {
        let d = synthetic_reports(200, 5);
        let last = &d.records[199].description;
        assert!(PRODUCTS[3].iter().any(|p| last.contains(p)));
    }

    #[test]
    fn gaussian_contamination() {
        let (p, u, flags) = mirrored_gaussians(3, 10, 1000, 0.5, 2);
        assert_eq!((p.len(), u.len()), (10, 1000));
        let share = flags.iter().filter(|f| **f).count() as f64 / 1000.0;
        assert!((share - 0.5).abs() < 0.06);
    }
}
