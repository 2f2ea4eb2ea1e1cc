use std::collections::BTreeSet;

use chrono::NaiveDate;
use proptest::prelude::*;

use svassess::corpus::{apply_hunks, parse_unified_diff, render_unified_diff, Dated, FileChange, Hunk, HunkLine};
use svassess::eval::{compute_metrics, time_kfold_splits};
use svassess::features::{char_ngrams, SparseVector};
use svassess::pumine::{keyword_metrics, KeywordSet};
use svassess::textprep::{preprocess_text, PrepConfig};

#[derive(Clone, Debug)]
enum Edit {
    Keep,
    Delete,
    Replace(String),
    InsertBefore(String),
}

fn edit() -> impl Strategy<Value = Edit> {
    prop_oneof![
        3 => Just(Edit::Keep),
        1 => Just(Edit::Delete),
        1 => "[a-z ]{0,8}".prop_map(Edit::Replace),
        1 => "[a-z ]{0,8}".prop_map(Edit::InsertBefore),
    ]
}

proptest! {
    #[test]
    fn diff_render_parse_apply(pre in prop::collection::vec("[a-z ]{0,8}", 1..20), edits in prop::collection::vec(edit(), 20)) {
        let mut body = Vec::new();
        let mut post = Vec::new();
        for (line, e) in pre.iter().zip(&edits) {
            match e {
                Edit::Keep => {
                    body.push(HunkLine::Context(line.clone()));
                    post.push(line.clone());
                }
                Edit::Delete => body.push(HunkLine::Deleted(line.clone())),
                Edit::Replace(new) => {
                    body.push(HunkLine::Deleted(line.clone()));
                    body.push(HunkLine::Added(new.clone()));
                    post.push(new.clone());
                }
                Edit::InsertBefore(new) => {
                    body.push(HunkLine::Added(new.clone()));
                    body.push(HunkLine::Context(line.clone()));
                    post.push(new.clone());
                    post.push(line.clone());
                }
            }
        }
        // a hunk must change something
        prop_assume!(body.iter().any(|l| !matches!(l, HunkLine::Context(_))));
        let post_start = usize::from(!post.is_empty());
        let mut file = FileChange::new("src/A.java");
        file.hunks.push(Hunk::from_body(1, post_start, body));
        let text = render_unified_diff(std::slice::from_ref(&file));
        let parsed = parse_unified_diff(&text).unwrap();
        prop_assert_eq!(&parsed, &vec![file.clone()]);
        let source = pre.join("\n") + "\n";
        prop_assert_eq!(apply_hunks(&source, &file.hunks).unwrap(), post);
    }

    #[test]
    fn preprocessing_without_stemming_is_idempotent(text in "[A-Za-z .,;:!?'-]{0,80}") {
        let config = PrepConfig { stem: false, ..PrepConfig::default() };
        let once = preprocess_text(&text, &config);
        let twice = preprocess_text(&once.join(" "), &config);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn sparse_dense_round_trip(values in prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], 0..30)) {
        let v = SparseVector::from_dense(&values);
        prop_assert_eq!(v.width(), values.len());
        prop_assert!(v.entries().windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(v.entries().iter().all(|(_, x)| *x != 0.0));
        prop_assert_eq!(v.to_dense(), values);
    }

    #[test]
    fn char_gram_count(text in "[a-z]{1,6}( [a-z]{1,6}){0,4}", min in 1usize..4, extra in 0usize..3) {
        let max = min + extra;
        let grams = char_ngrams(&text, min, max);
        let len = text.chars().count();
        let expected: usize = (min..=max).filter(|n| *n <= len).map(|n| len - n + 1).sum();
        // single spaces are the only all-whitespace windows
        let spaces = if min == 1 { text.matches(' ').count() } else { 0 };
        prop_assert_eq!(grams.len(), expected - spaces);
    }

    #[test]
    fn metric_ranges(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..100)) {
        let gold: Vec<String> = pairs.iter().map(|p| format!("c{}", p.0)).collect();
        let pred: Vec<String> = pairs.iter().map(|p| format!("c{}", p.1)).collect();
        let m = compute_metrics(&gold, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&m.accuracy));
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m.mcc));
        prop_assert!((0.0..=1.0).contains(&m.macro_f1) && (0.0..=1.0).contains(&m.weighted_f1));
        for (row, class) in m.confusion.iter().zip(&m.per_class) {
            prop_assert_eq!(row.iter().sum::<usize>(), class.support);
        }
    }

    #[test]
    fn keyword_ratio_bounds(words in prop::collection::vec(prop_oneof!["[a-z]{1,8}", Just("xss".to_string()), Just("overflow".to_string())], 1..60)) {
        let kw = KeywordSet::new(["xss", "overflow"]).unwrap();
        let (count, ratio) = keyword_metrics(&words.join(" "), &kw).unwrap();
        prop_assert!(count <= words.len());
        prop_assert_eq!(ratio, count as f64 / words.len() as f64);
    }

    #[test]
    fn kfold_ignores_input_order(days in prop::collection::vec(0i64..3000, 10..80), k in 1usize..4, seed in any::<u64>()) {
        #[derive(Clone)]
        struct R(String, NaiveDate);
        impl Dated for R {
            fn record_id(&self) -> &str { &self.0 }
            fn record_date(&self) -> NaiveDate { self.1 }
        }
        let base = NaiveDate::from_ymd_opt(2010, 1, 1).unwrap();
        let recs: Vec<R> = days.iter().enumerate().map(|(i, d)| R(format!("r{i:03}"), base + chrono::Duration::days(*d))).collect();
        let years: BTreeSet<i32> = recs.iter().map(|r| chrono::Datelike::year(&r.1)).collect();
        prop_assume!(years.len() > k);
        let mut shuffled = recs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut svassess::sampling::seeded(seed));
        let a = time_kfold_splits(&recs, k).unwrap();
        let b = time_kfold_splits(&shuffled, k).unwrap();
        prop_assert_eq!(a.ids(&recs), b.ids(&shuffled));
    }
}
