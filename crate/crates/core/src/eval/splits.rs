use std::collections::BTreeSet;

use chrono::Datelike;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Dated;
use crate::error::{Error, Result};
use crate::sampling::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "time_kfold")]
    TimeKfold,
    #[serde(rename = "rounds12")]
    Rounds12,
    #[serde(rename = "rounds10")]
    Rounds10Wrap,
}

impl Protocol {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "time_kfold" => Ok(Protocol::TimeKfold),
            "rounds12" => Ok(Protocol::Rounds12),
            "rounds10" | "rounds10_wrap" => Ok(Protocol::Rounds10Wrap),
            other => Err(Error::Config(format!("unknown split protocol `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::TimeKfold => "time_kfold",
            Protocol::Rounds12 => "rounds12",
            Protocol::Rounds10Wrap => "rounds10",
        }
    }

    /// Whether every tuple must keep training strictly before validation and test.
    pub fn is_time_ordered(self) -> bool {
        !matches!(self, Protocol::Rounds10Wrap)
    }
}

/// One (train, validation, test) tuple of indices into the record slice the
/// plan was built from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub splits: Vec<Split>,
}

impl SplitPlan {
    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    /// The same plan expressed with record ids.
    pub fn ids<R: Dated>(&self, records: &[R]) -> Vec<(Vec<String>, Vec<String>, Option<Vec<String>>)> {
        let ids = |v: &[usize]| v.iter().map(|&i| records[i].record_id().to_string()).collect::<Vec<_>>();
        self.splits
            .iter()
            .map(|s| (ids(&s.train), ids(&s.validation), s.test.as_deref().map(ids)))
            .collect()
    }

    /// Human-readable invariant violations: overlap between the sets of a
    /// tuple and, for time-ordered protocols, date leakage.
    pub fn violations<R: Dated>(&self, records: &[R]) -> Vec<String> {
        let mut out = Vec::new();
        for (n, s) in self.splits.iter().enumerate() {
            let train: BTreeSet<usize> = s.train.iter().copied().collect();
            let val: BTreeSet<usize> = s.validation.iter().copied().collect();
            let test: BTreeSet<usize> = s.test.iter().flatten().copied().collect();
            if !train.is_disjoint(&val) || !train.is_disjoint(&test) || !val.is_disjoint(&test) {
                out.push(format!("split {n}: sets overlap"));
            }
            if self.protocol.is_time_ordered() {
                let max_train = train.iter().map(|&i| records[i].record_date()).max();
                let min_val = val.iter().map(|&i| records[i].record_date()).min();
                let min_test = test.iter().map(|&i| records[i].record_date()).min();
                if let (Some(t), Some(v)) = (max_train, min_val) {
                    if t >= v {
                        out.push(format!("split {n}: train date {t} not before validation date {v}"));
                    }
                }
                if let (Some(t), Some(x)) = (max_train, min_test) {
                    if t >= x {
                        out.push(format!("split {n}: train date {t} not before test date {x}"));
                    }
                }
                if let (Some(v), Some(x)) = (min_val, min_test) {
                    if v > x {
                        out.push(format!("split {n}: validation starts after test"));
                    }
                }
            }
        }
        out
    }
}

/// Indices ordered by (date, id).
fn chronological<R: Dated>(records: &[R]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[a]
            .record_date()
            .cmp(&records[b].record_date())
            .then_with(|| records[a].record_id().cmp(records[b].record_id()))
    });
    order
}

/// Year-based folds: the last `k` years each serve once as validation and
/// every strictly earlier year is training.
pub fn time_kfold_splits<R: Dated>(records: &[R], k: usize) -> Result<SplitPlan> {
    if k == 0 {
        return Err(Error::Config("time-based k-fold needs k >= 1".into()));
    }
    let order = chronological(records);
    let years: Vec<i32> = order
        .iter()
        .map(|&i| records[i].record_date().year())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if years.len() < k + 1 {
        return Err(Error::invalid(format!(
            "time-based {k}-fold needs at least {} distinct years, found {}",
            k + 1,
            years.len()
        )));
    }
    let splits = years[years.len() - k..]
        .iter()
        .map(|&y| Split {
            train: order
                .iter()
                .copied()
                .filter(|&i| records[i].record_date().year() < y)
                .collect(),
            validation: order
                .iter()
                .copied()
                .filter(|&i| records[i].record_date().year() == y)
                .collect(),
            test: None,
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::TimeKfold,
        splits,
    })
}

/// Fold sizes for `n` items in `folds` near-equal parts; later folds absorb the remainder.
pub fn fold_sizes(n: usize, folds: usize) -> Vec<usize> {
    let base = n / folds;
    let rem = n % folds;
    (0..folds).map(|f| base + usize::from(f >= folds - rem)).collect()
}

/// Twelve date-ordered folds; round `i` (1..=10) trains on folds 1..=i,
/// validates on fold i+1 and tests on fold i+2.
///
/// Fold boundaries sit between distinct dates so that records sharing a
/// date never straddle two folds; each boundary is the date change closest
/// to the equal-size target.
pub fn rounds12_splits<R: Dated>(records: &[R]) -> Result<SplitPlan> {
    const FOLDS: usize = 12;
    let order = chronological(records);
    let dates: Vec<_> = order.iter().map(|&i| records[i].record_date()).collect();
    let changes: Vec<usize> = (1..dates.len()).filter(|&p| dates[p] != dates[p - 1]).collect();
    if changes.len() + 1 < FOLDS {
        return Err(Error::invalid(format!(
            "12-fold rounds need at least 12 distinct dates, found {}",
            if dates.is_empty() { 0 } else { changes.len() + 1 }
        )));
    }
    let mut targets = Vec::with_capacity(FOLDS - 1);
    let mut acc = 0;
    for size in &fold_sizes(order.len(), FOLDS)[..FOLDS - 1] {
        acc += size;
        targets.push(acc);
    }
    let mut bounds = Vec::with_capacity(FOLDS + 1);
    bounds.push(0);
    let mut next = 0;
    for (f, &t) in targets.iter().enumerate() {
        let remaining_after = FOLDS - 2 - f;
        let last_allowed = changes.len() - 1 - remaining_after;
        let pick = (next..=last_allowed)
            .min_by_key(|&c| (changes[c].abs_diff(t), c))
            .expect("enough date changes remain");
        bounds.push(changes[pick]);
        next = pick + 1;
    }
    bounds.push(order.len());
    let folds: Vec<&[usize]> = bounds.windows(2).map(|w| &order[w[0]..w[1]]).collect();
    let splits = (1..=10)
        .map(|i| Split {
            train: folds[..i].concat(),
            validation: folds[i].to_vec(),
            test: Some(folds[i + 1].to_vec()),
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::Rounds12,
        splits,
    })
}

/// Ten shuffled folds; round `i` validates on fold `i+1` and tests on fold
/// `i+2`, both wrapped modulo 10, and trains on the remaining eight.
pub fn rounds10_wrap_splits<R: Dated>(records: &[R], seed: u64) -> Result<SplitPlan> {
    const FOLDS: usize = 10;
    if records.len() < FOLDS {
        return Err(Error::invalid(format!(
            "10-fold rounds need at least 10 records, found {}",
            records.len()
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].record_id().cmp(records[b].record_id()));
    order.shuffle(&mut seeded(seed));
    let mut folds = Vec::with_capacity(FOLDS);
    let mut start = 0;
    for size in fold_sizes(order.len(), FOLDS) {
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    let splits = (1..=FOLDS)
        .map(|i| {
            let val = i % FOLDS; // fold i+1, 0-based
            let test = (i + 1) % FOLDS;
            Split {
                train: (0..FOLDS)
                    .filter(|&f| f != val && f != test)
                    .flat_map(|f| folds[f].iter().copied())
                    .collect(),
                validation: folds[val].clone(),
                test: Some(folds[test].clone()),
            }
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::Rounds10Wrap,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn recs(dates: &[(i32, u32, u32)]) -> Vec<(String, NaiveDate)> {
        dates
            .iter()
            .enumerate()
            .map(|(i, &(y, m, d))| (format!("r{i:03}"), NaiveDate::from_ymd_opt(y, m, d).unwrap()))
            .collect()
    }

    #[test]
    fn kfold_years() {
        let r = recs(&[(2010, 1, 1), (2011, 1, 1), (2012, 1, 1), (2013, 1, 1), (2014, 1, 1), (2015, 1, 1)]);
        let plan = time_kfold_splits(&r, 5).unwrap();
        assert_eq!(plan.len(), 5);
        assert_eq!(plan.splits[0].train, [0]);
        assert_eq!(plan.splits[0].validation, [1]);
        assert_eq!(plan.splits[4].train, [0, 1, 2, 3, 4]);
        assert_eq!(plan.splits[4].validation, [5]);
        let one = time_kfold_splits(&r, 1).unwrap();
        assert_eq!(one.splits[0].validation, [5]);
        assert!(time_kfold_splits(&r, 6).is_err());
    }

    #[test]
    fn kfold_order_independent() {
        let r = recs(&[(2012, 5, 1), (2010, 1, 1), (2011, 3, 3), (2012, 1, 1), (2010, 6, 6)]);
        let mut shuffled = r.clone();
        shuffled.reverse();
        let a = time_kfold_splits(&r, 2).unwrap().ids(&r);
        let b = time_kfold_splits(&shuffled, 2).unwrap().ids(&shuffled);
        assert_eq!(a, b);
    }

    #[test]
    fn rounds12_on_24() {
        let dates: Vec<_> = (0..24).map(|d| (2015, 1 + d / 28, 1 + d % 28)).collect();
        let r = recs(&dates);
        let plan = rounds12_splits(&r).unwrap();
        assert_eq!(plan.len(), 10);
        assert_eq!(plan.splits[0].train.len(), 2);
        assert_eq!(plan.splits[0].validation.len(), 2);
        assert_eq!(plan.splits[0].test.as_ref().unwrap().len(), 2);
        assert_eq!(plan.splits[9].train.len(), 20);
        assert!(plan.violations(&r).is_empty());
    }

    #[test]
    fn rounds12_remainder_to_latest() {
        let dates: Vec<_> = (0..26).map(|d| (2015, 1 + d / 28, 1 + d % 28)).collect();
        let plan = rounds12_splits(&recs(&dates)).unwrap();
        assert_eq!(plan.splits[9].validation.len(), 3);
        assert_eq!(plan.splits[9].test.as_ref().unwrap().len(), 3);
        assert_eq!(plan.splits[0].train.len(), 2);
    }

    #[test]
    fn rounds12_too_few_dates() {
        let r = recs(&[(2015, 1, 1); 30]);
        assert!(rounds12_splits(&r).is_err());
    }

    #[test]
    fn rounds12_tie_by_id() {
        // same date for r000 and r001 keeps them in one fold
        let mut dates = vec![(2015, 1, 1), (2015, 1, 1)];
        dates.extend((2..24).map(|d| (2015, 2, d as u32)));
        let r = recs(&dates);
        let plan = rounds12_splits(&r).unwrap();
        assert!(plan.violations(&r).is_empty());
        assert_eq!(plan.splits[0].train, [0, 1]);
    }

    #[test]
    fn wrap_rounds() {
        let r = recs(&[(2015, 1, 1); 23]);
        let plan = rounds10_wrap_splits(&r, 3).unwrap();
        assert_eq!(plan.len(), 10);
        // round 10: validation fold 1 (round 9's test), test fold 2 (round 1's validation)
        assert_eq!(Some(plan.splits[9].validation.clone()), plan.splits[8].test);
        assert_eq!(plan.splits[9].test, Some(plan.splits[0].validation.clone()));
        let mut tested: Vec<usize> = plan.splits.iter().flat_map(|s| s.test.clone().unwrap()).collect();
        tested.sort();
        assert_eq!(tested, (0..23).collect::<Vec<_>>());
        assert!(plan.violations(&r).is_empty());
        for s in &plan.splits {
            assert_eq!(s.train.len() + s.validation.len() + s.test.as_ref().unwrap().len(), 23);
        }
        assert!(rounds10_wrap_splits(&r[..9], 0).is_err());
    }
}
