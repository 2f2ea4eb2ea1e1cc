use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::Labels;
use crate::error::{Error, Result};
use crate::sampling::seeded;

/// Joins per-task labels into one `task=class|task=class` string in `tasks` order.
pub fn xcva_encode(labels: &Labels, tasks: &[String]) -> Result<String> {
    let parts = tasks
        .iter()
        .map(|t| {
            labels
                .get(t)
                .map(|c| format!("{t}={c}"))
                .ok_or_else(|| Error::invalid(format!("missing label for task `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.join("|"))
}

pub fn xcva_decode(joined: &str) -> Result<Labels> {
    let mut out = Labels::new();
    for part in joined.split('|') {
        let (task, class) = part
            .split_once('=')
            .filter(|(t, c)| !t.is_empty() && !c.is_empty())
            .ok_or_else(|| Error::invalid(format!("malformed concatenated label `{joined}`")))?;
        if out.insert(task.to_string(), class.to_string()).is_some() {
            return Err(Error::invalid(format!("task `{task}` repeated in `{joined}`")));
        }
    }
    Ok(out)
}

/// Random oversampling: every class is topped up to the majority count by
/// drawing its own rows with replacement. Originals come first, in order.
pub fn random_oversample<T: Clone>(features: &[T], labels: &[String], seed: u64) -> (Vec<T>, Vec<String>) {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let majority = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut xs = features.to_vec();
    let mut ys = labels.to_vec();
    for members in by_class.values() {
        for _ in members.len()..majority {
            let pick = members[rng.gen_range(0..members.len())];
            xs.push(features[pick].clone());
            ys.push(labels[pick].clone());
        }
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn encode_roundtrip() {
        let l = Labels::from([("C".to_string(), "Partial".to_string()), ("I".to_string(), "None".to_string())]);
        let s = xcva_encode(&l, &tasks(&["C", "I"])).unwrap();
        assert_eq!(s, "C=Partial|I=None");
        assert_eq!(xcva_decode(&s).unwrap(), l);
    }

    #[test]
    fn malformed() {
        assert!(xcva_decode("C=Partial|I").is_err());
        assert!(xcva_decode("").is_err());
        assert!(xcva_decode("C=a|C=b").is_err());
    }

    #[test]
    fn oversample_counts() {
        let y = tasks(&["A", "A", "A", "B"]);
        let (x2, y2) = random_oversample(&[1, 2, 3, 4], &y, 0);
        assert_eq!(y2.iter().filter(|l| *l == "B").count(), 3);
        assert_eq!(x2.len(), 6);
        assert_eq!(&x2[..4], &[1, 2, 3, 4]);
        assert!(x2[4..].iter().all(|&v| v == 4));
        let (same, _) = random_oversample(&[1], &tasks(&["A"]), 0);
        assert_eq!(same, [1]);
    }
}
