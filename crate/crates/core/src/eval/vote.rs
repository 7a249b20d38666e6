use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Decision for a single chunk or sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub narrative_id: String,
    pub unit_index: usize,
    pub predicted: usize,
    pub scores: Vec<f64>,
}

/// Most frequent predicted class. Ties go to the class with the larger
/// summed decision score, then to the lower index.
///
/// Scores are summed in sorted order so the result does not depend on the
/// order of `records`.
pub fn majority_vote(records: &[PredictionRecord]) -> Result<usize> {
    let Some(first) = records.first() else {
        return Err(Error::data("majority vote over an empty record set"));
    };
    let k = first.scores.len();
    if k == 0
        || records
            .iter()
            .any(|r| r.scores.len() != k || r.predicted >= k)
    {
        return Err(Error::contract("records disagree on the number of classes"));
    }
    let mut votes = vec![0usize; k];
    for r in records {
        votes[r.predicted] += 1;
    }
    let top = *votes.iter().max().unwrap_or(&0);
    let tied: Vec<usize> = (0..k).filter(|&c| votes[c] == top).collect();
    if tied.len() == 1 {
        return Ok(tied[0]);
    }
    let summed = |c: usize| {
        let mut s: Vec<f64> = records.iter().map(|r| r.scores[c]).collect();
        s.sort_by(f64::total_cmp);
        s.iter().sum::<f64>()
    };
    let mut best = tied[0];
    let mut best_sum = summed(best);
    for &c in &tied[1..] {
        let s = summed(c);
        if s > best_sum {
            best = c;
            best_sum = s;
        }
    }
    Ok(best)
}

/// Groups records by narrative and votes each group.
pub fn vote_narratives(records: &[PredictionRecord]) -> Result<BTreeMap<String, usize>> {
    let mut groups: BTreeMap<&str, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.narrative_id).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(id, rs)| Ok((id.to_string(), majority_vote(&rs)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(predicted: usize, scores: [f64; 3]) -> PredictionRecord {
        PredictionRecord {
            narrative_id: "n".into(),
            unit_index: 0,
            predicted,
            scores: scores.to_vec(),
        }
    }

    #[test]
    fn plain_majority() {
        let r = [
            rec(0, [1.0, 0.0, 0.0]),
            rec(0, [1.0, 0.0, 0.0]),
            rec(2, [0.0, 0.0, 5.0]),
        ];
        assert_eq!(majority_vote(&r).unwrap(), 0);
    }

    #[test]
    fn score_tie_break() {
        let r = [rec(0, [0.7, -1.0, 0.1]), rec(2, [0.5, -1.0, 0.7])];
        assert_eq!(majority_vote(&r).unwrap(), 0);
        let r = [rec(0, [0.1, 0.0, 0.6]), rec(2, [0.2, 0.0, 0.9])];
        assert_eq!(majority_vote(&r).unwrap(), 2);
    }

    #[test]
    fn index_tie_break() {
        let r = [rec(1, [0.0, 1.0, 1.0]), rec(2, [0.0, 1.0, 1.0])];
        assert_eq!(majority_vote(&r).unwrap(), 1);
    }

    #[test]
    fn empty_errors() {
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn groups_by_narrative() {
        let mut a = rec(1, [0.0, 1.0, 0.0]);
        a.narrative_id = "a".into();
        let b = rec(2, [0.0, 0.0, 1.0]);
        let v = vote_narratives(&[b.clone(), a, b]).unwrap();
        assert_eq!(
            v.into_iter().collect::<Vec<_>>(),
            vec![("a".to_string(), 1), ("n".to_string(), 2)]
        );
    }
}
