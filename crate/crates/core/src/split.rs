//! Partitioning the target set into easy, hard and neutral images.

use serde::Serialize;

use crate::error::{LbeeError, Result};
use crate::ingest::{Outcome, OutcomeTable, Polarity, ScoreTable};

/// Disjoint easy / hard / neutral id lists covering every input id. Each
/// list keeps the input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub easy: Vec<String>,
    pub hard: Vec<String>,
    pub neutral: Vec<String>,
    pub thresholds: Option<Thresholds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub easy: f64,
    pub hard: f64,
}

impl SplitResult {
    pub fn total(&self) -> usize {
        self.easy.len() + self.hard.len() + self.neutral.len()
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Thresholds at `mean ± a·std`, oriented by the score polarity.
pub fn derive_thresholds(scores: &ScoreTable, a: f64) -> Result<Thresholds> {
    let (avg, std) = mean_std(scores.values()).ok_or(LbeeError::EmptyScores)?;
    let margin = a * std;
    Ok(match scores.polarity() {
        Polarity::HigherIsHarder => Thresholds {
            easy: avg - margin,
            hard: avg + margin,
        },
        Polarity::HigherIsEasier => Thresholds {
            easy: avg + margin,
            hard: avg - margin,
        },
    })
}

/// Strict comparisons on both sides; values on a threshold are neutral.
pub fn split_by_score(scores: &ScoreTable, thresholds: Thresholds) -> SplitResult {
    let mut out = SplitResult {
        easy: Vec::new(),
        hard: Vec::new(),
        neutral: Vec::new(),
        thresholds: Some(thresholds),
    };
    for (id, v) in scores.iter() {
        let (is_easy, is_hard) = match scores.polarity() {
            Polarity::HigherIsHarder => (v < thresholds.easy, v > thresholds.hard),
            Polarity::HigherIsEasier => (v > thresholds.easy, v < thresholds.hard),
        };
        // with a >= 0 both cannot hold; easy wins if thresholds were inverted by hand
        let bucket = if is_easy {
            &mut out.easy
        } else if is_hard {
            &mut out.hard
        } else {
            &mut out.neutral
        };
        bucket.push(id.to_string());
    }
    out
}

/// Correct images are easy; false positives and false negatives are hard.
pub fn split_by_outcome(outcomes: &OutcomeTable) -> SplitResult {
    let mut out = SplitResult {
        easy: Vec::new(),
        hard: Vec::new(),
        neutral: Vec::new(),
        thresholds: None,
    };
    for (id, o) in outcomes.iter() {
        match o {
            Outcome::Correct => out.easy.push(id.to_string()),
            Outcome::FalsePositive | Outcome::FalseNegative => out.hard.push(id.to_string()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ScoreKind;
    use proptest::prelude::*;

    fn table(values: &[f64], polarity: Polarity) -> ScoreTable {
        let ids = (0..values.len()).map(|i| format!("x{i}")).collect();
        ScoreTable::new(ids, values.to_vec(), polarity, ScoreKind::Confidence).unwrap()
    }

    #[test]
    fn thresholds_four_point_example() {
        // mean 0.5, population variance 0.05
        let t = derive_thresholds(&table(&[0.2, 0.4, 0.6, 0.8], Polarity::HigherIsHarder), 0.2).unwrap();
        let std = 0.05_f64.sqrt();
        assert!((t.easy - (0.5 - 0.2 * std)).abs() < 1e-12);
        assert!((t.hard - (0.5 + 0.2 * std)).abs() < 1e-12);
        assert!((t.easy - 0.455279).abs() < 1e-6);
        assert!((t.hard - 0.544721).abs() < 1e-6);
    }

    #[test]
    fn thresholds_flip_with_polarity() {
        let t = derive_thresholds(&table(&[0.2, 0.4, 0.6, 0.8], Polarity::HigherIsEasier), 0.2).unwrap();
        assert!(t.easy > t.hard);
    }

    #[test]
    fn constant_scores_and_zero_margin() {
        let s = table(&[0.5, 0.5, 0.5], Polarity::HigherIsEasier);
        let t = derive_thresholds(&s, 0.2).unwrap();
        assert_eq!((t.easy, t.hard), (0.5, 0.5));
        let split = split_by_score(&s, t);
        assert_eq!(split.neutral.len(), 3);

        let t0 = derive_thresholds(&table(&[0.1, 0.9], Polarity::HigherIsHarder), 0.0).unwrap();
        assert_eq!(t0.easy, 0.5);
        assert_eq!(t0.hard, 0.5);
    }

    #[test]
    fn empty_scores_error() {
        assert!(matches!(
            derive_thresholds(&table(&[], Polarity::HigherIsHarder), 0.2),
            Err(LbeeError::EmptyScores)
        ));
    }

    #[test]
    fn four_point_split() {
        let s = table(&[0.2, 0.4, 0.6, 0.8], Polarity::HigherIsHarder);
        let split = split_by_score(&s, derive_thresholds(&s, 0.2).unwrap());
        assert_eq!(split.easy, vec!["x0", "x1"]);
        assert_eq!(split.hard, vec!["x2", "x3"]);
        assert!(split.neutral.is_empty());
    }

    #[test]
    fn singleton_below_easy_threshold() {
        let s = table(&[0.1], Polarity::HigherIsHarder);
        let split = split_by_score(&s, Thresholds { easy: 0.3, hard: 0.7 });
        assert_eq!(split.easy.len(), 1);
        assert!(split.hard.is_empty() && split.neutral.is_empty());
    }

    #[test]
    fn outcome_split() {
        let o = OutcomeTable::from_labels(
            vec!["a".into(), "b".into(), "c".into()],
            &["correct", "false_positive", "false_negative"],
        )
        .unwrap();
        let split = split_by_outcome(&o);
        assert_eq!(split.easy, vec!["a"]);
        assert_eq!(split.hard, vec!["b", "c"]);
        assert!(split.neutral.is_empty());

        let all_correct = OutcomeTable::from_labels(vec!["a".into()], &["correct"]).unwrap();
        assert!(split_by_outcome(&all_correct).hard.is_empty());

        assert!(matches!(
            OutcomeTable::from_labels(vec!["a".into()], &["maybe"]),
            Err(LbeeError::UnknownOutcomeLabel(_))
        ));
    }

    proptest! {
        #[test]
        fn partition_and_polarity_symmetry(
            values in prop::collection::vec(-5.0f64..5.0, 1..60),
            a in 0.0f64..2.0,
        ) {
            let s = table(&values, Polarity::HigherIsHarder);
            let split = split_by_score(&s, derive_thresholds(&s, a).unwrap());
            prop_assert_eq!(split.total(), values.len());

            let negated: Vec<f64> = values.iter().map(|v| -v).collect();
            let s2 = table(&negated, Polarity::HigherIsEasier);
            let split2 = split_by_score(&s2, derive_thresholds(&s2, a).unwrap());
            prop_assert_eq!(&split.easy, &split2.easy);
            prop_assert_eq!(&split.hard, &split2.hard);
            prop_assert_eq!(&split.neutral, &split2.neutral);
        }

        #[test]
        fn larger_margin_shrinks_both_sides(
            values in prop::collection::vec(0.0f64..1.0, 1..60),
            a1 in 0.0f64..1.0,
            extra in 0.0f64..1.0,
        ) {
            let s = table(&values, Polarity::HigherIsEasier);
            let lo = split_by_score(&s, derive_thresholds(&s, a1).unwrap());
            let hi = split_by_score(&s, derive_thresholds(&s, a1 + extra).unwrap());
            prop_assert!(hi.easy.iter().all(|id| lo.easy.contains(id)));
            prop_assert!(hi.hard.iter().all(|id| lo.hard.contains(id)));
        }
    }
}
