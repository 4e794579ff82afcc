use std::collections::HashSet;
use std::ops::AddAssign;

use super::SegmentError;
use crate::scalar::Scalar;

/// Precision, recall and F1 of a segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf<F> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

impl<F: Scalar> Prf<F> {
    /// Harmonic mean; 0 when both inputs are 0.
    pub fn from_precision_recall(precision: F, recall: F) -> Self {
        let sum = precision + recall;
        let f1 = if sum > F::zero() {
            (F::one() + F::one()) * precision * recall / sum
        } else {
            F::zero()
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Word-span tallies, summed over sentences for corpus-level scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpanCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl AddAssign for SpanCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.correct += rhs.correct;
        self.predicted += rhs.predicted;
        self.gold += rhs.gold;
    }
}

impl SpanCounts {
    pub fn between<S: AsRef<str>, G: AsRef<str>>(
        predicted: &[S],
        gold: &[G],
    ) -> Result<Self, SegmentError> {
        let pj: String = predicted.iter().map(AsRef::as_ref).collect();
        let gj: String = gold.iter().map(AsRef::as_ref).collect();
        if pj != gj {
            return Err(SegmentError::TextMismatch);
        }
        let p = spans(predicted);
        let g: HashSet<(usize, usize)> = spans(gold).into_iter().collect();
        Ok(Self {
            correct: p.iter().filter(|s| g.contains(s)).count(),
            predicted: p.len(),
            gold: g.len(),
        })
    }

    pub fn prf<F: Scalar>(&self) -> Prf<F> {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                F::zero()
            } else {
                F::from_usize(num).unwrap_or_else(F::nan)
                    / F::from_usize(den).unwrap_or_else(F::nan)
            }
        };
        if self.predicted == 0 && self.gold == 0 {
            return Prf {
                precision: F::one(),
                recall: F::one(),
                f1: F::one(),
            };
        }
        Prf::from_precision_recall(
            ratio(self.correct, self.predicted),
            ratio(self.correct, self.gold),
        )
    }
}

/// Char-offset spans `[start, end)` of consecutive tokens.
pub fn spans<S: AsRef<str>>(tokens: &[S]) -> Vec<(usize, usize)> {
    let mut pos = 0;
    tokens
        .iter()
        .map(|t| {
            let start = pos;
            pos += t.as_ref().chars().count();
            (start, pos)
        })
        .collect()
}

/// Span-level precision/recall/F1 of one predicted segmentation.
///
/// Both token lists must spell the same text. Empty tokens are ignored.
pub fn evaluate_segmentation<F: Scalar, S: AsRef<str>, G: AsRef<str>>(
    predicted: &[S],
    gold: &[G],
) -> Result<Prf<F>, SegmentError> {
    let p: Vec<&str> = predicted
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !t.is_empty())
        .collect();
    let g: Vec<&str> = gold
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !t.is_empty())
        .collect();
    Ok(SpanCounts::between(&p, &g)?.prf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_perfect() {
        let p: Prf<f64> = evaluate_segmentation(&["主变", "漏油"], &["主变", "漏油"]).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_span_intersection() {
        // gold {AB, C, DE}; predicted {A, B, C, DE}; shared {C, DE}.
        let p: Prf<f64> =
            evaluate_segmentation(&["A", "B", "C", "DE"], &["AB", "C", "DE"]).unwrap();
        assert!((p.precision - 0.5).abs() < 1e-15);
        assert!((p.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.f1 - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn text_mismatch() {
        assert!(matches!(
            evaluate_segmentation::<f64, _, _>(&["AB"], &["AC"]),
            Err(SegmentError::TextMismatch)
        ));
    }

    #[test]
    fn zero_overlap_gives_zero_f() {
        let p: Prf<f32> = evaluate_segmentation(&["A", "B"], &["AB"]).unwrap();
        assert_eq!(p.f1, 0.0);
    }

    #[test]
    fn counts_accumulate() {
        let mut total = SpanCounts::default();
        total += SpanCounts::between(&["A", "B"], &["AB"]).unwrap();
        total += SpanCounts::between(&["CD"], &["CD"]).unwrap();
        assert_eq!(
            total,
            SpanCounts {
                correct: 1,
                predicted: 3,
                gold: 2
            }
        );
    }
}
