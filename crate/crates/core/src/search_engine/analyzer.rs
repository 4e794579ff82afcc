use crate::scalar::Scalar;
use crate::segmenter::{segment_tokens, HmmModel, TokenKind};

/// Index term with its 0-based token position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzedTerm {
    pub term: String,
    pub position: u32,
}

/// Text → term stream used both for indexing and for queries.
pub trait Analyzer {
    fn analyze(&self, text: &str) -> Vec<AnalyzedTerm>;
}

impl<T: Analyzer + ?Sized> Analyzer for &T {
    fn analyze(&self, text: &str) -> Vec<AnalyzedTerm> {
        (**self).analyze(text)
    }
}

/// Segmenter tokens, lowercased, with whitespace and punctuation dropped.
impl<F: Scalar> Analyzer for HmmModel<F> {
    fn analyze(&self, text: &str) -> Vec<AnalyzedTerm> {
        segment_tokens(self, text)
            .into_iter()
            .filter(|t| {
                !matches!(t.kind, TokenKind::Whitespace | TokenKind::Punctuation)
                    && t.text.chars().any(char::is_alphanumeric)
            })
            .enumerate()
            .map(|(i, t)| AnalyzedTerm {
                term: t.text.to_lowercase(),
                position: i as u32,
            })
            .collect()
    }
}

/// `(term, position)` pairs of `text` under `model`.
pub fn analyze<F: Scalar>(text: &str, model: &HmmModel<F>) -> Vec<(String, u32)> {
    model
        .analyze(text)
        .into_iter()
        .map(|t| (t.term, t.position))
        .collect()
}
