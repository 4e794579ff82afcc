use super::model::HmmModel;
use super::tags::{CharSequence, Tag, TagSequence};
use crate::scalar::Scalar;

/// Dynamic-programming table of a Viterbi pass.
///
/// `score[t][i]` is the best log-probability of any tag path over
/// `obs[..=t]` that ends in tag `i`; `backptr[t][i]` is the predecessor
/// tag on that path. Row 0 holds `pi[i] + emit_i(obs[0])` and sentinel
/// back-pointers of 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiTrellis<F> {
    score: Vec<[F; 4]>,
    backptr: Vec<[u8; 4]>,
}

impl<F: Scalar> ViterbiTrellis<F> {
    pub fn build(model: &HmmModel<F>, obs: &[char]) -> Self {
        let mut score: Vec<[F; 4]> = Vec::with_capacity(obs.len());
        let mut backptr: Vec<[u8; 4]> = Vec::with_capacity(obs.len());
        let Some((&first, rest)) = obs.split_first() else {
            return Self { score, backptr };
        };

        let e = model.emission_row(first);
        let pi = model.pi();
        score.push(std::array::from_fn(|i| pi[i] + e[i]));
        backptr.push([0; 4]);

        let trans = model.trans();
        for &c in rest {
            let prev = *score.last().expect("row 0 present");
            let e = model.emission_row(c);
            let mut row = [F::neg_infinity(); 4];
            let mut ptr = [0u8; 4];
            for i in 0..4 {
                // Strict comparison keeps the lowest predecessor index on ties.
                let mut best = prev[0] + trans[0][i];
                let mut arg = 0u8;
                for (j, p) in prev.iter().enumerate().skip(1) {
                    let cand = *p + trans[j][i];
                    if cand > best {
                        best = cand;
                        arg = j as u8;
                    }
                }
                row[i] = best + e[i];
                ptr[i] = arg;
            }
            score.push(row);
            backptr.push(ptr);
        }
        Self { score, backptr }
    }

    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }

    pub fn score(&self, t: usize, tag: Tag) -> F {
        self.score[t][tag.index()]
    }

    pub fn backptr(&self, t: usize, tag: Tag) -> Tag {
        Tag::ALL[self.backptr[t][tag.index()] as usize]
    }

    /// Backtrace from the better of `E` and `S` in the last row (a
    /// sentence cannot end inside a word). `E` wins ties.
    pub fn best_path(&self) -> (TagSequence, F) {
        let Some(last) = self.score.last() else {
            return (TagSequence::default(), F::zero());
        };
        let (mut state, best) = if last[Tag::S.index()] > last[Tag::E.index()] {
            (Tag::S, last[Tag::S.index()])
        } else {
            (Tag::E, last[Tag::E.index()])
        };
        let mut path = vec![Tag::S; self.score.len()];
        for t in (0..self.score.len()).rev() {
            path[t] = state;
            state = self.backptr(t, state);
        }
        (TagSequence(path), best)
    }
}

/// Most probable well-formed tag sequence for `obs`.
pub fn viterbi_decode<F: Scalar>(model: &HmmModel<F>, obs: &CharSequence) -> TagSequence {
    viterbi_decode_scored(model, obs).0
}

/// Like [`viterbi_decode`], also returning the joint log-probability
/// `log P(Q, O | λ)` of the chosen path (0 for an empty sequence).
pub fn viterbi_decode_scored<F: Scalar>(
    model: &HmmModel<F>,
    obs: &CharSequence,
) -> (TagSequence, F) {
    ViterbiTrellis::build(model, obs.as_slice()).best_path()
}
