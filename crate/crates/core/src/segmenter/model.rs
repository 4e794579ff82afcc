use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tags::{Tag, TaggedCorpus};
use super::SegmentError;
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Successor tags each tag may transition to, indexed by [`Tag::index`].
const ALLOWED_NEXT: [[Tag; 2]; 4] = [
    [Tag::M, Tag::E], // B
    [Tag::M, Tag::E], // M
    [Tag::B, Tag::S], // E
    [Tag::B, Tag::S], // S
];

/// Four-state BMES hidden Markov model, λ = (π, X, Y) in log space.
///
/// * `pi[i]` is the log-probability of starting in tag `i`;
///   `pi[M]` and `pi[E]` are `-inf`.
/// * `trans[j][i]` is the log-probability of moving from tag `j` to tag `i`;
///   the eight transitions forbidden by the BMES grammar are `-inf`.
/// * emissions are stored per vocabulary character as a 4-array over tags,
///   with a per-tag probability for characters outside the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel<F> {
    pi: [F; 4],
    trans: [[F; 4]; 4],
    vocab: Vec<char>,
    emit: Vec<[F; 4]>,
    unknown: [F; 4],
    epsilon: F,
    index: HashMap<char, u32>,
}

fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_sums_to_one(what: &str, log_sum: f64, tol: f64) -> Result<(), SegmentError> {
    let total = log_sum.exp();
    if (total - 1.0).abs() > tol || !total.is_finite() {
        return Err(SegmentError::InvalidModel(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

impl<F: Scalar> HmmModel<F> {
    /// Assembles a model from log-probabilities and checks every invariant.
    ///
    /// `emit[tag][k]` is the emission log-probability of `vocab[k]` under
    /// `tag`. `vocab` is sorted on the way in.
    pub fn from_log_parts(
        pi: [F; 4],
        trans: [[F; 4]; 4],
        vocab: Vec<char>,
        emit: [Vec<F>; 4],
        unknown: [F; 4],
        epsilon: F,
    ) -> Result<Self, SegmentError> {
        for (t, row) in emit.iter().enumerate() {
            if row.len() != vocab.len() {
                return Err(SegmentError::InvalidModel(format!(
                    "emission row {} has {} entries for {} vocabulary chars",
                    Tag::ALL[t],
                    row.len(),
                    vocab.len()
                )));
            }
        }
        let mut order: Vec<usize> = (0..vocab.len()).collect();
        order.sort_by_key(|&k| vocab[k]);
        let sorted_vocab: Vec<char> = order.iter().map(|&k| vocab[k]).collect();
        if sorted_vocab.windows(2).any(|w| w[0] == w[1]) {
            return Err(SegmentError::InvalidModel(
                "vocabulary contains duplicates".into(),
            ));
        }
        let emit_rows: Vec<[F; 4]> = order
            .iter()
            .map(|&k| [emit[0][k], emit[1][k], emit[2][k], emit[3][k]])
            .collect();
        let model = Self::assemble(pi, trans, sorted_vocab, emit_rows, unknown, epsilon);
        model.validate()?;
        Ok(model)
    }

    fn assemble(
        pi: [F; 4],
        trans: [[F; 4]; 4],
        vocab: Vec<char>,
        emit: Vec<[F; 4]>,
        unknown: [F; 4],
        epsilon: F,
    ) -> Self {
        let index = vocab
            .iter()
            .enumerate()
            .map(|(k, &c)| (c, k as u32))
            .collect();
        Self {
            pi,
            trans,
            vocab,
            emit,
            unknown,
            epsilon,
            index,
        }
    }

    /// Checks normalisation and structural zeros.
    pub fn validate(&self) -> Result<(), SegmentError> {
        let tol = F::NORM_TOLERANCE;
        let eps = self.epsilon.to_f64_lossy();
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SegmentError::InvalidEpsilon(eps));
        }
        let is_neg_inf = |v: F| v == F::neg_infinity();
        let is_log_prob = |v: F| v.is_finite() && v <= F::zero();

        for tag in Tag::ALL {
            let v = self.pi[tag.index()];
            let ok = if tag.can_start() {
                is_log_prob(v)
            } else {
                is_neg_inf(v)
            };
            if !ok {
                return Err(SegmentError::InvalidModel(format!(
                    "initial log-probability of {tag} is {v}"
                )));
            }
        }
        check_sums_to_one(
            "initial distribution",
            logsumexp(self.pi.iter().map(|v| v.to_f64_lossy())),
            tol,
        )?;

        for from in Tag::ALL {
            let row = &self.trans[from.index()];
            for to in Tag::ALL {
                let v = row[to.index()];
                let ok = if from.can_precede(to) {
                    is_log_prob(v)
                } else {
                    is_neg_inf(v)
                };
                if !ok {
                    return Err(SegmentError::InvalidModel(format!(
                        "transition {from}->{to} has log-probability {v}"
                    )));
                }
            }
            check_sums_to_one(
                &format!("transition row {from}"),
                logsumexp(row.iter().map(|v| v.to_f64_lossy())),
                tol,
            )?;
        }

        for tag in Tag::ALL {
            let t = tag.index();
            let column = self
                .emit
                .iter()
                .map(|row| row[t])
                .chain(std::iter::once(self.unknown[t]));
            let mut logs = Vec::with_capacity(self.emit.len() + 1);
            for v in column {
                if !is_log_prob(v) {
                    return Err(SegmentError::InvalidModel(format!(
                        "emission under {tag} has log-probability {v}"
                    )));
                }
                logs.push(v.to_f64_lossy());
            }
            check_sums_to_one(&format!("emissions of {tag}"), logsumexp(logs), tol)?;
        }
        Ok(())
    }

    pub fn log_pi(&self, tag: Tag) -> F {
        self.pi[tag.index()]
    }

    pub fn log_trans(&self, from: Tag, to: Tag) -> F {
        self.trans[from.index()][to.index()]
    }

    pub fn log_emit(&self, tag: Tag, c: char) -> F {
        self.emission_row(c)[tag.index()]
    }

    /// Emission log-probabilities of `c` under B, M, E, S.
    pub fn emission_row(&self, c: char) -> [F; 4] {
        match self.index.get(&c) {
            Some(&k) => self.emit[k as usize],
            None => self.unknown,
        }
    }

    pub fn pi(&self) -> &[F; 4] {
        &self.pi
    }

    pub fn trans(&self) -> &[[F; 4]; 4] {
        &self.trans
    }

    pub fn unknown(&self) -> &[F; 4] {
        &self.unknown
    }

    /// Sorted vocabulary.
    pub fn vocab(&self) -> &[char] {
        &self.vocab
    }

    pub fn epsilon(&self) -> F {
        self.epsilon
    }

    /// Converts to another precision.
    pub fn cast<G: Scalar>(&self) -> HmmModel<G> {
        let c = |v: F| G::from_f64_lossy(v.to_f64_lossy());
        let c4 = |a: &[F; 4]| [c(a[0]), c(a[1]), c(a[2]), c(a[3])];
        HmmModel::<G>::assemble(
            c4(&self.pi),
            [
                c4(&self.trans[0]),
                c4(&self.trans[1]),
                c4(&self.trans[2]),
                c4(&self.trans[3]),
            ],
            self.vocab.clone(),
            self.emit.iter().map(c4).collect(),
            c4(&self.unknown),
            c(self.epsilon),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDocument::from_model(self)).expect("model serialisation")
    }

    pub fn from_json(text: &str) -> Result<Self, SegmentError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SegmentError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Estimates π, X and Y by additive-smoothed maximum likelihood.
///
/// Counts of sentence-initial tags, tag bigrams and (tag, char) pairs are
/// each increased by `epsilon` before normalising. Only grammatical
/// transitions and the two legal start tags receive smoothing mass; the
/// structural zeros stay exactly `-inf`. Each tag additionally reserves
/// `epsilon` mass for unseen characters.
pub fn train_hmm<F: Scalar>(
    corpus: &TaggedCorpus,
    epsilon: F,
) -> Result<HmmModel<F>, SegmentError> {
    let eps = epsilon.to_f64_lossy();
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SegmentError::InvalidEpsilon(eps));
    }
    let mut start = [0u64; 4];
    let mut bigram = [[0u64; 4]; 4];
    let mut emit_counts: BTreeMap<char, [u64; 4]> = BTreeMap::new();
    let mut tag_totals = [0u64; 4];
    let mut sentences = 0usize;

    for (chars, tags) in &corpus.sentences {
        if chars.len() != tags.len() {
            return Err(SegmentError::LengthMismatch {
                chars: chars.len(),
                tags: tags.len(),
            });
        }
        if let Some(position) = tags.first_violation() {
            return Err(SegmentError::IllFormedTags { position });
        }
        let Some(first) = tags.0.first() else {
            continue;
        };
        sentences += 1;
        start[first.index()] += 1;
        for w in tags.0.windows(2) {
            bigram[w[0].index()][w[1].index()] += 1;
        }
        for (&c, &t) in chars.0.iter().zip(&tags.0) {
            emit_counts.entry(c).or_insert([0; 4])[t.index()] += 1;
            tag_totals[t.index()] += 1;
        }
    }
    if sentences == 0 {
        return Err(SegmentError::EmptyCorpus);
    }

    let ln = |num: f64, den: f64| F::from_f64_lossy((num / den).ln());
    let neg_inf = F::neg_infinity();

    let mut pi = [neg_inf; 4];
    let start_total = (start[Tag::B.index()] + start[Tag::S.index()]) as f64 + 2.0 * eps;
    for tag in [Tag::B, Tag::S] {
        pi[tag.index()] = ln(start[tag.index()] as f64 + eps, start_total);
    }

    let mut trans = [[neg_inf; 4]; 4];
    for from in Tag::ALL {
        let allowed = ALLOWED_NEXT[from.index()];
        let row = &bigram[from.index()];
        let total = allowed.iter().map(|t| row[t.index()] as f64).sum::<f64>() + 2.0 * eps;
        for to in allowed {
            trans[from.index()][to.index()] = ln(row[to.index()] as f64 + eps, total);
        }
    }

    let vocab_size = emit_counts.len() as f64;
    let denominators: [f64; 4] =
        std::array::from_fn(|t| tag_totals[t] as f64 + eps * (vocab_size + 1.0));
    let vocab: Vec<char> = emit_counts.keys().copied().collect();
    let emit: Vec<[F; 4]> = emit_counts
        .values()
        .map(|counts| std::array::from_fn(|t| ln(counts[t] as f64 + eps, denominators[t])))
        .collect();
    let unknown: [F; 4] = std::array::from_fn(|t| ln(eps, denominators[t]));

    Ok(HmmModel::assemble(pi, trans, vocab, emit, unknown, epsilon))
}

/// On-disk model layout. `-inf` log-probabilities are written as `null`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format_version: u32,
    tags: Vec<String>,
    epsilon: f64,
    pi: Vec<Option<f64>>,
    trans: Vec<Vec<Option<f64>>>,
    vocab: Vec<String>,
    emit: Vec<Vec<Option<f64>>>,
    unknown: Vec<Option<f64>>,
}

fn encode<F: Scalar>(v: F) -> Option<f64> {
    (v != F::neg_infinity()).then(|| v.to_f64_lossy())
}

fn decode<F: Scalar>(v: &Option<f64>) -> F {
    v.map_or(F::neg_infinity(), F::from_f64_lossy)
}

fn decode4<F: Scalar>(what: &str, v: &[Option<f64>]) -> Result<[F; 4], SegmentError> {
    if v.len() != 4 {
        return Err(SegmentError::InvalidModel(format!(
            "{what} must have 4 entries, found {}",
            v.len()
        )));
    }
    Ok(std::array::from_fn(|i| decode(&v[i])))
}

impl ModelDocument {
    fn from_model<F: Scalar>(m: &HmmModel<F>) -> Self {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            tags: Tag::ALL.iter().map(|t| t.to_string()).collect(),
            epsilon: m.epsilon.to_f64_lossy(),
            pi: m.pi.iter().map(|&v| encode(v)).collect(),
            trans: m
                .trans
                .iter()
                .map(|row| row.iter().map(|&v| encode(v)).collect())
                .collect(),
            vocab: m.vocab.iter().map(|c| c.to_string()).collect(),
            emit: (0..4)
                .map(|t| m.emit.iter().map(|row| encode(row[t])).collect())
                .collect(),
            unknown: m.unknown.iter().map(|&v| encode(v)).collect(),
        }
    }

    fn into_model<F: Scalar>(self) -> Result<HmmModel<F>, SegmentError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(SegmentError::UnsupportedVersion(self.format_version));
        }
        if self.tags != ["B", "M", "E", "S"] {
            return Err(SegmentError::InvalidModel(format!(
                "unexpected tag order {:?}",
                self.tags
            )));
        }
        if self.trans.len() != 4 || self.emit.len() != 4 {
            return Err(SegmentError::InvalidModel(
                "trans and emit must have one row per tag".into(),
            ));
        }
        let pi = decode4("pi", &self.pi)?;
        let trans = [
            decode4("trans[B]", &self.trans[0])?,
            decode4("trans[M]", &self.trans[1])?,
            decode4("trans[E]", &self.trans[2])?,
            decode4("trans[S]", &self.trans[3])?,
        ];
        let unknown = decode4("unknown", &self.unknown)?;
        let mut vocab = Vec::with_capacity(self.vocab.len());
        for s in &self.vocab {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => vocab.push(c),
                _ => {
                    return Err(SegmentError::InvalidModel(format!(
                        "vocabulary entry {s:?} is not a single character"
                    )))
                }
            }
        }
        let emit: [Vec<F>; 4] = std::array::from_fn(|t| self.emit[t].iter().map(decode).collect());
        HmmModel::from_log_parts(
            pi,
            trans,
            vocab,
            emit,
            unknown,
            F::from_f64_lossy(self.epsilon),
        )
    }
}
