use std::collections::{HashMap, HashSet};

fn is_word(dict: &HashSet<String>, chars: &[char], buf: &mut String) -> bool {
    buf.clear();
    buf.extend(chars);
    dict.contains(buf.as_str())
}

/// Greedy left-to-right longest match; unknown characters become
/// single-char tokens.
pub fn forward_max_match(dict: &HashSet<String>, text: &str, max_word_len: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let max_len = max_word_len.max(1);
    let mut buf = String::new();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let longest = max_len.min(chars.len() - i);
        let len = (2..=longest)
            .rev()
            .find(|&l| is_word(dict, &chars[i..i + l], &mut buf))
            .unwrap_or(1);
        out.push(chars[i..i + len].iter().collect());
        i += len;
    }
    out
}

/// Greedy right-to-left longest match.
pub fn backward_max_match(dict: &HashSet<String>, text: &str, max_word_len: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let max_len = max_word_len.max(1);
    let mut buf = String::new();
    let mut out = Vec::new();
    let mut end = chars.len();
    while end > 0 {
        let longest = max_len.min(end);
        let len = (2..=longest)
            .rev()
            .find(|&l| is_word(dict, &chars[end - l..end], &mut buf))
            .unwrap_or(1);
        out.push(chars[end - len..end].iter().collect());
        end -= len;
    }
    out.reverse();
    out
}

/// Bidirectional maximum matching.
///
/// Runs both directions and keeps the result with fewer single-character
/// tokens, then fewer tokens overall; the forward result wins a full tie.
pub fn max_match_segment(dict: &HashSet<String>, text: &str, max_word_len: usize) -> Vec<String> {
    let fwd = forward_max_match(dict, text, max_word_len);
    let bwd = backward_max_match(dict, text, max_word_len);
    let key = |toks: &[String]| {
        (
            toks.iter().filter(|t| t.chars().count() == 1).count(),
            toks.len(),
        )
    };
    if key(&bwd) < key(&fwd) {
        bwd
    } else {
        fwd
    }
}

/// Character unigram and adjacent-bigram counts of a raw training text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BigramCounts {
    unigrams: HashMap<char, u64>,
    bigrams: HashMap<(char, char), u64>,
    unigram_total: u64,
    bigram_total: u64,
}

impl BigramCounts {
    /// Counts characters and within-sentence character pairs.
    pub fn from_sentences<I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts = Self::default();
        for s in sentences {
            counts.add_sentence(s.as_ref());
        }
        counts
    }

    pub fn add_sentence(&mut self, sentence: &str) {
        let mut prev: Option<char> = None;
        for c in sentence.chars() {
            *self.unigrams.entry(c).or_default() += 1;
            self.unigram_total += 1;
            if let Some(p) = prev {
                *self.bigrams.entry((p, c)).or_default() += 1;
                self.bigram_total += 1;
            }
            prev = Some(c);
        }
    }

    pub fn unigram(&self, c: char) -> u64 {
        self.unigrams.get(&c).copied().unwrap_or(0)
    }

    pub fn bigram(&self, a: char, b: char) -> u64 {
        self.bigrams.get(&(a, b)).copied().unwrap_or(0)
    }

    /// Pointwise mutual information `ln P(ab) - ln P(a) - ln P(b)`.
    ///
    /// `P(ab)` is the raw relative bigram frequency, so an unseen pair has
    /// PMI `-inf`. Unigram probabilities are add-one smoothed over the
    /// observed alphabet plus one unseen symbol.
    pub fn pmi(&self, a: char, b: char) -> f64 {
        let ab = self.bigram(a, b);
        if ab == 0 || self.bigram_total == 0 {
            return f64::NEG_INFINITY;
        }
        let den = (self.unigram_total + self.unigrams.len() as u64 + 1) as f64;
        let pa = (self.unigram(a) + 1) as f64 / den;
        let pb = (self.unigram(b) + 1) as f64 / den;
        (ab as f64 / self.bigram_total as f64).ln() - pa.ln() - pb.ln()
    }
}

/// Cuts between adjacent characters whose PMI is below 0.
pub fn ngram_segment(counts: &BigramCounts, text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        current.push(c);
        let cut = match chars.get(i + 1) {
            Some(&next) => counts.pmi(c, next) < 0.0,
            None => true,
        };
        if cut {
            out.push(std::mem::take(&mut current));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn exact_word() {
        assert_eq!(max_match_segment(&dict(&["主变"]), "主变", 4), vec!["主变"]);
    }

    #[test]
    fn empty_dictionary_gives_chars() {
        assert_eq!(
            max_match_segment(&HashSet::new(), "主变漏油", 4),
            vec!["主", "变", "漏", "油"]
        );
    }

    #[test]
    fn bidirectional_tie_prefers_forward() {
        let d = dict(&["AB", "BC"]);
        assert_eq!(forward_max_match(&d, "ABC", 3), vec!["AB", "C"]);
        assert_eq!(backward_max_match(&d, "ABC", 3), vec!["A", "BC"]);
        assert_eq!(max_match_segment(&d, "ABC", 3), vec!["AB", "C"]);
    }

    #[test]
    fn bidirectional_prefers_fewer_singles() {
        let d = dict(&["AB", "BCD", "CDE"]);
        assert_eq!(forward_max_match(&d, "ABCDE", 3), vec!["AB", "CDE"]);
        assert_eq!(backward_max_match(&d, "ABCDE", 3), vec!["AB", "CDE"]);
        let d = dict(&["AB", "BCDE"]);
        // fwd: AB|C|D|E (3 singles); bwd: A|BCDE (1 single)
        assert_eq!(max_match_segment(&d, "ABCDE", 4), vec!["A", "BCDE"]);
    }

    #[test]
    fn max_len_limits_match() {
        assert_eq!(
            forward_max_match(&dict(&["ABC"]), "ABC", 2),
            vec!["A", "B", "C"]
        );
    }

    #[test]
    fn ngram_single_char() {
        let counts = BigramCounts::from_sentences(["AB"]);
        assert_eq!(ngram_segment(&counts, "A"), vec!["A"]);
        assert!(ngram_segment(&counts, "").is_empty());
    }

    #[test]
    fn unseen_bigram_always_cut() {
        let counts = BigramCounts::from_sentences(["AB", "AB"]);
        assert_eq!(counts.pmi('B', 'A'), f64::NEG_INFINITY);
        assert_eq!(ngram_segment(&counts, "BA"), vec!["B", "A"]);
    }

    #[test]
    fn frequent_bigram_kept_joined() {
        // unigrams A3 B3 X7 Y7: N1 = 20, |V| = 4, den = 25.
        // bigrams AB3 BX3 XY6 YX3: N2 = 15.
        let counts = BigramCounts::from_sentences(["ABXY", "ABXY", "ABXY", "XYXY", "YXYX"]);
        assert_eq!(counts.unigram('A'), 3);
        assert_eq!(counts.unigram('X'), 7);
        assert_eq!(counts.bigram('A', 'B'), 3);
        assert_eq!(counts.bigram('B', 'X'), 3);
        assert_eq!(counts.bigram('X', 'Y'), 6);
        assert_eq!(counts.bigram('Y', 'X'), 3);
        // PMI(A,B) = ln(3/15) - 2 ln(4/25) = ln(0.2 / 0.0256) > 0.
        assert!((counts.pmi('A', 'B') - (0.2f64 / 0.0256).ln()).abs() < 1e-12);
        // B-Y and Y-A never occur.
        assert_eq!(ngram_segment(&counts, "ABYA"), vec!["AB", "Y", "A"]);
    }

    #[test]
    fn rare_pair_of_frequent_chars_is_cut() {
        // X and Y are very frequent but meet once: P(XY) = 1/N2 < P(X)P(Y).
        let mut sentences = vec!["XY".to_string()];
        sentences.extend(std::iter::repeat_n("XXAXX".to_string(), 5));
        sentences.extend(std::iter::repeat_n("YYBYY".to_string(), 5));
        let counts = BigramCounts::from_sentences(&sentences);
        // unigrams X21 Y21 A5 B5 (N1 = 52, den = 57); bigrams N2 = 41, XY = 1.
        let expected = (1.0f64 / 41.0).ln() - 2.0 * (22.0f64 / 57.0).ln();
        assert!((counts.pmi('X', 'Y') - expected).abs() < 1e-12);
        assert!(expected < 0.0);
        assert_eq!(ngram_segment(&counts, "XY"), vec!["X", "Y"]);
    }
}
