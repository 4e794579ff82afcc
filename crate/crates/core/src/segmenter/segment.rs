use super::model::HmmModel;
use super::tags::{tags_to_words, CharSequence};
use super::viterbi::viterbi_decode;
use crate::scalar::Scalar;

/// Characters that end a sentence; each is emitted as its own token.
pub const SENTENCE_PUNCTUATION: [char; 11] =
    ['。', '，', '；', '！', '？', ',', '.', ';', '!', '?', '\n'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Word cut by the HMM.
    Word,
    /// Run of ASCII letters and digits, kept whole.
    Latin,
    Punctuation,
    Whitespace,
}

/// Token with its char offset into the segmented text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Punct,
    Space,
    Latin,
    Other,
}

fn classify(c: char) -> CharClass {
    if SENTENCE_PUNCTUATION.contains(&c) {
        CharClass::Punct
    } else if c.is_whitespace() {
        CharClass::Space
    } else if c.is_ascii_alphanumeric() {
        CharClass::Latin
    } else {
        CharClass::Other
    }
}

/// Segments free text.
///
/// The text is cut at [`SENTENCE_PUNCTUATION`]; inside a sentence, runs of
/// ASCII letters/digits and runs of whitespace pass through as single
/// tokens while every other run of characters is Viterbi-decoded and cut
/// into words. Concatenating the tokens reproduces `text`.
pub fn segment_tokens<F: Scalar>(model: &HmmModel<F>, text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let class = classify(chars[i]);
        if class == CharClass::Punct {
            tokens.push(Token {
                text: chars[i].to_string(),
                start: i,
                kind: TokenKind::Punctuation,
            });
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && classify(chars[j]) == class {
            j += 1;
        }
        match class {
            CharClass::Space | CharClass::Latin => tokens.push(Token {
                text: chars[i..j].iter().collect(),
                start: i,
                kind: if class == CharClass::Space {
                    TokenKind::Whitespace
                } else {
                    TokenKind::Latin
                },
            }),
            _ => {
                let run = CharSequence(chars[i..j].to_vec());
                let tags = viterbi_decode(model, &run);
                let words = tags_to_words(&run, &tags).expect("decoder output has matching length");
                let mut start = i;
                for w in words {
                    let len = w.chars().count();
                    tokens.push(Token {
                        text: w,
                        start,
                        kind: TokenKind::Word,
                    });
                    start += len;
                }
            }
        }
        i = j;
    }
    tokens
}

/// [`segment_tokens`] without offsets.
pub fn segment<F: Scalar>(model: &HmmModel<F>, text: &str) -> Vec<String> {
    segment_tokens(model, text)
        .into_iter()
        .map(|t| t.text)
        .collect()
}
