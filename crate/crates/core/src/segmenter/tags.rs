use std::fmt;

use super::SegmentError;

/// Word-position tag of one character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Tag {
    B = 0,
    M = 1,
    E = 2,
    S = 3,
}

impl Tag {
    pub const ALL: [Tag; 4] = [Tag::B, Tag::M, Tag::E, Tag::S];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    /// Tags a sentence may start with.
    pub const fn can_start(self) -> bool {
        matches!(self, Tag::B | Tag::S)
    }

    /// Tags a sentence may end with.
    pub const fn can_end(self) -> bool {
        matches!(self, Tag::E | Tag::S)
    }

    /// BMES grammar: B/M continue a word, E/S close it.
    pub const fn can_precede(self, next: Tag) -> bool {
        match self {
            Tag::B | Tag::M => matches!(next, Tag::M | Tag::E),
            Tag::E | Tag::S => matches!(next, Tag::B | Tag::S),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Tag::B => 'B',
            Tag::M => 'M',
            Tag::E => 'E',
            Tag::S => 'S',
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Observation sequence: the characters of one sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CharSequence(pub Vec<char>);

impl CharSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[char] {
        &self.0
    }
}

impl From<&str> for CharSequence {
    fn from(s: &str) -> Self {
        CharSequence(s.chars().collect())
    }
}

impl fmt::Display for CharSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// State sequence paired with a [`CharSequence`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TagSequence(pub Vec<Tag>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Tag] {
        &self.0
    }

    /// Position of the first grammar violation, if any.
    pub fn first_violation(&self) -> Option<usize> {
        let tags = &self.0;
        if let Some(first) = tags.first() {
            if !first.can_start() {
                return Some(0);
            }
        }
        for (i, w) in tags.windows(2).enumerate() {
            if !w[0].can_precede(w[1]) {
                return Some(i + 1);
            }
        }
        match tags.last() {
            Some(last) if !last.can_end() => Some(tags.len() - 1),
            _ => None,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.first_violation().is_none()
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|t| write!(f, "{t}"))
    }
}

/// Converts a gold segmentation into characters and their tags.
pub fn words_to_tags<S: AsRef<str>>(
    words: &[S],
) -> Result<(CharSequence, TagSequence), SegmentError> {
    let mut chars = Vec::new();
    let mut tags = Vec::new();
    for (index, word) in words.iter().enumerate() {
        let start = chars.len();
        chars.extend(word.as_ref().chars());
        match chars.len() - start {
            0 => return Err(SegmentError::EmptyWord { index }),
            1 => tags.push(Tag::S),
            k => {
                tags.push(Tag::B);
                tags.extend(std::iter::repeat_n(Tag::M, k - 2));
                tags.push(Tag::E);
            }
        }
    }
    Ok((CharSequence(chars), TagSequence(tags)))
}

/// Cuts characters into words after every `E` and `S`.
///
/// Ill-formed runs are repaired by forcing a cut: a `B` or `S` that arrives
/// while a word is still open closes that word first, and an open word at
/// the end of the input is emitted as is. The concatenation of the output
/// always equals the input.
pub fn tags_to_words(
    chars: &CharSequence,
    tags: &TagSequence,
) -> Result<Vec<String>, SegmentError> {
    if chars.len() != tags.len() {
        return Err(SegmentError::LengthMismatch {
            chars: chars.len(),
            tags: tags.len(),
        });
    }
    let mut words = Vec::new();
    let mut current = String::new();
    for (&c, &t) in chars.0.iter().zip(&tags.0) {
        if matches!(t, Tag::B | Tag::S) && !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
        current.push(c);
        if matches!(t, Tag::E | Tag::S) {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    Ok(words)
}

/// Sentences with gold tags, the training input of [`super::train_hmm`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub sentences: Vec<(CharSequence, TagSequence)>,
}

impl TaggedCorpus {
    /// Adds a sentence, checking length and grammar.
    pub fn push(&mut self, chars: CharSequence, tags: TagSequence) -> Result<(), SegmentError> {
        if chars.len() != tags.len() {
            return Err(SegmentError::LengthMismatch {
                chars: chars.len(),
                tags: tags.len(),
            });
        }
        if let Some(position) = tags.first_violation() {
            return Err(SegmentError::IllFormedTags { position });
        }
        self.sentences.push((chars, tags));
        Ok(())
    }

    pub fn push_words<S: AsRef<str>>(&mut self, words: &[S]) -> Result<(), SegmentError> {
        let (chars, tags) = words_to_tags(words)?;
        self.push(chars, tags)
    }

    /// Gold corpus text: one sentence per line, words separated by spaces.
    pub fn from_gold_text(text: &str) -> Result<Self, SegmentError> {
        let mut corpus = TaggedCorpus::default();
        for line in text.lines() {
            let words = gold_words(line);
            if !words.is_empty() {
                corpus.push_words(&words)?;
            }
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Words of one gold corpus line.
pub(crate) fn gold_words(line: &str) -> Vec<&str> {
    line.split(' ').filter(|w| !w.is_empty()).collect()
}
