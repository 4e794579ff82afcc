//! Immutable inverted-index segments and their on-disk encoding.
//!
//! Layout (little endian):
//!
//! ```text
//! "HKSG" u32:version u64:segment_id
//! u32:doc_count  { u32:len bytes:doc_id u32:doc_length }*
//! u32:term_count { u32:record_len record }*
//!     record = u32:len bytes:term u32:postings { u32:doc u32:tf u32:pos* }*
//! u64:fnv1a_64 of everything above
//! ```

use std::collections::{BTreeMap, HashMap};

use super::router::fnv1a_64;

pub const SEGMENT_MAGIC: &[u8; 4] = b"HKSG";
pub const SEGMENT_FORMAT_VERSION: u32 = 1;

/// Occurrences of one term in one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    /// Ordinal into the segment's document table.
    pub doc: u32,
    /// Strictly increasing token positions.
    pub positions: Vec<u32>,
}

impl Posting {
    pub fn term_frequency(&self) -> u32 {
        self.positions.len() as u32
    }
}

/// Posting resolved to its document id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostingEntry<'a> {
    pub doc_id: &'a str,
    pub term_frequency: u32,
    pub positions: &'a [u32],
}

/// Term → postings map over a fixed set of documents.
///
/// The document table is sorted by id and every posting list is sorted
/// by document ordinal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    terms: HashMap<String, Vec<Posting>>,
}

impl InvertedIndex {
    /// Builds from `(doc_id, [(term, position)])`. A later duplicate id
    /// replaces an earlier one.
    pub fn build<I, T>(docs: I) -> Self
    where
        I: IntoIterator<Item = (String, T)>,
        T: IntoIterator<Item = (String, u32)>,
    {
        let mut by_id: BTreeMap<String, Vec<(String, u32)>> = BTreeMap::new();
        for (id, terms) in docs {
            by_id.insert(id, terms.into_iter().collect());
        }
        let mut index = Self::default();
        for (ord, (id, terms)) in by_id.into_iter().enumerate() {
            let ord = ord as u32;
            index.doc_lengths.push(terms.len() as u32);
            index.doc_ids.push(id);
            let mut per_term: BTreeMap<String, Vec<u32>> = BTreeMap::new();
            for (term, pos) in terms {
                per_term.entry(term).or_default().push(pos);
            }
            for (term, mut positions) in per_term {
                positions.sort_unstable();
                positions.dedup();
                index.terms.entry(term).or_default().push(Posting {
                    doc: ord,
                    positions,
                });
            }
        }
        index
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_id(&self, ord: u32) -> &str {
        &self.doc_ids[ord as usize]
    }

    pub fn doc_length(&self, ord: u32) -> u32 {
        self.doc_lengths[ord as usize]
    }

    pub fn ordinal_of(&self, doc_id: &str) -> Option<u32> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(doc_id))
            .ok()
            .map(|o| o as u32)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.terms.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entries<'a>(&'a self, term: &str) -> impl Iterator<Item = PostingEntry<'a>> + 'a {
        self.postings(term).iter().map(move |p| PostingEntry {
            doc_id: &self.doc_ids[p.doc as usize],
            term_frequency: p.term_frequency(),
            positions: &p.positions,
        })
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    /// `(term, position)` stream of one document, in position order.
    pub fn document_terms(&self, ord: u32) -> Vec<(String, u32)> {
        let mut out: Vec<(String, u32)> = self
            .terms
            .iter()
            .flat_map(|(term, postings)| {
                postings
                    .binary_search_by_key(&ord, |p| p.doc)
                    .ok()
                    .map(|i| {
                        postings[i]
                            .positions
                            .iter()
                            .map(move |&p| (term.clone(), p))
                    })
                    .into_iter()
                    .flatten()
            })
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Checks the structural invariants; the message names the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.doc_ids.len() != self.doc_lengths.len() {
            return Err("document table length mismatch".into());
        }
        if self.doc_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err("document ids not strictly sorted".into());
        }
        let mut occurrences = vec![0u64; self.doc_ids.len()];
        for (term, postings) in &self.terms {
            if postings.is_empty() {
                return Err(format!("term {term:?} has no postings"));
            }
            if postings.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return Err(format!("postings of {term:?} not sorted by document"));
            }
            for p in postings {
                let Some(len) = self.doc_lengths.get(p.doc as usize) else {
                    return Err(format!(
                        "posting of {term:?} points past the document table"
                    ));
                };
                if p.positions.is_empty() || p.positions.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(format!("positions of {term:?} not strictly increasing"));
                }
                if p.positions.iter().any(|&pos| pos >= *len) {
                    return Err(format!("position of {term:?} beyond document length"));
                }
                occurrences[p.doc as usize] += p.positions.len() as u64;
            }
        }
        for (ord, (&n, &len)) in occurrences.iter().zip(&self.doc_lengths).enumerate() {
            if n != u64::from(len) {
                return Err(format!(
                    "document {:?} has {n} postings but length {len}",
                    self.doc_ids[ord]
                ));
            }
        }
        Ok(())
    }
}

/// Sealed, immutable segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub id: u64,
    pub index: InvertedIndex,
}

impl Segment {
    pub fn new(id: u64, index: InvertedIndex) -> Self {
        Self { id, index }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SEGMENT_MAGIC);
        put_u32(&mut out, SEGMENT_FORMAT_VERSION);
        out.extend_from_slice(&self.id.to_le_bytes());
        put_u32(&mut out, self.index.doc_ids.len() as u32);
        for (id, &len) in self.index.doc_ids.iter().zip(&self.index.doc_lengths) {
            put_bytes(&mut out, id.as_bytes());
            put_u32(&mut out, len);
        }
        let mut terms: Vec<(&String, &Vec<Posting>)> = self.index.terms.iter().collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(b.0));
        put_u32(&mut out, terms.len() as u32);
        let mut record = Vec::new();
        for (term, postings) in terms {
            record.clear();
            put_bytes(&mut record, term.as_bytes());
            put_u32(&mut record, postings.len() as u32);
            for p in postings {
                put_u32(&mut record, p.doc);
                put_u32(&mut record, p.term_frequency());
                for &pos in &p.positions {
                    put_u32(&mut record, pos);
                }
            }
            put_bytes(&mut out, &record);
        }
        let checksum = fnv1a_64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    /// Decodes and validates; the error describes the first defect.
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < SEGMENT_MAGIC.len() + 4 + 8 + 8 {
            return Err(format!("truncated segment ({} bytes)", bytes.len()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8-byte tail"));
        if fnv1a_64(body) != stored {
            return Err("checksum mismatch".into());
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != SEGMENT_MAGIC {
            return Err("bad magic".into());
        }
        let version = r.u32()?;
        if version != SEGMENT_FORMAT_VERSION {
            return Err(format!("unsupported segment version {version}"));
        }
        let id = r.u64()?;
        let doc_count = r.u32()? as usize;
        let mut index = InvertedIndex::default();
        for _ in 0..doc_count {
            index.doc_ids.push(r.string()?);
            index.doc_lengths.push(r.u32()?);
        }
        let term_count = r.u32()?;
        for _ in 0..term_count {
            let len = r.u32()? as usize;
            let mut rec = Reader {
                buf: r.take(len)?,
                pos: 0,
            };
            let term = rec.string()?;
            let n = rec.u32()?;
            let mut postings = Vec::new();
            for _ in 0..n {
                let doc = rec.u32()?;
                let tf = rec.u32()?;
                let positions = (0..tf).map(|_| rec.u32()).collect::<Result<Vec<_>, _>>()?;
                postings.push(Posting { doc, positions });
            }
            if rec.pos != rec.buf.len() {
                return Err(format!("trailing bytes in record of {term:?}"));
            }
            if index.terms.insert(term.clone(), postings).is_some() {
                return Err(format!("duplicate term {term:?}"));
            }
        }
        if r.pos != body.len() {
            return Err("trailing bytes after term table".into());
        }
        index.check_invariants()?;
        Ok(Self { id, index })
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format!("unexpected end of data at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid UTF-8 string".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, terms: &[&str]) -> (String, Vec<(String, u32)>) {
        (
            id.to_string(),
            terms
                .iter()
                .enumerate()
                .map(|(i, t)| (t.to_string(), i as u32))
                .collect(),
        )
    }

    fn sample() -> Segment {
        Segment::new(
            3,
            InvertedIndex::build(vec![
                doc("b", &["主变", "漏油", "主变"]),
                doc("a", &["漏油"]),
                doc("c", &[]),
            ]),
        )
    }

    #[test]
    fn build_sorts_and_counts() {
        let s = sample();
        s.index.check_invariants().unwrap();
        assert_eq!(s.index.doc_ids(), ["a", "b", "c"]);
        let e: Vec<_> = s.index.entries("主变").collect();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].doc_id, "b");
        assert_eq!(e[0].term_frequency, 2);
        assert_eq!(e[0].positions, [0, 2]);
        assert_eq!(s.index.entries("漏油").count(), 2);
        assert_eq!(s.index.postings("missing").len(), 0);
    }

    #[test]
    fn document_terms_round_trip() {
        let s = sample();
        let b = s.index.ordinal_of("b").unwrap();
        let terms: Vec<_> = s
            .index
            .document_terms(b)
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        assert_eq!(terms, ["主变", "漏油", "主变"]);
    }

    #[test]
    fn encode_decode() {
        let s = sample();
        let bytes = s.encode();
        assert_eq!(&bytes[..4], SEGMENT_MAGIC);
        assert_eq!(Segment::decode(&bytes).unwrap(), s);
        // Encoding is canonical.
        assert_eq!(Segment::decode(&bytes).unwrap().encode(), bytes);
    }

    #[test]
    fn truncation_and_corruption_detected() {
        let bytes = sample().encode();
        for cut in [0, 4, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(Segment::decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[bytes.len() / 2] ^= 0x40;
        assert_eq!(Segment::decode(&flipped).unwrap_err(), "checksum mismatch");
    }

    #[test]
    fn invariant_violation_reported() {
        let mut idx = sample().index;
        idx.doc_lengths[0] += 1;
        assert!(idx.check_invariants().unwrap_err().contains("length"));
    }
}
