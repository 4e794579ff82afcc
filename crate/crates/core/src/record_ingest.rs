//! Header/data extraction from flattened inspection tables.
//!
//! Hazard investigation forms arrive as plain text in which the table grid
//! has been replaced by runs of spaces and line breaks. A table cell is
//! either a *header* (the title area, e.g. `equipment name`) or a *data
//! area* holding its value. Headers are recognised from an exact-match
//! [`HeaderLexicon`]; everything between one recognised header and the next
//! is that header's value.
//!
//! A header is only recognised at a cell boundary: at the start of the text,
//! after a line break, or after a run of two or more blanks. It must be
//! followed by whitespace, a colon, or the end of the text. Single spaces
//! inside a value therefore never split it, even when the value happens to
//! contain a header phrase.
//!
//! One form may hold several records. A new record starts whenever a field
//! that was already filled in the current record appears again (one record
//! per header cycle), see [`split_records`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::{Datelike, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{source_name}: input is not valid UTF-8 (at byte {valid_up_to})")]
    Decode {
        source_name: String,
        valid_up_to: usize,
    },
    #[error("header lexicon is empty")]
    EmptyLexicon,
    #[error("record id must not be empty")]
    EmptyId,
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("malformed record document at line {line}: {source}")]
    Document {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Text of one flattened table file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTableText {
    pub content: String,
    pub source_name: String,
}

impl RawTableText {
    pub fn new(content: impl Into<String>, source_name: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            source_name: source_name.into(),
        }
    }

    /// Decodes UTF-8 bytes, rejecting malformed input.
    pub fn from_bytes(bytes: Vec<u8>, source_name: impl Into<String>) -> Result<Self, IngestError> {
        let source_name = source_name.into();
        match String::from_utf8(bytes) {
            Ok(content) => Ok(Self {
                content,
                source_name,
            }),
            Err(e) => Err(IngestError::Decode {
                source_name,
                valid_up_to: e.utf8_error().valid_up_to(),
            }),
        }
    }
}

/// Fields of [`HazardRecord`] that a header can fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeaderField {
    InspectTime,
    Location,
    EquipmentName,
    HazardContent,
    DetailCategory,
    ViolationInfo,
    SeverityLevel,
    ControlMeasures,
    VoltageClass,
}

/// Fixed header → field table. Headers outside this table end up in
/// [`HazardRecord::extra`].
const HEADER_FIELDS: &[(&str, HeaderField)] = &[
    ("hidden danger investigation time", HeaderField::InspectTime),
    ("investigation time", HeaderField::InspectTime),
    ("investigation place", HeaderField::Location),
    ("hidden danger investigation place", HeaderField::Location),
    ("equipment name", HeaderField::EquipmentName),
    ("accident hidden danger content", HeaderField::HazardContent),
    ("hidden danger content", HeaderField::HazardContent),
    (
        "detailed classification of hidden dangers",
        HeaderField::DetailCategory,
    ),
    ("violation information", HeaderField::ViolationInfo),
    ("evaluation level", HeaderField::SeverityLevel),
    (
        "prevention and control measures",
        HeaderField::ControlMeasures,
    ),
    ("voltage class", HeaderField::VoltageClass),
    ("隐患排查时间", HeaderField::InspectTime),
    ("排查时间", HeaderField::InspectTime),
    ("排查地点", HeaderField::Location),
    ("设备名称", HeaderField::EquipmentName),
    ("事故隐患内容", HeaderField::HazardContent),
    ("隐患内容", HeaderField::HazardContent),
    ("隐患详细分类", HeaderField::DetailCategory),
    ("违章信息", HeaderField::ViolationInfo),
    ("评估等级", HeaderField::SeverityLevel),
    ("防控措施", HeaderField::ControlMeasures),
    ("电压等级", HeaderField::VoltageClass),
];

impl HeaderField {
    pub fn for_header(header: &str) -> Option<Self> {
        HEADER_FIELDS
            .iter()
            .find(|(h, _)| *h == header)
            .map(|(_, f)| *f)
    }

    /// Document key of the field.
    pub fn key(self) -> &'static str {
        match self {
            HeaderField::InspectTime => "inspect_time",
            HeaderField::Location => "location",
            HeaderField::EquipmentName => "equipment_name",
            HeaderField::HazardContent => "hazard_content",
            HeaderField::DetailCategory => "detail_category",
            HeaderField::ViolationInfo => "violation_info",
            HeaderField::SeverityLevel => "severity_level",
            HeaderField::ControlMeasures => "control_measures",
            HeaderField::VoltageClass => "voltage_class",
        }
    }
}

/// Set of header strings recognised by [`parse_table`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderLexicon {
    headers: BTreeSet<String>,
}

impl Default for HeaderLexicon {
    /// Every header of the fixed header → field table, in English and Chinese.
    fn default() -> Self {
        Self {
            headers: HEADER_FIELDS.iter().map(|(h, _)| h.to_string()).collect(),
        }
    }
}

impl HeaderLexicon {
    pub fn new<I, S>(headers: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let headers: BTreeSet<String> = headers
            .into_iter()
            .map(Into::into)
            .map(|h| h.trim().to_string())
            .filter(|h| !h.is_empty())
            .collect();
        if headers.is_empty() {
            return Err(IngestError::EmptyLexicon);
        }
        Ok(Self { headers })
    }

    /// One header per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Result<Self, IngestError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn contains(&self, header: &str) -> bool {
        self.headers.contains(header)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.headers.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.headers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headers.is_empty()
    }
}

/// One header together with the data area that follows it.
///
/// Spans are half-open character (not byte) offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderDataPair {
    pub header: String,
    pub value: String,
    pub header_span: (usize, usize),
    pub char_span: (usize, usize),
}

fn is_colon(c: char) -> bool {
    c == ':' || c == '：'
}

fn is_blank(c: char) -> bool {
    c.is_whitespace() && c != '\n'
}

/// True when a cell may start at `i`: start of text, after a newline, or
/// after two or more blanks.
fn at_cell_boundary(chars: &[char], i: usize) -> bool {
    if i == 0 {
        return true;
    }
    let mut blanks = 0;
    let mut j = i;
    while j > 0 {
        let c = chars[j - 1];
        if c == '\n' {
            return true;
        }
        if !is_blank(c) {
            break;
        }
        blanks += 1;
        j -= 1;
    }
    j == 0 || blanks >= 2
}

/// Splits flattened table text into header/value pairs.
///
/// Pairs come back in text order. Text before the first recognised header
/// is not part of any pair.
pub fn parse_table(
    raw: &RawTableText,
    lexicon: &HeaderLexicon,
) -> Result<Vec<HeaderDataPair>, IngestError> {
    if lexicon.is_empty() {
        return Err(IngestError::EmptyLexicon);
    }
    let chars: Vec<char> = raw.content.chars().collect();
    let n = chars.len();

    // Candidates grouped by first char, longest first.
    let mut by_first: HashMap<char, Vec<(Vec<char>, &str)>> = HashMap::new();
    for h in lexicon.iter() {
        let hc: Vec<char> = h.chars().collect();
        by_first.entry(hc[0]).or_default().push((hc, h));
    }
    for list in by_first.values_mut() {
        list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(b.1)));
    }

    let mut headers: Vec<(usize, usize, &str)> = Vec::new();
    let mut i = 0;
    while i < n {
        let matched = by_first.get(&chars[i]).and_then(|cands| {
            if !at_cell_boundary(&chars, i) {
                return None;
            }
            cands.iter().find(|(hc, _)| {
                let end = i + hc.len();
                end <= n
                    && chars[i..end] == hc[..]
                    && (end == n || chars[end].is_whitespace() || is_colon(chars[end]))
            })
        });
        match matched {
            Some((hc, h)) => {
                headers.push((i, i + hc.len(), h));
                i += hc.len();
            }
            None => i += 1,
        }
    }

    let mut pairs = Vec::with_capacity(headers.len());
    for (k, &(hs, he, header)) in headers.iter().enumerate() {
        let region_end = headers.get(k + 1).map_or(n, |next| next.0);
        let mut vs = he;
        while vs < region_end && chars[vs].is_whitespace() {
            vs += 1;
        }
        if vs < region_end && is_colon(chars[vs]) {
            vs += 1;
            while vs < region_end && chars[vs].is_whitespace() {
                vs += 1;
            }
        }
        let mut ve = region_end;
        while ve > vs && chars[ve - 1].is_whitespace() {
            ve -= 1;
        }
        pairs.push(HeaderDataPair {
            header: header.to_string(),
            value: chars[vs..ve].iter().collect(),
            header_span: (hs, he),
            char_span: (vs, ve),
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum FieldKey {
    Known(HeaderField),
    Unknown(String),
}

fn field_key(header: &str) -> FieldKey {
    HeaderField::for_header(header)
        .map_or_else(|| FieldKey::Unknown(header.to_string()), FieldKey::Known)
}

/// Groups pairs into records, one per header cycle.
pub fn split_records(pairs: Vec<HeaderDataPair>) -> Vec<Vec<HeaderDataPair>> {
    let mut records: Vec<Vec<HeaderDataPair>> = Vec::new();
    let mut current: Vec<HeaderDataPair> = Vec::new();
    let mut seen: HashSet<FieldKey> = HashSet::new();
    for pair in pairs {
        let key = field_key(&pair.header);
        if seen.contains(&key) {
            records.push(std::mem::take(&mut current));
            seen.clear();
        }
        seen.insert(key);
        current.push(pair);
    }
    if !current.is_empty() {
        records.push(current);
    }
    records
}

/// Evaluation level of a hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum SeverityLevel {
    I,
    II,
    III,
    #[default]
    Unrated,
}

impl SeverityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLevel::I => "I",
            SeverityLevel::II => "II",
            SeverityLevel::III => "III",
            SeverityLevel::Unrated => "unrated",
        }
    }

    /// Lenient parse of a table value: roman or arabic numerals, optional
    /// `level`/`级` decoration.
    pub fn parse_table_value(value: &str) -> Option<Self> {
        let v = value.trim();
        let v = v
            .strip_prefix("level")
            .or_else(|| v.strip_prefix("Level"))
            .unwrap_or(v)
            .trim();
        let v = v.strip_suffix('级').unwrap_or(v).trim();
        match v {
            "I" | "i" | "1" | "Ⅰ" | "一" => Some(SeverityLevel::I),
            "II" | "ii" | "2" | "Ⅱ" | "二" => Some(SeverityLevel::II),
            "III" | "iii" | "3" | "Ⅲ" | "三" => Some(SeverityLevel::III),
            "" | "unrated" => Some(SeverityLevel::Unrated),
            _ => None,
        }
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeverityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" => Ok(SeverityLevel::I),
            "II" => Ok(SeverityLevel::II),
            "III" => Ok(SeverityLevel::III),
            "unrated" => Ok(SeverityLevel::Unrated),
            other => Err(format!("unknown severity level {other:?}")),
        }
    }
}

impl Serialize for SeverityLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SeverityLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One normalised hidden-danger report.
///
/// Serialises to the `records.jsonl` schema; key names and order are fixed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardRecord {
    pub id: String,
    #[serde(default)]
    pub inspect_time: Option<NaiveDate>,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub equipment_name: String,
    #[serde(default)]
    pub hazard_content: String,
    #[serde(default)]
    pub detail_category: String,
    #[serde(default)]
    pub violation_info: String,
    #[serde(default)]
    pub severity_level: SeverityLevel,
    #[serde(default)]
    pub control_measures: String,
    #[serde(default)]
    pub voltage_class: Option<String>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

/// Prefix of [`HazardRecord::extra`] keys that flag a field value which
/// could not be interpreted. The raw value is kept as the entry's value.
pub const WARNING_PREFIX: &str = "warning.";

impl HazardRecord {
    pub fn new(id: impl Into<String>, hazard_content: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            hazard_content: hazard_content.into(),
            ..Self::default()
        }
    }

    /// Calendar month (1–12) of the inspection, if the date is known.
    pub fn month(&self) -> Option<u32> {
        self.inspect_time.map(|d| d.month())
    }

    pub fn warnings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.extra
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(WARNING_PREFIX).map(|f| (f, v.as_str())))
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.id.trim().is_empty() {
            return Err(IngestError::EmptyId);
        }
        if self.hazard_content.trim().is_empty() {
            return Err(IngestError::InvalidRecord {
                id: self.id.clone(),
                reason: "hazard_content is empty".into(),
            });
        }
        Ok(())
    }

    /// Text fed to the full-text index, one field per line.
    pub fn searchable_text(&self) -> String {
        [
            self.equipment_name.as_str(),
            self.hazard_content.as_str(),
            self.detail_category.as_str(),
            self.control_measures.as_str(),
        ]
        .join("\n")
    }
}

/// Accepts `YYYY-MM-DD` and `YYYY/MM/DD`.
pub fn parse_date(value: &str) -> Option<NaiveDate> {
    let v = value.trim();
    NaiveDate::parse_from_str(v, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(v, "%Y/%m/%d"))
        .ok()
}

static VOLTAGE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d+(?:\.\d+)?)\s*[kK][vV]").expect("static regex"));

/// Voltage classes mentioned in `text`, normalised to `<n>kV`, in order of
/// first appearance.
pub fn voltage_classes(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for cap in VOLTAGE_RE.captures_iter(text) {
        let v = format!("{}kV", &cap[1]);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Builds a record from one header cycle.
///
/// Never fails on content: missing fields stay empty, unknown headers are
/// kept in `extra`, and values that cannot be interpreted (a bad date, an
/// unknown severity) are flagged under `warning.<field>`. When no voltage
/// class header is present, the first voltage mentioned in the location,
/// equipment name or content is used.
pub fn assemble_record(pairs: &[HeaderDataPair], id: &str) -> Result<HazardRecord, IngestError> {
    if id.trim().is_empty() {
        return Err(IngestError::EmptyId);
    }
    let mut rec = HazardRecord {
        id: id.to_string(),
        ..HazardRecord::default()
    };
    let mut filled: HashSet<HeaderField> = HashSet::new();
    for pair in pairs {
        let value = pair.value.clone();
        let Some(field) = HeaderField::for_header(&pair.header) else {
            rec.extra
                .entry(pair.header.clone())
                .and_modify(|v| {
                    v.push('\n');
                    v.push_str(&value);
                })
                .or_insert(value);
            continue;
        };
        if !filled.insert(field) {
            // Second header for the same field within one cycle.
            rec.extra.insert(pair.header.clone(), value);
            continue;
        }
        match field {
            HeaderField::InspectTime => match parse_date(&value) {
                Some(d) => rec.inspect_time = Some(d),
                None => {
                    rec.extra
                        .insert(format!("{WARNING_PREFIX}{}", field.key()), value);
                }
            },
            HeaderField::Location => rec.location = value,
            HeaderField::EquipmentName => rec.equipment_name = value,
            HeaderField::HazardContent => rec.hazard_content = value,
            HeaderField::DetailCategory => rec.detail_category = value,
            HeaderField::ViolationInfo => rec.violation_info = value,
            HeaderField::SeverityLevel => match SeverityLevel::parse_table_value(&value) {
                Some(level) => rec.severity_level = level,
                None => {
                    rec.extra
                        .insert(format!("{WARNING_PREFIX}{}", field.key()), value);
                }
            },
            HeaderField::ControlMeasures => rec.control_measures = value,
            HeaderField::VoltageClass => {
                rec.voltage_class = Some(voltage_classes(&value).join("/"))
                    .filter(|v| !v.is_empty())
                    .or(Some(value));
            }
        }
    }
    if rec.voltage_class.is_none() {
        rec.voltage_class = [&rec.location, &rec.equipment_name, &rec.hazard_content]
            .iter()
            .find_map(|t| voltage_classes(t).into_iter().next());
    }
    Ok(rec)
}

/// Serialises a record as a single-line document.
pub fn to_document(record: &HazardRecord) -> String {
    serde_json::to_string(record).expect("record serialisation is infallible")
}

pub fn from_document(doc: &str) -> Result<HazardRecord, serde_json::Error> {
    serde_json::from_str(doc)
}

/// Parses every record of one table file. Record ids are
/// `<id_prefix>-<n>` with `n` counting from 1.
pub fn ingest_table(
    raw: &RawTableText,
    lexicon: &HeaderLexicon,
    id_prefix: &str,
) -> Result<Vec<HazardRecord>, IngestError> {
    let pairs = parse_table(raw, lexicon)?;
    split_records(pairs)
        .iter()
        .enumerate()
        .map(|(i, group)| assemble_record(group, &format!("{id_prefix}-{}", i + 1)))
        .collect()
}

pub fn check_unique_ids<'a, I>(records: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = &'a HazardRecord>,
{
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(IngestError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

pub fn write_records<'a, W, I>(mut out: W, records: I) -> Result<(), IngestError>
where
    W: Write,
    I: IntoIterator<Item = &'a HazardRecord>,
{
    for r in records {
        out.write_all(to_document(r).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a `records.jsonl` stream; blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<HazardRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = from_document(&line).map_err(|source| IngestError::Document {
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}
