//! Hazard statistics and rule-based risk prediction over record sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::record_ingest::HazardRecord;

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("keyword list for {0} is empty")]
    EmptyKeywords(HazardType),
    #[error("rule {rule_id:?}: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn read(path: &Path) -> Result<String, AnalyticsError> {
    std::fs::read_to_string(path).map_err(|source| AnalyticsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The six substation hazard types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HazardType {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
}

impl HazardType {
    pub const ALL: [HazardType; 6] = [
        HazardType::E1,
        HazardType::E2,
        HazardType::E3,
        HazardType::E4,
        HazardType::E5,
        HazardType::E6,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        ["E1", "E2", "E3", "E4", "E5", "E6"][self.index()]
    }

    pub fn name(self) -> &'static str {
        [
            "winding_deformation",
            "fault_shutdown",
            "protection_misoperation",
            "drainage_line_falloff",
            "pollution_rain_flashover",
            "mechanism_pressure_relief",
        ][self.index()]
    }
}

impl fmt::Display for HazardType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for HazardType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HazardType::ALL
            .into_iter()
            .find(|t| t.code().eq_ignore_ascii_case(s) || t.name() == s)
            .ok_or_else(|| format!("unknown hazard type {s:?}"))
    }
}

/// Classification keywords per hazard type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HazardKeywords(BTreeMap<HazardType, Vec<String>>);

impl Default for HazardKeywords {
    fn default() -> Self {
        let lists: [&[&str]; 6] = [
            &["winding deformation", "绕组变形"],
            &["fault shutdown", "shutdown", "tripped", "停运", "跳闸"],
            &[
                "protection misoperation",
                "misoperation",
                "maloperation",
                "误动",
                "拒动",
            ],
            &["drainage line", "falling off", "fell off", "引流线", "脱落"],
            &[
                "pollution flashover",
                "rain flashover",
                "flashover",
                "污闪",
                "雨闪",
                "闪络",
            ],
            &["pressure relief", "pressure release", "泄压", "压力释放"],
        ];
        Self(
            HazardType::ALL
                .into_iter()
                .zip(lists)
                .map(|(t, l)| (t, l.iter().map(|s| s.to_string()).collect()))
                .collect(),
        )
    }
}

impl HazardKeywords {
    /// Every type needs at least one non-blank keyword.
    pub fn new(map: BTreeMap<HazardType, Vec<String>>) -> Result<Self, AnalyticsError> {
        for t in HazardType::ALL {
            let ok = map
                .get(&t)
                .is_some_and(|l| l.iter().any(|k| !k.trim().is_empty()));
            if !ok {
                return Err(AnalyticsError::EmptyKeywords(t));
            }
        }
        Ok(Self(map))
    }

    pub fn from_json(text: &str) -> Result<Self, AnalyticsError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, AnalyticsError> {
        Self::from_json(&read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("keywords serialize")
    }

    pub fn keywords(&self, t: HazardType) -> &[String] {
        self.0.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// First type, in E1..E6 order, with a keyword contained
    /// (case-insensitively) in the content or the category.
    pub fn classify(&self, record: &HazardRecord) -> Option<HazardType> {
        let haystacks = [
            record.hazard_content.to_lowercase(),
            record.detail_category.to_lowercase(),
        ];
        HazardType::ALL.into_iter().find(|&t| {
            self.keywords(t).iter().any(|k| {
                let k = k.trim().to_lowercase();
                !k.is_empty() && haystacks.iter().any(|h| h.contains(&k))
            })
        })
    }
}

/// [`HazardKeywords::classify`] with the default keyword lists.
pub fn classify_hazard(record: &HazardRecord) -> Option<HazardType> {
    HazardKeywords::default().classify(record)
}

/// Per-type, per-calendar-month hazard counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonthlyStats {
    counts: [[u64; 12]; 6],
    months_covered: BTreeSet<u32>,
}

impl MonthlyStats {
    /// Records a hazard of type `t` in `month` (1–12).
    pub fn add(&mut self, t: HazardType, month: u32) {
        assert!((1..=12).contains(&month), "month {month} out of range");
        self.counts[t.index()][month as usize - 1] += 1;
        self.months_covered.insert(month);
    }

    /// Marks `month` as observed without counting a hazard.
    pub fn cover(&mut self, month: u32) {
        assert!((1..=12).contains(&month), "month {month} out of range");
        self.months_covered.insert(month);
    }

    pub fn count(&self, t: HazardType, month: u32) -> u64 {
        match month {
            1..=12 => self.counts[t.index()][month as usize - 1],
            _ => 0,
        }
    }

    pub fn total(&self, t: HazardType) -> u64 {
        self.counts[t.index()].iter().sum()
    }

    pub fn grand_total(&self) -> u64 {
        HazardType::ALL.into_iter().map(|t| self.total(t)).sum()
    }

    pub fn months_covered(&self) -> &BTreeSet<u32> {
        &self.months_covered
    }

    /// Same counts with every value multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        let mut s = self.clone();
        for row in &mut s.counts {
            for c in row {
                *c *= k;
            }
        }
        s
    }
}

/// Records left out of [`monthly_counts`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionReport {
    pub without_month: Vec<String>,
    pub without_type: Vec<String>,
}

/// Counts classified, dated records by type and month.
///
/// Every month seen on a dated record counts as covered. Undated records
/// and records that match no type are excluded and listed by id (an
/// undated record is listed only under `without_month`).
pub fn monthly_counts(
    records: &[HazardRecord],
    keywords: &HazardKeywords,
) -> (MonthlyStats, ExclusionReport) {
    let mut stats = MonthlyStats::default();
    let mut excluded = ExclusionReport::default();
    for r in records {
        let Some(month) = r.month() else {
            excluded.without_month.push(r.id.clone());
            continue;
        };
        stats.cover(month);
        match keywords.classify(r) {
            Some(t) => stats.add(t, month),
            None => excluded.without_type.push(r.id.clone()),
        }
    }
    (stats, excluded)
}

/// Default factor of [`seasonal_flags`].
pub const DEFAULT_SEASONAL_FACTOR: f64 = 1.5;

/// `(type, month)` pairs whose count exceeds `factor` times the type's
/// mean count over the covered months.
///
/// The comparison is done as `count · |months| > factor · total`, so an
/// exact number type (such as a rational) gives exact flags. Returns
/// nothing when no month is covered.
pub fn seasonal_flags<N>(stats: &MonthlyStats, factor: N) -> Vec<(HazardType, u32)>
where
    N: Num + FromPrimitive + PartialOrd + Copy,
{
    let months = stats.months_covered();
    let Some(n) = N::from_usize(months.len()) else {
        return Vec::new();
    };
    let mut flags = Vec::new();
    for t in HazardType::ALL {
        let total = N::from_u64(stats.total(t)).expect("count fits the number type");
        for &m in months {
            let c = N::from_u64(stats.count(t, m)).expect("count fits the number type");
            if c * n > factor * total {
                flags.push((t, m));
            }
        }
    }
    flags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

/// `attribute comparator value` over the record's `extra` map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRule {
    pub rule_id: String,
    pub attribute: String,
    pub comparator: Comparator,
    pub value: String,
    pub hazard_type: HazardType,
    pub advisory: String,
}

fn normalize_bool(s: &str) -> Option<bool> {
    match s.trim().to_lowercase().as_str() {
        "true" | "yes" | "y" | "是" => Some(true),
        "false" | "no" | "n" | "否" => Some(false),
        _ => None,
    }
}

impl PredictionRule {
    /// Ordering comparators need a numeric value; `==`/`!=` compare
    /// numbers, booleans (true/yes, false/no) or case-insensitive text.
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let err = |reason: &str| AnalyticsError::InvalidRule {
            rule_id: self.rule_id.clone(),
            reason: reason.to_string(),
        };
        if self.rule_id.trim().is_empty() {
            return Err(err("empty rule id"));
        }
        if self.attribute.trim().is_empty() {
            return Err(err("empty attribute"));
        }
        let ordering = matches!(
            self.comparator,
            Comparator::Gt | Comparator::Ge | Comparator::Lt | Comparator::Le
        );
        if ordering && self.value.trim().parse::<f64>().is_err() {
            return Err(err("ordering comparator needs a numeric value"));
        }
        Ok(())
    }

    /// Whether the rule holds for `record`; a missing or unparsable
    /// attribute never satisfies it.
    pub fn holds(&self, record: &HazardRecord) -> bool {
        let Some(actual) = record.extra.get(&self.attribute) else {
            return false;
        };
        let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
        match self.comparator {
            Comparator::Eq | Comparator::Ne => {
                let same = match (num(actual), num(&self.value)) {
                    (Some(a), Some(b)) => a == b,
                    _ => match (normalize_bool(actual), normalize_bool(&self.value)) {
                        (Some(a), Some(b)) => a == b,
                        _ => actual.trim().to_lowercase() == self.value.trim().to_lowercase(),
                    },
                };
                same == (self.comparator == Comparator::Eq)
            }
            ordering => {
                let (Some(a), Some(b)) = (num(actual), num(&self.value)) else {
                    return false;
                };
                match ordering {
                    Comparator::Gt => a > b,
                    Comparator::Ge => a >= b,
                    Comparator::Lt => a < b,
                    _ => a <= b,
                }
            }
        }
    }
}

fn rule(
    id: &str,
    attribute: &str,
    comparator: Comparator,
    value: &str,
    t: HazardType,
    advisory: &str,
) -> PredictionRule {
    PredictionRule {
        rule_id: id.into(),
        attribute: attribute.into(),
        comparator,
        value: value.into(),
        hazard_type: t,
        advisory: advisory.into(),
    }
}

/// The six shipped rules, one per hazard type.
pub fn default_rules() -> Vec<PredictionRule> {
    use Comparator::*;
    use HazardType::*;
    vec![
        rule(
            "near_area_short_circuit",
            "near_area_short_circuits",
            Ge,
            "2",
            E1,
            "Repeated near-area short circuits at the line exit: check the transformer for winding deformation.",
        ),
        rule(
            "long_service",
            "years_in_service",
            Gt,
            "15",
            E2,
            "In service for more than 15 years: prone to malfunction and fault shutdown.",
        ),
        rule(
            "rainproof_missing",
            "rainproof_implemented",
            Eq,
            "false",
            E3,
            "Rainproof measures not implemented: risk of protection misoperation.",
        ),
        rule(
            "clamp_loose",
            "clamp_loose",
            Eq,
            "true",
            E4,
            "Loose clamp: the drainage line may fall off.",
        ),
        rule(
            "creepage_insufficient",
            "creepage_ok",
            Eq,
            "false",
            E5,
            "Creepage distance insufficient: risk of pollution or rain flashover.",
        ),
        rule(
            "overhaul_overdue",
            "overhaul_overdue",
            Eq,
            "true",
            E6,
            "Overhaul period exceeded: risk of mechanism pressure relief.",
        ),
    ]
}

pub fn rules_from_json(text: &str) -> Result<Vec<PredictionRule>, AnalyticsError> {
    let rules: Vec<PredictionRule> = serde_json::from_str(text)?;
    let mut ids = BTreeSet::new();
    for r in &rules {
        r.validate()?;
        if !ids.insert(r.rule_id.as_str()) {
            return Err(AnalyticsError::InvalidRule {
                rule_id: r.rule_id.clone(),
                reason: "duplicate rule id".into(),
            });
        }
    }
    Ok(rules)
}

pub fn load_rules(path: &Path) -> Result<Vec<PredictionRule>, AnalyticsError> {
    rules_from_json(&read(path)?)
}

pub fn rules_to_json(rules: &[PredictionRule]) -> String {
    serde_json::to_string_pretty(rules).expect("rules serialize")
}

/// One fired rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Advisory {
    pub record_id: String,
    pub rule_id: String,
    pub hazard_type: HazardType,
    pub advisory: String,
}

/// Advisories of every rule that holds, in rule order.
pub fn predict_risks(record: &HazardRecord, rules: &[PredictionRule]) -> Vec<Advisory> {
    rules
        .iter()
        .filter(|r| r.holds(record))
        .map(|r| Advisory {
            record_id: record.id.clone(),
            rule_id: r.rule_id.clone(),
            hazard_type: r.hazard_type,
            advisory: r.advisory.clone(),
        })
        .collect()
}

const MONTH_NAMES: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

pub fn month_name(month: u32) -> &'static str {
    MONTH_NAMES[(month as usize).clamp(1, 12) - 1]
}

/// Month × type table for people and `month,type,count` CSV for plotting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsReport {
    pub table: String,
    pub csv: String,
}

/// Renders `stats`; the CSV has one row per covered month and type.
pub fn stats_report(stats: &MonthlyStats) -> StatsReport {
    let mut table = String::from("month");
    for t in HazardType::ALL {
        let _ = write!(table, "{:>6}", t.code());
    }
    table.push_str("  total\n");
    let mut csv = String::from("month,type,count\n");
    for &m in stats.months_covered() {
        let _ = write!(table, "{:<5}", month_name(m));
        let mut row = 0;
        for t in HazardType::ALL {
            let c = stats.count(t, m);
            row += c;
            let _ = write!(table, "{c:>6}");
            let _ = writeln!(csv, "{m},{},{c}", t.code());
        }
        let _ = writeln!(table, "{row:>7}");
    }
    table.push_str("total");
    for t in HazardType::ALL {
        let _ = write!(table, "{:>6}", stats.total(t));
    }
    let _ = writeln!(table, "{:>7}", stats.grand_total());
    StatsReport { table, csv }
}
