use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{normalize_label, EntityCategory};
use super::KgError;

/// Per-category term lists used to recognise entities in free text.
///
/// `hazard_category` maps each canonical category label to the aliases
/// that select it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicons {
    pub equipment: Vec<String>,
    pub hazard_phenomenon: Vec<String>,
    pub location: Vec<String>,
    pub measure: Vec<String>,
    pub violation: Vec<String>,
    pub hazard_category: BTreeMap<String, Vec<String>>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for Lexicons {
    fn default() -> Self {
        Self {
            equipment: strings(&[
                "main transformer",
                "transformer",
                "sulfur hexafluoride gas tank",
                "drainage manhole cover",
                "circuit breaker",
                "disconnector",
                "switch",
                "hydraulic mechanism",
                "cable",
                "busbar",
                "insulator",
                "arrester",
                "capacitor",
                "drainage line",
                "主变",
                "变压器",
                "断路器",
                "隔离开关",
                "电缆",
                "母线",
                "绝缘子",
                "避雷器",
                "六氟化硫气罐",
                "排水井盖",
            ]),
            hazard_phenomenon: strings(&[
                "oil leakage",
                "leakage",
                "abnormality",
                "abnormal noise",
                "overheating",
                "corrosion",
                "damage",
                "loose",
                "crack",
                "winding deformation",
                "fault shutdown",
                "misoperation",
                "flashover",
                "pressure relief",
                "falling off",
                "漏油",
                "异常",
                "过热",
                "锈蚀",
                "破损",
                "松动",
                "裂纹",
                "绕组变形",
                "停运",
                "闪络",
            ]),
            location: strings(&[
                "substation",
                "switchyard",
                "control room",
                "cable trench",
                "main control building",
                "变电站",
                "开关场",
                "主控室",
                "电缆沟",
            ]),
            measure: strings(&[
                "replace", "repair", "tighten", "clean", "inspect", "isolate", "seal", "更换",
                "维修", "紧固", "清扫", "检修", "隔离",
            ]),
            violation: strings(&[
                "unauthorized operation",
                "without work permit",
                "no safety helmet",
                "无票作业",
                "未戴安全帽",
                "违章",
            ]),
            hazard_category: BTreeMap::from([
                (
                    "personal safety hazards".to_string(),
                    strings(&["personal safety", "人身安全"]),
                ),
                (
                    "equipment and facility hazards".to_string(),
                    strings(&["equipment", "facility", "设备", "设施"]),
                ),
                (
                    "fire hazards".to_string(),
                    strings(&["fire", "消防", "火灾"]),
                ),
                (
                    "electrical hazards".to_string(),
                    strings(&["electrical", "电气"]),
                ),
            ]),
        }
    }
}

impl Lexicons {
    pub fn from_json(text: &str) -> Result<Self, KgError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, KgError> {
        let text = std::fs::read_to_string(path).map_err(|source| KgError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lexicons serialize")
    }

    /// Canonical category label for a free-form `detail_category` value:
    /// the first canonical label (in sorted order) that contains the value
    /// or has an alias contained in it, case-insensitively.
    pub fn canonical_category(&self, text: &str) -> Option<&str> {
        let t = normalize_label(text);
        if t.is_empty() {
            return None;
        }
        self.hazard_category
            .iter()
            .find(|(canon, aliases)| {
                let canon = normalize_label(canon);
                canon.contains(&t)
                    || t.contains(&canon)
                    || aliases
                        .iter()
                        .map(|a| normalize_label(a))
                        .any(|a| !a.is_empty() && t.contains(&a))
            })
            .map(|(canon, _)| canon.as_str())
    }

    pub(crate) fn matcher(&self) -> TermMatcher {
        let mut terms = HashMap::new();
        let lists = [
            (EntityCategory::Equipment, &self.equipment),
            (EntityCategory::HazardPhenomenon, &self.hazard_phenomenon),
            (EntityCategory::Location, &self.location),
            (EntityCategory::Measure, &self.measure),
            (EntityCategory::Violation, &self.violation),
        ];
        let mut max_chars = 0;
        for (cat, list) in lists {
            for term in list {
                let key = normalize_label(term);
                if key.is_empty() {
                    continue;
                }
                max_chars = max_chars.max(key.chars().count());
                // The first category listing a term owns it.
                terms.entry(key).or_insert(cat);
            }
        }
        TermMatcher { terms, max_chars }
    }
}

pub(crate) struct TermMatcher {
    pub terms: HashMap<String, EntityCategory>,
    pub max_chars: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let lex = Lexicons::default();
        assert_eq!(Lexicons::from_json(&lex.to_json()).unwrap(), lex);
    }

    #[test]
    fn category_aliases() {
        let lex = Lexicons::default();
        assert_eq!(
            lex.canonical_category("personal safety"),
            Some("personal safety hazards")
        );
        assert_eq!(
            lex.canonical_category("Personal Safety Hazards"),
            Some("personal safety hazards")
        );
        assert_eq!(
            lex.canonical_category("人身安全隐患"),
            Some("personal safety hazards")
        );
        assert_eq!(lex.canonical_category("weather"), None);
        assert_eq!(lex.canonical_category(" "), None);
    }
}
