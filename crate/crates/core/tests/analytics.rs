use std::collections::BTreeMap;

use chrono::NaiveDate;
use hazardkg_core::analytics::{
    default_rules, monthly_counts, predict_risks, seasonal_flags, stats_report, HazardKeywords,
    HazardType, MonthlyStats,
};
use hazardkg_core::record_ingest::HazardRecord;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PHRASES: [&str; 9] = [
    "winding deformation",
    "fault shutdown",
    "protection misoperation",
    "drainage line falling off",
    "rain flashover",
    "pressure relief",
    "rust on fence",
    "绕组变形",
    "",
];

fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<HazardRecord> {
    (0..n)
        .map(|i| {
            let content = format!(
                "{} {}",
                PHRASES.choose(rng).unwrap(),
                PHRASES.choose(rng).unwrap()
            );
            let mut r = HazardRecord::new(format!("r{i}"), content);
            if rng.gen_bool(0.9) {
                r.inspect_time =
                    NaiveDate::from_ymd_opt(rng.gen_range(2020..2024), rng.gen_range(1..=12), 1);
            }
            r
        })
        .collect()
}

/// Plain filter-and-count with its own first-match logic.
fn oracle(records: &[HazardRecord], kw: &HazardKeywords) -> BTreeMap<(HazardType, u32), u64> {
    let mut out = BTreeMap::new();
    for r in records {
        let Some(month) = r.month() else { continue };
        let text = format!(
            "{}\u{0}{}",
            r.hazard_content.to_lowercase(),
            r.detail_category.to_lowercase()
        );
        let found = HazardType::ALL.iter().find(|&&t| {
            kw.keywords(t)
                .iter()
                .any(|k| text.contains(&k.to_lowercase()))
        });
        if let Some(&t) = found {
            *out.entry((t, month)).or_insert(0) += 1;
        }
    }
    out
}

#[test]
fn counts_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let kw = HazardKeywords::default();
    let records = random_records(&mut rng, 1000);
    let (stats, excluded) = monthly_counts(&records, &kw);
    let want = oracle(&records, &kw);
    for t in HazardType::ALL {
        for m in 1..=12 {
            assert_eq!(stats.count(t, m), want.get(&(t, m)).copied().unwrap_or(0));
        }
        assert_eq!(
            stats.total(t),
            (1..=12).map(|m| stats.count(t, m)).sum::<u64>()
        );
    }
    let counted: u64 = want.values().sum();
    assert_eq!(stats.grand_total(), counted);
    assert_eq!(
        counted as usize + excluded.without_month.len() + excluded.without_type.len(),
        records.len()
    );
}

#[test]
fn march_june_fixture() {
    let mut stats = MonthlyStats::default();
    for (m, n) in [(3, 6), (4, 1), (5, 1), (6, 6), (7, 1)] {
        for _ in 0..n {
            stats.add(HazardType::E1, m);
        }
    }
    assert_eq!(
        seasonal_flags(&stats, 1.5),
        [(HazardType::E1, 3), (HazardType::E1, 6)]
    );
    let report = stats_report(&stats);
    assert_eq!(report.csv.lines().count() - 1, 5 * 6);
}

fn trigger(attr: &str, value: &str) -> HazardRecord {
    let mut r = HazardRecord::new("t", "");
    r.extra.insert(attr.into(), value.into());
    r
}

#[test]
fn each_rule_fires_on_trigger_not_on_control() {
    let rules = default_rules();
    let cases = [
        ("near_area_short_circuits", "3", "1", HazardType::E1),
        ("years_in_service", "16", "15", HazardType::E2),
        ("rainproof_implemented", "false", "true", HazardType::E3),
        ("clamp_loose", "true", "false", HazardType::E4),
        ("creepage_ok", "false", "true", HazardType::E5),
        ("overhaul_overdue", "true", "false", HazardType::E6),
    ];
    for (attr, hit, miss, t) in cases {
        let fired = predict_risks(&trigger(attr, hit), &rules);
        assert_eq!(
            fired.iter().map(|a| a.hazard_type).collect::<Vec<_>>(),
            [t],
            "{attr}"
        );
        assert!(
            predict_risks(&trigger(attr, miss), &rules).is_empty(),
            "{attr}"
        );
    }
}

proptest! {
    #[test]
    fn flags_are_scale_invariant(
        counts in prop::collection::vec((0usize..6, 1u32..=12, 0u64..20), 1..30),
        k in 1u64..50,
        num in 1u64..40,
    ) {
        let mut stats = MonthlyStats::default();
        for (t, m, n) in counts {
            stats.cover(m);
            for _ in 0..n {
                stats.add(HazardType::ALL[t], m);
            }
        }
        let factor = Ratio::new(num, 10);
        prop_assert_eq!(seasonal_flags(&stats, factor), seasonal_flags(&stats.scaled(k), factor));
    }

    #[test]
    fn predictions_are_monotone(
        base in prop::collection::btree_map("[a-z_]{1,25}", "[0-9a-z]{1,6}", 0..5),
        added_idx in 0usize..6,
        added_value in prop::sample::select(vec!["0", "2", "16", "true", "false", "yes"]),
    ) {
        let attrs = ["near_area_short_circuits", "years_in_service", "rainproof_implemented",
                     "clamp_loose", "creepage_ok", "overhaul_overdue"];
        let mut r = HazardRecord::new("m", "");
        r.extra = base;
        r.extra.remove(attrs[added_idx]);
        let before = predict_risks(&r, &default_rules());
        r.extra.insert(attrs[added_idx].to_string(), added_value.to_string());
        let after = predict_risks(&r, &default_rules());
        for a in before {
            prop_assert!(after.contains(&a));
        }
    }
}
