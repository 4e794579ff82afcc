use std::collections::{BTreeMap, BTreeSet, HashMap};

use hazardkg_core::record_ingest::HazardRecord;
use hazardkg_core::search_engine::{
    analyze, fnv1a_64, idf, segment_file_name, AnalyzedTerm, Analyzer, IndexError, SearchEngine,
    SearchHit, ShardRouter, WriteFault, SEAL_THRESHOLD,
};
use hazardkg_core::segmenter::{train_hmm, TaggedCorpus};
use hazardkg_core::HmmModel64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Splits on whitespace; keeps the tests independent of the segmenter.
struct Whitespace;

impl Analyzer for Whitespace {
    fn analyze(&self, text: &str) -> Vec<AnalyzedTerm> {
        text.split_whitespace()
            .enumerate()
            .map(|(i, t)| AnalyzedTerm {
                term: t.to_lowercase(),
                position: i as u32,
            })
            .collect()
    }
}

/// Bytewise FNV-1a written independently of the library.
fn reference_fnv(key: &str) -> u64 {
    let mut h: u128 = 0xcbf29ce484222325;
    for b in key.bytes() {
        h ^= b as u128;
        h = (h * 0x100000001b3) % (1u128 << 64);
    }
    h as u64
}

/// Scores every document from scratch.
fn linear_scan(docs: &[(String, String)], query: &str, k: usize) -> Vec<SearchHit> {
    let analyzed: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|(id, t)| {
            (
                id.clone(),
                Whitespace.analyze(t).into_iter().map(|a| a.term).collect(),
            )
        })
        .collect();
    let q: BTreeSet<String> = Whitespace
        .analyze(query)
        .into_iter()
        .map(|a| a.term)
        .collect();
    let n = analyzed.len() as u64;
    let mut hits = Vec::new();
    for (id, terms) in &analyzed {
        let mut score = 0.0;
        let mut matched = Vec::new();
        for t in &q {
            let tf = terms.iter().filter(|x| *x == t).count();
            if tf == 0 {
                continue;
            }
            let df = analyzed.iter().filter(|(_, ts)| ts.contains(t)).count() as u64;
            score += tf as f64 * idf(n, df);
            matched.push(t.clone());
        }
        if !matched.is_empty() {
            hits.push(SearchHit {
                doc_id: id.clone(),
                score,
                matched_terms: matched,
            });
        }
    }
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    hits.truncate(k);
    hits
}

fn synthetic_docs(n: usize, vocab: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..12);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    // Skewed towards low ids so some terms are frequent.
                    let r: f64 = rng.gen();
                    format!("w{}", (r * r * vocab as f64) as usize)
                })
                .collect();
            (format!("doc-{i}"), words.join(" "))
        })
        .collect()
}

fn index(dir: &std::path::Path, shards: u32, docs: &[(String, String)]) -> SearchEngine {
    let mut e = SearchEngine::open_or_create(dir, shards, shards.min(3)).unwrap();
    e.index_texts(
        docs.iter().map(|(i, t)| (i.as_str(), t.as_str())),
        &Whitespace,
    )
    .unwrap();
    e
}

fn ids(hits: &[SearchHit]) -> Vec<&str> {
    hits.iter().map(|h| h.doc_id.as_str()).collect()
}

#[test]
fn route_shard_matches_reference_hash() {
    let r = ShardRouter::new(4).unwrap();
    assert_eq!(fnv1a_64(b"doc-1"), reference_fnv("doc-1"));
    assert_eq!(r.route("doc-1") as u64, reference_fnv("doc-1") % 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let key: String = (0..rng.gen_range(1..20))
            .map(|_| rng.gen::<char>())
            .collect();
        assert_eq!(fnv1a_64(key.as_bytes()), reference_fnv(&key));
    }
}

#[test]
fn routing_is_close_to_uniform() {
    for shards in [2u32, 4, 7, 12, 16] {
        let r = ShardRouter::new(shards).unwrap();
        let mut counts = vec![0usize; shards as usize];
        let n = 64_000;
        for i in 0..n {
            counts[r.route(&format!("rec-{i}-{}", i * 7919)) as usize] += 1;
        }
        let expected = n as f64 / shards as f64;
        for c in counts {
            assert!(
                (c as f64 - expected).abs() <= 0.2 * expected,
                "{shards}: {c} vs {expected}"
            );
        }
    }
}

#[test]
fn single_doc_single_shard() {
    let dir = tempfile::tempdir().unwrap();
    let e = index(dir.path(), 1, &[("d".into(), "a b a".into())]);
    let snap = e.snapshot(0).unwrap();
    assert_eq!(snap.doc_count(), 1);
    let segs: Vec<_> = snap.segments().collect();
    assert_eq!(segs.len(), 1);
    let terms: BTreeSet<&str> = segs[0].index.terms().collect();
    assert_eq!(terms, BTreeSet::from(["a", "b"]));
    segs[0].index.check_invariants().unwrap();
}

#[test]
fn empty_index_and_empty_query() {
    let dir = tempfile::tempdir().unwrap();
    let e = SearchEngine::open(dir.path()).unwrap();
    assert!(e.search("anything", 10, &Whitespace).is_empty());
    let e = index(dir.path(), 2, &[("d".into(), "a".into())]);
    assert!(e.search("   ", 10, &Whitespace).is_empty());
    assert!(e.search("a", 0, &Whitespace).is_empty());
}

#[test]
fn main_transformer_query_finds_all_four() {
    let corpus =
        TaggedCorpus::from_gold_text("主 变 异常\n主 变 漏油\n主 变 容量\n主 变 停运\n").unwrap();
    let model: HmmModel64 = train_hmm(&corpus, 1e-6).unwrap();
    assert_eq!(
        analyze("主变", &model),
        vec![("主".into(), 0), ("变".into(), 1)]
    );
    let docs = [
        ("r1", "主变异常"),
        ("r2", "主变漏油"),
        ("r3", "主变容量"),
        ("r4", "主变停运"),
        ("r5", "漏油"),
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut e = SearchEngine::open_or_create(dir.path(), 2, 2).unwrap();
    e.index_texts(docs, &model).unwrap();
    let hits = e.search("主变", 10, &model);
    assert_eq!(ids(&hits), ["r1", "r2", "r3", "r4"]);
    assert!(hits.iter().all(|h| h.matched_terms == ["主", "变"]));
}

#[test]
fn hazard_records_use_searchable_text() {
    let mut r = HazardRecord::new("x-1", "oil leakage");
    r.equipment_name = "transformer".into();
    r.location = "substation".into();
    let dir = tempfile::tempdir().unwrap();
    let mut e = SearchEngine::open_or_create(dir.path(), 1, 1).unwrap();
    e.index_documents(&[r], &Whitespace).unwrap();
    assert_eq!(ids(&e.search("leakage", 5, &Whitespace)), ["x-1"]);
    // Location is not part of the searchable text.
    assert!(e.search("substation", 5, &Whitespace).is_empty());
}

#[test]
fn duplicate_ids_rejected_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let mut e = SearchEngine::open_or_create(dir.path(), 2, 1).unwrap();
    let err = e
        .index_texts([("a", "x"), ("b", "y"), ("a", "z")], &Whitespace)
        .unwrap_err();
    assert!(matches!(err, IndexError::DuplicateId(ref id) if id == "a"));
    assert_eq!(e.doc_count(), 0);
    assert!(matches!(
        e.index_texts([("", "x")], &Whitespace).unwrap_err(),
        IndexError::EmptyId
    ));
}

#[test]
fn search_matches_linear_scan_oracle() {
    let docs = synthetic_docs(1000, 300, 7);
    let dir = tempfile::tempdir().unwrap();
    let e = index(dir.path(), 4, &docs);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let q: Vec<String> = (0..rng.gen_range(1..4))
            .map(|_| format!("w{}", rng.gen_range(0..320)))
            .collect();
        let q = q.join(" ");
        let got = e.search(&q, 1000, &Whitespace);
        let want = linear_scan(&docs, &q, 1000);
        let got_set: BTreeSet<&str> = ids(&got).into_iter().collect();
        let want_set: BTreeSet<&str> = ids(&want).into_iter().collect();
        assert_eq!(got_set, want_set, "query {q}");
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g.score - w.score).abs() < 1e-9, "query {q}");
            assert_eq!(g.matched_terms, w.matched_terms);
        }
    }
}

#[test]
fn shard_count_does_not_change_results() {
    let docs = synthetic_docs(300, 80, 11);
    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    let engines: Vec<SearchEngine> = [1u32, 2, 4, 12]
        .iter()
        .zip(&dirs)
        .map(|(&s, d)| index(d.path(), s, &docs))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let q = format!("w{} w{}", rng.gen_range(0..90), rng.gen_range(0..90));
        for k in [1, 5, 50] {
            let base = engines[0].search(&q, k, &Whitespace);
            for e in &engines[1..] {
                assert_eq!(e.search(&q, k, &Whitespace), base, "query {q} k {k}");
            }
        }
    }
}

#[test]
fn delete_writes_tombstone_and_hides_doc() {
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(
        dir.path(),
        1,
        &[("a".into(), "oil".into()), ("b".into(), "oil leak".into())],
    );
    let commits = e.delete_documents(&["a", "missing"]).unwrap();
    assert_eq!(commits.len(), 1);
    assert!(commits[0].tombstones.contains_key("a"));
    assert_eq!(ids(&e.search("oil", 10, &Whitespace)), ["b"]);
    assert_eq!(e.doc_count(), 1);
    // Nothing live to delete: no new commit.
    assert!(e.delete_documents(&["a"]).unwrap().is_empty());
}

#[test]
fn reindex_replaces_document() {
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 2, &[("a".into(), "old".into())]);
    e.index_texts([("a", "new")], &Whitespace).unwrap();
    assert!(e.search("old", 10, &Whitespace).is_empty());
    assert_eq!(ids(&e.search("new", 10, &Whitespace)), ["a"]);
    assert_eq!(e.doc_count(), 1);
    e.delete_documents(&["a"]).unwrap();
    e.index_texts([("a", "again")], &Whitespace).unwrap();
    assert_eq!(ids(&e.search("again new old", 10, &Whitespace)), ["a"]);
    let reopened = SearchEngine::open(dir.path()).unwrap();
    assert_eq!(
        ids(&reopened.search("again new old", 10, &Whitespace)),
        ["a"]
    );
}

#[test]
fn reopen_gives_identical_hits() {
    let docs = synthetic_docs(400, 60, 3);
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 3, &docs[..200]);
    e.index_texts(
        docs[200..].iter().map(|(i, t)| (i.as_str(), t.as_str())),
        &Whitespace,
    )
    .unwrap();
    e.delete_documents(&["doc-5", "doc-250"]).unwrap();
    let reopened = SearchEngine::open(dir.path()).unwrap();
    for q in ["w0", "w1 w2", "w3 w40 w59"] {
        assert_eq!(
            reopened.search(q, 20, &Whitespace),
            e.search(q, 20, &Whitespace)
        );
    }
    assert_eq!(reopened.doc_count(), 398);
    for s in 0..3 {
        assert_eq!(
            reopened.commit_point(s).unwrap(),
            e.commit_point(s).unwrap()
        );
    }
}

#[test]
fn large_batches_are_split_at_seal_threshold() {
    let docs = synthetic_docs(SEAL_THRESHOLD * 2 + 5, 50, 4);
    let dir = tempfile::tempdir().unwrap();
    let e = index(dir.path(), 1, &docs);
    let snap = e.snapshot(0).unwrap();
    let sizes: Vec<usize> = snap.segments().map(|s| s.index.doc_count()).collect();
    assert_eq!(sizes, [SEAL_THRESHOLD, SEAL_THRESHOLD, 5]);
}

#[test]
fn commit_ids_strictly_increase() {
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 1, &[("a".into(), "x".into())]);
    let mut last = e.commit_point(0).unwrap().commit_id;
    for (i, step) in [0, 1, 2, 0, 2].into_iter().enumerate() {
        match step {
            0 => {
                e.index_texts([(format!("n{i}").as_str(), "y")], &Whitespace)
                    .unwrap();
            }
            1 => {
                e.delete_documents(&["a"]).unwrap();
            }
            _ => {
                e.merge_segments(0).unwrap();
            }
        }
        let c = e.commit_point(0).unwrap().commit_id;
        assert!(c > last);
        last = c;
    }
}

#[test]
fn truncated_segment_names_shard() {
    let docs = synthetic_docs(50, 20, 5);
    let dir = tempfile::tempdir().unwrap();
    let e = index(dir.path(), 3, &docs);
    let victim = 1;
    let seg = e.commit_point(victim).unwrap().live_segment_ids[0];
    let path = e
        .meta()
        .shard_dir(dir.path(), victim)
        .join(segment_file_name(seg));
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();

    match SearchEngine::open(dir.path()).unwrap_err() {
        IndexError::Integrity { shard, detail } => {
            assert_eq!(shard, victim);
            assert!(detail.contains("seg-"), "{detail}");
        }
        other => panic!("unexpected {other:?}"),
    }
    // Other shards stay searchable.
    let partial = SearchEngine::open_partial(dir.path()).unwrap();
    assert_eq!(partial.failed_shards().len(), 1);
    assert_eq!(partial.searcher().unavailable_shards(), [victim]);
    let expected = e.doc_count() - e.snapshot(victim).unwrap().doc_count();
    assert_eq!(partial.doc_count(), expected);
    let hits = partial.search("w0 w1 w2", 100, &Whitespace);
    let router = e.router();
    assert!(hits.iter().all(|h| router.route(&h.doc_id) != victim));
}

fn assert_same_state(a: &SearchEngine, b: &SearchEngine, queries: &[&str]) {
    assert_eq!(a.doc_count(), b.doc_count());
    for q in queries {
        assert_eq!(
            a.search(q, 50, &Whitespace),
            b.search(q, 50, &Whitespace),
            "{q}"
        );
    }
}

#[test]
fn aborted_commit_keeps_last_durable_state() {
    let docs = synthetic_docs(100, 30, 6);
    let queries = ["w0", "w1 w5", "w29"];
    for fault in [WriteFault::TornSegment, WriteFault::FailCommit] {
        let dir = tempfile::tempdir().unwrap();
        let mut e = index(dir.path(), 1, &docs[..60]);
        let before = SearchEngine::open(dir.path()).unwrap();
        e.inject_fault(fault);
        let batch = docs[60..].iter().map(|(i, t)| (i.as_str(), t.as_str()));
        assert!(matches!(
            e.index_texts(batch, &Whitespace).unwrap_err(),
            IndexError::InjectedFault
        ));
        assert_same_state(&e, &before, &queries);
        let reopened = SearchEngine::open(dir.path()).unwrap();
        assert_same_state(&reopened, &before, &queries);
        assert_eq!(
            reopened.commit_point(0).unwrap(),
            before.commit_point(0).unwrap()
        );

        // Writes succeed again afterwards.
        e.index_texts(
            docs[60..].iter().map(|(i, t)| (i.as_str(), t.as_str())),
            &Whitespace,
        )
        .unwrap();
        assert_eq!(SearchEngine::open(dir.path()).unwrap().doc_count(), 100);
    }
}

#[test]
fn aborted_merge_keeps_old_commit() {
    let docs = synthetic_docs(40, 10, 9);
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 1, &docs[..20]);
    e.index_texts(
        docs[20..].iter().map(|(i, t)| (i.as_str(), t.as_str())),
        &Whitespace,
    )
    .unwrap();
    let before = e.commit_point(0).unwrap();
    e.inject_fault(WriteFault::FailCommit);
    assert!(e.merge_segments(0).is_err());
    assert_eq!(e.commit_point(0).unwrap(), before);
    assert_eq!(
        SearchEngine::open(dir.path())
            .unwrap()
            .commit_point(0)
            .unwrap(),
        before
    );
}

#[test]
fn merge_single_segment_is_identity() {
    let docs = synthetic_docs(30, 10, 10);
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 1, &docs);
    let before: Vec<_> = e
        .snapshot(0)
        .unwrap()
        .segments()
        .map(|s| s.index.clone())
        .collect();
    e.merge_segments(0).unwrap();
    let after: Vec<_> = e
        .snapshot(0)
        .unwrap()
        .segments()
        .map(|s| s.index.clone())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn merge_after_deletions_drops_tombstoned_docs() {
    let docs = synthetic_docs(60, 15, 13);
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 1, &docs[..30]);
    e.index_texts(
        docs[30..].iter().map(|(i, t)| (i.as_str(), t.as_str())),
        &Whitespace,
    )
    .unwrap();
    e.delete_documents(&["doc-1", "doc-2", "doc-40"]).unwrap();
    let physical_before: usize = e
        .snapshot(0)
        .unwrap()
        .segments()
        .map(|s| s.index.doc_count())
        .sum();
    let commit = e.merge_segments(0).unwrap();
    assert!(commit.tombstones.is_empty());
    assert_eq!(commit.live_segment_ids.len(), 1);
    let snap = e.snapshot(0).unwrap();
    let physical_after: usize = snap.segments().map(|s| s.index.doc_count()).sum();
    assert_eq!(physical_before - physical_after, 3);
    for s in snap.segments() {
        s.index.check_invariants().unwrap();
    }
    // Segment files of the old commit are collected.
    let shard_dir = e.meta().shard_dir(dir.path(), 0);
    let files: Vec<String> = std::fs::read_dir(&shard_dir)
        .unwrap()
        .map(|f| f.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files.iter().filter(|f| f.starts_with("seg-")).count(), 1);
    assert_eq!(files.iter().filter(|f| f.starts_with("commit-")).count(), 1);
}

#[test]
fn concurrent_readers_see_stable_snapshot() {
    let docs = synthetic_docs(200, 40, 14);
    let dir = tempfile::tempdir().unwrap();
    let mut e = index(dir.path(), 4, &docs);
    let searcher = e.searcher();
    let expected = searcher.search("w0 w1", 200, &Whitespace);
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let s = searcher.clone();
            std::thread::spawn(move || s.search("w0 w1", 200, &Whitespace))
        })
        .collect();
    e.delete_documents(&docs.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>())
        .unwrap();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected);
    }
    assert_eq!(searcher.search("w0 w1", 200, &Whitespace), expected);
    assert!(e.search("w0 w1", 200, &Whitespace).is_empty());
}

#[test]
fn shard_count_mismatch_rejected() {
    let dir = tempfile::tempdir().unwrap();
    index(dir.path(), 2, &[("a".into(), "x".into())]);
    assert!(matches!(
        SearchEngine::open_or_create(dir.path(), 3, 1).unwrap_err(),
        IndexError::InvalidLayout(_)
    ));
}

#[derive(Debug, Clone)]
enum Op {
    Add(Vec<(u8, Vec<u8>)>),
    Delete(Vec<u8>),
    Merge(u8),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => prop::collection::vec((0u8..40, prop::collection::vec(0u8..12, 0..6)), 1..8).prop_map(Op::Add),
        1 => prop::collection::vec(0u8..40, 1..4).prop_map(Op::Delete),
        1 => (0u8..3).prop_map(Op::Merge),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random add/delete/merge sequences agree with an in-memory model and
    /// keep every posting-list invariant.
    #[test]
    fn engine_matches_model(ops in prop::collection::vec(op(), 1..10)) {
        let dir = tempfile::tempdir().unwrap();
        let mut e = SearchEngine::open_or_create(dir.path(), 3, 2).unwrap();
        let mut model: BTreeMap<String, String> = BTreeMap::new();
        for op in ops {
            match op {
                Op::Add(docs) => {
                    let mut batch: HashMap<String, String> = HashMap::new();
                    for (id, words) in docs {
                        let text: Vec<String> = words.iter().map(|w| format!("t{w}")).collect();
                        batch.insert(format!("d{id}"), text.join(" "));
                    }
                    e.index_texts(batch.iter().map(|(i, t)| (i.as_str(), t.as_str())), &Whitespace).unwrap();
                    model.extend(batch);
                }
                Op::Delete(ids) => {
                    let ids: Vec<String> = ids.iter().map(|i| format!("d{i}")).collect();
                    e.delete_documents(&ids).unwrap();
                    for i in ids {
                        model.remove(&i);
                    }
                }
                Op::Merge(s) => {
                    e.merge_segments(u32::from(s)).unwrap();
                }
            }
            for s in 0..3 {
                for seg in e.snapshot(s).unwrap().segments() {
                    prop_assert!(seg.index.check_invariants().is_ok());
                }
            }
        }
        let docs: Vec<(String, String)> = model.into_iter().collect();
        prop_assert_eq!(e.doc_count(), docs.len());
        let reopened = SearchEngine::open(dir.path()).unwrap();
        for w in 0..12 {
            let q = format!("t{w} t{}", (w * 5) % 12);
            let want = linear_scan(&docs, &q, 100);
            let got = e.search(&q, 100, &Whitespace);
            prop_assert_eq!(ids(&got), ids(&want));
            prop_assert_eq!(&reopened.search(&q, 100, &Whitespace), &got);
        }
    }

    #[test]
    fn analyzer_positions_strictly_increase(text in "[主变漏油异常 ,。a-z0-9]{0,40}") {
        let corpus = TaggedCorpus::from_gold_text("主变 漏油\n异常 主变\n").unwrap();
        let model: HmmModel64 = train_hmm(&corpus, 1e-6).unwrap();
        let terms = analyze(&text, &model);
        prop_assert!(terms.windows(2).all(|w| w[0].1 < w[1].1));
        prop_assert!(terms.iter().enumerate().all(|(i, t)| t.1 as usize == i));
    }
}
