use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::analyzer::Analyzer;
use super::cluster::{ClusterMeta, META_FILE};
use super::commit::{
    commit_file_name, create_dir_all, list_dir, parse_numbered, read_file, remove_file,
    segment_file_name, tmp_path, write_atomic, CommitPoint, COMMIT_FORMAT_VERSION,
};
use super::router::ShardRouter;
use super::segment::{InvertedIndex, Segment};
use super::IndexError;
use crate::record_ingest::HazardRecord;

/// A segment is sealed once it holds this many documents.
pub const SEAL_THRESHOLD: usize = 1000;

/// One ranked result.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: f64,
    /// Distinct query terms present in the document, sorted.
    pub matched_terms: Vec<String>,
}

/// Smoothed inverse document frequency `ln(1 + (N - df + 0.5) / (df + 0.5))`.
pub fn idf(num_docs: u64, df: u64) -> f64 {
    let n = num_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Document id with its analyzed `(term, position)` stream.
type AnalyzedDoc = (String, Vec<(String, u32)>);

fn hit_order(a: &SearchHit, b: &SearchHit) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteFault {
    /// The next segment write leaves a half-written file and fails.
    TornSegment,
    /// The next commit-point write fails before it becomes visible.
    FailCommit,
}

#[derive(Debug)]
struct LiveSegment {
    segment: Arc<Segment>,
    live: Vec<bool>,
    live_count: usize,
}

/// Immutable view of one shard at one commit point.
#[derive(Debug)]
pub struct ShardSnapshot {
    commit: CommitPoint,
    segments: Vec<LiveSegment>,
}

impl ShardSnapshot {
    fn new(commit: CommitPoint, segments: Vec<Arc<Segment>>) -> Self {
        let segments = segments
            .into_iter()
            .map(|segment| {
                let live: Vec<bool> = segment
                    .index
                    .doc_ids()
                    .iter()
                    .map(|d| !commit.is_deleted(d, segment.id))
                    .collect();
                let live_count = live.iter().filter(|&&l| l).count();
                LiveSegment {
                    segment,
                    live,
                    live_count,
                }
            })
            .collect();
        Self { commit, segments }
    }

    pub fn commit(&self) -> &CommitPoint {
        &self.commit
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().map(|s| s.segment.as_ref())
    }

    pub fn doc_count(&self) -> usize {
        self.segments.iter().map(|s| s.live_count).sum()
    }

    /// Live document ids, sorted.
    pub fn doc_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .live_docs()
            .map(|(seg, ord)| seg.index.doc_id(ord).to_string())
            .collect();
        ids.sort();
        ids
    }

    /// Segment holding the live copy of `doc_id`.
    pub fn locate(&self, doc_id: &str) -> Option<u64> {
        self.segments.iter().find_map(|s| {
            let ord = s.segment.index.ordinal_of(doc_id)?;
            s.live[ord as usize].then_some(s.segment.id)
        })
    }

    fn live_docs(&self) -> impl Iterator<Item = (&Segment, u32)> {
        self.segments.iter().flat_map(|s| {
            s.live
                .iter()
                .enumerate()
                .filter(|(_, &l)| l)
                .map(move |(ord, _)| (s.segment.as_ref(), ord as u32))
        })
    }

    pub fn doc_frequency(&self, term: &str) -> u64 {
        self.segments
            .iter()
            .map(|s| {
                s.segment
                    .index
                    .postings(term)
                    .iter()
                    .filter(|p| s.live[p.doc as usize])
                    .count() as u64
            })
            .sum()
    }

    /// Scores over this shard with precomputed global idf values.
    /// `terms` must be sorted so every shard sums in the same order.
    fn top_k(&self, terms: &[(String, f64)], k: usize) -> Vec<SearchHit> {
        // (score, segment, ordinal) of every matching live document.
        let mut candidates: Vec<(f64, usize, u32)> = Vec::new();
        for (si, s) in self.segments.iter().enumerate() {
            let index = &s.segment.index;
            let mut scores = vec![0.0f64; index.doc_count()];
            let mut touched: Vec<u32> = Vec::new();
            for (term, w) in terms {
                for p in index.postings(term) {
                    let d = p.doc as usize;
                    if !s.live[d] {
                        continue;
                    }
                    // Every idf is positive, so 0 means not seen yet.
                    if scores[d] == 0.0 {
                        touched.push(p.doc);
                    }
                    scores[d] += f64::from(p.term_frequency()) * w;
                }
            }
            candidates.extend(touched.into_iter().map(|d| (scores[d as usize], si, d)));
        }
        let doc_id = |si: usize, ord: u32| self.segments[si].segment.index.doc_id(ord);
        let order = |a: &(f64, usize, u32), b: &(f64, usize, u32)| {
            b.0.total_cmp(&a.0)
                .then_with(|| doc_id(a.1, a.2).cmp(doc_id(b.1, b.2)))
        };
        if candidates.len() > k {
            candidates.select_nth_unstable_by(k - 1, order);
            candidates.truncate(k);
        }
        candidates.sort_by(order);
        candidates
            .into_iter()
            .map(|(score, si, ord)| {
                let index = &self.segments[si].segment.index;
                SearchHit {
                    doc_id: index.doc_id(ord).to_string(),
                    score,
                    matched_terms: terms
                        .iter()
                        .filter(|(t, _)| {
                            index
                                .postings(t)
                                .binary_search_by_key(&ord, |p| p.doc)
                                .is_ok()
                        })
                        .map(|(t, _)| t.clone())
                        .collect(),
                }
            })
            .collect()
    }
}

/// Read-only, cheaply cloned view over every available shard; safe to
/// share between threads while the engine keeps writing.
#[derive(Debug, Clone)]
pub struct Searcher {
    shards: Vec<Option<Arc<ShardSnapshot>>>,
}

impl Searcher {
    pub fn doc_count(&self) -> usize {
        self.available().map(|s| s.doc_count()).sum()
    }

    pub fn doc_frequency(&self, term: &str) -> u64 {
        self.available().map(|s| s.doc_frequency(term)).sum()
    }

    /// Shards that failed to open and are left out of every result.
    pub fn unavailable_shards(&self) -> Vec<u32> {
        (0..self.shards.len() as u32)
            .filter(|&i| self.shards[i as usize].is_none())
            .collect()
    }

    fn available(&self) -> impl Iterator<Item = &ShardSnapshot> {
        self.shards.iter().flatten().map(Arc::as_ref)
    }

    /// Analyzes `query` and runs [`Searcher::search_terms`].
    pub fn search<A: Analyzer + ?Sized>(
        &self,
        query: &str,
        k: usize,
        analyzer: &A,
    ) -> Vec<SearchHit> {
        let terms: Vec<String> = analyzer
            .analyze(query)
            .into_iter()
            .map(|t| t.term)
            .collect();
        self.search_terms(&terms, k)
    }

    /// OR query scored by `Σ tf·idf` over the distinct terms.
    ///
    /// Document frequencies and the document count are gathered over all
    /// shards first, so scores do not depend on how documents are routed.
    pub fn search_terms(&self, terms: &[String], k: usize) -> Vec<SearchHit> {
        let distinct: BTreeSet<&String> = terms.iter().collect();
        if distinct.is_empty() || k == 0 {
            return Vec::new();
        }
        let n = self.doc_count() as u64;
        let weighted: Vec<(String, f64)> = distinct
            .into_iter()
            .map(|t| (t.clone(), idf(n, self.doc_frequency(t))))
            .collect();
        let mut hits: Vec<SearchHit> = self
            .available()
            .flat_map(|s| s.top_k(&weighted, k))
            .collect();
        hits.sort_by(hit_order);
        hits.truncate(k);
        hits
    }
}

#[derive(Debug)]
struct ShardState {
    dir: PathBuf,
    snapshot: Arc<ShardSnapshot>,
    next_segment_id: u64,
}

#[derive(Debug)]
enum ShardSlot {
    Ready(ShardState),
    Failed(String),
}

/// Sharded index stored under one root directory, one subdirectory per
/// simulated node.
///
/// Every write seals new segments, then publishes one commit point per
/// touched shard; a failed write leaves the previous commit point
/// authoritative for that shard.
#[derive(Debug)]
pub struct SearchEngine {
    root: PathBuf,
    meta: ClusterMeta,
    router: ShardRouter,
    shards: Vec<ShardSlot>,
    meta_persisted: bool,
    fault: Option<WriteFault>,
}

impl SearchEngine {
    /// Opens an existing index, failing if any shard cannot be loaded.
    /// A directory without metadata opens as an empty single-shard index.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, IndexError> {
        let engine = Self::open_partial(root)?;
        if let Some((shard, ShardSlot::Failed(detail))) = engine
            .shards
            .iter()
            .enumerate()
            .find(|(_, s)| matches!(s, ShardSlot::Failed(_)))
        {
            return Err(IndexError::Integrity {
                shard: shard as u32,
                detail: detail.clone(),
            });
        }
        Ok(engine)
    }

    /// Like [`SearchEngine::open`], but shards that fail to load are
    /// marked unavailable instead of failing the whole index.
    pub fn open_partial(root: impl AsRef<Path>) -> Result<Self, IndexError> {
        let root = root.as_ref().to_path_buf();
        let meta_path = root.join(META_FILE);
        if !meta_path.exists() {
            return Self::fresh(root, ClusterMeta::new(1, 1)?, false);
        }
        let bytes = read_file(&meta_path)?;
        let meta: ClusterMeta =
            serde_json::from_slice(&bytes).map_err(|source| IndexError::Metadata {
                path: meta_path.clone(),
                source,
            })?;
        meta.validate()?;
        let shards = (0..meta.num_shards)
            .map(|s| match load_shard(&meta.shard_dir(&root, s), s) {
                Ok(state) => ShardSlot::Ready(state),
                Err(e) => ShardSlot::Failed(e),
            })
            .collect();
        Ok(Self {
            router: ShardRouter::new(meta.num_shards).expect("validated"),
            root,
            meta,
            shards,
            meta_persisted: true,
            fault: None,
        })
    }

    /// Opens the index at `root`, creating it with the given layout if it
    /// does not exist yet. An existing index must have `num_shards` shards.
    pub fn open_or_create(
        root: impl AsRef<Path>,
        num_shards: u32,
        num_nodes: u32,
    ) -> Result<Self, IndexError> {
        let root = root.as_ref().to_path_buf();
        if root.join(META_FILE).exists() {
            let engine = Self::open(&root)?;
            if engine.meta.num_shards != num_shards {
                return Err(IndexError::InvalidLayout(format!(
                    "index at {} has {} shards, not {num_shards}",
                    root.display(),
                    engine.meta.num_shards
                )));
            }
            return Ok(engine);
        }
        let mut engine = Self::fresh(root, ClusterMeta::new(num_shards, num_nodes)?, false)?;
        engine.persist_meta()?;
        Ok(engine)
    }

    fn fresh(root: PathBuf, meta: ClusterMeta, meta_persisted: bool) -> Result<Self, IndexError> {
        let shards = (0..meta.num_shards)
            .map(|s| {
                ShardSlot::Ready(ShardState {
                    dir: meta.shard_dir(&root, s),
                    snapshot: Arc::new(ShardSnapshot::new(CommitPoint::empty(s), Vec::new())),
                    next_segment_id: 0,
                })
            })
            .collect();
        Ok(Self {
            router: ShardRouter::new(meta.num_shards).expect("validated"),
            root,
            meta,
            shards,
            meta_persisted,
            fault: None,
        })
    }

    fn persist_meta(&mut self) -> Result<(), IndexError> {
        if self.meta_persisted {
            return Ok(());
        }
        create_dir_all(&self.root)?;
        for s in 0..self.meta.num_shards {
            create_dir_all(&self.meta.shard_dir(&self.root, s))?;
        }
        let json = serde_json::to_vec_pretty(&self.meta).expect("metadata serializes");
        write_atomic(&self.root.join(META_FILE), &json)?;
        self.meta_persisted = true;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn meta(&self) -> &ClusterMeta {
        &self.meta
    }

    pub fn router(&self) -> ShardRouter {
        self.router
    }

    pub fn num_shards(&self) -> u32 {
        self.meta.num_shards
    }

    /// `(shard, reason)` for every shard that failed to open.
    pub fn failed_shards(&self) -> Vec<(u32, String)> {
        self.shards
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                ShardSlot::Failed(e) => Some((i as u32, e.clone())),
                ShardSlot::Ready(_) => None,
            })
            .collect()
    }

    pub fn snapshot(&self, shard: u32) -> Result<Arc<ShardSnapshot>, IndexError> {
        Ok(self.ready(shard)?.snapshot.clone())
    }

    pub fn commit_point(&self, shard: u32) -> Result<CommitPoint, IndexError> {
        Ok(self.ready(shard)?.snapshot.commit.clone())
    }

    pub fn searcher(&self) -> Searcher {
        Searcher {
            shards: self
                .shards
                .iter()
                .map(|s| match s {
                    ShardSlot::Ready(st) => Some(st.snapshot.clone()),
                    ShardSlot::Failed(_) => None,
                })
                .collect(),
        }
    }

    pub fn search<A: Analyzer + ?Sized>(
        &self,
        query: &str,
        k: usize,
        analyzer: &A,
    ) -> Vec<SearchHit> {
        self.searcher().search(query, k, analyzer)
    }

    pub fn doc_count(&self) -> usize {
        self.searcher().doc_count()
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: WriteFault) {
        self.fault = Some(fault);
    }

    fn ready(&self, shard: u32) -> Result<&ShardState, IndexError> {
        match self.shards.get(shard as usize) {
            Some(ShardSlot::Ready(st)) => Ok(st),
            Some(ShardSlot::Failed(reason)) => Err(IndexError::ShardUnavailable {
                shard,
                reason: reason.clone(),
            }),
            None => Err(IndexError::UnknownShard(shard)),
        }
    }

    /// Indexes each record's searchable text under its id.
    pub fn index_documents<A: Analyzer + ?Sized>(
        &mut self,
        records: &[HazardRecord],
        analyzer: &A,
    ) -> Result<Vec<CommitPoint>, IndexError> {
        let texts: Vec<(&str, String)> = records
            .iter()
            .map(|r| (r.id.as_str(), r.searchable_text()))
            .collect();
        self.index_texts(texts.iter().map(|(id, t)| (*id, t.as_str())), analyzer)
    }

    /// Indexes `(doc_id, text)` pairs. Re-indexing an existing id replaces
    /// the stored document. Returns the new commit point of every shard
    /// that received documents.
    pub fn index_texts<'a, I, A>(
        &mut self,
        docs: I,
        analyzer: &A,
    ) -> Result<Vec<CommitPoint>, IndexError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
        A: Analyzer + ?Sized,
    {
        let mut seen = HashSet::new();
        let mut per_shard: BTreeMap<u32, Vec<AnalyzedDoc>> = BTreeMap::new();
        for (id, text) in docs {
            if id.is_empty() {
                return Err(IndexError::EmptyId);
            }
            if !seen.insert(id) {
                return Err(IndexError::DuplicateId(id.to_string()));
            }
            let terms = analyzer
                .analyze(text)
                .into_iter()
                .map(|t| (t.term, t.position))
                .collect();
            per_shard
                .entry(self.router.route(id))
                .or_default()
                .push((id.to_string(), terms));
        }
        if per_shard.is_empty() {
            return Ok(Vec::new());
        }
        for &shard in per_shard.keys() {
            self.ready(shard)?;
        }
        self.persist_meta()?;

        // Phase 1: every new segment is durable before any commit.
        let mut staged = Vec::new();
        for (shard, docs) in per_shard {
            let st = self.ready(shard)?;
            let (dir, mut next) = (st.dir.clone(), st.next_segment_id);
            let mut segments = Vec::new();
            let mut iter = docs.into_iter().peekable();
            while iter.peek().is_some() {
                let chunk: Vec<_> = iter.by_ref().take(SEAL_THRESHOLD).collect();
                let seg = Segment::new(next, InvertedIndex::build(chunk));
                next += 1;
                self.write_segment(&dir, &seg)?;
                segments.push(Arc::new(seg));
            }
            staged.push((shard, segments, next));
        }

        // Phase 2: publish one commit point per shard.
        let mut commits = Vec::new();
        for (shard, new_segments, next) in staged {
            let st = self.ready(shard)?;
            let old = &st.snapshot;
            let mut commit = old.commit.clone();
            commit.commit_id += 1;
            for seg in &new_segments {
                for id in seg.index.doc_ids() {
                    if old.locate(id).is_some() {
                        commit.tombstones.insert(id.clone(), seg.id);
                    }
                }
                commit.live_segment_ids.push(seg.id);
            }
            let mut segments: Vec<Arc<Segment>> =
                old.segments.iter().map(|s| s.segment.clone()).collect();
            segments.extend(new_segments);
            let dir = st.dir.clone();
            self.publish(shard, &dir, commit.clone(), segments, next)?;
            commits.push(commit);
        }
        Ok(commits)
    }

    /// Tombstones the live copies of `ids`; unknown ids are ignored.
    pub fn delete_documents<S: AsRef<str>>(
        &mut self,
        ids: &[S],
    ) -> Result<Vec<CommitPoint>, IndexError> {
        let mut per_shard: BTreeMap<u32, BTreeSet<&str>> = BTreeMap::new();
        for id in ids {
            let id = id.as_ref();
            per_shard
                .entry(self.router.route(id))
                .or_default()
                .insert(id);
        }
        let mut commits = Vec::new();
        for (shard, ids) in per_shard {
            let st = self.ready(shard)?;
            let live: Vec<&str> = ids
                .into_iter()
                .filter(|id| st.snapshot.locate(id).is_some())
                .collect();
            if live.is_empty() {
                continue;
            }
            let mut commit = st.snapshot.commit.clone();
            commit.commit_id += 1;
            for id in live {
                commit.tombstones.insert(id.to_string(), st.next_segment_id);
            }
            let segments = st
                .snapshot
                .segments
                .iter()
                .map(|s| s.segment.clone())
                .collect();
            let (dir, next) = (st.dir.clone(), st.next_segment_id);
            self.publish(shard, &dir, commit.clone(), segments, next)?;
            commits.push(commit);
        }
        Ok(commits)
    }

    /// Rewrites the live documents of `shard` into a single segment and
    /// drops every tombstone.
    pub fn merge_segments(&mut self, shard: u32) -> Result<CommitPoint, IndexError> {
        let st = self.ready(shard)?;
        let docs: Vec<(String, Vec<(String, u32)>)> = st
            .snapshot
            .live_docs()
            .map(|(seg, ord)| {
                (
                    seg.index.doc_id(ord).to_string(),
                    seg.index.document_terms(ord),
                )
            })
            .collect();
        let mut commit = st.snapshot.commit.clone();
        commit.commit_id += 1;
        commit.tombstones.clear();
        commit.live_segment_ids.clear();
        let mut next = st.next_segment_id;
        let dir = st.dir.clone();
        let mut segments = Vec::new();
        if !docs.is_empty() {
            let seg = Segment::new(next, InvertedIndex::build(docs));
            next += 1;
            self.persist_meta()?;
            self.write_segment(&dir, &seg)?;
            commit.live_segment_ids.push(seg.id);
            segments.push(Arc::new(seg));
        }
        self.publish(shard, &dir, commit.clone(), segments, next)?;
        Ok(commit)
    }

    fn write_segment(&mut self, dir: &Path, seg: &Segment) -> Result<(), IndexError> {
        create_dir_all(dir)?;
        let path = dir.join(segment_file_name(seg.id));
        let bytes = seg.encode();
        if self.fault == Some(WriteFault::TornSegment) {
            self.fault = None;
            std::fs::write(&path, &bytes[..bytes.len() / 2]).map_err(|source| IndexError::Io {
                path: path.clone(),
                source,
            })?;
            return Err(IndexError::InjectedFault);
        }
        write_atomic(&path, &bytes)
    }

    fn publish(
        &mut self,
        shard: u32,
        dir: &Path,
        commit: CommitPoint,
        segments: Vec<Arc<Segment>>,
        next_segment_id: u64,
    ) -> Result<(), IndexError> {
        let path = dir.join(commit_file_name(commit.commit_id));
        let json = serde_json::to_vec_pretty(&commit).expect("commit point serializes");
        if self.fault == Some(WriteFault::FailCommit) {
            self.fault = None;
            let _ = std::fs::write(tmp_path(&path), &json[..json.len() / 2]);
            return Err(IndexError::InjectedFault);
        }
        write_atomic(&path, &json)?;
        let snapshot = Arc::new(ShardSnapshot::new(commit, segments));
        gc(dir, &snapshot.commit);
        self.shards[shard as usize] = ShardSlot::Ready(ShardState {
            dir: dir.to_path_buf(),
            snapshot,
            next_segment_id,
        });
        Ok(())
    }
}

/// Best-effort removal of superseded commit points, unreferenced segments
/// and stray temporary files.
fn gc(dir: &Path, commit: &CommitPoint) {
    let Ok(names) = list_dir(dir) else { return };
    let live: HashSet<u64> = commit.live_segment_ids.iter().copied().collect();
    for name in names {
        let stale = if let Some(c) = parse_numbered(&name, "commit-", ".json") {
            c < commit.commit_id
        } else if let Some(s) = parse_numbered(&name, "seg-", ".idx") {
            !live.contains(&s)
        } else {
            name.ends_with(".tmp")
        };
        if stale {
            let _ = remove_file(&dir.join(name));
        }
    }
}

fn load_shard(dir: &Path, shard: u32) -> Result<ShardState, String> {
    let names = if dir.exists() {
        list_dir(dir).map_err(|e| e.to_string())?
    } else {
        Vec::new()
    };
    let mut commit_ids: Vec<u64> = names
        .iter()
        .filter_map(|n| parse_numbered(n, "commit-", ".json"))
        .collect();
    commit_ids.sort_unstable_by(|a, b| b.cmp(a));
    let commit = commit_ids
        .into_iter()
        .find_map(|c| {
            let bytes = read_file(&dir.join(commit_file_name(c))).ok()?;
            let commit: CommitPoint = serde_json::from_slice(&bytes).ok()?;
            (commit.commit_id == c
                && commit.shard_id == shard
                && commit.format_version == COMMIT_FORMAT_VERSION)
                .then_some(commit)
        })
        .unwrap_or_else(|| CommitPoint::empty(shard));

    let mut segments = Vec::new();
    for &id in &commit.live_segment_ids {
        let name = segment_file_name(id);
        let bytes = read_file(&dir.join(&name)).map_err(|e| format!("{name}: {e}"))?;
        let seg = Segment::decode(&bytes).map_err(|e| format!("{name}: {e}"))?;
        if seg.id != id {
            return Err(format!("{name}: stored segment id {}", seg.id));
        }
        segments.push(Arc::new(seg));
    }
    let next_segment_id = commit
        .live_segment_ids
        .iter()
        .map(|&s| s + 1)
        .chain(commit.tombstones.values().copied())
        .max()
        .unwrap_or(0);
    Ok(ShardState {
        dir: dir.to_path_buf(),
        snapshot: Arc::new(ShardSnapshot::new(commit, segments)),
        next_segment_id,
    })
}
