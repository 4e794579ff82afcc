use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use hazardkg_core::analytics::{
    default_rules, load_rules, month_name, monthly_counts, predict_risks, seasonal_flags,
    stats_report, HazardKeywords, DEFAULT_SEASONAL_FACTOR,
};
use hazardkg_core::knowledge_graph::{
    export_graph, extend_graph, load_graph, query_subgraph, save_graph, ExportFormat,
    KnowledgeGraph, Lexicons,
};
use hazardkg_core::record_ingest::{
    check_unique_ids, ingest_table, read_records, write_records, HazardRecord, HeaderLexicon,
    RawTableText,
};
use hazardkg_core::search_engine::{SearchEngine, META_FILE};
use hazardkg_core::segmenter::{
    max_match_segment, ngram_segment, segment as hmm_segment, segment_tokens, train_hmm,
    BigramCounts, SpanCounts, TaggedCorpus, TokenKind, DEFAULT_EPSILON,
};
use hazardkg_core::HmmModel64;
use log::{info, warn};

use crate::config::{require, PipelineConfig};
use crate::{
    Baseline, EvalArgs, IndexArgs, IngestArgs, KgBuildArgs, KgExportArgs, KgQueryArgs, PredictArgs,
    SearchArgs, SegmentArgs, StatsArgs, TrainArgs,
};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_model(path: &Path) -> Result<HmmModel64> {
    HmmModel64::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<HazardRecord>> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let records = read_records(BufReader::new(f))
        .with_context(|| format!("bad records file {}", path.display()))?;
    check_unique_ids(&records).with_context(|| format!("bad records file {}", path.display()))?;
    info!("read {} records from {}", records.len(), path.display());
    Ok(records)
}

pub fn ingest(cfg: &PipelineConfig, a: IngestArgs, out: &mut impl Write) -> Result<()> {
    let target = require(a.out, &cfg.records, "out")?;
    let lexicon = match a.headers.or_else(|| cfg.headers.clone()) {
        Some(p) => HeaderLexicon::from_lines(&read_text(&p)?)
            .with_context(|| format!("bad header file {}", p.display()))?,
        None => HeaderLexicon::default(),
    };
    let mut records = Vec::new();
    for input in &a.inputs {
        let mut bytes = Vec::new();
        File::open(input)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .with_context(|| format!("cannot read {}", input.display()))?;
        let raw = RawTableText::from_bytes(bytes, input.display().to_string())?;
        let prefix = match &a.id_prefix {
            Some(p) => p.clone(),
            None => input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "record".into()),
        };
        let parsed = ingest_table(&raw, &lexicon, &prefix)
            .with_context(|| format!("cannot ingest {}", input.display()))?;
        for r in &parsed {
            for (field, value) in r.warnings() {
                warn!("{}: could not interpret {field} value {value:?}", r.id);
            }
        }
        info!("{}: {} records", input.display(), parsed.len());
        records.extend(parsed);
    }
    check_unique_ids(&records)
        .context("record ids collide across inputs; pass distinct files or --id-prefix per run")?;
    let mut w = create(&target)?;
    write_records(&mut w, &records)
        .with_context(|| format!("cannot write {}", target.display()))?;
    writeln!(
        out,
        "ingested {} records -> {}",
        records.len(),
        target.display()
    )?;
    Ok(())
}

pub fn train(cfg: &PipelineConfig, a: TrainArgs, out: &mut impl Write) -> Result<()> {
    let target = require(a.out, &cfg.model, "out")?;
    let epsilon = a.epsilon.or(cfg.epsilon).unwrap_or(DEFAULT_EPSILON);
    let corpus = TaggedCorpus::from_gold_text(&read_text(&a.corpus)?)
        .with_context(|| format!("bad corpus {}", a.corpus.display()))?;
    let model: HmmModel64 = train_hmm(&corpus, epsilon)?;
    model
        .save(&target)
        .with_context(|| format!("cannot write {}", target.display()))?;
    writeln!(
        out,
        "trained on {} sentences, {} distinct chars -> {}",
        corpus.len(),
        model.vocab().len(),
        target.display()
    )?;
    Ok(())
}

fn segmented_line(model: &HmmModel64, line: &str) -> String {
    segment_tokens(model, line)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Whitespace)
        .map(|t| t.text)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn segment(cfg: &PipelineConfig, a: SegmentArgs, out: &mut impl Write) -> Result<()> {
    let model = load_model(&require(a.model, &cfg.model, "model")?)?;
    let text = match (a.text, a.input) {
        (Some(t), _) => t,
        (None, Some(p)) => read_text(&p)?,
        (None, None) => {
            let mut s = String::new();
            std::io::stdin()
                .lock()
                .read_to_string(&mut s)
                .context("cannot read stdin")?;
            s
        }
    };
    for line in text.lines() {
        writeln!(out, "{}", segmented_line(&model, line))?;
    }
    Ok(())
}

fn gold_sentences(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_text(path)?
        .lines()
        .map(|l| {
            l.split(' ')
                .filter(|w| !w.is_empty())
                .map(String::from)
                .collect::<Vec<_>>()
        })
        .filter(|w| !w.is_empty())
        .collect())
}

pub fn eval(cfg: &PipelineConfig, a: EvalArgs, out: &mut impl Write) -> Result<()> {
    let model = load_model(&require(a.model, &cfg.model, "model")?)?;
    let gold = gold_sentences(&a.gold)?;
    if gold.is_empty() {
        bail!("gold corpus {} has no sentences", a.gold.display());
    }
    let wanted = if a.baseline.is_empty() && a.train.is_some() {
        vec![Baseline::Maxmatch, Baseline::Ngram]
    } else {
        a.baseline.clone()
    };
    let train = match &a.train {
        Some(p) => gold_sentences(p)?,
        None => Vec::new(),
    };
    let dict: HashSet<String> = train.iter().flatten().cloned().collect();
    let counts = BigramCounts::from_sentences(train.iter().map(|s| s.concat()));
    let mut hmm = SpanCounts::default();
    let mut mm = SpanCounts::default();
    let mut ng = SpanCounts::default();
    for words in &gold {
        let text = words.concat();
        hmm += SpanCounts::between(&hmm_segment(&model, &text), words)?;
        if wanted.contains(&Baseline::Maxmatch) {
            mm += SpanCounts::between(&max_match_segment(&dict, &text, a.max_word_len), words)?;
        }
        if wanted.contains(&Baseline::Ngram) {
            ng += SpanCounts::between(&ngram_segment(&counts, &text), words)?;
        }
    }
    writeln!(out, "{:<12}{:>8}{:>8}{:>8}", "method", "P", "R", "F1")?;
    let mut row = |name: &str, c: &SpanCounts| -> Result<()> {
        let p = c.prf::<f64>();
        writeln!(
            out,
            "{name:<12}{:>8.2}{:>8.2}{:>8.2}",
            100.0 * p.precision,
            100.0 * p.recall,
            100.0 * p.f1
        )?;
        Ok(())
    };
    row("HMM-VA", &hmm)?;
    if wanted.contains(&Baseline::Maxmatch) {
        row("MaxMatch", &mm)?;
    }
    if wanted.contains(&Baseline::Ngram) {
        row("N-gram", &ng)?;
    }
    Ok(())
}

pub fn index(cfg: &PipelineConfig, a: IndexArgs, out: &mut impl Write) -> Result<()> {
    let records = load_records(&require(a.records, &cfg.records, "records")?)?;
    let model = load_model(&require(a.model, &cfg.model, "model")?)?;
    let dir = require(a.dir, &cfg.index_dir, "dir")?;
    let shards = a.shards.or(cfg.shards).unwrap_or(1);
    if shards == 0 {
        bail!("--shards must be at least 1");
    }
    let nodes = a.nodes.or(cfg.nodes).unwrap_or(shards);
    let mut engine = SearchEngine::open_or_create(&dir, shards, nodes)
        .with_context(|| format!("cannot open index {}", dir.display()))?;
    let commits = engine
        .index_documents(&records, &model)
        .with_context(|| format!("cannot index into {}", dir.display()))?;
    for c in &commits {
        info!(
            "shard {} commit {} ({} segments)",
            c.shard_id,
            c.commit_id,
            c.live_segment_ids.len()
        );
    }
    writeln!(
        out,
        "indexed {} records into {} shards at {} ({} documents)",
        records.len(),
        engine.num_shards(),
        dir.display(),
        engine.doc_count()
    )?;
    Ok(())
}

pub fn search(cfg: &PipelineConfig, a: SearchArgs, out: &mut impl Write) -> Result<()> {
    let dir = require(a.dir, &cfg.index_dir, "dir")?;
    if !dir.join(META_FILE).is_file() {
        bail!("no search index at {}", dir.display());
    }
    let model = load_model(&require(a.model, &cfg.model, "model")?)?;
    if a.k == 0 {
        bail!("-k must be at least 1");
    }
    let engine =
        SearchEngine::open(&dir).with_context(|| format!("cannot open index {}", dir.display()))?;
    for h in engine.search(&a.query, a.k, &model) {
        writeln!(
            out,
            "{}\t{:.6}\t{}",
            h.doc_id,
            h.score,
            h.matched_terms.join(",")
        )?;
    }
    Ok(())
}

fn load_lexicons(cfg: &PipelineConfig, flag: Option<std::path::PathBuf>) -> Result<Lexicons> {
    match flag.or_else(|| cfg.lexicons.clone()) {
        Some(p) => Lexicons::load(&p).with_context(|| format!("bad lexicon file {}", p.display())),
        None => Ok(Lexicons::default()),
    }
}

pub fn kg_build(cfg: &PipelineConfig, a: KgBuildArgs, out: &mut impl Write) -> Result<()> {
    let records = load_records(&require(a.records, &cfg.records, "records")?)?;
    let model = load_model(&require(a.model, &cfg.model, "model")?)?;
    let target = require(a.out, &cfg.graph, "out")?;
    let lexicons = load_lexicons(cfg, a.lexicons)?;
    let mut graph = if a.extend && target.exists() {
        load_graph(&target).with_context(|| format!("cannot load graph {}", target.display()))?
    } else {
        KnowledgeGraph::new()
    };
    extend_graph(&mut graph, &records, &model, &lexicons);
    save_graph(&graph, &target)?;
    writeln!(
        out,
        "graph: {} nodes, {} edges -> {}",
        graph.node_count(),
        graph.edge_count(),
        target.display()
    )?;
    Ok(())
}

pub fn kg_query(cfg: &PipelineConfig, a: KgQueryArgs, out: &mut impl Write) -> Result<()> {
    let source = require(a.graph, &cfg.graph, "graph")?;
    let graph =
        load_graph(&source).with_context(|| format!("cannot load graph {}", source.display()))?;
    let sub = query_subgraph(&graph, &a.keywords, a.hops);
    save_graph(&sub, &a.out)?;
    writeln!(
        out,
        "subgraph: {} nodes, {} edges -> {}",
        sub.node_count(),
        sub.edge_count(),
        a.out.display()
    )?;
    Ok(())
}

pub fn kg_export(cfg: &PipelineConfig, a: KgExportArgs, out: &mut impl Write) -> Result<()> {
    let format: ExportFormat = a.format.parse()?;
    let source = require(a.graph, &cfg.graph, "graph")?;
    let graph =
        load_graph(&source).with_context(|| format!("cannot load graph {}", source.display()))?;
    let bytes = export_graph(&graph, format);
    match a.out {
        Some(p) => {
            let mut w = create(&p)?;
            w.write_all(&bytes)?;
            w.flush()?;
        }
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

pub fn stats(cfg: &PipelineConfig, a: StatsArgs, out: &mut impl Write) -> Result<()> {
    let records = load_records(&require(a.records, &cfg.records, "records")?)?;
    let keywords = match a.keywords.or_else(|| cfg.keywords.clone()) {
        Some(p) => {
            HazardKeywords::load(&p).with_context(|| format!("bad keyword file {}", p.display()))?
        }
        None => HazardKeywords::default(),
    };
    let factor = a
        .factor
        .or(cfg.seasonal_factor)
        .unwrap_or(DEFAULT_SEASONAL_FACTOR);
    if !(factor > 0.0 && factor.is_finite()) {
        bail!("--factor must be positive, got {factor}");
    }
    let (stats, excluded) = monthly_counts(&records, &keywords);
    let report = stats_report(&stats);
    let mut w = create(&a.out)?;
    w.write_all(report.csv.as_bytes())?;
    w.flush()?;
    out.write_all(report.table.as_bytes())?;
    let flags = seasonal_flags(&stats, factor);
    if !flags.is_empty() {
        let list: Vec<String> = flags
            .iter()
            .map(|(t, m)| format!("{t} {}", month_name(*m)))
            .collect();
        writeln!(
            out,
            "seasonal peaks (> {factor} x mean): {}",
            list.join(", ")
        )?;
    }
    writeln!(
        out,
        "excluded: {} without date, {} without hazard type",
        excluded.without_month.len(),
        excluded.without_type.len()
    )?;
    Ok(())
}

pub fn predict(cfg: &PipelineConfig, a: PredictArgs, out: &mut impl Write) -> Result<()> {
    let records = load_records(&require(a.records, &cfg.records, "records")?)?;
    let rules = match a.rules.or_else(|| cfg.rules.clone()) {
        Some(p) => load_rules(&p).with_context(|| format!("bad rules file {}", p.display()))?,
        None => default_rules(),
    };
    let mut fired = 0;
    for r in &records {
        for adv in predict_risks(r, &rules) {
            fired += 1;
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                adv.record_id, adv.rule_id, adv.hazard_type, adv.advisory
            )?;
        }
    }
    info!("{fired} advisories over {} records", records.len());
    Ok(())
}
