//! The six pipeline commands.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use qbe_core::data::{synthesize_corpus, write_alignments, write_feature_archive, Alignment, Recording, WordSegment};
use qbe_core::dtw::TemplateSet;
use qbe_core::eval::{evaluate_queries, median, write_report, MetricsReport, QueryResult};
use qbe_core::lsh::{read_embeddings, read_index, write_embeddings, write_index, SearchIndex};
use qbe_core::nawe::{cosine_distance, train, EncoderParams};
use qbe_core::qbe::{
    embed_collection, match_hits_to_truth, query_result, read_hit_list, read_segment_table, search, search_hours,
    truth_for_label, write_hit_list, write_segment_table, Embedder, HitRecord, SearchParams, SearchSystem, TruthInterval,
};
use qbe_core::{Embedding, Error};

use crate::config::{EmbedderKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::files::{format_query_list, load_corpus, read_query_list, with_path, Corpus, QueryEntry};

fn require_input(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::File {
            path: path.display().to_string(),
            source: Error::InvalidInput("input file not found".into()),
        })
    }
}

fn require_output(path: &Path) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::File {
            path: path.display().to_string(),
            source: Error::InvalidInput("output directory does not exist".into()),
        })
    }
}

fn check_paths(cfg: &RunConfig, inputs: &[&str], outputs: &[&str]) -> CliResult<()> {
    for k in inputs {
        require_input(&cfg.path(k))?;
    }
    for k in outputs {
        require_output(&cfg.path(k))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    with_path(path, std::fs::write(path, text).map_err(Error::from))
}

fn word_recording(seg: &WordSegment) -> qbe_core::Result<Recording> {
    Recording::new(
        seg.recording_id.clone(),
        seg.features.clone(),
        vec![Alignment {
            start_frame: 0,
            end_frame: seg.features.len(),
            label: seg.label.clone(),
        }],
    )
}

pub fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    check_paths(cfg, &[], &["corpus_file", "alignments_file", "queries_file"])?;
    let corpus = synthesize_corpus(&cfg.synth_config())?;
    let mut all = Vec::with_capacity(corpus.train.len() + corpus.recordings.len() + corpus.queries.len());
    for seg in &corpus.train {
        all.push(word_recording(seg)?);
    }
    all.extend(corpus.recordings.iter().cloned());
    for seg in &corpus.queries {
        all.push(word_recording(seg)?);
    }
    let archive = cfg.path("corpus_file");
    with_path(&archive, write_feature_archive(&all, &archive))?;
    let ali = cfg.path("alignments_file");
    with_path(&ali, write_alignments(&all, &ali))?;
    let queries: Vec<QueryEntry> = corpus
        .queries
        .iter()
        .map(|q| QueryEntry {
            query_id: q.recording_id.clone(),
            label: q.label.clone(),
        })
        .collect();
    write_text(&cfg.path("queries_file"), &format_query_list(&queries))?;
    let frames: usize = corpus.recordings.iter().map(Recording::num_frames).sum();
    let _ = writeln!(
        out,
        "synth: {} training segments, {} search recordings ({} frames, {:.4} h), {} queries",
        corpus.train.len(),
        corpus.recordings.len(),
        frames,
        search_hours(&corpus.recordings),
        corpus.queries.len()
    );
    Ok(())
}

fn embeddings_of(embedder: &Embedder, segs: &[WordSegment]) -> qbe_core::Result<Vec<Embedding>> {
    segs.iter().map(|s| embedder.embed(&s.features)).collect()
}

/// Same/different average precision over all pairs of `segs`.
pub fn pair_ap(embedder: &Embedder, segs: &[WordSegment]) -> qbe_core::Result<f64> {
    let e = embeddings_of(embedder, segs)?;
    let mut pairs = Vec::with_capacity(e.len() * e.len() / 2);
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            pairs.push((cosine_distance(&e[i], &e[j])?, segs[i].label == segs[j].label));
        }
    }
    qbe_core::eval::same_different_ap(&pairs)
}

fn template_embedder(cfg: &RunConfig, corpus: &Corpus) -> CliResult<Embedder> {
    Ok(Embedder::Template {
        templates: TemplateSet::sample(&corpus.train, cfg.templates, cfg.template_seed())?,
        metric: cfg.frame_metric,
    })
}

fn make_embedder(cfg: &RunConfig, corpus: &Corpus) -> CliResult<Embedder> {
    match cfg.embedder {
        EmbedderKind::Neural => {
            let path = cfg.path("model_file");
            Ok(Embedder::Neural(with_path(&path, EncoderParams::read_model(&path))?))
        }
        EmbedderKind::Template => template_embedder(cfg, corpus),
    }
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    check_paths(cfg, &["corpus_file", "alignments_file"], &["model_file", "history_file"])?;
    let tc = cfg.train_config();
    tc.validate()?;
    let corpus = load_corpus(&cfg.path("corpus_file"), &cfg.path("alignments_file"))?;
    // Dev AP needs at least one same-word pair among the queries.
    let has_pair = !qbe_core::nawe::same_label_pairs(&corpus.queries).is_empty();
    let dev = (cfg.dev_ap && has_pair).then_some(corpus.queries.as_slice());
    let t0 = Instant::now();
    let outcome = train(&corpus.train, &tc, dev)?;
    let secs = t0.elapsed().as_secs_f64();
    let model = cfg.path("model_file");
    with_path(&model, outcome.params.write_model(&model))?;
    let mut hist = String::from("#epoch\tmean_loss\tdev_ap\n");
    for h in &outcome.history {
        let ap = h.dev_ap.map_or_else(|| "-".to_owned(), |v| format!("{v:.6}"));
        let _ = writeln!(hist, "{}\t{:.6}\t{ap}", h.epoch, h.mean_loss);
    }
    if let Some(d) = dev {
        let baseline = pair_ap(&template_embedder(cfg, &corpus)?, d)?;
        let _ = writeln!(hist, "#template_baseline_dev_ap\t{baseline:.6}");
        let _ = writeln!(out, "train: template baseline dev AP {baseline:.4}");
    }
    write_text(&cfg.path("history_file"), &hist)?;
    if let Some(last) = outcome.history.last() {
        let ap = last.dev_ap.map_or_else(String::new, |v| format!(", dev AP {v:.4}"));
        let _ = writeln!(out, "train: epoch {} loss {:.6}{ap}", last.epoch, last.mean_loss);
    }
    let _ = writeln!(out, "train: {} steps in {secs:.2} s", outcome.steps);
    Ok(())
}

pub fn cmd_index(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    cfg.validate_search()?;
    let mut inputs = vec!["corpus_file", "alignments_file"];
    if cfg.embedder == EmbedderKind::Neural {
        inputs.push("model_file");
    }
    check_paths(cfg, &inputs, &["embeddings_file", "index_file", "segments_file"])?;
    let corpus = load_corpus(&cfg.path("corpus_file"), &cfg.path("alignments_file"))?;
    let embedder = make_embedder(cfg, &corpus)?;
    let t0 = Instant::now();
    let (embeddings, segments) = embed_collection(&corpus.search, &embedder, &cfg.windows)?;
    let embed_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let index = SearchIndex::build(&embeddings, &cfg.index_config())?;
    let build_secs = t1.elapsed().as_secs_f64();
    let p = cfg.path("embeddings_file");
    with_path(&p, write_embeddings(&embeddings, &p))?;
    let p = cfg.path("index_file");
    with_path(&p, write_index(index.index(), &p))?;
    let p = cfg.path("segments_file");
    with_path(&p, write_segment_table(&segments, &p))?;
    let _ = writeln!(out, "index: {} windows, embedding dim {}", segments.len(), index.dim());
    let _ = writeln!(out, "index: embed time {embed_secs:.3} s");
    let _ = writeln!(out, "index: build time {build_secs:.3} s");
    Ok(())
}

/// Runs every listed query against `system` and labels the hits.
pub fn run_queries(
    system: &SearchSystem,
    corpus: &Corpus,
    entries: &[QueryEntry],
    params: &SearchParams,
) -> CliResult<(Vec<HitRecord>, Vec<f64>)> {
    let by_id: HashMap<&str, &WordSegment> = corpus.queries.iter().map(|q| (q.recording_id.as_str(), q)).collect();
    let mut truth_cache: HashMap<&str, Vec<TruthInterval>> = HashMap::new();
    let mut records = Vec::new();
    let mut times = Vec::with_capacity(entries.len());
    for e in entries {
        let q = by_id
            .get(e.query_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("query {} not found in the corpus", e.query_id)))?;
        let t0 = Instant::now();
        let mut hits = search(&q.features, system, params)?;
        times.push(t0.elapsed().as_secs_f64());
        let truth = truth_cache
            .entry(e.label.as_str())
            .or_insert_with(|| truth_for_label(&corpus.search, &e.label));
        match_hits_to_truth(&mut hits, truth);
        records.extend(hits.into_iter().map(|hit| HitRecord {
            query_id: e.query_id.clone(),
            hit,
        }));
    }
    Ok((records, times))
}

fn load_system(cfg: &RunConfig, corpus: &Corpus) -> CliResult<SearchSystem> {
    let embedder = make_embedder(cfg, corpus)?;
    let p = cfg.path("embeddings_file");
    let embeddings = with_path(&p, read_embeddings(&p))?;
    let p = cfg.path("index_file");
    let index = with_path(&p, read_index(&p))?;
    let p = cfg.path("segments_file");
    let segments = with_path(&p, read_segment_table(&p))?;
    let index = SearchIndex::load(index, &embeddings)?;
    Ok(SearchSystem::new(embedder, index, segments)?)
}

pub fn cmd_query(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    cfg.validate_search()?;
    let mut inputs = vec!["corpus_file", "alignments_file", "queries_file", "embeddings_file", "index_file", "segments_file"];
    if cfg.embedder == EmbedderKind::Neural {
        inputs.push("model_file");
    }
    check_paths(cfg, &inputs, &["hits_file"])?;
    let entries = read_query_list(&cfg.path("queries_file"))?;
    let corpus = load_corpus(&cfg.path("corpus_file"), &cfg.path("alignments_file"))?;
    let system = load_system(cfg, &corpus)?;
    let (records, times) = run_queries(&system, &corpus, &entries, &cfg.search_params())?;
    let p = cfg.path("hits_file");
    with_path(&p, write_hit_list(&records, &p))?;
    let _ = writeln!(out, "query: {} queries, {} hits", entries.len(), records.len());
    if !times.is_empty() {
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let med = median(&times).unwrap_or(0.0);
        let _ = writeln!(out, "query: mean time {mean:.6} s, median time {med:.6} s");
    }
    Ok(())
}

/// Re-labels hits against the alignments and scores every listed query.
pub fn evaluate_hits(cfg: &RunConfig, corpus: &Corpus, entries: &[QueryEntry], records: &[HitRecord]) -> CliResult<MetricsReport> {
    let known: HashMap<&str, usize> = corpus.search.iter().map(|r| (r.id.as_str(), r.num_frames())).collect();
    let mut grouped: BTreeMap<&str, Vec<qbe_core::qbe::Hit>> = BTreeMap::new();
    for r in records {
        let s = &r.hit.segment;
        match known.get(s.recording_id.as_str()) {
            None => {
                return Err(Error::InvalidInput(format!("hit names unknown recording {:?}", s.recording_id)).into());
            }
            Some(&t) if s.end_frame > t => {
                return Err(Error::InvalidInput(format!("hit {}..{} beyond {} frames of {}", s.start_frame, s.end_frame, t, s.recording_id)).into());
            }
            _ => {}
        }
        if !entries.iter().any(|e| e.query_id == r.query_id) {
            return Err(Error::InvalidInput(format!("hit for unlisted query {:?}", r.query_id)).into());
        }
        grouped.entry(r.query_id.as_str()).or_default().push(r.hit.clone());
    }
    let by_id: HashMap<&str, &WordSegment> = corpus.queries.iter().map(|q| (q.recording_id.as_str(), q)).collect();
    let hours = search_hours(&corpus.search);
    let mut results: Vec<QueryResult> = Vec::with_capacity(entries.len());
    for e in entries {
        let q = by_id
            .get(e.query_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("query {} not found in the corpus", e.query_id)))?;
        let mut hits = grouped.remove(e.query_id.as_str()).unwrap_or_default();
        let n_true = match_hits_to_truth(&mut hits, &truth_for_label(&corpus.search, &e.label));
        results.push(query_result(q, &hits, n_true, hours)?);
    }
    Ok(evaluate_queries(&results, cfg.otwv_beta)?)
}

fn summary_line(report: &MetricsReport) -> String {
    let names = ["FOM", "OTWV", "P@10"];
    let v = report.summary.values();
    let mut s = String::new();
    for (i, n) in names.iter().enumerate() {
        let _ = write!(s, "{n} median {:.2} best {:.2}  ", v[i], v[i + 3]);
    }
    s.trim_end().to_owned()
}

pub fn cmd_eval(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    check_paths(cfg, &["corpus_file", "alignments_file", "queries_file", "hits_file"], &["report_file"])?;
    let entries = read_query_list(&cfg.path("queries_file"))?;
    if entries.is_empty() {
        return Err(Error::InvalidInput("no queries to evaluate".into()).into());
    }
    let corpus = load_corpus(&cfg.path("corpus_file"), &cfg.path("alignments_file"))?;
    let p = cfg.path("hits_file");
    let records = with_path(&p, read_hit_list(&p))?;
    let report = evaluate_hits(cfg, &corpus, &entries, &records)?;
    write_text(&cfg.path("report_file"), &write_report(&report))?;
    let _ = writeln!(out, "eval: {}", summary_line(&report));
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    cfg.validate_search()?;
    let grid = cfg.sweep_grid()?;
    let mut inputs = vec!["corpus_file", "alignments_file", "queries_file", "embeddings_file", "segments_file"];
    if cfg.embedder == EmbedderKind::Neural {
        inputs.push("model_file");
    }
    check_paths(cfg, &inputs, &["sweep_file", "sweep_long_file"])?;
    let entries = read_query_list(&cfg.path("queries_file"))?;
    if entries.is_empty() {
        return Err(Error::InvalidInput("no queries to evaluate".into()).into());
    }
    let corpus = load_corpus(&cfg.path("corpus_file"), &cfg.path("alignments_file"))?;
    let embedder = make_embedder(cfg, &corpus)?;
    let p = cfg.path("embeddings_file");
    let embeddings = with_path(&p, read_embeddings(&p))?;
    let p = cfg.path("segments_file");
    let segments = with_path(&p, read_segment_table(&p))?;

    let cols = ["FOM_median", "OTWV_median", "P@10_median", "FOM_best", "OTWV_best", "P@10_best"];
    let mut wide = format!("#bits\tpermutations\tbeamwidth\t{}\n", cols.join("\t"));
    let mut long = String::from("#bits\tpermutations\tbeamwidth\tmetric\tvalue\n");
    for (bits, perms, beam) in grid {
        let ic = qbe_core::lsh::IndexConfig {
            bits,
            permutations: perms,
            beamwidth: beam,
            ..cfg.index_config()
        };
        let t0 = Instant::now();
        let index = SearchIndex::build(&embeddings, &ic)?;
        let build = t0.elapsed().as_secs_f64();
        let system = SearchSystem::new(embedder.clone(), index, segments.clone())?;
        let params = SearchParams {
            beamwidth: beam,
            ..cfg.search_params()
        };
        let (records, times) = run_queries(&system, &corpus, &entries, &params)?;
        let report = evaluate_hits(cfg, &corpus, &entries, &records)?;
        let values = report.summary.values();
        let _ = write!(wide, "{bits}\t{perms}\t{beam}");
        for (c, v) in cols.iter().zip(values) {
            let _ = write!(wide, "\t{v:.4}");
            let _ = writeln!(long, "{bits}\t{perms}\t{beam}\t{c}\t{v:.4}");
        }
        wide.push('\n');
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let _ = writeln!(
            out,
            "sweep: b={bits} P={perms} B={beam}  {}  build {build:.3} s  mean query {mean:.6} s",
            summary_line(&report)
        );
    }
    write_text(&cfg.path("sweep_file"), &wide)?;
    write_text(&cfg.path("sweep_long_file"), &long)?;
    Ok(())
}
