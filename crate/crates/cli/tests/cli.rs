use std::path::Path;

use qbe_cli::{run, RunConfig, EXIT_IO, EXIT_OK, EXIT_USAGE};
use qbe_core::lsh::{read_index, SearchIndex};
use qbe_core::nawe::EncoderParams;

const TINY: &str = "\
n_types = 5
examples_per_type = 4
search_examples_per_type = 4
queries_per_type = 2
epochs = 2
hidden = 8
bits = 128
permutations = 4
beamwidth = 50
stride = 20
";

fn exec(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(args, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn setup(dir: &Path, extra: &str) -> String {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, format!("work_dir = {}\n{TINY}{extra}", dir.display())).unwrap();
    cfg.display().to_string()
}

fn step(cmd: &str, cfg: &str, extra: &[&str]) -> String {
    let mut args = vec![cmd, "--config", cfg];
    args.extend_from_slice(extra);
    let (code, out, err) = exec(&args);
    assert_eq!(code, EXIT_OK, "{cmd} failed: {err}");
    out
}

fn pipeline(dir: &Path, extra: &str) -> String {
    let cfg = setup(dir, extra);
    for cmd in ["synth", "train", "index", "query", "eval"] {
        step(cmd, &cfg, &[]);
    }
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn argument_parsing() {
    assert_eq!(exec(&[]).0, EXIT_USAGE);
    assert_eq!(exec(&["bogus"]).0, EXIT_USAGE);
    assert_eq!(exec(&["synth", "--unknown-key", "3"]).0, EXIT_USAGE);
    assert_eq!(exec(&["synth", "--seed"]).0, EXIT_USAGE);
    assert_eq!(exec(&["synth", "--seed", "x"]).0, EXIT_USAGE);
    assert_eq!(exec(&["synth", "stray"]).0, EXIT_USAGE);
    assert_eq!(exec(&["synth", "--config", "/nonexistent/run.cfg"]).0, EXIT_IO);

    let (_, cfg) = qbe_cli::parse_args(&["train", "--seed=7", "--hidden", "12", "--negative-rule", "max"]).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.train.hidden, 12);
    assert_eq!(cfg.train.negative_rule, qbe_core::nawe::NegativeRule::Max);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.cfg");
    std::fs::write(&p, "# comment\n\nbits = 256\nstride=7\n").unwrap();
    let ps = p.display().to_string();
    // Overrides win over the file regardless of position.
    let (_, cfg) = qbe_cli::parse_args(&["index", "--bits", "512", "--config", &ps]).unwrap();
    assert_eq!(cfg.bits, 512);
    assert_eq!(cfg.windows.stride, 7);

    std::fs::write(&p, "bits 256\n").unwrap();
    assert_eq!(exec(&["index", "--config", &ps]).0, EXIT_USAGE);
    std::fs::write(&p, "colour = blue\n").unwrap();
    assert_eq!(exec(&["index", "--config", &ps]).0, EXIT_USAGE);

    let mut rc = RunConfig::default();
    rc.apply_text("work_dir = /w\nhits_file = out/h.tsv\n").unwrap();
    assert_eq!(rc.path("hits_file"), Path::new("/w/out/h.tsv"));
}

#[test]
fn synth_writes_three_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let cfg = setup(d, "");
        step("synth", &cfg, &["--seed", "5"]);
    }
    for f in ["corpus.qbe", "corpus.ali", "queries.tsv"] {
        assert!(!read(a.path(), f).is_empty());
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let cfg = setup(b.path(), "");
    step("synth", &cfg, &["--seed", "6"]);
    assert_ne!(read(a.path(), "corpus.qbe"), read(b.path(), "corpus.qbe"));
}

#[test]
fn synth_into_missing_directory_fails() {
    let (code, _, err) = exec(&["synth", "--work-dir", "/nonexistent/qbe-out"]);
    assert_eq!(code, EXIT_IO, "{err}");
}

#[test]
fn train_with_zero_epochs_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "epochs = 0\n");
    step("synth", &cfg, &[]);
    step("train", &cfg, &[]);
    let model = EncoderParams::read_model(&dir.path().join("model.qbem")).unwrap();
    let (_, rc) = qbe_cli::parse_args(&["train", "--config", &cfg]).unwrap();
    let tc = rc.train_config();
    let init = EncoderParams::init(tc.layers, tc.hidden, rc.synth.feature_dim, tc.seed).unwrap();
    assert_eq!(model, init);
}

#[test]
fn train_rejects_corrupt_archive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    step("synth", &cfg, &[]);
    let p = dir.path().join("corpus.qbe");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&p, bytes).unwrap();
    let (code, _, err) = exec(&["train", "--config", &cfg]);
    assert_eq!(code, EXIT_IO);
    assert!(err.contains("corpus.qbe"), "{err}");
}

#[test]
fn trained_dev_ap_beats_template_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(
        dir.path(),
        "n_types = 8\nexamples_per_type = 6\nqueries_per_type = 4\nnoise_sigma = 1.5\nepochs = 6\nhidden = 16\ntemplates = 8\n",
    );
    step("synth", &cfg, &[]);
    step("train", &cfg, &[]);
    let hist = String::from_utf8(read(dir.path(), "history.tsv")).unwrap();
    let last_ap: f64 = hist
        .lines()
        .filter(|l| !l.starts_with('#'))
        .last()
        .unwrap()
        .split('\t')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    let baseline: f64 = hist
        .lines()
        .find(|l| l.starts_with("#template_baseline_dev_ap"))
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(last_ap > baseline, "trained {last_ap} baseline {baseline}");
}

#[test]
fn index_round_trips_and_scales_with_permutations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    step("synth", &cfg, &[]);
    step("train", &cfg, &[]);
    step("index", &cfg, &[]);
    let emb = qbe_core::lsh::read_embeddings(&dir.path().join("embeddings.bin")).unwrap();
    let stored = read_index(&dir.path().join("index.bin")).unwrap();
    let (_, rc) = qbe_cli::parse_args(&["index", "--config", &cfg]).unwrap();
    let rebuilt = SearchIndex::build(&emb, &rc.index_config()).unwrap();
    assert_eq!(&stored, rebuilt.index());

    let small = std::fs::metadata(dir.path().join("index.bin")).unwrap().len() as f64;
    step("index", &cfg, &["--permutations", "8"]);
    let big = std::fs::metadata(dir.path().join("index.bin")).unwrap().len() as f64;
    let ratio = big / small;
    assert!((1.9..=2.1).contains(&ratio), "size ratio {ratio}");

    assert_eq!(exec(&["index", "--config", &cfg, "--bits", "64"]).0, EXIT_USAGE);
    assert_eq!(exec(&["index", "--config", &cfg, "--bits", "8192"]).0, EXIT_USAGE);
}

#[test]
fn template_embedder_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "embedder = template\ntemplates = 5\n");
    let report = String::from_utf8(read(dir.path(), "report.tsv")).unwrap();
    assert!(report.lines().last().unwrap().starts_with("summary\t"));
}

#[test]
fn query_is_repeatable_and_handles_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline(dir.path(), "");
    let first = read(dir.path(), "hits.tsv");
    let out = step("query", &cfg, &[]);
    assert!(out.contains("mean time"));
    assert_eq!(first, read(dir.path(), "hits.tsv"));

    std::fs::write(dir.path().join("none.tsv"), "#query_id\tlabel\n").unwrap();
    step("query", &cfg, &["--queries-file", "none.tsv", "--hits-file", "none_hits.tsv"]);
    let hits = qbe_core::qbe::read_hit_list(&dir.path().join("none_hits.tsv")).unwrap();
    assert!(hits.is_empty());

    std::fs::write(dir.path().join("ghost.tsv"), "query/99999\tword000\n").unwrap();
    assert_eq!(exec(&["query", "--config", &cfg, "--queries-file", "ghost.tsv"]).0, EXIT_IO);
}

#[test]
fn eval_report_matches_library_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline(dir.path(), "");
    let report = String::from_utf8(read(dir.path(), "report.tsv")).unwrap();
    let summary: Vec<f64> = report
        .lines()
        .last()
        .unwrap()
        .split('\t')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(summary.len(), 6);

    // Direct library computation from the same files.
    let corpus = qbe_cli::files::load_corpus(&dir.path().join("corpus.qbe"), &dir.path().join("corpus.ali")).unwrap();
    let entries = qbe_cli::files::read_query_list(&dir.path().join("queries.tsv")).unwrap();
    let records = qbe_core::qbe::read_hit_list(&dir.path().join("hits.tsv")).unwrap();
    let hours = qbe_core::qbe::search_hours(&corpus.search);
    let mut results = Vec::new();
    for e in &entries {
        let q = corpus.queries.iter().find(|q| q.recording_id == e.query_id).unwrap();
        let hits: Vec<_> = records.iter().filter(|r| r.query_id == e.query_id).map(|r| r.hit.clone()).collect();
        let n_true = qbe_core::qbe::truth_for_label(&corpus.search, &e.label).len();
        results.push(qbe_core::qbe::query_result(q, &hits, n_true, hours).unwrap());
    }
    let direct = qbe_core::eval::evaluate_queries(&results, qbe_core::eval::DEFAULT_OTWV_BETA).unwrap();
    for (a, b) in summary.iter().zip(direct.summary.values()) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    // A hit on a recording the corpus does not have.
    let mut text = String::from_utf8(read(dir.path(), "hits.tsv")).unwrap();
    text.push_str(&format!("{}\tsearch/99999\t0\t40\t0.5\tfalse_alarm\n", entries[0].query_id));
    std::fs::write(dir.path().join("bad_hits.tsv"), text).unwrap();
    assert_eq!(exec(&["eval", "--config", &cfg, "--hits-file", "bad_hits.tsv"]).0, EXIT_IO);
}

#[test]
fn one_point_sweep_equals_query_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pipeline(dir.path(), "");
    step("sweep", &cfg, &[]);
    let report = String::from_utf8(read(dir.path(), "report.tsv")).unwrap();
    let sweep = String::from_utf8(read(dir.path(), "sweep.tsv")).unwrap();
    let rep_vals: Vec<&str> = report.lines().last().unwrap().split('\t').skip(1).collect();
    let row: Vec<&str> = sweep.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&row[..3], &["128", "4", "50"]);
    assert_eq!(&row[3..], &rep_vals[..]);
    let long = String::from_utf8(read(dir.path(), "sweep_long.tsv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 6);

    assert_eq!(exec(&["sweep", "--config", &cfg, "--sweep-bits", "128,abc"]).0, EXIT_USAGE);
    assert_eq!(exec(&["sweep", "--config", &cfg, "--sweep-bits", "128,64"]).0, EXIT_USAGE);
    assert_eq!(exec(&["sweep", "--config", &cfg, "--sweep-beamwidths", "0"]).0, EXIT_USAGE);

    step("sweep", &cfg, &["--sweep-bits", "128,256", "--sweep-permutations", "1,2"]);
    let sweep = String::from_utf8(read(dir.path(), "sweep.tsv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 4);
}

/// Signature-only scoring makes b the fidelity knob: P@10 averaged over 20
/// corpora does not drop when b grows from 128 to 512.
#[test]
fn sweep_metrics_do_not_drop_with_more_bits() {
    let mut totals = [0.0f64; 2];
    for seed in 0..20u64 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), "scoring = hamming\nnoise_sigma = 1.0\nsweep_bits = 128,512\nbeamwidth = 20\n");
        let s = seed.to_string();
        for cmd in ["synth", "train", "index", "sweep"] {
            step(cmd, &cfg, &["--seed", &s]);
        }
        let sweep = String::from_utf8(read(dir.path(), "sweep.tsv")).unwrap();
        for (i, line) in sweep.lines().skip(1).enumerate() {
            let v: Vec<f64> = line.split('\t').skip(3).map(|x| x.parse().unwrap()).collect();
            totals[i] += v[2] + v[0];
        }
    }
    assert!(totals[1] >= totals[0], "b=128 {} b=512 {}", totals[0], totals[1]);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_qbe");
    let status = std::process::Command::new(exe).arg("nonsense").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "");
    let status = std::process::Command::new(exe).args(["synth", "--config", &cfg]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert!(dir.path().join("corpus.qbe").is_file());
}
