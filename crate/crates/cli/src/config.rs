//! Flat `key = value` run configuration with command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use qbe_core::data::SynthConfig;
use qbe_core::dtw::FrameMetric;
use qbe_core::lsh::{IndexConfig, Scoring};
use qbe_core::nawe::{NegativeRule, TrainConfig};
use qbe_core::qbe::{SearchParams, WindowConfig};
use qbe_core::rng::derive_seed;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedderKind {
    Neural,
    Template,
}

impl FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "neural" => Ok(Self::Neural),
            "template" => Ok(Self::Template),
            other => Err(format!("unknown embedder {other:?}")),
        }
    }
}

/// Every file the pipeline reads or writes, relative to `work_dir` unless
/// given as an absolute path.
pub const FILE_KEYS: [(&str, &str); 12] = [
    ("corpus_file", "corpus.qbe"),
    ("alignments_file", "corpus.ali"),
    ("queries_file", "queries.tsv"),
    ("model_file", "model.qbem"),
    ("history_file", "history.tsv"),
    ("embeddings_file", "embeddings.bin"),
    ("index_file", "index.bin"),
    ("segments_file", "segments.tsv"),
    ("hits_file", "hits.tsv"),
    ("report_file", "report.tsv"),
    ("sweep_file", "sweep.tsv"),
    ("sweep_long_file", "sweep_long.tsv"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub work_dir: PathBuf,
    files: Vec<PathBuf>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub dev_ap: bool,
    pub embedder: EmbedderKind,
    pub templates: usize,
    pub frame_metric: FrameMetric,
    pub windows: WindowConfig,
    pub bits: usize,
    pub permutations: usize,
    pub beamwidth: usize,
    pub scoring: Scoring,
    pub top_k: usize,
    pub overlap_threshold: f64,
    pub otwv_beta: f64,
    pub sweep_bits: Vec<usize>,
    pub sweep_permutations: Vec<usize>,
    pub sweep_beamwidths: Vec<usize>,
}

impl Default for RunConfig {
    /// Desk-scale defaults: a single-layer encoder and a short schedule, so
    /// the whole pipeline runs in minutes on one core.
    fn default() -> Self {
        Self {
            seed: 0,
            work_dir: PathBuf::from("."),
            files: FILE_KEYS.iter().map(|(_, f)| PathBuf::from(f)).collect(),
            synth: SynthConfig::default(),
            train: TrainConfig {
                layers: 1,
                hidden: 32,
                epochs: 10,
                learning_rate: 0.003,
                ..TrainConfig::default()
            },
            dev_ap: true,
            embedder: EmbedderKind::Neural,
            templates: 20,
            frame_metric: FrameMetric::Cosine,
            windows: WindowConfig::default(),
            bits: 1024,
            permutations: 16,
            beamwidth: 2000,
            scoring: Scoring::Exact,
            top_k: 100,
            overlap_threshold: qbe_core::qbe::DEFAULT_OVERLAP_THRESHOLD,
            otwv_beta: qbe_core::eval::DEFAULT_OTWV_BETA,
            sweep_bits: Vec::new(),
            sweep_permutations: Vec::new(),
            sweep_beamwidths: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| {
            let v = v.trim();
            match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(CliError::Usage(format!("invalid grid value {v:?} in {key}"))),
            }
        })
        .collect()
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("invalid boolean {value:?} for {key}"))),
    }
}

/// Splits config text into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::ConfigSyntax {
                line: i + 1,
                reason: "expected key = value".into(),
            });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::ConfigSyntax {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        out.push((k.replace('-', "_"), v.trim().to_owned()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        if let Some(i) = FILE_KEYS.iter().position(|(name, _)| *name == k) {
            if value.is_empty() {
                return Err(CliError::Usage(format!("{k} must not be empty")));
            }
            self.files[i] = PathBuf::from(value);
            return Ok(());
        }
        let s = &mut self.synth;
        let t = &mut self.train;
        match k {
            "seed" => self.seed = parse(k, value)?,
            "work_dir" => self.work_dir = PathBuf::from(value),
            "n_types" => s.n_types = parse(k, value)?,
            "examples_per_type" => s.examples_per_type = parse(k, value)?,
            "search_examples_per_type" => s.search_examples_per_type = parse(k, value)?,
            "queries_per_type" => s.queries_per_type = parse(k, value)?,
            "words_per_recording" => s.words_per_recording = parse(k, value)?,
            "proto_len_min" => s.proto_len_min = parse(k, value)?,
            "proto_len_max" => s.proto_len_max = parse(k, value)?,
            "warp_factor_max" => s.warp_factor_max = parse(k, value)?,
            "noise_sigma" => s.noise_sigma = parse(k, value)?,
            "filler_len_min" => s.filler_len_min = parse(k, value)?,
            "filler_len_max" => s.filler_len_max = parse(k, value)?,
            "feature_dim" => s.feature_dim = parse(k, value)?,
            "layers" => t.layers = parse(k, value)?,
            "hidden" => t.hidden = parse(k, value)?,
            "margin" => t.margin = parse(k, value)?,
            "negatives" => t.negatives = parse(k, value)?,
            "negative_rule" => {
                t.negative_rule = value
                    .parse::<NegativeRule>()
                    .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {k}")))?
            }
            "batch_size" => t.batch_size = parse(k, value)?,
            "learning_rate" => t.learning_rate = parse(k, value)?,
            "beta1" => t.beta1 = parse(k, value)?,
            "beta2" => t.beta2 = parse(k, value)?,
            "epsilon" => t.epsilon = parse(k, value)?,
            "dropout" => t.dropout_p = parse(k, value)?,
            "epochs" => t.epochs = parse(k, value)?,
            "dev_ap" => self.dev_ap = parse_bool(k, value)?,
            "embedder" => self.embedder = value.parse().map_err(CliError::Usage)?,
            "templates" => self.templates = parse(k, value)?,
            "frame_metric" => {
                self.frame_metric = value
                    .parse::<FrameMetric>()
                    .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {k}")))?
            }
            "min_len" => self.windows.min_len = parse(k, value)?,
            "max_len" => self.windows.max_len = parse(k, value)?,
            "len_step" => self.windows.len_step = parse(k, value)?,
            "stride" => self.windows.stride = parse(k, value)?,
            "bits" => self.bits = parse(k, value)?,
            "permutations" => self.permutations = parse(k, value)?,
            "beamwidth" => self.beamwidth = parse(k, value)?,
            "scoring" => {
                self.scoring = value
                    .parse::<Scoring>()
                    .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {k}")))?
            }
            "top_k" => self.top_k = parse(k, value)?,
            "overlap_threshold" => self.overlap_threshold = parse(k, value)?,
            "otwv_beta" => self.otwv_beta = parse(k, value)?,
            "sweep_bits" => self.sweep_bits = parse_list(k, value)?,
            "sweep_permutations" => self.sweep_permutations = parse_list(k, value)?,
            "sweep_beamwidths" => self.sweep_beamwidths = parse_list(k, value)?,
            _ => return Err(CliError::Usage(format!("unknown config key {k:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (k, v) in parse_config_text(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::File {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        self.apply_text(&text)
    }

    /// Resolved path of one of [`FILE_KEYS`].
    pub fn path(&self, key: &str) -> PathBuf {
        let i = FILE_KEYS
            .iter()
            .position(|(name, _)| *name == key)
            .unwrap_or_else(|| panic!("unknown file key {key}"));
        self.work_dir.join(&self.files[i])
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: derive_seed(self.seed, "synth"),
            ..self.synth.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "train"),
            ..self.train.clone()
        }
    }

    pub fn template_seed(&self) -> u64 {
        derive_seed(self.seed, "templates")
    }

    pub fn index_config(&self) -> IndexConfig {
        IndexConfig {
            bits: self.bits,
            permutations: self.permutations,
            beamwidth: self.beamwidth,
            seed: derive_seed(self.seed, "index"),
        }
    }

    pub fn search_params(&self) -> SearchParams {
        SearchParams {
            beamwidth: self.beamwidth,
            top_k: self.top_k,
            overlap_threshold: self.overlap_threshold,
            scoring: self.scoring,
        }
    }

    /// Checks settings shared by the search commands.
    pub fn validate_search(&self) -> CliResult<()> {
        self.index_config().validate()?;
        self.windows.validate()?;
        if self.top_k == 0 {
            return Err(CliError::Usage("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return Err(CliError::Usage("overlap_threshold must lie in [0, 1]".into()));
        }
        if self.embedder == EmbedderKind::Template && self.templates == 0 {
            return Err(CliError::Usage("templates must be at least 1".into()));
        }
        Ok(())
    }

    /// Sweep axes, each defaulting to the single configured value.
    pub fn sweep_grid(&self) -> CliResult<Vec<(usize, usize, usize)>> {
        let or = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let mut grid = Vec::new();
        for b in or(&self.sweep_bits, self.bits) {
            for p in or(&self.sweep_permutations, self.permutations) {
                for bw in or(&self.sweep_beamwidths, self.beamwidth) {
                    IndexConfig {
                        bits: b,
                        permutations: p,
                        beamwidth: bw,
                        seed: 0,
                    }
                    .validate()?;
                    grid.push((b, p, bw));
                }
            }
        }
        Ok(grid)
    }
}
