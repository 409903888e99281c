// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use erasure_core::annotations::SpanKind;
use erasure_core::probe::TrainConfig;
use erasure_core::reports::Scheme;
use erasure_core::scoring::{ScoringConfig, EARLY_LAYER};
use erasure_core::segment::SegmenterConfig;
use erasure_core::store::{LayerId, MANIFEST_FILE, SUPPORTED_OFFSETS};
use serde::{Deserialize, Serialize};

use crate::error::{validation, CliResult};

/// Optimizer settings; the shuffle seed is derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adamw_betas: (f64, f64),
    pub adamw_eps: f64,
    pub adamw_weight_decay: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            epochs: d.epochs,
            adamw_betas: d.adamw_betas,
            adamw_eps: d.adamw_eps,
            adamw_weight_decay: d.adamw_weight_decay,
        }
    }
}

impl TrainSection {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adamw_betas: self.adamw_betas,
            adamw_eps: self.adamw_eps,
            adamw_weight_decay: self.adamw_weight_decay,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterSection {
    pub max_span_len: Option<usize>,
    pub chunk_len: usize,
}

impl Default for SegmenterSection {
    fn default() -> Self {
        let d = SegmenterConfig::default();
        Self {
            max_span_len: d.max_span_len,
            chunk_len: d.chunk_len,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    /// Late layers to compare; empty means every grid layer above the
    /// early layer.
    pub ls: Vec<LayerId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub scheme: Scheme,
    pub kinds: Vec<SpanKind>,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::LastVsOther,
            kinds: vec![SpanKind::Subject, SpanKind::Entity],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    /// Corpus the n-grams are counted in; defaults to `corpus`.
    pub reference_corpus: Option<PathBuf>,
    pub kinds: Vec<SpanKind>,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            reference_corpus: None,
            kinds: vec![SpanKind::Subject, SpanKind::Entity, SpanKind::Word],
        }
    }
}

/// Everything a run reads, as loaded from TOML and overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the corpus manifest and shards.
    pub corpus: PathBuf,
    pub annotations: Option<PathBuf>,
    /// Probe checkpoint directory; defaults to `<out>/probes`.
    pub probes: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub layers: Vec<LayerId>,
    pub offsets: Vec<i32>,
    pub train_fraction: f64,
    pub min_count: usize,
    pub train: TrainSection,
    pub scoring: ScoringConfig,
    pub segmenter: SegmenterSection,
    pub ablation: AblationSection,
    pub report: ReportSection,
    pub audit: AuditSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("corpus"),
            annotations: None,
            probes: None,
            out: PathBuf::from("out"),
            seed: 0,
            jobs: 1,
            layers: vec![EARLY_LAYER, 9],
            offsets: vec![0, -1, -2],
            train_fraction: 0.9,
            min_count: 2,
            train: TrainSection::default(),
            scoring: ScoringConfig::default(),
            segmenter: SegmenterSection::default(),
            ablation: AblationSection::default(),
            report: ReportSection::default(),
            audit: AuditSection::default(),
        }
    }
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub layers: Option<Vec<LayerId>>,
    pub offsets: Option<Vec<i32>>,
    pub late_layer: Option<LayerId>,
    pub max_span: Option<usize>,
    pub min_count: Option<usize>,
}

/// Inputs a command needs to exist before it starts.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub corpus: bool,
    pub annotations: bool,
}

impl RunConfig {
    /// Reads `path` (or starts from defaults) and applies `overrides`.
    /// Relative paths in the file are taken relative to the file.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
                let mut cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| validation(format!("invalid config {}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.rebase(base);
                cfg
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.corpus);
        join(&mut self.out);
        for p in [
            &mut self.annotations,
            &mut self.probes,
            &mut self.audit.reference_corpus,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.layers {
            self.layers = v.clone();
        }
        if let Some(v) = &o.offsets {
            self.offsets = v.clone();
        }
        if let Some(v) = o.late_layer {
            self.scoring.late_layer = v;
        }
        if let Some(v) = o.max_span {
            self.segmenter.max_span_len = Some(v);
        }
        if let Some(v) = o.min_count {
            self.min_count = v;
        }
    }

    pub fn probe_dir(&self) -> PathBuf {
        self.probes.clone().unwrap_or_else(|| self.out.join("probes"))
    }

    pub fn segmenter_config(&self) -> SegmenterConfig {
        SegmenterConfig {
            max_span_len: self.segmenter.max_span_len,
            chunk_len: self.segmenter.chunk_len,
            missing_term_policy: self.scoring.missing_term_policy,
        }
    }

    /// Late layers for the ablation table.
    pub fn ablation_layers(&self) -> Vec<LayerId> {
        if self.ablation.ls.is_empty() {
            self.layers.iter().copied().filter(|&l| l > EARLY_LAYER).collect()
        } else {
            self.ablation.ls.clone()
        }
    }

    pub fn validate(&self, needs: Needs) -> CliResult<()> {
        if self.layers.is_empty() {
            return Err(validation("layer grid is empty"));
        }
        let mut layers = self.layers.clone();
        layers.sort_unstable();
        layers.dedup();
        if layers.len() != self.layers.len() {
            return Err(validation(format!("duplicate layers in {:?}", self.layers)));
        }
        if let Some(l) = self.layers.iter().find(|&&l| l < -1) {
            return Err(validation(format!("layer {l} is below the embedding layer -1")));
        }
        if self.offsets.is_empty() {
            return Err(validation("offset set is empty"));
        }
        if let Some(i) = self.offsets.iter().find(|i| !SUPPORTED_OFFSETS.contains(i)) {
            return Err(validation(format!(
                "offset {i} outside the supported set {SUPPORTED_OFFSETS:?}"
            )));
        }
        if !self.layers.contains(&self.scoring.late_layer) {
            return Err(validation(format!(
                "L = {} is not in the layer grid {:?}",
                self.scoring.late_layer, self.layers
            )));
        }
        if let Some(l) = self.ablation_layers().iter().find(|l| !self.layers.contains(l)) {
            return Err(validation(format!(
                "ablation layer {l} is not in the layer grid {:?}",
                self.layers
            )));
        }
        if self.jobs == 0 {
            return Err(validation("jobs must be at least 1"));
        }
        if self.min_count == 0 {
            return Err(validation("min_count must be at least 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(validation(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        self.train.with_seed(0).validate()?;
        self.scoring.validate()?;
        self.segmenter_config().validate()?;
        if needs.corpus {
            check_corpus_dir(&self.corpus)?;
            if let Some(r) = &self.audit.reference_corpus {
                check_corpus_dir(r)?;
            }
        }
        if needs.annotations {
            match &self.annotations {
                None => return Err(validation("this command needs `annotations` in the config")),
                Some(p) if !p.is_file() => {
                    return Err(validation(format!(
                        "annotations file {} does not exist",
                        p.display()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

fn check_corpus_dir(dir: &Path) -> CliResult<()> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(validation(format!(
            "corpus directory {} has no {MANIFEST_FILE}",
            dir.display()
        )));
    }
    Ok(())
}
