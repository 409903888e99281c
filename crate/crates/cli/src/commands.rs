// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use erasure_core::annotations::{AnnotationSet, SpanKind};
use erasure_core::probe::{
    evaluate_accuracy, init_probe, probe_file_name, read_probe, train_probe, write_probe, EpochLoss,
    ProbeCheckpoint, ProbeGrid,
};
use erasure_core::reports::{accuracy_breakdown, export_curves, segmentation_html, AccuracyCurve, Scheme};
use erasure_core::scoring::{build_delta_table, DeltaTable, ScoringConfig, EARLY_LAYER, SCORE_OFFSETS};
use erasure_core::segment::{segment_table, segmentation_json, Segmentation};
use erasure_core::store::{
    build_probe_examples, ngram_frequency, split_dataset, ActivationShard, Corpus, CorpusManifest, Dtype,
    LayerId, MANIFEST_FILE,
};
use erasure_core::synthetic::SyntheticSpec;
use erasure_core::vocab::{ablate_from_tables, aggregate_vocab, evaluate_vocab, read_vocab_tsv, vocab_tsv};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Needs, RunConfig};
use crate::error::{runtime, validation, CliError, CliResult};
use crate::manifest::RunRecord;

/// A parsed subcommand with its own options.
#[derive(Debug, Clone)]
pub enum Task {
    ProbesTrain,
    ProbesEval,
    Score { doc: Option<String> },
    Segment { doc: Option<String>, report: bool },
    VocabBuild,
    VocabEval { vocab: Option<PathBuf> },
    AblateL,
    Report,
    FreqAudit,
    Synth { docs: usize, dtype: Dtype },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::ProbesTrain => "probes train",
            Task::ProbesEval => "probes eval",
            Task::Score { .. } => "score",
            Task::Segment { .. } => "segment",
            Task::VocabBuild => "vocab build",
            Task::VocabEval { .. } => "vocab eval",
            Task::AblateL => "ablate-l",
            Task::Report => "report",
            Task::FreqAudit => "freq-audit",
            Task::Synth { .. } => "synth",
        }
    }

    fn needs(&self, cfg: &RunConfig) -> Needs {
        match self {
            Task::Synth { .. } => Needs::default(),
            Task::VocabEval { .. } | Task::AblateL | Task::FreqAudit => Needs {
                corpus: true,
                annotations: true,
            },
            Task::Report => Needs {
                corpus: true,
                annotations: cfg.report.scheme != Scheme::Overall,
            },
            _ => Needs {
                corpus: true,
                annotations: false,
            },
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    rec: &'a mut RunRecord,
    pool: rayon::ThreadPool,
}

impl Ctx<'_> {
    /// Maps `f` over `items` on the worker pool, keeping input order.
    fn par_map<T: Sync, R: Send>(
        &self,
        items: &[T],
        f: impl Fn(&T) -> CliResult<R> + Sync + Send,
    ) -> CliResult<Vec<R>> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    fn out(&self, relative: impl AsRef<Path>) -> PathBuf {
        self.cfg.out.join(relative)
    }

    fn write(&mut self, relative: impl AsRef<Path>, bytes: &[u8]) -> CliResult<()> {
        let path = self.out(relative);
        self.rec.write(&path, bytes)
    }
}

pub fn execute(task: &Task, cfg: &RunConfig, rec: &mut RunRecord) -> CliResult<()> {
    cfg.validate(task.needs(cfg))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| runtime(format!("cannot start worker pool: {e}")))?;
    let mut ctx = Ctx { cfg, rec, pool };
    match task {
        Task::ProbesTrain => probes_train(&mut ctx),
        Task::ProbesEval => probes_eval(&mut ctx),
        Task::Score { doc } => score(&mut ctx, doc.as_deref()),
        Task::Segment { doc, report } => segment(&mut ctx, doc.as_deref(), *report),
        Task::VocabBuild => vocab_build(&mut ctx),
        Task::VocabEval { vocab } => vocab_eval(&mut ctx, vocab.as_deref()),
        Task::AblateL => ablate_l(&mut ctx),
        Task::Report => report(&mut ctx),
        Task::FreqAudit => freq_audit(&mut ctx),
        Task::Synth { docs, dtype } => synth(&mut ctx, *docs, *dtype),
    }
}

fn load_corpus(rec: &mut RunRecord, dir: &Path) -> CliResult<Corpus> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| validation(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: CorpusManifest = serde_json::from_str(&text).map_err(|e| {
        validation(format!(
            "invalid corpus manifest {}: {e}",
            manifest_path.display()
        ))
    })?;
    rec.input(&manifest_path)?;
    for name in manifest.files.iter().chain(&manifest.token_strings) {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(validation(format!(
                "corpus file {} does not exist",
                path.display()
            )));
        }
        rec.input(&path)?;
    }
    let corpus = Corpus::load_dir(dir)?;
    if corpus.is_empty() {
        return Err(validation(format!("corpus {} has no documents", dir.display())));
    }
    info!("loaded {} documents from {}", corpus.len(), dir.display());
    Ok(corpus)
}

fn load_annotations(ctx: &mut Ctx, corpus: &Corpus) -> CliResult<AnnotationSet> {
    let path = ctx.cfg.annotations.clone().expect("validated");
    ctx.rec.input(&path)?;
    let ann = AnnotationSet::load(&path).map_err(|e| validation(e.to_string()))?;
    ann.validate_against(corpus)?;
    Ok(ann)
}

fn grid_cells(cfg: &RunConfig) -> Vec<(LayerId, i32)> {
    cfg.layers
        .iter()
        .flat_map(|&l| cfg.offsets.iter().map(move |&i| (l, i)))
        .collect()
}

fn scoring_cells(late_layers: &[LayerId]) -> Vec<(LayerId, i32)> {
    let mut layers = vec![EARLY_LAYER];
    layers.extend(late_layers);
    let mut cells: Vec<_> = layers
        .iter()
        .flat_map(|&l| SCORE_OFFSETS.iter().map(move |&i| (l, i)))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Reads the checkpoints for `cells`, failing with every missing cell named.
fn load_probes(ctx: &mut Ctx, corpus: &Corpus, cells: &[(LayerId, i32)]) -> CliResult<ProbeGrid> {
    let dir = ctx.cfg.probe_dir();
    let missing: Vec<String> = cells
        .iter()
        .filter(|&&(l, i)| !dir.join(probe_file_name(l, i)).is_file())
        .map(|&(l, i)| {
            format!(
                "(layer {l}, offset {i}) at {}",
                dir.join(probe_file_name(l, i)).display()
            )
        })
        .collect();
    if !missing.is_empty() {
        return Err(validation(format!("missing probe for {}", missing.join("; "))));
    }
    let meta = &corpus.documents()[0].meta;
    let mut grid = ProbeGrid::new();
    for &(l, i) in cells {
        let path = dir.join(probe_file_name(l, i));
        ctx.rec.input(&path)?;
        let ck = read_probe(&path)?;
        if (ck.probe.layer, ck.probe.offset) != (l, i) {
            return Err(validation(format!(
                "{} holds the probe for (layer {}, offset {})",
                path.display(),
                ck.probe.layer,
                ck.probe.offset
            )));
        }
        if (ck.probe.hidden_dim, ck.probe.vocab_size) != (meta.hidden_dim, meta.vocab_size) {
            return Err(validation(format!(
                "{} expects hidden_dim {} and vocab_size {}, corpus has {} and {}",
                path.display(),
                ck.probe.hidden_dim,
                ck.probe.vocab_size,
                meta.hidden_dim,
                meta.vocab_size
            )));
        }
        grid.insert((l, i), ck.probe);
    }
    Ok(grid)
}

fn select_docs<'c>(corpus: &'c Corpus, doc: Option<&str>) -> CliResult<Vec<&'c ActivationShard>> {
    match doc {
        Some(id) => corpus
            .get(id)
            .map(|d| vec![d])
            .ok_or_else(|| validation(format!("document {id:?} is not in the corpus"))),
        None => Ok(corpus.documents().iter().collect()),
    }
}

fn split_seed_name(l: LayerId, i: i32) -> String {
    format!("split/l{l}/o{i}")
}

fn train_seed_name(l: LayerId, i: i32) -> String {
    format!("train/l{l}/o{i}")
}

#[derive(Serialize)]
struct CellSummary {
    layer: LayerId,
    offset: i32,
    n_train: usize,
    n_val: usize,
    best_epoch: usize,
    initial: EpochLoss,
    epochs: Vec<EpochLoss>,
    train_accuracy: f64,
    val_accuracy: Option<f64>,
}

fn probes_train(ctx: &mut Ctx) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let meta = corpus.documents()[0].meta.clone();
    let cells: Vec<(LayerId, i32, u64, u64)> = grid_cells(ctx.cfg)
        .into_iter()
        .map(|(l, i)| {
            let split = ctx.rec.seed(ctx.cfg.seed, &split_seed_name(l, i));
            let train = ctx.rec.seed(ctx.cfg.seed, &train_seed_name(l, i));
            (l, i, split, train)
        })
        .collect();
    let cfg = ctx.cfg;
    let trained = ctx.par_map(&cells, |&(l, i, split_seed, train_seed)| {
        let ds = build_probe_examples(&corpus, l, i)?;
        let (train, val) = split_dataset(&ds, cfg.train_fraction, split_seed)?;
        let train_cfg = cfg.train.with_seed(train_seed);
        let probe = init_probe(meta.hidden_dim, meta.vocab_size, l, i, train_seed)?;
        let (probe, history) = train_probe(&probe, &train, &val, &train_cfg).map_err(|e| match e {
            erasure_core::Error::Diverged(msg) => {
                runtime(format!("probe (layer {l}, offset {i}) diverged: {msg}"))
            }
            other => CliError::from(other),
        })?;
        info!(
            "trained probe (layer {l}, offset {i}), best epoch {}",
            history.best_epoch
        );
        let summary = CellSummary {
            layer: l,
            offset: i,
            n_train: train.len(),
            n_val: val.len(),
            best_epoch: history.best_epoch,
            initial: history.initial,
            epochs: history.epochs,
            train_accuracy: evaluate_accuracy(&probe, &train, None)?,
            val_accuracy: if val.is_empty() {
                None
            } else {
                Some(evaluate_accuracy(&probe, &val, None)?)
            },
        };
        let checkpoint = ProbeCheckpoint {
            probe,
            model_meta: meta.clone(),
            train_config: train_cfg,
        };
        Ok((checkpoint, summary))
    })?;
    let dir = ctx.cfg.probe_dir();
    std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut summaries = Vec::new();
    for (checkpoint, summary) in trained {
        let path = dir.join(probe_file_name(summary.layer, summary.offset));
        write_probe(&checkpoint, &path)?;
        ctx.rec.record(&path)?;
        summaries.push(summary);
    }
    let mut json = serde_json::to_string_pretty(&summaries).map_err(|e| runtime(e.to_string()))?;
    json.push('\n');
    ctx.write("training.json", json.as_bytes())
}

fn probes_eval(ctx: &mut Ctx) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let cells = grid_cells(ctx.cfg);
    let grid = load_probes(ctx, &corpus, &cells)?;
    let seeded: Vec<(LayerId, i32, u64)> = cells
        .iter()
        .map(|&(l, i)| (l, i, ctx.rec.seed(ctx.cfg.seed, &split_seed_name(l, i))))
        .collect();
    let fraction = ctx.cfg.train_fraction;
    let rows = ctx.par_map(&seeded, |&(l, i, seed)| {
        let probe = &grid[&(l, i)];
        let ds = build_probe_examples(&corpus, l, i)?;
        let (train, val) = split_dataset(&ds, fraction, seed)?;
        let mut rows = Vec::new();
        for (name, part) in [("train", &train), ("val", &val), ("all", &ds)] {
            if !part.is_empty() {
                rows.push((l, i, name, part.len(), evaluate_accuracy(probe, part, None)?));
            }
        }
        Ok(rows)
    })?;
    let mut csv = String::from("layer,offset,split,n,accuracy\n");
    for (l, i, name, n, acc) in rows.into_iter().flatten() {
        writeln!(csv, "{l},{i},{name},{n},{acc:.6}").unwrap();
    }
    ctx.write("probe_eval.csv", csv.as_bytes())
}

fn score_docs(
    ctx: &Ctx,
    docs: &[&ActivationShard],
    grid: &ProbeGrid,
    scoring: &ScoringConfig,
) -> CliResult<Vec<DeltaTable>> {
    ctx.par_map(docs, |d| Ok(build_delta_table(d, grid, scoring)?))
}

fn score(ctx: &mut Ctx, doc: Option<&str>) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let docs = select_docs(&corpus, doc)?;
    let grid = load_probes(ctx, &corpus, &scoring_cells(&[ctx.cfg.scoring.late_layer]))?;
    let tables = score_docs(ctx, &docs, &grid, &ctx.cfg.scoring)?;
    for t in &tables {
        ctx.write(format!("deltas/{}.csv", t.doc_id), t.to_csv().as_bytes())?;
    }
    Ok(())
}

fn segment_docs(ctx: &mut Ctx, corpus: &Corpus, docs: &[&ActivationShard]) -> CliResult<Vec<Segmentation>> {
    let grid = load_probes(ctx, corpus, &scoring_cells(&[ctx.cfg.scoring.late_layer]))?;
    let tables = score_docs(ctx, docs, &grid, &ctx.cfg.scoring)?;
    let seg_cfg = ctx.cfg.segmenter_config();
    let segs = ctx.par_map(&tables, |t| Ok(segment_table(t, &seg_cfg)?))?;
    for s in &segs {
        ctx.write(
            format!("segments/{}.json", s.doc_id),
            segmentation_json(s, corpus)?.as_bytes(),
        )?;
    }
    Ok(segs)
}

fn segment(ctx: &mut Ctx, doc: Option<&str>, report: bool) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let docs = select_docs(&corpus, doc)?;
    let segs = segment_docs(ctx, &corpus, &docs)?;
    if report {
        for (shard, seg) in docs.iter().zip(&segs) {
            let html = segmentation_html(shard, seg, &corpus)?;
            ctx.write(format!("reports/{}.html", seg.doc_id), html.as_bytes())?;
        }
    }
    Ok(())
}

fn vocab_build(ctx: &mut Ctx) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let docs = select_docs(&corpus, None)?;
    let segs = segment_docs(ctx, &corpus, &docs)?;
    let vocab = aggregate_vocab(&segs, &corpus, ctx.cfg.min_count)?;
    info!("vocabulary has {} entries", vocab.len());
    ctx.write("vocab.tsv", vocab_tsv(&vocab).as_bytes())
}

fn vocab_eval(ctx: &mut Ctx, vocab: Option<&Path>) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let ann = load_annotations(ctx, &corpus)?;
    let path = vocab
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out("vocab.tsv"));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| validation(format!("cannot read vocabulary {}: {e}", path.display())))?;
    ctx.rec.input(&path)?;
    let entries = read_vocab_tsv(&text).map_err(|e| validation(e.to_string()))?;
    let eval = evaluate_vocab(&entries, &ann, &corpus)?;
    for w in &eval.warnings {
        warn!("{w}");
    }
    let mut json = serde_json::to_string_pretty(&eval).map_err(|e| runtime(e.to_string()))?;
    json.push('\n');
    ctx.write("vocab_eval.json", json.as_bytes())
}

fn ablate_l(ctx: &mut Ctx) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let ann = load_annotations(ctx, &corpus)?;
    let ls = ctx.cfg.ablation_layers();
    if ls.is_empty() {
        return Err(validation("no late layers to compare"));
    }
    let grid = load_probes(ctx, &corpus, &scoring_cells(&ls))?;
    let docs = select_docs(&corpus, None)?;
    let mut tables = BTreeMap::new();
    for &l in &ls {
        let scoring = ScoringConfig {
            late_layer: l,
            ..ctx.cfg.scoring.clone()
        };
        scoring.validate()?;
        tables.insert(l, score_docs(ctx, &docs, &grid, &scoring)?);
    }
    let rows = ablate_from_tables(
        &tables,
        &corpus,
        &ann,
        &ctx.cfg.segmenter_config(),
        ctx.cfg.min_count,
    )?;
    let mut csv =
        String::from("L,vocab_size,mtw_precision,mtw_recall,mte_precision,mte_recall,either_precision\n");
    for r in &rows {
        let e = &r.evaluation;
        writeln!(
            csv,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.late_layer,
            r.vocab_size,
            e.mtw.precision,
            e.mtw.recall,
            e.mte.precision,
            e.mte.recall,
            e.either_precision
        )
        .unwrap();
    }
    ctx.write("ablation.csv", csv.as_bytes())?;
    let mut json = serde_json::to_string_pretty(&rows).map_err(|e| runtime(e.to_string()))?;
    json.push('\n');
    ctx.write("ablation.json", json.as_bytes())
}

fn report(ctx: &mut Ctx) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let scheme = ctx.cfg.report.scheme;
    let ann = if scheme == Scheme::Overall {
        AnnotationSet::new()
    } else {
        load_annotations(ctx, &corpus)?
    };
    let cells = grid_cells(ctx.cfg);
    let grid = load_probes(ctx, &corpus, &cells)?;
    let kinds = ctx.cfg.report.kinds.clone();
    // One breakdown per cell, merged by (class, offset).
    let parts = ctx.par_map(&cells, |&cell| {
        let single: ProbeGrid = [(cell, grid[&cell].clone())].into_iter().collect();
        Ok(accuracy_breakdown(&single, &corpus, &ann, scheme, &kinds)?)
    })?;
    let mut merged: BTreeMap<(String, i32), AccuracyCurve> = BTreeMap::new();
    for curve in parts.into_iter().flatten() {
        merged
            .entry((curve.class.clone(), curve.offset))
            .or_insert_with(|| AccuracyCurve {
                class: curve.class.clone(),
                offset: curve.offset,
                points: BTreeMap::new(),
            })
            .points
            .extend(curve.points);
    }
    let curves: Vec<AccuracyCurve> = merged.into_values().collect();
    if curves.is_empty() {
        return Err(runtime("no accuracy curves: every class is empty"));
    }
    let dir = ctx.out("curves");
    std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    for path in export_curves(&curves, &dir)? {
        ctx.rec.record(&path)?;
    }
    let mut json = serde_json::to_string_pretty(&curves).map_err(|e| runtime(e.to_string()))?;
    json.push('\n');
    ctx.write("curves/curves.json", json.as_bytes())
}

fn kind_name(kind: SpanKind) -> &'static str {
    match kind {
        SpanKind::Word => "word",
        SpanKind::Entity => "entity",
        SpanKind::Subject => "subject",
    }
}

fn tsv_field(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('\t', "\\t")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
}

fn freq_audit(ctx: &mut Ctx) -> CliResult<()> {
    let corpus = load_corpus(ctx.rec, &ctx.cfg.corpus)?;
    let ann = load_annotations(ctx, &corpus)?;
    let reference = match ctx.cfg.audit.reference_corpus.clone() {
        Some(dir) => load_corpus(ctx.rec, &dir)?,
        None => corpus.clone(),
    };
    let wanted: BTreeSet<SpanKind> = ctx.cfg.audit.kinds.iter().copied().collect();
    let mut queries: BTreeMap<Vec<u32>, BTreeSet<SpanKind>> = BTreeMap::new();
    for (doc_id, spans) in ann.iter() {
        let tokens = &corpus.get(doc_id).expect("validated").token_ids;
        for s in spans.iter().filter(|s| wanted.contains(&s.kind)) {
            queries
                .entry(tokens[s.start..=s.end].to_vec())
                .or_default()
                .insert(s.kind);
        }
    }
    if queries.is_empty() {
        return Err(validation(format!(
            "no annotated spans of kinds {:?}",
            ctx.cfg.audit.kinds
        )));
    }
    let docs: Vec<Vec<u32>> = reference
        .documents()
        .iter()
        .map(|d| d.token_ids.clone())
        .collect();
    let keys: Vec<Vec<u32>> = queries.keys().cloned().collect();
    let counts = ngram_frequency(&docs, &keys)?;

    let mut rows: Vec<(&Vec<u32>, &BTreeSet<SpanKind>, u64)> =
        queries.iter().map(|(k, kinds)| (k, kinds, counts[k])).collect();
    rows.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.0.cmp(b.0)));
    let mut tsv = String::from("token_ids\tn\tkinds\tcount\tsurface\n");
    let mut by_n: BTreeMap<usize, (usize, usize, u64)> = BTreeMap::new();
    for (ids, kinds, count) in &rows {
        let ids_text: Vec<String> = ids.iter().map(u32::to_string).collect();
        let kinds_text: Vec<&str> = kinds.iter().map(|&k| kind_name(k)).collect();
        writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}",
            ids_text.join(" "),
            ids.len(),
            kinds_text.join(","),
            count,
            tsv_field(&corpus.surface(ids))
        )
        .unwrap();
        let e = by_n.entry(ids.len()).or_default();
        e.0 += 1;
        e.1 += usize::from(*count == 0);
        e.2 += count;
    }
    ctx.write("freq_audit.tsv", tsv.as_bytes())?;
    let mut summary = String::from("n,queries,unseen,mean_count\n");
    for (n, (q, unseen, total)) in by_n {
        writeln!(summary, "{n},{q},{unseen},{:.6}", total as f64 / q as f64).unwrap();
    }
    ctx.write("freq_audit_summary.csv", summary.as_bytes())
}

const FIXTURE_CONFIG: &str = "\
# Synthetic corpus with planted multi-token items.
corpus = \"corpus\"
annotations = \"annotations.jsonl\"
out = \"out\"
seed = 0
layers = [-1, 0, 1, 5, 9]
offsets = [0, -1, -2]
min_count = 2

[scoring]
L = 9

[report]
scheme = \"last-vs-other\"
kinds = [\"entity\"]
";

fn synth(ctx: &mut Ctx, docs: usize, dtype: Dtype) -> CliResult<()> {
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        n_docs: docs,
        dtype,
        seed: ctx.rec.seed(ctx.cfg.seed, "synth"),
        ..defaults
    };
    let data = spec.generate()?;
    let dir = ctx.out("corpus");
    let manifest = data.corpus.save_dir(&dir)?;
    for name in manifest.files.iter().chain(&manifest.token_strings) {
        ctx.rec.record(&dir.join(name))?;
    }
    ctx.rec.record(&dir.join(MANIFEST_FILE))?;
    ctx.write("annotations.jsonl", data.annotations.to_jsonl()?.as_bytes())?;
    ctx.write("config.toml", FIXTURE_CONFIG.as_bytes())
}
