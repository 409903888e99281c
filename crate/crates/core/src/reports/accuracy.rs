// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, SpanKind};
use crate::error::{Error, Result};
use crate::probe::ProbeGrid;
use crate::store::{build_probe_examples, Corpus, LayerId};

/// How token positions are grouped into curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Last tokens of annotated spans versus every other token.
    LastVsOther,
    /// First, middle and last tokens of multi-token spans, plus others.
    /// Examples labeled with BOS are dropped.
    FirstMiddleLast,
    /// Last tokens of annotated spans grouped by span length, plus others.
    ByNgramLength,
    /// Every position of every document.
    Overall,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last-vs-other" => Ok(Scheme::LastVsOther),
            "first-middle-last" => Ok(Scheme::FirstMiddleLast),
            "by-ngram-length" => Ok(Scheme::ByNgramLength),
            "overall" => Ok(Scheme::Overall),
            other => Err(Error::Config(format!("unknown breakdown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub accuracy: f64,
    pub n: usize,
}

/// Top-1 accuracy per layer for one class of positions and one offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub class: String,
    pub offset: i32,
    pub points: BTreeMap<LayerId, CurvePoint>,
}

pub const CLASS_LAST: &str = "last";
pub const CLASS_FIRST: &str = "first";
pub const CLASS_MIDDLE: &str = "middle";
pub const CLASS_OTHER: &str = "other";
pub const CLASS_OVERALL: &str = "overall";

fn ngram_class(n: usize) -> String {
    if n >= 4 {
        "4+-gram".to_string()
    } else {
        format!("{n}-gram")
    }
}

/// Class of each position of each evaluated document.
fn classify(
    corpus: &Corpus,
    annotations: &AnnotationSet,
    scheme: Scheme,
    kinds: &[SpanKind],
) -> Result<HashMap<String, Vec<Option<String>>>> {
    let mut out = HashMap::new();
    if scheme == Scheme::Overall {
        for d in corpus.documents() {
            out.insert(d.doc_id.clone(), vec![Some(CLASS_OVERALL.to_string()); d.len()]);
        }
        return Ok(out);
    }
    annotations.validate_against(corpus)?;
    let kind_set: BTreeSet<SpanKind> = kinds.iter().copied().collect();
    let targeted = |k: SpanKind| kind_set.contains(&k);
    if !kinds.iter().any(|&k| annotations.has_kind(k)) {
        return Err(Error::Annotation(format!(
            "scheme {scheme:?} needs spans of kind {kinds:?}, none annotated"
        )));
    }
    for (doc_id, spans) in annotations.iter() {
        let len = corpus.get(doc_id).expect("validated").len();
        let mut classes: Vec<Option<String>> = vec![Some(CLASS_OTHER.to_string()); len];
        // Lower rank wins when spans overlap.
        let mut rank = vec![u8::MAX; len];
        let mut assign = |pos: usize, class: String, r: u8, classes: &mut Vec<Option<String>>| {
            if r < rank[pos] {
                rank[pos] = r;
                classes[pos] = Some(class);
            }
        };
        for s in spans.iter().filter(|s| targeted(s.kind)) {
            match scheme {
                Scheme::LastVsOther => assign(s.end, CLASS_LAST.into(), 0, &mut classes),
                Scheme::ByNgramLength => assign(s.end, ngram_class(s.len()), 0, &mut classes),
                Scheme::FirstMiddleLast if s.len() >= 2 => {
                    assign(s.end, CLASS_LAST.into(), 0, &mut classes);
                    assign(s.start, CLASS_FIRST.into(), 1, &mut classes);
                    for pos in s.start + 1..s.end {
                        assign(pos, CLASS_MIDDLE.into(), 2, &mut classes);
                    }
                }
                // Single-token spans are neither first, middle nor last of
                // a multi-token unit, nor "other".
                Scheme::FirstMiddleLast => assign(s.end, String::new(), 3, &mut classes),
                Scheme::Overall => unreachable!(),
            }
        }
        for c in classes.iter_mut() {
            if c.as_deref() == Some("") {
                *c = None;
            }
        }
        out.insert(doc_id.to_string(), classes);
    }
    Ok(out)
}

/// Accuracy curves over the probe grid for the position classes of
/// `scheme`. Spans of `kinds` define the classes (ignored for
/// [`Scheme::Overall`]); only annotated documents are evaluated.
pub fn accuracy_breakdown(
    probes: &ProbeGrid,
    corpus: &Corpus,
    annotations: &AnnotationSet,
    scheme: Scheme,
    kinds: &[SpanKind],
) -> Result<Vec<AccuracyCurve>> {
    if probes.is_empty() {
        return Err(Error::Config("empty probe grid".into()));
    }
    let classes = classify(corpus, annotations, scheme, kinds)?;
    let bos: HashMap<&str, Option<u32>> = corpus
        .documents()
        .iter()
        .map(|d| (d.doc_id.as_str(), d.meta.bos_token_id))
        .collect();
    let mut curves: BTreeMap<(String, i32), BTreeMap<LayerId, (usize, usize)>> = BTreeMap::new();
    for (&(layer, offset), probe) in probes {
        let ds = build_probe_examples(corpus, layer, offset)?;
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for ex in &ds.examples {
            let Some(Some(class)) = classes.get(&*ex.doc_id).map(|c| &c[ex.position]) else {
                continue;
            };
            if scheme == Scheme::FirstMiddleLast
                && ds.target_position(ex) == 0
                && bos[&*ex.doc_id] == Some(ex.target)
            {
                continue;
            }
            let c = counts.entry(class.as_str()).or_default();
            c.1 += 1;
            if probe.predict(&ex.hidden)? == ex.target {
                c.0 += 1;
            }
        }
        for (class, c) in counts {
            curves
                .entry((class.to_string(), offset))
                .or_default()
                .insert(layer, c);
        }
    }
    Ok(curves
        .into_iter()
        .map(|((class, offset), pts)| AccuracyCurve {
            class,
            offset,
            points: pts
                .into_iter()
                .map(|(layer, (correct, n))| {
                    (
                        layer,
                        CurvePoint {
                            accuracy: correct as f64 / n as f64,
                            n,
                        },
                    )
                })
                .collect(),
        })
        .collect())
}
