// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use std::collections::{BTreeMap, BTreeSet};

use erasure_core::annotations::{AnnotationSet, AnnotationSpan, SpanKind};
use erasure_core::probe::softmax;
use erasure_core::scoring::{erasure_score, DeltaTable, SCORE_OFFSETS};
use erasure_core::segment::{greedy_order, segment_document, ScoredSpan, Segmentation};
use erasure_core::store::{
    build_probe_examples, split_dataset, ActivationShard, Corpus, Dtype, Matrix, ModelMeta,
};
use erasure_core::vocab::{aggregate_vocab, evaluate_vocab, VocabEntry};
use half::f16;
use proptest::prelude::*;

fn shard_strategy() -> impl Strategy<Value = ActivationShard> {
    (
        1usize..=64,
        1usize..=64,
        prop::bool::ANY,
        prop::collection::btree_set(-1i32..34, 1..4),
    )
        .prop_flat_map(|(t, dim, half, layers)| {
            let cells = t * dim * layers.len();
            (
                Just((t, dim, half, layers)),
                prop::collection::vec(any::<u32>(), cells),
                prop::collection::vec(0u32..50_000, t),
            )
        })
        .prop_map(|((t, dim, half, layers), bits, tokens)| {
            let dtype = if half { Dtype::F16 } else { Dtype::F32 };
            let mut activations = BTreeMap::new();
            for (k, layer) in layers.iter().enumerate() {
                let data = bits[k * t * dim..(k + 1) * t * dim]
                    .iter()
                    .map(|&b| {
                        if half {
                            f16::from_bits(b as u16).to_f32()
                        } else {
                            f32::from_bits(b)
                        }
                    })
                    .collect();
                activations.insert(*layer, Matrix::new(t, dim, data).unwrap());
            }
            ActivationShard {
                doc_id: format!("doc-{t}-{dim}"),
                token_ids: tokens,
                activations,
                meta: ModelMeta {
                    name: "prop".into(),
                    hidden_dim: dim,
                    vocab_size: 50_000,
                    dtype,
                    bos_token_id: Some(1),
                },
            }
        })
}

fn deltas_strategy(max_len: usize) -> impl Strategy<Value = DeltaTable> {
    (1..=max_len)
        .prop_flat_map(|len| (Just(len), prop::collection::vec(-1.0f64..=1.0, len * 3)))
        .prop_map(|(len, vals)| DeltaTable::from_fn("d", len, |t, i| vals[t * 3 + (-i) as usize]).unwrap())
}

fn spans_for(len: usize, scores: &[f64]) -> Vec<ScoredSpan> {
    let mut out = Vec::new();
    let mut k = 0;
    for p in 0..len {
        for q in p..len {
            out.push(ScoredSpan {
                p,
                q,
                psi: scores[k % scores.len()],
            });
            k += 1;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shard_bytes_roundtrip_exactly(shard in shard_strategy()) {
        let bytes = shard.to_bytes().unwrap();
        let back = ActivationShard::from_bytes(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert!(back.bit_eq(&shard));
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn probe_example_count(lens in prop::collection::vec(1usize..12, 1..5), offset in -3i32..=1) {
        let docs = lens.iter().enumerate().map(|(d, &t)| {
            let mut activations = BTreeMap::new();
            activations.insert(1, Matrix::zeros(t, 2));
            ActivationShard {
                doc_id: format!("d{d}"),
                token_ids: vec![0; t],
                activations,
                meta: ModelMeta { name: "p".into(), hidden_dim: 2, vocab_size: 3, dtype: Dtype::F32, bos_token_id: None },
            }
        }).collect();
        let corpus = Corpus::new(docs).unwrap();
        let ds = build_probe_examples(&corpus, 1, offset).unwrap();
        let want: usize = lens.iter().map(|&t| t.saturating_sub(offset.unsigned_abs() as usize)).sum();
        prop_assert_eq!(ds.len(), want);
        for ex in &ds.examples {
            let target = ex.position as i64 + offset as i64;
            let len = corpus.get(&ex.doc_id).unwrap().len() as i64;
            prop_assert!(target >= 0 && target < len);
        }
    }

    #[test]
    fn split_is_a_partition(n in 1usize..80, fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let mut activations = BTreeMap::new();
        activations.insert(1, Matrix::zeros(n, 1));
        let doc = ActivationShard {
            doc_id: "d".into(),
            token_ids: vec![0; n],
            activations,
            meta: ModelMeta { name: "p".into(), hidden_dim: 1, vocab_size: 1, dtype: Dtype::F32, bos_token_id: None },
        };
        let ds = build_probe_examples(&Corpus::new(vec![doc]).unwrap(), 1, 0).unwrap();
        let (a, b) = split_dataset(&ds, fraction, seed).unwrap();
        let pa: BTreeSet<usize> = a.examples.iter().map(|e| e.position).collect();
        let pb: BTreeSet<usize> = b.examples.iter().map(|e| e.position).collect();
        prop_assert!(pa.is_disjoint(&pb));
        prop_assert_eq!(pa.len() + pb.len(), n);
        prop_assert_eq!(a.len(), (fraction * n as f64 - 1e-9).ceil() as usize);
    }

    #[test]
    fn softmax_normalized_and_shift_invariant(
        logits in prop::collection::vec(-1e4f64..1e4, 1..32),
        shift in -1e4f64..1e4,
    ) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn psi_is_bounded(table in deltas_strategy(16)) {
        for p in 0..table.doc_len() {
            for q in p..table.doc_len() {
                let psi = erasure_score(&table, p, q).unwrap();
                prop_assert!((-1.0..=1.0).contains(&psi));
            }
        }
    }

    #[test]
    fn psi_monotone_in_each_delta(
        table in deltas_strategy(10),
        pick in any::<prop::sample::Index>(),
        bump in 0.0f64..0.5,
    ) {
        let len = table.doc_len();
        let spans: Vec<(usize, usize)> = (0..len).flat_map(|p| (p..len).map(move |q| (p, q))).collect();
        let (p, q) = spans[pick.index(spans.len())];
        // Raise one entry (clamped) and check the sign of the change.
        for t in p..=q {
            for &i in &SCORE_OFFSETS {
                if i == 0 && t != q { continue; }
                let Some(old) = table.get(t, i) else { continue };
                let new = (old + bump).min(1.0);
                let raised = DeltaTable::from_fn("d", len, |tt, ii| {
                    if (tt, ii) == (t, i) { new } else { table.get(tt, ii).unwrap() }
                }).unwrap();
                let before = erasure_score(&table, p, q).unwrap();
                let after = erasure_score(&raised, p, q).unwrap();
                if (t as i64 + i as i64) < p as i64 {
                    prop_assert!(after <= before + 1e-15);
                } else {
                    prop_assert!(after >= before - 1e-15);
                }
            }
        }
    }

    #[test]
    fn segmentation_partitions_and_ignores_input_order(
        len in 1usize..=32,
        scores in prop::collection::vec(-1.0f64..1.0, 1..200),
        rotate in any::<prop::sample::Index>(),
    ) {
        let spans = spans_for(len, &scores);
        let seg = segment_document("d", &spans, len).unwrap();
        seg.check_partition().unwrap();
        let mut rotated = spans.clone();
        rotated.rotate_left(rotate.index(spans.len()));
        rotated.reverse();
        prop_assert_eq!(segment_document("d", &rotated, len).unwrap(), seg.clone());

        // Greedy dominance: each kept span beats every overlapping span
        // that was visited before it.
        let mut visited = spans.clone();
        visited.sort_by(greedy_order);
        for kept in &seg.segments {
            for other in visited.iter().take_while(|s| *s != kept) {
                if other.overlaps(kept) {
                    prop_assert!(seg.segments.iter().any(|s| s != kept && s.overlaps(other)));
                }
            }
            for other in &spans {
                if other.overlaps(kept) && !seg.segments.contains(other) {
                    let before = greedy_order(other, kept).is_lt();
                    prop_assert!(!before || seg.segments.iter().any(|s| s != kept && s.overlaps(other)));
                    if !before {
                        prop_assert!(kept.psi >= other.psi);
                    }
                }
            }
        }
    }

    #[test]
    fn aggregation_is_order_independent(
        docs in prop::collection::vec((prop::collection::vec(0u32..3, 1..12), any::<u64>()), 1..8),
        perm_seed in any::<u64>(),
    ) {
        let mut shards = Vec::new();
        let mut segs = Vec::new();
        for (d, (tokens, seed)) in docs.iter().enumerate() {
            shards.push(ActivationShard {
                doc_id: format!("d{d}"),
                token_ids: tokens.clone(),
                activations: BTreeMap::new(),
                meta: ModelMeta { name: "p".into(), hidden_dim: 1, vocab_size: 3, dtype: Dtype::F32, bos_token_id: None },
            });
            let mut segments = Vec::new();
            let mut p = 0;
            let mut s = *seed;
            while p < tokens.len() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let q = (p + (s >> 62) as usize).min(tokens.len() - 1);
                segments.push(ScoredSpan { p, q, psi: ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0 });
                p = q + 1;
            }
            segs.push(Segmentation { doc_id: format!("d{d}"), doc_len: tokens.len(), segments });
        }
        let corpus = Corpus::new(shards).unwrap();
        let base = aggregate_vocab(&segs, &corpus, 2).unwrap();
        let mut permuted = segs.clone();
        let k = (perm_seed % permuted.len() as u64) as usize;
        permuted.rotate_left(k);
        permuted.reverse();
        let again = aggregate_vocab(&permuted, &corpus, 2).unwrap();
        prop_assert_eq!(&base, &again);
        // Every entry really occurs at least min_count times.
        for e in &base {
            let occurrences = segs.iter().flat_map(|s| {
                let toks = &corpus.get(&s.doc_id).unwrap().token_ids;
                s.segments.iter().filter(move |sp| sp.q > sp.p && toks[sp.p..=sp.q] == e.token_ids[..])
            }).count();
            prop_assert!(occurrences >= 2);
            prop_assert_eq!(occurrences, e.ct);
        }
    }

    #[test]
    fn precision_recall_bounded_and_recall_denominator_fixed(
        tokens in prop::collection::vec(0u32..4, 4..20),
        keys in prop::collection::vec(prop::collection::vec(0u32..4, 2..4), 0..6),
    ) {
        let doc = ActivationShard {
            doc_id: "d".into(),
            token_ids: tokens.clone(),
            activations: BTreeMap::new(),
            meta: ModelMeta { name: "p".into(), hidden_dim: 1, vocab_size: 4, dtype: Dtype::F32, bos_token_id: None },
        };
        let corpus = Corpus::new(vec![doc]).unwrap();
        let mut ann = AnnotationSet::new();
        let spans = (0..tokens.len() - 1).step_by(2).map(|s| AnnotationSpan {
            start: s, end: s + 1, kind: if s % 4 == 0 { SpanKind::Word } else { SpanKind::Entity }, label: String::new(),
        }).collect();
        ann.insert("d", spans).unwrap();
        let mut dedup: Vec<Vec<u32>> = keys.clone();
        dedup.sort();
        dedup.dedup();
        let vocab: Vec<VocabEntry> = dedup.iter().map(|k| VocabEntry {
            token_ids: k.clone(), surface: String::new(), n: k.len(), ct: 2, psi_mean: 0.0,
        }).collect();
        let ev = evaluate_vocab(&vocab, &ann, &corpus).unwrap();
        let empty = evaluate_vocab(&[], &ann, &corpus).unwrap();
        for (pr, base) in [(&ev.mtw, &empty.mtw), (&ev.mte, &empty.mte)] {
            prop_assert!((0.0..=1.0).contains(&pr.precision));
            prop_assert!((0.0..=1.0).contains(&pr.recall));
            prop_assert_eq!(pr.reference_size, base.reference_size);
        }
        prop_assert!(ev.either_precision >= ev.mtw.precision.max(ev.mte.precision) - 1e-15);
    }
}
