// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk activation shards and the probe datasets assembled from them.

pub mod container;
mod corpus;
mod dataset;
mod ngram;
mod shard;

pub use container::Dtype;
pub use corpus::{Corpus, CorpusManifest, MANIFEST_FILE};
pub use dataset::{
    build_probe_examples, check_offset, split_dataset, ProbeDataset, ProbeExample, SUPPORTED_OFFSETS,
};
pub use ngram::ngram_frequency;
pub use shard::{read_shard, write_shard, ActivationShard, LayerId, Matrix, ModelMeta};
