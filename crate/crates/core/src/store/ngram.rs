// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Counts overlapping occurrences of every query inside each document.
/// Matches never span two documents.
pub fn ngram_frequency(token_corpus: &[Vec<u32>], queries: &[Vec<u32>]) -> Result<BTreeMap<Vec<u32>, u64>> {
    if queries.iter().any(|q| q.is_empty()) {
        return Err(Error::EmptyQuery);
    }
    let mut counts: HashMap<&[u32], u64> = queries.iter().map(|q| (q.as_slice(), 0)).collect();
    let lengths: BTreeSet<usize> = queries.iter().map(Vec::len).collect();
    for doc in token_corpus {
        for &n in &lengths {
            if n > doc.len() {
                break;
            }
            for window in doc.windows(n) {
                if let Some(c) = counts.get_mut(window) {
                    *c += 1;
                }
            }
        }
    }
    Ok(counts.into_iter().map(|(k, v)| (k.to_vec(), v)).collect())
}
