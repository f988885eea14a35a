//! Corpus statistics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::treebank::{Corpus, Sentence};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub upos: BTreeMap<String, usize>,
    pub deprels: BTreeMap<String, usize>,
    /// Number of root attachments -> number of sentences.
    pub root_arity: BTreeMap<usize, usize>,
    pub projective_sentences: usize,
    /// Projective share of the non-empty sentences.
    pub projectivity_rate: f64,
}

/// Whether no arc crosses another, the virtual root sitting left of the
/// first token.
pub fn is_projective(sentence: &Sentence) -> bool {
    let heads = sentence.heads();
    let n = heads.len();
    let dominates = |ancestor: usize, mut v: usize| {
        // Bounded walk guards against cyclic input.
        for _ in 0..=n {
            if v == ancestor {
                return true;
            }
            if v == 0 {
                return false;
            }
            v = heads[v - 1];
        }
        false
    };

    heads.iter().enumerate().all(|(d, &h)| {
        let d = d + 1;
        let (lo, hi) = if h < d { (h, d) } else { (d, h) };
        (lo + 1..hi).all(|v| dominates(h, v))
    })
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        sentences: corpus.len(),
        tokens: corpus.token_count(),
        ..CorpusStats::default()
    };

    let mut non_empty = 0;
    for sentence in &corpus.sentences {
        for token in &sentence.tokens {
            *stats.upos.entry(token.upos.clone()).or_default() += 1;
            *stats.deprels.entry(token.deprel.clone()).or_default() += 1;
        }
        let roots = sentence.tokens.iter().filter(|t| t.head == 0).count();
        *stats.root_arity.entry(roots).or_default() += 1;
        if !sentence.is_empty() {
            non_empty += 1;
            if is_projective(sentence) {
                stats.projective_sentences += 1;
            }
        }
    }
    stats.projectivity_rate = if non_empty == 0 {
        0.0
    } else {
        stats.projective_sentences as f64 / non_empty as f64
    };

    stats
}
