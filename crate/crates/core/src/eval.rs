//! Alignment-tolerant parse evaluation.
//!
//! Hypothesis and reference tokens are aligned by word-level edit distance.
//! Deleted reference tokens get a dummy partner in the hypothesis, inserted
//! hypothesis tokens a dummy partner in the reference, and every slot with a
//! dummy is a parsing error. Attachment is compared through positions in the
//! padded sequences. With identical token sequences this reduces to the
//! usual POS/UAS/LAS computation.

use std::collections::{HashMap, HashSet};
use std::ops::AddAssign;

use serde::Serialize;
use thiserror::Error;

use crate::treebank::{Corpus, Sentence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("reference is empty, error rate is undefined")]
    EmptyReference,
    #[error("sentence `{0}` of the reference is missing from the hypothesis")]
    MissingHypothesis(String),
    #[error("sentence `{0}` of the hypothesis is missing from the reference")]
    MissingReference(String),
    #[error("sentence id `{0}` occurs more than once")]
    DuplicateSentence(String),
    #[error(
        "sentence `{sent_id}` differs between hypothesis and reference at token {token}; \
         use the alignment-based evaluation for unequal token sequences"
    )]
    TokenMismatch { sent_id: String, token: usize },
}

/// One step of a word alignment. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AlignOp {
    Match {
        hyp: usize,
        reference: usize,
    },
    Substitute {
        hyp: usize,
        reference: usize,
    },
    /// Hypothesis token with no reference counterpart.
    Insert {
        hyp: usize,
    },
    /// Reference token with no hypothesis counterpart.
    Delete {
        reference: usize,
    },
}

impl AlignOp {
    pub fn cost(&self) -> usize {
        match self {
            AlignOp::Match { .. } => 0,
            _ => 1,
        }
    }
}

/// Minimum edit distance alignment with unit costs.
///
/// Among equally cheap alignments the backtrace, walking from the end,
/// prefers match/substitution, then deletion, then insertion.
pub fn levenshtein_align<T: PartialEq>(hyp: &[T], reference: &[T]) -> Vec<AlignOp> {
    let (m, n) = (hyp.len(), reference.len());
    let width = n + 1;
    let mut dist = vec![0usize; (m + 1) * width];
    for j in 0..=n {
        dist[j] = j;
    }
    for i in 1..=m {
        dist[i * width] = i;
        for j in 1..=n {
            let diag = dist[(i - 1) * width + j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            let del = dist[i * width + j - 1] + 1;
            let ins = dist[(i - 1) * width + j] + 1;
            dist[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let same = hyp[i - 1] == reference[j - 1];
            if dist[(i - 1) * width + j - 1] + usize::from(!same) == here {
                ops.push(if same {
                    AlignOp::Match {
                        hyp: i,
                        reference: j,
                    }
                } else {
                    AlignOp::Substitute {
                        hyp: i,
                        reference: j,
                    }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dist[i * width + j - 1] + 1 == here {
            ops.push(AlignOp::Delete { reference: j });
            j -= 1;
        } else {
            ops.push(AlignOp::Insert { hyp: i });
            i -= 1;
        }
    }

    ops.reverse();
    ops
}

fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> usize {
    levenshtein_align(hyp, reference)
        .iter()
        .map(AlignOp::cost)
        .sum()
}

/// Word error rate of `hyp` against `reference`.
pub fn wer<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let h: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    Ok(edit_distance(&h, &r) as f64 / r.len() as f64)
}

/// Character error rate of `hyp_text` against `ref_text`.
pub fn cer(hyp_text: &str, ref_text: &str) -> Result<f64, EvalError> {
    let r: Vec<char> = ref_text.chars().collect();
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let h: Vec<char> = hyp_text.chars().collect();
    Ok(edit_distance(&h, &r) as f64 / r.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalOptions {
    /// Compare forms case-insensitively.
    pub case_fold: bool,
}

/// A real token placed at a padded position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PaddedToken {
    /// Index in the original sentence.
    pub original_index: usize,
    pub form: String,
    pub upos: String,
    /// Padded position of the head, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Slot {
    Dummy,
    Token(PaddedToken),
}

impl Slot {
    pub fn token(&self) -> Option<&PaddedToken> {
        match self {
            Slot::Dummy => None,
            Slot::Token(t) => Some(t),
        }
    }
}

/// Hypothesis and reference padded to equal length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PaddedPair {
    pub hyp: Vec<Slot>,
    pub reference: Vec<Slot>,
}

fn comparable_forms(sentence: &Sentence, options: EvalOptions) -> Vec<String> {
    sentence
        .tokens
        .iter()
        .map(|t| {
            if options.case_fold {
                t.form.to_lowercase()
            } else {
                t.form.clone()
            }
        })
        .collect()
}

/// Align two sentences and insert dummy slots for unmatched tokens.
pub fn align_and_pad(hyp: &Sentence, reference: &Sentence, options: EvalOptions) -> PaddedPair {
    let ops = levenshtein_align(
        &comparable_forms(hyp, options),
        &comparable_forms(reference, options),
    );
    pad_with(hyp, reference, &ops)
}

fn pad_with(hyp: &Sentence, reference: &Sentence, ops: &[AlignOp]) -> PaddedPair {
    // Original 1-based index -> padded 1-based position; slot 0 maps root.
    let mut hyp_pos = vec![0; hyp.len() + 1];
    let mut ref_pos = vec![0; reference.len() + 1];
    for (p, op) in ops.iter().enumerate().map(|(i, op)| (i + 1, op)) {
        match *op {
            AlignOp::Match {
                hyp: h,
                reference: r,
            }
            | AlignOp::Substitute {
                hyp: h,
                reference: r,
            } => {
                hyp_pos[h] = p;
                ref_pos[r] = p;
            }
            AlignOp::Insert { hyp: h } => hyp_pos[h] = p,
            AlignOp::Delete { reference: r } => ref_pos[r] = p,
        }
    }

    let place = |sentence: &Sentence, pos: &[usize], index: Option<usize>| match index {
        None => Slot::Dummy,
        Some(i) => {
            let t = &sentence.tokens[i - 1];
            Slot::Token(PaddedToken {
                original_index: i,
                form: t.form.clone(),
                upos: t.upos.clone(),
                head: pos[t.head],
                deprel: t.deprel.clone(),
            })
        }
    };

    let mut padded = PaddedPair {
        hyp: Vec::with_capacity(ops.len()),
        reference: Vec::with_capacity(ops.len()),
    };
    for op in ops {
        let (h, r) = match *op {
            AlignOp::Match {
                hyp: h,
                reference: r,
            }
            | AlignOp::Substitute {
                hyp: h,
                reference: r,
            } => (Some(h), Some(r)),
            AlignOp::Insert { hyp: h } => (Some(h), None),
            AlignOp::Delete { reference: r } => (None, Some(r)),
        };
        padded.hyp.push(place(hyp, &hyp_pos, h));
        padded.reference.push(place(reference, &ref_pos, r));
    }

    padded
}

/// Integer tallies behind an [`EvalReport`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub ref_tokens: usize,
    pub hyp_tokens: usize,
    pub matches: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub correct_pos: usize,
    pub correct_heads: usize,
    pub correct_heads_and_labels: usize,
    /// Character edit distance between the space-joined transcriptions.
    pub char_edits: usize,
    /// Characters in the space-joined reference transcription.
    pub ref_chars: usize,
}

impl EvalCounts {
    pub fn word_edits(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        self.ref_tokens += o.ref_tokens;
        self.hyp_tokens += o.hyp_tokens;
        self.matches += o.matches;
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
        self.correct_pos += o.correct_pos;
        self.correct_heads += o.correct_heads;
        self.correct_heads_and_labels += o.correct_heads_and_labels;
        self.char_edits += o.char_edits;
        self.ref_chars += o.ref_chars;
    }
}

/// Word-level and parsing counts of one padded pair. Character counts are
/// left at zero.
pub fn score_pair(pair: &PaddedPair, options: EvalOptions) -> EvalCounts {
    let mut c = EvalCounts::default();
    for (h, r) in pair.hyp.iter().zip(&pair.reference) {
        match (h.token(), r.token()) {
            (Some(h), Some(r)) => {
                c.hyp_tokens += 1;
                c.ref_tokens += 1;
                let same_form = if options.case_fold {
                    h.form.to_lowercase() == r.form.to_lowercase()
                } else {
                    h.form == r.form
                };
                if same_form {
                    c.matches += 1;
                } else {
                    c.substitutions += 1;
                }
                c.correct_pos += usize::from(h.upos == r.upos);
                if h.head == r.head {
                    c.correct_heads += 1;
                    c.correct_heads_and_labels += usize::from(h.deprel == r.deprel);
                }
            }
            (Some(_), None) => {
                c.hyp_tokens += 1;
                c.insertions += 1;
            }
            (None, Some(_)) => {
                c.ref_tokens += 1;
                c.deletions += 1;
            }
            (None, None) => {}
        }
    }
    c
}

fn char_counts(hyp: &Sentence, reference: &Sentence, options: EvalOptions) -> (usize, usize) {
    let text =
        |s: &Sentence| -> Vec<char> { comparable_forms(s, options).join(" ").chars().collect() };
    let r = text(reference);
    (edit_distance(&text(hyp), &r), r.len())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SentenceEval {
    pub sent_id: String,
    pub counts: EvalCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub wer: f64,
    pub cer: f64,
    pub pos_acc: f64,
    pub uas: f64,
    pub las: f64,
    pub counts: EvalCounts,
    pub sentences: Vec<SentenceEval>,
}

impl EvalReport {
    /// Micro-averaged rates over per-sentence counts.
    pub fn from_sentences(sentences: Vec<SentenceEval>) -> Result<Self, EvalError> {
        let mut counts = EvalCounts::default();
        for s in &sentences {
            counts += s.counts;
        }
        if counts.ref_tokens == 0 {
            return Err(EvalError::EmptyReference);
        }
        let tokens = counts.ref_tokens as f64;
        let cer = if counts.ref_chars == 0 {
            0.0
        } else {
            counts.char_edits as f64 / counts.ref_chars as f64
        };
        Ok(EvalReport {
            wer: counts.word_edits() as f64 / tokens,
            cer,
            pos_acc: counts.correct_pos as f64 / tokens,
            uas: counts.correct_heads as f64 / tokens,
            las: counts.correct_heads_and_labels as f64 / tokens,
            counts,
            sentences,
        })
    }
}

/// Pair sentences by id, in reference order.
fn pair_sentences<'a>(
    hyp: &'a Corpus,
    reference: &'a Corpus,
) -> Result<Vec<(&'a Sentence, &'a Sentence)>, EvalError> {
    let mut by_id = HashMap::with_capacity(hyp.len());
    for s in &hyp.sentences {
        if by_id.insert(s.sent_id.as_str(), s).is_some() {
            return Err(EvalError::DuplicateSentence(s.sent_id.clone()));
        }
    }

    let mut seen = HashSet::with_capacity(reference.len());
    let mut pairs = Vec::with_capacity(reference.len());
    for r in &reference.sentences {
        if !seen.insert(r.sent_id.as_str()) {
            return Err(EvalError::DuplicateSentence(r.sent_id.clone()));
        }
        let h = by_id
            .get(r.sent_id.as_str())
            .ok_or_else(|| EvalError::MissingHypothesis(r.sent_id.clone()))?;
        pairs.push((*h, r));
    }
    if let Some(extra) = hyp
        .sentences
        .iter()
        .find(|s| !seen.contains(s.sent_id.as_str()))
    {
        return Err(EvalError::MissingReference(extra.sent_id.clone()));
    }

    Ok(pairs)
}

/// Counts for a single sentence pair, alignment-based.
pub fn evaluate_sentence(hyp: &Sentence, reference: &Sentence, options: EvalOptions) -> EvalCounts {
    let pair = align_and_pad(hyp, reference, options);
    let mut counts = score_pair(&pair, options);
    let (char_edits, ref_chars) = char_counts(hyp, reference, options);
    counts.char_edits = char_edits;
    counts.ref_chars = ref_chars;
    counts
}

/// Corpus-level evaluation tolerating differing token sequences.
pub fn evaluate_corpus(
    hyp: &Corpus,
    reference: &Corpus,
    options: EvalOptions,
) -> Result<EvalReport, EvalError> {
    let sentences = pair_sentences(hyp, reference)?
        .into_iter()
        .map(|(h, r)| SentenceEval {
            sent_id: r.sent_id.clone(),
            counts: evaluate_sentence(h, r, options),
        })
        .collect();
    EvalReport::from_sentences(sentences)
}

/// Classic evaluation for token-identical corpora.
pub fn evaluate_standard(
    hyp: &Corpus,
    reference: &Corpus,
    options: EvalOptions,
) -> Result<EvalReport, EvalError> {
    let pairs = pair_sentences(hyp, reference)?;
    let mut sentences = Vec::with_capacity(pairs.len());

    for (h, r) in pairs {
        let h_forms = comparable_forms(h, options);
        let r_forms = comparable_forms(r, options);
        if let Some(token) = (0..h.len().max(r.len())).find(|&i| h_forms.get(i) != r_forms.get(i)) {
            return Err(EvalError::TokenMismatch {
                sent_id: r.sent_id.clone(),
                token: token + 1,
            });
        }

        let n = r.len();
        let mut counts = EvalCounts {
            ref_tokens: n,
            hyp_tokens: n,
            matches: n,
            ref_chars: r_forms.join(" ").chars().count(),
            ..EvalCounts::default()
        };
        for (ht, rt) in h.tokens.iter().zip(&r.tokens) {
            counts.correct_pos += usize::from(ht.upos == rt.upos);
            if ht.head == rt.head {
                counts.correct_heads += 1;
                counts.correct_heads_and_labels += usize::from(ht.deprel == rt.deprel);
            }
        }
        sentences.push(SentenceEval {
            sent_id: r.sent_id.clone(),
            counts,
        });
    }

    EvalReport::from_sentences(sentences)
}
