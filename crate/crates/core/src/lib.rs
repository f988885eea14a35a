//! Dependency parsing of speech recognition output.
//!
//! The crate covers the pieces needed to go from acoustic model output to
//! scored dependency trees:
//!
//! * [`treebank`]: sentences, tokens and CoNLL-U reading/writing;
//! * [`relpos`]: the relative POS-based `±k@POS` tree encoding;
//! * [`graph`]: biaffine arc scoring and maximum spanning tree decoding;
//! * [`ctc`]: word segmentation of CTC frame paths and span pooling;
//! * [`eval`]: WER/CER and POS/UAS/LAS over token sequences of unequal
//!   length;
//! * [`perturb`] and [`stats`]: corpus corruption and statistics;
//! * [`formats`]: the plain-text interchange files used by the CLI.

pub mod ctc;
pub mod eval;
pub mod formats;
pub mod graph;
pub mod perturb;
pub mod relpos;
pub mod stats;
pub mod treebank;

pub use ctc::{
    ctc_collapse, ctc_greedy_path, extract_word_spans, pool_word_vectors, spans_from_timestamps,
    CtcVocab, FramePosterior, LstmCell, Pooling, WordSpan,
};
pub use eval::{
    align_and_pad, cer, evaluate_corpus, evaluate_standard, levenshtein_align, score_pair, wer,
    AlignOp, EvalCounts, EvalOptions, EvalReport, PaddedPair,
};
pub use graph::{
    assign_labels, biaffine_scores, decode_mst, decode_mst_bruteforce, ArcScoreMatrix,
    BiaffineParams, LabelScoreTensor,
};
pub use perturb::{perturb_corpus, PerturbSpec};
pub use relpos::{decode_relpos, encode_relpos, label_vocabulary, RelPosLabel};
pub use treebank::{
    parse_conllu, validate_tree, write_conllu, Corpus, RootPolicy, Sentence, TimeSpan, Token,
};
