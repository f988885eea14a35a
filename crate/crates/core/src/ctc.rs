//! Word segmentation from CTC frame posteriors and word-level pooling of
//! frame vectors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;
use thiserror::Error;

use crate::treebank::Token;

/// Reserved name of the CTC blank symbol.
pub const BLANK_SYMBOL: &str = "<blank>";
/// Reserved name of the word-boundary symbol.
pub const SPACE_SYMBOL: &str = "<space>";

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("vocabulary lacks the reserved symbol {0}")]
    MissingReserved(&'static str),
    #[error("symbol `{0}` occurs twice in the vocabulary")]
    DuplicateSymbol(String),
    #[error("posterior has {found} columns for a vocabulary of {expected} symbols")]
    VocabularyMismatch { expected: usize, found: usize },
    #[error("posterior has no frames")]
    NoFrames,
    #[error("frame rate must be positive, got {0}")]
    BadFrameRate(f64),
    #[error("token {0} has no time span")]
    MissingTimestamp(usize),
    #[error("token {token} starts at frame {begin_frame}, past the last of {frames} frames")]
    BeyondSignal {
        token: usize,
        begin_frame: usize,
        frames: usize,
    },
    #[error("span {begin}..={end} is outside a matrix of {frames} frames")]
    SpanOutOfRange {
        begin: usize,
        end: usize,
        frames: usize,
    },
    #[error("recurrent pooling weights: {0}")]
    BadWeights(String),
}

/// Output symbols of an acoustic model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtcVocab {
    symbols: Vec<String>,
    blank: usize,
    space: usize,
}

impl CtcVocab {
    pub fn new(symbols: Vec<String>) -> Result<Self, SegmentError> {
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(SegmentError::DuplicateSymbol(s.clone()));
            }
        }
        let find = |name: &'static str| {
            symbols
                .iter()
                .position(|s| s == name)
                .ok_or(SegmentError::MissingReserved(name))
        };
        let blank = find(BLANK_SYMBOL)?;
        let space = find(SPACE_SYMBOL)?;
        Ok(CtcVocab {
            symbols,
            blank,
            space,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn space(&self) -> usize {
        self.space
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// Per-frame scores over a [`CtcVocab`], `T x |V|`.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePosterior {
    logits: Array2<f64>,
}

impl FramePosterior {
    pub fn new(logits: Array2<f64>, vocab: &CtcVocab) -> Result<Self, SegmentError> {
        if logits.nrows() == 0 {
            return Err(SegmentError::NoFrames);
        }
        if logits.ncols() != vocab.len() {
            return Err(SegmentError::VocabularyMismatch {
                expected: vocab.len(),
                found: logits.ncols(),
            });
        }
        Ok(FramePosterior { logits })
    }

    pub fn num_frames(&self) -> usize {
        self.logits.nrows()
    }

    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WordSpan {
    pub word: String,
    pub begin_frame: usize,
    /// Inclusive.
    pub end_frame: usize,
}

impl WordSpan {
    pub fn new(word: impl Into<String>, begin_frame: usize, end_frame: usize) -> Self {
        WordSpan {
            word: word.into(),
            begin_frame,
            end_frame,
        }
    }
}

/// Best symbol per frame, ties going to the lowest index.
pub fn ctc_greedy_path(posterior: &FramePosterior) -> Vec<usize> {
    posterior.logits.rows().into_iter().map(argmax).collect()
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Collapse a frame path into text: merge adjacent repeats, drop blanks,
/// and render word boundaries as single spaces (no leading, trailing or
/// doubled separators).
pub fn ctc_collapse(path: &[usize], vocab: &CtcVocab) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut prev = None;

    for &symbol in path {
        if prev == Some(symbol) {
            continue;
        }
        prev = Some(symbol);
        if symbol == vocab.blank {
            continue;
        }
        if symbol == vocab.space {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else {
            current.push_str(vocab.symbol(symbol));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }

    words.join(" ")
}

/// Cut a frame path into words with their frame extents.
///
/// A word spans from the first to the last frame that emits one of its
/// characters (repeated frames of a character included). Blank frames
/// inside a word belong to it; blank frames around words and boundary
/// frames belong to no word.
pub fn extract_word_spans(path: &[usize], vocab: &CtcVocab) -> Vec<WordSpan> {
    struct Open {
        word: String,
        begin: usize,
        end: usize,
    }

    let mut spans = Vec::new();
    let mut open: Option<Open> = None;
    let mut prev = None;

    for (frame, &symbol) in path.iter().enumerate() {
        let repeat = prev == Some(symbol);
        prev = Some(symbol);

        if symbol == vocab.blank {
            continue;
        }
        if symbol == vocab.space {
            if let Some(w) = open.take() {
                spans.push(WordSpan::new(w.word, w.begin, w.end));
            }
            continue;
        }

        match open.as_mut() {
            Some(w) => {
                if !repeat {
                    w.word.push_str(vocab.symbol(symbol));
                }
                w.end = frame;
            }
            None => {
                open = Some(Open {
                    word: vocab.symbol(symbol).to_owned(),
                    begin: frame,
                    end: frame,
                });
            }
        }
    }
    if let Some(w) = open {
        spans.push(WordSpan::new(w.word, w.begin, w.end));
    }

    spans
}

/// Convert word time stamps into frame spans.
///
/// `begin = floor(begin_ms * rate / 1000)` and
/// `end = min(T - 1, floor(end_ms * rate / 1000))`. When two consecutive
/// words meet on a shared frame, the earlier word gives it up if it keeps
/// at least one frame; otherwise the later word starts one frame later.
pub fn spans_from_timestamps(
    tokens: &[Token],
    frame_rate_hz: f64,
    num_frames: usize,
) -> Result<Vec<WordSpan>, SegmentError> {
    if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
        return Err(SegmentError::BadFrameRate(frame_rate_hz));
    }
    if num_frames == 0 {
        return Err(SegmentError::NoFrames);
    }
    let to_frame = |ms: u64| (ms as f64 * frame_rate_hz / 1000.0).floor() as usize;

    let mut spans: Vec<WordSpan> = Vec::with_capacity(tokens.len());
    for (i, token) in tokens.iter().enumerate() {
        let span = token.span.ok_or(SegmentError::MissingTimestamp(i + 1))?;
        let mut begin = to_frame(span.begin_ms);
        let mut end = to_frame(span.end_ms).min(num_frames - 1).max(begin);

        if let Some(prev) = spans.last_mut() {
            if begin <= prev.end_frame {
                if begin > prev.begin_frame {
                    prev.end_frame = begin - 1;
                } else {
                    begin = prev.end_frame + 1;
                    end = end.max(begin);
                }
            }
        }
        if begin >= num_frames {
            return Err(SegmentError::BeyondSignal {
                token: i + 1,
                begin_frame: begin,
                frames: num_frames,
            });
        }

        spans.push(WordSpan::new(token.form.clone(), begin, end));
    }

    Ok(spans)
}

/// Single-layer unidirectional LSTM cell. Gate blocks are stacked in the
/// order input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    /// `4h x d`
    pub w_input: Array2<f64>,
    /// `4h x h`
    pub w_hidden: Array2<f64>,
    /// `4h`
    pub bias: Array1<f64>,
}

impl LstmCell {
    pub fn new(
        w_input: Array2<f64>,
        w_hidden: Array2<f64>,
        bias: Array1<f64>,
    ) -> Result<Self, SegmentError> {
        let gates = w_input.nrows();
        if gates == 0 || gates % 4 != 0 {
            return Err(SegmentError::BadWeights(format!(
                "input weights have {} rows, expected a positive multiple of 4",
                gates
            )));
        }
        let hidden = gates / 4;
        if w_hidden.dim() != (gates, hidden) || bias.len() != gates {
            return Err(SegmentError::BadWeights(format!(
                "hidden weights {:?} and bias {} do not match hidden size {}",
                w_hidden.dim(),
                bias.len(),
                hidden
            )));
        }
        Ok(LstmCell {
            w_input,
            w_hidden,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_input.nrows() / 4
    }

    /// Run over `rows` from a zero state and return the last hidden state.
    pub fn run(&self, rows: ArrayView2<f64>) -> Array1<f64> {
        let h_dim = self.hidden_dim();
        let mut hidden = Array1::zeros(h_dim);
        let mut cell = Array1::zeros(h_dim);

        for x in rows.rows() {
            let gates = self.w_input.dot(&x) + self.w_hidden.dot(&hidden) + &self.bias;
            let input = gates.slice(ndarray::s![..h_dim]).mapv(sigmoid);
            let forget = gates.slice(ndarray::s![h_dim..2 * h_dim]).mapv(sigmoid);
            let candidate = gates
                .slice(ndarray::s![2 * h_dim..3 * h_dim])
                .mapv(f64::tanh);
            let output = gates.slice(ndarray::s![3 * h_dim..]).mapv(sigmoid);
            cell = &forget * &cell + &input * &candidate;
            hidden = &output * &cell.mapv(f64::tanh);
        }

        hidden
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pooling {
    Mean,
    Last,
    Recurrent(LstmCell),
}

/// One vector per span, pooled from the rows of `frames`.
pub fn pool_word_vectors(
    frames: ArrayView2<f64>,
    spans: &[WordSpan],
    method: &Pooling,
) -> Result<Vec<Array1<f64>>, SegmentError> {
    if let Pooling::Recurrent(cell) = method {
        if cell.input_dim() != frames.ncols() {
            return Err(SegmentError::BadWeights(format!(
                "cell expects {}-dimensional frames, got {}",
                cell.input_dim(),
                frames.ncols()
            )));
        }
    }

    spans
        .iter()
        .map(|span| {
            if span.begin_frame > span.end_frame || span.end_frame >= frames.nrows() {
                return Err(SegmentError::SpanOutOfRange {
                    begin: span.begin_frame,
                    end: span.end_frame,
                    frames: frames.nrows(),
                });
            }
            let rows = frames.slice(ndarray::s![span.begin_frame..=span.end_frame, ..]);
            Ok(match method {
                Pooling::Mean => rows.mean_axis(ndarray::Axis(0)).unwrap(),
                Pooling::Last => rows.row(rows.nrows() - 1).to_owned(),
                Pooling::Recurrent(cell) => cell.run(rows),
            })
        })
        .collect()
}
