//! Plain-text interchange files: relative-POS label files, token files,
//! arc-score files, CTC posteriors and vocabularies, frame matrices, span
//! files and flat tensor files.
//!
//! All formats are UTF-8, LF-terminated and tab- or whitespace-separated.
//! Line numbers in errors are 1-based.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Array3};
use thiserror::Error;

use crate::ctc::{CtcVocab, LstmCell, SegmentError, WordSpan};
use crate::graph::{ArcScoreMatrix, GraphError, LabelScoreTensor};
use crate::relpos::{encode_relpos, RelPosLabel};
use crate::treebank::Corpus;

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        FormatError {
            line,
            message: message.into(),
        }
    }
}

/// A blank-line separated block of tab-separated rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TabularBlock {
    pub sent_id: String,
    /// Line number of each row.
    pub lines: Vec<usize>,
    pub rows: Vec<Vec<String>>,
}

/// Read blocks of tab-separated rows with exactly `columns` fields.
/// `# sent_id = ...` names a block; other comments are skipped. Unnamed
/// blocks are numbered by ordinal.
pub fn parse_tabular_blocks(text: &str, columns: usize) -> Result<Vec<TabularBlock>, FormatError> {
    let mut blocks = Vec::new();
    let mut current: Option<(Option<String>, TabularBlock)> = None;

    let finish = |blocks: &mut Vec<TabularBlock>,
                  (id, mut block): (Option<String>, TabularBlock)| {
        block.sent_id = id.unwrap_or_else(|| (blocks.len() + 1).to_string());
        blocks.push(block);
    };

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            if let Some(c) = current.take() {
                finish(&mut blocks, c);
            }
            continue;
        }
        let (id, block) = current.get_or_insert_with(|| {
            (
                None,
                TabularBlock {
                    sent_id: String::new(),
                    lines: Vec::new(),
                    rows: Vec::new(),
                },
            )
        });
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment
                .trim_start()
                .strip_prefix("sent_id")
                .and_then(|r| r.trim_start().strip_prefix('='))
            {
                id.get_or_insert_with(|| value.trim().to_owned());
            }
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if fields.len() != columns {
            return Err(FormatError::new(
                lineno,
                format!(
                    "expected {} tab-separated fields, found {}",
                    columns,
                    fields.len()
                ),
            ));
        }
        block.lines.push(lineno);
        block.rows.push(fields);
    }
    if let Some(c) = current.take() {
        finish(&mut blocks, c);
    }

    Ok(blocks)
}

/// One token row of a label file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRow {
    pub form: String,
    pub pos: String,
    pub label: RelPosLabel,
    pub deprel: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSentence {
    pub sent_id: String,
    pub rows: Vec<LabelRow>,
}

/// Read a `form<TAB>pos<TAB>label<TAB>deprel` file.
pub fn parse_label_file(text: &str) -> Result<Vec<LabelSentence>, FormatError> {
    parse_tabular_blocks(text, 4)?
        .into_iter()
        .map(|block| {
            let rows = block
                .rows
                .into_iter()
                .zip(block.lines)
                .map(|(mut f, line)| {
                    let label = f[2].parse().map_err(|e: crate::relpos::CodecError| {
                        FormatError::new(line, e.to_string())
                    })?;
                    let deprel = std::mem::take(&mut f[3]);
                    let pos = std::mem::take(&mut f[1]);
                    let form = std::mem::take(&mut f[0]);
                    Ok(LabelRow {
                        form,
                        pos,
                        label,
                        deprel,
                    })
                })
                .collect::<Result<_, _>>()?;
            Ok(LabelSentence {
                sent_id: block.sent_id,
                rows,
            })
        })
        .collect()
}

/// Encode a corpus as a label file.
pub fn write_label_file(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        writeln!(out, "# sent_id = {}", sentence.sent_id).unwrap();
        for (token, label) in sentence.tokens.iter().zip(encode_relpos(sentence)) {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                token.form, token.upos, label, token.deprel
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

/// Forms and POS tags of one sentence to be parsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSentence {
    pub sent_id: String,
    pub forms: Vec<String>,
    pub pos: Vec<String>,
}

/// Read a `form<TAB>pos` file.
pub fn parse_token_file(text: &str) -> Result<Vec<TokenSentence>, FormatError> {
    Ok(parse_tabular_blocks(text, 2)?
        .into_iter()
        .map(|block| {
            let (forms, pos) = block
                .rows
                .into_iter()
                .map(|mut r| (std::mem::take(&mut r[0]), std::mem::take(&mut r[1])))
                .unzip();
            TokenSentence {
                sent_id: block.sent_id,
                forms,
                pos,
            }
        })
        .collect())
}

/// Iterator over non-blank lines with their numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            if !line.trim().is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect_content(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        let last = self.last;
        self.next_content().ok_or_else(|| {
            FormatError::new(
                last + 1,
                format!("unexpected end of file, expected {}", what),
            )
        })
    }
}

fn parse_reals(line: usize, text: &str, expected: usize) -> Result<Vec<f64>, FormatError> {
    let values = text
        .split_whitespace()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| FormatError::new(line, format!("invalid number `{}`", v)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(FormatError::new(
            line,
            format!("expected {} values, found {}", expected, values.len()),
        ));
    }
    Ok(values)
}

/// `#<tag> <id> <int>...` header.
fn parse_header<'a>(
    line: usize,
    text: &'a str,
    tag: &str,
    ints: usize,
) -> Result<(&'a str, Vec<usize>), FormatError> {
    let mut fields = text.split_whitespace();
    if fields.next() != Some(tag) {
        return Err(FormatError::new(
            line,
            format!("expected a `{}` header", tag),
        ));
    }
    let bad = || FormatError::new(line, format!("malformed `{}` header", tag));
    let id = fields.next().ok_or_else(bad)?;
    let dims = fields
        .map(|f| f.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if dims.len() != ints {
        return Err(bad());
    }
    Ok((id, dims))
}

fn read_matrix(
    lines: &mut Lines,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<(usize, Array2<f64>), FormatError> {
    let mut data = Vec::with_capacity(rows * cols);
    let mut first = lines.last + 1;
    for r in 0..rows {
        let (lineno, line) = lines.expect_content(what)?;
        if r == 0 {
            first = lineno;
        }
        data.extend(parse_reals(lineno, line, cols)?);
    }
    Ok((first, Array2::from_shape_vec((rows, cols), data).unwrap()))
}

/// Arc and (optionally) relation scores of one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreBlock {
    pub sent_id: String,
    pub arcs: ArcScoreMatrix,
    pub labels: Option<LabelScoreTensor>,
}

fn graph_error(line: usize, e: GraphError) -> FormatError {
    FormatError::new(line, e.to_string())
}

/// Read an arc-score file: per sentence a `#scores sent_id n L` header,
/// `n + 1` rows of `n` arc scores, then `(n + 1) * n` rows of `L` relation
/// scores (head-major) when `L > 0`.
pub fn parse_score_file(text: &str) -> Result<Vec<ScoreBlock>, FormatError> {
    let mut lines = Lines::new(text);
    let mut blocks = Vec::new();

    while let Some((lineno, header)) = lines.next_content() {
        let (id, dims) = parse_header(lineno, header, "#scores", 2)?;
        let (n, l) = (dims[0], dims[1]);
        if n == 0 {
            return Err(FormatError::new(lineno, "sentence length must be positive"));
        }
        let (at, arcs) = read_matrix(&mut lines, n + 1, n, "arc scores")?;
        let arcs = ArcScoreMatrix::new(arcs).map_err(|e| graph_error(at, e))?;
        let labels = if l > 0 {
            let (at, flat) = read_matrix(&mut lines, (n + 1) * n, l, "relation scores")?;
            let tensor = Array3::from_shape_vec((n + 1, n, l), flat.into_raw_vec()).unwrap();
            Some(LabelScoreTensor::new(tensor).map_err(|e| graph_error(at, e))?)
        } else {
            None
        };
        blocks.push(ScoreBlock {
            sent_id: id.to_owned(),
            arcs,
            labels,
        });
    }

    Ok(blocks)
}

fn write_rows<'a>(out: &mut String, rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>) {
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
}

pub fn write_score_block(block: &ScoreBlock) -> String {
    let n = block.arcs.len();
    let l = block
        .labels
        .as_ref()
        .map_or(0, LabelScoreTensor::num_labels);
    let mut out = format!("#scores {} {} {}\n", block.sent_id, n, l);
    write_rows(&mut out, block.arcs.scores().rows().into_iter());
    if let Some(labels) = &block.labels {
        let flat = labels
            .scores()
            .to_shape(((n + 1) * n, l))
            .expect("contiguous tensor");
        write_rows(&mut out, flat.rows().into_iter());
    }
    out
}

/// A named `rows x cols` matrix block (`#posterior` or `#frames`).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBlock {
    pub sent_id: String,
    pub values: Array2<f64>,
}

fn parse_matrix_file(text: &str, tag: &str) -> Result<Vec<MatrixBlock>, FormatError> {
    let mut lines = Lines::new(text);
    let mut blocks = Vec::new();
    while let Some((lineno, header)) = lines.next_content() {
        let (id, dims) = parse_header(lineno, header, tag, 2)?;
        let (_, values) = read_matrix(&mut lines, dims[0], dims[1], "matrix rows")?;
        blocks.push(MatrixBlock {
            sent_id: id.to_owned(),
            values,
        });
    }
    Ok(blocks)
}

/// Read a posterior file: `#posterior sent_id T V` then `T` rows of `V`
/// scores, per sentence.
pub fn parse_posterior_file(text: &str) -> Result<Vec<MatrixBlock>, FormatError> {
    parse_matrix_file(text, "#posterior")
}

/// Read a frame feature file: `#frames sent_id T d` then `T` rows of `d`
/// values, per sentence.
pub fn parse_frames_file(text: &str) -> Result<Vec<MatrixBlock>, FormatError> {
    parse_matrix_file(text, "#frames")
}

pub fn write_matrix_block(tag: &str, block: &MatrixBlock) -> String {
    let (rows, cols) = block.values.dim();
    let mut out = format!("#{} {} {} {}\n", tag, block.sent_id, rows, cols);
    write_rows(&mut out, block.values.rows().into_iter());
    out
}

/// One symbol per line.
pub fn parse_vocab_file(text: &str) -> Result<CtcVocab, SegmentError> {
    CtcVocab::new(
        text.lines()
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
    )
}

/// Spans of one sentence as `word<TAB>begin<TAB>end` lines after a
/// `# sent_id` comment, followed by a blank line.
pub fn write_span_block(sent_id: &str, spans: &[WordSpan]) -> String {
    let mut out = format!("# sent_id = {}\n", sent_id);
    for s in spans {
        writeln!(out, "{}\t{}\t{}", s.word, s.begin_frame, s.end_frame).unwrap();
    }
    out.push('\n');
    out
}

pub fn parse_span_file(text: &str) -> Result<Vec<(String, Vec<WordSpan>)>, FormatError> {
    parse_tabular_blocks(text, 3)?
        .into_iter()
        .map(|block| {
            let spans = block
                .rows
                .into_iter()
                .zip(block.lines)
                .map(|(r, line)| {
                    let frame = |v: &str| {
                        v.parse::<usize>()
                            .map_err(|_| FormatError::new(line, format!("invalid frame `{}`", v)))
                    };
                    Ok(WordSpan::new(r[0].clone(), frame(&r[1])?, frame(&r[2])?))
                })
                .collect::<Result<_, FormatError>>()?;
            Ok((block.sent_id, spans))
        })
        .collect()
}

/// A named dense tensor with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Read a flat tensor file: each tensor starts with `#tensor name d1 d2 ...`
/// followed by its values in row-major order, whitespace-separated over any
/// number of lines.
pub fn parse_tensor_file(text: &str) -> Result<Vec<NamedTensor>, FormatError> {
    let mut tensors: Vec<(usize, NamedTensor)> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(rest) = line.trim_start().strip_prefix("#tensor") {
            let mut fields = rest.split_whitespace();
            let name = fields
                .next()
                .ok_or_else(|| FormatError::new(lineno, "tensor header without a name"))?;
            let shape = fields
                .map(|f| {
                    f.parse::<usize>()
                        .map_err(|_| FormatError::new(lineno, format!("invalid dimension `{}`", f)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            tensors.push((
                lineno,
                NamedTensor {
                    name: name.to_owned(),
                    shape,
                    data: Vec::new(),
                },
            ));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (_, tensor) = tensors
            .last_mut()
            .ok_or_else(|| FormatError::new(lineno, "values before the first tensor header"))?;
        for v in line.split_whitespace() {
            tensor.data.push(
                v.parse()
                    .map_err(|_| FormatError::new(lineno, format!("invalid number `{}`", v)))?,
            );
        }
    }

    tensors
        .into_iter()
        .map(|(line, t)| {
            let expected: usize = t.shape.iter().product();
            if t.data.len() != expected {
                return Err(FormatError::new(
                    line,
                    format!(
                        "tensor `{}` of shape {:?} needs {} values, found {}",
                        t.name,
                        t.shape,
                        expected,
                        t.data.len()
                    ),
                ));
            }
            Ok(t)
        })
        .collect()
}

/// Build an LSTM cell from tensors `w_ih` (`4h x d`), `w_hh` (`4h x h`),
/// `b_ih` (`4h`) and optionally `b_hh` (`4h`), which is added to `b_ih`.
pub fn lstm_from_tensors(tensors: &[NamedTensor]) -> Result<LstmCell, SegmentError> {
    let find = |name: &str| tensors.iter().find(|t| t.name == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| SegmentError::BadWeights(format!("missing tensor `{}`", name)))
    };
    let matrix = |t: &NamedTensor| match t.shape[..] {
        [r, c] => Ok(Array2::from_shape_vec((r, c), t.data.clone()).unwrap()),
        _ => Err(SegmentError::BadWeights(format!(
            "`{}` must be a matrix",
            t.name
        ))),
    };
    let vector = |t: &NamedTensor| match t.shape[..] {
        [_] => Ok(Array1::from_vec(t.data.clone())),
        _ => Err(SegmentError::BadWeights(format!(
            "`{}` must be a vector",
            t.name
        ))),
    };

    let w_ih = matrix(require("w_ih")?)?;
    let w_hh = matrix(require("w_hh")?)?;
    let mut bias = vector(require("b_ih")?)?;
    if let Some(b_hh) = find("b_hh") {
        let b_hh = vector(b_hh)?;
        if b_hh.len() != bias.len() {
            return Err(SegmentError::BadWeights("bias lengths differ".into()));
        }
        bias += &b_hh;
    }
    LstmCell::new(w_ih, w_hh, bias)
}
