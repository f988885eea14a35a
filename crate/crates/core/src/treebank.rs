//! Dependency-annotated utterances and the CoNLL-U reader/writer.
//!
//! Only the columns that take part in computation are interpreted (index,
//! form, upos, head, deprel and the `AlignBegin`/`AlignEnd` keys of MISC).
//! Everything else is carried as opaque text so that canonical files
//! round-trip byte for byte.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const ALIGN_BEGIN: &str = "AlignBegin";
const ALIGN_END: &str = "AlignEnd";
const SENT_ID_PREFIX: &str = "sent_id";

/// Word time boundaries in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub begin_ms: u64,
    pub end_ms: u64,
}

impl TimeSpan {
    pub fn new(begin_ms: u64, end_ms: u64) -> Option<Self> {
        if begin_ms <= end_ms {
            Some(TimeSpan { begin_ms, end_ms })
        } else {
            None
        }
    }
}

/// A single token of a dependency-annotated sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Head position, 0 is the virtual root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    /// MISC entries other than the alignment keys, in file order.
    pub misc: Vec<String>,
    pub span: Option<TimeSpan>,
}

impl Token {
    /// Token with the opaque columns set to `_`.
    pub fn new(
        index: usize,
        form: impl Into<String>,
        upos: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        Token {
            index,
            form: form.into(),
            lemma: "_".to_owned(),
            upos: upos.into(),
            xpos: "_".to_owned(),
            feats: "_".to_owned(),
            head,
            deprel: deprel.into(),
            deps: "_".to_owned(),
            misc: Vec::new(),
            span: None,
        }
    }

    pub fn with_span(mut self, span: TimeSpan) -> Self {
        self.span = Some(span);
        self
    }

    fn misc_column(&self) -> String {
        let mut entries = Vec::with_capacity(self.misc.len() + 2);
        if let Some(span) = self.span {
            entries.push(format!("{}={}", ALIGN_BEGIN, span.begin_ms));
            entries.push(format!("{}={}", ALIGN_END, span.end_ms));
        }
        entries.extend(self.misc.iter().cloned());
        if entries.is_empty() {
            "_".to_owned()
        } else {
            entries.join("|")
        }
    }
}

/// One utterance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    /// Comment lines other than `# sent_id`, without the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(sent_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            sent_id: sent_id.into(),
            comments: Vec::new(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    pub fn upos(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.upos.as_str()).collect()
    }

    /// Space-joined forms.
    pub fn text(&self) -> String {
        self.forms().join(" ")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Corpus { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// How many tokens may attach to the virtual root.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootPolicy {
    /// Exactly one head-0 token.
    SingleRoot,
    /// At least one head-0 token.
    #[default]
    MultiRoot,
}

impl FromStr for RootPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(RootPolicy::SingleRoot),
            "multi" => Ok(RootPolicy::MultiRoot),
            _ => Err(format!(
                "unknown root policy `{}` (expected single or multi)",
                s
            )),
        }
    }
}

/// A single reason a sentence is not a well-formed tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// Token at `position` (1-based) carries index `found`.
    IndexMismatch {
        position: usize,
        found: usize,
    },
    HeadOutOfRange {
        token: usize,
        head: usize,
    },
    SelfLoop {
        token: usize,
    },
    /// Members of one cycle, ascending.
    Cycle {
        members: Vec<usize>,
    },
    RootCount {
        found: usize,
        policy: RootPolicy,
    },
    InvalidForm {
        token: usize,
    },
    SpanOrder {
        token: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexMismatch { position, found } => {
                write!(f, "token at position {} has index {}", position, found)
            }
            Violation::HeadOutOfRange { token, head } => {
                write!(f, "token {} has head {} outside the sentence", token, head)
            }
            Violation::SelfLoop { token } => write!(f, "token {} is its own head", token),
            Violation::Cycle { members } => write!(f, "cycle through tokens {:?}", members),
            Violation::RootCount { found, policy } => {
                write!(f, "{} root attachment(s) violate {:?}", found, policy)
            }
            Violation::InvalidForm { token } => {
                write!(
                    f,
                    "token {} has an empty form or one containing whitespace",
                    token
                )
            }
            Violation::SpanOrder { token } => write!(
                f,
                "time span of token {} is inverted or overlaps the preceding span",
                token
            ),
        }
    }
}

/// Check that a sentence is a well-formed dependency tree under `policy`.
///
/// Every problem found is reported. An empty sentence is accepted.
pub fn validate_tree(sentence: &Sentence, policy: RootPolicy) -> Result<(), Vec<Violation>> {
    let n = sentence.len();
    let mut violations = Vec::new();

    for (pos, token) in sentence.tokens.iter().enumerate() {
        if token.index != pos + 1 {
            violations.push(Violation::IndexMismatch {
                position: pos + 1,
                found: token.index,
            });
        }
        if !valid_form(&token.form) {
            violations.push(Violation::InvalidForm { token: pos + 1 });
        }
        if token.head > n {
            violations.push(Violation::HeadOutOfRange {
                token: pos + 1,
                head: token.head,
            });
        } else if token.head == pos + 1 {
            violations.push(Violation::SelfLoop { token: pos + 1 });
        }
    }

    let heads = sentence.heads();
    for members in find_cycles(&heads) {
        // Self-loops are already reported.
        if members.len() > 1 {
            violations.push(Violation::Cycle { members });
        }
    }

    if n > 0 {
        let roots = heads.iter().filter(|&&h| h == 0).count();
        let ok = match policy {
            RootPolicy::SingleRoot => roots == 1,
            RootPolicy::MultiRoot => roots >= 1,
        };
        if !ok {
            violations.push(Violation::RootCount {
                found: roots,
                policy,
            });
        }
    }

    let mut prev_end: Option<u64> = None;
    for (pos, token) in sentence.tokens.iter().enumerate() {
        if let Some(span) = token.span {
            let overlaps = prev_end.map_or(false, |end| span.begin_ms < end);
            if span.begin_ms > span.end_ms || overlaps {
                violations.push(Violation::SpanOrder { token: pos + 1 });
            }
            prev_end = Some(span.end_ms);
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub(crate) fn valid_form(form: &str) -> bool {
    !form.is_empty() && !form.chars().any(char::is_whitespace)
}

/// All cycles of a 1-based head vector (0 = root), each as ascending
/// member list. Out-of-range heads terminate a chain.
pub fn find_cycles(heads: &[usize]) -> Vec<Vec<usize>> {
    let n = heads.len();
    // 0 = unvisited, 1 = on current chain, 2 = done
    let mut state = vec![0u8; n + 1];
    let mut cycles = Vec::new();

    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut chain = Vec::new();
        let mut node = start;
        while node != 0 && node <= n && state[node] == 0 {
            state[node] = 1;
            chain.push(node);
            node = heads[node - 1];
        }
        if node != 0 && node <= n && state[node] == 1 {
            let pos = chain.iter().position(|&v| v == node).unwrap();
            let mut members = chain[pos..].to_vec();
            members.sort_unstable();
            cycles.push(members);
        }
        for v in chain {
            state[v] = 2;
        }
    }

    cycles
}

#[derive(Debug, Error)]
#[error("sentence `{sent_id}`, line {line}: {kind}")]
pub struct ConlluError {
    pub sent_id: String,
    pub line: usize,
    pub kind: ConlluErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConlluErrorKind {
    #[error("expected 10 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("invalid token index `{0}`")]
    BadIndex(String),
    #[error("multiword token ranges and empty nodes are not supported (`{0}`)")]
    UnsupportedIndex(String),
    #[error("invalid head `{0}`")]
    BadHead(String),
    #[error("head {head} out of range for a sentence of {len} tokens")]
    HeadOutOfRange { head: usize, len: usize },
    #[error("token {0} is its own head")]
    SelfLoop(usize),
    #[error("duplicate token index {0}")]
    DuplicateIndex(usize),
    #[error("token indices are not 1..n in order (found {found} at position {position})")]
    IndexOrder { position: usize, found: usize },
    #[error("cyclic heads through tokens {0:?}")]
    Cycle(Vec<usize>),
    #[error("no token attaches to the root")]
    NoRoot,
    #[error("form `{0}` is empty or contains whitespace")]
    InvalidForm(String),
    #[error("invalid alignment value in MISC: `{0}`")]
    BadAlign(String),
    #[error("time span is inverted or overlaps the preceding span")]
    SpanOrder,
    #[error("duplicate sentence id")]
    DuplicateSentId,
}

struct PendingSentence {
    sent_id: Option<String>,
    comments: Vec<String>,
    tokens: Vec<Token>,
    lines: Vec<usize>,
    first_line: usize,
}

impl PendingSentence {
    fn new(first_line: usize) -> Self {
        PendingSentence {
            sent_id: None,
            comments: Vec::new(),
            tokens: Vec::new(),
            lines: Vec::new(),
            first_line,
        }
    }
}

/// Read a CoNLL-U corpus.
///
/// Sentences without a `# sent_id` comment are numbered by their 1-based
/// ordinal in the file.
pub fn parse_conllu(text: &str) -> Result<Corpus, ConlluError> {
    let mut sentences = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut pending: Option<PendingSentence> = None;

    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            if let Some(p) = pending.take() {
                let sentence = finish_sentence(p, sentences.len() + 1, &mut seen_ids)?;
                sentences.push(sentence);
            }
            continue;
        }

        let p = pending.get_or_insert_with(|| PendingSentence::new(lineno));

        if let Some(comment) = line.strip_prefix('#') {
            match parse_sent_id(comment) {
                Some(id) if p.sent_id.is_none() => p.sent_id = Some(id.to_owned()),
                _ => p.comments.push(comment.to_owned()),
            }
            continue;
        }

        let sent_id = p.sent_id.clone().unwrap_or_default();
        let err = |kind| ConlluError {
            sent_id: sent_id.clone(),
            line: lineno,
            kind,
        };
        let token = parse_token_line(line).map_err(err)?;
        p.tokens.push(token);
        p.lines.push(lineno);
    }

    if let Some(p) = pending.take() {
        let sentence = finish_sentence(p, sentences.len() + 1, &mut seen_ids)?;
        sentences.push(sentence);
    }

    Ok(Corpus { sentences })
}

fn parse_sent_id(comment: &str) -> Option<&str> {
    let rest = comment.trim_start().strip_prefix(SENT_ID_PREFIX)?;
    let value = rest.trim_start().strip_prefix('=')?;
    Some(value.trim())
}

fn parse_token_line(line: &str) -> Result<Token, ConlluErrorKind> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(ConlluErrorKind::ColumnCount(cols.len()));
    }

    if cols[0].contains('-') || cols[0].contains('.') {
        return Err(ConlluErrorKind::UnsupportedIndex(cols[0].to_owned()));
    }
    let index: usize = cols[0]
        .parse()
        .ok()
        .filter(|&i| i > 0)
        .ok_or_else(|| ConlluErrorKind::BadIndex(cols[0].to_owned()))?;
    if !valid_form(cols[1]) {
        return Err(ConlluErrorKind::InvalidForm(cols[1].to_owned()));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| ConlluErrorKind::BadHead(cols[6].to_owned()))?;
    let (span, misc) = parse_misc(cols[9])?;

    Ok(Token {
        index,
        form: cols[1].to_owned(),
        lemma: cols[2].to_owned(),
        upos: cols[3].to_owned(),
        xpos: cols[4].to_owned(),
        feats: cols[5].to_owned(),
        head,
        deprel: cols[7].to_owned(),
        deps: cols[8].to_owned(),
        misc,
        span,
    })
}

fn parse_misc(column: &str) -> Result<(Option<TimeSpan>, Vec<String>), ConlluErrorKind> {
    if column == "_" {
        return Ok((None, Vec::new()));
    }

    let mut begin = None;
    let mut end = None;
    let mut rest = Vec::new();
    for entry in column.split('|') {
        let parse_ms = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| ConlluErrorKind::BadAlign(entry.to_owned()))
        };
        match entry.split_once('=') {
            Some((ALIGN_BEGIN, v)) => begin = Some(parse_ms(v)?),
            Some((ALIGN_END, v)) => end = Some(parse_ms(v)?),
            _ => rest.push(entry.to_owned()),
        }
    }

    let span = match (begin, end) {
        (None, None) => None,
        (Some(b), Some(e)) => Some(TimeSpan::new(b, e).ok_or(ConlluErrorKind::SpanOrder)?),
        _ => return Err(ConlluErrorKind::BadAlign(column.to_owned())),
    };

    Ok((span, rest))
}

fn finish_sentence(
    p: PendingSentence,
    ordinal: usize,
    seen_ids: &mut HashSet<String>,
) -> Result<Sentence, ConlluError> {
    let sent_id = p.sent_id.unwrap_or_else(|| ordinal.to_string());
    let n = p.tokens.len();
    let err = |line: usize, kind| ConlluError {
        sent_id: sent_id.clone(),
        line,
        kind,
    };

    let mut seen = vec![false; n + 1];
    for (pos, (token, &line)) in p.tokens.iter().zip(&p.lines).enumerate() {
        if token.index <= n && seen[token.index] {
            return Err(err(line, ConlluErrorKind::DuplicateIndex(token.index)));
        }
        if token.index <= n {
            seen[token.index] = true;
        }
        if token.index != pos + 1 {
            return Err(err(
                line,
                ConlluErrorKind::IndexOrder {
                    position: pos + 1,
                    found: token.index,
                },
            ));
        }
    }

    for (token, &line) in p.tokens.iter().zip(&p.lines) {
        if token.head > n {
            return Err(err(
                line,
                ConlluErrorKind::HeadOutOfRange {
                    head: token.head,
                    len: n,
                },
            ));
        }
        if token.head == token.index {
            return Err(err(line, ConlluErrorKind::SelfLoop(token.index)));
        }
    }

    let heads: Vec<usize> = p.tokens.iter().map(|t| t.head).collect();
    if let Some(members) = find_cycles(&heads).into_iter().next() {
        let line = p.lines[members[0] - 1];
        return Err(err(line, ConlluErrorKind::Cycle(members)));
    }
    if n > 0 && !heads.contains(&0) {
        return Err(err(p.first_line, ConlluErrorKind::NoRoot));
    }

    let mut prev_end = None;
    for (token, &line) in p.tokens.iter().zip(&p.lines) {
        if let Some(span) = token.span {
            if prev_end.map_or(false, |end| span.begin_ms < end) {
                return Err(err(line, ConlluErrorKind::SpanOrder));
            }
            prev_end = Some(span.end_ms);
        }
    }

    if !seen_ids.insert(sent_id.clone()) {
        return Err(err(p.first_line, ConlluErrorKind::DuplicateSentId));
    }

    Ok(Sentence {
        sent_id,
        comments: p.comments,
        tokens: p.tokens,
    })
}

/// Serialize a corpus. Each sentence is preceded by its `# sent_id`
/// comment and followed by a blank line.
pub fn write_conllu(corpus: &Corpus) -> String {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        write_sentence(&mut out, sentence);
    }
    out
}

fn write_sentence(out: &mut String, sentence: &Sentence) {
    out.push_str("# sent_id = ");
    out.push_str(&sentence.sent_id);
    out.push('\n');
    for comment in &sentence.comments {
        out.push('#');
        out.push_str(comment);
        out.push('\n');
    }
    for token in &sentence.tokens {
        let head = token.head.to_string();
        let index = token.index.to_string();
        let misc = token.misc_column();
        let cols: [&str; 10] = [
            &index,
            &token.form,
            &token.lemma,
            &token.upos,
            &token.xpos,
            &token.feats,
            &head,
            &token.deprel,
            &token.deps,
            &misc,
        ];
        out.push_str(&cols.join("\t"));
        out.push('\n');
    }
    out.push('\n');
}
