//! Relative POS-based tree encoding.
//!
//! Every token is labelled `±k@P`: its head is the k-th token tagged `P`
//! to the left (`-`) or right (`+`). The virtual root behaves like a token
//! tagged `ROOT` sitting at position 0, so a plain root attachment is
//! `-1@ROOT`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{find_cycles, Corpus, RootPolicy, Sentence, Token};

/// POS tag of the virtual root.
pub const ROOT_POS: &str = "ROOT";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelPosLabel {
    offset: i32,
    pos: String,
}

impl RelPosLabel {
    /// Returns `None` for a zero offset.
    pub fn new(offset: i32, pos: impl Into<String>) -> Option<Self> {
        if offset == 0 {
            None
        } else {
            Some(RelPosLabel {
                offset,
                pos: pos.into(),
            })
        }
    }

    pub fn root() -> Self {
        RelPosLabel {
            offset: -1,
            pos: ROOT_POS.to_owned(),
        }
    }

    pub fn offset(&self) -> i32 {
        self.offset
    }

    pub fn pos(&self) -> &str {
        &self.pos
    }
}

impl fmt::Display for RelPosLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.offset < 0 { '-' } else { '+' };
        write!(f, "{}{}@{}", sign, self.offset.unsigned_abs(), self.pos)
    }
}

impl FromStr for RelPosLabel {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::BadLabel(s.to_owned());
        let (num, pos) = s.split_once('@').ok_or_else(bad)?;
        let negative = match num.chars().next() {
            Some('-') => true,
            Some('+') => false,
            _ => return Err(bad()),
        };
        let digits = &num[1..];
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || pos.is_empty() {
            return Err(bad());
        }
        let magnitude: i32 = digits.parse().map_err(|_| bad())?;
        let offset = if negative { -magnitude } else { magnitude };
        RelPosLabel::new(offset, pos).ok_or_else(bad)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unparseable label `{0}`")]
    BadLabel(String),
    #[error("input length mismatch: {labels} labels, {pos} POS tags, {forms} forms")]
    LengthMismatch {
        labels: usize,
        pos: usize,
        forms: usize,
    },
    #[error("cannot decode an empty label sequence")]
    Empty,
}

/// Encode the heads of a valid sentence, one label per token.
pub fn encode_relpos(sentence: &Sentence) -> Vec<RelPosLabel> {
    let upos = sentence.upos();
    sentence
        .tokens
        .iter()
        .enumerate()
        .map(|(i, token)| encode_head(&upos, i + 1, token.head))
        .collect()
}

fn encode_head(upos: &[&str], dep: usize, head: usize) -> RelPosLabel {
    if head == 0 {
        // Count real ROOT-tagged tokens passed on the way to position 0.
        let passed = upos[..dep - 1].iter().filter(|&&p| p == ROOT_POS).count();
        return RelPosLabel {
            offset: -(passed as i32 + 1),
            pos: ROOT_POS.to_owned(),
        };
    }

    let pos = upos[head - 1];
    let offset = if head < dep {
        -(upos[head - 1..dep - 1]
            .iter()
            .filter(|&&p| p == pos)
            .count() as i32)
    } else {
        upos[dep..head].iter().filter(|&&p| p == pos).count() as i32
    };

    RelPosLabel {
        offset,
        pos: pos.to_owned(),
    }
}

/// Resolve a label for token `dep` (1-based). `None` if there is no k-th
/// token of the requested category in that direction.
fn resolve(upos: &[&str], dep: usize, label: &RelPosLabel) -> Option<usize> {
    let wanted = label.offset.unsigned_abs() as usize;
    let pos = label.pos.as_str();

    if label.offset < 0 {
        let virtual_root = (pos == ROOT_POS).then_some(0);
        (1..dep)
            .rev()
            .filter(|&h| upos[h - 1] == pos)
            .chain(virtual_root)
            .nth(wanted - 1)
    } else {
        (dep + 1..=upos.len())
            .filter(|&h| upos[h - 1] == pos)
            .nth(wanted - 1)
    }
}

/// Decode labels into head positions, repairing ill-formed sequences.
///
/// Repairs, in order: unresolvable labels attach to the root; if nothing
/// attaches to the root the first token does; each cycle is broken by
/// attaching its lowest-index member to the root; under
/// [`RootPolicy::SingleRoot`] every root except the leftmost is attached to
/// the leftmost one.
pub fn decode_heads<S: AsRef<str>>(
    labels: &[RelPosLabel],
    pos_tags: &[S],
    policy: RootPolicy,
) -> Result<Vec<usize>, CodecError> {
    if labels.len() != pos_tags.len() {
        return Err(CodecError::LengthMismatch {
            labels: labels.len(),
            pos: pos_tags.len(),
            forms: pos_tags.len(),
        });
    }
    if labels.is_empty() {
        return Err(CodecError::Empty);
    }

    let upos: Vec<&str> = pos_tags.iter().map(AsRef::as_ref).collect();
    let mut heads: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(i, label)| resolve(&upos, i + 1, label).unwrap_or(0))
        .collect();

    if !heads.contains(&0) {
        heads[0] = 0;
    }

    // Breaking one cycle cannot create another, so a single pass suffices.
    for members in find_cycles(&heads) {
        heads[members[0] - 1] = 0;
    }

    if policy == RootPolicy::SingleRoot {
        let first_root = heads.iter().position(|&h| h == 0).unwrap() + 1;
        for (i, head) in heads.iter_mut().enumerate() {
            if *head == 0 && i + 1 != first_root {
                *head = first_root;
            }
        }
    }

    Ok(heads)
}

/// Decode labels into a sentence. Relations are set to `_` and the
/// sentence id is left empty.
pub fn decode_relpos<P: AsRef<str>, F: AsRef<str>>(
    labels: &[RelPosLabel],
    pos_tags: &[P],
    forms: &[F],
    policy: RootPolicy,
) -> Result<Sentence, CodecError> {
    if labels.len() != pos_tags.len() || labels.len() != forms.len() {
        return Err(CodecError::LengthMismatch {
            labels: labels.len(),
            pos: pos_tags.len(),
            forms: forms.len(),
        });
    }
    let heads = decode_heads(labels, pos_tags, policy)?;
    let tokens = heads
        .into_iter()
        .zip(pos_tags.iter().zip(forms))
        .enumerate()
        .map(|(i, (head, (pos, form)))| Token::new(i + 1, form.as_ref(), pos.as_ref(), head, "_"))
        .collect();
    Ok(Sentence::new(String::new(), tokens))
}

/// Every label the encoder produces on `corpus`, sorted by rendered form.
pub fn label_vocabulary(corpus: &Corpus) -> Vec<RelPosLabel> {
    let mut labels = BTreeMap::new();
    for sentence in &corpus.sentences {
        for label in encode_relpos(sentence) {
            labels.entry(label.to_string()).or_insert(label);
        }
    }
    labels.into_values().collect()
}
