//! Seeded corruption of gold trees, simulating recognition errors.
//!
//! Each token owns a random stream derived from the seed and its position,
//! and the first two draws of that stream decide its fate. Raising a rate
//! while keeping the seed therefore only adds corruptions: the tokens
//! deleted at a lower deletion rate are still deleted at a higher one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{Corpus, Sentence, Token};

/// Forms and relations of inserted filler tokens. Fillers are tagged `X`.
pub const FILLERS: [(&str, &str); 4] = [
    ("euh", "disflink"),
    ("hum", "disflink"),
    ("ben", "periph"),
    ("bon", "periph"),
];

pub const FILLER_POS: &str = "X";

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    RateOutOfRange { name: &'static str, value: f64 },
    #[error("substitution and deletion rates sum to {0}, more than 1")]
    RateSum(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub sub_rate: f64,
    pub ins_rate: f64,
    pub del_rate: f64,
    /// Per-character replacement probability inside substituted forms.
    pub char_noise_rate: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<(), PerturbError> {
        for (name, value) in [
            ("sub_rate", self.sub_rate),
            ("ins_rate", self.ins_rate),
            ("del_rate", self.del_rate),
            ("char_noise_rate", self.char_noise_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(PerturbError::RateOutOfRange { name, value });
            }
        }
        let sum = self.sub_rate + self.del_rate;
        if sum > 1.0 {
            return Err(PerturbError::RateSum(sum));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn token_rng(seed: u64, sentence: usize, token: usize) -> ChaCha8Rng {
    let s = splitmix64(seed ^ splitmix64(sentence as u64));
    ChaCha8Rng::seed_from_u64(splitmix64(s ^ splitmix64(token as u64).rotate_left(17)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fate {
    Keep,
    Substitute,
    Delete,
}

fn noisy_form(form: &str, rate: f64, rng: &mut impl Rng) -> String {
    let mut chars: Vec<char> = form.chars().collect();
    let mut changed = false;
    for c in chars.iter_mut() {
        if rng.gen::<f64>() < rate {
            *c = different_letter(*c, rng);
            changed = true;
        }
    }
    if !changed {
        let i = rng.gen_range(0..chars.len());
        chars[i] = different_letter(chars[i], rng);
    }
    chars.into_iter().collect()
}

fn different_letter(c: char, rng: &mut impl Rng) -> char {
    loop {
        let candidate = rng.gen_range(b'a'..=b'z') as char;
        if candidate != c {
            return candidate;
        }
    }
}

enum Emitted {
    Original(usize),
    Filler(&'static str, &'static str),
}

/// Corrupt one sentence. `position` is the sentence's place in its corpus
/// and selects its random streams.
pub fn perturb_sentence(sentence: &Sentence, spec: &PerturbSpec, position: usize) -> Sentence {
    let n = sentence.len();
    let mut heads: Vec<usize> = std::iter::once(0).chain(sentence.heads()).collect();
    let mut alive = vec![true; n + 1];
    let mut forms: Vec<String> = sentence.tokens.iter().map(|t| t.form.clone()).collect();
    let mut emitted = Vec::with_capacity(n);

    for i in 1..=n {
        let mut rng = token_rng(spec.seed, position, i);
        let action: f64 = rng.gen();
        let insert: f64 = rng.gen();

        let fate = if action < spec.del_rate {
            Fate::Delete
        } else if action < spec.del_rate + spec.sub_rate {
            Fate::Substitute
        } else {
            Fate::Keep
        };

        match fate {
            Fate::Delete => {
                delete_token(&mut heads, &mut alive, i);
            }
            Fate::Substitute => {
                forms[i - 1] = noisy_form(&forms[i - 1], spec.char_noise_rate, &mut rng);
                emitted.push(Emitted::Original(i));
            }
            Fate::Keep => emitted.push(Emitted::Original(i)),
        }

        if insert < spec.ins_rate {
            let (form, deprel) = FILLERS[rng.gen_range(0..FILLERS.len())];
            emitted.push(Emitted::Filler(form, deprel));
        }
    }

    let mut new_index = vec![0; n + 1];
    for (pos, e) in emitted.iter().enumerate() {
        if let Emitted::Original(i) = e {
            new_index[*i] = pos + 1;
        }
    }

    let tokens = emitted
        .iter()
        .enumerate()
        .map(|(pos, e)| match *e {
            Emitted::Original(i) => {
                let original = &sentence.tokens[i - 1];
                Token {
                    index: pos + 1,
                    form: forms[i - 1].clone(),
                    head: new_index[heads[i]],
                    ..original.clone()
                }
            }
            Emitted::Filler(form, deprel) => Token::new(pos + 1, form, FILLER_POS, pos, deprel),
        })
        .collect();

    Sentence {
        sent_id: sentence.sent_id.clone(),
        comments: sentence.comments.clone(),
        tokens,
    }
}

/// Remove token `x` from a tree given as 1-based heads. Its dependents take
/// over its head; if it was attached to the root, its leftmost dependent is
/// promoted to the root and adopts the others.
fn delete_token(heads: &mut [usize], alive: &mut [bool], x: usize) {
    let head = heads[x];
    let dependents: Vec<usize> = (1..heads.len())
        .filter(|&v| alive[v] && v != x && heads[v] == x)
        .collect();

    if head != 0 {
        for &d in &dependents {
            heads[d] = head;
        }
    } else if let Some((&first, rest)) = dependents.split_first() {
        heads[first] = 0;
        for &d in rest {
            heads[d] = first;
        }
    }
    alive[x] = false;
}

/// Corrupt every sentence of a corpus.
pub fn perturb_corpus(corpus: &Corpus, spec: &PerturbSpec) -> Result<Corpus, PerturbError> {
    spec.validate()?;
    Ok(Corpus::new(
        corpus
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| perturb_sentence(s, spec, i))
            .collect(),
    ))
}
