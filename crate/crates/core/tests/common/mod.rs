#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use speechdep::{ArcScoreMatrix, Corpus, RootPolicy, Sentence, Token};

pub const TAGS: [&str; 8] = ["NOUN", "VERB", "DET", "ADJ", "ADP", "PRON", "ADV", "CCONJ"];
pub const RELATIONS: [&str; 5] = ["suj", "obj", "det", "mod", "root"];
pub const WORDS: [&str; 10] = [
    "le", "chat", "dort", "et", "il", "mange", "un", "gros", "poisson", "euh",
];

/// Random tree: tokens are attached in a random order, each to the root or
/// to a token placed before it.
pub fn random_heads(rng: &mut impl Rng, n: usize, policy: RootPolicy) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        heads[v - 1] = if k == 0 {
            0
        } else {
            let root_ok = policy == RootPolicy::MultiRoot && rng.gen_bool(0.15);
            if root_ok {
                0
            } else {
                order[rng.gen_range(0..k)]
            }
        };
    }
    heads
}

pub fn random_sentence(rng: &mut impl Rng, id: &str, n: usize, policy: RootPolicy) -> Sentence {
    let heads = random_heads(rng, n, policy);
    let tokens = heads
        .into_iter()
        .enumerate()
        .map(|(i, h)| {
            Token::new(
                i + 1,
                *WORDS.choose(rng).unwrap(),
                *TAGS.choose(rng).unwrap(),
                h,
                *RELATIONS.choose(rng).unwrap(),
            )
        })
        .collect();
    Sentence::new(id, tokens)
}

pub fn random_corpus(rng: &mut impl Rng, sentences: usize, max_len: usize) -> Corpus {
    Corpus::new(
        (0..sentences)
            .map(|i| {
                let n = rng.gen_range(1..=max_len);
                random_sentence(rng, &format!("s{}", i), n, RootPolicy::MultiRoot)
            })
            .collect(),
    )
}

/// Continuous scores, or small integers to provoke ties.
pub fn random_matrix(rng: &mut impl Rng, n: usize, integer: bool) -> ArcScoreMatrix {
    let m = Array2::from_shape_simple_fn((n + 1, n), || {
        if integer {
            rng.gen_range(-3..=3) as f64
        } else {
            rng.gen_range(-5.0..5.0)
        }
    });
    ArcScoreMatrix::new(m).unwrap()
}

/// Follows heads from every token and checks that node 0 is reached
/// without revisiting a token.
pub fn reaches_root(heads: &[usize]) -> bool {
    let n = heads.len();
    (1..=n).all(|start| {
        let mut seen = vec![false; n + 1];
        let mut v = start;
        while v != 0 {
            if v > n || seen[v] {
                return false;
            }
            seen[v] = true;
            v = heads[v - 1];
        }
        true
    })
}

/// Textbook two-row edit distance.
pub fn dp_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Naive arc scorer with explicit loops.
pub fn naive_biaffine(
    heads: &Array2<f64>,
    deps: &Array2<f64>,
    u: &Array2<f64>,
    w_head: &[f64],
    w_dep: &[f64],
    bias: f64,
) -> Array2<f64> {
    let n = deps.nrows();
    let mut out = Array2::zeros((n + 1, n));
    for h in 0..=n {
        for d in 0..n {
            let mut s = bias;
            for i in 0..u.nrows() {
                for j in 0..u.ncols() {
                    s += heads[(h, i)] * u[(i, j)] * deps[(d, j)];
                }
                s += w_head[i] * heads[(h, i)];
            }
            for j in 0..u.ncols() {
                s += w_dep[j] * deps[(d, j)];
            }
            out[(h, d)] = s;
        }
    }
    out
}
