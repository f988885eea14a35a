//! Maximum spanning arborescence decoding (Chu-Liu/Edmonds).
//!
//! Ties between equally scoring trees are resolved towards the
//! lexicographically smallest head sequence. This is done exactly rather
//! than by perturbation: every arc weight is paired with a secondary
//! integer `-h * (n+1)^(n-d)`, so the secondary part of a tree's total
//! encodes its head sequence in base `n + 1` and comparing totals
//! lexicographically compares (score, reversed head order). Pairs under
//! component-wise addition form an ordered group, which is all the
//! contraction algorithm needs.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

use num_bigint::BigInt;

use super::{ArcScoreMatrix, GraphError};
use crate::treebank::RootPolicy;

/// Longest sentence accepted by [`decode_mst_bruteforce`].
pub const BRUTEFORCE_MAX_LEN: usize = 8;

#[derive(Clone, Debug)]
struct Weight<K> {
    score: f64,
    key: K,
}

impl<K: Ord> Ord for Weight<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Adding 0.0 maps -0.0 to +0.0 so both zeros compare equal.
        (self.score + 0.0)
            .total_cmp(&(other.score + 0.0))
            .then_with(|| self.key.cmp(&other.key))
    }
}

impl<K: Ord> PartialOrd for Weight<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Ord> PartialEq for Weight<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<K: Ord> Eq for Weight<K> {}

impl<K: Add<Output = K>> Add for Weight<K> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Weight {
            score: self.score + rhs.score,
            key: self.key + rhs.key,
        }
    }
}

impl<K: Sub<Output = K>> Sub for Weight<K> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Weight {
            score: self.score - rhs.score,
            key: self.key - rhs.key,
        }
    }
}

trait GroupValue: Clone + Ord + Add<Output = Self> + Sub<Output = Self> {}

impl<T: Clone + Ord + Add<Output = T> + Sub<Output = T>> GroupValue for T {}

/// Dense directed graph, `arcs[u][v]` is the weight of `u -> v`.
type Arcs<W> = Vec<Vec<Option<W>>>;

/// Maximum spanning arborescence rooted at `root`. Returns the parent of
/// every vertex, the root being its own parent.
///
/// Every vertex must be reachable from the root.
fn max_arborescence<W: GroupValue>(arcs: &Arcs<W>, root: usize) -> Vec<usize> {
    let size = arcs.len();

    let mut parent = vec![root; size];
    for v in (0..size).filter(|&v| v != root) {
        let mut best: Option<(usize, &W)> = None;
        for (u, row) in arcs.iter().enumerate() {
            if u == v {
                continue;
            }
            if let Some(w) = &row[v] {
                if best.map_or(true, |(_, bw)| w > bw) {
                    best = Some((u, w));
                }
            }
        }
        parent[v] = best.expect("vertex without incoming arcs").0;
    }

    let cycle = match find_cycle(&parent, root) {
        Some(cycle) => cycle,
        None => return parent,
    };

    let mut in_cycle = vec![false; size];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // Contracted graph: vertices outside the cycle keep their relative
    // order, the cycle becomes the last vertex.
    let outside: Vec<usize> = (0..size).filter(|&v| !in_cycle[v]).collect();
    let mut new_id = vec![usize::MAX; size];
    for (i, &v) in outside.iter().enumerate() {
        new_id[v] = i;
    }
    let cycle_id = outside.len();
    let mut contracted: Arcs<W> = vec![vec![None; cycle_id + 1]; cycle_id + 1];

    for &u in &outside {
        for &v in &outside {
            contracted[new_id[u]][new_id[v]] = arcs[u][v].clone();
        }
    }

    // Cycle vertex entered by the best arc from each outside vertex, and
    // cycle vertex leaving towards each outside vertex.
    let mut enters_at = vec![usize::MAX; cycle_id];
    let mut leaves_from = vec![usize::MAX; cycle_id];

    for &u in &outside {
        let mut best: Option<(usize, W)> = None;
        for &x in &cycle {
            let (Some(w), Some(kept)) = (&arcs[u][x], &arcs[parent[x]][x]) else {
                continue;
            };
            let reduced = w.clone() - kept.clone();
            if best.as_ref().map_or(true, |(_, bw)| reduced > *bw) {
                best = Some((x, reduced));
            }
        }
        if let Some((x, w)) = best {
            enters_at[new_id[u]] = x;
            contracted[new_id[u]][cycle_id] = Some(w);
        }
    }

    for &v in &outside {
        let mut best: Option<(usize, &W)> = None;
        for &x in &cycle {
            if let Some(w) = &arcs[x][v] {
                if best.map_or(true, |(_, bw)| w > bw) {
                    best = Some((x, w));
                }
            }
        }
        if let Some((x, w)) = best {
            leaves_from[new_id[v]] = x;
            contracted[cycle_id][new_id[v]] = Some(w.clone());
        }
    }

    let contracted_parent = max_arborescence(&contracted, new_id[root]);

    let mut result = parent.clone();
    for &v in &outside {
        if v == root {
            continue;
        }
        let p = contracted_parent[new_id[v]];
        result[v] = if p == cycle_id {
            leaves_from[new_id[v]]
        } else {
            outside[p]
        };
    }
    let entering = contracted_parent[cycle_id];
    result[enters_at[entering]] = outside[entering];

    result
}

/// Some cycle of the parent function, ignoring the root.
fn find_cycle(parent: &[usize], root: usize) -> Option<Vec<usize>> {
    let size = parent.len();
    let mut state = vec![0u8; size];
    state[root] = 2;

    for start in 0..size {
        let mut chain = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            chain.push(v);
            v = parent[v];
        }
        if state[v] == 1 {
            let pos = chain.iter().position(|&x| x == v).unwrap();
            return Some(chain[pos..].to_vec());
        }
        for x in chain {
            state[x] = 2;
        }
    }

    None
}

/// Sum of the selected arc scores, accumulated in dependent order.
pub fn tree_score(m: &ArcScoreMatrix, heads: &[usize]) -> f64 {
    heads
        .iter()
        .enumerate()
        .fold(0.0, |acc, (d, &h)| acc + m.arc(h, d + 1))
}

fn build_arcs<K, F>(m: &ArcScoreMatrix, only_root_child: Option<usize>, key: &F) -> Arcs<Weight<K>>
where
    K: Clone,
    F: Fn(usize, usize) -> K,
{
    let n = m.len();
    let mut arcs = vec![vec![None; n + 1]; n + 1];
    for (h, row) in arcs.iter_mut().enumerate() {
        for d in 1..=n {
            if h == d || (h == 0 && only_root_child.map_or(false, |r| r != d)) {
                continue;
            }
            row[d] = Some(Weight {
                score: m.arc(h, d),
                key: key(h, d),
            });
        }
    }
    arcs
}

fn total<K: Clone + Add<Output = K>>(arcs: &Arcs<Weight<K>>, heads: &[usize]) -> Weight<K> {
    heads
        .iter()
        .enumerate()
        .map(|(d, &h)| arcs[h][d + 1].clone().expect("selected arc exists"))
        .reduce(|a, b| a + b)
        .expect("non-empty sentence")
}

fn decode_with<K, F>(m: &ArcScoreMatrix, policy: RootPolicy, key: F) -> Vec<usize>
where
    K: GroupValue,
    F: Fn(usize, usize) -> K,
{
    let arcs = build_arcs(m, None, &key);
    let heads = max_arborescence(&arcs, 0)[1..].to_vec();

    let roots = heads.iter().filter(|&&h| h == 0).count();
    if policy == RootPolicy::MultiRoot || roots == 1 {
        return heads;
    }

    let mut best: Option<(Weight<K>, Vec<usize>)> = None;
    for root_child in 1..=m.len() {
        let arcs = build_arcs(m, Some(root_child), &key);
        let heads = max_arborescence(&arcs, 0)[1..].to_vec();
        let weight = total(&arcs, &heads);
        if best.as_ref().map_or(true, |(bw, _)| weight > *bw) {
            best = Some((weight, heads));
        }
    }
    best.expect("at least one candidate root").1
}

/// Highest-scoring dependency tree for `m`.
///
/// Under [`RootPolicy::SingleRoot`] only trees with exactly one arc leaving
/// the virtual root are considered. Among equally scoring trees the
/// lexicographically smallest head sequence is returned.
pub fn decode_mst(m: &ArcScoreMatrix, policy: RootPolicy) -> Result<Vec<usize>, GraphError> {
    let n = m.len();
    if n == 0 {
        return Err(GraphError::EmptySentence);
    }
    if n == 1 {
        return Ok(vec![0]);
    }

    let base = n as i128 + 1;
    // Totals stay below n * base^n; leave headroom for reduced weights.
    let heads = if base.checked_pow(n as u32 + 2).is_some() {
        decode_with(m, policy, |h, d| -(h as i128) * base.pow((n - d) as u32))
    } else {
        let base = BigInt::from(base);
        decode_with(m, policy, |h, d| {
            -BigInt::from(h) * base.pow((n - d) as u32)
        })
    };

    Ok(heads)
}

/// Exhaustive search over all head assignments, for testing.
///
/// Same objective and tie-breaking as [`decode_mst`].
pub fn decode_mst_bruteforce(
    m: &ArcScoreMatrix,
    policy: RootPolicy,
) -> Result<Vec<usize>, GraphError> {
    let n = m.len();
    if n == 0 {
        return Err(GraphError::EmptySentence);
    }
    if n > BRUTEFORCE_MAX_LEN {
        return Err(GraphError::TooLong {
            n,
            max: BRUTEFORCE_MAX_LEN,
        });
    }

    let mut search = Exhaustive {
        m,
        policy,
        heads: vec![0; n + 1],
        best: None,
    };
    search.extend(1, 0, 0.0);
    Ok(search.best.expect("a tree always exists").1)
}

struct Exhaustive<'a> {
    m: &'a ArcScoreMatrix,
    policy: RootPolicy,
    /// 1-based, slot 0 unused.
    heads: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Exhaustive<'_> {
    fn extend(&mut self, dep: usize, roots: usize, score: f64) {
        let n = self.m.len();
        if dep > n {
            let accept = match self.policy {
                RootPolicy::SingleRoot => roots == 1,
                RootPolicy::MultiRoot => roots >= 1,
            };
            // Heads are enumerated in lexicographic order, so only a
            // strictly better score replaces the incumbent.
            if accept && self.best.as_ref().map_or(true, |(s, _)| score > *s) {
                self.best = Some((score, self.heads[1..].to_vec()));
            }
            return;
        }

        for head in 0..=n {
            if head == dep || self.closes_cycle(dep, head) {
                continue;
            }
            let roots = roots + usize::from(head == 0);
            if self.policy == RootPolicy::SingleRoot && roots > 1 {
                continue;
            }
            self.heads[dep] = head;
            self.extend(dep + 1, roots, score + self.m.arc(head, dep));
        }
    }

    /// Whether attaching `dep` to `head` closes a cycle through tokens
    /// already assigned (all of them precede `dep`).
    fn closes_cycle(&self, dep: usize, head: usize) -> bool {
        let mut v = head;
        while v != 0 && v < dep {
            v = self.heads[v];
        }
        v == dep
    }
}
