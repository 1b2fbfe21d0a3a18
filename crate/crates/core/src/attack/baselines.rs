use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::structure::{cama_structure_column, structure_result};
use super::{AttackError, AttackResult, Flip, FlipKind, Method, SimilarityConstraint};
use crate::gnn::{forward, ModelParams};
use crate::graph::Graph;
use crate::Scalar;

/// Indices of the `k` largest scores, ties to the smaller index.
pub fn top_by_score(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(k);
    order
}

fn check_selection<T: Scalar>(graph: &Graph<T>, r: usize) -> Result<(), AttackError> {
    if r == 0 {
        return Err(AttackError::EmptySelection);
    }
    if r > graph.num_nodes() {
        return Err(AttackError::Budget(format!("{r} nodes requested, graph has {}", graph.num_nodes())));
    }
    Ok(())
}

/// `r` distinct nodes drawn uniformly with a seeded generator.
pub fn random_nodes<T: Scalar>(graph: &Graph<T>, r: usize, seed: u64) -> Result<Vec<usize>, AttackError> {
    check_selection(graph, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, graph.num_nodes(), r).into_vec())
}

/// The `r` highest-degree nodes.
pub fn degree_nodes<T: Scalar>(graph: &Graph<T>, r: usize) -> Result<Vec<usize>, AttackError> {
    check_selection(graph, r)?;
    let degrees: Vec<f64> = graph.degrees().iter().map(|&d| d as f64).collect();
    Ok(top_by_score(&degrees, r))
}

/// Mean clean-graph degree of `nodes`.
pub fn avg_degree_selected<T: Scalar>(graph: &Graph<T>, nodes: &[usize]) -> Result<f64, AttackError> {
    if nodes.is_empty() {
        return Err(AttackError::EmptySelection);
    }
    Ok(nodes.iter().map(|&v| graph.degree(v) as f64).sum::<f64>() / nodes.len() as f64)
}

fn flip_for<T: Scalar>(graph: &Graph<T>, u: usize, v: usize) -> Flip {
    Flip::new(u, v, if graph.has_edge(u, v) { FlipKind::Delete } else { FlipKind::Add })
}

/// `delta` distinct node pairs drawn uniformly, each flipped.
pub fn random_flips<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    delta: usize,
    seed: u64,
) -> Result<AttackResult<T>, AttackError> {
    let n = graph.num_nodes();
    let pairs = n * n.saturating_sub(1) / 2;
    if delta > pairs {
        return Err(AttackError::Budget(format!("{delta} flips requested, graph has {pairs} node pairs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flips = sample(&mut rng, pairs, delta)
        .into_iter()
        .map(|k| {
            let (u, v) = pair_at(n, k);
            flip_for(graph, u, v)
        })
        .collect();
    structure_result(params, graph, Method::Random, flips)
}

/// The `k`-th pair `(u, v)`, `u < v`, in lexicographic order.
fn pair_at(n: usize, mut k: usize) -> (usize, usize) {
    let mut u = 0;
    while k >= n - 1 - u {
        k -= n - 1 - u;
        u += 1;
    }
    (u, u + 1 + k)
}

/// The greedy pairing of the CAM structure attack run over nodes in
/// descending degree order, with every pair admissible.
pub fn degree_flips<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    delta: usize,
) -> Result<AttackResult<T>, AttackError> {
    let order = degree_nodes(graph, graph.num_nodes())?;
    let anything = SimilarityConstraint { s1: f64::INFINITY, s2: f64::NEG_INFINITY, embedding_layer: 1 };
    let n = graph.num_nodes();
    let flips = cama_structure_column(graph, &order, &ndarray::Array2::<T>::zeros((n, n)), delta, &anything);
    structure_result(params, graph, Method::Degree, flips)
}

/// One-shot gradient attack: scores each pair by the first-order change in
/// cross-entropy its flip would cause, `(g_uv + g_vu)(1 − 2a_uv)`, and flips
/// up to `delta` pairs with positive score, highest first (ties to the
/// lexicographically smaller pair).
pub fn grad_argmax<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    delta: usize,
) -> Result<AttackResult<T>, AttackError> {
    let n = graph.num_nodes();
    let mut trace = forward(params, graph)?;
    let loss = trace.tape.softmax_cross_entropy(trace.out.logits, &[graph.label])?;
    trace.tape.backward(loss)?;
    let g = trace.tape.grad_of(trace.adjacency)?;
    let mut pairs = Vec::new();
    let mut scores = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let sym = (g[[u, v]] + g[[v, u]]).as_f64();
            scores.push(if graph.has_edge(u, v) { -sym } else { sym });
            pairs.push((u, v));
        }
    }
    let flips = top_by_score(&scores, delta)
        .into_iter()
        .filter(|&k| scores[k] > 0.0)
        .map(|k| flip_for(graph, pairs[k].0, pairs[k].1))
        .collect();
    structure_result(params, graph, Method::GradArgmax, flips)
}
