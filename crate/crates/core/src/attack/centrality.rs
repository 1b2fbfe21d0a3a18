use std::collections::VecDeque;

use super::baselines::top_by_score;
use super::AttackError;
use crate::graph::Graph;
use crate::Scalar;

const DAMPING: f64 = 0.85;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

/// PageRank by power iteration with damping 0.85, iterated until the L1
/// change falls below 1e-10. Isolated nodes spread their mass uniformly.
pub fn pagerank<T: Scalar>(graph: &Graph<T>) -> Vec<f64> {
    let n = graph.num_nodes();
    if n == 0 {
        return vec![];
    }
    let neighbors = graph.neighbors();
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    for _ in 0..MAX_ITERATIONS {
        let dangling: f64 = (0..n).filter(|&v| neighbors[v].is_empty()).map(|v| rank[v]).sum();
        let base = (1.0 - DAMPING) * uniform + DAMPING * dangling * uniform;
        let mut next = vec![base; n];
        for (u, adj) in neighbors.iter().enumerate() {
            if adj.is_empty() {
                continue;
            }
            let share = DAMPING * rank[u] / adj.len() as f64;
            for &v in adj {
                next[v] += share;
            }
        }
        let change: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if change < TOLERANCE {
            break;
        }
    }
    rank
}

/// Unnormalised shortest-path betweenness (Brandes), each unordered pair of
/// endpoints counted once.
pub fn betweenness<T: Scalar>(graph: &Graph<T>) -> Vec<f64> {
    let n = graph.num_nodes();
    let neighbors = graph.neighbors();
    let mut score = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![vec![]; n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &neighbors[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut dependency = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                dependency[v] += sigma[v] / sigma[w] * (1.0 + dependency[w]);
            }
            if w != s {
                score[w] += dependency[w];
            }
        }
    }
    score.iter().map(|x| x / 2.0).collect()
}

fn select<T: Scalar>(graph: &Graph<T>, r: usize, scores: &[f64]) -> Result<Vec<usize>, AttackError> {
    if r == 0 {
        return Err(AttackError::EmptySelection);
    }
    if r > graph.num_nodes() {
        return Err(AttackError::Budget(format!("{r} nodes requested, graph has {}", graph.num_nodes())));
    }
    Ok(top_by_score(scores, r))
}

pub fn pagerank_nodes<T: Scalar>(graph: &Graph<T>, r: usize) -> Result<Vec<usize>, AttackError> {
    select(graph, r, &pagerank(graph))
}

pub fn betweenness_nodes<T: Scalar>(graph: &Graph<T>, r: usize) -> Result<Vec<usize>, AttackError> {
    select(graph, r, &betweenness(graph))
}
