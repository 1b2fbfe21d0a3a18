use ndarray::Array2;

use super::{misclassifies, AttackError, AttackResult, Budget, FeatureDelta, Method};
use crate::cam::RankedCamMatrix;
use crate::gnn::{forward, ModelParams};
use crate::graph::Graph;
use crate::Scalar;

/// Sign-of-gradient noise on the `k` features whose node-summed
/// cross-entropy gradient is largest in magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNoise<T> {
    /// Length-`D` noise vector, zero outside `support`.
    pub epsilon: Vec<T>,
    /// Chosen feature indices, by descending gradient magnitude.
    pub support: Vec<usize>,
}

/// `ε_j = λ·sign(Σ_i ∂CE/∂X_ij)` for the top-`k` `|Σ_i ∂CE/∂X_ij|` (ties to the
/// smaller `j`), zero elsewhere. `sign(0)` is taken as `+1`.
pub fn feature_noise<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    k: usize,
    lambda: f64,
) -> Result<FeatureNoise<T>, AttackError> {
    let d = graph.feature_dim();
    if k > d {
        return Err(AttackError::Budget(format!("{k} features requested, graph has {d}")));
    }
    let mut trace = forward(params, graph)?;
    let loss = trace.tape.softmax_cross_entropy(trace.out.logits, &[graph.label])?;
    trace.tape.backward(loss)?;
    let grad = trace.tape.grad_of(trace.features)?;
    let g: Vec<T> = grad.columns().into_iter().map(|c| c.sum()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| g[b].abs().partial_cmp(&g[a].abs()).expect("finite gradients"));
    order.truncate(k);
    let lambda = T::lit(lambda);
    let mut epsilon = vec![T::zero(); d];
    for &j in &order {
        epsilon[j] = if g[j] < T::zero() { -lambda } else { lambda };
    }
    Ok(FeatureNoise { epsilon, support: order })
}

/// Adds the noise to every row in `nodes`; returns the new graph and one
/// delta per (node, supported feature).
pub fn apply_feature_noise<T: Scalar>(
    graph: &Graph<T>,
    nodes: &[usize],
    noise: &FeatureNoise<T>,
) -> Result<(Graph<T>, Vec<FeatureDelta>), AttackError> {
    let mut x: Array2<T> = graph.features.clone();
    let mut deltas = Vec::with_capacity(nodes.len() * noise.support.len());
    for &u in nodes {
        for &j in &noise.support {
            x[[u, j]] += noise.epsilon[j];
            deltas.push(FeatureDelta(u, j, noise.epsilon[j].as_f64()));
        }
    }
    Ok((graph.with_features(x)?, deltas))
}

fn attempt<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    nodes: &[usize],
    noise: &FeatureNoise<T>,
) -> Result<AttackResult<T>, AttackError> {
    let (perturbed, deltas) = apply_feature_noise(graph, nodes, noise)?;
    let success = misclassifies(params, &perturbed)?;
    let mut result = AttackResult::unchanged(Method::Cama, graph, false);
    result.perturbed = perturbed;
    result.feature_deltas = deltas;
    result.success = success;
    result.selected_nodes = nodes.to_vec();
    Ok(result)
}

/// Tries the top-`r` nodes of each ranked column in turn with one shared
/// noise vector; the first column that fools `params` wins, otherwise the
/// last column's perturbation is returned.
pub fn feature_attack<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    ranked: &RankedCamMatrix,
    budget: &Budget,
) -> Result<AttackResult<T>, AttackError> {
    if ranked.num_nodes() != graph.num_nodes() {
        return Err(AttackError::Budget(format!(
            "ranking covers {} nodes, graph has {}",
            ranked.num_nodes(),
            graph.num_nodes()
        )));
    }
    let noise = feature_noise(params, graph, budget.features, budget.lambda)?;
    let r = budget.nodes.min(graph.num_nodes());
    let mut last = None;
    for c in 0..ranked.num_columns() {
        let mut result = attempt(params, graph, &ranked.column(c)[..r], &noise)?;
        result.column_used = Some(c);
        if result.success {
            return Ok(result);
        }
        last = Some(result);
    }
    Ok(last.expect("ranked matrix has at least one column"))
}

/// Same noise as [`feature_attack`] on a fixed node selection.
pub fn feature_attack_on_nodes<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    nodes: &[usize],
    budget: &Budget,
) -> Result<AttackResult<T>, AttackError> {
    if nodes.is_empty() {
        return Err(AttackError::EmptySelection);
    }
    let noise = feature_noise(params, graph, budget.features, budget.lambda)?;
    attempt(params, graph, nodes, &noise)
}
