use std::rc::Rc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::structure::structure_result;
use super::{AttackError, AttackResult, Budget, Flip, FlipKind, Method};
use crate::autodiff::Tape;
use crate::gnn::{forward_relaxed, Adam, ModelParams};
use crate::graph::Graph;
use crate::Scalar;

/// Starting value of the mask logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskInit {
    /// `m = 0`, so every candidate starts half flipped.
    Zero,
    /// `σ(m) = min(Δ/P, 1/2)` for `P` candidate pairs, so the relaxed graph
    /// starts with about `Δ` flips' worth of perturbation mass.
    Budget,
}

impl MaskInit {
    fn logit(self, delta: usize, pairs: usize) -> f64 {
        match self {
            MaskInit::Zero => 0.0,
            MaskInit::Budget => {
                let q = (delta as f64 / pairs as f64).min(0.5);
                (q / (1.0 - q)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgraphConfig {
    /// Share of top-ranked nodes kept as the candidate subgraph.
    pub fraction: f64,
    pub epochs: usize,
    pub lambda_ent: f64,
    pub lr: f64,
    pub init: MaskInit,
}

impl Default for SubgraphConfig {
    fn default() -> Self {
        Self { fraction: 0.5, epochs: 30, lambda_ent: 1.0, lr: 0.1, init: MaskInit::Budget }
    }
}

impl SubgraphConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(AttackError::Budget(format!("subgraph fraction must lie in (0, 1], got {}", self.fraction)));
        }
        if self.epochs == 0 {
            return Err(AttackError::Budget("mask epochs must be positive".into()));
        }
        if !(self.lambda_ent.is_finite() && self.lr.is_finite() && self.lr > 0.0) {
            return Err(AttackError::Budget(format!("bad mask hyper-parameters {self:?}")));
        }
        Ok(())
    }
}

/// The first `⌊fraction·n⌋` nodes of `column`, or the whole column when that
/// leaves fewer than two nodes.
pub fn subgraph_nodes(column: &[usize], fraction: f64) -> Vec<usize> {
    let keep = (fraction * column.len() as f64 + 1e-9).floor() as usize;
    if keep < 2 {
        column.to_vec()
    } else {
        column[..keep].to_vec()
    }
}

/// Learns a relaxed flip mask over node pairs inside the top-ranked
/// subgraph of `column` and, after every optimisation step, tests the `Δ`
/// pairs with the largest mask values (ties to the lexicographically
/// smaller pair). Returns at the first success or after the last epoch.
pub fn cama_subgraph<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    column: &[usize],
    budget: &Budget,
    config: &SubgraphConfig,
) -> Result<AttackResult<T>, AttackError> {
    config.validate()?;
    let n = graph.num_nodes();
    if column.len() != n {
        return Err(AttackError::Budget(format!("ranking covers {} nodes, graph has {n}", column.len())));
    }
    let nodes = subgraph_nodes(column, config.fraction);
    let mut sorted = nodes.clone();
    sorted.sort_unstable();
    let pairs: Vec<(usize, usize)> =
        sorted.iter().enumerate().flat_map(|(i, &u)| sorted[i + 1..].iter().map(move |&v| (u, v))).collect();
    let mut result = AttackResult::unchanged(Method::CamaSubgraph, graph, false);
    result.subgraph_nodes = Some(nodes);
    if pairs.is_empty() {
        return Ok(result);
    }
    let take = budget.edges.min(pairs.len());
    let adjacency = graph.adjacency();
    let direction = Array2::from_shape_fn((pairs.len(), 1), |(k, _)| {
        let (u, v) = pairs[k];
        T::one() - T::lit(2.0) * adjacency[[u, v]]
    });
    let pairs = Rc::new(pairs);
    let mut mask = Array2::from_elem((pairs.len(), 1), T::lit(config.init.logit(take, pairs.len())));
    let mut adam = Adam::new(config.lr);
    let lambda_ent = T::lit(config.lambda_ent);
    for epoch in 0..config.epochs {
        let mut tape = Tape::new();
        let m = tape.leaf(mask.clone(), true);
        let s = tape.sigmoid(m)?;
        let c = tape.constant(direction.clone());
        let cs = tape.hadamard(s, c)?;
        let delta = tape.scatter_sym(cs, pairs.clone(), n)?;
        let a = tape.constant(adjacency.clone());
        let relaxed = tape.add(a, delta)?;
        let x = tape.constant(graph.features.clone());
        let out = forward_relaxed(params, &mut tape, x, relaxed)?;
        let cw = tape.cw_margin(out.logits, graph.label)?;
        let ent = tape.entropy_mean(m)?;
        let ent = tape.scalar_mul(ent, lambda_ent)?;
        let loss = tape.add(cw, ent)?;
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(AttackError::Diverged { epoch, loss: value.as_f64() });
        }
        tape.backward(loss)?;
        let grad = tape.grad_of(m)?;
        adam.step(&mut [&mut mask], &[grad]);

        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&i, &j| mask[[j, 0]].partial_cmp(&mask[[i, 0]]).expect("finite mask"));
        let flips: Vec<Flip> = order[..take]
            .iter()
            .map(|&k| {
                let (u, v) = pairs[k];
                let kind = if adjacency[[u, v]] > T::zero() { FlipKind::Delete } else { FlipKind::Add };
                Flip::new(u, v, kind)
            })
            .collect();
        let attempt = structure_result(params, graph, Method::CamaSubgraph, flips)?;
        result.perturbed = attempt.perturbed;
        result.flips = attempt.flips;
        result.success = attempt.success;
        if result.success {
            break;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subgraph_size() {
        let col: Vec<usize> = (0..17).rev().collect();
        assert_eq!(subgraph_nodes(&col, 0.5), (9..17).rev().collect::<Vec<_>>());
        assert_eq!(subgraph_nodes(&[3, 1, 0, 2], 0.3), vec![3, 1, 0, 2]);
        assert_eq!(subgraph_nodes(&[1, 0, 2], 0.7), vec![1, 0]);
        assert_eq!(subgraph_nodes(&(0..10).collect::<Vec<_>>(), 0.3).len(), 3);
    }
}
