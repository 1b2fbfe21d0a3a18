use std::collections::HashSet;

use super::structure::similarity_matrix;
use super::{AttackType, Budget, FlipKind, FlipLog, Method, SimilarityConstraint};
use crate::gnn::{forward, ModelParams};
use crate::graph::Graph;
use crate::Scalar;

/// What a flip log is checked against. `attacker` enables the similarity
/// check for the CAM structure attack; `perturbed` enables the
/// reconstruction check.
#[derive(Debug, Clone, Copy)]
pub struct AuditContext<'a, T> {
    pub attack_type: AttackType,
    pub clean: &'a Graph<T>,
    pub budget: Budget,
    pub perturbed: Option<&'a Graph<T>>,
    pub attacker: Option<&'a ModelParams<T>>,
    pub similarity: SimilarityConstraint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Self-loop, out-of-range endpoint, unordered pair or repeated pair.
    InvalidFlip { u: usize, v: usize },
    /// An `add` for an existing edge or a `del` for a missing one.
    WrongKind { u: usize, v: usize },
    OverBudget { used: usize, allowed: usize },
    FeatureBudget { detail: String },
    Inadmissible { u: usize, v: usize, similarity: f64 },
    OutsideSubgraph { u: usize, v: usize },
    /// The recorded perturbed graph differs from the clean graph plus the log.
    Mismatch { detail: String },
    /// A feature attack that flipped edges or a structure attack that
    /// changed features, or a skipped graph that was perturbed.
    WrongKindOfChange { detail: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::InvalidFlip { u, v } => write!(f, "invalid flip ({u}, {v})"),
            Violation::WrongKind { u, v } => write!(f, "flip kind of ({u}, {v}) contradicts the clean graph"),
            Violation::OverBudget { used, allowed } => write!(f, "{used} flips exceed the budget of {allowed}"),
            Violation::FeatureBudget { detail } => write!(f, "feature budget: {detail}"),
            Violation::Inadmissible { u, v, similarity } => {
                write!(f, "flip ({u}, {v}) with similarity {similarity} is not admissible")
            }
            Violation::OutsideSubgraph { u, v } => write!(f, "flip ({u}, {v}) leaves the subgraph"),
            Violation::Mismatch { detail } => write!(f, "perturbed graph mismatch: {detail}"),
            Violation::WrongKindOfChange { detail } => f.write_str(detail),
        }
    }
}

/// Checks one flip log against the clean graph and budget. An empty result
/// means the log passed.
pub fn audit_log<T: Scalar>(log: &FlipLog, ctx: &AuditContext<'_, T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let clean = ctx.clean;
    let n = clean.num_nodes();

    if log.skipped || log.method == Method::None {
        if !log.flips.is_empty() || !log.feature_deltas.is_empty() {
            out.push(Violation::WrongKindOfChange { detail: "unperturbed graph has a non-empty log".into() });
        }
    } else {
        match ctx.attack_type {
            AttackType::Structure => {
                if !log.feature_deltas.is_empty() {
                    out.push(Violation::WrongKindOfChange { detail: "structure attack changed features".into() });
                }
            }
            AttackType::Feature => {
                if !log.flips.is_empty() {
                    out.push(Violation::WrongKindOfChange { detail: "feature attack flipped edges".into() });
                }
                audit_features(log, ctx, &mut out);
            }
        }
    }

    let mut seen = HashSet::new();
    for flip in &log.flips {
        let (u, v) = flip.pair();
        if u >= v || v >= n || !seen.insert((u, v)) {
            out.push(Violation::InvalidFlip { u, v });
            continue;
        }
        if clean.has_edge(u, v) != (flip.kind() == FlipKind::Delete) {
            out.push(Violation::WrongKind { u, v });
        }
        if let Some(nodes) = &log.subgraph_nodes {
            if !nodes.contains(&u) || !nodes.contains(&v) {
                out.push(Violation::OutsideSubgraph { u, v });
            }
        }
    }
    if log.flips.len() > ctx.budget.edges {
        out.push(Violation::OverBudget { used: log.flips.len(), allowed: ctx.budget.edges });
    }

    if ctx.attack_type == AttackType::Structure && matches!(log.method, Method::Cama | Method::CamaGrad) {
        if let Some(params) = ctx.attacker {
            audit_similarity(log, ctx, params, &mut out);
        }
    }
    if let Some(perturbed) = ctx.perturbed {
        audit_reconstruction(log, clean, perturbed, &mut out);
    }
    out
}

fn audit_features<T: Scalar>(log: &FlipLog, ctx: &AuditContext<'_, T>, out: &mut Vec<Violation>) {
    let (r, k, lambda) = (ctx.budget.nodes, ctx.budget.features, ctx.budget.lambda);
    let deltas = &log.feature_deltas;
    if deltas.len() != r * k {
        out.push(Violation::FeatureBudget { detail: format!("{} deltas, expected r·K = {}", deltas.len(), r * k) });
    }
    let mut entries = HashSet::new();
    let mut rows = HashSet::new();
    let mut cols = HashSet::new();
    for &super::FeatureDelta(node, feat, delta) in deltas {
        if node >= ctx.clean.num_nodes() || feat >= ctx.clean.feature_dim() || !entries.insert((node, feat)) {
            out.push(Violation::FeatureBudget { detail: format!("invalid or repeated entry ({node}, {feat})") });
        }
        rows.insert(node);
        cols.insert(feat);
        // deltas pass through the model's scalar type, so allow for f32
        if (delta.abs() - lambda).abs() > 1e-6 * lambda.max(1.0) {
            out.push(Violation::FeatureBudget { detail: format!("delta {delta} at ({node}, {feat}) is not ±{lambda}") });
        }
    }
    if rows.len() > r {
        out.push(Violation::FeatureBudget { detail: format!("{} rows modified, budget {r}", rows.len()) });
    }
    if cols.len() > k {
        out.push(Violation::FeatureBudget { detail: format!("{} features modified, budget {k}", cols.len()) });
    }
}

fn audit_similarity<T: Scalar>(
    log: &FlipLog,
    ctx: &AuditContext<'_, T>,
    params: &ModelParams<T>,
    out: &mut Vec<Violation>,
) {
    let sim = match forward(params, ctx.clean)
        .ok()
        .and_then(|trace| similarity_matrix(&trace, ctx.similarity.embedding_layer).ok())
    {
        Some(s) => s,
        None => {
            out.push(Violation::Mismatch { detail: "could not recompute similarities".into() });
            return;
        }
    };
    for flip in &log.flips {
        let (u, v) = flip.pair();
        if v >= ctx.clean.num_nodes() {
            continue;
        }
        let s = sim[[u, v]].as_f64();
        if !ctx.similarity.admits(flip.kind() == FlipKind::Delete, s) {
            out.push(Violation::Inadmissible { u, v, similarity: s });
        }
    }
}

fn audit_reconstruction<T: Scalar>(log: &FlipLog, clean: &Graph<T>, perturbed: &Graph<T>, out: &mut Vec<Violation>) {
    if perturbed.num_nodes() != clean.num_nodes() || perturbed.feature_dim() != clean.feature_dim() {
        out.push(Violation::Mismatch { detail: "shape changed".into() });
        return;
    }
    let a = perturbed.adjacency();
    let n = clean.num_nodes();
    for u in 0..n {
        if a[[u, u]] != T::zero() {
            out.push(Violation::Mismatch { detail: format!("self-loop at {u}") });
        }
        for v in 0..n {
            if a[[u, v]] != a[[v, u]] || (a[[u, v]] != T::zero() && a[[u, v]] != T::one()) {
                out.push(Violation::Mismatch { detail: format!("entry ({u}, {v}) is not symmetric binary") });
            }
        }
    }
    let flipped: HashSet<(usize, usize)> = log.flips.iter().map(|f| f.pair()).collect();
    for u in 0..n {
        for v in u + 1..n {
            let expected = clean.has_edge(u, v) != flipped.contains(&(u, v));
            if perturbed.has_edge(u, v) != expected {
                out.push(Violation::Mismatch { detail: format!("edge ({u}, {v}) not explained by the log") });
            }
        }
    }
    let mut x = clean.features.clone();
    for &super::FeatureDelta(node, feat, delta) in &log.feature_deltas {
        if node < n && feat < clean.feature_dim() {
            x[[node, feat]] += T::lit(delta);
        }
    }
    let tol = T::lit(1e-6);
    if x.iter().zip(perturbed.features.iter()).any(|(a, b)| (*a - *b).abs() > tol) {
        out.push(Violation::Mismatch { detail: "features not explained by the log".into() });
    }
}
