//! Feature and structure attacks guided by the ranked CAM matrix, the
//! baselines they are compared against, and post-hoc audits of their logs.

mod audit;
mod baselines;
mod budget;
mod centrality;
mod feature;
mod log;
mod structure;
mod subgraph;

pub use audit::{audit_log, AuditContext, Violation};
pub use baselines::{
    avg_degree_selected, degree_flips, degree_nodes, grad_argmax, random_flips, random_nodes, top_by_score,
};
pub use budget::{Budget, BudgetFractions};
pub use centrality::{betweenness, betweenness_nodes, pagerank, pagerank_nodes};
pub use feature::{apply_feature_noise, feature_attack, feature_attack_on_nodes, feature_noise, FeatureNoise};
pub use log::{FeatureDelta, Flip, FlipKind, FlipLog};
pub use structure::{
    cama_structure, cama_structure_column, similarity_matrix, SimilarityConstraint,
};
pub use subgraph::{cama_subgraph, subgraph_nodes, MaskInit, SubgraphConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::cam::{heatmap, ranked_cam_matrix, CamError, CamKind};
use crate::gnn::{predict, GnnError, ModelParams};
use crate::graph::{Graph, GraphError};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Cam(#[from] CamError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("budget: {0}")]
    Budget(String),
    #[error("mask optimisation diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("{method} is not a {attack_type} attack")]
    Unsupported { method: Method, attack_type: AttackType },
    #[error("selection is empty")]
    EmptySelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum AttackType {
    Feature,
    Structure,
}

impl std::fmt::Display for AttackType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackType::Feature => "feature",
            AttackType::Structure => "structure",
        })
    }
}

impl std::str::FromStr for AttackType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feature" => Ok(AttackType::Feature),
            "structure" => Ok(AttackType::Structure),
            other => Err(format!("unknown attack type {other:?} (expected feature or structure)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cama,
    CamaGrad,
    CamaSubgraph,
    CamaSubgraphGrad,
    Random,
    Degree,
    #[serde(rename = "gradargmax")]
    GradArgmax,
    Pagerank,
    Betweenness,
    None,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Cama,
        Method::CamaGrad,
        Method::CamaSubgraph,
        Method::CamaSubgraphGrad,
        Method::Random,
        Method::Degree,
        Method::GradArgmax,
        Method::Pagerank,
        Method::Betweenness,
        Method::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cama => "cama",
            Method::CamaGrad => "cama-grad",
            Method::CamaSubgraph => "cama-subgraph",
            Method::CamaSubgraphGrad => "cama-subgraph-grad",
            Method::Random => "random",
            Method::Degree => "degree",
            Method::GradArgmax => "gradargmax",
            Method::Pagerank => "pagerank",
            Method::Betweenness => "betweenness",
            Method::None => "none",
        }
    }

    pub fn supports(self, attack_type: AttackType) -> bool {
        match self {
            Method::Cama | Method::CamaGrad | Method::Random | Method::Degree | Method::None => true,
            Method::CamaSubgraph | Method::CamaSubgraphGrad | Method::GradArgmax => {
                attack_type == AttackType::Structure
            }
            Method::Pagerank | Method::Betweenness => attack_type == AttackType::Feature,
        }
    }

    /// Heat-map flavour for the CAM-guided methods.
    pub fn cam_kind(self) -> Option<CamKind> {
        match self {
            Method::Cama | Method::CamaSubgraph => Some(CamKind::Cam),
            Method::CamaGrad | Method::CamaSubgraphGrad => Some(CamKind::GradCam),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// Everything an attacker needs besides the model and the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub attack_type: AttackType,
    pub method: Method,
    pub fractions: BudgetFractions,
    pub similarity: SimilarityConstraint,
    pub subgraph: SubgraphConfig,
}

impl AttackConfig {
    pub fn new(attack_type: AttackType, method: Method) -> Self {
        Self {
            attack_type,
            method,
            fractions: BudgetFractions::default(),
            similarity: SimilarityConstraint::default(),
            subgraph: SubgraphConfig::default(),
        }
    }
}

/// Outcome of attacking one graph.
#[derive(Debug, Clone)]
pub struct AttackResult<T> {
    pub method: Method,
    pub perturbed: Graph<T>,
    pub flips: Vec<Flip>,
    pub feature_deltas: Vec<FeatureDelta>,
    /// Ranked-CAM column that produced the result (CAM methods only).
    pub column_used: Option<usize>,
    /// The attacking model misclassifies `perturbed`.
    pub success: bool,
    /// The attacking model already misclassified the clean graph, so
    /// nothing was perturbed.
    pub skipped: bool,
    /// Nodes chosen as feature-attack targets.
    pub selected_nodes: Vec<usize>,
    /// Node set the subgraph attack was confined to.
    pub subgraph_nodes: Option<Vec<usize>>,
}

impl<T: Scalar> AttackResult<T> {
    pub fn unchanged(method: Method, graph: &Graph<T>, skipped: bool) -> Self {
        Self {
            method,
            perturbed: graph.clone(),
            flips: vec![],
            feature_deltas: vec![],
            column_used: None,
            success: false,
            skipped,
            selected_nodes: vec![],
            subgraph_nodes: None,
        }
    }

    pub fn flips_used(&self) -> usize {
        self.flips.len()
    }
}

pub(crate) fn misclassifies<T: Scalar>(params: &ModelParams<T>, graph: &Graph<T>) -> Result<bool, AttackError> {
    Ok(predict(params, graph)? != graph.label)
}

/// Attacks one graph with `params` as the attacking model. Graphs the model
/// already misclassifies are returned untouched with `skipped` set.
pub fn attack_graph<T: Scalar>(
    params: &ModelParams<T>,
    graph: &Graph<T>,
    config: &AttackConfig,
    seed: u64,
) -> Result<AttackResult<T>, AttackError> {
    let method = config.method;
    if !method.supports(config.attack_type) {
        return Err(AttackError::Unsupported { method, attack_type: config.attack_type });
    }
    if method == Method::None {
        return Ok(AttackResult::unchanged(method, graph, false));
    }
    if misclassifies(params, graph)? {
        return Ok(AttackResult::unchanged(method, graph, true));
    }
    let budget = Budget::for_graph(graph, &config.fractions)?;
    let mut result = match (config.attack_type, method) {
        (AttackType::Feature, _) => {
            let nodes = match method {
                Method::Cama | Method::CamaGrad => None,
                Method::Random => Some(random_nodes(graph, budget.nodes, seed)?),
                Method::Degree => Some(degree_nodes(graph, budget.nodes)?),
                Method::Pagerank => Some(pagerank_nodes(graph, budget.nodes)?),
                Method::Betweenness => Some(betweenness_nodes(graph, budget.nodes)?),
                _ => unreachable!("checked by Method::supports"),
            };
            match nodes {
                Some(nodes) => feature_attack_on_nodes(params, graph, &nodes, &budget)?,
                None => {
                    let heat = heatmap(method.cam_kind().unwrap(), params, graph)?;
                    feature_attack(params, graph, &ranked_cam_matrix(&heat), &budget)?
                }
            }
        }
        (AttackType::Structure, Method::Cama | Method::CamaGrad) => {
            let heat = heatmap(method.cam_kind().unwrap(), params, graph)?;
            cama_structure(params, graph, &ranked_cam_matrix(&heat), &budget, &config.similarity)?
        }
        (AttackType::Structure, Method::CamaSubgraph | Method::CamaSubgraphGrad) => {
            let heat = heatmap(method.cam_kind().unwrap(), params, graph)?;
            let ranked = ranked_cam_matrix(&heat);
            let mut result = cama_subgraph(params, graph, ranked.column(graph.label), &budget, &config.subgraph)?;
            result.column_used = Some(graph.label);
            result
        }
        (AttackType::Structure, Method::Random) => random_flips(params, graph, budget.edges, seed)?,
        (AttackType::Structure, Method::Degree) => degree_flips(params, graph, budget.edges)?,
        (AttackType::Structure, Method::GradArgmax) => grad_argmax(params, graph, budget.edges)?,
        _ => unreachable!("checked by Method::supports"),
    };
    result.method = method;
    Ok(result)
}
