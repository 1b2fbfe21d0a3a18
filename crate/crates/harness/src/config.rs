use std::path::{Path, PathBuf};

use cama_core::attack::{AttackConfig, AttackType, BudgetFractions, MaskInit, Method, SimilarityConstraint, SubgraphConfig};
use cama_core::gnn::{Arch, TrainConfig};
use cama_core::graph::FeaturePolicy;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The victim attacks itself.
    Whitebox,
    /// A surrogate generates perturbations that are evaluated on the victim.
    Blackbox,
    /// Surrogate perturbations of the training folds, victim retrained on them.
    Poison,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Whitebox => "whitebox",
            Mode::Blackbox => "blackbox",
            Mode::Poison => "poison",
        }
    }
}

/// Precision used while training; attacks and evaluation always run in f64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// One experiment, read from flat JSON. Missing keys take the defaults
/// below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: String,
    pub data_root: PathBuf,
    pub features: FeaturePolicy,
    pub arch: Arch,
    pub surrogate: Option<Arch>,
    /// Lets a black-box or poisoning run use the victim's architecture as
    /// surrogate.
    pub allow_same_arch: bool,
    pub mode: Mode,
    pub attack_type: AttackType,
    pub method: Method,
    pub edge_frac: f64,
    pub node_frac: f64,
    pub feat_frac: f64,
    pub lambda: f64,
    pub s1: f64,
    pub s2: f64,
    pub embedding_layer: usize,
    pub subgraph_frac: f64,
    pub epochs_mask: usize,
    pub lambda_ent: f64,
    pub mask_lr: f64,
    pub mask_init: MaskInit,
    pub folds: usize,
    pub epochs: usize,
    pub lr: f64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub train_precision: Precision,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Checkpoint directory: models found there are reused, missing ones
    /// are trained and saved.
    pub models: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fractions = BudgetFractions::default();
        let similarity = SimilarityConstraint::default();
        let subgraph = SubgraphConfig::default();
        let train = TrainConfig::default();
        Self {
            version: CONFIG_VERSION,
            dataset: "MUTAG".into(),
            data_root: PathBuf::from("data"),
            features: FeaturePolicy::OneHotLabel,
            arch: Arch::Gcn,
            surrogate: None,
            allow_same_arch: false,
            mode: Mode::Whitebox,
            attack_type: AttackType::Structure,
            method: Method::Cama,
            edge_frac: fractions.edge_frac,
            node_frac: fractions.node_frac,
            feat_frac: fractions.feat_frac,
            lambda: fractions.lambda,
            s1: similarity.s1,
            s2: similarity.s2,
            embedding_layer: similarity.embedding_layer,
            subgraph_frac: subgraph.fraction,
            epochs_mask: subgraph.epochs,
            lambda_ent: subgraph.lambda_ent,
            mask_lr: subgraph.lr,
            mask_init: subgraph.init,
            folds: 10,
            epochs: train.epochs,
            lr: train.lr,
            hidden_dim: train.hidden_dim,
            num_layers: train.num_layers,
            train_precision: Precision::F32,
            seed: 0,
            out: None,
            models: None,
        }
    }
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| bad(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.data_root.join(&self.dataset)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.version != CONFIG_VERSION {
            return Err(bad(format!("unsupported config version {}", self.version)));
        }
        if self.dataset.is_empty() {
            return Err(bad("dataset name is empty"));
        }
        self.fractions().validate().map_err(|e| bad(e.to_string()))?;
        self.similarity().validate().map_err(|e| bad(e.to_string()))?;
        self.subgraph().validate().map_err(|e| bad(e.to_string()))?;
        if self.embedding_layer > self.num_layers {
            return Err(bad(format!("embedding layer {} exceeds {} layers", self.embedding_layer, self.num_layers)));
        }
        if !(2..=100).contains(&self.folds) {
            return Err(bad(format!("folds must lie in 2..=100, got {}", self.folds)));
        }
        if self.epochs == 0 || self.hidden_dim == 0 || self.num_layers == 0 || !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(bad("training epochs, hidden size, layers and learning rate must be positive"));
        }
        if !self.method.supports(self.attack_type) {
            return Err(bad(format!("{} does not support {} attacks", self.method, self.attack_type)));
        }
        match self.mode {
            Mode::Whitebox => {}
            Mode::Blackbox | Mode::Poison => {
                let surrogate = self.surrogate.ok_or_else(|| bad(format!("{} mode needs a surrogate", self.mode.as_str())))?;
                if surrogate == self.arch && !self.allow_same_arch {
                    return Err(bad("surrogate equals victim; set allow_same_arch to run this ablation"));
                }
            }
        }
        if self.mode == Mode::Poison && self.attack_type != AttackType::Structure {
            return Err(bad("poisoning uses structure perturbations"));
        }
        Ok(())
    }

    /// Architecture whose CAM and gradients generate the perturbations.
    pub fn attacker_arch(&self) -> Arch {
        match self.mode {
            Mode::Whitebox => self.arch,
            Mode::Blackbox | Mode::Poison => self.surrogate.unwrap_or(self.arch),
        }
    }

    pub fn fractions(&self) -> BudgetFractions {
        BudgetFractions { edge_frac: self.edge_frac, node_frac: self.node_frac, feat_frac: self.feat_frac, lambda: self.lambda }
    }

    pub fn similarity(&self) -> SimilarityConstraint {
        SimilarityConstraint { s1: self.s1, s2: self.s2, embedding_layer: self.embedding_layer }
    }

    pub fn subgraph(&self) -> SubgraphConfig {
        SubgraphConfig {
            fraction: self.subgraph_frac,
            epochs: self.epochs_mask,
            lambda_ent: self.lambda_ent,
            lr: self.mask_lr,
            init: self.mask_init,
        }
    }

    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            attack_type: self.attack_type,
            method: self.method,
            fractions: self.fractions(),
            similarity: self.similarity(),
            subgraph: self.subgraph(),
        }
    }

    /// Training settings for one fold. Every architecture and role uses the
    /// same initialisation seed for a given (seed, fold).
    pub fn train(&self, fold: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            seed: init_seed(self.seed, fold),
        }
    }
}

/// Keeps fold initialisations distinct for up to 100 folds.
pub fn init_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(100).wrapping_add(fold as u64)
}

/// Seed for the random baselines on one graph.
pub fn attack_seed(seed: u64, graph_id: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ graph_id as u64)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"edge_fraction": 0.1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"method": "pgd"}"#).is_err());
        let cases = [
            ExperimentConfig { edge_frac: 0.0, ..Default::default() },
            ExperimentConfig { mode: Mode::Blackbox, ..Default::default() },
            ExperimentConfig { mode: Mode::Blackbox, surrogate: Some(Arch::Gcn), ..Default::default() },
            ExperimentConfig { attack_type: AttackType::Feature, method: Method::CamaSubgraph, ..Default::default() },
            ExperimentConfig {
                mode: Mode::Poison,
                surrogate: Some(Arch::Gin0),
                attack_type: AttackType::Feature,
                ..Default::default()
            },
            ExperimentConfig { version: 2, ..Default::default() },
            ExperimentConfig { folds: 1, ..Default::default() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(HarnessError::Config(_))), "{c:?}");
        }
        let ablation = ExperimentConfig {
            mode: Mode::Blackbox,
            surrogate: Some(Arch::Gcn),
            allow_same_arch: true,
            ..Default::default()
        };
        ablation.validate().unwrap();
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..5 {
            for g in 0..200 {
                assert!(seen.insert(attack_seed(s, g)));
            }
        }
        assert_ne!(init_seed(0, 1), init_seed(1, 0));
    }
}
