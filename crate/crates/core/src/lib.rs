//! Graph-classification GNNs trained from scratch and attacked with
//! class-activation-map guided feature and structure perturbations.
//!
//! The numeric code is generic over [`Scalar`]; the `*64` aliases below are
//! what the experiment harness uses.

pub mod attack;
pub mod autodiff;
pub mod cam;
pub mod gnn;
pub mod graph;
pub mod scalar;

pub use scalar::Scalar;

pub type Graph64 = graph::Graph<f64>;
pub type Dataset64 = graph::Dataset<f64>;
pub type Tape64 = autodiff::Tape<f64>;
pub type ModelParams64 = gnn::ModelParams<f64>;
pub type HeatMap64 = cam::HeatMap<f64>;
pub type AttackResult64 = attack::AttackResult<f64>;

pub type Graph32 = graph::Graph<f32>;
pub type Tape32 = autodiff::Tape<f32>;
pub type ModelParams32 = gnn::ModelParams<f32>;
