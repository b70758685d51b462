//! Versioned JSON documents for fitted models and routers.
//!
//! ```json
//! { "format_version": 1, "kind": "decision_tree", "seed": null,
//!   "hyperparameters": { ... }, "parameters": { ... } }
//! ```
//!
//! Parameter arrays are stored flat. `f64` values are written with the
//! shortest round-tripping representation, so reloading reproduces
//! predictions exactly.

use std::fs;
use std::path::Path;

use greenselect_core::models::{NetConfig, SoftmaxConfig, TreeNode};
use greenselect_core::router::RouterLearner;
use greenselect_core::{Classifier, DecisionTree, FeedforwardNet, RouterModel, SoftmaxRegressor};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported format_version {0} (this build reads {FORMAT_VERSION})")]
    Version(u32),

    #[error("expected a {expected} document, found {found}")]
    Kind { expected: &'static str, found: &'static str },

    #[error(transparent)]
    Model(#[from] greenselect_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    /// Training seed, when training was randomised.
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub body: ModelBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    DecisionTree { hyperparameters: TreeHyperparameters, parameters: TreeParameters },
    FeedforwardNet { hyperparameters: NetConfig, parameters: NetParameters },
    SoftmaxRegressor { hyperparameters: SoftmaxConfig, parameters: SoftmaxParameters },
    Router { hyperparameters: RouterHyperparameters, parameters: RouterParameters },
}

impl ModelBody {
    fn kind(&self) -> &'static str {
        match self {
            Self::DecisionTree { .. } => "decision_tree",
            Self::FeedforwardNet { .. } => "feedforward_net",
            Self::SoftmaxRegressor { .. } => "softmax_regressor",
            Self::Router { .. } => "router",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeHyperparameters {
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParameters {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParameters {
    pub layer_sizes: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParameters {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub class_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterHyperparameters {
    /// Declared per-prediction cost of every chain position.
    pub chain_costs: Vec<f64>,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum RouterParameters {
    Constant { model_index: usize },
    SoftmaxRegressor { hyperparameters: SoftmaxConfig, parameters: SoftmaxParameters },
}

fn softmax_parameters(m: &SoftmaxRegressor) -> SoftmaxParameters {
    SoftmaxParameters {
        feature_dim: m.feature_dim(),
        num_classes: m.num_classes(),
        weights: m.weights().to_vec(),
        bias: m.bias().to_vec(),
        class_weights: m.class_weights().to_vec(),
    }
}

fn softmax_from(config: SoftmaxConfig, p: SoftmaxParameters) -> Result<SoftmaxRegressor, PersistError> {
    Ok(SoftmaxRegressor::from_parts(config, p.feature_dim, p.num_classes, p.weights, p.bias, p.class_weights)?)
}

impl ModelDocument {
    fn new(seed: Option<u64>, body: ModelBody) -> Self {
        Self { format_version: FORMAT_VERSION, seed, body }
    }

    pub fn from_tree(tree: &DecisionTree) -> Self {
        Self::new(
            None,
            ModelBody::DecisionTree {
                hyperparameters: TreeHyperparameters { max_depth: tree.max_depth() },
                parameters: TreeParameters {
                    feature_dim: tree.feature_dim(),
                    num_classes: tree.num_classes(),
                    nodes: tree.nodes().to_vec(),
                },
            },
        )
    }

    pub fn from_net(net: &FeedforwardNet) -> Self {
        Self::new(
            Some(net.config().seed),
            ModelBody::FeedforwardNet {
                hyperparameters: net.config().clone(),
                parameters: NetParameters { layer_sizes: net.layer_sizes().to_vec(), values: net.parameters().to_vec() },
            },
        )
    }

    pub fn from_softmax(model: &SoftmaxRegressor) -> Self {
        Self::new(
            Some(model.config().seed),
            ModelBody::SoftmaxRegressor { hyperparameters: model.config().clone(), parameters: softmax_parameters(model) },
        )
    }

    pub fn from_router(router: &RouterModel) -> Self {
        let (seed, parameters) = match router.learner() {
            RouterLearner::Constant { model_index } => (None, RouterParameters::Constant { model_index: *model_index }),
            RouterLearner::Learned(m) => (
                Some(m.config().seed),
                RouterParameters::SoftmaxRegressor {
                    hyperparameters: m.config().clone(),
                    parameters: softmax_parameters(m),
                },
            ),
        };
        Self::new(
            seed,
            ModelBody::Router {
                hyperparameters: RouterHyperparameters {
                    chain_costs: router.chain_costs().to_vec(),
                    feature_dim: router.feature_dim(),
                },
                parameters,
            },
        )
    }

    pub fn kind(&self) -> &'static str {
        self.body.kind()
    }

    fn wrong_kind(&self, expected: &'static str) -> PersistError {
        PersistError::Kind { expected, found: self.kind() }
    }

    pub fn into_tree(self) -> Result<DecisionTree, PersistError> {
        match self.body {
            ModelBody::DecisionTree { hyperparameters, parameters } => Ok(DecisionTree::from_parts(
                hyperparameters.max_depth,
                parameters.feature_dim,
                parameters.num_classes,
                parameters.nodes,
            )?),
            _ => Err(self.wrong_kind("decision_tree")),
        }
    }

    pub fn into_net(self) -> Result<FeedforwardNet, PersistError> {
        match self.body {
            ModelBody::FeedforwardNet { hyperparameters, parameters } => {
                Ok(FeedforwardNet::from_parts(hyperparameters, parameters.layer_sizes, parameters.values)?)
            }
            _ => Err(self.wrong_kind("feedforward_net")),
        }
    }

    pub fn into_softmax(self) -> Result<SoftmaxRegressor, PersistError> {
        match self.body {
            ModelBody::SoftmaxRegressor { hyperparameters, parameters } => softmax_from(hyperparameters, parameters),
            _ => Err(self.wrong_kind("softmax_regressor")),
        }
    }

    pub fn into_router(self) -> Result<RouterModel, PersistError> {
        match self.body {
            ModelBody::Router { hyperparameters, parameters } => {
                let learner = match parameters {
                    RouterParameters::Constant { model_index } => RouterLearner::Constant { model_index },
                    RouterParameters::SoftmaxRegressor { hyperparameters, parameters } => {
                        RouterLearner::Learned(softmax_from(hyperparameters, parameters)?)
                    }
                };
                Ok(RouterModel::from_parts(learner, hyperparameters.feature_dim, hyperparameters.chain_costs)?)
            }
            _ => Err(self.wrong_kind("router")),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, PersistError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(PersistError::Version(probe.format_version));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PersistError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| PersistError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| PersistError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}
