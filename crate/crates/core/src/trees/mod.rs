//! From-scratch tree learners: a random forest (the deployed model) and a
//! gradient-boosted ensemble (the CFPT proxy classifier).

mod boost;
mod forest;
mod tree;

pub use boost::{boosted_fit_stages, BoostParams, BoostedEnsemble};
pub(crate) use boost::{argmax_rows, softmax_rows};
pub use forest::{fit_random_forest, ForestParams, Prediction, RandomForest};
pub use tree::{fit_grad_tree, leaf_weight, split_gain, DecisionTree, GradTreeParams, Node};
