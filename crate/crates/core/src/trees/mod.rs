//! Tree-based imputers.

pub mod bart;
pub mod boost;
pub mod cart;
pub mod cubist;
pub mod forest;
pub mod tree;

pub use bart::{fit_bart, leaf_count_prior, BartConfig, BartFit};
pub use boost::{fit_ls_boost, fit_xgb, BoostConfig, BoostedTrees};
pub use cart::{fit_cart, CartConfig};
pub use cubist::{fit_cubist, CubistConfig, CubistModel};
pub use forest::{fit_random_forest, Forest, ForestConfig};
pub use tree::{best_split, Split, Tree, TreeNode};
