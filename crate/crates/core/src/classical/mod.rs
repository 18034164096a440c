//! Regression-based and donor-based classical imputers.

pub mod knn;
pub mod linear;
pub mod logistic;
pub mod pcr;
pub mod score;
pub mod spline;

pub use knn::{fit_knn, KnnModel};
pub use linear::{fit_weighted_linear, LinearFit};
pub use logistic::{fit_weighted_logistic, LogisticFit};
pub use pcr::{fit_pcr, PcrFit};
pub use score::{build_score_classes, ScoreClasses};
pub use spline::{bspline_basis, fit_additive_splines, AdditiveFit, SplineBasis};
