//! Partially linear estimation `Y = θ'Z + g(V) + ξ` with Nadaraya–Watson
//! residualization, and the three predictors built from a fit.

mod fit;
mod kernel;
mod post_dantzig;

pub use fit::{fit_plm, predict_full, predict_ols, predict_submodel, PlmFit, PlmVariant};
pub use kernel::{
    bandwidth_rule, default_bandwidth_scale, estimate_g, nw_residualize, nw_smooth, product_kernel_weight,
    KernelSpec, KERNEL_ORDER,
};
pub use post_dantzig::{fit_post_dantzig, AlphaChoice, AlphaSource, PostDantzigFit, PostDantzigOptions};
