//! Estimators and hypothesis tests over replica outputs.

mod gof;
mod identity;
mod moments;

pub use gof::{
    anderson_darling_normal_p, cross_correlation, dispersion_index, kolmogorov_sf,
    ks_exponential, ks_p_value, ks_statistic, normality_test, two_sided_normal_p,
    NormalityReport, TestReport, COUNT_TEST_MIN_SAMPLES, DEFAULT_ALPHA, KS_MIN_SAMPLES,
    NORMALITY_MIN_SAMPLES,
};
pub use identity::{identity_a47_check, identity_a47_right_grid, three_sigma_alpha, IdentityReport};
pub use moments::{MomentAccumulator, PairedAccumulator};
