//! Densities of abelianization pullbacks in free groups.
//!
//! The crate counts reduced words of `F_k` by their image in `ℤ^k` exactly, pulls lattice
//! sets defined by the gcd of coordinates (visible points, `t`-visible points and their
//! unions) back to the free group, and measures spherical, annular and ball densities of
//! the resulting word sets. For rank two it also classifies test elements. Every exact
//! computation has an enumeration or sampling counterpart that it is checked against.

// Float checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod densities;
pub mod error;
mod limbs;
pub mod lattice;
pub mod sampler;
pub mod spectrum;
pub mod words;

pub use densities::{
    compare_bounds, expected_gcd_series, is_t_visible_word, is_test_element_rank2,
    is_visible_word, proper_power_count, proper_power_count_enumerated, spherical_series,
    test_element_series_exact, test_element_series_hybrid, DensitySeries, SeriesPoint,
    TestElementVerdict, VerdictReason,
};
pub use error::{Budget, Error, Result};
pub use lattice::{
    count_in_ball, count_in_linf_ball_mobius, even_visible_density, gcd_class,
    gcd_class_set_density, is_t_visible, region_count, theoretical_density_ut, zeta, BallCount,
    GcdClass, GcdClassSet, Norm, Region, RegionCount, ZETA_2,
};
pub use sampler::{
    mc_annular_estimate, sample_ball_experiment, sample_sphere, AnnularTarget, SampleEstimate,
};
pub use spectrum::{
    build_count_table, build_count_table_with_budget, default_sigma2, enumerated_histogram, llt_sup_error,
    normal_density, pn_value, second_moment, tail_mass, CountTable,
};
pub use words::{
    abelianize, ball_size, cyclic_reduce, enumerate_sphere, primitive_root, reduce, sphere_size,
    ExponentVector, Letter, Word,
};
