//! Rational-spectrum factors, the skew product `F(T,p)`, and finite
//! permutation models of both.
//!
//! The permutation side is a combinatorial surrogate: a missing `k`-th root of
//! a cyclic approximation is evidence about, not proof of, the corresponding
//! statement for the measure-preserving map.

mod approximation;
mod group;
mod permutation;
mod skew;

pub use approximation::{count_ergodic_components, cyclic_approximation, ApproxSystem, CyclicApproximation};
pub use group::{product_correlation, s_correlation, CyclicFactor, GroupSet};
pub use permutation::{brute_force_root, kth_root, root_exists, FinitePermutation, BRUTE_FORCE_LIMIT};
pub use skew::SkewSystem;
