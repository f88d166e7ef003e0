// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod exponents;
pub mod fields;
pub mod mollify;
pub mod profiles;
pub mod refinement;
pub mod runner;
pub mod solver;
pub mod vacuum;
pub mod velocity;
pub mod weak_forms;
