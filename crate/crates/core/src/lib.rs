//! Lie-algebraic certification and sampled-data stabilization of
//! control-affine systems `x' = f(x) + u g(x)`.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::should_implement_trait)]

pub mod certify;
pub mod exec;
pub mod lie;
pub mod ode;
pub mod simloop;
pub mod symcalc;
pub mod synth;

pub use certify::{Case, Certificate, Certifier, SystemDef};
pub use exec::Exec;
