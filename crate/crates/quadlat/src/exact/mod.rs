//! Exact scalar arithmetic: p-local rationals, small finite fields, truncated
//! Witt rings, dense matrices over any of these, Smith normal form over the
//! integers, and multivariate polynomials.

pub mod fq;
pub mod matrix;
pub mod poly;
pub mod rational;
pub mod snf;
pub mod witt;

pub use fq::{FqElem, FqField};
pub use matrix::{FieldScalar, Mat, Scalar};
pub use poly::WittPoly;
pub use rational::{
    format_rat, is_p_integral, is_p_unit, parse_rat, rat, rat_int, valuation, Rat, Valuation,
};
pub use snf::{row_hnf, smith_normal_form, zq_module_canonical, SmithForm};
pub use witt::{WittElem, WittRing};
