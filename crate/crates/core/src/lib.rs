//! Finite and sampled rectangular-type metric spaces: axiom verification,
//! contraction fitting and Picard orbit diagnostics.

// `!(x >= 1.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod contraction;
pub mod error;
pub mod golden;
pub mod num;
pub mod orbit;
pub mod space;

pub use axioms::{
    classify, verify, AxiomReport, AxiomSystem, Classification, Verdict, VerifyOptions, Witness,
};
pub use contraction::{
    fit, Constants, ContractionCertificate, FisherVariant, Map, MapSpec, Scheme,
};
pub use error::{Error, Result};
pub use num::{fmt_num, parse_number, sig15, NumOrStr, DEFAULT_TOL, POINT_TOL};
pub use orbit::{picard, OrbitTrace, StopReason};
pub use space::{Point, Space, SpaceDef};
