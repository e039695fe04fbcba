//! Finite q-commuting tuples of contraction matrices: validation, Brehmer
//! positivity, the operator-valued kernel on the twisted monomial group, and
//! explicit windowed regular q-unitary dilations built by a GNS construction.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! OperatorTuple --(brehmer_check)--> positivity margins
//!              \--(KernelContext)--> kernel values, Gram matrices
//!                                  \--(dilate)--> DilationResult
//! ```
//!
//! All matrix data is complex `f64`; phases are carried exactly as rational
//! turns wherever the input allows it, so the group algebra in [`qword`] is
//! exact integer arithmetic.

pub mod brehmer;
pub mod dilate;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod optuple;
pub mod qword;
pub mod vnfc;




