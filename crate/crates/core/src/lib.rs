#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod gaussian;
pub mod linalg;
pub mod microbath;
pub mod models;
pub mod operators;
pub mod params;
pub mod superop;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/brackets.md")]
    mod brackets {}
    #[doc = include_str!("../../../book/src/positivity.md")]
    mod positivity {}
    #[doc = include_str!("../../../book/src/bare-state.md")]
    mod bare_state {}
    #[doc = include_str!("../../../book/src/microbath.md")]
    mod microbath {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
