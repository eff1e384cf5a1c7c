//! Hierarchical production planning for a flow line.

pub mod dispatch;
pub mod econ;
pub mod error;
pub mod movetarget;
pub mod mps;
pub mod perfcurve;
pub mod planner;
pub mod simflow;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/market.md")]
    pub mod market {}
    #[doc = include_str!("../../../book/src/planning.md")]
    pub mod planning {}
    #[doc = include_str!("../../../book/src/schedule.md")]
    pub mod schedule {}
    #[doc = include_str!("../../../book/src/dispatch.md")]
    pub mod dispatch {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
