//! Exact computations and Monte Carlo simulation for the symmetric inclusion
//! process SIP(m) and its dual.
//!
//! The guide in `book/` walks through each module; its examples run as doc
//! tests of this crate.

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod hydro;
pub mod lattice;
pub mod measures;
pub mod nes;
pub mod report;
pub mod stats;

pub use error::{Error, Result};

// Book chapters, one module each so a failing snippet points at its chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/duality.md")]
    mod duality {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/hydro.md")]
    mod hydro {}
    #[doc = include_str!("../../../book/src/nes.md")]
    mod nes {}
    #[doc = include_str!("../../../book/src/stats.md")]
    mod stats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
