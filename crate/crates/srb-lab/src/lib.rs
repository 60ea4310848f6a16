//! srb-lab: a numerical laboratory for SRB measures of Viana-type skew
//! products on the cylinder S¹ × I.
//!
//! The library covers the map family and its orbits (`maps`), the
//! return-code / hyperbolic-time combinatorics (`symbolic`), grid densities
//! and the Ulam transfer operator (`transfer`), cell-level induced return
//! schemes (`induced`), and the end-to-end experiments (`experiments`)
//! driven by the `srb-lab` binary.

pub mod artifacts;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod induced;
pub mod maps;
pub mod symbolic;
pub mod transfer;
pub mod util;

pub use error::{Error, Result};
