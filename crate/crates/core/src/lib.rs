//! Simulation and auditing of Bell tests on inflated networks.
//!
//! Quantum correlations come from the Born rule on copies of a source state;
//! box-world correlations come from biseparable mixtures of no-signalling
//! boxes. Both are post-selected on the non-activated parties and audited
//! with the CHSH expression.

pub mod audit;
pub mod born;
pub mod chsh;
pub mod error;
pub mod lp;
pub mod measurement;
pub mod network;
pub mod ns;
pub mod optimizer;
pub mod states;
pub mod swapping;
pub mod tensor;

pub use error::{Error, Result};
