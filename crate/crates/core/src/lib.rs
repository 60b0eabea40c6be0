//! Compositional synthesis and verification of control barrier certificates
//! for networks of discrete-time stochastic control systems, with DFA
//! specifications decomposed into sequential reachability tasks.

pub mod automata;
pub mod bounds;
pub mod certify;
pub mod compose;
pub mod error;
pub mod fixtures;
pub mod par;
pub mod poly;
pub mod sim;
pub mod synth;
pub mod system;

pub use error::{Error, Result};
pub use par::Exec;
