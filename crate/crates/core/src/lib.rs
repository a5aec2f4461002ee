//! Simulation of recursive multicast Byzantine agreement over three-party
//! one-time universal₂ hashing signatures, with adversary models, protocol
//! analysis and a finite-key decoy-state key-length calculator.

pub mod adversary;
pub mod analysis;
pub mod bits;
pub mod consensus;
pub mod gf2;
pub mod harness;
pub mod keyrate;
pub mod qds;
pub mod scalar;

pub use consensus::{majority, Message, NodeId, Route, TieOrder};
pub use harness::{complexity, load_scenario, run, RunReport, ScenarioConfig};

pub type DecoyParamsF64 = keyrate::DecoyParams<f64>;
pub type DecoyParamsF32 = keyrate::DecoyParams<f32>;
pub type KeyRateResultF64 = keyrate::KeyRateResult<f64>;
pub type KeyRateResultF32 = keyrate::KeyRateResult<f32>;
pub type KeyRateInputF64 = keyrate::KeyRateInput<f64>;
