//! Delay and energy co-simulation of split LoRA fine-tuning between edge
//! devices and an edge server, with a joint cut-layer and server GPU
//! frequency optimizer (CARD) and an experiment harness.

// `!(x > 0.0)`-style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cost_model;
pub mod error;
pub mod harness;
pub mod llm_profile;
pub mod optimizer;
pub mod scenario;
pub mod wireless_channel;

pub use cost_model::{CostBreakdown, DeviceSpec, NormBounds, RoundCostInputs, ServerSpec};
pub use error::{Error, Result};
pub use harness::{run_experiment, simulate_round, ExperimentResult, Policy, RoundTrace};
pub use llm_profile::{default_llama_profile, LlmProfile, TransformerShape};
pub use optimizer::{card_decide, optimal_frequency, solve_p1, RoundDecision};
pub use scenario::{Scenario, Strictness};
pub use wireless_channel::{ChannelConfig, ChannelRealization, ChannelState, MappingTable};
