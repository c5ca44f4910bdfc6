//! Simulation core for comparing an FL-based digital twin network with an
//! LLM-Twin network built from fine-tuned deltas and shared prompts.
//!
//! - [`cost_model`]: closed-form time model of both paradigms.
//! - [`fl_baseline`]: FedAvg on linear regression, used to measure `K`.
//! - [`mini_giant`]: table-driven base model, deltas, and secure encoding.
//! - [`protocol`]: twin lifecycle and event-driven runs.
//! - [`security`]: real/ideal worlds, attacks, and property checks.

pub mod cost_model;
pub mod fl_baseline;
pub mod mini_giant;
pub mod protocol;
pub mod security;

pub use cost_model::{
    compare, fl_total, lt_total, theorem_violations, ChannelConfig, Comparison, Constraint, CostError, EntityProfile,
    LogBase, Scenario, ServerProfile, TimeBreakdown,
};
pub use fl_baseline::{run_federated, FedAvgConfig, FederatedRun, FlError, LocalDataset, Sample, SyntheticTask};
pub use mini_giant::{Delta, Generation, MiniGiantError, ToyModel, TrainingPair};
pub use protocol::{
    simulate_fl, simulate_lt, DbPricing, DigitalTwin, EventLog, LtConfig, PhysicalEntity, PromptDatabase, PromptRecord,
    ProtocolError, World,
};
pub use security::{AdversaryScript, CheckResult, Role, ScriptFile, SecurityError, Transcript};
