//! Risk-aware active debris removal planning.
//!
//! * [`orbits`]: three-leg high-thrust transfer costs between circular orbits.
//! * [`environment`]: the removal-step mission MDP with random risk events.
//! * [`learner`]: a deep Q-network agent with replay and a fixed target.
//! * [`oracle`]: exhaustive search used to certify learned plans.
//! * [`data`]: CSV and TLE catalogs plus a synthetic debris cloud.

pub mod data;
pub mod environment;
pub mod learner;
pub mod oracle;
pub mod orbits;
pub mod rng;

pub use data::{CloudRanges, DataError, Debris, DebrisCatalog};
pub use environment::{
    EnvError, Environment, Location, MissionConfig, MissionState, StartPolicy, StepOutcome,
    TerminationCause,
};
pub use learner::{AgentConfig, Experience, LearnerError, QNetwork, TrainingReport};
pub use oracle::{Budgets, OracleError};
pub use orbits::{
    CostProvider, GravConstants, HighThrust, OrbitError, OrbitalElements, TransferCost,
};
pub use rng::{derive_seed, stream_rng, PlannerRng, Stream};
