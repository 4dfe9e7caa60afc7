//! Active-inference saccade planning.
//!
//! The engine keeps Bernoulli presence beliefs over a discretized pan/tilt
//! grid, folds object-detection evidence into them by free-energy
//! minimization, and picks the next camera fixation by minimizing expected
//! free energy.
//!
//! Modules, bottom-up:
//! - [`grid`]: block grid, field of view and fixation space
//! - [`model`]: beliefs, sensor likelihood, temporal prior, preferences
//! - [`inference`]: belief update and variational free energy
//! - [`planner`]: expected free energy and action selection
//! - [`ingest`] and [`protocol`]: detector output and the NDJSON wire format
//! - [`agent`]: the perceive-plan loop
//! - [`sim`]: seeded world simulator and episode traces
//! - [`bench`] and [`render`]: latency harness and trace rendering

pub mod agent;
pub mod bench;
pub mod error;
pub mod grid;
pub mod inference;
pub mod ingest;
pub mod model;
pub mod planner;
pub mod protocol;
pub mod render;
pub mod sim;

pub use agent::{Agent, PlannerConfig, PreferenceConfig};
pub use error::{Error, Result};
pub use grid::{Block, Fixation, FovCell, GridSpec};
pub use inference::{free_energy, posterior_presence, update_beliefs};
pub use ingest::{detections_to_frame, Assignment, BBox, Detection, IngestConfig, IngestReport};
pub use model::{
    advance_prior, init_belief, BeliefState, ObsBin, ObservationFrame, PreferenceMode, Preferences, SensorModel,
};
pub use planner::{block_info_gain, evaluate_policy, select_action, PolicyEvaluation, SelectionPolicy, Selector};
pub use protocol::{
    encode_action_message, encode_frame_message, parse_action_message, parse_frame_message, ActionMessage,
    FrameMessage, Message, ProtocolError,
};
pub use sim::{
    run_episode, DetectorSim, EpisodeOptions, EpisodeSummary, EpisodeTrace, Scenario, StepRecord, WorldConfig,
    WorldObject, WorldState,
};
