//! Session orchestration: state, the feedback and sequencer ticks, logging,
//! the virtual-time harness and the threaded real-time runtime.

mod engine;
mod harness;
mod log;
mod reps;
mod runtime;
mod state;

pub use self::log::{read_log, write_log, LogRow, LogWriter, LOG_SCHEMA_VERSION};
pub use engine::{Engine, MbfOutput, RenderCommand, SlotInput, Snapshot, Transport};
pub use harness::{VirtualRun, VirtualSession};
pub use reps::{count_repetition, RepCounter};
pub use runtime::{
    measure_loop_delay, AudioTap, LoopDelayOptions, LoopDelayStats, Runtime, RuntimeOptions, RuntimeStats,
};
pub use state::{
    load_config, save_config, ControlConfig, DynamicConfig, GaitConfig, Mode, ModeConfig, ModeConfigs, MusicConfig,
    ReachConfig, SensorConfig, SessionState, StsConfig, TiltAxis, CONFIG_SCHEMA_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("schema version {found} does not match supported version {expected}")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid session state: {0}")]
    InvalidState(String),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("no trials requested")]
    EmptyTrial,
    #[error("log error: {0}")]
    Log(String),
    #[error("engine stopped")]
    EngineStopped,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sequencer(#[from] crate::sequencer::SequencerError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}
