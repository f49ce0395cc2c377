//! Real-time musical biofeedback engine.

pub mod clock;
pub mod control;
pub mod dsp;
pub mod mapping;
pub mod motion;
pub mod osc;
pub mod sequencer;
pub mod synth;
pub mod session;
pub mod sim;
