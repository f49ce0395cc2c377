//! Sequencer-driven offline rendering without a session around it.

use std::sync::Arc;

use super::{AudioBlock, BlockEvent, StrategyControl, Synth, SynthError, SynthSettings, BLOCK_FRAMES, SAMPLE_RATE};
use crate::sequencer::{MusicEvent, Schedule, Sequencer, SEQ_PERIOD_MS};

/// Sequencer ticks per audio block.
pub const TICKS_PER_BLOCK: usize = 10;

/// Runs ten 1 ms sequencer ticks per block and places their events at the
/// matching frame offsets.
#[derive(Debug, Clone)]
pub struct OfflineRenderer {
    pub sequencer: Sequencer,
    pub synth: Synth,
    started: bool,
    scratch: Vec<MusicEvent>,
    block_events: Vec<BlockEvent>,
}

impl OfflineRenderer {
    pub fn new(schedule: Arc<Schedule>, tempo: f64, settings: SynthSettings) -> Result<Self, SynthError> {
        let mut synth = Synth::new(settings, tempo)?;
        synth.set_variants(schedule.variants);
        let mut sequencer = Sequencer::new(schedule, tempo);
        sequencer.play();
        Ok(Self {
            sequencer,
            synth,
            started: false,
            scratch: Vec::with_capacity(64),
            block_events: Vec::with_capacity(64),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.sequencer.is_finished()
    }

    /// Events placed into the most recent block.
    pub fn last_events(&self) -> &[BlockEvent] {
        &self.block_events
    }

    pub fn render_block(&mut self, controls: &[StrategyControl]) -> AudioBlock {
        self.block_events.clear();
        let frames_per_tick = (SEQ_PERIOD_MS * 1e-3 * SAMPLE_RATE) as u32;
        for j in 0..TICKS_PER_BLOCK {
            let dt = if self.started { SEQ_PERIOD_MS } else { 0.0 };
            self.started = true;
            self.scratch.clear();
            self.sequencer.tick(dt, &mut self.scratch);
            let offset = (j as u32 * frames_per_tick).min(BLOCK_FRAMES as u32 - 1);
            self.block_events
                .extend(self.scratch.iter().map(|&event| BlockEvent { offset, event }));
        }
        self.synth.set_tempo(self.sequencer.clock().tempo);
        self.synth.render_block(&self.block_events, controls)
    }

    /// Render until the song ends plus `tail_blocks` of release.
    pub fn render_song(&mut self, controls: &[StrategyControl], tail_blocks: usize) -> Vec<AudioBlock> {
        let mut out = Vec::new();
        while !self.is_finished() {
            out.push(self.render_block(controls));
        }
        for _ in 0..tail_blocks {
            out.push(self.render_block(controls));
        }
        out
    }
}
