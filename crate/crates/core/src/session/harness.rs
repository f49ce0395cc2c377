use super::engine::{Engine, MbfOutput, RenderCommand, SlotInput};
use super::log::LogRow;
use super::{SessionError, SessionState};
use crate::motion::MBF_PERIOD_MS;
use crate::osc::{decode_osc_message, BodyLocation, Delivery, ImuSample};
use crate::sequencer::{MusicEvent, SEQ_PERIOD_MS};
use crate::sim::{datagrams, SimRun};
use crate::synth::offline::TICKS_PER_BLOCK;
use crate::synth::{AudioBlock, BlockEvent, StrategyControl, Synth, BLOCK_FRAMES, SAMPLE_RATE};

#[derive(Debug, Clone, Default)]
struct Feed {
    /// Sorted by `t_rx`, the arrival time.
    samples: Vec<ImuSample>,
    cursor: usize,
}

/// Output of [`VirtualSession::run_for`].
#[derive(Debug, Clone, Default)]
pub struct VirtualRun {
    pub rows: Vec<LogRow>,
    pub controls: Vec<Vec<StrategyControl>>,
    /// Empty unless audio was rendered.
    pub blocks: Vec<AudioBlock>,
}

/// The engine driven on simulated time: samples arrive exactly at their
/// timestamps, the feedback tick runs at each block start and ten sequencer
/// ticks fill each 10 ms block. Fully deterministic.
#[derive(Debug, Clone)]
pub struct VirtualSession {
    pub engine: Engine,
    pub synth: Synth,
    feeds: Vec<Feed>,
    now: f64,
    started: bool,
    commands: Vec<RenderCommand>,
    scratch: Vec<MusicEvent>,
    events: Vec<BlockEvent>,
}

impl VirtualSession {
    pub fn new(state: SessionState) -> Result<Self, SessionError> {
        let engine = Engine::new(state)?;
        let synth = Synth::new(engine.state().mixer.clone(), engine.tempo())?;
        let n = engine.state().sensors.slots.len();
        Ok(Self {
            engine,
            synth,
            feeds: vec![Feed::default(); n],
            now: 0.0,
            started: false,
            commands: Vec::new(),
            scratch: Vec::with_capacity(64),
            events: Vec::with_capacity(64),
        })
    }

    /// Time of the next block, ms.
    pub fn now(&self) -> f64 {
        self.now
    }

    fn slot(&self, location: BodyLocation) -> Option<usize> {
        self.engine
            .state()
            .sensors
            .slots
            .iter()
            .position(|s| s.body_location == location)
    }

    /// Queue samples for the slot at `location`, arriving at `t_rx + offset_ms`.
    pub fn attach(&mut self, location: BodyLocation, samples: &[ImuSample], offset_ms: f64) {
        let Some(i) = self.slot(location) else {
            log::warn!("no slot assigned to {location:?}; samples ignored");
            return;
        };
        let feed = &mut self.feeds[i];
        feed.samples.extend(samples.iter().map(|s| ImuSample {
            t_rx: s.t_rx + offset_ms,
            ..*s
        }));
        feed.samples.sort_by(|a, b| a.t_rx.total_cmp(&b.t_rx));
    }

    /// Queue a simulated run through the wire encoding, withholding a seeded
    /// random `drop_fraction` of datagrams.
    pub fn attach_run(&mut self, run: &SimRun, offset_ms: f64, drop_fraction: f64, seed: u64) {
        let (grams, _) = datagrams(run, drop_fraction, seed);
        for (k, stream) in run.streams.iter().enumerate() {
            let samples: Vec<ImuSample> = grams
                .iter()
                .filter(|d| d.stream == k)
                .map(|d| decode_osc_message(&d.bytes, d.t).expect("simulator output decodes"))
                .collect();
            self.attach(stream.location, &samples, offset_ms);
        }
    }

    fn inputs(&mut self) -> Vec<SlotInput> {
        let now = self.now;
        self.feeds
            .iter_mut()
            .map(|f| {
                let start = f.cursor;
                while f.samples.get(f.cursor).is_some_and(|s| s.t_rx <= now) {
                    f.cursor += 1;
                }
                let last = (f.cursor > 0).then(|| f.samples[f.cursor - 1]);
                SlotInput {
                    delivery: (f.cursor > start).then(|| Delivery {
                        sample: f.samples[f.cursor - 1],
                        superseded: (f.cursor - start - 1) as u64,
                    }),
                    last_rx: last.map(|s| s.t_rx),
                }
            })
            .collect()
    }

    /// Feedback tick, ten sequencer ticks and, if `render`, one audio block.
    pub fn step(&mut self, render: bool) -> (MbfOutput, Option<AudioBlock>) {
        let inputs = self.inputs();
        let out = self.engine.tick_mbf(self.now, &inputs);
        self.engine.take_render_commands(&mut self.commands);
        for c in self.commands.drain(..) {
            match c {
                RenderCommand::AllNotesOff => self.synth.all_notes_off(),
                RenderCommand::Settings(s) => {
                    if let Err(e) = self.synth.update_settings(&s) {
                        log::warn!("mixer update rejected: {e}");
                    }
                }
                RenderCommand::Variants(v) => self.synth.set_variants(v),
            }
        }
        self.events.clear();
        let frames_per_tick = (SEQ_PERIOD_MS * 1e-3 * SAMPLE_RATE) as u32;
        for j in 0..TICKS_PER_BLOCK {
            let dt = if self.started { SEQ_PERIOD_MS } else { 0.0 };
            self.started = true;
            self.scratch.clear();
            self.engine.tick_sequencer(dt, &mut self.scratch);
            let offset = (j as u32 * frames_per_tick).min(BLOCK_FRAMES as u32 - 1);
            self.events
                .extend(self.scratch.iter().map(|&event| BlockEvent { offset, event }));
        }
        self.now += MBF_PERIOD_MS;
        let block = render.then(|| {
            self.synth.set_tempo(self.engine.tempo());
            self.synth.render_block(&self.events, &out.controls)
        });
        (out, block)
    }

    pub fn run_for(&mut self, duration_ms: f64, render: bool) -> VirtualRun {
        let n = (duration_ms / MBF_PERIOD_MS).round() as usize;
        let mut run = VirtualRun::default();
        for _ in 0..n {
            let (out, block) = self.step(render);
            run.rows.push(out.row);
            run.controls.push(out.controls);
            run.blocks.extend(block);
        }
        run
    }
}
