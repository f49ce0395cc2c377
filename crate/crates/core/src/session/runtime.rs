//! Threaded real-time runtime: UDP receivers, a 1 kHz deadline-scheduled
//! engine thread, a render thread fed through a lock-free ring, and writer
//! threads for the log and the rendered audio.

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::engine::{Engine, RenderCommand, SlotInput, Snapshot};
use super::log::{LogRow, LogWriter};
use super::{Mode, SessionError, SessionState, TiltAxis};
use crate::clock::Clock;
use crate::motion::MBF_PERIOD_MS;
use crate::osc::{Mailbox, SensorReceiver};
use crate::sequencer::{MusicEvent, SEQ_PERIOD_MS};
use crate::sim::{generate_profile, stream_run, MotionProfile, ProfileKind, StreamOptions};
use crate::synth::offline::TICKS_PER_BLOCK;
use crate::synth::{AudioBlock, BlockEvent, Strategy, StrategyControl, Synth, WavSink, BLOCK_FRAMES, SAMPLE_RATE};

type EngineCmd = Box<dyn FnOnce(&mut Engine) + Send>;

struct RenderJob {
    /// Scheduled block time, ms since start.
    t: f64,
    events: Vec<BlockEvent>,
    controls: Vec<StrategyControl>,
    tempo: f64,
    commands: Vec<RenderCommand>,
}

/// Records the times at which rendered audio becomes audible after silence.
#[derive(Debug)]
pub struct AudioTap {
    threshold: f32,
    was_silent: AtomicBool,
    onsets: Mutex<Vec<f64>>,
}

impl AudioTap {
    pub fn new(threshold: f32) -> Self {
        Self {
            threshold,
            was_silent: AtomicBool::new(true),
            onsets: Mutex::new(Vec::new()),
        }
    }

    /// `t_ms` is when the block's first frame is available for playback.
    pub fn observe(&self, block: &AudioBlock, t_ms: f64) {
        let first = block
            .frames
            .iter()
            .position(|f| f[0].abs() > self.threshold || f[1].abs() > self.threshold);
        let silent = first.is_none();
        if let Some(i) = first {
            if self.was_silent.load(Ordering::Relaxed) {
                let onset = t_ms + i as f64 * 1000.0 / SAMPLE_RATE;
                self.onsets.lock().unwrap().push(onset);
            }
        }
        self.was_silent.store(silent, Ordering::Relaxed);
    }

    pub fn onsets(&self) -> Vec<f64> {
        self.onsets.lock().unwrap().clone()
    }
}

#[derive(Default)]
pub struct RuntimeOptions {
    pub log_path: Option<PathBuf>,
    pub render_out: Option<PathBuf>,
    pub tap: Option<Arc<AudioTap>>,
    /// Shared time base; a fresh clock when `None`.
    pub clock: Option<Clock>,
}

#[derive(Debug, Default)]
struct Counters {
    seq_ticks: AtomicU64,
    mbf_ticks: AtomicU64,
    late_ticks: AtomicU64,
    max_lateness_us: AtomicU64,
    frozen_ticks: AtomicU64,
    blocks: AtomicU64,
    dropped_jobs: AtomicU64,
    dropped_rows: AtomicU64,
    dropped_audio: AtomicU64,
    log_rows: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RuntimeStats {
    pub seq_ticks: u64,
    pub mbf_ticks: u64,
    /// Sequencer ticks that started more than one period late.
    pub late_ticks: u64,
    pub max_lateness_ms: f64,
    pub frozen_ticks: u64,
    pub blocks: u64,
    pub dropped_jobs: u64,
    pub dropped_rows: u64,
    pub dropped_audio: u64,
    pub log_rows: u64,
    pub superseded: u64,
    pub malformed: u64,
}

/// A running engine. Dropping it stops every thread.
pub struct Runtime {
    clock: Clock,
    start_ms: f64,
    stop: Arc<AtomicBool>,
    receivers: Vec<SensorReceiver>,
    sensor_addrs: Vec<SocketAddr>,
    cmd_tx: mpsc::Sender<EngineCmd>,
    snapshot: Arc<Mutex<Arc<Snapshot>>>,
    counters: Arc<Counters>,
    threads: Vec<JoinHandle<()>>,
}

impl Runtime {
    pub fn start(state: SessionState, opts: RuntimeOptions) -> Result<Runtime, SessionError> {
        let clock = opts.clock.unwrap_or_default();
        let mut engine = Engine::new(state)?;
        let mut synth = Synth::new(engine.state().mixer.clone(), engine.tempo())?;
        let ip: IpAddr = engine
            .state()
            .sensors
            .bind_ip
            .parse()
            .map_err(|_| SessionError::InvalidState(format!("bad bind_ip {}", engine.state().sensors.bind_ip)))?;
        let mut receivers = Vec::new();
        for slot in &engine.state().sensors.slots {
            let r = SensorReceiver::spawn(SocketAddr::new(ip, slot.udp_port), Arc::new(Mailbox::new()), clock)?;
            receivers.push(r);
        }
        let sensor_addrs: Vec<SocketAddr> = receivers.iter().map(|r| r.local_addr).collect();
        let mailboxes: Vec<Arc<Mailbox>> = receivers.iter().map(|r| r.mailbox().clone()).collect();

        let stop = Arc::new(AtomicBool::new(false));
        let counters = Arc::new(Counters::default());
        let start_ms = clock.now_ms();
        let snapshot = Arc::new(Mutex::new(Arc::new(engine.snapshot(0.0))));
        let (cmd_tx, cmd_rx) = mpsc::channel::<EngineCmd>();
        let (mut job_tx, mut job_rx) = rtrb::RingBuffer::<RenderJob>::new(64);
        let mut threads = Vec::new();

        let mut row_tx = match &opts.log_path {
            Some(path) => {
                let mut writer = LogWriter::create(path)?;
                let (tx, mut rx) = rtrb::RingBuffer::<LogRow>::new(4096);
                let stop = stop.clone();
                let counters = counters.clone();
                threads.push(spawn("mbf-log", move || {
                    let mut since_flush = 0;
                    loop {
                        let done = stop.load(Ordering::Acquire);
                        while let Ok(row) = rx.pop() {
                            if let Err(e) = writer.write(&row) {
                                log::error!("log write failed: {e}");
                            }
                            counters.log_rows.fetch_add(1, Ordering::Relaxed);
                            since_flush += 1;
                        }
                        if since_flush >= 100 || done {
                            let _ = writer.flush();
                            since_flush = 0;
                        }
                        if done && rx.is_empty() {
                            break;
                        }
                        std::thread::sleep(Duration::from_millis(5));
                    }
                })?);
                Some(tx)
            }
            None => None,
        };

        let mut audio_tx = match &opts.render_out {
            Some(path) => {
                let mut sink = WavSink::create(path)?;
                let (tx, mut rx) = rtrb::RingBuffer::<AudioBlock>::new(512);
                let stop = stop.clone();
                threads.push(spawn("mbf-wav", move || {
                    loop {
                        let done = stop.load(Ordering::Acquire);
                        while let Ok(b) = rx.pop() {
                            if let Err(e) = sink.write_block(&b) {
                                log::error!("wav write failed: {e}");
                            }
                        }
                        if done && rx.is_empty() {
                            break;
                        }
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    if let Err(e) = sink.finalize() {
                        log::error!("wav finalize failed: {e}");
                    }
                })?);
                Some(tx)
            }
            None => None,
        };

        {
            let stop = stop.clone();
            let counters = counters.clone();
            let tap = opts.tap.clone();
            threads.push(spawn("mbf-render", move || loop {
                match job_rx.pop() {
                    Ok(job) => {
                        for c in job.commands {
                            match c {
                                RenderCommand::AllNotesOff => synth.all_notes_off(),
                                RenderCommand::Settings(s) => {
                                    if let Err(e) = synth.update_settings(&s) {
                                        log::warn!("mixer update rejected: {e}");
                                    }
                                }
                                RenderCommand::Variants(v) => synth.set_variants(v),
                            }
                        }
                        synth.set_tempo(job.tempo);
                        let block = synth.render_block(&job.events, &job.controls);
                        counters.blocks.fetch_add(1, Ordering::Relaxed);
                        if let Some(tap) = &tap {
                            tap.observe(&block, clock.now_ms());
                        }
                        if let Some(tx) = audio_tx.as_mut() {
                            if tx.push(block).is_err() {
                                counters.dropped_audio.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                        log::trace!("rendered block {:.0} ms", job.t);
                    }
                    Err(_) => {
                        if stop.load(Ordering::Acquire) {
                            break;
                        }
                        std::thread::sleep(Duration::from_micros(250));
                    }
                }
            })?);
        }

        {
            let stop = stop.clone();
            let counters = counters.clone();
            let snapshot = snapshot.clone();
            threads.push(spawn("mbf-engine", move || {
                let frames_per_tick = (SEQ_PERIOD_MS * 1e-3 * SAMPLE_RATE) as u32;
                let mut k: u64 = 0;
                let mut last_seq: Option<f64> = None;
                let mut scratch: Vec<MusicEvent> = Vec::with_capacity(64);
                let mut events: Vec<BlockEvent> = Vec::with_capacity(64);
                let mut inputs = vec![SlotInput::default(); mailboxes.len()];
                while !stop.load(Ordering::Acquire) {
                    let due = start_ms + k as f64 * SEQ_PERIOD_MS;
                    clock.sleep_until(due);
                    let now = clock.now_ms();
                    let late = now - due;
                    if late > SEQ_PERIOD_MS {
                        counters.late_ticks.fetch_add(1, Ordering::Relaxed);
                    }
                    counters
                        .max_lateness_us
                        .fetch_max((late.max(0.0) * 1000.0) as u64, Ordering::Relaxed);
                    while let Ok(cmd) = cmd_rx.try_recv() {
                        cmd(&mut engine);
                    }

                    let dt = last_seq.map_or(0.0, |p| now - p);
                    last_seq = Some(now);
                    scratch.clear();
                    engine.tick_sequencer(dt, &mut scratch);
                    counters.seq_ticks.fetch_add(1, Ordering::Relaxed);
                    let j = (k % TICKS_PER_BLOCK as u64) as u32;
                    let offset = (j * frames_per_tick).min(BLOCK_FRAMES as u32 - 1);
                    events.extend(scratch.iter().map(|&event| BlockEvent { offset, event }));

                    if j as usize == TICKS_PER_BLOCK - 1 {
                        let block_t = (k + 1) as f64 * SEQ_PERIOD_MS;
                        for (input, mb) in inputs.iter_mut().zip(&mailboxes) {
                            *input = SlotInput {
                                delivery: mb.take(),
                                last_rx: mb.last_rx(),
                            };
                        }
                        let mut out = engine.tick_mbf(start_ms + block_t - MBF_PERIOD_MS, &inputs);
                        out.row.t = block_t - MBF_PERIOD_MS;
                        counters.mbf_ticks.fetch_add(1, Ordering::Relaxed);
                        if out.row.frozen {
                            counters.frozen_ticks.fetch_add(1, Ordering::Relaxed);
                        }
                        let mut commands = Vec::new();
                        engine.take_render_commands(&mut commands);
                        let job = RenderJob {
                            t: out.row.t,
                            events: std::mem::replace(&mut events, Vec::with_capacity(64)),
                            controls: out.controls,
                            tempo: engine.tempo(),
                            commands,
                        };
                        if job_tx.push(job).is_err() {
                            counters.dropped_jobs.fetch_add(1, Ordering::Relaxed);
                        }
                        if let Some(tx) = row_tx.as_mut() {
                            if tx.push(out.row).is_err() {
                                counters.dropped_rows.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                        *snapshot.lock().unwrap() = Arc::new(engine.snapshot(block_t));
                    }
                    k += 1;
                }
            })?);
        }

        Ok(Runtime {
            clock,
            start_ms,
            stop,
            receivers,
            sensor_addrs,
            cmd_tx,
            snapshot,
            counters,
            threads,
        })
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    /// Clock reading at engine start.
    pub fn start_ms(&self) -> f64 {
        self.start_ms
    }

    /// Bound receive address of each sensor slot, in slot order.
    pub fn sensor_addrs(&self) -> &[SocketAddr] {
        &self.sensor_addrs
    }

    pub fn is_running(&self) -> bool {
        !self.stop.load(Ordering::Acquire)
    }

    /// Run `f` on the engine thread between ticks and return its result.
    pub fn with_engine<R, F>(&self, f: F) -> Result<R, SessionError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Engine) -> R + Send + 'static,
    {
        if !self.is_running() {
            return Err(SessionError::EngineStopped);
        }
        let (tx, rx) = mpsc::sync_channel(1);
        self.cmd_tx
            .send(Box::new(move |e: &mut Engine| {
                let _ = tx.send(f(e));
            }))
            .map_err(|_| SessionError::EngineStopped)?;
        rx.recv_timeout(Duration::from_secs(2))
            .map_err(|_| SessionError::EngineStopped)
    }

    /// Latest state published by the feedback tick.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.lock().unwrap().clone()
    }

    pub fn stats(&self) -> RuntimeStats {
        let c = &self.counters;
        let get = |a: &AtomicU64| a.load(Ordering::Relaxed);
        RuntimeStats {
            seq_ticks: get(&c.seq_ticks),
            mbf_ticks: get(&c.mbf_ticks),
            late_ticks: get(&c.late_ticks),
            max_lateness_ms: get(&c.max_lateness_us) as f64 / 1000.0,
            frozen_ticks: get(&c.frozen_ticks),
            blocks: get(&c.blocks),
            dropped_jobs: get(&c.dropped_jobs),
            dropped_rows: get(&c.dropped_rows),
            dropped_audio: get(&c.dropped_audio),
            log_rows: get(&c.log_rows),
            superseded: self.receivers.iter().map(|r| r.mailbox().superseded()).sum(),
            malformed: self.receivers.iter().map(|r| r.mailbox().malformed()).sum(),
        }
    }

    /// Stop all threads, flush the log and audio files and return final counters.
    pub fn stop(mut self) -> RuntimeStats {
        self.shutdown();
        self.stats()
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Release);
        for h in self.threads.drain(..) {
            let _ = h.join();
        }
        for r in &mut self.receivers {
            r.shutdown();
        }
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn spawn(name: &str, f: impl FnOnce() + Send + 'static) -> std::io::Result<JoinHandle<()>> {
    std::thread::Builder::new().name(name.into()).spawn(f)
}

#[derive(Debug, Clone, Copy)]
pub struct LoopDelayOptions {
    /// Seconds between step onsets.
    pub spacing_s: f64,
    pub angle_deg: f64,
    pub hold_s: f64,
    pub seed: u64,
}

impl Default for LoopDelayOptions {
    fn default() -> Self {
        Self {
            spacing_s: 1.2,
            angle_deg: 20.0,
            hold_s: 0.5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopDelayStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub trials: Vec<f64>,
    /// Steps with no audible response before the next one.
    pub missed: usize,
}

/// Time from the start of a simulated trunk lean (sent over UDP loopback) to
/// the first audible disturbance tone in the rendered output, over `n` trials.
pub fn measure_loop_delay(n: usize, opts: LoopDelayOptions) -> Result<LoopDelayStats, SessionError> {
    if n == 0 {
        return Err(SessionError::EmptyTrial);
    }
    let mut state = SessionState::default();
    state.mode = Mode::StaticBalance;
    state.modes.static_balance.strategy = Strategy::DisturbanceTone;
    state.music.autoplay = false;
    for s in &mut state.sensors.slots {
        s.udp_port = 0;
    }
    let clock = Clock::new();
    let tap = Arc::new(AudioTap::new(1e-3));
    let rt = Runtime::start(
        state,
        RuntimeOptions {
            tap: Some(tap.clone()),
            clock: Some(clock),
            ..Default::default()
        },
    )?;
    let lead_in_s = 1.0;
    let mut profile = MotionProfile::new(ProfileKind::StepChange, lead_in_s + n as f64 * opts.spacing_s);
    profile.seed = opts.seed;
    profile.step_change.angle_deg = opts.angle_deg;
    profile.step_change.axis = TiltAxis::Ml;
    profile.step_change.hold_s = opts.hold_s;
    profile.step_change.onsets_s = (0..n).map(|i| lead_in_s + i as f64 * opts.spacing_s).collect();
    let run = generate_profile(&profile)?;
    let stats = stream_run(
        &run,
        rt.sensor_addrs()[0],
        opts.seed,
        StreamOptions {
            start_ms: Some(clock.now_ms() + 20.0),
            ..Default::default()
        },
        &clock,
        None,
    )?;
    std::thread::sleep(Duration::from_millis(300));
    rt.stop();
    let onsets = tap.onsets();
    let mut trials = Vec::new();
    let mut missed = 0;
    for &t in &run.truth.onsets {
        let at = stats.start_ms + t;
        match onsets.iter().find(|&&o| o >= at && o < at + opts.spacing_s * 1000.0) {
            Some(o) => trials.push(o - at),
            None => missed += 1,
        }
    }
    if trials.is_empty() {
        return Err(SessionError::EmptyTrial);
    }
    let mean = trials.iter().sum::<f64>() / trials.len() as f64;
    let var = if trials.len() > 1 {
        trials.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials.len() - 1) as f64
    } else {
        0.0
    };
    Ok(LoopDelayStats {
        mean_ms: mean,
        std_ms: var.sqrt(),
        trials,
        missed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ephemeral() -> SessionState {
        let mut s = SessionState::default();
        for slot in &mut s.sensors.slots {
            slot.udp_port = 0;
        }
        s
    }

    #[test]
    fn zero_trials_is_an_error() {
        assert!(matches!(
            measure_loop_delay(0, LoopDelayOptions::default()),
            Err(SessionError::EmptyTrial)
        ));
    }

    #[test]
    fn commands_run_on_the_engine_thread() {
        let rt = Runtime::start(ephemeral(), RuntimeOptions::default()).unwrap();
        let tempo = rt
            .with_engine(|e| {
                let mut s = e.state().clone();
                s.tempo = 90.0;
                e.apply_state(s).map(|_| e.tempo())
            })
            .unwrap()
            .unwrap();
        assert_eq!(tempo, 90.0);
        std::thread::sleep(Duration::from_millis(100));
        assert_eq!(rt.snapshot().state.tempo, 90.0);
        let stats = rt.stop();
        assert!(stats.mbf_ticks >= 5 && stats.blocks >= 5);
    }

    #[test]
    fn tap_reports_onset_after_silence() {
        let tap = AudioTap::new(1e-3);
        let mut b = AudioBlock::SILENT;
        tap.observe(&b, 0.0);
        b.frames[48][1] = 0.5;
        tap.observe(&b, 10.0);
        tap.observe(&b, 20.0);
        assert_eq!(tap.onsets(), vec![11.0]);
    }
}
