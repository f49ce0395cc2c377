//! Tick-based playback of song and style note matrices.

mod format;
mod scale;

pub use format::{
    load_song_file, load_style_file, parse_song, parse_style, scan_style_dir, write_score, write_style,
};
pub use scale::{fold_to_register, parse_pitch_class, pitch_class_name, register, scale_degree_to_pitch, Scale};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PPQN: u32 = 960;
pub const STYLE_BARS: u32 = 4;
pub const BEATS_PER_BAR: u32 = 4;
pub const MAX_VOICES: usize = 4;
pub const TEMPO_MIN: f64 = 30.0;
pub const TEMPO_MAX: f64 = 240.0;
pub const SEQ_PERIOD_MS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SequencerError {
    #[error("line {line}, field {field}: {msg}")]
    Parse { line: usize, field: String, msg: String },
    #[error("line {line}: note_off is not after note_on")]
    UnbalancedNotes { line: usize },
    #[error("track {track} exceeds {MAX_VOICES} voices at tick {tick}")]
    TooManyVoices { track: Track, tick: u64 },
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Track {
    Kick,
    Snare,
    Hat,
    Perc,
    Bass,
    Chord,
    Melody,
    Pad,
}

impl Track {
    pub const COUNT: usize = 8;
    pub const ALL: [Track; 8] = [
        Track::Kick,
        Track::Snare,
        Track::Hat,
        Track::Perc,
        Track::Bass,
        Track::Chord,
        Track::Melody,
        Track::Pad,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Track> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Track::Kick => "kick",
            Track::Snare => "snare",
            Track::Hat => "hat",
            Track::Perc => "perc",
            Track::Bass => "bass",
            Track::Chord => "chord",
            Track::Melody => "melody",
            Track::Pad => "pad",
        }
    }

    pub fn is_percussive(self) -> bool {
        self.index() < 4
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Track {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let s = s.trim();
        if let Ok(i) = s.parse::<usize>() {
            return Track::from_index(i).ok_or(());
        }
        match s {
            "percussion" => Ok(Track::Perc),
            _ => Track::ALL.into_iter().find(|t| t.name() == s).ok_or(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Note {
    pub track: Track,
    pub tick_on: u64,
    pub tick_off: u64,
    pub pitch: u8,
    pub velocity: u8,
    pub voice: u8,
}

impl Note {
    fn sort_key(&self) -> (u64, Track, u8, u8, u64) {
        (self.tick_on, self.track, self.voice, self.pitch, self.tick_off)
    }
}

fn ticks_per_bar(ppqn: u32) -> u64 {
    u64::from(ppqn) * u64::from(BEATS_PER_BAR)
}

/// Song-specific pitched material.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SongScore {
    pub name: String,
    /// Pitch class 0..11.
    pub key: u8,
    pub bars: u32,
    pub ppqn: u32,
    pub tracks: Vec<Track>,
    pub notes: Vec<Note>,
}

impl SongScore {
    pub fn end_tick(&self) -> u64 {
        u64::from(self.bars) * ticks_per_bar(self.ppqn)
    }
}

/// Four-bar rhythm and instrument pattern that loops under a song.
#[derive(Debug, Clone, PartialEq)]
pub struct StylePattern {
    pub name: String,
    pub ppqn: u32,
    pub tempo: Option<f64>,
    pub variants: [u8; 8],
    pub notes: Vec<Note>,
}

impl StylePattern {
    pub fn end_tick(&self) -> u64 {
        u64::from(STYLE_BARS) * ticks_per_bar(self.ppqn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NoteOff,
    NoteOn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MusicEvent {
    pub kind: EventKind,
    pub track: Track,
    pub pitch: u8,
    pub velocity: u8,
    pub voice: u8,
    pub t_tick: u64,
}

impl MusicEvent {
    fn sort_key(&self) -> (u64, EventKind, Track, u8, u8) {
        (self.t_tick, self.kind, self.track, self.voice, self.pitch)
    }
}

fn note_events(n: &Note, out: &mut Vec<MusicEvent>) {
    let ev = |kind, t_tick| MusicEvent {
        kind,
        track: n.track,
        pitch: n.pitch,
        velocity: n.velocity,
        voice: n.voice,
        t_tick,
    };
    out.push(ev(EventKind::NoteOn, n.tick_on));
    out.push(ev(EventKind::NoteOff, n.tick_off));
}

fn sorted_events(notes: &[Note]) -> Vec<MusicEvent> {
    let mut ev = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        note_events(n, &mut ev);
    }
    ev.sort_by_key(MusicEvent::sort_key);
    ev
}

/// Active notes per track never exceed [`MAX_VOICES`].
pub(crate) fn check_polyphony(notes: &[Note]) -> Result<(), SequencerError> {
    let mut active = [0usize; Track::COUNT];
    for e in sorted_events(notes) {
        let a = &mut active[e.track.index()];
        match e.kind {
            EventKind::NoteOn => {
                *a += 1;
                if *a > MAX_VOICES {
                    return Err(SequencerError::TooManyVoices {
                        track: e.track,
                        tick: e.t_tick,
                    });
                }
            }
            EventKind::NoteOff => *a -= 1,
        }
    }
    Ok(())
}

/// Song and looped style merged into one time-ordered event list.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub events: Vec<MusicEvent>,
    pub end_tick: u64,
    pub ppqn: u32,
    pub key: u8,
    pub variants: [u8; 8],
    pub style_tempo: Option<f64>,
}

impl Schedule {
    /// The style repeats every four bars until the song ends; pitched notes
    /// are folded into their track registers.
    pub fn build(song: &SongScore, style: &StylePattern) -> Result<Self, SequencerError> {
        let end = song.end_tick();
        let mut notes: Vec<Note> = song
            .notes
            .iter()
            .map(|n| Note {
                pitch: fold_to_register(n.track, n.pitch),
                ..*n
            })
            .collect();
        let scale = |t: u64| t * u64::from(song.ppqn) / u64::from(style.ppqn);
        let period = scale(style.end_tick());
        let mut offset = 0;
        while offset < end {
            for n in &style.notes {
                let on = offset + scale(n.tick_on);
                if on >= end {
                    continue;
                }
                let off = (offset + scale(n.tick_off)).min(end).max(on + 1);
                notes.push(Note {
                    tick_on: on,
                    tick_off: off,
                    pitch: fold_to_register(n.track, n.pitch),
                    ..*n
                });
            }
            offset += period;
        }
        check_polyphony(&notes)?;
        Ok(Self {
            events: sorted_events(&notes),
            end_tick: end,
            ppqn: song.ppqn,
            key: song.key,
            variants: style.variants,
            style_tempo: style.tempo,
        })
    }

    pub fn note_on_count(&self, track: Track) -> usize {
        self.events
            .iter()
            .filter(|e| e.track == track && e.kind == EventKind::NoteOn)
            .count()
    }

    /// Playback length at a fixed tempo.
    pub fn duration_ms(&self, tempo: f64) -> f64 {
        self.end_tick as f64 * 60_000.0 / (f64::from(self.ppqn) * tempo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequencerClock {
    pub elapsed_ticks: f64,
    pub tempo: f64,
    pub ppqn: u32,
    pub playing: bool,
}

impl SequencerClock {
    pub fn new(tempo: f64, ppqn: u32) -> Self {
        Self {
            elapsed_ticks: 0.0,
            tempo: tempo.clamp(TEMPO_MIN, TEMPO_MAX),
            ppqn,
            playing: false,
        }
    }

    pub fn beat_interval_ms(&self) -> f64 {
        60_000.0 / self.tempo
    }
}

/// Advance by `dt_ms` at the current tempo; a stopped clock does not move.
pub fn advance_clock(clock: &mut SequencerClock, dt_ms: f64) -> f64 {
    if clock.playing && dt_ms > 0.0 {
        clock.elapsed_ticks += dt_ms * f64::from(clock.ppqn) * clock.tempo / 60_000.0;
    }
    clock.elapsed_ticks
}

pub fn beat_phase(clock: &SequencerClock) -> f64 {
    clock.elapsed_ticks / f64::from(clock.ppqn)
}

/// Append every event at or before `position` not yet emitted, advancing `cursor`.
pub fn collect_due_events(schedule: &Schedule, cursor: &mut usize, position: f64, out: &mut Vec<MusicEvent>) -> usize {
    let start = *cursor;
    while let Some(e) = schedule.events.get(*cursor) {
        if e.t_tick as f64 > position {
            break;
        }
        out.push(*e);
        *cursor += 1;
    }
    *cursor - start
}

/// Clock plus playback cursor over a [`Schedule`].
#[derive(Debug, Clone)]
pub struct Sequencer {
    schedule: Arc<Schedule>,
    clock: SequencerClock,
    cursor: usize,
    loop_origin: f64,
    repeat: bool,
    finished: bool,
}

impl Sequencer {
    pub fn new(schedule: Arc<Schedule>, tempo: f64) -> Self {
        let ppqn = schedule.ppqn;
        Self {
            schedule,
            clock: SequencerClock::new(tempo, ppqn),
            cursor: 0,
            loop_origin: 0.0,
            repeat: false,
            finished: false,
        }
    }

    pub fn schedule(&self) -> &Arc<Schedule> {
        &self.schedule
    }

    pub fn clock(&self) -> &SequencerClock {
        &self.clock
    }

    pub fn set_repeat(&mut self, repeat: bool) {
        self.repeat = repeat;
    }

    pub fn play(&mut self) {
        if !self.finished {
            self.clock.playing = true;
        }
    }

    pub fn pause(&mut self) {
        self.clock.playing = false;
    }

    pub fn is_playing(&self) -> bool {
        self.clock.playing
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Back to the start of the song; the caller silences sounding voices.
    pub fn rewind(&mut self) {
        self.clock.elapsed_ticks = 0.0;
        self.cursor = 0;
        self.loop_origin = 0.0;
        self.finished = false;
    }

    /// Returns the applied (clamped) tempo.
    pub fn set_tempo(&mut self, bpm: f64) -> f64 {
        self.clock.tempo = bpm.clamp(TEMPO_MIN, TEMPO_MAX);
        self.clock.tempo
    }

    /// Swap the schedule (style or song change), keeping the song position.
    pub fn set_schedule(&mut self, schedule: Arc<Schedule>) {
        let pos = self.position_ticks();
        self.cursor = schedule.events.partition_point(|e| (e.t_tick as f64) <= pos);
        self.clock.ppqn = schedule.ppqn;
        self.schedule = schedule;
    }

    /// Ticks since the start of the current pass through the song.
    pub fn position_ticks(&self) -> f64 {
        self.clock.elapsed_ticks - self.loop_origin
    }

    pub fn beat_phase(&self) -> f64 {
        beat_phase(&self.clock)
    }

    pub fn progress(&self) -> f64 {
        (self.position_ticks() / self.schedule.end_tick.max(1) as f64).clamp(0.0, 1.0)
    }

    /// Advance by `dt_ms` and append the events that became due.
    pub fn tick(&mut self, dt_ms: f64, out: &mut Vec<MusicEvent>) -> usize {
        if !self.clock.playing {
            return 0;
        }
        advance_clock(&mut self.clock, dt_ms);
        let pos = self.position_ticks();
        let mut n = collect_due_events(&self.schedule, &mut self.cursor, pos, out);
        let end = self.schedule.end_tick as f64;
        while self.cursor == self.schedule.events.len() && self.position_ticks() >= end {
            if !self.repeat {
                self.finished = true;
                self.clock.playing = false;
                break;
            }
            self.loop_origin += end;
            self.cursor = 0;
            let pos = self.position_ticks();
            n += collect_due_events(&self.schedule, &mut self.cursor, pos, out);
        }
        n
    }
}

const DEMO_SONG: &str = include_str!("../../assets/songs/demo.song");
const ETUDE_SONG: &str = include_str!("../../assets/songs/etude.song");
const BUILTIN_STYLES: [&str; 2] = [
    include_str!("../../assets/styles/slow_rock.style"),
    include_str!("../../assets/styles/pop.style"),
];

/// Bundled eight-bar demo song.
pub fn demo_song() -> SongScore {
    parse_song(DEMO_SONG).expect("bundled demo song parses")
}

/// Bundled four-bar song.
pub fn etude_song() -> SongScore {
    parse_song(ETUDE_SONG).expect("bundled etude song parses")
}

pub fn builtin_song(name: &str) -> Option<SongScore> {
    match name {
        "demo" => Some(demo_song()),
        "etude" => Some(etude_song()),
        _ => None,
    }
}

pub fn builtin_styles() -> Vec<StylePattern> {
    BUILTIN_STYLES
        .iter()
        .map(|s| parse_style(s).expect("bundled style parses"))
        .collect()
}

pub fn builtin_style(name: &str) -> Option<StylePattern> {
    builtin_styles().into_iter().find(|s| s.name == name)
}
