//! Plain-text song and style files.
//!
//! ```text
//! # comment
//! name=demo
//! key=C
//! bars=8
//! ppqn=960
//! tracks=bass,chord,melody,pad
//! bass,0,1800,36,100,0
//! ```
//!
//! Note lines are `track,tick_on,tick_off,pitch,velocity,voice`. Style files
//! use the same note lines plus `role=<track>:variant=<id>` and an optional
//! `tempo=<bpm>` hint; their `bars` must be 4.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::scale::{parse_pitch_class, pitch_class_name};
use super::{check_polyphony, Note, SequencerError, SongScore, StylePattern, Track, STYLE_BARS};

#[derive(Default)]
struct Raw {
    header: Vec<(usize, String, String)>,
    notes: Vec<Note>,
}

fn parse_err(line: usize, field: &str, msg: impl Into<String>) -> SequencerError {
    SequencerError::Parse {
        line,
        field: field.to_string(),
        msg: msg.into(),
    }
}

fn num<T: FromStr>(line: usize, field: &str, s: &str) -> Result<T, SequencerError> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, field, format!("cannot parse {:?}", s.trim())))
}

fn parse_note(line: usize, text: &str) -> Result<Note, SequencerError> {
    let f: Vec<&str> = text.split(',').map(str::trim).collect();
    if f.len() != 6 {
        return Err(parse_err(line, "note", format!("expected 6 fields, got {}", f.len())));
    }
    let track: Track = f[0]
        .parse()
        .map_err(|_| parse_err(line, "track", format!("unknown track {:?}", f[0])))?;
    let note = Note {
        track,
        tick_on: num(line, "tick_on", f[1])?,
        tick_off: num(line, "tick_off", f[2])?,
        pitch: num(line, "pitch", f[3])?,
        velocity: num(line, "velocity", f[4])?,
        voice: num(line, "voice", f[5])?,
    };
    if note.tick_off <= note.tick_on {
        return Err(SequencerError::UnbalancedNotes { line });
    }
    if note.pitch > 127 {
        return Err(parse_err(line, "pitch", "must be 0..127"));
    }
    if !(1..=127).contains(&note.velocity) {
        return Err(parse_err(line, "velocity", "must be 1..127"));
    }
    if note.voice > 3 {
        return Err(parse_err(line, "voice", "must be 0..3"));
    }
    Ok(note)
}

fn split_lines(text: &str) -> Result<Raw, SequencerError> {
    let mut raw = Raw::default();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => raw.header.push((n, k.trim().to_string(), v.trim().to_string())),
            None => raw.notes.push(parse_note(n, line)?),
        }
    }
    Ok(raw)
}

fn check_extent(notes: &[Note], end: u64) -> Result<(), SequencerError> {
    if let Some(n) = notes.iter().find(|n| n.tick_off > end) {
        return Err(parse_err(0, "tick_off", format!("note ends at {} past pattern end {end}", n.tick_off)));
    }
    Ok(())
}

pub fn parse_song(text: &str) -> Result<SongScore, SequencerError> {
    let raw = split_lines(text)?;
    let mut song = SongScore {
        name: String::new(),
        key: 0,
        bars: 0,
        ppqn: 0,
        tracks: Vec::new(),
        notes: raw.notes,
    };
    for (line, k, v) in &raw.header {
        match k.as_str() {
            "name" => song.name = v.clone(),
            "key" => song.key = parse_pitch_class(v).ok_or_else(|| parse_err(*line, "key", "bad pitch class"))?,
            "bars" => song.bars = num(*line, "bars", v)?,
            "ppqn" => song.ppqn = num(*line, "ppqn", v)?,
            "tracks" => {
                song.tracks = v
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| parse_err(*line, "tracks", format!("unknown track {t:?}"))))
                    .collect::<Result<_, _>>()?
            }
            other => log::warn!("song line {line}: ignoring header {other:?}"),
        }
    }
    if song.bars == 0 {
        return Err(parse_err(0, "bars", "missing or zero"));
    }
    if song.ppqn == 0 {
        return Err(parse_err(0, "ppqn", "missing or zero"));
    }
    if let Some(n) = song.notes.iter().find(|n| !song.tracks.contains(&n.track)) {
        return Err(parse_err(0, "track", format!("{} not declared in tracks header", n.track)));
    }
    check_extent(&song.notes, song.end_tick())?;
    check_polyphony(&song.notes)?;
    song.notes.sort_by_key(Note::sort_key);
    Ok(song)
}

pub fn parse_style(text: &str) -> Result<StylePattern, SequencerError> {
    let raw = split_lines(text)?;
    let mut style = StylePattern {
        name: String::new(),
        ppqn: 0,
        tempo: None,
        variants: [0; 8],
        notes: raw.notes,
    };
    let mut bars = None;
    for (line, k, v) in &raw.header {
        match k.as_str() {
            "name" => style.name = v.clone(),
            "ppqn" => style.ppqn = num(*line, "ppqn", v)?,
            "bars" => bars = Some(num::<u32>(*line, "bars", v)?),
            "tempo" => style.tempo = Some(num(*line, "tempo", v)?),
            "role" => {
                let (track, variant) = v
                    .split_once(":variant=")
                    .ok_or_else(|| parse_err(*line, "role", "expected <track>:variant=<id>"))?;
                let track: Track = track
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(*line, "role", format!("unknown track {track:?}")))?;
                style.variants[track.index()] = num(*line, "variant", variant)?;
            }
            other => log::warn!("style line {line}: ignoring header {other:?}"),
        }
    }
    if bars != Some(STYLE_BARS) {
        return Err(SequencerError::InvalidPattern(format!(
            "style must span exactly {STYLE_BARS} bars, found {bars:?}"
        )));
    }
    if style.ppqn == 0 {
        return Err(parse_err(0, "ppqn", "missing or zero"));
    }
    check_extent(&style.notes, style.end_tick())?;
    check_polyphony(&style.notes)?;
    style.notes.sort_by_key(Note::sort_key);
    Ok(style)
}

fn write_notes(out: &mut String, notes: &[Note]) {
    for n in notes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            n.track, n.tick_on, n.tick_off, n.pitch, n.velocity, n.voice
        );
    }
}

pub fn write_score(song: &SongScore) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name={}", song.name);
    let _ = writeln!(out, "key={}", pitch_class_name(song.key));
    let _ = writeln!(out, "bars={}", song.bars);
    let _ = writeln!(out, "ppqn={}", song.ppqn);
    let tracks: Vec<String> = song.tracks.iter().map(Track::to_string).collect();
    let _ = writeln!(out, "tracks={}", tracks.join(","));
    write_notes(&mut out, &song.notes);
    out
}

pub fn write_style(style: &StylePattern) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name={}", style.name);
    let _ = writeln!(out, "bars={STYLE_BARS}");
    let _ = writeln!(out, "ppqn={}", style.ppqn);
    if let Some(t) = style.tempo {
        let _ = writeln!(out, "tempo={t}");
    }
    for t in Track::ALL {
        let _ = writeln!(out, "role={t}:variant={}", style.variants[t.index()]);
    }
    write_notes(&mut out, &style.notes);
    out
}

pub fn load_song_file(path: impl AsRef<Path>) -> Result<SongScore, SequencerError> {
    parse_song(&std::fs::read_to_string(path)?)
}

pub fn load_style_file(path: impl AsRef<Path>) -> Result<StylePattern, SequencerError> {
    parse_style(&std::fs::read_to_string(path)?)
}

/// Load every `*.style` file in `dir`, sorted by name. Unreadable files are
/// skipped with a warning.
pub fn scan_style_dir(dir: impl AsRef<Path>) -> Result<Vec<StylePattern>, SequencerError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "style"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        match load_style_file(&p) {
            Ok(s) => out.push(s),
            Err(e) => log::warn!("skipping style {}: {e}", p.display()),
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}
