use serde::{Deserialize, Serialize};

use super::Track;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Major,
    MinorNat,
    Pentatonic,
}

impl Scale {
    pub fn intervals(self) -> &'static [u8] {
        match self {
            Scale::Major => &[0, 2, 4, 5, 7, 9, 11],
            Scale::MinorNat => &[0, 2, 3, 5, 7, 8, 10],
            Scale::Pentatonic => &[0, 2, 4, 7, 9],
        }
    }
}

const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

pub fn pitch_class_name(pc: u8) -> &'static str {
    NAMES[usize::from(pc % 12)]
}

/// Parse `C`, `F#`, `Bb` and so on into a pitch class 0..11.
pub fn parse_pitch_class(s: &str) -> Option<u8> {
    let mut chars = s.trim().chars();
    let base: i32 = match chars.next()?.to_ascii_uppercase() {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let shift = match chars.as_str() {
        "" => 0,
        "#" => 1,
        "b" => -1,
        _ => return None,
    };
    Some((base + shift).rem_euclid(12) as u8)
}

/// MIDI pitch of `degree` in `scale` rooted on `key`, octave 4 being middle C.
pub fn scale_degree_to_pitch(degree: u32, key: u8, scale: Scale, root_octave: i32) -> u8 {
    let iv = scale.intervals();
    let n = iv.len() as u32;
    let octave = root_octave + (degree / n) as i32;
    let pitch = 12 * (octave + 1) + i32::from(key % 12) + i32::from(iv[(degree % n) as usize]);
    pitch.clamp(0, 127) as u8
}

/// Inclusive MIDI range a pitched track is folded into.
pub fn register(track: Track) -> Option<(u8, u8)> {
    match track {
        Track::Bass => Some((24, 48)),
        Track::Chord | Track::Pad => Some((48, 72)),
        Track::Melody => Some((60, 84)),
        _ => None,
    }
}

/// Move `pitch` by octaves until it lies in the track's register.
pub fn fold_to_register(track: Track, pitch: u8) -> u8 {
    let Some((lo, hi)) = register(track) else {
        return pitch;
    };
    let mut p = i32::from(pitch);
    while p < i32::from(lo) {
        p += 12;
    }
    while p > i32::from(hi) {
        p -= 12;
    }
    p as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_major_degrees() {
        assert_eq!(scale_degree_to_pitch(0, 0, Scale::Major, 4), 60);
        assert_eq!(scale_degree_to_pitch(2, 0, Scale::Major, 4), 64);
        assert_eq!(scale_degree_to_pitch(7, 0, Scale::Major, 4), 72);
        assert_eq!(scale_degree_to_pitch(5, 9, Scale::MinorNat, 3), 57 + 8);
        assert_eq!(scale_degree_to_pitch(5, 0, Scale::Pentatonic, 4), 72);
    }

    #[test]
    fn pitch_class_names() {
        assert_eq!(parse_pitch_class("C"), Some(0));
        assert_eq!(parse_pitch_class("Bb"), Some(10));
        assert_eq!(parse_pitch_class("Cb"), Some(11));
        assert_eq!(parse_pitch_class("H"), None);
        for pc in 0..12 {
            assert_eq!(parse_pitch_class(pitch_class_name(pc)), Some(pc));
        }
    }

    #[test]
    fn folding() {
        assert_eq!(fold_to_register(Track::Bass, 60), 48);
        assert_eq!(fold_to_register(Track::Bass, 61), 37);
        assert_eq!(fold_to_register(Track::Melody, 40), 64);
        assert_eq!(fold_to_register(Track::Kick, 5), 5);
        for p in 0..128u8 {
            for t in [Track::Bass, Track::Chord, Track::Melody, Track::Pad] {
                let (lo, hi) = register(t).unwrap();
                let f = fold_to_register(t, p);
                assert!(f >= lo && f <= hi && f % 12 == p % 12);
            }
        }
    }
}
