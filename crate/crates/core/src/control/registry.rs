use serde::Serialize;
use serde_json::Value;

use crate::sequencer::{TEMPO_MAX, TEMPO_MIN};
use crate::session::{Mode, SessionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Bool,
    Int,
    Float,
    String,
    /// Currently unset; accepts a number or null.
    Optional,
}

impl ParamKind {
    fn of(v: &Value) -> ParamKind {
        match v {
            Value::Bool(_) => ParamKind::Bool,
            Value::Number(n) if n.is_f64() => ParamKind::Float,
            Value::Number(_) => ParamKind::Int,
            Value::String(_) => ParamKind::String,
            _ => ParamKind::Optional,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Bool => "bool",
            ParamKind::Int => "int",
            ParamKind::Float => "float",
            ParamKind::String => "string",
            ParamKind::Optional => "optional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamInfo {
    pub path: String,
    pub kind: ParamKind,
    pub bounds: Option<(f64, f64)>,
    pub read_only: bool,
}

/// Clamp ranges; `*` matches any one segment.
const BOUNDS: &[(&str, f64, f64)] = &[
    ("tempo", TEMPO_MIN, TEMPO_MAX),
    ("modes.*.mapping.gamma", 0.05, 10.0),
    ("modes.*.mapping.quant_levels", 0.0, 64.0),
    ("modes.*.params.threshold", 0.0, 1.0),
    ("modes.*.params.siren_level", 0.0, 1.0),
    ("modes.*.params.root_octave", 1.0, 8.0),
    ("modes.*.params.key", 0.0, 11.0),
    ("modes.*.params.tone_hz", 20.0, 20000.0),
    ("trajectory.tempo_divisor", 1.0, 64.0),
    ("dynamic.lead_beats", 0.0, 4.0),
    ("reach.n_degrees", 2.0, 64.0),
    ("filters.complementary_alpha", 0.0, 1.0),
    ("filters.*.median_len", 1.0, 31.0),
    ("filters.step.threshold_g", 1.0, 16.0),
    ("filters.step.refractory_ms", 0.0, 2000.0),
    ("control.snapshot_hz", 1.0, 60.0),
    ("sensors.offline_timeout_ms", 50.0, 10000.0),
    ("mixer.strips.*.gain_db", -60.0, 12.0),
    ("mixer.strips.*.pan", -1.0, 1.0),
    ("mixer.strips.*.echo_send", 0.0, 1.0),
    ("mixer.strips.*.eq.*.gain_db", -24.0, 24.0),
    ("mixer.master_gain_db", -60.0, 12.0),
];

const READ_ONLY: &[&str] = &["schema", "progress", "rep_count", "sensors.slots.*.slot_id"];

fn matches(pattern: &str, path: &str) -> bool {
    let mut p = pattern.split('.');
    let mut q = path.split('.');
    loop {
        match (p.next(), q.next()) {
            (None, None) => return true,
            (Some(a), Some(b)) if a == "*" || a == b => {}
            _ => return false,
        }
    }
}

pub fn bounds_for(path: &str) -> Option<(f64, f64)> {
    BOUNDS
        .iter()
        .find(|(p, _, _)| matches(p, path))
        .map(|&(_, lo, hi)| (lo, hi))
}

pub fn is_read_only(path: &str) -> bool {
    READ_ONLY.iter().any(|p| matches(p, path))
}

/// Every settable leaf of the serialized state.
pub fn registry(state: &SessionState) -> Vec<ParamInfo> {
    let mut out = Vec::new();
    let value = serde_json::to_value(state).expect("state serializes");
    flatten(&value, String::new(), &mut out);
    out
}

fn flatten(v: &Value, prefix: String, out: &mut Vec<ParamInfo>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                flatten(child, join(k), out);
            }
        }
        Value::Array(a) => {
            for (i, child) in a.iter().enumerate() {
                flatten(child, join(&i.to_string()), out);
            }
        }
        leaf => out.push(ParamInfo {
            kind: ParamKind::of(leaf),
            bounds: bounds_for(&prefix),
            read_only: is_read_only(&prefix),
            path: prefix,
        }),
    }
}

/// Expand shorthand: `mapping.*`, `strategy` and `params.*` refer to the
/// active mode, and `ml`/`ap` select the two halves of a pair.
pub fn canonical_path(path: &str, mode: Mode) -> String {
    let first = path.split('.').next().unwrap_or("");
    let path = if matches!(first, "mapping" | "params" | "strategy") {
        format!("modes.{}.{path}", mode.name())
    } else {
        path.to_string()
    };
    path.split('.')
        .map(|s| match s {
            "ml" => "0",
            "ap" => "1",
            s => s,
        })
        .collect::<Vec<_>>()
        .join(".")
}

pub(crate) fn lookup<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    if path.is_empty() {
        return Some(root);
    }
    path.split('.').try_fold(root, |v, seg| match v {
        Value::Object(m) => m.get(seg),
        Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

pub(crate) fn lookup_mut<'a>(root: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    path.split('.').try_fold(root, |v, seg| match v {
        Value::Object(m) => m.get_mut(seg),
        Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
        _ => None,
    })
}

pub(crate) fn is_leaf(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}
