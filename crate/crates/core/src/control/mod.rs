//! Operator control protocol: one JSON object per message, parameters
//! addressed by dotted path into the serialized session state.

mod registry;

pub use registry::{bounds_for, canonical_path, is_read_only, registry, ParamInfo, ParamKind};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::session::{Engine, Mode, SessionState, Snapshot, Transport};
use registry::{is_leaf, lookup, lookup_mut};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    SetParam,
    GetParam,
    SetMode,
    Transport,
    Standby,
    SnapshotRequest,
    Calibrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    #[serde(default = "protocol_version")]
    pub v: u32,
    pub kind: MessageKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<Value>,
}

fn protocol_version() -> u32 {
    PROTOCOL_VERSION
}

impl ControlMessage {
    pub fn new(kind: MessageKind) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            kind,
            path: None,
            value: None,
            request_id: None,
        }
    }

    pub fn set(path: &str, value: Value) -> Self {
        Self {
            path: Some(path.into()),
            value: Some(value),
            ..Self::new(MessageKind::SetParam)
        }
    }

    pub fn get(path: &str) -> Self {
        Self {
            path: Some(path.into()),
            ..Self::new(MessageKind::GetParam)
        }
    }

    pub fn with_value(mut self, value: Value) -> Self {
        self.value = Some(value);
        self
    }

    pub fn with_id(mut self, id: impl Into<Value>) -> Self {
        self.request_id = Some(id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("unknown parameter path `{0}`")]
    UnknownPath(String),
    #[error("`{path}` expects {expected}, got {found}")]
    TypeMismatch {
        path: String,
        expected: String,
        found: String,
    },
    #[error("`{0}` is read-only")]
    ReadOnly(String),
    #[error("rejected: {0}")]
    InvalidValue(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("engine stopped")]
    EngineStopped,
}

impl ControlError {
    pub fn code(&self) -> &'static str {
        match self {
            ControlError::UnknownPath(_) => "unknown_path",
            ControlError::TypeMismatch { .. } => "type_mismatch",
            ControlError::ReadOnly(_) => "read_only",
            ControlError::InvalidValue(_) => "invalid_value",
            ControlError::Malformed(_) => "malformed",
            ControlError::Version(_) => "version",
            ControlError::EngineStopped => "engine_stopped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub v: u32,
    /// Always `"reply"`; pushed snapshots use `"snapshot"`.
    pub kind: String,
    pub request_id: Option<Value>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<Box<Snapshot>>,
}

impl Reply {
    fn ok(request_id: Option<Value>) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            kind: "reply".into(),
            request_id,
            ok: true,
            path: None,
            value: None,
            warning: None,
            error: None,
            snapshot: None,
        }
    }

    pub fn error(request_id: Option<Value>, e: &ControlError) -> Self {
        Self {
            ok: false,
            error: Some(ErrorBody {
                code: e.code().into(),
                message: e.to_string(),
            }),
            ..Self::ok(request_id)
        }
    }

    pub fn is_error(&self, e: &str) -> bool {
        self.error.as_ref().is_some_and(|b| b.code == e)
    }
}

/// A pushed state snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMessage {
    pub v: u32,
    pub kind: String,
    pub snapshot: Snapshot,
}

impl SnapshotMessage {
    pub fn new(snapshot: Snapshot) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            kind: "snapshot".into(),
            snapshot,
        }
    }
}

/// Parse one message off the wire. Runs on the IO side.
pub fn parse_message(text: &str) -> Result<ControlMessage, ControlError> {
    let msg: ControlMessage = serde_json::from_str(text).map_err(|e| ControlError::Malformed(e.to_string()))?;
    if msg.v != PROTOCOL_VERSION {
        return Err(ControlError::Version(msg.v));
    }
    Ok(msg)
}

/// Best-effort request id of a message that failed to parse.
pub fn request_id_of(text: &str) -> Option<Value> {
    serde_json::from_str::<Value>(text).ok()?.get("request_id").cloned()
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn mismatch(path: &str, expected: &str, found: &Value) -> ControlError {
    ControlError::TypeMismatch {
        path: path.into(),
        expected: expected.into(),
        found: type_name(found).into(),
    }
}

fn state_value(state: &SessionState) -> Value {
    serde_json::to_value(state).expect("state serializes")
}

/// Coerce `value` to the type of `current` and clamp it to the path's
/// bounds. Returns the value to store and an optional clamp warning.
fn coerce(path: &str, current: &Value, value: &Value) -> Result<(Value, Option<String>), ControlError> {
    let clamp = |x: f64| -> (f64, Option<String>) {
        match bounds_for(path) {
            Some((lo, hi)) if !(lo..=hi).contains(&x) => {
                let c = x.clamp(lo, hi);
                (c, Some(format!("{path}={x} out of range {lo}..{hi}; clamped to {c}")))
            }
            _ => (x, None),
        }
    };
    match (current, value) {
        (Value::Bool(_), Value::Bool(_)) | (Value::String(_), Value::String(_)) => Ok((value.clone(), None)),
        (Value::Number(n), Value::Number(x)) => {
            let x = x.as_f64().unwrap_or(f64::NAN);
            if !x.is_finite() {
                return Err(mismatch(path, "finite number", value));
            }
            let (c, warn) = clamp(x);
            if n.is_f64() {
                Ok((json!(c), warn))
            } else if c.fract() != 0.0 {
                Err(ControlError::TypeMismatch {
                    path: path.into(),
                    expected: "integer".into(),
                    found: x.to_string(),
                })
            } else if c < 0.0 {
                Ok((json!(c as i64), warn))
            } else {
                Ok((json!(c as u64), warn))
            }
        }
        (Value::Null, Value::Number(x)) => {
            let (c, warn) = clamp(x.as_f64().unwrap_or(f64::NAN));
            Ok((json!(c), warn))
        }
        (Value::Null, _) | (_, Value::Null) => Ok((value.clone(), None)),
        _ => Err(mismatch(path, type_name(current), value)),
    }
}

fn apply(engine: &mut Engine, path: &str, state: Value) -> Result<(), ControlError> {
    let new: SessionState = serde_json::from_value(state).map_err(|e| match e.classify() {
        serde_json::error::Category::Data if e.to_string().starts_with("invalid type") => ControlError::TypeMismatch {
            path: path.into(),
            expected: "a non-null value".into(),
            found: "null".into(),
        },
        _ => ControlError::InvalidValue(e.to_string()),
    })?;
    engine
        .apply_state(new)
        .map_err(|e| ControlError::InvalidValue(e.to_string()))
}

fn set_param(engine: &mut Engine, msg: &ControlMessage, reply: &mut Reply) -> Result<(), ControlError> {
    let raw = msg.path.as_deref().ok_or(ControlError::Malformed("set_param needs a path".into()))?;
    let value = msg
        .value
        .as_ref()
        .ok_or(ControlError::Malformed("set_param needs a value".into()))?;
    let path = canonical_path(raw, engine.state().mode);
    let mut state = state_value(engine.state());
    let current = lookup(&state, &path)
        .filter(|v| is_leaf(v))
        .ok_or_else(|| ControlError::UnknownPath(raw.into()))?
        .clone();
    if is_read_only(&path) {
        return Err(ControlError::ReadOnly(raw.into()));
    }
    let (stored, warning) = coerce(&path, &current, value)?;
    *lookup_mut(&mut state, &path).expect("path exists") = stored;
    apply(engine, &path, state)?;
    let echoed = lookup(&state_value(engine.state()), &path).cloned();
    log::info!(
        "request {}: set {path} = {}",
        id_text(&msg.request_id),
        echoed.as_ref().map_or("?".into(), Value::to_string)
    );
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    reply.path = Some(path);
    reply.value = echoed;
    reply.warning = warning;
    Ok(())
}

fn id_text(id: &Option<Value>) -> String {
    id.as_ref().map_or("-".into(), Value::to_string)
}

fn string_value<'a>(msg: &'a ControlMessage, what: &str) -> Result<&'a str, ControlError> {
    match &msg.value {
        Some(Value::String(s)) => Ok(s),
        Some(v) => Err(mismatch(what, "string", v)),
        None => Err(ControlError::Malformed(format!("{what} needs a value"))),
    }
}

/// Apply one message to the engine. Call between ticks.
pub fn handle_control_message(engine: &mut Engine, msg: &ControlMessage) -> Reply {
    let mut reply = Reply::ok(msg.request_id.clone());
    let result = (|| -> Result<(), ControlError> {
        match msg.kind {
            MessageKind::SetParam => set_param(engine, msg, &mut reply)?,
            MessageKind::GetParam => {
                let raw = msg.path.as_deref().unwrap_or("");
                let path = canonical_path(raw, engine.state().mode);
                let state = state_value(engine.state());
                let v = lookup(&state, &path).ok_or_else(|| ControlError::UnknownPath(raw.into()))?;
                reply.path = Some(path);
                reply.value = Some(v.clone());
            }
            MessageKind::SetMode => {
                let name = string_value(msg, "mode")?;
                let mode: Mode = name
                    .parse()
                    .map_err(|_| ControlError::InvalidValue(format!("unknown mode `{name}`")))?;
                engine.set_mode(mode);
                log::info!("request {}: mode = {mode}", id_text(&msg.request_id));
                reply.path = Some("mode".into());
                reply.value = Some(json!(mode.name()));
            }
            MessageKind::Transport => {
                let t: Transport = serde_json::from_value(json!(string_value(msg, "transport")?))
                    .map_err(|e| ControlError::InvalidValue(e.to_string()))?;
                engine.transport(t);
                log::info!("request {}: transport {t:?}", id_text(&msg.request_id));
                reply.value = Some(json!({
                    "playing": engine.sequencer().is_playing(),
                    "progress": engine.state().progress,
                }));
            }
            MessageKind::Standby => {
                let on = match &msg.value {
                    Some(Value::Bool(b)) => *b,
                    None => !engine.state().standby,
                    Some(v) => return Err(mismatch("standby", "bool", v)),
                };
                engine.set_standby(on);
                log::info!("request {}: standby = {on}", id_text(&msg.request_id));
                reply.path = Some("standby".into());
                reply.value = Some(json!(on));
            }
            MessageKind::SnapshotRequest => {
                let t = engine.last_output().map_or(0.0, |o| o.row.t);
                reply.snapshot = Some(Box::new(engine.snapshot(t)));
            }
            MessageKind::Calibrate => {
                let ids: Vec<u8> = match &msg.value {
                    None | Some(Value::Null) => Vec::new(),
                    Some(v) => serde_json::from_value(v.clone()).map_err(|_| mismatch("calibrate", "array of slot ids", v))?,
                };
                let biases = engine
                    .calibrate(&ids)
                    .map_err(|e| ControlError::InvalidValue(e.to_string()))?;
                log::info!("request {}: calibrated slots {ids:?}", id_text(&msg.request_id));
                reply.value = Some(json!(biases
                    .iter()
                    .map(|(id, b)| json!({"slot_id": id, "gyro_bias": b.gyro, "acc_bias": b.acc}))
                    .collect::<Vec<_>>()));
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => reply,
        Err(e) => {
            log::warn!("request {}: {e}", id_text(&msg.request_id));
            Reply::error(msg.request_id.clone(), &e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> Engine {
        Engine::new(SessionState::default()).unwrap()
    }

    #[test]
    fn gamma_set_then_get_echoes() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::set("mapping.gamma", json!(2.0)).with_id(7));
        assert!(r.ok, "{r:?}");
        assert_eq!(r.value, Some(json!(2.0)));
        assert_eq!(r.request_id, Some(json!(7)));
        let r = handle_control_message(&mut e, &ControlMessage::get("mapping.gamma"));
        assert_eq!(r.value, Some(json!(2.0)));
        assert_eq!(e.state().modes.static_balance.mapping.gamma, 2.0);
    }

    #[test]
    fn tempo_is_clamped_with_a_warning() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::set("tempo", json!(999)));
        assert!(r.ok);
        assert_eq!(r.value, Some(json!(240.0)));
        assert!(r.warning.unwrap().contains("clamped"));
        assert_eq!(e.tempo(), 240.0);
    }

    #[test]
    fn unknown_path_is_reported() {
        let mut e = engine();
        let before = e.state().clone();
        let r = handle_control_message(&mut e, &ControlMessage::set("foo.bar", json!(1)));
        assert!(r.is_error("unknown_path"));
        assert_eq!(*e.state(), before);
        let r = handle_control_message(&mut e, &ControlMessage::set("zones", json!(1)));
        assert!(r.is_error("unknown_path"));
    }

    #[test]
    fn wrong_types_are_rejected() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::set("tempo", json!("fast")));
        assert!(r.is_error("type_mismatch"));
        let r = handle_control_message(&mut e, &ControlMessage::set("standby", json!(1)));
        assert!(r.is_error("type_mismatch"));
        let r = handle_control_message(&mut e, &ControlMessage::set("reach.n_degrees", json!(2.5)));
        assert!(r.is_error("type_mismatch"));
        let r = handle_control_message(&mut e, &ControlMessage::set("strategy", json!("kazoo")));
        assert!(r.is_error("invalid_value"));
        let r = handle_control_message(&mut e, &ControlMessage::set("tempo", Value::Null));
        assert!(r.is_error("type_mismatch"));
    }

    #[test]
    fn invalid_combinations_leave_state_untouched() {
        let mut e = engine();
        let before = e.state().clone();
        let r = handle_control_message(&mut e, &ControlMessage::set("mapping.target_lo", json!(10.0)));
        assert!(r.is_error("invalid_value"));
        assert_eq!(*e.state(), before);
    }

    #[test]
    fn read_only_paths_refuse_writes() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::set("progress", json!(0.5)));
        assert!(r.is_error("read_only"));
    }

    #[test]
    fn pair_aliases_reach_zone_radii() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::set("zones.radii.0.ml", json!(1.5)));
        assert!(r.ok, "{r:?}");
        assert_eq!(e.state().zones.radii[0].0, 1.5);
    }

    #[test]
    fn optional_fields_accept_numbers_and_null() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::set("params.siren_level", json!(0.4)));
        assert!(r.ok, "{r:?}");
        assert_eq!(e.state().modes.static_balance.params.siren_level, Some(0.4));
        let r = handle_control_message(&mut e, &ControlMessage::set("params.siren_level", Value::Null));
        assert!(r.ok, "{r:?}");
        assert_eq!(e.state().modes.static_balance.params.siren_level, None);
    }

    #[test]
    fn mode_transport_and_standby() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::SetMode).with_value(json!("sts")));
        assert!(r.ok);
        assert_eq!(e.state().mode, Mode::Sts);
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::SetMode).with_value(json!("yoga")));
        assert!(r.is_error("invalid_value"));
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::Transport).with_value(json!("pause")));
        assert!(r.ok);
        assert!(!e.sequencer().is_playing());
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::Standby));
        assert_eq!(r.value, Some(json!(true)));
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::Standby).with_value(json!(false)));
        assert_eq!(r.value, Some(json!(false)));
        assert!(!e.state().standby);
    }

    #[test]
    fn snapshot_request_carries_full_state() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::SnapshotRequest));
        assert_eq!(r.snapshot.unwrap().state, *e.state());
    }

    #[test]
    fn calibrate_without_data_fails_cleanly() {
        let mut e = engine();
        let r = handle_control_message(&mut e, &ControlMessage::new(MessageKind::Calibrate).with_value(json!([1])));
        assert!(r.is_error("invalid_value"));
    }

    #[test]
    fn parse_rejects_garbage_and_foreign_versions() {
        assert!(matches!(parse_message("{"), Err(ControlError::Malformed(_))));
        assert!(matches!(parse_message(r#"{"kind":"dance"}"#), Err(ControlError::Malformed(_))));
        assert!(matches!(
            parse_message(r#"{"v":9,"kind":"get_param"}"#),
            Err(ControlError::Version(9))
        ));
        let m = parse_message(r#"{"kind":"set_param","path":"tempo","value":80,"request_id":"a"}"#).unwrap();
        assert_eq!(m, ControlMessage::set("tempo", json!(80)).with_id("a"));
        assert_eq!(request_id_of(r#"{"kind":"x","request_id":3}"#), Some(json!(3)));
    }

    #[test]
    fn every_registered_float_round_trips_through_set() {
        let mut e = engine();
        for p in registry(e.state()) {
            if p.read_only || p.kind != ParamKind::Float {
                continue;
            }
            let current = handle_control_message(&mut e, &ControlMessage::get(&p.path)).value.unwrap();
            let r = handle_control_message(&mut e, &ControlMessage::set(&p.path, current.clone()));
            assert!(r.ok, "{}: {r:?}", p.path);
            assert_eq!(r.value, Some(current), "{}", p.path);
        }
    }
}
