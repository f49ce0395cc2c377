use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::mapping::{MappingConfig, Trajectory, ZoneLayout};
use crate::motion::FilterSettings;
use crate::osc::{SensorSlot, DEFAULT_OFFLINE_TIMEOUT_MS};
use crate::sequencer::{Track, TEMPO_MAX, TEMPO_MIN};
use crate::synth::{CueKind, Strategy, StrategyParams, SynthSettings};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    StaticBalance,
    Reach,
    TrunkControl,
    Sts,
    GaitDuration,
    GaitPhase,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::StaticBalance,
        Mode::Reach,
        Mode::TrunkControl,
        Mode::Sts,
        Mode::GaitDuration,
        Mode::GaitPhase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::StaticBalance => "static_balance",
            Mode::Reach => "reach",
            Mode::TrunkControl => "trunk_control",
            Mode::Sts => "sts",
            Mode::GaitDuration => "gait_duration",
            Mode::GaitPhase => "gait_phase",
        }
    }

    pub fn is_gait(self) -> bool {
        matches!(self, Mode::GaitDuration | Mode::GaitPhase)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, SessionError> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SessionError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TiltAxis {
    #[default]
    Ml,
    Ap,
}

/// Strategy and mapping for one exercise mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeConfig {
    pub strategy: Strategy,
    pub mapping: MappingConfig,
    #[serde(default)]
    pub params: StrategyParams,
}

impl ModeConfig {
    fn new(strategy: Strategy, mapping: MappingConfig) -> Self {
        Self {
            strategy,
            mapping,
            params: StrategyParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeConfigs {
    /// Parameter: zone level 0..4 signed by the side of the target.
    pub static_balance: ModeConfig,
    /// Parameter: tilt on the reach axis, deg.
    pub reach: ModeConfig,
    /// Parameter: distance to the anticipated trajectory point, deg.
    pub trunk_control: ModeConfig,
    /// Parameter: squared jerk.
    pub sts: ModeConfig,
    /// Parameter: signed step timing error.
    pub gait_duration: ModeConfig,
    pub gait_phase: ModeConfig,
}

impl Default for ModeConfigs {
    fn default() -> Self {
        let mut sts = ModeConfig::new(
            Strategy::MusicDissonance,
            MappingConfig::new((0.0, 200.0), (-1.0, 20_000.0)).with_gamma(0.5),
        );
        sts.params.cue = Some(CueKind::Bell);
        let mut reach = ModeConfig::new(Strategy::MelodyDegree, MappingConfig::new((-2.0, 2.0), (-45.0, 45.0)));
        reach.params.track = Track::Melody;
        Self {
            static_balance: ModeConfig::new(
                Strategy::DisturbanceTone,
                MappingConfig::new((-0.5, 0.5), (-4.0, 4.0)),
            ),
            reach,
            trunk_control: ModeConfig::new(
                Strategy::AmbulanceSiren,
                MappingConfig::new((0.0, 1.0), (-1.0, 15.0)),
            ),
            sts,
            gait_duration: ModeConfig::new(Strategy::PitchSkew, MappingConfig::new((0.0, 0.0), (-1.0, 1.0))),
            gait_phase: ModeConfig::new(Strategy::DrumTrigger, MappingConfig::new((0.0, 0.0), (-1.0, 1.0))),
        }
    }
}

impl ModeConfigs {
    pub fn get(&self, mode: Mode) -> &ModeConfig {
        match mode {
            Mode::StaticBalance => &self.static_balance,
            Mode::Reach => &self.reach,
            Mode::TrunkControl => &self.trunk_control,
            Mode::Sts => &self.sts,
            Mode::GaitDuration => &self.gait_duration,
            Mode::GaitPhase => &self.gait_phase,
        }
    }

    pub fn get_mut(&mut self, mode: Mode) -> &mut ModeConfig {
        match mode {
            Mode::StaticBalance => &mut self.static_balance,
            Mode::Reach => &mut self.reach,
            Mode::TrunkControl => &mut self.trunk_control,
            Mode::Sts => &mut self.sts,
            Mode::GaitDuration => &mut self.gait_duration,
            Mode::GaitPhase => &mut self.gait_phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MusicConfig {
    /// Built-in song name or path to a song file.
    pub song: String,
    /// Built-in style name or path to a style file.
    pub style: String,
    pub repeat: bool,
    /// Start the transport when the engine starts.
    pub autoplay: bool,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            song: "demo".into(),
            style: "slow_rock".into(),
            repeat: true,
            autoplay: true,
        }
    }
}

/// Anticipated-error sigmoid settings for trunk control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicConfig {
    pub lead_beats: f64,
    pub k: f64,
    pub d0: f64,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            lead_beats: 0.25,
            k: 1.0,
            d0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachConfig {
    pub axis: TiltAxis,
    pub range: (f64, f64),
    pub n_degrees: u32,
    /// A repetition counts once tilt passes this...
    pub threshold_deg: f64,
    /// ...and falls back below this.
    pub rearm_deg: f64,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self {
            axis: TiltAxis::Ap,
            range: (0.0, 30.0),
            n_degrees: 8,
            threshold_deg: 15.0,
            rearm_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StsConfig {
    pub sit_threshold: f64,
    pub stand_threshold: f64,
    pub hysteresis: f64,
}

impl Default for StsConfig {
    fn default() -> Self {
        Self {
            sit_threshold: 30.0,
            stand_threshold: 30.0,
            hysteresis: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitConfig {
    pub dead_zone_ms: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self { dead_zone_ms: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub slots: Vec<SensorSlot>,
    pub offline_timeout_ms: f64,
    pub bind_ip: String,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            slots: SensorSlot::defaults(),
            offline_timeout_ms: DEFAULT_OFFLINE_TIMEOUT_MS,
            bind_ip: "127.0.0.1".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub port: u16,
    pub snapshot_hz: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            port: 9000,
            snapshot_hz: 15.0,
        }
    }
}

/// Everything an operator can see or change, and everything persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionState {
    pub schema: u32,
    pub mode: Mode,
    pub standby: bool,
    /// BPM.
    pub tempo: f64,
    pub rep_count: u64,
    /// Song completion 0..1.
    pub progress: f64,
    pub music: MusicConfig,
    pub modes: ModeConfigs,
    pub zones: ZoneLayout,
    pub trajectory: Trajectory,
    pub dynamic: DynamicConfig,
    pub reach: ReachConfig,
    pub sts: StsConfig,
    pub gait: GaitConfig,
    pub filters: FilterSettings,
    pub sensors: SensorConfig,
    pub control: ControlConfig,
    pub mixer: SynthSettings,
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA_VERSION,
            mode: Mode::StaticBalance,
            standby: false,
            tempo: 60.0,
            rep_count: 0,
            progress: 0.0,
            music: MusicConfig::default(),
            modes: ModeConfigs::default(),
            zones: ZoneLayout::default(),
            trajectory: Trajectory::default(),
            dynamic: DynamicConfig::default(),
            reach: ReachConfig::default(),
            sts: StsConfig::default(),
            gait: GaitConfig::default(),
            filters: FilterSettings::default(),
            sensors: SensorConfig::default(),
            control: ControlConfig::default(),
            mixer: SynthSettings::default(),
        }
    }
}

impl SessionState {
    pub fn mode_config(&self) -> &ModeConfig {
        self.modes.get(self.mode)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let invalid = |m: String| Err(SessionError::InvalidState(m));
        if self.schema != CONFIG_SCHEMA_VERSION {
            return Err(SessionError::SchemaMismatch {
                found: self.schema,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        if !(TEMPO_MIN..=TEMPO_MAX).contains(&self.tempo) {
            return invalid(format!("tempo {} outside {TEMPO_MIN}..{TEMPO_MAX}", self.tempo));
        }
        if !(0.0..=1.0).contains(&self.progress) {
            return invalid(format!("progress {} outside 0..1", self.progress));
        }
        for m in Mode::ALL {
            self.modes
                .get(m)
                .mapping
                .validate()
                .or_else(|e| invalid(format!("{m}: {e}")))?;
        }
        self.zones.validate().or_else(|e| invalid(e.to_string()))?;
        self.trajectory.validate().or_else(|e| invalid(e.to_string()))?;
        for spec in [self.filters.tilt, self.filters.jerk]
            .into_iter()
            .chain(self.filters.step.filter)
        {
            spec.validate().or_else(|e| invalid(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.filters.complementary_alpha) {
            return invalid("complementary_alpha outside 0..1".into());
        }
        if !(self.dynamic.k > 0.0 && self.dynamic.d0 >= 0.0) {
            return invalid("dynamic.k must be > 0 and dynamic.d0 >= 0".into());
        }
        if !(self.reach.range.0 < self.reach.range.1 && self.reach.n_degrees >= 2) {
            return invalid("reach.range must ascend and reach.n_degrees be >= 2".into());
        }
        if self.reach.rearm_deg > self.reach.threshold_deg {
            return invalid("reach.rearm_deg must not exceed reach.threshold_deg".into());
        }
        if self.sts.hysteresis < 0.0 || self.gait.dead_zone_ms < 0.0 {
            return invalid("sts.hysteresis and gait.dead_zone_ms must be >= 0".into());
        }
        let mut ports: Vec<u16> = self.sensors.slots.iter().map(|s| s.udp_port).filter(|&p| p != 0).collect();
        ports.sort_unstable();
        if ports.windows(2).any(|w| w[0] == w[1]) {
            return invalid("sensor ports must be unique".into());
        }
        if !(self.control.snapshot_hz > 0.0) {
            return invalid("control.snapshot_hz must be > 0".into());
        }
        self.mixer.validate().or_else(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, SessionError> {
        toml::to_string_pretty(self).map_err(|e| SessionError::Parse(e.to_string()))
    }

    /// Parse a config, returning the state and the paths of ignored unknown fields.
    pub fn from_toml(text: &str) -> Result<(SessionState, Vec<String>), SessionError> {
        let value: toml::Value = text.parse().map_err(|e: toml::de::Error| SessionError::Parse(e.to_string()))?;
        let found = value
            .get("schema")
            .and_then(toml::Value::as_integer)
            .ok_or(SessionError::SchemaMismatch {
                found: 0,
                expected: CONFIG_SCHEMA_VERSION,
            })?;
        if found != i64::from(CONFIG_SCHEMA_VERSION) {
            return Err(SessionError::SchemaMismatch {
                found: u32::try_from(found).unwrap_or(0),
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        let mut ignored = Vec::new();
        let state: SessionState = serde_ignored::deserialize(value, |p| ignored.push(p.to_string()))
            .map_err(|e| SessionError::Parse(e.to_string()))?;
        state.validate()?;
        Ok((state, ignored))
    }
}

pub fn save_config(state: &SessionState, path: &Path) -> Result<(), SessionError> {
    std::fs::write(path, state.to_toml()?)?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<SessionState, SessionError> {
    let text = std::fs::read_to_string(path)?;
    let (state, ignored) = SessionState::from_toml(&text)?;
    for p in ignored {
        log::warn!("{}: ignoring unknown field `{p}`", path.display());
    }
    Ok(state)
}
