//! Sensor wire protocol (OSC 1.0 over UDP) and per-sensor receive slots.
//!
//! Each sensor streams to its own UDP port, so a datagram carries no sensor
//! id. The payload is a single OSC message:
//!
//! ```text
//! "/sensor/imu\0"          12 bytes (address, 4-byte padded)
//! ",fffffff\0\0\0\0"       12 bytes (type tags, 4-byte padded)
//! 7 x big-endian f32       28 bytes (acc xyz [g], gyro xyz [deg/s], battery [0,1])
//! ```

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;

pub const IMU_ADDRESS: &str = "/sensor/imu";
pub const IMU_TYPETAG: &str = ",fffffff";
/// Encoded size of one sample message.
pub const IMU_MESSAGE_LEN: usize = 52;
/// Nominal sensor transmit period.
pub const SENSOR_PERIOD_MS: f64 = 8.0;
pub const DEFAULT_OFFLINE_TIMEOUT_MS: f64 = 500.0;
pub const DEFAULT_PORTS: [u16; 3] = [8001, 8002, 8003];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscError {
    #[error("malformed packet: {0}")]
    MalformedPacket(&'static str),
}

/// One timestamped 6-axis inertial reading plus battery level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuSample {
    /// Monotonic receive time, ms.
    pub t_rx: f64,
    /// Acceleration, g.
    pub acc: [f32; 3],
    /// Angular rate, deg/s.
    pub gyro: [f32; 3],
    /// Battery fraction in [0, 1].
    pub battery: f32,
}

impl ImuSample {
    pub fn new(t_rx: f64, acc: [f32; 3], gyro: [f32; 3], battery: f32) -> Self {
        Self {
            t_rx,
            acc,
            gyro,
            battery,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.t_rx.is_finite()
            && self.acc.iter().chain(self.gyro.iter()).all(|v| v.is_finite())
            && self.battery.is_finite()
            && (0.0..=1.0).contains(&self.battery)
    }

    pub fn acc_f64(&self) -> [f64; 3] {
        self.acc.map(f64::from)
    }

    pub fn gyro_f64(&self) -> [f64; 3] {
        self.gyro.map(f64::from)
    }
}

fn push_padded_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(s.as_bytes());
    let pad = 4 - (s.len() % 4);
    buf.extend(std::iter::repeat(0u8).take(pad));
}

/// Encode a sample as an OSC 1.0 message. The receive timestamp is not transmitted.
pub fn encode_osc_message(sample: &ImuSample) -> Vec<u8> {
    let mut buf = Vec::with_capacity(IMU_MESSAGE_LEN);
    push_padded_str(&mut buf, IMU_ADDRESS);
    push_padded_str(&mut buf, IMU_TYPETAG);
    for v in sample
        .acc
        .iter()
        .chain(sample.gyro.iter())
        .chain(std::iter::once(&sample.battery))
    {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    buf
}

/// Read a NUL-terminated, 4-byte padded OSC string starting at `pos`.
fn read_padded_str(bytes: &[u8], pos: usize) -> Result<(&[u8], usize), OscError> {
    let rest = bytes
        .get(pos..)
        .ok_or(OscError::MalformedPacket("truncated"))?;
    let nul = rest
        .iter()
        .position(|&b| b == 0)
        .ok_or(OscError::MalformedPacket("unterminated string"))?;
    let padded = (nul / 4 + 1) * 4;
    if rest.len() < padded {
        return Err(OscError::MalformedPacket("truncated string padding"));
    }
    if rest[nul..padded].iter().any(|&b| b != 0) {
        return Err(OscError::MalformedPacket("non-zero string padding"));
    }
    Ok((&rest[..nul], pos + padded))
}

/// Decode one datagram into a sample stamped with `t_rx`.
pub fn decode_osc_message(bytes: &[u8], t_rx: f64) -> Result<ImuSample, OscError> {
    let (address, pos) = read_padded_str(bytes, 0)?;
    if address != IMU_ADDRESS.as_bytes() {
        return Err(OscError::MalformedPacket("unexpected address"));
    }
    let (tags, pos) = read_padded_str(bytes, pos)?;
    if tags != IMU_TYPETAG.as_bytes() {
        return Err(OscError::MalformedPacket("unexpected type tags"));
    }
    if bytes.len() != pos + 7 * 4 {
        return Err(OscError::MalformedPacket("argument length mismatch"));
    }
    let mut vals = [0f32; 7];
    for (i, chunk) in bytes[pos..].chunks_exact(4).enumerate() {
        vals[i] = f32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
    let sample = ImuSample {
        t_rx,
        acc: [vals[0], vals[1], vals[2]],
        gyro: [vals[3], vals[4], vals[5]],
        battery: vals[6],
    };
    if !sample.is_valid() {
        return Err(OscError::MalformedPacket("non-finite or out-of-range value"));
    }
    Ok(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BodyLocation {
    Trunk,
    LeftLeg,
    RightLeg,
    #[default]
    Unassigned,
}

/// Static configuration plus live status of one sensor port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSlot {
    pub slot_id: u8,
    pub udp_port: u16,
    pub body_location: BodyLocation,
    #[serde(skip)]
    pub online: bool,
    #[serde(skip)]
    pub last_rx: Option<f64>,
    pub gyro_bias: [f64; 3],
    pub acc_bias: [f64; 3],
}

impl SensorSlot {
    pub fn new(slot_id: u8, udp_port: u16, body_location: BodyLocation) -> Self {
        Self {
            slot_id,
            udp_port,
            body_location,
            online: false,
            last_rx: None,
            gyro_bias: [0.0; 3],
            acc_bias: [0.0; 3],
        }
    }

    /// The three default slots: trunk, left leg, right leg on 8001..8003.
    pub fn defaults() -> Vec<SensorSlot> {
        vec![
            SensorSlot::new(1, DEFAULT_PORTS[0], BodyLocation::Trunk),
            SensorSlot::new(2, DEFAULT_PORTS[1], BodyLocation::LeftLeg),
            SensorSlot::new(3, DEFAULT_PORTS[2], BodyLocation::RightLeg),
        ]
    }
}

/// Update and return the online flag of `slot` at time `now`.
pub fn poll_sensor_status(slot: &mut SensorSlot, now: f64, offline_timeout_ms: f64) -> bool {
    slot.online = match slot.last_rx {
        Some(t) => now - t < offline_timeout_ms,
        None => false,
    };
    slot.online
}

/// Result of one mailbox read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub sample: ImuSample,
    /// Samples that arrived since the previous read and were overwritten.
    pub superseded: u64,
}

#[derive(Debug, Default)]
struct Latest {
    sample: Option<ImuSample>,
    pending: u64,
}

/// Single-writer/single-reader latest-sample mailbox with monotone counters.
#[derive(Debug, Default)]
pub struct Mailbox {
    latest: Mutex<Latest>,
    received: AtomicU64,
    malformed: AtomicU64,
    superseded: AtomicU64,
    last_rx_bits: AtomicU64,
}

impl Mailbox {
    pub fn new() -> Self {
        Self {
            last_rx_bits: AtomicU64::new(f64::NAN.to_bits()),
            ..Default::default()
        }
    }

    pub fn publish(&self, sample: ImuSample) {
        {
            let mut l = self.latest.lock().unwrap();
            l.sample = Some(sample);
            l.pending += 1;
        }
        self.received.fetch_add(1, Ordering::Relaxed);
        self.last_rx_bits
            .store(sample.t_rx.to_bits(), Ordering::Release);
    }

    pub fn record_malformed(&self) {
        self.malformed.fetch_add(1, Ordering::Relaxed);
    }

    /// Take the newest sample, if any arrived since the last read.
    pub fn take(&self) -> Option<Delivery> {
        let mut l = self.latest.lock().unwrap();
        let sample = l.sample.take()?;
        let superseded = l.pending.saturating_sub(1);
        l.pending = 0;
        drop(l);
        self.superseded.fetch_add(superseded, Ordering::Relaxed);
        Some(Delivery { sample, superseded })
    }

    pub fn last_rx(&self) -> Option<f64> {
        let v = f64::from_bits(self.last_rx_bits.load(Ordering::Acquire));
        (!v.is_nan()).then_some(v)
    }

    pub fn received(&self) -> u64 {
        self.received.load(Ordering::Relaxed)
    }

    pub fn malformed(&self) -> u64 {
        self.malformed.load(Ordering::Relaxed)
    }

    pub fn superseded(&self) -> u64 {
        self.superseded.load(Ordering::Relaxed)
    }
}

/// Background UDP listener feeding one slot's mailbox.
pub struct SensorReceiver {
    pub local_addr: SocketAddr,
    mailbox: Arc<Mailbox>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl SensorReceiver {
    pub fn spawn(bind: SocketAddr, mailbox: Arc<Mailbox>, clock: Clock) -> io::Result<Self> {
        let socket = UdpSocket::bind(bind)?;
        socket.set_read_timeout(Some(Duration::from_millis(20)))?;
        let local_addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let mailbox = mailbox.clone();
            let stop = stop.clone();
            std::thread::Builder::new()
                .name(format!("osc-rx-{}", local_addr.port()))
                .spawn(move || {
                    let mut buf = [0u8; 1536];
                    while !stop.load(Ordering::Relaxed) {
                        match socket.recv(&mut buf) {
                            Ok(n) => match decode_osc_message(&buf[..n], clock.now_ms()) {
                                Ok(sample) => mailbox.publish(sample),
                                Err(e) => {
                                    log::debug!("dropping datagram on {}: {e}", local_addr);
                                    mailbox.record_malformed();
                                }
                            },
                            Err(e)
                                if matches!(
                                    e.kind(),
                                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                                ) => {}
                            Err(e) => {
                                log::warn!("receive error on {}: {e}", local_addr);
                                std::thread::sleep(Duration::from_millis(5));
                            }
                        }
                    }
                })?
        };
        Ok(Self {
            local_addr,
            mailbox,
            stop,
            handle: Some(handle),
        })
    }

    pub fn mailbox(&self) -> &Arc<Mailbox> {
        &self.mailbox
    }

    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for SensorReceiver {
    fn drop(&mut self) {
        self.shutdown();
    }
}
