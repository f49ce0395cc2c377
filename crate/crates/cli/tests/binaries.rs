use std::net::UdpSocket;
use std::process::Command;

use mbf_core::session::{read_log, save_config, SessionState};

fn free_udp_base() -> u16 {
    loop {
        let a = UdpSocket::bind("127.0.0.1:0").unwrap();
        let port = a.local_addr().unwrap().port();
        if port > 60000 {
            continue;
        }
        let taken = (1..3).any(|i| UdpSocket::bind(("127.0.0.1", port + i)).is_err());
        if !taken {
            return port;
        }
    }
}

#[test]
fn engine_logs_what_sensor_sim_streams() {
    let dir = tempfile::tempdir().unwrap();
    let base = free_udp_base();
    let mut state = SessionState::default();
    for (i, s) in state.sensors.slots.iter_mut().enumerate() {
        s.udp_port = base + i as u16;
    }
    let config = dir.path().join("session.toml");
    save_config(&state, &config).unwrap();
    let profile = dir.path().join("sway.toml");
    std::fs::write(
        &profile,
        "kind = \"static_sway\"\nduration = 1.5\nseed = 3\n[sway]\namplitude_deg = 3.0\nfreq_hz = 0.5\n",
    )
    .unwrap();
    let log = dir.path().join("session.csv");
    let wav = dir.path().join("session.wav");

    let mut engine = Command::new(env!("CARGO_BIN_EXE_engine"))
        .args(["run", "--headless", "--duration", "2.5", "--config"])
        .arg(&config)
        .arg("--log")
        .arg(&log)
        .arg("--render-out")
        .arg(&wav)
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(400));
    let sim = Command::new(env!("CARGO_BIN_EXE_sensor-sim"))
        .arg("--profile")
        .arg(&profile)
        .args(["--port", &base.to_string()])
        .output()
        .unwrap();
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(String::from_utf8_lossy(&sim.stdout).contains("sent"));
    assert!(engine.wait().unwrap().success());

    let rows = read_log(&log).unwrap();
    assert!((245..=252).contains(&rows.len()), "{} rows", rows.len());
    let online = rows.iter().filter(|r| r.trunk_online).count();
    assert!(online > 100, "{online} online rows");
    assert!(rows.iter().any(|r| r.tilt_ml.abs() > 1.0));
    let wav_len = std::fs::metadata(&wav).unwrap().len();
    assert!(wav_len > 44 + 2 * 48_000 * 2 * 2, "{wav_len} bytes");
}

#[test]
fn offline_render_writes_audio_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("r.csv");
    let wav = dir.path().join("r.wav");
    let out = Command::new(env!("CARGO_BIN_EXE_engine"))
        .args(["render", "--duration", "3", "--log"])
        .arg(&log)
        .arg("--render-out")
        .arg(&wav)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("real time"));
    assert_eq!(read_log(&log).unwrap().len(), 300);
    let reader = hound::WavReader::open(&wav).unwrap();
    assert_eq!(reader.duration(), 3 * 48_000);
}

#[test]
fn init_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let st = Command::new(env!("CARGO_BIN_EXE_engine"))
        .arg("init-config")
        .arg(&path)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(mbf_core::session::load_config(&path).unwrap(), SessionState::default());
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_sensor-sim"))
        .args(["--profile", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
