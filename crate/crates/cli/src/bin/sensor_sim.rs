use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use mbf_core::sim::{stream_profile, MotionProfile};

/// Stream a simulated IMU motion profile as OSC over UDP. Multi-sensor
/// profiles use consecutive ports starting at `--port`.
#[derive(Parser)]
#[command(name = "sensor-sim", version)]
struct Args {
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 8001)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Playback speed; 2 sends twice as fast.
    #[arg(long, default_value_t = 1.0)]
    rate_scale: f64,
    /// Fraction of datagrams withheld at random.
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let profile = MotionProfile::load(&args.profile).with_context(|| format!("loading {}", args.profile.display()))?;
    let dest: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let stats = stream_profile(&profile, dest, args.rate_scale, args.drop)?;
    println!(
        "sent {} datagrams ({} dropped) in {:.2} s",
        stats.sent,
        stats.dropped,
        stats.elapsed_ms / 1000.0
    );
    Ok(())
}
