use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mbf_cli::{spawn_server, ServerOptions};
use mbf_core::session::{load_config, save_config, LogWriter, Runtime, RuntimeOptions, SessionState, VirtualSession};
use mbf_core::sim::{generate_profile, MotionProfile};
use mbf_core::synth::WavSink;

#[derive(Parser)]
#[command(name = "engine", version, about = "Musical biofeedback engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run in real time, receiving sensors over UDP.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the rendered audio to a WAV file.
        #[arg(long)]
        render_out: Option<PathBuf>,
        /// Write the 100 Hz session log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// No control server.
        #[arg(long)]
        headless: bool,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Directory served to browsers at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Render a simulated session offline, as fast as possible.
    Render {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Motion profile fed to the sensor slots.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long)]
        render_out: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write the default configuration.
    InitConfig { path: PathBuf },
}

fn state_from(config: Option<&Path>) -> Result<SessionState> {
    match config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(SessionState::default()),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            render_out,
            log,
            headless,
            duration,
            static_dir,
        } => run(state_from(config.as_deref())?, render_out, log, headless, duration, static_dir),
        Command::Render {
            config,
            profile,
            duration,
            render_out,
            log,
        } => render(state_from(config.as_deref())?, profile, duration, render_out, log),
        Command::InitConfig { path } => {
            save_config(&SessionState::default(), &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn run(
    state: SessionState,
    render_out: Option<PathBuf>,
    log_path: Option<PathBuf>,
    headless: bool,
    duration: Option<f64>,
    static_dir: Option<PathBuf>,
) -> Result<()> {
    let control_addr: SocketAddr = format!("{}:{}", state.sensors.bind_ip, state.control.port).parse()?;
    let runtime = Arc::new(Runtime::start(
        state,
        RuntimeOptions {
            log_path: log_path.clone(),
            render_out,
            ..Default::default()
        },
    )?);
    for a in runtime.sensor_addrs() {
        log::info!("sensor slot listening on {a}");
    }
    let tokio = tokio::runtime::Runtime::new()?;
    tokio.block_on(async {
        let server = if headless {
            None
        } else {
            Some(
                spawn_server(
                    runtime.clone(),
                    ServerOptions {
                        addr: control_addr,
                        log_path,
                        static_dir,
                    },
                )
                .await?,
            )
        };
        match duration {
            Some(s) => tokio::time::sleep(Duration::from_secs_f64(s)).await,
            None => tokio::signal::ctrl_c().await?,
        }
        if let Some(s) = server {
            s.shutdown().await;
        }
        anyhow::Ok(())
    })?;
    drop(tokio);
    let Ok(runtime) = Arc::try_unwrap(runtime) else {
        bail!("runtime still shared at shutdown");
    };
    let stats = runtime.stop();
    log::info!("stopped: {stats:?}");
    Ok(())
}

fn render(
    state: SessionState,
    profile: Option<PathBuf>,
    duration: f64,
    render_out: Option<PathBuf>,
    log_path: Option<PathBuf>,
) -> Result<()> {
    let mut session = VirtualSession::new(state)?;
    if let Some(p) = profile {
        let profile = MotionProfile::load(&p)?;
        session.attach_run(&generate_profile(&profile)?, 0.0, 0.0, profile.seed);
    }
    let mut wav = render_out.as_deref().map(WavSink::create).transpose()?;
    let mut log = log_path.as_deref().map(LogWriter::create).transpose()?;
    let blocks = (duration * 100.0).round() as usize;
    let t0 = Instant::now();
    for _ in 0..blocks {
        let (out, block) = session.step(true);
        if let (Some(w), Some(b)) = (wav.as_mut(), block.as_ref()) {
            w.write_block(b)?;
        }
        if let Some(l) = log.as_mut() {
            l.write(&out.row)?;
        }
    }
    if let Some(l) = log.as_mut() {
        l.flush()?;
    }
    if let Some(w) = wav {
        w.finalize()?;
    }
    let wall = t0.elapsed().as_secs_f64();
    println!("rendered {duration:.1} s in {wall:.2} s ({:.1}x real time)", duration / wall);
    Ok(())
}
