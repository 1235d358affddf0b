//! Live session: the engine paced at wall-clock speed behind a small HTTP API.
//!
//! - `GET /stream`: newline-delimited JSON [`Frame`]s, one per control cycle.
//! - `POST /command`: a JSON [`CommandMessage`]; replies `{"ok":true}` or
//!   `{"ok":false,"error":{"code":..,"message":..}}` with status 400.
//! - `GET /snapshot`: current configuration, pause flag and last frame.
//!
//! Commands are queued and drained by the control task at the next cycle
//! boundary, so a frame reflects either all or none of a command. While
//! paused the stream keeps repeating the last record with `paused: true`.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use thermoloop_core::{Engine, EngineError, Event, LoopConfig, PidGains, Scenario};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tower_http::cors::CorsLayer;

use crate::command::{parse_command, CommandError, CommandMessage, ErrorCode};
use crate::telemetry::Frame;

#[derive(Debug, Clone)]
pub struct LiveOptions {
    pub cfg: LoopConfig,
    pub scenario: Scenario,
    /// Wall-clock time between frames.
    pub pace: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlantSnapshot {
    pub t_amb_deci: i32,
    pub k_passive: f64,
    pub k_fan: f64,
    pub k_src: f64,
    pub t_src_deci: i32,
    pub dt_sub_ms: u64,
    pub disturbance_on: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigSnapshot {
    pub scenario: String,
    pub control_period_ms: u64,
    pub substeps: u32,
    pub gains: PidGains,
    pub threshold_deci: i32,
    pub setpoint_code: u16,
    pub seed: u64,
    pub plant: PlantSnapshot,
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub config: ConfigSnapshot,
    pub paused: bool,
    pub last: Option<Frame>,
    /// Set if the engine stopped on a fault; the session then stays paused.
    pub fault: Option<String>,
}

fn snapshot(engine: &Engine, scenario: &str, paused: bool, last: Option<Frame>, fault: Option<String>) -> Snapshot {
    let cfg = engine.config();
    let plant = engine.plant();
    Snapshot {
        config: ConfigSnapshot {
            scenario: scenario.to_owned(),
            control_period_ms: cfg.period_ms(),
            substeps: cfg.substeps,
            gains: cfg.gains,
            threshold_deci: cfg.safety.threshold().get(),
            setpoint_code: engine.pot_code().code(),
            seed: cfg.seed,
            plant: PlantSnapshot {
                t_amb_deci: cfg.plant.t_amb.get(),
                k_passive: cfg.plant.k_passive.per_sec(),
                k_fan: cfg.plant.k_fan.per_sec(),
                k_src: cfg.plant.k_src.per_sec(),
                t_src_deci: cfg.plant.t_src.get(),
                dt_sub_ms: cfg.plant.dt_sub.as_millis() as u64,
                disturbance_on: plant.state().disturbance_on,
            },
        },
        paused,
        last,
        fault,
    }
}

/// Handles shared between the control task and the HTTP layer.
#[derive(Clone)]
pub struct Session {
    commands: mpsc::UnboundedSender<CommandMessage>,
    frames: broadcast::Sender<Bytes>,
    snapshot: Arc<Mutex<Snapshot>>,
}

impl Session {
    /// Builds the engine and starts the control task on the current runtime.
    pub fn start(opts: LiveOptions) -> Result<(Session, JoinHandle<()>), EngineError> {
        let engine = Engine::from_scenario(opts.cfg, &opts.scenario)?;
        let (commands, rx) = mpsc::unbounded_channel();
        let (frames, _) = broadcast::channel(256);
        let snap = Arc::new(Mutex::new(snapshot(&engine, &opts.scenario.name, false, None, None)));
        let session = Session {
            commands,
            frames: frames.clone(),
            snapshot: snap.clone(),
        };
        let task = tokio::spawn(control_loop(engine, opts, rx, frames, snap));
        Ok((session, task))
    }

    pub fn send(&self, cmd: CommandMessage) -> Result<(), CommandError> {
        self.commands.send(cmd).map_err(|_| CommandError {
            code: ErrorCode::SessionClosed,
            message: "control loop has stopped".into(),
        })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Bytes> {
        self.frames.subscribe()
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.lock().expect("snapshot lock").clone()
    }
}

async fn control_loop(
    mut engine: Engine,
    opts: LiveOptions,
    mut commands: mpsc::UnboundedReceiver<CommandMessage>,
    frames: broadcast::Sender<Bytes>,
    snap: Arc<Mutex<Snapshot>>,
) {
    let mut ticker = tokio::time::interval(opts.pace);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut pending = opts.scenario.events.iter().peekable();
    let mut paused = false;
    let mut fault: Option<String> = None;

    loop {
        ticker.tick().await;

        loop {
            let cmd = match commands.try_recv() {
                Ok(cmd) => cmd,
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            };
            let applied = match cmd {
                CommandMessage::SetSetpointDeci(t) => engine.apply(&Event::SetpointTemp(t)),
                CommandMessage::SetSetpointCode(c) => engine.apply(&Event::SetpointCode(c)),
                CommandMessage::Disturbance(true) => engine.apply(&Event::DisturbanceOn),
                CommandMessage::Disturbance(false) => engine.apply(&Event::DisturbanceOff),
                CommandMessage::SetGains(g) => {
                    engine.set_gains(g);
                    Ok(())
                }
                CommandMessage::Pause => {
                    paused = true;
                    Ok(())
                }
                CommandMessage::Resume => {
                    paused = fault.is_some();
                    Ok(())
                }
                CommandMessage::Reset => {
                    engine.reset_controller();
                    Ok(())
                }
            };
            if let Err(e) = applied {
                fault = Some(e.to_string());
            }
        }

        let frame = if paused {
            engine.last_record().map(|r| Frame::new(r, true))
        } else {
            let now = engine.now_ms();
            let mut result = Ok(());
            while let Some(ev) = pending.next_if(|ev| ev.at_ms <= now) {
                result = result.and(engine.apply(&ev.event));
            }
            match result.and_then(|()| engine.step()) {
                Ok(r) => Some(Frame::new(&r, false)),
                Err(e) => {
                    fault = Some(e.to_string());
                    paused = true;
                    engine.last_record().map(|r| Frame::new(r, true))
                }
            }
        };

        *snap.lock().expect("snapshot lock") = snapshot(&engine, &opts.scenario.name, paused, frame, fault.clone());
        if let Some(f) = frame {
            // no subscribers is fine
            let _ = frames.send(Bytes::from(f.to_line()));
        }
    }
}

#[derive(Serialize)]
struct Reply {
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<CommandError>,
}

async fn stream(State(session): State<Session>) -> Response {
    let rx = session.subscribe();
    let body = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(line) => return Some((Ok::<_, std::convert::Infallible>(line), rx)),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    (
        [
            (header::CONTENT_TYPE, "application/x-ndjson"),
            (header::CACHE_CONTROL, "no-cache"),
        ],
        Body::from_stream(body),
    )
        .into_response()
}

async fn command(State(session): State<Session>, body: String) -> Response {
    let result = parse_command(&body).and_then(|cmd| session.send(cmd));
    match result {
        Ok(()) => Json(Reply { ok: true, error: None }).into_response(),
        Err(e) => {
            let status = match e.code {
                ErrorCode::SessionClosed => StatusCode::SERVICE_UNAVAILABLE,
                _ => StatusCode::BAD_REQUEST,
            };
            (
                status,
                Json(Reply {
                    ok: false,
                    error: Some(e),
                }),
            )
                .into_response()
        }
    }
}

async fn get_snapshot(State(session): State<Session>) -> Json<Snapshot> {
    Json(session.snapshot())
}

pub fn router(session: Session) -> Router {
    Router::new()
        .route("/stream", get(stream))
        .route("/command", post(command))
        .route("/snapshot", get(get_snapshot))
        .layer(CorsLayer::permissive())
        .with_state(session)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Starts a session and serves it on `listener` until the process exits.
pub async fn serve(listener: TcpListener, opts: LiveOptions) -> Result<(), ServeError> {
    let (session, _task) = Session::start(opts)?;
    axum::serve(listener, router(session)).await?;
    Ok(())
}
