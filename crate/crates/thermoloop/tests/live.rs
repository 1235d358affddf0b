//! The live session over real HTTP on a loopback port, paced fast.

use std::net::SocketAddr;
use std::time::Duration;

use serde_json::{json, Value};
use thermoloop::live::{serve, LiveOptions};
use thermoloop::telemetry::Frame;
use thermoloop_core::{DeciCelsius, LoopConfig, Scenario};

const PACE: Duration = Duration::from_millis(5);

fn manual() -> Scenario {
    Scenario {
        name: "manual".into(),
        duration_ms: 0,
        initial_temp: DeciCelsius(250),
        initial_setpoint: DeciCelsius(250),
        events: Vec::new(),
    }
}

async fn start(scenario: Scenario) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    let cfg = LoopConfig::for_scenario(&scenario);
    tokio::spawn(serve(
        listener,
        LiveOptions {
            cfg,
            scenario,
            pace: PACE,
        },
    ));
    format!("http://{addr}")
}

struct Stream {
    response: reqwest::Response,
    buf: Vec<u8>,
}

impl Stream {
    async fn open(base: &str) -> Stream {
        let response = reqwest::get(format!("{base}/stream")).await.unwrap();
        assert_eq!(response.status(), 200);
        assert_eq!(response.headers()["content-type"], "application/x-ndjson");
        Stream {
            response,
            buf: Vec::new(),
        }
    }

    async fn next(&mut self) -> Frame {
        loop {
            if let Some(i) = self.buf.iter().position(|&b| b == b'\n') {
                let line: Vec<u8> = self.buf.drain(..=i).collect();
                return serde_json::from_slice(&line).unwrap();
            }
            let chunk = tokio::time::timeout(Duration::from_secs(5), self.response.chunk())
                .await
                .expect("stream stalled")
                .unwrap()
                .expect("stream ended");
            self.buf.extend_from_slice(&chunk);
        }
    }

    async fn take(&mut self, n: usize) -> Vec<Frame> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.next().await);
        }
        out
    }
}

async fn command(base: &str, body: &str) -> (u16, Value) {
    let r = reqwest::Client::new()
        .post(format!("{base}/command"))
        .body(body.to_owned())
        .send()
        .await
        .unwrap();
    (r.status().as_u16(), r.json().await.unwrap())
}

async fn snapshot(base: &str) -> Value {
    reqwest::get(format!("{base}/snapshot"))
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

#[tokio::test]
async fn frames_advance_one_period_at_a_time() {
    let base = start(manual()).await;
    let mut s = Stream::open(&base).await;
    let frames = s.take(30).await;
    for w in frames.windows(2) {
        assert_eq!(w[1].t_ms, w[0].t_ms + 100);
    }
    // 25.0 C reads as 24.9 against a 25.0 setpoint: idle
    let f = frames[0];
    assert_eq!(
        (f.t_set, f.t_curr, f.err, f.duty, f.state, f.fault, f.paused),
        (250, 249, -1, 0, 'N', false, false)
    );
}

#[tokio::test]
async fn setpoint_command_shows_within_three_frames() {
    let base = start(manual()).await;
    let mut s = Stream::open(&base).await;
    s.take(3).await;
    let (status, reply) = command(&base, &json!({"type": "set_setpoint_deci", "value": 200}).to_string()).await;
    assert_eq!((status, reply), (200, json!({"ok": true})));
    let frames = s.take(3).await;
    let f = frames
        .iter()
        .find(|f| f.t_set == 200)
        .expect("setpoint not applied within 3 frames");
    assert_eq!(f.err, 49);
    assert!(f.duty > 0);
}

#[tokio::test]
async fn disturbance_heats_the_room_and_spins_the_fan() {
    let base = start(manual()).await;
    let mut s = Stream::open(&base).await;
    s.take(2).await;
    assert_eq!(command(&base, r#"{"type":"disturbance","on":true}"#).await.0, 200);
    let frames = s.take(80).await;
    let (first, last) = (frames[0], frames[79]);
    assert!(last.t_curr > first.t_curr + 30, "{first:?} -> {last:?}");
    assert_eq!(last.duty, 40_000);
    assert!(frames.windows(2).all(|w| w[1].duty >= w[0].duty || w[1].err < w[0].err));
    assert_eq!(snapshot(&base).await["config"]["plant"]["disturbance_on"], true);
}

#[tokio::test]
async fn bad_commands_are_rejected_and_the_session_continues() {
    let base = start(manual()).await;
    let mut s = Stream::open(&base).await;
    let before = s.next().await;

    let (status, reply) = command(&base, r#"{"type":"set_setpoint_deci","value":500}"#).await;
    assert_eq!(status, 400);
    assert_eq!(reply["ok"], false);
    assert_eq!(reply["error"]["code"], "out_of_range");

    for body in ["{", r#"{"type":"explode"}"#, r#"{"type":"pause","now":true}"#] {
        let (status, reply) = command(&base, body).await;
        assert_eq!(status, 400, "{body}");
        assert_eq!(reply["error"]["code"], "malformed", "{body}");
    }

    let after = s.take(5).await;
    assert!(after
        .iter()
        .all(|f| f.t_ms > before.t_ms && !f.paused && f.t_set == 250));
}

#[tokio::test]
async fn pause_repeats_the_last_frame_and_resume_continues() {
    let base = start(manual()).await;
    let mut s = Stream::open(&base).await;
    s.take(3).await;
    assert_eq!(command(&base, r#"{"type":"pause"}"#).await.0, 200);

    // skip frames produced before the pause took effect
    let mut f = s.next().await;
    while !f.paused {
        f = s.next().await;
    }
    let held = s.take(10).await;
    assert!(held.iter().all(|h| h.paused && h.t_ms == f.t_ms));
    assert_eq!(snapshot(&base).await["paused"], true);

    assert_eq!(command(&base, r#"{"type":"resume"}"#).await.0, 200);
    let mut g = s.next().await;
    while g.paused {
        g = s.next().await;
    }
    assert_eq!(g.t_ms, f.t_ms + 100);
}

#[tokio::test]
async fn snapshot_reports_config_and_last_frame() {
    let base = start(manual()).await;
    let mut s = Stream::open(&base).await;
    s.take(3).await;
    let cmd = r#"{"type":"set_gains","kp":1000,"ki":5,"kd":0}"#;
    assert_eq!(command(&base, cmd).await.0, 200);
    s.take(2).await;

    let snap = snapshot(&base).await;
    let cfg = &snap["config"];
    assert_eq!(cfg["scenario"], "manual");
    assert_eq!(cfg["control_period_ms"], 100);
    assert_eq!(cfg["substeps"], 10);
    assert_eq!(cfg["threshold_deci"], 50);
    assert_eq!(cfg["gains"], json!({"kp": 1000, "ki": 5, "kd": 0}));
    assert_eq!(cfg["plant"]["t_amb_deci"], 250);
    assert_eq!(snap["paused"], false);
    assert!(snap["fault"].is_null());
    let last: Frame = serde_json::from_value(snap["last"].clone()).unwrap();
    assert!(last.t_ms >= 400);
}

#[tokio::test]
async fn scenario_events_fire_in_a_live_session() {
    let mut scenario = thermoloop_core::scenario::step_response();
    scenario.events[0].at_ms = 1_000;
    let base = start(scenario).await;
    let mut s = Stream::open(&base).await;
    let mut f = s.next().await;
    while f.t_ms < 1_000 {
        assert_eq!(f.t_set, 300);
        f = s.next().await;
    }
    assert_eq!((f.t_set, f.err, f.duty), (200, 49, 40_000));
}

#[tokio::test]
async fn browser_origins_are_allowed() {
    let base = start(manual()).await;
    let r = reqwest::Client::new()
        .get(format!("{base}/snapshot"))
        .header("origin", "http://localhost:5173")
        .send()
        .await
        .unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "*");
}
