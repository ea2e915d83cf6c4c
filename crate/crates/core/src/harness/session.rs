//! Live sessions: a websocket bridge between a browser client and a
//! paced environment, plus static file serving for the client itself.
//!
//! Three threads cooperate and share nothing mutable: an acceptor that
//! serves static files and hands the websocket over, a network loop that
//! owns the socket, and the stepper (the calling thread) that owns the
//! environment. They talk through channels only.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tungstenite::{Message, WebSocket};

use crate::error::{Error, Result};
use crate::expert::{DemoHeader, DemoMetadata, DemoSource, DemoWriter, Trajectory};
use crate::lander::{Action, EnvKind, TerminationReason, ACTION_DIM, OBS_DIM};
use crate::nn::NetworkParams;
use crate::replay::{Source, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    Demonstrate,
    Watch,
    Intervene,
}

impl SessionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionMode::Demonstrate => "demonstrate",
            SessionMode::Watch => "watch",
            SessionMode::Intervene => "intervene",
        }
    }
}

impl FromStr for SessionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "demonstrate" => Ok(SessionMode::Demonstrate),
            "watch" => Ok(SessionMode::Watch),
            "intervene" => Ok(SessionMode::Intervene),
            other => Err(Error::Config(format!(
                "unknown session mode {other:?}; expected demonstrate, watch or intervene"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Human,
    Agent,
}

/// How the stepper advances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Fixed rate; missing human actions repeat the last one.
    RealTime { hz: f64 },
    /// Human-controlled steps wait for one `action` message each; agent
    /// steps still run at `hz`.
    Lockstep { hz: f64 },
}

impl Pacing {
    pub fn hz(self) -> f64 {
        match self {
            Pacing::RealTime { hz } | Pacing::Lockstep { hz } => hz,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub env: EnvKind,
    pub mode: SessionMode,
    pub pacing: Pacing,
    /// Stop after this many episodes; `None` runs until the client leaves.
    pub max_episodes: Option<usize>,
    /// Seeds episode start states the same way demonstration collection does.
    pub seed: u64,
    pub record_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

impl SessionConfig {
    pub fn new(env: EnvKind, mode: SessionMode) -> Self {
        SessionConfig {
            env,
            mode,
            pacing: Pacing::RealTime { hz: 50.0 },
            max_episodes: None,
            seed: 0,
            record_path: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode_return: f64,
    pub steps: u32,
    pub human_steps: u32,
    /// The client left before the episode ended.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SessionReport {
    pub episodes: Vec<EpisodeSummary>,
    /// Human and intervention trajectories, in recording order.
    pub recorded: Vec<Trajectory>,
    pub client: Option<SocketAddr>,
}

/// Server to client messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        env_id: String,
        obs_dim: usize,
        action_dim: usize,
        mode: SessionMode,
        hz: f64,
    },
    Frame {
        t: u32,
        obs: [f64; OBS_DIM],
        action_applied: [f64; ACTION_DIM],
        reward: f64,
        done: bool,
        reason: TerminationReason,
        mode: SessionMode,
        controller: Controller,
    },
    EpisodeEnd {
        #[serde(rename = "return")]
        episode_return: f64,
        steps: u32,
        recorded: bool,
    },
}

/// Client to server messages.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Action { t: Option<u64>, a: [f64; ACTION_DIM] },
    Takeover { engage: bool },
}

impl ClientMessage {
    /// `Ok(None)` for well-formed JSON of an unknown type.
    pub fn parse(text: &str) -> std::result::Result<Option<Self>, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        let kind = v.get("type").and_then(Value::as_str).ok_or("message without a type")?;
        match kind {
            "action" => {
                let a = v
                    .get("a")
                    .and_then(Value::as_array)
                    .filter(|a| a.len() == ACTION_DIM)
                    .and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]))
                    .ok_or("action message needs a: [main, side]")?;
                Ok(Some(ClientMessage::Action {
                    t: v.get("t").and_then(Value::as_u64),
                    a,
                }))
            }
            "takeover" => {
                let engage = v
                    .get("engage")
                    .and_then(Value::as_bool)
                    .ok_or("takeover message needs engage: bool")?;
                Ok(Some(ClientMessage::Takeover { engage }))
            }
            _ => Ok(None),
        }
    }
}

pub fn bind<A: ToSocketAddrs + std::fmt::Debug>(addr: A) -> Result<TcpListener> {
    TcpListener::bind(&addr).map_err(|e| Error::Session(format!("cannot listen on {addr:?}: {e}")))
}

enum Inbound {
    Message(ClientMessage),
    Disconnected,
}

/// Runs one session: waits for a websocket client, then plays episodes
/// until `max_episodes` or the client disconnects. Static files under
/// `static_dir` are served on the same port throughout. Human-controlled
/// transitions in intervene mode are also sent to `interventions`.
pub fn serve_session(
    listener: TcpListener,
    config: &SessionConfig,
    agent: Option<NetworkParams>,
    interventions: Option<Sender<Transition>>,
) -> Result<SessionReport> {
    if config.mode != SessionMode::Demonstrate && agent.is_none() {
        return Err(Error::Config(format!("{} mode needs an agent checkpoint", config.mode.as_str())));
    }
    if !(config.pacing.hz() > 0.0) {
        return Err(Error::Config("session rate must be positive".into()));
    }
    let mut writer = match &config.record_path {
        Some(path) => {
            let metadata = DemoMetadata {
                source: Some(match config.mode {
                    SessionMode::Intervene => DemoSource::Intervention,
                    _ => DemoSource::Human,
                }),
                seed: Some(config.seed),
                episodes: config.max_episodes,
                timestamp: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .ok()
                    .map(|d| d.as_secs()),
            };
            Some(DemoWriter::create(path, &DemoHeader::new(config.env.as_str(), metadata))?)
        }
        None => None,
    };

    let stop = Arc::new(AtomicBool::new(false));
    let (ws_tx, ws_rx) = mpsc::channel::<TcpStream>();
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::Session(format!("listener setup failed: {e}")))?;
    let acceptor = {
        let stop = stop.clone();
        let static_dir = config.static_dir.clone();
        thread::spawn(move || accept_loop(listener, static_dir, ws_tx, stop))
    };

    let result = (|| {
        let stream = ws_rx
            .recv()
            .map_err(|_| Error::Session("listener closed before a client connected".into()))?;
        let client = stream.peer_addr().ok();
        let ws = tungstenite::accept(stream).map_err(|e| Error::Session(format!("websocket handshake failed: {e}")))?;
        let (out_tx, out_rx) = mpsc::channel::<Option<String>>();
        let (in_tx, in_rx) = mpsc::channel::<Inbound>();
        let network = thread::spawn(move || network_loop(ws, out_rx, in_tx));
        let mut stepper = Stepper {
            config,
            agent,
            interventions,
            out: out_tx,
            inbound: in_rx,
            connected: true,
            controller: match config.mode {
                SessionMode::Demonstrate => Controller::Human,
                _ => Controller::Agent,
            },
            held: Action::IDLE,
            report: SessionReport {
                client,
                ..Default::default()
            },
        };
        let outcome = stepper.run(writer.as_mut());
        let _ = stepper.out.send(None);
        let report = stepper.report;
        drop(stepper.out);
        let _ = network.join();
        outcome.map(|_| report)
    })();
    stop.store(true, Ordering::SeqCst);
    let _ = acceptor.join();
    if let Some(w) = writer.as_mut() {
        w.flush().map_err(|e| Error::io(config.record_path.as_deref().unwrap_or(Path::new("")), e))?;
    }
    result
}

fn accept_loop(listener: TcpListener, static_dir: Option<PathBuf>, ws_tx: Sender<TcpStream>, stop: Arc<AtomicBool>) {
    let mut handed_over = false;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
                match peek_request_head(&stream) {
                    Some(head) if is_websocket_upgrade(&head) => {
                        if handed_over {
                            debug!("rejecting second websocket client {peer}");
                            let _ = respond(stream, "409 Conflict", "text/plain", b"session busy\n");
                        } else {
                            let _ = stream.set_read_timeout(None);
                            handed_over = ws_tx.send(stream).is_ok();
                        }
                    }
                    Some(head) => serve_static(stream, &head, static_dir.as_deref()),
                    None => debug!("dropping connection from {peer} without a request"),
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

fn peek_request_head(stream: &TcpStream) -> Option<String> {
    let mut buf = [0u8; 8192];
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let n = stream.peek(&mut buf).ok()?;
        if n == 0 {
            return None;
        }
        let text = String::from_utf8_lossy(&buf[..n]);
        if let Some(end) = text.find("\r\n\r\n") {
            return Some(text[..end].to_string());
        }
        if n == buf.len() || Instant::now() > deadline {
            return None;
        }
        thread::sleep(Duration::from_millis(2));
    }
}

fn is_websocket_upgrade(head: &str) -> bool {
    head.lines().skip(1).any(|line| {
        line.split_once(':')
            .is_some_and(|(k, v)| k.trim().eq_ignore_ascii_case("upgrade") && v.trim().eq_ignore_ascii_case("websocket"))
    })
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

/// Maps a request target onto a file under `root`, refusing escapes.
pub fn resolve_static(root: &Path, target: &str) -> Option<PathBuf> {
    let path = target.split(['?', '#']).next()?;
    let rel = path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = root.join(rel);
    if full.is_dir() {
        Some(full.join("index.html"))
    } else {
        Some(full)
    }
}

fn serve_static(mut stream: TcpStream, head: &str, root: Option<&Path>) {
    // consume the request head so the client sees an orderly close
    let mut sink = vec![0u8; head.len() + 4];
    let _ = stream.read_exact(&mut sink);
    let mut parts = head.lines().next().unwrap_or("").split_whitespace();
    let (method, target) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
    if method != "GET" && method != "HEAD" {
        let _ = respond(stream, "405 Method Not Allowed", "text/plain", b"method not allowed\n");
        return;
    }
    let file = root.and_then(|r| resolve_static(r, target)).and_then(|p| Some((std::fs::read(&p).ok()?, p)));
    let _ = match file {
        Some((body, path)) if method == "GET" => respond(stream, "200 OK", content_type(&path), &body),
        Some((_, path)) => respond(stream, "200 OK", content_type(&path), b""),
        None => respond(stream, "404 Not Found", "text/plain", b"not found\n"),
    };
}

fn respond(mut stream: TcpStream, status: &str, ctype: &str, body: &[u8]) -> std::io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()
}

fn network_loop(mut ws: WebSocket<TcpStream>, out: Receiver<Option<String>>, inbound: Sender<Inbound>) {
    if ws.get_mut().set_read_timeout(Some(Duration::from_millis(2))).is_err() {
        let _ = inbound.send(Inbound::Disconnected);
        return;
    }
    loop {
        loop {
            match out.try_recv() {
                Ok(Some(text)) => {
                    if ws.send(Message::Text(text)).is_err() {
                        let _ = inbound.send(Inbound::Disconnected);
                        return;
                    }
                }
                Ok(None) | Err(mpsc::TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let deadline = Instant::now() + Duration::from_millis(500);
                    while Instant::now() < deadline {
                        match ws.read() {
                            Ok(_) => {}
                            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
                            Err(_) => break,
                        }
                    }
                    return;
                }
                Err(mpsc::TryRecvError::Empty) => break,
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match ClientMessage::parse(&text) {
                Ok(Some(msg)) => {
                    if inbound.send(Inbound::Message(msg)).is_err() {
                        return;
                    }
                }
                Ok(None) => warn!("ignoring unrecognized message: {text}"),
                Err(e) => warn!("ignoring message: {e}"),
            },
            Ok(Message::Close(_)) => {
                let _ = inbound.send(Inbound::Disconnected);
                // let tungstenite answer the close handshake
                let _ = ws.flush();
                return;
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if is_timeout(&e) => {}
            Err(e) => {
                debug!("websocket closed: {e}");
                let _ = inbound.send(Inbound::Disconnected);
                return;
            }
        }
    }
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut)
}

struct Stepper<'a> {
    config: &'a SessionConfig,
    agent: Option<NetworkParams>,
    interventions: Option<Sender<Transition>>,
    out: Sender<Option<String>>,
    inbound: Receiver<Inbound>,
    connected: bool,
    controller: Controller,
    held: Action,
    report: SessionReport,
}

impl Stepper<'_> {
    fn send(&mut self, msg: &ServerMessage) {
        let text = serde_json::to_string(msg).expect("server messages serialize");
        if self.out.send(Some(text)).is_err() {
            self.connected = false;
        }
    }

    fn handle(&mut self, msg: Inbound) {
        match msg {
            Inbound::Disconnected => self.connected = false,
            Inbound::Message(ClientMessage::Action { a, .. }) => {
                self.held = Action::new(a[0], a[1]).clamped();
            }
            Inbound::Message(ClientMessage::Takeover { engage }) => {
                if self.config.mode == SessionMode::Intervene {
                    self.controller = if engage { Controller::Human } else { Controller::Agent };
                } else {
                    warn!("ignoring takeover in {} mode", self.config.mode.as_str());
                }
            }
        }
    }

    /// Applies queued messages. In lockstep, stops once the human takes
    /// over so their queued actions are consumed one per step.
    fn drain(&mut self, lockstep: bool) {
        while !(lockstep && self.controller == Controller::Human) {
            match self.inbound.try_recv() {
                Ok(msg) => self.handle(msg),
                Err(_) => break,
            }
        }
    }

    /// Waits for the next `action` message, handling others on the way.
    /// Returns false if the client left first.
    fn await_action(&mut self) -> bool {
        loop {
            match self.inbound.recv_timeout(Duration::from_millis(100)) {
                Ok(Inbound::Message(ClientMessage::Action { a, .. })) => {
                    self.held = Action::new(a[0], a[1]).clamped();
                    return true;
                }
                Ok(other) => {
                    self.handle(other);
                    if !self.connected {
                        return false;
                    }
                    if self.controller == Controller::Agent {
                        return true;
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    self.connected = false;
                    return false;
                }
            }
        }
    }

    fn run<W: Write>(&mut self, mut writer: Option<&mut DemoWriter<W>>) -> Result<()> {
        let hz = self.config.pacing.hz();
        self.send(&ServerMessage::Hello {
            env_id: self.config.env.as_str().to_string(),
            obs_dim: OBS_DIM,
            action_dim: ACTION_DIM,
            mode: self.config.mode,
            hz,
        });
        let period = Duration::from_secs_f64(1.0 / hz);
        let mut env = self.config.env.make();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let record_source = match self.config.mode {
            SessionMode::Intervene => DemoSource::Intervention,
            _ => DemoSource::Human,
        };
        let mut next_tick = Instant::now();

        while self.connected && self.config.max_episodes.is_none_or(|m| self.report.episodes.len() < m) {
            let mut obs = env.reset(&mut rng).observation();
            let mut t: u32 = 0;
            let mut total = 0.0;
            let mut human_steps = 0;
            let mut segment: Option<Trajectory> = None;
            let mut recorded = false;
            let mut finished = false;

            while self.connected {
                next_tick += period;
                let now = Instant::now();
                if next_tick > now {
                    thread::sleep(next_tick - now);
                } else {
                    next_tick = now;
                }
                let lockstep = matches!(self.config.pacing, Pacing::Lockstep { .. });
                self.drain(lockstep);
                if lockstep && self.controller == Controller::Human {
                    if !self.await_action() {
                        break;
                    }
                    next_tick = Instant::now();
                }
                if !self.connected {
                    break;
                }
                let controller = self.controller;
                let action = match controller {
                    Controller::Human => self.held,
                    Controller::Agent => {
                        let actor = self.agent.as_ref().expect("checked at startup");
                        crate::lander::Action::from_slice(&actor.forward(&obs)?)?.clamped()
                    }
                };
                let step = env.step(action)?;
                let next = step.next_state.observation();
                total += step.reward;
                self.send(&ServerMessage::Frame {
                    t,
                    obs: next,
                    action_applied: action.to_array(),
                    reward: step.reward,
                    done: step.done,
                    reason: step.reason,
                    mode: self.config.mode,
                    controller,
                });
                if controller == Controller::Human && self.config.mode != SessionMode::Watch {
                    let tr = Transition {
                        state: obs,
                        action: action.to_array(),
                        reward: step.reward,
                        next_state: next,
                        done: step.done,
                        truncated: step.reason == TerminationReason::TimeLimit,
                        source: Source::Expert,
                    };
                    segment
                        .get_or_insert_with(|| Trajectory {
                            transitions: Vec::new(),
                            source: record_source,
                            start_step: t,
                            seed: Some(self.config.seed),
                            timestamp: None,
                        })
                        .transitions
                        .push(tr);
                    if self.config.mode == SessionMode::Intervene {
                        if let Some(q) = &self.interventions {
                            if q.send(tr).is_err() {
                                warn!("intervention queue closed; transitions are only recorded to file");
                                self.interventions = None;
                            }
                        }
                    }
                    human_steps += 1;
                    recorded = true;
                } else if let Some(done_segment) = segment.take() {
                    self.commit(done_segment, writer.as_deref_mut())?;
                }
                t += 1;
                obs = next;
                if step.done {
                    finished = true;
                    break;
                }
            }
            if let Some(seg) = segment.take() {
                self.commit(seg, writer.as_deref_mut())?;
            }
            if finished {
                self.send(&ServerMessage::EpisodeEnd {
                    episode_return: total,
                    steps: t,
                    recorded,
                });
            }
            if t > 0 || finished {
                self.report.episodes.push(EpisodeSummary {
                    episode_return: total,
                    steps: t,
                    human_steps,
                    truncated: !finished,
                });
            }
        }
        Ok(())
    }

    fn commit<W: Write>(&mut self, traj: Trajectory, writer: Option<&mut DemoWriter<W>>) -> Result<()> {
        if let Some(w) = writer {
            let path = self.config.record_path.as_deref().unwrap_or(Path::new(""));
            w.write_trajectory(&traj).map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        self.report.recorded.push(traj);
        Ok(())
    }
}
