//! Live session server. One port accepts both plain TCP bus connections
//! and websocket upgrades; both carry the same length-prefixed frames (one
//! frame per binary websocket message).
//!
//! The simulation runs on its own thread and talks to the connections only
//! through the [`Hub`]: inbound `/raw_input` and `/gripper_cmd` envelopes
//! are published into it, and outbound snapshots and events come back out.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use anyhow::Context;
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::broadcast;
use tokio_tungstenite::tungstenite::Message;
use tracing::{debug, info, warn};

use crate::bus::schema::{
    self, EventMsg, GripperCmd, Handshake, JointStates, Phase, RawInput, Role, TargetPose,
    WorldSnapshot, PROTOCOL_VERSION,
};
use crate::bus::{
    bridge_translate, encode_frame, standard_rules, BridgeRule, BusError, Dialect, Envelope,
    FrameReader, Hub, SeqCounter, EVENTS, GRIPPER_CMD, HANDSHAKE, JOINT_STATES, RAW_INPUT,
    TARGET_POSE, WORLD_STATE,
};
use crate::control_io::RawPoseSample;
use crate::metrics::{compute_session_stats, SessionLog};
use crate::scenario::{Scenario, INPUT_HZ, PUBLISH_HZ};
use crate::session::Session;

/// Publisher name of everything the server sends.
pub const SERVER_PUBLISHER: &str = "twin";

const OUTBOUND_TOPICS: [&str; 4] = [WORLD_STATE, JOINT_STATES, TARGET_POSE, EVENTS];
const BROADCAST_CAPACITY: usize = 4096;
const SNIFF_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy)]
pub struct ServeOptions {
    /// Simulated seconds per wall-clock second.
    pub speed: f64,
    /// Seed for latency jitter; the scenario's seed when `None`.
    pub seed: Option<u64>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            speed: 1.0,
            seed: None,
        }
    }
}

/// A running server; dropping it does not stop it, call [`shutdown`].
///
/// [`shutdown`]: ServerHandle::shutdown
pub struct ServerHandle {
    pub local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    runtime: Option<tokio::runtime::Runtime>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_timeout(Duration::from_secs(1));
        }
    }

    /// Blocks until the session thread exits (it runs until shutdown).
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

struct Shared {
    hub: Hub,
    outbound: broadcast::Sender<Arc<Envelope>>,
    scenario: Scenario,
    rules: Vec<BridgeRule>,
    handshake_seq: AtomicU64,
    connection_ids: AtomicU64,
}

/// Binds `addr` and starts the session, returning once the listener is up.
pub fn spawn_server(scenario: Scenario, addr: &str, opts: ServeOptions) -> anyhow::Result<ServerHandle> {
    if !(opts.speed > 0.0 && opts.speed.is_finite()) {
        anyhow::bail!("speed must be > 0");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .thread_name("twinlink-net")
        .build()?;
    let listener = runtime
        .block_on(TcpListener::bind(addr))
        .with_context(|| format!("binding {addr}"))?;
    let local_addr = listener.local_addr()?;
    let session = Session::new(scenario.clone(), opts.seed.unwrap_or(scenario.seed))?;

    let (outbound, _) = broadcast::channel(BROADCAST_CAPACITY);
    let shared = Arc::new(Shared {
        hub: Hub::new(),
        outbound,
        scenario,
        rules: standard_rules(),
        handshake_seq: AtomicU64::new(0),
        connection_ids: AtomicU64::new(0),
    });
    let stop = Arc::new(AtomicBool::new(false));

    let inbound = shared.hub.subscribe(&[RAW_INPUT, GRIPPER_CMD]);
    let sim = {
        let (shared, stop) = (shared.clone(), stop.clone());
        std::thread::Builder::new()
            .name("twinlink-sim".into())
            .spawn(move || run_simulation(session, &shared, inbound, &stop, opts.speed))?
    };
    let forwarder = {
        let (shared, stop) = (shared.clone(), stop.clone());
        let sub = shared.hub.subscribe(&OUTBOUND_TOPICS);
        std::thread::Builder::new()
            .name("twinlink-fwd".into())
            .spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    if let Some(e) = sub.recv_timeout(Duration::from_millis(20)) {
                        // No connected receivers is fine.
                        let _ = shared.outbound.send(e);
                    }
                }
            })?
    };

    runtime.spawn(accept_loop(listener, shared));
    info!(%local_addr, "serving");
    Ok(ServerHandle {
        local_addr,
        stop,
        threads: vec![sim, forwarder],
        runtime: Some(runtime),
    })
}

async fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let shared = shared.clone();
                tokio::spawn(async move {
                    let id = shared.connection_ids.fetch_add(1, Ordering::SeqCst);
                    debug!(%peer, id, "connection opened");
                    if let Err(e) = handle_connection(stream, &shared).await {
                        debug!(%peer, id, "connection closed: {e:#}");
                    }
                });
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

/// Waits for the first four bytes without consuming them.
async fn sniff(stream: &TcpStream) -> anyhow::Result<[u8; 4]> {
    let deadline = Instant::now() + SNIFF_TIMEOUT;
    let mut head = [0u8; 4];
    loop {
        let n = stream.peek(&mut head).await?;
        if n == 0 {
            anyhow::bail!("closed before sending anything");
        }
        if n == 4 {
            return Ok(head);
        }
        if Instant::now() > deadline {
            anyhow::bail!("timed out waiting for the first frame");
        }
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
}

async fn handle_connection(stream: TcpStream, shared: &Shared) -> anyhow::Result<()> {
    stream.set_nodelay(true)?;
    let head = sniff(&stream).await?;
    let mut conn = Connection::new(shared);
    let result = if &head == b"GET " {
        serve_websocket(stream, &mut conn).await
    } else {
        serve_tcp(stream, &mut conn).await
    };
    for p in &conn.publishers {
        shared.hub.forget_publisher(p);
    }
    result
}

/// Per-connection protocol state.
struct Connection<'a> {
    shared: &'a Shared,
    reader: FrameReader,
    /// Dialect the client asked to receive; `None` until its handshake.
    dialect: Option<Dialect>,
    publishers: Vec<String>,
    /// Subscribed at handshake time so no backlog builds up before it.
    outbound: Option<broadcast::Receiver<Arc<Envelope>>>,
}

impl<'a> Connection<'a> {
    fn new(shared: &'a Shared) -> Self {
        Self {
            shared,
            reader: FrameReader::new(),
            dialect: None,
            publishers: Vec::new(),
            outbound: None,
        }
    }

    /// Feeds received bytes; returns frames to send back.
    fn receive(&mut self, bytes: &[u8]) -> anyhow::Result<Vec<Vec<u8>>> {
        self.reader.push(bytes);
        let mut replies = Vec::new();
        while let Some(frame) = self.reader.next_frame() {
            match frame {
                Ok(env) => match self.handle(env) {
                    Ok(Some(reply)) => replies.push(reply),
                    Ok(None) => {}
                    Err(e) => warn!("rejected client envelope: {e}"),
                },
                Err(BusError::FrameTooLarge(n)) => anyhow::bail!("frame of {n} bytes"),
                Err(e) => warn!("rejected client frame: {e}"),
            }
        }
        Ok(replies)
    }

    fn handle(&mut self, env: Envelope) -> Result<Option<Vec<u8>>, BusError> {
        if env.topic == HANDSHAKE {
            let hs: Handshake = schema::decode(&env)?;
            if hs.role != Role::Client {
                return Err(BusError::Schema {
                    topic: env.topic,
                    message: "expected a client handshake".into(),
                });
            }
            self.dialect = Some(hs.dialect);
            if self.outbound.is_none() {
                self.outbound = Some(self.shared.outbound.subscribe());
            }
            let reply = Handshake {
                protocol: PROTOCOL_VERSION,
                role: Role::Server,
                dialect: Dialect::B,
                scene: Some(self.shared.scenario.scene()),
            };
            let seq = self.shared.handshake_seq.fetch_add(1, Ordering::SeqCst) + 1;
            let env = Envelope::new(HANDSHAKE, SERVER_PUBLISHER, seq, 0.0, &reply);
            return self.encode(&env).map(Some);
        }
        if self.dialect.is_none() {
            return Err(BusError::Schema {
                topic: env.topic,
                message: "handshake required first".into(),
            });
        }
        if env.topic != RAW_INPUT && env.topic != GRIPPER_CMD {
            return Err(BusError::Schema {
                topic: env.topic,
                message: "clients may only publish /raw_input and /gripper_cmd".into(),
            });
        }
        if !self.publishers.contains(&env.publisher) {
            self.publishers.push(env.publisher.clone());
        }
        self.shared.hub.publish(env).map(|_| None)
    }

    fn encode(&self, env: &Envelope) -> Result<Vec<u8>, BusError> {
        match self.dialect {
            Some(Dialect::A) => encode_frame(&bridge_translate(env, &self.shared.rules)?),
            _ => encode_frame(env),
        }
    }

    /// Next outbound frame once the handshake is done. Lagging behind the
    /// broadcast drops the oldest messages.
    async fn next_outbound(&mut self) -> anyhow::Result<Vec<u8>> {
        loop {
            let Some(rx) = self.outbound.as_mut() else {
                return std::future::pending().await;
            };
            match rx.recv().await {
                Ok(env) => return Ok(self.encode(&env)?),
                Err(broadcast::error::RecvError::Lagged(n)) => warn!("client lagging, skipped {n}"),
                Err(broadcast::error::RecvError::Closed) => anyhow::bail!("server stopped"),
            }
        }
    }
}

async fn serve_tcp(stream: TcpStream, conn: &mut Connection<'_>) -> anyhow::Result<()> {
    let (mut rx, mut tx) = stream.into_split();
    let mut buf = vec![0u8; 16 * 1024];
    loop {
        tokio::select! {
            n = rx.read(&mut buf) => {
                let n = n?;
                if n == 0 {
                    return Ok(());
                }
                for reply in conn.receive(&buf[..n])? {
                    tx.write_all(&reply).await?;
                }
            }
            frame = conn.next_outbound() => tx.write_all(&frame?).await?,
        }
    }
}

async fn serve_websocket(stream: TcpStream, conn: &mut Connection<'_>) -> anyhow::Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut tx, mut rx) = ws.split();
    loop {
        tokio::select! {
            msg = rx.next() => {
                let Some(msg) = msg else { return Ok(()) };
                match msg? {
                    Message::Binary(bytes) => {
                        for reply in conn.receive(&bytes)? {
                            tx.send(Message::binary(reply)).await?;
                        }
                    }
                    Message::Close(_) => return Ok(()),
                    Message::Text(_) => warn!("text websocket message ignored; frames are binary"),
                    _ => {}
                }
            }
            frame = conn.next_outbound() => tx.send(Message::binary(frame?)).await?,
        }
    }
}

/// Session clock and phase bookkeeping for the simulation thread.
struct PhaseClock {
    phase: Phase,
    started: f64,
    training: f64,
    task: f64,
    /// Index of the `Reset` that opened the task phase.
    task_first_event: usize,
}

impl PhaseClock {
    fn duration(&self) -> f64 {
        match self.phase {
            Phase::Training => self.training,
            Phase::Task | Phase::Finished => self.task,
        }
    }
}

fn run_simulation(
    mut session: Session,
    shared: &Shared,
    inbound: crate::bus::Subscription,
    stop: &AtomicBool,
    speed: f64,
) {
    let dt = session.dt();
    let input_every = ((1.0 / INPUT_HZ) / dt).round().max(1.0) as u64;
    let publish_every = ((1.0 / PUBLISH_HZ) / dt).round().max(1.0) as u64;
    let mut seq = SeqCounter::default();
    let mut clock = PhaseClock {
        phase: Phase::Training,
        started: 0.0,
        training: session.scenario().task.training_duration,
        task: session.scenario().task.session_duration,
        task_first_event: 0,
    };
    let start = Instant::now();
    let mut publish = |session: &Session, topic: &str, payload: &dyn erased::Payload| {
        let env = payload.envelope(topic, seq.next(topic), session.time());
        if let Err(e) = shared.hub.publish(env) {
            warn!("dropping own {topic} message: {e}");
        }
    };

    let mut tick: u64 = 0;
    while !stop.load(Ordering::SeqCst) {
        let due = start + Duration::from_secs_f64(tick as f64 * dt / speed);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        if clock.phase != Phase::Finished {
            if tick % input_every == 0 {
                ingest(&mut session, &inbound);
            }
            let events = match session.step() {
                Ok(ev) => ev,
                Err(e) => {
                    warn!("simulation step failed: {e:#}");
                    Vec::new()
                }
            };
            for e in &events {
                publish(&session, EVENTS, &EventMsg::task(e, clock.phase));
            }
            advance_phase(&mut session, &mut clock, &mut publish);
        } else {
            // Keep the queue from growing while nobody consumes it.
            inbound.drain();
        }
        if tick % publish_every == 0 {
            publish_state(&session, &clock, &mut publish);
        }
        tick += 1;
    }
}

fn advance_phase(
    session: &mut Session,
    clock: &mut PhaseClock,
    publish: &mut impl FnMut(&Session, &str, &dyn erased::Payload),
) {
    let elapsed = session.time() - clock.started;
    match clock.phase {
        Phase::Training if elapsed >= clock.training - 1e-9 => {
            let reset = session.finish();
            clock.phase = Phase::Task;
            clock.started = session.time();
            clock.task_first_event = session.events().len() - 1;
            info!(t = session.time(), "training over, task started");
            publish(session, EVENTS, &EventMsg::task(&reset, Phase::Task));
        }
        Phase::Task if elapsed >= clock.task - 1e-9 => {
            let reset = session.finish();
            publish(session, EVENTS, &EventMsg::task(&reset, Phase::Task));
            let log = SessionLog {
                events: session.events()[clock.task_first_event..].to_vec(),
                session_duration: clock.task,
            };
            clock.phase = Phase::Finished;
            match compute_session_stats(&log) {
                Ok(stats) => {
                    info!(towers = stats.towers, picks = stats.picks, "session finished");
                    publish(
                        session,
                        EVENTS,
                        &EventMsg::session_stats(stats, session.time(), Phase::Finished),
                    );
                }
                Err(e) => warn!("session statistics unavailable: {e}"),
            }
        }
        _ => {}
    }
}

fn ingest(session: &mut Session, inbound: &crate::bus::Subscription) {
    let mut latest: Option<RawInput> = None;
    for env in inbound.drain() {
        match env.topic.as_str() {
            RAW_INPUT => match schema::decode::<RawInput>(&env) {
                Ok(input) if input.calibrate => {
                    session.recalibrate(&sample(session, &input));
                    latest = Some(input);
                }
                Ok(input) => latest = Some(input),
                Err(e) => warn!("{e}"),
            },
            GRIPPER_CMD => match schema::decode::<GripperCmd>(&env) {
                Ok(cmd) => session.submit_gripper(cmd.aperture_fraction),
                Err(e) => warn!("{e}"),
            },
            _ => {}
        }
    }
    // Input is sampled at the ingestion rate; older samples in the same
    // window are superseded.
    if let Some(input) = latest {
        session.submit_sample(&sample(session, &input));
    }
}

fn sample(session: &Session, input: &RawInput) -> RawPoseSample {
    RawPoseSample {
        device_pose: input.device_pose(),
        grasp: input.grasp,
        timestamp: session.time(),
    }
}

fn publish_state(
    session: &Session,
    clock: &PhaseClock,
    publish: &mut impl FnMut(&Session, &str, &dyn erased::Payload),
) {
    let elapsed = if clock.phase == Phase::Finished {
        clock.task
    } else {
        session.time() - clock.started
    };
    let snapshot = WorldSnapshot::from_world(session.world(), clock.phase, elapsed, clock.duration());
    publish(session, WORLD_STATE, &snapshot);
    let arm = &session.scenario().arm;
    let joints = session.joints();
    publish(
        session,
        JOINT_STATES,
        &JointStates {
            name: arm.joint_names(),
            position_rad: joints.positions.clone(),
            velocity_rad_s: joints.velocities.clone(),
        },
    );
    publish(session, TARGET_POSE, &TargetPose::from(session.active_target()));
}

/// Object-safe wrapper so one publish closure takes every payload type.
mod erased {
    use crate::bus::Envelope;

    pub trait Payload {
        fn envelope(&self, topic: &str, seq: u64, time: f64) -> Envelope;
    }

    impl<T: serde::Serialize> Payload for T {
        fn envelope(&self, topic: &str, seq: u64, time: f64) -> Envelope {
            Envelope::new(topic, super::SERVER_PUBLISHER, seq, time, self)
        }
    }
}

/// Runs the server until Ctrl-C.
pub fn run_server(scenario: Scenario, addr: &str, opts: ServeOptions) -> anyhow::Result<()> {
    let handle = spawn_server(scenario, addr, opts)?;
    println!("listening on {}", handle.local_addr);
    let (tx, rx) = std::sync::mpsc::channel();
    handle
        .runtime
        .as_ref()
        .expect("runtime present")
        .spawn(async move {
            let _ = tokio::signal::ctrl_c().await;
            let _ = tx.send(());
        });
    let _ = rx.recv();
    info!("shutting down");
    handle.shutdown();
    Ok(())
}
