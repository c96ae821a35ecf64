//! Blocking bus client over plain TCP, for tools, tests and examples.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail};
use serde::Serialize;

use crate::bus::schema::{self, Handshake, Role, Scene, PROTOCOL_VERSION};
use crate::bus::{encode_frame, Dialect, Envelope, FrameReader, SeqCounter, HANDSHAKE};

struct Link {
    stream: TcpStream,
    reader: FrameReader,
}

impl Link {
    fn send(&mut self, env: &Envelope) -> anyhow::Result<()> {
        self.stream.write_all(&encode_frame(env)?)?;
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> anyhow::Result<Envelope> {
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 16 * 1024];
        loop {
            if let Some(frame) = self.reader.next_frame() {
                return Ok(frame?);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                bail!("timed out waiting for a frame");
            }
            self.stream.set_read_timeout(Some(left))?;
            let n = self.stream.read(&mut buf)?;
            if n == 0 {
                bail!("server closed the connection");
            }
            self.reader.push(&buf[..n]);
        }
    }
}

pub struct BusClient {
    link: Link,
    name: String,
    seq: SeqCounter,
    /// Scenario constants from the server's handshake.
    pub scene: Scene,
}

impl BusClient {
    /// Connects and exchanges handshakes; `dialect` is what the server will
    /// send to this client.
    pub fn connect(addr: &str, name: &str, dialect: Dialect) -> anyhow::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut link = Link {
            stream,
            reader: FrameReader::new(),
        };
        let mut seq = SeqCounter::default();
        let hello = Handshake {
            protocol: PROTOCOL_VERSION,
            role: Role::Client,
            dialect,
            scene: None,
        };
        link.send(&Envelope::new(HANDSHAKE, name, seq.next(HANDSHAKE), 0.0, &hello))?;
        let deadline = Instant::now() + Duration::from_secs(5);
        let reply = loop {
            let env = link.recv(deadline.saturating_duration_since(Instant::now()))?;
            if env.topic == HANDSHAKE {
                break env;
            }
        };
        let hs: Handshake = schema::decode(&reply)?;
        Ok(Self {
            link,
            name: name.to_string(),
            seq,
            scene: hs.scene.ok_or_else(|| anyhow!("server handshake without scene"))?,
        })
    }

    pub fn send_envelope(&mut self, env: &Envelope) -> anyhow::Result<()> {
        self.link.send(env)
    }

    /// Writes bytes as they are, framed or not.
    pub fn send_bytes(&mut self, bytes: &[u8]) -> anyhow::Result<()> {
        self.link.stream.write_all(bytes)?;
        Ok(())
    }

    /// Publishes a dialect-B payload with the next sequence number.
    pub fn publish<T: Serialize>(&mut self, topic: &str, time: f64, payload: &T) -> anyhow::Result<()> {
        let env = Envelope::new(topic, &self.name, self.seq.next(topic), time, payload);
        self.link.send(&env)
    }

    /// Next envelope, or an error after `timeout`.
    pub fn recv(&mut self, timeout: Duration) -> anyhow::Result<Envelope> {
        self.link.recv(timeout)
    }

    /// Next envelope on `topic`, skipping others.
    pub fn recv_topic(&mut self, topic: &str, timeout: Duration) -> anyhow::Result<Envelope> {
        let deadline = Instant::now() + timeout;
        loop {
            let env = self.recv(deadline.saturating_duration_since(Instant::now()))?;
            if env.topic == topic {
                return Ok(env);
            }
        }
    }
}
