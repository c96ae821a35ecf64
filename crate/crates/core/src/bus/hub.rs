//! In-process publish/subscribe. Publishing never blocks: every subscriber
//! owns an unbounded channel, and envelopes are shared immutably.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::{schema, BusError, Envelope};

#[derive(Default)]
struct Inner {
    subscribers: Vec<(HashSet<String>, Sender<Arc<Envelope>>)>,
    last_seq: HashMap<(String, String), u64>,
}

#[derive(Default, Clone)]
pub struct Hub {
    inner: Arc<Mutex<Inner>>,
}

pub struct Subscription {
    rx: Receiver<Arc<Envelope>>,
}

impl Subscription {
    pub fn try_recv(&self) -> Option<Arc<Envelope>> {
        self.rx.try_recv().ok()
    }

    /// `None` on timeout or once the hub is gone.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Arc<Envelope>> {
        match self.rx.recv_timeout(timeout) {
            Ok(e) => Some(e),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }

    pub fn drain(&self) -> Vec<Arc<Envelope>> {
        self.rx.try_iter().collect()
    }
}

impl Hub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, topics: &[&str]) -> Subscription {
        let (tx, rx) = unbounded();
        let set = topics.iter().map(|t| t.to_string()).collect();
        self.inner.lock().expect("hub lock").subscribers.push((set, tx));
        Subscription { rx }
    }

    /// Validates and fans out an envelope. Returns the number of
    /// subscribers it reached.
    pub fn publish(&self, envelope: Envelope) -> Result<usize, BusError> {
        schema::validate(&envelope)?;
        let mut inner = self.inner.lock().expect("hub lock");
        let key = (envelope.publisher.clone(), envelope.topic.clone());
        if let Some(&last) = inner.last_seq.get(&key) {
            if envelope.seq <= last {
                return Err(BusError::SequenceRegression {
                    publisher: key.0,
                    topic: key.1,
                    seq: envelope.seq,
                    last,
                });
            }
        }
        inner.last_seq.insert(key, envelope.seq);
        let shared = Arc::new(envelope);
        let mut reached = 0;
        inner.subscribers.retain(|(topics, tx)| {
            if !topics.contains(&shared.topic) {
                return true;
            }
            let ok = tx.send(shared.clone()).is_ok();
            reached += ok as usize;
            ok
        });
        Ok(reached)
    }

    /// Drops sequence tracking for a publisher that went away, so a new
    /// endpoint with the same name can start again from any sequence.
    pub fn forget_publisher(&self, publisher: &str) {
        self.inner
            .lock()
            .expect("hub lock")
            .last_seq
            .retain(|(p, _), _| p != publisher);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{schema::GripperCmd, GRIPPER_CMD};

    fn cmd(seq: u64, publisher: &str) -> Envelope {
        Envelope::new(GRIPPER_CMD, publisher, seq, seq as f64, &GripperCmd { aperture_fraction: 0.5 })
    }

    #[test]
    fn fan_out_preserves_order() {
        let hub = Hub::new();
        let a = hub.subscribe(&[GRIPPER_CMD]);
        let b = hub.subscribe(&[GRIPPER_CMD]);
        let other = hub.subscribe(&["/events"]);
        for s in 1..=5 {
            assert_eq!(hub.publish(cmd(s, "p")).unwrap(), 2);
        }
        let seqs = |s: &Subscription| s.drain().iter().map(|e| e.seq).collect::<Vec<_>>();
        assert_eq!(seqs(&a), vec![1, 2, 3, 4, 5]);
        assert_eq!(seqs(&b), vec![1, 2, 3, 4, 5]);
        assert!(other.try_recv().is_none());
    }

    #[test]
    fn sequence_must_increase_per_publisher() {
        let hub = Hub::new();
        hub.publish(cmd(3, "p")).unwrap();
        hub.publish(cmd(1, "q")).unwrap();
        assert!(matches!(
            hub.publish(cmd(3, "p")),
            Err(BusError::SequenceRegression { .. })
        ));
        hub.forget_publisher("p");
        hub.publish(cmd(1, "p")).unwrap();
    }

    #[test]
    fn dropped_subscriber_is_pruned() {
        let hub = Hub::new();
        drop(hub.subscribe(&[GRIPPER_CMD]));
        assert_eq!(hub.publish(cmd(1, "p")).unwrap(), 0);
        assert!(hub.inner.lock().unwrap().subscribers.is_empty());
    }
}
