//! Latency injection: every message is held for a fixed delay plus an
//! optional seeded jitter, without reordering messages of one topic.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BusError;

/// Slack when comparing delivery times against the caller's clock, so a
/// message due at exactly `now` is not held back by rounding.
const DUE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    /// Seconds.
    pub delay: f64,
    /// Upper bound of the extra uniform delay, seconds.
    pub jitter: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            delay: 0.5,
            jitter: 0.0,
        }
    }
}

impl LatencyConfig {
    pub fn validate(&self) -> Result<(), BusError> {
        let bad = |m: &str| Err(BusError::Latency(m.to_string()));
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return bad("delay must be >= 0");
        }
        if !(self.jitter >= 0.0) {
            return bad("jitter must be >= 0");
        }
        if self.jitter > 0.0 && self.jitter >= self.delay {
            return bad("jitter must be zero or smaller than delay");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery<T> {
    pub topic: String,
    pub sent_at: f64,
    pub deliver_at: f64,
    pub item: T,
}

#[derive(Debug)]
pub struct LatencyQueue<T> {
    cfg: LatencyConfig,
    rng: ChaCha8Rng,
    pending: Vec<(u64, Delivery<T>)>,
    next_order: u64,
    /// Latest delivery time handed out per topic.
    last_due: HashMap<String, f64>,
}

impl<T> LatencyQueue<T> {
    pub fn new(cfg: LatencyConfig, seed: u64) -> Result<Self, BusError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: Vec::new(),
            next_order: 0,
            last_due: HashMap::new(),
        })
    }

    pub fn config(&self) -> &LatencyConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Queues `item` sent at `now`; returns its delivery time.
    pub fn enqueue(&mut self, topic: &str, item: T, now: f64) -> f64 {
        let jitter = self.cfg.jitter * self.rng.random::<f64>();
        let mut due = now + self.cfg.delay + jitter;
        let last = self.last_due.entry(topic.to_string()).or_insert(f64::NEG_INFINITY);
        // Never overtake an earlier message on the same topic.
        due = due.max(*last);
        *last = due;
        self.pending.push((
            self.next_order,
            Delivery {
                topic: topic.to_string(),
                sent_at: now,
                deliver_at: due,
                item,
            },
        ));
        self.next_order += 1;
        due
    }

    /// Removes and returns every message due by `now`, ordered by delivery
    /// time and then by send order.
    pub fn dequeue(&mut self, now: f64) -> Vec<Delivery<T>> {
        let (mut due, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|(_, d)| d.deliver_at <= now + DUE_EPSILON);
        self.pending = keep;
        due.sort_by(|(oa, a), (ob, b)| a.deliver_at.total_cmp(&b.deliver_at).then(oa.cmp(ob)));
        due.into_iter().map(|(_, d)| d).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn held_for_the_delay() {
        let mut q = LatencyQueue::new(LatencyConfig::default(), 0).unwrap();
        assert_eq!(q.enqueue("/t", 1, 0.0), 0.5);
        assert!(q.dequeue(0.499).is_empty());
        let out = q.dequeue(0.5);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].item, 1);
        assert!(q.is_empty());
    }

    #[test]
    fn zero_delay_delivers_next_call() {
        let cfg = LatencyConfig {
            delay: 0.0,
            jitter: 0.0,
        };
        let mut q = LatencyQueue::new(cfg, 0).unwrap();
        q.enqueue("/t", "a", 1.0);
        assert_eq!(q.dequeue(1.0)[0].item, "a");
    }

    #[test]
    fn fifo_per_topic_under_jitter() {
        let cfg = LatencyConfig {
            delay: 0.5,
            jitter: 0.2,
        };
        let mut q = LatencyQueue::new(cfg, 9).unwrap();
        for i in 0..200 {
            q.enqueue(if i % 2 == 0 { "/a" } else { "/b" }, i, i as f64 * 0.001);
        }
        let out = q.dequeue(10.0);
        for topic in ["/a", "/b"] {
            let ids: Vec<_> = out.iter().filter(|d| d.topic == topic).map(|d| d.item).collect();
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
        }
        for d in &out {
            let lag = d.deliver_at - d.sent_at;
            assert!((0.5..=0.7).contains(&lag), "{lag}");
        }
    }

    #[test]
    fn config_validation() {
        let bad = LatencyConfig {
            delay: 0.1,
            jitter: 0.2,
        };
        assert!(bad.validate().is_err());
        assert!(LatencyConfig { delay: -1.0, jitter: 0.0 }.validate().is_err());
    }
}
