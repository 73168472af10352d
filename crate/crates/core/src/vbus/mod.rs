//! Virtual message bus with latest-value semantics.
//!
//! Every publish gets the next per-kind sequence number and a delivery time
//! `publish_time + latency`. A poll returns the highest-sequence frame of a
//! kind whose delivery time has passed. Drops are decided by one uniform
//! draw per published frame, from a ChaCha8 stream seeded with `rng_seed`
//! and selected by the kind code, so the drop pattern of each kind only
//! depends on how many frames of that kind were published.
//!
//! The handle is cheap to clone and can be shared between threads; each
//! publish and poll is atomic.

mod frame;
mod log;

pub use frame::{DecodeError, DiagnosticPayload, Frame, FrameKind, Payload};
pub use log::{encode_frame, read_log, write_log, LogError, LOG_MAGIC, LOG_VERSION};

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusMode {
    /// Stepped by a single thread.
    Lockstep,
    /// Publish and poll from concurrently running actors.
    Async,
}

#[derive(Debug, Error, PartialEq)]
pub enum BusError {
    #[error("invalid bus configuration: {0}")]
    Config(String),
    #[error("{kind} frame published at {time} after one at {previous}")]
    TimeReversal { kind: &'static str, time: f64, previous: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusConfig {
    pub mode: BusMode,
    /// Publish period per kind, indexed by `FrameKind::index`, s.
    pub periods: [f64; 6],
    pub latency: f64,
    pub drop_probability: f64,
    pub rng_seed: u64,
    /// Keep every published frame for the binary log.
    pub record: bool,
}

impl BusConfig {
    /// Ideal bus: every kind at `dt` except the lead plan at `10·dt`.
    pub fn ideal(dt: f64) -> Self {
        let mut periods = [dt; 6];
        periods[FrameKind::LeadPlan.index()] = 10.0 * dt;
        Self {
            mode: BusMode::Lockstep,
            periods,
            latency: 0.0,
            drop_probability: 0.0,
            rng_seed: 0,
            record: false,
        }
    }

    pub fn period(&self, kind: FrameKind) -> f64 {
        self.periods[kind.index()]
    }

    pub fn validate(&self) -> Result<(), BusError> {
        let fail = |s: String| Err(BusError::Config(s));
        for kind in FrameKind::ALL {
            let p = self.period(kind);
            if !(p.is_finite() && p > 0.0) {
                return fail(format!("{} period must be > 0, got {p}", kind.as_str()));
            }
        }
        if !(self.latency.is_finite() && self.latency >= 0.0) {
            return fail(format!("latency must be >= 0, got {}", self.latency));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return fail(format!("drop probability must lie in [0, 1], got {}", self.drop_probability));
        }
        Ok(())
    }

    /// The measurement frames the controller consumes, and the control frame
    /// the plant consumes, must be published at least as often as they are
    /// consumed.
    pub fn validate_rates(&self, controller_period: f64, plant_period: f64) -> Result<(), BusError> {
        let tol = 1e-12;
        for kind in [FrameKind::VehicleState, FrameKind::Radar, FrameKind::Spat] {
            if self.period(kind) > controller_period + tol {
                return Err(BusError::Config(format!(
                    "{} period {} exceeds the controller period {controller_period}",
                    kind.as_str(),
                    self.period(kind)
                )));
            }
        }
        if self.period(FrameKind::Control) > plant_period + tol {
            return Err(BusError::Config(format!(
                "control period {} exceeds the plant period {plant_period}",
                self.period(FrameKind::Control)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishReceipt {
    pub sequence: u64,
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polled {
    pub frame: Frame,
    /// `now - publish_time`.
    pub staleness: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub published: u64,
    pub dropped: u64,
}

struct Channel {
    next_sequence: u64,
    last_publish: f64,
    rng: ChaCha8Rng,
    /// Undropped frames in sequence order with their delivery times.
    queue: VecDeque<(f64, Frame)>,
    stats: ChannelStats,
}

struct Inner {
    channels: Vec<Channel>,
    log: Vec<Frame>,
}

/// Drop decision stream for one kind.
pub fn drop_stream(seed: u64, kind: FrameKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.code() as u64);
    rng
}

#[derive(Clone)]
pub struct Bus {
    config: Arc<BusConfig>,
    inner: Arc<Mutex<Inner>>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Bus {
    pub fn new(config: BusConfig) -> Result<Self, BusError> {
        config.validate()?;
        let channels = FrameKind::ALL
            .iter()
            .map(|&k| Channel {
                next_sequence: 0,
                last_publish: f64::NEG_INFINITY,
                rng: drop_stream(config.rng_seed, k),
                queue: VecDeque::new(),
                stats: ChannelStats::default(),
            })
            .collect();
        Ok(Self {
            config: Arc::new(config),
            inner: Arc::new(Mutex::new(Inner { channels, log: Vec::new() })),
        })
    }

    pub fn config(&self) -> &BusConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn publish(&self, payload: Payload, publish_time: f64) -> Result<PublishReceipt, BusError> {
        let kind = payload.kind();
        let mut inner = self.lock();
        let ch = &mut inner.channels[kind.index()];
        if publish_time < ch.last_publish {
            return Err(BusError::TimeReversal {
                kind: kind.as_str(),
                time: publish_time,
                previous: ch.last_publish,
            });
        }
        ch.last_publish = publish_time;
        let sequence = ch.next_sequence;
        ch.next_sequence += 1;
        ch.stats.published += 1;
        let dropped = ch.rng.random::<f64>() < self.config.drop_probability;
        let frame = Frame { payload, publish_time, sequence };
        if dropped {
            ch.stats.dropped += 1;
        } else {
            ch.queue.push_back((publish_time + self.config.latency, frame.clone()));
        }
        if self.config.record {
            inner.log.push(frame);
        }
        Ok(PublishReceipt { sequence, dropped })
    }

    /// Latest frame of `kind` delivered by `now`. Older frames are
    /// discarded, so polls of one kind should use nondecreasing `now`.
    pub fn poll_latest(&self, kind: FrameKind, now: f64) -> Option<Polled> {
        let mut inner = self.lock();
        let queue = &mut inner.channels[kind.index()].queue;
        let delivered = queue.iter().rposition(|(t, _)| *t <= now)?;
        queue.drain(..delivered);
        let frame = queue[0].1.clone();
        Some(Polled { staleness: now - frame.publish_time, frame })
    }

    pub fn stats(&self, kind: FrameKind) -> ChannelStats {
        self.lock().channels[kind.index()].stats
    }

    /// Every frame published so far (when recording), in publish order.
    pub fn recorded(&self) -> Vec<Frame> {
        self.lock().log.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::ControlInput;

    fn control(f_t: f64) -> Payload {
        Payload::Control(ControlInput { f_t, f_b: 0.0 })
    }

    #[test]
    fn ideal_bus_is_immediate() {
        let bus = Bus::new(BusConfig::ideal(0.1)).unwrap();
        assert!(bus.poll_latest(FrameKind::Control, 0.0).is_none());
        bus.publish(control(1.0), 0.0).unwrap();
        let got = bus.poll_latest(FrameKind::Control, 0.0).unwrap();
        assert_eq!(got.frame.sequence, 0);
        assert_eq!(got.staleness, 0.0);
    }

    #[test]
    fn latency_delays_visibility() {
        let bus = Bus::new(BusConfig { latency: 0.05, ..BusConfig::ideal(0.1) }).unwrap();
        bus.publish(control(1.0), 1.0).unwrap();
        assert!(bus.poll_latest(FrameKind::Control, 1.0).is_none());
        assert!(bus.poll_latest(FrameKind::Control, 1.049).is_none());
        assert!(bus.poll_latest(FrameKind::Control, 1.05).is_some());
    }

    #[test]
    fn total_loss() {
        let bus = Bus::new(BusConfig { drop_probability: 1.0, ..BusConfig::ideal(0.1) }).unwrap();
        for i in 0..20 {
            assert!(bus.publish(control(1.0), i as f64).unwrap().dropped);
        }
        assert!(bus.poll_latest(FrameKind::Control, 100.0).is_none());
    }

    #[test]
    fn latest_wins() {
        let bus = Bus::new(BusConfig::ideal(0.1)).unwrap();
        bus.publish(control(1.0), 0.0).unwrap();
        bus.publish(control(2.0), 0.1).unwrap();
        let got = bus.poll_latest(FrameKind::Control, 0.2).unwrap();
        assert_eq!(got.frame.sequence, 1);
        assert_eq!(got.frame.payload, control(2.0));
    }

    #[test]
    fn rejects_time_reversal_and_bad_config() {
        let bus = Bus::new(BusConfig::ideal(0.1)).unwrap();
        bus.publish(control(1.0), 1.0).unwrap();
        assert!(bus.publish(control(1.0), 0.5).is_err());
        assert!(Bus::new(BusConfig { latency: -1.0, ..BusConfig::ideal(0.1) }).is_err());
        let slow = BusConfig { periods: [0.2; 6], ..BusConfig::ideal(0.1) };
        assert!(slow.validate_rates(0.1, 0.1).is_err());
        assert!(BusConfig::ideal(0.1).validate_rates(0.1, 0.1).is_ok());
    }
}
