//! Session keys, the KDC, and level-synchronous propagation.
//!
//! Key material is an opaque 16-byte token; edges between a parent and its
//! children are assumed to be secure channels. Propagation is timed on two
//! clocks. The chart clock starts with the root holding the key at time 0
//! and advances `per_level` units per tree level. The completion time adds
//! the fixed KDC generation, KDC to server and server to root offsets.

use std::collections::VecDeque;
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::directory::UserId;
use crate::error::{Error, Result};
use crate::scalar::Trust;
use crate::tree::TrustTree;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SessionKey {
    pub version: u64,
    pub material: [u8; 16],
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionKey")
            .field("version", &self.version)
            .finish_non_exhaustive()
    }
}

/// Key distribution center. Versions start at 1 and increase by one per key.
#[derive(Debug, Clone)]
pub struct Kdc {
    rng: ChaCha8Rng,
    version: u64,
}

impl Kdc {
    pub fn new(seed: u64) -> Self {
        Kdc {
            rng: ChaCha8Rng::seed_from_u64(seed),
            version: 0,
        }
    }

    /// Version of the most recently issued key, 0 before the first.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn generate_key(&mut self) -> SessionKey {
        self.version += 1;
        let mut material = [0u8; 16];
        self.rng.fill_bytes(&mut material);
        SessionKey {
            version: self.version,
            material,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatencyConfig {
    pub kdc_gen: u64,
    pub kdc_to_server: u64,
    pub server_to_root: u64,
    pub per_level: u64,
    /// Shift the chart clock so the root is covered after the offsets.
    pub include_offsets_in_chart: bool,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            kdc_gen: 1,
            kdc_to_server: 1,
            server_to_root: 1,
            per_level: 1,
            include_offsets_in_chart: false,
        }
    }
}

impl LatencyConfig {
    /// Upper bound on any single latency, keeping the dense coverage
    /// sequence of a report to a sane size.
    pub const MAX_UNITS: u64 = 1_000_000;

    pub fn offsets(&self) -> u64 {
        self.kdc_gen + self.kdc_to_server + self.server_to_root
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kdc_gen", self.kdc_gen),
            ("kdc_to_server", self.kdc_to_server),
            ("server_to_root", self.server_to_root),
            ("per_level", self.per_level),
        ];
        for (name, value) in fields {
            if value > Self::MAX_UNITS {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {value} exceeds {}",
                    Self::MAX_UNITS
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    Join(UserId),
    Leave(UserId),
    Manual,
}

impl Trigger {
    pub fn label(&self) -> &'static str {
        match self {
            Trigger::Join(_) => "join",
            Trigger::Leave(_) => "leave",
            Trigger::Manual => "manual",
        }
    }

    pub fn peer(&self) -> Option<UserId> {
        match *self {
            Trigger::Join(id) | Trigger::Leave(id) => Some(id),
            Trigger::Manual => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RekeyReport {
    pub key_version: u64,
    pub trigger: Trigger,
    /// Peer the key was injected at.
    pub root: Option<UserId>,
    pub tree_size: usize,
    pub height: u32,
    /// Entry `t` is the number of peers holding the key at chart time `t`.
    pub coverage_by_time: Vec<usize>,
    /// Chart time at which every peer in the tree held the key.
    pub chart_time_full_coverage: u64,
    /// Time from the KDC starting generation to the last peer receiving
    /// the key.
    pub completion_time: u64,
    pub message_count: u64,
    /// Chart time each slot received the key, in level order.
    pub delivery_times: Vec<u64>,
}

impl RekeyReport {
    /// Coverage sampled once per tree level, as `(chart time, covered)`.
    pub fn level_coverage(&self, per_level: u64) -> Vec<(u64, usize)> {
        let start = self.chart_time_full_coverage - per_level * self.height as u64;
        (0..=self.height as u64)
            .map(|level| {
                let t = start + level * per_level;
                (t, self.coverage_by_time[t as usize])
            })
            .collect()
    }
}

/// Delivers `key` from the root down, every parent forwarding to all of its
/// children in one `per_level` step.
pub fn propagate<T: Trust>(tree: &TrustTree<T>, key: &SessionKey, cfg: &LatencyConfig) -> RekeyReport {
    let offsets = cfg.offsets();
    let chart_origin = if cfg.include_offsets_in_chart { offsets } else { 0 };

    let mut delivery_times = vec![0u64; tree.len()];
    // offset messages: KDC to server, then server to root when there is one
    let mut message_count = 1;
    if !tree.is_empty() {
        message_count += 1;
        delivery_times[0] = chart_origin;
        let mut pending = VecDeque::from([0usize]);
        while let Some(slot) = pending.pop_front() {
            let arrival = delivery_times[slot] + cfg.per_level;
            for child in tree.children(slot) {
                delivery_times[child] = arrival;
                message_count += 1;
                pending.push_back(child);
            }
        }
    }

    let full = delivery_times.iter().copied().max().unwrap_or(chart_origin);
    let mut coverage_by_time = vec![0usize; full as usize + 1];
    for &t in &delivery_times {
        coverage_by_time[t as usize] += 1;
    }
    for t in 1..coverage_by_time.len() {
        coverage_by_time[t] += coverage_by_time[t - 1];
    }

    RekeyReport {
        key_version: key.version,
        trigger: Trigger::Manual,
        root: tree.root().map(|p| p.id),
        tree_size: tree.len(),
        height: tree.height(),
        coverage_by_time,
        chart_time_full_coverage: full,
        completion_time: full - chart_origin + offsets,
        message_count,
        delivery_times,
    }
}

/// Mediates between the KDC and whichever peer is currently the root.
#[derive(Debug, Clone)]
pub struct ControllingServer {
    kdc: Kdc,
    latency: LatencyConfig,
}

impl ControllingServer {
    pub fn new(kdc: Kdc, latency: LatencyConfig) -> Self {
        ControllingServer { kdc, latency }
    }

    pub fn latency(&self) -> &LatencyConfig {
        &self.latency
    }

    pub fn kdc(&self) -> &Kdc {
        &self.kdc
    }

    /// Requests one fresh key and pushes it through the post-event tree.
    pub fn rekey_on_event<T: Trust>(&mut self, tree: &TrustTree<T>, trigger: Trigger) -> RekeyReport {
        let key = self.kdc.generate_key();
        let mut report = propagate(tree, &key, &self.latency);
        report.trigger = trigger;
        report
    }
}
