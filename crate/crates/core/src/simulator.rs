//! Seeded discrete-time churn simulation.
//!
//! A run builds the initial lookup table with random online times, lays the
//! online peers out in a [`TrustTree`], distributes an initial key, and then
//! walks time units `1..=duration`. Each unit draws a Poisson number of
//! leaves and joins; leaves are applied first, each group in ascending user
//! id order. Every event produces exactly one rekey.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::directory::{LookupTable, UserId};
use crate::error::{Error, Result};
use crate::height::levels;
use crate::keying::{ControllingServer, Kdc, LatencyConfig, RekeyReport, Trigger};
use crate::tree::{DepartureClass, Peer, TrustTree};

pub const METRICS_HEADER: [&str; 10] = [
    "event_time",
    "trigger",
    "peer_id",
    "key_version",
    "tree_size",
    "height",
    "chart_time_full_coverage",
    "completion_time",
    "messages",
    "swaps",
];

pub const COVERAGE_HEADER: [&str; 2] = ["time_unit", "nodes_covered"];

/// Distribution of the online times given to the initial peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeDistribution {
    UniformInt { lo: u64, hi: u64 },
}

impl Default for TimeDistribution {
    fn default() -> Self {
        TimeDistribution::UniformInt { lo: 0, hi: 1_000_000 }
    }
}

impl TimeDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            TimeDistribution::UniformInt { lo, hi } => rng.random_range(lo..=hi),
        }
    }
}

impl fmt::Display for TimeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeDistribution::UniformInt { lo, hi } => write!(f, "uniform({lo},{hi})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Peers online at time 0.
    pub node_count: usize,
    pub fanout: usize,
    pub seed: u64,
    /// Number of churn time units after the initial distribution.
    pub duration: u64,
    /// Expected joins per time unit.
    pub join_rate: f64,
    /// Expected leaves per time unit.
    pub leave_rate: f64,
    pub initial_time: TimeDistribution,
    pub latency: LatencyConfig,
    /// When set, half of all joins (on average) bring back a random
    /// offline peer instead of a new one.
    pub rejoin_pool: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            node_count: 333,
            fanout: 2,
            seed: 42,
            duration: 0,
            join_rate: 0.0,
            leave_rate: 0.0,
            initial_time: TimeDistribution::default(),
            latency: LatencyConfig::default(),
            rejoin_pool: false,
        }
    }
}

impl SimConfig {
    /// Rates above this would allocate unreasonably large per-unit batches.
    pub const MAX_RATE: f64 = 10_000.0;

    pub fn validate(&self) -> Result<()> {
        if self.fanout < 2 {
            return Err(Error::InvalidFanout(self.fanout as u64));
        }
        let TimeDistribution::UniformInt { lo, hi } = self.initial_time;
        if lo > hi {
            return Err(Error::InvalidConfig(format!(
                "initial time range is empty: lo {lo} > hi {hi}"
            )));
        }
        for (name, rate) in [("join_rate", self.join_rate), ("leave_rate", self.leave_rate)] {
            if !rate.is_finite() || !(0.0..=Self::MAX_RATE).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be within [0, {}], got {rate}",
                    Self::MAX_RATE
                )));
            }
        }
        self.latency.validate()
    }
}

/// Everything about one membership event except the rekey itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub time: u64,
    pub trigger: Trigger,
    /// Set for leaves.
    pub departure: Option<DepartureClass>,
    pub swaps: usize,
    /// Trust the peer was placed with (joins) or had accumulated (leaves).
    pub trust: Option<u64>,
    /// Online peers in the directory right after the event.
    pub directory_online: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub config: SimConfig,
    pub events: Vec<EventRecord>,
    /// `reports[i]` is the rekey triggered by `events[i]`.
    pub reports: Vec<RekeyReport>,
    pub rekey_count: usize,
    pub mean_completion_time: f64,
    pub max_completion_time: u64,
    pub total_messages: u64,
    pub total_swaps: u64,
    pub rebalancing_departures: usize,
    pub final_coverage: Vec<usize>,
}

impl SimMetrics {
    /// Derives every aggregate from the per-event records.
    pub fn from_records(config: SimConfig, events: Vec<EventRecord>, reports: Vec<RekeyReport>) -> Self {
        assert_eq!(events.len(), reports.len(), "one report per event");
        let rekey_count = reports.len();
        let total_completion: u64 = reports.iter().map(|r| r.completion_time).sum();
        let mean_completion_time = if rekey_count == 0 {
            0.0
        } else {
            total_completion as f64 / rekey_count as f64
        };
        let final_coverage = reports
            .iter()
            .rev()
            .find(|r| r.tree_size > 0)
            .map(|r| r.coverage_by_time.clone())
            .unwrap_or_default();
        SimMetrics {
            rekey_count,
            mean_completion_time,
            max_completion_time: reports.iter().map(|r| r.completion_time).max().unwrap_or(0),
            total_messages: reports.iter().map(|r| r.message_count).sum(),
            total_swaps: events.iter().map(|e| e.swaps as u64).sum(),
            rebalancing_departures: events
                .iter()
                .filter(|e| e.departure == Some(DepartureClass::Rebalance))
                .count(),
            final_coverage,
            config,
            events,
            reports,
        }
    }

    /// Membership events after the initial distribution.
    pub fn churn_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.trigger != Trigger::Manual)
            .count()
    }

    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(METRICS_HEADER)?;
        for (event, report) in self.events.iter().zip(&self.reports) {
            let peer = event.trigger.peer().map(|id| id.to_string()).unwrap_or_default();
            out.write_record([
                event.time.to_string(),
                event.trigger.label().to_owned(),
                peer,
                report.key_version.to_string(),
                report.tree_size.to_string(),
                report.height.to_string(),
                report.chart_time_full_coverage.to_string(),
                report.completion_time.to_string(),
                report.message_count.to_string(),
                event.swaps.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_coverage_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(COVERAGE_HEADER)?;
        for (t, covered) in self.final_coverage.iter().enumerate() {
            out.write_record([t.to_string(), covered.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `metrics.csv` and `coverage.csv` into `dir`, creating it if needed.
    pub fn write_files<P: AsRef<Path>>(&self, dir: P) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let metrics = dir.join("metrics.csv");
        let coverage = dir.join("coverage.csv");
        let mut file = BufWriter::new(File::create(&metrics)?);
        self.write_metrics_csv(&mut file)?;
        file.flush()?;
        let mut file = BufWriter::new(File::create(&coverage)?);
        self.write_coverage_csv(&mut file)?;
        file.flush()?;
        Ok((metrics, coverage))
    }

    pub fn summary(&self) -> String {
        let last = self.reports.last();
        format!(
            "nodes={} fanout={} seed={} initial_time={} rekeys={} churn_events={} final_size={} \
             height={} full_coverage_chart_time={} mean_completion={:.3} max_completion={} \
             messages={} swaps={} rebalancing_departures={}",
            self.config.node_count,
            self.config.fanout,
            self.config.seed,
            self.config.initial_time,
            self.rekey_count,
            self.churn_events(),
            last.map_or(0, |r| r.tree_size),
            last.map_or(0, |r| r.height),
            last.map_or(0, |r| r.chart_time_full_coverage),
            self.mean_completion_time,
            self.max_completion_time,
            self.total_messages,
            self.total_swaps,
            self.rebalancing_departures,
        )
    }
}

/// A simulation in progress. [`run`] drives one to completion; stepping it
/// by hand exposes the directory and tree between time units.
#[derive(Debug)]
pub struct Simulation {
    config: SimConfig,
    rng: ChaCha8Rng,
    server: ControllingServer,
    table: LookupTable,
    tree: TrustTree<u64>,
    offline: Vec<UserId>,
    next_id: UserId,
    joins: Option<Poisson<f64>>,
    leaves: Option<Poisson<f64>>,
    now: u64,
    events: Vec<EventRecord>,
    reports: Vec<RekeyReport>,
}

fn poisson(rate: f64) -> Option<Poisson<f64>> {
    (rate > 0.0).then(|| Poisson::new(rate).expect("rate validated"))
}

impl Simulation {
    /// Validates the configuration, seeds the directory and tree and
    /// performs the initial key distribution.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let kdc = Kdc::new(rng.next_u64());
        let mut table = LookupTable::new();
        for id in 0..config.node_count as UserId {
            let online_time = config.initial_time.sample(&mut rng);
            table.upsert(id, online_time);
            table.mark_online(id, 0)?;
        }
        let peers = table
            .snapshot_for_build(0)
            .into_iter()
            .map(|(id, trust)| Peer::new(id, trust));
        let tree = TrustTree::build(peers, config.fanout)?;

        let mut sim = Simulation {
            server: ControllingServer::new(kdc, config.latency),
            joins: poisson(config.join_rate),
            leaves: poisson(config.leave_rate),
            next_id: config.node_count as UserId,
            rng,
            table,
            tree,
            offline: Vec::new(),
            now: 0,
            events: Vec::new(),
            reports: Vec::new(),
            config,
        };
        if !sim.tree.is_empty() {
            sim.record(Trigger::Manual, None, 0, None);
        }
        Ok(sim)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn table(&self) -> &LookupTable {
        &self.table
    }

    pub fn tree(&self) -> &TrustTree<u64> {
        &self.tree
    }

    pub fn is_finished(&self) -> bool {
        self.now >= self.config.duration
    }

    /// Advances one time unit. Returns false once the run is over.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        self.now += 1;

        let leaves = self.draw(self.leaves).min(self.tree.len());
        let mut leavers: Vec<UserId> = index::sample(&mut self.rng, self.tree.len(), leaves)
            .into_iter()
            .map(|slot| self.tree.peers()[slot].id)
            .collect();
        leavers.sort_unstable();
        for id in leavers {
            self.leave(id)?;
        }

        let joins = self.draw(self.joins);
        let mut joiners = Vec::with_capacity(joins);
        for _ in 0..joins {
            let rejoin = self.config.rejoin_pool && !self.offline.is_empty() && self.rng.random_bool(0.5);
            let id = if rejoin {
                let pick = self.rng.random_range(0..self.offline.len());
                self.offline.swap_remove(pick)
            } else {
                let id = self.next_id;
                self.next_id += 1;
                self.table.upsert(id, 0);
                id
            };
            joiners.push(id);
        }
        joiners.sort_unstable();
        for id in joiners {
            self.join(id)?;
        }
        Ok(true)
    }

    pub fn finish(mut self) -> Result<SimMetrics> {
        while self.step()? {}
        Ok(SimMetrics::from_records(self.config, self.events, self.reports))
    }

    fn draw(&mut self, dist: Option<Poisson<f64>>) -> usize {
        dist.map_or(0, |d| d.sample(&mut self.rng) as usize)
    }

    fn leave(&mut self, id: UserId) -> Result<()> {
        let trust = self.table.mark_offline(id, self.now)?.online_time;
        let outcome = self.tree.leave(id)?;
        self.offline.push(id);
        self.record(Trigger::Leave(id), Some(outcome.class), outcome.swaps, Some(trust));
        Ok(())
    }

    fn join(&mut self, id: UserId) -> Result<()> {
        let trust = self.table.mark_online(id, self.now)?.trust_at(self.now);
        let outcome = self.tree.join(Peer::new(id, trust))?;
        self.record(Trigger::Join(id), None, outcome.swaps, Some(trust));
        Ok(())
    }

    fn record(&mut self, trigger: Trigger, departure: Option<DepartureClass>, swaps: usize, trust: Option<u64>) {
        debug_assert_eq!(self.table.online_count(), self.tree.len());
        let report = self.server.rekey_on_event(&self.tree, trigger);
        self.events.push(EventRecord {
            time: self.now,
            trigger,
            departure,
            swaps,
            trust,
            directory_online: self.table.online_count(),
        });
        self.reports.push(report);
    }
}

/// Runs a full simulation.
pub fn run(config: SimConfig) -> Result<SimMetrics> {
    Simulation::new(config)?.finish()
}

/// Coverage of a full complete tree of `n` peers, sampled once per level:
/// `(chart time, peers holding the key)`.
pub fn coverage_curve(n: usize, fanout: usize, latency: &LatencyConfig) -> Result<Vec<(u64, usize)>> {
    let height = levels(n, fanout)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let origin = if latency.include_offsets_in_chart {
        latency.offsets()
    } else {
        0
    };
    let mut curve = Vec::with_capacity(height as usize + 1);
    let mut covered = 0usize;
    let mut width = 1usize;
    for level in 0..=height as u64 {
        covered = covered.saturating_add(width).min(n);
        width = width.saturating_mul(fanout);
        curve.push((origin + level * latency.per_level, covered));
    }
    Ok(curve)
}
