//! Runtime invariant suite, exposed through `trustkey verify`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::directory::{LookupTable, UserId};
use crate::height::{eq1_height_bound, levels};
use crate::keying::Trigger;
use crate::simulator::{run, SimConfig};
use crate::tree::{Peer, TrustTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quick,
    Full,
}

impl Mode {
    fn scale(self, quick: usize, full: usize) -> usize {
        match self {
            Mode::Quick => quick,
            Mode::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0
    }
}

type Check = Result<String, String>;
type CheckFn = fn(Mode, u64) -> Check;

pub fn run_suite(mode: Mode, seed: u64) -> VerifyReport {
    let checks: [(&'static str, CheckFn); 7] = [
        ("height-bound", height_bound),
        ("levels-vs-tree", levels_vs_tree),
        ("tree-invariants", tree_invariants),
        ("rank-permutation", rank_permutation),
        ("rekey-discipline", rekey_discipline),
        ("determinism", determinism),
        ("directory-round-trip", directory_round_trip),
    ];
    let checks = checks
        .into_iter()
        .map(|(name, check)| {
            let (passed, detail) = match check(mode, seed) {
                Ok(detail) => (true, detail),
                Err(detail) => (false, detail),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect();
    VerifyReport { checks }
}

fn height_bound(mode: Mode, _seed: u64) -> Check {
    let max_n = mode.scale(1_000, 10_000) as u64;
    let mut cases = 0;
    for d in 2..=16u64 {
        for n in 1..=max_n {
            let expected = (0..64u32)
                .take_while(|&h| d.checked_pow(h).is_some_and(|p| 2 * p <= n + 1))
                .last()
                .unwrap_or(0);
            let got = eq1_height_bound(n, d).map_err(|e| e.to_string())?;
            if got != expected {
                return Err(format!("n={n} d={d}: got {got}, search gives {expected}"));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} cases"))
}

fn levels_vs_tree(mode: Mode, _seed: u64) -> Check {
    let max_n = mode.scale(1_000, 10_000);
    for d in [2usize, 3, 4, 8] {
        let mut tree = TrustTree::<u64>::new(d).map_err(|e| e.to_string())?;
        for n in 1..=max_n {
            tree.join(Peer::new(n as u64, (n * 7919 % 1000) as u64))
                .map_err(|e| e.to_string())?;
            let deepest = tree.depth(n - 1);
            let formula = levels(n, d).map_err(|e| e.to_string())?;
            if deepest != formula || tree.height() != formula {
                return Err(format!("n={n} d={d}: deepest slot {deepest}, levels {formula}"));
            }
        }
    }
    Ok(format!("n <= {max_n}, d in {{2,3,4,8}}"))
}

fn tree_invariants(mode: Mode, seed: u64) -> Check {
    let ops = mode.scale(10_000, 100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in [2usize, 3, 5] {
        let mut tree = TrustTree::<u64>::new(d).map_err(|e| e.to_string())?;
        let mut present: Vec<UserId> = Vec::new();
        let mut next = 0;
        for op in 0..ops / 3 {
            let join = present.is_empty() || (present.len() < 400 && rng.random_bool(0.55));
            let swaps = if join {
                // narrow trust range to exercise ties
                let out = tree
                    .join(Peer::new(next, rng.random_range(0..64)))
                    .map_err(|e| e.to_string())?;
                present.push(next);
                next += 1;
                out.swaps
            } else {
                let id = present.swap_remove(rng.random_range(0..present.len()));
                let height_before = tree.height();
                let out = tree.leave(id).map_err(|e| e.to_string())?;
                if out.swaps > height_before as usize {
                    return Err(format!("op {op}: leave took {} swaps at height {height_before}", out.swaps));
                }
                out.swaps
            };
            tree.validate().map_err(|e| format!("op {op} d={d}: {e}"))?;
            let want = levels(tree.len(), d).map_err(|e| e.to_string())?;
            if tree.height() != want || swaps > want as usize {
                return Err(format!("op {op} d={d}: height {} swaps {swaps} levels {want}", tree.height()));
            }
        }
    }
    Ok(format!("{ops} operations, seed {seed}"))
}

fn rank_permutation(mode: Mode, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..mode.scale(100, 1_000) {
        let n = rng.random_range(0..200u64);
        let d = rng.random_range(2..7usize);
        let tree = TrustTree::build((0..n).map(|i| Peer::new(i, rng.random_range(0..50u64))), d)
            .map_err(|e| e.to_string())?;
        let mut ranks: Vec<usize> = tree.assign_ranks().values().map(|r| r.0).collect();
        ranks.sort_unstable();
        if ranks != (0..n as usize).collect::<Vec<_>>() {
            return Err(format!("n={n} d={d}: ranks are not a permutation"));
        }
    }
    for h in 0..10u32 {
        let n = (1u64 << (h + 1)) - 1;
        let tree = TrustTree::build((0..n).map(|i| Peer::new(i, n - i)), 2).map_err(|e| e.to_string())?;
        let root = tree.root().map(|p| p.id).unwrap_or_default();
        if tree.assign_ranks()[&root].0 as u64 != n / 2 {
            return Err(format!("perfect binary tree of {n}: root is not the middle rank"));
        }
    }
    Ok("permutation and middle-root checks".to_owned())
}

fn churn_config(mode: Mode, seed: u64) -> SimConfig {
    SimConfig {
        node_count: 120,
        fanout: 3,
        seed,
        duration: mode.scale(60, 300) as u64,
        join_rate: 1.7,
        leave_rate: 1.6,
        rejoin_pool: true,
        ..SimConfig::default()
    }
}

fn rekey_discipline(mode: Mode, seed: u64) -> Check {
    let metrics = run(churn_config(mode, seed)).map_err(|e| e.to_string())?;
    if metrics.rekey_count != metrics.churn_events() + 1 {
        return Err(format!(
            "{} rekeys for {} churn events",
            metrics.rekey_count,
            metrics.churn_events()
        ));
    }
    let mut last_leave: HashMap<UserId, u64> = HashMap::new();
    for (i, (event, report)) in metrics.events.iter().zip(&metrics.reports).enumerate() {
        if report.key_version != i as u64 + 1 {
            return Err(format!("rekey {i} has version {}", report.key_version));
        }
        if report.coverage_by_time.last().copied() != Some(report.tree_size)
            || event.directory_online != report.tree_size
        {
            return Err(format!("rekey {i}: coverage does not reach {}", report.tree_size));
        }
        let expected_messages = report.tree_size as u64 + 1;
        if report.message_count != expected_messages {
            return Err(format!("rekey {i}: {} messages", report.message_count));
        }
        for slot in 1..report.delivery_times.len() {
            let parent = (slot - 1) / metrics.config.fanout;
            if report.delivery_times[slot] <= report.delivery_times[parent] {
                return Err(format!("rekey {i}: slot {slot} covered no later than its parent"));
            }
        }
        match (event.trigger, event.trust) {
            (Trigger::Leave(id), Some(trust)) => {
                last_leave.insert(id, trust);
            }
            (Trigger::Join(id), Some(trust)) => {
                if let Some(&before) = last_leave.get(&id) {
                    if trust < before {
                        return Err(format!("peer {id} rejoined with {trust} < {before}"));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(format!("{} rekeys", metrics.rekey_count))
}

fn determinism(_mode: Mode, seed: u64) -> Check {
    let render = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let metrics = run(churn_config(Mode::Quick, seed)).map_err(|e| e.to_string())?;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        metrics.write_metrics_csv(&mut a).map_err(|e| e.to_string())?;
        metrics.write_coverage_csv(&mut b).map_err(|e| e.to_string())?;
        Ok((a, b))
    };
    if render()? != render()? {
        return Err("two identical runs produced different files".to_owned());
    }
    Ok("metrics.csv and coverage.csv identical".to_owned())
}

fn directory_round_trip(mode: Mode, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1);
    let tables = mode.scale(100, 1_000);
    for i in 0..tables {
        let mut table = LookupTable::new();
        let mut ids = HashSet::new();
        for _ in 0..rng.random_range(0..40) {
            let id = rng.random_range(0..10_000u64);
            ids.insert(id);
            table.upsert(id, rng.random::<u64>() >> 1);
        }
        for &id in &ids {
            if rng.random_bool(0.5) {
                let _ = table.mark_online(id, rng.random_range(0..1_000_000));
            }
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf).map_err(|e| e.to_string())?;
        let loaded = LookupTable::read_csv(buf.as_slice()).map_err(|e| e.to_string())?;
        if loaded != table || loaded.online_count() != table.online_count() {
            return Err(format!("table {i} changed across save/load"));
        }
    }
    Ok(format!("{tables} tables"))
}
