use std::collections::{BTreeMap, BTreeSet};

use trustkey::{levels, DepartureClass, Peer, TrustTree64};

use super::{valid_layouts, Entry};

fn ids(tree: &TrustTree64) -> Vec<u64> {
    tree.peers().iter().map(|p| p.id).collect()
}

fn from_entries(layout: &[u64], peers: &[Entry], d: usize) -> TrustTree64 {
    let trust: BTreeMap<u64, u64> = peers.iter().copied().collect();
    TrustTree64::from_level_order(layout.iter().map(|&id| Peer::new(id, trust[&id])), d).unwrap()
}

/// Memoized layout oracle keyed by the sorted peer set.
#[derive(Default)]
struct Oracle {
    cache: BTreeMap<(usize, Vec<Entry>), BTreeSet<Vec<u64>>>,
}

impl Oracle {
    fn layouts(&mut self, peers: &[Entry], d: usize) -> &BTreeSet<Vec<u64>> {
        let mut key = peers.to_vec();
        key.sort_unstable();
        self.cache
            .entry((d, key))
            .or_insert_with(|| valid_layouts(peers, d))
    }
}

fn trust_patterns(n: u64) -> Vec<Vec<Entry>> {
    vec![
        (1..=n).map(|i| (i, 10 * (n + 1 - i))).collect(),
        (1..=n).map(|i| (i, 10 * (i % 3))).collect(),
        (1..=n).map(|i| (i, 7)).collect(),
    ]
}

/// Starts from every valid layout of every small peer set and checks each
/// possible leave and a spread of joins against the layout oracle. Returns
/// the number of operations checked.
pub fn check_all(fanouts: &[usize], max_n: u64) -> usize {
    let mut oracle = Oracle::default();
    let mut checked = 0usize;
    for &d in fanouts {
        for n in 0..=max_n {
            for peers in trust_patterns(n) {
                let starts: Vec<Vec<u64>> = oracle.layouts(&peers, d).iter().cloned().collect();
                assert!(!starts.is_empty());
                let build = TrustTree64::build(peers.iter().map(|&(id, t)| Peer::new(id, t)), d).unwrap();
                assert!(starts.contains(&ids(&build)));

                let mut join_trusts: BTreeSet<u64> = BTreeSet::from([0]);
                for &(_, t) in &peers {
                    join_trusts.extend([t, t + 1]);
                }

                for start in &starts {
                    let tree = from_entries(start, &peers, d);

                    for &(id, _) in &peers {
                        let mut after = tree.clone();
                        let height_before = after.height();
                        let class = after.classify_departure(id).unwrap();
                        let out = after.leave(id).unwrap();
                        assert_eq!(out.class, class);
                        assert_eq!(
                            class == DepartureClass::NoRebalance,
                            tree.slot_of(id) == Some(tree.len() - 1)
                        );
                        assert!(out.swaps <= height_before as usize);
                        let rest: Vec<Entry> = peers.iter().copied().filter(|e| e.0 != id).collect();
                        assert!(
                            oracle.layouts(&rest, d).contains(&ids(&after)),
                            "leave {id} from {start:?} (d={d}) gave {:?}",
                            ids(&after)
                        );
                        assert_eq!(after.height(), levels(n - 1, d as u64).unwrap());
                        checked += 1;
                    }

                    // id 0 wins every tie, id 99 loses every tie
                    for new_id in [0u64, 99] {
                        for &trust in &join_trusts {
                            let mut after = tree.clone();
                            let out = after.join(Peer::new(new_id, trust)).unwrap();
                            assert!(out.swaps <= after.height() as usize);
                            let mut more = peers.clone();
                            more.push((new_id, trust));
                            assert!(
                                oracle.layouts(&more, d).contains(&ids(&after)),
                                "join ({new_id},{trust}) into {start:?} (d={d}) gave {:?}",
                                ids(&after)
                            );
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    checked
}

