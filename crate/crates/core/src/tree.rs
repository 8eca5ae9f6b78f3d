//! The trust-ordered dissemination tree.
//!
//! A [`TrustTree`] is a complete d-ary tree stored in level order, one peer
//! per slot. Slot `0` is the root, the parent of slot `i` is
//! `(i - 1) / d` and its children are `d*i + 1 ..= d*i + d`. Every parent
//! outranks its children: it has strictly more trust, or equal trust and a
//! smaller user id.
//!
//! Joins append at the first free slot and sift up. Leaves move the last
//! peer into the vacated slot and sift it whichever way restores the order.
//! Both touch at most one root-to-leaf path.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;

use crate::directory::UserId;
use crate::error::{Error, Result};
use crate::height::levels;
use crate::scalar::Trust;

/// A peer as seen by the tree: its identity and the trust it was placed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Peer<T> {
    pub id: UserId,
    pub trust: T,
}

impl<T: Trust> Peer<T> {
    pub fn new(id: UserId, trust: T) -> Self {
        Peer { id, trust }
    }

    /// True when `self` belongs strictly closer to the root than `other`.
    #[inline]
    pub fn outranks(&self, other: &Self) -> bool {
        self.rank_order(other) == Ordering::Less
    }

    /// Placement order: higher trust first, then lower user id.
    #[inline]
    pub fn rank_order(&self, other: &Self) -> Ordering {
        other.trust.cmp(&self.trust).then(self.id.cmp(&other.id))
    }
}

/// The generalized in-order index of a peer's slot.
///
/// For fanout `d` the traversal visits the first `ceil(d / 2)` children,
/// then the node itself, then the remaining children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankValue(pub usize);

impl fmt::Display for RankValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Whether a departure can be absorbed without moving any other peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DepartureClass {
    /// The peer held the last level-order slot.
    NoRebalance,
    /// Any other slot; the last peer is moved in and sifted.
    Rebalance,
}

impl fmt::Display for DepartureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepartureClass::NoRebalance => "no-rebalance",
            DepartureClass::Rebalance => "rebalance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinOutcome {
    /// Slot the new peer ended up in.
    pub slot: usize,
    /// Slots the new peer passed through, starting at the append position.
    pub path: Vec<usize>,
    pub swaps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaveOutcome<T> {
    pub class: DepartureClass,
    pub departed: Peer<T>,
    pub vacated_slot: usize,
    /// Slots the replacement peer passed through, starting at the vacated
    /// slot. Empty for [`DepartureClass::NoRebalance`].
    pub path: Vec<usize>,
    pub swaps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("slot {parent} (peer {parent_id}) does not outrank its child slot {child} (peer {child_id})")]
    HeapOrder {
        parent: usize,
        parent_id: UserId,
        child: usize,
        child_id: UserId,
    },
    #[error("position index disagrees with slot {slot} for peer {id}")]
    IndexMismatch { slot: usize, id: UserId },
    #[error("position index holds {indexed} entries for {slots} slots")]
    IndexSize { indexed: usize, slots: usize },
}

#[derive(Debug, Clone)]
pub struct TrustTree<T> {
    fanout: usize,
    slots: Vec<Peer<T>>,
    positions: HashMap<UserId, usize>,
}

impl<T: Trust> TrustTree<T> {
    pub fn new(fanout: usize) -> Result<Self> {
        if fanout < 2 {
            return Err(Error::InvalidFanout(fanout as u64));
        }
        Ok(TrustTree {
            fanout,
            slots: Vec::new(),
            positions: HashMap::new(),
        })
    }

    /// Lays the peers out in level order by descending trust.
    pub fn build<I>(peers: I, fanout: usize) -> Result<Self>
    where
        I: IntoIterator<Item = Peer<T>>,
    {
        let mut tree = Self::new(fanout)?;
        let mut slots: Vec<Peer<T>> = peers.into_iter().collect();
        slots.sort_by(Peer::rank_order);
        tree.positions.reserve(slots.len());
        for (slot, peer) in slots.iter().enumerate() {
            if tree.positions.insert(peer.id, slot).is_some() {
                return Err(Error::DuplicatePeer(peer.id));
            }
        }
        tree.slots = slots;
        Ok(tree)
    }

    /// Adopts an existing level-order layout, rejecting it unless every
    /// parent outranks its children.
    pub fn from_level_order<I>(peers: I, fanout: usize) -> Result<Self>
    where
        I: IntoIterator<Item = Peer<T>>,
    {
        let mut tree = Self::new(fanout)?;
        for (slot, peer) in peers.into_iter().enumerate() {
            if tree.positions.insert(peer.id, slot).is_some() {
                return Err(Error::DuplicatePeer(peer.id));
            }
            tree.slots.push(peer);
        }
        tree.validate()?;
        Ok(tree)
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Height of the tree; zero when empty or a lone root.
    pub fn height(&self) -> u32 {
        levels(self.slots.len(), self.fanout).expect("fanout validated on construction")
    }

    pub fn root(&self) -> Option<&Peer<T>> {
        self.slots.first()
    }

    /// Peers in level order.
    pub fn peers(&self) -> &[Peer<T>] {
        &self.slots
    }

    pub fn get(&self, slot: usize) -> Option<&Peer<T>> {
        self.slots.get(slot)
    }

    pub fn slot_of(&self, id: UserId) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn contains(&self, id: UserId) -> bool {
        self.positions.contains_key(&id)
    }

    pub fn parent(&self, slot: usize) -> Option<usize> {
        (slot > 0 && slot < self.slots.len()).then(|| (slot - 1) / self.fanout)
    }

    /// Occupied child slots of `slot`.
    pub fn children(&self, slot: usize) -> Range<usize> {
        let len = self.slots.len();
        let first = slot.saturating_mul(self.fanout).saturating_add(1).min(len);
        let last = slot.saturating_mul(self.fanout).saturating_add(self.fanout + 1).min(len);
        first..last
    }

    /// Distance of `slot` from the root.
    pub fn depth(&self, mut slot: usize) -> u32 {
        let mut depth = 0;
        while slot > 0 {
            slot = (slot - 1) / self.fanout;
            depth += 1;
        }
        depth
    }

    pub fn join(&mut self, peer: Peer<T>) -> Result<JoinOutcome> {
        if self.positions.contains_key(&peer.id) {
            return Err(Error::DuplicatePeer(peer.id));
        }
        let slot = self.slots.len();
        self.slots.push(peer);
        self.positions.insert(peer.id, slot);
        let mut path = vec![slot];
        let slot = self.sift_up(slot, &mut path);
        Ok(JoinOutcome {
            slot,
            swaps: path.len() - 1,
            path,
        })
    }

    pub fn classify_departure(&self, id: UserId) -> Result<DepartureClass> {
        let slot = self.slot_of(id).ok_or(Error::UnknownPeer(id))?;
        Ok(if slot + 1 == self.slots.len() {
            DepartureClass::NoRebalance
        } else {
            DepartureClass::Rebalance
        })
    }

    pub fn leave(&mut self, id: UserId) -> Result<LeaveOutcome<T>> {
        let class = self.classify_departure(id)?;
        let slot = self.positions.remove(&id).expect("classified peers are indexed");
        let last = self.slots.pop().expect("tree holds the departing peer");
        if class == DepartureClass::NoRebalance {
            return Ok(LeaveOutcome {
                class,
                departed: last,
                vacated_slot: slot,
                path: Vec::new(),
                swaps: 0,
            });
        }

        let departed = std::mem::replace(&mut self.slots[slot], last);
        self.positions.insert(last.id, slot);
        let mut path = vec![slot];
        let moves_up = self
            .parent(slot)
            .is_some_and(|p| last.outranks(&self.slots[p]));
        if moves_up {
            self.sift_up(slot, &mut path);
        } else {
            self.sift_down(slot, &mut path);
        }
        Ok(LeaveOutcome {
            class,
            departed,
            vacated_slot: slot,
            swaps: path.len() - 1,
            path,
        })
    }

    /// Generalized in-order index of every peer.
    pub fn assign_ranks(&self) -> BTreeMap<UserId, RankValue> {
        let mut ranks = BTreeMap::new();
        if !self.slots.is_empty() {
            let mut next = 0;
            self.visit_in_order(0, &mut next, &mut ranks);
        }
        ranks
    }

    fn visit_in_order(&self, slot: usize, next: &mut usize, ranks: &mut BTreeMap<UserId, RankValue>) {
        let before = self.fanout.div_ceil(2);
        let children = self.children(slot);
        for child in children.clone().take(before) {
            self.visit_in_order(child, next, ranks);
        }
        ranks.insert(self.slots[slot].id, RankValue(*next));
        *next += 1;
        for child in children.skip(before) {
            self.visit_in_order(child, next, ranks);
        }
    }

    /// Checks heap order and the id index. Completeness holds by
    /// construction of the level-order vector.
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.positions.len() != self.slots.len() {
            return Err(InvariantViolation::IndexSize {
                indexed: self.positions.len(),
                slots: self.slots.len(),
            });
        }
        for (slot, peer) in self.slots.iter().enumerate() {
            if self.positions.get(&peer.id) != Some(&slot) {
                return Err(InvariantViolation::IndexMismatch { slot, id: peer.id });
            }
            if let Some(parent) = self.parent(slot) {
                let above = &self.slots[parent];
                if !above.outranks(peer) {
                    return Err(InvariantViolation::HeapOrder {
                        parent,
                        parent_id: above.id,
                        child: slot,
                        child_id: peer.id,
                    });
                }
            }
        }
        Ok(())
    }

    fn swap_slots(&mut self, a: usize, b: usize) {
        self.slots.swap(a, b);
        self.positions.insert(self.slots[a].id, a);
        self.positions.insert(self.slots[b].id, b);
    }

    fn sift_up(&mut self, mut slot: usize, path: &mut Vec<usize>) -> usize {
        while let Some(parent) = self.parent(slot) {
            if !self.slots[slot].outranks(&self.slots[parent]) {
                break;
            }
            self.swap_slots(slot, parent);
            slot = parent;
            path.push(slot);
        }
        slot
    }

    fn sift_down(&mut self, mut slot: usize, path: &mut Vec<usize>) -> usize {
        loop {
            let best = self
                .children(slot)
                .min_by(|&a, &b| self.slots[a].rank_order(&self.slots[b]));
            match best {
                Some(child) if self.slots[child].outranks(&self.slots[slot]) => {
                    self.swap_slots(slot, child);
                    slot = child;
                    path.push(slot);
                }
                _ => return slot,
            }
        }
    }
}
