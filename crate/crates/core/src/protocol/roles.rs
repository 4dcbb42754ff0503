//! Per-slot role sampling.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::NodeId;
use crate::rng::derive_rng;

/// Role assignment for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub slot: u64,
    /// Ascending node ids.
    pub proposers: Vec<NodeId>,
    /// Position `i - 1` holds the relay with index `i`.
    pub relays: Vec<NodeId>,
    pub leader: NodeId,
}

impl SlotAssignment {
    pub fn is_proposer(&self, node: NodeId) -> bool {
        self.proposers.binary_search(&node).is_ok()
    }

    /// 1-based relay index of `node`.
    pub fn relay_index(&self, node: NodeId) -> Option<usize> {
        self.relays.iter().position(|&r| r == node).map(|p| p + 1)
    }

    pub fn relay_at(&self, index: usize) -> Option<NodeId> {
        index.checked_sub(1).and_then(|i| self.relays.get(i)).copied()
    }
}

/// Forced roles for a slot; fields left `None` are sampled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleOverride {
    pub proposers: Option<Vec<NodeId>>,
    pub relays: Option<Vec<NodeId>>,
    pub leader: Option<NodeId>,
}

/// Deterministic role schedule. Each slot is sampled from its own RNG stream,
/// so slots can be looked up in any order.
#[derive(Debug)]
pub struct RoleSchedule {
    n: usize,
    n_prop: usize,
    n_relay: usize,
    seed: u64,
    overrides: BTreeMap<u64, RoleOverride>,
    cache: RefCell<HashMap<u64, Rc<SlotAssignment>>>,
}

impl RoleSchedule {
    pub fn new(n: usize, n_prop: usize, n_relay: usize, seed: u64) -> Self {
        Self::with_overrides(n, n_prop, n_relay, seed, BTreeMap::new())
    }

    pub fn with_overrides(
        n: usize,
        n_prop: usize,
        n_relay: usize,
        seed: u64,
        overrides: BTreeMap<u64, RoleOverride>,
    ) -> Self {
        RoleSchedule {
            n,
            n_prop,
            n_relay,
            seed,
            overrides,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn get(&self, slot: u64) -> Rc<SlotAssignment> {
        if let Some(a) = self.cache.borrow().get(&slot) {
            return a.clone();
        }
        let a = Rc::new(self.sample(slot));
        self.cache.borrow_mut().insert(slot, a.clone());
        a
    }

    fn sample(&self, slot: u64) -> SlotAssignment {
        let mut rng: ChaCha20Rng = derive_rng(self.seed, "roles", slot);
        let mut proposers: Vec<NodeId> = sample(&mut rng, self.n, self.n_prop)
            .into_iter()
            .map(|i| i as NodeId)
            .collect();
        proposers.sort_unstable();
        let relays: Vec<NodeId> = sample(&mut rng, self.n, self.n_relay)
            .into_iter()
            .map(|i| i as NodeId)
            .collect();
        let leader = rng.gen_range(0..self.n) as NodeId;
        let mut a = SlotAssignment {
            slot,
            proposers,
            relays,
            leader,
        };
        if let Some(o) = self.overrides.get(&slot) {
            if let Some(p) = &o.proposers {
                a.proposers = p.clone();
                a.proposers.sort_unstable();
                a.proposers.dedup();
            }
            if let Some(r) = &o.relays {
                a.relays = r.clone();
            }
            if let Some(l) = o.leader {
                a.leader = l;
            }
        }
        a
    }
}
