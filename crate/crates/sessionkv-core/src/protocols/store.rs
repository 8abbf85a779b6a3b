//! Pluggable key-to-entry store backends.
//!
//! All three are observationally equivalent persistent maps with distinct
//! cost profiles:
//!
//! * [`StoreBackend::Chain`] — a stack of override layers; a lookup walks
//!   every layer, so its cost is linear in the number of prior puts. This
//!   models a function-as-map where each update wraps the previous map in
//!   another closure.
//! * [`StoreBackend::Assoc`] — a flat association list updated in place;
//!   lookup cost is linear in the number of distinct keys.
//! * [`StoreBackend::Tree`] — an ordered map; logarithmic in distinct keys.
//!
//! Keys missing from a store resolve to the replica-init entry, so the key
//! domain never has to be materialised.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::data::Data;
use crate::kernel::Key;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StoreBackend {
    Chain,
    Assoc,
    Tree,
}

impl StoreBackend {
    pub const ALL: [StoreBackend; 3] = [StoreBackend::Chain, StoreBackend::Assoc, StoreBackend::Tree];

    pub fn name(self) -> &'static str {
        match self {
            StoreBackend::Chain => "chain",
            StoreBackend::Assoc => "assoc",
            StoreBackend::Tree => "tree",
        }
    }

    pub fn parse(s: &str) -> Option<StoreBackend> {
        match s {
            "chain" => Some(StoreBackend::Chain),
            "assoc" => Some(StoreBackend::Assoc),
            "tree" => Some(StoreBackend::Tree),
            _ => None,
        }
    }
}

/// A persistent key-to-entry map with a backend-specific representation.
#[derive(Debug, Clone)]
pub enum Store {
    Chain { init: Data, layers: Vec<(Key, Data)> },
    Assoc { init: Data, entries: Vec<(Key, Data)> },
    Tree { init: Data, entries: BTreeMap<Key, Data> },
}

impl Store {
    pub fn new(backend: StoreBackend, init: Data) -> Store {
        match backend {
            StoreBackend::Chain => Store::Chain { init, layers: Vec::new() },
            StoreBackend::Assoc => Store::Assoc { init, entries: Vec::new() },
            StoreBackend::Tree => Store::Tree { init, entries: BTreeMap::new() },
        }
    }

    /// Newest entry written for `k`, or the init entry when never written.
    ///
    /// The chain variant walks every layer (newest first wins but the scan
    /// does not stop early), matching the closure-chain cost profile it
    /// models: lookup cost is linear in the number of prior puts.
    pub fn lookup(&self, k: Key) -> Data {
        match self {
            Store::Chain { init, layers } => {
                let mut found: Option<&Data> = None;
                for (lk, le) in layers.iter().rev() {
                    if *lk == k && found.is_none() {
                        found = Some(le);
                    }
                }
                found.unwrap_or(init).clone()
            }
            Store::Assoc { init, entries } => entries
                .iter()
                .find(|(ek, _)| *ek == k)
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| init.clone()),
            Store::Tree { init, entries } => {
                entries.get(&k).cloned().unwrap_or_else(|| init.clone())
            }
        }
    }

    /// Persistent update: returns a new store value.
    pub fn update(&self, k: Key, e: Data) -> Store {
        match self {
            Store::Chain { init, layers } => {
                let mut layers = layers.clone();
                layers.push((k, e));
                Store::Chain { init: init.clone(), layers }
            }
            Store::Assoc { init, entries } => {
                let mut entries = entries.clone();
                match entries.iter_mut().find(|(ek, _)| *ek == k) {
                    Some(slot) => slot.1 = e,
                    None => entries.push((k, e)),
                }
                Store::Assoc { init: init.clone(), entries }
            }
            Store::Tree { init, entries } => {
                let mut entries = entries.clone();
                entries.insert(k, e);
                Store::Tree { init: init.clone(), entries }
            }
        }
    }

    pub fn init_entry(&self) -> &Data {
        match self {
            Store::Chain { init, .. } | Store::Assoc { init, .. } | Store::Tree { init, .. } => {
                init
            }
        }
    }

    /// Observable content: newest entry per touched key, entries equal to
    /// the init entry dropped. Two stores are equal iff their canonical
    /// forms (and init entries) are.
    pub fn canonical(&self) -> BTreeMap<Key, Data> {
        let init = self.init_entry();
        let mut out = BTreeMap::new();
        match self {
            Store::Chain { layers, .. } => {
                for (k, e) in layers.iter().rev() {
                    out.entry(*k).or_insert_with(|| e.clone());
                }
            }
            Store::Assoc { entries, .. } => {
                for (k, e) in entries {
                    out.insert(*k, e.clone());
                }
            }
            Store::Tree { entries, .. } => {
                out = entries.clone();
            }
        }
        out.retain(|_, e| e != init);
        out
    }
}

impl PartialEq for Store {
    fn eq(&self, other: &Self) -> bool {
        self.init_entry() == other.init_entry() && self.canonical() == other.canonical()
    }
}

impl Eq for Store {}

impl PartialOrd for Store {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Store {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.init_entry(), self.canonical()).cmp(&(other.init_entry(), other.canonical()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_store_returns_init_for_every_key() {
        for b in StoreBackend::ALL {
            let s = Store::new(b, Data::Nat(9));
            assert_eq!(s.lookup(Key(0)), Data::Nat(9));
            assert_eq!(s.lookup(Key(41)), Data::Nat(9));
        }
    }

    #[test]
    fn last_write_wins_on_all_backends() {
        for b in StoreBackend::ALL {
            let s = Store::new(b, Data::Nat(0))
                .update(Key(0), Data::Nat(1))
                .update(Key(0), Data::Nat(2));
            assert_eq!(s.lookup(Key(0)), Data::Nat(2), "backend {:?}", b);
        }
    }

    #[test]
    fn backends_compare_by_observable_content() {
        let chain = Store::new(StoreBackend::Chain, Data::Nat(0))
            .update(Key(1), Data::Nat(5))
            .update(Key(1), Data::Nat(7));
        let tree = Store::new(StoreBackend::Tree, Data::Nat(0)).update(Key(1), Data::Nat(7));
        assert_eq!(chain, tree);
        // writing the init entry back is observationally a no-op
        let reset = tree.update(Key(1), Data::Nat(0));
        assert_eq!(reset, Store::new(StoreBackend::Assoc, Data::Nat(0)));
    }
}
