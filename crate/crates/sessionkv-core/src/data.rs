//! A small closed universe of protocol-owned values.
//!
//! Client states, replica-state extras and message payloads all live in
//! this one algebraic type. The derived total order doubles as the
//! canonical encoding the explorer needs for world deduplication: sets and
//! maps are backed by B-trees, so structurally equal values compare equal
//! regardless of construction order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Data {
    Unit,
    Nat(u64),
    Tuple(Vec<Data>),
    Set(BTreeSet<Data>),
    Map(BTreeMap<Data, Data>),
    List(Vec<Data>),
}

impl Data {
    pub fn empty_set() -> Data {
        Data::Set(BTreeSet::new())
    }

    pub fn empty_map() -> Data {
        Data::Map(BTreeMap::new())
    }

    pub fn pair(a: Data, b: Data) -> Data {
        Data::Tuple(alloc::vec![a, b])
    }

    /// Panics on shape mismatch: protocol methods are total over the
    /// states the same protocol constructed, so a mismatch is a bug.
    pub fn as_nat(&self) -> u64 {
        match self {
            Data::Nat(n) => *n,
            other => panic!("expected Nat, got {other:?}"),
        }
    }

    pub fn as_set(&self) -> &BTreeSet<Data> {
        match self {
            Data::Set(s) => s,
            other => panic!("expected Set, got {other:?}"),
        }
    }

    pub fn as_map(&self) -> &BTreeMap<Data, Data> {
        match self {
            Data::Map(m) => m,
            other => panic!("expected Map, got {other:?}"),
        }
    }

    pub fn as_list(&self) -> &Vec<Data> {
        match self {
            Data::List(l) => l,
            other => panic!("expected List, got {other:?}"),
        }
    }

    pub fn as_tuple(&self) -> &Vec<Data> {
        match self {
            Data::Tuple(t) => t,
            other => panic!("expected Tuple, got {other:?}"),
        }
    }

    /// Field of a tuple.
    pub fn field(&self, i: usize) -> &Data {
        &self.as_tuple()[i]
    }

    /// Map lookup with the figures' total-function reading: absent keys
    /// denote the default (zero / empty) value.
    pub fn lookup_or(&self, key: &Data, default: Data) -> Data {
        self.as_map().get(key).cloned().unwrap_or(default)
    }

    /// Nat-valued map lookup defaulting to 0.
    pub fn lookup_nat(&self, key: &Data) -> u64 {
        self.as_map().get(key).map(|d| d.as_nat()).unwrap_or(0)
    }

    /// Functional map update; a zero Nat value is stored explicitly so the
    /// update stays visible, callers prune via [`Data::map_insert_nat`].
    pub fn map_insert(&self, key: Data, value: Data) -> Data {
        let mut m = self.as_map().clone();
        m.insert(key, value);
        Data::Map(m)
    }

    /// Functional update of a Nat-valued map keeping the zero-default
    /// canonical form (entries with value 0 are removed).
    pub fn map_insert_nat(&self, key: Data, value: u64) -> Data {
        let mut m = self.as_map().clone();
        if value == 0 {
            m.remove(&key);
        } else {
            m.insert(key, Data::Nat(value));
        }
        Data::Map(m)
    }

    pub fn set_insert(&self, value: Data) -> Data {
        let mut s = self.as_set().clone();
        s.insert(value);
        Data::Set(s)
    }

    pub fn set_union(&self, other: &Data) -> Data {
        let mut s = self.as_set().clone();
        s.extend(other.as_set().iter().cloned());
        Data::Set(s)
    }

    pub fn set_contains(&self, value: &Data) -> bool {
        self.as_set().contains(value)
    }

    pub fn is_subset(&self, other: &Data) -> bool {
        self.as_set().is_subset(other.as_set())
    }

    pub fn is_strict_subset(&self, other: &Data) -> bool {
        let (a, b) = (self.as_set(), other.as_set());
        a.is_subset(b) && a.len() < b.len()
    }

    pub fn list_push(&self, value: Data) -> Data {
        let mut l = self.as_list().clone();
        l.push(value);
        Data::List(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_default_zero_is_canonical() {
        let m = Data::empty_map();
        let k = Data::Nat(3);
        assert_eq!(m.lookup_nat(&k), 0);
        let m2 = m.map_insert_nat(k.clone(), 0);
        assert_eq!(m, m2);
        let m3 = m.map_insert_nat(k.clone(), 2).map_insert_nat(k, 0);
        assert_eq!(m, m3);
    }

    #[test]
    fn strict_subset() {
        let a = Data::empty_set().set_insert(Data::Nat(1));
        let b = a.set_insert(Data::Nat(2));
        assert!(a.is_strict_subset(&b));
        assert!(!b.is_strict_subset(&a));
        assert!(!a.is_strict_subset(&a));
    }
}
