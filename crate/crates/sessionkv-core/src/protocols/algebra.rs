//! Vector-clock and dependency-set algebra shared by the protocol
//! definitions.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::data::Data;
use crate::kernel::{ClientId, Key, Timestamp, TopicLabel};

/// Per-client timestamp map, total over the configured client set
/// (including the initial client `c0`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct VectorClock(pub BTreeMap<ClientId, Timestamp>);

impl VectorClock {
    pub fn zero(clients: impl IntoIterator<Item = ClientId>) -> VectorClock {
        VectorClock(clients.into_iter().map(|c| (c, 0)).collect())
    }

    pub fn get(&self, c: ClientId) -> Timestamp {
        *self.0.get(&c).expect("client outside clock domain")
    }

    pub fn set(&self, c: ClientId, t: Timestamp) -> VectorClock {
        debug_assert!(self.0.contains_key(&c), "client outside clock domain");
        let mut m = self.0.clone();
        m.insert(c, t);
        VectorClock(m)
    }

    pub fn same_domain(&self, other: &VectorClock) -> bool {
        self.0.len() == other.0.len() && self.0.keys().eq(other.0.keys())
    }

    pub fn to_data(&self) -> Data {
        Data::Map(
            self.0
                .iter()
                .map(|(c, t)| (Data::Nat(c.0), Data::Nat(*t)))
                .collect(),
        )
    }

    pub fn from_data(d: &Data) -> VectorClock {
        VectorClock(
            d.as_map()
                .iter()
                .map(|(c, t)| (ClientId(c.as_nat()), t.as_nat()))
                .collect(),
        )
    }
}

/// Pointwise comparison; both clocks must cover the same client set.
pub fn vc_leq(a: &VectorClock, b: &VectorClock) -> bool {
    assert!(a.same_domain(b), "vc_leq on mismatched client sets");
    a.0.iter().all(|(c, t)| *t <= b.0[c])
}

/// Pointwise maximum; same-domain contract as [`vc_leq`].
pub fn vc_max(a: &VectorClock, b: &VectorClock) -> VectorClock {
    assert!(a.same_domain(b), "vc_max on mismatched client sets");
    VectorClock(
        a.0.iter()
            .map(|(c, t)| (*c, (*t).max(b.0[c])))
            .collect(),
    )
}

/// Dependency entry identifying a put, optionally tagged with a topic
/// label. `(client, ts)` uniquely identifies a put.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DepEntry {
    pub client: ClientId,
    pub ts: Timestamp,
    pub key: Key,
    pub label: Option<TopicLabel>,
}

impl DepEntry {
    pub fn new(client: ClientId, ts: Timestamp, key: Key) -> DepEntry {
        DepEntry { client, ts, key, label: None }
    }

    pub fn labeled(client: ClientId, ts: Timestamp, key: Key, label: TopicLabel) -> DepEntry {
        DepEntry { client, ts, key, label: Some(label) }
    }

    pub fn to_data(&self) -> Data {
        let mut fields = alloc::vec![
            Data::Nat(self.client.0),
            Data::Nat(self.ts),
            Data::Nat(self.key.0),
        ];
        if let Some(l) = self.label {
            fields.push(Data::Nat(l.0));
        }
        Data::Tuple(fields)
    }

    pub fn from_data(d: &Data) -> DepEntry {
        let t = d.as_tuple();
        DepEntry {
            client: ClientId(t[0].as_nat()),
            ts: t[1].as_nat(),
            key: Key(t[2].as_nat()),
            label: t.get(3).map(|l| TopicLabel(l.as_nat())),
        }
    }
}

/// Finite set of dependency entries with the figures' restriction
/// operators.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct DepSet(pub BTreeSet<DepEntry>);

/// Restriction selector: by key, by client, or by label set.
#[derive(Debug, Clone)]
pub enum DepSelector {
    Key(Key),
    Client(ClientId),
    Labels(BTreeSet<TopicLabel>),
}

/// `d|_k`, `d|_c`, `d|_L`: exactly the entries matching the selector.
pub fn dep_restrict(d: &DepSet, selector: &DepSelector) -> DepSet {
    DepSet(
        d.0.iter()
            .filter(|e| match selector {
                DepSelector::Key(k) => e.key == *k,
                DepSelector::Client(c) => e.client == *c,
                DepSelector::Labels(ls) => e.label.is_some_and(|l| ls.contains(&l)),
            })
            .copied()
            .collect(),
    )
}

impl DepSet {
    pub fn to_data(&self) -> Data {
        Data::Set(self.0.iter().map(|e| e.to_data()).collect())
    }

    pub fn from_data(d: &Data) -> DepSet {
        DepSet(d.as_set().iter().map(DepEntry::from_data).collect())
    }

    pub fn union(&self, other: &DepSet) -> DepSet {
        DepSet(self.0.union(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &DepSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_strict_subset(&self, other: &DepSet) -> bool {
        self.0.is_subset(&other.0) && self.0.len() < other.0.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vc(entries: &[(u64, u64)]) -> VectorClock {
        VectorClock(entries.iter().map(|(c, t)| (ClientId(*c), *t)).collect())
    }

    #[test]
    fn vc_leq_pointwise() {
        assert!(vc_leq(&vc(&[(0, 0), (1, 0)]), &vc(&[(0, 0), (1, 0)])));
        assert!(!vc_leq(&vc(&[(0, 1), (1, 0)]), &vc(&[(0, 0), (1, 1)])));
        assert!(!vc_leq(&vc(&[(0, 0), (1, 1)]), &vc(&[(0, 1), (1, 0)])));
    }

    #[test]
    fn vc_max_componentwise() {
        assert_eq!(vc_max(&vc(&[(0, 0)]), &vc(&[(0, 0)])), vc(&[(0, 0)]));
        assert_eq!(
            vc_max(&vc(&[(0, 1), (1, 0)]), &vc(&[(0, 0), (1, 2)])),
            vc(&[(0, 1), (1, 2)])
        );
    }

    #[test]
    #[should_panic(expected = "mismatched client sets")]
    fn vc_leq_rejects_mismatched_domains() {
        vc_leq(&vc(&[(0, 0)]), &vc(&[(0, 0), (1, 0)]));
    }

    #[test]
    fn restriction_matches_definition() {
        let d = DepSet(
            [
                DepEntry::new(ClientId(1), 1, Key(0)),
                DepEntry::new(ClientId(1), 2, Key(1)),
            ]
            .into_iter()
            .collect(),
        );
        let r = dep_restrict(&d, &DepSelector::Key(Key(0)));
        assert_eq!(r.0.len(), 1);
        assert!(r.0.contains(&DepEntry::new(ClientId(1), 1, Key(0))));
        assert!(dep_restrict(&DepSet::default(), &DepSelector::Client(ClientId(1)))
            .0
            .is_empty());
    }
}
