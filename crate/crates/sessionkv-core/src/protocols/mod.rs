//! The twelve protocol definitions and the machinery they share.
//!
//! Each definition is a literal transcription of one protocol figure onto
//! the seven-method (plus two initializers) interface. Client states and
//! payloads are [`Data`] values; replica states pair a pluggable key-entry
//! [`Store`] with protocol-specific extra state (e.g. a received clock).

pub mod algebra;
pub mod store;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::data::Data;
use crate::kernel::{ClientId, Key, ReplicaId, TopicLabel, Value};

pub use algebra::{dep_restrict, vc_leq, vc_max, DepEntry, DepSelector, DepSet, VectorClock};
pub use store::{Store, StoreBackend};

/// CLI-facing protocol names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolName {
    Relaxed,
    RywSpec,
    RywImpl,
    MrSpec,
    MrImpl,
    MwSpec,
    MwImpl,
    RywMwImpl,
    CcSpec,
    CcImplVc,
    CcImplLf,
    LccSpec,
}

impl ProtocolName {
    pub const ALL: [ProtocolName; 12] = [
        ProtocolName::Relaxed,
        ProtocolName::RywSpec,
        ProtocolName::RywImpl,
        ProtocolName::MrSpec,
        ProtocolName::MrImpl,
        ProtocolName::MwSpec,
        ProtocolName::MwImpl,
        ProtocolName::RywMwImpl,
        ProtocolName::CcSpec,
        ProtocolName::CcImplVc,
        ProtocolName::CcImplLf,
        ProtocolName::LccSpec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolName::Relaxed => "relaxed",
            ProtocolName::RywSpec => "ryw_spec",
            ProtocolName::RywImpl => "ryw_impl",
            ProtocolName::MrSpec => "mr_spec",
            ProtocolName::MrImpl => "mr_impl",
            ProtocolName::MwSpec => "mw_spec",
            ProtocolName::MwImpl => "mw_impl",
            ProtocolName::RywMwImpl => "ryw_mw_impl",
            ProtocolName::CcSpec => "cc_spec",
            ProtocolName::CcImplVc => "cc_impl_vc",
            ProtocolName::CcImplLf => "cc_impl_lf",
            ProtocolName::LccSpec => "lcc_spec",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolName> {
        ProtocolName::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Labeling parameters for the labeled causal consistency spec.
///
/// The value-to-label function defaults to `v mod label_count`; clients
/// absent from `client_labels` are interested in every label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabelingConfig {
    pub label_count: u64,
    pub client_labels: BTreeMap<ClientId, BTreeSet<TopicLabel>>,
}

impl LabelingConfig {
    pub fn all_labels(label_count: u64) -> LabelingConfig {
        LabelingConfig { label_count, client_labels: BTreeMap::new() }
    }

    pub fn value_label(&self, v: Value) -> TopicLabel {
        TopicLabel(v.0 % self.label_count.max(1))
    }

    pub fn client_labels(&self, c: ClientId) -> BTreeSet<TopicLabel> {
        self.client_labels
            .get(&c)
            .cloned()
            .unwrap_or_else(|| (0..self.label_count).map(TopicLabel).collect())
    }
}

/// Shipped guard mutations, used by the negative-discrimination checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mutation {
    GetGuardAlwaysTrue,
    PutGuardAlwaysTrue,
}

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::GetGuardAlwaysTrue => "get-guard-true",
            Mutation::PutGuardAlwaysTrue => "put-guard-true",
        }
    }

    pub fn parse(s: &str) -> Option<Mutation> {
        match s {
            "get-guard-true" => Some(Mutation::GetGuardAlwaysTrue),
            "put-guard-true" => Some(Mutation::PutGuardAlwaysTrue),
            _ => None,
        }
    }
}

/// Replica state: the key-to-entry store plus protocol-specific extra
/// state (the causal implementations keep a received vector clock here).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReplicaState {
    pub store: Store,
    pub extra: Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    UnknownName,
    MissingLabeling,
}

impl core::fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ProtocolError::UnknownName => write!(f, "unknown protocol name"),
            ProtocolError::MissingLabeling => write!(f, "lcc_spec requires a labeling config"),
        }
    }
}

/// A protocol definition: the ten pure methods of one figure, with the
/// store backend substituted for the figure's key-to-entry map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolDefinition {
    pub name: ProtocolName,
    pub store: StoreBackend,
    pub labeling: Option<LabelingConfig>,
    pub mutation: Option<Mutation>,
}

pub fn make_protocol(
    name: ProtocolName,
    store: StoreBackend,
    labeling: Option<LabelingConfig>,
) -> Result<ProtocolDefinition, ProtocolError> {
    if name == ProtocolName::LccSpec && labeling.is_none() {
        return Err(ProtocolError::MissingLabeling);
    }
    Ok(ProtocolDefinition { name, store, labeling, mutation: None })
}

// --- Data shape helpers shared by several figures -------------------------

fn nat(n: u64) -> Data {
    Data::Nat(n)
}

fn tup(fields: impl IntoIterator<Item = Data>) -> Data {
    Data::Tuple(fields.into_iter().collect())
}

/// `p|_k` over a set of `(t, k)` pairs: the timestamps put on `k`.
fn restrict_ts_by_key(p: &Data, k: Key) -> Data {
    Data::Set(
        p.as_set()
            .iter()
            .filter(|e| e.field(1).as_nat() == k.0)
            .map(|e| e.field(0).clone())
            .collect(),
    )
}

/// `p|_c` over a set of `(c, t)` pairs: the timestamps from client `c`.
fn restrict_ts_by_client(p: &Data, c: ClientId) -> Data {
    Data::Set(
        p.as_set()
            .iter()
            .filter(|e| e.field(0).as_nat() == c.0)
            .map(|e| e.field(1).clone())
            .collect(),
    )
}

/// `d|_k` over a set of dep tuples whose key sits at field 2.
fn restrict_deps_by_key(d: &Data, k: Key) -> Data {
    Data::Set(
        d.as_set()
            .iter()
            .filter(|e| e.field(2).as_nat() == k.0)
            .cloned()
            .collect(),
    )
}

/// `d|_L` over labeled dep quads (label at field 3).
fn restrict_deps_by_labels(d: &Data, labels: &BTreeSet<TopicLabel>) -> Data {
    Data::Set(
        d.as_set()
            .iter()
            .filter(|e| labels.contains(&TopicLabel(e.field(3).as_nat())))
            .cloned()
            .collect(),
    )
}

/// Pointwise `a <= b` on zero-defaulted nat maps (pruned representation).
fn clock_leq(a: &Data, b: &Data) -> bool {
    let (x, y) = align_clocks(a, b);
    vc_leq(&x, &y)
}

/// Pointwise max on zero-defaulted nat maps.
fn clock_join(a: &Data, b: &Data) -> Data {
    let (x, y) = align_clocks(a, b);
    let joined = vc_max(&x, &y);
    prune_clock(joined)
}

fn align_clocks(a: &Data, b: &Data) -> (VectorClock, VectorClock) {
    let mut domain: BTreeSet<ClientId> = BTreeSet::new();
    for m in [a, b] {
        domain.extend(m.as_map().keys().map(|k| ClientId(k.as_nat())));
    }
    let materialize = |m: &Data| {
        VectorClock(
            domain
                .iter()
                .map(|c| (*c, m.lookup_nat(&nat(c.0))))
                .collect(),
        )
    };
    (materialize(a), materialize(b))
}

fn prune_clock(vc: VectorClock) -> Data {
    Data::Map(
        vc.0.into_iter()
            .filter(|(_, t)| *t > 0)
            .map(|(c, t)| (nat(c.0), nat(t)))
            .collect(),
    )
}

impl ProtocolDefinition {
    pub fn with_mutation(&self, m: Mutation) -> ProtocolDefinition {
        ProtocolDefinition { mutation: Some(m), ..self.clone() }
    }

    fn labeling(&self) -> &LabelingConfig {
        self.labeling.as_ref().expect("lcc_spec requires labeling")
    }

    // --- initializers ------------------------------------------------------

    pub fn c_init(&self, _c: ClientId) -> Data {
        use ProtocolName::*;
        match self.name {
            Relaxed => Data::Unit,
            // session put set
            RywSpec | MwSpec => Data::empty_set(),
            // latest-put-per-key map
            RywImpl | MwImpl | RywMwImpl => Data::empty_map(),
            // (session puts, session deps)
            MrSpec => Data::pair(Data::empty_set(), Data::empty_set()),
            // (session latest put ts, largest ts read per (key, client))
            MrImpl => Data::pair(nat(0), Data::empty_map()),
            // (put deps, get dep-sets)
            CcSpec | LccSpec => Data::pair(Data::empty_set(), Data::empty_set()),
            // session vector clock
            CcImplVc => Data::empty_map(),
            // (put timestamp, session dep list)
            CcImplLf => Data::pair(nat(0), Data::List(Vec::new())),
        }
    }

    pub fn r_init(&self, _r: ReplicaId, v0: Value) -> ReplicaState {
        use ProtocolName::*;
        let init_entry = match self.name {
            Relaxed | CcImplVc => nat(v0.0),
            // (v, origin client, origin ts)
            RywImpl | MrImpl => tup([nat(v0.0), nat(0), nat(0)]),
            // (v, origin client, origin ts, prior puts / deps)
            RywSpec | MrSpec | CcSpec | LccSpec => {
                tup([nat(v0.0), nat(0), nat(0), Data::empty_set()])
            }
            // (v, applied puts)
            MwSpec => tup([nat(v0.0), Data::empty_set()]),
            // (v, latest applied ts per session)
            MwImpl => tup([nat(v0.0), Data::empty_map()]),
            // (v, origin client, latest applied ts per session)
            RywMwImpl => tup([nat(v0.0), nat(0), Data::empty_map()]),
            // (origin client, origin ts, v)
            CcImplLf => tup([nat(0), nat(0), nat(v0.0)]),
        };
        let extra = match self.name {
            // received vector clock, shared by all keys
            CcImplVc | CcImplLf => Data::empty_map(),
            _ => Data::Unit,
        };
        ReplicaState { store: Store::new(self.store, init_entry), extra }
    }

    // --- get path -----------------------------------------------------------

    /// At client: produces the get request payload; returns `(payload, state')`.
    pub fn get_req(&self, k: Key, c: ClientId, state: &Data) -> (Data, Data) {
        use ProtocolName::*;
        match self.name {
            Relaxed | MwSpec | MwImpl => (Data::Unit, state.clone()),
            RywSpec => (restrict_ts_by_key(state, k), state.clone()),
            RywImpl | RywMwImpl => (nat(state.lookup_nat(&nat(k.0))), state.clone()),
            MrSpec => {
                // session deps for k, as (c, t) pairs
                let deps = state.field(1);
                let payload = Data::Set(
                    deps.as_set()
                        .iter()
                        .filter(|e| e.field(2).as_nat() == k.0)
                        .map(|e| tup([e.field(0).clone(), e.field(1).clone()]))
                        .collect(),
                );
                (payload, state.clone())
            }
            MrImpl => {
                // largest ts read for k, per origin client
                let d = state.field(1);
                let payload = Data::Map(
                    d.as_map()
                        .iter()
                        .filter(|(kk, _)| kk.field(0).as_nat() == k.0)
                        .map(|(kk, t)| (kk.field(1).clone(), t.clone()))
                        .collect(),
                );
                (payload, state.clone())
            }
            CcSpec => {
                let (p, g) = (state.field(0), state.field(1));
                let gk = Data::Set(
                    g.as_set()
                        .iter()
                        .map(|d| restrict_deps_by_key(d, k))
                        .collect(),
                );
                (Data::pair(restrict_deps_by_key(p, k), gk), state.clone())
            }
            LccSpec => {
                let labels = self.labeling().client_labels(c);
                let (p, g) = (state.field(0), state.field(1));
                let pk = restrict_deps_by_labels(&restrict_deps_by_key(p, k), &labels);
                let gk = Data::Set(
                    g.as_set()
                        .iter()
                        .map(|d| restrict_deps_by_labels(&restrict_deps_by_key(d, k), &labels))
                        .collect(),
                );
                (Data::pair(pk, gk), state.clone())
            }
            CcImplVc => (state.clone(), state.clone()),
            CcImplLf => (state.field(1).clone(), state.clone()),
        }
    }

    /// At replica: may this get request be served? Guards never mutate state.
    pub fn get_guard(&self, k: Key, payload: &Data, c: ClientId, _r: ReplicaId, state: &ReplicaState) -> bool {
        if self.mutation == Some(Mutation::GetGuardAlwaysTrue) {
            return true;
        }
        use ProtocolName::*;
        match self.name {
            Relaxed | MwSpec | MwImpl => true,
            RywSpec => {
                let entry = state.store.lookup(k);
                let (c_orig, t_orig, prior) = (entry.field(1), entry.field(2), entry.field(3));
                // if the stored value is from the requesting client, his
                // puts on k must not be missed
                c_orig.as_nat() != c.0 || payload.is_subset(&prior.set_insert(t_orig.clone()))
            }
            RywImpl => {
                let entry = state.store.lookup(k);
                entry.field(1).as_nat() != c.0 || payload.as_nat() == entry.field(2).as_nat()
            }
            MrSpec => {
                let entry = state.store.lookup(k);
                let (c_orig, t_orig, prior) = (entry.field(1), entry.field(2), entry.field(3));
                let observed = restrict_ts_by_client(payload, ClientId(c_orig.as_nat()));
                let applied = restrict_ts_by_key(prior, k).set_insert(t_orig.clone());
                observed.is_subset(&applied)
            }
            MrImpl => {
                let entry = state.store.lookup(k);
                let c_orig = entry.field(1);
                payload.lookup_nat(c_orig) <= entry.field(2).as_nat()
            }
            RywMwImpl => {
                let entry = state.store.lookup(k);
                let (c_orig, applied) = (entry.field(1), entry.field(2));
                c_orig.as_nat() != c.0 || applied.lookup_nat(c_orig) == payload.as_nat()
            }
            CcSpec => {
                let entry = state.store.lookup(k);
                let (c_orig, t_orig, deps) = (entry.field(1), entry.field(2), entry.field(3));
                let view = restrict_deps_by_key(deps, k)
                    .set_insert(tup([c_orig.clone(), t_orig.clone(), nat(k.0)]));
                let (p, g) = (payload.field(0), payload.field(1));
                let not_behind = g.as_set().iter().all(|d| !view.is_strict_subset(d));
                let ryw = c_orig.as_nat() != c.0 || p.is_subset(&view);
                not_behind && ryw
            }
            LccSpec => {
                let labeling = self.labeling();
                let labels = labeling.client_labels(c);
                let entry = state.store.lookup(k);
                let (v_orig, c_orig, t_orig, deps) =
                    (entry.field(0), entry.field(1), entry.field(2), entry.field(3));
                let label = labeling.value_label(Value(v_orig.as_nat()));
                let view = restrict_deps_by_key(deps, k).set_insert(tup([
                    c_orig.clone(),
                    t_orig.clone(),
                    nat(k.0),
                    nat(label.0),
                ]));
                let view_l = restrict_deps_by_labels(&view, &labels);
                let (p, g) = (payload.field(0), payload.field(1));
                let not_behind = g.as_set().iter().all(|d| !view_l.is_strict_subset(d));
                let ryw = c_orig.as_nat() != c.0 || p.is_subset(&view);
                not_behind && ryw
            }
            CcImplVc => clock_leq(payload, &state.extra),
            CcImplLf => payload
                .as_list()
                .iter()
                .all(|e| state.extra.lookup_nat(e.field(0)) >= e.field(1).as_nat()),
        }
    }

    /// At replica: serves the get; returns `(value, response payload, state')`.
    pub fn get(&self, k: Key, _payload: &Data, _c: ClientId, _r: ReplicaId, state: &ReplicaState) -> (Value, Data, ReplicaState) {
        use ProtocolName::*;
        let entry = state.store.lookup(k);
        match self.name {
            Relaxed | CcImplVc => {
                let v = Value(entry.as_nat());
                let res = match self.name {
                    CcImplVc => state.extra.clone(),
                    _ => Data::Unit,
                };
                (v, res, state.clone())
            }
            RywSpec | RywImpl | MwSpec | MwImpl | RywMwImpl => {
                (Value(entry.field(0).as_nat()), Data::Unit, state.clone())
            }
            MrSpec | MrImpl => {
                let v = Value(entry.field(0).as_nat());
                // the stored put is returned as a dependency
                let res = tup([entry.field(1).clone(), entry.field(2).clone()]);
                (v, res, state.clone())
            }
            CcSpec | LccSpec => {
                let v = Value(entry.field(0).as_nat());
                let (c_orig, t_orig, deps) = (entry.field(1), entry.field(2), entry.field(3));
                let res = if c_orig.as_nat() != ClientId::INITIAL.0 {
                    let dep = match self.name {
                        LccSpec => tup([
                            c_orig.clone(),
                            t_orig.clone(),
                            nat(k.0),
                            nat(self.labeling().value_label(v).0),
                        ]),
                        _ => tup([c_orig.clone(), t_orig.clone(), nat(k.0)]),
                    };
                    deps.set_insert(dep)
                } else {
                    Data::empty_set()
                };
                (v, res, state.clone())
            }
            CcImplLf => {
                let v = Value(entry.field(2).as_nat());
                let res = tup([entry.field(0).clone(), entry.field(1).clone()]);
                (v, res, state.clone())
            }
        }
    }

    /// At client: folds the get response into the client state.
    pub fn get_res(&self, k: Key, _v: Value, payload: &Data, _c: ClientId, state: &Data) -> Data {
        use ProtocolName::*;
        match self.name {
            Relaxed | RywSpec | RywImpl | MwSpec | MwImpl | RywMwImpl => state.clone(),
            MrSpec => {
                let (p, d) = (state.field(0), state.field(1));
                let dep = tup([payload.field(0).clone(), payload.field(1).clone(), nat(k.0)]);
                Data::pair(p.clone(), d.set_insert(dep))
            }
            MrImpl => {
                // the response timestamp advances the per-(key, client)
                // dependency map; the session put timestamp is kept
                let (t_session, d) = (state.field(0), state.field(1));
                let map_key = tup([nat(k.0), payload.field(0).clone()]);
                let d2 = d.map_insert_nat(map_key, payload.field(1).as_nat());
                Data::pair(t_session.clone(), d2)
            }
            CcSpec | LccSpec => {
                let (p, g) = (state.field(0), state.field(1));
                Data::pair(p.clone(), g.set_insert(payload.clone()))
            }
            CcImplVc => clock_join(state, payload),
            CcImplLf => {
                let (t, d) = (state.field(0), state.field(1));
                Data::pair(t.clone(), d.list_push(payload.clone()))
            }
        }
    }

    // --- put path -----------------------------------------------------------

    /// At client: produces the put request payload; returns `(payload, state')`.
    pub fn put_req(&self, k: Key, v: Value, c: ClientId, state: &Data) -> (Data, Data) {
        use ProtocolName::*;
        match self.name {
            Relaxed => (Data::Unit, state.clone()),
            RywSpec => {
                let t = state.as_set().len() as u64 + 1;
                let payload = tup([nat(t), restrict_ts_by_key(state, k)]);
                (payload, state.set_insert(tup([nat(t), nat(k.0)])))
            }
            RywImpl => {
                let t = state.lookup_nat(&nat(k.0)) + 1;
                (nat(t), state.map_insert_nat(nat(k.0), t))
            }
            MrSpec => {
                let (p, d) = (state.field(0), state.field(1));
                let t = p.as_set().len() as u64 + 1;
                let payload = tup([nat(t), p.clone()]);
                let p2 = p.set_insert(tup([nat(t), nat(k.0)]));
                (payload, Data::pair(p2, d.clone()))
            }
            MrImpl => {
                let (t, d) = (state.field(0), state.field(1));
                let t2 = t.as_nat() + 1;
                (nat(t2), Data::pair(nat(t2), d.clone()))
            }
            MwSpec => {
                let t = state.as_set().len() as u64 + 1;
                let payload = tup([nat(t), restrict_ts_by_key(state, k)]);
                (payload, state.set_insert(tup([nat(t), nat(k.0)])))
            }
            MwImpl | RywMwImpl => {
                let t = state.lookup_nat(&nat(k.0));
                (nat(t), state.map_insert_nat(nat(k.0), t + 1))
            }
            CcSpec => {
                let (p, g) = (state.field(0), state.field(1));
                let t = p.as_set().len() as u64 + 1;
                let mut all = p.clone();
                for d in g.as_set() {
                    all = all.set_union(d);
                }
                let payload = tup([nat(t), all]);
                let p2 = p.set_insert(tup([nat(c.0), nat(t), nat(k.0)]));
                (payload, Data::pair(p2, g.clone()))
            }
            LccSpec => {
                let (p, g) = (state.field(0), state.field(1));
                let t = p.as_set().len() as u64 + 1;
                let mut all = p.clone();
                for d in g.as_set() {
                    all = all.set_union(d);
                }
                let payload = tup([nat(t), all]);
                let label = self.labeling().value_label(v);
                let p2 = p.set_insert(tup([nat(c.0), nat(t), nat(k.0), nat(label.0)]));
                (payload, Data::pair(p2, g.clone()))
            }
            CcImplVc => {
                let payload = state.clone();
                let own = state.lookup_nat(&nat(c.0));
                (payload, state.map_insert_nat(nat(c.0), own + 1))
            }
            CcImplLf => {
                let (t, d) = (state.field(0), state.field(1));
                let t2 = t.as_nat() + 1;
                let d2 = Data::List(alloc::vec![tup([nat(c.0), nat(t2)])]);
                (d.clone(), Data::pair(nat(t2), d2))
            }
        }
    }

    /// At replica: may this put request be applied?
    pub fn put_guard(&self, k: Key, v: Value, payload: &Data, c: ClientId, _r: ReplicaId, state: &ReplicaState) -> bool {
        if self.mutation == Some(Mutation::PutGuardAlwaysTrue) {
            return true;
        }
        use ProtocolName::*;
        match self.name {
            Relaxed | RywSpec | RywImpl | MrSpec | MrImpl => true,
            MwSpec => {
                let entry = state.store.lookup(k);
                let applied = restrict_ts_by_client(entry.field(1), c);
                payload.field(1).is_subset(&applied)
            }
            MwImpl => {
                let entry = state.store.lookup(k);
                entry.field(1).lookup_nat(&nat(c.0)) == payload.as_nat()
            }
            RywMwImpl => {
                let entry = state.store.lookup(k);
                entry.field(2).lookup_nat(&nat(c.0)) == payload.as_nat()
            }
            CcSpec => {
                let entry = state.store.lookup(k);
                let t = payload.field(0);
                !entry
                    .field(3)
                    .set_contains(&tup([nat(c.0), t.clone(), nat(k.0)]))
            }
            LccSpec => {
                let entry = state.store.lookup(k);
                let t = payload.field(0);
                let label = self.labeling().value_label(v);
                !entry
                    .field(3)
                    .set_contains(&tup([nat(c.0), t.clone(), nat(k.0), nat(label.0)]))
            }
            CcImplVc => {
                let r_clock = &state.extra;
                clock_leq(payload, r_clock)
                    && r_clock.lookup_nat(&nat(c.0)) == payload.lookup_nat(&nat(c.0))
            }
            CcImplLf => {
                let r_clock = &state.extra;
                let deps_ok = payload
                    .as_list()
                    .iter()
                    .all(|e| r_clock.lookup_nat(e.field(0)) >= e.field(1).as_nat());
                // lookup (c, d, 0): the largest ts for c in the dep list,
                // defaulting to 0 when absent
                let own = payload
                    .as_list()
                    .iter()
                    .filter(|e| e.field(0).as_nat() == c.0)
                    .map(|e| e.field(1).as_nat())
                    .max()
                    .unwrap_or(0);
                deps_ok && own == r_clock.lookup_nat(&nat(c.0))
            }
        }
    }

    /// At replica: applies the put.
    pub fn put(&self, k: Key, v: Value, payload: &Data, c: ClientId, _r: ReplicaId, state: &ReplicaState) -> ReplicaState {
        use ProtocolName::*;
        match self.name {
            Relaxed => ReplicaState {
                store: state.store.update(k, nat(v.0)),
                extra: state.extra.clone(),
            },
            RywSpec => {
                let (t, prior) = (payload.field(0), payload.field(1));
                let entry = tup([nat(v.0), nat(c.0), t.clone(), prior.clone()]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            RywImpl => {
                let entry = tup([nat(v.0), nat(c.0), payload.clone()]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            MrSpec => {
                let (t, p) = (payload.field(0), payload.field(1));
                let entry = tup([nat(v.0), nat(c.0), t.clone(), p.clone()]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            MrImpl => {
                let entry = tup([nat(v.0), nat(c.0), payload.clone()]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            MwSpec => {
                let t = payload.field(0);
                let old = state.store.lookup(k);
                let applied = old.field(1).set_insert(tup([nat(c.0), t.clone()]));
                let entry = tup([nat(v.0), applied]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            MwImpl => {
                let t = payload.as_nat();
                let old = state.store.lookup(k);
                let applied = old.field(1).map_insert_nat(nat(c.0), t + 1);
                let entry = tup([nat(v.0), applied]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            RywMwImpl => {
                let t = payload.as_nat();
                let old = state.store.lookup(k);
                let applied = old.field(2).map_insert_nat(nat(c.0), t + 1);
                let entry = tup([nat(v.0), nat(c.0), applied]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            CcSpec | LccSpec => {
                let (t, deps) = (payload.field(0), payload.field(1));
                let entry = tup([nat(v.0), nat(c.0), t.clone(), deps.clone()]);
                ReplicaState { store: state.store.update(k, entry), extra: state.extra.clone() }
            }
            CcImplVc => {
                let r_clock = &state.extra;
                let t = payload.lookup_nat(&nat(c.0)) + 1;
                ReplicaState {
                    store: state.store.update(k, nat(v.0)),
                    extra: r_clock.map_insert_nat(nat(c.0), t),
                }
            }
            CcImplLf => {
                let r_clock = &state.extra;
                let t = r_clock.lookup_nat(&nat(c.0)) + 1;
                let entry = tup([nat(c.0), nat(t), nat(v.0)]);
                ReplicaState {
                    store: state.store.update(k, entry),
                    extra: r_clock.map_insert_nat(nat(c.0), t),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proto(name: ProtocolName) -> ProtocolDefinition {
        let labeling = (name == ProtocolName::LccSpec).then(|| LabelingConfig::all_labels(2));
        make_protocol(name, StoreBackend::Tree, labeling).unwrap()
    }

    #[test]
    fn make_protocol_requires_labeling_for_lcc() {
        assert_eq!(
            make_protocol(ProtocolName::LccSpec, StoreBackend::Tree, None),
            Err(ProtocolError::MissingLabeling)
        );
    }

    #[test]
    fn relaxed_guards_always_pass() {
        let p = proto(ProtocolName::Relaxed);
        let rs = p.r_init(ReplicaId(1), Value(0));
        assert!(p.get_guard(Key(0), &Data::Unit, ClientId(1), ReplicaId(1), &rs));
        assert!(p.put_guard(Key(0), Value(1), &Data::Unit, ClientId(1), ReplicaId(1), &rs));
    }

    #[test]
    fn ryw_impl_guard_checks_own_origin_timestamp() {
        let p = proto(ProtocolName::RywImpl);
        let mut rs = p.r_init(ReplicaId(1), Value(0));
        // stored entry (v, c1, 3)
        rs = p.put(Key(0), Value(5), &Data::Nat(3), ClientId(1), ReplicaId(1), &rs);
        let g = |c: u64, t: u64| {
            p.get_guard(Key(0), &Data::Nat(t), ClientId(c), ReplicaId(1), &rs)
        };
        assert!(g(1, 3));
        assert!(!g(1, 2));
        assert!(g(2, 0));
        assert!(g(2, 7));
    }

    #[test]
    fn cc_impl_vc_put_guard_requires_satisfied_deps_and_cas() {
        let p = proto(ProtocolName::CcImplVc);
        let mut rs = p.r_init(ReplicaId(1), Value(0));
        // advance replica to received clock [c1 -> 2]
        let d0 = Data::empty_map();
        rs = p.put(Key(0), Value(1), &d0, ClientId(1), ReplicaId(1), &rs);
        let d1 = d0.map_insert_nat(Data::Nat(1), 1);
        rs = p.put(Key(0), Value(2), &d1, ClientId(1), ReplicaId(1), &rs);
        assert_eq!(rs.extra.lookup_nat(&Data::Nat(1)), 2);
        // c2 with payload d = [c1 -> 2]: r >= d and r(c2) = d(c2) = 0
        let d = Data::empty_map().map_insert_nat(Data::Nat(1), 2);
        assert!(p.put_guard(Key(1), Value(1), &d, ClientId(2), ReplicaId(1), &rs));
        // payload [c1 -> 2, c2 -> 1]: r(c2) = 0 != 1
        let d = d.map_insert_nat(Data::Nat(2), 1);
        assert!(!p.put_guard(Key(1), Value(1), &d, ClientId(2), ReplicaId(1), &rs));
    }

    #[test]
    fn cc_impl_vc_put_advances_only_writer_slot() {
        let p = proto(ProtocolName::CcImplVc);
        let rs = p.r_init(ReplicaId(1), Value(0));
        let d = Data::empty_map();
        let rs2 = p.put(Key(0), Value(1), &d, ClientId(1), ReplicaId(1), &rs);
        assert_eq!(rs2.extra.lookup_nat(&Data::Nat(1)), 1);
        assert_eq!(rs2.extra.lookup_nat(&Data::Nat(2)), 0);
    }

    #[test]
    fn mutation_forces_guard_true() {
        let p = proto(ProtocolName::RywImpl).with_mutation(Mutation::GetGuardAlwaysTrue);
        let mut rs = p.r_init(ReplicaId(1), Value(0));
        rs = p.put(Key(0), Value(5), &Data::Nat(3), ClientId(1), ReplicaId(1), &rs);
        assert!(p.get_guard(Key(0), &Data::Nat(2), ClientId(1), ReplicaId(1), &rs));
    }

    #[test]
    fn ryw_spec_replica_init_matches_figure() {
        let p = proto(ProtocolName::RywSpec);
        let rs = p.r_init(ReplicaId(1), Value(0));
        let entry = rs.store.lookup(Key(1));
        assert_eq!(
            entry,
            Data::Tuple(alloc::vec![
                Data::Nat(0),
                Data::Nat(0),
                Data::Nat(0),
                Data::empty_set()
            ])
        );
    }
}
