//! Nondeterministic operational semantics over a protocol definition.
//!
//! A world is the triple of client runtimes, replica states and an
//! in-flight message multiset. Five rules move it forward: clients issue
//! put/get requests (broadcast, one message per replica), replicas apply
//! puts and serve gets when the protocol guard passes, and a blocked
//! client consumes the first matching get response. Guard-false messages
//! stay pending; they are never dropped.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Data;
use crate::kernel::{
    Application, ApplicationError, ClientId, EventLabel, Key, Message, Program,
    ReplicaId, Statement, Value,
};
use crate::protocols::{ProtocolDefinition, ReplicaState};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClientRuntime {
    pub state: Data,
    pub program: Program,
}

/// World state. The network is a multiset: identical messages can be in
/// flight more than once.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct World {
    pub clients: BTreeMap<ClientId, ClientRuntime>,
    pub replicas: BTreeMap<ReplicaId, ReplicaState>,
    pub network: BTreeMap<Message, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorldError {
    App(ApplicationError),
    NoReplicas,
    DuplicateReplica(ReplicaId),
}

impl core::fmt::Display for WorldError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            WorldError::App(e) => write!(f, "{e}"),
            WorldError::NoReplicas => write!(f, "at least one replica is required"),
            WorldError::DuplicateReplica(r) => write!(f, "duplicate replica r{}", r.0),
        }
    }
}

/// One scheduler choice. Request rules name the acting client; delivery
/// rules name the consumed message (which fixes the replica or client).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Transition {
    GetReq { client: ClientId },
    PutReq { client: ClientId },
    Get { message: Message },
    GetRes { message: Message },
    Put { message: Message },
}

pub fn initial_world(
    protocol: &ProtocolDefinition,
    app: &Application,
    v0: Value,
    replicas: &[ReplicaId],
) -> Result<World, WorldError> {
    app.validate().map_err(WorldError::App)?;
    if replicas.is_empty() {
        return Err(WorldError::NoReplicas);
    }
    let mut replica_map = BTreeMap::new();
    for &r in replicas {
        if replica_map.insert(r, protocol.r_init(r, v0)).is_some() {
            return Err(WorldError::DuplicateReplica(r));
        }
    }
    let clients = app
        .0
        .iter()
        .map(|(&c, prog)| {
            let mut program = prog.clone();
            strip_leading_skips(&mut program);
            (c, ClientRuntime { state: protocol.c_init(c), program })
        })
        .collect();
    Ok(World { clients, replicas: replica_map, network: BTreeMap::new() })
}

fn strip_leading_skips(p: &mut Program) {
    while matches!(p.0.first(), Some(Statement::Skip)) {
        p.0.remove(0);
    }
}

/// Pops the head statement and skips past any explicit `Skip`s so the
/// head is always an actionable statement or absent.
fn advance(p: &mut Program) {
    p.0.remove(0);
    strip_leading_skips(p);
}

fn add_message(network: &mut BTreeMap<Message, u64>, m: Message) {
    *network.entry(m).or_insert(0) += 1;
}

fn remove_message(network: &mut BTreeMap<Message, u64>, m: &Message) {
    let n = network.get_mut(m).expect("consumed message not in network");
    *n -= 1;
    if *n == 0 {
        network.remove(m);
    }
}

/// All transitions enabled in `world`, in a deterministic order: request
/// rules by client id, then delivery rules by message order. Deliveries
/// whose guard is false are pending, not enabled.
pub fn enabled_transitions(protocol: &ProtocolDefinition, world: &World) -> Vec<Transition> {
    let mut out = Vec::new();
    for (&c, rt) in &world.clients {
        match rt.program.head() {
            Some(Statement::Put { .. }) => out.push(Transition::PutReq { client: c }),
            Some(Statement::Get { .. }) => out.push(Transition::GetReq { client: c }),
            _ => {}
        }
    }
    for m in world.network.keys() {
        match m {
            Message::GetReq { from, to, key, payload, .. } => {
                let rs = &world.replicas[to];
                if protocol.get_guard(*key, payload, *from, *to, rs) {
                    out.push(Transition::Get { message: m.clone() });
                }
            }
            Message::GetRes { to, op, .. } => {
                let rt = &world.clients[to];
                if matches!(rt.program.head(),
                    Some(Statement::BlockedGet { op: head_op, .. }) if head_op == op)
                {
                    out.push(Transition::GetRes { message: m.clone() });
                }
            }
            Message::PutReq { from, to, key, value, payload } => {
                let rs = &world.replicas[to];
                if protocol.put_guard(*key, *value, payload, *from, *to, rs) {
                    out.push(Transition::Put { message: m.clone() });
                }
            }
        }
    }
    out
}

/// Applies one transition, returning the successor world and the emitted
/// label. The transition must be enabled in `world`.
pub fn step(protocol: &ProtocolDefinition, world: &World, t: &Transition) -> (World, EventLabel) {
    let mut w = world.clone();
    let label = match t {
        Transition::PutReq { client } => {
            let rt = w.clients.get_mut(client).expect("unknown client");
            let (k, v) = match rt.program.head() {
                Some(Statement::Put { key, value, .. }) => (Key(key.value()), Value(value.value())),
                other => panic!("put-req on non-put head {other:?}"),
            };
            let (payload, state) = protocol.put_req(k, v, *client, &rt.state);
            rt.state = state;
            advance(&mut rt.program);
            for &r in world.replicas.keys() {
                add_message(&mut w.network, Message::PutReq {
                    from: *client,
                    to: r,
                    key: k,
                    value: v,
                    payload: payload.clone(),
                });
            }
            EventLabel::ClientPutReq { client: *client, key: k, value: v }
        }
        Transition::GetReq { client } => {
            let rt = w.clients.get_mut(client).expect("unknown client");
            let (op, var, k) = match rt.program.head() {
                Some(Statement::Get { op, var, key }) => (*op, *var, Key(key.value())),
                other => panic!("get-req on non-get head {other:?}"),
            };
            let (payload, state) = protocol.get_req(k, *client, &rt.state);
            rt.state = state;
            rt.program.0[0] = Statement::BlockedGet {
                op,
                var,
                key: crate::kernel::Operand::Lit(k.0),
            };
            for &r in world.replicas.keys() {
                add_message(&mut w.network, Message::GetReq {
                    from: *client,
                    to: r,
                    op,
                    key: k,
                    payload: payload.clone(),
                });
            }
            EventLabel::ClientGetReq { client: *client, op, key: k }
        }
        Transition::Get { message } => {
            let Message::GetReq { from, to, op, key, payload } = message else {
                panic!("get transition expects a get request message");
            };
            let rs = &world.replicas[to];
            debug_assert!(protocol.get_guard(*key, payload, *from, *to, rs));
            let (v, res_payload, rs2) = protocol.get(*key, payload, *from, *to, rs);
            w.replicas.insert(*to, rs2);
            remove_message(&mut w.network, message);
            add_message(&mut w.network, Message::GetRes {
                from: *to,
                to: *from,
                op: *op,
                key: *key,
                value: v,
                payload: res_payload,
            });
            EventLabel::ReplicaGetServe { replica: *to, op: *op, key: *key, value: v }
        }
        Transition::GetRes { message } => {
            let Message::GetRes { to, op, key, value, payload, .. } = message else {
                panic!("get-res transition expects a get response message");
            };
            let rt = w.clients.get_mut(to).expect("unknown client");
            let var = match rt.program.head() {
                Some(Statement::BlockedGet { op: head_op, var, .. }) if head_op == op => *var,
                other => panic!("get-res without matching blocked get, head {other:?}"),
            };
            rt.state = protocol.get_res(*key, *value, payload, *to, &rt.state);
            advance(&mut rt.program);
            rt.program.substitute(var, value.0);
            remove_message(&mut w.network, message);
            EventLabel::ClientGetRes { client: *to, op: *op, key: *key, value: *value }
        }
        Transition::Put { message } => {
            let Message::PutReq { from, to, key, value, payload } = message else {
                panic!("put transition expects a put request message");
            };
            let rs = &world.replicas[to];
            debug_assert!(protocol.put_guard(*key, *value, payload, *from, *to, rs));
            let rs2 = protocol.put(*key, *value, payload, *from, *to, rs);
            w.replicas.insert(*to, rs2);
            remove_message(&mut w.network, message);
            EventLabel::ReplicaPutApply { replica: *to, key: *key, value: *value }
        }
    };
    (w, label)
}

pub fn programs_done(world: &World) -> bool {
    world.clients.values().all(|rt| rt.program.is_done())
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: Vec<EventLabel>,
    pub world: World,
    /// No transition was enabled and every program finished. False when
    /// the step budget ran out or a client is stuck on a guard.
    pub quiescent: bool,
}

/// Seeded random run: picks uniformly among enabled transitions until the
/// world is stuck or `max_steps` transitions were taken.
pub fn run_random(
    protocol: &ProtocolDefinition,
    app: &Application,
    v0: Value,
    replicas: &[ReplicaId],
    seed: u64,
    max_steps: usize,
) -> Result<RunOutcome, WorldError> {
    let mut world = initial_world(protocol, app, v0, replicas)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::new();
    for _ in 0..max_steps {
        let enabled = enabled_transitions(protocol, &world);
        if enabled.is_empty() {
            break;
        }
        let pick = (rng.next_u64() % enabled.len() as u64) as usize;
        let (next, label) = step(protocol, &world, &enabled[pick]);
        world = next;
        history.push(label);
    }
    let quiescent = enabled_transitions(protocol, &world).is_empty() && programs_done(&world);
    Ok(RunOutcome { history, world, quiescent })
}

/// A node of the bounded-exhaustive exploration. `parent` points at the
/// predecessor node together with the index of the chosen transition in
/// its `enabled_transitions` list, so any node replays to a schedule.
#[derive(Debug, Clone)]
pub struct ExploreNode {
    pub world: World,
    pub ext: Vec<EventLabel>,
    pub history: Vec<EventLabel>,
    pub depth: usize,
    pub parent: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Exploration {
    pub nodes: Vec<ExploreNode>,
    /// Prefix-closed set of external histories seen within the bound.
    pub ext_histories: BTreeSet<Vec<EventLabel>>,
    /// Nodes with no enabled transition (stuck or finished worlds).
    pub stuck: Vec<usize>,
    /// True when some world at the depth bound still had enabled
    /// transitions, i.e. the state space was cut off.
    pub truncated: bool,
}

impl Exploration {
    /// Scheduler choices (transition indices) from the root to `node`.
    pub fn choices(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some((parent, idx)) = self.nodes[cur].parent {
            out.push(idx);
            cur = parent;
        }
        out.reverse();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExploreError {
    World(WorldError),
    /// The node cap was hit; `frontier` is the number of nodes reached.
    FrontierExceeded { frontier: usize },
}

impl core::fmt::Display for ExploreError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ExploreError::World(e) => write!(f, "{e}"),
            ExploreError::FrontierExceeded { frontier } => {
                write!(f, "exploration exceeded the node cap ({frontier} nodes reached)")
            }
        }
    }
}

/// Bounded-exhaustive breadth-first exploration up to `depth_bound`
/// transitions, deduplicating on (external history, world).
pub fn explore(
    protocol: &ProtocolDefinition,
    app: &Application,
    v0: Value,
    replicas: &[ReplicaId],
    depth_bound: usize,
    node_cap: usize,
) -> Result<Exploration, ExploreError> {
    let root_world = initial_world(protocol, app, v0, replicas).map_err(ExploreError::World)?;
    let mut nodes = Vec::new();
    let mut visited: BTreeSet<(Vec<EventLabel>, World)> = BTreeSet::new();
    let mut ext_histories = BTreeSet::new();
    let mut stuck = Vec::new();
    let mut truncated = false;

    visited.insert((Vec::new(), root_world.clone()));
    ext_histories.insert(Vec::new());
    nodes.push(ExploreNode {
        world: root_world,
        ext: Vec::new(),
        history: Vec::new(),
        depth: 0,
        parent: None,
    });

    let mut cursor = 0;
    while cursor < nodes.len() {
        let enabled = enabled_transitions(protocol, &nodes[cursor].world);
        if enabled.is_empty() {
            stuck.push(cursor);
            cursor += 1;
            continue;
        }
        if nodes[cursor].depth == depth_bound {
            truncated = true;
            cursor += 1;
            continue;
        }
        for (idx, t) in enabled.iter().enumerate() {
            let (world, label) = step(protocol, &nodes[cursor].world, t);
            let mut ext = nodes[cursor].ext.clone();
            if label.is_external() {
                ext.push(label.clone());
            }
            if !visited.insert((ext.clone(), world.clone())) {
                continue;
            }
            if nodes.len() >= node_cap {
                return Err(ExploreError::FrontierExceeded { frontier: nodes.len() + 1 });
            }
            let mut history = nodes[cursor].history.clone();
            history.push(label);
            ext_histories.insert(ext.clone());
            nodes.push(ExploreNode {
                world,
                ext,
                history,
                depth: nodes[cursor].depth + 1,
                parent: Some((cursor, idx)),
            });
        }
        cursor += 1;
    }

    Ok(Exploration { nodes, ext_histories, stuck, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ext_history, RawStatement};
    use crate::protocols::{make_protocol, ProtocolName, StoreBackend};
    use alloc::vec;

    fn proto(name: ProtocolName) -> ProtocolDefinition {
        make_protocol(name, StoreBackend::Tree, None).unwrap()
    }

    fn app(clients: &[(u64, &[RawStatement])]) -> Application {
        let map = clients
            .iter()
            .map(|(c, stmts)| (ClientId(*c), stmts.to_vec()))
            .collect();
        Application::from_statements(map).unwrap()
    }

    fn put(k: u64, v: u64) -> RawStatement {
        use crate::kernel::Operand::Lit;
        RawStatement::Put { key: Lit(k), value: Lit(v) }
    }

    fn get(x: u32, k: u64) -> RawStatement {
        RawStatement::Get { var: x, key: crate::kernel::Operand::Lit(k) }
    }

    // Hand-executed run: c1 puts then reads its write on one relaxed replica.
    #[test]
    fn relaxed_put_get_single_replica_runs_to_quiescence() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[put(0, 7), get(0, 0)])]);
        let mut w = initial_world(&p, &a, Value(0), &[ReplicaId(1)]).unwrap();
        let mut rendered = Vec::new();
        loop {
            let enabled = enabled_transitions(&p, &w);
            if enabled.is_empty() {
                break;
            }
            // deliveries are listed after client requests; preferring the
            // last enabled transition drains the network eagerly
            let (next, label) = step(&p, &w, enabled.last().unwrap());
            rendered.push(label.render());
            w = next;
        }
        assert_eq!(
            rendered,
            vec![
                "c1 > put(k0,7)",
                "r1 > put(k0,7)",
                "c1 > get#2(k0)",
                "r1 > get#c1.2(k0) : 7",
                "c1 > get#2(k0) : 7",
            ]
        );
        assert!(programs_done(&w));
        assert!(w.network.is_empty());
    }

    #[test]
    fn requests_broadcast_one_message_per_replica() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[put(0, 1)])]);
        let replicas = [ReplicaId(1), ReplicaId(2), ReplicaId(3)];
        let w = initial_world(&p, &a, Value(0), &replicas).unwrap();
        let enabled = enabled_transitions(&p, &w);
        let (w2, _) = step(&p, &w, &enabled[0]);
        assert_eq!(w2.network.values().sum::<u64>(), 3);
        assert_eq!(w2.network.len(), 3);
    }

    #[test]
    fn initial_world_rejects_bad_inputs() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[put(0, 1)])]);
        assert_eq!(
            initial_world(&p, &a, Value(0), &[]),
            Err(WorldError::NoReplicas)
        );
        assert_eq!(
            initial_world(&p, &a, Value(0), &[ReplicaId(1), ReplicaId(1)]),
            Err(WorldError::DuplicateReplica(ReplicaId(1)))
        );
        let bad = Application(
            [(ClientId(0), Program::default())].into_iter().collect(),
        );
        assert!(matches!(
            initial_world(&p, &bad, Value(0), &[ReplicaId(1)]),
            Err(WorldError::App(_))
        ));
    }

    // With two replicas a served get leaves the sibling request pending;
    // the spare response is undeliverable but the world still quiesces.
    #[test]
    fn spare_get_responses_do_not_block_quiescence() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[get(0, 0)])]);
        let out = run_random(&p, &a, Value(0), &[ReplicaId(1), ReplicaId(2)], 7, 100).unwrap();
        assert!(out.quiescent);
        assert!(programs_done(&out.world));
    }

    #[test]
    fn guard_false_requests_stay_pending() {
        // mw_impl put with a future timestamp: guard never passes
        let p = proto(ProtocolName::MwImpl);
        let a = app(&[(1, &[put(0, 1)])]);
        let w = initial_world(&p, &a, Value(0), &[ReplicaId(1)]).unwrap();
        let (w, _) = step(&p, &w, &Transition::PutReq { client: ClientId(1) });
        // sabotage: bump the client timestamp so a second put races ahead
        let msg = w.network.keys().next().unwrap().clone();
        let Message::PutReq { from, to, key, value, .. } = msg else { unreachable!() };
        let future = Message::PutReq { from, to, key, value, payload: Data::Nat(5) };
        let mut w2 = w.clone();
        remove_message(&mut w2.network, w.network.keys().next().unwrap());
        add_message(&mut w2.network, future.clone());
        assert!(enabled_transitions(&p, &w2).is_empty());
        assert_eq!(w2.network.len(), 1);
    }

    #[test]
    fn get_response_substitutes_into_later_statements() {
        // c1 reads k0 (initially 4) into x, then puts x at k1
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[get(0, 0), put(1, 99)])]);
        // rewrite the put to use the variable
        let mut a = a;
        let prog = a.0.get_mut(&ClientId(1)).unwrap();
        if let Statement::Put { value, .. } = &mut prog.0[1] {
            *value = crate::kernel::Operand::Var(0);
        }
        let out = run_random(&p, &a, Value(4), &[ReplicaId(1)], 3, 100).unwrap();
        assert!(out.quiescent);
        let entry = out.world.replicas[&ReplicaId(1)].store.lookup(Key(1));
        assert_eq!(entry, Data::Nat(4));
    }

    #[test]
    fn explore_collects_prefix_closed_ext_histories() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[put(0, 1), get(0, 0)])]);
        let ex = explore(&p, &a, Value(0), &[ReplicaId(1), ReplicaId(2)], 20, 100_000).unwrap();
        assert!(!ex.truncated);
        for h in &ex.ext_histories {
            for n in 0..h.len() {
                assert!(ex.ext_histories.contains(&h[..n].to_vec()));
            }
        }
        // both the initial value and the put are observable
        let complete: BTreeSet<_> = ex
            .ext_histories
            .iter()
            .filter(|h| h.len() == 2)
            .cloned()
            .collect();
        let mk = |v: u64| {
            vec![
                EventLabel::ClientPutReq { client: ClientId(1), key: Key(0), value: Value(1) },
                EventLabel::ClientGetRes {
                    client: ClientId(1),
                    op: OpIdOf(1, 2),
                    key: Key(0),
                    value: Value(v),
                },
            ]
        };
        assert!(complete.contains(&mk(0)));
        assert!(complete.contains(&mk(1)));
        assert_eq!(complete.len(), 2);
    }

    #[allow(non_snake_case)]
    fn OpIdOf(c: u64, seq: u64) -> crate::kernel::OpId {
        crate::kernel::OpId { client: ClientId(c), sequence: seq }
    }

    #[test]
    fn explore_truncates_and_reports_it() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[put(0, 1), put(0, 2)])]);
        let ex = explore(&p, &a, Value(0), &[ReplicaId(1)], 1, 100_000).unwrap();
        assert!(ex.truncated);
    }

    #[test]
    fn explore_node_cap_errors() {
        let p = proto(ProtocolName::Relaxed);
        let a = app(&[(1, &[put(0, 1), put(0, 2)]), (2, &[put(1, 1)])]);
        let err = explore(&p, &a, Value(0), &[ReplicaId(1), ReplicaId(2)], 20, 10);
        assert!(matches!(err, Err(ExploreError::FrontierExceeded { .. })));
    }

    #[test]
    fn explore_choices_replay_to_same_history() {
        let p = proto(ProtocolName::RywSpec);
        let a = app(&[(1, &[put(0, 1), get(0, 0)])]);
        let ex = explore(&p, &a, Value(0), &[ReplicaId(1), ReplicaId(2)], 20, 100_000).unwrap();
        let node = ex.nodes.len() - 1;
        let choices = ex.choices(node);
        let mut w = initial_world(&p, &a, Value(0), &[ReplicaId(1), ReplicaId(2)]).unwrap();
        let mut history = Vec::new();
        for idx in choices {
            let enabled = enabled_transitions(&p, &w);
            let (next, label) = step(&p, &w, &enabled[idx]);
            w = next;
            history.push(label);
        }
        assert_eq!(history, ex.nodes[node].history);
        assert_eq!(w, ex.nodes[node].world);
        assert_eq!(ext_history(&history), ex.nodes[node].ext);
    }

    // Random runs only produce ext histories the exhaustive exploration knows.
    #[test]
    fn random_runs_are_covered_by_exploration() {
        let p = proto(ProtocolName::CcImplVc);
        let a = app(&[(1, &[put(0, 1), get(0, 1)]), (2, &[put(1, 2)])]);
        let replicas = [ReplicaId(1), ReplicaId(2)];
        let ex = explore(&p, &a, Value(0), &replicas, 20, 1_000_000).unwrap();
        for seed in 0..20 {
            let out = run_random(&p, &a, Value(0), &replicas, seed, 20).unwrap();
            assert!(ex.ext_histories.contains(&ext_history(&out.history)));
        }
    }
}
