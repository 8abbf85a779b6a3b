//! Bounded trace-inclusion and convergence checking, and the hierarchy
//! runner that validates every refinement arrow over a fixed battery of
//! applications.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::kernel::{
    Application, ClientId, EventLabel, Key, Operand, RawStatement, ReplicaId, Statement, Value,
};
use crate::protocols::{
    make_protocol, LabelingConfig, ProtocolDefinition, ProtocolName, StoreBackend,
};
use crate::semantics::{explore, ExploreError, Exploration};

/// Desk-scale exploration sizes. Clients are `c1..cN`, replicas `r1..rN`,
/// keys `k0..k(K-1)`, values `0..V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domains {
    pub clients: u64,
    pub replicas: u64,
    pub keys: u64,
    pub values: u64,
}

impl Default for Domains {
    fn default() -> Domains {
        Domains { clients: 2, replicas: 2, keys: 2, values: 3 }
    }
}

impl Domains {
    pub fn replica_ids(&self) -> Vec<ReplicaId> {
        (1..=self.replicas).map(ReplicaId).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub ext: Vec<EventLabel>,
    /// Scheduler choices reproducing the counterexample: indices into
    /// `enabled_transitions` at each step from the initial world.
    pub choices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
    pub bound: usize,
    /// True when exploration was cut off by the bound; `holds` then means
    /// "no violation found within the bound", not proof.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HierarchyEdge {
    pub lower: ProtocolName,
    pub upper: ProtocolName,
}

/// The thirteen refinement arrows.
pub fn hierarchy_edges() -> Vec<HierarchyEdge> {
    use ProtocolName::*;
    [
        (CcImplVc, CcSpec),
        (CcImplLf, CcSpec),
        (RywMwImpl, RywSpec),
        (RywMwImpl, MwSpec),
        (CcSpec, RywSpec),
        (CcSpec, MrSpec),
        (CcSpec, LccSpec),
        (RywImpl, RywSpec),
        (MrImpl, MrSpec),
        (MwImpl, MwSpec),
        (RywSpec, Relaxed),
        (MwSpec, Relaxed),
        (MrSpec, Relaxed),
    ]
    .into_iter()
    .map(|(lower, upper)| HierarchyEdge { lower, upper })
    .collect()
}

/// Exploration node cap shared by all checks.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

const V0: Value = Value(0);

fn run_explore(
    protocol: &ProtocolDefinition,
    app: &Application,
    replicas: &[ReplicaId],
    bound: usize,
) -> Result<Exploration, ExploreError> {
    explore(protocol, app, V0, replicas, bound, DEFAULT_NODE_CAP)
}

/// `imp ⊑ spec` within the bound: every external history the
/// implementation can produce is also producible by the specification.
pub fn check_trace_inclusion(
    imp: &ProtocolDefinition,
    spec: &ProtocolDefinition,
    app: &Application,
    replicas: &[ReplicaId],
    step_bound: usize,
) -> Result<Verdict, ExploreError> {
    let imp_ex = run_explore(imp, app, replicas, step_bound)?;
    let spec_ex = run_explore(spec, app, replicas, step_bound)?;
    Ok(trace_inclusion_of(&imp_ex, &spec_ex, step_bound))
}

/// Inclusion over already-computed explorations (lets the hierarchy
/// runner reuse one exploration per protocol).
pub fn trace_inclusion_of(imp: &Exploration, spec: &Exploration, bound: usize) -> Verdict {
    let witness = imp
        .ext_histories
        .difference(&spec.ext_histories)
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let counterexample = witness.map(|ext| {
        // BFS order: the first node carrying this ext history is shortest
        let node = imp
            .nodes
            .iter()
            .position(|n| &n.ext == ext)
            .expect("ext history without a node");
        Counterexample { ext: ext.clone(), choices: imp.choices(node) }
    });
    Verdict {
        holds: counterexample.is_none(),
        counterexample,
        bound,
        truncated: imp.truncated || spec.truncated,
    }
}

/// Keys a convergence check quantifies over: every literal key in the
/// application plus every key some replica's store deviates on.
fn key_universe(app: &Application, ex: &Exploration) -> Vec<Key> {
    let mut keys = alloc::collections::BTreeSet::new();
    for prog in app.0.values() {
        for s in &prog.0 {
            let key = match s {
                Statement::Put { key, .. }
                | Statement::Get { key, .. }
                | Statement::BlockedGet { key, .. } => Some(key),
                Statement::Skip => None,
            };
            if let Some(Operand::Lit(k)) = key {
                keys.insert(Key(*k));
            }
        }
    }
    for node in &ex.nodes {
        for rs in node.world.replicas.values() {
            keys.extend(rs.store.canonical().keys().copied());
        }
    }
    keys.into_iter().collect()
}

/// Convergence at the bound: in every reachable world with an empty
/// network, any get a client could issue is either served with one value
/// by every replica or admitted by none. Payloads are restricted to those
/// the client-side get-req actually emits from that world's client state.
pub fn check_convergence(
    imp: &ProtocolDefinition,
    app: &Application,
    replicas: &[ReplicaId],
    step_bound: usize,
) -> Result<Verdict, ExploreError> {
    let ex = run_explore(imp, app, replicas, step_bound)?;
    let keys = key_universe(app, &ex);
    for (idx, node) in ex.nodes.iter().enumerate() {
        if !node.world.network.is_empty() {
            continue;
        }
        for (&c, rt) in &node.world.clients {
            for &k in &keys {
                let (payload, _) = imp.get_req(k, c, &rt.state);
                let mut answers = Vec::new();
                for (&r, rs) in &node.world.replicas {
                    let v = imp
                        .get_guard(k, &payload, c, r, rs)
                        .then(|| imp.get(k, &payload, c, r, rs).0);
                    answers.push(v);
                }
                let diverged = answers.iter().any(Option::is_some)
                    && answers.windows(2).any(|w| w[0] != w[1]);
                if diverged {
                    return Ok(Verdict {
                        holds: false,
                        counterexample: Some(Counterexample {
                            ext: node.ext.clone(),
                            choices: ex.choices(idx),
                        }),
                        bound: step_bound,
                        truncated: ex.truncated,
                    });
                }
            }
        }
    }
    Ok(Verdict { holds: true, counterexample: None, bound: step_bound, truncated: ex.truncated })
}

// --- application battery ---------------------------------------------------

fn build_app(clients: &[(u64, Vec<RawStatement>)]) -> Application {
    Application::from_statements(
        clients
            .iter()
            .map(|(c, stmts)| (ClientId(*c), stmts.clone()))
            .collect(),
    )
    .expect("battery applications are valid")
}

fn rput(k: u64, v: u64) -> RawStatement {
    RawStatement::Put { key: Operand::Lit(k), value: Operand::Lit(v) }
}

fn rget(x: u32, k: u64) -> RawStatement {
    RawStatement::Get { var: x, key: Operand::Lit(k) }
}

/// The named application battery the hierarchy runner checks each edge
/// against. All four finish well inside the default step bound.
pub fn battery() -> Vec<(&'static str, Application)> {
    alloc::vec![
        // one client, two keys: totally ordered writes
        ("single_writer", build_app(&[(1, alloc::vec![rput(0, 1), rput(1, 2)])])),
        // two same-key writes then a read back; separates relaxed reads
        // of the overwritten value from session-guarded ones
        ("read_own_write", build_app(&[(1, alloc::vec![rput(0, 1), rput(0, 2), rget(0, 0)])])),
        // a second client reads the first client's writes twice
        (
            "cross_client_read",
            build_app(&[
                (1, alloc::vec![rput(0, 1), rput(0, 2)]),
                (2, alloc::vec![rget(0, 0), rget(1, 0)]),
            ]),
        ),
        // racing writers on one key; the classic divergence scenario
        (
            "concurrent_writers",
            build_app(&[(1, alloc::vec![rput(0, 1)]), (2, alloc::vec![rput(0, 2)])]),
        ),
    ]
}

/// Default protocol instance used by the hierarchy runner: tree-backed
/// store, all-labels labeling for the labeled causal spec.
pub fn default_protocol(name: ProtocolName, domains: &Domains) -> ProtocolDefinition {
    let labeling =
        (name == ProtocolName::LccSpec).then(|| LabelingConfig::all_labels(domains.values));
    make_protocol(name, StoreBackend::Tree, labeling).expect("default labeling is supplied")
}

#[derive(Debug, Clone)]
pub struct HierarchyLine {
    pub edge: HierarchyEdge,
    pub app: String,
    pub verdict: Verdict,
}

/// Checks all thirteen edges against the battery. One exploration is run
/// per (protocol, application) pair and shared across edges.
pub fn check_hierarchy(
    domains: &Domains,
    step_bound: usize,
) -> Result<Vec<HierarchyLine>, ExploreError> {
    let replicas = domains.replica_ids();
    let apps = battery();
    let mut cache: BTreeMap<(ProtocolName, usize), Exploration> = BTreeMap::new();
    let mut explored = |name: ProtocolName, app_idx: usize, app: &Application| {
        if let Some(ex) = cache.get(&(name, app_idx)) {
            return Ok(ex.clone());
        }
        let proto = default_protocol(name, domains);
        let ex = run_explore(&proto, app, &replicas, step_bound)?;
        cache.insert((name, app_idx), ex.clone());
        Ok(ex)
    };
    let mut report = Vec::new();
    for edge in hierarchy_edges() {
        for (idx, (app_name, app)) in apps.iter().enumerate() {
            let imp_ex = explored(edge.lower, idx, app)?;
            let spec_ex = explored(edge.upper, idx, app)?;
            report.push(HierarchyLine {
                edge,
                app: String::from(*app_name),
                verdict: trace_inclusion_of(&imp_ex, &spec_ex, step_bound),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{enabled_transitions, initial_world, step};

    fn proto(name: ProtocolName) -> ProtocolDefinition {
        default_protocol(name, &Domains::default())
    }

    fn two_replicas() -> Vec<ReplicaId> {
        alloc::vec![ReplicaId(1), ReplicaId(2)]
    }

    #[test]
    fn trace_inclusion_is_reflexive() {
        let p = proto(ProtocolName::Relaxed);
        let (_, app) = &battery()[1];
        let v = check_trace_inclusion(&p, &p, app, &two_replicas(), 12).unwrap();
        assert!(v.holds);
        assert!(v.counterexample.is_none());
    }

    // A relaxed replica can still answer the overwritten first value; the
    // session-guarded spec never admits it.
    #[test]
    fn relaxed_violates_ryw_spec_on_read_own_write() {
        let relaxed = proto(ProtocolName::Relaxed);
        let ryw = proto(ProtocolName::RywSpec);
        let (_, app) = &battery()[1];
        let v = check_trace_inclusion(&relaxed, &ryw, app, &two_replicas(), 20).unwrap();
        assert!(!v.holds);
        let ce = v.counterexample.unwrap();
        let rendered: Vec<_> = ce.ext.iter().map(|l| l.render()).collect();
        assert_eq!(
            rendered,
            alloc::vec!["c1 > put(k0,1)", "c1 > put(k0,2)", "c1 > get#3(k0) : 1"]
        );
        // replaying the recorded choices reproduces the counterexample
        let mut w = initial_world(&relaxed, app, Value(0), &two_replicas()).unwrap();
        let mut history = alloc::vec::Vec::new();
        for idx in ce.choices {
            let enabled = enabled_transitions(&relaxed, &w);
            let (next, label) = step(&relaxed, &w, &enabled[idx]);
            w = next;
            history.push(label);
        }
        assert_eq!(crate::kernel::ext_history(&history), ce.ext);
    }

    #[test]
    fn ryw_impl_refines_ryw_spec_on_battery() {
        let imp = proto(ProtocolName::RywImpl);
        let spec = proto(ProtocolName::RywSpec);
        for (name, app) in battery() {
            let v = check_trace_inclusion(&imp, &spec, &app, &two_replicas(), 16).unwrap();
            assert!(v.holds, "violation under {name}");
        }
    }

    #[test]
    fn mutated_ryw_impl_breaks_its_edge() {
        let imp = proto(ProtocolName::RywImpl)
            .with_mutation(crate::protocols::Mutation::GetGuardAlwaysTrue);
        let spec = proto(ProtocolName::RywSpec);
        let (_, app) = &battery()[1];
        let v = check_trace_inclusion(&imp, &spec, app, &two_replicas(), 20).unwrap();
        assert!(!v.holds);
    }

    #[test]
    fn relaxed_diverges_under_concurrent_writers() {
        let p = proto(ProtocolName::Relaxed);
        let (_, app) = &battery()[3];
        let v = check_convergence(&p, app, &two_replicas(), 20).unwrap();
        assert!(!v.holds);
        assert!(v.counterexample.is_some());
    }

    #[test]
    fn single_writer_converges_everywhere() {
        let (_, app) = &battery()[0];
        for name in ProtocolName::ALL {
            let p = proto(name);
            let v = check_convergence(&p, app, &two_replicas(), 20).unwrap();
            assert!(v.holds, "{} diverged", name.name());
        }
    }

    #[test]
    fn empty_app_converges_vacuously() {
        let p = proto(ProtocolName::Relaxed);
        let app = Application::default();
        let v = check_convergence(&p, &app, &two_replicas(), 20).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn bound_zero_inclusion_holds_trivially() {
        let imp = proto(ProtocolName::Relaxed);
        let spec = proto(ProtocolName::CcSpec);
        let (_, app) = &battery()[2];
        let v = check_trace_inclusion(&imp, &spec, app, &two_replicas(), 0).unwrap();
        assert!(v.holds);
        assert!(v.truncated);
    }

    #[test]
    fn edge_list_matches_the_diagram() {
        let edges = hierarchy_edges();
        assert_eq!(edges.len(), 13);
        // every lower protocol refines something; relaxed only appears as
        // an upper bound
        assert!(edges.iter().all(|e| e.lower != ProtocolName::Relaxed));
    }
}
