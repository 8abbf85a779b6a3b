//! Domain types shared by every module: identifiers, client programs,
//! transition labels, histories and the client-visible projection.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::data::Data;

/// Key drawn from a finite domain `[0, key_range)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(pub u64);

/// Value; the value domain contains the key domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Value(pub u64);

/// Client identifier. Id 0 is the phantom initial client `c0`: it owns the
/// initial store entries and never runs a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClientId(pub u64);

impl ClientId {
    pub const INITIAL: ClientId = ClientId(0);

    pub fn is_initial(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReplicaId(pub u64);

/// Unique operation identifier: a per-client counter starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId {
    pub client: ClientId,
    pub sequence: u64,
}

/// Logical put timestamp; 0 means "no put yet".
pub type Timestamp = u64;

/// Topic label for the labeled causal consistency spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicLabel(pub u64);

/// Key/value position in a statement: a literal or a variable bound by an
/// earlier `Get` in the same program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Lit(u64),
    Var(u32),
}

impl Operand {
    /// Literal value; panics if the variable is still unbound at execution
    /// time (programs are validated against this).
    pub fn value(self) -> u64 {
        match self {
            Operand::Lit(v) => v,
            Operand::Var(x) => panic!("unbound variable x{x} reached execution"),
        }
    }
}

/// Program statement. `BlockedGet` is runtime-only syntax: it marks a get
/// whose response is outstanding and pins the head of the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Statement {
    Put { op: OpId, key: Operand, value: Operand },
    Get { op: OpId, var: u32, key: Operand },
    BlockedGet { op: OpId, var: u32, key: Operand },
    Skip,
}

/// A finite statement sequence, consumed from the front.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Program(pub Vec<Statement>);

impl Program {
    pub fn head(&self) -> Option<&Statement> {
        self.0.first()
    }

    /// A program is done once only `Skip` remains.
    pub fn is_done(&self) -> bool {
        self.0.iter().all(|s| matches!(s, Statement::Skip))
    }

    /// Substitutes `v` for variable `x` in every remaining statement.
    pub fn substitute(&mut self, x: u32, v: u64) {
        for s in &mut self.0 {
            let subst = |o: &mut Operand| {
                if *o == Operand::Var(x) {
                    *o = Operand::Lit(v);
                }
            };
            match s {
                Statement::Put { key, value, .. } => {
                    subst(key);
                    subst(value);
                }
                Statement::Get { key, .. } | Statement::BlockedGet { key, .. } => subst(key),
                Statement::Skip => {}
            }
        }
    }
}

/// Map from real clients (never `c0`) to their programs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Application(pub BTreeMap<ClientId, Program>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplicationError {
    ReservedClient,
    DuplicateOpId(OpId),
    UnboundVariable { client: ClientId, var: u32 },
    BlockedGetInSource { client: ClientId },
}

impl fmt::Display for ApplicationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApplicationError::ReservedClient => {
                write!(f, "client id 0 is reserved for the initial client")
            }
            ApplicationError::DuplicateOpId(op) => {
                write!(f, "duplicate op id {}#{}", op.client.0, op.sequence)
            }
            ApplicationError::UnboundVariable { client, var } => {
                write!(f, "client c{} uses unbound variable x{}", client.0, var)
            }
            ApplicationError::BlockedGetInSource { client } => {
                write!(f, "client c{} contains a blocked get in source", client.0)
            }
        }
    }
}

impl Application {
    /// Builds an application from per-client statement skeletons, assigning
    /// op ids as a per-client counter starting at 1.
    pub fn from_statements(
        programs: BTreeMap<ClientId, Vec<RawStatement>>,
    ) -> Result<Application, ApplicationError> {
        let mut app = BTreeMap::new();
        for (client, raw) in programs {
            if client.is_initial() {
                return Err(ApplicationError::ReservedClient);
            }
            let mut seq = 0u64;
            let mut bound: Vec<u32> = Vec::new();
            let mut stmts = Vec::with_capacity(raw.len());
            for r in raw {
                seq += 1;
                let op = OpId { client, sequence: seq };
                match r {
                    RawStatement::Put { key, value } => {
                        for o in [key, value] {
                            if let Operand::Var(x) = o {
                                if !bound.contains(&x) {
                                    return Err(ApplicationError::UnboundVariable {
                                        client,
                                        var: x,
                                    });
                                }
                            }
                        }
                        stmts.push(Statement::Put { op, key, value });
                    }
                    RawStatement::Get { var, key } => {
                        if let Operand::Var(x) = key {
                            if !bound.contains(&x) {
                                return Err(ApplicationError::UnboundVariable { client, var: x });
                            }
                        }
                        bound.push(var);
                        stmts.push(Statement::Get { op, var, key });
                    }
                    RawStatement::Skip => stmts.push(Statement::Skip),
                }
            }
            app.insert(client, Program(stmts));
        }
        Ok(Application(app))
    }

    /// Validates an already-assembled application.
    pub fn validate(&self) -> Result<(), ApplicationError> {
        let mut seen = alloc::collections::BTreeSet::new();
        for (client, prog) in &self.0 {
            if client.is_initial() {
                return Err(ApplicationError::ReservedClient);
            }
            for s in &prog.0 {
                match s {
                    Statement::BlockedGet { .. } => {
                        return Err(ApplicationError::BlockedGetInSource { client: *client })
                    }
                    Statement::Put { op, .. } | Statement::Get { op, .. } => {
                        if !seen.insert(*op) {
                            return Err(ApplicationError::DuplicateOpId(*op));
                        }
                    }
                    Statement::Skip => {}
                }
            }
        }
        Ok(())
    }
}

/// Source-level statement before op-id assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawStatement {
    Put { key: Operand, value: Operand },
    Get { var: u32, key: Operand },
    Skip,
}

/// The five transition label shapes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventLabel {
    ClientGetReq { client: ClientId, op: OpId, key: Key },
    ReplicaGetServe { replica: ReplicaId, op: OpId, key: Key, value: Value },
    ClientGetRes { client: ClientId, op: OpId, key: Key, value: Value },
    ClientPutReq { client: ClientId, key: Key, value: Value },
    ReplicaPutApply { replica: ReplicaId, key: Key, value: Value },
}

impl EventLabel {
    /// Client-visible labels: get responses and put requests.
    pub fn is_external(&self) -> bool {
        matches!(
            self,
            EventLabel::ClientGetRes { .. } | EventLabel::ClientPutReq { .. }
        )
    }

    /// Canonical one-line text rendering, stable across runs.
    pub fn render(&self) -> String {
        match self {
            EventLabel::ClientGetReq { client, op, key } => {
                format!("c{} > get#{}(k{})", client.0, op.sequence, key.0)
            }
            EventLabel::ReplicaGetServe { replica, op, key, value } => {
                format!(
                    "r{} > get#c{}.{}(k{}) : {}",
                    replica.0, op.client.0, op.sequence, key.0, value.0
                )
            }
            EventLabel::ClientGetRes { client, op, key, value } => {
                format!("c{} > get#{}(k{}) : {}", client.0, op.sequence, key.0, value.0)
            }
            EventLabel::ClientPutReq { client, key, value } => {
                format!("c{} > put(k{},{})", client.0, key.0, value.0)
            }
            EventLabel::ReplicaPutApply { replica, key, value } => {
                format!("r{} > put(k{},{})", replica.0, key.0, value.0)
            }
        }
    }
}

pub type History = Vec<EventLabel>;
pub type ExternalHistory = Vec<EventLabel>;

/// Projection of a history onto its client-visible labels, order preserved.
pub fn ext_history(h: &[EventLabel]) -> ExternalHistory {
    h.iter().filter(|l| l.is_external()).cloned().collect()
}

/// Renders a history as canonical text, one label per line.
pub fn render_history(h: &[EventLabel]) -> String {
    let mut out = String::new();
    for l in h {
        out.push_str(&l.render());
        out.push('\n');
    }
    out
}

/// Network message. Payloads are protocol-owned [`Data`] values; the
/// kernel only needs their equality and ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    GetReq { from: ClientId, to: ReplicaId, op: OpId, key: Key, payload: Data },
    GetRes { from: ReplicaId, to: ClientId, op: OpId, key: Key, value: Value, payload: Data },
    PutReq { from: ClientId, to: ReplicaId, key: Key, value: Value, payload: Data },
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn put_label(c: u64, k: u64, v: u64) -> EventLabel {
        EventLabel::ClientPutReq {
            client: ClientId(c),
            key: Key(k),
            value: Value(v),
        }
    }

    #[test]
    fn ext_filters_client_side_labels_only() {
        assert_eq!(ext_history(&[]), vec![]);
        let h = vec![
            put_label(1, 0, 7),
            EventLabel::ReplicaPutApply { replica: ReplicaId(1), key: Key(0), value: Value(7) },
        ];
        assert_eq!(ext_history(&h), vec![put_label(1, 0, 7)]);
    }

    #[test]
    fn ext_is_idempotent_and_order_preserving() {
        let h = vec![
            EventLabel::ClientGetReq {
                client: ClientId(1),
                op: OpId { client: ClientId(1), sequence: 1 },
                key: Key(0),
            },
            put_label(2, 1, 3),
            EventLabel::ClientGetRes {
                client: ClientId(1),
                op: OpId { client: ClientId(1), sequence: 1 },
                key: Key(0),
                value: Value(0),
            },
        ];
        let e = ext_history(&h);
        assert_eq!(ext_history(&e), e);
        assert_eq!(e.len(), 2);
        // same relative order as in h
        assert_eq!(e[0], h[1]);
        assert_eq!(e[1], h[2]);
    }

    #[test]
    fn canonical_rendering() {
        assert_eq!(put_label(1, 0, 7).render(), "c1 > put(k0,7)");
        let res = EventLabel::ClientGetRes {
            client: ClientId(1),
            op: OpId { client: ClientId(1), sequence: 3 },
            key: Key(0),
            value: Value(7),
        };
        assert_eq!(res.render(), "c1 > get#3(k0) : 7");
    }

    #[test]
    fn substitution_binds_into_continuation() {
        let op = OpId { client: ClientId(1), sequence: 1 };
        let mut p = Program(vec![
            Statement::Put { op, key: Operand::Var(0), value: Operand::Var(0) },
            Statement::Get { op, var: 1, key: Operand::Var(0) },
        ]);
        p.substitute(0, 7);
        assert_eq!(
            p.0[0],
            Statement::Put { op, key: Operand::Lit(7), value: Operand::Lit(7) }
        );
        assert_eq!(p.0[1], Statement::Get { op, var: 1, key: Operand::Lit(7) });
    }

    #[test]
    fn application_rejects_reserved_client() {
        let mut m = BTreeMap::new();
        m.insert(ClientId(0), vec![RawStatement::Skip]);
        assert_eq!(
            Application::from_statements(m),
            Err(ApplicationError::ReservedClient)
        );
    }

    #[test]
    fn application_rejects_unbound_variable() {
        let mut m = BTreeMap::new();
        m.insert(
            ClientId(1),
            vec![RawStatement::Put { key: Operand::Var(0), value: Operand::Lit(1) }],
        );
        assert!(matches!(
            Application::from_statements(m),
            Err(ApplicationError::UnboundVariable { .. })
        ));
    }
}
